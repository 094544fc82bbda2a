use rayon::prelude::*;

use super::{compute_coefficients, CoeffTable, KernelSpec, DEFAULT_QUAD_LEVEL};
use crate::error::Result;
use crate::raster::{EdgeMap, GrayImage, PaddedImage};

/// Applies the discrete nonlocal Laplacian
/// `sum_pq c_pq (I[i+p,j+q] + I[i-p,j+q] + I[i+p,j-q] + I[i-p,j-q] - 4 I[i,j])`
/// with a mirrored halo of width `delta`.
///
/// Halos wider than the image fold back repeatedly, so any image size works.
pub fn apply_nonlocal_laplacian(img: &GrayImage, table: &CoeffTable) -> GrayImage {
    let delta = table.delta();
    let padded = PaddedImage::build(img, delta);
    let entries = table.entries();
    let width = img.width();
    let halo = delta as isize;

    let mut out = vec![0.0; img.len()];
    out.par_chunks_mut(width).enumerate().for_each(|(i, row_out)| {
        let i = i as isize;
        let centre = padded.padded_row(i);
        for (j, slot) in row_out.iter_mut().enumerate() {
            let jc = j as isize + halo;
            let v = centre[jc as usize];
            let mut acc = 0.0;
            for &(p, q, c) in &entries {
                let (p, q) = (p as isize, q as isize);
                let up = padded.padded_row(i - p);
                let down = padded.padded_row(i + p);
                let (l, r) = ((jc - q) as usize, (jc + q) as usize);
                acc += c * ((down[r] - v) + (up[r] - v) + (down[l] - v) + (up[l] - v));
            }
            *slot = acc;
        }
    });
    GrayImage::new(img.width(), img.height(), out).expect("dimensions preserved")
}

/// Thresholds the nonlocal Laplacian: a pixel is an edge iff its response is
/// at least `sigma`.
pub fn detect_edges_with_table(img: &GrayImage, table: &CoeffTable, sigma: f64) -> EdgeMap {
    apply_nonlocal_laplacian(img, table).threshold(sigma)
}

/// [`detect_edges_with_table`] with a freshly computed table.
pub fn detect_edges(img: &GrayImage, spec: &KernelSpec, sigma: f64) -> Result<EdgeMap> {
    let table = compute_coefficients(spec, DEFAULT_QUAD_LEVEL)?;
    Ok(detect_edges_with_table(img, &table, sigma))
}
