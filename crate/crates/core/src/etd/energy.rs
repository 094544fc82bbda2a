use rayon::prelude::*;

use super::{heaviside_reg, potential, FittingField, SolverParams};
use crate::error::{ensure_arg, Result};
use crate::quadrature::compensated_sum;
use crate::raster::GrayImage;

/// `-U^T D_h U`: the sum of squared differences over 4-adjacent pixel pairs.
///
/// With mirrored ghost cells the boundary differences vanish, so this is
/// exactly the quadratic form of the solver's Laplacian.
pub fn dirichlet_form(u: &GrayImage) -> f64 {
    let h = u.height();
    let rows: Vec<f64> = (0..h)
        .into_par_iter()
        .map(|r| {
            let row = u.row(r);
            let horiz = row.windows(2).map(|p| (p[1] - p[0]).powi(2));
            let vert = (r + 1 < h)
                .then(|| u.row(r + 1))
                .into_iter()
                .flat_map(|next| row.iter().zip(next).map(|(a, b)| (b - a).powi(2)));
            compensated_sum(horiz.chain(vert))
        })
        .collect();
    compensated_sum(rows)
}

/// Energy from the fitting field: the fitting density is
/// `f H(U - 1/2) + lambda2 (C2 - I)^2`, whose sum is `sum f H + offset`.
pub fn energy_with_fitting(u: &GrayImage, f: &FittingField, params: &SolverParams) -> Result<f64> {
    ensure_arg!(u.dims() == f.dims(), "field and fitting field dimensions differ");
    let eps = params.epsilon;
    let bulk: Vec<f64> = u
        .data()
        .par_chunks(u.width())
        .zip(f.coefficient().data().par_chunks(u.width()))
        .map(|(ur, fr)| {
            compensated_sum(ur.iter().zip(fr).map(|(&u, &f)| {
                potential(u) / eps + f * heaviside_reg(u - 0.5, params.epsilon1)
            }))
        })
        .collect();
    Ok(compensated_sum(bulk) + f.offset() + eps * dirichlet_form(u))
}

/// Discrete Chan-Vese/Allen-Cahn energy
/// `sum [W(U)/eps + F(U)] - eps U^T D_h U` with
/// `F = lambda1 (C1 - I)^2 H(U - 1/2) + lambda2 (C2 - I)^2 (1 - H(U - 1/2))`.
pub fn discrete_energy(
    u: &GrayImage,
    c1: f64,
    c2: f64,
    image: &GrayImage,
    params: &SolverParams,
) -> Result<f64> {
    u.check_same_dims(image)?;
    let f = FittingField::new(image, c1, c2, params.lambda1, params.lambda2);
    energy_with_fitting(u, &f, params)
}
