use acseg::metrics::{mask_metrics, seg_error};
use acseg::raster::{EdgeMap, GrayImage};
use proptest::prelude::*;

fn mask(w: usize, h: usize) -> impl Strategy<Value = EdgeMap> {
    prop::collection::vec(0u8..=1, w * h).prop_map(move |bits| EdgeMap::from_bits(w, h, bits).unwrap())
}

fn transpose(m: &EdgeMap) -> EdgeMap {
    EdgeMap::from_fn(m.height(), m.width(), |r, c| m.get(c, r))
}

proptest! {
    #[test]
    fn swapping_masks_swaps_fpr_and_fnr(a in mask(7, 5), b in mask(7, 5)) {
        let ab = mask_metrics(&a, &b).unwrap();
        let ba = mask_metrics(&b, &a).unwrap();
        prop_assert_eq!(ab.rse, ba.rse);
        prop_assert_eq!(ab.fpr, ba.fnr);
        prop_assert_eq!(ab.fnr, ba.fpr);
    }

    #[test]
    fn transposition_invariance(a in mask(6, 4), b in mask(6, 4)) {
        let m = mask_metrics(&a, &b).unwrap();
        let t = mask_metrics(&transpose(&a), &transpose(&b)).unwrap();
        prop_assert_eq!((m.fpr, m.fnr, m.rse), (t.fpr, t.fnr, t.rse));
    }

    #[test]
    fn rse_is_a_fraction(a in mask(5, 5), b in mask(5, 5)) {
        let m = mask_metrics(&a, &b).unwrap();
        prop_assert!((0.0..=1.0).contains(&m.rse));
        prop_assert!(m.fpr >= 0.0 && m.fnr >= 0.0);
        if a.count() > 0 && b.count() > 0 {
            prop_assert!(m.rse <= m.fpr.min(m.fnr));
        }
    }

    #[test]
    fn one_flipped_foreground_pixel(n in 2usize..30) {
        let exact = EdgeMap::from_fn(n, 1, |_, _| true);
        let mut u = exact.to_image();
        u.set(0, n / 2, 0.0);
        prop_assert!((seg_error(&u, &exact).unwrap() - 1.0 / (n - 1) as f64).abs() < 1e-15);
    }
}

#[test]
fn error_of_exact_field_is_zero() {
    let exact = EdgeMap::from_fn(4, 4, |r, c| r < c);
    assert_eq!(seg_error(&exact.to_image(), &exact).unwrap(), 0.0);
    assert!(seg_error(&GrayImage::filled(4, 3, 1.0), &exact).unwrap_err().is_argument());
}
