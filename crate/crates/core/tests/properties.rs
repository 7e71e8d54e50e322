mod common;

use std::sync::OnceLock;

use defocus_core::blur::convolve_varying;
use defocus_core::kernel::{
    direct_blur_oracle, forward_candidates, ivec, vec_columns, Framework, Patch, RadialGrid,
    SigmaGrid, WeightMatrix,
};
use defocus_core::reconstruct::spatially_varying_convolve;
use defocus_core::synth::{apply_sigma_field, linear_sigma_field, Axis};
use defocus_core::{BlurMap, GrayImage};
use nalgebra::DMatrix;
use proptest::prelude::*;

fn small() -> &'static Framework {
    static FW: OnceLock<Framework> = OnceLock::new();
    FW.get_or_init(|| Framework::new(12, 30, 0.5, 3.0).unwrap())
}

fn patch_strategy(side: usize) -> impl Strategy<Value = Patch> {
    prop::collection::vec(0.0f64..=1.0, side * side)
        .prop_map(move |px| Patch::new(side, px, (side / 2, side / 2)).unwrap())
}

fn image_strategy(w: usize, h: usize) -> impl Strategy<Value = GrayImage> {
    prop::collection::vec(0.0f64..=1.0, w * h).prop_map(move |px| GrayImage::new(w, h, px).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn ivec_inverts_vec(rows in 1usize..20, cols in 1usize..20, seed in any::<u64>()) {
        let a = DMatrix::from_fn(rows, cols, |i, j| {
            ((seed ^ (i * 31 + j) as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15) >> 11) as f64
        });
        prop_assert_eq!(ivec(&vec_columns(&a), rows).unwrap(), a);
    }

    #[test]
    fn rows_sum_to_one(m in 2usize..8, n in 2usize..25, lo in 0.2f64..1.0, span in 0.1f64..2.5) {
        let sg = SigmaGrid::new(m, lo, lo + span).unwrap();
        let w = WeightMatrix::build(&sg, &RadialGrid::new(n).unwrap()).unwrap();
        for r in 0..w.rows() {
            prop_assert!((w.row_sum(r) - 1.0).abs() < 1e-12);
            prop_assert!(w.row_entries(r).all(|(_, v)| v >= 0.0));
        }
    }

    #[test]
    fn constant_patch_is_fixed(c in 0.0f64..=1.0) {
        let fw = small();
        let p = Patch::from_fn(fw.patch_side(), |_, _| c).unwrap();
        for v in fw.candidates(&p).unwrap().values() {
            prop_assert!((v - c).abs() < 1e-12);
        }
    }

    #[test]
    fn candidates_match_direct_blur(p in patch_strategy(small().patch_side())) {
        let fw = small();
        let cand = forward_candidates(&p, fw.weights(), fw.quadrature()).unwrap();
        for (&s, v) in fw.sigma_grid().sigmas().iter().zip(cand.values()) {
            let direct = direct_blur_oracle(&p, s).unwrap();
            prop_assert!((v - direct).abs() < 1e-12, "sigma {}: {} vs {}", s, v, direct);
        }
    }

    #[test]
    fn candidates_are_linear(
        p in patch_strategy(small().patch_side()),
        q in patch_strategy(small().patch_side()),
        a in -2.0f64..2.0,
        b in -2.0f64..2.0,
    ) {
        let fw = small();
        let side = fw.patch_side();
        let mix: Vec<f64> = p.pixels().iter().zip(q.pixels()).map(|(x, y)| a * x + b * y).collect();
        let mix = Patch::new(side, mix, (side / 2, side / 2)).unwrap();
        let (cp, cq, cm) = (
            fw.candidates(&p).unwrap(),
            fw.candidates(&q).unwrap(),
            fw.candidates(&mix).unwrap(),
        );
        for i in 0..cm.len() {
            prop_assert!((cm.0[i] - (a * cp.0[i] + b * cq.0[i])).abs() < 1e-12);
        }
    }

    #[test]
    fn engine_agrees_with_patches(img in image_strategy(9, 7), x in 0usize..9, y in 0usize..7) {
        let fw = small();
        let padded = img.padded(fw.patch_side() / 2);
        let p = Patch::extract(&padded, x, y, fw.patch_side()).unwrap();
        let a = fw.engine(&img).candidates(x, y);
        let b = fw.candidates(&p).unwrap();
        for (u, v) in a.values().iter().zip(b.values()) {
            prop_assert!((u - v).abs() < 1e-13);
        }
    }

    #[test]
    fn constant_sigma_matches_global_convolution(img in image_strategy(23, 17), sigma in 0.3f64..3.0) {
        let out = convolve_varying(&img, &vec![Some(sigma); img.len()]).unwrap();
        let reference = common::global_convolution(&img, sigma);
        for (a, b) in out.pixels().iter().zip(reference.pixels()) {
            prop_assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn synthesis_equals_reconstruction(img in image_strategy(21, 15), s0 in 0.5f64..2.0, s1 in 0.5f64..3.0) {
        let field = linear_sigma_field(21, 15, s0, s1, Axis::Horizontal).unwrap();
        let synth = apply_sigma_field(&img, &field).unwrap();
        let sigmas: Vec<Option<f64>> = field.values().iter().map(|&s| Some(s)).collect();
        let map = BlurMap::from_parts(21, 15, &sigmas, &vec![0.0; sigmas.len()], (0.5, 3.0)).unwrap();
        prop_assert_eq!(spatially_varying_convolve(&img, &map).unwrap(), synth);
    }
}

#[test]
fn impulse_response_strictly_decreases() {
    let fw = small();
    let p = Patch::from_fn(
        fw.patch_side(),
        |dx, dy| if dx == 0 && dy == 0 { 1.0 } else { 0.0 },
    )
    .unwrap();
    let c = fw.candidates(&p).unwrap();
    for pair in c.values().windows(2) {
        assert!(pair[1] < pair[0], "{pair:?}");
    }
}
