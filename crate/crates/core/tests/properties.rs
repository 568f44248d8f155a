use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use proptest::prelude::*;

use funkframe::frame::{basis_b, table_file, FrameIndex, FrameTable, IndexSetJ};
use funkframe::geometry::{
    antipode, cart_to_sph, product_grid, sph_to_cart, tangent_frame, Point3, SphCoord,
};
use funkframe::harmonics::{even_projection, HarmonicCoeffs, HarmonicPlan};
use funkframe::phantom::{add_noise, NoiseSpec, Phantom, SplineCap};
use funkframe::radon::{fr_direct, fr_spectral, great_circle_mean};
use funkframe::sobolev::{apply_filtered, apply_l, apply_l_inv, FilterSpec};

fn coeffs(l_max: usize) -> impl Strategy<Value = HarmonicCoeffs> {
    let len = (l_max + 1) * (l_max + 1);
    prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), len).prop_map(move |v| {
        HarmonicCoeffs::from_vec(l_max, v.into_iter().map(|(a, b)| Complex64::new(a, b)).collect()).unwrap()
    })
}

fn unit_point() -> impl Strategy<Value = Point3> {
    (-1.0..1.0f64, 0.0..2.0 * PI).prop_map(|(z, phi)| {
        let r = (1.0 - z * z).sqrt();
        Point3::new(r * phi.cos(), r * phi.sin(), z)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn coordinates_roundtrip(lambda in 0.0..2.0 * PI, theta in 1e-6..PI - 1e-6) {
        let p = sph_to_cart(SphCoord::new(lambda, theta));
        prop_assert!(p.is_unit(1e-14));
        let back = sph_to_cart(cart_to_sph(p).unwrap());
        prop_assert!((back - p).norm() < 1e-13);
        let q = sph_to_cart(antipode(SphCoord::new(lambda, theta)));
        prop_assert!((q + p).norm() < 1e-13);
    }

    #[test]
    fn tangent_frame_is_orthonormal(xi in unit_point()) {
        let f = tangent_frame(xi);
        prop_assert!(f.u.dot(&xi).abs() < 1e-13 && f.v.dot(&xi).abs() < 1e-13);
        prop_assert!(f.u.dot(&f.v).abs() < 1e-13);
        prop_assert!(f.u.is_unit(1e-13) && f.v.is_unit(1e-13));
    }

    #[test]
    fn radon_is_even_and_kills_odd_degrees(c in coeffs(8)) {
        let r = fr_spectral(&c);
        prop_assert_eq!(r.max_odd_degree(), 0.0);
        prop_assert!(r.norm() <= c.norm() + 1e-12);
        prop_assert_eq!(fr_spectral(&even_projection(&c)), r);
    }

    #[test]
    fn l_and_inverse_cancel(c in coeffs(10)) {
        prop_assert!(apply_l_inv(&apply_l(&c)).max_abs_diff(&c) < 1e-12);
        prop_assert!(apply_l(&apply_l_inv(&c)).max_abs_diff(&c) < 1e-12);
    }

    #[test]
    fn tikhonov_never_exceeds_l(c in coeffs(10), alpha in 0.0..2.0f64) {
        let f = apply_filtered(&c, &FilterSpec::Tikhonov { alpha }).unwrap();
        prop_assert!(f.norm() <= apply_l(&c).norm() * (1.0 + 1e-12));
    }

    #[test]
    fn analysis_inverts_synthesis(c in coeffs(12)) {
        let plan = HarmonicPlan::new(Arc::new(product_grid(13, 26).unwrap()), 12);
        let back = plan.analysis(&plan.synthesis(&c).unwrap()).unwrap();
        prop_assert!(back.max_abs_diff(&c) < 1e-12);
    }

    #[test]
    fn basis_parity(n in -6i32..=6, k in 1u32..=6, lambda in 0.0..2.0 * PI, theta in 0.01..PI - 0.01) {
        let idx = FrameIndex::new(n, k).unwrap();
        let c = SphCoord::new(lambda, theta);
        let v = basis_b(idx, c);
        let w = basis_b(idx, antipode(c));
        // b(−ξ) = (−1)^{n+k+1} b(ξ)
        let sign = if (n + k as i32) % 2 != 0 { 1.0 } else { -1.0 };
        prop_assert!((w - v * sign).norm() < 1e-10 * (1.0 + v.norm()));
    }

    #[test]
    fn circle_mean_is_antipodally_symmetric(xi in unit_point(), h in -0.9..0.9f64, amp in -2.0..2.0f64) {
        let center = Point3::new(0.3, -0.5, 0.8);
        let ph = Phantom::new(vec![SplineCap::new(center, h, amp).unwrap()]).unwrap();
        let a = great_circle_mean(&ph, xi, 256);
        let b = great_circle_mean(&ph, -xi, 256);
        prop_assert!((a - b).norm() < 1e-12);
    }

    #[test]
    fn noise_level_is_exact(level in 0.01..1.0f64, seed in any::<u64>()) {
        let grid = Arc::new(product_grid(6, 12).unwrap());
        let g = fr_direct(&Phantom::default_tetrahedral(), grid.clone(), 64).unwrap();
        let noisy = add_noise(&g, NoiseSpec { level, seed }).unwrap();
        let diff: Vec<Complex64> = noisy.samples().iter().zip(g.samples()).map(|(a, b)| a - b).collect();
        let rel = funkframe::harmonics::NodeFunction::new(grid, diff).unwrap().l2_norm() / g.l2_norm();
        prop_assert!((rel - level).abs() < 1e-12 * level.max(1.0));
        let again = add_noise(&g, NoiseSpec { level, seed }).unwrap();
        prop_assert_eq!(again.samples(), noisy.samples());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn table_bytes_roundtrip(n in 1u32..=3, entries in prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), 64)) {
        let set = IndexSetJ::new(n).unwrap();
        let len = set.len();
        let c = nalgebra::DMatrix::from_fn(len, len, |i, j| {
            let (a, b) = entries[(i * len + j) % entries.len()];
            Complex64::new(a, b)
        });
        let dual = funkframe::frame::dual_frame(&FrameTable::from_matrix(set, 6, c).unwrap(), 1e-3).unwrap();
        let bytes = table_file::encode(&dual);
        prop_assert_eq!(table_file::decode(&bytes).unwrap(), dual);
        let mut broken = bytes.clone();
        let at = bytes.len() / 3;
        broken[at] ^= 1;
        prop_assert!(table_file::decode(&broken).is_err());
        prop_assert!(table_file::decode(&bytes[..bytes.len() - 1]).is_err());
    }
}
