mod common;

use std::f64::consts::PI;

use mfe_core::geometry::{LensGeometry, LAMBDA_A, OMEGA_A};
use mfe_core::modes::{eigenfrequency, enumerate_modes, FrequencyWindow, GramQuadrature, ModeIndex};
use proptest::prelude::*;

fn fig_lens() -> LensGeometry {
    LensGeometry::from_wavelengths(3.0, 1.0).unwrap()
}

#[test]
fn unit_system() {
    assert_eq!(LAMBDA_A * OMEGA_A, 2.0 * PI);
}

#[test]
fn optical_path_examples() {
    let lens = fig_lens();
    assert!((lens.optical_path_diametral() / LAMBDA_A - 3.0 * PI).abs() < 1e-9);
    assert!((lens.arrival_time() - 6.0 * PI * PI).abs() < 1e-12);
    let unit = LensGeometry::new(1.0, 2.0).unwrap();
    assert!((unit.optical_path_diametral() - 2.0 * PI).abs() < 1e-10);
    let doubled = LensGeometry::from_wavelengths(6.0, 1.0).unwrap();
    assert!((doubled.arrival_time() - 2.0 * lens.arrival_time()).abs() < 1e-12);
}

proptest! {
    #[test]
    fn index_strictly_decreasing(n0 in 1.0f64..3.0, r_wl in 0.5f64..10.0, a in 0.0f64..1.0, b in 0.0f64..1.0) {
        prop_assume!((a - b).abs() > 1e-9);
        let lens = LensGeometry::from_wavelengths(r_wl, n0).unwrap();
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        let r = lens.radius();
        prop_assert!(lens.refractive_index(lo * r).unwrap() > lens.refractive_index(hi * r).unwrap());
    }

    #[test]
    fn optical_path_matches_closed_form(n0 in 1.0f64..3.0, r_wl in 0.5f64..10.0) {
        let lens = LensGeometry::from_wavelengths(r_wl, n0).unwrap();
        let exact = PI * n0 * lens.radius();
        prop_assert!((lens.optical_path_diametral() - exact).abs() <= 1e-10 * exact);
    }

    #[test]
    fn stereographic_map_is_decreasing_onto_unit_interval(a in 0.0f64..1.0, b in 0.0f64..1.0) {
        prop_assume!((a - b).abs() > 1e-9);
        let lens = fig_lens();
        let r = lens.radius();
        let (ca, cb) = (lens.stereographic_cos_theta(a * r).unwrap(), lens.stereographic_cos_theta(b * r).unwrap());
        prop_assert!((0.0..=1.0).contains(&ca) && (0.0..=1.0).contains(&cb));
        prop_assert_eq!(a < b, ca > cb);
    }

    #[test]
    fn mode_count_equals_sum_of_degeneracies(lo in 0.2f64..3.0, width in 0.01f64..1.0) {
        let lens = fig_lens();
        if let Ok(basis) = enumerate_modes(&lens, FrequencyWindow::new(lo, lo + width).unwrap()) {
            let total: usize = basis.groups().iter().map(|g| g.l as usize).sum();
            prop_assert_eq!(total, basis.len());
            prop_assert!(basis.modes().iter().all(|m| (m.l as i64 + m.m as i64) % 2 != 0));
        }
    }
}

#[test]
fn stereographic_examples() {
    let lens = fig_lens();
    let r = lens.radius();
    assert_eq!(lens.stereographic_cos_theta(0.0).unwrap(), 1.0);
    assert_eq!(lens.stereographic_cos_theta(r).unwrap(), 0.0);
    assert!((lens.stereographic_cos_theta(r / 3f64.sqrt()).unwrap() - 0.5).abs() < 1e-15);
    assert!(lens.stereographic_cos_theta(-0.1).is_err());
}

#[test]
fn spectrum_of_low_modes() {
    let lens = fig_lens();
    let basis = enumerate_modes(
        &lens,
        FrequencyWindow::new(1e-9, eigenfrequency(&lens, 30).unwrap() + 1e-9).unwrap(),
    )
    .unwrap();
    assert_eq!(basis.len(), 465);
    assert_eq!(basis.groups().len(), 30);
    for (mode, &w) in basis.modes().iter().zip(basis.frequencies()) {
        let l = f64::from(mode.l);
        assert!((w - (l * (l + 1.0)).sqrt() / lens.radius()).abs() <= 1e-12 * w);
    }
}

#[test]
fn gram_matrix_is_identity_up_to_degree_30() {
    let lens = fig_lens();
    let basis = enumerate_modes(
        &lens,
        FrequencyWindow::new(1e-9, eigenfrequency(&lens, 30).unwrap() + 1e-9).unwrap(),
    )
    .unwrap();
    let gram = basis.mode_gram(&GramQuadrature::default()).unwrap();
    let n = basis.len();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((gram[(i, j)].re - target).abs().max(gram[(i, j)].im.abs()));
        }
    }
    assert!(worst < 1e-6, "max deviation {worst}");
}

#[test]
fn modes_vanish_on_the_mirror() {
    let lens = fig_lens();
    let basis = enumerate_modes(&lens, FrequencyWindow::new(1e-9, 2.0).unwrap()).unwrap();
    for k in 0..16 {
        let values = basis.evaluate_all(lens.radius(), k as f64 * 0.4).unwrap();
        assert!(values.iter().all(|v| v.norm() <= 1e-12));
    }
}

#[test]
fn helmholtz_residual_small_up_to_degree_20() {
    let lens = fig_lens();
    let basis = enumerate_modes(
        &lens,
        FrequencyWindow::new(1e-9, eigenfrequency(&lens, 20).unwrap() + 1e-9).unwrap(),
    )
    .unwrap();
    let r = lens.radius();
    let points: Vec<(f64, f64)> = (0..24)
        .map(|i| (r * (0.05 + 0.9 * (i as f64 + 0.5) / 24.0), 0.37 + i as f64 * 0.61))
        .collect();
    for (mode, &w) in basis.modes().iter().zip(basis.frequencies()) {
        let residual = common::helmholtz_residual(&basis, *mode, w, &points, 1e-3 * r);
        assert!(residual <= 1e-4, "{mode}: {residual}");
    }
}

#[test]
fn enumeration_examples() {
    let lens = fig_lens();
    let basis = enumerate_modes(&lens, FrequencyWindow::new(0.6, 1.4).unwrap()).unwrap();
    assert_eq!((basis.modes()[0].l, basis.max_l()), (11, 25));
    assert_eq!((basis.groups().len(), basis.len()), (15, 270));
    let fig3 = enumerate_modes(&lens, FrequencyWindow::new(0.7, 1.3).unwrap()).unwrap();
    assert_eq!(fig3.len(), 222);
    assert!(ModeIndex::new(12, 2).is_err());
}
