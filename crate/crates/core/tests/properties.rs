use std::f64::consts::PI;

use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use bundleflow::be_flow::{gradient_bound, NParam};
use bundleflow::bundle_curvature::flow::{flow_rhs_from_blocks, torus_velocity};
use bundleflow::bundle_curvature::{
    flow_from_blocks, flow_rhs_torus, ricci_blocks_general, ricci_blocks_torus, ConnectionField, QField,
    StructureConstants,
};
use bundleflow::cli_io::verify::random_bundle_data;
use bundleflow::cli_io::FlowTrace;
use bundleflow::ke_ode::{
    closed_form_flat, ke_integrate, ke_rhs, ke_sample, lauret_sample, psi_cleared, to_lauret, KEParams, KEState,
};
use bundleflow::tensor_lab::{
    drift_laplacian, grad_norm_sq, laplacian, ricci, CoordinateMetric, MetricField, PeriodicChart, ScalarField,
};

/// Symmetric positive definite 2×2 metric with one Fourier mode per entry.
fn wavy_metric(a: [f64; 3], x: &[f64]) -> DMatrix<f64> {
    let s = (2.0 * PI * x[0]).sin();
    let c = (2.0 * PI * x[1]).cos();
    let m = (2.0 * PI * (x[0] + x[1])).sin();
    DMatrix::from_row_slice(2, 2, &[1.0 + a[0] * s, a[2] * m, a[2] * m, 1.0 + a[1] * c])
}

fn coeffs() -> impl Strategy<Value = [f64; 3]> {
    [-0.3..0.3f64, -0.3..0.3f64, -0.2..0.2f64]
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn ricci_is_symmetric_with_small_defect(a in coeffs(), x in -1.0..1.0f64, y in -1.0..1.0f64) {
        let p = vec![x, y];
        let m = CoordinateMetric::new(2, move |p| wavy_metric(a, p));
        let r = ricci(&m.clone().with_step(2e-3), &p).unwrap();
        let r_half = ricci(&m.with_step(1e-3), &p).unwrap();
        prop_assert_eq!(r_half.ric.clone(), r_half.ric.transpose());
        // second order: halving h cuts the defect by about 4, down to roundoff
        prop_assert!(r_half.asymmetry <= 0.35 * r.asymmetry + 1e-8, "defect {} then {}", r.asymmetry, r_half.asymmetry);
    }

    #[test]
    fn constant_potential_drift_laplacian_is_laplacian(a in coeffs(), b in coeffs(), k in 0.0..5.0f64, idx in 0usize..64) {
        let chart = PeriodicChart::cube(2, 1.0, 8).unwrap();
        let g = MetricField::from_fn(chart.clone(), |x| wavy_metric(a, x)).unwrap();
        let u = ScalarField::from_fn(chart.clone(), |x| b[0] * (2.0 * PI * x[0]).sin() + b[1] * (2.0 * PI * x[1]).cos()).unwrap();
        let f = ScalarField::constant(chart, k);
        prop_assert_eq!(drift_laplacian(&f, &u, &g, &idx).unwrap(), laplacian(&u, &g, &idx).unwrap());
    }

    #[test]
    fn drift_forms_of_potential_velocity_agree(a in coeffs(), b in coeffs(), idx in 0usize..64) {
        let chart = PeriodicChart::cube(2, 1.0, 8).unwrap();
        let g = MetricField::from_fn(chart.clone(), |x| wavy_metric(a, x)).unwrap();
        let f = ScalarField::from_fn(chart, |x| b[0] * (2.0 * PI * x[0]).sin() + b[2] * (2.0 * PI * (x[0] - x[1])).cos()).unwrap();
        let lhs = drift_laplacian(&f, &f, &g, &idx).unwrap();
        let rhs = laplacian(&f, &g, &idx).unwrap() - grad_norm_sq(&f, &g, &idx).unwrap();
        prop_assert!(close(lhs, rhs, 1e-12), "{lhs} vs {rhs}");
    }

    #[test]
    fn abelian_general_blocks_equal_torus_blocks(seed in any::<u64>(), d in 1usize..4, q in 1usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = random_bundle_data(&mut rng, d, q, StructureConstants::abelian(q)).unwrap();
        prop_assert_eq!(ricci_blocks_general(&data).unwrap(), ricci_blocks_torus(&data).unwrap());
    }

    #[test]
    fn velocities_are_minus_twice_the_blocks(seed in any::<u64>(), d in 1usize..4, q in 1usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = random_bundle_data(&mut rng, d, q, StructureConstants::abelian(q)).unwrap();
        let (dg, dq, da) = torus_velocity(&data);
        let (bg, bq, ba) = flow_from_blocks(&ricci_blocks_torus(&data).unwrap(), &data.q_inv);
        let scale = 1.0 + bg.abs().max().max(bq.abs().max()).max(ba.abs().max());
        let diff = (&dg - &bg).abs().max().max((&dq - &bq).abs().max()).max((&da - &ba).abs().max());
        prop_assert!(diff <= 1e-12 * scale, "diff {diff}");
    }

    #[test]
    fn grid_rhs_matches_block_rhs(a in coeffs(), w in 0.5..2.0f64, s in -0.3..0.3f64, r in -0.3..0.3f64) {
        let chart = PeriodicChart::cube(2, 1.0, 8).unwrap();
        let g = MetricField::from_fn(chart.clone(), |x| wavy_metric(a, x)).unwrap();
        let q = QField::from_fn(chart.clone(), 1, |x| DMatrix::from_element(1, 1, w * (1.0 + s * (2.0 * PI * x[1]).sin()))).unwrap();
        let alpha = ConnectionField::from_fn(chart, 1, |x| {
            DMatrix::from_row_slice(1, 2, &[r * (2.0 * PI * x[1]).cos(), r * (2.0 * PI * x[0]).sin()])
        })
        .unwrap();
        let direct = flow_rhs_torus(&g, &q, &alpha).unwrap();
        let blocks = flow_rhs_from_blocks(&g, &q, &alpha).unwrap();
        prop_assert!(direct.max_abs_diff(&blocks) <= 1e-12 * (1.0 + direct.max_abs()));
    }

    #[test]
    fn potential_and_flat_base_speeds(u in 0.05..20.0f64, f in -3.0..3.0f64, n in 1u32..5, lambda in -3.0..3.0f64) {
        let s = KEState::new(u, f).unwrap();
        let (du, df) = ke_rhs(&s, &KEParams::new(n, lambda).unwrap()).unwrap();
        prop_assert!(df > 0.0);
        let (du0, _) = ke_rhs(&s, &KEParams::new(n, 0.0).unwrap()).unwrap();
        prop_assert!(du0 > 0.0);
        prop_assert!(close(du0 - du, 2.0 * lambda, 1e-12));
    }

    #[test]
    fn gradient_bound_behaviour(t in 0.0..10.0f64, k0 in 0.01..5.0f64, n in 1usize..5, excess in 0.1..5.0f64, frac in 0.0..0.9f64) {
        let above = NParam::Finite(n as f64 + excess);
        prop_assert_eq!(gradient_bound(t, k0, n, above).unwrap(), k0);
        prop_assert_eq!(gradient_bound(t, k0, n, NParam::Infinite).unwrap(), k0);
        let below = NParam::Finite(n as f64 - excess);
        let horizon = excess / (2.0 * k0);
        let early = gradient_bound(frac * horizon, k0, n, below).unwrap();
        let later = gradient_bound((frac + 0.05) * horizon, k0, n, below).unwrap();
        prop_assert!(k0 <= early && early <= later);
        prop_assert!(gradient_bound(horizon * 1.01, k0, n, below).is_err());
        prop_assert!(close(above.coefficient(n).unwrap() * excess, 1.0, 1e-14));
        prop_assert!(above.exceeds(n) && !below.exceeds(n));
    }

    #[test]
    fn csv_round_trip_is_exact(rows in prop::collection::vec((any::<f64>(), prop::option::of(any::<f64>())), 1..40)) {
        let mut trace = FlowTrace::new(&["t", "u", "psi"]).with_meta("label", "prop");
        for (i, (u, psi)) in rows.iter().enumerate() {
            let u = if u.is_finite() { *u } else { 0.0 };
            let psi = psi.filter(|v| v.is_finite()).unwrap_or(f64::NAN);
            trace.push(&[i as f64 * 0.1, u, psi]).unwrap();
        }
        let back = FlowTrace::from_csv(&trace.to_csv().unwrap()).unwrap();
        prop_assert!(back.same_values(&trace));
        prop_assert_eq!(back.meta("label"), Some("prop"));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn psi_is_conserved(u in 0.5..2.0f64, f in -1.0..1.0f64, n in 1u32..4, lambda in prop_oneof![-2.0..-0.1f64, 0.1..2.0f64]) {
        let p = KEParams::new(n, lambda).unwrap();
        let s0 = KEState::new(u, f).unwrap();
        // stay well away from collapse when λ > 0
        let t_end = if lambda > 0.0 { 0.25 * u / lambda } else { 5.0 };
        let trace = ke_integrate(&s0, &p, t_end, 1e-9).unwrap();
        let v0 = psi_cleared(&s0, &p).unwrap();
        for s in &trace.states {
            let v = psi_cleared(s, &p).unwrap();
            prop_assert!((v - v0).abs() <= 1e-6 * (1.0 + v0.abs()), "{v} vs {v0} at t = {}", s.t);
        }
    }

    #[test]
    fn flat_base_matches_closed_form(u0 in 0.2..5.0f64, c in -1.0..1.0f64, n in 1u32..4) {
        let p = KEParams::new(n, 0.0).unwrap();
        let times: Vec<f64> = (1..=5).map(|i| i as f64).collect();
        let got = ke_sample(&KEState::new(u0, c).unwrap(), &p, &times, 1e-9).unwrap();
        for (s, &t) in got.iter().zip(&times) {
            let e = closed_form_flat(t, &p, u0, c).unwrap();
            prop_assert!(close(s.u, e.u, 1e-6) && close(s.f, e.f, 1e-6), "{s:?} vs {e:?}");
        }
    }

    #[test]
    fn lauret_variables_follow_lauret_system(u in 0.5..2.0f64, f in -1.0..1.0f64, lambda in -2.0..2.0f64) {
        let p = KEParams::new(1, lambda).unwrap();
        let s0 = KEState::new(u, f).unwrap();
        let t_end = if lambda > 0.0 { 0.25 * u / lambda } else { 2.0 };
        let times: Vec<f64> = (1..=8).map(|i| t_end * i as f64 / 8.0).collect();
        let ke = ke_sample(&s0, &p, &times, 1e-9).unwrap();
        let la = lauret_sample(&to_lauret(&s0, &p), &times, 1e-9).unwrap();
        for (s, l) in ke.iter().zip(&la) {
            let m = to_lauret(s, &p);
            prop_assert!(close(m.a, l.a, 1e-6) && close(m.b, l.b, 1e-6), "{m:?} vs {l:?}");
        }
    }
}
