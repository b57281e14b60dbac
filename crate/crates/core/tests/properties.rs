use backflow_core::current::{current_from_coeffs, current_trace, linspace, window_integral};
use backflow_core::eig::min_eigpair;
use backflow_core::extrapolate::{quad_extrapolate, TruncationSchedule};
use backflow_core::extremal::{backflow_infimum, scan_alpha};
use backflow_core::kernel::{build_kernel, nonrel_kernel};
use backflow_core::line::{line_kernel, line_matrix, line_nodes, LineParams};
use backflow_core::matrix::SymMatrix;
use backflow_core::model::eigenstate_flux;
use backflow_core::two_mode::{two_mode_min, two_mode_prob};
use backflow_core::RingParams;
use proptest::prelude::*;
use std::f64::consts::PI;

fn ring_params() -> impl Strategy<Value = RingParams> {
    (-2.0f64..1.5, 0.0f64..1.0, 0.01f64..2.0).prop_map(|(lchi, b, a)| {
        RingParams::from_alpha_over_pi(10f64.powf(lchi), -b * 0.999, a).unwrap()
    })
}

/// Same ranges with `beta` on a dyadic grid, so that `beta - 1` is exact and
/// shift identities are not polluted by rounding of the input.
fn dyadic_ring_params() -> impl Strategy<Value = RingParams> {
    (-2.0f64..1.5, 0u32..(1 << 30), 0.01f64..2.0).prop_map(|(lchi, k, a)| {
        let beta = -(k as f64) / (1u64 << 30) as f64;
        RingParams::from_alpha_over_pi(10f64.powf(lchi), beta, a).unwrap()
    })
}

fn two_by_two_min(a: f64, b: f64, c: f64) -> f64 {
    (a + b) / 2.0 - (((a - b) / 2.0).powi(2) + c * c).sqrt()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn two_mode_min_is_block_eigenvalue(p in ring_params(), l1 in 0usize..8, gap in 1usize..8) {
        let l2 = l1 + gap;
        let k = build_kernel(&p, l2).unwrap();
        let (a, b, c) = (k.get(l1, l1), k.get(l2, l2), k.get(l1, l2));
        let want = two_by_two_min(a, b, c);
        let got = two_mode_min(&p, l1 as i64, l2 as i64).unwrap();
        let scale = a.abs().max(b.abs()).max(c.abs());
        prop_assert!((got - want).abs() <= 1e-12 * scale, "{got} vs {want}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn two_mode_min_bounds_every_angle(p in ring_params(), l1 in 0i64..5, gap in 1i64..5,
                                       phi in 0.0f64..=PI, gamma in 0.0f64..(2.0 * PI)) {
        let m = two_mode_min(&p, l1, l1 + gap).unwrap();
        let v = two_mode_prob(&p, l1, l1 + gap, phi, gamma).unwrap();
        prop_assert!(m <= v + 1e-15 * v.abs().max(1.0));
    }

    #[test]
    fn two_mode_flux_shift(p in dyadic_ring_params(), l1 in 0i64..5, gap in 1i64..5) {
        let shifted = RingParams::unreduced(p.chi(), p.beta() - 1.0, p.alpha()).unwrap();
        let a = two_mode_min(&p, l1, l1 + gap).unwrap();
        let b = two_mode_min(&shifted, l1 - 1, l1 - 1 + gap).unwrap();
        prop_assert!((a - b).abs() <= 1e-15 * a.abs().max(1e-3));
    }

    #[test]
    fn kernel_diagonal_is_flux_and_symmetric(p in ring_params()) {
        let k = build_kernel(&p, 80).unwrap();
        for i in 0..=80 {
            prop_assert_eq!(k.get(i, i), eigenstate_flux(&p, i as i64));
        }
        prop_assert_eq!(k.matrix().max_asymmetry(), 0.0);
    }

    #[test]
    fn kernel_flux_shift_covariance(p in dyadic_ring_params()) {
        let shifted = RingParams::unreduced(p.chi(), p.beta() - 1.0, p.alpha()).unwrap();
        let k = build_kernel(&p, 40).unwrap();
        let ks = build_kernel(&shifted, 40).unwrap();
        prop_assert_eq!(ks.start(), k.start() - 1);
        for i in 0..=40 {
            for j in 0..=40 {
                prop_assert!((ks.get(i, j) - k.get(i, j)).abs() <= 1e-13);
            }
        }
    }

    #[test]
    fn extrapolation_ignores_sample_order(vals in prop::collection::vec(-0.1f64..0.0, 5), rot in 0usize..5) {
        let ns = [200usize, 300, 450, 700, 1000];
        let s: Vec<(usize, f64)> = ns.iter().cloned().zip(vals).collect();
        let mut r = s.clone();
        r.rotate_left(rot);
        r.swap(0, 4);
        let a = quad_extrapolate(&s).unwrap();
        let b = quad_extrapolate(&r).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn extrapolation_sample_on_fit_changes_nothing(vals in prop::collection::vec(-0.1f64..0.0, 5)) {
        let ns = [200usize, 300, 450, 700, 1000];
        let s: Vec<(usize, f64)> = ns.iter().cloned().zip(vals).collect();
        let a = quad_extrapolate(&s).unwrap();
        let x = 1.0 / 1500.0;
        let mut t = s.clone();
        t.push((1500, a.coeffs[0] + x * (a.coeffs[1] + x * a.coeffs[2])));
        let b = quad_extrapolate(&t).unwrap();
        for k in 0..3 {
            let scale = a.coeffs[k].abs().max(1e-3) * if k == 2 { 1e6 } else if k == 1 { 1e3 } else { 1.0 };
            prop_assert!((a.coeffs[k] - b.coeffs[k]).abs() <= 1e-12 * scale);
        }
    }

    #[test]
    fn rayleigh_quotient_bounds(p in ring_params(), probe in prop::collection::vec(-1.0f64..1.0, 151)) {
        let k = build_kernel(&p, 150).unwrap();
        let e = min_eigpair(k.matrix()).unwrap();
        let norm: f64 = e.vector.iter().map(|x| x * x).sum::<f64>().sqrt();
        prop_assert!((norm - 1.0).abs() < 1e-12);
        prop_assert!(e.residual <= 1e-9 * k.matrix().frobenius_norm());
        let rq = k.matrix().quadratic_form(&e.vector);
        prop_assert!((rq - e.value).abs() <= e.residual + 1e-15);
        let pn: f64 = probe.iter().map(|x| x * x).sum();
        if pn > 0.0 {
            prop_assert!(e.value <= k.matrix().quadratic_form(&probe) / pn + 1e-12);
        }
    }

    #[test]
    fn line_eigenvalue_ignores_node_order(eps in 0.001f64..1.0, seed in 0u64..1000) {
        let p = LineParams::new(eps, 6.0, 60).unwrap();
        let (z, w) = line_nodes(&p);
        let m = line_matrix(&p);
        let n = z.len();
        let perm: Vec<usize> = (0..n).map(|i| (i * 37 + seed as usize) % n).collect();
        let sw: Vec<f64> = w.iter().map(|w| w.sqrt()).collect();
        let mp = SymMatrix::from_upper_fn(n, |i, j| {
            let (a, b) = (perm[i], perm[j]);
            sw[a] * line_kernel(eps, z[a], z[b]) * sw[b]
        });
        let a = min_eigpair(&m).unwrap().value;
        let b = min_eigpair(&mp).unwrap().value;
        prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1e-6));
    }
}

#[test]
fn eigensolver_is_deterministic() {
    let p = RingParams::from_alpha_over_pi(0.73, 0.0, 0.36252).unwrap();
    let k = build_kernel(&p, 700).unwrap();
    let a = min_eigpair(k.matrix()).unwrap();
    let b = min_eigpair(k.matrix()).unwrap();
    assert_eq!(a, b);
}

#[test]
fn truncated_minimum_decreases_with_n() {
    let p = RingParams::from_alpha_over_pi(0.73, 0.0, 0.36252).unwrap();
    let r = backflow_infimum(&p, &TruncationSchedule::fast()).unwrap();
    assert!(r.monotone);
    assert!(r.samples.windows(2).all(|w| w[1].lambda_min <= w[0].lambda_min));
    assert!(!r.escalated);
    assert!(r.extrapolation.ssr < 1e-10, "{}", r.extrapolation.ssr);
}

#[test]
fn many_modes_beat_two() {
    let grid: Vec<f64> = (1..=20).map(|k| 0.05 * k as f64).collect();
    let schedule = TruncationSchedule::new(vec![60, 80, 110, 150]).unwrap();
    let s = scan_alpha(0.05, 0.0, &grid, &schedule).unwrap();
    for (pt, &x) in s.points.iter().zip(&grid) {
        let p = RingParams::from_alpha_over_pi(0.05, 0.0, x).unwrap();
        let two = two_mode_min(&p, 0, 1).unwrap();
        assert!(pt.p_value.unwrap() <= two + 1e-12, "alpha/pi = {x}");
    }
}

#[test]
fn kernel_approaches_nonrelativistic_as_chi_squared() {
    let nonrel = nonrel_kernel(1.0, 0.0, 49).unwrap();
    let diff = |chi: f64| {
        let k = build_kernel(&RingParams::new(chi, 0.0, 1.0).unwrap(), 49).unwrap();
        (0..50)
            .flat_map(|i| (0..50).map(move |j| (i, j)))
            .map(|(i, j)| (k.get(i, j) - nonrel.get(i, j)).abs())
            .fold(0.0, f64::max)
    };
    let d: Vec<f64> = [1e-3, 5e-4, 2.5e-4].iter().map(|&c| diff(c)).collect();
    for w in d.windows(2) {
        assert!((w[0] / w[1] - 4.0).abs() <= 0.5, "{d:?}");
    }
}

#[test]
fn window_integral_matches_quadratic_form() {
    let p = RingParams::from_alpha_over_pi(0.73, 0.0, 0.36252).unwrap();
    let r = backflow_infimum(&p, &TruncationSchedule::accurate()).unwrap();
    let tr = current_trace(&r, &linspace(-0.5, 0.5, 2001)).unwrap();
    let w = window_integral(&tr).unwrap();
    assert!((w - tr.quadratic_form).abs() <= 1e-4, "{w} vs {}", tr.quadratic_form);
    assert!((tr.quadratic_form - r.finite_n_value()).abs() < 1e-12);
}

#[test]
fn current_is_real_and_even() {
    let p = RingParams::from_alpha_over_pi(0.73, 0.0, 0.36252).unwrap();
    let r = backflow_infimum(&p, &TruncationSchedule::fast()).unwrap();
    let ts: Vec<f64> = (0..50).map(|k| 0.011 * k as f64).collect();
    let neg: Vec<f64> = ts.iter().map(|t| -t).collect();
    let a = current_from_coeffs(&p, &r.best_vector, &ts).unwrap();
    let b = current_from_coeffs(&p, &r.best_vector, &neg).unwrap();
    assert_eq!(a.j_times_t, b.j_times_t);
    assert!(a.j_times_t.iter().all(|j| j.is_finite()));
}
