use std::f64::consts::PI;

use num_complex::Complex64;
use proptest::prelude::*;

use dampwave::cap::CapSolver;
use dampwave::eigen::EigenProblem;
use dampwave::experiments::admissible_h0;
use dampwave::linalg::Tridiagonal;
use dampwave::model::{BoundaryCondition, DampingProfile, Join, UniformDamping};
use dampwave::numerics::fit_loglog;
use dampwave::resolvent::{resolvent_norm_at_shift, undamped_norm};
use dampwave::wave::{evolve, StepOptions, WaveState};

fn bump(x: f64, centre: f64, width: f64) -> f64 {
    let s = (x - centre) / width;
    if s.abs() < 1.0 {
        (1.0 - s * s).powi(4)
    } else {
        0.0
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn damped_energy_never_grows(
        beta in 0.0f64..3.0,
        m in 0u64..4,
        centre in -1.2f64..1.2,
        kick in -1.0f64..1.0,
    ) {
        let p = DampingProfile::new(beta, 1.0, 0.5, 2.0, Join::ConstantLevel).unwrap();
        let mut s = WaveState::from_fn(
            160,
            2.0,
            m,
            |x| Complex64::new(bump(x, centre, 0.5), 0.0),
            |x| Complex64::new(0.0, kick * bump(x, -centre, 0.5)),
        ).unwrap();
        let trace = evolve(&mut s, &p, StepOptions::new(0.01, 4.0, 5)).unwrap();
        prop_assert!(trace.dissipation_defect < 1e-11);
        prop_assert!(trace.energies.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12)));
    }

    #[test]
    fn undamped_resolvent_is_inverse_distance(m in 1u64..200, level in 1usize..6, frac in 0.2f64..0.8) {
        let b = 2.0;
        let lo = (level as f64 * PI / (2.0 * b)).powi(2);
        let hi = ((level + 1) as f64 * PI / (2.0 * b)).powi(2);
        let shift = lo + frac * (hi - lo);
        let km = 2.0 * PI * m as f64 / b;
        let exact = undamped_norm((shift + km * km).sqrt(), m, b);
        let w = UniformDamping { level: 0.0, b };
        // Second-order levels shift by about mu (k pi dx / 2b)^2 / 12; at n = 2000
        // that reaches 1e-4 of the distance for the sixth level.
        let got = resolvent_norm_at_shift(m, shift, &w, 4000).unwrap().norm;
        prop_assert!((got - exact).abs() / exact < 1e-4, "{got} vs {exact}");
    }

    #[test]
    fn tridiagonal_solve_inverts_matvec(n in 3usize..60, seed in 0u64..1000) {
        let entry = |k: usize, s: f64| Complex64::new(((k as f64 + s) * 0.7 + seed as f64).sin(), ((k as f64 * 1.3 + s) + seed as f64).cos());
        let lower: Vec<Complex64> = (0..n - 1).map(|k| entry(k, 1.0)).collect();
        let upper: Vec<Complex64> = (0..n - 1).map(|k| entry(k, 2.0)).collect();
        let diag: Vec<Complex64> = (0..n).map(|k| entry(k, 3.0) + Complex64::new(4.0, 0.0)).collect();
        let t = Tridiagonal::new(lower, diag, upper);
        let x: Vec<Complex64> = (0..n).map(|k| entry(k, 5.0)).collect();
        let y = t.solve(&t.matvec(&x)).unwrap();
        let err = x.iter().zip(&y).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        prop_assert!(err < 1e-10, "{err}");
    }

    #[test]
    fn loglog_fit_recovers_power(p in -3.0f64..3.0, c in 0.1f64..10.0) {
        let x: Vec<f64> = (1..=8).map(|k| k as f64 * 1.7).collect();
        let y: Vec<f64> = x.iter().map(|v| c * v.powf(p)).collect();
        let fit = fit_loglog(&x, &y).unwrap();
        prop_assert!((fit.slope - p).abs() < 1e-10);
        prop_assert!((fit.intercept - c.ln()).abs() < 1e-10);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn eigenvalue_coefficient_stays_bounded(beta in 0.0f64..2.5, log_ratio in -3.0f64..-1.0, dirichlet in any::<bool>()) {
        let (bc, l) = if dirichlet { (BoundaryCondition::Dirichlet, 1.0) } else { (BoundaryCondition::Neumann, 0.5) };
        let problem = EigenProblem::new(CapSolver::new(beta, None, 8000).unwrap(), 1.0, l, bc).unwrap();
        let h = admissible_h0(&problem).unwrap() * 10f64.powf(log_ratio);
        let eig = problem.find(h).unwrap();
        prop_assert!(eig.c_h.norm() < problem.c_bound());
        // Damping pushes the eigenvalue into the upper half-plane.
        prop_assert!((eig.lambda * eig.lambda).im > 0.0);
    }
}
