#![allow(dead_code)]

use homodyne_squeeze::dynamics::{evaluate, Coefficients, DriveFlags};
use homodyne_squeeze::integrator::{
    resolution_dt, simulate_trajectory_with, wiener_increment, Scheme, TrajectorySeed,
};
use homodyne_squeeze::model::{default_params, init_spin_coherent, two_level_pure_state, MomentState, PhysicalParams, Slot};
use homodyne_squeeze::oracle::{joint_trajectory, JointSample, TruncatedSystem};
use homodyne_squeeze::protocol::PulseSchedule;
use nalgebra::DMatrix;
use num_complex::Complex64;

pub const ALL_ON: DriveFlags = DriveFlags { probe_on: true, microwave_on: true, measurement_on: true };

/// Default parameters at `n_atoms` with the probe weakened so a Fock cutoff of
/// four holds.
pub fn weak_params(n_atoms: u64) -> PhysicalParams {
    let p = default_params();
    p.with_n_atoms(n_atoms).with_probe_amplitude(p.omega_prob_amp * 0.03)
}

pub fn oracle_start(n_atoms: usize, cutoff: usize) -> (TruncatedSystem, MomentState) {
    let p = weak_params(n_atoms as u64);
    let rho1 = two_level_pure_state(0.5, -std::f64::consts::FRAC_PI_2);
    let sys = TruncatedSystem::product(n_atoms, cutoff, &rho1, Complex64::new(0.0, 0.0)).unwrap();
    (sys, init_spin_coherent(&p, std::f64::consts::FRAC_PI_2))
}

#[derive(Debug, Clone, Copy)]
pub struct JointReport {
    pub max_moment_diff: f64,
    /// Largest photocurrent difference relative to the largest current.
    pub current_rel_diff: f64,
    pub derivative_rel_err: f64,
    pub max_top_fock: f64,
    pub max_trace_err: f64,
}

/// Steps the oracle and the moment equations side by side with one noise
/// sequence, starting from the `+y` coherent state.
pub fn joint_run(n_atoms: usize, steps: usize, dt: f64, seed: u64) -> JointReport {
    let p = weak_params(n_atoms as u64);
    let c = Coefficients::rotating(&p, ALL_ON);
    let (sys, state) = oracle_start(n_atoms, 4);
    assert!(sys.extract_moments().max_abs_diff(&state) < 1e-12);

    let (d_exact, w_exact) = sys.moment_derivatives(&c);
    let (d, w) = evaluate(&state, &c).unwrap();
    let mut derivative_rel_err: f64 = 0.0;
    for (ours, exact) in [(&d, &d_exact), (&w, &w_exact)] {
        let scale = exact.values.iter().map(|v| v.norm()).fold(0.0, f64::max);
        for slot in Slot::ALL {
            derivative_rel_err = derivative_rel_err.max((ours[slot] - exact[slot]).norm() / scale);
        }
    }

    let samples = joint_trajectory(sys, &p, ALL_ON, dt, steps, seed.into()).unwrap();
    let current_scale = samples.iter().map(|s| s.current.abs()).fold(0.0, f64::max);
    let max = |f: fn(&JointSample) -> f64| samples.iter().map(f).fold(0.0, f64::max);
    JointReport {
        max_moment_diff: max(|s| s.moment_diff),
        current_rel_diff: max(|s| s.current_diff) / current_scale,
        derivative_rel_err,
        max_top_fock: max(|s| s.top_fock),
        max_trace_err: max(|s| s.trace_error),
    }
}

/// RMS Hilbert–Schmidt distance between batch means of `M` conditional states
/// and the unconditional (`η = 0`) state, for each `M` in `sizes`. Every size
/// partitions the same pool of realizations.
pub fn martingale_errors(sizes: &[usize], pool: usize, steps: usize, dt: f64, seed: u64) -> Vec<f64> {
    let p = weak_params(2).with_eta(1.0);
    let (start, _) = oracle_start(2, 4);
    let mut reference = start.clone();
    for _ in 0..steps {
        reference.sme_step(&p.with_eta(0.0), ALL_ON, dt, 0.0).unwrap();
    }
    let finals: Vec<DMatrix<Complex64>> = (0..pool as u64)
        .map(|k| {
            let mut rng = TrajectorySeed::member(seed, k).rng();
            let mut sys = start.clone();
            for _ in 0..steps {
                let dw = wiener_increment(&mut rng, dt).unwrap();
                sys.sme_step(&p, ALL_ON, dt, dw).unwrap();
            }
            sys.rho.clone()
        })
        .collect();
    sizes
        .iter()
        .map(|&m| {
            let batches = pool / m;
            let ms: f64 = (0..batches)
                .map(|b| {
                    let mean = finals[b * m..(b + 1) * m]
                        .iter()
                        .fold(DMatrix::zeros(reference.dim(), reference.dim()), |acc, r| acc + r)
                        / Complex64::from(m as f64);
                    (mean - &reference.rho).norm_squared()
                })
                .sum::<f64>()
                / batches as f64;
            ms.sqrt()
        })
        .collect()
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn log_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

/// Final first-order moments of a deterministic 0.5 µs probed run at
/// `resolution_dt / div`.
pub fn deterministic_final(div: f64) -> Vec<Complex64> {
    let p = default_params().with_eta(0.0);
    let dt = resolution_dt(&p) / div;
    let schedule = PulseSchedule::continuous_probe(0.5e-6).unwrap();
    let rec = simulate_trajectory_with(
        &init_spin_coherent(&p, std::f64::consts::FRAC_PI_2),
        &schedule,
        &p,
        dt,
        0,
        1_000_000,
        Scheme::EulerMaruyama,
    )
    .unwrap();
    let s = rec.final_state();
    [Slot::A, Slot::S12, Slot::S22, Slot::S13, Slot::S23, Slot::S33]
        .iter()
        .map(|&k| s[k])
        .collect()
}

/// Observed order from differences between runs at successively halved
/// steps, starting from a quarter of the resolution step.
pub fn convergence_order() -> (Vec<f64>, f64) {
    let runs: Vec<Vec<Complex64>> = [4.0, 8.0, 16.0, 32.0].iter().map(|&d| deterministic_final(d)).collect();
    let diff = |a: &[Complex64], b: &[Complex64]| a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
    let errors: Vec<f64> = (0..3).map(|i| diff(&runs[i], &runs[i + 1])).collect();
    let order = log_slope(&[1.0, 0.5, 0.25], &errors);
    (errors, order)
}
