//! Collective-spin observables, the squeezing parameter and steady-state
//! cavity-field scans.

use log::warn;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::dynamics::{Coefficients, DriveFlags};
use crate::error::{Error, Result};
use crate::integrator::{resolution_dt, Scheme, Stepper};
use crate::model::{init_spin_coherent_at, MomentState, PhysicalParams, Slot};

/// Collective spin `(J_x, J_y, J_z)` in the microwave frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpinVector {
    pub jx: f64,
    pub jy: f64,
    pub jz: f64,
}

impl SpinVector {
    pub fn transverse_sq(&self) -> f64 {
        self.jx * self.jx + self.jy * self.jy
    }
}

/// Spin variances, clamped at zero; `raw` keeps the unclamped values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpinVariances {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub raw: [f64; 3],
}

pub fn collective_spin(state: &MomentState, n_atoms: u64) -> SpinVector {
    let n = n_atoms as f64;
    let s12 = state[Slot::S12];
    SpinVector {
        jx: n * s12.re,
        jy: -n * s12.im,
        jz: 0.5 * n * (2.0 * state[Slot::S22].re - 1.0),
    }
}

/// Unclamped variances written with pair cumulants so that the `N²` terms
/// cancel analytically.
fn raw_variances(state: &MomentState, n_atoms: u64) -> [f64; 3] {
    let n = n_atoms as f64;
    let pairs = (n_atoms * (n_atoms - 1)) as f64;
    let s = state[Slot::S12];
    let s22 = state[Slot::S22].re;
    let s33 = state[Slot::S33].re;
    let c1212 = (state[Slot::P12_12] - s * s).re;
    let c1221 = state[Slot::P12_21].re - s.norm_sqr();
    let c2222 = state[Slot::P22_22].re - s22 * s22;
    let single = 0.25 * n * (1.0 - s33);
    let x = 0.5 * pairs * (c1212 + c1221) + single - n * s.re * s.re;
    let y = 0.5 * pairs * (c1221 - c1212) + single - n * s.im * s.im;
    let z = pairs * c2222 + n * s22 * (1.0 - s22);
    [x, y, z]
}

pub fn spin_variances(state: &MomentState, n_atoms: u64) -> Result<SpinVariances> {
    if n_atoms < 2 {
        return Err(Error::Unsupported("spin variances need at least two atoms".into()));
    }
    let raw = raw_variances(state, n_atoms);
    let n2 = (n_atoms as f64).powi(2);
    for (axis, v) in ["x", "y", "z"].iter().zip(raw) {
        if v < -1e-6 * n2 {
            warn!("closure violation: var J_{axis} = {v:e}");
        }
    }
    Ok(SpinVariances {
        x: raw[0].max(0.0),
        y: raw[1].max(0.0),
        z: raw[2].max(0.0),
        raw,
    })
}

/// `ξ² = N (ΔJ_z)² / (J_x² + J_y²)`.
pub fn squeezing_parameter(state: &MomentState, n_atoms: u64) -> Result<f64> {
    if n_atoms < 2 {
        return Err(Error::Unsupported("squeezing needs at least two atoms".into()));
    }
    let spin = collective_spin(state, n_atoms);
    let n = n_atoms as f64;
    let perp = spin.transverse_sq();
    if !(perp > 1e-24 * n * n) {
        return Err(Error::UndefinedSqueezing);
    }
    Ok(n * raw_variances(state, n_atoms)[2] / perp)
}

/// Upper and lower dressed-state frequencies `ω₃₂ ± √(N/2) g`.
pub fn dressed_frequencies(params: &PhysicalParams) -> (f64, f64) {
    let split = params.collective_coupling();
    (params.omega_32 + split, params.omega_32 - split)
}

/// Population-dependent form `ω₃₂ ± √(J_z + N/2) g`.
pub fn dressed_frequencies_at(params: &PhysicalParams, jz: f64) -> Result<(f64, f64)> {
    let occupied = jz + params.n() / 2.0;
    if occupied < 0.0 {
        return Err(Error::Domain(format!("J_z + N/2 = {occupied} is negative")));
    }
    let split = occupied.sqrt() * params.g;
    Ok((params.omega_32 + split, params.omega_32 - split))
}

/// Slots describing the ground-state manifold, held fixed during a scan.
const FROZEN: [Slot; 6] = [
    Slot::S12,
    Slot::S22,
    Slot::P12_12,
    Slot::P12_21,
    Slot::P22_22,
    Slot::P22_12,
];

pub const STEADY_STEP_BUDGET: usize = 1_000_000;
pub const STEADY_TOLERANCE: f64 = 1e-8;

/// Integrates the probed, unmeasured equations with the ground-state moments
/// held fixed until `⟨a⟩` changes by less than [`STEADY_TOLERANCE`]
/// (relative) over one cavity lifetime.
pub fn steady_state(initial: &MomentState, params: &PhysicalParams) -> Result<MomentState> {
    let flags = DriveFlags { probe_on: true, microwave_on: false, measurement_on: false };
    let dt = resolution_dt(params);
    let mut stepper = Stepper::new(Coefficients::rotating(params, flags), dt, Scheme::ExponentialEuler).freezing(&FROZEN);
    let window = ((1.0 / params.kappa) / dt).ceil().max(1.0) as usize;
    let mut state = *initial;
    let mut reference = state[Slot::A];
    let mut last_change = f64::INFINITY;
    for k in 1..=STEADY_STEP_BUDGET {
        state = stepper.step(&state, 0.0, k)?.0;
        if k % window == 0 {
            let a = state[Slot::A];
            let scale = a.norm();
            last_change = if scale == 0.0 { (a - reference).norm() } else { (a - reference).norm() / scale };
            if last_change < STEADY_TOLERANCE {
                return Ok(state);
            }
            reference = a;
        }
    }
    Err(Error::Convergence { steps: STEADY_STEP_BUDGET, last_change })
}

/// Steady `⟨ã⟩` for each probe frequency in `omega_p_grid` (rad/s), atoms in
/// the equal superposition.
pub fn steady_scan_frequency(params: &PhysicalParams, omega_p_grid: &[f64]) -> Result<Vec<Complex64>> {
    let initial = init_spin_coherent_at(params, 0.0, std::f64::consts::FRAC_PI_2);
    omega_p_grid
        .par_iter()
        .map(|&omega_p| {
            let p = PhysicalParams { omega_p, ..*params };
            steady_state(&initial, &p).map(|s| s[Slot::A])
        })
        .collect()
}

/// Steady `⟨ã⟩` for each population imbalance `J_z/N` in `jz_grid`, probe at
/// the upper dressed state of the balanced ensemble.
pub fn steady_scan_jz(params: &PhysicalParams, jz_over_n_grid: &[f64]) -> Result<Vec<Complex64>> {
    let p = params.with_probe_detuning(0.0);
    jz_over_n_grid
        .par_iter()
        .map(|&jz| {
            if !(-0.5..=0.5).contains(&jz) {
                return Err(Error::Domain(format!("J_z/N = {jz} outside [-1/2, 1/2]")));
            }
            let initial = init_spin_coherent_at(&p, jz, std::f64::consts::FRAC_PI_2);
            steady_state(&initial, &p).map(|s| s[Slot::A])
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{default_params, init_all_down, init_spin_coherent};
    use approx::assert_relative_eq;
    use std::f64::consts::{FRAC_PI_2, PI};

    #[test]
    fn spin_components() {
        let p = default_params();
        let y = collective_spin(&init_spin_coherent(&p, FRAC_PI_2), 10_000);
        assert_relative_eq!(y.jx, 0.0, epsilon = 1e-9);
        assert_relative_eq!(y.jy, 5000.0, epsilon = 1e-9);
        assert_relative_eq!(y.jz, 0.0, epsilon = 1e-9);
        let down = collective_spin(&init_all_down(&p), 10_000);
        assert_eq!((down.jx, down.jy, down.jz), (0.0, 0.0, -5000.0));
        let x = collective_spin(&init_spin_coherent(&p, 0.0), 10_000);
        assert_relative_eq!(x.jx, 5000.0, epsilon = 1e-9);
    }

    #[test]
    fn coherent_variances() {
        let p = default_params();
        let v = spin_variances(&init_spin_coherent(&p, FRAC_PI_2), 10_000).unwrap();
        assert_relative_eq!(v.z, 2500.0, max_relative = 1e-12);
        assert_relative_eq!(v.x, 2500.0, max_relative = 1e-12);
        assert!(v.y.abs() < 1e-6);
        let d = spin_variances(&init_all_down(&p), 10_000).unwrap();
        assert_eq!(d.z, 0.0);
        assert!(spin_variances(&init_all_down(&p), 1).is_err());
    }

    #[test]
    fn squeezing_values() {
        let p = default_params();
        for az in [0.0, 0.4, FRAC_PI_2, 2.0, PI] {
            let s = init_spin_coherent(&p, az);
            assert!((squeezing_parameter(&s, 10_000).unwrap() - 1.0).abs() < 1e-10);
        }
        // halve ΔJ_z² at fixed spin length through the pair cumulant
        let mut s = init_spin_coherent(&p, FRAC_PI_2);
        let n = 10_000.0;
        s[Slot::P22_22].re -= 0.5 * 0.25 * n / (n * (n - 1.0));
        assert_relative_eq!(squeezing_parameter(&s, 10_000).unwrap(), 0.5, max_relative = 1e-9);
        assert_eq!(squeezing_parameter(&init_all_down(&p), 10_000), Err(Error::UndefinedSqueezing));
    }

    #[test]
    fn dressed_states() {
        let p = default_params();
        let (up, down) = dressed_frequencies(&p);
        assert_relative_eq!((up - p.omega_32) / (2.0 * PI), 17.889802e6, max_relative = 1e-6);
        assert_relative_eq!(up + down, 2.0 * p.omega_32, max_relative = 1e-15);
        assert_eq!(dressed_frequencies_at(&p, 0.0).unwrap(), (up, down));
        let mut g0 = p;
        g0.g = 0.0;
        assert_eq!(dressed_frequencies(&g0), (p.omega_32, p.omega_32));
        assert!(dressed_frequencies_at(&p, -6000.0).is_err());
    }

    #[test]
    fn zero_probe_scan_is_zero() {
        let p = default_params().with_probe_amplitude(0.0);
        let grid = [p.omega_32 - 1e8, p.omega_32, p.omega_32 + 1e8];
        let a = steady_scan_frequency(&p, &grid).unwrap();
        assert!(a.iter().all(|v| v.norm() == 0.0));
    }
}
