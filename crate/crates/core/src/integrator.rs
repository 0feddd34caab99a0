//! Euler–Maruyama integration of the moment equations.

use log::{debug, warn};
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::dynamics::{self, Coefficients, DriveFlags};
use crate::error::{param, Error, Result};
use crate::model::{MomentState, PhysicalParams, Slot, SLOT_COUNT};
use crate::protocol::PulseSchedule;

/// Noise stream identifier: ensemble member `stream` of base seed `base`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct TrajectorySeed {
    pub base: u64,
    pub stream: u64,
}

impl From<u64> for TrajectorySeed {
    fn from(base: u64) -> Self {
        Self { base, stream: 0 }
    }
}

impl TrajectorySeed {
    pub fn member(base: u64, index: u64) -> Self {
        Self { base, stream: index }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.base);
        rng.set_stream(self.stream);
        rng
    }
}

/// Draws `dW ~ Normal(0, dt)`.
pub fn wiener_increment<R: Rng + ?Sized>(rng: &mut R, dt: f64) -> Result<f64> {
    if !(dt > 0.0) {
        return Err(param("dt", format!("must be positive, got {dt}")));
    }
    let z: f64 = rng.sample(StandardNormal);
    Ok(z * dt.sqrt())
}

/// Homodyne photocurrent `√(ηκ₂) Re⟨ã⟩ + dW/dt`.
pub fn photocurrent_sample(state: &MomentState, params: &PhysicalParams, dw: f64, dt: f64) -> f64 {
    (params.eta * params.kappa_2).sqrt() * state[Slot::A].re + dw / dt
}

/// Time-stepping scheme for trajectories.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Scheme {
    /// `y + f(y) dt + g(y) dW`.
    EulerMaruyama,
    /// `y + φ₁(J dt) f(y) dt + g(y) dW` with `φ₁(z) = (e^z − 1)/z` and `J`
    /// the drift Jacobian, refreshed every [`JACOBIAN_REFRESH`] steps. Linear
    /// modes are propagated exactly, so weakly damped rotations do not grow.
    #[default]
    ExponentialEuler,
}

/// Steps between Jacobian refreshes of [`Scheme::ExponentialEuler`].
pub const JACOBIAN_REFRESH: usize = 2000;

const DIM: usize = 2 * SLOT_COUNT;

fn to_real(state: &MomentState) -> [f64; DIM] {
    let mut x = [0.0; DIM];
    for (k, v) in state.values.iter().enumerate() {
        x[2 * k] = v.re;
        x[2 * k + 1] = v.im;
    }
    x
}

/// Drift Jacobian at `state` with the moments split into real and imaginary
/// parts, by central differences.
pub fn drift_jacobian(state: &MomentState, c: &Coefficients) -> Result<DMatrix<f64>> {
    let mut jac = DMatrix::<f64>::zeros(DIM, DIM);
    for k in 0..DIM {
        let slot = k / 2;
        let h = 1e-6 * state.values[slot].norm().max(1.0);
        let shifted = |sign: f64| {
            let mut probe = *state;
            if k % 2 == 0 {
                probe.values[slot].re += sign * h;
            } else {
                probe.values[slot].im += sign * h;
            }
            dynamics::evaluate(&probe, c).map(|(d, _)| to_real(&d))
        };
        let (up, down) = (shifted(1.0)?, shifted(-1.0)?);
        for j in 0..DIM {
            jac[(j, k)] = (up[j] - down[j]) / (2.0 * h);
        }
    }
    Ok(jac)
}

/// `φ₁(J dt)` from the exponential of the augmented matrix `[[J dt, 1], [0, 0]]`.
fn phi1(jac: &DMatrix<f64>, dt: f64) -> DMatrix<f64> {
    let mut aug = DMatrix::<f64>::zeros(2 * DIM, 2 * DIM);
    aug.view_mut((0, 0), (DIM, DIM)).copy_from(&(jac * dt));
    for k in 0..DIM {
        aug[(k, DIM + k)] = 1.0;
    }
    aug.exp().view((0, DIM), (DIM, DIM)).into_owned()
}

pub(crate) struct Stepper {
    c: Coefficients,
    dt: f64,
    scheme: Scheme,
    propagator: Option<DMatrix<f64>>,
    since_refresh: usize,
    /// Slots held constant.
    frozen: &'static [Slot],
}

impl Stepper {
    pub(crate) fn new(c: Coefficients, dt: f64, scheme: Scheme) -> Self {
        Self { c, dt, scheme, propagator: None, since_refresh: 0, frozen: &[] }
    }

    pub(crate) fn freezing(mut self, frozen: &'static [Slot]) -> Self {
        self.frozen = frozen;
        self
    }

    fn with_index(e: Error, index: usize) -> Error {
        match e {
            Error::IntegrationAbort { reason, .. } => Error::IntegrationAbort { step: index, reason },
            other => other,
        }
    }

    pub(crate) fn step(&mut self, state: &MomentState, dw: f64, index: usize) -> Result<(MomentState, f64)> {
        let (mut drift, mut diffusion) = dynamics::evaluate(state, &self.c).map_err(|e| Self::with_index(e, index))?;
        for &slot in self.frozen {
            drift[slot] = Complex64::new(0.0, 0.0);
            diffusion[slot] = Complex64::new(0.0, 0.0);
        }
        let mut next = *state;
        match self.scheme {
            Scheme::EulerMaruyama => next.axpy(self.dt, &drift),
            Scheme::ExponentialEuler => {
                if self.propagator.is_none() || self.since_refresh >= JACOBIAN_REFRESH {
                    let mut jac = drift_jacobian(state, &self.c).map_err(|e| Self::with_index(e, index))?;
                    for &slot in self.frozen {
                        let k = slot as usize;
                        jac.row_mut(2 * k).fill(0.0);
                        jac.row_mut(2 * k + 1).fill(0.0);
                    }
                    self.propagator = Some(phi1(&jac, self.dt));
                    self.since_refresh = 0;
                }
                self.since_refresh += 1;
                let p = self.propagator.as_ref().expect("set above");
                let f = to_real(&drift);
                let mut inc = [0.0; DIM];
                for (col, &fk) in p.column_iter().zip(f.iter()) {
                    if fk != 0.0 {
                        for (out, &pj) in inc.iter_mut().zip(col.iter()) {
                            *out += pj * fk;
                        }
                    }
                }
                for (k, v) in next.values.iter_mut().enumerate() {
                    *v += Complex64::new(inc[2 * k], inc[2 * k + 1]) * self.dt;
                }
            }
        }
        if dw != 0.0 {
            next.axpy(dw, &diffusion);
        }
        if !next.is_finite() {
            return Err(Error::IntegrationAbort {
                step: index,
                reason: "state became non-finite".into(),
            });
        }
        let repaired = next.repair_self_adjoint();
        Ok((next, repaired))
    }
}

/// One Euler–Maruyama step in the co-rotating frame, followed by zeroing the
/// imaginary parts of self-adjoint slots.
pub fn step(
    state: &MomentState,
    params: &PhysicalParams,
    flags: DriveFlags,
    dt: f64,
    dw: f64,
) -> Result<MomentState> {
    if !(dt > 0.0) {
        return Err(param("dt", format!("must be positive, got {dt}")));
    }
    let mut stepper = Stepper::new(Coefficients::rotating(params, flags), dt, Scheme::EulerMaruyama);
    stepper.step(state, dw, 0).map(|(s, _)| s)
}

/// The step-size bound `0.1 / max(κ, √N g, |Δ|, Ω_m)`.
pub fn resolution_dt(params: &PhysicalParams) -> f64 {
    let rates = [
        params.kappa,
        params.n().sqrt() * params.g,
        params.delta_c().abs(),
        params.delta_32().abs(),
        params.delta_21().abs(),
        params.omega_mw_amp,
    ];
    0.1 / rates.iter().copied().fold(0.0, f64::max)
}

/// Default trajectory step: a quarter of [`resolution_dt`]. Fitted squeezing
/// rates and minima change by a few percent at most between this and half of it.
pub fn reference_dt(params: &PhysicalParams) -> f64 {
    0.25 * resolution_dt(params)
}

/// Portion of a trajectory produced by one schedule segment.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentSpan {
    pub label: String,
    pub flags: DriveFlags,
    pub start_time: f64,
    pub steps: usize,
    pub dt: f64,
    /// Index of this segment's first sample in `photocurrent`, if measured.
    pub current_start: Option<usize>,
}

/// Time series of one noise realization.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    pub times: Vec<f64>,
    pub states: Vec<MomentState>,
    pub photocurrent: Vec<f64>,
    pub photocurrent_times: Vec<f64>,
    pub seed: TrajectorySeed,
    pub scheme: Scheme,
    pub schedule_id: String,
    pub segments: Vec<SegmentSpan>,
    pub params: PhysicalParams,
    pub max_repair: f64,
    pub max_population_violation: f64,
}

impl TrajectoryRecord {
    pub fn final_state(&self) -> &MomentState {
        self.states.last().expect("records hold at least the initial state")
    }

    pub fn segment(&self, label: &str) -> Option<&SegmentSpan> {
        self.segments.iter().find(|s| s.label == label)
    }

    /// `Σ I(t_k) dt` over the measured steps of segment `label`.
    pub fn integrated_current(&self, label: &str) -> Option<f64> {
        let seg = self.segment(label)?;
        let start = seg.current_start?;
        Some(self.photocurrent[start..start + seg.steps].iter().sum::<f64>() * seg.dt)
    }
}

fn population_violation(state: &MomentState) -> f64 {
    let s22 = state[Slot::S22].re;
    let s33 = state[Slot::S33].re;
    let s11 = state.ground_population();
    [s11, s22, s33]
        .iter()
        .map(|&p| (-p).max(p - 1.0).max(0.0))
        .fold(0.0, f64::max)
}

/// Integrates `initial` through `schedule`; snapshots every `stride` steps
/// plus the end of each segment.
pub fn simulate_trajectory(
    initial: &MomentState,
    schedule: &PulseSchedule,
    params: &PhysicalParams,
    dt: f64,
    seed: impl Into<TrajectorySeed>,
    stride: usize,
) -> Result<TrajectoryRecord> {
    simulate_trajectory_with(initial, schedule, params, dt, seed, stride, Scheme::default())
}

/// [`simulate_trajectory`] with an explicit stepping scheme.
pub fn simulate_trajectory_with(
    initial: &MomentState,
    schedule: &PulseSchedule,
    params: &PhysicalParams,
    dt: f64,
    seed: impl Into<TrajectorySeed>,
    stride: usize,
    scheme: Scheme,
) -> Result<TrajectoryRecord> {
    let seed = seed.into();
    params.validate()?;
    if !(dt > 0.0) {
        return Err(Error::Configuration(format!("dt must be positive, got {dt}")));
    }
    let bound = resolution_dt(params);
    if dt > bound * (1.0 + 1e-9) {
        return Err(Error::Configuration(format!(
            "dt = {dt:e} s does not resolve the fastest rate (needs ≤ {bound:e} s)"
        )));
    }
    if stride == 0 {
        return Err(Error::Configuration("stride must be at least 1".into()));
    }
    schedule.validate()?;
    let mut rng = seed.rng();
    let mut state = *initial;
    let mut record = TrajectoryRecord {
        times: vec![0.0],
        states: vec![state],
        photocurrent: Vec::new(),
        photocurrent_times: Vec::new(),
        seed,
        scheme,
        schedule_id: schedule.id.clone(),
        segments: Vec::with_capacity(schedule.segments.len()),
        params: *params,
        max_repair: 0.0,
        max_population_violation: population_violation(&state),
    };
    let mut t = 0.0;
    let mut global_step = 0usize;
    for segment in &schedule.segments {
        let steps = ((segment.duration / dt) - 1e-9).ceil().max(1.0) as usize;
        let seg_dt = segment.duration / steps as f64;
        let mut stepper = Stepper::new(Coefficients::rotating(params, segment.flags), seg_dt, scheme);
        let measured = segment.flags.measurement_on;
        record.segments.push(SegmentSpan {
            label: segment.label.clone(),
            flags: segment.flags,
            start_time: t,
            steps,
            dt: seg_dt,
            current_start: measured.then_some(record.photocurrent.len()),
        });
        let t0 = t;
        for k in 0..steps {
            let dw = if measured { wiener_increment(&mut rng, seg_dt)? } else { 0.0 };
            if measured {
                record.photocurrent.push(photocurrent_sample(&state, params, dw, seg_dt));
                record.photocurrent_times.push(t);
            }
            let (next, repaired) = stepper.step(&state, dw, global_step)?;
            state = next;
            record.max_repair = record.max_repair.max(repaired);
            global_step += 1;
            t = t0 + (k + 1) as f64 * seg_dt;
            let violation = population_violation(&state);
            record.max_population_violation = record.max_population_violation.max(violation);
            if global_step % stride == 0 || k + 1 == steps {
                if record.times.last().is_some_and(|&last| t > last) {
                    record.times.push(t);
                    record.states.push(state);
                }
            }
        }
        debug!("segment `{}` done: {steps} steps of {seg_dt:e} s", segment.label);
    }
    if record.max_repair > 1e-6 {
        warn!("large self-adjoint repair {:e} in trajectory {:?}", record.max_repair, seed);
    }
    if record.max_population_violation > 1e-3 {
        warn!(
            "population left [0, 1] by {:e} in trajectory {:?}",
            record.max_population_violation, seed
        );
    }
    Ok(record)
}

/// Runs members `0..count` of base seed `base` concurrently; results are in
/// member order.
pub fn simulate_ensemble(
    initial: &MomentState,
    schedule: &PulseSchedule,
    params: &PhysicalParams,
    dt: f64,
    base: u64,
    count: usize,
    stride: usize,
) -> Result<Vec<TrajectoryRecord>> {
    (0..count as u64)
        .into_par_iter()
        .map(|k| simulate_trajectory(initial, schedule, params, dt, TrajectorySeed::member(base, k), stride))
        .collect()
}
