//! Pulse schedules and the measurement experiments built from them.

use std::collections::HashSet;
use std::f64::consts::{FRAC_PI_2, PI};

use rayon::prelude::*;

use crate::analysis::{fit_squeezing_curve, FitResult};
use crate::dynamics::DriveFlags;
use crate::error::{param, Error, Result};
use crate::integrator::{reference_dt, simulate_trajectory, TrajectoryRecord, TrajectorySeed};
use crate::model::{init_all_down, init_spin_coherent, PhysicalParams};
use crate::observables::{collective_spin, spin_variances, squeezing_parameter};

/// One constant-drive interval.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub label: String,
    pub duration: f64,
    pub flags: DriveFlags,
}

impl Segment {
    pub fn new(label: impl Into<String>, duration: f64, flags: DriveFlags) -> Self {
        Self {
            label: label.into(),
            duration,
            flags,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PulseSchedule {
    pub id: String,
    pub segments: Vec<Segment>,
}

impl PulseSchedule {
    pub fn new(id: impl Into<String>, segments: Vec<Segment>) -> Result<Self> {
        let s = Self {
            id: id.into(),
            segments,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for seg in &self.segments {
            if !(seg.duration > 0.0 && seg.duration.is_finite()) {
                return Err(Error::Configuration(format!(
                    "segment `{}` has non-positive duration {}",
                    seg.label, seg.duration
                )));
            }
            if !seen.insert(seg.label.as_str()) {
                return Err(Error::Configuration(format!("duplicate segment label `{}`", seg.label)));
            }
        }
        Ok(())
    }

    pub fn total_duration(&self) -> f64 {
        self.segments.iter().map(|s| s.duration).sum()
    }

    /// A single continuously probed and detected interval.
    pub fn continuous_probe(duration: f64) -> Result<Self> {
        Self::new("squeeze", vec![Segment::new("probe", duration, DriveFlags::PROBE)])
    }
}

/// Duration of a resonant microwave rotation by `theta`; the Rabi rate is `2Ω_m`.
pub fn mw_pulse_duration(theta: f64, params: &PhysicalParams) -> Result<f64> {
    if !(params.omega_mw_amp > 0.0) {
        return Err(param("omega_mw_amp", "must be positive for a microwave pulse"));
    }
    Ok(theta / (2.0 * params.omega_mw_amp))
}

/// Time series of one squeezing run.
#[derive(Debug, Clone)]
pub struct SqueezingTrace {
    pub record: TrajectoryRecord,
    /// `ξ²` at each snapshot; NaN once the transverse spin has vanished.
    pub xi2: Vec<f64>,
}

impl SqueezingTrace {
    pub fn from_record(record: TrajectoryRecord) -> Result<Self> {
        let n = record.params.n_atoms;
        let xi2 = record
            .states
            .iter()
            .map(|s| match squeezing_parameter(s, n) {
                Ok(v) => Ok(v),
                Err(Error::UndefinedSqueezing) => Ok(f64::NAN),
                Err(e) => Err(e),
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { record, xi2 })
    }

    /// Leading part of the series on which `ξ²` is defined.
    pub fn defined_prefix(&self) -> (&[f64], &[f64]) {
        let end = self.xi2.iter().position(|v| !v.is_finite()).unwrap_or(self.xi2.len());
        (&self.record.times[..end], &self.xi2[..end])
    }

    /// Smallest sampled `ξ²` and the time it occurs.
    pub fn minimum(&self) -> Option<(f64, f64)> {
        let (times, xi2) = self.defined_prefix();
        times
            .iter()
            .zip(xi2)
            .map(|(&t, &x)| (t, x))
            .min_by(|a, b| a.1.total_cmp(&b.1))
    }

    pub fn fit(&self) -> Result<FitResult> {
        let (times, xi2) = self.defined_prefix();
        fit_squeezing_curve(times, xi2)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SqueezingOptions {
    /// Probe offset from the upper dressed state (rad/s).
    pub probe_detuning: f64,
    pub duration: f64,
    /// `None` selects [`reference_dt`].
    pub dt: Option<f64>,
    pub stride: usize,
}

impl Default for SqueezingOptions {
    fn default() -> Self {
        Self {
            probe_detuning: 0.0,
            duration: 20e-6,
            dt: None,
            stride: 100,
        }
    }
}

/// Continuous probing of a `+y` coherent state, one trace per seed.
pub fn run_squeezing(params: &PhysicalParams, options: &SqueezingOptions, seeds: &[TrajectorySeed]) -> Result<Vec<SqueezingTrace>> {
    let p = params.with_probe_detuning(options.probe_detuning);
    let dt = options.dt.unwrap_or_else(|| reference_dt(&p));
    let schedule = PulseSchedule::continuous_probe(options.duration)?;
    let initial = init_spin_coherent(&p, FRAC_PI_2);
    seeds
        .par_iter()
        .map(|&seed| {
            let rec = simulate_trajectory(&initial, &schedule, &p, dt, seed, options.stride)?;
            SqueezingTrace::from_record(rec)
        })
        .collect()
}

/// Probe-window and pulse lengths of the generation and verification sequence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerificationTiming {
    pub probe: f64,
    /// `None` uses the computed π/2 and π durations.
    pub half_pi: Option<f64>,
    pub pi: Option<f64>,
}

impl Default for VerificationTiming {
    fn default() -> Self {
        Self {
            probe: 5e-6,
            half_pi: None,
            pi: None,
        }
    }
}

pub const PROBE_LABELS: [&str; 4] = ["probe1", "probe2", "probe3", "probe4"];

/// π/2 → probe₁ → π → probe₂ → probe₃ → π → probe₄, with the probe gated off
/// during the microwave pulses.
pub fn verification_schedule(params: &PhysicalParams, timing: &VerificationTiming) -> Result<PulseSchedule> {
    let half = match timing.half_pi {
        Some(d) => d,
        None => mw_pulse_duration(FRAC_PI_2, params)?,
    };
    let pi = match timing.pi {
        Some(d) => d,
        None => mw_pulse_duration(PI, params)?,
    };
    let probe = |label: &str| Segment::new(label, timing.probe, DriveFlags::PROBE);
    PulseSchedule::new(
        "verification",
        vec![
            Segment::new("half_pi", half, DriveFlags::MICROWAVE),
            probe("probe1"),
            Segment::new("pi1", pi, DriveFlags::MICROWAVE),
            probe("probe2"),
            probe("probe3"),
            Segment::new("pi2", pi, DriveFlags::MICROWAVE),
            probe("probe4"),
        ],
    )
}

#[derive(Debug, Clone)]
pub struct VerificationResult {
    /// Integrated photocurrent of each probe window.
    pub n: [f64; 4],
    /// `n₁ − n₂`.
    pub jz1: f64,
    /// `n₄ − n₃`.
    pub jz2: f64,
    pub record: TrajectoryRecord,
}

pub fn verification_experiment(
    params: &PhysicalParams,
    timing: &VerificationTiming,
    seed: impl Into<TrajectorySeed>,
    dt: f64,
    stride: usize,
) -> Result<VerificationResult> {
    let schedule = verification_schedule(params, timing)?;
    let record = simulate_trajectory(&init_all_down(params), &schedule, params, dt, seed, stride)?;
    let mut n = [0.0; 4];
    for (slot, label) in n.iter_mut().zip(PROBE_LABELS) {
        *slot = record
            .integrated_current(label)
            .ok_or_else(|| Error::Configuration(format!("segment `{label}` was not measured")))?;
    }
    Ok(VerificationResult {
        n,
        jz1: n[0] - n[1],
        jz2: n[3] - n[2],
        record,
    })
}

/// Verification runs for members `0..count` of `base`.
pub fn verification_ensemble(
    params: &PhysicalParams,
    timing: &VerificationTiming,
    base: u64,
    count: usize,
    dt: f64,
    stride: usize,
) -> Result<Vec<VerificationResult>> {
    (0..count as u64)
        .into_par_iter()
        .map(|k| verification_experiment(params, timing, TrajectorySeed::member(base, k), dt, stride))
        .collect()
}

/// Pearson correlation of `(J_{z,1}, J_{z,2})` pairs.
pub fn ensemble_correlation(pairs: &[(f64, f64)]) -> Result<f64> {
    if pairs.len() < 2 {
        return Err(Error::UndefinedCorrelation("need at least two pairs".into()));
    }
    let n = pairs.len() as f64;
    let mx = pairs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pairs.iter().map(|p| p.1).sum::<f64>() / n;
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for &(x, y) in pairs {
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
        sxy += (x - mx) * (y - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::UndefinedCorrelation("a margin has zero variance".into()));
    }
    Ok(sxy / (sxx * syy).sqrt())
}

/// Spin length, `ΔJ_z²` and `ξ²` at the end of each labelled segment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmentSummary {
    pub jz: f64,
    pub j_perp: f64,
    pub var_jz: f64,
    pub xi2: Option<f64>,
}

/// Summaries of the state at the end of every segment of `record`.
pub fn segment_summaries(record: &TrajectoryRecord) -> Vec<(String, SegmentSummary)> {
    let n = record.params.n_atoms;
    record
        .segments
        .iter()
        .map(|seg| {
            let end = seg.start_time + seg.steps as f64 * seg.dt;
            let idx = record
                .times
                .iter()
                .position(|&t| (t - end).abs() <= 1e-9 * end.max(1e-12))
                .unwrap_or(record.times.len() - 1);
            let s = &record.states[idx];
            let spin = collective_spin(s, n);
            let var_jz = spin_variances(s, n).map(|v| v.raw[2]).unwrap_or(f64::NAN);
            (
                seg.label.clone(),
                SegmentSummary {
                    jz: spin.jz,
                    j_perp: spin.transverse_sq().sqrt(),
                    var_jz,
                    xi2: squeezing_parameter(s, n).ok(),
                },
            )
        })
        .collect()
}

/// Deterministic probing of an `+x` coherent state without detection; the
/// transverse spin precesses at the ac-Stark rate.
pub fn stark_rotation(params: &PhysicalParams, duration: f64, dt: f64, stride: usize) -> Result<TrajectoryRecord> {
    let flags = DriveFlags { probe_on: true, microwave_on: false, measurement_on: false };
    let schedule = PulseSchedule::new("stark", vec![Segment::new("probe", duration, flags)])?;
    simulate_trajectory(&init_spin_coherent(params, 0.0), &schedule, params, dt, 0, stride)
}
