//! Fits of squeezing dynamics, minimal-squeezing times, scaling exponents and
//! rotation frequencies.

use std::f64::consts::{E, PI};

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};

/// `ξ²(t) = A/(1 + k₁t) + (1 − A) e^{k₂t}`.
pub fn squeezing_model(t: f64, a: f64, k1: f64, k2: f64) -> f64 {
    a / (1.0 + k1 * t) + (1.0 - a) * (k2 * t).exp()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitResult {
    pub a: f64,
    /// Squeezing rate (1/s).
    pub k1: f64,
    /// Anti-squeezing rate (1/s).
    pub k2: f64,
    /// Root-mean-square residual.
    pub residual_norm: f64,
    /// `ξ²` at the minimum of the fitted curve, if it has an interior one.
    pub xi_min: Option<f64>,
    pub tau: Option<f64>,
    /// Set when the data carry no squeezing signal (flat series).
    pub low_information: bool,
}

fn residuals(times: &[f64], ys: &[f64], a: f64, k1: f64, k2: f64) -> f64 {
    times
        .iter()
        .zip(ys)
        .map(|(&t, &y)| {
            let r = squeezing_model(t, a, k1, k2) - y;
            r * r
        })
        .sum()
}

/// Projected Levenberg–Marquardt in scaled rates `(A, k₁T, k₂T)`.
fn refine(times: &[f64], ys: &[f64], span: f64, start: [f64; 3]) -> Option<([f64; 3], f64)> {
    let clamp = |p: [f64; 3]| [p[0].clamp(1e-9, 1.0), p[1].max(0.0), p[2].clamp(0.0, 700.0)];
    let mut p = clamp(start);
    let cost = |p: &[f64; 3]| residuals(times, ys, p[0], p[1] / span, p[2] / span);
    let mut c = cost(&p);
    if !c.is_finite() {
        return None;
    }
    let mut lambda = 1e-3;
    for _ in 0..500 {
        let (a, k1, k2) = (p[0], p[1] / span, p[2] / span);
        let mut jtj = Matrix3::<f64>::zeros();
        let mut jtr = Vector3::<f64>::zeros();
        for (&t, &y) in times.iter().zip(ys) {
            let d = 1.0 + k1 * t;
            let ex = (k2 * t).exp();
            let r = a / d + (1.0 - a) * ex - y;
            let j = Vector3::new(1.0 / d - ex, -a * t / (d * d) / span, (1.0 - a) * t * ex / span);
            jtj += j * j.transpose();
            jtr += j * r;
        }
        if jtr.norm() < 1e-300 {
            return Some((p, c));
        }
        let mut improved = false;
        for _ in 0..40 {
            let mut m = jtj;
            for i in 0..3 {
                m[(i, i)] += lambda * jtj[(i, i)].max(1e-12);
            }
            let Some(step) = m.lu().solve(&(-jtr)) else {
                lambda *= 10.0;
                continue;
            };
            let trial = clamp([p[0] + step[0], p[1] + step[1], p[2] + step[2]]);
            let ct = cost(&trial);
            if ct.is_finite() && ct <= c {
                let rel_change = (c - ct) / c.max(1e-300);
                let step_size = (0..3).map(|i| (trial[i] - p[i]).abs() / (p[i].abs() + 1e-9)).fold(0.0, f64::max);
                p = trial;
                c = ct;
                lambda = (lambda / 3.0).max(1e-15);
                improved = true;
                if rel_change < 1e-15 && step_size < 1e-12 {
                    return Some((p, c));
                }
                break;
            }
            lambda *= 4.0;
        }
        if !improved {
            // no descent direction left: stationary within round-off
            return Some((p, c));
        }
    }
    Some((p, c))
}

/// Least-squares fit of [`squeezing_model`] with a multi-start grid.
pub fn fit_squeezing_curve(times: &[f64], xi: &[f64]) -> Result<FitResult> {
    if times.len() != xi.len() {
        return Err(Error::Domain("times and values differ in length".into()));
    }
    if times.len() < 10 {
        return Err(Error::Domain(format!("need at least 10 samples, got {}", times.len())));
    }
    if xi.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
        return Err(Error::Domain("squeezing values must be positive and finite".into()));
    }
    let n = times.len() as f64;
    if xi.iter().all(|&v| (v - 1.0).abs() < 1e-12) {
        return Ok(FitResult {
            a: 1.0,
            k1: 0.0,
            k2: 0.0,
            residual_norm: (residuals(times, xi, 1.0, 0.0, 0.0) / n).sqrt(),
            xi_min: None,
            tau: None,
            low_information: true,
        });
    }
    let span = times.iter().copied().fold(0.0, f64::max);
    if !(span > 0.0) {
        return Err(Error::Domain("time span must be positive".into()));
    }
    let rates: Vec<f64> = (0..7).map(|i| 1e3 * 10f64.powf(4.0 * i as f64 / 6.0)).collect();
    let mut best: Option<([f64; 3], f64)> = None;
    for &a in &[0.3, 0.6, 0.9] {
        for &k1 in &rates {
            for &k2 in &rates {
                if k2 * span > 700.0 {
                    continue;
                }
                if let Some((p, c)) = refine(times, xi, span, [a, k1 * span, k2 * span]) {
                    if best.is_none_or(|(_, bc)| c < bc) {
                        best = Some((p, c));
                    }
                }
            }
        }
    }
    let Some((p, c)) = best else {
        return Err(Error::Fit { best_residual: f64::INFINITY });
    };
    let (a, k1, k2) = (p[0], p[1] / span, p[2] / span);
    let residual_norm = (c / n).sqrt();
    if !residual_norm.is_finite() {
        return Err(Error::Fit { best_residual: residual_norm });
    }
    let minimum = minimal_squeezing_time(a, k1, k2).ok();
    Ok(FitResult {
        a,
        k1,
        k2,
        residual_norm,
        xi_min: minimum.map(|m| m.1),
        tau: minimum.map(|m| m.0),
        low_information: false,
    })
}

/// Principal branch of the Lambert W function.
pub fn lambert_w0(s: f64) -> Result<f64> {
    let branch = -1.0 / E;
    if s.is_nan() || s < branch {
        return Err(Error::Domain(format!("lambert W₀ undefined at {s}")));
    }
    if s == 0.0 {
        return Ok(0.0);
    }
    if s == branch {
        return Ok(-1.0);
    }
    if s.is_infinite() {
        return Ok(f64::INFINITY);
    }
    let mut w = if s < -0.25 {
        let p = (2.0 * (E * s + 1.0)).sqrt();
        -1.0 + p - p * p / 3.0 + 11.0 / 72.0 * p * p * p
    } else if s < 3.0 {
        (1.0 + s).ln() * 0.75
    } else {
        let l = s.ln();
        l - l.ln()
    };
    for _ in 0..100 {
        let ew = w.exp();
        let f = w * ew - s;
        let wp1 = w + 1.0;
        if wp1.abs() < 1e-300 {
            break;
        }
        let denom = ew * wp1 - (w + 2.0) * f / (2.0 * wp1);
        let dw = f / denom;
        w -= dw;
        if dw.abs() <= 1e-16 * (1.0 + w.abs()) {
            break;
        }
    }
    Ok(w)
}

/// `W₀(e^L)` for large `L`, solving `w + ln w = L`.
fn lambert_w0_of_exp(l: f64) -> f64 {
    if l < 500.0 {
        return lambert_w0(l.exp()).unwrap_or(f64::NAN);
    }
    let mut w = l - l.ln();
    for _ in 0..50 {
        let f = w + w.ln() - l;
        let dw = f / (1.0 + 1.0 / w);
        w -= dw;
        if dw.abs() <= 1e-16 * w {
            break;
        }
    }
    w
}

/// Time `τ = 2W(s)/k₂ − 1/k₁` of the minimum of the fitted curve and the value
/// `ξ²(τ)` there.
pub fn minimal_squeezing_time(a: f64, k1: f64, k2: f64) -> Result<(f64, f64)> {
    if !(a > 0.0 && a < 1.0) || !(k1 > 0.0) || !(k2 > 0.0) {
        return Err(Error::NoMinimum);
    }
    let ratio = k2 / k1;
    let ln_s = (k2 / (2.0 * k1)).ln() + 0.5 * (a.ln() + k1.ln() + ratio - (1.0 - a).ln() - k2.ln());
    let w = lambert_w0_of_exp(ln_s);
    let tau = 2.0 * w / k2 - 1.0 / k1;
    if !(tau > 0.0) || !tau.is_finite() {
        return Err(Error::NoMinimum);
    }
    Ok((tau, squeezing_model(tau, a, k1, k2)))
}

/// Numeric minimizer of the fitted curve on `[0, t_max]`: golden-section
/// search, then bisection on the sign of the analytic derivative to get past
/// the flatness of the minimum.
pub fn numeric_argmin(a: f64, k1: f64, k2: f64, t_max: f64) -> f64 {
    let f = |t: f64| squeezing_model(t, a, k1, k2);
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut lo, mut hi) = (0.0, t_max);
    let mut x1 = hi - phi * (hi - lo);
    let mut x2 = lo + phi * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..200 {
        if f1 < f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - phi * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + phi * (hi - lo);
            f2 = f(x2);
        }
        if hi - lo < 1e-4 * t_max {
            break;
        }
    }
    let slope = |t: f64| -a * k1 / (1.0 + k1 * t).powi(2) + (1.0 - a) * k2 * (k2 * t).exp();
    let (mut lo, mut hi) = ((lo - 1e-4 * t_max).max(0.0), (hi + 1e-4 * t_max).min(t_max));
    if slope(lo) >= 0.0 || slope(hi) <= 0.0 {
        return 0.5 * (lo + hi);
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if slope(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Log-log least-squares line `ln y = exponent · ln x + ln prefactor`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerLaw {
    pub exponent: f64,
    pub prefactor: f64,
}

pub fn fit_power_law_full(xs: &[f64], ys: &[f64]) -> Result<PowerLaw> {
    if xs.len() != ys.len() || xs.len() < 3 {
        return Err(Error::Domain("need at least three (x, y) pairs".into()));
    }
    if xs.iter().chain(ys).any(|&v| !(v > 0.0 && v.is_finite())) {
        return Err(Error::Domain("power-law fit needs positive values".into()));
    }
    let n = xs.len() as f64;
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Domain("x values are all equal".into()));
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let exponent = sxy / sxx;
    Ok(PowerLaw {
        exponent,
        prefactor: (my - exponent * mx).exp(),
    })
}

pub fn fit_power_law(xs: &[f64], ys: &[f64]) -> Result<f64> {
    fit_power_law_full(xs, ys).map(|p| p.exponent)
}

/// `offset + a cos(2πft) + b sin(2πft)` fitted at fixed `f`.
fn sinusoid_at(times: &[f64], ys: &[f64], f: f64) -> (f64, [f64; 3]) {
    let w = 2.0 * PI * f;
    let mut m = Matrix3::<f64>::zeros();
    let mut v = Vector3::<f64>::zeros();
    for (&t, &y) in times.iter().zip(ys) {
        let basis = Vector3::new(1.0, (w * t).cos(), (w * t).sin());
        m += basis * basis.transpose();
        v += basis * y;
    }
    let coef = m.lu().solve(&v).unwrap_or_else(Vector3::zeros);
    let sse: f64 = times
        .iter()
        .zip(ys)
        .map(|(&t, &y)| {
            let r = coef[0] + coef[1] * (w * t).cos() + coef[2] * (w * t).sin() - y;
            r * r
        })
        .sum();
    (sse, [coef[0], coef[1], coef[2]])
}

/// Sinusoid fit of a series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sinusoid {
    /// Frequency in Hz.
    pub frequency: f64,
    pub amplitude: f64,
    pub phase: f64,
    pub offset: f64,
    pub residual_rms: f64,
}

pub fn fit_sinusoid(times: &[f64], series: &[f64]) -> Result<Sinusoid> {
    if times.len() != series.len() || times.len() < 8 {
        return Err(Error::Domain("need at least 8 samples of equal length".into()));
    }
    let span = times[times.len() - 1] - times[0];
    if !(span > 0.0) {
        return Err(Error::Domain("time span must be positive".into()));
    }
    let stride = (times.len() / 2048).max(1);
    let ts: Vec<f64> = times.iter().step_by(stride).map(|t| t - times[0]).collect();
    let ys: Vec<f64> = series.iter().step_by(stride).copied().collect();
    let dt = span / (times.len() - 1) as f64 * stride as f64;
    let nyquist = 0.5 / dt;
    let df = 1.0 / (4.0 * span);
    let mut best = (f64::INFINITY, 0.0);
    let mut f = df;
    while f < nyquist {
        let (sse, _) = sinusoid_at(&ts, &ys, f);
        if sse < best.0 {
            best = (sse, f);
        }
        f += df;
    }
    if best.0.is_infinite() {
        return Err(Error::NoOscillation("no candidate frequency".into()));
    }
    // golden-section refinement within one grid step
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut lo, mut hi) = ((best.1 - df).max(df * 1e-3), best.1 + df);
    let sse = |f: f64| sinusoid_at(&ts, &ys, f).0;
    let mut x1 = hi - phi * (hi - lo);
    let mut x2 = lo + phi * (hi - lo);
    let (mut f1, mut f2) = (sse(x1), sse(x2));
    for _ in 0..200 {
        if f1 < f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - phi * (hi - lo);
            f1 = sse(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + phi * (hi - lo);
            f2 = sse(x2);
        }
        if hi - lo < 1e-13 * best.1 {
            break;
        }
    }
    let freq = 0.5 * (lo + hi);
    let (sse, coef) = sinusoid_at(&ts, &ys, freq);
    Ok(Sinusoid {
        frequency: freq,
        amplitude: coef[1].hypot(coef[2]),
        phase: (-coef[2]).atan2(coef[1]),
        offset: coef[0],
        residual_rms: (sse / ts.len() as f64).sqrt(),
    })
}

/// Dominant oscillation frequency (Hz) of `series`; requires at least 1.5
/// visible periods and an amplitude well above the fit residual.
pub fn oscillation_frequency(times: &[f64], series: &[f64]) -> Result<f64> {
    let fit = fit_sinusoid(times, series)?;
    let span = times[times.len() - 1] - times[0];
    let scale = series.iter().map(|v| v.abs()).fold(0.0, f64::max);
    if fit.frequency * span < 1.5 {
        return Err(Error::NoOscillation(format!(
            "only {:.2} periods in the window",
            fit.frequency * span
        )));
    }
    if !(fit.amplitude > 1e-9 * scale) || fit.amplitude < 3.0 * fit.residual_rms {
        return Err(Error::NoOscillation(format!(
            "amplitude {:e} below noise floor {:e}",
            fit.amplitude, fit.residual_rms
        )));
    }
    Ok(fit.frequency)
}

/// Signed mean precession rate (Hz) of the transverse spin, from the slope of
/// the unwrapped azimuth.
pub fn mean_rotation_rate(times: &[f64], jx: &[f64], jy: &[f64]) -> Result<f64> {
    if times.len() != jx.len() || times.len() != jy.len() || times.len() < 2 {
        return Err(Error::Domain("need at least two samples of equal length".into()));
    }
    let mut phases = Vec::with_capacity(times.len());
    let mut last = 0.0;
    let mut offset = 0.0;
    for (k, (&x, &y)) in jx.iter().zip(jy).enumerate() {
        if x == 0.0 && y == 0.0 {
            return Err(Error::Domain("transverse spin vanishes".into()));
        }
        let raw = y.atan2(x);
        if k > 0 {
            let mut d = raw + offset - last;
            while d > PI {
                offset -= 2.0 * PI;
                d -= 2.0 * PI;
            }
            while d < -PI {
                offset += 2.0 * PI;
                d += 2.0 * PI;
            }
        }
        last = raw + offset;
        phases.push(last);
    }
    let n = times.len() as f64;
    let mt = times.iter().sum::<f64>() / n;
    let mp = phases.iter().sum::<f64>() / n;
    let stt: f64 = times.iter().map(|t| (t - mt).powi(2)).sum();
    let stp: f64 = times.iter().zip(&phases).map(|(t, p)| (t - mt) * (p - mp)).sum();
    Ok(stp / stt / (2.0 * PI))
}
