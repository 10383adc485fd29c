//! Trace analysis: revival period, interference prediction, isotopologue
//! peak resolution and abundance estimation.

use rustfft::{num_complex::Complex, FftPlanner};

use crate::ensemble::{envelope, SignalTrace};
use crate::error::{Error, Result};
use crate::rotor::{revival_time, IsotopologueSpec};

/// Minimum autocorrelation at the comb peak for a trace to count as periodic.
pub const MIN_COMB_CONTRAST: f64 = 0.1;
/// A lag is a comb candidate if its autocorrelation reaches this share of the best one.
const FUNDAMENTAL_SHARE: f64 = 0.9;
/// Half-width of a peak window as a share of the adjacent-species spacing.
pub const WINDOW_SHARE: f64 = 0.25;
pub const DEFAULT_INTERFERENCE_TOL: f64 = 0.1;
/// Prompt-response level that delimits the extent of one revival feature.
const FEATURE_LEVEL: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeriodEstimate {
    pub period: f64,
    pub uncertainty: f64,
    /// Autocorrelation at the selected lag.
    pub contrast: f64,
}

/// Signed mixture response `Σ f_s χ_s env`, or the signal itself when the
/// trace carries no per-species columns.
pub fn period_series(trace: &SignalTrace) -> Vec<f64> {
    if trace.chi.is_empty() {
        return trace.signal.clone();
    }
    trace
        .times
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            let x: f64 = trace.fractions.iter().zip(&trace.chi).map(|(f, c)| f * c[i]).sum();
            x * envelope(t, trace.decay_tau)
        })
        .collect()
}

/// Pearson autocorrelation over the overlapping part for lags `0..max_lag`.
pub fn autocorrelation(x: &[f64], max_lag: usize) -> Vec<f64> {
    let n = x.len();
    let max_lag = max_lag.min(n.saturating_sub(2));
    let size = (2 * n).next_power_of_two();
    let mut planner = FftPlanner::<f64>::new();
    let forward = planner.plan_fft_forward(size);
    let inverse = planner.plan_fft_inverse(size);

    // Centre first so the lagged products do not lose precision to the mean.
    let mean = x.iter().sum::<f64>() / n as f64;
    let mut buf: Vec<Complex<f64>> = x.iter().map(|v| Complex::new(v - mean, 0.0)).collect();
    buf.resize(size, Complex::new(0.0, 0.0));
    forward.process(&mut buf);
    for v in buf.iter_mut() {
        *v = Complex::new(v.norm_sqr(), 0.0);
    }
    inverse.process(&mut buf);
    let scale = 1.0 / size as f64;

    let mut s1 = vec![0.0; n + 1];
    let mut s2 = vec![0.0; n + 1];
    for (i, v) in x.iter().enumerate() {
        let c = v - mean;
        s1[i + 1] = s1[i] + c;
        s2[i + 1] = s2[i] + c * c;
    }
    (0..=max_lag)
        .map(|k| {
            let m = (n - k) as f64;
            let (sa, qa) = (s1[n - k], s2[n - k]);
            let (sb, qb) = (s1[n] - s1[k], s2[n] - s2[k]);
            let cov = buf[k].re * scale - sa * sb / m;
            let va = qa - sa * sa / m;
            let vb = qb - sb * sb / m;
            if va <= 0.0 || vb <= 0.0 {
                0.0
            } else {
                cov / (va * vb).sqrt()
            }
        })
        .collect()
}

fn uniform_step(times: &[f64]) -> Result<f64> {
    if times.len() < 3 {
        return Err(Error::InvalidArgument("trace needs at least 3 samples".into()));
    }
    let dt = (times[times.len() - 1] - times[0]) / (times.len() - 1) as f64;
    let uneven = times
        .windows(2)
        .any(|w| ((w[1] - w[0]) - dt).abs() > 1e-6 * dt.max(1e-12));
    if !(dt > 0.0) || uneven {
        return Err(Error::InvalidArgument("trace must be uniformly sampled".into()));
    }
    Ok(dt)
}

/// Fundamental comb period of a uniformly sampled series.
pub fn estimate_revival_period(times: &[f64], values: &[f64]) -> Result<PeriodEstimate> {
    if times.len() != values.len() {
        return Err(Error::InvalidArgument("times and values differ in length".into()));
    }
    let dt = uniform_step(times)?;
    let n = values.len();
    let first = values[0];
    if values.iter().all(|v| (v - first).abs() <= 1e-15 * first.abs().max(1e-300)) {
        return Err(Error::NoCombFound("trace is constant".into()));
    }
    let max_lag = n / 5;
    let r = autocorrelation(values, max_lag);
    if r.len() < 4 {
        return Err(Error::NoCombFound("trace too short".into()));
    }

    // Skip the zero-lag lobe: advance to its first local minimum.
    let mut start = 1;
    while start + 1 < r.len() && r[start + 1] < r[start] {
        start += 1;
    }
    let peaks: Vec<usize> = (start.max(1)..r.len() - 1)
        .filter(|&k| r[k] >= r[k - 1] && r[k] > r[k + 1])
        .collect();
    let best = peaks.iter().map(|&k| r[k]).fold(f64::NEG_INFINITY, f64::max);
    if peaks.is_empty() || best < MIN_COMB_CONTRAST {
        return Err(Error::NoCombFound(format!(
            "autocorrelation contrast {:.3} below {MIN_COMB_CONTRAST}",
            best.max(0.0)
        )));
    }
    let k = *peaks
        .iter()
        .find(|&&k| r[k] >= FUNDAMENTAL_SHARE * best)
        .expect("best peak qualifies");

    let (a, b, c) = (r[k - 1], r[k], r[k + 1]);
    let curvature = a - 2.0 * b + c;
    let shift = if curvature < 0.0 { 0.5 * (a - c) / curvature } else { 0.0 };
    let height = b - 0.25 * (a - c) * shift;
    let period = (k as f64 + shift) * dt;
    // Lag offset over which the peak loses its missing correlation, plus the grid limit.
    let spread = if curvature < 0.0 {
        dt * (2.0 * (1.0 - height).max(0.0) / -curvature).sqrt()
    } else {
        dt
    };
    let uncertainty = spread.hypot(dt / 12f64.sqrt());
    Ok(PeriodEstimate {
        period,
        uncertainty,
        contrast: height,
    })
}

pub fn signal_revival_period(trace: &SignalTrace) -> Result<PeriodEstimate> {
    estimate_revival_period(&trace.times, &period_series(trace))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum InterferenceKind {
    Constructive,
    Destructive,
    Fractional,
}

impl InterferenceKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            InterferenceKind::Constructive => "constructive",
            InterferenceKind::Destructive => "destructive",
            InterferenceKind::Fractional => "fractional",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InterferenceEvent {
    pub time: f64,
    pub kind: InterferenceKind,
    /// Revival orders (multiples of each species' period) that coincide.
    pub order_a: f64,
    pub order_b: f64,
    pub mismatch: f64,
}

fn classify(quarters_a: u64, quarters_b: u64) -> InterferenceKind {
    let odd = |q: u64| q % 2 == 1;
    let half = |q: u64| q % 4 == 2;
    if odd(quarters_a) || odd(quarters_b) {
        InterferenceKind::Fractional
    } else if half(quarters_a) != half(quarters_b) {
        InterferenceKind::Destructive
    } else {
        InterferenceKind::Constructive
    }
}

/// Times up to `horizon` where quarter-multiples of both revival periods
/// coincide within `tol`.
pub fn predict_interference_times(
    a: &IsotopologueSpec,
    b: &IsotopologueSpec,
    horizon: f64,
    tol: f64,
) -> Result<Vec<InterferenceEvent>> {
    let (ta, tb) = (revival_time(a), revival_time(b));
    if !(horizon > ta.max(tb)) {
        return Err(Error::InvalidArgument(format!(
            "horizon {horizon} ps must exceed both revival periods"
        )));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance {tol} must be > 0")));
    }
    let mut events = Vec::new();
    let mut qa = 1u64;
    while qa as f64 * ta / 4.0 <= horizon + tol {
        let t_a = qa as f64 * ta / 4.0;
        let qb = (t_a / (tb / 4.0)).round().max(1.0) as u64;
        let t_b = qb as f64 * tb / 4.0;
        let mismatch = (t_a - t_b).abs();
        let time = 0.5 * (t_a + t_b);
        if mismatch < tol && time <= horizon {
            events.push(InterferenceEvent {
                time,
                kind: classify(qa, qb),
                order_a: qa as f64 / 4.0,
                order_b: qb as f64 / 4.0,
                mismatch,
            });
        }
        qa += 1;
    }
    Ok(events)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedPeak {
    pub species: String,
    /// `order · T_rev` of the species.
    pub expected: f64,
    /// Location of the window maximum.
    pub time: f64,
    /// Signal-weighted mean time over the window.
    pub centroid: f64,
    pub amplitude: f64,
    pub window: (f64, f64),
}

/// Duration of one revival feature, taken as twice the extent of the prompt
/// response above `FEATURE_LEVEL` of its maximum.
pub fn feature_width(times: &[f64], signal: &[f64], search: f64) -> Option<f64> {
    let t0 = *times.first()?;
    let stop = signal
        .iter()
        .zip(times)
        .take_while(|(_, t)| **t <= t0 + search)
        .count();
    let (imax, smax) = signal[..stop]
        .iter()
        .enumerate()
        .fold((0, 0.0), |acc, (i, v)| if *v > acc.1 { (i, *v) } else { acc });
    if !(smax > 0.0) {
        return None;
    }
    let level = FEATURE_LEVEL * smax;
    let mut lo = imax;
    while lo > 0 && signal[lo - 1] >= level {
        lo -= 1;
    }
    let mut hi = imax;
    while hi + 1 < signal.len() && signal[hi + 1] >= level {
        hi += 1;
    }
    if hi + 1 == signal.len() {
        return None;
    }
    Some(2.0 * (times[hi] - times[lo]))
}

/// Locates each species' peak around `order · T_rev` in a mixture signal.
pub fn resolve_isotopologue_peaks(
    times: &[f64],
    signal: &[f64],
    specs: &[IsotopologueSpec],
    order: f64,
) -> Result<Vec<ResolvedPeak>> {
    if times.len() != signal.len() {
        return Err(Error::InvalidArgument("times and signal differ in length".into()));
    }
    if specs.is_empty() {
        return Err(Error::InvalidArgument("no species given".into()));
    }
    if !(order > 0.0) {
        return Err(Error::InvalidArgument(format!("revival order {order} must be > 0")));
    }
    let dt = uniform_step(times)?;
    let mut idx: Vec<usize> = (0..specs.len()).collect();
    let centers: Vec<f64> = specs.iter().map(|s| order * revival_time(s)).collect();
    idx.sort_by(|&i, &j| centers[i].total_cmp(&centers[j]));

    let t_min = specs.iter().map(revival_time).fold(f64::INFINITY, f64::min);
    let spacing = idx
        .windows(2)
        .map(|w| centers[w[1]] - centers[w[0]])
        .fold(f64::INFINITY, f64::min);
    let unresolved = |reason: String| Error::Unresolved { order, reason };

    let half_width = if spacing.is_finite() {
        let width = feature_width(times, signal, 0.25 * t_min).ok_or_else(|| {
            Error::InvalidArgument("trace lacks a complete prompt response to size features".into())
        })?;
        if spacing <= width || spacing * WINDOW_SHARE < dt {
            return Err(unresolved(format!(
                "peak spacing {spacing:.3} ps does not exceed feature width {width:.3} ps"
            )));
        }
        WINDOW_SHARE * spacing
    } else {
        0.125 * t_min
    };

    let mut peaks = vec![None; specs.len()];
    for &s in &idx {
        let (lo, hi) = (centers[s] - half_width, centers[s] + half_width);
        let inside: Vec<usize> = (0..times.len()).filter(|&i| times[i] >= lo && times[i] <= hi).collect();
        if inside.len() < 3 {
            return Err(Error::InvalidArgument(format!(
                "window [{lo:.3}, {hi:.3}] ps lies outside the trace"
            )));
        }
        let best = *inside
            .iter()
            .max_by(|&&i, &&j| signal[i].total_cmp(&signal[j]))
            .expect("non-empty window");
        if best == inside[0] || best == inside[inside.len() - 1] {
            return Err(unresolved(format!(
                "no interior maximum for {} in [{lo:.3}, {hi:.3}] ps",
                specs[s].name
            )));
        }
        let weight: f64 = inside.iter().map(|&i| signal[i]).sum();
        let centroid = if weight > 0.0 {
            inside.iter().map(|&i| times[i] * signal[i]).sum::<f64>() / weight
        } else {
            centers[s]
        };
        peaks[s] = Some(ResolvedPeak {
            species: specs[s].name.clone(),
            expected: centers[s],
            time: times[best],
            centroid,
            amplitude: signal[best],
            window: (lo, hi),
        });
    }
    Ok(peaks.into_iter().map(|p| p.expect("every species visited")).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct AbundanceEstimate {
    /// Fractions in input order; excluded species get 0.
    pub fractions: Vec<f64>,
    /// Indices of species with zero peak amplitude.
    pub excluded: Vec<usize>,
}

/// Fractions proportional to the square roots of peak signal amplitudes.
pub fn estimate_abundances(amplitudes: &[f64]) -> Result<AbundanceEstimate> {
    if amplitudes.iter().any(|a| !a.is_finite() || *a < 0.0) {
        return Err(Error::InvalidArgument("peak amplitudes must be finite and >= 0".into()));
    }
    let excluded: Vec<usize> = (0..amplitudes.len()).filter(|&i| amplitudes[i] == 0.0).collect();
    if amplitudes.len() - excluded.len() < 2 {
        return Err(Error::InvalidArgument(
            "need at least two species with non-zero peaks".into(),
        ));
    }
    let roots: Vec<f64> = amplitudes.iter().map(|a| a.sqrt()).collect();
    let total: f64 = roots.iter().sum();
    Ok(AbundanceEstimate {
        fractions: roots.iter().map(|r| r / total).collect(),
        excluded,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn autocorrelation_of_sine() {
        let n = 2000;
        let period = 50.0;
        let x: Vec<f64> = (0..n)
            .map(|i| (2.0 * std::f64::consts::PI * i as f64 / period).sin())
            .collect();
        let r = autocorrelation(&x, 400);
        assert!((r[0] - 1.0).abs() < 1e-12);
        assert!((r[50] - 1.0).abs() < 1e-9);
        assert!((r[25] + 1.0).abs() < 1e-9);
        // brute force at one lag
        let k = 17;
        let a = &x[..n - k];
        let b = &x[k..];
        let m = a.len() as f64;
        let (ma, mb) = (a.iter().sum::<f64>() / m, b.iter().sum::<f64>() / m);
        let cov: f64 = a.iter().zip(b).map(|(p, q)| (p - ma) * (q - mb)).sum();
        let va: f64 = a.iter().map(|p| (p - ma).powi(2)).sum();
        let vb: f64 = b.iter().map(|q| (q - mb).powi(2)).sum();
        assert!((r[k] - cov / (va * vb).sqrt()).abs() < 1e-9);
    }

    #[test]
    fn period_of_pulse_comb() {
        let times: Vec<f64> = (0..6000).map(|i| i as f64 * 0.01).collect();
        let period = 3.217;
        let values: Vec<f64> = times
            .iter()
            .map(|t| {
                let phase = (t / period).fract() * period;
                (-(phase - 1.0).powi(2) / 0.02).exp()
            })
            .collect();
        let est = estimate_revival_period(&times, &values).unwrap();
        assert!((est.period - period).abs() < 0.01, "{est:?}");
        assert!(est.uncertainty > 0.0 && est.uncertainty < 0.05);
    }

    #[test]
    fn constant_and_noise_have_no_comb() {
        let times: Vec<f64> = (0..1000).map(|i| i as f64 * 0.01).collect();
        let flat = vec![0.25; 1000];
        assert!(matches!(
            estimate_revival_period(&times, &flat),
            Err(Error::NoCombFound(_))
        ));
        // deterministic pseudo-noise
        let mut s = 12345u64;
        let noise: Vec<f64> = (0..1000)
            .map(|_| {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                (s >> 11) as f64 / (1u64 << 53) as f64
            })
            .collect();
        assert!(matches!(
            estimate_revival_period(&times, &noise),
            Err(Error::NoCombFound(_))
        ));
    }

    #[test]
    fn abundance_examples() {
        let e = estimate_abundances(&[0.5741f64.powi(2), 0.3672f64.powi(2), 0.0587f64.powi(2)]).unwrap();
        for (f, want) in e.fractions.iter().zip([0.574, 0.367, 0.059]) {
            assert!((f - want).abs() / want < 0.01);
        }
        let e = estimate_abundances(&[2.0, 2.0]).unwrap();
        assert_eq!(e.fractions, vec![0.5, 0.5]);
        let e = estimate_abundances(&[1.0, 0.0, 4.0]).unwrap();
        assert_eq!(e.excluded, vec![1]);
        assert!((e.fractions[2] - 2.0 / 3.0).abs() < 1e-15);
        assert!(estimate_abundances(&[1.0, 0.0]).is_err());
        assert!(estimate_abundances(&[1.0, -1.0, 1.0]).is_err());
    }

    #[test]
    fn interference_classes() {
        assert_eq!(classify(4, 4), InterferenceKind::Constructive);
        assert_eq!(classify(30, 28), InterferenceKind::Destructive);
        assert_eq!(classify(28, 30), InterferenceKind::Destructive);
        assert_eq!(classify(15, 14), InterferenceKind::Fractional);
        assert_eq!(classify(6, 10), InterferenceKind::Constructive);
    }
}
