//! Two-pulse control: delay scans and delay optimization for isotope-selective
//! rotational excitation.

use rayon::prelude::*;

use crate::dynamics::{Kick, PulseSequence};
use crate::ensemble::{time_grid, EnsembleSimulator, ThermalEnsemble, ThermalResponse, LEAKAGE_LIMIT};
use crate::error::{Error, Result};
use crate::rotor::{revival_time, IsotopologueSpec};

/// Metric window opens this many revival periods after the last pulse.
pub const WINDOW_OFFSET: f64 = 0.05;
/// Golden-section refinement stops once the bracket is narrower than this (ps).
pub const DELAY_RESOLUTION: f64 = 1e-3;
/// Coarse pre-scan step as a fraction of the shortest revival period.
pub const COARSE_SHARE: f64 = 1.0 / 40.0;
const FLAT_LIMIT: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct TwoPulseSetup {
    pub temperature: f64,
    pub p1: f64,
    pub p2: f64,
    /// End of the metric window (ps); the first pulse is at t = 0.
    pub horizon: f64,
    pub dt: f64,
    pub jmax_override: Option<u32>,
}

impl TwoPulseSetup {
    pub fn new(temperature: f64, p1: f64, p2: f64, horizon: f64) -> Self {
        TwoPulseSetup {
            temperature,
            p1,
            p2,
            horizon,
            dt: crate::ensemble::DEFAULT_DT,
            jmax_override: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectivityReport {
    pub delay: f64,
    pub species: Vec<String>,
    /// Post-pulse rms of χ per species.
    pub rms: Vec<f64>,
    /// Rotational energy gain per species (cm⁻¹).
    pub energy_gain: Vec<f64>,
    /// Same metrics with the second pulse removed.
    pub single_rms: Vec<f64>,
    pub single_energy_gain: Vec<f64>,
    pub target: usize,
    /// Energy gain of the target over the largest gain among the others.
    pub selectivity: f64,
    /// Set when there is no other species and `selectivity` is fixed at 1.
    pub degenerate: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Objective {
    /// Maximize the target's energy gain relative to the other species.
    Selectivity,
    /// Minimize the target's energy gain.
    Suppression,
}

impl Objective {
    pub fn as_str(&self) -> &'static str {
        match self {
            Objective::Selectivity => "selectivity",
            Objective::Suppression => "suppression",
        }
    }

    fn score(&self, report: &SelectivityReport) -> f64 {
        match self {
            Objective::Selectivity => report.selectivity,
            Objective::Suppression => -report.energy_gain[report.target],
        }
    }
}

impl std::str::FromStr for Objective {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "selectivity" => Ok(Objective::Selectivity),
            "suppression" => Ok(Objective::Suppression),
            other => Err(Error::InvalidArgument(format!("unknown objective `{other}`"))),
        }
    }
}

/// Rms of `χ` over `[start, end]` sampled every `dt`.
pub fn window_rms(response: &ThermalResponse, start: f64, end: f64, dt: f64) -> Result<f64> {
    let samples = time_grid(start, end, dt)?;
    let values = response.alignment(&samples);
    let sum: f64 = values.iter().map(|a| (a - 1.0 / 3.0).powi(2)).sum();
    Ok((sum / values.len() as f64).sqrt())
}

/// Pre-built per-species simulators for repeated two-pulse runs.
pub struct TwoPulseController {
    setup: TwoPulseSetup,
    specs: Vec<IsotopologueSpec>,
    sims: Vec<EnsembleSimulator>,
    target: usize,
}

impl TwoPulseController {
    pub fn new(specs: &[IsotopologueSpec], target: usize, setup: TwoPulseSetup) -> Result<Self> {
        if specs.is_empty() {
            return Err(Error::InvalidArgument("no species given".into()));
        }
        if target >= specs.len() {
            return Err(Error::InvalidArgument(format!("target index {target} out of range")));
        }
        for p in [setup.p1, setup.p2] {
            if !(p >= 0.0) || !p.is_finite() {
                return Err(Error::InvalidArgument(format!("kick strength {p} must be finite and >= 0")));
            }
        }
        if !(setup.dt > 0.0) {
            return Err(Error::InvalidArgument(format!("dt {} must be > 0", setup.dt)));
        }
        let total = setup.p1 + setup.p2;
        let mut sims = Vec::with_capacity(specs.len());
        for spec in specs {
            let ensemble = ThermalEnsemble::at_temperature(spec, setup.temperature)?;
            let mut sim = EnsembleSimulator::new(ensemble, total, setup.jmax_override)?;
            // Settle the basis on a representative sequence before sharing it.
            let probe = PulseSequence::new(vec![
                Kick { time: 0.0, strength: setup.p1 },
                Kick { time: 0.5 * revival_time(spec), strength: setup.p2 },
            ])?;
            sim.evolve(&probe)?;
            sims.push(sim);
        }
        Ok(TwoPulseController {
            setup,
            specs: specs.to_vec(),
            sims,
            target,
        })
    }

    pub fn setup(&self) -> &TwoPulseSetup {
        &self.setup
    }

    pub fn species(&self) -> &[IsotopologueSpec] {
        &self.specs
    }

    fn max_revival(&self) -> f64 {
        self.specs.iter().map(revival_time).fold(0.0, f64::max)
    }

    pub fn min_revival(&self) -> f64 {
        self.specs.iter().map(revival_time).fold(f64::INFINITY, f64::min)
    }

    fn check_delay(&self, delay: f64) -> Result<()> {
        if !(delay > 0.0) {
            return Err(Error::InvalidArgument(format!("delay {delay} must be > 0")));
        }
        let need = delay + 2.0 * self.max_revival();
        if !(self.setup.horizon > need) {
            return Err(Error::InvalidArgument(format!(
                "horizon {} ps must exceed delay + 2 revival periods = {need:.3} ps",
                self.setup.horizon
            )));
        }
        Ok(())
    }

    fn metrics(&self, s: usize, pulses: &PulseSequence, delay: f64) -> Result<(f64, f64)> {
        let response = self.sims[s].evolve_unchecked(pulses)?;
        if response.leakage() > LEAKAGE_LIMIT {
            log::warn!(
                "{}: top-shell population {:.2e} at J truncation {}",
                self.specs[s].name,
                response.leakage(),
                response.jmax()
            );
        }
        let start = delay + WINDOW_OFFSET * revival_time(&self.specs[s]);
        let rms = window_rms(&response, start, self.setup.horizon, self.setup.dt)?;
        Ok((rms, response.energy_gain()))
    }

    /// Runs `[(0, P1), (delay, P2)]` and the single-pulse reference.
    pub fn response(&self, delay: f64) -> Result<SelectivityReport> {
        self.check_delay(delay)?;
        let pair = PulseSequence::new(vec![
            Kick { time: 0.0, strength: self.setup.p1 },
            Kick { time: delay, strength: self.setup.p2 },
        ])?;
        let single = PulseSequence::single(0.0, self.setup.p1)?;
        let mut rms = Vec::new();
        let mut gain = Vec::new();
        let mut single_rms = Vec::new();
        let mut single_gain = Vec::new();
        for s in 0..self.specs.len() {
            let (r, e) = self.metrics(s, &pair, delay)?;
            let (r1, e1) = self.metrics(s, &single, delay)?;
            rms.push(r);
            gain.push(e);
            single_rms.push(r1);
            single_gain.push(e1);
        }
        let competitor = (0..gain.len())
            .filter(|&s| s != self.target)
            .map(|s| gain[s])
            .fold(f64::NEG_INFINITY, f64::max);
        let degenerate = self.specs.len() == 1;
        let selectivity = if degenerate {
            1.0
        } else if competitor > 0.0 && gain[self.target] > 0.0 {
            gain[self.target] / competitor
        } else {
            return Err(Error::Numerical(format!(
                "selectivity undefined at delay {delay}: energy gains must be positive"
            )));
        };
        Ok(SelectivityReport {
            delay,
            species: self.specs.iter().map(|s| s.name.clone()).collect(),
            rms,
            energy_gain: gain,
            single_rms,
            single_energy_gain: single_gain,
            target: self.target,
            selectivity,
            degenerate,
        })
    }

    /// One report per delay, evaluated in parallel; order follows `delays`.
    pub fn scan(&self, delays: &[f64]) -> Result<Vec<SelectivityReport>> {
        if delays.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidArgument("delay grid must be strictly increasing".into()));
        }
        delays.par_iter().map(|&d| self.response(d)).collect()
    }

    /// Coarse scan of `bracket` followed by golden-section refinement.
    pub fn optimize(&self, bracket: (f64, f64), objective: Objective) -> Result<SelectivityReport> {
        let (lo, hi) = bracket;
        if !(hi > lo) {
            return Err(Error::InvalidArgument(format!("bad bracket [{lo}, {hi}]")));
        }
        let step = COARSE_SHARE * self.min_revival();
        let n = ((hi - lo) / step).ceil().max(2.0) as usize;
        let grid: Vec<f64> = (0..=n).map(|i| lo + (hi - lo) * i as f64 / n as f64).collect();
        let coarse = self.scan(&grid)?;
        let scores: Vec<f64> = coarse.iter().map(|r| objective.score(r)).collect();
        let (best_i, best) = scores
            .iter()
            .copied()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (i, v)| if v > acc.1 { (i, v) } else { acc });
        let worst = scores.iter().copied().fold(f64::INFINITY, f64::min);
        let scale = best.abs().max(worst.abs());
        if !(best - worst > FLAT_LIMIT * scale) {
            return Err(Error::NoOptimum(format!(
                "{} varies by less than {FLAT_LIMIT:e} relative over [{lo}, {hi}] ps",
                objective.as_str()
            )));
        }

        let mut a = grid[best_i.saturating_sub(1)];
        let mut b = grid[(best_i + 1).min(n)];
        let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
        let eval = |d: f64| -> Result<(f64, SelectivityReport)> {
            let r = self.response(d)?;
            Ok((objective.score(&r), r))
        };
        let mut c = b - inv_phi * (b - a);
        let mut d = a + inv_phi * (b - a);
        let mut fc = eval(c)?;
        let mut fd = eval(d)?;
        while b - a > DELAY_RESOLUTION {
            if fc.0 >= fd.0 {
                b = d;
                d = c;
                fd = fc;
                c = b - inv_phi * (b - a);
                fc = eval(c)?;
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + inv_phi * (b - a);
                fd = eval(d)?;
            }
        }
        let mut winner = if fc.0 >= fd.0 { fc } else { fd };
        if best > winner.0 {
            winner = (best, coarse[best_i].clone());
        }
        Ok(winner.1)
    }
}

pub fn two_pulse_response(
    specs: &[IsotopologueSpec],
    target: usize,
    delay: f64,
    setup: TwoPulseSetup,
) -> Result<SelectivityReport> {
    TwoPulseController::new(specs, target, setup)?.response(delay)
}

pub fn scan_delay(
    specs: &[IsotopologueSpec],
    target: usize,
    delays: &[f64],
    setup: TwoPulseSetup,
) -> Result<Vec<SelectivityReport>> {
    TwoPulseController::new(specs, target, setup)?.scan(delays)
}

pub fn optimize_delay(
    specs: &[IsotopologueSpec],
    target: usize,
    bracket: (f64, f64),
    objective: Objective,
    setup: TwoPulseSetup,
) -> Result<SelectivityReport> {
    TwoPulseController::new(specs, target, setup)?.optimize(bracket, objective)
}
