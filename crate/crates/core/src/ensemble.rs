//! Thermal ensembles, averaged alignment and mixture four-wave-mixing signals.
//!
//! Every initial state `|J₀, M₀⟩` is evolved through the pulse sequence. Between
//! kicks the averaged `⟨cos²θ⟩` only depends on the populations and on the
//! `(J, J+2)` coherences, so after each kick those are summed over the ensemble
//! once and the trace is evaluated from the summed coefficients.

use std::collections::BTreeMap;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::dynamics::{phase_factor, PulseSequence, Rotor};
use crate::error::{Error, Result};
use crate::rotor::{level, revival_time, spin_weight, IsotopologueSpec, BOLTZMANN_CM_PER_K, SPEED_OF_LIGHT_CM_PER_PS};

/// Largest weight allowed in the two highest initial J shells.
pub const THERMAL_TAIL_LIMIT: f64 = 1e-6;
/// Largest population allowed in the two highest basis J shells after a kick.
pub const LEAKAGE_LIMIT: f64 = 1e-8;
/// Default sample spacing, ps.
pub const DEFAULT_DT: f64 = 0.01;
/// Default decay constant when the envelope is switched on, ps.
pub const DEFAULT_DECAY_TAU: f64 = 200.0;

const JMAX_STEP: u32 = 10;
const JMAX_CEILING: u32 = 4000;
const REDUCTION_CHUNK: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InitialState {
    pub j: u32,
    pub m: i32,
    pub weight: f64,
}

/// Boltzmann-weighted initial states of one species.
#[derive(Debug, Clone)]
pub struct ThermalEnsemble {
    spec: IsotopologueSpec,
    temperature: f64,
    j0_max: u32,
    states: Vec<InitialState>,
}

fn shell_weights(spec: &IsotopologueSpec, temperature: f64, j0_max: u32) -> Vec<f64> {
    let kt = BOLTZMANN_CM_PER_K * temperature;
    (0..=j0_max)
        .map(|j| spin_weight(spec, j) * (2 * j + 1) as f64 * (-level(spec, j) / kt).exp())
        .collect()
}

fn tail_fraction(shells: &[f64]) -> f64 {
    let total: f64 = shells.iter().sum();
    let n = shells.len();
    let top: f64 = shells[n.saturating_sub(2)..].iter().sum();
    top / total
}

/// Smallest initial-state truncation whose top two shells are negligible.
pub fn thermal_j0_max(spec: &IsotopologueSpec, temperature: f64) -> Result<u32> {
    if !(temperature > 0.0) {
        return Err(Error::InvalidArgument(format!("temperature {temperature} must be > 0")));
    }
    let limit = spec.monotone_limit().min(JMAX_CEILING);
    let mut j = 2;
    while j <= limit {
        if tail_fraction(&shell_weights(spec, temperature, j)) < THERMAL_TAIL_LIMIT {
            return Ok(j);
        }
        j += 1;
    }
    Err(Error::InvalidSpec(format!(
        "{}: no thermal truncation found below J = {limit} at {temperature} K",
        spec.name
    )))
}

/// Weights `w(J₀, M₀) ∝ g_J₀ exp(−E_J₀ / kT)` for `J₀ ≤ j0_max`, every `M₀`.
pub fn boltzmann_weights(spec: &IsotopologueSpec, temperature: f64, j0_max: u32) -> Result<ThermalEnsemble> {
    spec.validate()?;
    if !(temperature > 0.0) {
        return Err(Error::InvalidArgument(format!("temperature {temperature} must be > 0")));
    }
    crate::rotor::rotational_energy(spec, j0_max)?;
    let shells = shell_weights(spec, temperature, j0_max);
    let tail = tail_fraction(&shells);
    if !(tail < THERMAL_TAIL_LIMIT) {
        return Err(Error::JmaxTooSmall {
            jmax: j0_max,
            tail,
            suggested: thermal_j0_max(spec, temperature)?,
        });
    }
    let total: f64 = shells.iter().sum();
    let mut states = Vec::new();
    for (j, shell) in shells.iter().enumerate() {
        let per_state = shell / total / (2 * j + 1) as f64;
        for m in -(j as i32)..=(j as i32) {
            states.push(InitialState {
                j: j as u32,
                m,
                weight: per_state,
            });
        }
    }
    Ok(ThermalEnsemble {
        spec: spec.clone(),
        temperature,
        j0_max,
        states,
    })
}

impl ThermalEnsemble {
    /// Ensemble with the smallest admissible truncation.
    pub fn at_temperature(spec: &IsotopologueSpec, temperature: f64) -> Result<Self> {
        boltzmann_weights(spec, temperature, thermal_j0_max(spec, temperature)?)
    }

    pub fn spec(&self) -> &IsotopologueSpec {
        &self.spec
    }

    pub fn temperature(&self) -> f64 {
        self.temperature
    }

    pub fn j0_max(&self) -> u32 {
        self.j0_max
    }

    /// Ascending `J₀`, then ascending `M₀`.
    pub fn states(&self) -> &[InitialState] {
        &self.states
    }

    /// Total weight of each `J₀` shell.
    pub fn shell_populations(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.j0_max as usize + 1];
        for s in &self.states {
            out[s.j as usize] += s.weight;
        }
        out
    }

    /// `⟨E⟩` of the thermal state, cm⁻¹.
    pub fn mean_energy(&self) -> f64 {
        self.states.iter().map(|s| s.weight * level(&self.spec, s.j)).sum()
    }

    /// Trajectories `(J₀, |M₀|)` with the ±M₀ weights merged; the cos²θ
    /// dynamics only depends on |M₀|.
    fn trajectories(&self) -> Vec<InitialState> {
        let mut merged: BTreeMap<(u32, i32), f64> = BTreeMap::new();
        for s in &self.states {
            *merged.entry((s.j, s.m.abs())).or_default() += s.weight;
        }
        merged
            .into_iter()
            .map(|((j, m), weight)| InitialState { j, m, weight })
            .collect()
    }
}

/// Ensemble-summed observables between two kicks.
#[derive(Debug, Clone)]
struct Segment {
    start: f64,
    populations: f64,
    /// `Σ w·conj(a_J)·a_{J+2}·⟨J+2|cos²θ|J⟩`, indexed by J.
    coherences: Vec<Complex64>,
    energy: f64,
}

impl Segment {
    fn zero(start: f64, jmax: u32) -> Self {
        Segment {
            start,
            populations: 0.0,
            coherences: vec![Complex64::default(); jmax.saturating_sub(1) as usize],
            energy: 0.0,
        }
    }

    fn add(&mut self, other: &Segment) {
        self.populations += other.populations;
        self.energy += other.energy;
        for (a, b) in self.coherences.iter_mut().zip(&other.coherences) {
            *a += b;
        }
    }
}

/// Thermal response of one species to a pulse sequence.
#[derive(Debug, Clone)]
pub struct ThermalResponse {
    species: String,
    jmax: u32,
    /// cycles/ps of each `(J, J+2)` beat
    beat_frequencies: Vec<f64>,
    segments: Vec<Segment>,
    leakage: f64,
}

impl ThermalResponse {
    pub fn species(&self) -> &str {
        &self.species
    }

    pub fn jmax(&self) -> u32 {
        self.jmax
    }

    /// Largest population found in the two top basis shells after any kick.
    pub fn leakage(&self) -> f64 {
        self.leakage
    }

    fn segment_at(&self, t: f64) -> &Segment {
        let idx = self.segments[1..].partition_point(|s| s.start < t);
        &self.segments[idx]
    }

    /// Thermally averaged `⟨cos²θ⟩` at `t`.
    pub fn alignment_at(&self, t: f64) -> f64 {
        let seg = self.segment_at(t);
        let tau = t - seg.start;
        let mut beats = 0.0;
        for (c, nu) in seg.coherences.iter().zip(&self.beat_frequencies) {
            if c.re != 0.0 || c.im != 0.0 {
                beats += (c * phase_factor(nu * tau)).re;
            }
        }
        seg.populations + 2.0 * beats
    }

    pub fn alignment(&self, samples: &[f64]) -> Vec<f64> {
        samples.par_iter().map(|&t| self.alignment_at(t)).collect()
    }

    /// Thermal energy before any kick, cm⁻¹.
    pub fn initial_energy(&self) -> f64 {
        self.segments[0].energy
    }

    /// Energy after the last kick, cm⁻¹.
    pub fn final_energy(&self) -> f64 {
        self.segments.last().map(|s| s.energy).unwrap_or_default()
    }

    /// Rotational energy deposited by the whole sequence, cm⁻¹.
    pub fn energy_gain(&self) -> f64 {
        self.final_energy() - self.initial_energy()
    }

    pub fn last_kick_time(&self) -> Option<f64> {
        (self.segments.len() > 1).then(|| self.segments.last().unwrap().start)
    }
}

/// An ensemble paired with a rotor basis large enough for a given kick budget.
#[derive(Debug, Clone)]
pub struct EnsembleSimulator {
    ensemble: ThermalEnsemble,
    rotor: Rotor,
    fixed_jmax: bool,
}

impl EnsembleSimulator {
    /// Basis truncation starts at `j0_max + ceil(4·ΣP) + 10` unless overridden.
    pub fn new(ensemble: ThermalEnsemble, total_strength: f64, jmax_override: Option<u32>) -> Result<Self> {
        let automatic = ensemble.j0_max + (4.0 * total_strength).ceil() as u32 + JMAX_STEP;
        let jmax = match jmax_override {
            Some(j) => {
                if j < ensemble.j0_max + 2 {
                    // Thermal weight in shells that would reach the top two basis shells.
                    let tail = ensemble
                        .shell_populations()
                        .iter()
                        .skip(j.saturating_sub(1) as usize)
                        .sum();
                    return Err(Error::JmaxTooSmall {
                        jmax: j,
                        tail,
                        suggested: automatic,
                    });
                }
                j
            }
            None => automatic,
        };
        let rotor = Rotor::new(&ensemble.spec, jmax, ensemble.j0_max)?;
        Ok(EnsembleSimulator {
            ensemble,
            rotor,
            fixed_jmax: jmax_override.is_some(),
        })
    }

    pub fn ensemble(&self) -> &ThermalEnsemble {
        &self.ensemble
    }

    pub fn jmax(&self) -> u32 {
        self.rotor.jmax()
    }

    fn grow(&mut self) -> Result<()> {
        let jmax = self.rotor.jmax() + JMAX_STEP;
        if jmax > JMAX_CEILING {
            return Err(Error::Numerical(format!("basis growth exceeded J = {JMAX_CEILING}")));
        }
        log::debug!("{}: growing basis to J = {jmax}", self.ensemble.spec.name);
        self.rotor = Rotor::new(&self.ensemble.spec, jmax, self.ensemble.j0_max)?;
        Ok(())
    }

    /// Runs the sequence in the current basis without checking leakage.
    pub fn evolve_unchecked(&self, pulses: &PulseSequence) -> Result<ThermalResponse> {
        let rotor = &self.rotor;
        let jmax = rotor.jmax();
        let kicks: Vec<_> = pulses.active().copied().collect();
        let trajectories = self.ensemble.trajectories();
        let n_seg = kicks.len() + 1;

        let chunk_sums = trajectories
            .par_chunks(REDUCTION_CHUNK)
            .map(|chunk| -> Result<(Vec<Segment>, f64)> {
                let mut sums: Vec<Segment> = std::iter::once(f64::NEG_INFINITY)
                    .chain(kicks.iter().map(|k| k.time))
                    .map(|start| Segment::zero(start, jmax))
                    .collect();
                let mut leak: f64 = 0.0;
                for init in chunk {
                    let block = rotor.block(init.m)?;
                    let jmin = block.jmin() as usize;
                    let start = kicks.first().map(|k| k.time).unwrap_or(0.0);
                    let mut state = rotor.eigenstate(init.j, init.m, start)?;
                    sums[0].populations += init.weight * block.element(init.j, init.j);
                    sums[0].energy += init.weight * rotor.levels()[init.j as usize];
                    for (k, kick) in kicks.iter().enumerate() {
                        let dt = kick.time - state.time();
                        rotor.propagate_in_place(&mut state, dt);
                        rotor.kick_in_place(&mut state, kick.strength)?;
                        let amps = state.amplitudes();
                        let n = amps.len();
                        leak = leak.max(amps[n.saturating_sub(2)..].iter().map(|a| a.norm_sqr()).sum());
                        let seg = &mut sums[k + 1];
                        let matrix = block.matrix();
                        for i in 0..n {
                            let p = amps[i].norm_sqr();
                            seg.populations += init.weight * p * matrix[(i, i)];
                            seg.energy += init.weight * p * rotor.levels()[jmin + i];
                            if i + 2 < n {
                                seg.coherences[jmin + i] +=
                                    amps[i].conj() * amps[i + 2] * (init.weight * matrix[(i, i + 2)]);
                            }
                        }
                    }
                }
                Ok((sums, leak))
            })
            .collect::<Result<Vec<_>>>()?;

        let mut segments: Vec<Segment> = std::iter::once(f64::NEG_INFINITY)
            .chain(kicks.iter().map(|k| k.time))
            .map(|start| Segment::zero(start, jmax))
            .collect();
        let mut leakage: f64 = 0.0;
        for (sums, leak) in &chunk_sums {
            for (total, part) in segments.iter_mut().zip(sums) {
                total.add(part);
            }
            leakage = leakage.max(*leak);
        }
        debug_assert_eq!(segments.len(), n_seg);

        let levels = rotor.levels();
        let beat_frequencies = (0..jmax.saturating_sub(1) as usize)
            .map(|j| SPEED_OF_LIGHT_CM_PER_PS * (levels[j + 2] - levels[j]))
            .collect();
        Ok(ThermalResponse {
            species: self.ensemble.spec.name.clone(),
            jmax,
            beat_frequencies,
            segments,
            leakage,
        })
    }

    /// Runs the sequence, growing the basis until leakage is negligible.
    /// A user-fixed basis is never grown; leakage is only reported.
    pub fn evolve(&mut self, pulses: &PulseSequence) -> Result<ThermalResponse> {
        loop {
            let response = self.evolve_unchecked(pulses)?;
            if response.leakage < LEAKAGE_LIMIT {
                return Ok(response);
            }
            if self.fixed_jmax {
                log::warn!(
                    "{}: population {:.2e} reaches the top of the fixed basis J = {}",
                    self.ensemble.spec.name,
                    response.leakage,
                    self.rotor.jmax()
                );
                return Ok(response);
            }
            self.grow()?;
        }
    }
}

/// Per-species thermally averaged alignment on a shared time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignmentTrace {
    pub times: Vec<f64>,
    pub species: Vec<String>,
    /// `alignment[s][i]` is `⟨cos²θ⟩` of species `s` at `times[i]`.
    pub alignment: Vec<Vec<f64>>,
}

impl AlignmentTrace {
    /// `χ_s(t) = ⟨cos²θ⟩_s − 1/3`.
    pub fn chi(&self, species: usize) -> Vec<f64> {
        self.alignment[species].iter().map(|a| a - 1.0 / 3.0).collect()
    }
}

/// Evenly spaced samples from `t_start` to `t_end` inclusive.
pub fn time_grid(t_start: f64, t_end: f64, dt: f64) -> Result<Vec<f64>> {
    if !(dt > 0.0) || !(t_end > t_start) {
        return Err(Error::InvalidArgument(format!(
            "bad time grid [{t_start}, {t_end}] step {dt}"
        )));
    }
    let n = ((t_end - t_start) / dt + 1e-9).floor() as usize;
    Ok((0..=n).map(|i| t_start + i as f64 * dt).collect())
}

pub fn ensemble_alignment(
    ensemble: &ThermalEnsemble,
    pulses: &PulseSequence,
    samples: &[f64],
    jmax_override: Option<u32>,
) -> Result<AlignmentTrace> {
    let alignment = if pulses.active().next().is_none() {
        // The thermal state is isotropic.
        vec![1.0 / 3.0; samples.len()]
    } else {
        let mut sim = EnsembleSimulator::new(ensemble.clone(), pulses.total_strength(), jmax_override)?;
        sim.evolve(pulses)?.alignment(samples)
    };
    Ok(AlignmentTrace {
        times: samples.to_vec(),
        species: vec![ensemble.spec.name.clone()],
        alignment: vec![alignment],
    })
}

/// Mixture FWM signal `S(t) = [Σ_s f_s·χ_s(t)·env(t)]²`.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalTrace {
    pub times: Vec<f64>,
    pub species: Vec<String>,
    pub fractions: Vec<f64>,
    /// Unweighted `χ_s(t)` of each component.
    pub chi: Vec<Vec<f64>>,
    pub signal: Vec<f64>,
    pub decay_tau: Option<f64>,
    /// Peak of `χ²` of the first component right after its first kick; used
    /// to report the signal in relative units.
    pub reference_peak: f64,
}

impl SignalTrace {
    pub fn normalized_signal(&self) -> Vec<f64> {
        self.signal.iter().map(|s| s / self.reference_peak).collect()
    }

    pub fn dt(&self) -> f64 {
        if self.times.len() < 2 {
            return 0.0;
        }
        (self.times[self.times.len() - 1] - self.times[0]) / (self.times.len() - 1) as f64
    }
}

pub fn envelope(t: f64, decay_tau: Option<f64>) -> f64 {
    match decay_tau {
        Some(tau) => (-t / tau).exp(),
        None => 1.0,
    }
}

/// Combines per-species χ traces into the mixture signal.
pub fn combine_signal(
    times: &[f64],
    fractions: &[f64],
    chi: &[Vec<f64>],
    decay_tau: Option<f64>,
) -> Vec<f64> {
    times
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            let total: f64 = fractions.iter().zip(chi).map(|(f, c)| f * c[i]).sum();
            let x = total * envelope(t, decay_tau);
            x * x
        })
        .collect()
}

pub fn check_fractions(fractions: &[f64]) -> Result<()> {
    if fractions.is_empty() {
        return Err(Error::InvalidArgument("empty mixture".into()));
    }
    if fractions.iter().any(|f| !(0.0..=1.0).contains(f)) {
        return Err(Error::InvalidArgument("fractions must lie in [0, 1]".into()));
    }
    let sum: f64 = fractions.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidArgument(format!("fractions sum to {sum}, not 1")));
    }
    Ok(())
}

pub fn mixture_fwm_signal(
    components: &[(IsotopologueSpec, f64)],
    pulses: &PulseSequence,
    temperature: f64,
    samples: &[f64],
    decay_tau: Option<f64>,
    jmax_override: Option<u32>,
) -> Result<SignalTrace> {
    let fractions: Vec<f64> = components.iter().map(|c| c.1).collect();
    check_fractions(&fractions)?;
    if let Some(tau) = decay_tau {
        if !(tau > 0.0) {
            return Err(Error::InvalidArgument(format!("decay time {tau} must be > 0")));
        }
    }
    let mut chi = Vec::with_capacity(components.len());
    for (spec, _) in components {
        let ensemble = ThermalEnsemble::at_temperature(spec, temperature)?;
        let trace = ensemble_alignment(&ensemble, pulses, samples, jmax_override)?;
        chi.push(trace.chi(0));
    }
    let signal = combine_signal(samples, &fractions, &chi, decay_tau);

    let reference_peak = match pulses.active().next() {
        Some(first) => {
            let window_end = first.time + 0.5 * revival_time(&components[0].0);
            samples
                .iter()
                .zip(&chi[0])
                .filter(|(t, _)| **t > first.time && **t <= window_end)
                .map(|(_, c)| c * c)
                .fold(0.0, f64::max)
        }
        None => 0.0,
    };

    Ok(SignalTrace {
        times: samples.to_vec(),
        species: components.iter().map(|c| c.0.name.clone()).collect(),
        fractions,
        chi,
        signal,
        decay_tau,
        reference_peak: if reference_peak > 0.0 { reference_peak } else { 1.0 },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::library::MoleculeLibrary;

    fn lib(name: &str) -> IsotopologueSpec {
        MoleculeLibrary::shipped().get(name).unwrap().clone()
    }

    #[test]
    fn cold_limit_puts_weight_on_lowest_allowed_level() {
        let n15 = lib("N2-15");
        let e = ThermalEnsemble::at_temperature(&n15, 0.1).unwrap();
        let shells = e.shell_populations();
        assert!((shells[0] - 1.0).abs() < 1e-12);
        let zero_spin = IsotopologueSpec::new("O2-16", (16, 16), 1.44, 0.0, 0.0, 1.0).unwrap();
        let e = ThermalEnsemble::at_temperature(&zero_spin, 0.1).unwrap();
        assert!((e.shell_populations()[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn nitrogen_room_temperature_peak() {
        let e = ThermalEnsemble::at_temperature(&lib("N2-14"), 295.0).unwrap();
        let shells = e.shell_populations();
        let peak = shells
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .unwrap()
            .0;
        assert!((6..=8).contains(&peak), "peak J = {peak}");
        let sum: f64 = e.states().iter().map(|s| s.weight).sum();
        assert!((sum - 1.0).abs() < 1e-12);
        // 2:1 alternation survives in the shell populations
        assert!(shells[6] > shells[7] && shells[8] > shells[7]);
    }

    #[test]
    fn small_truncation_is_rejected_with_suggestion() {
        let spec = lib("N2-14");
        let need = thermal_j0_max(&spec, 295.0).unwrap();
        match boltzmann_weights(&spec, 295.0, 10) {
            Err(Error::JmaxTooSmall { suggested, .. }) => assert_eq!(suggested, need),
            other => panic!("unexpected {other:?}"),
        }
        assert!(boltzmann_weights(&spec, 295.0, need).is_ok());
        assert!(boltzmann_weights(&spec, 0.0, need).is_err());
    }

    #[test]
    fn merged_trajectories_keep_total_weight() {
        let e = ThermalEnsemble::at_temperature(&lib("N2-14"), 100.0).unwrap();
        let traj = e.trajectories();
        assert_eq!(
            traj.len(),
            (0..=e.j0_max()).map(|j| j as usize + 1).sum::<usize>()
        );
        let total: f64 = traj.iter().map(|t| t.weight).sum();
        assert!((total - 1.0).abs() < 1e-12);
        assert!(traj.iter().all(|t| t.m >= 0));
    }

    #[test]
    fn fraction_checks() {
        assert!(check_fractions(&[0.6, 0.5]).is_err());
        assert!(check_fractions(&[0.5, 0.5]).is_ok());
        assert!(check_fractions(&[]).is_err());
    }

    #[test]
    fn grid() {
        let g = time_grid(0.0, 1.0, 0.1).unwrap();
        assert_eq!(g.len(), 11);
        assert!((g[10] - 1.0).abs() < 1e-15);
        assert!(time_grid(1.0, 0.0, 0.1).is_err());
        assert!(time_grid(0.0, 1.0, 0.0).is_err());
    }
}
