//! Single-trajectory rotor dynamics in the sudden-kick approximation.
//!
//! A kick of strength `P` acts as `exp(i·P·cos²θ)`; between kicks each level
//! picks up `exp(−i·2π·c·E_J·t)`.

use std::f64::consts::TAU;
use std::io::Write;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::rotor::{build_cos2_block, level_ladder, Cos2Block, IsotopologueSpec, SPEED_OF_LIGHT_CM_PER_PS};

const KICK_NORM_TOLERANCE: f64 = 1e-9;
const EXPECTATION_SLACK: f64 = 1e-10;

/// `exp(−2πi·cycles)`, reducing the argument to one cycle first.
#[inline]
pub(crate) fn phase_factor(cycles: f64) -> Complex64 {
    let frac = cycles - cycles.floor();
    let (s, c) = (TAU * frac).sin_cos();
    Complex64::new(c, -s)
}

/// Amplitudes over `J = |M| … jmax` at fixed `M`.
#[derive(Debug, Clone, PartialEq)]
pub struct WavepacketState {
    species: String,
    m: i32,
    amplitudes: Vec<Complex64>,
    t: f64,
}

impl WavepacketState {
    pub fn new(species: impl Into<String>, m: i32, amplitudes: Vec<Complex64>, t: f64) -> Result<Self> {
        let state = WavepacketState {
            species: species.into(),
            m,
            amplitudes,
            t,
        };
        let norm = state.norm_sqr();
        if (norm - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidArgument(format!("state norm {norm} is not 1")));
        }
        Ok(state)
    }

    pub fn species(&self) -> &str {
        &self.species
    }

    pub fn m(&self) -> i32 {
        self.m
    }

    pub fn jmin(&self) -> u32 {
        self.m.unsigned_abs()
    }

    pub fn jmax(&self) -> u32 {
        self.jmin() + self.amplitudes.len() as u32 - 1
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    /// Amplitudes starting at `J = |M|`.
    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn amplitude(&self, j: u32) -> Complex64 {
        j.checked_sub(self.jmin())
            .and_then(|i| self.amplitudes.get(i as usize))
            .copied()
            .unwrap_or_default()
    }

    pub fn population(&self, j: u32) -> f64 {
        self.amplitude(j).norm_sqr()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }
}

/// One impulsive kick.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Kick {
    /// ps
    pub time: f64,
    pub strength: f64,
}

/// Kicks in strictly increasing time order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PulseSequence {
    kicks: Vec<Kick>,
}

impl PulseSequence {
    pub fn new(kicks: Vec<Kick>) -> Result<Self> {
        for k in &kicks {
            if !(k.strength >= 0.0) || !k.strength.is_finite() {
                return Err(Error::InvalidArgument(format!("kick strength {} must be >= 0", k.strength)));
            }
            if !k.time.is_finite() {
                return Err(Error::InvalidArgument("kick time must be finite".into()));
            }
        }
        if kicks.windows(2).any(|w| w[1].time <= w[0].time) {
            return Err(Error::InvalidArgument("kick times must be strictly increasing".into()));
        }
        Ok(PulseSequence { kicks })
    }

    pub fn empty() -> Self {
        PulseSequence::default()
    }

    pub fn single(time: f64, strength: f64) -> Result<Self> {
        Self::new(vec![Kick { time, strength }])
    }

    pub fn kicks(&self) -> &[Kick] {
        &self.kicks
    }

    /// Kicks that actually change the state (`P > 0`).
    pub fn active(&self) -> impl Iterator<Item = &Kick> {
        self.kicks.iter().filter(|k| k.strength > 0.0)
    }

    pub fn total_strength(&self) -> f64 {
        self.kicks.iter().map(|k| k.strength).sum()
    }

    /// Same sequence moved by `dt`.
    pub fn shifted(&self, dt: f64) -> Self {
        PulseSequence {
            kicks: self
                .kicks
                .iter()
                .map(|k| Kick {
                    time: k.time + dt,
                    strength: k.strength,
                })
                .collect(),
        }
    }
}

/// Level ladder plus cached cos²θ blocks for `|M| ≤ m_max`, truncated at `jmax`.
#[derive(Debug, Clone)]
pub struct Rotor {
    spec: IsotopologueSpec,
    jmax: u32,
    levels: Vec<f64>,
    blocks: Vec<Cos2Block>,
}

impl Rotor {
    pub fn new(spec: &IsotopologueSpec, jmax: u32, m_max: u32) -> Result<Self> {
        spec.validate()?;
        if m_max > jmax {
            return Err(Error::InvalidArgument(format!("m_max {m_max} exceeds jmax {jmax}")));
        }
        let levels = level_ladder(spec, jmax)?;
        let blocks = (0..=m_max as i32)
            .into_par_iter()
            .map(|m| build_cos2_block(m, jmax))
            .collect::<Result<Vec<_>>>()?;
        Ok(Rotor {
            spec: spec.clone(),
            jmax,
            levels,
            blocks,
        })
    }

    pub fn spec(&self) -> &IsotopologueSpec {
        &self.spec
    }

    pub fn jmax(&self) -> u32 {
        self.jmax
    }

    pub fn m_max(&self) -> u32 {
        self.blocks.len() as u32 - 1
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn block(&self, m: i32) -> Result<&Cos2Block> {
        self.blocks
            .get(m.unsigned_abs() as usize)
            .ok_or_else(|| Error::Numerical(format!("no cos² block cached for M = {m}")))
    }

    /// `|J, M⟩` at time `t`.
    pub fn eigenstate(&self, j: u32, m: i32, t: f64) -> Result<WavepacketState> {
        let block = self.block(m)?;
        if j < block.jmin() || j > self.jmax {
            return Err(Error::InvalidArgument(format!("|{j},{m}> outside basis")));
        }
        let mut amplitudes = vec![Complex64::default(); block.dim()];
        amplitudes[(j - block.jmin()) as usize] = Complex64::new(1.0, 0.0);
        Ok(WavepacketState {
            species: self.spec.name.clone(),
            m,
            amplitudes,
            t,
        })
    }

    fn check_state(&self, state: &WavepacketState) -> Result<&Cos2Block> {
        let block = self.block(state.m)?;
        if state.amplitudes.len() != block.dim() {
            return Err(Error::InvalidArgument(format!(
                "state has {} amplitudes, basis for M = {} has {}",
                state.amplitudes.len(),
                state.m,
                block.dim()
            )));
        }
        Ok(block)
    }

    /// Applies `exp(i·P·cos²θ)` in place.
    pub fn kick_in_place(&self, state: &mut WavepacketState, p: f64) -> Result<()> {
        if !(p >= 0.0) {
            return Err(Error::InvalidArgument(format!("kick strength {p} must be >= 0")));
        }
        if p == 0.0 {
            return Ok(());
        }
        let block = self.check_state(state)?;
        let before = state.norm_sqr();
        block.exp_i_apply(&mut state.amplitudes, p);
        let drift = (state.norm_sqr() - before).abs();
        if drift > KICK_NORM_TOLERANCE {
            return Err(Error::Numerical(format!("kick changed the norm by {drift:e}")));
        }
        Ok(())
    }

    pub fn kick(&self, state: &WavepacketState, p: f64) -> Result<WavepacketState> {
        let mut out = state.clone();
        self.kick_in_place(&mut out, p)?;
        Ok(out)
    }

    /// Free evolution by `dt` ps in place.
    pub fn propagate_in_place(&self, state: &mut WavepacketState, dt: f64) {
        let jmin = state.jmin() as usize;
        let scale = SPEED_OF_LIGHT_CM_PER_PS * dt;
        for (i, a) in state.amplitudes.iter_mut().enumerate() {
            *a *= phase_factor(scale * self.levels[jmin + i]);
        }
        state.t += dt;
    }

    pub fn propagate(&self, state: &WavepacketState, dt: f64) -> WavepacketState {
        let mut out = state.clone();
        self.propagate_in_place(&mut out, dt);
        out
    }

    /// `⟨cos²θ⟩`; values outside `[0, 1]` beyond round-off are an error.
    pub fn cos2(&self, state: &WavepacketState) -> Result<f64> {
        let block = self.check_state(state)?;
        let value = block.expectation(&state.amplitudes);
        if !(-EXPECTATION_SLACK..=1.0 + EXPECTATION_SLACK).contains(&value) {
            return Err(Error::Numerical(format!("<cos²θ> = {value} outside [0, 1]")));
        }
        Ok(value)
    }

    /// `Σ |a_J|² E_J` in cm⁻¹.
    pub fn energy(&self, state: &WavepacketState) -> f64 {
        let jmin = state.jmin() as usize;
        state
            .amplitudes
            .iter()
            .enumerate()
            .map(|(i, a)| a.norm_sqr() * self.levels[jmin + i])
            .sum()
    }

    /// Evolves `initial` through `pulses`, recording `⟨cos²θ⟩` at each sample.
    ///
    /// A sample at a kick instant sees the pre-kick state.
    pub fn run_sequence(
        &self,
        initial: &WavepacketState,
        pulses: &PulseSequence,
        samples: &[f64],
    ) -> Result<Vec<f64>> {
        if samples.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::InvalidArgument("sample times must be sorted".into()));
        }
        if samples.first().is_some_and(|&s| s < initial.t) {
            return Err(Error::InvalidArgument("samples precede the initial state".into()));
        }
        if pulses.kicks().first().is_some_and(|k| k.time < initial.t) {
            return Err(Error::InvalidArgument("pulse precedes the initial state".into()));
        }
        self.check_state(initial)?;

        let mut anchor = initial.clone();
        let mut pending = pulses.active().peekable();
        let mut out = Vec::with_capacity(samples.len());
        for &s in samples {
            while let Some(k) = pending.next_if(|k| k.time < s) {
                let dt = k.time - anchor.t;
                self.propagate_in_place(&mut anchor, dt);
                self.kick_in_place(&mut anchor, k.strength)?;
            }
            let here = self.propagate(&anchor, s - anchor.t);
            out.push(self.cos2(&here)?);
        }
        Ok(out)
    }
}

/// Writes `t_ps J re im` rows, one per amplitude of each state.
pub fn write_amplitude_dump<W: Write>(mut out: W, states: &[WavepacketState]) -> std::io::Result<()> {
    writeln!(out, "t_ps\tJ\tre\tim")?;
    for s in states {
        for (i, a) in s.amplitudes.iter().enumerate() {
            writeln!(
                out,
                "{:.16e}\t{}\t{:.16e}\t{:.16e}",
                s.t,
                s.jmin() + i as u32,
                a.re,
                a.im
            )?;
        }
    }
    Ok(())
}
