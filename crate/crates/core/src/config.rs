//! Run configuration in a line-oriented `key = value` format.
//!
//! Top-level keys come first; `[species]` and `[pulse]` sections may repeat,
//! `[control]`, `[interfere]` and `[analyze]` appear at most once. `#` starts
//! a comment.
//!
//! ```text
//! temperature = 295
//! t_end = 340
//!
//! [species]
//! name = N2-14
//! fraction = 1
//!
//! [pulse]
//! time = 0
//! strength = 3
//! ```

use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;

use crate::control::Objective;
use crate::dynamics::{Kick, PulseSequence};
use crate::ensemble::{check_fractions, DEFAULT_DT};
use crate::error::{Error, Result};
use crate::library::MoleculeLibrary;
use crate::rotor::IsotopologueSpec;

pub const DEFAULT_TEMPERATURE: f64 = 295.0;
pub const DEFAULT_T_END: f64 = 100.0;
pub const DEFAULT_STRENGTH: f64 = 3.0;
pub const DEFAULT_ANALYSIS_ORDER: f64 = 2.0;

#[derive(Debug, Clone, PartialEq)]
pub struct SpeciesEntry {
    pub spec: IsotopologueSpec,
    pub fraction: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControlSection {
    /// Index into the mixture.
    pub target: usize,
    pub p1: f64,
    pub p2: f64,
    pub horizon: f64,
    pub delay: Option<f64>,
    pub scan: Option<(f64, f64, f64)>,
    pub bracket: Option<(f64, f64)>,
    pub objective: Objective,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InterfereSection {
    pub horizon: f64,
    pub tol: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalyzeSection {
    pub input: Option<PathBuf>,
    pub order: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub library: Option<PathBuf>,
    pub mixture: Vec<SpeciesEntry>,
    pub temperature: f64,
    pub pulses: PulseSequence,
    pub t_start: f64,
    pub t_end: f64,
    pub dt: f64,
    pub decay_tau: Option<f64>,
    pub jmax: Option<u32>,
    pub output: Option<PathBuf>,
    pub control: ControlSection,
    pub interfere: InterfereSection,
    pub analyze: AnalyzeSection,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum Section {
    Top,
    Species,
    Pulse,
    Control,
    Interfere,
    Analyze,
}

impl Section {
    fn keys(&self) -> &'static [&'static str] {
        match self {
            Section::Top => &[
                "library", "temperature", "t_start", "t_end", "dt", "decay_tau", "jmax", "output",
            ],
            Section::Species => &["name", "fraction"],
            Section::Pulse => &["time", "strength"],
            Section::Control => &[
                "target", "p1", "p2", "horizon", "delay", "scan_start", "scan_end", "scan_step",
                "bracket_lo", "bracket_hi", "objective",
            ],
            Section::Interfere => &["horizon", "tol"],
            Section::Analyze => &["input", "order"],
        }
    }
}

type Entries = Vec<(String, String, usize)>;

fn get<'a>(entries: &'a Entries, key: &str) -> Option<(&'a str, usize)> {
    entries
        .iter()
        .find(|(k, _, _)| k == key)
        .map(|(_, v, l)| (v.as_str(), *l))
}

fn value<T: FromStr>(entries: &Entries, key: &str) -> Result<Option<(T, usize)>> {
    match get(entries, key) {
        None => Ok(None),
        Some((v, line)) => v
            .parse::<T>()
            .map(|x| Some((x, line)))
            .map_err(|_| Error::parse(line, format!("`{key}`: cannot parse `{v}`"))),
    }
}

fn real(entries: &Entries, key: &str) -> Result<Option<(f64, usize)>> {
    match value::<f64>(entries, key)? {
        Some((x, line)) if !x.is_finite() => Err(Error::parse(line, format!("`{key}` must be finite"))),
        other => Ok(other),
    }
}

fn positive(entries: &Entries, key: &str, default: f64) -> Result<f64> {
    match real(entries, key)? {
        None => Ok(default),
        Some((x, line)) if x <= 0.0 => Err(Error::parse(line, format!("`{key}` must be > 0"))),
        Some((x, _)) => Ok(x),
    }
}

/// Parses with the shipped molecule library unless the config names another.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    parse_config_with(text, None)
}

/// Parses, resolving species against `library` when no `library` key is set.
pub fn parse_config_with(text: &str, library: Option<&MoleculeLibrary>) -> Result<RunConfig> {
    let mut top: Entries = Vec::new();
    let mut species: Vec<(Entries, usize)> = Vec::new();
    let mut pulses: Vec<(Entries, usize)> = Vec::new();
    let mut singles: [Option<(Entries, usize)>; 3] = [None, None, None];
    let mut section = Section::Top;

    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            section = match name.trim() {
                "species" => {
                    species.push((Vec::new(), lineno));
                    Section::Species
                }
                "pulse" => {
                    pulses.push((Vec::new(), lineno));
                    Section::Pulse
                }
                "control" => Section::Control,
                "interfere" => Section::Interfere,
                "analyze" => Section::Analyze,
                other => return Err(Error::parse(lineno, format!("unknown section `[{other}]`"))),
            };
            let slot = match section {
                Section::Control => Some(0),
                Section::Interfere => Some(1),
                Section::Analyze => Some(2),
                _ => None,
            };
            if let Some(i) = slot {
                if singles[i].is_some() {
                    return Err(Error::parse(lineno, format!("section `[{}]` repeated", name.trim())));
                }
                singles[i] = Some((Vec::new(), lineno));
            }
            continue;
        }
        let (key, val) = line
            .split_once('=')
            .ok_or_else(|| Error::parse(lineno, format!("expected `key = value`, found `{line}`")))?;
        let (key, val) = (key.trim(), val.trim());
        if !section.keys().contains(&key) {
            return Err(Error::parse(lineno, format!("unknown key `{key}`")));
        }
        let entries = match section {
            Section::Top => &mut top,
            Section::Species => &mut species.last_mut().expect("open section").0,
            Section::Pulse => &mut pulses.last_mut().expect("open section").0,
            Section::Control => &mut singles[0].as_mut().expect("open section").0,
            Section::Interfere => &mut singles[1].as_mut().expect("open section").0,
            Section::Analyze => &mut singles[2].as_mut().expect("open section").0,
        };
        if entries.iter().any(|(k, _, _)| k == key) {
            return Err(Error::parse(lineno, format!("duplicate key `{key}`")));
        }
        entries.push((key.to_string(), val.to_string(), lineno));
    }

    let library_path = get(&top, "library").map(|(v, _)| PathBuf::from(v));
    let loaded;
    let lib = match (&library_path, library) {
        (Some(path), _) => {
            let line = get(&top, "library").map(|x| x.1).unwrap_or(0);
            loaded = MoleculeLibrary::load(path).map_err(|e| Error::parse(line, format!("library: {e}")))?;
            &loaded
        }
        (None, Some(lib)) => lib,
        (None, None) => {
            loaded = MoleculeLibrary::shipped();
            &loaded
        }
    };

    let temperature = positive(&top, "temperature", DEFAULT_TEMPERATURE)?;
    let t_start = real(&top, "t_start")?.map(|x| x.0).unwrap_or(0.0);
    let (t_end, t_end_line) = real(&top, "t_end")?.unwrap_or((DEFAULT_T_END, 0));
    if !(t_end > t_start) {
        return Err(Error::parse(t_end_line, "`t_end` must exceed `t_start`"));
    }
    let dt = positive(&top, "dt", DEFAULT_DT)?;
    let decay_tau = match get(&top, "decay_tau") {
        None | Some(("none", _)) => None,
        Some(_) => Some(positive(&top, "decay_tau", 0.0)?),
    };
    let jmax = value::<u32>(&top, "jmax")?.map(|x| x.0);
    let output = get(&top, "output").map(|(v, _)| PathBuf::from(v));

    if species.is_empty() {
        return Err(Error::parse(text.lines().count().max(1), "no `[species]` section"));
    }
    let single = species.len() == 1;
    let mut mixture = Vec::new();
    for (entries, header) in &species {
        let (name, line) = get(entries, "name")
            .ok_or_else(|| Error::parse(*header, "`[species]` needs `name`"))?;
        let spec = lib
            .get(name)
            .map_err(|_| Error::parse(line, format!("species `{name}` not in library")))?
            .clone();
        if mixture.iter().any(|m: &SpeciesEntry| m.spec.name == spec.name) {
            return Err(Error::parse(line, format!("species `{name}` listed twice")));
        }
        let fraction = match real(entries, "fraction")? {
            Some((f, _)) => f,
            None if single => 1.0,
            None => return Err(Error::parse(*header, "mixture entries need `fraction`")),
        };
        mixture.push(SpeciesEntry { spec, fraction });
    }
    let fractions: Vec<f64> = mixture.iter().map(|m| m.fraction).collect();
    check_fractions(&fractions).map_err(|e| {
        let line = species.last().map(|s| s.1).unwrap_or(0);
        Error::parse(line, e.to_string())
    })?;

    let mut kicks = Vec::new();
    for (entries, header) in &pulses {
        let time = real(entries, "time")?.map(|x| x.0).unwrap_or(0.0);
        let strength = match real(entries, "strength")? {
            Some((p, line)) if p < 0.0 => return Err(Error::parse(line, "`strength` must be >= 0")),
            Some((p, _)) => p,
            None => DEFAULT_STRENGTH,
        };
        kicks.push((Kick { time, strength }, *header));
    }
    let pulse_line = kicks.last().map(|k| k.1).unwrap_or(0);
    let pulse_seq = if kicks.is_empty() {
        PulseSequence::single(0.0, DEFAULT_STRENGTH)?
    } else {
        PulseSequence::new(kicks.into_iter().map(|k| k.0).collect())
            .map_err(|e| Error::parse(pulse_line, e.to_string()))?
    };

    let empty = Vec::new();
    let section = |i: usize| singles[i].as_ref().map(|s| &s.0).unwrap_or(&empty);

    let ctl = section(0);
    let target = match get(ctl, "target") {
        None => 0,
        Some((name, line)) => mixture
            .iter()
            .position(|m| m.spec.name == name)
            .ok_or_else(|| Error::parse(line, format!("target `{name}` is not in the mixture")))?,
    };
    let first_strength = pulse_seq.kicks().first().map(|k| k.strength).unwrap_or(DEFAULT_STRENGTH);
    let p1 = match real(ctl, "p1")? {
        Some((p, line)) if p < 0.0 => return Err(Error::parse(line, "`p1` must be >= 0")),
        Some((p, _)) => p,
        None => first_strength,
    };
    let p2 = match real(ctl, "p2")? {
        Some((p, line)) if p < 0.0 => return Err(Error::parse(line, "`p2` must be >= 0")),
        Some((p, _)) => p,
        None => p1,
    };
    let horizon = positive(ctl, "horizon", t_end)?;
    let delay = real(ctl, "delay")?.map(|x| x.0);
    let scan = match (real(ctl, "scan_start")?, real(ctl, "scan_end")?, real(ctl, "scan_step")?) {
        (None, None, None) => None,
        (Some((a, _)), Some((b, line)), Some((s, _))) => {
            if !(b > a) || !(s > 0.0) {
                return Err(Error::parse(line, "scan needs scan_end > scan_start and scan_step > 0"));
            }
            Some((a, b, s))
        }
        _ => {
            let line = singles[0].as_ref().map(|s| s.1).unwrap_or(0);
            return Err(Error::parse(line, "scan needs scan_start, scan_end and scan_step"));
        }
    };
    let bracket = match (real(ctl, "bracket_lo")?, real(ctl, "bracket_hi")?) {
        (None, None) => None,
        (Some((a, _)), Some((b, line))) => {
            if !(b > a) {
                return Err(Error::parse(line, "bracket_hi must exceed bracket_lo"));
            }
            Some((a, b))
        }
        _ => {
            let line = singles[0].as_ref().map(|s| s.1).unwrap_or(0);
            return Err(Error::parse(line, "bracket needs bracket_lo and bracket_hi"));
        }
    };
    let objective = match get(ctl, "objective") {
        None => Objective::Selectivity,
        Some((v, line)) => v.parse().map_err(|_| Error::parse(line, format!("unknown objective `{v}`")))?,
    };

    let itf = section(1);
    let interfere = InterfereSection {
        horizon: positive(itf, "horizon", t_end)?,
        tol: positive(itf, "tol", crate::analysis::DEFAULT_INTERFERENCE_TOL)?,
    };

    let ana = section(2);
    let analyze = AnalyzeSection {
        input: get(ana, "input").map(|(v, _)| PathBuf::from(v)),
        order: positive(ana, "order", DEFAULT_ANALYSIS_ORDER)?,
    };

    Ok(RunConfig {
        library: library_path,
        mixture,
        temperature,
        pulses: pulse_seq,
        t_start,
        t_end,
        dt,
        decay_tau,
        jmax,
        output,
        control: ControlSection {
            target,
            p1,
            p2,
            horizon,
            delay,
            scan,
            bracket,
            objective,
        },
        interfere,
        analyze,
    })
}

impl RunConfig {
    pub fn specs(&self) -> Vec<IsotopologueSpec> {
        self.mixture.iter().map(|m| m.spec.clone()).collect()
    }

    pub fn components(&self) -> Vec<(IsotopologueSpec, f64)> {
        self.mixture.iter().map(|m| (m.spec.clone(), m.fraction)).collect()
    }

    /// Fully resolved configuration, defaults included, in the input format.
    /// Parsing the result yields the same configuration.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let opt = |x: Option<f64>| x.map_or("none".to_string(), |v| format!("{v:?}"));
        if let Some(lib) = &self.library {
            let _ = writeln!(s, "library = {}", lib.display());
        }
        let _ = writeln!(s, "temperature = {:?}", self.temperature);
        let _ = writeln!(s, "t_start = {:?}", self.t_start);
        let _ = writeln!(s, "t_end = {:?}", self.t_end);
        let _ = writeln!(s, "dt = {:?}", self.dt);
        let _ = writeln!(s, "decay_tau = {}", opt(self.decay_tau));
        if let Some(j) = self.jmax {
            let _ = writeln!(s, "jmax = {j}");
        }
        if let Some(out) = &self.output {
            let _ = writeln!(s, "output = {}", out.display());
        }
        for m in &self.mixture {
            let _ = writeln!(s, "[species]\nname = {}\nfraction = {:?}", m.spec.name, m.fraction);
        }
        for k in self.pulses.kicks() {
            let _ = writeln!(s, "[pulse]\ntime = {:?}\nstrength = {:?}", k.time, k.strength);
        }
        let c = &self.control;
        let _ = writeln!(s, "[control]");
        let _ = writeln!(s, "target = {}", self.mixture[c.target].spec.name);
        let _ = writeln!(s, "p1 = {:?}\np2 = {:?}\nhorizon = {:?}", c.p1, c.p2, c.horizon);
        if let Some(d) = c.delay {
            let _ = writeln!(s, "delay = {d:?}");
        }
        if let Some((a, b, st)) = c.scan {
            let _ = writeln!(s, "scan_start = {a:?}\nscan_end = {b:?}\nscan_step = {st:?}");
        }
        if let Some((a, b)) = c.bracket {
            let _ = writeln!(s, "bracket_lo = {a:?}\nbracket_hi = {b:?}");
        }
        let _ = writeln!(s, "objective = {}", c.objective.as_str());
        let _ = writeln!(s, "[interfere]\nhorizon = {:?}\ntol = {:?}", self.interfere.horizon, self.interfere.tol);
        let _ = writeln!(s, "[analyze]");
        if let Some(input) = &self.analyze.input {
            let _ = writeln!(s, "input = {}", input.display());
        }
        let _ = writeln!(s, "order = {:?}", self.analyze.order);
        s
    }
}
