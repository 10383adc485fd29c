//! Molecule library files.
//!
//! Each non-comment line holds exactly these `key=value` fields, in order:
//! `name mass_a mass_b B_cm1 D_cm1 spin_num abundance`, where `spin_num` is
//! twice the nuclear spin. Lines starting with `#` and blank lines are
//! skipped.

use std::path::Path;

use crate::error::{Error, Result};
use crate::rotor::IsotopologueSpec;

const FIELDS: [&str; 7] = [
    "name", "mass_a", "mass_b", "B_cm1", "D_cm1", "spin_num", "abundance",
];

const SHIPPED: &str = include_str!("../data/molecules.txt");

#[derive(Debug, Clone, Default)]
pub struct MoleculeLibrary {
    species: Vec<IsotopologueSpec>,
}

impl MoleculeLibrary {
    /// The library bundled with the crate (N₂ and Cl₂ isotopologues).
    pub fn shipped() -> Self {
        Self::parse(SHIPPED).expect("bundled molecule library is valid")
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut species: Vec<IsotopologueSpec> = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let lineno = idx + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let tokens: Vec<&str> = line.split_whitespace().collect();
            if tokens.len() != FIELDS.len() {
                return Err(Error::parse(
                    lineno,
                    format!("expected {} fields, found {}", FIELDS.len(), tokens.len()),
                ));
            }
            let mut values = [""; 7];
            for (slot, (token, expected)) in tokens.iter().zip(FIELDS).enumerate() {
                let (key, value) = token
                    .split_once('=')
                    .ok_or_else(|| Error::parse(lineno, format!("field `{token}` is not key=value")))?;
                if key != expected {
                    return Err(if FIELDS.contains(&key) {
                        Error::parse(lineno, format!("field `{key}` out of order, expected `{expected}`"))
                    } else {
                        Error::parse(lineno, format!("unknown field `{key}`"))
                    });
                }
                values[slot] = value;
            }

            let int = |i: usize| -> Result<u32> {
                values[i]
                    .parse()
                    .map_err(|_| Error::parse(lineno, format!("{}: bad integer `{}`", FIELDS[i], values[i])))
            };
            let real = |i: usize| -> Result<f64> {
                values[i]
                    .parse()
                    .map_err(|_| Error::parse(lineno, format!("{}: bad number `{}`", FIELDS[i], values[i])))
            };
            let spin_num: i64 = values[5]
                .parse()
                .map_err(|_| Error::parse(lineno, format!("spin_num: bad integer `{}`", values[5])))?;
            if spin_num < 0 {
                return Err(Error::parse(lineno, "spin_num must be non-negative"));
            }
            let name = values[0];
            if name.is_empty() {
                return Err(Error::parse(lineno, "empty species name"));
            }
            if species.iter().any(|s| s.name == name) {
                return Err(Error::parse(lineno, format!("duplicate species `{name}`")));
            }
            let spec = IsotopologueSpec::new(
                name,
                (int(1)?, int(2)?),
                real(3)?,
                real(4)?,
                spin_num as f64 / 2.0,
                real(6)?,
            )
            .map_err(|e| Error::parse(lineno, e.to_string()))?;
            species.push(spec);
        }
        Ok(MoleculeLibrary { species })
    }

    pub fn get(&self, name: &str) -> Result<&IsotopologueSpec> {
        self.species
            .iter()
            .find(|s| s.name == name)
            .ok_or_else(|| Error::InvalidArgument(format!("species `{name}` not in library")))
    }

    pub fn species(&self) -> &[IsotopologueSpec] {
        &self.species
    }

    /// Serializes back to the line format.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for s in &self.species {
            out.push_str(&format!(
                "name={} mass_a={} mass_b={} B_cm1={:?} D_cm1={:?} spin_num={} abundance={:?}\n",
                s.name, s.mass_a, s.mass_b, s.b, s.d, s.twice_spin, s.abundance
            ));
        }
        out
    }
}
