//! Linear rotor levels, nuclear-spin statistics and the cos²θ operator.
//!
//! Energies are in cm⁻¹ and times in ps. A level with energy `E` accumulates
//! phase `2π·c·E·t` with `c` in cm/ps.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Speed of light in cm/ps.
pub const SPEED_OF_LIGHT_CM_PER_PS: f64 = 0.029_979_245_8;

/// Boltzmann constant over `h·c`, in cm⁻¹/K.
pub const BOLTZMANN_CM_PER_K: f64 = 0.695_034_8;

/// One isotopologue of a linear molecule.
#[derive(Debug, Clone, PartialEq)]
pub struct IsotopologueSpec {
    pub name: String,
    pub mass_a: u32,
    pub mass_b: u32,
    /// Rotational constant, cm⁻¹.
    pub b: f64,
    /// Quartic centrifugal distortion constant, cm⁻¹.
    pub d: f64,
    /// Twice the nuclear spin of each nucleus (only used when homonuclear).
    pub twice_spin: u32,
    pub homonuclear: bool,
    pub abundance: f64,
}

impl IsotopologueSpec {
    /// Builds and validates a spec. Homonuclear iff the two mass numbers agree.
    pub fn new(
        name: impl Into<String>,
        masses: (u32, u32),
        b: f64,
        d: f64,
        nuclear_spin: f64,
        abundance: f64,
    ) -> Result<Self> {
        let twice = 2.0 * nuclear_spin;
        if !(nuclear_spin >= 0.0) || (twice - twice.round()).abs() > 1e-12 {
            return Err(Error::InvalidSpec(format!(
                "nuclear spin {nuclear_spin} is not a non-negative half-integer"
            )));
        }
        let spec = IsotopologueSpec {
            name: name.into(),
            mass_a: masses.0,
            mass_b: masses.1,
            b,
            d,
            twice_spin: twice.round() as u32,
            homonuclear: masses.0 == masses.1,
            abundance,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.b > 0.0) || !self.b.is_finite() {
            return Err(Error::InvalidSpec(format!("{}: B must be positive", self.name)));
        }
        if !(self.d >= 0.0) || !self.d.is_finite() {
            return Err(Error::InvalidSpec(format!("{}: D must be non-negative", self.name)));
        }
        if !(0.0..=1.0).contains(&self.abundance) {
            return Err(Error::InvalidSpec(format!(
                "{}: abundance {} outside [0, 1]",
                self.name, self.abundance
            )));
        }
        if self.homonuclear && self.mass_a != self.mass_b {
            return Err(Error::InvalidSpec(format!(
                "{}: homonuclear species needs equal mass numbers",
                self.name
            )));
        }
        if self.d > 1e-3 * self.b {
            log::warn!("{}: D = {} is not small compared to B = {}", self.name, self.d, self.b);
        }
        Ok(())
    }

    pub fn nuclear_spin(&self) -> f64 {
        self.twice_spin as f64 / 2.0
    }

    /// Highest J below which the level ladder is strictly increasing.
    pub fn monotone_limit(&self) -> u32 {
        if self.d == 0.0 {
            return u32::MAX;
        }
        // E(J) - E(J-1) = 2BJ - 4DJ³ > 0  <=>  J < sqrt(B / 2D)
        let limit = (self.b / (2.0 * self.d)).sqrt();
        let mut j = limit.floor() as u32;
        while j > 0 && 2.0 * self.b * j as f64 - 4.0 * self.d * (j as f64).powi(3) <= 0.0 {
            j -= 1;
        }
        j
    }
}

/// `E_J = B·J(J+1) − D·J²(J+1)²` in cm⁻¹.
pub fn rotational_energy(spec: &IsotopologueSpec, j: u32) -> Result<f64> {
    if j > spec.monotone_limit() {
        return Err(Error::InvalidSpec(format!(
            "{}: level ladder is not monotone up to J = {j} (D too large)",
            spec.name
        )));
    }
    Ok(level(spec, j))
}

#[inline]
pub(crate) fn level(spec: &IsotopologueSpec, j: u32) -> f64 {
    let x = j as f64 * (j as f64 + 1.0);
    spec.b * x - spec.d * x * x
}

/// All levels `E_0 … E_jmax`.
pub fn level_ladder(spec: &IsotopologueSpec, jmax: u32) -> Result<Vec<f64>> {
    rotational_energy(spec, jmax)?;
    Ok((0..=jmax).map(|j| level(spec, j)).collect())
}

/// Full revival period `1 / (2·B·c)` in ps.
pub fn revival_time(spec: &IsotopologueSpec) -> f64 {
    1.0 / (2.0 * spec.b * SPEED_OF_LIGHT_CM_PER_PS)
}

/// Nuclear-spin statistical weight of level `J`.
///
/// Bosonic nuclei: even J carry `(I+1)(2I+1)`, odd J carry `I(2I+1)`.
/// Fermionic nuclei swap the two. Heteronuclear species weigh every J by 1.
pub fn spin_weight(spec: &IsotopologueSpec, j: u32) -> f64 {
    if !spec.homonuclear {
        return 1.0;
    }
    let two_i = spec.twice_spin as f64;
    // (I+1)(2I+1) and I(2I+1) in terms of 2I
    let symmetric = (two_i + 2.0) * (two_i + 1.0) / 2.0;
    let antisymmetric = two_i * (two_i + 1.0) / 2.0;
    let boson = spec.twice_spin.is_multiple_of(2);
    let even = j.is_multiple_of(2);
    if boson == even {
        symmetric
    } else {
        antisymmetric
    }
}

/// `⟨J,M|cos²θ|J,M⟩`.
pub fn cos2_diagonal(j: u32, m: i32) -> f64 {
    let jf = j as f64;
    let m2 = (m as f64).powi(2);
    1.0 / 3.0 + 2.0 / 3.0 * (jf * (jf + 1.0) - 3.0 * m2) / ((2.0 * jf - 1.0) * (2.0 * jf + 3.0))
}

/// `⟨J+2,M|cos²θ|J,M⟩`.
pub fn cos2_coupling(j: u32, m: i32) -> f64 {
    let jf = j as f64;
    let m2 = (m as f64).powi(2);
    let num = ((jf + 1.0).powi(2) - m2) * ((jf + 2.0).powi(2) - m2);
    let den = (2.0 * jf + 1.0) * (2.0 * jf + 5.0);
    (num / den).sqrt() / (2.0 * jf + 3.0)
}

#[derive(Debug, Clone)]
struct ParitySector {
    /// Positions of this sector's J values within the block.
    rows: Vec<usize>,
    eigenvalues: Vec<f64>,
    /// Columns are orthonormal eigenvectors.
    eigenvectors: DMatrix<f64>,
}

/// cos²θ restricted to fixed M and `J = |M| … jmax`.
///
/// The operator only couples `J` to `J` and `J ± 2`, so even and odd J never
/// mix; each parity sector is diagonalized on its own.
#[derive(Debug, Clone)]
pub struct Cos2Block {
    m: i32,
    jmax: u32,
    matrix: DMatrix<f64>,
    sectors: Vec<ParitySector>,
}

pub fn build_cos2_block(m: i32, jmax: u32) -> Result<Cos2Block> {
    let jmin = m.unsigned_abs();
    if jmax < jmin {
        return Err(Error::InvalidArgument(format!("jmax {jmax} < |M| = {jmin}")));
    }
    let n = (jmax - jmin + 1) as usize;
    let mut matrix = DMatrix::zeros(n, n);
    for i in 0..n {
        let j = jmin + i as u32;
        matrix[(i, i)] = cos2_diagonal(j, m);
        if i + 2 < n {
            let c = cos2_coupling(j, m);
            matrix[(i, i + 2)] = c;
            matrix[(i + 2, i)] = c;
        }
    }

    let mut sectors = Vec::with_capacity(2);
    for start in 0..2.min(n) {
        let rows: Vec<usize> = (start..n).step_by(2).collect();
        let k = rows.len();
        let sub = DMatrix::from_fn(k, k, |a, b| matrix[(rows[a], rows[b])]);
        let eig = SymmetricEigen::new(sub);
        sectors.push(ParitySector {
            rows,
            eigenvalues: eig.eigenvalues.iter().copied().collect(),
            eigenvectors: eig.eigenvectors,
        });
    }

    Ok(Cos2Block {
        m,
        jmax,
        matrix,
        sectors,
    })
}

impl Cos2Block {
    pub fn m(&self) -> i32 {
        self.m
    }

    pub fn jmin(&self) -> u32 {
        self.m.unsigned_abs()
    }

    pub fn jmax(&self) -> u32 {
        self.jmax
    }

    pub fn j_values(&self) -> impl Iterator<Item = u32> {
        self.jmin()..=self.jmax
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// Element `⟨J',M|cos²θ|J,M⟩`; zero outside the block.
    pub fn element(&self, j_row: u32, j_col: u32) -> f64 {
        let lo = self.jmin();
        if j_row < lo || j_col < lo || j_row > self.jmax || j_col > self.jmax {
            return 0.0;
        }
        self.matrix[((j_row - lo) as usize, (j_col - lo) as usize)]
    }

    /// All eigenvalues, ascending.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut all: Vec<f64> = self
            .sectors
            .iter()
            .flat_map(|s| s.eigenvalues.iter().copied())
            .collect();
        all.sort_by(f64::total_cmp);
        all
    }

    /// Reconstructs `V·diag(λ)·Vᵀ` from the cached eigenpairs.
    pub fn reconstruct(&self) -> DMatrix<f64> {
        let n = self.dim();
        let mut out = DMatrix::zeros(n, n);
        for s in &self.sectors {
            let v = &s.eigenvectors;
            for (a, &ra) in s.rows.iter().enumerate() {
                for (b, &rb) in s.rows.iter().enumerate() {
                    out[(ra, rb)] = (0..s.eigenvalues.len())
                        .map(|k| v[(a, k)] * s.eigenvalues[k] * v[(b, k)])
                        .sum();
                }
            }
        }
        out
    }

    /// Applies `exp(i·p·C)` to amplitudes indexed from `J = |M|`.
    pub(crate) fn exp_i_apply(&self, amplitudes: &mut [Complex64], p: f64) {
        debug_assert_eq!(amplitudes.len(), self.dim());
        let mut local = Vec::new();
        let mut proj = Vec::new();
        for s in &self.sectors {
            let k = s.rows.len();
            local.clear();
            local.extend(s.rows.iter().map(|&r| amplitudes[r]));
            proj.clear();
            for col in 0..k {
                let v = s.eigenvectors.column(col);
                let mut acc = Complex64::new(0.0, 0.0);
                for (x, a) in v.iter().zip(&local) {
                    acc += a * *x;
                }
                proj.push(acc * Complex64::from_polar(1.0, p * s.eigenvalues[col]));
            }
            for (a, &r) in s.rows.iter().enumerate() {
                let mut acc = Complex64::new(0.0, 0.0);
                for (col, c) in proj.iter().enumerate() {
                    acc += c * s.eigenvectors[(a, col)];
                }
                amplitudes[r] = acc;
            }
        }
    }

    /// `aᴴ·C·a` using the tridiagonal structure.
    pub(crate) fn expectation(&self, amplitudes: &[Complex64]) -> f64 {
        let n = self.dim();
        let mut diag = 0.0;
        let mut off = 0.0;
        for i in 0..n {
            diag += amplitudes[i].norm_sqr() * self.matrix[(i, i)];
            if i + 2 < n {
                off += (amplitudes[i].conj() * amplitudes[i + 2]).re * self.matrix[(i, i + 2)];
            }
        }
        diag + 2.0 * off
    }
}
