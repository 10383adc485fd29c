//! Independent reference computations shared by the integration tests.
#![allow(dead_code)]

use isorot::ensemble::{ensemble_alignment, time_grid, AlignmentTrace, ThermalEnsemble};
use isorot::rotor::Cos2Block;
use isorot::{IsotopologueSpec, MoleculeLibrary, PulseSequence};
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;

pub fn shipped(name: &str) -> IsotopologueSpec {
    MoleculeLibrary::shipped().get(name).unwrap().clone()
}

pub fn rigid(name: &str) -> IsotopologueSpec {
    let mut spec = shipped(name);
    spec.d = 0.0;
    spec
}

/// Gauss-Legendre nodes and weights on [-1, 1] by Newton iteration.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let step = p1 / dp;
            x -= step;
            if step.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = x;
        weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    (nodes, weights)
}

/// Associated Legendre functions normalized to unit norm on [-1, 1], for
/// `l = m..=lmax` at `x`.
pub fn normalized_legendre(lmax: u32, m: u32, x: f64) -> Vec<f64> {
    let s = (1.0 - x * x).sqrt();
    let mut pmm = 0.5f64.sqrt();
    for k in 1..=m {
        let k = k as f64;
        pmm *= -((2.0 * k + 1.0) / (2.0 * k)).sqrt() * s;
    }
    let mut out = vec![pmm];
    if lmax == m {
        return out;
    }
    out.push(x * (2.0 * m as f64 + 3.0).sqrt() * pmm);
    let a = |l: u32| {
        let (l, m) = (l as f64, m as f64);
        ((4.0 * l * l - 1.0) / (l * l - m * m)).sqrt()
    };
    for l in m + 2..=lmax {
        let i = (l - m) as usize;
        let next = a(l) * (x * out[i - 1] - out[i - 2] / a(l - 1));
        out.push(next);
    }
    out
}

/// `⟨J', M| cos²θ |J, M⟩` by quadrature.
pub fn quadrature_cos2(jmax: u32, m: u32) -> DMatrix<f64> {
    let dim = (jmax - m + 1) as usize;
    let (nodes, weights) = gauss_legendre(jmax as usize + 8);
    let mut out = DMatrix::zeros(dim, dim);
    for (x, w) in nodes.iter().zip(&weights) {
        let p = normalized_legendre(jmax, m, *x);
        for r in 0..dim {
            for c in 0..dim {
                out[(r, c)] += w * x * x * p[r] * p[c];
            }
        }
    }
    out
}

/// `exp(iPC)·a` to second order in `P`.
pub fn second_order_kick(block: &Cos2Block, amps: &[Complex64], p: f64) -> Vec<Complex64> {
    let c = block.matrix().map(|v| Complex64::new(v, 0.0));
    let a = nalgebra::DVector::from_column_slice(amps);
    let ca = &c * &a;
    let cca = &c * &ca;
    let i = Complex64::new(0.0, 1.0);
    (a + ca * (i * p) + cca * (i * i * p * p * 0.5)).iter().copied().collect()
}

pub fn random_state<R: Rng>(rng: &mut R, dim: usize) -> Vec<Complex64> {
    let raw: Vec<Complex64> = (0..dim)
        .map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
        .collect();
    let norm = raw.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    raw.into_iter().map(|a| a / norm).collect()
}

/// Thermal single-kick trace at 295 K.
pub fn single_kick_trace(spec: &IsotopologueSpec, p: f64, t_end: f64, dt: f64) -> AlignmentTrace {
    let ensemble = ThermalEnsemble::at_temperature(spec, 295.0).unwrap();
    let grid = time_grid(0.0, t_end, dt).unwrap();
    ensemble_alignment(&ensemble, &PulseSequence::single(0.0, p).unwrap(), &grid, None).unwrap()
}

/// Max minus min of `values` over samples with `|t - center| <= half`.
pub fn peak_to_peak(times: &[f64], values: &[f64], center: f64, half: f64) -> f64 {
    let window = times
        .iter()
        .zip(values)
        .filter(|(t, _)| (**t - center).abs() <= half)
        .map(|(_, v)| *v);
    let (lo, hi) = window.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    hi - lo
}

/// Max of `values` over samples with `|t - center| <= half`.
pub fn window_max(times: &[f64], values: &[f64], center: f64, half: f64) -> f64 {
    times
        .iter()
        .zip(values)
        .filter(|(t, _)| (**t - center).abs() <= half)
        .map(|(_, v)| *v)
        .fold(f64::NEG_INFINITY, f64::max)
}
