mod common;

use common::*;
use isorot::dynamics::{Kick, PulseSequence, Rotor, WavepacketState};
use isorot::ensemble::{
    ensemble_alignment, mixture_fwm_signal, time_grid, EnsembleSimulator, ThermalEnsemble,
};
use isorot::rotor::{build_cos2_block, level_ladder, revival_time, rotational_energy, spin_weight};
use isorot::IsotopologueSpec;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn quadrature_nodes_integrate_polynomials() {
    let (x, w) = gauss_legendre(12);
    let total: f64 = w.iter().sum();
    assert!((total - 2.0).abs() < 1e-14);
    let fourth: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(4)).sum();
    assert!((fourth - 0.4).abs() < 1e-14);
    for m in [0, 3] {
        let diag = quadrature_cos2(6, m).map(|_| 0.0);
        let (nodes, weights) = gauss_legendre(20);
        let mut norms = vec![0.0; diag.nrows()];
        for (x, w) in nodes.iter().zip(&weights) {
            for (n, p) in norms.iter_mut().zip(normalized_legendre(6, m, *x)) {
                *n += w * p * p;
            }
        }
        for n in norms {
            assert!((n - 1.0).abs() < 1e-13);
        }
    }
}

#[test]
fn cos2_elements_match_quadrature() {
    for jmax in [0u32, 1, 7, 20, 45] {
        for m in [0u32, 1, 2, 5, 12, 30] {
            if m > jmax {
                continue;
            }
            let block = build_cos2_block(m as i32, jmax).unwrap();
            let oracle = quadrature_cos2(jmax, m);
            for r in 0..block.dim() {
                for c in 0..block.dim() {
                    let got = block.matrix()[(r, c)];
                    assert!(
                        (got - oracle[(r, c)]).abs() < 1e-10,
                        "M={m} Jmax={jmax} ({r},{c}): {got} vs {}",
                        oracle[(r, c)]
                    );
                }
            }
            let negative = build_cos2_block(-(m as i32), jmax).unwrap();
            assert_eq!(negative.matrix(), block.matrix());
        }
    }
}

#[test]
fn block_trace_and_spectrum() {
    for (m, jmax) in [(0, 30), (3, 17), (10, 40)] {
        let block = build_cos2_block(m, jmax).unwrap();
        let trace: f64 = block.matrix().diagonal().sum();
        let eig: f64 = block.eigenvalues().iter().sum();
        assert!((trace - eig).abs() < 1e-10);
        assert!(block.eigenvalues().iter().all(|&l| l > 0.0 && l < 1.0));
        assert!((block.reconstruct() - block.matrix()).abs().max() < 1e-12);
    }
    assert!(build_cos2_block(5, 4).is_err());
}

#[test]
fn level_examples() {
    let n14 = shipped("N2-14");
    assert_eq!(rotational_energy(&n14, 0).unwrap(), 0.0);
    let e1 = rotational_energy(&n14, 1).unwrap();
    assert!((e1 - (2.0 * 1.98958 - 4.0 * 5.76e-6)).abs() < 1e-12);
    assert!((e1 - 3.97913).abs() < 1e-5);
    let flat = rigid("N2-14");
    assert!((rotational_energy(&flat, 10).unwrap() - 218.8538).abs() < 1e-9);
    let ladder = level_ladder(&flat, 60).unwrap();
    for j in 0..60 {
        let step = 2.0 * flat.b * (j + 1) as f64;
        assert!((ladder[j + 1] - ladder[j] - step).abs() <= 4.0 * f64::EPSILON * ladder[j + 1]);
    }
    assert!((revival_time(&n14) - 8.383).abs() < 5e-4);
    let cl = shipped("Cl2-35");
    assert!((revival_time(&cl) - 68.3).abs() < 0.1);
    assert!((2.0 * revival_time(&cl) - 137.0).abs() < 0.5);
}

#[test]
fn spin_statistics() {
    let n14 = shipped("N2-14");
    assert_eq!((spin_weight(&n14, 0), spin_weight(&n14, 1)), (6.0, 3.0));
    let n15 = shipped("N2-15");
    assert_eq!((spin_weight(&n15, 0), spin_weight(&n15, 1)), (1.0, 3.0));
    let cl = shipped("Cl2-35");
    assert_eq!(spin_weight(&cl, 2) / spin_weight(&cl, 3), 3.0 / 5.0);
    let mixed = shipped("Cl-35-37");
    assert!((0..10).all(|j| spin_weight(&mixed, j) == 1.0));
    assert!(IsotopologueSpec::new("X", (1, 1), 1.0, 0.0, -0.5, 1.0).is_err());
    assert!(IsotopologueSpec::new("X", (1, 1), 1.0, 0.0, 0.3, 1.0).is_err());
}

#[test]
fn kick_examples() {
    let rotor = Rotor::new(&rigid("N2-14"), 40, 2).unwrap();
    let ground = rotor.eigenstate(0, 0, 0.0).unwrap();
    assert_eq!(rotor.kick(&ground, 0.0).unwrap(), ground);

    let p = 0.01;
    let kicked = rotor.kick(&ground, p).unwrap();
    let first_order = p * p * (2.0 / (3.0 * 5f64.sqrt())).powi(2);
    assert!((first_order - 4.0 / 45.0 * p * p).abs() < 1e-20);
    assert!((kicked.population(2) / first_order - 1.0).abs() < 0.01);

    let strong = rotor.kick(&ground, 5.0).unwrap();
    assert!((strong.norm_sqr() - 1.0).abs() < 1e-12);
}

#[test]
fn kick_agrees_with_second_order_series() {
    let rotor = Rotor::new(&rigid("N2-14"), 40, 4).unwrap();
    for (j, m) in [(0u32, 0i32), (3, 1), (10, 4), (25, 0)] {
        let block = rotor.block(m).unwrap();
        let state = rotor.eigenstate(j, m, 0.0).unwrap();
        for p in [0.01, 0.005] {
            let exact = rotor.kick(&state, p).unwrap();
            let series = second_order_kick(block, state.amplitudes(), p);
            for (i, (a, b)) in exact.amplitudes().iter().zip(&series).enumerate() {
                let jj = block.jmin() + i as u32;
                if jj.abs_diff(j) <= 2 && b.norm() > 0.0 {
                    assert!((a - b).norm() / b.norm() <= 1e-4, "J={jj} from {j}: {a} vs {b}");
                }
                assert!((a - b).norm() <= p.powi(3));
            }
        }
    }
}

#[test]
fn kick_unitarity_over_random_states() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let rotor = Rotor::new(&rigid("N2-14"), 50, 10).unwrap();
    for i in 0..1000 {
        let m = (i % 11) - 5;
        let dim = rotor.block(m).unwrap().dim();
        let state = WavepacketState::new("N2-14", m, random_state(&mut rng, dim), 0.0).unwrap();
        let p = 10.0 * (i as f64 + 0.5) / 1000.0;
        let out = rotor.kick(&state, p).unwrap();
        assert!((out.norm_sqr() - 1.0).abs() < 1e-10);
    }
}

#[test]
fn parity_and_m_are_conserved() {
    let rotor = Rotor::new(&shipped("N2-14"), 40, 3).unwrap();
    let even = rotor.eigenstate(4, 2, 0.0).unwrap();
    let pulses = PulseSequence::new(vec![
        Kick { time: 0.0, strength: 2.0 },
        Kick { time: 3.1, strength: 1.5 },
    ])
    .unwrap();
    let mut s = rotor.kick(&even, 2.0).unwrap();
    rotor.propagate_in_place(&mut s, 3.1);
    rotor.kick_in_place(&mut s, pulses.kicks()[1].strength).unwrap();
    assert_eq!(s.m(), 2);
    for j in s.jmin()..=s.jmax() {
        if j % 2 == 1 {
            assert_eq!(s.population(j), 0.0);
        }
    }
}

#[test]
fn full_and_half_revival_phases() {
    let spec = rigid("N2-14");
    let rotor = Rotor::new(&spec, 60, 0).unwrap();
    let t = revival_time(&spec);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let amps = random_state(&mut rng, 61);
    let state = WavepacketState::new("N2-14", 0, amps, 0.0).unwrap();
    let back = rotor.propagate(&state, t);
    for (a, b) in back.amplitudes().iter().zip(state.amplitudes()) {
        assert!((a - b).norm() < 1e-12);
    }
    assert_eq!(rotor.propagate(&state, 0.0).amplitudes(), state.amplitudes());
    let expected = [1.0, -1.0, -1.0, 1.0, 1.0, -1.0];
    for (j, sign) in expected.iter().enumerate() {
        let e = rotor.eigenstate(j as u32, 0, 0.0).unwrap();
        let half = rotor.propagate(&e, 0.5 * t);
        assert!((half.amplitude(j as u32) - Complex64::new(*sign, 0.0)).norm() < 1e-12);
    }
}

#[test]
fn expectation_examples() {
    let rotor = Rotor::new(&IsotopologueSpec::new("R", (1, 2), 2.0, 0.0, 0.0, 1.0).unwrap(), 10, 1).unwrap();
    let c = |j, m| rotor.cos2(&rotor.eigenstate(j, m, 0.0).unwrap()).unwrap();
    assert!((c(0, 0) - 1.0 / 3.0).abs() < 1e-15);
    assert!((c(1, 0) - 0.6).abs() < 1e-15);
    assert!((c(1, 1) - 0.2).abs() < 1e-15);
    assert!((c(1, -1) - 0.2).abs() < 1e-15);
    assert!((c(1, 0) + c(1, 1) + c(1, -1) - 1.0).abs() < 1e-15);

    let h = std::f64::consts::FRAC_1_SQRT_2;
    let mut amps = vec![Complex64::default(); 11];
    amps[0] = Complex64::new(h, 0.0);
    amps[2] = Complex64::new(h, 0.0);
    let mix = WavepacketState::new("R", 0, amps, 0.0).unwrap();
    assert!((rotor.energy(&mix) - 6.0).abs() < 1e-12);
    assert_eq!(rotor.energy(&rotor.eigenstate(0, 0, 0.0).unwrap()), 0.0);
}

#[test]
fn energy_after_kick_grows_with_strength() {
    let rotor = Rotor::new(&rigid("N2-14"), 30, 0).unwrap();
    let ground = rotor.eigenstate(0, 0, 0.0).unwrap();
    let mut last = 0.0;
    for i in 1..=20 {
        let e = rotor.energy(&rotor.kick(&ground, i as f64 * 0.05).unwrap());
        assert!(e > last);
        last = e;
    }
}

#[test]
fn sequence_examples() {
    let spec = rigid("N2-14");
    let rotor = Rotor::new(&spec, 40, 0).unwrap();
    let t = revival_time(&spec);
    let ground = rotor.eigenstate(0, 0, 0.0).unwrap();
    let grid = time_grid(0.0, 2.0 * t, 0.01).unwrap();

    let flat = rotor.run_sequence(&ground, &PulseSequence::empty(), &grid).unwrap();
    assert!(flat.iter().all(|v| (v - 1.0 / 3.0).abs() < 1e-15));

    let kicked = rotor.run_sequence(&ground, &PulseSequence::single(0.0, 1.0).unwrap(), &grid).unwrap();
    let shift = grid.iter().position(|x| *x >= t).unwrap();
    let shifted = rotor
        .run_sequence(
            &ground,
            &PulseSequence::single(0.0, 1.0).unwrap(),
            &grid.iter().map(|x| x + t).collect::<Vec<_>>(),
        )
        .unwrap();
    for (a, b) in kicked.iter().zip(&shifted) {
        assert!((a - b).abs() < 1e-9);
    }
    assert!(shift > 0);

    let samples = time_grid(t + 0.05, 2.0 * t, 0.01).unwrap();
    let range = |v: &[f64]| v.iter().cloned().fold(f64::MIN, f64::max) - v.iter().cloned().fold(f64::MAX, f64::min);
    let one = rotor.run_sequence(&ground, &PulseSequence::single(0.0, 1.0).unwrap(), &samples).unwrap();
    let two = PulseSequence::new(vec![Kick { time: 0.0, strength: 1.0 }, Kick { time: t, strength: 1.0 }]).unwrap();
    let both = rotor.run_sequence(&ground, &two, &samples).unwrap();
    assert!(range(&both) > range(&one));

    let unsorted = [1.0, 0.5];
    assert!(rotor.run_sequence(&ground, &two, &unsorted).is_err());
}

#[test]
fn thermal_examples() {
    let spec = shipped("N2-14");
    let e = ThermalEnsemble::at_temperature(&spec, 295.0).unwrap();
    let grid = time_grid(0.0, 20.0, 0.05).unwrap();
    let flat = ensemble_alignment(&e, &PulseSequence::empty(), &grid, None).unwrap();
    assert!(flat.alignment[0].iter().all(|a| (a - 1.0 / 3.0).abs() < 1e-9));

    let t = revival_time(&spec);
    let trace = ensemble_alignment(&e, &PulseSequence::single(0.0, 3.0).unwrap(), &grid, None).unwrap();
    let prompt = trace
        .times
        .iter()
        .zip(&trace.alignment[0])
        .filter(|(x, _)| **x > 0.0 && **x <= 0.2 * t)
        .any(|(_, a)| *a > 1.0 / 3.0 + 0.05);
    assert!(prompt);

    let none = mixture_fwm_signal(&[(spec.clone(), 1.0)], &PulseSequence::empty(), 295.0, &grid, None, None).unwrap();
    assert!(none.signal.iter().all(|s| *s == 0.0));
    assert!(mixture_fwm_signal(&[(spec.clone(), 0.6), (shipped("N2-15"), 0.5)], &PulseSequence::empty(), 295.0, &grid, None, None).is_err());
}

#[test]
fn thermal_trace_is_periodic_for_rigid_rotors() {
    let spec = rigid("N2-15");
    let t = revival_time(&spec);
    let e = ThermalEnsemble::at_temperature(&spec, 295.0).unwrap();
    let mut sim = EnsembleSimulator::new(e, 2.0, None).unwrap();
    let response = sim.evolve(&PulseSequence::single(0.0, 2.0).unwrap()).unwrap();
    for i in 1..400 {
        let x = i as f64 * t / 400.0;
        let d = (response.alignment_at(x) - response.alignment_at(x + t)).abs();
        let d5 = (response.alignment_at(x) - response.alignment_at(x + 5.0 * t)).abs();
        assert!(d < 1e-9 && d5 < 1e-9);
    }
}

#[test]
fn distortion_deforms_late_revivals() {
    let spec = shipped("N2-14");
    let t = revival_time(&spec);
    let trace = single_kick_trace(&spec, 3.0, 340.0, 0.01);
    let chi = trace.chi(0);
    let early: Vec<f64> = (0..160).map(|i| chi[(t / 0.01) as usize - 80 + i]).collect();
    let late: Vec<f64> = (0..160).map(|i| chi[(40.0 * t / 0.01) as usize - 80 + i]).collect();
    let diff = early.iter().zip(&late).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(diff > 1e-4);
    assert!(chi.iter().all(|c| c.abs() < 2.0 / 3.0));
}
