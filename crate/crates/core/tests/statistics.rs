//! Statistical checks of the samplers against independently computed
//! distributions.

use std::collections::BTreeMap;

use num_complex::Complex64;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};
use trajfrac::analytic::single_shot_mean_ipr;
use trajfrac::cdyn::{classical_measurement_layer, ProbabilityVector};
use trajfrac::ensemble::{derive_stream, run, Dynamics, ExperimentSpec, RunOptions};
use trajfrac::lattice::Boundary;
use trajfrac::qdyn::{
    evolve_quantum_trajectory, measurement_layer, outcome_probabilities, apply_measurement, sample_haar_unitary,
    Amplitudes, GateKind, MeasurementScheme, QuantumProtocol,
};
use trajfrac::observables::RunningStats;

fn chi2_p_value(statistic: f64, dof: usize) -> f64 {
    1.0 - ChiSquared::new(dof as f64).unwrap().cdf(statistic)
}

/// Pearson statistic of observed counts against expected probabilities.
fn pearson<K: Ord>(observed: &BTreeMap<K, u64>, expected: &BTreeMap<K, f64>, n: u64) -> (f64, usize) {
    let mut stat = 0.0;
    for (key, &p) in expected {
        let e = p * n as f64;
        let o = observed.get(key).copied().unwrap_or(0) as f64;
        stat += (o - e).powi(2) / e;
    }
    assert!(observed.keys().all(|k| expected.contains_key(k)), "impossible record observed");
    (stat, expected.len() - 1)
}

/// Asymptotic Kolmogorov survival function with the Stephens correction.
fn ks_p_value(d: f64, n: usize) -> f64 {
    let sn = (n as f64).sqrt();
    let lambda = (sn + 0.12 + 0.11 / sn) * d;
    let mut sum = 0.0;
    for k in 1..200 {
        let term = (-2.0 * (k * k) as f64 * lambda * lambda).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

#[test]
fn haar_second_moment() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let n = 100_000;
    let mut sum = 0.0;
    for _ in 0..n {
        let u = sample_haar_unitary(&mut rng);
        let (a, b) = u.apply(Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0));
        sum += a.norm_sqr().powi(2) + b.norm_sqr().powi(2);
    }
    let mean = sum / n as f64;
    assert!((mean - 2.0 / 3.0).abs() < 0.01, "{mean}");
}

#[test]
fn haar_entry_modulus_is_uniform() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let n = 100_000;
    let mut xs: Vec<f64> = (0..n)
        .map(|_| sample_haar_unitary(&mut rng).entries()[0][0].norm_sqr())
        .collect();
    xs.sort_by(f64::total_cmp);
    let d = xs
        .iter()
        .enumerate()
        .map(|(i, &x)| ((i + 1) as f64 / n as f64 - x).max(x - i as f64 / n as f64))
        .fold(0.0, f64::max);
    let p = ks_p_value(d, n);
    assert!(p > 0.01, "KS D = {d}, p = {p}");
}

/// Exact distribution of measurement records of one layer: every subset of
/// sites selected with probability `p` per site, outcomes drawn in
/// ascending site order.
fn enumerate_layer(state: &Amplitudes, p: f64, scheme: MeasurementScheme) -> BTreeMap<Vec<(usize, u8)>, f64> {
    let len = state.len();
    let mut out = BTreeMap::new();
    for subset in 0u32..(1 << len) {
        let sites: Vec<usize> = (0..len).filter(|&i| subset >> i & 1 == 1).collect();
        let weight = p.powi(sites.len() as i32) * (1.0 - p).powi((len - sites.len()) as i32);
        for bits in 0u32..(1 << sites.len()) {
            let mut psi = state.clone();
            let mut prob = weight;
            let mut record = Vec::new();
            for (k, &site) in sites.iter().enumerate() {
                let outcome = (bits >> k & 1) as u8;
                let (p0, p1) = outcome_probabilities(&psi, site, scheme).unwrap();
                prob *= if outcome == 0 { p0 } else { p1 };
                if prob <= 0.0 {
                    break;
                }
                apply_measurement(&mut psi, site, outcome, scheme).unwrap();
                record.push((site, outcome));
            }
            if prob > 0.0 {
                *out.entry(record).or_insert(0.0) += prob;
            }
        }
    }
    out
}

#[test]
fn measurement_layer_records_match_enumeration() {
    let state = Amplitudes::from_vec(vec![
        Complex64::new(0.6, 0.1),
        Complex64::new(-0.3, 0.4),
        Complex64::new(0.2, -0.5),
        Complex64::new(0.1, 0.3),
    ])
    .unwrap();
    for (seed, scheme) in [
        (3, MeasurementScheme::Projective),
        (4, MeasurementScheme::Generalized { error_rate: 0.5 }),
    ] {
        let p = 0.4;
        let expected = enumerate_layer(&state, p, scheme);
        assert!((expected.values().sum::<f64>() - 1.0).abs() < 1e-12);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = 50_000;
        let mut observed = BTreeMap::new();
        for _ in 0..n {
            let mut psi = state.clone();
            let record = measurement_layer(&mut psi, p, scheme, &mut rng).unwrap();
            *observed.entry(record).or_insert(0) += 1;
        }
        let (stat, dof) = pearson(&observed, &expected, n);
        let pv = chi2_p_value(stat, dof);
        assert!(pv > 1e-3, "{scheme:?}: chi2 = {stat}, dof = {dof}, p = {pv}");
    }
}

#[test]
fn classical_layer_detection_rate() {
    // the truth is detected exactly when its site is selected
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (n, p) = (40_000, 0.3);
    let mut detected = 0;
    for _ in 0..n {
        let mut dist = ProbabilityVector::uniform(8).unwrap();
        classical_measurement_layer(&mut dist, 5, p, &mut rng).unwrap();
        if dist.values()[5] == 1.0 {
            detected += 1;
        }
    }
    let sigma = (n as f64 * p * (1.0 - p)).sqrt();
    assert!((detected as f64 - n as f64 * p).abs() < 4.0 * sigma, "{detected}");
}

#[test]
fn monitored_haar_relaxes_to_infinite_temperature() {
    let len = 16;
    let protocol = QuantumProtocol {
        len,
        boundary: Boundary::Pbc,
        gates: GateKind::Haar,
        scheme: MeasurementScheme::Projective,
        rate: 1.0 / len as f64,
    };
    let mut occupation = vec![RunningStats::default(); len];
    for index in 0..3000 {
        let mut rng = derive_stream(6, len, index);
        let state = evolve_quantum_trajectory(protocol, (len * len) as u64, &mut rng).unwrap();
        for (acc, p) in occupation.iter_mut().zip(state.probabilities().values()) {
            acc.push(*p);
        }
    }
    for (i, acc) in occupation.iter().enumerate() {
        let z = (acc.mean() - 1.0 / len as f64) / acc.stderr();
        assert!(z.abs() < 3.5, "site {i}: mean {} (z = {z})", acc.mean());
    }
}

#[test]
fn adjacent_streams_are_independent() {
    let mut a = derive_stream(7, 64, 0);
    let mut b = derive_stream(7, 64, 1);
    let n = 10_000u64;
    let mut table = [[0u64; 16]; 16];
    for _ in 0..n {
        table[(a.next_u64() >> 60) as usize][(b.next_u64() >> 60) as usize] += 1;
    }
    let e = n as f64 / 256.0;
    let stat: f64 = table.iter().flatten().map(|&o| (o as f64 - e).powi(2) / e).sum();
    let pv = chi2_p_value(stat, 255);
    assert!(pv > 1e-3, "chi2 = {stat}, p = {pv}");
}

#[test]
fn single_shot_ensemble_mean() {
    let mut spec = ExperimentSpec::new(Dynamics::SingleShot, vec![100], 100_000, 8);
    spec.q_grid = vec![2.0];
    let result = run(&spec, &RunOptions::default()).unwrap();
    let cell = result.sizes[0].stats.cell(0, 0);
    let exact = single_shot_mean_ipr(100, 2.0, 1).unwrap();
    assert!((exact - 0.02).abs() < 1e-15);
    assert!((cell.mean_ipr - exact).abs() < 3.0 * cell.mean_ipr_stderr, "{cell:?}");
}

/// Least-squares slope and R^2 of `(x, y)`.
fn line(points: &[(f64, f64)]) -> (f64, f64) {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = points.iter().map(|p| (p.1 - my).powi(2)).sum();
    (sxy / sxx, sxy * sxy / (sxx * syy))
}

/// `(|offset|, ln mean_p)` over the inner half of a recentered average,
/// both sides folded together.
fn folded_log_profile(dist: &[f64]) -> Vec<(f64, f64)> {
    let len = dist.len();
    let origin = len / 2 - 1;
    (0..len)
        .filter_map(|k| {
            let offset = k as i64 - origin as i64;
            (offset != 0 && offset.unsigned_abs() as usize <= len / 4).then(|| (offset.abs() as f64, dist[k].ln()))
        })
        .collect()
}

#[test]
fn recentered_haar_average_is_exponentially_localized() {
    let len = 64;
    let mut spec = ExperimentSpec::new(Dynamics::QuantumHaar, vec![len], 600, 9);
    spec.q_grid = vec![2.0];
    spec.boundary = Boundary::Pbc;
    spec.recentered = true;
    let result = run(&spec, &RunOptions::default()).unwrap();
    let dist = result.sizes[0].recentered.as_ref().unwrap();
    assert!((dist.iter().sum::<f64>() - 1.0).abs() < 1e-10);
    let (slope, r2) = line(&folded_log_profile(dist));
    assert!(slope < 0.0 && r2 > 0.99, "slope {slope}, R^2 {r2}");
}

#[test]
fn reset_walk_profile_decays_exponentially() {
    let len = 128;
    let mut spec = ExperimentSpec::new(Dynamics::ResetWalk, vec![len], 10_000, 10);
    spec.q_grid = vec![2.0];
    spec.recentered = true;
    let result = run(&spec, &RunOptions::default()).unwrap();
    let dist = result.sizes[0].recentered.as_ref().unwrap();
    let (slope, r2) = line(&folded_log_profile(dist));
    let expected = -(2.0 / len as f64).sqrt();
    // the brick-wall layers pair sites, so the profile is a two-site staircase
    assert!(r2 > 0.95, "R^2 {r2}");
    assert!((slope / expected - 1.0).abs() < 0.15, "slope {slope} vs {expected}");
}

#[test]
fn stream_draws_differ_across_lengths() {
    let mut a = derive_stream(11, 64, 3);
    let mut b = derive_stream(11, 128, 3);
    let xs: Vec<f64> = (0..8).map(|_| a.random()).collect();
    let ys: Vec<f64> = (0..8).map(|_| b.random()).collect();
    assert_ne!(xs, ys);
}
