//! Protocol definitions and parallel, reproducible ensemble runs.

use std::time::Instant;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_xoshiro::Xoshiro256PlusPlus;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytic::{simulate_reset_walk, simulate_single_shot, ResetParams, ResetWalk};
use crate::cdyn::{evolve_classical_trajectory, ClassicalProtocol, ClassicalTrajectory, ProbabilityVector, StayRule};
use crate::error::{Error, Result};
use crate::lattice::{check_length, Boundary};
use crate::observables::{recenter, EnsembleStats};
use crate::qdyn::{evolve_quantum_trajectory, GateKind, MeasurementScheme, QuantumProtocol, QuantumTrajectory};
use crate::scaling::SizedCell;

/// Random stream owned by one trajectory.
pub type TrajectoryRng = Xoshiro256PlusPlus;

/// Trajectories per work unit. Fixed so that results do not depend on the
/// number of workers.
const CHUNK: u64 = 16;

const MAX_LENGTH: usize = 1 << 24;
const MAX_TRAJECTORIES: u64 = 1 << 40;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dynamics {
    QuantumHaar,
    QuantumFixed,
    ClassicalRandom,
    ClassicalFixed,
    ResetWalk,
    SingleShot,
}

impl Dynamics {
    pub fn name(&self) -> &'static str {
        match self {
            Dynamics::QuantumHaar => "quantum_haar",
            Dynamics::QuantumFixed => "quantum_fixed",
            Dynamics::ClassicalRandom => "classical_random",
            Dynamics::ClassicalFixed => "classical_fixed",
            Dynamics::ResetWalk => "reset_walk",
            Dynamics::SingleShot => "single_shot",
        }
    }

    pub fn is_quantum(&self) -> bool {
        matches!(self, Dynamics::QuantumHaar | Dynamics::QuantumFixed)
    }

    pub fn is_classical(&self) -> bool {
        matches!(self, Dynamics::ClassicalRandom | Dynamics::ClassicalFixed)
    }
}

/// Per-site measurement probability (or resetting rate for `reset_walk`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case", deny_unknown_fields)]
pub enum RateRule {
    /// `p = c / L`.
    PerSize { c: f64 },
    Absolute { p: f64 },
}

impl Default for RateRule {
    fn default() -> Self {
        RateRule::PerSize { c: 1.0 }
    }
}

impl RateRule {
    pub fn at(&self, len: usize) -> f64 {
        match *self {
            RateRule::PerSize { c } => c / len as f64,
            RateRule::Absolute { p } => p,
        }
    }
}

/// Number of time steps per trajectory, overriding [`default_steps`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case", deny_unknown_fields)]
pub enum StepRule {
    Fixed { steps: u64 },
    /// `ceil(factor * L)`.
    Linear { factor: f64 },
    /// `ceil(factor * L^2)`.
    Quadratic { factor: f64 },
}

impl StepRule {
    pub fn at(&self, len: usize) -> u64 {
        let l = len as f64;
        match *self {
            StepRule::Fixed { steps } => steps,
            StepRule::Linear { factor } => (factor * l).ceil() as u64,
            StepRule::Quadratic { factor } => (factor * l * l).ceil() as u64,
        }
    }
}

/// Steady-state time of a protocol at rate `p` and length `L`.
///
/// Projective protocols use `L^2` without measurements (`64 L` for fixed
/// gates) and `8 L` with them; generalized and no-click quantum protocols
/// use `L^2`. The resetting walk runs `16 L` steps, many mean resetting
/// intervals at `lambda = 1/L`; the single-shot model has no time evolution.
pub fn default_steps(dynamics: Dynamics, scheme: MeasurementScheme, p: f64, len: usize) -> u64 {
    let l = len as u64;
    match dynamics {
        Dynamics::SingleShot => 0,
        Dynamics::ResetWalk => 16 * l,
        Dynamics::QuantumHaar | Dynamics::QuantumFixed if scheme != MeasurementScheme::Projective => l * l,
        Dynamics::QuantumFixed if p == 0.0 => 64 * l,
        _ if p == 0.0 => l * l,
        _ => 8 * l,
    }
}

pub fn default_q_grid() -> Vec<f64> {
    std::iter::once(0.01)
        .chain((1..=16).map(|k| k as f64 * 0.25))
        .collect()
}

fn default_box_sizes() -> Vec<usize> {
    vec![1]
}

fn default_measured_sites() -> usize {
    1
}

fn is_default<T: Default + PartialEq>(v: &T) -> bool {
    *v == T::default()
}

/// Full description of an ensemble experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub dynamics: Dynamics,
    #[serde(default)]
    pub scheme: MeasurementScheme,
    pub lengths: Vec<usize>,
    #[serde(default)]
    pub rate: RateRule,
    #[serde(default = "default_q_grid")]
    pub q_grid: Vec<f64>,
    #[serde(default = "default_box_sizes")]
    pub l_box: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steps: Option<StepRule>,
    pub n_traj: u64,
    #[serde(default)]
    pub boundary: Boundary,
    #[serde(with = "seed_repr")]
    pub master_seed: u64,
    /// Sites measured by the single-shot model.
    #[serde(default = "default_measured_sites")]
    pub measured_sites: usize,
    /// Also average the recentered final distributions.
    #[serde(default, skip_serializing_if = "is_default")]
    pub recentered: bool,
}

impl ExperimentSpec {
    /// A spec with default grids, rate `1/L` and OBC.
    pub fn new(dynamics: Dynamics, lengths: Vec<usize>, n_traj: u64, master_seed: u64) -> Self {
        Self {
            dynamics,
            scheme: MeasurementScheme::Projective,
            lengths,
            rate: RateRule::default(),
            q_grid: default_q_grid(),
            l_box: default_box_sizes(),
            steps: None,
            n_traj,
            boundary: Boundary::Obc,
            master_seed,
            measured_sites: 1,
            recentered: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if self.lengths.is_empty() {
            return bad("no lattice lengths given".into());
        }
        for &len in &self.lengths {
            check_length(len)?;
            if len >= MAX_LENGTH {
                return bad(format!("lattice length {len} too large"));
            }
            if let Some(b) = self.l_box.iter().find(|&&b| b == 0 || len % b != 0) {
                return bad(format!("box size {b} does not divide L = {len}"));
            }
            let p = self.rate.at(len);
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("rate {p} at L = {len} outside [0, 1]"));
            }
            if self.dynamics == Dynamics::ResetWalk && p == 0.0 {
                return bad("resetting walk needs a positive rate".into());
            }
            if self.dynamics == Dynamics::SingleShot && self.measured_sites >= len {
                return bad(format!("cannot measure {} of {len} sites", self.measured_sites));
            }
        }
        if self.l_box.is_empty() {
            return bad("empty box size list".into());
        }
        if self.q_grid.is_empty() || self.q_grid.iter().any(|q| !(*q > 0.0) || !q.is_finite()) {
            return bad("q grid must be nonempty with q > 0".into());
        }
        if self.n_traj == 0 || self.n_traj >= MAX_TRAJECTORIES {
            return bad(format!("trajectory count {} out of range", self.n_traj));
        }
        if self.measured_sites == 0 {
            return bad("measured_sites must be at least 1".into());
        }
        if let RateRule::PerSize { c } = self.rate {
            if !(c >= 0.0) || !c.is_finite() {
                return bad(format!("rate constant must be nonnegative, got {c}"));
            }
        }
        self.scheme.validate()?;
        if (self.dynamics.is_classical() || self.dynamics == Dynamics::ResetWalk)
            && self.scheme != MeasurementScheme::Projective
        {
            return bad(format!(
                "{} supports perfect measurements only",
                self.dynamics.name()
            ));
        }
        if self.dynamics == Dynamics::ResetWalk && self.boundary != Boundary::Obc {
            return bad("resetting walk runs under OBC".into());
        }
        Ok(())
    }

    pub fn steps_at(&self, len: usize) -> u64 {
        match self.steps {
            Some(rule) => rule.at(len),
            None => default_steps(self.dynamics, self.scheme, self.rate.at(len), len),
        }
    }
}

/// Serializes seeds above `i64::MAX` as decimal strings, since common
/// config formats only carry signed 64-bit integers.
mod seed_repr {
    use serde::de::{self, Visitor};
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(seed: &u64, s: S) -> Result<S::Ok, S::Error> {
        match i64::try_from(*seed) {
            Ok(v) => s.serialize_i64(v),
            Err(_) => s.serialize_str(&seed.to_string()),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<u64, D::Error> {
        struct Seed;
        impl Visitor<'_> for Seed {
            type Value = u64;
            fn expecting(&self, f: &mut std::fmt::Formatter) -> std::fmt::Result {
                f.write_str("a nonnegative 64-bit integer or its decimal string")
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> Result<u64, E> {
                Ok(v)
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> Result<u64, E> {
                u64::try_from(v).map_err(|_| E::custom("seed must be nonnegative"))
            }
            fn visit_str<E: de::Error>(self, v: &str) -> Result<u64, E> {
                v.parse().map_err(E::custom)
            }
        }
        d.deserialize_any(Seed)
    }
}

/// Independent stream for trajectory `index` at length `len`. A ChaCha8
/// generator keyed by the master seed, on the stream id `(len, index)`,
/// supplies the 256-bit state of a Xoshiro256++ generator that serves the
/// trajectory's bulk draws.
pub fn derive_stream(master_seed: u64, len: usize, index: u64) -> TrajectoryRng {
    let mut keyed = ChaCha8Rng::seed_from_u64(master_seed);
    keyed.set_stream(((len as u64) << 40) | (index & (MAX_TRAJECTORIES - 1)));
    let mut state = [0u8; 32];
    keyed.fill_bytes(&mut state);
    Xoshiro256PlusPlus::from_seed(state)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RunOptions {
    /// Worker threads; `None` uses the global pool.
    pub workers: Option<usize>,
}

/// Ensemble results at one lattice length.
#[derive(Debug, Clone, PartialEq)]
pub struct SizeResult {
    pub length: usize,
    pub rate: f64,
    pub steps: u64,
    pub stats: EnsembleStats,
    /// Trajectory-averaged recentered distribution, offsets `-L/2+1 ..= L/2`.
    pub recentered: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub spec: ExperimentSpec,
    pub sizes: Vec<SizeResult>,
    pub wall_time_secs: f64,
}

impl RunResult {
    /// Every `(L, q, l_box)` cell, in spec order.
    pub fn cells(&self) -> Vec<SizedCell> {
        self.sizes
            .iter()
            .flat_map(|s| {
                s.stats
                    .summaries()
                    .into_iter()
                    .map(move |cell| SizedCell { length: s.length, cell })
            })
            .collect()
    }

    pub fn size(&self, len: usize) -> Option<&SizeResult> {
        self.sizes.iter().find(|s| s.length == len)
    }
}

/// Final distribution of trajectory `index` at length `len`.
pub fn run_trajectory(spec: &ExperimentSpec, len: usize, index: u64) -> Result<ProbabilityVector> {
    let mut rng = derive_stream(spec.master_seed, len, index);
    let p = spec.rate.at(len);
    let steps = spec.steps_at(len);
    let out = match spec.dynamics {
        Dynamics::QuantumHaar | Dynamics::QuantumFixed => {
            evolve_quantum_trajectory(quantum_protocol(spec, len), steps, &mut rng).map(|s| s.probabilities())
        }
        Dynamics::ClassicalRandom | Dynamics::ClassicalFixed => {
            evolve_classical_trajectory(classical_protocol(spec, len), steps, &mut rng)
        }
        Dynamics::ResetWalk => simulate_reset_walk(ResetParams { len, rate: p, steps }, &mut rng),
        Dynamics::SingleShot => simulate_single_shot(len, spec.measured_sites, spec.scheme, &mut rng),
    };
    out.map_err(|e| Error::Trajectory {
        length: len,
        index,
        source: Box::new(e),
    })
}

fn quantum_protocol(spec: &ExperimentSpec, len: usize) -> QuantumProtocol {
    QuantumProtocol {
        len,
        boundary: spec.boundary,
        gates: if spec.dynamics == Dynamics::QuantumFixed {
            GateKind::Fixed
        } else {
            GateKind::Haar
        },
        scheme: spec.scheme,
        rate: spec.rate.at(len),
    }
}

fn classical_protocol(spec: &ExperimentSpec, len: usize) -> ClassicalProtocol {
    ClassicalProtocol {
        len,
        boundary: spec.boundary,
        stays: if spec.dynamics == Dynamics::ClassicalFixed {
            StayRule::Fixed(0.5)
        } else {
            StayRule::Random
        },
        rate: spec.rate.at(len),
    }
}

fn with_pool<T: Send>(options: &RunOptions, job: impl FnOnce() -> T + Send) -> Result<T> {
    match options.workers {
        None => Ok(job()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .map_err(|e| Error::InvalidParameter(format!("cannot start worker pool: {e}")))?;
            Ok(pool.install(job))
        }
    }
}

fn chunks(n_traj: u64) -> Vec<(u64, u64)> {
    (0..n_traj.div_ceil(CHUNK))
        .map(|c| (c * CHUNK, ((c + 1) * CHUNK).min(n_traj)))
        .collect()
}

struct Partial {
    stats: EnsembleStats,
    recentered: Option<Vec<f64>>,
}

/// Runs every trajectory of the spec. Results are bitwise identical for a
/// fixed master seed regardless of the worker count.
pub fn run(spec: &ExperimentSpec, options: &RunOptions) -> Result<RunResult> {
    spec.validate()?;
    let started = Instant::now();
    let mut sizes = Vec::with_capacity(spec.lengths.len());
    for &len in &spec.lengths {
        let partials: Vec<Result<Partial>> = with_pool(options, || {
            chunks(spec.n_traj)
                .into_par_iter()
                .map(|(lo, hi)| {
                    let mut stats = EnsembleStats::new(&spec.q_grid, &spec.l_box)?;
                    let mut recentered = spec.recentered.then(|| vec![0.0; len]);
                    for index in lo..hi {
                        let dist = run_trajectory(spec, len, index)?;
                        stats.accumulate(&dist)?;
                        if let Some(sum) = recentered.as_mut() {
                            for (s, p) in sum.iter_mut().zip(recenter(&dist).values()) {
                                *s += p;
                            }
                        }
                    }
                    Ok(Partial { stats, recentered })
                })
                .collect()
        })?;
        let mut stats = EnsembleStats::new(&spec.q_grid, &spec.l_box)?;
        let mut recentered = spec.recentered.then(|| vec![0.0; len]);
        for part in partials {
            let part = part?;
            stats.merge(&part.stats)?;
            if let (Some(total), Some(sum)) = (recentered.as_mut(), part.recentered) {
                total.iter_mut().zip(sum).for_each(|(t, s)| *t += s);
            }
        }
        if let Some(total) = recentered.as_mut() {
            let n = spec.n_traj as f64;
            total.iter_mut().for_each(|t| *t /= n);
        }
        sizes.push(SizeResult {
            length: len,
            rate: spec.rate.at(len),
            steps: spec.steps_at(len),
            stats,
            recentered,
        });
    }
    Ok(RunResult {
        spec: spec.clone(),
        sizes,
        wall_time_secs: started.elapsed().as_secs_f64(),
    })
}

/// Roughly `points` logarithmically spaced integer times in `1..=max_t`.
pub fn log_spaced_times(max_t: u64, points: usize) -> Vec<u64> {
    if max_t == 0 || points == 0 {
        return Vec::new();
    }
    let top = (max_t as f64).ln();
    let mut times: Vec<u64> = (0..points)
        .map(|k| {
            let frac = if points == 1 { 1.0 } else { k as f64 / (points - 1) as f64 };
            ((frac * top).exp().round() as u64).clamp(1, max_t)
        })
        .collect();
    times.dedup();
    times
}

/// Ensemble statistics recorded along the time evolution at one length.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    pub length: usize,
    pub times: Vec<u64>,
    pub stats: Vec<EnsembleStats>,
}

enum Stepper {
    Quantum(Box<QuantumTrajectory>),
    Classical(Box<ClassicalTrajectory>),
    Reset(Box<ResetWalk>),
}

impl Stepper {
    fn new(spec: &ExperimentSpec, len: usize, rng: &mut TrajectoryRng) -> Result<Self> {
        Ok(match spec.dynamics {
            Dynamics::QuantumHaar | Dynamics::QuantumFixed => {
                Stepper::Quantum(Box::new(QuantumTrajectory::new(quantum_protocol(spec, len))?))
            }
            Dynamics::ClassicalRandom | Dynamics::ClassicalFixed => {
                Stepper::Classical(Box::new(ClassicalTrajectory::new(classical_protocol(spec, len))?))
            }
            Dynamics::ResetWalk => {
                let params = ResetParams {
                    len,
                    rate: spec.rate.at(len),
                    steps: spec.steps_at(len),
                };
                Stepper::Reset(Box::new(ResetWalk::new(params, rng)?))
            }
            Dynamics::SingleShot => {
                return Err(Error::InvalidParameter(
                    "the single-shot model has no time evolution".into(),
                ))
            }
        })
    }

    fn step(&mut self, rng: &mut TrajectoryRng) -> Result<()> {
        match self {
            Stepper::Quantum(q) => q.step(rng),
            Stepper::Classical(c) => c.step(rng),
            Stepper::Reset(r) => {
                r.step(rng);
                Ok(())
            }
        }
    }

    fn distribution(&self) -> ProbabilityVector {
        match self {
            Stepper::Quantum(q) => q.state().probabilities(),
            Stepper::Classical(c) => c.distribution().clone(),
            Stepper::Reset(r) => r.distribution().clone(),
        }
    }
}

/// Runs the spec's trajectories up to the largest of `times` (ascending)
/// and records ensemble statistics at each of them.
pub fn run_time_series(spec: &ExperimentSpec, times: &[u64], options: &RunOptions) -> Result<Vec<TimeSeries>> {
    spec.validate()?;
    if times.windows(2).any(|w| w[0] >= w[1]) || times.first() == Some(&0) {
        return Err(Error::InvalidParameter("record times must be positive and increasing".into()));
    }
    let mut out = Vec::with_capacity(spec.lengths.len());
    for &len in &spec.lengths {
        let fresh = || -> Result<Vec<EnsembleStats>> {
            times.iter().map(|_| EnsembleStats::new(&spec.q_grid, &spec.l_box)).collect()
        };
        let partials: Vec<Result<Vec<EnsembleStats>>> = with_pool(options, || {
            chunks(spec.n_traj)
                .into_par_iter()
                .map(|(lo, hi)| {
                    let mut stats = fresh()?;
                    for index in lo..hi {
                        let wrap = |e| Error::Trajectory {
                            length: len,
                            index,
                            source: Box::new(e),
                        };
                        let mut rng = derive_stream(spec.master_seed, len, index);
                        let mut stepper = Stepper::new(spec, len, &mut rng).map_err(wrap)?;
                        let mut t = 0;
                        for (slot, &target) in stats.iter_mut().zip(times) {
                            while t < target {
                                stepper.step(&mut rng).map_err(wrap)?;
                                t += 1;
                            }
                            slot.accumulate(&stepper.distribution())?;
                        }
                    }
                    Ok(stats)
                })
                .collect()
        })?;
        let mut stats = fresh()?;
        for part in partials {
            for (total, p) in stats.iter_mut().zip(part?) {
                total.merge(&p)?;
            }
        }
        out.push(TimeSeries {
            length: len,
            times: times.to_vec(),
            stats,
        });
    }
    Ok(out)
}
