//! Closed-form reference models: single-shot measurement of a uniformly
//! spread particle, and a lattice random walk under Poissonian resetting.

use std::f64::consts::PI;

use rand::Rng;

use crate::cdyn::{ProbabilityVector, TransitionMatrix};
use crate::error::{Error, Result};
use crate::lattice::{check_length, Boundary, CircuitSchedule, Support};
use crate::qdyn::{apply_measurement, outcome_probabilities, Amplitudes, MeasurementScheme};

pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

fn check_single_shot(len: usize, q: f64, measured: usize) -> Result<()> {
    check_length(len)?;
    if !(q > 0.0) {
        return Err(Error::InvalidParameter(format!("q must be positive, got {q}")));
    }
    if measured == 0 || measured >= len {
        return Err(Error::InvalidParameter(format!(
            "measured sites must satisfy 1 <= r < L, got r = {measured}, L = {len}"
        )));
    }
    Ok(())
}

/// Mean IPR after projectively measuring `measured` sites of the uniform
/// state: `(r + (L - r)^(2 - q)) / L`.
pub fn single_shot_mean_ipr(len: usize, q: f64, measured: usize) -> Result<f64> {
    check_single_shot(len, q, measured)?;
    let (l, r) = (len as f64, measured as f64);
    Ok((r + (l - r).powf(2.0 - q)) / l)
}

/// `<ln IPR>` of the same ensemble: `((L - r)/L)(1 - q) ln(L - r)`.
pub fn single_shot_typical_ln_ipr(len: usize, q: f64, measured: usize) -> Result<f64> {
    check_single_shot(len, q, measured)?;
    let (l, r) = (len as f64, measured as f64);
    Ok((l - r) / l * (1.0 - q) * (l - r).ln())
}

/// Large-`L` exponents `(tau_q, tau*_q)` of the single-shot model.
pub fn single_shot_exponents(q: f64) -> Result<(f64, f64)> {
    if !(q > 0.0) {
        return Err(Error::InvalidParameter(format!("q must be positive, got {q}")));
    }
    let tau = if q < 2.0 { q - 1.0 } else { 1.0 };
    Ok((tau, q - 1.0))
}

/// IPR of the uniform state after a generalized measurement reports a
/// detection.
pub fn generalized_single_shot_ipr(len: usize, q: f64, error_rate: f64) -> Result<f64> {
    check_length(len)?;
    if !(q > 0.0) {
        return Err(Error::InvalidParameter(format!("q must be positive, got {q}")));
    }
    if !(error_rate > 0.0 && error_rate <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "error rate must lie in (0, 1], got {error_rate}"
        )));
    }
    let (l, e) = (len as f64, error_rate);
    Ok(((2.0 - e).powf(q) + (l - 1.0) * e.powf(q)) / ((l - 1.0) * e + 2.0 - e).powf(q))
}

/// One trajectory of the single-shot model: the uniform state measured at
/// `measured` distinct random sites with Born-rule outcomes.
pub fn simulate_single_shot<R: Rng + ?Sized>(
    len: usize,
    measured: usize,
    scheme: MeasurementScheme,
    rng: &mut R,
) -> Result<ProbabilityVector> {
    check_single_shot(len, 1.0, measured)?;
    let mut state = Amplitudes::uniform(len)?;
    let mut chosen = Vec::with_capacity(measured);
    while chosen.len() < measured {
        let site = rng.random_range(0..len);
        if !chosen.contains(&site) {
            chosen.push(site);
        }
    }
    for site in chosen {
        let outcome = match scheme {
            MeasurementScheme::NoClick => 0,
            _ => {
                let (_, p1) = outcome_probabilities(&state, site, scheme)?;
                u8::from(rng.random::<f64>() < p1)
            }
        };
        apply_measurement(&mut state, site, outcome, scheme)?;
    }
    Ok(state.probabilities())
}

/// Lanczos approximation (g = 7, 9 terms) with reflection below 1/2.
pub fn gamma(x: f64) -> f64 {
    const G: f64 = 7.0;
    const COEFFS: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        return PI / ((PI * x).sin() * gamma(1.0 - x));
    }
    let x = x - 1.0;
    let mut acc = COEFFS[0];
    for (i, &c) in COEFFS.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + G + 0.5;
    (2.0 * PI).sqrt() * t.powf(x + 0.5) * (-t).exp() * acc
}

/// Parameters of the resetting walk.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResetParams {
    pub len: usize,
    /// Resetting rate per step.
    pub rate: f64,
    pub steps: u64,
}

impl ResetParams {
    pub fn validate(&self) -> Result<()> {
        check_length(self.len)?;
        if !(self.rate > 0.0 && self.rate <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "resetting rate must lie in (0, 1], got {}",
                self.rate
            )));
        }
        Ok(())
    }
}

/// `round(-ln(eta) / rate)`, at least one step.
pub fn waiting_time_from_uniform(rate: f64, eta: f64) -> u64 {
    let tau = (-eta.ln() / rate).round();
    if tau < 1.0 {
        1
    } else {
        tau as u64
    }
}

/// Draws the interval between resetting events.
pub fn reset_waiting_time<R: Rng + ?Sized>(rate: f64, rng: &mut R) -> u64 {
    let eta = 1.0 - rng.random::<f64>();
    waiting_time_from_uniform(rate, eta)
}

/// Stepwise resetting walk: the `s = 1/2` brick-wall circuit under OBC
/// acting on a distribution that collapses to site `L/2` at each resetting
/// epoch.
#[derive(Debug, Clone)]
pub struct ResetWalk {
    params: ResetParams,
    schedule: CircuitSchedule,
    dist: ProbabilityVector,
    support: Support,
    next_reset: u64,
    t: u64,
}

impl ResetWalk {
    pub fn new<R: Rng + ?Sized>(params: ResetParams, rng: &mut R) -> Result<Self> {
        params.validate()?;
        let origin = params.len / 2 - 1;
        Ok(Self {
            params,
            schedule: CircuitSchedule::new(params.len, Boundary::Obc)?,
            dist: ProbabilityVector::localized(params.len, origin)?,
            support: Support::point(origin),
            next_reset: reset_waiting_time(params.rate, rng),
            t: 0,
        })
    }

    pub fn time(&self) -> u64 {
        self.t
    }

    pub fn distribution(&self) -> &ProbabilityVector {
        &self.dist
    }

    pub fn step<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        self.t += 1;
        if self.t == self.next_reset {
            self.reset();
            self.next_reset += reset_waiting_time(self.params.rate, rng);
        } else {
            self.layer(self.t);
        }
    }

    fn reset(&mut self) {
        let origin = self.params.len / 2 - 1;
        self.dist = ProbabilityVector::localized(self.params.len, origin).expect("valid length");
        self.support = Support::point(origin);
    }

    fn layer(&mut self, t: u64) {
        let half = TransitionMatrix::new(0.5).expect("valid stay");
        let (bonds, next) = self.support.layer_bonds(&self.schedule, t);
        let values = self.distribution_mut();
        for j in bonds {
            let (a, b) = (j, j + 1);
            let (x, y) = half.apply(values[a], values[b]);
            values[a] = x;
            values[b] = y;
        }
        self.support = next;
    }

    fn distribution_mut(&mut self) -> &mut [f64] {
        crate::cdyn::values_mut(&mut self.dist)
    }
}

/// Distribution of the resetting walk at step `params.steps`.
///
/// Only the evolution after the last epoch survives a reset, so the epochs
/// are drawn first and the circuit is run from the last one. The result is
/// identical to stepping [`ResetWalk`] with the same random stream.
pub fn simulate_reset_walk<R: Rng + ?Sized>(params: ResetParams, rng: &mut R) -> Result<ProbabilityVector> {
    let mut walk = ResetWalk::new(params, rng)?;
    let mut last = 0;
    while walk.next_reset <= params.steps {
        last = walk.next_reset;
        walk.next_reset += reset_waiting_time(params.rate, rng);
    }
    walk.t = last;
    if last > 0 {
        walk.reset();
    }
    while walk.t < params.steps {
        walk.t += 1;
        walk.layer(walk.t);
    }
    Ok(walk.dist)
}

/// Continuum resetting walk with rate `1/L` and Gaussian propagator of
/// variance `t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResettingClosedForms {
    pub scale: f64,
    pub q: f64,
    /// `None` where the time integral diverges (`q >= 3`).
    pub mean_ipr: Option<f64>,
    pub typical_ipr: f64,
    pub tau_q: Option<f64>,
    pub tau_star_q: f64,
    pub variance: f64,
}

impl ResettingClosedForms {
    pub fn new(scale: f64, q: f64) -> Result<Self> {
        if !(scale > 0.0) || !(q > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "need L > 0 and q > 0, got L = {scale}, q = {q}"
            )));
        }
        let mean_ipr = resetting_mean_ipr(scale, q).ok();
        Ok(Self {
            scale,
            q,
            mean_ipr,
            typical_ipr: resetting_typical_ipr(scale, q)?,
            tau_q: mean_ipr.map(|_| (q - 1.0) / 2.0),
            tau_star_q: (q - 1.0) / 2.0,
            variance: scale,
        })
    }

    pub fn stationary_density(&self, x: f64) -> f64 {
        resetting_stationary_density(self.scale, x)
    }
}

/// `(1/sqrt(2L)) exp(-sqrt(2/L) |x|)`.
pub fn resetting_stationary_density(scale: f64, x: f64) -> f64 {
    (2.0 * scale).sqrt().recip() * (-(2.0 / scale).sqrt() * x.abs()).exp()
}

/// `sqrt((1/q)(2 pi L)^(1 - q)) Gamma((3 - q)/2)` for `q < 3`: the Gaussian
/// IPR `sqrt((2 pi t)^(1 - q) / q)` averaged over exponential waiting times
/// with rate `1/L`.
pub fn resetting_mean_ipr(scale: f64, q: f64) -> Result<f64> {
    if q >= 3.0 {
        return Err(Error::DivergentIntegral(q));
    }
    if !(q > 0.0) {
        return Err(Error::InvalidParameter(format!("q must be positive, got {q}")));
    }
    if q == 1.0 {
        // every normalized distribution has unit IPR at q = 1
        return Ok(1.0);
    }
    Ok((q.recip() * (2.0 * PI * scale).powf(1.0 - q)).sqrt() * gamma((3.0 - q) / 2.0))
}

/// `exp(gamma_E (q - 1)/2) / sqrt(q (2 pi L)^(q - 1))`.
pub fn resetting_typical_ipr(scale: f64, q: f64) -> Result<f64> {
    if !(q > 0.0) {
        return Err(Error::InvalidParameter(format!("q must be positive, got {q}")));
    }
    Ok((EULER_GAMMA * (q - 1.0) / 2.0).exp() / (q * (2.0 * PI * scale).powf(q - 1.0)).sqrt())
}
