//! Single-particle quantum circuits: two-site unitary layers in brick-wall
//! order and stochastic occupation measurements.

use std::collections::BTreeMap;
use std::f64::consts::FRAC_1_SQRT_2;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::cdyn::ProbabilityVector;
use crate::error::{Error, Result};
use crate::lattice::{check_length, Boundary, CircuitSchedule, SiteSelector, Support};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Amplitudes `c_i` of a single-particle state on an even lattice, unit norm.
#[derive(Debug, Clone, PartialEq)]
pub struct Amplitudes(Vec<Complex64>);

impl Amplitudes {
    pub fn localized(len: usize, site: usize) -> Result<Self> {
        check_length(len)?;
        if site >= len {
            return Err(Error::SiteOutOfRange { site, len });
        }
        let mut values = vec![ZERO; len];
        values[site] = Complex64::new(1.0, 0.0);
        Ok(Self(values))
    }

    pub fn uniform(len: usize) -> Result<Self> {
        check_length(len)?;
        let a = (len as f64).recip().sqrt();
        Ok(Self(vec![Complex64::new(a, 0.0); len]))
    }

    /// Normalizes `values`; rejects the empty and the zero vector. Any
    /// length is accepted for single-site operations; circuits require an
    /// even one.
    pub fn from_vec(values: Vec<Complex64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidLength(0));
        }
        let mut state = Self(values);
        let norm = state.norm_sqr();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::InvalidParameter(
                "amplitudes must have a finite nonzero norm".into(),
            ));
        }
        state.scale(norm.sqrt().recip());
        Ok(state)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn values(&self) -> &[Complex64] {
        &self.0
    }

    pub fn norm_sqr(&self) -> f64 {
        self.0.iter().map(|c| c.norm_sqr()).sum()
    }

    /// Born probabilities `|c_i|^2`, rescaled to sum to 1 against rounding.
    pub fn probabilities(&self) -> ProbabilityVector {
        let mut probs: Vec<f64> = self.0.iter().map(|c| c.norm_sqr()).collect();
        let total: f64 = probs.iter().sum();
        probs.iter_mut().for_each(|p| *p /= total);
        ProbabilityVector::from_normalized(probs)
    }

    fn scale(&mut self, factor: f64) {
        for c in &mut self.0 {
            *c *= factor;
        }
    }

    fn renormalize_within(&mut self, support: Support) {
        let slice = &mut self.0[support.lo..=support.hi];
        let norm: f64 = slice.iter().map(|c| c.norm_sqr()).sum();
        let factor = norm.sqrt().recip();
        for c in slice {
            *c *= factor;
        }
    }

    fn collapse_to(&mut self, site: usize, support: Support) {
        let c = self.0[site];
        let phase = c / c.norm();
        self.0[support.lo..=support.hi].fill(ZERO);
        self.0[site] = phase;
    }
}

/// A 2x2 unitary acting on the column `(c_j, c_{j+1})`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoSiteUnitary([[Complex64; 2]; 2]);

impl TwoSiteUnitary {
    pub fn identity() -> Self {
        let one = Complex64::new(1.0, 0.0);
        Self([[one, ZERO], [ZERO, one]])
    }

    /// Rejects matrices that are not unitary to `1e-10`.
    pub fn from_rows(rows: [[Complex64; 2]; 2]) -> Result<Self> {
        let u = Self(rows);
        if u.unitarity_defect() > 1e-10 {
            return Err(Error::InvalidParameter("gate is not unitary".into()));
        }
        Ok(u)
    }

    pub fn entries(&self) -> &[[Complex64; 2]; 2] {
        &self.0
    }

    pub fn adjoint(&self) -> Self {
        let m = &self.0;
        Self([
            [m[0][0].conj(), m[1][0].conj()],
            [m[0][1].conj(), m[1][1].conj()],
        ])
    }

    pub fn mul(&self, rhs: &Self) -> Self {
        let (a, b) = (&self.0, &rhs.0);
        let mut out = [[ZERO; 2]; 2];
        for (i, row) in out.iter_mut().enumerate() {
            for (k, cell) in row.iter_mut().enumerate() {
                *cell = a[i][0] * b[0][k] + a[i][1] * b[1][k];
            }
        }
        Self(out)
    }

    /// Largest entrywise deviation of `U^dagger U` from the identity.
    pub fn unitarity_defect(&self) -> f64 {
        let p = self.adjoint().mul(self);
        let id = Self::identity();
        let mut worst = 0.0f64;
        for i in 0..2 {
            for k in 0..2 {
                worst = worst.max((p.0[i][k] - id.0[i][k]).norm());
            }
        }
        worst
    }

    #[inline]
    pub fn apply(&self, a: Complex64, b: Complex64) -> (Complex64, Complex64) {
        let m = &self.0;
        (m[0][0] * a + m[0][1] * b, m[1][0] * a + m[1][1] * b)
    }
}

/// Haar-random element of U(2): QR of a complex Ginibre matrix with the
/// phases fixed so that `R` has a positive real diagonal.
pub fn sample_haar_unitary<R: Rng + ?Sized>(rng: &mut R) -> TwoSiteUnitary {
    let mut gauss = || -> Complex64 {
        Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    };
    let (z00, z10, z01, z11) = (gauss(), gauss(), gauss(), gauss());
    // Gram-Schmidt on the columns yields R with a positive real diagonal.
    let inv00 = (z00.norm_sqr() + z10.norm_sqr()).sqrt().recip();
    let (q00, q10) = (z00 * inv00, z10 * inv00);
    let r01 = q00.conj() * z01 + q10.conj() * z11;
    let (v0, v1) = (z01 - q00 * r01, z11 - q10 * r01);
    let inv11 = (v0.norm_sqr() + v1.norm_sqr()).sqrt().recip();
    TwoSiteUnitary([[q00, v0 * inv11], [q10, v1 * inv11]])
}

/// The deterministic gate `(1/sqrt 2) [[1, 1], [-1, 1]]`.
pub fn fixed_gate() -> TwoSiteUnitary {
    let h = Complex64::new(FRAC_1_SQRT_2, 0.0);
    TwoSiteUnitary([[h, h], [-h, h]])
}

/// Applies one gate per active bond of layer `t`. `gates` must be keyed by
/// exactly the active bonds.
pub fn apply_unitary_layer(
    state: &mut Amplitudes,
    gates: &BTreeMap<usize, TwoSiteUnitary>,
    t: u64,
    schedule: &CircuitSchedule,
) -> Result<()> {
    if state.len() != schedule.len() {
        return Err(Error::LengthMismatch {
            expected: schedule.len(),
            got: state.len(),
        });
    }
    if !gates.keys().copied().eq(schedule.bonds(t)) {
        return Err(Error::BondMismatch { t });
    }
    for (&j, gate) in gates {
        apply_gate(&mut state.0, schedule, j, gate);
    }
    state.renormalize_within(Support::full(state.len()));
    Ok(())
}

#[inline]
fn apply_gate(values: &mut [Complex64], schedule: &CircuitSchedule, j: usize, gate: &TwoSiteUnitary) {
    let (a, b) = schedule.pair(j);
    let (x, y) = gate.apply(values[a], values[b]);
    values[a] = x;
    values[b] = y;
}

/// Occupation measurement model at a single site.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(try_from = "SchemeRepr", into = "SchemeRepr")]
pub enum MeasurementScheme {
    /// `M_0 = I - |i><i|`, `M_1 = |i><i|`.
    #[default]
    Projective,
    /// Projective measurement whose outcome is wrong with rate `e/2`.
    Generalized { error_rate: f64 },
    /// Postselection on never detecting the particle.
    NoClick,
}

/// Flat serialized form; rejects an error rate on schemes without one,
/// which an internally tagged enum would silently accept.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SchemeRepr {
    kind: SchemeKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    error_rate: Option<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum SchemeKind {
    Projective,
    Generalized,
    NoClick,
}

impl TryFrom<SchemeRepr> for MeasurementScheme {
    type Error = String;

    fn try_from(repr: SchemeRepr) -> std::result::Result<Self, String> {
        match (repr.kind, repr.error_rate) {
            (SchemeKind::Projective, None) => Ok(MeasurementScheme::Projective),
            (SchemeKind::NoClick, None) => Ok(MeasurementScheme::NoClick),
            (SchemeKind::Generalized, Some(error_rate)) => Ok(MeasurementScheme::Generalized { error_rate }),
            (SchemeKind::Generalized, None) => Err("generalized scheme needs an error_rate".into()),
            (_, Some(_)) => Err("error_rate applies to the generalized scheme only".into()),
        }
    }
}

impl From<MeasurementScheme> for SchemeRepr {
    fn from(scheme: MeasurementScheme) -> Self {
        match scheme {
            MeasurementScheme::Projective => SchemeRepr {
                kind: SchemeKind::Projective,
                error_rate: None,
            },
            MeasurementScheme::Generalized { error_rate } => SchemeRepr {
                kind: SchemeKind::Generalized,
                error_rate: Some(error_rate),
            },
            MeasurementScheme::NoClick => SchemeRepr {
                kind: SchemeKind::NoClick,
                error_rate: None,
            },
        }
    }
}

impl MeasurementScheme {
    pub fn validate(&self) -> Result<()> {
        match *self {
            MeasurementScheme::Generalized { error_rate } if !(0.0..=1.0).contains(&error_rate) => {
                Err(Error::InvalidParameter(format!(
                    "error rate must lie in [0, 1], got {error_rate}"
                )))
            }
            _ => Ok(()),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            MeasurementScheme::Projective => "projective",
            MeasurementScheme::Generalized { .. } => "generalized",
            MeasurementScheme::NoClick => "no_click",
        }
    }

    /// Diagonal Kraus weights `(off-site, on-site)` of outcome `outcome`.
    fn kraus(&self, outcome: u8) -> Result<(f64, f64)> {
        let e = match *self {
            MeasurementScheme::Projective => 0.0,
            MeasurementScheme::Generalized { error_rate } => error_rate,
            MeasurementScheme::NoClick => {
                return if outcome == 0 {
                    Ok((1.0, 0.0))
                } else {
                    Err(Error::NoStochasticOutcome)
                };
            }
        };
        let small = (e / 2.0).sqrt();
        let large = (1.0 - e / 2.0).sqrt();
        Ok(if outcome == 0 { (large, small) } else { (small, large) })
    }
}

fn check_site(state: &Amplitudes, site: usize) -> Result<()> {
    if site >= state.len() {
        return Err(Error::SiteOutOfRange {
            site,
            len: state.len(),
        });
    }
    Ok(())
}

/// Born probabilities `(P0, P1)` of measuring the occupation of `site`.
pub fn outcome_probabilities(
    state: &Amplitudes,
    site: usize,
    scheme: MeasurementScheme,
) -> Result<(f64, f64)> {
    check_site(state, site)?;
    scheme.validate()?;
    let occ = state.0[site].norm_sqr();
    let p1 = match scheme {
        MeasurementScheme::Projective => occ,
        MeasurementScheme::Generalized { error_rate } => {
            error_rate / 2.0 + (1.0 - error_rate) * occ
        }
        MeasurementScheme::NoClick => return Err(Error::NoStochasticOutcome),
    };
    let p1 = p1.clamp(0.0, 1.0);
    Ok((1.0 - p1, p1))
}

/// Replaces the state by `M_outcome |psi> / ||M_outcome |psi>||`.
pub fn apply_measurement(
    state: &mut Amplitudes,
    site: usize,
    outcome: u8,
    scheme: MeasurementScheme,
) -> Result<()> {
    check_site(state, site)?;
    scheme.validate()?;
    if outcome > 1 {
        return Err(Error::InvalidParameter(format!("outcome must be 0 or 1, got {outcome}")));
    }
    let support = Support::full(state.len());
    kraus_update(state, site, outcome, scheme, support)
}

fn kraus_update(
    state: &mut Amplitudes,
    site: usize,
    outcome: u8,
    scheme: MeasurementScheme,
    support: Support,
) -> Result<()> {
    let (off, on) = scheme.kraus(outcome)?;
    let occ = state.0[site].norm_sqr();
    let rest: f64 = state.0[support.lo..=support.hi]
        .iter()
        .map(|c| c.norm_sqr())
        .sum::<f64>()
        - occ;
    let rest = rest.max(0.0);
    let weight = off * off * rest + on * on * occ;
    let impossible = match outcome {
        // exact projector onto the site: only the on-site amplitude survives
        1 if off == 0.0 => occ == 0.0,
        // no-detection with zero error: only the off-site amplitudes survive
        0 if on == 0.0 => state.0[support.lo..=support.hi]
            .iter()
            .enumerate()
            .all(|(k, c)| k + support.lo == site || *c == ZERO),
        _ => !(weight > 0.0),
    };
    if impossible {
        return Err(match scheme {
            MeasurementScheme::NoClick => Error::PostselectionImpossible(site),
            _ => Error::ImpossibleOutcome { site, outcome },
        });
    }
    if off == 0.0 {
        state.collapse_to(site, support);
        return Ok(());
    }
    let off_factor = off / weight.sqrt();
    for c in &mut state.0[support.lo..=support.hi] {
        *c *= off_factor;
    }
    if on == 0.0 {
        state.0[site] = ZERO;
    } else {
        state.0[site] *= on / off;
    }
    // absorb rounding in the closed-form weight
    state.renormalize_within(support);
    Ok(())
}

/// Draws an outcome from the Born rule and applies it.
fn measure_site<R: Rng + ?Sized>(
    state: &mut Amplitudes,
    site: usize,
    scheme: MeasurementScheme,
    support: &mut Support,
    rng: &mut R,
) -> Result<u8> {
    let outcome = match scheme {
        MeasurementScheme::NoClick => 0,
        _ => {
            let (_, p1) = outcome_probabilities(state, site, scheme)?;
            u8::from(rng.random::<f64>() < p1)
        }
    };
    kraus_update(state, site, outcome, scheme, *support)?;
    // a click with a vanishing off-site weight leaves a point mass
    if outcome == 1 && scheme.kraus(1)?.0 == 0.0 {
        *support = Support::point(site);
    }
    Ok(outcome)
}

/// Scans sites in ascending order, measuring each independently with
/// probability `p`. Returns the `(site, outcome)` record; no-click
/// measurements are recorded with outcome 0.
pub fn measurement_layer<R: Rng + ?Sized>(
    state: &mut Amplitudes,
    p: f64,
    scheme: MeasurementScheme,
    rng: &mut R,
) -> Result<Vec<(usize, u8)>> {
    scheme.validate()?;
    let selector = SiteSelector::new(p)?;
    let mut support = Support::full(state.len());
    let mut record = Vec::new();
    selector.for_each(state.len(), rng, |site, rng| {
        let outcome = measure_site(state, site, scheme, &mut support, rng)?;
        record.push((site, outcome));
        Ok::<_, Error>(())
    })?;
    Ok(record)
}

/// Gate family of a quantum circuit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GateKind {
    /// Independent Haar gates on every bond and layer.
    Haar,
    /// The fixed gate on every bond.
    Fixed,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuantumProtocol {
    pub len: usize,
    pub boundary: Boundary,
    pub gates: GateKind,
    pub scheme: MeasurementScheme,
    /// Per-site measurement probability per layer.
    pub rate: f64,
}

/// A monitored trajectory started from the particle at site `L/2`
/// (0-based `L/2 - 1`).
///
/// Bonds whose two sites both carry exactly zero amplitude are skipped, so
/// their gates are never drawn. This leaves the state distribution intact
/// since a gate acting on a zero pair is a no-op.
#[derive(Debug, Clone)]
pub struct QuantumTrajectory {
    protocol: QuantumProtocol,
    schedule: CircuitSchedule,
    selector: SiteSelector,
    state: Amplitudes,
    support: Support,
    fixed: TwoSiteUnitary,
    t: u64,
}

impl QuantumTrajectory {
    pub fn new(protocol: QuantumProtocol) -> Result<Self> {
        protocol.scheme.validate()?;
        let schedule = CircuitSchedule::new(protocol.len, protocol.boundary)?;
        let start = protocol.len / 2 - 1;
        Ok(Self {
            protocol,
            schedule,
            selector: SiteSelector::new(protocol.rate)?,
            state: Amplitudes::localized(protocol.len, start)?,
            support: Support::point(start),
            fixed: fixed_gate(),
            t: 0,
        })
    }

    pub fn time(&self) -> u64 {
        self.t
    }

    pub fn state(&self) -> &Amplitudes {
        &self.state
    }

    pub fn into_state(self) -> Amplitudes {
        self.state
    }

    /// One unit of time: a unitary layer followed by a measurement layer.
    pub fn step<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<()> {
        self.t += 1;
        let (bonds, next) = self.support.layer_bonds(&self.schedule, self.t);
        for j in bonds {
            let gate = match self.protocol.gates {
                GateKind::Haar => sample_haar_unitary(rng),
                GateKind::Fixed => self.fixed,
            };
            apply_gate(&mut self.state.0, &self.schedule, j, &gate);
        }
        self.support = next;
        self.state.renormalize_within(self.support);

        let scheme = self.protocol.scheme;
        let state = &mut self.state;
        let support = &mut self.support;
        self.selector.for_each(self.protocol.len, rng, |site, rng| {
            // amplitudes outside the window vanish, so every Kraus operator
            // acts there as a multiple of the identity
            if !support.contains(site) {
                return Ok(());
            }
            measure_site(state, site, scheme, support, rng).map(|_| ())
        })
    }
}

/// Runs `steps` unit-time steps and returns the final state.
pub fn evolve_quantum_trajectory<R: Rng + ?Sized>(
    protocol: QuantumProtocol,
    steps: u64,
    rng: &mut R,
) -> Result<Amplitudes> {
    let mut traj = QuantumTrajectory::new(protocol)?;
    for _ in 0..steps {
        traj.step(rng)?;
    }
    Ok(traj.into_state())
}
