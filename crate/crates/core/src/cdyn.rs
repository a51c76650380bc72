//! Classical single-particle circuits: a particle hopping through random or
//! fixed two-site transition matrices, and a Bayesian estimate of its
//! position refined by sparse perfect detections.

use std::collections::BTreeMap;

use rand::Rng;

use crate::error::{Error, Result};
use crate::lattice::{check_length, Boundary, CircuitSchedule, SiteSelector, Support};

/// Nonnegative occupation probabilities summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityVector(Vec<f64>);

impl ProbabilityVector {
    pub fn localized(len: usize, site: usize) -> Result<Self> {
        check_length(len)?;
        if site >= len {
            return Err(Error::SiteOutOfRange { site, len });
        }
        let mut values = vec![0.0; len];
        values[site] = 1.0;
        Ok(Self(values))
    }

    pub fn uniform(len: usize) -> Result<Self> {
        check_length(len)?;
        Ok(Self(vec![1.0 / len as f64; len]))
    }

    /// Validates nonnegativity and normalizes to unit mass. Unlike lattice
    /// states, any nonzero length is accepted so that coarse-grained
    /// distributions are representable.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidParameter("empty distribution".into()));
        }
        if values.iter().any(|&p| !(p >= 0.0) || !p.is_finite()) {
            return Err(Error::InvalidParameter(
                "probabilities must be finite and nonnegative".into(),
            ));
        }
        let total: f64 = values.iter().sum();
        if !(total > 0.0) {
            return Err(Error::InvalidParameter("distribution has zero mass".into()));
        }
        Ok(Self(values.into_iter().map(|p| p / total).collect()))
    }

    /// Wraps values that are already normalized.
    pub(crate) fn from_normalized(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn into_values(self) -> Vec<f64> {
        self.0
    }

    pub fn total(&self) -> f64 {
        self.0.iter().sum()
    }

    fn renormalize_within(&mut self, support: Support) {
        let slice = &mut self.0[support.lo..=support.hi];
        let total: f64 = slice.iter().sum();
        for p in slice {
            *p /= total;
        }
    }
}

pub(crate) fn values_mut(dist: &mut ProbabilityVector) -> &mut [f64] {
    &mut dist.0
}

/// Symmetric two-site transition matrix `[[s, 1-s], [1-s, s]]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransitionMatrix {
    stay: f64,
}

impl TransitionMatrix {
    pub fn new(stay: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&stay) {
            return Err(Error::InvalidParameter(format!(
                "stay probability must lie in [0, 1], got {stay}"
            )));
        }
        Ok(Self { stay })
    }

    pub fn stay(&self) -> f64 {
        self.stay
    }

    #[inline]
    pub fn apply(&self, a: f64, b: f64) -> (f64, f64) {
        // equal inputs pass through unchanged, so uniform mass is exactly
        // stationary
        let moved = self.stay * (a - b);
        (b + moved, a - moved)
    }
}

#[inline]
fn transfer(values: &mut [f64], schedule: &CircuitSchedule, j: usize, m: TransitionMatrix) {
    let (a, b) = schedule.pair(j);
    let (x, y) = m.apply(values[a], values[b]);
    values[a] = x;
    values[b] = y;
}

/// Applies `T(s)` on each active bond of layer `t`; `stays` must be keyed
/// by exactly the active bonds.
pub fn apply_transition_layer(
    dist: &mut ProbabilityVector,
    stays: &BTreeMap<usize, TransitionMatrix>,
    t: u64,
    schedule: &CircuitSchedule,
) -> Result<()> {
    if dist.len() != schedule.len() {
        return Err(Error::LengthMismatch {
            expected: schedule.len(),
            got: dist.len(),
        });
    }
    if !stays.keys().copied().eq(schedule.bonds(t)) {
        return Err(Error::BondMismatch { t });
    }
    for (&j, &m) in stays {
        transfer(&mut dist.0, schedule, j, m);
    }
    Ok(())
}

/// Moves the true particle through layer `t`.
pub fn step_particle<R: Rng + ?Sized>(
    site: usize,
    stays: &BTreeMap<usize, TransitionMatrix>,
    t: u64,
    schedule: &CircuitSchedule,
    rng: &mut R,
) -> Result<usize> {
    if site >= schedule.len() {
        return Err(Error::SiteOutOfRange {
            site,
            len: schedule.len(),
        });
    }
    let Some(partner) = schedule.partner(t, site) else {
        return Ok(site);
    };
    let left = match schedule.pair(site) {
        (a, b) if b == partner => a,
        _ => partner,
    };
    let m = stays.get(&left).ok_or(Error::BondMismatch { t })?;
    Ok(hop(site, partner, m.stay, rng))
}

#[inline]
fn hop<R: Rng + ?Sized>(site: usize, partner: usize, stay: f64, rng: &mut R) -> usize {
    if rng.random::<f64>() < stay {
        site
    } else {
        partner
    }
}

/// Bayes update after detecting the particle at `site`.
pub fn bayes_detect(dist: &mut ProbabilityVector, site: usize) -> Result<()> {
    check_site(dist, site)?;
    detect_within(dist, site, Support::full(dist.len()))
}

fn detect_within(dist: &mut ProbabilityVector, site: usize, support: Support) -> Result<()> {
    if !(dist.0[site] > 0.0) {
        return Err(Error::InconsistentDetection(site));
    }
    dist.0[support.lo..=support.hi].fill(0.0);
    dist.0[site] = 1.0;
    Ok(())
}

/// Bayes update after measuring `site` and not finding the particle.
pub fn bayes_miss(dist: &mut ProbabilityVector, site: usize) -> Result<()> {
    check_site(dist, site)?;
    miss_within(dist, site, Support::full(dist.len()))
}

fn miss_within(dist: &mut ProbabilityVector, site: usize, support: Support) -> Result<()> {
    if dist.0[site] == 0.0 {
        return Ok(());
    }
    dist.0[site] = 0.0;
    let rest: f64 = dist.0[support.lo..=support.hi].iter().sum();
    if !(rest > 0.0) {
        return Err(Error::InconsistentMiss(site));
    }
    for p in &mut dist.0[support.lo..=support.hi] {
        *p /= rest;
    }
    Ok(())
}

fn check_site(dist: &ProbabilityVector, site: usize) -> Result<()> {
    if site >= dist.len() {
        return Err(Error::SiteOutOfRange {
            site,
            len: dist.len(),
        });
    }
    Ok(())
}

/// Scans the lattice in ascending order, measuring each site with
/// probability `p` and updating the estimate against the true site `truth`.
pub fn classical_measurement_layer<R: Rng + ?Sized>(
    dist: &mut ProbabilityVector,
    truth: usize,
    p: f64,
    rng: &mut R,
) -> Result<()> {
    check_site(dist, truth)?;
    let mut support = Support::full(dist.len());
    SiteSelector::new(p)?.for_each(dist.len(), rng, |site, _| {
        measure_within(dist, truth, site, &mut support)
    })
}

fn measure_within(
    dist: &mut ProbabilityVector,
    truth: usize,
    site: usize,
    support: &mut Support,
) -> Result<()> {
    if site == truth {
        detect_within(dist, site, *support)?;
        *support = Support::point(site);
        Ok(())
    } else if support.contains(site) {
        miss_within(dist, site, *support)
    } else {
        Ok(())
    }
}

/// How stay probabilities are drawn.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StayRule {
    /// Uniform on `[0, 1]`, independently per bond and layer.
    Random,
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassicalProtocol {
    pub len: usize,
    pub boundary: Boundary,
    pub stays: StayRule,
    pub rate: f64,
}

/// Co-evolution of the true particle and its estimated distribution, both
/// started at site `L/2` (0-based `L/2 - 1`). The estimator sees the same
/// realized stay probabilities as the particle.
#[derive(Debug, Clone)]
pub struct ClassicalTrajectory {
    protocol: ClassicalProtocol,
    schedule: CircuitSchedule,
    selector: SiteSelector,
    dist: ProbabilityVector,
    support: Support,
    particle: usize,
    t: u64,
}

impl ClassicalTrajectory {
    pub fn new(protocol: ClassicalProtocol) -> Result<Self> {
        if let StayRule::Fixed(s) = protocol.stays {
            TransitionMatrix::new(s)?;
        }
        let schedule = CircuitSchedule::new(protocol.len, protocol.boundary)?;
        let start = protocol.len / 2 - 1;
        Ok(Self {
            protocol,
            schedule,
            selector: SiteSelector::new(protocol.rate)?,
            dist: ProbabilityVector::localized(protocol.len, start)?,
            support: Support::point(start),
            particle: start,
            t: 0,
        })
    }

    pub fn time(&self) -> u64 {
        self.t
    }

    pub fn distribution(&self) -> &ProbabilityVector {
        &self.dist
    }

    pub fn into_distribution(self) -> ProbabilityVector {
        self.dist
    }

    pub fn particle(&self) -> usize {
        self.particle
    }

    pub fn step<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<()> {
        self.t += 1;
        let t = self.t;
        let partner = self.schedule.partner(t, self.particle);
        let (bonds, next) = self.support.layer_bonds(&self.schedule, t);
        // the particle always lies inside the support, so its bond is visited
        for j in bonds {
            let stay = match self.protocol.stays {
                StayRule::Random => rng.random::<f64>(),
                StayRule::Fixed(s) => s,
            };
            transfer(&mut self.dist.0, &self.schedule, j, TransitionMatrix { stay });
            if let Some(partner) = partner {
                let (a, b) = self.schedule.pair(j);
                if a == self.particle || b == self.particle {
                    self.particle = hop(self.particle, partner, stay, rng);
                }
            }
        }
        self.support = next;
        self.dist.renormalize_within(self.support);

        let (dist, support, truth) = (&mut self.dist, &mut self.support, self.particle);
        self.selector
            .for_each(self.protocol.len, rng, |site, _| measure_within(dist, truth, site, support))?;
        debug_assert!(self.dist.0[self.particle] > 0.0, "filter lost the particle");
        Ok(())
    }
}

pub fn evolve_classical_trajectory<R: Rng + ?Sized>(
    protocol: ClassicalProtocol,
    steps: u64,
    rng: &mut R,
) -> Result<ProbabilityVector> {
    let mut traj = ClassicalTrajectory::new(protocol)?;
    for _ in 0..steps {
        traj.step(rng)?;
    }
    Ok(traj.into_distribution())
}
