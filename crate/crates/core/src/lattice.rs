//! Brick-wall bond schedule shared by the quantum and classical circuits.
//!
//! Sites are 0-based here. A bond is named by its left site `j` and couples
//! `(j, j + 1)`, except the periodic wrap bond `L - 1` which couples
//! `(L - 1, 0)` in that order.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    #[default]
    Obc,
    Pbc,
}

pub fn check_length(len: usize) -> Result<()> {
    if len < 2 || !len.is_multiple_of(2) {
        return Err(Error::InvalidLength(len));
    }
    Ok(())
}

/// Active bond set `S_t` of a brick-wall circuit.
///
/// Odd `t` pairs `(0,1), (2,3), ...`; even `t` pairs `(1,2), (3,4), ...` and,
/// under PBC, the wrap bond `(L-1, 0)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CircuitSchedule {
    len: usize,
    boundary: Boundary,
}

#[allow(clippy::len_without_is_empty)]
impl CircuitSchedule {
    pub fn new(len: usize, boundary: Boundary) -> Result<Self> {
        check_length(len)?;
        Ok(Self { len, boundary })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    /// Left sites of the bonds active at time `t` (`t >= 1`), ascending.
    pub fn bonds(&self, t: u64) -> impl Iterator<Item = usize> + '_ {
        let (start, end) = self.bond_range(t);
        (start..end).step_by(2)
    }

    fn bond_range(&self, t: u64) -> (usize, usize) {
        if t % 2 == 1 {
            (0, self.len - 1)
        } else {
            match self.boundary {
                // bonds 1, 3, ..., L-3
                Boundary::Obc => (1, self.len - 2),
                // bonds 1, 3, ..., L-1 (the last one wraps)
                Boundary::Pbc => (1, self.len),
            }
        }
    }

    pub fn bond_count(&self, t: u64) -> usize {
        self.bonds(t).count()
    }

    /// The ordered site pair coupled by the bond with left site `j`.
    #[inline]
    pub fn pair(&self, j: usize) -> (usize, usize) {
        (j, if j + 1 == self.len { 0 } else { j + 1 })
    }

    pub fn is_active(&self, t: u64, j: usize) -> bool {
        let (start, end) = self.bond_range(t);
        j >= start && j < end && (j - start).is_multiple_of(2)
    }

    /// The partner of `site` under the layer at time `t`, if the site is on
    /// an active bond.
    pub fn partner(&self, t: u64, site: usize) -> Option<usize> {
        let odd = t % 2 == 1;
        let left = if site.is_multiple_of(2) == odd {
            site
        } else if site == 0 {
            self.len - 1
        } else {
            site - 1
        };
        if !self.is_active(t, left) {
            return None;
        }
        let (a, b) = self.pair(left);
        Some(if a == site { b } else { a })
    }
}

/// Inclusive window `[lo, hi]` outside of which a vector is known to vanish.
///
/// Circuits started from a localized state only populate a light cone, so
/// layers can skip bonds whose two sites are both outside the window. Under
/// PBC a window that reaches either edge is widened to the whole lattice.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Support {
    pub lo: usize,
    pub hi: usize,
}

impl Support {
    pub fn point(site: usize) -> Self {
        Self { lo: site, hi: site }
    }

    pub fn full(len: usize) -> Self {
        Self { lo: 0, hi: len - 1 }
    }

    pub fn is_full(&self, len: usize) -> bool {
        self.lo == 0 && self.hi == len - 1
    }

    /// Range of left-bond sites touching the window at time `t`, and the
    /// window after the layer.
    pub fn layer_bonds(&self, schedule: &CircuitSchedule, t: u64) -> (Vec<usize>, Support) {
        let len = schedule.len();
        if self.is_full(len) {
            return (schedule.bonds(t).collect(), *self);
        }
        let mut next = *self;
        let bonds: Vec<usize> = schedule
            .bonds(t)
            .filter(|&j| {
                let (a, b) = schedule.pair(j);
                let touches = self.contains(a) || self.contains(b);
                if touches {
                    next.lo = next.lo.min(a.min(b));
                    next.hi = next.hi.max(a.max(b));
                }
                touches
            })
            .collect();
        // a wrap bond makes the window non-contiguous; give up tracking
        if bonds.last() == Some(&(len - 1)) {
            next = Support::full(len);
        }
        (bonds, next)
    }

    pub fn contains(&self, site: usize) -> bool {
        site >= self.lo && site <= self.hi
    }
}

/// Draws the set of sites selected independently with probability `p`, in
/// ascending order, by geometric gap sampling.
#[derive(Debug, Clone, Copy)]
pub(crate) struct SiteSelector {
    p: f64,
    log_q: f64,
}

impl SiteSelector {
    pub fn new(p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidParameter(format!(
                "measurement rate must lie in [0, 1], got {p}"
            )));
        }
        Ok(Self {
            p,
            log_q: (-p).ln_1p(),
        })
    }

    /// Calls `visit` with each selected site of `0..len` in ascending order.
    pub fn for_each<R: Rng + ?Sized, E>(
        &self,
        len: usize,
        rng: &mut R,
        mut visit: impl FnMut(usize, &mut R) -> std::result::Result<(), E>,
    ) -> std::result::Result<(), E> {
        if self.p <= 0.0 {
            return Ok(());
        }
        if self.p >= 1.0 {
            for site in 0..len {
                visit(site, rng)?;
            }
            return Ok(());
        }
        let mut site = 0usize;
        loop {
            // number of skipped sites before the next selection
            let u: f64 = 1.0 - rng.random::<f64>();
            let gap = (u.ln() / self.log_q).floor();
            if !(gap < (len - site) as f64) {
                return Ok(());
            }
            site += gap as usize;
            visit(site, rng)?;
            site += 1;
            if site >= len {
                return Ok(());
            }
        }
    }
}
