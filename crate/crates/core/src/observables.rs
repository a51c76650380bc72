//! Distribution-level diagnostics: IPR moments, coarse-graining, position
//! variance, recentering, and streaming ensemble statistics.

use serde::{Deserialize, Serialize};

use crate::cdyn::ProbabilityVector;
use crate::error::{Error, Result};

/// `sum_i p_i^q` with `0^q = 0`. Only `q > 0` is defined.
pub fn ipr(dist: &ProbabilityVector, q: f64) -> Result<f64> {
    ipr_of(dist.values(), q)
}

pub(crate) fn ipr_of(values: &[f64], q: f64) -> Result<f64> {
    if !(q > 0.0) || !q.is_finite() {
        return Err(Error::InvalidParameter(format!("IPR needs q > 0, got {q}")));
    }
    Ok(if q == 1.0 {
        1.0
    } else if q == 2.0 {
        values.iter().map(|p| p * p).sum()
    } else {
        values.iter().filter(|&&p| p > 0.0).map(|p| p.powf(q)).sum()
    })
}

/// Box masses `mu_k = sum_{i < l_box} p_{k l_box + i}`.
pub fn coarse_grain(dist: &ProbabilityVector, l_box: usize) -> Result<ProbabilityVector> {
    if l_box == 0 || !dist.len().is_multiple_of(l_box) {
        return Err(Error::InvalidParameter(format!(
            "box size {l_box} does not divide length {}",
            dist.len()
        )));
    }
    Ok(ProbabilityVector::from_normalized(coarse_values(dist.values(), l_box)))
}

fn coarse_values(values: &[f64], l_box: usize) -> Vec<f64> {
    values.chunks_exact(l_box).map(|c| c.iter().sum()).collect()
}

/// Variance of the site index under `dist`.
pub fn position_variance(dist: &ProbabilityVector) -> f64 {
    variance_of(dist.values())
}

fn variance_of(values: &[f64]) -> f64 {
    let mean: f64 = values.iter().enumerate().map(|(i, p)| i as f64 * p).sum();
    values
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let d = i as f64 - mean;
            d * d * p
        })
        .sum::<f64>()
        .max(0.0)
}

/// Cyclic shift putting the most probable site (smallest index among ties)
/// at offset 0. Element `k` of the result holds offset `k - (L/2 - 1)`, so
/// the offsets run over `-L/2 + 1 ..= L/2`.
pub fn recenter(dist: &ProbabilityVector) -> ProbabilityVector {
    let values = dist.values();
    let len = values.len();
    let mut center = 0;
    for (i, &p) in values.iter().enumerate() {
        if p > values[center] {
            center = i;
        }
    }
    let origin = (len / 2).saturating_sub(1);
    let shifted = (0..len)
        .map(|k| values[(center + len + k - origin) % len])
        .collect();
    ProbabilityVector::from_normalized(shifted)
}

/// Welford accumulator for a mean and its standard error; mergeable.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct RunningStats {
    n: u64,
    mean: f64,
    m2: f64,
}

impl RunningStats {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let delta = x - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (x - self.mean);
    }

    /// Chan et al. pairwise combination.
    pub fn merge(&mut self, other: &Self) {
        if other.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = *other;
            return;
        }
        let n = self.n + other.n;
        let delta = other.mean - self.mean;
        let w = other.n as f64 / n as f64;
        self.mean += delta * w;
        self.m2 += other.m2 + delta * delta * self.n as f64 * w;
        self.n = n;
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Unbiased sample variance; NaN below two samples.
    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            f64::NAN
        } else {
            self.m2 / (self.n - 1) as f64
        }
    }

    pub fn stderr(&self) -> f64 {
        (self.variance() / self.n as f64).sqrt()
    }
}

/// Running statistics of one `(q, l_box)` cell.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
struct CellAccumulator {
    ipr: RunningStats,
    log_ipr: RunningStats,
}

/// Streaming ensemble statistics of IPR moments and position variance at
/// one lattice length, over a grid of `q` values and box sizes.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleStats {
    q_grid: Vec<f64>,
    box_sizes: Vec<usize>,
    cells: Vec<CellAccumulator>,
    variance: RunningStats,
}

/// Summary of one `(q, l_box)` cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub q: f64,
    pub l_box: usize,
    pub mean_ipr: f64,
    pub mean_ipr_stderr: f64,
    /// `exp <ln IPR>`.
    pub typical_ipr: f64,
    /// Delta-method error `typical_ipr * stderr(ln IPR)`.
    pub typical_ipr_stderr: f64,
    pub mean_log_ipr: f64,
    pub mean_log_ipr_stderr: f64,
    pub mean_var: f64,
    pub mean_var_stderr: f64,
    pub count: u64,
}

impl EnsembleStats {
    pub fn new(q_grid: &[f64], box_sizes: &[usize]) -> Result<Self> {
        if q_grid.is_empty() || box_sizes.is_empty() {
            return Err(Error::InvalidParameter("empty q grid or box list".into()));
        }
        if let Some(q) = q_grid.iter().find(|q| !(**q > 0.0) || !q.is_finite()) {
            return Err(Error::InvalidParameter(format!("IPR needs q > 0, got {q}")));
        }
        if box_sizes.contains(&0) {
            return Err(Error::InvalidParameter("box size must be positive".into()));
        }
        Ok(Self {
            q_grid: q_grid.to_vec(),
            box_sizes: box_sizes.to_vec(),
            cells: vec![CellAccumulator::default(); q_grid.len() * box_sizes.len()],
            variance: RunningStats::default(),
        })
    }

    pub fn q_grid(&self) -> &[f64] {
        &self.q_grid
    }

    pub fn box_sizes(&self) -> &[usize] {
        &self.box_sizes
    }

    pub fn count(&self) -> u64 {
        self.variance.count()
    }

    /// Folds one trajectory's final distribution into the running statistics.
    pub fn accumulate(&mut self, dist: &ProbabilityVector) -> Result<()> {
        let values = dist.values();
        if let Some(b) = self.box_sizes.iter().find(|&&b| !values.len().is_multiple_of(b)) {
            return Err(Error::InvalidParameter(format!(
                "box size {b} does not divide length {}",
                values.len()
            )));
        }
        let nq = self.q_grid.len();
        for (bi, &l_box) in self.box_sizes.iter().enumerate() {
            let coarse;
            let boxed = if l_box == 1 {
                values
            } else {
                coarse = coarse_values(values, l_box);
                &coarse[..]
            };
            for (qi, &q) in self.q_grid.iter().enumerate() {
                let value = ipr_of(boxed, q)?;
                let cell = &mut self.cells[bi * nq + qi];
                cell.ipr.push(value);
                cell.log_ipr.push(value.ln());
            }
        }
        self.variance.push(variance_of(values));
        Ok(())
    }

    /// Combines statistics gathered on the same grids.
    pub fn merge(&mut self, other: &Self) -> Result<()> {
        if self.q_grid != other.q_grid || self.box_sizes != other.box_sizes {
            return Err(Error::InvalidParameter("merging statistics with different grids".into()));
        }
        for (a, b) in self.cells.iter_mut().zip(&other.cells) {
            a.ipr.merge(&b.ipr);
            a.log_ipr.merge(&b.log_ipr);
        }
        self.variance.merge(&other.variance);
        Ok(())
    }

    pub fn cell(&self, q_index: usize, box_index: usize) -> CellSummary {
        let c = &self.cells[box_index * self.q_grid.len() + q_index];
        let typical = c.log_ipr.mean().exp();
        CellSummary {
            q: self.q_grid[q_index],
            l_box: self.box_sizes[box_index],
            mean_ipr: c.ipr.mean(),
            mean_ipr_stderr: c.ipr.stderr(),
            typical_ipr: typical,
            typical_ipr_stderr: typical * c.log_ipr.stderr(),
            mean_log_ipr: c.log_ipr.mean(),
            mean_log_ipr_stderr: c.log_ipr.stderr(),
            mean_var: self.variance.mean(),
            mean_var_stderr: self.variance.stderr(),
            count: self.variance.count(),
        }
    }

    /// All cells, box-major then in `q` order.
    pub fn summaries(&self) -> Vec<CellSummary> {
        let mut out = Vec::with_capacity(self.cells.len());
        for bi in 0..self.box_sizes.len() {
            for qi in 0..self.q_grid.len() {
                out.push(self.cell(qi, bi));
            }
        }
        out
    }

    pub fn variance(&self) -> &RunningStats {
        &self.variance
    }
}
