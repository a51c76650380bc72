//! Power-law fits of ensemble averages against system size and the derived
//! multifractal exponents.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::observables::CellSummary;

/// Least-squares line through `(ln L, ln value)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub slope: f64,
    pub intercept: f64,
    /// Infinite when only two points were fitted.
    pub slope_stderr: f64,
    pub points_used: Vec<(f64, f64)>,
    pub min_l: f64,
}

impl ScalingFit {
    /// `tau` for a quantity decaying as `L^-tau`.
    pub fn decay_exponent(&self) -> f64 {
        -self.slope
    }

    /// `tau_Var` for a variance growing as `L^(2 tau_Var)`.
    pub fn variance_exponent(&self) -> f64 {
        self.slope / 2.0
    }
}

/// Ordinary least squares of `ln value` on `ln L` over points with
/// `L >= min_l`; at least three such points are required.
pub fn fit_power_law(points: &[(f64, f64)], min_l: f64) -> Result<ScalingFit> {
    fit_power_law_min_points(points, min_l, 3)
}

/// As [`fit_power_law`] with a configurable minimum point count (at least 2).
pub fn fit_power_law_min_points(points: &[(f64, f64)], min_l: f64, min_points: usize) -> Result<ScalingFit> {
    let used = qualifying(points.iter().map(|&(l, v)| (l, v)), min_l, min_points.max(2))?;
    let xy: Vec<(f64, f64, f64)> = used.iter().map(|&(l, v)| (l.ln(), v.ln(), 1.0)).collect();
    Ok(finish(weighted_line(&xy), used, min_l))
}

/// Weighted least squares with weights `(value / stderr)^2`, i.e. inverse
/// variances of `ln value`. Points are `(L, value, stderr)`.
pub fn fit_power_law_weighted(points: &[(f64, f64, f64)], min_l: f64) -> Result<ScalingFit> {
    let used: Vec<(f64, f64, f64)> = points.iter().copied().filter(|p| p.0 >= min_l).collect();
    qualifying(used.iter().map(|p| (p.0, p.1)), min_l, 3)?;
    let mut xy = Vec::with_capacity(used.len());
    for &(l, v, se) in &used {
        if !(se > 0.0) || !se.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "weighted fit needs positive finite errors, got {se} at L = {l}"
            )));
        }
        let rel = se / v;
        xy.push((l.ln(), v.ln(), 1.0 / (rel * rel)));
    }
    let pts = used.iter().map(|p| (p.0, p.1)).collect();
    Ok(finish(weighted_line(&xy), pts, min_l))
}

fn qualifying(
    points: impl Iterator<Item = (f64, f64)>,
    min_l: f64,
    needed: usize,
) -> Result<Vec<(f64, f64)>> {
    let used: Vec<(f64, f64)> = points.filter(|p| p.0 >= min_l).collect();
    if used.len() < needed {
        return Err(Error::InsufficientPoints {
            needed,
            found: used.len(),
            min_l,
        });
    }
    for &(l, value) in &used {
        if !(value > 0.0) || !(l > 0.0) || !value.is_finite() {
            return Err(Error::NonPositiveValue { l, value });
        }
    }
    Ok(used)
}

struct Line {
    slope: f64,
    intercept: f64,
    slope_stderr: f64,
}

fn weighted_line(xy: &[(f64, f64, f64)]) -> Line {
    let w_sum: f64 = xy.iter().map(|p| p.2).sum();
    let x_bar = xy.iter().map(|p| p.2 * p.0).sum::<f64>() / w_sum;
    let y_bar = xy.iter().map(|p| p.2 * p.1).sum::<f64>() / w_sum;
    let sxx: f64 = xy.iter().map(|p| p.2 * (p.0 - x_bar).powi(2)).sum();
    let sxy: f64 = xy.iter().map(|p| p.2 * (p.0 - x_bar) * (p.1 - y_bar)).sum();
    let slope = sxy / sxx;
    let intercept = y_bar - slope * x_bar;
    let dof = xy.len() as f64 - 2.0;
    let slope_stderr = if dof > 0.0 {
        let ssr: f64 = xy
            .iter()
            .map(|p| p.2 * (p.1 - intercept - slope * p.0).powi(2))
            .sum();
        (ssr / dof / sxx).sqrt()
    } else {
        f64::INFINITY
    };
    Line {
        slope,
        intercept,
        slope_stderr,
    }
}

fn finish(line: Line, points_used: Vec<(f64, f64)>, min_l: f64) -> ScalingFit {
    ScalingFit {
        slope: line.slope,
        intercept: line.intercept,
        slope_stderr: line.slope_stderr,
        points_used,
        min_l,
    }
}

/// One ensemble cell tagged with its lattice length.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SizedCell {
    pub length: usize,
    pub cell: CellSummary,
}

/// Exponents at one `(q, l_box)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExponentRow {
    pub q: f64,
    pub l_box: usize,
    pub tau_q: f64,
    pub tau_q_stderr: f64,
    pub tau_star_q: f64,
    pub tau_star_q_stderr: f64,
    /// `tau_q / (q - 1)`, omitted within 0.05 of `q = 1`.
    pub d_q: Option<f64>,
    pub delta_q: f64,
    pub d0: f64,
    /// `None` when the variance vanishes at some size.
    pub tau_var: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExponentTable {
    pub rows: Vec<ExponentRow>,
}

impl ExponentTable {
    pub fn row(&self, q: f64, l_box: usize) -> Option<&ExponentRow> {
        self.rows
            .iter()
            .find(|r| r.l_box == l_box && (r.q - q).abs() < 1e-12)
    }
}

pub const DEFAULT_MIN_L: f64 = 128.0;
pub const DEFAULT_Q0: f64 = 0.01;

/// Fits every `(q, l_box)` cell across lengths. `D_0` is taken per box
/// size from the fit at `q0`, or at the smallest `q != 1` on the grid when
/// `q0` is absent.
pub fn exponent_table(cells: &[SizedCell], min_l: f64, q0: f64) -> Result<ExponentTable> {
    let mut boxes: Vec<usize> = cells.iter().map(|c| c.cell.l_box).collect();
    boxes.sort_unstable();
    boxes.dedup();
    let mut rows = Vec::new();
    for l_box in boxes {
        let in_box: Vec<&SizedCell> = cells.iter().filter(|c| c.cell.l_box == l_box).collect();
        let mut qs: Vec<f64> = in_box.iter().map(|c| c.cell.q).collect();
        qs.sort_by(f64::total_cmp);
        qs.dedup();
        let mut partial = Vec::with_capacity(qs.len());
        for &q in &qs {
            let mut at_q: Vec<&SizedCell> = in_box.iter().copied().filter(|c| c.cell.q == q).collect();
            at_q.sort_by_key(|c| c.length);
            let series = |f: fn(&CellSummary) -> f64| -> Vec<(f64, f64)> {
                at_q.iter().map(|c| (c.length as f64, f(&c.cell))).collect()
            };
            let mean = fit_power_law(&series(|c| c.mean_ipr), min_l)?;
            let typical = fit_power_law(&series(|c| c.typical_ipr), min_l)?;
            let var = fit_power_law(&series(|c| c.mean_var), min_l).ok();
            partial.push((q, mean, typical, var));
        }
        let reference = qs
            .iter()
            .position(|&q| (q - q0).abs() < 1e-12)
            .or_else(|| qs.iter().position(|&q| q != 1.0));
        let d0 = match reference {
            Some(i) => partial[i].1.decay_exponent() / (qs[i] - 1.0),
            None => f64::NAN,
        };
        for (q, mean, typical, var) in partial {
            let tau = mean.decay_exponent();
            rows.push(ExponentRow {
                q,
                l_box,
                tau_q: tau,
                tau_q_stderr: mean.slope_stderr,
                tau_star_q: typical.decay_exponent(),
                tau_star_q_stderr: typical.slope_stderr,
                d_q: ((q - 1.0).abs() > 0.05).then(|| tau / (q - 1.0)),
                delta_q: tau - d0 * (q - 1.0),
                d0,
                tau_var: var.map(|f| f.variance_exponent()),
            });
        }
    }
    Ok(ExponentTable { rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const SIZES: [f64; 4] = [128.0, 256.0, 512.0, 1024.0];

    #[test]
    fn exact_power_law() {
        let pts: Vec<_> = SIZES.iter().map(|&l| (l, l.powf(-0.5))).collect();
        let fit = fit_power_law(&pts, 128.0).unwrap();
        assert!((fit.slope + 0.5).abs() < 1e-12);
        assert!(fit.slope_stderr < 1e-12);
        assert_eq!(fit.points_used.len(), 4);
        let flat: Vec<_> = SIZES.iter().map(|&l| (l, 1.0)).collect();
        assert_eq!(fit_power_law(&flat, 0.0).unwrap().slope, 0.0);
    }

    #[test]
    fn noisy_power_law() {
        // synthetic data with 1% multiplicative noise
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..50 {
            let pts: Vec<_> = SIZES
                .iter()
                .map(|&l| (l, 3.0 / l * (1.0 + 0.01 * (2.0 * rng.random::<f64>() - 1.0))))
                .collect();
            let fit = fit_power_law(&pts, 0.0).unwrap();
            assert!((fit.slope + 1.0).abs() < 0.05);
        }
    }

    #[test]
    fn fit_errors() {
        let pts: Vec<_> = SIZES.iter().map(|&l| (l, 1.0 / l)).collect();
        assert!(matches!(
            fit_power_law(&pts, 300.0),
            Err(Error::InsufficientPoints { found: 2, .. })
        ));
        let bad = [(64.0, 1.0), (128.0, 0.0), (256.0, 1.0)];
        assert!(matches!(fit_power_law(&bad, 0.0), Err(Error::NonPositiveValue { .. })));
        let two = fit_power_law_min_points(&pts, 300.0, 2).unwrap();
        assert!((two.slope + 1.0).abs() < 1e-12 && two.slope_stderr.is_infinite());
    }

    #[test]
    fn weighted_fit_recovers_exact_slope() {
        let pts: Vec<_> = SIZES.iter().map(|&l| (l, l.powf(-0.7), 0.01 * l.powf(-0.7))).collect();
        let fit = fit_power_law_weighted(&pts, 0.0).unwrap();
        assert!((fit.slope + 0.7).abs() < 1e-12);
        // a badly-off point with a huge error barely moves the fit
        let mut skew = pts.clone();
        skew[0].1 *= 2.0;
        skew[0].2 = 1e3;
        let fit = fit_power_law_weighted(&skew, 0.0).unwrap();
        assert!((fit.slope + 0.7).abs() < 1e-6);
    }

    fn synthetic_cells(qs: &[f64], ipr: impl Fn(f64, f64) -> f64) -> Vec<SizedCell> {
        let mut out = Vec::new();
        for &l in &SIZES {
            for &q in qs {
                let v = ipr(l, q);
                out.push(SizedCell {
                    length: l as usize,
                    cell: CellSummary {
                        q,
                        l_box: 1,
                        mean_ipr: v,
                        mean_ipr_stderr: 0.0,
                        typical_ipr: v,
                        typical_ipr_stderr: 0.0,
                        mean_log_ipr: v.ln(),
                        mean_log_ipr_stderr: 0.0,
                        mean_var: l * l / 12.0,
                        mean_var_stderr: 0.0,
                        count: 10,
                    },
                });
            }
        }
        out
    }

    #[test]
    fn extended_ansatz_table() {
        let qs = [0.01, 0.5, 1.0, 2.0, 3.0];
        let cells = synthetic_cells(&qs, |l, q| l.powf(1.0 - q));
        let table = exponent_table(&cells, 128.0, 0.01).unwrap();
        for row in &table.rows {
            assert!((row.tau_q - (row.q - 1.0)).abs() < 1e-10);
            assert!((row.d0 - 1.0).abs() < 1e-10);
            assert!(row.delta_q.abs() < 1e-10);
            assert!((row.tau_var.unwrap() - 1.0).abs() < 1e-10);
            match row.d_q {
                Some(d) => assert!((d - 1.0).abs() < 1e-10),
                None => assert_eq!(row.q, 1.0),
            }
        }
        assert_eq!(table.row(0.01, 1).unwrap().delta_q, 0.0);
    }

    #[test]
    fn missing_q0_falls_back_to_smallest_q() {
        let cells = synthetic_cells(&[0.5, 2.0], |l, q| l.powf(0.8 * (1.0 - q)));
        let table = exponent_table(&cells, 0.0, 0.01).unwrap();
        assert!((table.rows[0].d0 - 0.8).abs() < 1e-10);
        assert!(table.row(0.5, 1).unwrap().delta_q.abs() < 1e-12);
    }

    #[test]
    fn single_shot_exponents_emerge_at_large_size() {
        use crate::analytic::{single_shot_mean_ipr, single_shot_typical_ln_ipr};
        let q = 3.0;
        let sizes = [1_000usize, 10_000, 100_000];
        let mean: Vec<_> = sizes
            .iter()
            .map(|&l| (l as f64, single_shot_mean_ipr(l, q, 1).unwrap()))
            .collect();
        let typical: Vec<_> = sizes
            .iter()
            .map(|&l| (l as f64, single_shot_typical_ln_ipr(l, q, 1).unwrap().exp()))
            .collect();
        let tau = fit_power_law(&mean, 0.0).unwrap().decay_exponent();
        let tau_star = fit_power_law(&typical, 0.0).unwrap().decay_exponent();
        assert!((tau - 1.0).abs() < 0.01, "{tau}");
        assert!((tau_star - 2.0).abs() < 0.01, "{tau_star}");
    }

    proptest! {
        #[test]
        fn scale_changes_intercept_only(c in 1e-3f64..1e3, tau in -2.0f64..2.0, noise in prop::collection::vec(-0.1f64..0.1, 4)) {
            let pts: Vec<_> = SIZES.iter().zip(&noise).map(|(&l, n)| (l, l.powf(-tau) * (1.0 + n))).collect();
            let scaled: Vec<_> = pts.iter().map(|&(l, v)| (l, c * v)).collect();
            let a = fit_power_law(&pts, 0.0).unwrap();
            let b = fit_power_law(&scaled, 0.0).unwrap();
            prop_assert!((a.slope - b.slope).abs() < 1e-12);
            prop_assert!((b.intercept - a.intercept - c.ln()).abs() < 1e-9);
        }
    }
}
