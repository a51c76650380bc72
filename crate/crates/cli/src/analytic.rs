//! Closed-form tables for the reference models.

use trajfrac::analytic::{
    generalized_single_shot_ipr, single_shot_exponents, single_shot_mean_ipr, single_shot_typical_ln_ipr,
    ResettingClosedForms,
};

use crate::table::fmt_f64;

/// Placeholder for a mean IPR whose time integral diverges.
pub const DIVERGENT: &str = "divergent time integral";

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Model {
    SingleShot,
    Resetting,
}

/// Parameters of an analytic table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalyticParams {
    pub model: Model,
    pub len: usize,
    pub q_min: f64,
    pub q_max: f64,
    pub q_step: f64,
    /// Sites measured in the single-shot model.
    pub measured: usize,
    /// Measurement error rate; the single-shot model with `e` set uses
    /// generalized measurements on one site.
    pub error_rate: Option<f64>,
}

/// The q grid `q_min, q_min + q_step, ..` up to `q_max` inclusive.
pub fn q_grid(q_min: f64, q_max: f64, q_step: f64) -> Result<Vec<f64>, String> {
    if !(q_min > 0.0) || !(q_max >= q_min) || !(q_step > 0.0) || !q_max.is_finite() {
        return Err(format!(
            "need 0 < q-min <= q-max and q-step > 0, got {q_min}, {q_max}, {q_step}"
        ));
    }
    let n = ((q_max - q_min) / q_step + 1e-9).floor() as usize;
    if n > 1_000_000 {
        return Err("q grid too large".into());
    }
    Ok((0..=n).map(|k| q_min + k as f64 * q_step).collect())
}

/// Header and rows of the table; entries are already formatted.
pub fn analytic_table(params: &AnalyticParams) -> Result<(Vec<&'static str>, Vec<Vec<String>>), String> {
    let grid = q_grid(params.q_min, params.q_max, params.q_step)?;
    let err = |e: trajfrac::Error| e.to_string();
    match params.model {
        Model::SingleShot => {
            if let Some(e) = params.error_rate {
                let header = vec!["q", "mean_ipr"];
                let rows = grid
                    .iter()
                    .map(|&q| Ok(vec![fmt_f64(q), fmt_f64(generalized_single_shot_ipr(params.len, q, e).map_err(err)?)]))
                    .collect::<Result<_, String>>()?;
                return Ok((header, rows));
            }
            let header = vec!["q", "mean_ipr", "typical_ipr", "tau_q", "tau_star_q"];
            let rows = grid
                .iter()
                .map(|&q| {
                    let mean = single_shot_mean_ipr(params.len, q, params.measured).map_err(err)?;
                    let typical = single_shot_typical_ln_ipr(params.len, q, params.measured).map_err(err)?.exp();
                    let (tau, tau_star) = single_shot_exponents(q).map_err(err)?;
                    Ok(vec![fmt_f64(q), fmt_f64(mean), fmt_f64(typical), fmt_f64(tau), fmt_f64(tau_star)])
                })
                .collect::<Result<_, String>>()?;
            Ok((header, rows))
        }
        Model::Resetting => {
            let header = vec!["q", "mean_ipr", "typical_ipr", "tau_q", "tau_star_q", "variance"];
            let rows = grid
                .iter()
                .map(|&q| {
                    let c = ResettingClosedForms::new(params.len as f64, q).map_err(err)?;
                    let or_divergent = |x: Option<f64>| x.map(fmt_f64).unwrap_or_else(|| DIVERGENT.to_string());
                    Ok(vec![
                        fmt_f64(q),
                        or_divergent(c.mean_ipr),
                        fmt_f64(c.typical_ipr),
                        or_divergent(c.tau_q),
                        fmt_f64(c.tau_star_q),
                        fmt_f64(c.variance),
                    ])
                })
                .collect::<Result<_, String>>()?;
            Ok((header, rows))
        }
    }
}
