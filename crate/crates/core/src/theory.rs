//! Closed-form edge cases of the three objectives, evaluated numerically.
//!
//! Embeddings are injected straight into the loss functions; no network is
//! involved. Each report pairs the closed-form value with the value the
//! loss implementation computes and, where meaningful, the norm of the loss
//! gradient with respect to the injected embeddings.

use neutral_tensor::{rng_stream, standard_normal, Rng, Tape, Tensor};
use serde::{Deserialize, Serialize};

use crate::losses::{dcl_loss, simclr_loss, tp_loss};
use crate::Result;

pub const AGREEMENT_TOL: f64 = 1e-8;
pub const GRADIENT_FLOOR: f64 = 1e-6;
const MAX_RESAMPLES: usize = 100;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum LossName {
    #[serde(rename = "DCL")]
    Dcl,
    #[serde(rename = "L_P")]
    Lp,
    #[serde(rename = "L_C")]
    Lc,
}

impl std::fmt::Display for LossName {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            LossName::Dcl => "DCL",
            LossName::Lp => "L_P",
            LossName::Lc => "L_C",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeCase {
    Constant,
    Identity,
    Counterexample,
}

impl std::fmt::Display for EdgeCase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            EdgeCase::Constant => "constant",
            EdgeCase::Identity => "identity",
            EdgeCase::Counterexample => "counterexample",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EdgeCaseReport {
    pub loss_name: LossName,
    pub edge_case: EdgeCase,
    /// `K` transformations, or the minibatch size `N` for `L_C`.
    pub k: usize,
    pub c: f64,
    pub tau: f64,
    pub analytic_value: f64,
    pub numeric_value: f64,
    pub gradient_norm: f64,
    /// Whether a nonvanishing gradient is part of this check.
    pub gradient_required: bool,
    /// Times the random `z0` was redrawn because the gradient was too small.
    pub resamples: usize,
    /// Extra ordering condition (monotone decrease in C, or the
    /// counterexample sitting below the identity value).
    pub ordering_ok: bool,
}

impl EdgeCaseReport {
    pub fn agrees(&self) -> bool {
        !self.analytic_value.is_finite()
            || (self.analytic_value - self.numeric_value).abs() < AGREEMENT_TOL
    }

    pub fn passed(&self) -> bool {
        self.agrees()
            && self.ordering_ok
            && (!self.gradient_required || self.gradient_norm > GRADIENT_FLOOR)
    }
}

/// Closed-form `L_P` when the classifier output for view `k` is `C·c_k`.
pub fn lp_constant_closed_form(k: usize, c: f64) -> f64 {
    k as f64 * ((k as f64 - 1.0) * (-c).exp()).ln_1p()
}

/// `L_P` at the constant edge case `f(T_k(x)) = C·c_k`.
pub fn lp_constant_edge(k: usize, c: f64) -> Result<EdgeCaseReport> {
    let mut logits = vec![0.0; k * k];
    for i in 0..k {
        logits[i * k + i] = c;
    }
    let tape = Tape::new();
    let z = tape.param(Tensor::new(vec![1, k, k], logits)?);
    let loss = tp_loss(z)?;
    let numeric = loss.value().item()?;
    let grads = tape.backward(loss)?;
    let analytic = lp_constant_closed_form(k, c);
    Ok(EdgeCaseReport {
        loss_name: LossName::Lp,
        edge_case: EdgeCase::Constant,
        k,
        c,
        tau: 1.0,
        analytic_value: analytic,
        numeric_value: numeric,
        gradient_norm: l2(grads.wrt(z).data()),
        gradient_required: false,
        resamples: 0,
        ordering_ok: lp_constant_closed_form(k, c + 1.0) < analytic,
    })
}

/// `L_C` value of a perfectly aligned encoder with mutually orthogonal
/// per-sample embeddings: every row sees its positive at similarity 1 and
/// `2N − 2` negatives at similarity 0.
pub fn lc_aligned_closed_form(n: usize, tau: f64) -> f64 {
    let rows = 2.0 * n as f64;
    rows * (-1.0 / tau + ((1.0 / tau).exp() + rows - 2.0).ln())
}

/// `L_C` with both views equal to the identity and an encoder mapping the
/// `N` samples to orthogonal directions.
pub fn lc_identity_edge(n: usize, tau: f64) -> Result<EdgeCaseReport> {
    let mut data = vec![0.0; n * n];
    for i in 0..n {
        data[i * n + i] = 1.0 + i as f64;
    }
    let z = Tensor::new(vec![n, n], data)?;
    let tape = Tape::new();
    let v = tape.param(z);
    // identity views: both sides are the same embedding
    let loss = simclr_loss(v, v, tau)?;
    let numeric = loss.value().item()?;
    let grads = tape.backward(loss)?;
    Ok(EdgeCaseReport {
        loss_name: LossName::Lc,
        edge_case: EdgeCase::Identity,
        k: n,
        c: 0.0,
        tau,
        analytic_value: lc_aligned_closed_form(n, tau),
        numeric_value: numeric,
        gradient_norm: l2(grads.wrt(v).data()),
        gradient_required: false,
        resamples: 0,
        ordering_ok: true,
    })
}

/// Closed-form DCL when all views collapse onto the original embedding.
pub fn dcl_identity_closed_form(k: usize) -> f64 {
    k as f64 * (k as f64).ln()
}

/// Closed-form DCL for `K = 2` with both views orthogonal to the original
/// and antipodal to each other.
pub fn dcl_counterexample_closed_form(tau: f64) -> f64 {
    2.0 * (-1.0 / tau).exp().ln_1p()
}

/// Closed-form DCL at `z_k = C·c_k` for unit `z0`, with `a_k = z0_k`.
pub fn dcl_constant_closed_form(z0: &[f64], k: usize, c: f64, tau: f64) -> f64 {
    (0..k)
        .map(|i| {
            let a = if c > 0.0 { z0[i] } else { 0.0 };
            -a / tau + ((a / tau).exp() + k as f64 - 1.0).ln()
        })
        .sum()
}

fn unit_vector(rng: &mut Rng, d: usize) -> Vec<f64> {
    let v: Vec<f64> = (0..d).map(|_| standard_normal(rng)).collect();
    let n = l2(&v);
    v.into_iter().map(|x| x / n).collect()
}

fn l2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// DCL value and embedding-gradient norm for one `[K+1, E]` configuration.
fn dcl_eval(rows: Vec<f64>, k: usize, e: usize, tau: f64) -> Result<(f64, f64)> {
    let tape = Tape::new();
    let z = tape.param(Tensor::new(vec![1, k + 1, e], rows)?);
    let loss = dcl_loss(z, tau)?;
    let value = loss.value().item()?;
    let grads = tape.backward(loss)?;
    Ok((value, l2(grads.wrt(z).data())))
}

/// DCL edge cases for one `(K, C, τ)` cell: identity views, the `K = 2`
/// counterexample, and the constant case with a random `z0`.
pub fn dcl_edge_suite(k: usize, c: f64, tau: f64, seed: u64) -> Result<Vec<EdgeCaseReport>> {
    crate::losses::DclConfig::new(tau, k)?;
    let mut rng = rng_stream(seed, k as u64);
    let mut out = Vec::new();

    let identity_value = dcl_identity_closed_form(k);
    let e = 4;
    let z0 = unit_vector(&mut rng, e);
    let rows: Vec<f64> = (0..=k).flat_map(|_| z0.iter().copied()).collect();
    let (numeric, grad) = dcl_eval(rows, k, e, tau)?;
    out.push(EdgeCaseReport {
        loss_name: LossName::Dcl,
        edge_case: EdgeCase::Identity,
        k,
        c,
        tau,
        analytic_value: identity_value,
        numeric_value: numeric,
        gradient_norm: grad,
        gradient_required: false,
        resamples: 0,
        ordering_ok: true,
    });

    if k == 2 {
        let rows = vec![1.0, 0.0, 0.0, 1.0, 0.0, -1.0];
        let (numeric, grad) = dcl_eval(rows, 2, 2, tau)?;
        let analytic = dcl_counterexample_closed_form(tau);
        out.push(EdgeCaseReport {
            loss_name: LossName::Dcl,
            edge_case: EdgeCase::Counterexample,
            k,
            c,
            tau,
            analytic_value: analytic,
            numeric_value: numeric,
            gradient_norm: grad,
            gradient_required: false,
            resamples: 0,
            ordering_ok: analytic < identity_value,
        });
    }

    // At C = 0 the views are the zero vector, where cosine similarity has
    // no gradient; only the value is checked there.
    let gradient_required = c > 0.0;
    let mut resamples = 0;
    loop {
        let z0 = unit_vector(&mut rng, k);
        let mut rows = z0.clone();
        for i in 0..k {
            rows.extend((0..k).map(|j| if i == j { c } else { 0.0 }));
        }
        let (numeric, grad) = dcl_eval(rows, k, k, tau)?;
        if gradient_required && grad <= GRADIENT_FLOOR && resamples < MAX_RESAMPLES {
            resamples += 1;
            continue;
        }
        out.push(EdgeCaseReport {
            loss_name: LossName::Dcl,
            edge_case: EdgeCase::Constant,
            k,
            c,
            tau,
            analytic_value: dcl_constant_closed_form(&z0, k, c, tau),
            numeric_value: numeric,
            gradient_norm: grad,
            gradient_required,
            resamples,
            ordering_ok: true,
        });
        break;
    }
    Ok(out)
}

/// Grid of parameters swept by [`verify_grid`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TheoryGrid {
    pub ks: Vec<usize>,
    pub cs: Vec<f64>,
    pub taus: Vec<f64>,
    pub seed: u64,
}

impl Default for TheoryGrid {
    fn default() -> Self {
        Self {
            ks: vec![2, 3, 4, 12],
            cs: vec![0.0, 1.0, 5.0, 20.0],
            taus: vec![0.1, 1.0],
            seed: 0,
        }
    }
}

/// Every edge-case report for the grid, in a stable order.
pub fn verify_grid(grid: &TheoryGrid) -> Result<Vec<EdgeCaseReport>> {
    let mut out = Vec::new();
    for &k in &grid.ks {
        for &c in &grid.cs {
            out.push(lp_constant_edge(k, c)?);
        }
        for &tau in &grid.taus {
            out.push(lc_identity_edge(k, tau)?);
            for &c in &grid.cs {
                let mut cell = dcl_edge_suite(k, c, tau, grid.seed)?;
                // identity and counterexample do not depend on C
                if c != grid.cs[0] {
                    cell.retain(|r| r.edge_case == EdgeCase::Constant);
                }
                out.extend(cell);
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lp_examples() {
        let r = lp_constant_edge(2, 0.0).unwrap();
        assert!((r.numeric_value - 1.386).abs() < 1e-3);
        assert!(r.passed());
        let r = lp_constant_edge(12, 20.0).unwrap();
        assert!(r.numeric_value < 3e-7 && r.passed(), "{r:?}");
        for k in 2..=16 {
            assert!(lp_constant_closed_form(k, 10.0) > lp_constant_closed_form(k, 11.0));
        }
    }

    #[test]
    fn lc_examples() {
        let r = lc_identity_edge(2, 1.0).unwrap();
        assert!((r.numeric_value - 2.205).abs() < 1e-3 && r.passed(), "{r:?}");
        let r = lc_identity_edge(1, 0.3).unwrap();
        assert_eq!(r.numeric_value, 0.0);
        assert!(r.passed());
    }

    #[test]
    fn dcl_suite_examples() {
        let reports = dcl_edge_suite(2, 5.0, 1.0, 7).unwrap();
        assert_eq!(reports.len(), 3);
        assert!((reports[0].numeric_value - 1.386).abs() < 1e-3);
        assert!((reports[1].numeric_value - 0.627).abs() < 1e-3);
        assert!(reports.iter().all(|r| r.passed()), "{reports:?}");
    }

    #[test]
    fn constant_case_gradients_stay_away_from_zero() {
        for seed in 0..20 {
            let r = dcl_edge_suite(3, 5.0, 1.0, seed).unwrap();
            let constant = r.last().unwrap();
            assert!(constant.gradient_norm > GRADIENT_FLOOR && constant.passed());
        }
    }

    #[test]
    fn default_grid_passes() {
        let reports = verify_grid(&TheoryGrid::default()).unwrap();
        let failed: Vec<_> = reports.iter().filter(|r| !r.passed()).collect();
        assert!(failed.is_empty(), "{failed:?}");
    }
}
