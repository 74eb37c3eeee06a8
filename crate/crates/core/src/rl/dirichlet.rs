//! Dirichlet distribution over space-charge nodes: sampling through gamma
//! draws, closed-form log density, and its gradient in the concentration
//! parameters.

use rand::Rng;
use rand_distr::{Distribution, Gamma};
use statrs::function::gamma::{digamma, ln_gamma};
use thiserror::Error;

/// Samples below this are clamped so the log density stays finite.
const SIMPLEX_FLOOR: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum DirichletError {
    #[error("concentration parameters must be positive, got {0}")]
    NonPositiveAlpha(f64),
    #[error("need at least two components")]
    TooFew,
}

fn validate(alpha: &[f64]) -> Result<(), DirichletError> {
    if alpha.len() < 2 {
        return Err(DirichletError::TooFew);
    }
    for &a in alpha {
        if !(a > 0.0) || !a.is_finite() {
            return Err(DirichletError::NonPositiveAlpha(a));
        }
    }
    Ok(())
}

/// Draws a point on the simplex via normalized gamma variates.
pub fn sample(alpha: &[f64], rng: &mut impl Rng) -> Result<Vec<f64>, DirichletError> {
    validate(alpha)?;
    let mut draws: Vec<f64> = alpha
        .iter()
        .map(|&a| Gamma::new(a, 1.0).expect("positive shape").sample(rng))
        .collect();
    let mut total: f64 = draws.iter().sum();
    if total <= 0.0 {
        // All-zero gammas can occur for tiny shapes; fall back to uniform.
        draws = vec![1.0; alpha.len()];
        total = alpha.len() as f64;
    }
    for d in draws.iter_mut() {
        *d = (*d / total).max(SIMPLEX_FLOOR);
    }
    let renorm: f64 = draws.iter().sum();
    for d in draws.iter_mut() {
        *d /= renorm;
    }
    Ok(draws)
}

/// Mean of the distribution, used for deterministic evaluation.
pub fn mean(alpha: &[f64]) -> Vec<f64> {
    let total: f64 = alpha.iter().sum();
    alpha.iter().map(|&a| a / total).collect()
}

/// log Dir(x | alpha) = log G(sum a) - sum log G(a_i) + sum (a_i - 1) log x_i.
pub fn log_prob(alpha: &[f64], x: &[f64]) -> Result<f64, DirichletError> {
    validate(alpha)?;
    assert_eq!(alpha.len(), x.len());
    let total: f64 = alpha.iter().sum();
    let mut lp = ln_gamma(total);
    for (&a, &xi) in alpha.iter().zip(x) {
        lp -= ln_gamma(a);
        lp += (a - 1.0) * xi.max(SIMPLEX_FLOOR).ln();
    }
    Ok(lp)
}

/// d log Dir(x | alpha) / d alpha_i = psi(sum a) - psi(a_i) + log x_i.
pub fn log_prob_grad_alpha(alpha: &[f64], x: &[f64]) -> Result<Vec<f64>, DirichletError> {
    validate(alpha)?;
    assert_eq!(alpha.len(), x.len());
    let total: f64 = alpha.iter().sum();
    let psi_total = digamma(total);
    Ok(alpha
        .iter()
        .zip(x)
        .map(|(&a, &xi)| psi_total - digamma(a) + xi.max(SIMPLEX_FLOOR).ln())
        .collect())
}
