use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};

use super::TransitionMatrix;
use crate::error::{Error, Result};

/// Elementwise tolerance for the Cesaro limit and its stationarity check.
pub const CESARO_TOLERANCE: f64 = 1e-9;

const ABSORBING_EPS: f64 = 1e-12;
const MAX_DOUBLINGS: usize = 64;

fn absorbing_states(pi: &DMatrix<f64>) -> Vec<bool> {
    (0..pi.nrows())
        .map(|i| pi[(i, i)] >= 1.0 - ABSORBING_EPS)
        .collect()
}

/// States from which some absorbing state is reachable.
pub(crate) fn reaches_absorbing(pi: &DMatrix<f64>, absorbing: &[bool]) -> Vec<bool> {
    let n = pi.nrows();
    let mut seen = absorbing.to_vec();
    let mut queue: VecDeque<usize> = (0..n).filter(|&i| absorbing[i]).collect();
    while let Some(j) = queue.pop_front() {
        for i in 0..n {
            if !seen[i] && pi[(i, j)] > 0.0 {
                seen[i] = true;
                queue.push_back(i);
            }
        }
    }
    seen
}

/// Absorption probabilities of an absorbing chain, laid out as a full
/// `n x n` matrix (non-zero only in absorbing columns). Returns `None` when
/// some state cannot reach an absorbing state.
pub fn absorption_matrix(pi: &TransitionMatrix) -> Result<Option<DMatrix<f64>>> {
    let m = pi.matrix();
    let n = m.nrows();
    let absorbing = absorbing_states(m);
    if !absorbing.iter().any(|&a| a) || !reaches_absorbing(m, &absorbing).iter().all(|&r| r) {
        return Ok(None);
    }
    let transient: Vec<usize> = (0..n).filter(|&i| !absorbing[i]).collect();
    let sinks: Vec<usize> = (0..n).filter(|&i| absorbing[i]).collect();
    let mut out = DMatrix::zeros(n, n);
    for &a in &sinks {
        out[(a, a)] = 1.0;
    }
    if transient.is_empty() {
        return Ok(Some(out));
    }
    let t = transient.len();
    let i_minus_q = DMatrix::from_fn(t, t, |r, c| {
        let id = if r == c { 1.0 } else { 0.0 };
        id - m[(transient[r], transient[c])]
    });
    let r_block = DMatrix::from_fn(t, sinks.len(), |r, c| m[(transient[r], sinks[c])]);
    let b = i_minus_q
        .lu()
        .solve(&r_block)
        .ok_or(Error::Singular("absorption probabilities"))?;
    for (r, &i) in transient.iter().enumerate() {
        for (c, &a) in sinks.iter().enumerate() {
            out[(i, a)] = b[(r, c)];
        }
    }
    Ok(Some(out))
}

/// `lim (1/k) sum_{j<k} Pi^j` by doubling the horizon until successive
/// averages agree to [`CESARO_TOLERANCE`].
pub fn cesaro_power_average(pi: &TransitionMatrix) -> Result<DMatrix<f64>> {
    let n = pi.dim();
    let mut avg = DMatrix::<f64>::identity(n, n);
    let mut power = pi.matrix().clone();
    let mut residual = f64::INFINITY;
    for _ in 0..MAX_DOUBLINGS {
        let next = (&avg + &power * &avg) * 0.5;
        residual = (&next - &avg).amax();
        avg = next;
        if residual < CESARO_TOLERANCE {
            return Ok(avg);
        }
        power = &power * &power;
    }
    Err(Error::NonConvergence {
        what: "Cesaro averaging",
        iterations: MAX_DOUBLINGS,
        residual,
    })
}

/// Cesaro limit of a stochastic matrix; exact for absorbing chains.
pub fn cesaro_limit(pi: &TransitionMatrix) -> Result<DMatrix<f64>> {
    let limit = match absorption_matrix(pi)? {
        Some(exact) => exact,
        None => cesaro_power_average(pi)?,
    };
    let stationarity = (&limit * pi.matrix() - &limit).amax();
    let row_err = limit
        .row_iter()
        .map(|r| (r.sum() - 1.0).abs())
        .fold(0.0, f64::max);
    let residual = stationarity.max(row_err);
    if residual > CESARO_TOLERANCE {
        return Err(Error::NonConvergence {
            what: "Cesaro limit check",
            iterations: 0,
            residual,
        });
    }
    Ok(limit)
}

/// Probability, from each state, of being absorbed at one of `targets`.
pub fn stationary_performance(pi: &TransitionMatrix, targets: &[usize]) -> Result<DVector<f64>> {
    let n = pi.dim();
    if let Some(&t) = targets.iter().find(|&&t| t >= n) {
        return Err(Error::InvalidArgument(format!("target {t} out of range")));
    }
    let limit = cesaro_limit(pi)?;
    Ok(DVector::from_fn(n, |i, _| {
        targets.iter().map(|&t| limit[(i, t)]).sum()
    }))
}
