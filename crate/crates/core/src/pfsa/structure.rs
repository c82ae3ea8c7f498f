use std::collections::VecDeque;

use super::cesaro::reaches_absorbing;
use super::TransitionMatrix;
use crate::error::{Error, Result};

/// Outcome of the strongly-absorbing test, naming the violated condition.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SaCertificate {
    StronglyAbsorbing,
    NoAbsorbingState,
    /// This state cannot reach any absorbing state.
    Unreachable(usize),
    /// These states lie on a directed cycle of distinct states.
    Cycle(Vec<usize>),
}

impl SaCertificate {
    pub fn holds(&self) -> bool {
        matches!(self, SaCertificate::StronglyAbsorbing)
    }
}

/// Absorbing states exist, every state reaches one, and apart from
/// self-loops the transition graph is acyclic.
pub fn is_strongly_absorbing(pi: &TransitionMatrix) -> SaCertificate {
    let m = pi.matrix();
    let n = m.nrows();
    let absorbing: Vec<bool> = (0..n).map(|i| m[(i, i)] >= 1.0 - 1e-12).collect();
    if !absorbing.iter().any(|&a| a) {
        return SaCertificate::NoAbsorbingState;
    }
    if let Some(i) = reaches_absorbing(m, &absorbing).iter().position(|r| !r) {
        return SaCertificate::Unreachable(i);
    }

    // Kahn's algorithm on the graph without self-loops
    let mut indegree = vec![0usize; n];
    for i in 0..n {
        for j in 0..n {
            if i != j && m[(i, j)] > 0.0 {
                indegree[j] += 1;
            }
        }
    }
    let mut queue: VecDeque<usize> = (0..n).filter(|&i| indegree[i] == 0).collect();
    let mut removed = 0;
    while let Some(i) = queue.pop_front() {
        removed += 1;
        for j in 0..n {
            if i != j && m[(i, j)] > 0.0 {
                indegree[j] -= 1;
                if indegree[j] == 0 {
                    queue.push_back(j);
                }
            }
        }
    }
    if removed < n {
        // drop residual states that only lead out of the cyclic core
        let mut alive: Vec<bool> = indegree.iter().map(|&d| d > 0).collect();
        loop {
            let dead: Vec<usize> = (0..n)
                .filter(|&i| alive[i] && !(0..n).any(|j| j != i && alive[j] && m[(i, j)] > 0.0))
                .collect();
            if dead.is_empty() {
                break;
            }
            for i in dead {
                alive[i] = false;
            }
        }
        return SaCertificate::Cycle((0..n).filter(|&i| alive[i]).collect());
    }
    SaCertificate::StronglyAbsorbing
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralBound {
    /// Largest magnitude among eigenvalues not equal to one.
    pub max_nonunity_eigenvalue: f64,
    /// Largest diagonal entry strictly below one (zero if there is none).
    pub max_nonunity_diagonal: f64,
    pub holds: bool,
}

/// Eigenvalues closer than this to 1 count as unity.
const UNITY_EPS: f64 = 1e-9;

/// Compares the non-unity spectrum of a strongly absorbing matrix with its
/// largest non-unity self-loop probability.
pub fn spectral_bound_check(pi: &TransitionMatrix) -> Result<SpectralBound> {
    let cert = is_strongly_absorbing(pi);
    if !cert.holds() {
        return Err(Error::NotStronglyAbsorbing(format!("{cert:?}")));
    }
    let m = pi.matrix();
    let max_nonunity_diagonal = m
        .diagonal()
        .iter()
        .copied()
        .filter(|&d| d < 1.0 - 1e-12)
        .fold(0.0, f64::max);
    let eigen = m.clone().complex_eigenvalues();
    let max_nonunity_eigenvalue = eigen
        .iter()
        .filter(|z| (*z - nalgebra::Complex::new(1.0, 0.0)).norm() > UNITY_EPS)
        .map(|z| z.norm())
        .fold(0.0, f64::max);
    Ok(SpectralBound {
        max_nonunity_eigenvalue,
        max_nonunity_diagonal,
        holds: max_nonunity_eigenvalue <= max_nonunity_diagonal + 1e-9,
    })
}
