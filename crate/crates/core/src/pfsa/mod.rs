//! Probabilistic finite state automata and their language measure.
//!
//! States and symbols are dense indices `0..n` and `0..k`. A [`Pfsa`] holds
//! the (partial) transition map, the morph matrix of symbol generation
//! probabilities, the per-state characteristic weights and the set of
//! controllable `(state, symbol)` pairs.

mod cesaro;
pub mod io;
mod structure;

use std::collections::BTreeSet;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub use cesaro::{
    absorption_matrix, cesaro_limit, cesaro_power_average, stationary_performance, CESARO_TOLERANCE,
};
pub use structure::{is_strongly_absorbing, spectral_bound_check, SaCertificate, SpectralBound};

/// Tolerance on morph row sums.
pub const ROW_SUM_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct Pfsa {
    n_states: usize,
    n_symbols: usize,
    /// Row-major `n_states x n_symbols`; `None` marks an undefined transition.
    transitions: Vec<Option<usize>>,
    morph: DMatrix<f64>,
    characteristic: DVector<f64>,
    controllable: BTreeSet<(usize, usize)>,
}

impl Pfsa {
    /// An automaton with every transition undefined and zero characteristic.
    /// Fill it with [`Pfsa::set_transition`] and finish with [`Pfsa::validate`].
    pub fn empty(n_states: usize, n_symbols: usize) -> Self {
        Pfsa {
            n_states,
            n_symbols,
            transitions: vec![None; n_states * n_symbols],
            morph: DMatrix::zeros(n_states, n_symbols),
            characteristic: DVector::zeros(n_states),
            controllable: BTreeSet::new(),
        }
    }

    pub fn set_transition(
        &mut self,
        state: usize,
        symbol: usize,
        dest: usize,
        prob: f64,
        controllable: bool,
    ) -> Result<()> {
        if state >= self.n_states || dest >= self.n_states || symbol >= self.n_symbols {
            return Err(Error::MalformedPfsa(format!(
                "transition ({state}, {symbol}) -> {dest} out of range"
            )));
        }
        self.transitions[state * self.n_symbols + symbol] = Some(dest);
        self.morph[(state, symbol)] = prob;
        if controllable {
            self.controllable.insert((state, symbol));
        } else {
            self.controllable.remove(&(state, symbol));
        }
        Ok(())
    }

    pub fn set_characteristic(&mut self, state: usize, value: f64) {
        self.characteristic[state] = value;
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_symbols(&self) -> usize {
        self.n_symbols
    }

    pub fn transition(&self, state: usize, symbol: usize) -> Option<usize> {
        self.transitions[state * self.n_symbols + symbol]
    }

    pub fn morph(&self) -> &DMatrix<f64> {
        &self.morph
    }

    pub fn prob(&self, state: usize, symbol: usize) -> f64 {
        self.morph[(state, symbol)]
    }

    pub fn characteristic(&self) -> &DVector<f64> {
        &self.characteristic
    }

    pub fn controllable(&self) -> &BTreeSet<(usize, usize)> {
        &self.controllable
    }

    pub fn is_controllable(&self, state: usize, symbol: usize) -> bool {
        self.controllable.contains(&(state, symbol))
    }

    /// Defined transitions out of `state` as `(symbol, dest, prob)`.
    pub fn outgoing(&self, state: usize) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n_symbols).filter_map(move |s| {
            self.transition(state, s)
                .map(|d| (s, d, self.morph[(state, s)]))
        })
    }

    /// Checks the structural invariants; errors name the first offending entry.
    pub fn validate(&self) -> Result<()> {
        for q in 0..self.n_states {
            let mut sum = 0.0;
            for s in 0..self.n_symbols {
                let p = self.morph[(q, s)];
                if !(0.0..=1.0).contains(&p) {
                    return Err(Error::MalformedPfsa(format!(
                        "morph entry ({q}, {s}) = {p} outside [0, 1]"
                    )));
                }
                match self.transition(q, s) {
                    Some(_) => sum += p,
                    None if p != 0.0 => {
                        return Err(Error::MalformedPfsa(format!(
                            "undefined transition ({q}, {s}) carries probability {p}"
                        )))
                    }
                    None => {}
                }
            }
            if (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
                return Err(Error::MalformedPfsa(format!("morph row {q} sums to {sum}")));
            }
            let chi = self.characteristic[q];
            if !(-1.0..=1.0).contains(&chi) {
                return Err(Error::MalformedPfsa(format!(
                    "characteristic of state {q} = {chi} outside [-1, 1]"
                )));
            }
        }
        for &(q, s) in &self.controllable {
            if self.transition(q, s).is_none() {
                return Err(Error::MalformedPfsa(format!(
                    "controllable pair ({q}, {s}) has no transition"
                )));
            }
        }
        Ok(())
    }
}

/// Row-stochastic state transition matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix(DMatrix<f64>);

impl TransitionMatrix {
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::NotStochastic(format!(
                "{}x{} is not square",
                m.nrows(),
                m.ncols()
            )));
        }
        for (i, row) in m.row_iter().enumerate() {
            if let Some(v) = row.iter().find(|v| v.is_nan() || **v < 0.0) {
                return Err(Error::NotStochastic(format!("row {i} has entry {v}")));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
                return Err(Error::NotStochastic(format!("row {i} sums to {sum}")));
            }
        }
        Ok(TransitionMatrix(m))
    }

    pub fn from_rows(rows: &[&[f64]]) -> Result<Self> {
        let n = rows.len();
        let m = DMatrix::from_fn(n, n, |i, j| rows[i].get(j).copied().unwrap_or(f64::NAN));
        Self::new(m)
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }
}

/// Language measure of every state at a given `theta`.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasureVector {
    pub values: DVector<f64>,
    pub theta: f64,
}

impl MeasureVector {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, i: usize) -> f64 {
        self.values[i]
    }

    /// Sup-norm distance to another measure vector.
    pub fn max_abs_diff(&self, other: &MeasureVector) -> f64 {
        max_abs_diff(self.values.as_slice(), other.values.as_slice())
    }

    /// True when every entry is at least the corresponding entry of `other` minus `tol`.
    pub fn dominates(&self, other: &MeasureVector, tol: f64) -> bool {
        self.values
            .iter()
            .zip(other.values.iter())
            .all(|(a, b)| *a >= *b - tol)
    }
}

pub(crate) fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Set of disabled controllable `(state, symbol)` pairs.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct DisablingSet(pub BTreeSet<(usize, usize)>);

impl DisablingSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, state: usize, symbol: usize) -> bool {
        self.0.contains(&(state, symbol))
    }

    pub fn insert(&mut self, state: usize, symbol: usize) -> bool {
        self.0.insert((state, symbol))
    }

    pub fn iter(&self) -> impl Iterator<Item = &(usize, usize)> {
        self.0.iter()
    }
}

impl FromIterator<(usize, usize)> for DisablingSet {
    fn from_iter<I: IntoIterator<Item = (usize, usize)>>(iter: I) -> Self {
        DisablingSet(iter.into_iter().collect())
    }
}

/// `Pi[i][j]` sums the generation probabilities of all symbols leading from `i` to `j`.
pub fn build_transition_matrix(pfsa: &Pfsa) -> Result<TransitionMatrix> {
    pfsa.validate()?;
    let n = pfsa.n_states();
    let mut m = DMatrix::zeros(n, n);
    for q in 0..n {
        for (_, dest, p) in pfsa.outgoing(q) {
            m[(q, dest)] += p;
        }
    }
    TransitionMatrix::new(m)
}

/// Solves `(I - (1 - theta) Pi) nu = theta chi`.
pub fn compute_measure(
    pi: &TransitionMatrix,
    chi: &DVector<f64>,
    theta: f64,
) -> Result<MeasureVector> {
    if !(theta > 0.0 && theta < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "theta = {theta} must lie in (0, 1)"
        )));
    }
    let n = pi.dim();
    if chi.len() != n {
        return Err(Error::InvalidArgument(format!(
            "characteristic has length {} but matrix is {n}x{n}",
            chi.len()
        )));
    }
    // (I - Pi) + theta Pi keeps absorbing rows exact for small theta
    let a = DMatrix::identity(n, n) - pi.matrix() + pi.matrix() * theta;
    let rhs = chi * theta;
    let values = a
        .clone()
        .lu()
        .solve(&rhs)
        .ok_or(Error::Singular("compute_measure"))?;
    let residual = (&a * &values - &rhs).amax();
    if residual > 1e-10 * (n.max(1) as f64) {
        return Err(Error::NonConvergence {
            what: "measure solve",
            iterations: 1,
            residual,
        });
    }
    Ok(MeasureVector { values, theta })
}

/// Redirects every disabled transition to a self-loop with the same probability.
pub fn apply_policy(pfsa: &Pfsa, disabled: &DisablingSet) -> Result<Pfsa> {
    let mut out = pfsa.clone();
    for &(q, s) in disabled.iter() {
        if !pfsa.is_controllable(q, s) {
            return Err(Error::InvalidArgument(format!(
                "cannot disable uncontrollable transition ({q}, {s})"
            )));
        }
        out.transitions[q * pfsa.n_symbols + s] = Some(q);
    }
    Ok(out)
}

/// Transition matrix of the plant under a disabling policy.
pub fn controlled_matrix(pfsa: &Pfsa, disabled: &DisablingSet) -> Result<TransitionMatrix> {
    build_transition_matrix(&apply_policy(pfsa, disabled)?)
}

/// Measure of the plant under a disabling policy.
pub fn policy_measure(pfsa: &Pfsa, disabled: &DisablingSet, theta: f64) -> Result<MeasureVector> {
    let pi = controlled_matrix(pfsa, disabled)?;
    compute_measure(&pi, pfsa.characteristic(), theta)
}
