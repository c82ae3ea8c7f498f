use std::fmt::Write as _;

use nalgebra::DVector;
use serde::Serialize;

use crate::distributed::{run_to_convergence_with, Schedule, DEFAULT_TOL};
use crate::error::{Error, Result};
use crate::par::Exec;
use crate::pfsa::io::PfsaDocument;
use crate::pfsa::{cesaro_limit, controlled_matrix, policy_measure, DisablingSet, Pfsa};
use crate::supervisor::{
    brute_force_optimal_with, optimal_supervisor, policy_iteration, select_theta,
    BRUTE_FORCE_LIMIT, UTOPIAN_THETA,
};
use crate::swarm_graph::NetworkPfsa;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompareRow {
    pub name: &'static str,
    /// Why the row could not be computed, if it could not.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub skipped: Option<String>,
    pub policy_size: Option<usize>,
    pub measure_norm: Option<f64>,
    pub rho_norm: Option<f64>,
    pub measure: Vec<f64>,
    pub rho: Vec<f64>,
}

impl CompareRow {
    fn skipped(name: &'static str, why: impl Into<String>) -> Self {
        CompareRow {
            name,
            skipped: Some(why.into()),
            policy_size: None,
            measure_norm: None,
            rho_norm: None,
            measure: Vec::new(),
            rho: Vec::new(),
        }
    }

    fn available(&self) -> bool {
        self.skipped.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairDelta {
    pub a: &'static str,
    pub b: &'static str,
    pub measure: f64,
    pub rho: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompareReport {
    pub theta: f64,
    pub epsilon: Option<f64>,
    pub rows: Vec<CompareRow>,
    pub deltas: Vec<PairDelta>,
    /// Distance of the first available row's performance from the utopian one.
    pub utopian_gap: Option<f64>,
}

impl CompareReport {
    pub fn row(&self, name: &str) -> Option<&CompareRow> {
        self.rows.iter().find(|r| r.name == name && r.available())
    }

    pub fn max_rho_delta(&self) -> f64 {
        self.deltas.iter().map(|d| d.rho).fold(0.0, f64::max)
    }

    pub fn max_measure_delta(&self) -> f64 {
        self.deltas.iter().map(|d| d.measure).fold(0.0, f64::max)
    }
}

/// Limiting performance `P chi` of the chain under `policy`.
pub fn performance(pfsa: &Pfsa, policy: &DisablingSet) -> Result<DVector<f64>> {
    let limit = cesaro_limit(&controlled_matrix(pfsa, policy)?)?;
    Ok(limit * pfsa.characteristic())
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .fold(0.0, |m, (x, y)| f64::max(m, (x - y).abs()))
}

fn row(
    name: &'static str,
    pfsa: &Pfsa,
    policy: &DisablingSet,
    measure: &DVector<f64>,
) -> Result<CompareRow> {
    let rho = performance(pfsa, policy)?;
    Ok(CompareRow {
        name,
        skipped: None,
        policy_size: Some(policy.len()),
        measure_norm: Some(measure.amax()),
        rho_norm: Some(rho.amax()),
        measure: measure.as_slice().to_vec(),
        rho: rho.as_slice().to_vec(),
    })
}

/// Most symbols with positive probability at any one state.
pub fn alphabet_bound(pfsa: &Pfsa) -> usize {
    (0..pfsa.n_states())
        .map(|q| pfsa.outgoing(q).filter(|&(_, _, p)| p > 0.0).count())
        .max()
        .unwrap_or(1)
}

/// `theta` given directly, or chosen from `epsilon` and the alphabet bound.
pub fn resolve_theta(pfsa: &Pfsa, theta: Option<f64>, epsilon: Option<f64>) -> Result<f64> {
    match (theta, epsilon) {
        (Some(t), _) if t > 0.0 && t < 1.0 => Ok(t),
        (Some(t), _) => Err(Error::config("theta", format!("{t} must lie in (0, 1)"))),
        (None, Some(e)) if e > 0.0 && e < 1.0 => Ok(select_theta(e, alphabet_bound(pfsa))),
        (None, Some(e)) => Err(Error::config("epsilon", format!("{e} must lie in (0, 1)"))),
        (None, None) => Err(Error::config(
            "theta",
            "either theta or epsilon is required",
        )),
    }
}

/// Distributed, centralized, brute-force and policy-iteration solutions side by side.
///
/// The distributed row needs role annotations in the document; the
/// brute-force row needs at most [`BRUTE_FORCE_LIMIT`] controllable transitions.
pub fn compare(
    doc: &PfsaDocument,
    theta: f64,
    epsilon: Option<f64>,
    exec: Exec,
) -> Result<CompareReport> {
    let pfsa = &doc.pfsa;
    pfsa.validate()?;
    let mut rows = Vec::new();

    rows.push(match &doc.roles {
        Some(_) => {
            let net = NetworkPfsa::from_document(doc)?;
            let chi: Vec<f64> = (0..net.network.n_agents())
                .map(|i| net.network.chi(i))
                .collect();
            let rep = run_to_convergence_with(
                &net,
                theta,
                Schedule::synchronized(),
                DEFAULT_TOL,
                Some(&chi),
                exec,
            )?;
            row("distributed", pfsa, &rep.policy, &rep.measure.values)?
        }
        None => CompareRow::skipped("distributed", "no agent/virtual/dump annotations"),
    });

    let central = optimal_supervisor(pfsa, theta)?;
    rows.push(row(
        "centralized",
        pfsa,
        &central.policy,
        &central.measure.values,
    )?);

    let n_controllable = pfsa.controllable().len();
    let brute_ok = n_controllable <= BRUTE_FORCE_LIMIT;
    rows.push(if brute_ok {
        let b = brute_force_optimal_with(pfsa, theta, exec)?;
        row("brute-force", pfsa, &b.policy, &b.measure.values)?
    } else {
        CompareRow::skipped(
            "brute-force",
            format!("{n_controllable} controllable transitions exceed {BRUTE_FORCE_LIMIT}"),
        )
    });

    let pi = policy_iteration(pfsa, 1.0 - theta)?;
    let pi_policy = pi.policy.clone();
    let pi_measure = policy_measure(pfsa, &pi_policy, theta)?;
    rows.push(row(
        "policy-iteration",
        pfsa,
        &pi_policy,
        &pi_measure.values,
    )?);

    let mut deltas = Vec::new();
    for (k, a) in rows.iter().enumerate() {
        for b in rows.iter().skip(k + 1) {
            if a.available() && b.available() {
                deltas.push(PairDelta {
                    a: a.name,
                    b: b.name,
                    measure: max_diff(&a.measure, &b.measure),
                    rho: max_diff(&a.rho, &b.rho),
                });
            }
        }
    }

    let utopian_gap = if brute_ok {
        let u = brute_force_optimal_with(pfsa, UTOPIAN_THETA, exec)?;
        let rho_u = performance(pfsa, &u.policy)?;
        let first = rows
            .iter()
            .find(|r| r.available())
            .expect("centralized row is always present");
        Some(max_diff(&first.rho, rho_u.as_slice()))
    } else {
        None
    };

    Ok(CompareReport {
        theta,
        epsilon,
        rows,
        deltas,
        utopian_gap,
    })
}

/// Plain-text table of a comparison.
pub fn render_compare(report: &CompareReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "theta = {:e}", report.theta);
    let _ = writeln!(
        s,
        "{:<18} {:>8} {:>14} {:>14}",
        "solver", "|D|", "|nu|_inf", "|rho|_inf"
    );
    for r in &report.rows {
        match (&r.skipped, r.policy_size, r.measure_norm, r.rho_norm) {
            (None, Some(d), Some(m), Some(p)) => {
                let _ = writeln!(s, "{:<18} {:>8} {:>14.9} {:>14.9}", r.name, d, m, p);
            }
            (why, ..) => {
                let _ = writeln!(
                    s,
                    "{:<18} {:>8} ({})",
                    r.name,
                    "n/a",
                    why.as_deref().unwrap_or("")
                );
            }
        }
    }
    for d in &report.deltas {
        let _ = writeln!(
            s,
            "max |{} - {}|: nu {:.3e}, rho {:.3e}",
            d.a, d.b, d.measure, d.rho
        );
    }
    if let Some(g) = report.utopian_gap {
        let verdict = match report.epsilon {
            Some(e) if g <= e => format!(" <= epsilon = {e}"),
            Some(e) => format!(" > epsilon = {e}"),
            None => String::new(),
        };
        let _ = writeln!(s, "|rho - rho_utopian|_inf = {g:.3e}{verdict}");
    }
    s
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleReport {
    pub theta: f64,
    pub candidates: usize,
    pub policy: Vec<(usize, usize)>,
    pub measure: Vec<f64>,
    pub rho: Vec<f64>,
}

/// Exhaustive optimum of a serialized PFSA.
pub fn oracle(pfsa: &Pfsa, theta: f64, exec: Exec) -> Result<OracleReport> {
    pfsa.validate()?;
    let b = brute_force_optimal_with(pfsa, theta, exec)?;
    let rho = performance(pfsa, &b.policy)?;
    Ok(OracleReport {
        theta,
        candidates: b.iterations,
        policy: b.policy.iter().copied().collect(),
        measure: b.measure.values.as_slice().to_vec(),
        rho: rho.as_slice().to_vec(),
    })
}

pub fn render_oracle(report: &OracleReport) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "theta = {:e}, {} candidate policies",
        report.theta, report.candidates
    );
    let _ = writeln!(s, "disabled (state, symbol): {:?}", report.policy);
    let _ = writeln!(s, "{:>6} {:>16} {:>16}", "state", "nu", "rho");
    for (q, (m, r)) in report.measure.iter().zip(&report.rho).enumerate() {
        let _ = writeln!(s, "{q:>6} {m:>16.12} {r:>16.12}");
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::swarm_graph::{FrozenNetwork, Link};

    fn chain() -> NetworkPfsa {
        // A - B - T on a line
        let l = |to| Link { to, lambda: 0.1 };
        let net = FrozenNetwork {
            neighbors: vec![vec![l(1)], vec![l(0), l(2)], vec![l(1)]],
            target: vec![false, false, true],
            chi_dump: 0.0,
        };
        NetworkPfsa::from_frozen(&net).unwrap()
    }

    #[test]
    fn chain_rows_agree() {
        let net = chain();
        let r = compare(&net.document(), 0.01, Some(0.05), Exec::Sequential).unwrap();
        assert_eq!(r.rows.iter().filter(|r| r.available()).count(), 4);
        assert!(r.max_rho_delta() <= 1e-7, "{}", render_compare(&r));
        assert!(r.utopian_gap.unwrap() <= 0.05);
        let text = render_compare(&r);
        assert!(text.contains("policy-iteration"));
    }

    #[test]
    fn unannotated_pfsa_skips_distributed() {
        let net = chain();
        let doc = PfsaDocument {
            pfsa: net.pfsa.clone(),
            roles: None,
        };
        let r = compare(&doc, 0.01, None, Exec::Sequential).unwrap();
        assert!(r.row("distributed").is_none());
        assert!(render_compare(&r).contains("n/a"));
    }

    #[test]
    fn uncontrollable_pfsa_rows_coincide() {
        let mut p = Pfsa::empty(2, 1);
        p.set_transition(0, 0, 1, 1.0, false).unwrap();
        p.set_transition(1, 0, 1, 1.0, false).unwrap();
        p.set_characteristic(1, 1.0);
        let doc = PfsaDocument {
            pfsa: p,
            roles: None,
        };
        let r = compare(&doc, 0.1, None, Exec::Sequential).unwrap();
        assert_eq!(r.max_rho_delta(), 0.0);
        assert_eq!(r.max_measure_delta(), 0.0);
        assert!(r
            .rows
            .iter()
            .filter(|r| r.available())
            .all(|r| r.policy_size == Some(0)));
    }

    #[test]
    fn oracle_matches_centralized() {
        let net = chain();
        let o = oracle(&net.pfsa, 0.01, Exec::Sequential).unwrap();
        let c = optimal_supervisor(&net.pfsa, 0.01).unwrap();
        assert!(max_diff(&o.measure, c.measure.values.as_slice()) < 1e-12);
        assert!(render_oracle(&o).contains("candidate policies"));
    }
}
