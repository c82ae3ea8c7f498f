//! Flat text serialization of a [`Pfsa`].
//!
//! ```text
//! pfsa <n_states> <n_symbols>
//! chi <state> <value>
//! t <source> <symbol> <destination> <probability> <c|u>
//! ```
//!
//! Optional role records describe a swarm network so that the distributed
//! solver can be run on a loaded file:
//!
//! ```text
//! agent <state> <is_target: 0|1>
//! virtual <state> <from_state> <to_state>
//! dump <state>
//! ```
//!
//! Blank lines and lines starting with `#` are ignored.

use std::fmt::Write as _;
use std::path::Path;

use super::Pfsa;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StateRole {
    Agent { target: bool },
    Virtual { from: usize, to: usize },
    Dump,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PfsaDocument {
    pub pfsa: Pfsa,
    /// Present only when every state carries a role record.
    pub roles: Option<Vec<StateRole>>,
}

pub fn write_pfsa(pfsa: &Pfsa, roles: Option<&[StateRole]>) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "pfsa {} {}", pfsa.n_states(), pfsa.n_symbols());
    for (q, chi) in pfsa.characteristic().iter().enumerate() {
        let _ = writeln!(out, "chi {q} {chi}");
    }
    for q in 0..pfsa.n_states() {
        for (s, d, p) in pfsa.outgoing(q) {
            let flag = if pfsa.is_controllable(q, s) { 'c' } else { 'u' };
            let _ = writeln!(out, "t {q} {s} {d} {p} {flag}");
        }
    }
    if let Some(roles) = roles {
        for (q, role) in roles.iter().enumerate() {
            let _ = match role {
                StateRole::Agent { target } => writeln!(out, "agent {q} {}", u8::from(*target)),
                StateRole::Virtual { from, to } => writeln!(out, "virtual {q} {from} {to}"),
                StateRole::Dump => writeln!(out, "dump {q}"),
            };
        }
    }
    out
}

pub fn parse_pfsa(text: &str) -> Result<PfsaDocument> {
    let mut pfsa: Option<Pfsa> = None;
    let mut roles: Vec<Option<StateRole>> = Vec::new();
    let mut any_role = false;

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |msg: String| Error::Parse { line: line_no, msg };
        let fields: Vec<&str> = line.split_whitespace().collect();
        let num = |i: usize| -> Result<usize> {
            fields
                .get(i)
                .ok_or_else(|| err(format!("missing field {i}")))?
                .parse::<usize>()
                .map_err(|e| err(format!("field {i}: {e}")))
        };
        let real = |i: usize| -> Result<f64> {
            fields
                .get(i)
                .ok_or_else(|| err(format!("missing field {i}")))?
                .parse::<f64>()
                .map_err(|e| err(format!("field {i}: {e}")))
        };

        if fields[0] == "pfsa" {
            if pfsa.is_some() {
                return Err(err("duplicate header".into()));
            }
            let n = num(1)?;
            pfsa = Some(Pfsa::empty(n, num(2)?));
            roles = vec![None; n];
            continue;
        }
        let p = pfsa
            .as_mut()
            .ok_or_else(|| err("record before `pfsa` header".into()))?;
        let n = p.n_states();
        let state = num(1)?;
        if state >= n {
            return Err(err(format!("state {state} out of range")));
        }
        match fields[0] {
            "chi" => p.set_characteristic(state, real(2)?),
            "t" => {
                let controllable = match fields.get(5) {
                    Some(&"c") => true,
                    Some(&"u") => false,
                    other => return Err(err(format!("bad controllable flag {other:?}"))),
                };
                p.set_transition(state, num(2)?, num(3)?, real(4)?, controllable)
                    .map_err(|e| err(e.to_string()))?;
            }
            "agent" => {
                any_role = true;
                roles[state] = Some(StateRole::Agent {
                    target: num(2)? != 0,
                });
            }
            "virtual" => {
                any_role = true;
                let (from, to) = (num(2)?, num(3)?);
                if from >= n || to >= n {
                    return Err(err("virtual endpoints out of range".into()));
                }
                roles[state] = Some(StateRole::Virtual { from, to });
            }
            "dump" => {
                any_role = true;
                roles[state] = Some(StateRole::Dump);
            }
            other => return Err(err(format!("unknown record `{other}`"))),
        }
    }

    let pfsa = pfsa.ok_or(Error::Parse {
        line: 0,
        msg: "missing `pfsa` header".into(),
    })?;
    pfsa.validate()?;
    let roles = if any_role {
        let all: Option<Vec<StateRole>> = roles.into_iter().collect();
        Some(all.ok_or(Error::Parse {
            line: 0,
            msg: "role records must cover every state".into(),
        })?)
    } else {
        None
    };
    Ok(PfsaDocument { pfsa, roles })
}

pub fn read_pfsa_file(path: &Path) -> Result<PfsaDocument> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_pfsa(&text)
}

pub fn write_pfsa_file(path: &Path, pfsa: &Pfsa, roles: Option<&[StateRole]>) -> Result<()> {
    std::fs::write(path, write_pfsa(pfsa, roles)).map_err(|e| Error::io(path, e))
}
