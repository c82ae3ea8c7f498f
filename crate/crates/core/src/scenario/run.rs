use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::config::{FrozenInit, Mode, ScenarioConfig};
use super::placement::{place_swarm, Placement};
use crate::distributed::{
    agent_stationary_performance, default_epoch_cap, DistributedSolver, EpochTelemetry,
};
use crate::error::{Error, Result};
use crate::mobility::{
    best_neighbor, compute_metrics, run_process, AgentRow, MobileSwarmState, Process, SimTrace,
    TickRecord,
};
use crate::par::Exec;
use crate::pfsa::io::write_pfsa_file;
use crate::swarm_graph::NetworkPfsa;

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub exec: Exec,
    /// Also write the initial network as a PFSA file.
    pub pfsa_out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrozenSummary {
    pub epochs: usize,
    pub updates: u64,
    pub corrections: usize,
    /// Disabled agent links in the final policy.
    pub policy_size: usize,
    pub enabled_links: usize,
    pub measure_norm: f64,
    /// Largest and mean probability of reaching a target over mobile agents.
    pub rho_norm: f64,
    pub rho_mean: f64,
    pub rho_min: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    #[serde(rename = "T_conv")]
    pub t_conv: Option<f64>,
    pub final_fraction: f64,
    pub seed: u64,
    pub mode: Mode,
    pub n_agents: usize,
    pub r_c: f64,
    pub theta: f64,
    pub placement_attempts: usize,
    pub connected_at_start: bool,
    pub ticks: usize,
    pub decision_corrections: usize,
    pub invariant_violations: u64,
    pub separation_violations: u64,
    pub obstacle_violations: u64,
    pub measure_violations: u64,
    pub positivity_losses: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub frozen: Option<FrozenSummary>,
    pub config: ScenarioConfig,
}

/// Everything a run produces before it is written out.
#[derive(Debug, Clone)]
pub struct ScenarioOutput {
    pub summary: Summary,
    pub rows: Vec<AgentRow>,
    pub ticks: Vec<TickRecord>,
    pub epochs: Vec<EpochTelemetry>,
    pub trace: Option<SimTrace>,
    pub placement: Placement,
}

fn run_frozen(cfg: &ScenarioConfig, placement: &Placement, exec: Exec) -> Result<ScenarioOutput> {
    let net = &placement.network;
    let theta = placement.theta;
    let n = net.n_agents();
    let chi: Vec<f64> = (0..n).map(|i| net.chi(i)).collect();
    let init = match cfg.frozen_init {
        FrozenInit::Zero => None,
        FrozenInit::Chi => Some(chi.as_slice()),
    };
    let mut solver = DistributedSolver::new(net, theta, cfg.schedule(), init)?.with_exec(exec);
    let cap = cfg
        .max_epochs
        .unwrap_or_else(|| default_epoch_cap(theta, cfg.tol));
    let mut telemetry = Vec::new();
    let epochs = solver.run(cfg.tol, cap, Some(&mut telemetry))?;
    let measures = solver.measures().to_vec();
    let enabled = solver.enabled();
    let rho = agent_stationary_performance(net, &enabled, &measures);
    let swarm = &placement.swarm;
    let mobile: Vec<f64> = (0..n)
        .filter(|&i| swarm.counted(i))
        .map(|i| rho[i])
        .collect();
    let (policy_size, enabled_links) = (0..n)
        .filter(|&i| !net.target[i])
        .flat_map(|i| enabled[i].iter())
        .fold(
            (0, 0),
            |(d, e), &on| if on { (d, e + 1) } else { (d + 1, e) },
        );

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed_c401);
    let best: Vec<Option<usize>> = (0..n)
        .map(|i| {
            if swarm.target[i] || swarm.sharer[i] {
                None
            } else {
                best_neighbor(&net.neighbors[i], measures[i], &measures, &mut rng)
            }
        })
        .collect();
    let state = MobileSwarmState {
        positions: swarm.positions.clone(),
        target: swarm.target.clone(),
        sharer: swarm.sharer.clone(),
        reached: vec![false; n],
        time: 0.0,
        tick: 0,
        measures: measures.clone(),
        best: best.clone(),
        network: net.clone(),
    };
    let metrics = compute_metrics(&state, &cfg.extended_targets());
    let rows = (0..n)
        .map(|i| AgentRow {
            t: 0.0,
            agent_id: i,
            x: swarm.positions[i].x,
            y: swarm.positions[i].y,
            measure: measures[i],
            best_neighbor: best[i],
            reached: false,
        })
        .collect();
    let ticks = vec![TickRecord {
        t: 0.0,
        fraction_reached: metrics.fraction_reached,
        diameter: metrics.diameter,
        max_path_length: metrics.max_path_length(),
        max_hops: metrics.max_hops(),
        decision_corrections: solver.total_corrections(),
    }];
    let counters = solver.counters();
    let summary = Summary {
        t_conv: None,
        final_fraction: metrics.fraction_reached,
        seed: cfg.seed,
        mode: cfg.mode,
        n_agents: n,
        r_c: placement.r_c,
        theta,
        placement_attempts: placement.attempts,
        connected_at_start: placement.connected,
        ticks: 0,
        decision_corrections: solver.total_corrections(),
        invariant_violations: counters.total_violations(),
        separation_violations: 0,
        obstacle_violations: 0,
        measure_violations: counters.total_violations(),
        positivity_losses: 0,
        frozen: Some(FrozenSummary {
            epochs,
            updates: solver.updates(),
            corrections: solver.total_corrections(),
            policy_size,
            enabled_links,
            measure_norm: measures.iter().fold(0.0, |m, v| f64::max(m, v.abs())),
            rho_norm: mobile.iter().copied().fold(0.0, f64::max),
            rho_mean: if mobile.is_empty() {
                0.0
            } else {
                mobile.iter().sum::<f64>() / mobile.len() as f64
            },
            rho_min: mobile
                .iter()
                .copied()
                .fold(f64::INFINITY, f64::min)
                .min(1.0),
        }),
        config: cfg.clone(),
    };
    Ok(ScenarioOutput {
        summary,
        rows,
        ticks,
        epochs: telemetry,
        trace: None,
        placement: placement.clone(),
    })
}

fn run_mobile(cfg: &ScenarioConfig, placement: &Placement, exec: Exec) -> Result<ScenarioOutput> {
    let process = if cfg.mode == Mode::Ideal {
        Process::Ideal
    } else {
        Process::Real
    };
    let mcfg = cfg.mobility(placement.theta, exec);
    let mut trace = run_process(&mcfg, &placement.swarm, process)?;
    let c = trace.counters;
    let summary = Summary {
        t_conv: trace.t_conv(),
        final_fraction: trace.final_fraction(),
        seed: cfg.seed,
        mode: cfg.mode,
        n_agents: placement.swarm.n_agents(),
        r_c: placement.r_c,
        theta: placement.theta,
        placement_attempts: placement.attempts,
        connected_at_start: placement.connected,
        ticks: trace.ticks.len().saturating_sub(1),
        decision_corrections: trace.total_corrections(),
        invariant_violations: c.total_violations(),
        separation_violations: c.separation_violations,
        obstacle_violations: c.obstacle_violations,
        measure_violations: c.measure.total_violations(),
        positivity_losses: c.positivity_losses,
        frozen: None,
        config: cfg.clone(),
    };
    let rows = std::mem::take(&mut trace.rows);
    Ok(ScenarioOutput {
        summary,
        rows,
        ticks: trace.ticks.clone(),
        epochs: Vec::new(),
        trace: Some(trace),
        placement: placement.clone(),
    })
}

/// Runs the scenario in memory.
pub fn simulate(cfg: &ScenarioConfig, exec: Exec) -> Result<ScenarioOutput> {
    let placement = place_swarm(cfg)?;
    match cfg.mode {
        Mode::Frozen => run_frozen(cfg, &placement, exec),
        Mode::Real | Mode::Ideal => run_mobile(cfg, &placement, exec),
    }
}

#[derive(Serialize)]
struct TraceCsvRow {
    t: f64,
    agent_id: usize,
    x: f64,
    y: f64,
    measure: f64,
    best_neighbor_id: Option<usize>,
    reached_flag: u8,
}

#[derive(Serialize)]
struct MetricsCsvRow {
    t: f64,
    fraction_reached: f64,
    diameter: f64,
    max_path_length: f64,
    decision_corrections: usize,
}

fn csv_writer(path: &Path) -> Result<csv::Writer<File>> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::Writer::from_writer(file))
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    Error::io(path, std::io::Error::other(e))
}

pub fn write_trace(path: &Path, rows: &[AgentRow]) -> Result<()> {
    let mut w = csv_writer(path)?;
    if rows.is_empty() {
        w.write_record([
            "t",
            "agent_id",
            "x",
            "y",
            "measure",
            "best_neighbor_id",
            "reached_flag",
        ])
        .map_err(|e| csv_error(path, e))?;
    }
    for r in rows {
        w.serialize(TraceCsvRow {
            t: r.t,
            agent_id: r.agent_id,
            x: r.x,
            y: r.y,
            measure: r.measure,
            best_neighbor_id: r.best_neighbor,
            reached_flag: u8::from(r.reached),
        })
        .map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_metrics(path: &Path, ticks: &[TickRecord]) -> Result<()> {
    let mut w = csv_writer(path)?;
    for r in ticks {
        w.serialize(MetricsCsvRow {
            t: r.t,
            fraction_reached: r.fraction_reached,
            diameter: r.diameter,
            max_path_length: r.max_path_length,
            decision_corrections: r.decision_corrections,
        })
        .map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_epochs(path: &Path, epochs: &[EpochTelemetry]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["epoch", "corrections", "rho_estimate", "max_delta"])
        .map_err(|e| csv_error(path, e))?;
    for t in epochs {
        w.write_record([
            t.epoch.to_string(),
            t.corrections.to_string(),
            t.rho_estimate.to_string(),
            t.max_delta.to_string(),
        ])
        .map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| Error::io(path, e.into()))?;
    w.write_all(b"\n")
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

/// Runs the scenario and writes trace, metrics and summary into `out_dir`.
pub fn run_scenario(
    cfg: &ScenarioConfig,
    out_dir: &Path,
    opts: &RunOptions,
) -> Result<ScenarioOutput> {
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let out = simulate(cfg, opts.exec)?;
    if let Some(path) = &opts.pfsa_out {
        let net = NetworkPfsa::from_frozen(&out.placement.network)?;
        let doc = net.document();
        write_pfsa_file(path, &doc.pfsa, doc.roles.as_deref())?;
    }
    let names = &cfg.output;
    write_trace(&out_dir.join(&names.trace), &out.rows)?;
    write_metrics(&out_dir.join(&names.metrics), &out.ticks)?;
    if cfg.mode == Mode::Frozen {
        write_epochs(&out_dir.join(&names.epochs), &out.epochs)?;
    }
    write_json(&out_dir.join(&names.summary), &out.summary)?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::config::{Arena, TargetSpec};

    fn small(mode: Mode) -> ScenarioConfig {
        ScenarioConfig {
            n_agents: 10,
            mode,
            arena: Arena {
                width: 4.0,
                height: 4.0,
            },
            r_c: Some(1.6),
            v_s: 1.0,
            duration: 20.0,
            epsilon: 0.05,
            trace_stride: 5,
            targets: vec![TargetSpec::point(2.0, 2.0)],
            ..ScenarioConfig::default()
        }
    }

    #[test]
    fn frozen_smoke() {
        let out = simulate(&small(Mode::Frozen), Exec::Sequential).unwrap();
        let f = out.summary.frozen.as_ref().unwrap();
        assert!(f.epochs > 0);
        assert!(f.rho_min > 0.0 && f.rho_norm <= 1.0 + 1e-12);
        assert_eq!(out.summary.invariant_violations, 0);
        assert_eq!(out.rows.len(), 10);
    }

    #[test]
    fn zero_init_counts_monotone_checks() {
        let mut cfg = small(Mode::Frozen);
        cfg.frozen_init = FrozenInit::Zero;
        cfg.epsilon = 0.2;
        let out = simulate(&cfg, Exec::Sequential).unwrap();
        assert_eq!(out.summary.invariant_violations, 0);
        assert!(out.epochs.len() > 10);
    }

    #[test]
    fn outputs_are_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = small(Mode::Real);
        let a = dir.path().join("a");
        let b = dir.path().join("b");
        run_scenario(&cfg, &a, &RunOptions::default()).unwrap();
        run_scenario(&cfg, &b, &RunOptions::default()).unwrap();
        for f in ["trace.csv", "metrics.csv", "summary.json"] {
            let x = std::fs::read(a.join(f)).unwrap();
            assert!(!x.is_empty());
            assert_eq!(x, std::fs::read(b.join(f)).unwrap(), "{f}");
        }
        let trace = std::fs::read_to_string(a.join("trace.csv")).unwrap();
        assert!(trace.starts_with("t,agent_id,x,y,measure,best_neighbor_id,reached_flag\n"));
        let metrics = std::fs::read_to_string(a.join("metrics.csv")).unwrap();
        assert!(metrics
            .starts_with("t,fraction_reached,diameter,max_path_length,decision_corrections\n"));
        let summary: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(a.join("summary.json")).unwrap())
                .unwrap();
        assert!(summary.get("T_conv").is_some());
        assert_eq!(summary["seed"], 0);
        assert_eq!(summary["config"]["n_agents"], 10);
    }

    #[test]
    fn paired_modes_feed_deviation() {
        let real = simulate(&small(Mode::Real), Exec::Sequential).unwrap();
        let ideal = simulate(&small(Mode::Ideal), Exec::Sequential).unwrap();
        let dev = crate::mobility::deviation_fraction(
            real.trace.as_ref().unwrap(),
            ideal.trace.as_ref().unwrap(),
        )
        .unwrap();
        assert!(!dev.is_empty());
        assert_eq!(real.summary.final_fraction, 1.0);
        assert_eq!(ideal.summary.final_fraction, 1.0);
    }
}
