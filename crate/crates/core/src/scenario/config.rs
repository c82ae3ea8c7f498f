use std::path::Path;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::distributed::{Schedule, DEFAULT_TOL};
use crate::error::{Error, Result};
use crate::mobility::{IdealSolver, MobilityConfig};
use crate::par::Exec;
use crate::swarm_graph::{FailureModel, Point, Rect};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Frozen,
    #[default]
    Real,
    Ideal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScheduleKind {
    #[default]
    Sync,
    Async,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IdealSolverKind {
    #[default]
    Exact,
    Distributed,
}

/// Starting measures for the frozen optimization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FrozenInit {
    Zero,
    #[default]
    Chi,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Arena {
    pub width: f64,
    pub height: f64,
}

impl Default for Arena {
    fn default() -> Self {
        Arena {
            width: 20.0,
            height: 20.0,
        }
    }
}

/// Exactly one of `point` or `rect` (as `[x0, y0, x1, y1]`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub point: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rect: Option<[f64; 4]>,
}

impl TargetSpec {
    pub fn point(x: f64, y: f64) -> Self {
        TargetSpec {
            point: Some([x, y]),
            rect: None,
        }
    }

    pub fn rect(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        TargetSpec {
            point: None,
            rect: Some([x0, y0, x1, y1]),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FailureSection {
    pub lambda_at_zero: f64,
    pub lambda_at_rc: f64,
    pub spatial_noise_amplitude: f64,
    pub noise_seed: u64,
    pub gamma_floor: f64,
}

impl Default for FailureSection {
    fn default() -> Self {
        let d = FailureModel::default();
        FailureSection {
            lambda_at_zero: d.lambda_at_zero,
            lambda_at_rc: d.lambda_at_rc,
            spatial_noise_amplitude: d.spatial_noise_amplitude,
            noise_seed: d.noise_seed,
            gamma_floor: d.gamma_floor,
        }
    }
}

/// File names inside the output directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub trace: String,
    pub metrics: String,
    pub summary: String,
    pub epochs: String,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            trace: "trace.csv".into(),
            metrics: "metrics.csv".into(),
            summary: "summary.json".into(),
            epochs: "epochs.csv".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub seed: u64,
    /// Total agents, target agents included.
    pub n_agents: usize,
    pub mode: Mode,
    pub arena: Arena,
    /// Communication radius; derived from the connectivity threshold when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r_c: Option<f64>,
    pub v_s: f64,
    pub dt: f64,
    pub duration: f64,
    pub epsilon: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta_override: Option<f64>,
    pub epochs_per_tick: usize,
    pub dump_characteristic: f64,
    pub sharer_fraction: f64,
    pub trace_stride: usize,
    pub schedule: ScheduleKind,
    pub ideal_solver: IdealSolverKind,
    pub ideal_tol: f64,
    pub frozen_init: FrozenInit,
    pub tol: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_epochs: Option<usize>,
    pub stop_when_converged: bool,
    /// Redraw the initial placement until every agent is linked to a target.
    pub require_connected: bool,
    pub failure: FailureSection,
    pub targets: Vec<TargetSpec>,
    pub obstacles: Vec<[f64; 4]>,
    pub voids: Vec<[f64; 4]>,
    pub output: OutputSection,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            seed: 0,
            n_agents: 500,
            mode: Mode::default(),
            arena: Arena::default(),
            r_c: None,
            v_s: 2.5,
            dt: 0.02,
            duration: 60.0,
            epsilon: 0.001,
            theta_override: None,
            epochs_per_tick: 1,
            dump_characteristic: 0.0,
            sharer_fraction: 0.0,
            trace_stride: 10,
            schedule: ScheduleKind::default(),
            ideal_solver: IdealSolverKind::default(),
            ideal_tol: DEFAULT_TOL,
            frozen_init: FrozenInit::default(),
            tol: DEFAULT_TOL,
            max_epochs: None,
            stop_when_converged: true,
            require_connected: true,
            failure: FailureSection::default(),
            targets: Vec::new(),
            obstacles: Vec::new(),
            voids: Vec::new(),
            output: OutputSection::default(),
        }
    }
}

fn rect_of(r: &[f64; 4]) -> Rect {
    Rect::new(r[0], r[1], r[2], r[3])
}

impl ScenarioConfig {
    pub fn arena_rect(&self) -> Rect {
        Rect::new(0.0, 0.0, self.arena.width, self.arena.height)
    }

    /// 1.5 times the random geometric graph connectivity radius
    /// `sqrt(A ln N / (pi N))`.
    pub fn auto_r_c(&self) -> f64 {
        let n = self.n_agents.max(2) as f64;
        let area = self.arena.width * self.arena.height;
        1.5 * (area * n.ln() / (std::f64::consts::PI * n)).sqrt()
    }

    pub fn effective_r_c(&self) -> f64 {
        self.r_c.unwrap_or_else(|| self.auto_r_c())
    }

    pub fn obstacle_rects(&self) -> Vec<Rect> {
        self.obstacles.iter().map(rect_of).collect()
    }

    pub fn void_rects(&self) -> Vec<Rect> {
        self.voids.iter().map(rect_of).collect()
    }

    pub fn target_points(&self) -> Vec<Point> {
        self.targets
            .iter()
            .filter_map(|t| t.point)
            .map(|[x, y]| Point { x, y })
            .collect()
    }

    pub fn extended_targets(&self) -> Vec<Rect> {
        self.targets
            .iter()
            .filter_map(|t| t.rect.as_ref())
            .map(rect_of)
            .collect()
    }

    pub fn failure_model(&self) -> FailureModel {
        let f = &self.failure;
        FailureModel {
            lambda_at_zero: f.lambda_at_zero,
            lambda_at_rc: f.lambda_at_rc,
            spatial_noise_amplitude: f.spatial_noise_amplitude,
            noise_seed: f.noise_seed,
            obstacles: self.obstacle_rects(),
            gamma_floor: f.gamma_floor,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |key: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::config(key, format!("{v} must be positive")))
            }
        };
        positive("arena.width", self.arena.width)?;
        positive("arena.height", self.arena.height)?;
        positive("dt", self.dt)?;
        positive("duration", self.duration)?;
        positive("tol", self.tol)?;
        positive("ideal_tol", self.ideal_tol)?;
        if let Some(r) = self.r_c {
            positive("r_c", r)?;
        }
        if !(self.v_s >= 0.0 && self.v_s.is_finite()) {
            return Err(Error::config(
                "v_s",
                format!("{} must be non-negative", self.v_s),
            ));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::config(
                "epsilon",
                format!("{} must lie in (0, 1)", self.epsilon),
            ));
        }
        if let Some(t) = self.theta_override {
            if !(t > 0.0 && t < 1.0) {
                return Err(Error::config(
                    "theta_override",
                    format!("{t} must lie in (0, 1)"),
                ));
            }
        }
        if self.epochs_per_tick == 0 {
            return Err(Error::config("epochs_per_tick", "must be at least 1"));
        }
        if self.dump_characteristic != 0.0 && self.dump_characteristic != -1.0 {
            return Err(Error::config("dump_characteristic", "must be 0 or -1"));
        }
        if !(0.0..1.0).contains(&self.sharer_fraction) {
            return Err(Error::config("sharer_fraction", "must lie in [0, 1)"));
        }
        if self.targets.is_empty() {
            return Err(Error::config("targets", "at least one target is required"));
        }
        let arena = self.arena_rect();
        for (k, t) in self.targets.iter().enumerate() {
            let key = format!("targets[{k}]");
            match (t.point, t.rect) {
                (Some([x, y]), None) => {
                    if !arena.contains(Point { x, y }) {
                        return Err(Error::config(key, "point lies outside the arena"));
                    }
                }
                (None, Some(r)) => check_rect(&key, &r, &arena)?,
                _ => {
                    return Err(Error::config(
                        key,
                        "exactly one of `point` or `rect` is required",
                    ))
                }
            }
        }
        for (k, r) in self.obstacles.iter().enumerate() {
            check_rect(&format!("obstacles[{k}]"), r, &arena)?;
        }
        for (k, r) in self.voids.iter().enumerate() {
            check_rect(&format!("voids[{k}]"), r, &arena)?;
        }
        let obstacles = self.obstacle_rects();
        for (k, p) in self.target_points().into_iter().enumerate() {
            if obstacles.iter().any(|o| o.contains(p)) {
                return Err(Error::config(
                    format!("targets[{k}]"),
                    "point lies inside an obstacle",
                ));
            }
        }
        let r_c = self.effective_r_c();
        if self.v_s * self.dt > 0.1 * r_c {
            warn!(
                "v_s * dt = {} exceeds a tenth of r_c = {r_c}; motion per tick is coarse",
                self.v_s * self.dt
            );
        }
        self.failure_model().validate()
    }

    /// Motion parameters for the mobile processes at the given `theta`.
    pub fn mobility(&self, theta: f64, exec: Exec) -> MobilityConfig {
        MobilityConfig {
            r_c: self.effective_r_c(),
            v_s: self.v_s,
            dt: self.dt,
            duration: self.duration,
            theta,
            chi_dump: self.dump_characteristic,
            failure: self.failure_model(),
            arena: self.arena_rect(),
            extended_targets: self.extended_targets(),
            epochs_per_tick: self.epochs_per_tick,
            schedule: self.schedule(),
            ideal_solver: match self.ideal_solver {
                IdealSolverKind::Exact => IdealSolver::Exact,
                IdealSolverKind::Distributed => IdealSolver::Distributed,
            },
            ideal_tol: self.ideal_tol,
            trace_stride: self.trace_stride,
            stop_when_converged: self.stop_when_converged,
            seed: self.seed,
            exec,
        }
    }

    pub fn schedule(&self) -> Schedule {
        match self.schedule {
            ScheduleKind::Sync => Schedule::synchronized(),
            ScheduleKind::Async => Schedule::asynchronous(self.seed),
        }
    }
}

fn check_rect(key: &str, r: &[f64; 4], arena: &Rect) -> Result<()> {
    if !r.iter().all(|v| v.is_finite()) || r[0] >= r[2] || r[1] >= r[3] {
        return Err(Error::config(
            key,
            "rectangle must satisfy x0 < x1 and y0 < y1",
        ));
    }
    if !rect_of(r).within(arena) {
        return Err(Error::config(key, "rectangle extends beyond the arena"));
    }
    Ok(())
}

/// Parses and validates a TOML scenario.
pub fn parse_scenario(text: &str) -> Result<ScenarioConfig> {
    let cfg: ScenarioConfig = toml::from_str(text).map_err(|e| {
        let line = e
            .span()
            .map(|s| text[..s.start.min(text.len())].lines().count().max(1))
            .unwrap_or(0);
        Error::Parse {
            line,
            msg: e.message().to_string(),
        }
    })?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_scenario(path: &Path) -> Result<ScenarioConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_scenario(&text)
}
