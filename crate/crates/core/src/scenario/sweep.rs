use std::fmt;
use std::fs::File;
use std::path::Path;
use std::str::FromStr;

use super::config::ScenarioConfig;
use super::run::simulate;
use crate::error::{Error, Result};
use crate::par::{self, Exec};

pub const DEFAULT_REPS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    NAgents,
    Epsilon,
    Speed,
    Radius,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::NAgents => "n_agents",
            SweepAxis::Epsilon => "epsilon",
            SweepAxis::Speed => "v_s",
            SweepAxis::Radius => "r_c",
        }
    }

    /// Copy of `base` with this axis set to `value`.
    pub fn apply(self, base: &ScenarioConfig, value: f64) -> Result<ScenarioConfig> {
        let mut cfg = base.clone();
        match self {
            SweepAxis::NAgents => {
                if !(value >= 1.0 && value.fract() == 0.0) {
                    return Err(Error::config(
                        "values",
                        format!("n_agents value {value} is not a positive integer"),
                    ));
                }
                cfg.n_agents = value as usize;
            }
            SweepAxis::Epsilon => cfg.epsilon = value,
            SweepAxis::Speed => cfg.v_s = value,
            SweepAxis::Radius => cfg.r_c = Some(value),
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "n_agents" => Ok(SweepAxis::NAgents),
            "epsilon" => Ok(SweepAxis::Epsilon),
            "v_s" => Ok(SweepAxis::Speed),
            "r_c" => Ok(SweepAxis::Radius),
            _ => Err(Error::config(
                "axis",
                format!("`{s}` is not one of n_agents, epsilon, v_s, r_c"),
            )),
        }
    }
}

/// One repetition at one axis value.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub value: f64,
    pub rep: usize,
    pub seed: u64,
    pub theta: f64,
    pub r_c: f64,
    pub epochs: Option<f64>,
    pub t_conv: Option<f64>,
    pub final_fraction: f64,
}

impl SweepRow {
    pub fn vs_tconv(&self, v_s: f64) -> Option<f64> {
        self.t_conv.map(|t| v_s * t)
    }

    pub fn rc_tconv(&self) -> Option<f64> {
        self.t_conv.filter(|&t| t > 0.0).map(|t| self.r_c / t)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stat {
    pub count: usize,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
}

impl Stat {
    /// Statistics over the present values; `None` when none are present.
    pub fn of(values: impl IntoIterator<Item = Option<f64>>) -> Option<Stat> {
        let xs: Vec<f64> = values.into_iter().flatten().collect();
        if xs.is_empty() {
            return None;
        }
        Some(Stat {
            count: xs.len(),
            mean: xs.iter().sum::<f64>() / xs.len() as f64,
            min: xs.iter().copied().fold(f64::INFINITY, f64::min),
            max: xs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepAggregate {
    pub value: f64,
    pub reps: usize,
    pub epochs: Option<Stat>,
    pub t_conv: Option<Stat>,
    pub vs_tconv: Option<Stat>,
    pub rc_tconv: Option<Stat>,
    pub final_fraction: Option<Stat>,
}

impl SweepAggregate {
    pub fn from_rows(value: f64, rows: &[SweepRow], v_s: f64) -> Self {
        SweepAggregate {
            value,
            reps: rows.len(),
            epochs: Stat::of(rows.iter().map(|r| r.epochs)),
            t_conv: Stat::of(rows.iter().map(|r| r.t_conv)),
            vs_tconv: Stat::of(rows.iter().map(|r| r.vs_tconv(v_s))),
            rc_tconv: Stat::of(rows.iter().map(|r| r.rc_tconv())),
            final_fraction: Stat::of(rows.iter().map(|r| Some(r.final_fraction))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub axis: SweepAxis,
    pub rows: Vec<SweepRow>,
    pub aggregates: Vec<SweepAggregate>,
}

fn run_value(
    base: &ScenarioConfig,
    axis: SweepAxis,
    value: f64,
    reps: usize,
    exec: Exec,
) -> Result<Vec<SweepRow>> {
    let mut cfg = axis.apply(base, value)?;
    cfg.trace_stride = 0;
    let results = par::map_indexed(exec, reps, |rep| {
        let mut c = cfg.clone();
        c.seed = base.seed.wrapping_add(rep as u64);
        let out = simulate(&c, Exec::Sequential)?;
        Ok(SweepRow {
            value,
            rep,
            seed: c.seed,
            theta: out.summary.theta,
            r_c: out.summary.r_c,
            epochs: out.summary.frozen.as_ref().map(|f| f.epochs as f64),
            t_conv: out.summary.t_conv,
            final_fraction: out.summary.final_fraction,
        })
    });
    results.into_iter().collect()
}

/// Runs `reps` seeded repetitions per value; `on_value` sees each value's
/// rows as soon as they finish.
pub fn sweep_with(
    base: &ScenarioConfig,
    axis: SweepAxis,
    values: &[f64],
    reps: usize,
    exec: Exec,
    mut on_value: impl FnMut(&[SweepRow], &SweepAggregate) -> Result<()>,
) -> Result<SweepResult> {
    if values.is_empty() {
        return Err(Error::config("values", "no sweep values given"));
    }
    if reps == 0 {
        return Err(Error::config("reps", "must be at least 1"));
    }
    let mut rows = Vec::new();
    let mut aggregates = Vec::new();
    for &value in values {
        let vrows = run_value(base, axis, value, reps, exec)?;
        let v_s = if axis == SweepAxis::Speed {
            value
        } else {
            base.v_s
        };
        let agg = SweepAggregate::from_rows(value, &vrows, v_s);
        on_value(&vrows, &agg)?;
        rows.extend(vrows);
        aggregates.push(agg);
    }
    Ok(SweepResult {
        axis,
        rows,
        aggregates,
    })
}

pub fn sweep(
    base: &ScenarioConfig,
    axis: SweepAxis,
    values: &[f64],
    reps: usize,
    exec: Exec,
) -> Result<SweepResult> {
    sweep_with(base, axis, values, reps, exec, |_, _| Ok(()))
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

const STAT_COLUMNS: [&str; 5] = [
    "epochs",
    "T_conv",
    "vs_T_conv",
    "rc_over_T_conv",
    "final_fraction",
];

fn aggregate_header() -> Vec<String> {
    let mut h = vec!["value".to_string(), "reps".to_string()];
    for c in STAT_COLUMNS {
        for s in ["n", "mean", "min", "max"] {
            h.push(format!("{c}_{s}"));
        }
    }
    h
}

fn aggregate_record(a: &SweepAggregate) -> Vec<String> {
    let mut r = vec![a.value.to_string(), a.reps.to_string()];
    for s in [a.epochs, a.t_conv, a.vs_tconv, a.rc_tconv, a.final_fraction] {
        match s {
            Some(s) => r.extend([
                s.count.to_string(),
                s.mean.to_string(),
                s.min.to_string(),
                s.max.to_string(),
            ]),
            None => r.extend(["0".to_string(), String::new(), String::new(), String::new()]),
        }
    }
    r
}

/// Runs a sweep, writing `sweep_raw.csv` and `sweep.csv` into `out_dir`
/// and flushing both after every value.
pub fn run_sweep(
    base: &ScenarioConfig,
    axis: SweepAxis,
    values: &[f64],
    reps: usize,
    out_dir: &Path,
    exec: Exec,
) -> Result<SweepResult> {
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let raw_path = out_dir.join("sweep_raw.csv");
    let agg_path = out_dir.join("sweep.csv");
    let open = |p: &Path| -> Result<csv::Writer<File>> {
        Ok(csv::Writer::from_writer(
            File::create(p).map_err(|e| Error::io(p, e))?,
        ))
    };
    let io = |p: &Path, e: csv::Error| Error::io(p, std::io::Error::other(e));
    let mut raw = open(&raw_path)?;
    let mut agg = open(&agg_path)?;
    raw.write_record([
        "axis",
        "value",
        "rep",
        "seed",
        "theta",
        "r_c",
        "epochs",
        "T_conv",
        "vs_T_conv",
        "rc_over_T_conv",
        "final_fraction",
    ])
    .map_err(|e| io(&raw_path, e))?;
    agg.write_record(aggregate_header())
        .map_err(|e| io(&agg_path, e))?;
    raw.flush().map_err(|e| Error::io(&raw_path, e))?;
    agg.flush().map_err(|e| Error::io(&agg_path, e))?;
    let is_speed = axis == SweepAxis::Speed;
    let mode = base.mode;
    sweep_with(base, axis, values, reps, exec, |rows, a| {
        for r in rows {
            let v_s = if is_speed { r.value } else { base.v_s };
            raw.write_record([
                axis.name().to_string(),
                r.value.to_string(),
                r.rep.to_string(),
                r.seed.to_string(),
                r.theta.to_string(),
                r.r_c.to_string(),
                opt(r.epochs),
                opt(r.t_conv),
                opt(r.vs_tconv(v_s)),
                opt(r.rc_tconv()),
                r.final_fraction.to_string(),
            ])
            .map_err(|e| io(&raw_path, e))?;
        }
        agg.write_record(aggregate_record(a))
            .map_err(|e| io(&agg_path, e))?;
        raw.flush().map_err(|e| Error::io(&raw_path, e))?;
        agg.flush().map_err(|e| Error::io(&agg_path, e))?;
        log::info!("{axis} = {} done ({} reps, mode {mode:?})", a.value, a.reps);
        Ok(())
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::config::{Arena, Mode, TargetSpec};

    fn base() -> ScenarioConfig {
        ScenarioConfig {
            n_agents: 12,
            mode: Mode::Frozen,
            arena: Arena {
                width: 4.0,
                height: 4.0,
            },
            epsilon: 0.1,
            targets: vec![TargetSpec::point(2.0, 2.0)],
            ..ScenarioConfig::default()
        }
    }

    #[test]
    fn axis_names_round_trip() {
        for a in [
            SweepAxis::NAgents,
            SweepAxis::Epsilon,
            SweepAxis::Speed,
            SweepAxis::Radius,
        ] {
            assert_eq!(a.name().parse::<SweepAxis>().unwrap(), a);
        }
        assert!("speed".parse::<SweepAxis>().is_err());
        assert!(SweepAxis::NAgents.apply(&base(), 2.5).is_err());
    }

    #[test]
    fn aggregates_match_raw_rows() {
        let res = sweep(&base(), SweepAxis::Epsilon, &[0.2, 0.1], 3, Exec::default()).unwrap();
        assert_eq!(res.rows.len(), 6);
        for a in &res.aggregates {
            let xs: Vec<f64> = res
                .rows
                .iter()
                .filter(|r| r.value == a.value)
                .filter_map(|r| r.epochs)
                .collect();
            let s = a.epochs.unwrap();
            assert_eq!(s.count, xs.len());
            assert_eq!(s.mean, xs.iter().sum::<f64>() / xs.len() as f64);
            assert_eq!(s.min, xs.iter().copied().fold(f64::INFINITY, f64::min));
            assert_eq!(s.max, xs.iter().copied().fold(f64::NEG_INFINITY, f64::max));
        }
        let seq = sweep(
            &base(),
            SweepAxis::Epsilon,
            &[0.2, 0.1],
            3,
            Exec::Sequential,
        )
        .unwrap();
        assert_eq!(seq, res);
    }

    #[test]
    fn files_are_flushed_per_value() {
        let dir = tempfile::tempdir().unwrap();
        let mut bad = base();
        bad.n_agents = 30;
        // second value fails validation after the first has been written
        let err = run_sweep(
            &bad,
            SweepAxis::Epsilon,
            &[0.2, 2.0],
            2,
            dir.path(),
            Exec::Sequential,
        )
        .unwrap_err();
        assert_eq!(err.category().exit_code(), 2);
        let agg = std::fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
        assert_eq!(agg.lines().count(), 2);
        let raw = std::fs::read_to_string(dir.path().join("sweep_raw.csv")).unwrap();
        assert_eq!(raw.lines().count(), 3);
    }
}
