//! `run`, `compare` and `sweep`.

use std::path::{Path, PathBuf};
use std::time::Instant;

use distopt_core::executor::{run_plan, Clock, ExperimentPlan, NoClock, TraceRecord};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::Value;

use crate::config::{self, Config, ResolvedRun};
use crate::output::{self, Status, Summary};
use crate::CliError;

/// Environment variable capping the worker threads of `compare`/`sweep`.
pub const THREADS_ENV: &str = "DISTOPT_THREADS";

struct WallClock(Instant);

impl Clock for WallClock {
    fn elapsed_ms(&self) -> f64 {
        self.0.elapsed().as_secs_f64() * 1e3
    }
}

/// Result of one executed plan. `summary.status` records failures.
#[derive(Debug, Clone)]
pub struct Executed {
    pub summary: Summary,
    pub trace: Vec<TraceRecord>,
}

impl Executed {
    fn failure(&self) -> Option<CliError> {
        let msg = self.summary.error.clone().unwrap_or_default();
        match self.summary.status {
            Status::Ok => None,
            Status::ConfigError => Some(CliError::Config(msg)),
            Status::NumericalError => Some(CliError::Numerical(msg)),
        }
    }
}

/// Runs one plan and writes `trace.csv`, `summary.json` and
/// `final_states.json` into `dir`. The trace is written even when a round
/// fails.
pub fn execute(run: &ResolvedRun, timing: bool, dir: &Path) -> Result<Executed, CliError> {
    std::fs::create_dir_all(dir)?;
    let kind = run.plan.algorithm.kind;
    let clock: Box<dyn Clock> = if timing {
        Box::new(WallClock(Instant::now()))
    } else {
        Box::new(NoClock)
    };
    let blank = |status, error: String| Summary {
        label: run.label.clone(),
        algorithm: kind,
        status,
        error: Some(error),
        rounds: 0,
        converged: false,
        last: None,
        messages_total: 0,
        rate: None,
        rate_note: None,
        optimum_value: None,
    };
    let outcome = match run_plan(&run.plan, clock.as_ref(), None) {
        Ok(o) => o,
        Err(e) => {
            let err = CliError::from_core_setup(e, &run.label);
            let status = match err {
                CliError::Numerical(_) => Status::NumericalError,
                _ => Status::ConfigError,
            };
            let summary = blank(status, err.to_string());
            output::write_json(&dir.join("summary.json"), &summary)?;
            return Ok(Executed {
                summary,
                trace: Vec::new(),
            });
        }
    };
    let trace = outcome.run.trace;
    std::fs::write(dir.join("trace.csv"), output::trace_csv(&trace))?;
    output::write_json(&dir.join("final_states.json"), &outcome.final_states)?;
    let (rate, rate_note) = output::rate_of(kind, &trace);
    let summary = Summary {
        label: run.label.clone(),
        algorithm: kind,
        status: if outcome.run.error.is_some() {
            Status::NumericalError
        } else {
            Status::Ok
        },
        error: outcome.run.error.map(|e| e.to_string()),
        rounds: outcome.run.rounds,
        converged: outcome.run.converged,
        last: trace.last().copied(),
        messages_total: trace.last().map_or(0, |r| r.msgs),
        rate,
        rate_note,
        optimum_value: Some(outcome.optimum.value),
    };
    output::write_json(&dir.join("summary.json"), &summary)?;
    Ok(Executed { summary, trace })
}

fn thread_pool() -> Result<rayon::ThreadPool, CliError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v.trim().parse().ok().filter(|&n| n >= 1).ok_or_else(|| {
            CliError::Config(format!(
                "{THREADS_ENV} must be a positive integer, got `{v}`"
            ))
        })?;
        builder = builder.num_threads(n);
    }
    builder.build().map_err(|e| CliError::Io(e.to_string()))
}

fn single_run(cfg: &Config) -> Result<ResolvedRun, CliError> {
    let mut plans = cfg.plans()?;
    if plans.len() != 1 {
        return Err(CliError::Config(
            "run needs exactly one algorithm; use compare for several".into(),
        ));
    }
    Ok(plans.remove(0))
}

fn write_resolved(cfg: &Config, out: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(out)?;
    output::write_json(&out.join("resolved_config.json"), &cfg.resolve()?)
}

pub fn cmd_run(config_path: &Path, out: &Path) -> Result<Executed, CliError> {
    let cfg = config::load(config_path)?;
    run_config(&cfg, out)
}

/// `run` on an already parsed config.
pub fn run_config(cfg: &Config, out: &Path) -> Result<Executed, CliError> {
    let run = single_run(cfg)?;
    write_resolved(cfg, out)?;
    let done = execute(&run, cfg.run.timing, out)?;
    match done.failure() {
        Some(e) => Err(e),
        None => Ok(done),
    }
}

#[derive(Debug, Serialize)]
struct CompareEntry<'a> {
    label: &'a str,
    status: &'a Status,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<&'a str>,
    dir: String,
}

/// Labels become directory names, so keep them to a safe alphabet.
fn check_label(label: &str) -> Result<(), CliError> {
    let ok = !label.is_empty()
        && label
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'))
        && label != "."
        && label != "..";
    if ok {
        Ok(())
    } else {
        Err(CliError::Config(format!(
            "algorithm label `{label}` must use only [A-Za-z0-9._-]"
        )))
    }
}

pub fn cmd_compare(config_path: &Path, out: &Path) -> Result<Vec<Executed>, CliError> {
    let cfg = config::load(config_path)?;
    if cfg.algorithms.is_none() {
        return Err(CliError::Config(
            "compare needs an `algorithms` list".into(),
        ));
    }
    let runs = cfg.plans()?;
    for r in &runs {
        check_label(&r.label)?;
    }
    write_resolved(&cfg, out)?;
    let pool = thread_pool()?;
    let results: Vec<Result<Executed, CliError>> = pool.install(|| {
        runs.par_iter()
            .map(|r| execute(r, cfg.run.timing, &out.join(&r.label)))
            .collect()
    });
    let results = results.into_iter().collect::<Result<Vec<_>, _>>()?;
    let traces: Vec<(String, Vec<TraceRecord>)> = results
        .iter()
        .map(|e| (e.summary.label.clone(), e.trace.clone()))
        .collect();
    std::fs::write(out.join("merged.csv"), output::merged_csv(&traces))?;
    let entries: Vec<CompareEntry<'_>> = results
        .iter()
        .map(|e| CompareEntry {
            label: &e.summary.label,
            status: &e.summary.status,
            error: e.summary.error.as_deref(),
            dir: e.summary.label.clone(),
        })
        .collect();
    output::write_json(&out.join("compare_summary.json"), &entries)?;
    worst(results.iter().filter_map(Executed::failure))?;
    Ok(results)
}

/// Configuration errors outrank numerical ones.
fn worst(errors: impl Iterator<Item = CliError>) -> Result<(), CliError> {
    let mut found: Option<CliError> = None;
    for e in errors {
        found = match (found, e) {
            (Some(CliError::Config(m)), _) => Some(CliError::Config(m)),
            (_, e) => Some(e),
        };
    }
    found.map_or(Ok(()), Err)
}

fn lookup<'v>(root: &'v Value, path: &str) -> Option<&'v Value> {
    path.split('.').try_fold(root, |v, key| match v {
        Value::Object(m) => m.get(key),
        Value::Array(a) => key.parse::<usize>().ok().and_then(|i| a.get(i)),
        _ => None,
    })
}

fn assign(root: &mut Value, path: &str, value: Value) -> Result<(), CliError> {
    let keys: Vec<&str> = path.split('.').collect();
    let mut cur = root;
    for (depth, key) in keys.iter().enumerate() {
        let last = depth + 1 == keys.len();
        cur = match cur {
            Value::Object(m) => {
                if last {
                    m.insert((*key).to_string(), value);
                    return Ok(());
                }
                m.entry((*key).to_string())
                    .or_insert_with(|| Value::Object(Default::default()))
            }
            Value::Array(a) => {
                let slot = key
                    .parse::<usize>()
                    .ok()
                    .and_then(|i| a.get_mut(i))
                    .ok_or_else(|| CliError::Config(format!("{path}: no element `{key}`")))?;
                if last {
                    *slot = value;
                    return Ok(());
                }
                slot
            }
            _ => {
                return Err(CliError::Config(format!(
                    "{path}: `{key}` is not inside an object"
                )))
            }
        };
    }
    Err(CliError::Config("empty parameter path".into()))
}

/// Parses a sweep value as JSON, falling back to a bare string.
pub fn parse_value(token: &str) -> Value {
    serde_json::from_str(token.trim()).unwrap_or_else(|_| Value::String(token.trim().to_string()))
}

#[derive(Debug, Clone)]
pub struct SweepPoint {
    pub value: Value,
    pub dir: PathBuf,
    pub run: Executed,
}

pub fn cmd_sweep(
    config_path: &Path,
    param: &str,
    values: &[String],
    out: &Path,
) -> Result<Vec<SweepPoint>, CliError> {
    let text = std::fs::read_to_string(config_path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", config_path.display())))?;
    let base = config::parse(&text)?;
    let resolved = serde_json::to_value(base.resolve()?)?;
    match lookup(&resolved, param) {
        Some(Value::Number(_) | Value::String(_) | Value::Bool(_)) => {}
        Some(_) => return Err(CliError::Config(format!("{param}: not a scalar field"))),
        None => return Err(CliError::Config(format!("{param}: no such field"))),
    }
    if values.is_empty() {
        return Err(CliError::Config("sweep needs at least one value".into()));
    }
    let raw: Value = serde_json::from_str(&text)
        .map_err(|e| CliError::Config(format!("{}: {e}", config_path.display())))?;
    let mut prepared = Vec::new();
    for (idx, token) in values.iter().enumerate() {
        let value = parse_value(token);
        let mut doc = raw.clone();
        assign(&mut doc, param, value.clone())?;
        let cfg = config::parse(&doc.to_string())?;
        let run = single_run(&cfg)?;
        prepared.push((idx, value, cfg, run));
    }
    std::fs::create_dir_all(out)?;
    let pool = thread_pool()?;
    let results: Vec<Result<SweepPoint, CliError>> = pool.install(|| {
        prepared
            .par_iter()
            .map(|(idx, value, cfg, run)| {
                let dir = out.join(format!("value_{idx:03}"));
                write_resolved(cfg, &dir)?;
                let done = execute(run, cfg.run.timing, &dir)?;
                Ok(SweepPoint {
                    value: value.clone(),
                    dir,
                    run: done,
                })
            })
            .collect()
    });
    let points = results.into_iter().collect::<Result<Vec<_>, _>>()?;
    std::fs::write(out.join("sweep.csv"), sweep_csv(param, &points))?;
    worst(points.iter().filter_map(|p| p.run.failure()))?;
    Ok(points)
}

fn sweep_csv(param: &str, points: &[SweepPoint]) -> String {
    let mut out = format!(
        "{param},status,rounds,converged,consensus_err,x_gap,f_gap,grad_norm,stationarity,msgs\n"
    );
    for p in points {
        let s = &p.run.summary;
        let status = serde_json::to_value(&s.status)
            .ok()
            .and_then(|v| v.as_str().map(str::to_string))
            .unwrap_or_default();
        let value = match &p.value {
            Value::String(v) => v.clone(),
            v => v.to_string(),
        };
        let metrics = s.last.map_or_else(
            || ",,,,,".to_string(),
            |r| {
                format!(
                    "{},{},{},{},{},{}",
                    r.consensus_err, r.x_gap, r.f_gap, r.grad_norm, r.stationarity, r.msgs
                )
            },
        );
        out.push_str(&format!(
            "{value},{status},{},{},{metrics}\n",
            s.rounds, s.converged
        ));
    }
    out
}

/// The first plan of a config, for callers that only need the experiment.
pub fn plan_of(cfg: &Config) -> Result<ExperimentPlan, CliError> {
    Ok(single_run(cfg)?.plan)
}
