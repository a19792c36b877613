//! Running experiments and writing their outputs.

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use lor_core::config::RingFormation;
use lor_core::ledger::AuditReport;
use lor_core::protocol::{CheckpointMetrics, EngineError, Tallies};
use lor_core::{Ara, SimConfig, Simulation};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{degree_census, snapshot_of};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Attack(#[from] lor_core::adversary::AttackError),
    #[error("conservation residual {0} micro-ARA after the run")]
    Residual(i64),
    #[error("writing {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

/// Count, sum and sum of squares. Merging is plain addition.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub n: u64,
    pub sum: f64,
    pub sum_sq: f64,
}

impl Moments {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        self.sum += x;
        self.sum_sq += x * x;
    }

    pub fn merge(&mut self, o: &Moments) {
        self.n += o.n;
        self.sum += o.sum;
        self.sum_sq += o.sum_sq;
    }

    pub fn mean(&self) -> f64 {
        if self.n == 0 { 0.0 } else { self.sum / self.n as f64 }
    }

    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            return 0.0;
        }
        let n = self.n as f64;
        ((self.sum_sq - self.sum * self.sum / n) / (n - 1.0)).max(0.0)
    }

    pub fn std_err(&self) -> f64 {
        (self.variance() / self.n.max(1) as f64).sqrt()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub run_id: String,
    pub seed: u64,
    pub config: SimConfig,
    /// One entry per checkpoint.
    pub series: Vec<CheckpointMetrics>,
    pub tallies: Tallies,
    pub mean_degree: f64,
    pub degree_histogram: BTreeMap<u64, u64>,
    /// Change in holdings summed over wrongdoers.
    pub attacker_balance_delta: Ara,
    pub conservation_residual: i64,
    pub audit: AuditReport,
    /// Per-membership penalty fractions of settled rings.
    pub penalty_fraction: Moments,
    /// Registered rings by member count.
    pub ring_sizes: BTreeMap<usize, u64>,
    /// Permutation frames drawn, zero in catalog mode.
    pub frames: u64,
}

/// A report and the event log it came from.
#[derive(Clone, Debug)]
pub struct Experiment {
    pub report: MetricsReport,
    pub events: String,
}

pub fn run_id(cfg: &SimConfig) -> String {
    format!("lor-n{}-k{}-l{}-s{}", cfg.traders, cfg.kappa, cfg.ell, cfg.seed)
}

/// Builds the report of a finished simulation.
pub fn report_of(sim: &Simulation) -> Result<MetricsReport, HarnessError> {
    let residual = sim.tcb().conservation_residual();
    if residual != 0 {
        return Err(HarnessError::Residual(residual));
    }
    let census = degree_census(&snapshot_of(sim));
    let mut penalty_fraction = Moments::default();
    for (_, p) in sim.payouts() {
        for m in p.settled.iter().flat_map(|r| &r.members) {
            penalty_fraction.push(m.penalty_fraction);
        }
    }
    let mut ring_sizes = BTreeMap::new();
    for r in sim.tcb().rings() {
        *ring_sizes.entry(r.member_count).or_insert(0) += 1;
    }
    let cfg = sim.config();
    Ok(MetricsReport {
        run_id: run_id(cfg),
        seed: cfg.seed,
        config: cfg.clone(),
        series: sim.metrics().to_vec(),
        tallies: sim.tallies().clone(),
        mean_degree: census.mean,
        degree_histogram: census.histogram,
        attacker_balance_delta: sim.wrongdoers().into_iter().map(|t| sim.holdings_delta(t)).sum(),
        conservation_residual: residual,
        audit: sim.tcb().audit(),
        penalty_fraction,
        ring_sizes,
        frames: match cfg.ring_formation {
            RingFormation::PermutationFrame => sim.metrics().len() as u64,
            RingFormation::Catalog => 0,
        },
    })
}

pub fn run_experiment(cfg: SimConfig) -> Result<Experiment, HarnessError> {
    let mut sim = Simulation::new(cfg)?;
    sim.run()?;
    Ok(Experiment { report: report_of(&sim)?, events: sim.tcb().events().to_jsonl() })
}

/// Metric names of the CSV in column order of the per-checkpoint record.
pub const METRIC_COLUMNS: [&str; 12] = [
    "team_decisions",
    "wrong_decisions",
    "wrong_votes",
    "submitted",
    "rejected",
    "terminations",
    "payouts",
    "penalties",
    "burned",
    "active_rings",
    "active_fractals",
    "cumulative_wrong_votes",
];

fn metric_values(m: &CheckpointMetrics, cumulative_wrong: u64) -> [String; 12] {
    [
        m.team_decisions.to_string(),
        m.wrong_decisions.to_string(),
        m.wrong_votes.to_string(),
        m.submitted.to_string(),
        m.rejected.to_string(),
        m.terminations.to_string(),
        m.payouts.to_string(),
        m.penalties.to_string(),
        m.burned.to_string(),
        m.active_rings.to_string(),
        m.active_fractals.to_string(),
        cumulative_wrong.to_string(),
    ]
}

/// Long-form metrics: `run_id,checkpoint,metric,value`.
pub fn metrics_csv(report: &MetricsReport) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["run_id", "checkpoint", "metric", "value"]).expect("in-memory write");
    let mut cumulative = 0;
    for m in &report.series {
        cumulative += m.wrong_votes;
        for (name, value) in METRIC_COLUMNS.iter().zip(metric_values(m, cumulative)) {
            w.write_record([report.run_id.as_str(), &m.checkpoint.to_string(), name, &value])
                .expect("in-memory write");
        }
    }
    w.into_inner().expect("in-memory flush")
}

/// Final aggregates as `key,value` rows.
pub fn summary_csv(report: &MetricsReport) -> Vec<u8> {
    let t = &report.tallies;
    let rows: Vec<(&str, String)> = vec![
        ("run_id", report.run_id.clone()),
        ("seed", report.seed.to_string()),
        ("checkpoints", report.series.len().to_string()),
        ("traders", report.config.traders.to_string()),
        ("alpha", report.config.alpha.to_string()),
        ("kappa", report.config.kappa.to_string()),
        ("ell", report.config.ell.to_string()),
        ("submission_decisions", t.submission_decisions.to_string()),
        ("submission_wrong", t.submission_wrong.to_string()),
        ("round_decisions", t.round_decisions.to_string()),
        ("round_wrong", t.round_wrong.to_string()),
        ("votes", t.votes.to_string()),
        ("wrong_votes", t.wrong_votes.to_string()),
        ("terminations", t.terminations.to_string()),
        ("memberships", t.memberships.to_string()),
        ("mean_penalty_fraction", report.penalty_fraction.mean().to_string()),
        ("mean_degree", report.mean_degree.to_string()),
        ("attacker_balance_delta", report.attacker_balance_delta.to_string()),
        ("conservation_residual", report.conservation_residual.to_string()),
        ("audit_clean", report.audit.is_clean().to_string()),
    ];
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["key", "value"]).expect("in-memory write");
    for (k, v) in rows {
        w.write_record([k, v.as_str()]).expect("in-memory write");
    }
    for (degree, count) in &report.degree_histogram {
        w.write_record([format!("degree_{degree}"), count.to_string()]).expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

/// Writes `{run_id}.events`, `{run_id}.metrics.csv` and `{run_id}.summary`
/// and returns their paths.
pub fn write_outputs(dir: &Path, exp: &Experiment) -> Result<Vec<PathBuf>, HarnessError> {
    let io_err = |path: &Path| {
        let path = path.to_path_buf();
        move |source| HarnessError::Io { path, source }
    };
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let id = &exp.report.run_id;
    let files = [
        (format!("{id}.events"), exp.events.as_bytes().to_vec()),
        (format!("{id}.metrics.csv"), metrics_csv(&exp.report)),
        (format!("{id}.summary"), summary_csv(&exp.report)),
    ];
    let mut paths = Vec::new();
    for (name, bytes) in files {
        let path = dir.join(name);
        fs::write(&path, bytes).map_err(io_err(&path))?;
        paths.push(path);
    }
    Ok(paths)
}

/// Runs `trials` consecutive seeds starting at `cfg.seed`, in parallel.
/// Results come back in seed order.
pub fn run_trials(cfg: &SimConfig, trials: usize) -> Result<Vec<Experiment>, HarnessError> {
    use rayon::prelude::*;
    (0..trials as u64)
        .into_par_iter()
        .map(|t| run_experiment(SimConfig { seed: cfg.seed.wrapping_add(t), ..cfg.clone() }))
        .collect()
}

/// Totals over several reports; every field adds, so order does not matter.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Pooled {
    pub runs: u64,
    pub tallies: Tallies,
    pub penalty_fraction: Moments,
    /// Per-run mean degrees.
    pub degree: Moments,
    pub ring_sizes: BTreeMap<usize, u64>,
    pub frames: u64,
    pub residual_abs: u64,
}

impl Pooled {
    pub fn add(&mut self, r: &MetricsReport) {
        self.runs += 1;
        self.tallies.merge(&r.tallies);
        self.penalty_fraction.merge(&r.penalty_fraction);
        self.degree.push(r.mean_degree);
        for (&k, &v) in &r.ring_sizes {
            *self.ring_sizes.entry(k).or_insert(0) += v;
        }
        self.frames += r.frames;
        self.residual_abs += r.conservation_residual.unsigned_abs();
    }

    pub fn of<'a>(reports: impl IntoIterator<Item = &'a MetricsReport>) -> Self {
        let mut p = Pooled::default();
        for r in reports {
            p.add(r);
        }
        p
    }
}
