use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use lor_analytics::binomial::{berry_esseen_envelope, exact_wrong_vote_prob};
use lor_analytics::cycles::expected_cycle_count;
use lor_analytics::degree::{expected_extra_degree, worst_case_degree_bound, DegreeModel};
use lor_analytics::penalty::{expected_penalty_bound, SizeRegime};
use lor_core::adversary::{inject_attack, AttackScenario};
use lor_core::protocol::PenaltyMode;
use lor_core::randomness::HashDraw;
use lor_core::{SimConfig, Simulation};
use lor_harness::acceptance::{criterion_by_name, run_criterion, CRITERIA};
use lor_harness::report::{report_of, Experiment};
use lor_harness::{compare_to_theory, degree_census, load_config, run_trials, sample_frame, write_outputs, Pooled};

const PASS: u8 = 0;
const USAGE: u8 = 1;
const FAIL: u8 = 2;

#[derive(Parser)]
#[command(name = "lor", version, about = "Seeded simulator and analysis harness for the ring protocol")]
struct Cli {
    /// TOML configuration; defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,
    /// Independent seeds, run in parallel starting at the seed.
    #[arg(long, global = true, default_value_t = 1)]
    trials: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment and write events, metrics and summary files.
    Run,
    /// Print closed-form predictions for the configuration.
    Theory,
    /// Degree census of sampled frames at the configured N, κ and ℓ.
    Census,
    /// Compare runs with theory, or run acceptance criteria.
    Compare {
        /// Criterion number or name, or `all`.
        #[arg(long)]
        criterion: Option<String>,
    },
    /// Run one attack scenario.
    Attack {
        #[arg(long)]
        scenario: AttackScenario,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { USAGE } else { PASS };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let mut cfg = match &cli.config {
        Some(path) => match load_config(path) {
            Ok(c) => c,
            Err(e) => {
                eprintln!("error: {}: {e}", path.display());
                return ExitCode::from(USAGE);
            }
        },
        None => SimConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if cli.trials == 0 {
        eprintln!("error: --trials must be at least 1");
        return ExitCode::from(USAGE);
    }
    let result = match &cli.command {
        Command::Run => run(&cli, &cfg),
        Command::Theory => theory(&cfg),
        Command::Census => census(&cli, &cfg),
        Command::Compare { criterion: Some(c) } => acceptance(c),
        Command::Compare { criterion: None } => compare(&cli, &cfg),
        Command::Attack { scenario } => attack(&cli, &cfg, *scenario),
    };
    match result {
        Ok(true) => ExitCode::from(PASS),
        Ok(false) => ExitCode::from(FAIL),
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(USAGE)
        }
        Err(Failure::Run(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(FAIL)
        }
    }
}

enum Failure {
    Usage(String),
    Run(String),
}

impl<E: std::error::Error> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Run(e.to_string())
    }
}

fn trials(cli: &Cli, cfg: &SimConfig) -> Result<Vec<Experiment>, Failure> {
    Ok(run_trials(cfg, cli.trials)?)
}

fn run(cli: &Cli, cfg: &SimConfig) -> Result<bool, Failure> {
    let mut out = io::stdout().lock();
    let mut clean = true;
    for exp in trials(cli, cfg)? {
        write_outputs(&cli.out_dir, &exp)?;
        let r = &exp.report;
        clean &= r.audit.is_clean();
        writeln!(
            out,
            "{}: {} checkpoints, {} decisions ({} wrong), {} terminations, residual {}",
            r.run_id,
            r.series.len(),
            r.tallies.submission_decisions + r.tallies.round_decisions,
            r.tallies.submission_wrong + r.tallies.round_wrong,
            r.tallies.terminations,
            r.conservation_residual
        )?;
    }
    Ok(clean)
}

fn theory(cfg: &SimConfig) -> Result<bool, Failure> {
    let (k, a, l, n) = (cfg.kappa as u64, cfg.alpha, cfg.ell as u64, cfg.traders as u64);
    let mut rows: Vec<(String, f64)> = vec![("exact_wrong_vote_prob".into(), exact_wrong_vote_prob(k, a))];
    if let Ok((approx, bound)) = berry_esseen_envelope(k, a) {
        rows.push(("normal_approx".into(), approx));
        rows.push(("berry_esseen_bound".into(), bound));
    }
    for i in 1..=5 {
        rows.push((format!("lambda_{i}"), expected_cycle_count(l, i)));
    }
    let model = DegreeModel::bounding(k, l);
    rows.push(("expected_extra_degree".into(), expected_extra_degree(&model)));
    rows.push(("typical_degree".into(), model.predicted_mean_degree()));
    rows.push(("worst_case_degree".into(), worst_case_degree_bound(k, l)));
    let regime = match cfg.phi.mode {
        PenaltyMode::InverseSquare => Some(SizeRegime::Unbounded),
        PenaltyMode::Constant => Some(SizeRegime::Bounded {
            max_size: cfg.service_catalog.iter().map(|s| s.ring_size).max().unwrap_or(2) as u64,
            factor: None,
        }),
        PenaltyMode::PerRoundR => None,
    };
    if let Some(bound) = regime.and_then(|r| expected_penalty_bound(n, a, &cfg.phi, r).ok()) {
        rows.push(("expected_penalty_bound".into(), bound));
    }
    let mut out = io::stdout().lock();
    writeln!(out, "quantity,value")?;
    for (q, v) in rows {
        writeln!(out, "{q},{v}")?;
    }
    Ok(true)
}

fn census(cli: &Cli, cfg: &SimConfig) -> Result<bool, Failure> {
    let model = DegreeModel::bounding(cfg.kappa as u64, cfg.ell as u64);
    let worst = worst_case_degree_bound(model.kappa, model.ell);
    let mut out = io::stdout().lock();
    writeln!(out, "seed,mean_degree,min,max,identity")?;
    let mut ok = true;
    for t in 0..cli.trials as u64 {
        let seed = cfg.seed.wrapping_add(t);
        let frame = sample_frame(cfg.traders, &model, &mut HashDraw::from_seed(seed));
        let c = degree_census(&frame.snapshot);
        let identity = frame.decomposition_mismatch(&c).is_none();
        ok &= identity && c.mean <= worst;
        let min = c.histogram.keys().next().copied().unwrap_or(0);
        let max = c.histogram.keys().last().copied().unwrap_or(0);
        writeln!(out, "{seed},{},{min},{max},{identity}", c.mean)?;
    }
    writeln!(out, "# typical {:.6}, worst case {worst:.6}", model.predicted_mean_degree())?;
    Ok(ok)
}

fn compare(cli: &Cli, cfg: &SimConfig) -> Result<bool, Failure> {
    let runs = trials(cli, cfg)?;
    let pooled = Pooled::of(runs.iter().map(|e| &e.report));
    let rows = compare_to_theory(&pooled, cfg);
    let mut out = io::stdout().lock();
    writeln!(out, "quantity,kind,observed,predicted,std_err,samples,z,within")?;
    let mut ok = true;
    for r in rows {
        let within = r.within(lor_harness::acceptance::SIGMAS);
        ok &= within;
        let z = r.z.map_or("indeterminate".to_string(), |z| format!("{z:.4}"));
        writeln!(
            out,
            "{},{:?},{},{},{},{},{z},{within}",
            r.quantity, r.kind, r.observed, r.predicted, r.std_err, r.samples
        )?;
    }
    Ok(ok)
}

fn acceptance(which: &str) -> Result<bool, Failure> {
    let ids: Vec<u8> = if which == "all" {
        CRITERIA.iter().map(|c| c.0).collect()
    } else {
        vec![criterion_by_name(which).ok_or_else(|| Failure::Usage(format!("unknown criterion `{which}`")))?]
    };
    let mut ok = true;
    for id in ids {
        let outcome = run_criterion(id)?;
        ok &= outcome.passed;
        writeln!(io::stdout().lock(), "{outcome}")?;
    }
    Ok(ok)
}

fn attack(cli: &Cli, cfg: &SimConfig, scenario: AttackScenario) -> Result<bool, Failure> {
    let mut sim = Simulation::new(cfg.clone())?;
    let report = inject_attack(scenario, &mut sim)?;
    let exp = Experiment { report: report_of(&sim)?, events: sim.tcb().events().to_jsonl() };
    write_outputs(&cli.out_dir, &exp)?;
    writeln!(io::stdout().lock(), "{}", serde_json::to_string_pretty(&report)?)?;
    Ok(report.audit.is_clean())
}
