use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use kex::config::{OutputFormat, SchemeChoice, SweepAxis, SweepSpec};
use kex::deadline::Deadline;
use kex::formats::{write_instance, write_weights, InstanceFile};
use kex::report::{self, Table};
use kex::{learning_config, run_experiment, run_sweep, Experiment, ExperimentConfig, KexError, Overrides};
use kex_core::fairness::{GroupProfile, WelfareScores, KPD_REFERENCE_QUEUE};
use kex_core::learn::run_learning_with;
use kex_core::random::replication_seed;
use kex_core::sim::{Simulation, SimulationConfig};

#[derive(Parser)]
#[command(name = "kex", version, about = "Dynamic kidney exchange experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run replications of one configuration and write the report tables.
    Simulate(Common),
    /// Learn a weight table and write it to the weights file.
    Learn {
        #[command(flatten)]
        common: Common,
        /// Update rule, e.g. `Lin(1)` or `Exp(3)`.
        #[arg(long)]
        rule: Option<String>,
        #[arg(long)]
        iterations: Option<usize>,
    },
    /// Repeat an experiment over values of W, C, P or the altruist rate.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// W, C, P or lambda_a.
        #[arg(long)]
        axis: Option<SweepAxis>,
        /// Comma-separated values, sorted.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        values: Vec<f64>,
    },
    /// Score end-of-run queues per cPRA group.
    Fairness {
        /// `LABEL=q1,q2,q3,q4,q5`; repeatable.
        #[arg(long = "queue", value_parser = parse_queue)]
        queues: Vec<(String, [f64; 5])>,
        /// CSV with columns Model,G1..G5 (as written to queues.csv).
        #[arg(long)]
        queues_file: Option<PathBuf>,
        /// Queue whose scores scale to 1; defaults to the KPD reference.
        #[arg(long, value_parser = parse_five)]
        baseline: Option<[f64; 5]>,
        /// Directory for fairness.csv; prints to stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write the packing instance of one period of one replication.
    ExportInstance {
        #[command(flatten)]
        common: Common,
        /// Period whose instance is written; earlier periods are solved.
        #[arg(long, default_value_t = 0)]
        period: u32,
        #[arg(long, default_value_t = 0)]
        replication: u64,
    },
}

#[derive(Args)]
struct Common {
    /// TOML config; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    scheme: Option<SchemeChoice>,
    #[arg(long)]
    weights_file: Option<PathBuf>,
    /// Altruist penalty.
    #[arg(long = "W", allow_hyphen_values = true)]
    w: Option<f64>,
    /// Maximum cycle length.
    #[arg(long = "C")]
    c: Option<usize>,
    /// Maximum chain length (patients).
    #[arg(long = "P")]
    p: Option<usize>,
    #[arg(long)]
    pair_rate: Option<f64>,
    #[arg(long)]
    ndad_rate: Option<f64>,
    #[arg(long)]
    periods: Option<u32>,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    format: Option<OutputFormat>,
}

impl Common {
    fn load(&self) -> Result<ExperimentConfig, KexError> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        Overrides {
            scheme: self.scheme,
            weights_file: self.weights_file.clone(),
            altruist_penalty: self.w,
            max_cycle: self.c,
            max_chain: self.p,
            pair_rate: self.pair_rate,
            ndad_rate: self.ndad_rate,
            periods: self.periods,
            replications: self.reps,
            seed: self.seed,
            out_dir: self.out.clone(),
            format: self.format,
        }
        .apply(&mut cfg);
        Ok(cfg)
    }
}

fn parse_five(s: &str) -> Result<[f64; 5], String> {
    let v: Vec<f64> =
        s.split(',').map(|x| x.trim().parse::<f64>().map_err(|e| e.to_string())).collect::<Result<_, _>>()?;
    v.try_into().map_err(|v: Vec<f64>| format!("expected 5 values, got {}", v.len()))
}

fn parse_queue(s: &str) -> Result<(String, [f64; 5]), String> {
    let (label, values) = s.split_once('=').ok_or("expected LABEL=q1,q2,q3,q4,q5")?;
    Ok((label.to_string(), parse_five(values)?))
}

fn print_written(paths: &[PathBuf]) {
    for p in paths {
        println!("wrote {}", p.display());
    }
}

fn incomplete(warnings: &[String]) {
    for w in warnings {
        eprintln!("warning: {w}");
    }
}

fn simulate(common: &Common) -> Result<bool, KexError> {
    let cfg = common.load()?;
    let report = run_experiment(&Experiment::from_config(&cfg)?)?;
    incomplete(&report.warnings);
    let written =
        report::emit(&cfg.out_dir, cfg.format, &report::experiment_tables(std::slice::from_ref(&report)), &report)?;
    print_written(&written);
    Ok(report.complete)
}

fn sweep(common: &Common, axis: Option<SweepAxis>, values: Vec<f64>) -> Result<bool, KexError> {
    let mut cfg = common.load()?;
    if let Some(axis) = axis {
        cfg.sweep = Some(SweepSpec { axis, values });
    } else if !values.is_empty() {
        let axis =
            cfg.sweep.as_ref().map(|s| s.axis).ok_or_else(|| KexError::Config("--values needs an axis".into()))?;
        cfg.sweep = Some(SweepSpec { axis, values });
    }
    let spec = cfg.sweep.clone().ok_or_else(|| KexError::Config("no sweep axis given".into()))?;
    let result = run_sweep(&Experiment::from_config(&cfg)?, spec.axis, &spec.values)?;
    for row in &result.rows {
        incomplete(&row.report.warnings);
    }
    print_written(&report::emit(&cfg.out_dir, cfg.format, &report::sweep_tables(&result), &result)?);
    Ok(result.complete())
}

fn learn(common: &Common, rule: Option<String>, iterations: Option<usize>) -> Result<bool, KexError> {
    let mut cfg = common.load()?;
    if let Some(r) = rule {
        cfg.learning.rule = r;
    }
    if let Some(n) = iterations {
        cfg.learning.outer_iterations = n;
    }
    let rule = cfg.learning.update_rule()?;
    let lc = learning_config(&cfg);
    let outcome = run_learning_with(&lc, &rule, &Deadline::from_secs(cfg.round_timeout_secs))?;
    let target = cfg.weights_file.clone().unwrap_or_else(|| cfg.out_dir.join("weights.txt"));
    if let Some(dir) = target.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| KexError::io(dir, e))?;
    }
    std::fs::write(&target, write_weights(&outcome.table)).map_err(|e| KexError::io(&target, e))?;
    println!("wrote {}", target.display());

    let mut trace = Table {
        name: "learning".into(),
        header: ["Iteration", "PatientsArrived", "#Matches", "FinalQueue", "MaxWeight"].map(String::from).to_vec(),
        rows: Vec::new(),
    };
    for it in &outcome.iterations {
        trace.rows.push(vec![
            it.iteration.to_string(),
            it.patients_arrived.to_string(),
            it.patients_matched.to_string(),
            it.final_queue_pairs.to_string(),
            format!("{:.4}", it.max_weight),
        ]);
    }
    print_written(&report::emit(&cfg.out_dir, cfg.format, &[trace], &outcome.iterations)?);
    println!("rule {rule}: {} iterations", outcome.iterations.len());
    Ok(true)
}

fn read_queue_csv(path: &Path) -> Result<Vec<(String, [f64; 5])>, KexError> {
    let mut reader = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec?;
        let bad = || KexError::Parse { what: "queue file", line: i + 2, message: "expected Model,G1,..,G5".into() };
        if rec.len() != 6 {
            return Err(bad());
        }
        let mut q = [0.0; 5];
        for (j, cell) in rec.iter().skip(1).enumerate() {
            q[j] = cell.trim().parse().map_err(|_| bad())?;
        }
        out.push((rec[0].to_string(), q));
    }
    Ok(out)
}

fn fairness(
    mut queues: Vec<(String, [f64; 5])>,
    file: Option<PathBuf>,
    baseline: Option<[f64; 5]>,
    out: Option<PathBuf>,
) -> Result<bool, KexError> {
    if let Some(path) = file {
        queues.extend(read_queue_csv(&path)?);
    }
    if queues.is_empty() {
        return Err(KexError::Config("give --queue or --queues-file".into()));
    }
    let base = WelfareScores::compute(&GroupProfile::new(baseline.unwrap_or(KPD_REFERENCE_QUEUE))).0;
    let mut t = Table {
        name: "fairness".into(),
        header: [
            "Model",
            "Utilitarian",
            "Nash",
            "Egalitarian",
            "UtilitarianFairness",
            "NashFairness",
            "EgalitarianFairness",
        ]
        .map(String::from)
        .to_vec(),
        rows: Vec::new(),
    };
    for (label, q) in &queues {
        let (s, u) = WelfareScores::compute(&GroupProfile::new(*q));
        if u.any_floored() {
            eprintln!("warning: {label}: empty group counted as one");
        }
        let f = s.scaled(&base).map_err(|e| KexError::Config(e.to_string()))?;
        t.rows.push(vec![
            label.clone(),
            format!("{:.5}", s.utilitarian),
            format!("{:.5}", s.nash),
            format!("{:.5}", s.egalitarian),
            format!("{:.2}", f.utilitarian),
            format!("{:.2}", f.nash),
            format!("{:.2}", f.egalitarian),
        ]);
    }
    let csv = t.to_csv()?;
    match out {
        Some(dir) => {
            std::fs::create_dir_all(&dir).map_err(|e| KexError::io(&dir, e))?;
            let path = dir.join("fairness.csv");
            std::fs::write(&path, csv).map_err(|e| KexError::io(&path, e))?;
            println!("wrote {}", path.display());
        }
        None => print!("{csv}"),
    }
    Ok(true)
}

fn export_instance(common: &Common, period: u32, replication: u64) -> Result<bool, KexError> {
    let mut cfg = common.load()?;
    cfg.periods = cfg.periods.max(period + 1);
    let exp = Experiment::from_config(&cfg)?;
    let sim_cfg = SimulationConfig::new(exp.pool.clone(), exp.limits, exp.scheme.clone());
    let mut sim = Simulation::new(&sim_cfg, replication_seed(exp.seed, replication))
        .map_err(|e| KexError::Config(e.to_string()))?;
    let deadline = Deadline::from_secs(cfg.round_timeout_secs);
    for _ in 0..period {
        sim.step(&deadline)?;
    }
    sim.admit_arrivals();
    let (graph, instance) = sim.build_instance()?;
    let text = write_instance(&InstanceFile::new(&graph, instance.candidates()));
    std::fs::create_dir_all(&cfg.out_dir).map_err(|e| KexError::io(&cfg.out_dir, e))?;
    let path = cfg.out_dir.join(format!("instance_r{replication}_p{period}.txt"));
    std::fs::write(&path, text).map_err(|e| KexError::io(&path, e))?;
    println!("wrote {} ({} nodes, {} candidates)", path.display(), graph.node_count(), instance.candidates().len());
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(common) => simulate(&common),
        Command::Learn { common, rule, iterations } => learn(&common, rule, iterations),
        Command::Sweep { common, axis, values } => sweep(&common, axis, values),
        Command::Fairness { queues, queues_file, baseline, out } => fairness(queues, queues_file, baseline, out),
        Command::ExportInstance { common, period, replication } => export_instance(&common, period, replication),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("error: some replications aborted; report marked incomplete");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
