use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use rayon::prelude::*;
use turnpike::taskdata::risk_from_terminal;
use turnpike::training::{train, StepRule, TrainConfig};
use turnpike::turnpike::{check_dissipation, depth_bounds, DepthBounds};
use turnpike::{
    decision_grid, generate_two_spiral, rollout, Dataset, Decision, SpiralConfig, StageCostParams,
};

use crate::error::{CliError, Result};
use crate::formats::{
    dataset_to_csv, load_dataset, write_output, AnalysisReport, ModelFile, MODEL_FORMAT_VERSION,
    REPORT_FORMAT_VERSION,
};
use crate::svg;

/// Environment variable capping worker threads.
pub const THREADS_ENV: &str = "TURNPIKE_THREADS";

#[derive(Debug, Clone, Args)]
pub struct GenArgs {
    /// Total number of samples (even).
    #[arg(long, default_value_t = 300)]
    pub samples: usize,
    /// Half-width of the uniform noise box.
    #[arg(long, default_value_t = 0.2)]
    pub noise: f64,
    #[arg(long, default_value_t = 0.25)]
    pub radius: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = false)]
    pub deterministic: bool,
    /// Output CSV path, `-` for standard output.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StepRuleArg {
    Adam,
    Gd,
}

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value_t = 10)]
    pub depth: usize,
    /// Expected state width; checked against the dataset.
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long, default_value_t = 1e-2)]
    pub q: f64,
    #[arg(long, default_value_t = 1e-3)]
    pub r: f64,
    /// Terminal-loss weight; defaults to 100·D.
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long, default_value_t = 50_000)]
    pub max_iters: usize,
    #[arg(long, value_enum, default_value_t = StepRuleArg::Adam)]
    pub step_rule: StepRuleArg,
    #[arg(long, default_value_t = 1.0)]
    pub lr: f64,
    #[arg(long, default_value_t = 1e-2)]
    pub final_lr_fraction: f64,
    #[arg(long, default_value_t = 0.1)]
    pub init_scale: f64,
    #[arg(long, default_value_t = 1e-6)]
    pub tol_grad: f64,
    #[arg(long, default_value_t = 1e2)]
    pub input_rescale: f64,
    /// Classification radius used for the printed empirical risk.
    #[arg(long, default_value_t = 1.0)]
    pub delta: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = false)]
    pub deterministic: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct AnalyzeArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub delta: f64,
    /// Dissipation margin `ν ∈ (0, 1]`.
    #[arg(long, default_value_t = 1.0)]
    pub nu: f64,
    #[arg(long, default_value_t = false)]
    pub deterministic: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct GridArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, default_value_t = -2.0, allow_negative_numbers = true)]
    pub min: f64,
    #[arg(long, default_value_t = 2.0, allow_negative_numbers = true)]
    pub max: f64,
    #[arg(long, default_value_t = 200)]
    pub res: usize,
    #[arg(long, default_value_t = 1.0)]
    pub delta: f64,
    /// Optional SVG rendering of the grid.
    #[arg(long)]
    pub svg: Option<PathBuf>,
    /// Dataset whose points are overlaid on the SVG.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long, default_value_t = false)]
    pub deterministic: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct ReproArgs {
    /// 1: noise-free data, 2: noisy data.
    #[arg(long)]
    pub table: u32,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 50_000)]
    pub max_iters: usize,
    #[arg(long, value_delimiter = ',', default_values_t = [5usize, 10])]
    pub depths: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_values_t = [20usize, 50, 100, 250, 500])]
    pub samples: Vec<usize>,
    #[arg(long, default_value_t = 1.0)]
    pub epsilon: f64,
    #[arg(long, default_value_t = false)]
    pub deterministic: bool,
    #[arg(long)]
    pub out: PathBuf,
}

/// Where human-readable summaries go: stderr when data goes to stdout.
fn summary_sink(out: &Path) -> Box<dyn Write> {
    if out.as_os_str() == "-" {
        Box::new(std::io::stderr())
    } else {
        Box::new(std::io::stdout())
    }
}

fn say(sink: &mut dyn Write, msg: std::fmt::Arguments<'_>) {
    // Summary output is best effort; a closed pipe must not fail the command.
    let _ = writeln!(sink, "{msg}");
}

pub fn cmd_gen(args: &GenArgs) -> Result<()> {
    if args.samples == 0 || !args.samples.is_multiple_of(2) {
        return Err(CliError::usage("samples must be even"));
    }
    if !(args.noise >= 0.0) {
        return Err(CliError::usage("noise must be ≥ 0"));
    }
    if !(args.radius > 0.0) {
        return Err(CliError::usage("radius must be > 0"));
    }
    let mut cfg = SpiralConfig::new(args.samples, args.noise, args.seed);
    cfg.start_radius = args.radius;
    let data = generate_two_spiral(&cfg)?;
    write_output(&args.out, &dataset_to_csv(&data)?)?;
    say(
        &mut *summary_sink(&args.out),
        format_args!(
            "wrote {} samples ({} per class, noise {}, seed {}) to {}",
            data.len(),
            data.len() / 2,
            args.noise,
            args.seed,
            args.out.display()
        ),
    );
    Ok(())
}

pub fn train_config(args: &TrainArgs, samples: usize) -> Result<TrainConfig> {
    if args.depth == 0 {
        return Err(CliError::usage("depth must be ≥ 1"));
    }
    let mut cfg = TrainConfig::two_spiral(args.depth, samples);
    cfg.cost = StageCostParams::quadratic(args.q, args.r);
    if let Some(g) = args.gamma {
        cfg.gamma = g;
    }
    cfg.max_iters = args.max_iters;
    cfg.step_rule = match args.step_rule {
        StepRuleArg::Adam => StepRule::Adam,
        StepRuleArg::Gd => StepRule::GradientDescent,
    };
    cfg.learning_rate = args.lr;
    cfg.final_lr_fraction = args.final_lr_fraction;
    cfg.init_scale = args.init_scale;
    cfg.tol_grad = args.tol_grad;
    cfg.input_rescale = args.input_rescale;
    cfg.seed = args.seed;
    cfg.validate().map_err(|e| CliError::usage(e.to_string()))?;
    Ok(cfg)
}

/// Trains on an in-memory dataset and packages the model file.
pub fn train_model(data: &Dataset, cfg: &TrainConfig) -> Result<ModelFile> {
    let res = train(data, cfg)?;
    Ok(ModelFile {
        format_version: MODEL_FORMAT_VERSION,
        dim: res.weights.dim(),
        depth: res.weights.depth(),
        activation: cfg.activation,
        matrix_layout: "column-major".into(),
        layers: res.weights.layers().to_vec(),
        classes: data.classes().to_vec(),
        config: cfg.clone(),
        objective: res.objective,
        terminal_loss: res.trajectory.terminal_loss,
        iterations: res.iterations,
        converged: res.converged,
    })
}

pub fn cmd_train(args: &TrainArgs) -> Result<()> {
    if args.depth == 0 {
        return Err(CliError::usage("depth must be ≥ 1"));
    }
    let data = load_dataset(&args.data)?;
    if let Some(dim) = args.dim {
        if dim != data.dim() {
            return Err(CliError::usage(format!(
                "dimension mismatch: --dim {dim} but {} has width {}",
                args.data.display(),
                data.dim()
            )));
        }
    }
    let cfg = train_config(args, data.len())?;
    let model = train_model(&data, &cfg)?;
    let weights = model.weights()?;
    let risk = turnpike::empirical_risk(&data, &weights, cfg.activation, args.delta)?;
    write_output(&args.out, &model.to_json())?;
    let mut sink = summary_sink(&args.out);
    say(
        &mut *sink,
        format_args!(
            "depth {} samples {} iterations {} converged {}",
            model.depth,
            data.len(),
            model.iterations,
            model.converged
        ),
    );
    say(&mut *sink, format_args!("objective {:.6e}", model.objective));
    say(&mut *sink, format_args!("terminal loss {:.6e}", model.terminal_loss));
    say(&mut *sink, format_args!("empirical risk {risk} (delta {})", args.delta));
    Ok(())
}

/// Full analysis of a model on a dataset.
pub fn analyze_model(
    model: &ModelFile,
    data: &Dataset,
    epsilon: f64,
    delta: f64,
    nu: f64,
) -> Result<AnalysisReport> {
    if !(epsilon > 0.0) {
        return Err(CliError::usage("epsilon must be > 0"));
    }
    if !(delta > 0.0) {
        return Err(CliError::usage("delta must be > 0"));
    }
    if model.dim != data.dim() {
        return Err(CliError::usage(format!(
            "dimension mismatch: model width {} but data width {}",
            model.dim,
            data.dim()
        )));
    }
    let weights = model.weights()?;
    let pi = model.config.cost;
    let traj = rollout(data.inputs(), &weights, model.activation, data.anchors(), &pi)?;
    let (bounds, reports) = depth_bounds(&traj, data.anchors(), &pi, epsilon)?;
    let dissipation = check_dissipation(&traj, data.anchors(), &pi, nu, epsilon)?;
    let empirical_risk = risk_from_terminal(data, traj.final_state(), delta)?;
    Ok(AnalysisReport {
        format_version: REPORT_FORMAT_VERSION,
        depth: weights.depth(),
        samples: data.len(),
        epsilon,
        delta,
        training_pi: pi,
        beta: bounds.beta,
        rho: bounds.rho,
        v_hat: reports[0].v_hat,
        n2_beta_rho: bounds.n2_beta_rho,
        n2: bounds.n2,
        n_inf: bounds.n_inf,
        q_eps_count: reports[0].q_eps_count,
        q_eps_complement: reports[0].q_eps_complement,
        terminal_loss: traj.terminal_loss,
        empirical_risk,
        stage_costs: traj.stage_costs.clone(),
        dissipation,
        reports,
    })
}

pub fn cmd_analyze(args: &AnalyzeArgs) -> Result<()> {
    if !(args.epsilon > 0.0) {
        return Err(CliError::usage("epsilon must be > 0"));
    }
    if !(args.nu > 0.0 && args.nu <= 1.0) {
        return Err(CliError::usage("nu must be in (0, 1]"));
    }
    let model = ModelFile::load(&args.model)?;
    let data = load_dataset(&args.data)?;
    let report = analyze_model(&model, &data, args.epsilon, args.delta, args.nu)?;
    write_output(&args.out, &report.to_json())?;
    let mut sink = summary_sink(&args.out);
    say(
        &mut *sink,
        format_args!(
            "beta {:.4} rho {:.4}  N2(beta,rho) {:.4e}  N2 {:.4e}  Ninf {:.4}",
            report.beta, report.rho, report.n2_beta_rho, report.n2, report.n_inf
        ),
    );
    say(
        &mut *sink,
        format_args!(
            "#Q_eps {} #Q^_eps {} (eps {})  empirical risk {} (delta {})",
            report.q_eps_count, report.q_eps_complement, args.epsilon, report.empirical_risk, args.delta
        ),
    );
    Ok(())
}

pub fn cmd_grid(args: &GridArgs) -> Result<()> {
    if args.res < 2 {
        return Err(CliError::usage("resolution must be ≥ 2"));
    }
    if !(args.min < args.max) {
        return Err(CliError::usage("min < max required"));
    }
    if !(args.delta > 0.0) {
        return Err(CliError::usage("delta must be > 0"));
    }
    let model = ModelFile::load(&args.model)?;
    let weights = model.weights()?;
    let grid = decision_grid(
        &weights,
        model.activation,
        &model.classes,
        args.delta,
        args.min,
        args.max,
        args.res,
    )?;
    let mut w = csv::Writer::from_writer(Vec::new());
    let io_err = |e: csv::Error| CliError::parse(&args.out, e.to_string());
    w.write_record(["x", "y", "label"]).map_err(io_err)?;
    for p in &grid {
        let label = match p.decision {
            Decision::Class(l) => l.to_string(),
            Decision::Reject => "reject".to_string(),
        };
        w.write_record([p.x.to_string(), p.y.to_string(), label])
            .map_err(io_err)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| CliError::parse(&args.out, e.to_string()))?;
    write_output(&args.out, &bytes)?;
    if let Some(svg_path) = &args.svg {
        let data = args.data.as_deref().map(load_dataset).transpose()?;
        let doc = svg::render(&grid, args.min, args.max, args.res, data.as_ref());
        write_output(svg_path, doc.as_bytes())?;
    }
    say(
        &mut *summary_sink(&args.out),
        format_args!("wrote {} grid points to {}", grid.len(), args.out.display()),
    );
    Ok(())
}

/// One row of a reproduced table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReproRow {
    pub depth: usize,
    pub samples: usize,
    pub bounds: DepthBounds,
    pub terminal_loss: f64,
    pub empirical_risk: f64,
}

/// A trained and analyzed grid cell, kept for further checks.
#[derive(Debug, Clone)]
pub struct ReproCell {
    pub row: ReproRow,
    pub data: Dataset,
    pub model: ModelFile,
    pub report: AnalysisReport,
}

pub fn table_noise(table: u32) -> Result<f64> {
    match table {
        1 => Ok(0.0),
        2 => Ok(0.2),
        other => Err(CliError::usage(format!("table must be 1 or 2, got {other}"))),
    }
}

/// Worker count from `TURNPIKE_THREADS`, or rayon's default.
pub fn thread_cap() -> Option<usize> {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|n| *n > 0)
}

/// Trains and analyzes every `(N, D)` cell; output order is fixed.
pub fn run_repro(args: &ReproArgs) -> Result<Vec<ReproCell>> {
    let noise = table_noise(args.table)?;
    if args.depths.contains(&0) {
        return Err(CliError::usage("depth must be ≥ 1"));
    }
    if args.samples.iter().any(|d| *d == 0 || !d.is_multiple_of(2)) {
        return Err(CliError::usage("samples must be even"));
    }
    let cells: Vec<(usize, usize)> = args
        .depths
        .iter()
        .flat_map(|&n| args.samples.iter().map(move |&d| (n, d)))
        .collect();
    let run = |&(depth, samples): &(usize, usize)| -> Result<ReproCell> {
        let data = generate_two_spiral(&SpiralConfig::new(samples, noise, args.seed))?;
        let mut cfg = TrainConfig::two_spiral(depth, samples);
        cfg.max_iters = args.max_iters;
        cfg.seed = args.seed;
        let model = train_model(&data, &cfg)?;
        let report = analyze_model(&model, &data, args.epsilon, 1.0, 1.0)?;
        Ok(ReproCell {
            row: ReproRow {
                depth,
                samples,
                bounds: DepthBounds {
                    beta: report.beta,
                    rho: report.rho,
                    n2_beta_rho: report.n2_beta_rho,
                    n2: report.n2,
                    n_inf: report.n_inf,
                },
                terminal_loss: report.terminal_loss,
                empirical_risk: report.empirical_risk,
            },
            data,
            model,
            report,
        })
    };
    if args.deterministic && thread_cap() == Some(1) {
        return cells.iter().map(run).collect();
    }
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = thread_cap() {
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| CliError::usage(format!("thread pool: {e}")))?;
    pool.install(|| cells.par_iter().map(run).collect())
}

pub fn repro_csv(rows: &[ReproRow]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| CliError::parse("<repro>", e.to_string());
    w.write_record(["N", "D", "beta", "rho", "n2_beta_rho", "n2", "n_inf"])
        .map_err(err)?;
    for r in rows {
        let b = r.bounds;
        w.write_record([
            r.depth.to_string(),
            r.samples.to_string(),
            b.beta.to_string(),
            b.rho.to_string(),
            b.n2_beta_rho.to_string(),
            b.n2.to_string(),
            b.n_inf.to_string(),
        ])
        .map_err(err)?;
    }
    w.into_inner()
        .map_err(|e| CliError::parse("<repro>", e.to_string()))
}

pub fn cmd_repro(args: &ReproArgs) -> Result<()> {
    let cells = run_repro(args)?;
    let rows: Vec<ReproRow> = cells.iter().map(|c| c.row).collect();
    write_output(&args.out, &repro_csv(&rows)?)?;
    let mut sink = summary_sink(&args.out);
    say(
        &mut *sink,
        format_args!(
            "{:>3} {:>4} {:>7} {:>6} {:>12} {:>10} {:>7}   loss      risk",
            "N", "D", "beta", "rho", "N2(b,r)", "N2", "Ninf"
        ),
    );
    for r in &rows {
        let b = r.bounds;
        say(
            &mut *sink,
            format_args!(
                "{:>3} {:>4} {:>7.3} {:>6.3} {:>12.3e} {:>10.3e} {:>7.2}   {:.1e}  {}",
                r.depth, r.samples, b.beta, b.rho, b.n2_beta_rho, b.n2, b.n_inf, r.terminal_loss, r.empirical_risk
            ),
        );
    }
    Ok(())
}
