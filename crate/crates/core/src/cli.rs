//! Command-line front end.
//!
//! Machine outputs (JSON, CSV) carry full precision; summaries printed to
//! stdout round to four significant digits. Exit codes: 1 usage, 2 data,
//! 3 numeric.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::analysis::{compute_cw, row_normalize, RADIUS_LABEL};
use crate::analysis::{
    constants_report, initial_bounds, theorem1_certificate, BoundInputs, BoundReport,
    ConstantsReport,
};
use crate::error::{Error, Result};
use crate::graph::{degree_bound, normalized_adjacency};
use crate::harness::{
    curve_file_name, gradcheck, run_experiment, synthetic_bundle, ExperimentConfig, GapReport,
    Hyper, ModelName, SbmParams, Split, SCHEMA,
};
use crate::io::{load_bundle, save_bundle, DatasetBundle};
use crate::nn::{Activation, ModelSpec, Operators};
use crate::optim::{run_sgd, t0_from_theory, LrSchedule, Optimizer, SgdConfig};

/// Theory-driven offsets above this make every step vanishingly small.
pub const VACUOUS_T0: f64 = 1e6;

#[derive(Debug, Parser)]
#[command(
    name = "transgap",
    version,
    about = "Transductive generalization gaps of graph neural networks",
    args_override_self = true
)]
pub struct Cli {
    /// JSON object of flag values; explicit flags take precedence
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic stochastic-block-model dataset bundle
    Gen(GenArgs),
    /// Report constants and gap certificates for one or all architectures
    Analyze(AnalyzeArgs),
    /// Train one model and write its trace
    Train(TrainCmd),
    /// Run several models over several seeds and aggregate the gaps
    Experiment(ExperimentArgs),
    /// Compare analytic gradients with finite differences
    Gradcheck(GradcheckArgs),
}

#[derive(Debug, Args)]
pub struct SbmArgs {
    /// Block sizes of the planted partition
    #[arg(long, value_delimiter = ',', default_value = "100,100")]
    pub blocks: Vec<usize>,
    /// Edge probability within a block
    #[arg(long, default_value_t = 0.1)]
    pub pin: f64,
    /// Edge probability across blocks
    #[arg(long, default_value_t = 0.01)]
    pub pout: f64,
    /// Feature dimension
    #[arg(long, default_value_t = 16)]
    pub d: usize,
    /// Standard deviation of the feature noise
    #[arg(long, default_value_t = 1.0)]
    pub noise: f64,
    /// Norm of each class centroid
    #[arg(long, default_value_t = 1.0)]
    pub signal: f64,
}

impl SbmArgs {
    fn params(&self, seed: u64) -> SbmParams {
        SbmParams {
            blocks: self.blocks.clone(),
            p_in: self.pin,
            p_out: self.pout,
            d: self.d,
            noise: self.noise,
            signal: self.signal,
            seed,
        }
    }
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[command(flatten)]
    pub sbm: SbmArgs,
    /// Generator seed
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory
    #[arg(long, default_value = "bundle")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// Dataset bundle directory; a synthetic bundle is generated when absent
    #[arg(long, value_name = "DIR")]
    pub data: Option<PathBuf>,
    #[command(flatten)]
    pub sbm: SbmArgs,
    /// Seed of the synthetic bundle
    #[arg(long, default_value_t = 0)]
    pub data_seed: u64,
    /// Scale every feature row to unit norm
    #[arg(long)]
    pub row_normalize: bool,
}

impl DataArgs {
    fn load(&self) -> Result<DatasetBundle> {
        let mut b = match &self.data {
            Some(dir) => load_bundle(dir)?,
            None => synthetic_bundle(&self.sbm.params(self.data_seed))?,
        };
        if self.row_normalize {
            b.x = row_normalize(&b.x);
        }
        Ok(b)
    }
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    /// Hidden width
    #[arg(long, default_value_t = 64)]
    pub hidden: usize,
    /// Activation exponent in (1, 2]
    #[arg(long, default_value_t = 2.0)]
    pub q: f64,
    /// GCNII initial-residual weight, first layer
    #[arg(long, default_value_t = 0.1)]
    pub alpha1: f64,
    /// GCNII initial-residual weight, second layer
    #[arg(long, default_value_t = 0.1)]
    pub alpha2: f64,
    /// GCNII identity-mapping weight, first layer [default: ln 1.5]
    #[arg(long)]
    pub beta1: Option<f64>,
    /// GCNII identity-mapping weight, second layer [default: ln 1.25]
    #[arg(long)]
    pub beta2: Option<f64>,
    /// APPNP teleport probability
    #[arg(long, default_value_t = 0.1)]
    pub gamma: f64,
    /// APPNP and GPR propagation steps
    #[arg(long, default_value_t = 10)]
    pub k: usize,
}

impl ModelArgs {
    fn hyper(&self) -> Hyper {
        let d = Hyper::default();
        Hyper {
            alpha1: self.alpha1,
            alpha2: self.alpha2,
            beta1: self.beta1.unwrap_or(d.beta1),
            beta2: self.beta2.unwrap_or(d.beta2),
            gamma: self.gamma,
            k: self.k,
        }
    }

    fn spec(&self, model: ModelName, b: &DatasetBundle) -> Result<ModelSpec> {
        ModelSpec::new(
            model.arch(&self.hyper()),
            b.x.cols(),
            self.hidden,
            b.num_classes,
            Activation::new(self.q)?,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OptKind {
    Sgd,
    Adam,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ScheduleArg {
    /// c / (t + t0)
    InverseTime,
    /// c
    Constant,
    /// 1 / (t + t0) with t0 derived from the Hölder constant
    Theory,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Number of iterations
    #[arg(long = "T", default_value_t = 300)]
    pub t: usize,
    /// Samples per step, capped at the training-set size
    #[arg(long, default_value_t = 512)]
    pub batch_size: usize,
    /// Optimizer [default: sgd, adam for experiment]
    #[arg(long, value_enum)]
    pub optimizer: Option<OptKind>,
    /// Step-size schedule [default: inverse-time for sgd, constant for adam]
    #[arg(long, value_enum)]
    pub schedule: Option<ScheduleArg>,
    /// Step-size numerator c [default: 1 for sgd, 0.01 for adam]
    #[arg(long)]
    pub lr: Option<f64>,
    /// Offset t0 of the inverse-time schedule
    #[arg(long, default_value_t = 1.0)]
    pub t0: f64,
    /// Gradient-dominance constant for the theory schedule
    #[arg(long)]
    pub mu: Option<f64>,
    /// Rate exponent [default: q - 1]
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Checkpoint stride
    #[arg(long, default_value_t = 10)]
    pub eval_every: usize,
    /// Fraction of nodes in the training set
    #[arg(long, default_value_t = 0.3)]
    pub train_frac: f64,
    /// L2 penalty coefficient
    #[arg(long, default_value_t = 0.0)]
    pub l2: f64,
}

impl TrainArgs {
    fn optimizer(&self, fallback: OptKind) -> OptKind {
        self.optimizer.unwrap_or(fallback)
    }

    fn alpha(&self, q: f64) -> f64 {
        self.alpha.unwrap_or(q - 1.0)
    }

    fn validate(&self) -> Result<()> {
        if self.t == 0 {
            return Err(Error::InvalidArgument("--T must be at least 1".into()));
        }
        if !(self.train_frac > 0.0 && self.train_frac < 1.0) {
            return Err(Error::InvalidArgument(
                "--train-frac must lie in (0,1)".into(),
            ));
        }
        Ok(())
    }

    /// Schedule for `spec`; `p_f` is needed only by the theory schedule.
    fn schedule(
        &self,
        opt: OptKind,
        q: f64,
        p_f: impl FnOnce() -> Result<Option<f64>>,
        warn: &mut Vec<String>,
    ) -> Result<LrSchedule> {
        let kind = self.schedule.unwrap_or(match opt {
            OptKind::Sgd => ScheduleArg::InverseTime,
            OptKind::Adam => ScheduleArg::Constant,
        });
        let c = self.lr.unwrap_or(match opt {
            OptKind::Sgd => 1.0,
            OptKind::Adam => 0.01,
        });
        Ok(match kind {
            ScheduleArg::InverseTime => LrSchedule::inverse_time(c, self.t0),
            ScheduleArg::Constant => LrSchedule::constant(c),
            ScheduleArg::Theory => {
                if opt == OptKind::Adam {
                    warn.push(
                        "theory schedule combined with adam: certificates assume vanilla SGD"
                            .into(),
                    );
                }
                let p = p_f()?.ok_or_else(|| {
                    Error::InvalidArgument(
                        "theory schedule needs a closed-form Hölder constant".into(),
                    )
                })?;
                let t0 = t0_from_theory(p, self.alpha(q), self.mu)?;
                if t0 > VACUOUS_T0 {
                    warn.push(format!(
                        "theory t0 = {t0:.3e} exceeds 1e6: vacuously small steps"
                    ));
                }
                LrSchedule::inverse_time(self.lr.unwrap_or(1.0), t0)
            }
        })
    }

    fn sgd_config(
        &self,
        opt: OptKind,
        schedule: LrSchedule,
        seed: u64,
        m: usize,
        sample_norms: bool,
    ) -> SgdConfig {
        SgdConfig {
            t: self.t,
            batch_size: self.batch_size.min(m).max(1),
            seed,
            schedule,
            optimizer: match opt {
                OptKind::Sgd => Optimizer::Sgd,
                OptKind::Adam => Optimizer::adam(),
            },
            eval_every: self.eval_every,
            l2: self.l2,
            sample_norms,
        }
    }
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub model_args: ModelArgs,
    #[command(flatten)]
    pub train: TrainArgs,
    /// Architecture
    #[arg(long, default_value = "gcn")]
    pub model: String,
    /// Report all five architectures sorted by Lipschitz constant
    #[arg(long)]
    pub compare: bool,
    /// Use this spectral-norm bound instead of measuring it
    #[arg(long)]
    pub cw: Option<f64>,
    /// Confidence parameter in (0,1)
    #[arg(long, default_value_t = 0.05)]
    pub delta: f64,
    /// Use this radius instead of the measured trajectory radius (skips training)
    #[arg(long)]
    pub radius: Option<f64>,
    /// Split and initialization seed
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output format
    #[arg(long, value_enum, default_value = "json")]
    pub format: Format,
    /// Output file [default: stdout]
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainCmd {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub model_args: ModelArgs,
    #[command(flatten)]
    pub train: TrainArgs,
    /// Architecture
    #[arg(long, default_value = "gcn")]
    pub model: String,
    /// Split, initialization and sampling seed
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Trace CSV path
    #[arg(long, default_value = "trace.csv")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub model_args: ModelArgs,
    #[command(flatten)]
    pub train: TrainArgs,
    /// Comma-separated architectures, or "all"
    #[arg(long, default_value = "all")]
    pub models: String,
    /// Number of seeds; runs use seeds 0..N
    #[arg(long, default_value_t = 10)]
    pub seeds: u64,
    /// Output directory for the report and curves
    #[arg(long, default_value = "results")]
    pub out: PathBuf,
    /// Report format
    #[arg(long, value_enum, default_value = "json")]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    /// Architecture, or "all"
    #[arg(long, default_value = "all")]
    pub model: String,
    /// Nodes per instance
    #[arg(long, default_value_t = 12)]
    pub n: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Activation exponent in (1, 2]
    #[arg(long, default_value_t = 2.0)]
    pub q: f64,
    /// Random instances per architecture
    #[arg(long, default_value_t = 10)]
    pub instances: usize,
    /// Central-difference step
    #[arg(long, default_value_t = 1e-6)]
    pub step: f64,
    /// Largest accepted relative error [default: 1e-5 for q = 2, else 1e-3]
    #[arg(long)]
    pub tol: Option<f64>,
}

/// Four significant digits for human-readable summaries.
pub fn human(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let e = x.abs().log10().floor() as i32;
    if (-3..6).contains(&e) {
        format!("{:.*}", (3 - e).max(0) as usize, x)
    } else {
        format!("{x:.3e}")
    }
}

/// Flags spelled out by a JSON config object, in key order.
pub fn config_flags(text: &str) -> Result<Vec<OsString>> {
    let value: serde_json::Value = serde_json::from_str(text)?;
    let obj = value
        .as_object()
        .ok_or_else(|| Error::InvalidArgument("config must be a JSON object".into()))?;
    let mut flags: Vec<OsString> = Vec::new();
    for (k, v) in obj {
        if k == "config" {
            return Err(Error::InvalidArgument("config files cannot nest".into()));
        }
        let flag = format!("--{k}");
        let scalar = |v: &serde_json::Value| -> Result<String> {
            match v {
                serde_json::Value::String(s) => Ok(s.clone()),
                serde_json::Value::Number(n) => Ok(n.to_string()),
                _ => Err(Error::InvalidArgument(format!(
                    "config key {k:?}: unsupported value {v}"
                ))),
            }
        };
        match v {
            serde_json::Value::Bool(true) => flags.push(flag.into()),
            serde_json::Value::Bool(false) | serde_json::Value::Null => {}
            serde_json::Value::Array(items) => {
                let parts: Result<Vec<String>> = items.iter().map(scalar).collect();
                flags.push(flag.into());
                flags.push(parts?.join(",").into());
            }
            other => {
                flags.push(flag.into());
                flags.push(scalar(other)?.into());
            }
        }
    }
    Ok(flags)
}

/// Splice flags from a `--config` JSON object in front of the explicit ones.
fn expand_config(args: Vec<OsString>) -> Result<Vec<OsString>> {
    let mut path = None;
    for (i, a) in args.iter().enumerate() {
        let s = a.to_string_lossy();
        if s == "--config" {
            path = args.get(i + 1).map(PathBuf::from);
        } else if let Some(p) = s.strip_prefix("--config=") {
            path = Some(PathBuf::from(p));
        }
    }
    let Some(path) = path else {
        return Ok(args);
    };
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let flags = config_flags(&text).map_err(|e| match e {
        Error::InvalidArgument(m) => Error::InvalidArgument(format!("{}: {m}", path.display())),
        e => e,
    })?;
    let subcommands = ["gen", "analyze", "train", "experiment", "gradcheck"];
    let at = args
        .iter()
        .position(|a| subcommands.contains(&a.to_string_lossy().as_ref()))
        .map(|i| i + 1)
        .unwrap_or(args.len());
    let mut out = args[..at].to_vec();
    out.extend(flags);
    out.extend_from_slice(&args[at..]);
    Ok(out)
}

/// Parse, dispatch and map failures to exit codes.
pub fn run(args: Vec<OsString>) -> i32 {
    let args = match expand_config(args) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return e.class().exit_code();
        }
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.class().exit_code()
        }
    }
}

fn dispatch(cmd: Command) -> Result<i32> {
    match cmd {
        Command::Gen(a) => cmd_gen(&a),
        Command::Analyze(a) => cmd_analyze(&a),
        Command::Train(a) => cmd_train(&a),
        Command::Experiment(a) => cmd_experiment(&a),
        Command::Gradcheck(a) => cmd_gradcheck(&a),
    }
    .map(|()| 0)
}

fn write_file(path: &Path, body: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, body).map_err(|e| Error::io(path, e))
}

fn cmd_gen(a: &GenArgs) -> Result<()> {
    let b = synthetic_bundle(&a.sbm.params(a.seed))?;
    save_bundle(&b, &a.out)?;
    let s = b.graph.degree_stats();
    let a_inf = normalized_adjacency(&b.graph).inf_norm();
    println!(
        "{}: n={} edges={} deg_min={} deg_max={} a_inf={} degree_bound={}",
        a.out.display(),
        s.n,
        s.edge_count,
        s.deg_min,
        s.deg_max,
        human(a_inf),
        human(degree_bound(&s))
    );
    Ok(())
}

#[derive(Debug, Serialize)]
struct ModelAnalysis {
    model: ModelName,
    constants: ConstantsReport,
    bound_inputs: Option<BoundInputs>,
    bound: Option<BoundReport>,
    radius_label: &'static str,
    /// Loss gap at the end of the training run used to measure the radius.
    measured_loss_gap: Option<f64>,
    warnings: Vec<String>,
}

#[derive(Debug, Serialize)]
struct AnalyzeReport {
    schema: &'static str,
    dataset: String,
    models: Vec<ModelAnalysis>,
}

/// Training-dependent measurements for one model.
struct Measured {
    model: ModelName,
    spec: ModelSpec,
    ops: Operators,
    split: Split,
    w1: Vec<f64>,
    radius: f64,
    c_w: f64,
    c_w_converged: bool,
    gap: Option<f64>,
    warnings: Vec<String>,
}

fn measure(a: &AnalyzeArgs, b: &DatasetBundle, model: ModelName) -> Result<Measured> {
    let spec = a.model_args.spec(model, b)?;
    let ops = Operators::new(normalized_adjacency(&b.graph), &spec)?;
    let stats = b.graph.degree_stats();
    let split = Split::random(b.graph.n(), a.train.train_frac, a.seed)?;
    let w1 = spec.init(a.seed);
    let mut warnings = Vec::new();
    let opt = a.train.optimizer(OptKind::Sgd);
    if opt == OptKind::Adam {
        warnings.push("adam trajectory: certificates assume vanilla SGD".into());
    }
    let at_init = constants_report(&spec, &ops.a, &stats, &b.x, &w1, a.cw, a.seed)?;
    if !at_init.c_w_converged {
        warnings.push("spectral-norm power iteration did not converge".into());
    }
    let (radius, c_w, gap) = match a.radius {
        Some(r) if r >= 0.0 && r.is_finite() => (r, at_init.c_w, None),
        Some(r) => {
            return Err(Error::InvalidArgument(format!(
                "radius {r} must be finite and nonnegative"
            )))
        }
        None => {
            let schedule =
                a.train
                    .schedule(opt, a.model_args.q, || Ok(at_init.p_f), &mut warnings)?;
            let cfg = a.train.sgd_config(opt, schedule, a.seed, split.m(), true);
            let (w, trace) = run_sgd(&spec, &ops, &b.x, &b.labels, &split, &w1, &cfg)?;
            let c_w = match a.cw {
                Some(v) => v,
                None => compute_cw(&w, &spec.layout(), a.seed)
                    .value
                    .max(at_init.c_w),
            };
            (trace.radius(), c_w, Some(trace.last().loss_gap()))
        }
    };
    Ok(Measured {
        model,
        spec,
        ops,
        split,
        w1,
        radius,
        c_w,
        c_w_converged: at_init.c_w_converged,
        gap,
        warnings,
    })
}

fn finish(a: &AnalyzeArgs, b: &DatasetBundle, m: Measured, c_w: f64) -> Result<ModelAnalysis> {
    let Measured {
        model,
        spec,
        ops,
        split,
        w1,
        radius,
        c_w_converged,
        gap,
        mut warnings,
        ..
    } = m;
    let stats = b.graph.degree_stats();
    let mut constants = constants_report(&spec, &ops.a, &stats, &b.x, &w1, Some(c_w), a.seed)?;
    constants.c_w_converged = c_w_converged;
    let (bound_inputs, bound) = match constants.l_f {
        Some(l_f) => {
            let (b_ell, b_g) = initial_bounds(&spec, &ops, &b.x, &b.labels, &w1)?;
            let inputs = BoundInputs {
                m: split.m(),
                u: split.u(),
                dim: w1.len(),
                t: a.train.t,
                delta: a.delta,
                alpha: a.train.alpha(a.model_args.q),
                l_f,
                r: radius,
                b_ell,
                b_g,
            };
            (Some(inputs), Some(theorem1_certificate(&inputs)?))
        }
        None => {
            warnings.push("no closed-form constant for this depth; certificate omitted".into());
            (None, None)
        }
    };
    Ok(ModelAnalysis {
        model,
        constants,
        bound_inputs,
        bound,
        radius_label: RADIUS_LABEL,
        measured_loss_gap: gap,
        warnings,
    })
}

fn opt_cell(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.16e}")).unwrap_or_default()
}

fn cmd_analyze(a: &AnalyzeArgs) -> Result<()> {
    a.train.validate()?;
    if !(a.delta > 0.0 && a.delta < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "--delta {} outside (0,1)",
            a.delta
        )));
    }
    let models = if a.compare {
        ModelName::BASE.to_vec()
    } else {
        vec![a.model.parse::<ModelName>()?]
    };
    let b = a.data.load()?;
    let ctx = |m: ModelName| move |e: Error| e.context(format!("model {m}"));
    let mut measured = Vec::new();
    for m in models {
        measured.push(measure(a, &b, m).map_err(ctx(m))?);
    }
    // Side-by-side constants share one spectral bound so that they differ
    // only through the architecture.
    let shared = measured.iter().map(|m| m.c_w).fold(0.0, f64::max);
    let mut rows = Vec::new();
    for m in measured {
        let model = m.model;
        rows.push(finish(a, &b, m, shared).map_err(ctx(model))?);
    }
    // Stable sort keeps the canonical order among equal or missing constants.
    rows.sort_by(|x, y| {
        let key = |r: &ModelAnalysis| r.constants.l_f.unwrap_or(f64::INFINITY);
        key(x).total_cmp(&key(y))
    });
    for r in &rows {
        for w in &r.warnings {
            eprintln!("warning: {}: {w}", r.model);
        }
    }
    let body = match a.format {
        Format::Json => {
            let report = AnalyzeReport {
                schema: SCHEMA,
                dataset: b.name.clone(),
                models: rows,
            };
            let mut s = serde_json::to_string_pretty(&report)?;
            s.push('\n');
            s
        }
        Format::Csv => {
            let mut s =
                String::from("model,c_x,c_w,a_inf,a2_inf,g_inf,power_sum,l_f,p_f,radius,total\n");
            for r in &rows {
                let c = &r.constants;
                writeln!(
                    s,
                    "{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{},{},{},{}",
                    r.model,
                    c.c_x,
                    c.c_w,
                    c.norms.a_inf,
                    c.norms.a2_inf,
                    c.norms.g_inf,
                    c.norms.power_sum,
                    opt_cell(c.l_f),
                    opt_cell(c.p_f),
                    opt_cell(r.bound_inputs.map(|i| i.r)),
                    opt_cell(r.bound.map(|b| b.total)),
                )
                .expect("write to string");
            }
            s
        }
    };
    match &a.out {
        Some(p) => write_file(p, &body),
        None => {
            print!("{body}");
            Ok(())
        }
    }
}

fn cmd_train(a: &TrainCmd) -> Result<()> {
    a.train.validate()?;
    let model: ModelName = a.model.parse()?;
    let b = a.data.load()?;
    let spec = a.model_args.spec(model, &b)?;
    let ops = Operators::new(normalized_adjacency(&b.graph), &spec)?;
    let split = Split::random(b.graph.n(), a.train.train_frac, a.seed)?;
    let w1 = spec.init(a.seed);
    let opt = a.train.optimizer(OptKind::Sgd);
    let mut warnings = Vec::new();
    let p_f = || -> Result<Option<f64>> {
        let stats = b.graph.degree_stats();
        Ok(constants_report(&spec, &ops.a, &stats, &b.x, &w1, None, a.seed)?.p_f)
    };
    let schedule = a.train.schedule(opt, a.model_args.q, p_f, &mut warnings)?;
    for w in &warnings {
        eprintln!("warning: {w}");
    }
    let cfg = a.train.sgd_config(opt, schedule, a.seed, split.m(), true);
    let (_, trace) = run_sgd(&spec, &ops, &b.x, &b.labels, &split, &w1, &cfg)?;
    write_file(&a.out, &trace.to_csv())?;
    let last = trace.last();
    println!(
        "{model} seed={} T={}: loss_gap={} acc_gap={} test_acc={} grad_gap={} radius={}",
        a.seed,
        a.train.t,
        human(last.loss_gap()),
        human(last.acc_gap()),
        human(last.acc_u),
        human(last.grad_gap),
        human(trace.radius())
    );
    Ok(())
}

fn report_csv(r: &GapReport) -> String {
    let mut s = String::from(
        "model,dataset,runs,loss_gap_mean,loss_gap_std,acc_gap_mean,acc_gap_std,test_acc_mean,test_acc_std,grad_gap_mean,grad_gap_std\n",
    );
    for row in &r.rows {
        writeln!(
            s,
            "{},{},{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
            row.model,
            row.dataset,
            row.runs,
            row.loss_gap.mean,
            row.loss_gap.std,
            row.acc_gap.mean,
            row.acc_gap.std,
            row.test_acc.mean,
            row.test_acc.std,
            row.grad_gap.mean,
            row.grad_gap.std
        )
        .expect("write to string");
    }
    s
}

fn cmd_experiment(a: &ExperimentArgs) -> Result<()> {
    a.train.validate()?;
    if a.seeds == 0 {
        return Err(Error::InvalidArgument("--seeds must be at least 1".into()));
    }
    if a.train.schedule == Some(ScheduleArg::Theory) {
        return Err(Error::InvalidArgument(
            "experiment does not support the theory schedule".into(),
        ));
    }
    let models = ModelName::parse_list(&a.models)?;
    let b = a.data.load()?;
    let opt = a.train.optimizer(OptKind::Adam);
    let schedule = a
        .train
        .schedule(opt, a.model_args.q, || Ok(None), &mut Vec::new())?;
    let base = a.train.sgd_config(opt, schedule, 0, usize::MAX, false);
    let cfg = ExperimentConfig {
        models,
        seeds: (0..a.seeds).collect(),
        train_frac: a.train.train_frac,
        t: base.t,
        hidden: a.model_args.hidden,
        batch_size: base.batch_size,
        optimizer: base.optimizer,
        schedule,
        eval_every: base.eval_every,
        q: a.model_args.q,
        hyper: a.model_args.hyper(),
        l2: base.l2,
    };
    let (report, runs) = run_experiment(&b, &cfg)?;
    for r in &runs {
        write_file(
            &a.out.join(curve_file_name(r.model, r.seed)),
            &r.trace.to_csv(),
        )?;
    }
    match a.format {
        Format::Json => write_file(&a.out.join("report.json"), &report.to_json())?,
        Format::Csv => write_file(&a.out.join("report.csv"), &report_csv(&report))?,
    }
    for row in &report.rows {
        println!(
            "{} on {} ({} runs): loss_gap={}±{} acc_gap={}±{} test_acc={}±{}",
            row.model,
            row.dataset,
            row.runs,
            human(row.loss_gap.mean),
            human(row.loss_gap.std),
            human(row.acc_gap.mean),
            human(row.acc_gap.std),
            human(row.test_acc.mean),
            human(row.test_acc.std)
        );
    }
    Ok(())
}

fn cmd_gradcheck(a: &GradcheckArgs) -> Result<()> {
    let models = ModelName::parse_list(&a.model)?;
    let tol = a.tol.unwrap_or(if a.q == 2.0 { 1e-5 } else { 1e-3 });
    if !(a.step > 0.0 && a.step.is_finite()) {
        return Err(Error::InvalidArgument("--step must be positive".into()));
    }
    if a.instances == 0 {
        return Err(Error::InvalidArgument(
            "--instances must be at least 1".into(),
        ));
    }
    let mut failed = false;
    for m in models {
        let row = gradcheck(m, a.n, a.q, a.seed, a.instances, a.step)?;
        let ok = row.max_rel_err <= tol;
        failed |= !ok;
        println!(
            "{m}\t{:.16e}\t{}",
            row.max_rel_err,
            if ok { "ok" } else { "FAIL" }
        );
    }
    if failed {
        return Err(Error::Tolerance(format!(
            "gradient relative error above {tol:e}"
        )));
    }
    Ok(())
}
