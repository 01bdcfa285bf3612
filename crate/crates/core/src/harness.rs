//! Splits, synthetic datasets, multi-seed experiments and gap reports.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{normalized_adjacency, sbm_generate};
use crate::io::DatasetBundle;
use crate::linalg::Mat;
use crate::nn::{
    forward, grad_fd_oracle, grad_sample, kink_distance, max_relative_error, Activation, Arch,
    ModelSpec, Operators,
};
use crate::optim::{run_sgd, LrSchedule, Optimizer, SgdConfig, TrainTrace};
use crate::rng;

pub const SCHEMA: &str = "transgap/1";

/// Disjoint train/test node sets covering every node.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

impl Split {
    /// `floor(frac * n)` training nodes chosen by a seeded shuffle.
    pub fn random(n: usize, train_frac: f64, seed: u64) -> Result<Split> {
        if !(train_frac > 0.0 && train_frac < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "train fraction {train_frac} outside (0,1)"
            )));
        }
        let m = (train_frac * n as f64).floor() as usize;
        if m == 0 || m >= n {
            return Err(Error::InvalidArgument(format!(
                "split of {n} nodes at fraction {train_frac} leaves an empty side"
            )));
        }
        let mut idx: Vec<usize> = (0..n).collect();
        idx.shuffle(&mut rng::stream(seed, "split"));
        let mut train = idx[..m].to_vec();
        let mut test = idx[m..].to_vec();
        train.sort_unstable();
        test.sort_unstable();
        Ok(Split { train, test })
    }

    pub fn m(&self) -> usize {
        self.train.len()
    }

    pub fn u(&self) -> usize {
        self.test.len()
    }

    /// Both sides nonempty and in range. Overlapping sets are allowed so that
    /// degenerate train = test checks remain expressible.
    pub fn validate(&self, n: usize) -> Result<()> {
        if self.train.is_empty() || self.test.is_empty() {
            return Err(Error::InvalidArgument("split has an empty side".into()));
        }
        if self.train.iter().chain(&self.test).any(|&i| i >= n) {
            return Err(Error::InvalidArgument(format!(
                "split index out of range for n={n}"
            )));
        }
        Ok(())
    }
}

/// Planted-partition graph with class-centroid features plus Gaussian noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SbmParams {
    pub blocks: Vec<usize>,
    pub p_in: f64,
    pub p_out: f64,
    pub d: usize,
    /// Standard deviation of the per-entry feature noise.
    pub noise: f64,
    /// Length of each class centroid.
    pub signal: f64,
    pub seed: u64,
}

impl Default for SbmParams {
    fn default() -> Self {
        SbmParams {
            blocks: vec![100, 100],
            p_in: 0.1,
            p_out: 0.01,
            d: 16,
            noise: 1.0,
            signal: 1.0,
            seed: 0,
        }
    }
}

pub fn synthetic_bundle(p: &SbmParams) -> Result<DatasetBundle> {
    if p.d == 0 {
        return Err(Error::InvalidArgument(
            "feature dimension must be positive".into(),
        ));
    }
    if !(p.noise >= 0.0 && p.noise.is_finite() && p.signal.is_finite()) {
        return Err(Error::InvalidArgument(
            "noise and signal must be finite, noise nonnegative".into(),
        ));
    }
    let (graph, labels) = sbm_generate(&p.blocks, p.p_in, p.p_out, p.seed)?;
    let k = p.blocks.len();
    let unit = Normal::new(0.0, 1.0).expect("unit normal");
    let mut r = rng::stream(p.seed, "sbm-features");
    let centroids: Vec<Vec<f64>> = (0..k)
        .map(|_| {
            let v: Vec<f64> = (0..p.d).map(|_| unit.sample(&mut r)).collect();
            let n = crate::linalg::norm2(&v).max(f64::MIN_POSITIVE);
            v.into_iter().map(|x| x * p.signal / n).collect()
        })
        .collect();
    let x = Mat::from_fn(labels.len(), p.d, |i, j| {
        centroids[labels[i]][j] + p.noise * unit.sample(&mut r)
    });
    Ok(DatasetBundle {
        name: format!("sbm-{}", p.seed),
        graph,
        x,
        labels,
        num_classes: k,
    })
}

/// Named model variants used by the CLI and experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelName {
    Gcn,
    Gcnii,
    Sgc,
    Appnp,
    Gpr,
    /// Six-layer GCN.
    Gcn6,
    /// Six-layer GCNII.
    Gcnii6,
}

impl ModelName {
    pub const BASE: [ModelName; 5] = [
        ModelName::Gcn,
        ModelName::Gcnii,
        ModelName::Sgc,
        ModelName::Appnp,
        ModelName::Gpr,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelName::Gcn => "gcn",
            ModelName::Gcnii => "gcnii",
            ModelName::Sgc => "sgc",
            ModelName::Appnp => "appnp",
            ModelName::Gpr => "gpr",
            ModelName::Gcn6 => "gcn6",
            ModelName::Gcnii6 => "gcnii6",
        }
    }

    pub fn arch(self, hp: &Hyper) -> Arch {
        match self {
            ModelName::Gcn => Arch::gcn(),
            ModelName::Gcn6 => Arch::Gcn { layers: 6 },
            ModelName::Gcnii => Arch::Gcnii {
                alpha: vec![hp.alpha1, hp.alpha2],
                beta: vec![hp.beta1, hp.beta2],
            },
            ModelName::Gcnii6 => Arch::gcnii(6),
            ModelName::Sgc => Arch::Sgc,
            ModelName::Appnp => Arch::Appnp {
                gamma: hp.gamma,
                k: hp.k,
            },
            ModelName::Gpr => Arch::Gpr { k: hp.k },
        }
    }

    pub fn parse_list(s: &str) -> Result<Vec<ModelName>> {
        if s.trim() == "all" {
            return Ok(ModelName::BASE.to_vec());
        }
        s.split(',').map(|t| t.trim().parse()).collect()
    }
}

impl fmt::Display for ModelName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "gcn" => ModelName::Gcn,
            "gcnii" => ModelName::Gcnii,
            "sgc" => ModelName::Sgc,
            "appnp" => ModelName::Appnp,
            "gpr" | "gprgnn" => ModelName::Gpr,
            "gcn6" => ModelName::Gcn6,
            "gcnii6" => ModelName::Gcnii6,
            other => {
                return Err(Error::InvalidArgument(format!(
                    "unknown architecture {other:?}"
                )))
            }
        })
    }
}

/// Propagation hyperparameters shared by the named models.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hyper {
    pub alpha1: f64,
    pub alpha2: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub gamma: f64,
    pub k: usize,
}

impl Default for Hyper {
    fn default() -> Self {
        Hyper {
            alpha1: 0.1,
            alpha2: 0.1,
            beta1: 1.5f64.ln(),
            beta2: 1.25f64.ln(),
            gamma: 0.1,
            k: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub models: Vec<ModelName>,
    pub seeds: Vec<u64>,
    pub train_frac: f64,
    pub t: usize,
    pub hidden: usize,
    /// Capped at the training-set size.
    pub batch_size: usize,
    pub optimizer: Optimizer,
    pub schedule: LrSchedule,
    pub eval_every: usize,
    pub q: f64,
    pub hyper: Hyper,
    pub l2: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            models: vec![ModelName::Gcn, ModelName::Sgc],
            seeds: (0..10).collect(),
            train_frac: 0.3,
            t: 300,
            hidden: 64,
            batch_size: 512,
            optimizer: Optimizer::Sgd,
            schedule: LrSchedule::inverse_time(1.0, 1.0),
            eval_every: 10,
            q: 2.0,
            hyper: Hyper::default(),
            l2: 0.0,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.models.is_empty() || self.seeds.is_empty() {
            return Err(Error::InvalidArgument(
                "need at least one model and one seed".into(),
            ));
        }
        if !(self.train_frac > 0.0 && self.train_frac < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "train fraction {} outside (0,1)",
                self.train_frac
            )));
        }
        if self.hidden == 0 {
            return Err(Error::InvalidArgument(
                "hidden width must be positive".into(),
            ));
        }
        Activation::new(self.q)?;
        self.sgd(0, 1).validate()
    }

    fn sgd(&self, seed: u64, m: usize) -> SgdConfig {
        SgdConfig {
            t: self.t,
            batch_size: self.batch_size.min(m).max(1),
            seed,
            schedule: self.schedule,
            optimizer: self.optimizer,
            eval_every: self.eval_every,
            l2: self.l2,
            sample_norms: false,
        }
    }

    pub fn spec(&self, model: ModelName, bundle: &DatasetBundle) -> Result<ModelSpec> {
        ModelSpec::new(
            model.arch(&self.hyper),
            bundle.x.cols(),
            self.hidden,
            bundle.num_classes,
            Activation::new(self.q)?,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunResult {
    pub model: ModelName,
    pub seed: u64,
    pub m: usize,
    pub u: usize,
    #[serde(skip)]
    pub trace: TrainTrace,
    #[serde(skip)]
    pub w1: Vec<f64>,
    #[serde(skip)]
    pub w: Vec<f64>,
}

impl RunResult {
    pub fn loss_gap(&self) -> f64 {
        self.trace.last().loss_gap()
    }
}

/// One training run: fresh split, fresh initialization, SGD.
pub fn run_one(
    bundle: &DatasetBundle,
    cfg: &ExperimentConfig,
    model: ModelName,
    seed: u64,
) -> Result<RunResult> {
    let ctx = |e: Error| e.context(format!("model {model}, seed {seed}"));
    let spec = cfg.spec(model, bundle).map_err(ctx)?;
    let ops = Operators::new(normalized_adjacency(&bundle.graph), &spec).map_err(ctx)?;
    let split = Split::random(bundle.graph.n(), cfg.train_frac, seed).map_err(ctx)?;
    let w1 = spec.init(seed);
    let (w, trace) = run_sgd(
        &spec,
        &ops,
        &bundle.x,
        &bundle.labels,
        &split,
        &w1,
        &cfg.sgd(seed, split.m()),
    )
    .map_err(ctx)?;
    Ok(RunResult {
        model,
        seed,
        m: split.m(),
        u: split.u(),
        trace,
        w1,
        w,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

/// Mean and population standard deviation, summed in input order.
pub fn mean_std(v: &[f64]) -> MeanStd {
    let n = v.len() as f64;
    let mut s = 0.0;
    for &x in v {
        s += x;
    }
    let mean = s / n;
    let mut q = 0.0;
    for &x in v {
        q += (x - mean) * (x - mean);
    }
    MeanStd {
        mean,
        std: (q / n).sqrt(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GapRow {
    pub model: ModelName,
    pub dataset: String,
    pub runs: usize,
    pub loss_gap: MeanStd,
    pub acc_gap: MeanStd,
    pub test_acc: MeanStd,
    pub grad_gap: MeanStd,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurvePoint {
    pub t: usize,
    pub mean: f64,
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelCurve {
    pub model: ModelName,
    pub points: Vec<CurvePoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GapReport {
    pub schema: &'static str,
    pub std_kind: &'static str,
    pub config: ExperimentConfig,
    pub rows: Vec<GapRow>,
    pub curves: Vec<ModelCurve>,
}

impl GapReport {
    pub fn row(&self, model: ModelName) -> Option<&GapRow> {
        self.rows.iter().find(|r| r.model == model)
    }

    /// Pretty JSON. Floats use the shortest representation that parses back
    /// to the same value, at most 17 significant digits.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

/// Mean and std of the loss gap at each checkpoint shared by all traces.
pub fn curve_report(traces: &[&TrainTrace]) -> Result<Vec<CurvePoint>> {
    let first = traces
        .first()
        .ok_or_else(|| Error::InvalidArgument("no traces".into()))?;
    let mut out = Vec::new();
    for (k, c) in first.checkpoints.iter().enumerate() {
        let mut gaps = Vec::with_capacity(traces.len());
        for tr in traces {
            match tr.checkpoints.get(k) {
                Some(o) if o.t == c.t => gaps.push(o.loss_gap()),
                _ => {
                    return Err(Error::InvalidData(
                        "traces have different checkpoints".into(),
                    ))
                }
            }
        }
        let ms = mean_std(&gaps);
        out.push(CurvePoint {
            t: c.t,
            mean: ms.mean,
            std: ms.std,
        });
    }
    Ok(out)
}

/// Number of worker threads: `TRANSGAP_THREADS` when set, else all cores.
pub fn thread_count() -> usize {
    std::env::var("TRANSGAP_THREADS")
        .ok()
        .and_then(|s| s.parse().ok())
        .filter(|&n: &usize| n > 0)
        .unwrap_or_else(|| {
            std::thread::available_parallelism()
                .map(|n| n.get())
                .unwrap_or(1)
        })
}

/// Run every `(model, seed)` pair in a pool and aggregate in a fixed order.
pub fn run_experiment(
    bundle: &DatasetBundle,
    cfg: &ExperimentConfig,
) -> Result<(GapReport, Vec<RunResult>)> {
    cfg.validate()?;
    bundle.validate()?;
    let jobs: Vec<(ModelName, u64)> = cfg
        .models
        .iter()
        .flat_map(|&m| cfg.seeds.iter().map(move |&s| (m, s)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(thread_count())
        .build()
        .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
    let runs: Vec<RunResult> = pool.install(|| {
        jobs.par_iter()
            .map(|&(m, s)| run_one(bundle, cfg, m, s))
            .collect::<Result<Vec<_>>>()
    })?;
    let report = aggregate(bundle, cfg, &runs)?;
    Ok((report, runs))
}

pub fn aggregate(
    bundle: &DatasetBundle,
    cfg: &ExperimentConfig,
    runs: &[RunResult],
) -> Result<GapReport> {
    let mut rows = Vec::new();
    let mut curves = Vec::new();
    for &model in &cfg.models {
        let mine: Vec<&RunResult> = runs.iter().filter(|r| r.model == model).collect();
        let pick =
            |f: fn(&RunResult) -> f64| mean_std(&mine.iter().map(|r| f(r)).collect::<Vec<_>>());
        rows.push(GapRow {
            model,
            dataset: bundle.name.clone(),
            runs: mine.len(),
            loss_gap: pick(|r| r.trace.last().loss_gap()),
            acc_gap: pick(|r| r.trace.last().acc_gap()),
            test_acc: pick(|r| r.trace.last().acc_u),
            grad_gap: pick(|r| r.trace.last().grad_gap),
        });
        let traces: Vec<&TrainTrace> = mine.iter().map(|r| &r.trace).collect();
        curves.push(ModelCurve {
            model,
            points: curve_report(&traces)?,
        });
    }
    Ok(GapReport {
        schema: SCHEMA,
        std_kind: "population",
        config: cfg.clone(),
        rows,
        curves,
    })
}

pub fn curve_file_name(model: ModelName, seed: u64) -> String {
    format!("curve_{model}_{seed}.csv")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GradcheckRow {
    pub model: ModelName,
    pub instances: usize,
    pub max_rel_err: f64,
}

/// Analytic versus central-difference gradients on small SBM instances with
/// `d = 4`, `h = 3`, `C = 2`. Points closer than `1e-4` to an activation
/// breakpoint are redrawn.
pub fn gradcheck(
    model: ModelName,
    n: usize,
    q: f64,
    seed: u64,
    instances: usize,
    step: f64,
) -> Result<GradcheckRow> {
    if n < 2 {
        return Err(Error::InvalidArgument("gradcheck needs n >= 2".into()));
    }
    let act = Activation::new(q)?;
    let half = n / 2;
    let (g, labels) = sbm_generate(&[half, n - half], 0.5, 0.1, seed)?;
    let spec = ModelSpec::new(model.arch(&Hyper::default()), 4, 3, 2, act)?;
    let ops = Operators::new(normalized_adjacency(&g), &spec)?;
    let mut r = rng::stream(seed, &format!("gradcheck-{model}"));
    let x = Mat::from_fn(n, 4, |_, _| r.random_range(-1.0..1.0));
    let mut worst: f64 = 0.0;
    let mut done = 0;
    let mut attempts = 0;
    while done < instances {
        attempts += 1;
        if attempts > 100 * instances.max(1) {
            return Err(Error::NonFinite(
                "could not draw points away from activation breakpoints".into(),
            ));
        }
        let w: Vec<f64> = spec.init(r.random()).into_iter().map(|v| 2.0 * v).collect();
        let cache = forward(&spec, &ops, &x, &w)?;
        if kink_distance(&spec, &cache) < 1e-4 {
            continue;
        }
        let i = r.random_range(0..n);
        let a = grad_sample(&spec, &ops, &x, &w, i, labels[i])?;
        let f = grad_fd_oracle(&spec, &ops, &x, &w, i, labels[i], step)?;
        worst = worst.max(max_relative_error(&a, &f));
        done += 1;
    }
    Ok(GradcheckRow {
        model,
        instances,
        max_rel_err: worst,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_sizes_and_determinism() {
        let s = Split::random(10, 0.3, 1).unwrap();
        assert_eq!((s.m(), s.u()), (3, 7));
        assert_eq!(s, Split::random(10, 0.3, 1).unwrap());
        let mut all: Vec<usize> = s.train.iter().chain(&s.test).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..10).collect::<Vec<_>>());
        assert!(Split::random(3, 0.2, 0).is_err());
        assert!(Split::random(10, 1.0, 0).is_err());
    }

    #[test]
    fn splits_differ_across_seeds() {
        for s in 0..20u64 {
            assert_ne!(
                Split::random(100, 0.3, 2 * s).unwrap(),
                Split::random(100, 0.3, 2 * s + 1).unwrap()
            );
        }
    }

    #[test]
    fn population_std() {
        let ms = mean_std(&[1.0, 3.0]);
        assert_eq!((ms.mean, ms.std), (2.0, 1.0));
        assert_eq!(mean_std(&[4.0]).std, 0.0);
    }

    #[test]
    fn model_names() {
        assert_eq!(ModelName::parse_list("all").unwrap().len(), 5);
        assert_eq!(
            ModelName::parse_list("gcn, sgc").unwrap(),
            vec![ModelName::Gcn, ModelName::Sgc]
        );
        assert!("gat".parse::<ModelName>().is_err());
        for m in ModelName::BASE {
            assert_eq!(m.as_str().parse::<ModelName>().unwrap(), m);
        }
    }

    #[test]
    fn synthetic_bundle_is_deterministic() {
        let p = SbmParams {
            blocks: vec![10, 10],
            ..SbmParams::default()
        };
        let a = synthetic_bundle(&p).unwrap();
        assert_eq!(a, synthetic_bundle(&p).unwrap());
        assert_eq!(a.x.rows(), 20);
        a.validate().unwrap();
    }

    #[test]
    fn single_run_report_has_zero_std() {
        let b = synthetic_bundle(&SbmParams {
            blocks: vec![8, 8],
            d: 4,
            ..SbmParams::default()
        })
        .unwrap();
        let cfg = ExperimentConfig {
            models: vec![ModelName::Gcn],
            seeds: vec![3],
            t: 1,
            hidden: 4,
            ..ExperimentConfig::default()
        };
        let (rep, runs) = run_experiment(&b, &cfg).unwrap();
        assert_eq!(runs.len(), 1);
        let row = rep.row(ModelName::Gcn).unwrap();
        assert_eq!(row.loss_gap.std, 0.0);
        assert_eq!(row.loss_gap.mean, runs[0].loss_gap());

        let twice = ExperimentConfig {
            seeds: vec![3, 3],
            ..cfg
        };
        let (rep2, runs2) = run_experiment(&b, &twice).unwrap();
        assert_eq!(runs2[0].trace, runs2[1].trace);
        assert_eq!(rep2.rows[0].loss_gap.std, 0.0);
    }

    #[test]
    fn curves_from_one_trace_and_frozen_weights() {
        let b = synthetic_bundle(&SbmParams {
            blocks: vec![6, 6],
            d: 3,
            ..SbmParams::default()
        })
        .unwrap();
        let cfg = ExperimentConfig {
            models: vec![ModelName::Sgc],
            seeds: vec![1],
            t: 20,
            hidden: 3,
            schedule: LrSchedule::constant(0.0),
            eval_every: 5,
            ..ExperimentConfig::default()
        };
        let run = run_one(&b, &cfg, ModelName::Sgc, 1).unwrap();
        let pts = curve_report(&[&run.trace]).unwrap();
        for (p, c) in pts.iter().zip(&run.trace.checkpoints) {
            assert_eq!(p.mean, c.loss_gap());
            assert_eq!(p.std, 0.0);
        }
        assert!(pts.windows(2).all(|w| w[0].mean == w[1].mean));
    }

    #[test]
    fn gradcheck_passes() {
        for m in ModelName::BASE {
            let row = gradcheck(m, 12, 2.0, 1, 2, 1e-6).unwrap();
            assert!(row.max_rel_err <= 1e-5, "{m}: {}", row.max_rel_err);
        }
    }
}
