//! Transductive SGD, Adam, and training traces.

use std::fmt::Write as _;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::Split;
use crate::linalg::{dist2, norm2, Mat};
use crate::nn::{argmax, backward, forward, loss_seed, ModelSpec, Operators};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleKind {
    InverseTime,
    Constant,
}

/// `eta_t = c / (t + t0)` or the constant `c`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LrSchedule {
    pub kind: ScheduleKind,
    pub c: f64,
    pub t0: f64,
}

impl LrSchedule {
    pub fn inverse_time(c: f64, t0: f64) -> Self {
        LrSchedule {
            kind: ScheduleKind::InverseTime,
            c,
            t0,
        }
    }

    pub fn constant(c: f64) -> Self {
        LrSchedule {
            kind: ScheduleKind::Constant,
            c,
            t0: 0.0,
        }
    }

    /// Step size at iteration `t >= 1`.
    pub fn eta(&self, t: usize) -> f64 {
        match self.kind {
            ScheduleKind::InverseTime => self.c / (t as f64 + self.t0),
            ScheduleKind::Constant => self.c,
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = self.c.is_finite()
            && self.c >= 0.0
            && self.t0.is_finite()
            && self.t0 >= 0.0
            && (self.kind == ScheduleKind::Constant || self.c / (1.0 + self.t0) > 0.0);
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!(
                "invalid learning-rate schedule {self:?}"
            )))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Optimizer {
    Sgd,
    Adam { beta1: f64, beta2: f64, eps: f64 },
}

impl Optimizer {
    pub fn adam() -> Self {
        Optimizer::Adam {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SgdConfig {
    pub t: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub schedule: LrSchedule,
    pub optimizer: Optimizer,
    pub eval_every: usize,
    /// Coefficient of an optional `l2/2 ||w||^2` penalty.
    pub l2: f64,
    /// Measure per-sample gradient norms on checkpoint steps. Costs one
    /// backward pass per batch element; always on when `batch_size == 1`.
    pub sample_norms: bool,
}

impl SgdConfig {
    pub fn validate(&self) -> Result<()> {
        if self.t == 0 {
            return Err(Error::InvalidArgument("T must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidArgument(
                "batch size must be at least 1".into(),
            ));
        }
        if self.eval_every == 0 {
            return Err(Error::InvalidArgument(
                "eval_every must be at least 1".into(),
            ));
        }
        if !(self.l2 >= 0.0) {
            return Err(Error::InvalidArgument("l2 must be nonnegative".into()));
        }
        self.schedule.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Checkpoint {
    pub t: usize,
    pub r_m: f64,
    pub r_u: f64,
    pub acc_m: f64,
    pub acc_u: f64,
    pub grad_gap: f64,
    pub dist: f64,
    /// Running max of `sqrt(eta_t) ||grad loss||` over sampled gradients;
    /// `None` when per-sample norms are not tracked.
    pub g_emp: Option<f64>,
}

impl Checkpoint {
    pub fn loss_gap(&self) -> f64 {
        (self.r_m - self.r_u).abs()
    }

    pub fn acc_gap(&self) -> f64 {
        (self.acc_m - self.acc_u).abs()
    }
}

pub const TRACE_HEADER: &str = "t,R_m,R_u,acc_m,acc_u,grad_gap,dist,g_emp";

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct TrainTrace {
    pub checkpoints: Vec<Checkpoint>,
    /// Mean of `||grad||` and of `||grad||^2` over every per-sample gradient
    /// whose norm was measured.
    pub grad_norm_mean: Option<f64>,
    pub grad_norm_sq_mean: Option<f64>,
}

impl TrainTrace {
    pub fn to_csv(&self) -> String {
        let mut s = String::from(TRACE_HEADER);
        s.push('\n');
        for c in &self.checkpoints {
            writeln!(
                s,
                "{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{}",
                c.t,
                c.r_m,
                c.r_u,
                c.acc_m,
                c.acc_u,
                c.grad_gap,
                c.dist,
                c.g_emp.map(|g| format!("{g:.16e}")).unwrap_or_default()
            )
            .expect("write to string");
        }
        s
    }

    pub fn last(&self) -> &Checkpoint {
        self.checkpoints.last().expect("trace has checkpoints")
    }

    /// Largest distance from the initial point seen at any checkpoint.
    pub fn radius(&self) -> f64 {
        self.checkpoints.iter().map(|c| c.dist).fold(0.0, f64::max)
    }

    pub fn at(&self, t: usize) -> Option<&Checkpoint> {
        self.checkpoints.iter().find(|c| c.t == t)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Evaluation {
    pub r_m: f64,
    pub r_u: f64,
    pub acc_m: f64,
    pub acc_u: f64,
}

fn mean_loss_acc(probs: &Mat, labels: &[usize], idx: &[usize]) -> (f64, f64) {
    let mut loss = 0.0;
    let mut hits = 0usize;
    for &i in idx {
        loss += crate::nn::loss::xent(probs.row(i), labels[i]);
        if argmax(probs.row(i)) == labels[i] {
            hits += 1;
        }
    }
    let k = idx.len() as f64;
    (loss / k, hits as f64 / k)
}

fn samples(labels: &[usize], idx: &[usize]) -> Vec<(usize, usize)> {
    idx.iter().map(|&i| (i, labels[i])).collect()
}

fn check_inputs(x: &Mat, labels: &[usize], split: &Split, c: usize) -> Result<()> {
    if labels.len() != x.rows() {
        return Err(Error::DimensionMismatch(format!(
            "{} labels for {} nodes",
            labels.len(),
            x.rows()
        )));
    }
    split.validate(x.rows())?;
    if let Some(&y) = labels.iter().find(|&&y| y >= c) {
        return Err(Error::InvalidData(format!(
            "label {y} out of range for {c} classes"
        )));
    }
    Ok(())
}

/// Mean losses and accuracies on the train and test sets.
pub fn evaluate(
    spec: &ModelSpec,
    ops: &Operators,
    x: &Mat,
    labels: &[usize],
    split: &Split,
    w: &[f64],
) -> Result<Evaluation> {
    check_inputs(x, labels, split, spec.c)?;
    let cache = forward(spec, ops, x, w)?;
    Ok(evaluation_from(&cache.probs, labels, split))
}

fn evaluation_from(probs: &Mat, labels: &[usize], split: &Split) -> Evaluation {
    let (r_m, acc_m) = mean_loss_acc(probs, labels, &split.train);
    let (r_u, acc_u) = mean_loss_acc(probs, labels, &split.test);
    Evaluation {
        r_m,
        r_u,
        acc_m,
        acc_u,
    }
}

/// `|| grad R_m - grad R_u ||_2`
pub fn gradient_gap(
    spec: &ModelSpec,
    ops: &Operators,
    x: &Mat,
    labels: &[usize],
    split: &Split,
    w: &[f64],
) -> Result<f64> {
    check_inputs(x, labels, split, spec.c)?;
    Ok(evaluate_with_gap(spec, ops, x, labels, split, w)?.1)
}

fn evaluate_with_gap(
    spec: &ModelSpec,
    ops: &Operators,
    x: &Mat,
    labels: &[usize],
    split: &Split,
    w: &[f64],
) -> Result<(Evaluation, f64)> {
    let cache = forward(spec, ops, x, w)?;
    let mut seed = loss_seed(&cache, &samples(labels, &split.train));
    seed.axpy(-1.0, &loss_seed(&cache, &samples(labels, &split.test)));
    let g = backward(spec, ops, x, w, &cache, &seed);
    Ok((evaluation_from(&cache.probs, labels, split), norm2(&g)))
}

struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
}

/// Run transductive SGD. Only labels of training nodes reach the updates;
/// test labels are read by the checkpoint evaluation alone.
pub fn run_sgd(
    spec: &ModelSpec,
    ops: &Operators,
    x: &Mat,
    labels: &[usize],
    split: &Split,
    w1: &[f64],
    cfg: &SgdConfig,
) -> Result<(Vec<f64>, TrainTrace)> {
    cfg.validate()?;
    check_inputs(x, labels, split, spec.c)?;
    let train = samples(labels, &split.train);
    let mut w = w1.to_vec();
    let mut r = rng::stream(cfg.seed, "sgd-batches");
    let mut adam = AdamState {
        m: vec![0.0; w.len()],
        v: vec![0.0; w.len()],
    };
    let mut trace = TrainTrace::default();
    let mut g_emp: f64 = 0.0;
    let mut norm_sum = 0.0;
    let mut norm_sq_sum = 0.0;
    let mut norm_count = 0usize;

    let tracked = cfg.sample_norms || cfg.batch_size == 1;
    let record = |t: usize, w: &[f64], g_emp: f64, trace: &mut TrainTrace| -> Result<()> {
        let (e, gap) = evaluate_with_gap(spec, ops, x, labels, split, w)?;
        if !(e.r_m.is_finite() && e.r_u.is_finite() && gap.is_finite()) {
            return Err(Error::NonFinite(format!("loss at checkpoint t={t}")));
        }
        trace.checkpoints.push(Checkpoint {
            t,
            r_m: e.r_m,
            r_u: e.r_u,
            acc_m: e.acc_m,
            acc_u: e.acc_u,
            grad_gap: gap,
            dist: dist2(w, w1),
            g_emp: tracked.then_some(g_emp),
        });
        Ok(())
    };
    record(0, &w, g_emp, &mut trace)?;

    for t in 1..=cfg.t {
        let batch: Vec<(usize, usize)> = (0..cfg.batch_size)
            .map(|_| train[r.random_range(0..train.len())])
            .collect();
        let eta = cfg.schedule.eta(t);
        let checkpoint = t % cfg.eval_every == 0 || t == cfg.t;
        let cache = forward(spec, ops, x, &w)?;
        let mut g = backward(spec, ops, x, &w, &cache, &loss_seed(&cache, &batch));

        // Per-sample norms come for free when the batch is a single sample;
        // otherwise they are measured on the checkpoint steps.
        let per_sample: Vec<f64> = if cfg.batch_size == 1 {
            vec![norm2(&g)]
        } else if checkpoint && cfg.sample_norms {
            batch
                .iter()
                .map(|s| {
                    norm2(&backward(
                        spec,
                        ops,
                        x,
                        &w,
                        &cache,
                        &loss_seed(&cache, std::slice::from_ref(s)),
                    ))
                })
                .collect()
        } else {
            Vec::new()
        };
        for n in per_sample {
            g_emp = g_emp.max(eta.sqrt() * n);
            norm_sum += n;
            norm_sq_sum += n * n;
            norm_count += 1;
        }

        if cfg.l2 > 0.0 {
            for (gi, wi) in g.iter_mut().zip(&w) {
                *gi += cfg.l2 * wi;
            }
        }
        match cfg.optimizer {
            Optimizer::Sgd => {
                for (wi, gi) in w.iter_mut().zip(&g) {
                    *wi -= eta * gi;
                }
            }
            Optimizer::Adam { beta1, beta2, eps } => {
                let bc1 = 1.0 - beta1.powi(t as i32);
                let bc2 = 1.0 - beta2.powi(t as i32);
                for k in 0..w.len() {
                    adam.m[k] = beta1 * adam.m[k] + (1.0 - beta1) * g[k];
                    adam.v[k] = beta2 * adam.v[k] + (1.0 - beta2) * g[k] * g[k];
                    let mh = adam.m[k] / bc1;
                    let vh = adam.v[k] / bc2;
                    w[k] -= eta * mh / (vh.sqrt() + eps);
                }
            }
        }
        if checkpoint {
            record(t, &w, g_emp, &mut trace)?;
        }
    }
    if norm_count > 0 {
        trace.grad_norm_mean = Some(norm_sum / norm_count as f64);
        trace.grad_norm_sq_mean = Some(norm_sq_sum / norm_count as f64);
    }
    Ok((w, trace))
}

/// `max((2P)^(1/alpha), 1)`, or `max((2/mu)(2P)^(1/alpha), 1)` given `mu`.
pub fn t0_from_theory(p_f: f64, alpha: f64, mu: Option<f64>) -> Result<f64> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "alpha={alpha} outside (0,1]"
        )));
    }
    if !(p_f > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "P_F={p_f} must be positive"
        )));
    }
    let base = (2.0 * p_f).powf(1.0 / alpha);
    let scaled = match mu {
        Some(mu) if mu > 0.0 => 2.0 / mu * base,
        Some(mu) => return Err(Error::InvalidArgument(format!("mu={mu} must be positive"))),
        None => base,
    };
    Ok(scaled.max(1.0))
}
