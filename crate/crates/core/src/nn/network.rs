//! Full-graph forward pass and reverse-mode gradients.
//!
//! The backward pass takes `dL/dlogits` for every node at once, so per-sample,
//! mini-batch and full-set gradients all reuse it. `A` is symmetric, so every
//! transpose propagation is `A` itself.

use crate::error::{Error, Result};
use crate::graph::{Filter, PropagationMatrix};
use crate::linalg::Mat;
use crate::nn::loss::{softmax, xent};
use crate::nn::model::{Arch, ModelSpec};

/// Propagation operators a model needs on one graph.
#[derive(Debug, Clone)]
pub struct Operators {
    pub a: PropagationMatrix,
    /// APPNP filter, present only for that architecture.
    pub filter: Option<Filter>,
}

impl Operators {
    pub fn new(a: PropagationMatrix, spec: &ModelSpec) -> Result<Operators> {
        let filter = match spec.arch {
            Arch::Appnp { gamma, k } => Some(Filter::appnp(&a, gamma, k)?),
            _ => None,
        };
        Ok(Operators { a, filter })
    }
}

#[derive(Debug, Clone)]
enum Inner {
    Gcn {
        /// `A H^(l-1)` for every layer, `H^(0) = X`.
        z: Vec<Mat>,
        pre: Vec<Mat>,
        h: Vec<Mat>,
    },
    Gcnii {
        pre0: Mat,
        h0: Mat,
        m: Vec<Mat>,
        pre: Vec<Mat>,
        h: Vec<Mat>,
    },
    Sgc {
        z: Mat,
        zw: Mat,
    },
    /// APPNP and GPR share the two-layer feature transform.
    Decoupled {
        pre1: Mat,
        h1: Mat,
        pre2: Mat,
        powers: Vec<Mat>,
    },
}

#[derive(Debug, Clone)]
pub struct ForwardCache {
    inner: Inner,
    pub logits: Mat,
    pub probs: Mat,
}

impl ForwardCache {
    pub fn loss(&self, i: usize, label: usize) -> f64 {
        xent(self.probs.row(i), label)
    }

    /// `A X` for GCN-type models: the first propagated features.
    pub fn first_propagation(&self) -> Option<&Mat> {
        match &self.inner {
            Inner::Gcn { z, .. } => z.first(),
            Inner::Sgc { z, .. } => Some(z),
            _ => None,
        }
    }

    /// Every pre-activation matrix that passes through the activation.
    pub fn pre_activations(&self) -> Vec<&Mat> {
        match &self.inner {
            Inner::Gcn { pre, .. } => pre.iter().collect(),
            Inner::Gcnii { pre0, pre, .. } => std::iter::once(pre0).chain(pre).collect(),
            Inner::Sgc { .. } => Vec::new(),
            Inner::Decoupled { pre1, pre2, .. } => vec![pre1, pre2],
        }
    }

    pub fn hidden(&self) -> Vec<&Mat> {
        match &self.inner {
            Inner::Gcn { h, .. } => h.iter().collect(),
            Inner::Gcnii { h0, h, .. } => std::iter::once(h0).chain(h).collect(),
            Inner::Sgc { zw, .. } => vec![zw],
            Inner::Decoupled { h1, powers, .. } => vec![h1, &powers[0]],
        }
    }
}

fn check(m: Mat, name: &str) -> Result<Mat> {
    if m.is_finite() {
        Ok(m)
    } else {
        Err(Error::NonFinite(name.to_string()))
    }
}

pub fn forward(spec: &ModelSpec, ops: &Operators, x: &Mat, w: &[f64]) -> Result<ForwardCache> {
    let layout = spec.layout();
    if w.len() != layout.len() {
        return Err(Error::DimensionMismatch(format!(
            "parameter vector has {} entries, layout needs {}",
            w.len(),
            layout.len()
        )));
    }
    if x.rows() != ops.a.n() || x.cols() != spec.d {
        return Err(Error::DimensionMismatch(format!(
            "features are {}x{}, expected {}x{}",
            x.rows(),
            x.cols(),
            ops.a.n(),
            spec.d
        )));
    }
    let ws = layout.matrices(w);
    let act = spec.act;
    let sigma = |m: &Mat| m.map(|v| act.eval(v));
    let a = &ops.a;

    let (inner, logits) = match &spec.arch {
        Arch::Gcn { layers } => {
            let mut z = Vec::with_capacity(*layers);
            let mut pre = Vec::with_capacity(layers - 1);
            let mut h = Vec::with_capacity(layers - 1);
            for l in 0..layers - 1 {
                let zl = a.apply(if l == 0 { x } else { &h[l - 1] });
                let p = check(
                    zl.matmul(&ws[l]),
                    &format!("layer {} pre-activation", l + 1),
                )?;
                h.push(sigma(&p));
                pre.push(p);
                z.push(zl);
            }
            let zl = a.apply(&h[layers - 2]);
            let logits = zl.matmul(&ws[layers - 1]);
            z.push(zl);
            (Inner::Gcn { z, pre, h }, logits)
        }
        Arch::Gcnii { alpha, beta } => {
            let pre0 = check(x.matmul(&ws[0]), "layer 0 pre-activation")?;
            let h0 = sigma(&pre0);
            let mut m = Vec::new();
            let mut pre = Vec::new();
            let mut h: Vec<Mat> = Vec::new();
            for l in 0..alpha.len() {
                let prev = if l == 0 { &h0 } else { &h[l - 1] };
                let mut ml = a.apply(prev).scale(1.0 - alpha[l]);
                ml.axpy(alpha[l], &h0);
                let mut p = ml.scale(1.0 - beta[l]);
                p.axpy(beta[l], &ml.matmul(&ws[l + 1]));
                let p = check(p, &format!("layer {} pre-activation", l + 1))?;
                h.push(sigma(&p));
                pre.push(p);
                m.push(ml);
            }
            let logits = h
                .last()
                .expect("at least one layer")
                .matmul(&ws[alpha.len() + 1]);
            (
                Inner::Gcnii {
                    pre0,
                    h0,
                    m,
                    pre,
                    h,
                },
                logits,
            )
        }
        Arch::Sgc => {
            let z = a.apply(&a.apply(x));
            let zw = z.matmul(&ws[0]);
            let logits = zw.matmul(&ws[1]);
            (Inner::Sgc { z, zw }, logits)
        }
        Arch::Appnp { .. } | Arch::Gpr { .. } => {
            let pre1 = check(x.matmul(&ws[0]), "layer 1 pre-activation")?;
            let h1 = sigma(&pre1);
            let pre2 = check(h1.matmul(&ws[1]), "layer 2 pre-activation")?;
            let h2 = sigma(&pre2);
            let (powers, logits) = match spec.arch {
                Arch::Gpr { k } => {
                    let gamma = &w[layout.blocks[2].range()];
                    let mut powers = vec![h2];
                    for i in 0..k {
                        let next = a.apply(&powers[i]);
                        powers.push(next);
                    }
                    let mut logits = Mat::zeros(x.rows(), spec.c);
                    for (g, p) in gamma.iter().zip(&powers) {
                        logits.axpy(*g, p);
                    }
                    (powers, logits)
                }
                _ => {
                    let f = ops.filter.as_ref().ok_or_else(|| {
                        Error::InvalidArgument("APPNP operators lack a filter".into())
                    })?;
                    let logits = f.apply(&h2);
                    (vec![h2], logits)
                }
            };
            (
                Inner::Decoupled {
                    pre1,
                    h1,
                    pre2,
                    powers,
                },
                logits,
            )
        }
    };
    let logits = check(logits, "logits")?;
    let mut probs = Mat::zeros(logits.rows(), logits.cols());
    for i in 0..logits.rows() {
        probs.row_mut(i).copy_from_slice(&softmax(logits.row(i)));
    }
    Ok(ForwardCache {
        inner,
        logits,
        probs,
    })
}

fn write_block(grad: &mut [f64], offset: usize, m: &Mat) {
    let v = m.to_col_major();
    grad[offset..offset + v.len()].copy_from_slice(&v);
}

/// Gradient of `sum_i <dlogits_i, logits_i>` with respect to the flat parameters.
pub fn backward(
    spec: &ModelSpec,
    ops: &Operators,
    x: &Mat,
    w: &[f64],
    cache: &ForwardCache,
    dlogits: &Mat,
) -> Vec<f64> {
    let layout = spec.layout();
    let ws = layout.matrices(w);
    let off = |i: usize| layout.blocks[i].offset;
    let mut grad = vec![0.0; layout.len()];
    let act = spec.act;
    let gate = |dh: &Mat, pre: &Mat| dh.zip_map(pre, |g, p| g * act.deriv(p));
    let a = &ops.a;

    match (&spec.arch, &cache.inner) {
        (Arch::Gcn { layers }, Inner::Gcn { z, pre, h: _ }) => {
            let last = layers - 1;
            write_block(&mut grad, off(last), &z[last].t_matmul(dlogits));
            let mut dh = a.apply(&dlogits.matmul_t(&ws[last]));
            for l in (0..last).rev() {
                let dpre = gate(&dh, &pre[l]);
                write_block(&mut grad, off(l), &z[l].t_matmul(&dpre));
                if l > 0 {
                    dh = a.apply(&dpre.matmul_t(&ws[l]));
                }
            }
        }
        (
            Arch::Gcnii { alpha, beta },
            Inner::Gcnii {
                pre0,
                h0: _,
                m,
                pre,
                h,
            },
        ) => {
            let big_l = alpha.len();
            write_block(&mut grad, off(big_l + 1), &h[big_l - 1].t_matmul(dlogits));
            let mut dh = dlogits.matmul_t(&ws[big_l + 1]);
            let mut dh0 = Mat::zeros(pre0.rows(), pre0.cols());
            for l in (0..big_l).rev() {
                let dpre = gate(&dh, &pre[l]);
                write_block(&mut grad, off(l + 1), &m[l].t_matmul(&dpre).scale(beta[l]));
                let mut dm = dpre.scale(1.0 - beta[l]);
                dm.axpy(beta[l], &dpre.matmul_t(&ws[l + 1]));
                dh0.axpy(alpha[l], &dm);
                let back = a.apply(&dm).scale(1.0 - alpha[l]);
                if l == 0 {
                    dh0.axpy(1.0, &back);
                } else {
                    dh = back;
                }
            }
            write_block(&mut grad, off(0), &x.t_matmul(&gate(&dh0, pre0)));
        }
        (Arch::Sgc, Inner::Sgc { z, zw }) => {
            write_block(&mut grad, off(1), &zw.t_matmul(dlogits));
            write_block(&mut grad, off(0), &z.t_matmul(&dlogits.matmul_t(&ws[1])));
        }
        (
            arch,
            Inner::Decoupled {
                pre1,
                h1,
                pre2,
                powers,
            },
        ) => {
            let dh2 = match arch {
                Arch::Gpr { k } => {
                    let gamma = &w[layout.blocks[2].range()];
                    let gb = &layout.blocks[2];
                    for (kk, p) in powers.iter().enumerate() {
                        grad[gb.offset + kk] = dlogits.frobenius_dot(p);
                    }
                    let mut acc = dlogits.scale(gamma[*k]);
                    for kk in (0..*k).rev() {
                        acc = a.apply(&acc);
                        acc.axpy(gamma[kk], dlogits);
                    }
                    acc
                }
                _ => ops
                    .filter
                    .as_ref()
                    .expect("APPNP operators carry a filter")
                    .apply(dlogits),
            };
            let dpre2 = gate(&dh2, pre2);
            write_block(&mut grad, off(1), &h1.t_matmul(&dpre2));
            let dpre1 = gate(&dpre2.matmul_t(&ws[1]), pre1);
            write_block(&mut grad, off(0), &x.t_matmul(&dpre1));
        }
        _ => unreachable!("cache built for a different architecture"),
    }
    grad
}

/// `dL/dlogits` for the mean loss over `samples`; repeated nodes accumulate.
pub fn loss_seed(cache: &ForwardCache, samples: &[(usize, usize)]) -> Mat {
    let mut g = Mat::zeros(cache.probs.rows(), cache.probs.cols());
    let scale = 1.0 / samples.len() as f64;
    for &(i, y) in samples {
        let row = g.row_mut(i);
        for (gv, &p) in row.iter_mut().zip(cache.probs.row(i)) {
            *gv += scale * p;
        }
        row[y] -= scale;
    }
    g
}

fn check_label(spec: &ModelSpec, n: usize, i: usize, y: usize) -> Result<()> {
    if i >= n {
        return Err(Error::InvalidArgument(format!(
            "node {i} out of range for n={n}"
        )));
    }
    if y >= spec.c {
        return Err(Error::InvalidArgument(format!(
            "label {y} out of range for {} classes",
            spec.c
        )));
    }
    Ok(())
}

/// Loss of one labelled node.
pub fn sample_loss(
    spec: &ModelSpec,
    ops: &Operators,
    x: &Mat,
    w: &[f64],
    i: usize,
    y: usize,
) -> Result<f64> {
    check_label(spec, x.rows(), i, y)?;
    Ok(forward(spec, ops, x, w)?.loss(i, y))
}

/// Analytic gradient of one node's loss.
pub fn grad_sample(
    spec: &ModelSpec,
    ops: &Operators,
    x: &Mat,
    w: &[f64],
    i: usize,
    y: usize,
) -> Result<Vec<f64>> {
    grad_mean(spec, ops, x, w, &[(i, y)]).map(|(g, _)| g)
}

/// Mean loss and its gradient over `(node, label)` samples.
pub fn grad_mean(
    spec: &ModelSpec,
    ops: &Operators,
    x: &Mat,
    w: &[f64],
    samples: &[(usize, usize)],
) -> Result<(Vec<f64>, f64)> {
    if samples.is_empty() {
        return Err(Error::InvalidArgument(
            "gradient over an empty sample set".into(),
        ));
    }
    for &(i, y) in samples {
        check_label(spec, x.rows(), i, y)?;
    }
    let cache = forward(spec, ops, x, w)?;
    let mut loss = 0.0;
    for &(i, y) in samples {
        loss += cache.loss(i, y);
    }
    let g = backward(spec, ops, x, w, &cache, &loss_seed(&cache, samples));
    Ok((g, loss / samples.len() as f64))
}

/// Central differences of any scalar function of the parameters.
pub fn central_differences(
    w: &[f64],
    step: f64,
    mut f: impl FnMut(&[f64]) -> Result<f64>,
) -> Result<Vec<f64>> {
    if !(step > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "finite-difference step {step} must be positive"
        )));
    }
    let mut probe = w.to_vec();
    let mut out = Vec::with_capacity(w.len());
    for j in 0..w.len() {
        probe[j] = w[j] + step;
        let up = f(&probe)?;
        probe[j] = w[j] - step;
        let down = f(&probe)?;
        probe[j] = w[j];
        out.push((up - down) / (2.0 * step));
    }
    Ok(out)
}

/// Finite-difference gradient of one node's loss.
pub fn grad_fd_oracle(
    spec: &ModelSpec,
    ops: &Operators,
    x: &Mat,
    w: &[f64],
    i: usize,
    y: usize,
    step: f64,
) -> Result<Vec<f64>> {
    check_label(spec, x.rows(), i, y)?;
    central_differences(w, step, |p| Ok(forward(spec, ops, x, p)?.loss(i, y)))
}

/// Floor on the denominator of [`relative_error`], so near-zero components
/// are compared absolutely.
pub const REL_FLOOR: f64 = 1e-3;

/// `|a - b| / max(|a|, |b|, REL_FLOOR)`
pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(REL_FLOOR)
}

pub fn max_relative_error(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| relative_error(x, y))
        .fold(0.0, f64::max)
}

/// Distance from any pre-activation to the activation's breakpoints `0` and `t`.
pub fn kink_distance(spec: &ModelSpec, cache: &ForwardCache) -> f64 {
    let t = spec.act.threshold();
    cache
        .pre_activations()
        .iter()
        .flat_map(|m| m.as_slice())
        .map(|&p| p.abs().min((p - t).abs()))
        .fold(f64::INFINITY, f64::min)
}
