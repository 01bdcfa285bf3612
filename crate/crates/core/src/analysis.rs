//! Measured constants, Lipschitz and Hölder constants per architecture, and the
//! transductive generalization-gap certificate.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::{
    degree_bound, inf_norm_power, DegreeStats, Filter, PropagationMatrix, MATERIALIZE_LIMIT,
};
use crate::linalg::{norm2, spectral_norm, Mat};
use crate::nn::{backward, forward, loss_seed, Arch, Layout, ModelSpec, Operators};

/// Label attached to Hölder constants: the per-block bounds are combined by
/// adding the linear and the fractional-power parts.
pub const AGGREGATION: &str = "lemma-aggregation (sum reading)";

/// Label attached to certificates whose radius is the measured trajectory radius.
pub const RADIUS_LABEL: &str = "measured-R certificate";

/// Largest row 2-norm.
pub fn compute_cx(x: &Mat) -> f64 {
    x.max_row_norm()
}

/// Scale every nonzero row to unit 2-norm.
pub fn row_normalize(x: &Mat) -> Mat {
    let mut out = x.clone();
    for i in 0..out.rows() {
        let r = out.row_mut(i);
        let n = crate::linalg::norm2(r);
        if n > 0.0 {
            r.iter_mut().for_each(|v| *v /= n);
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpectralBound {
    pub value: f64,
    pub converged: bool,
}

/// Largest spectral norm over the weight matrices; `gamma` is skipped.
pub fn compute_cw(w: &[f64], layout: &Layout, seed: u64) -> SpectralBound {
    let mut out = SpectralBound {
        value: 0.0,
        converged: true,
    };
    for (i, b) in layout.blocks.iter().enumerate() {
        if !b.is_matrix() {
            continue;
        }
        let est = spectral_norm(&layout.matrix(w, i), seed);
        out.value = out.value.max(est.value);
        out.converged &= est.converged;
    }
    out
}

/// Operator norms the constants depend on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Default)]
pub struct Norms {
    pub a_inf: f64,
    pub a2_inf: f64,
    /// Norm of the model's filter: `||A||` for GCN/GCNII, `||A^2||` for SGC,
    /// the APPNP filter, or the absolute row-sum norm of the GPR filter.
    pub g_inf: f64,
    /// `sum_{k=0..K} ||A^k||` (GPR only).
    pub power_sum: f64,
}

/// `sum_k |c_k| A^k` row sums; exact when materialized, otherwise the triangle bound.
pub fn signed_filter_norm(a: &PropagationMatrix, coeffs: &[f64]) -> f64 {
    if a.n() <= MATERIALIZE_LIMIT {
        Filter::from_coeffs(a, coeffs.to_vec(), true).inf_norm()
    } else {
        coeffs
            .iter()
            .enumerate()
            .map(|(k, c)| c.abs() * inf_norm_power(a, k))
            .sum()
    }
}

/// Upper bound on the GPR filter norm for every `gamma` within `radius` of `gamma1`.
pub fn gpr_filter_norm_ball(a: &PropagationMatrix, gamma1: &[f64], radius: f64) -> f64 {
    let sq: f64 = (0..gamma1.len())
        .map(|k| inf_norm_power(a, k).powi(2))
        .sum();
    signed_filter_norm(a, gamma1) + radius * sq.sqrt()
}

pub fn measure_norms(spec: &ModelSpec, a: &PropagationMatrix, w: &[f64]) -> Result<Norms> {
    let a_inf = a.inf_norm();
    let a2_inf = inf_norm_power(a, 2);
    let (g_inf, power_sum) = match &spec.arch {
        Arch::Gcn { .. } | Arch::Gcnii { .. } => (a_inf, 0.0),
        Arch::Sgc => (a2_inf, 0.0),
        Arch::Appnp { gamma, k } => (Filter::appnp(a, *gamma, *k)?.inf_norm(), 0.0),
        Arch::Gpr { k } => {
            let l = spec.layout();
            let gamma = &w[l.blocks[2].range()];
            let s = (0..=*k).map(|i| inf_norm_power(a, i)).sum();
            (signed_filter_norm(a, gamma), s)
        }
    };
    Ok(Norms {
        a_inf,
        a2_inf,
        g_inf,
        power_sum,
    })
}

/// Intermediate quantities of the GCNII constant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GcniiParts {
    pub b1: f64,
    pub b2: f64,
    pub c1: f64,
    pub c2: f64,
    pub l1: f64,
    pub l2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Lipschitz {
    pub value: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gcnii: Option<GcniiParts>,
}

fn gcnii_params(arch: &Arch) -> Option<(f64, f64, f64, f64)> {
    match arch {
        Arch::Gcnii { alpha, beta } if alpha.len() == 2 => {
            Some((alpha[0], alpha[1], beta[0], beta[1]))
        }
        _ => None,
    }
}

pub fn gcnii_parts(alpha: (f64, f64), beta: (f64, f64), cx: f64, cw: f64, a: f64) -> GcniiParts {
    let (a1, a2) = alpha;
    let (b1_, b2_) = beta;
    let c1 = 1.0 - b1_ + b1_ * cw;
    let c2 = 1.0 - b2_ + b2_ * cw;
    let b1 = cx * cw * c1 * ((1.0 - a1) * a + a1);
    let b2 = ((1.0 - a2) * b1 * a + a2 * cx * cw) * c2;
    let l1 = 2.0 * (2.0 + cw * cw * b2_ * b2_ / (c2 * c2)) * b2 * b2;
    let l2 = 2.0 * (1.0 - a2).powi(2) * b1_ * b1_ * cw * cw * a * a * b1 * b1 * c2 * c2 / (c1 * c1);
    GcniiParts {
        b1,
        b2,
        c1,
        c2,
        l1,
        l2,
    }
}

/// Lipschitz constant of `w -> loss(w; z)` over the weight ball. `None` for
/// stacked variants deeper than two propagation layers.
pub fn lipschitz_constant(spec: &ModelSpec, cx: f64, cw: f64, n: &Norms) -> Option<Lipschitz> {
    let plain = |value| Some(Lipschitz { value, gcnii: None });
    match &spec.arch {
        Arch::Gcn { layers: 2 } => plain(2.0 * cx * cw * n.a_inf * n.a_inf),
        Arch::Gcn { .. } => None,
        Arch::Sgc => plain(2.0 * cx * cw * n.a2_inf),
        Arch::Appnp { .. } => plain(2.0 * cx * cw * n.g_inf),
        Arch::Gpr { .. } => {
            let l1 = 2f64.sqrt() * cx * cw * cw * n.power_sum;
            let l2 = 2.0 * cx * cw * n.g_inf;
            plain((l1 * l1 + l2 * l2).sqrt())
        }
        arch @ Arch::Gcnii { .. } => {
            let (a1, a2, b1, b2) = gcnii_params(arch)?;
            let p = gcnii_parts((a1, a2), (b1, b2), cx, cw, n.a_inf);
            Some(Lipschitz {
                value: (p.l1 + p.l2).sqrt(),
                gcnii: Some(p),
            })
        }
    }
}

/// Per-block coefficients: `lin[h][i]` multiplies `||w_i - w_i'||` in the bound
/// on block `h` of the gradient, `frac[h][i]` multiplies its `alpha~` power.
#[derive(Debug, Clone, PartialEq)]
pub struct HolderTables {
    pub lin: Vec<Vec<f64>>,
    pub frac: Vec<Vec<f64>>,
}

impl HolderTables {
    fn zeros(k: usize) -> Self {
        HolderTables {
            lin: vec![vec![0.0; k]; k],
            frac: vec![vec![0.0; k]; k],
        }
    }

    /// `(sum_i P_i^2)^(1/2) + (sum_i P~_i^(2/(2-a)))^(1-a/2)` over column sums.
    pub fn aggregate(&self, alpha_tilde: f64) -> f64 {
        let k = self.lin.len();
        let col = |t: &Vec<Vec<f64>>, i: usize| (0..k).map(|h| t[h][i]).sum::<f64>();
        let lin: f64 = (0..k)
            .map(|i| col(&self.lin, i).powi(2))
            .sum::<f64>()
            .sqrt();
        let e = 2.0 / (2.0 - alpha_tilde);
        let frac: f64 = (0..k).map(|i| col(&self.frac, i).powf(e)).sum::<f64>();
        lin + frac.powf(1.0 - alpha_tilde / 2.0)
    }
}

/// Inputs shared by all coefficient tables.
#[derive(Debug, Clone, Copy)]
pub struct HolderInputs {
    pub cx: f64,
    pub cw: f64,
    pub norms: Norms,
    pub alpha_tilde: f64,
    /// Hölder constant of the activation derivative.
    pub p_act: f64,
    pub classes: usize,
}

pub fn holder_tables(spec: &ModelSpec, inp: &HolderInputs) -> Option<HolderTables> {
    let (cx, cw, a, p) = (inp.cx, inp.cw, inp.alpha_tilde, inp.p_act);
    let s2 = 2f64.sqrt();
    let sc = (inp.classes as f64).sqrt();
    let pa = |v: f64| v.powf(1.0 + a);
    match &spec.arch {
        Arch::Gcn { layers: 2 } => {
            let g = inp.norms.a_inf;
            let mut t = HolderTables::zeros(2);
            t.lin[1][0] = s2 * cx * g.powi(2) + 2.0 * cx * cw * cw * g.powi(4);
            t.lin[1][1] = 2.0 * cx * cw * g.powi(2);
            t.lin[0][0] = cx * cx * cw * g.powi(4);
            t.frac[0][0] = pa(cx) * cw * p * sc * g.powf(2.0 + a);
            t.lin[0][1] = s2 * cx * g.powi(2) + 2.0 * cx * cx * cw * g.powi(4);
            Some(t)
        }
        Arch::Gcn { .. } => None,
        Arch::Sgc => {
            let g = inp.norms.a2_inf;
            let mut t = HolderTables::zeros(2);
            let p21 = s2 * cx * g + cx * cx * cw * cw * g * g;
            let p22 = cx * cx * cw * cw * g * g;
            t.lin[1][0] = p21;
            t.lin[1][1] = p22;
            t.lin[0][0] = p22;
            t.lin[0][1] = p21;
            Some(t)
        }
        Arch::Appnp { .. } => {
            let g = inp.norms.g_inf;
            let cc = cx * cx * cw * cw * g * g;
            let mut t = HolderTables::zeros(2);
            t.lin[1][0] = s2 * cx * g + cc;
            t.lin[1][1] = cc;
            t.frac[1][0] = g * sc * pa(cx) * pa(cw);
            t.frac[1][1] = s2 * p * g * pa(cx) * pa(cw);
            t.lin[0][0] = cc;
            t.lin[0][1] = s2 * cx * g + cc;
            t.frac[0][0] = s2 * p * g * pa(cx) * pa(cw);
            t.frac[0][1] = (pa(cx) * cw + pa(cx) * pa(cw)) * p * s2 * g;
            Some(t)
        }
        Arch::Gpr { .. } => {
            let g = inp.norms.g_inf;
            let s = inp.norms.power_sum;
            let cc = cx * cx * cw * cw * g * g;
            let p_gamma = (s2 + cx * cw * g) * cx * cw * cw * s;
            let mut t = HolderTables::zeros(3);
            t.lin[1][0] = cc;
            t.lin[1][1] = s2 * cx * g + cc;
            t.lin[1][2] = p_gamma;
            t.frac[1][0] = g * sc * pa(cx) * pa(cw);
            t.frac[1][1] = s2 * p * g * pa(cx) * pa(cw);
            t.lin[0][0] = cc;
            t.lin[0][1] = s2 * cx * g + cc;
            t.lin[0][2] = p_gamma;
            t.frac[0][0] = s2 * p * (pa(cx) * cw + pa(cx) * pa(cw));
            t.frac[0][1] = pa(cx) * pa(cw) * p * s2 * g;
            t.lin[2][0] = cx * cx * cw.powi(3) * g * s;
            t.lin[2][1] = cx * cx * cw.powi(3) * g * s;
            t.lin[2][2] = cx * cx * cw.powi(4) * s * s;
            t.frac[2][0] = s2 * p * cx.powf(a) * cw.powf(a) * s;
            t.frac[2][1] = s2 * p * cx.powf(a) * cw.powf(a) * s;
            Some(t)
        }
        arch @ Arch::Gcnii { .. } => {
            let (al1, al2, be1, be2) = gcnii_params(arch)?;
            let g = inp.norms.a_inf;
            let q = gcnii_parts((al1, al2), (be1, be2), cx, cw, g);
            let (b1, b2, c1, c2) = (q.b1, q.b2, q.c1, q.c2);
            let r2 = be2 * b2 / c2;
            let k = s2 + 2.0 * cw * b2;
            let mut t = HolderTables::zeros(4);

            t.lin[3][3] = 2.0 * b2 * b2;
            t.lin[3][2] = k * r2;
            t.lin[3][1] = (1.0 - al2) * be1 * k * (b1 * c2 / c1) * g;
            t.lin[3][0] = k * b2 / cw;

            t.lin[2][3] = k * r2;
            t.lin[2][2] = cw * cw * r2 * r2;
            t.lin[2][1] = (1.0 - al2) * cw * (b1 * be1 * be2 / c1) * g * (cw * b2 + s2);
            t.lin[2][0] = r2 * (s2 + b2 * cw);
            t.frac[2][2] = s2 * p * cw * r2.powf(1.0 + a);
            t.frac[2][1] = s2
                * p
                * cw
                * (1.0 - al2).powf(a)
                * be1.powf(a)
                * (b1 * c2 / c1).powf(a)
                * g.powf(a)
                * r2;
            t.frac[2][0] = s2 * p * cw * (b2 / cw).powf(a) * r2;

            t.lin[1][3] = (be1 * b1 * c2 / c1) * g * k;
            t.lin[1][2] =
                (1.0 - al2) * (be1 * b1 / c1) * g * (cw * cw * be2 * b2 + s2 * (1.0 - be2) * cw);
            t.lin[1][1] =
                (1.0 - al2).powi(2) * be1 * be1 * cw * cw * (b1 * b1 * c2 * c2 / (c1 * c1)) * g;
            t.lin[1][0] = (1.0 - al2) * cw * (be1 * b1 * b2 / c1) * g;
            t.frac[1][2] = s2 * (1.0 - al2) * cw * p * (be1 * b1 * c2 / c1) * g * r2.powf(a);
            t.frac[1][1] = s2
                * cw
                * c2
                * p
                * ((1.0 - al2).powf(1.0 + a) * c2.powf(a) * g.powf(a) + (1.0 - al2))
                * (be1 * b1 / c1).powf(a + 1.0)
                * g;
            t.frac[1][0] = s2
                * (1.0 - al2)
                * cw
                * p
                * ((b2 / cw).powf(a) + (b1 / cw).powf(a))
                * (be1 * b1 * c2 / c1)
                * g;

            t.lin[0][3] = cx * b2 * k;
            t.lin[0][2] = s2 * al2 * be2 * cx * cx * cw * cw
                + s2 * (1.0 - al2) * (1.0 - be2) * cx * cw * b1 * g;
            t.lin[0][1] = (2.0 * (1.0 - al2) * be1 * cx * cw * cw * b1 * b2 * c2 / c1
                + s2 * al1 * (1.0 - al2) * be1 * cx * cx * cw * cw * c2)
                * g;
            t.lin[0][0] = cx * b2 * k;
            t.frac[0][2] = b2 * cx * cw * s2 * p * r2.powf(a);
            t.frac[0][1] = (b2 * (1.0 - al2).powf(a) * c2.powf(a) * g.powf(a) + b1 * c2 * g)
                * s2
                * p
                * cx
                * cw
                * (be1 * b1 / c1).powf(a);
            t.frac[0][0] = s2
                * cx
                * cw
                * p
                * (b2 * (b2 / cw).powf(a) + (1.0 - al2) * c2 * g * b1 * (b1 / cw).powf(a));
            Some(t)
        }
    }
}

pub fn holder_constant(spec: &ModelSpec, inp: &HolderInputs) -> Option<f64> {
    holder_tables(spec, inp).map(|t| t.aggregate(inp.alpha_tilde))
}

/// Activation Hölder constant for a model: the widest activated layer decides.
pub fn activation_holder_constant(spec: &ModelSpec) -> f64 {
    let dim = match spec.arch {
        Arch::Appnp { .. } | Arch::Gpr { .. } => spec.h.max(spec.c),
        _ => spec.h,
    };
    spec.act.holder_constant(dim)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TransductiveTerms {
    pub q: f64,
    pub s: f64,
    pub c0: f64,
}

/// `sqrt(32 ln(4e) / 3)`
pub fn c0() -> f64 {
    (32.0 * (4.0 * std::f64::consts::E).ln() / 3.0).sqrt()
}

/// `sqrt(ln 3) + 1.5 sqrt(pi)`
pub fn dudley_constant() -> f64 {
    3f64.ln().sqrt() + 1.5 * std::f64::consts::PI.sqrt()
}

fn check_sizes(m: usize, u: usize) -> Result<()> {
    if m == 0 || u == 0 {
        return Err(Error::InvalidArgument(
            "train and test sizes must be positive".into(),
        ));
    }
    Ok(())
}

pub fn transductive_terms(m: usize, u: usize) -> Result<TransductiveTerms> {
    check_sizes(m, u)?;
    let (mf, uf) = (m as f64, u as f64);
    let q = 1.0 / mf + 1.0 / uf;
    let s = (mf + uf) / ((mf + uf - 0.5) * (1.0 - 1.0 / (2.0 * mf.max(uf))));
    Ok(TransductiveTerms { q, s, c0: c0() })
}

fn size_factor(m: usize, u: usize) -> f64 {
    let (mf, uf) = (m as f64, u as f64);
    (mf + uf).powf(1.5) / (mf * uf)
}

pub fn rademacher_upper(
    m: usize,
    u: usize,
    dim: usize,
    l_f: f64,
    r: f64,
    b_ell: f64,
) -> Result<f64> {
    let (trc, dudley) = rademacher_parts(m, u, dim, l_f, r, b_ell)?;
    Ok(trc + dudley)
}

fn rademacher_parts(
    m: usize,
    u: usize,
    dim: usize,
    l_f: f64,
    r: f64,
    b_ell: f64,
) -> Result<(f64, f64)> {
    check_sizes(m, u)?;
    if [l_f, r, b_ell].iter().any(|v| !(*v >= 0.0)) {
        return Err(Error::InvalidArgument(
            "L_F, R and b_ell must be nonnegative".into(),
        ));
    }
    let f = size_factor(m, u);
    let trc = b_ell * f;
    let dudley = 12.0 * f * (dim as f64).sqrt() * dudley_constant() * l_f * r;
    Ok((trc, dudley))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RateClass {
    AlphaLtHalf,
    AlphaEqHalf,
    AlphaGtHalf,
}

pub fn rate_class(alpha: f64) -> RateClass {
    if alpha < 0.5 {
        RateClass::AlphaLtHalf
    } else if alpha == 0.5 {
        RateClass::AlphaEqHalf
    } else {
        RateClass::AlphaGtHalf
    }
}

fn check_rate_inputs(alpha: f64, t: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "alpha={alpha} outside (0,1]"
        )));
    }
    if !(t >= 1.0) {
        return Err(Error::InvalidArgument(format!("T={t} must be at least 1")));
    }
    Ok(())
}

/// Growth factor of the gap in the iteration count.
pub fn rate_value(alpha: f64, t: f64) -> Result<f64> {
    check_rate_inputs(alpha, t)?;
    let lt = t.ln();
    Ok(match rate_class(alpha) {
        RateClass::AlphaLtHalf => t.powf((1.0 - 2.0 * alpha) / 2.0) * lt.sqrt(),
        RateClass::AlphaEqHalf => lt,
        RateClass::AlphaGtHalf => lt.sqrt(),
    })
}

/// The gradient gap shares the loss-gap rate.
pub fn theorem2_rate(alpha: f64, t: f64) -> Result<f64> {
    rate_value(alpha, t)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExcessRisk {
    pub generalization: f64,
    pub optimization: f64,
}

/// Optimization error `T^-alpha` (alpha < 1) or `ln T ln^3(1/delta) / T`
/// (alpha = 1), reported next to the supplied generalization rate.
pub fn corollary_excess(alpha: f64, t: f64, delta: f64, rate: f64) -> Result<ExcessRisk> {
    check_rate_inputs(alpha, t)?;
    check_delta(delta)?;
    let optimization = if alpha < 1.0 {
        t.powf(-alpha)
    } else {
        t.ln() * (1.0 / delta).ln().powi(3) / t
    };
    Ok(ExcessRisk {
        generalization: rate,
        optimization,
    })
}

fn check_delta(delta: f64) -> Result<()> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "delta={delta} outside (0,1)"
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundInputs {
    pub m: usize,
    pub u: usize,
    pub dim: usize,
    pub t: usize,
    pub delta: f64,
    pub alpha: f64,
    pub l_f: f64,
    pub r: f64,
    pub b_ell: f64,
    pub b_g: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundReport {
    pub trc_term: f64,
    pub dudley_term: f64,
    pub conc_term_1: f64,
    pub conc_term_2: f64,
    pub total: f64,
    pub rate_class: RateClass,
    pub rate_value: f64,
}

pub fn theorem1_certificate(inp: &BoundInputs) -> Result<BoundReport> {
    check_delta(inp.delta)?;
    let tt = transductive_terms(inp.m, inp.u)?;
    let (trc_term, dudley_term) =
        rademacher_parts(inp.m, inp.u, inp.dim, inp.l_f, inp.r, inp.b_ell)?;
    let conc_term_1 = tt.c0 * tt.q * (inp.m.min(inp.u) as f64).sqrt();
    let conc_term_2 = (tt.s * tt.q / 2.0 * (2.0 / inp.delta).ln()).sqrt();
    Ok(BoundReport {
        trc_term,
        dudley_term,
        conc_term_1,
        conc_term_2,
        total: trc_term + dudley_term + conc_term_1 + conc_term_2,
        rate_class: rate_class(inp.alpha),
        rate_value: rate_value(inp.alpha, inp.t as f64)?,
    })
}

/// Measured constants for one model at one parameter vector.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConstantsReport {
    pub c_x: f64,
    pub c_w: f64,
    pub c_w_converged: bool,
    pub norms: Norms,
    pub l_f: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gcnii: Option<GcniiParts>,
    /// GCNII constant at `alpha = beta = 0`, for comparison with GCN.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gcnii_at_zero: Option<f64>,
    pub p_f: Option<f64>,
    pub p_act: f64,
    pub alpha_tilde: f64,
    pub degree_bound_value: f64,
    pub aggregation: &'static str,
}

/// `c_w` overrides the measured spectral bound when given.
pub fn constants_report(
    spec: &ModelSpec,
    a: &PropagationMatrix,
    stats: &DegreeStats,
    x: &Mat,
    w: &[f64],
    c_w: Option<f64>,
    seed: u64,
) -> Result<ConstantsReport> {
    let c_x = compute_cx(x);
    let (cw, converged) = match c_w {
        Some(v) if v > 0.0 && v.is_finite() => (v, true),
        Some(v) => return Err(Error::InvalidArgument(format!("c_W={v} must be positive"))),
        None => {
            let b = compute_cw(w, &spec.layout(), seed);
            (b.value, b.converged)
        }
    };
    let norms = measure_norms(spec, a, w)?;
    let lip = lipschitz_constant(spec, c_x, cw, &norms);
    let gcnii_at_zero = match spec.arch {
        Arch::Gcnii { ref alpha, .. } if alpha.len() == 2 => {
            let p = gcnii_parts((0.0, 0.0), (0.0, 0.0), c_x, cw, norms.a_inf);
            Some((p.l1 + p.l2).sqrt())
        }
        _ => None,
    };
    let p_act = activation_holder_constant(spec);
    let alpha_tilde = spec.act.alpha_tilde();
    let inputs = HolderInputs {
        cx: c_x,
        cw,
        norms,
        alpha_tilde,
        p_act,
        classes: spec.c,
    };
    Ok(ConstantsReport {
        c_x,
        c_w: cw,
        c_w_converged: converged,
        norms,
        l_f: lip.map(|l| l.value),
        gcnii: lip.and_then(|l| l.gcnii),
        gcnii_at_zero,
        p_f: holder_constant(spec, &inputs),
        p_act,
        alpha_tilde,
        degree_bound_value: degree_bound(stats),
        aggregation: AGGREGATION,
    })
}

/// `sup_z |loss(w; z)|` and `sup_z ||grad loss(w; z)||` over every labeled node.
pub fn initial_bounds(
    spec: &ModelSpec,
    ops: &Operators,
    x: &Mat,
    labels: &[usize],
    w: &[f64],
) -> Result<(f64, f64)> {
    let cache = forward(spec, ops, x, w)?;
    let mut b_ell: f64 = 0.0;
    let mut b_g: f64 = 0.0;
    for (i, &y) in labels.iter().enumerate() {
        b_ell = b_ell.max(cache.loss(i, y).abs());
        let g = backward(spec, ops, x, w, &cache, &loss_seed(&cache, &[(i, y)]));
        b_g = b_g.max(norm2(&g));
    }
    Ok((b_ell, b_g))
}
