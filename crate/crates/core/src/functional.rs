//! Linear combinations of joint entropies over `p(aux, x) q(y, z | x)`.
//!
//! Every objective in this crate (λ-sum rates, UV terms, the product-region
//! terms, class tests) is a signed sum of entropies of marginals of the
//! extended joint over `(aux_0, ..., aux_{k-1}, X, Y, Z)`. An
//! [`InfoProgram`] collects the distinct marginals a set of [`Form`]s needs,
//! evaluates them in one pass over the support of the channel, and returns
//! exact analytic gradients with respect to the auxiliary joint.
//!
//! The joint is laid out as `p[a * nx + x]` where `a` is the row-major
//! multi-index over the auxiliary alphabets. Gradients are those of the
//! natural extension `-Σ m log2 m` to unnormalized tensors.

use crate::channel::Channel;

/// Bit set of variables of the extended joint.
pub type Mask = u32;

/// Floor applied inside the gradient logarithm for empty marginal cells.
pub const LOG_FLOOR: f64 = 1e-14;

const INV_LN2: f64 = std::f64::consts::LOG2_E;

/// Variable naming for a program with `k` auxiliary variables.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Vars {
    k: usize,
}

impl Vars {
    pub fn new(aux_count: usize) -> Self {
        assert!(aux_count + 3 <= 32);
        Self { k: aux_count }
    }

    pub fn aux(&self, i: usize) -> Mask {
        assert!(i < self.k);
        1 << i
    }

    pub fn x(&self) -> Mask {
        1 << self.k
    }

    pub fn y(&self) -> Mask {
        1 << (self.k + 1)
    }

    pub fn z(&self) -> Mask {
        1 << (self.k + 2)
    }
}

/// Signed sum of joint entropies `Σ c_S H(S)` (bits).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Form {
    terms: Vec<(Mask, f64)>,
}

impl Form {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn terms(&self) -> &[(Mask, f64)] {
        &self.terms
    }

    fn push(&mut self, mask: Mask, coeff: f64) {
        if mask == 0 || coeff == 0.0 {
            return;
        }
        if let Some(t) = self.terms.iter_mut().find(|t| t.0 == mask) {
            t.1 += coeff;
        } else {
            self.terms.push((mask, coeff));
        }
        self.terms.retain(|t| t.1 != 0.0);
    }

    /// `+ c H(S)`.
    pub fn h(mut self, s: Mask, c: f64) -> Self {
        self.push(s, c);
        self
    }

    /// `+ c H(A | C)`.
    pub fn h_cond(self, a: Mask, given: Mask, c: f64) -> Self {
        self.h(a | given, c).h(given, -c)
    }

    /// `+ c I(A; B | C)`.
    pub fn mi(self, a: Mask, b: Mask, given: Mask, c: f64) -> Self {
        self.h(a | given, c).h(b | given, c).h(a | b | given, -c).h(given, -c)
    }

    pub fn add(mut self, other: &Form, c: f64) -> Self {
        for &(m, v) in &other.terms {
            self.push(m, c * v);
        }
        self
    }
}

#[derive(Debug, Clone)]
struct MaskTable {
    size: usize,
    /// Offset contributed by the auxiliary multi-index.
    aux_off: Vec<usize>,
    /// Offset per `x` when the mask has no output variable.
    x_off: Vec<usize>,
    /// Offsets per `x` and per supported `(y, z)` of that row.
    out_off: Option<Vec<Vec<usize>>>,
}

/// Compiled set of forms over one auxiliary layout and one channel.
#[derive(Debug, Clone)]
pub struct InfoProgram {
    aux_dims: Vec<usize>,
    aux_size: usize,
    nx: usize,
    /// Sparse channel rows: `(y, z, q)` with `q > 0`.
    rows: Vec<Vec<(usize, usize, f64)>>,
    masks: Vec<Mask>,
    tables: Vec<MaskTable>,
    /// `coeffs[f][k]` multiplies `H(masks[k])` in form `f`.
    coeffs: Vec<Vec<f64>>,
}

impl InfoProgram {
    pub fn new(aux_dims: &[usize], channel: &Channel, forms: &[Form]) -> Self {
        let k = aux_dims.len();
        let vars = Vars::new(k);
        let rows = channel.sparse_rows();
        let mut masks: Vec<Mask> = Vec::new();
        for f in forms {
            for &(m, _) in &f.terms {
                assert!(m >> (k + 3) == 0, "mask {m:#b} names a variable outside the layout");
                if !masks.contains(&m) {
                    masks.push(m);
                }
            }
        }
        masks.sort_unstable();
        let coeffs = forms
            .iter()
            .map(|f| {
                let mut c = vec![0.0; masks.len()];
                for &(m, v) in &f.terms {
                    let i = masks.iter().position(|&x| x == m).unwrap();
                    c[i] += v;
                }
                c
            })
            .collect();
        let aux_size: usize = aux_dims.iter().product();
        let var_dims: Vec<usize> =
            aux_dims.iter().copied().chain([channel.nx(), channel.ny(), channel.nz()]).collect();
        let tables = masks
            .iter()
            .map(|&m| {
                // row-major strides over the variables present in the mask
                let present: Vec<usize> = (0..k + 3).filter(|&v| m >> v & 1 == 1).collect();
                let mut stride = vec![0usize; k + 3];
                let mut acc = 1;
                for &v in present.iter().rev() {
                    stride[v] = acc;
                    acc *= var_dims[v];
                }
                let size = acc;
                let mut aux_off = vec![0usize; aux_size];
                for (a, off) in aux_off.iter_mut().enumerate() {
                    let mut rem = a;
                    for v in (0..k).rev() {
                        let coord = rem % aux_dims[v];
                        rem /= aux_dims[v];
                        *off += coord * stride[v];
                    }
                }
                let xs = stride[k];
                let x_off: Vec<usize> = (0..channel.nx()).map(|x| x * xs).collect();
                let has_out = m & (vars.y() | vars.z()) != 0;
                let out_off = has_out.then(|| {
                    rows.iter()
                        .enumerate()
                        .map(|(x, row)| {
                            row.iter()
                                .map(|&(y, z, _)| x * xs + y * stride[k + 1] + z * stride[k + 2])
                                .collect()
                        })
                        .collect()
                });
                MaskTable { size, aux_off, x_off, out_off }
            })
            .collect();
        Self { aux_dims: aux_dims.to_vec(), aux_size, nx: channel.nx(), rows, masks, tables, coeffs }
    }

    pub fn aux_dims(&self) -> &[usize] {
        &self.aux_dims
    }

    pub fn aux_size(&self) -> usize {
        self.aux_size
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    /// Length of the joint vector `p(aux, x)`.
    pub fn joint_len(&self) -> usize {
        self.aux_size * self.nx
    }

    pub fn form_count(&self) -> usize {
        self.coeffs.len()
    }

    fn marginals(&self, p: &[f64]) -> Vec<Vec<f64>> {
        assert_eq!(p.len(), self.joint_len(), "joint length mismatch");
        let mut marg: Vec<Vec<f64>> = self.tables.iter().map(|t| vec![0.0; t.size]).collect();
        for a in 0..self.aux_size {
            for x in 0..self.nx {
                let pa = p[a * self.nx + x];
                if pa == 0.0 {
                    continue;
                }
                let row = &self.rows[x];
                for (t, m) in self.tables.iter().zip(marg.iter_mut()) {
                    let base = t.aux_off[a];
                    match &t.out_off {
                        None => m[base + t.x_off[x]] += pa,
                        Some(out) => {
                            for (&(_, _, q), &o) in row.iter().zip(&out[x]) {
                                m[base + o] += pa * q;
                            }
                        }
                    }
                }
            }
        }
        marg
    }

    fn entropies(marg: &[Vec<f64>]) -> Vec<f64> {
        marg.iter()
            .map(|m| {
                let mut h = 0.0;
                for &v in m {
                    if v > 0.0 {
                        h -= v * v.log2();
                    }
                }
                h
            })
            .collect()
    }

    fn combine(&self, h: &[f64]) -> Vec<f64> {
        self.coeffs.iter().map(|c| c.iter().zip(h).map(|(a, b)| a * b).sum()).collect()
    }

    /// Values of every form at the joint `p`.
    pub fn values(&self, p: &[f64]) -> Vec<f64> {
        self.combine(&Self::entropies(&self.marginals(p)))
    }

    /// Values of every form, plus the gradient of `Σ_f weights[f] form_f`
    /// with respect to `p`, written into `grad`.
    pub fn values_grad(&self, p: &[f64], weights: &[f64], grad: &mut [f64]) -> Vec<f64> {
        assert_eq!(weights.len(), self.form_count());
        assert_eq!(grad.len(), self.joint_len());
        let marg = self.marginals(p);
        let vals = self.combine(&Self::entropies(&marg));
        let mask_w: Vec<f64> = (0..self.masks.len())
            .map(|k| self.coeffs.iter().zip(weights).map(|(c, w)| c[k] * w).sum())
            .collect();
        // d/dm of -m log2 m is -(log2 m + 1/ln 2)
        let dlog: Vec<Vec<f64>> = marg
            .iter()
            .zip(&mask_w)
            .map(|(m, &w)| {
                if w == 0.0 {
                    Vec::new()
                } else {
                    m.iter().map(|&v| -w * (v.max(LOG_FLOOR).log2() + INV_LN2)).collect()
                }
            })
            .collect();
        for a in 0..self.aux_size {
            for x in 0..self.nx {
                let row = &self.rows[x];
                let mut g = 0.0;
                for (k, t) in self.tables.iter().enumerate() {
                    if mask_w[k] == 0.0 {
                        continue;
                    }
                    let d = &dlog[k];
                    let base = t.aux_off[a];
                    match &t.out_off {
                        None => g += d[base + t.x_off[x]],
                        Some(out) => {
                            for (&(_, _, q), &o) in row.iter().zip(&out[x]) {
                                g += q * d[base + o];
                            }
                        }
                    }
                }
                grad[a * self.nx + x] = g;
            }
        }
        vals
    }
}

/// How a vector of form values is reduced to one scalar to maximize.
pub trait Scalarize: Sync {
    /// Returns the scalar and its partial derivatives with respect to each
    /// form value.
    fn scalarize(&self, values: &[f64]) -> (f64, Vec<f64>);
}

/// Fixed nonnegative combination of forms.
#[derive(Debug, Clone)]
pub struct Weighted(pub Vec<f64>);

impl Scalarize for Weighted {
    fn scalarize(&self, values: &[f64]) -> (f64, Vec<f64>) {
        (self.0.iter().zip(values).map(|(w, v)| w * v).sum(), self.0.clone())
    }
}

/// Smooth lower approximation of `min_f value_f`:
/// `-τ ln Σ exp(-v_f / τ)`, never more than `τ ln(#forms)` below the min.
#[derive(Debug, Clone, Copy)]
pub struct SoftMin {
    pub tau: f64,
}

impl Scalarize for SoftMin {
    fn scalarize(&self, values: &[f64]) -> (f64, Vec<f64>) {
        soft_min(values, self.tau)
    }
}

pub fn soft_min(values: &[f64], tau: f64) -> (f64, Vec<f64>) {
    let m = values.iter().copied().fold(f64::INFINITY, f64::min);
    let e: Vec<f64> = values.iter().map(|v| (-(v - m) / tau).exp()).collect();
    let s: f64 = e.iter().sum();
    (m - tau * s.ln(), e.iter().map(|v| v / s).collect())
}

/// How search coordinates map onto the joint `p(aux, x)`.
#[derive(Debug, Clone, PartialEq)]
pub enum Param {
    /// The point is the joint itself (one simplex block).
    Joint,
    /// The input law is held fixed; the point holds one conditional
    /// `p(aux | x)` block per input symbol, laid out `[x][a]`.
    AtInput(Vec<f64>),
}

/// An [`InfoProgram`] viewed as a search objective.
pub struct InfoObjective<'a, S: Scalarize> {
    pub program: &'a InfoProgram,
    pub param: Param,
    pub scalar: S,
}

impl<'a, S: Scalarize> InfoObjective<'a, S> {
    pub fn new(program: &'a InfoProgram, param: Param, scalar: S) -> Self {
        if let Param::AtInput(px) = &param {
            assert_eq!(px.len(), program.nx());
        }
        Self { program, param, scalar }
    }

    pub fn domain(&self) -> crate::search::BlockDomain {
        match &self.param {
            Param::Joint => crate::search::BlockDomain::single(self.program.joint_len()),
            Param::AtInput(px) => crate::search::BlockDomain::repeated(px.len(), self.program.aux_size()),
        }
    }

    /// The joint `p(aux, x)` a search point stands for.
    pub fn joint(&self, point: &[f64]) -> Vec<f64> {
        match &self.param {
            Param::Joint => point.to_vec(),
            Param::AtInput(px) => at_input_joint(px, point, self.program.aux_size()),
        }
    }

    /// Search point representing `joint` (conditionals of empty inputs are
    /// set uniform).
    pub fn point_of(&self, joint: &[f64]) -> Vec<f64> {
        match &self.param {
            Param::Joint => joint.to_vec(),
            Param::AtInput(px) => conditional_of(joint, px.len(), self.program.aux_size()),
        }
    }

    pub fn form_values(&self, point: &[f64]) -> Vec<f64> {
        self.program.values(&self.joint(point))
    }
}

pub fn at_input_joint(px: &[f64], cond: &[f64], aux_size: usize) -> Vec<f64> {
    let nx = px.len();
    let mut p = vec![0.0; aux_size * nx];
    for x in 0..nx {
        for a in 0..aux_size {
            p[a * nx + x] = px[x] * cond[x * aux_size + a];
        }
    }
    p
}

pub fn conditional_of(joint: &[f64], nx: usize, aux_size: usize) -> Vec<f64> {
    let mut c = vec![0.0; nx * aux_size];
    for x in 0..nx {
        let s: f64 = (0..aux_size).map(|a| joint[a * nx + x]).sum();
        for a in 0..aux_size {
            c[x * aux_size + a] = if s > 0.0 { joint[a * nx + x] / s } else { 1.0 / aux_size as f64 };
        }
    }
    c
}

impl<'a, S: Scalarize> crate::search::Objective for InfoObjective<'a, S> {
    fn value(&self, point: &[f64]) -> f64 {
        self.scalar.scalarize(&self.form_values(point)).0
    }

    fn value_grad(&self, point: &[f64], grad: &mut [f64]) -> f64 {
        let p = self.joint(point);
        let vals = self.program.values(&p);
        let (v, w) = self.scalar.scalarize(&vals);
        let mut gp = vec![0.0; p.len()];
        self.program.values_grad(&p, &w, &mut gp);
        match &self.param {
            Param::Joint => grad.copy_from_slice(&gp),
            Param::AtInput(px) => {
                let nx = px.len();
                let na = self.program.aux_size();
                for x in 0..nx {
                    for a in 0..na {
                        grad[x * na + a] = px[x] * gp[a * nx + x];
                    }
                }
            }
        }
        v
    }
}
