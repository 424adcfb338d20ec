//! Outer bounds: the UV sum rate and rate regions for product channels.
//!
//! A product region is a family of linear inequalities in `(R0, R1, R2)`
//! whose right-hand sides are sums of per-component information terms.
//! Regions are compared through their support functions, maximized over
//! per-component auxiliary joints.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::channel::{Channel, ProductChannel};
use crate::error::{BoundsError, Result};
use crate::functional::{soft_min, Form, InfoProgram, Vars};
use crate::info::ProbTensor;
use crate::marton::{build_lambda_curve, structured_seeds, uniform, AuxiliaryJoint, Cardinalities, CurveOptions};
use crate::search::{maximize, BlockDomain, Objective, SearchConfig};

/// A joint `p(u, v, x)`, row-major over `nu x nv x nx`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UvAuxiliary {
    pub nu: usize,
    pub nv: usize,
    pub nx: usize,
    joint: ProbTensor,
}

impl UvAuxiliary {
    pub fn new(nu: usize, nv: usize, nx: usize, values: Vec<f64>) -> Result<Self> {
        Ok(Self { nu, nv, nx, joint: ProbTensor::new(vec![nu, nv, nx], values)? })
    }

    pub fn values(&self) -> &[f64] {
        self.joint.values()
    }

    pub fn px(&self) -> Vec<f64> {
        let mut px = vec![0.0; self.nx];
        for (i, v) in self.values().iter().enumerate() {
            px[i % self.nx] += v;
        }
        px
    }

    pub fn embed(&self, nu: usize, nv: usize) -> Result<Self> {
        if nu < self.nu || nv < self.nv {
            return Err(BoundsError::AlphabetOverflow { size: self.nu.max(self.nv), max: nu.min(nv) });
        }
        let nx = self.nx;
        let mut values = vec![0.0; nu * nv * nx];
        for u in 0..self.nu {
            for v in 0..self.nv {
                let src = (u * self.nv + v) * nx;
                let dst = (u * nv + v) * nx;
                values[dst..dst + nx].copy_from_slice(&self.values()[src..src + nx]);
            }
        }
        Self::new(nu, nv, nx, values)
    }
}

/// The four right-hand sides of the UV region at one auxiliary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UvPoint {
    /// `I(U;Y)`.
    pub r1: f64,
    /// `I(V;Z)`.
    pub r2: f64,
    /// `I(U;Y) + I(X;Z|U)`.
    pub sum_u: f64,
    /// `I(V;Z) + I(X;Y|V)`.
    pub sum_v: f64,
}

impl UvPoint {
    pub fn sum_rate(&self) -> f64 {
        (self.r1 + self.r2).min(self.sum_u).min(self.sum_v)
    }
}

fn uv_program(c: &Channel, nu: usize, nv: usize) -> InfoProgram {
    let v = Vars::new(2);
    let (u, vv, x, y, z) = (v.aux(0), v.aux(1), v.x(), v.y(), v.z());
    let forms = [
        Form::new().mi(u, y, 0, 1.0),
        Form::new().mi(vv, z, 0, 1.0),
        Form::new().mi(u, y, 0, 1.0).mi(x, z, u, 1.0),
        Form::new().mi(vv, z, 0, 1.0).mi(x, y, vv, 1.0),
    ];
    InfoProgram::new(&[nu, nv], c, &forms)
}

fn uv_point(v: &[f64]) -> UvPoint {
    UvPoint { r1: v[0], r2: v[1], sum_u: v[2], sum_v: v[3] }
}

pub fn evaluate_uv_point(c: &Channel, a: &UvAuxiliary) -> Result<UvPoint> {
    if a.nx != c.nx() {
        return Err(BoundsError::AlphabetMismatch(format!("auxiliary has nx = {}, channel has {}", a.nx, c.nx())));
    }
    Ok(uv_point(&uv_program(c, a.nu, a.nv).values(a.values())))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UvSumRate {
    /// Exact sum rate at `aux`; a lower bound on the UV sum rate.
    pub value: f64,
    pub point: UvPoint,
    pub aux: UvAuxiliary,
    pub converged: bool,
}

/// Smoothing schedule for the min of the three sum-rate terms.
const UV_TAUS: [f64; 4] = [0.05, 1e-2, 2e-3, 2e-4];

/// Maximizes `min{I(U;Y)+I(V;Z), I(U;Y)+I(X;Z|U), I(V;Z)+I(X;Y|V)}` over
/// `p(u, v, x)` with `|U|, |V| <= nx + 1`. The min is smoothed with a
/// decreasing temperature; the returned value is the exact min at the best
/// auxiliary met, seeds included.
pub fn uv_sum_rate(c: &Channel, cfg: &SearchConfig, seeds: &[UvAuxiliary]) -> Result<UvSumRate> {
    let n = c.nx() + 1;
    let prog = uv_program(c, n, n);
    let exact = |p: &[f64]| {
        let pt = uv_point(&prog.values(p));
        (pt.sum_rate(), pt)
    };
    let mut starts: Vec<Vec<f64>> =
        seeds.iter().map(|s| s.embed(n, n).map(|s| s.values().to_vec())).collect::<Result<_>>()?;
    // U = X or V = X, the other constant
    let u = 1.0 / c.nx() as f64;
    let nx = c.nx();
    starts.push((0..n * n * nx).map(|i| if (i / nx) / n == i % nx && (i / nx) % n == 0 { u } else { 0.0 }).collect());
    starts.push((0..n * n * nx).map(|i| if (i / nx) % n == i % nx && (i / nx) / n == 0 { u } else { 0.0 }).collect());
    let mut best: Option<(f64, Vec<f64>, bool)> = None;
    let consider = |p: Vec<f64>, conv: bool, best: &mut Option<(f64, Vec<f64>, bool)>| {
        let v = exact(&p).0;
        if best.as_ref().map_or(true, |b| v > b.0) {
            *best = Some((v, p, conv));
        }
    };
    for s in &starts {
        consider(s.clone(), true, &mut best);
    }
    let mut stage_seeds = starts;
    for (k, &tau) in UV_TAUS.iter().enumerate() {
        let obj = UvObjective { prog: &prog, tau };
        let domain = BlockDomain::single(prog.joint_len());
        let stage_cfg = if k == 0 { cfg.clone() } else { cfg.clone().with_restarts(stage_seeds.len().max(1) * 4 - 3) };
        let res = maximize(&obj, &domain, &stage_cfg, &stage_seeds);
        consider(res.point.clone(), res.converged, &mut best);
        stage_seeds = vec![res.point];
        if let Some((_, p, _)) = &best {
            stage_seeds.push(p.clone());
        }
    }
    let (value, p, converged) = best.expect("at least one start");
    let point = exact(&p).1;
    Ok(UvSumRate { value, point, aux: UvAuxiliary::new(n, n, nx, normalize(p))?, converged })
}

fn normalize(p: Vec<f64>) -> Vec<f64> {
    let s: f64 = p.iter().sum();
    p.into_iter().map(|v| v / s).collect()
}

struct UvObjective<'a> {
    prog: &'a InfoProgram,
    tau: f64,
}

impl UvObjective<'_> {
    fn sums(v: &[f64]) -> [f64; 3] {
        [v[0] + v[1], v[2], v[3]]
    }
}

impl Objective for UvObjective<'_> {
    fn value(&self, x: &[f64]) -> f64 {
        soft_min(&Self::sums(&self.prog.values(x)), self.tau).0
    }

    fn value_grad(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        let v = self.prog.values(x);
        let (s, w) = soft_min(&Self::sums(&v), self.tau);
        self.prog.values_grad(x, &[w[0], w[0], w[1], w[2]], grad);
        s
    }
}

/// Per-component information terms that appear in product regions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Term {
    /// `I(W;Y)`
    Wy,
    /// `I(W;Z)`
    Wz,
    /// `I(U;Y|W)`
    UyGivenW,
    /// `I(V;Z|W)`
    VzGivenW,
    /// `I(X;Z|U,W)`
    XzGivenUw,
    /// `I(X;Y|V,W)`
    XyGivenVw,
    /// `I(U;V|W)`
    UvGivenW,
    /// `H(Y|W)`
    HyGivenW,
    /// `H(Z|W)`
    HzGivenW,
    /// `H(Y|V,W)`
    HyGivenVw,
    /// `H(Z|U,W)`
    HzGivenUw,
    /// `I(X;Y|W)`
    XyGivenW,
    /// `I(X;Z|W)`
    XzGivenW,
}

pub const TERMS: [Term; 13] = [
    Term::Wy,
    Term::Wz,
    Term::UyGivenW,
    Term::VzGivenW,
    Term::XzGivenUw,
    Term::XyGivenVw,
    Term::UvGivenW,
    Term::HyGivenW,
    Term::HzGivenW,
    Term::HyGivenVw,
    Term::HzGivenUw,
    Term::XyGivenW,
    Term::XzGivenW,
];

impl Term {
    fn index(self) -> usize {
        TERMS.iter().position(|&t| t == self).unwrap()
    }

    fn form(self, v: Vars) -> Form {
        let (u, vv, w, x, y, z) = (v.aux(0), v.aux(1), v.aux(2), v.x(), v.y(), v.z());
        let f = Form::new();
        match self {
            Term::Wy => f.mi(w, y, 0, 1.0),
            Term::Wz => f.mi(w, z, 0, 1.0),
            Term::UyGivenW => f.mi(u, y, w, 1.0),
            Term::VzGivenW => f.mi(vv, z, w, 1.0),
            Term::XzGivenUw => f.mi(x, z, u | w, 1.0),
            Term::XyGivenVw => f.mi(x, y, vv | w, 1.0),
            Term::UvGivenW => f.mi(u, vv, w, 1.0),
            Term::HyGivenW => f.h_cond(y, w, 1.0),
            Term::HzGivenW => f.h_cond(z, w, 1.0),
            Term::HyGivenVw => f.h_cond(y, vv | w, 1.0),
            Term::HzGivenUw => f.h_cond(z, u | w, 1.0),
            Term::XyGivenW => f.mi(x, y, w, 1.0),
            Term::XzGivenW => f.mi(x, z, w, 1.0),
        }
    }
}

/// Independent per-component auxiliaries `p1(u1,v1,w1,x1) p2(u2,v2,w2,x2)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProductAuxiliary {
    pub a1: AuxiliaryJoint,
    pub a2: AuxiliaryJoint,
}

impl ProductAuxiliary {
    /// Every auxiliary constant, inputs distributed as `px1` and `px2`.
    pub fn constant(px1: &[f64], px2: &[f64]) -> Result<Self> {
        Ok(Self {
            a1: AuxiliaryJoint::deterministic(px1, (1, 1, 1), |_| 0, |_| 0, |_| 0)?,
            a2: AuxiliaryJoint::deterministic(px2, (1, 1, 1), |_| 0, |_| 0, |_| 0)?,
        })
    }
}

impl ProductAuxiliary {
    /// Every pairing of component λ-curve maximizers on `grid`.
    pub fn curve_seeds(pc: &ProductChannel, cfg: &SearchConfig, grid: &[f64]) -> Result<Vec<Self>> {
        let opts = CurveOptions::default();
        let m1 = build_lambda_curve(&pc.c1, grid, cfg, &opts)?;
        let m2 = build_lambda_curve(&pc.c2, grid, cfg, &opts)?;
        Ok(m1
            .samples
            .iter()
            .flat_map(|a| m2.samples.iter().map(|b| Self { a1: a.maximizer.clone(), a2: b.maximizer.clone() }))
            .collect())
    }

    /// Pairs of structured auxiliaries at uniform inputs, the same label
    /// pattern on both components (constant or a copy of `X`).
    pub fn structured(pc: &ProductChannel) -> Vec<Self> {
        let seeds = |c: &Channel| structured_seeds(&uniform(c.nx()), &Cardinalities::custom(c.nx(), c.nx(), c.nx()));
        seeds(&pc.c1).into_iter().zip(seeds(&pc.c2)).map(|(a1, a2)| Self { a1, a2 }).collect()
    }
}

/// Which inequality system a polytope comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegionKind {
    /// The product outer bound.
    ProductOuter,
    /// The product outer bound with the roles of the components exchanged.
    ProductOuterMirror,
    /// The product inner bound obtained from Marton's region with
    /// product auxiliaries.
    ProductInner,
    /// Capacity region when `Y1` and `Z2` are deterministic.
    SemiDeterministic,
    /// Capacity region when `Z1` is more capable than `Y1` and `Y2` more
    /// capable than `Z2`.
    MoreCapable,
    /// Stated region when `Z1` is more capable than `Y1` and `Y2` is
    /// deterministic (no tightness claim).
    Mixed,
}

impl RegionKind {
    pub fn name(self) -> &'static str {
        match self {
            RegionKind::ProductOuter => "product_outer",
            RegionKind::ProductOuterMirror => "product_outer_mirror",
            RegionKind::ProductInner => "product_inner",
            RegionKind::SemiDeterministic => "semi_deterministic",
            RegionKind::MoreCapable => "more_capable",
            RegionKind::Mixed => "mixed",
        }
    }
}

type Rhs = Vec<(usize, Term, f64)>;

#[derive(Debug, Clone)]
struct Row {
    a: [f64; 3],
    rhs: Rhs,
}

fn terms(list: &[(usize, Term)]) -> Rhs {
    list.iter().map(|&(c, t)| (c, t, 1.0)).collect()
}

fn cat(parts: &[&Rhs]) -> Rhs {
    parts.iter().flat_map(|p| p.iter().copied()).collect()
}

fn template(kind: RegionKind) -> Vec<Row> {
    use Term::*;
    let wy = terms(&[(0, Wy), (1, Wy)]);
    let wz = terms(&[(0, Wz), (1, Wz)]);
    let common = [wy.clone(), wz.clone()];
    let uy = terms(&[(0, UyGivenW), (1, UyGivenW)]);
    let vz = terms(&[(0, VzGivenW), (1, VzGivenW)]);
    // A_i = I(Ui;Yi|Wi) + I(Xi;Zi|Ui,Wi), B_i = I(Vi;Zi|Wi) + I(Xi;Yi|Vi,Wi)
    let a = |c: usize| terms(&[(c, UyGivenW), (c, XzGivenUw)]);
    let b = |c: usize| terms(&[(c, VzGivenW), (c, XyGivenVw)]);
    const R0: [f64; 3] = [1.0, 0.0, 0.0];
    const R01: [f64; 3] = [1.0, 1.0, 0.0];
    const R02: [f64; 3] = [1.0, 0.0, 1.0];
    const SUM: [f64; 3] = [1.0, 1.0, 1.0];
    let mut rows = Vec::new();
    let mut push = |a: [f64; 3], rhs: Rhs| rows.push(Row { a, rhs });
    for m in &common {
        push(R0, m.clone());
    }
    match kind {
        RegionKind::ProductOuter | RegionKind::ProductOuterMirror => {
            // the mirror exchanges the components in the sum-rate lines
            let (p, q) = if kind == RegionKind::ProductOuter { (1, 0) } else { (0, 1) };
            for m in &common {
                push(R01, cat(&[m, &uy]));
            }
            for m in &common {
                push(R02, cat(&[m, &vz]));
            }
            for m in &common {
                for last in [a(q), b(q)] {
                    push(SUM, cat(&[m, &a(p), &last]));
                }
            }
            for m in &common {
                for mid in [a(p), b(p)] {
                    push(SUM, cat(&[m, &mid, &b(q)]));
                }
            }
        }
        RegionKind::ProductInner => {
            push(R01, cat(&[&wy, &uy]));
            push(R02, cat(&[&wz, &vz]));
            let penalty: Rhs = vec![(0, UvGivenW, -1.0), (1, UvGivenW, -1.0)];
            for m in &common {
                push(SUM, cat(&[m, &uy, &vz, &penalty]));
            }
        }
        RegionKind::SemiDeterministic => {
            push(R01, cat(&[&wy, &terms(&[(0, HyGivenW), (1, UyGivenW)])]));
            push(R02, cat(&[&wz, &terms(&[(0, VzGivenW), (1, HzGivenW)])]));
            let tail = terms(&[(0, VzGivenW), (0, HyGivenVw), (1, UyGivenW), (1, HzGivenUw)]);
            for m in &common {
                push(SUM, cat(&[m, &tail]));
            }
        }
        RegionKind::MoreCapable => {
            let xy2 = terms(&[(1, XyGivenW)]);
            let xz1 = terms(&[(0, XzGivenW)]);
            for m in &common {
                push(R01, cat(&[m, &terms(&[(0, UyGivenW)]), &xy2]));
            }
            for m in &common {
                push(R02, cat(&[m, &xz1, &terms(&[(1, VzGivenW)])]));
            }
            for m in &common {
                for last in [a(0), xz1.clone()] {
                    push(SUM, cat(&[m, &xy2, &last]));
                }
            }
            for m in &common {
                for mid in [xy2.clone(), b(1)] {
                    push(SUM, cat(&[m, &mid, &xz1]));
                }
            }
        }
        RegionKind::Mixed => {
            for m in &common {
                push(R01, cat(&[m, &terms(&[(0, UyGivenW), (1, HyGivenW)])]));
            }
            for m in &common {
                push(R02, cat(&[m, &terms(&[(0, XzGivenW), (1, VzGivenW)])]));
            }
            for m in &common {
                push(SUM, cat(&[m, &terms(&[(1, VzGivenW), (1, HyGivenVw), (0, XzGivenW)])]));
            }
        }
    }
    rows
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Inequality {
    /// Coefficients of `(R0, R1, R2)`.
    pub a: [f64; 3],
    pub rhs: f64,
}

/// `{R >= 0 : a·R <= rhs for every inequality}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateRegionPolytope {
    pub kind: RegionKind,
    pub inequalities: Vec<Inequality>,
}

impl RateRegionPolytope {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("polytope serializes")
    }

    pub fn contains(&self, r: [f64; 3], tol: f64) -> bool {
        r.iter().all(|&v| v >= -tol)
            && self.inequalities.iter().all(|q| dot(&q.a, &r) <= q.rhs + tol)
    }
}

/// Compiled term programs for the two components of a product channel.
#[derive(Debug, Clone)]
pub struct ProductTerms {
    progs: [InfoProgram; 2],
    dims: [(usize, usize, usize); 2],
    nx: [usize; 2],
}

impl ProductTerms {
    pub fn new(pc: &ProductChannel, dims: [(usize, usize, usize); 2]) -> Self {
        let v = Vars::new(3);
        let forms: Vec<Form> = TERMS.iter().map(|t| t.form(v)).collect();
        let mk = |c: &Channel, (nu, nv, nw): (usize, usize, usize)| InfoProgram::new(&[nu, nv, nw], c, &forms);
        Self {
            progs: [mk(&pc.c1, dims[0]), mk(&pc.c2, dims[1])],
            dims,
            nx: [pc.c1.nx(), pc.c2.nx()],
        }
    }

    /// Per-component alphabets `|U|, |V|, |W| <= nx`.
    pub fn default_dims(pc: &ProductChannel) -> [(usize, usize, usize); 2] {
        let (a, b) = (pc.c1.nx(), pc.c2.nx());
        [(a, a, a), (b, b, b)]
    }

    fn fit(&self, a: &ProductAuxiliary) -> Result<[Vec<f64>; 2]> {
        let mut out: [Vec<f64>; 2] = Default::default();
        for (k, aux) in [&a.a1, &a.a2].into_iter().enumerate() {
            if aux.nx != self.nx[k] {
                return Err(BoundsError::AlphabetMismatch(format!(
                    "component {} auxiliary has nx = {}, channel has {}",
                    k + 1,
                    aux.nx,
                    self.nx[k]
                )));
            }
            let (nu, nv, nw) = self.dims[k];
            out[k] = aux.embed(nu, nv, nw)?.values().to_vec();
        }
        Ok(out)
    }

    fn values(&self, p: [&[f64]; 2]) -> [Vec<f64>; 2] {
        [self.progs[0].values(p[0]), self.progs[1].values(p[1])]
    }

    fn aux_of(&self, k: usize, p: &[f64]) -> AuxiliaryJoint {
        let (nu, nv, nw) = self.dims[k];
        AuxiliaryJoint::new(nu, nv, nw, self.nx[k], normalize(p.to_vec())).expect("search points are distributions")
    }
}

fn evaluate_rows(rows: &[Row], t: &[Vec<f64>; 2]) -> Vec<Inequality> {
    rows.iter()
        .map(|r| Inequality { a: r.a, rhs: r.rhs.iter().map(|&(c, term, w)| w * t[c][term.index()]).sum() })
        .collect()
}

/// The polytope of `kind` at a given product auxiliary.
pub fn region(kind: RegionKind, pc: &ProductChannel, a: &ProductAuxiliary) -> Result<RateRegionPolytope> {
    let pt = ProductTerms::new(pc, [(a.a1.nu, a.a1.nv, a.a1.nw), (a.a2.nu, a.a2.nv, a.a2.nw)]);
    let [p1, p2] = pt.fit(a)?;
    let t = pt.values([&p1, &p2]);
    Ok(RateRegionPolytope { kind, inequalities: evaluate_rows(&template(kind), &t) })
}

pub fn product_outer_region(pc: &ProductChannel, a: &ProductAuxiliary, mirrored: bool) -> Result<RateRegionPolytope> {
    region(if mirrored { RegionKind::ProductOuterMirror } else { RegionKind::ProductOuter }, pc, a)
}

pub fn product_inner_region(pc: &ProductChannel, a: &ProductAuxiliary) -> Result<RateRegionPolytope> {
    region(RegionKind::ProductInner, pc, a)
}

pub fn semi_deterministic_region(pc: &ProductChannel, a: &ProductAuxiliary) -> Result<RateRegionPolytope> {
    region(RegionKind::SemiDeterministic, pc, a)
}

pub fn more_capable_region(pc: &ProductChannel, a: &ProductAuxiliary) -> Result<RateRegionPolytope> {
    region(RegionKind::MoreCapable, pc, a)
}

pub fn mixed_region(pc: &ProductChannel, a: &ProductAuxiliary) -> Result<RateRegionPolytope> {
    region(RegionKind::Mixed, pc, a)
}

fn dot(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn solve3(m: [[f64; 3]; 3], b: [f64; 3]) -> Option<[f64; 3]> {
    let det = |m: &[[f64; 3]; 3]| {
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    };
    let d = det(&m);
    if d.abs() < 1e-12 {
        return None;
    }
    let mut x = [0.0; 3];
    for (k, xk) in x.iter_mut().enumerate() {
        let mut mk = m;
        for r in 0..3 {
            mk[r][k] = b[r];
        }
        *xk = det(&mk) / d;
    }
    Some(x)
}

/// Optimal vertex of the support LP and the dual multipliers of the
/// region's own inequalities there.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpSupport {
    pub value: f64,
    pub vertex: [f64; 3],
    pub dual: Vec<f64>,
    pub feasible: bool,
}

/// `max w·R` over the polytope intersected with `R >= 0` (and `R0 = 0`
/// when `pin_r0`), by enumerating every vertex.
pub fn lp_support(ineqs: &[Inequality], w: [f64; 3], pin_r0: bool) -> LpSupport {
    let mut cons: Vec<([f64; 3], f64)> = ineqs.iter().map(|q| (q.a, q.rhs)).collect();
    let m = cons.len();
    for i in 0..3 {
        let mut a = [0.0; 3];
        a[i] = -1.0;
        cons.push((a, 0.0));
    }
    if pin_r0 {
        cons.push(([1.0, 0.0, 0.0], 0.0));
    }
    let feasible = |r: &[f64; 3]| cons.iter().all(|(a, b)| dot(a, r) <= b + 1e-9 * (1.0 + b.abs()));
    let mut best: Option<(f64, [f64; 3], [usize; 3])> = None;
    let n = cons.len();
    for i in 0..n {
        for j in i + 1..n {
            for k in j + 1..n {
                let Some(r) = solve3([cons[i].0, cons[j].0, cons[k].0], [cons[i].1, cons[j].1, cons[k].1]) else {
                    continue;
                };
                if !feasible(&r) {
                    continue;
                }
                let v = dot(&w, &r);
                if best.map_or(true, |b| v > b.0 + 1e-12) {
                    best = Some((v, r, [i, j, k]));
                }
            }
        }
    }
    let Some((value, vertex, _)) = best else {
        return LpSupport { value: 0.0, vertex: [0.0; 3], dual: vec![0.0; m], feasible: false };
    };
    // dual: any active basis with nonnegative multipliers
    let active: Vec<usize> =
        (0..n).filter(|&c| (dot(&cons[c].0, &vertex) - cons[c].1).abs() <= 1e-9 * (1.0 + cons[c].1.abs())).collect();
    let mut dual = vec![0.0; m];
    'outer: for (x, &i) in active.iter().enumerate() {
        for (y, &j) in active.iter().enumerate().skip(x + 1) {
            for &k in active.iter().skip(y + 1) {
                let mt = [
                    [cons[i].0[0], cons[j].0[0], cons[k].0[0]],
                    [cons[i].0[1], cons[j].0[1], cons[k].0[1]],
                    [cons[i].0[2], cons[j].0[2], cons[k].0[2]],
                ];
                if let Some(y) = solve3(mt, w) {
                    if y.iter().all(|&v| v >= -1e-9) {
                        for (c, yc) in [i, j, k].into_iter().zip(y) {
                            if c < m {
                                dual[c] = yc.max(0.0);
                            }
                        }
                        break 'outer;
                    }
                }
            }
        }
    }
    LpSupport { value: value.max(0.0), vertex, dual, feasible: true }
}

struct SupportObjective<'a> {
    pt: &'a ProductTerms,
    rows: Vec<Row>,
    w: [f64; 3],
    pin_r0: bool,
    split: usize,
}

impl SupportObjective<'_> {
    fn lp(&self, x: &[f64]) -> (LpSupport, [Vec<f64>; 2]) {
        let (p1, p2) = x.split_at(self.split);
        let t = self.pt.values([p1, p2]);
        (lp_support(&evaluate_rows(&self.rows, &t), self.w, self.pin_r0), t)
    }
}

impl Objective for SupportObjective<'_> {
    fn value(&self, x: &[f64]) -> f64 {
        self.lp(x).0.value
    }

    fn value_grad(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        let (s, _) = self.lp(x);
        let mut tw = [vec![0.0; TERMS.len()], vec![0.0; TERMS.len()]];
        for (row, &y) in self.rows.iter().zip(&s.dual) {
            for &(c, term, coef) in &row.rhs {
                tw[c][term.index()] += y * coef;
            }
        }
        let (p1, p2) = x.split_at(self.split);
        let (g1, g2) = grad.split_at_mut(self.split);
        self.pt.progs[0].values_grad(p1, &tw[0], g1);
        self.pt.progs[1].values_grad(p2, &tw[1], g2);
        s.value
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionSupport {
    pub kind: RegionKind,
    pub weights: [f64; 3],
    pub pin_r0: bool,
    pub value: f64,
    pub aux: ProductAuxiliary,
    pub vertex: [f64; 3],
    pub converged: bool,
}

/// Maximizes `w·R` over the union of `kind` polytopes, ranging over
/// per-component auxiliaries with alphabets `dims`. Seeds are evaluated
/// exactly and also start local ascents.
pub fn region_support(
    kind: RegionKind,
    pc: &ProductChannel,
    w: [f64; 3],
    pin_r0: bool,
    dims: Option<[(usize, usize, usize); 2]>,
    cfg: &SearchConfig,
    seeds: &[ProductAuxiliary],
) -> Result<RegionSupport> {
    if w.iter().any(|&v| v < 0.0 || !v.is_finite()) || w.iter().all(|&v| v == 0.0) {
        return Err(BoundsError::Config(format!("support direction {w:?} must be nonnegative and nonzero")));
    }
    let pt = ProductTerms::new(pc, dims.unwrap_or_else(|| ProductTerms::default_dims(pc)));
    let split = pt.progs[0].joint_len();
    let obj = SupportObjective { pt: &pt, rows: template(kind), w, pin_r0, split };
    let mut starts: Vec<Vec<f64>> = Vec::new();
    for s in seeds {
        let [a, b] = pt.fit(s)?;
        starts.push(a.into_iter().chain(b).collect());
    }
    let domain = BlockDomain::new(vec![split, pt.progs[1].joint_len()]);
    // enough restarts for every seed to start an ascent
    let cfg = cfg.clone().with_restarts(cfg.restarts.max(4 * starts.len()));
    let res = maximize(&obj, &domain, &cfg, &starts);
    let mut best = (res.value, res.point, res.converged);
    for s in starts {
        let v = obj.value(&s);
        if v > best.0 {
            best = (v, s, true);
        }
    }
    let (lp, _) = obj.lp(&best.1);
    let (p1, p2) = best.1.split_at(split);
    Ok(RegionSupport {
        kind,
        weights: w,
        pin_r0,
        value: lp.value,
        aux: ProductAuxiliary { a1: pt.aux_of(0, p1), a2: pt.aux_of(1, p2) },
        vertex: lp.vertex,
        converged: best.2,
    })
}

/// Support values for a list of directions, as CSV `w0,w1,w2,value,converged`.
pub fn sweep_csv(results: &[RegionSupport]) -> String {
    let mut s = String::from("w0,w1,w2,value,converged\n");
    for r in results {
        let _ = writeln!(s, "{},{},{},{},{}", r.weights[0], r.weights[1], r.weights[2], r.value, r.converged);
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{bsc_kernel, deterministic_kernel, make_product};

    fn toy_product() -> ProductChannel {
        let c1 = Channel::from_marginals(&deterministic_kernel(&[0, 1, 1], 2), &bsc_kernel(0.2).into_iter().chain([vec![0.5, 0.5]]).collect::<Vec<_>>()).unwrap();
        let c2 = Channel::from_marginals(&bsc_kernel(0.1), &deterministic_kernel(&[1, 0], 2)).unwrap();
        make_product(&c1, &c2).unwrap()
    }

    #[test]
    fn constant_auxiliaries_collapse() {
        let pc = toy_product();
        let a = ProductAuxiliary::constant(&[0.2, 0.3, 0.5], &[0.5, 0.5]).unwrap();
        let inner = product_inner_region(&pc, &a).unwrap();
        assert!(lp_support(&inner.inequalities, [0.0, 1.0, 1.0], true).value.abs() < 1e-12);
        let outer = product_outer_region(&pc, &a, false).unwrap();
        assert_eq!(outer.inequalities.len(), 14);
        assert!(lp_support(&outer.inequalities, [1.0, 0.0, 0.0], false).value.abs() < 1e-12);
        // with constant auxiliaries the sum rows are I(X1;Z1) + I(X2;Z2) style sums
        let sums: Vec<f64> = outer.inequalities.iter().filter(|q| q.a == [1.0, 1.0, 1.0]).map(|q| q.rhs).collect();
        assert_eq!(sums.len(), 8);
        assert!(sums.iter().all(|&s| s >= 0.0));
    }

    #[test]
    fn row_counts() {
        let pc = toy_product();
        let a = ProductAuxiliary::constant(&[0.2, 0.3, 0.5], &[0.5, 0.5]).unwrap();
        for (kind, n) in [
            (RegionKind::ProductOuter, 14),
            (RegionKind::ProductOuterMirror, 14),
            (RegionKind::ProductInner, 6),
            (RegionKind::SemiDeterministic, 6),
            (RegionKind::MoreCapable, 14),
            (RegionKind::Mixed, 8),
        ] {
            assert_eq!(region(kind, &pc, &a).unwrap().inequalities.len(), n, "{kind:?}");
        }
    }

    #[test]
    fn lp_support_on_a_box() {
        let ineqs = vec![
            Inequality { a: [1.0, 0.0, 0.0], rhs: 1.0 },
            Inequality { a: [1.0, 1.0, 0.0], rhs: 2.0 },
            Inequality { a: [1.0, 0.0, 1.0], rhs: 2.0 },
            Inequality { a: [1.0, 1.0, 1.0], rhs: 3.0 },
        ];
        let s = lp_support(&ineqs, [0.0, 1.0, 1.0], true);
        assert!((s.value - 3.0).abs() < 1e-12);
        let s = lp_support(&ineqs, [1.0, 1.0, 1.0], false);
        assert!((s.value - 3.0).abs() < 1e-12);
        let s = lp_support(&ineqs, [0.0, 1.0, 0.0], false);
        assert!((s.value - 2.0).abs() < 1e-12 && s.vertex[0].abs() < 1e-12);
        let empty = vec![Inequality { a: [1.0, 1.0, 1.0], rhs: -0.5 }];
        assert_eq!(lp_support(&empty, [0.0, 1.0, 1.0], false).value, 0.0);
    }

    #[test]
    fn uv_point_with_constant_auxiliaries() {
        let c = Channel::from_marginals(&bsc_kernel(0.1), &bsc_kernel(0.3)).unwrap();
        let a = UvAuxiliary::new(1, 1, 2, vec![0.4, 0.6]).unwrap();
        let p = evaluate_uv_point(&c, &a).unwrap();
        let h = crate::info::binary_entropy;
        let out = |e: f64| h(0.4 * (1.0 - e) + 0.6 * e) - h(e);
        assert!(p.r1.abs() < 1e-12 && p.r2.abs() < 1e-12);
        assert!((p.sum_u - out(0.3)).abs() < 1e-12);
        assert!((p.sum_v - out(0.1)).abs() < 1e-12);
    }

    #[test]
    fn uv_sum_rate_on_degraded_pair() {
        let y = bsc_kernel(0.1);
        let z = crate::channel::compose_kernels(&y, &bsc_kernel(0.2));
        let c = Channel::from_marginals(&y, &z).unwrap();
        let r = uv_sum_rate(&c, &SearchConfig::default().with_restarts(8), &[]).unwrap();
        assert!((r.value - (1.0 - crate::info::binary_entropy(0.1))).abs() < 1e-6, "{}", r.value);
    }
}
