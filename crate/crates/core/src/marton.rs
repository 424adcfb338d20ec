//! λ-sum rates, the λ-curve and Marton's sum rate as `min_λ max_p λ-SR`.
//!
//! For `λ ∈ [0, 1]`
//!
//! ```text
//! λ-SR = λ I(W;Y) + (1-λ) I(W;Z) + I(U;Y|W) + I(V;Z|W) - I(U;V|W)
//! ```
//!
//! is affine in `λ` for a fixed auxiliary joint, with slope
//! `I(W;Y) - I(W;Z)`. Every auxiliary met during a search is kept in a pool
//! and re-evaluated exactly at later `λ`, so a curve is the upper envelope
//! of exact affine lower bounds.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::channel::Channel;
use crate::error::{BoundsError, Result};
use crate::functional::{Form, InfoObjective, InfoProgram, Param, Vars, Weighted};
use crate::info::{entropy_bits, mixture_information, output_law, ProbTensor};
use crate::search::{
    ascend, golden_section_min, maximize, simplex_grid, simplex_grid_count, BlockDomain, Objective, GoldenConfig, GoldenResult, SearchConfig, SearchResult,
};

/// A joint `p(u, v, w, x)`, row-major over `nu x nv x nw x nx`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuxiliaryJoint {
    pub nu: usize,
    pub nv: usize,
    pub nw: usize,
    pub nx: usize,
    joint: ProbTensor,
}

impl AuxiliaryJoint {
    pub fn new(nu: usize, nv: usize, nw: usize, nx: usize, values: Vec<f64>) -> Result<Self> {
        let joint = ProbTensor::new(vec![nu, nv, nw, nx], values)?;
        Ok(Self { nu, nv, nw, nx, joint })
    }

    /// `(U, V, W) = (fu(x), fv(x), fw(x))` under input law `px`.
    pub fn deterministic(
        px: &[f64],
        (nu, nv, nw): (usize, usize, usize),
        fu: impl Fn(usize) -> usize,
        fv: impl Fn(usize) -> usize,
        fw: impl Fn(usize) -> usize,
    ) -> Result<Self> {
        let nx = px.len();
        let mut values = vec![0.0; nu * nv * nw * nx];
        for (x, &p) in px.iter().enumerate() {
            let (u, v, w) = (fu(x), fv(x), fw(x));
            if u >= nu || v >= nv || w >= nw {
                return Err(BoundsError::AlphabetOverflow { size: u.max(v).max(w) + 1, max: nu.min(nv).min(nw) });
            }
            values[((u * nv + v) * nw + w) * nx + x] += p;
        }
        Self::new(nu, nv, nw, nx, values)
    }

    pub fn values(&self) -> &[f64] {
        self.joint.values()
    }

    pub fn tensor(&self) -> &ProbTensor {
        &self.joint
    }

    pub fn px(&self) -> Vec<f64> {
        let mut px = vec![0.0; self.nx];
        for (i, v) in self.values().iter().enumerate() {
            px[i % self.nx] += v;
        }
        px
    }

    /// The same law on larger alphabets (new symbols get zero mass).
    pub fn embed(&self, nu: usize, nv: usize, nw: usize) -> Result<Self> {
        if nu < self.nu || nv < self.nv || nw < self.nw {
            return Err(BoundsError::AlphabetOverflow {
                size: self.nu.max(self.nv).max(self.nw),
                max: nu.min(nv).min(nw),
            });
        }
        let nx = self.nx;
        let mut values = vec![0.0; nu * nv * nw * nx];
        for u in 0..self.nu {
            for v in 0..self.nv {
                for w in 0..self.nw {
                    for x in 0..nx {
                        values[((u * nv + v) * nw + w) * nx + x] =
                            self.values()[((u * self.nv + v) * self.nw + w) * nx + x];
                    }
                }
            }
        }
        Self::new(nu, nv, nw, nx, values)
    }

    /// Independent pair `(U1,U2), (V1,V2), (W1,W2), (X1,X2)`, with the
    /// row-major pairing of [`crate::channel::make_product`].
    pub fn product(a: &Self, b: &Self) -> Result<Self> {
        let (nu, nv, nw, nx) = (a.nu * b.nu, a.nv * b.nv, a.nw * b.nw, a.nx * b.nx);
        let mut values = vec![0.0; nu * nv * nw * nx];
        for (ia, &pa) in a.values().iter().enumerate() {
            if pa == 0.0 {
                continue;
            }
            let (ua, va, wa, xa) = a.coords(ia);
            for (ib, &pb) in b.values().iter().enumerate() {
                let (ub, vb, wb, xb) = b.coords(ib);
                let (u, v, w, x) = (ua * b.nu + ub, va * b.nv + vb, wa * b.nw + wb, xa * b.nx + xb);
                values[((u * nv + v) * nw + w) * nx + x] = pa * pb;
            }
        }
        Self::new(nu, nv, nw, nx, values)
    }

    fn coords(&self, i: usize) -> (usize, usize, usize, usize) {
        let x = i % self.nx;
        let r = i / self.nx;
        let w = r % self.nw;
        let r = r / self.nw;
        (r / self.nv, r % self.nv, w, x)
    }
}

/// Auxiliary alphabet sizes used by a search, with the name of the rule
/// that produced them.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cardinalities {
    pub nu: usize,
    pub nv: usize,
    pub nw: usize,
    pub profile: String,
}

impl Cardinalities {
    /// `|U| <= min(nx, ny)`, `|V| <= min(nx, nz)`, `|W| <= nx`: enough for
    /// the λ-sum rate.
    pub fn lambda_sr(c: &Channel) -> Self {
        Self { nu: c.nx().min(c.ny()), nv: c.nx().min(c.nz()), nw: c.nx(), profile: "lambda_sr".into() }
    }

    /// `|U|, |V| <= nx`, `|W| <= nx + 4`: the Marton-region profile.
    pub fn marton_region(c: &Channel) -> Self {
        Self { nu: c.nx(), nv: c.nx(), nw: c.nx() + 4, profile: "marton_region".into() }
    }

    /// Products of per-component λ-SR profiles, for product channels.
    pub fn product_of(a: &Self, b: &Self) -> Self {
        Self { nu: a.nu * b.nu, nv: a.nv * b.nv, nw: a.nw * b.nw, profile: format!("product({},{})", a.profile, b.profile) }
    }

    pub fn custom(nu: usize, nv: usize, nw: usize) -> Self {
        Self { nu, nv, nw, profile: "custom".into() }
    }

    pub fn aux_size(&self) -> usize {
        self.nu * self.nv * self.nw
    }
}

/// The three λ-independent pieces of λ-SR at one auxiliary joint.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LambdaParts {
    pub i_wy: f64,
    pub i_wz: f64,
    /// `I(U;Y|W) + I(V;Z|W) - I(U;V|W)`.
    pub rest: f64,
}

impl LambdaParts {
    pub fn value(&self, lambda: f64) -> f64 {
        lambda * self.i_wy + (1.0 - lambda) * self.i_wz + self.rest
    }

    pub fn slope(&self) -> f64 {
        self.i_wy - self.i_wz
    }
}

/// Compiled λ-SR functional for one channel and one cardinality profile.
#[derive(Debug, Clone)]
pub struct LambdaSr {
    card: Cardinalities,
    nx: usize,
    program: InfoProgram,
}

impl LambdaSr {
    pub fn new(c: &Channel, card: Cardinalities) -> Self {
        let v = Vars::new(3);
        let (u, vv, w, y, z) = (v.aux(0), v.aux(1), v.aux(2), v.y(), v.z());
        let forms = [
            Form::new().mi(w, y, 0, 1.0),
            Form::new().mi(w, z, 0, 1.0),
            Form::new().mi(u, y, w, 1.0).mi(vv, z, w, 1.0).mi(u, vv, w, -1.0),
        ];
        let program = InfoProgram::new(&[card.nu, card.nv, card.nw], c, &forms);
        Self { card, nx: c.nx(), program }
    }

    pub fn cardinalities(&self) -> &Cardinalities {
        &self.card
    }

    pub fn program(&self) -> &InfoProgram {
        &self.program
    }

    fn check(&self, a: &AuxiliaryJoint) -> Result<()> {
        if a.nx != self.nx {
            return Err(BoundsError::AlphabetMismatch(format!("auxiliary has nx = {}, channel has {}", a.nx, self.nx)));
        }
        Ok(())
    }

    /// Brings `a` to this profile's alphabets.
    pub fn fit(&self, a: &AuxiliaryJoint) -> Result<AuxiliaryJoint> {
        self.check(a)?;
        a.embed(self.card.nu, self.card.nv, self.card.nw)
    }

    pub fn parts(&self, a: &AuxiliaryJoint) -> Result<LambdaParts> {
        let a = self.fit(a)?;
        Ok(self.parts_of_joint(a.values()))
    }

    fn parts_of_joint(&self, p: &[f64]) -> LambdaParts {
        let v = self.program.values(p);
        LambdaParts { i_wy: v[0], i_wz: v[1], rest: v[2] }
    }

    fn aux_of_joint(&self, p: Vec<f64>) -> AuxiliaryJoint {
        let s: f64 = p.iter().sum();
        let p = p.into_iter().map(|v| v / s).collect();
        AuxiliaryJoint::new(self.card.nu, self.card.nv, self.card.nw, self.nx, p).expect("search points are distributions")
    }

    /// Maximizes λ-SR over the auxiliary joint, either freely or with the
    /// input law held at `px`.
    pub fn maximize(&self, lambda: f64, px: Option<&[f64]>, cfg: &SearchConfig, seeds: &[AuxiliaryJoint]) -> Result<LambdaMax> {
        check_lambda(lambda)?;
        let param = match px {
            None => Param::Joint,
            Some(px) => {
                if px.len() != self.nx {
                    return Err(BoundsError::AlphabetMismatch(format!("p(x) has {} entries, channel has {}", px.len(), self.nx)));
                }
                Param::AtInput(px.to_vec())
            }
        };
        let obj = InfoObjective::new(&self.program, param, Weighted(vec![lambda, 1.0 - lambda, 1.0]));
        let starts = seeds
            .iter()
            .map(|s| self.fit(s).map(|s| obj.point_of(s.values())))
            .collect::<Result<Vec<_>>>()?;
        let res: SearchResult = maximize(&obj, &obj.domain(), cfg, &starts);
        let p = obj.joint(&res.point);
        let parts = self.parts_of_joint(&p);
        Ok(LambdaMax {
            lambda,
            value: parts.value(lambda),
            parts,
            aux: self.aux_of_joint(p),
            converged: res.converged,
        })
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(BoundsError::Domain { value: lambda, domain: "[0, 1]" });
    }
    Ok(())
}

/// Best auxiliary found at one `λ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaMax {
    pub lambda: f64,
    pub value: f64,
    pub parts: LambdaParts,
    pub aux: AuxiliaryJoint,
    pub converged: bool,
}

impl LambdaMax {
    /// `I(W*;Y) - I(W*;Z)`.
    pub fn subgradient(&self) -> f64 {
        self.parts.slope()
    }
}

/// λ-SR at a given auxiliary joint.
pub fn lambda_sr_value(c: &Channel, a: &AuxiliaryJoint, lambda: f64) -> Result<f64> {
    check_lambda(lambda)?;
    let sr = LambdaSr::new(c, Cardinalities::custom(a.nu, a.nv, a.nw));
    Ok(sr.parts(a)?.value(lambda))
}

/// `max_{p(u,v,w|x)} λ-SR` with the input law fixed at `px`.
pub fn maximize_lambda_sr_at_input(c: &Channel, px: &[f64], lambda: f64, cfg: &SearchConfig) -> Result<LambdaMax> {
    let sr = LambdaSr::new(c, Cardinalities::lambda_sr(c));
    let seeds = structured_seeds(px, sr.cardinalities());
    sr.maximize(lambda, Some(px), cfg, &seeds)
}

/// `max_{p(u,v,w,x)} λ-SR`, searched directly over the joint.
pub fn lambda_sr_global(c: &Channel, lambda: f64, cfg: &SearchConfig) -> Result<LambdaMax> {
    let sr = LambdaSr::new(c, Cardinalities::lambda_sr(c));
    let seeds = structured_seeds(&uniform(c.nx()), sr.cardinalities());
    sr.maximize(lambda, None, cfg, &seeds)
}

pub fn uniform(n: usize) -> Vec<f64> {
    vec![1.0 / n as f64; n]
}

/// Auxiliaries that are each either constant or a relabeling of `X`
/// (folded onto the available alphabet).
pub fn structured_seeds(px: &[f64], card: &Cardinalities) -> Vec<AuxiliaryJoint> {
    let dims = (card.nu, card.nv, card.nw);
    let mut out = Vec::new();
    for mask in 0..8u8 {
        let f = |bit: u8, n: usize| move |x: usize| if mask >> bit & 1 == 1 { x % n } else { 0 };
        if let Ok(a) = AuxiliaryJoint::deterministic(px, dims, f(0, card.nu), f(1, card.nv), f(2, card.nw)) {
            out.push(a);
        }
    }
    out
}

/// `max I(W;Z) + I(X;Y|W)` (λ = 0) or `max I(W;Y) + I(X;Z|W)` (λ = 1)
/// over `p(w, x)` with `|W| <= nx`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EndpointValue {
    pub lambda: f64,
    pub value: f64,
    /// `p(w, x)` row-major over `nx x nx`.
    pub joint: Vec<f64>,
    pub converged: bool,
}

pub fn endpoint_sr(c: &Channel, lambda: f64, cfg: &SearchConfig) -> Result<EndpointValue> {
    let v = Vars::new(1);
    let (w, x, y, z) = (v.aux(0), v.x(), v.y(), v.z());
    let form = if lambda == 0.0 {
        Form::new().mi(w, z, 0, 1.0).mi(x, y, w, 1.0)
    } else if lambda == 1.0 {
        Form::new().mi(w, y, 0, 1.0).mi(x, z, w, 1.0)
    } else {
        return Err(BoundsError::Domain { value: lambda, domain: "{0, 1}" });
    };
    let prog = InfoProgram::new(&[c.nx()], c, &[form]);
    let obj = InfoObjective::new(&prog, Param::Joint, Weighted(vec![1.0]));
    let n = c.nx();
    let u = 1.0 / n as f64;
    // W constant and W = X under the uniform input
    let constant: Vec<f64> = (0..n * n).map(|i| if i < n { u } else { 0.0 }).collect();
    let diagonal: Vec<f64> = (0..n * n).map(|i| if i / n == i % n { u } else { 0.0 }).collect();
    let mut seeds = vec![constant, diagonal];
    seeds.push(mixture_seed(c, lambda, cfg)?);
    let cfg = cfg.clone().with_restarts(cfg.restarts.max(4 * seeds.len()));
    let res = maximize(&obj, &obj.domain(), &cfg, &seeds);
    let value = prog.values(&res.point)[0];
    Ok(EndpointValue { lambda, value, joint: res.point, converged: res.converged })
}

/// Endpoint objective over weights of fixed conditionals `p(x | w) = r_j`:
/// `I(W; first) + Σ w_j I(X; second | W = j)`, concave in the weights.
struct EndpointMixture {
    outs: Vec<Vec<f64>>,
    inner: Vec<f64>,
}

impl Objective for EndpointMixture {
    fn value(&self, w: &[f64]) -> f64 {
        mixture_information(&self.outs, w, None) + w.iter().zip(&self.inner).map(|(a, b)| a * b).sum::<f64>()
    }

    fn value_grad(&self, w: &[f64], grad: &mut [f64]) -> f64 {
        let v = mixture_information(&self.outs, w, Some(grad));
        for (g, b) in grad.iter_mut().zip(&self.inner) {
            *g += b;
        }
        v + w.iter().zip(&self.inner).map(|(a, b)| a * b).sum::<f64>()
    }
}

/// Global optimum of the endpoint problem with `p(x | w)` restricted to a
/// simplex grid (a concave program), cut to its `nx` heaviest conditionals
/// to seed the unrestricted search.
fn mixture_seed(c: &Channel, lambda: f64, cfg: &SearchConfig) -> Result<Vec<f64>> {
    let n = c.nx();
    let mut k = 64;
    while k > 1 && simplex_grid_count(n, k) > 500 {
        k -= 1;
    }
    let laws: Vec<Vec<f64>> = simplex_grid(n, k)?.collect();
    let (first, second) = if lambda == 0.0 { (c.marginal_z(), c.marginal_y()) } else { (c.marginal_y(), c.marginal_z()) };
    let h_rows: Vec<f64> = second.iter().map(|r| entropy_bits(r)).collect();
    let obj = EndpointMixture {
        outs: laws.iter().map(|r| output_law(r, &first)).collect(),
        inner: laws
            .iter()
            .map(|r| entropy_bits(&output_law(r, &second)) - r.iter().zip(&h_rows).map(|(a, b)| a * b).sum::<f64>())
            .collect(),
    };
    let a = ascend(&obj, &BlockDomain::single(laws.len()), &uniform(laws.len()), cfg);
    let mut order: Vec<usize> = (0..laws.len()).collect();
    order.sort_by(|&i, &j| a.point[j].partial_cmp(&a.point[i]).unwrap_or(std::cmp::Ordering::Equal));
    let kept = &order[..n.min(order.len())];
    let total: f64 = kept.iter().map(|&j| a.point[j]).sum();
    let mut joint = vec![0.0; n * n];
    for (w, &j) in kept.iter().enumerate() {
        for x in 0..n {
            joint[w * n + x] = a.point[j] / total * laws[j][x];
        }
    }
    Ok(joint)
}

/// One sample of the λ-curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaSample {
    pub lambda: f64,
    pub value: f64,
    pub subgradient: f64,
    pub converged: bool,
    pub maximizer: AuxiliaryJoint,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaCurve {
    pub samples: Vec<LambdaSample>,
    pub min_lambda: f64,
    pub min_value: f64,
    pub cardinalities: Cardinalities,
    /// Violations of midpoint convexity or of the supporting lines.
    pub warnings: Vec<String>,
}

impl LambdaCurve {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("lambda,value_bits,subgradient,converged\n");
        for p in &self.samples {
            let _ = writeln!(s, "{},{},{},{}", p.lambda, p.value, p.subgradient, p.converged);
        }
        s
    }

    /// Checks midpoint convexity on every sampled triple with an exact
    /// midpoint, and every stored supporting line against every sample.
    pub fn check_invariants(&self, slack: f64) -> Vec<String> {
        let mut out = Vec::new();
        let s = &self.samples;
        for i in 0..s.len() {
            for k in i + 2..s.len() {
                let mid = 0.5 * (s[i].lambda + s[k].lambda);
                if let Some(j) = s.iter().position(|p| (p.lambda - mid).abs() < 1e-12) {
                    let bound = 0.5 * (s[i].value + s[k].value) + slack;
                    if s[j].value > bound {
                        out.push(format!("midpoint convexity fails at lambda = {mid}"));
                    }
                }
            }
        }
        for a in s {
            for b in s {
                let line = a.value + (b.lambda - a.lambda) * a.subgradient;
                if line > b.value + slack {
                    out.push(format!("supporting line from lambda = {} exceeds the curve at {}", a.lambda, b.lambda));
                }
            }
        }
        out
    }
}

/// Exactly evaluated auxiliaries, reusable as affine lower bounds in `λ`.
#[derive(Debug, Clone, Default)]
pub struct Pool {
    entries: Vec<(LambdaParts, AuxiliaryJoint)>,
}

impl Pool {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_auxiliaries(sr: &LambdaSr, auxes: &[AuxiliaryJoint]) -> Result<Self> {
        let mut p = Self::new();
        for a in auxes {
            let a = sr.fit(a)?;
            let parts = sr.parts(&a)?;
            p.push(parts, a);
        }
        Ok(p)
    }

    pub fn push(&mut self, parts: LambdaParts, aux: AuxiliaryJoint) {
        self.entries.push((parts, aux));
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// First entry with the largest value at `λ`.
    pub fn best(&self, lambda: f64) -> Option<(&LambdaParts, &AuxiliaryJoint)> {
        let mut best: Option<usize> = None;
        for (i, (p, _)) in self.entries.iter().enumerate() {
            if best.map_or(true, |b| p.value(lambda) > self.entries[b].0.value(lambda)) {
                best = Some(i);
            }
        }
        best.map(|i| (&self.entries[i].0, &self.entries[i].1))
    }
}

/// Searches at `λ` seeded by the best pooled auxiliary and returns the
/// better of the search and the pool. The search result joins the pool.
pub fn envelope_max(
    sr: &LambdaSr,
    lambda: f64,
    px: Option<&[f64]>,
    cfg: &SearchConfig,
    seeds: &[AuxiliaryJoint],
    pool: &mut Pool,
) -> Result<LambdaMax> {
    let mut all: Vec<AuxiliaryJoint> = pool.best(lambda).map(|(_, a)| a.clone()).into_iter().collect();
    all.extend(seeds.iter().cloned());
    let found = sr.maximize(lambda, px, cfg, &all)?;
    pool.push(found.parts, found.aux.clone());
    let (parts, aux) = pool.best(lambda).expect("pool is nonempty");
    if parts.value(lambda) > found.value {
        Ok(LambdaMax { lambda, value: parts.value(lambda), parts: *parts, aux: aux.clone(), converged: found.converged })
    } else {
        Ok(found)
    }
}

/// Options shared by curve construction and the sum-rate minimization.
#[derive(Debug, Clone)]
pub struct CurveOptions {
    pub card: Option<Cardinalities>,
    /// Hold the input law fixed instead of optimizing it.
    pub px: Option<Vec<f64>>,
    /// Extra auxiliaries known to be good (for example products of
    /// component maximizers); they join the pool before any search.
    pub pool_seeds: Vec<AuxiliaryJoint>,
    pub golden: GoldenConfig,
}

impl Default for CurveOptions {
    fn default() -> Self {
        Self { card: None, px: None, pool_seeds: Vec::new(), golden: GoldenConfig::default() }
    }
}

fn setup(c: &Channel, opts: &CurveOptions) -> Result<(LambdaSr, Pool, Vec<AuxiliaryJoint>)> {
    let card = opts.card.clone().unwrap_or_else(|| Cardinalities::lambda_sr(c));
    let sr = LambdaSr::new(c, card);
    let px = opts.px.clone().unwrap_or_else(|| uniform(c.nx()));
    let seeds = structured_seeds(&px, sr.cardinalities());
    let mut pool = Pool::from_auxiliaries(&sr, &opts.pool_seeds)?;
    for s in &seeds {
        pool.push(sr.parts(s)?, s.clone());
    }
    Ok((sr, pool, seeds))
}

/// Samples `λ ↦ max λ-SR` on `grid`. Each sample is the upper envelope of
/// the searched maximizers' exact affine lines, so the sampled curve is
/// convex and every stored line supports it.
pub fn build_lambda_curve(c: &Channel, grid: &[f64], cfg: &SearchConfig, opts: &CurveOptions) -> Result<LambdaCurve> {
    if grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(BoundsError::Config("lambda grid must be strictly increasing".into()));
    }
    grid.iter().try_for_each(|&l| check_lambda(l))?;
    let (sr, mut pool, _) = setup(c, opts)?;
    let px = opts.px.as_deref();
    let mut found = Vec::with_capacity(grid.len());
    for &l in grid {
        found.push(envelope_max(&sr, l, px, cfg, &[], &mut pool)?);
    }
    // second pass: lines found later may beat earlier samples
    let mut samples = Vec::with_capacity(grid.len());
    for (i, &l) in grid.iter().enumerate() {
        let (parts, aux) = pool.best(l).expect("pool is nonempty");
        let m = if parts.value(l) > found[i].value + 1e-12 {
            let polished = envelope_max(&sr, l, px, &cfg.clone().with_restarts(1), &[aux.clone()], &mut pool)?;
            let (parts, aux) = pool.best(l).expect("pool is nonempty");
            LambdaMax { lambda: l, value: parts.value(l), parts: *parts, aux: aux.clone(), converged: polished.converged }
        } else {
            found[i].clone()
        };
        samples.push(m);
    }
    // the final envelope over every pooled line
    let samples: Vec<LambdaSample> = samples
        .into_iter()
        .map(|m| {
            let (parts, aux) = pool.best(m.lambda).expect("pool is nonempty");
            let (parts, aux) = if parts.value(m.lambda) > m.value { (*parts, aux.clone()) } else { (m.parts, m.aux) };
            LambdaSample {
                lambda: m.lambda,
                value: parts.value(m.lambda),
                subgradient: parts.slope(),
                converged: m.converged,
                maximizer: aux,
            }
        })
        .collect();
    let (min_lambda, min_value) = samples
        .iter()
        .fold((f64::NAN, f64::INFINITY), |acc, s| if s.value < acc.1 { (s.lambda, s.value) } else { acc });
    let mut curve = LambdaCurve { samples, min_lambda, min_value, cardinalities: sr.cardinalities().clone(), warnings: Vec::new() };
    curve.warnings = curve.check_invariants(1e-6);
    Ok(curve)
}

/// `min_λ max λ-SR`, with its minimizing `λ` and the maximizer there.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MartonSumRate {
    pub value: f64,
    pub lambda_star: f64,
    pub maximizer: AuxiliaryJoint,
    pub subgradient: f64,
    pub converged: bool,
    pub cardinalities: Cardinalities,
    pub golden: GoldenResult,
}

pub fn marton_sum_rate(c: &Channel, cfg: &SearchConfig, opts: &CurveOptions) -> Result<MartonSumRate> {
    let (sr, mut pool, _) = setup(c, opts)?;
    let px = opts.px.as_deref();
    let mut evals: Vec<LambdaMax> = Vec::new();
    let mut failure = None;
    let golden = golden_section_min(
        |l| match envelope_max(&sr, l, px, cfg, &[], &mut pool) {
            Ok(m) => {
                let out = (m.value, Some(m.subgradient()));
                evals.push(m);
                out
            }
            Err(e) => {
                failure.get_or_insert(e);
                (f64::INFINITY, None)
            }
        },
        &opts.golden,
    );
    if let Some(e) = failure {
        return Err(e);
    }
    // re-evaluate every sampled λ against the final pool
    let best = evals
        .iter()
        .map(|m| {
            let (parts, aux) = pool.best(m.lambda).expect("pool is nonempty");
            if parts.value(m.lambda) > m.value {
                LambdaMax { lambda: m.lambda, value: parts.value(m.lambda), parts: *parts, aux: aux.clone(), converged: m.converged }
            } else {
                m.clone()
            }
        })
        .fold(None::<LambdaMax>, |acc, m| match acc {
            Some(a) if a.value <= m.value => Some(a),
            _ => Some(m),
        })
        .expect("golden section evaluates at least twice");
    Ok(MartonSumRate {
        value: best.value,
        lambda_star: best.lambda,
        subgradient: best.subgradient(),
        maximizer: best.aux,
        converged: golden.converged && best.converged,
        cardinalities: sr.cardinalities().clone(),
        golden,
    })
}

/// Product of every pair of per-component maximizers.
pub fn product_seeds(a: &[AuxiliaryJoint], b: &[AuxiliaryJoint]) -> Result<Vec<AuxiliaryJoint>> {
    let mut out = Vec::with_capacity(a.len() * b.len());
    for x in a {
        for y in b {
            out.push(AuxiliaryJoint::product(x, y)?);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorizationReport {
    pub lambda: f64,
    pub product_value: f64,
    pub part1: f64,
    pub part2: f64,
    /// `product - (part1 + part2)`.
    pub gap: f64,
    pub tol: f64,
    pub factorizes: bool,
    pub superadditive: bool,
    pub converged: bool,
}

pub const FACTORIZATION_TOL: f64 = 5e-3;

/// Compares `λ-SR(c1 x c2)` with `λ-SR(c1) + λ-SR(c2)`. The product search
/// is seeded with the product of the component maximizers, so
/// superadditivity holds by construction up to rounding.
pub fn check_factorization(c1: &Channel, c2: &Channel, lambda: f64, cfg: &SearchConfig, tol: f64) -> Result<FactorizationReport> {
    let m1 = lambda_sr_global(c1, lambda, cfg)?;
    let m2 = lambda_sr_global(c2, lambda, cfg)?;
    let pc = crate::channel::make_product(c1, c2)?;
    let card1 = Cardinalities::lambda_sr(c1);
    let card2 = Cardinalities::lambda_sr(c2);
    let sr = LambdaSr::new(pc.flattened(), Cardinalities::product_of(&card1, &card2));
    let seed = AuxiliaryJoint::product(&m1.aux, &m2.aux)?;
    let mut pool = Pool::from_auxiliaries(&sr, &[seed.clone()])?;
    let mp = envelope_max(&sr, lambda, None, cfg, &[], &mut pool)?;
    let sum = m1.value + m2.value;
    let gap = mp.value - sum;
    Ok(FactorizationReport {
        lambda,
        product_value: mp.value,
        part1: m1.value,
        part2: m2.value,
        gap,
        tol,
        factorizes: gap.abs() <= tol,
        superadditive: gap >= -1e-9,
        converged: m1.converged && m2.converged && mp.converged,
    })
}
