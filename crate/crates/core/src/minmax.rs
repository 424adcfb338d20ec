//! Three ways to compute Marton's sum rate on tiny channels, compared.
//!
//! * min-max: `min_λ max_p λ-SR`, from [`marton_sum_rate`];
//! * max-min-max: `max_{p(x)} min_λ max_{p(u,v,w|x)} λ-SR`;
//! * max-min: `max_p min_λ λ-SR = max_p min{I(W;Y), I(W;Z)} + I(U;Y|W) +
//!   I(V;Z|W) - I(U;V|W)` since λ-SR is affine in λ.
//!
//! The max-min is computed by brute force. For every input law `r` on a
//! simplex grid, `G(r) = max_{p(u,v|x)} I(U;Y) + I(V;Z) - I(U;V)` is found
//! by enumerating a grid of conditionals and polishing the best one. A
//! choice of `W` is then a mixture `Σ_j w_j r_j` of grid laws, and
//! `min{I(W;Y), I(W;Z)} + Σ_j w_j G(r_j)` is concave in the weights `w`.
//! The resulting auxiliary joint is rebuilt, evaluated exactly and polished.

use serde::{Deserialize, Serialize};

use crate::channel::Channel;
use crate::error::{BoundsError, Result};
use crate::functional::{at_input_joint, soft_min, Form, InfoObjective, InfoProgram, Param, SoftMin, Vars, Weighted};
use crate::info::{mixture_information, output_law};
use crate::marton::{envelope_max, marton_sum_rate, uniform, AuxiliaryJoint, Cardinalities, CurveOptions, LambdaSr, Pool};
use crate::search::{
    golden_section_min, maximize, simplex_grid, simplex_grid_count, BlockDomain, GoldenConfig, Objective, SearchConfig,
};

/// Largest alphabet accepted by [`check_min_max_equality`].
pub const MAX_TINY: usize = 3;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MinMaxConfig {
    pub search: SearchConfig,
    /// Restarts for the searches at a fixed input law.
    pub at_input: SearchConfig,
    /// Denominator of the grids over input laws and conditionals.
    pub resolution: u32,
    /// Cap on the number of conditional grid points per input law.
    pub conditional_cap: u128,
    pub golden: GoldenConfig,
    /// Agreement required between the three values.
    pub tol: f64,
}

impl MinMaxConfig {
    pub fn with_seed(seed: u64) -> Self {
        Self {
            search: SearchConfig::default().with_restarts(16).with_seed(seed),
            at_input: SearchConfig::default().with_restarts(8).with_max_iters(500).with_seed(seed),
            resolution: 12,
            conditional_cap: 250_000,
            golden: GoldenConfig { tol: 1e-3, ..GoldenConfig::default() },
            tol: 0.02,
        }
    }
}

impl Default for MinMaxConfig {
    fn default() -> Self {
        Self::with_seed(0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinMaxReport {
    pub max_min: f64,
    pub max_min_max: f64,
    pub min_max: f64,
    pub lambda_star: f64,
    /// Input law maximizing the max-min-max.
    pub px_star: Vec<f64>,
    pub max_gap: f64,
    pub tol: f64,
    /// The three values disagree by more than `tol`.
    pub flagged: bool,
    pub resolution: u32,
    /// The conditional grid was coarsened to respect the cap.
    pub conditional_resolution: u32,
}

pub fn check_min_max_equality(c: &Channel, cfg: &MinMaxConfig) -> Result<MinMaxReport> {
    if c.nx() > MAX_TINY || c.ny() > MAX_TINY || c.nz() > MAX_TINY {
        return Err(BoundsError::Config(format!(
            "min-max check needs alphabets of size at most {MAX_TINY}, got ({}, {}, {})",
            c.nx(),
            c.ny(),
            c.nz()
        )));
    }
    let mm = marton_sum_rate(c, &cfg.search, &CurveOptions::default())?;
    let (max_min_max, px_star) = max_min_max(c, cfg)?;
    let (max_min, conditional_resolution) = max_min(c, cfg)?;
    let vals = [max_min, max_min_max, mm.value];
    let max_gap = vals.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b)) - vals.iter().fold(f64::INFINITY, |a, &b| a.min(b));
    Ok(MinMaxReport {
        max_min,
        max_min_max,
        min_max: mm.value,
        lambda_star: mm.lambda_star,
        px_star,
        max_gap,
        tol: cfg.tol,
        flagged: max_gap > cfg.tol,
        resolution: cfg.resolution,
        conditional_resolution,
    })
}

/// `min_λ max_{p(u,v,w|x)} λ-SR` at a fixed input law.
pub fn min_lambda_at_input(c: &Channel, px: &[f64], cfg: &MinMaxConfig) -> Result<f64> {
    let sr = LambdaSr::new(c, Cardinalities::lambda_sr(c));
    let seeds = crate::marton::structured_seeds(px, sr.cardinalities());
    let mut pool = Pool::from_auxiliaries(&sr, &seeds)?;
    let mut failure = None;
    let g = golden_section_min(
        |l| match envelope_max(&sr, l, Some(px), &cfg.at_input, &[], &mut pool) {
            Ok(m) => (m.value, Some(m.subgradient())),
            Err(e) => {
                failure.get_or_insert(e);
                (f64::INFINITY, None)
            }
        },
        &cfg.golden,
    );
    match failure {
        Some(e) => Err(e),
        None => Ok(g.value),
    }
}

fn max_min_max(c: &Channel, cfg: &MinMaxConfig) -> Result<(f64, Vec<f64>)> {
    let grid: Vec<Vec<f64>> = simplex_grid(c.nx(), cfg.resolution)?.collect();
    let mut best = (f64::NEG_INFINITY, uniform(c.nx()));
    for px in grid {
        let v = min_lambda_at_input(c, &px, cfg)?;
        if v > best.0 {
            best = (v, px);
        }
    }
    if c.nx() == 2 {
        // concave in p(x): golden section around the best grid point
        let h = 1.0 / cfg.resolution as f64;
        let t0 = best.1[0];
        let (lo, hi) = ((t0 - h).max(0.0), (t0 + h).min(1.0));
        let mut failure = None;
        let g = golden_section_min(
            |s| {
                let t = lo + s * (hi - lo);
                match min_lambda_at_input(c, &[t, 1.0 - t], cfg) {
                    Ok(v) => (-v, None),
                    Err(e) => {
                        failure.get_or_insert(e);
                        (f64::INFINITY, None)
                    }
                }
            },
            &GoldenConfig { tol: 1e-3, max_evals: 40, ..GoldenConfig::default() },
        );
        if let Some(e) = failure {
            return Err(e);
        }
        if -g.value > best.0 {
            let t = lo + g.argmin * (hi - lo);
            best = (-g.value, vec![t, 1.0 - t]);
        }
    }
    Ok(best)
}

/// `G(r) = max_{p(u,v|x)} I(U;Y) + I(V;Z) - I(U;V)` with its maximizing
/// conditional, laid out `[x][u][v]`.
struct GFunction {
    prog: InfoProgram,
    nuv: usize,
}

impl GFunction {
    fn new(c: &Channel) -> Self {
        let card = Cardinalities::lambda_sr(c);
        let v = Vars::new(2);
        let (u, vv, y, z) = (v.aux(0), v.aux(1), v.y(), v.z());
        let form = Form::new().mi(u, y, 0, 1.0).mi(vv, z, 0, 1.0).mi(u, vv, 0, -1.0);
        Self { prog: InfoProgram::new(&[card.nu, card.nv], c, &[form]), nuv: card.nu * card.nv }
    }

    fn value(&self, px: &[f64], cond: &[f64]) -> f64 {
        self.prog.values(&at_input_joint(px, cond, self.nuv))[0]
    }

    fn maximize(&self, px: &[f64], k: u32, cfg: &SearchConfig) -> Result<(f64, Vec<f64>)> {
        let nx = px.len();
        let block: Vec<Vec<f64>> = simplex_grid(self.nuv, k)?.collect();
        let mut idx = vec![0usize; nx];
        let mut best = (f64::NEG_INFINITY, Vec::new());
        let mut cond = vec![0.0; nx * self.nuv];
        loop {
            for (x, &i) in idx.iter().enumerate() {
                cond[x * self.nuv..(x + 1) * self.nuv].copy_from_slice(&block[i]);
            }
            let v = self.value(px, &cond);
            if v > best.0 {
                best = (v, cond.clone());
            }
            // odometer over the per-input grid points; inputs without mass
            // only need the first point
            let mut x = 0;
            loop {
                if x == nx {
                    return self.polish(px, best, cfg);
                }
                if px[x] > 0.0 && idx[x] + 1 < block.len() {
                    idx[x] += 1;
                    break;
                }
                idx[x] = 0;
                x += 1;
            }
        }
    }

    fn polish(&self, px: &[f64], best: (f64, Vec<f64>), cfg: &SearchConfig) -> Result<(f64, Vec<f64>)> {
        let obj = InfoObjective::new(&self.prog, Param::AtInput(px.to_vec()), Weighted(vec![1.0]));
        let res = maximize(&obj, &obj.domain(), cfg, &[best.1.clone()]);
        let v = self.value(px, &res.point);
        Ok(if v > best.0 { (v, res.point) } else { best })
    }
}

/// Weights `w` over fixed laws `r_j`:
/// `min{T_Y(w), T_Z(w)} + Σ w_j G_j` with
/// `T(w) = H(Σ w_j o_j) - Σ w_j H(o_j)` for output laws `o_j`.
struct MixtureObjective {
    out_y: Vec<Vec<f64>>,
    out_z: Vec<Vec<f64>>,
    g: Vec<f64>,
    tau: f64,
}

impl MixtureObjective {
    fn terms(&self, w: &[f64]) -> [f64; 2] {
        let lin: f64 = w.iter().zip(&self.g).map(|(a, b)| a * b).sum();
        [mixture_information(&self.out_y, w, None) + lin, mixture_information(&self.out_z, w, None) + lin]
    }

    fn exact(&self, w: &[f64]) -> f64 {
        let t = self.terms(w);
        t[0].min(t[1])
    }
}

impl Objective for MixtureObjective {
    fn value(&self, w: &[f64]) -> f64 {
        soft_min(&self.terms(w), self.tau).0
    }

    fn value_grad(&self, w: &[f64], grad: &mut [f64]) -> f64 {
        let n = w.len();
        let (mut gy, mut gz) = (vec![0.0; n], vec![0.0; n]);
        let lin: f64 = w.iter().zip(&self.g).map(|(a, b)| a * b).sum();
        let ty = mixture_information(&self.out_y, w, Some(&mut gy)) + lin;
        let tz = mixture_information(&self.out_z, w, Some(&mut gz)) + lin;
        let (s, k) = soft_min(&[ty, tz], self.tau);
        for j in 0..n {
            grad[j] = k[0] * gy[j] + k[1] * gz[j] + self.g[j];
        }
        s
    }
}

const TAUS: [f64; 4] = [0.05, 1e-2, 1e-3, 1e-4];

fn max_min(c: &Channel, cfg: &MinMaxConfig) -> Result<(f64, u32)> {
    let gf = GFunction::new(c);
    let mut k = cfg.resolution;
    while k > 1 && simplex_grid_count(gf.nuv, k).pow(c.nx() as u32) > cfg.conditional_cap {
        k -= 1;
    }
    let laws: Vec<Vec<f64>> = simplex_grid(c.nx(), cfg.resolution)?.collect();
    let mut g = Vec::with_capacity(laws.len());
    let mut conds = Vec::with_capacity(laws.len());
    for r in &laws {
        let (v, cond) = gf.maximize(r, k, &cfg.at_input)?;
        g.push(v);
        conds.push(cond);
    }
    let (qy, qz) = (c.marginal_y(), c.marginal_z());
    let mut obj = MixtureObjective {
        out_y: laws.iter().map(|r| output_law(r, &qy)).collect(),
        out_z: laws.iter().map(|r| output_law(r, &qz)).collect(),
        g,
        tau: TAUS[0],
    };
    let domain = BlockDomain::single(laws.len());
    let mut seeds = vec![uniform(laws.len())];
    let mut best = (obj.exact(&seeds[0]), seeds[0].clone());
    for (stage, &tau) in TAUS.iter().enumerate() {
        obj.tau = tau;
        let stage_cfg = if stage == 0 { cfg.search.clone() } else { cfg.search.clone().with_restarts(1) };
        let res = maximize(&obj, &domain, &stage_cfg, &seeds);
        let v = obj.exact(&res.point);
        if v > best.0 {
            best = (v, res.point.clone());
        }
        seeds = vec![res.point];
    }
    // rebuild p(u, v, w, x) and polish it directly
    let card = Cardinalities::lambda_sr(c);
    let nw = laws.len();
    let nx = c.nx();
    let mut joint = vec![0.0; card.nu * card.nv * nw * nx];
    for (j, (r, cond)) in laws.iter().zip(&conds).enumerate() {
        for x in 0..nx {
            for uv in 0..gf.nuv {
                let (u, v) = (uv / card.nv, uv % card.nv);
                joint[((u * card.nv + v) * nw + j) * nx + x] += best.1[j] * r[x] * cond[x * gf.nuv + uv];
            }
        }
    }
    let s: f64 = joint.iter().sum();
    joint.iter_mut().for_each(|v| *v /= s);
    let aux = AuxiliaryJoint::new(card.nu, card.nv, nw, nx, joint)?;
    Ok((polish_max_min(c, &aux, &cfg.at_input)?, k))
}

/// Local ascent on `min{I(W;Y), I(W;Z)} + rest` from `aux`; returns the
/// exact value at the better of the start and the result.
fn polish_max_min(c: &Channel, aux: &AuxiliaryJoint, cfg: &SearchConfig) -> Result<f64> {
    let v = Vars::new(3);
    let (u, vv, w, y, z) = (v.aux(0), v.aux(1), v.aux(2), v.y(), v.z());
    let rest = Form::new().mi(u, y, w, 1.0).mi(vv, z, w, 1.0).mi(u, vv, w, -1.0);
    let forms = [rest.clone().mi(w, y, 0, 1.0), rest.mi(w, z, 0, 1.0)];
    let prog = InfoProgram::new(&[aux.nu, aux.nv, aux.nw], c, &forms);
    let exact = |p: &[f64]| {
        let f = prog.values(p);
        f[0].min(f[1])
    };
    let mut best = exact(aux.values());
    let mut start = aux.values().to_vec();
    for &tau in &TAUS[1..] {
        let obj = InfoObjective::new(&prog, Param::Joint, SoftMin { tau });
        let res = maximize(&obj, &obj.domain(), &cfg.clone().with_restarts(1), &[start.clone()]);
        let e = exact(&res.point);
        if e > best {
            best = e;
        }
        start = res.point;
    }
    Ok(best)
}
