//! Optimization over products of probability simplices.
//!
//! Everything here is objective-agnostic: callers hand in an [`Objective`]
//! defined on a [`BlockDomain`], i.e. a concatenation of simplex blocks.
//! Maximization is multi-start projected-gradient ascent with Armijo
//! backtracking. Restart `i` draws from its own RNG stream derived from
//! `(seed, i)`, and the reducer scans restarts in index order, so results do
//! not depend on the number of worker threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{BoundsError, Result};

/// Default cap on the number of points a grid enumeration may produce.
pub const GRID_CAP: u128 = 50_000_000;

/// A differentiable function on a block-simplex domain.
pub trait Objective: Sync {
    fn value(&self, x: &[f64]) -> f64;
    /// Writes the gradient into `grad` and returns the value.
    fn value_grad(&self, x: &[f64], grad: &mut [f64]) -> f64;
}

/// Concatenation of probability simplices of the given sizes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockDomain {
    blocks: Vec<usize>,
}

impl BlockDomain {
    pub fn new(blocks: Vec<usize>) -> Self {
        assert!(blocks.iter().all(|&b| b > 0), "empty simplex block");
        Self { blocks }
    }

    pub fn single(n: usize) -> Self {
        Self::new(vec![n])
    }

    pub fn repeated(count: usize, size: usize) -> Self {
        Self::new(vec![size; count])
    }

    pub fn blocks(&self) -> &[usize] {
        &self.blocks
    }

    pub fn dim(&self) -> usize {
        self.blocks.iter().sum()
    }

    /// Euclidean projection of every block onto its simplex, in place.
    pub fn project(&self, x: &mut [f64]) {
        let mut off = 0;
        for &b in &self.blocks {
            project_simplex(&mut x[off..off + b]);
            off += b;
        }
    }

    /// True when every block is nonnegative and sums to one within `tol`.
    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        if x.len() != self.dim() {
            return false;
        }
        let mut off = 0;
        for &b in &self.blocks {
            let blk = &x[off..off + b];
            if blk.iter().any(|&v| v < 0.0) || (blk.iter().sum::<f64>() - 1.0).abs() > tol {
                return false;
            }
            off += b;
        }
        true
    }

    fn sample(&self, rng: &mut ChaCha8Rng, alpha: f64) -> Vec<f64> {
        let gamma = Gamma::new(alpha, 1.0).expect("positive shape");
        let mut x = Vec::with_capacity(self.dim());
        for &b in &self.blocks {
            let start = x.len();
            let mut s = 0.0;
            for _ in 0..b {
                let g: f64 = gamma.sample(rng);
                s += g;
                x.push(g);
            }
            if s > 0.0 && s.is_finite() {
                x[start..].iter_mut().for_each(|v| *v /= s);
            } else {
                // every gamma draw underflowed: fall back to a random vertex
                x[start..].iter_mut().for_each(|v| *v = 0.0);
                let k = rng.gen_range(0..b);
                x[start + k] = 1.0;
            }
        }
        x
    }
}

/// Euclidean projection onto the probability simplex (sort-and-threshold).
pub fn project_simplex(v: &mut [f64]) {
    let n = v.len();
    if n == 1 {
        v[0] = 1.0;
        return;
    }
    let mut u: Vec<f64> = v.to_vec();
    u.sort_unstable_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (j, &uj) in u.iter().enumerate() {
        cum += uj;
        let t = (cum - 1.0) / (j + 1) as f64;
        if uj - t > 0.0 {
            theta = t;
        }
    }
    let mut s = 0.0;
    for x in v.iter_mut() {
        *x = (*x - theta).max(0.0);
        s += *x;
    }
    // absorb rounding so each block sums to one to machine precision
    if s > 0.0 {
        v.iter_mut().for_each(|x| *x /= s);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    pub restarts: usize,
    pub max_iters: usize,
    pub initial_step: f64,
    /// Step shrink factor per failed Armijo test.
    pub backtrack: f64,
    /// Armijo sufficient-increase constant.
    pub armijo: f64,
    pub max_backtracks: usize,
    /// Denominator of the simplex grid used by grid-seeded searches.
    pub grid_resolution: u32,
    pub seed: u64,
    /// Stop once the per-iteration improvement stays below this.
    pub tolerance: f64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            restarts: 64,
            max_iters: 2000,
            initial_step: 0.05,
            backtrack: 0.5,
            armijo: 1e-4,
            max_backtracks: 40,
            grid_resolution: 16,
            seed: 0,
            tolerance: 1e-12,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.restarts > 0
            && self.max_iters > 0
            && self.initial_step > 0.0
            && self.backtrack > 0.0
            && self.backtrack < 1.0
            && self.armijo > 0.0
            && self.max_backtracks > 0
            && self.grid_resolution > 0
            && self.tolerance > 0.0;
        if ok {
            Ok(())
        } else {
            Err(BoundsError::Config(format!("{self:?}")))
        }
    }

    pub fn with_restarts(mut self, restarts: usize) -> Self {
        self.restarts = restarts;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_max_iters(mut self, max_iters: usize) -> Self {
        self.max_iters = max_iters;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitKind {
    Structured,
    PerturbedStructured,
    Dirichlet,
    VertexBiased,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RestartDiagnostics {
    pub index: usize,
    pub init: InitKind,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
    /// The objective went non-finite and the restart was abandoned.
    pub aborted: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SearchResult {
    pub value: f64,
    pub point: Vec<f64>,
    pub converged: bool,
    pub diagnostics: Vec<RestartDiagnostics>,
}

/// Outcome of a single local ascent.
#[derive(Debug, Clone)]
pub struct Ascent {
    pub value: f64,
    pub point: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub aborted: bool,
}

/// Projected-gradient ascent from `start` (projected first).
pub fn ascend(obj: &dyn Objective, domain: &BlockDomain, start: &[f64], cfg: &SearchConfig) -> Ascent {
    let n = domain.dim();
    let mut x = start.to_vec();
    domain.project(&mut x);
    let mut g = vec![0.0; n];
    let mut f = obj.value_grad(&x, &mut g);
    if !f.is_finite() || g.iter().any(|v| !v.is_finite()) {
        return Ascent { value: f64::NEG_INFINITY, point: x, iterations: 0, converged: false, aborted: true };
    }
    let mut step = cfg.initial_step;
    let mut trial = vec![0.0; n];
    let mut small = 0;
    for it in 0..cfg.max_iters {
        let mut accepted = None;
        let mut t = step;
        for _ in 0..cfg.max_backtracks {
            for i in 0..n {
                trial[i] = x[i] + t * g[i];
            }
            domain.project(&mut trial);
            let mut dir = 0.0;
            let mut moved = 0.0f64;
            for i in 0..n {
                let d = trial[i] - x[i];
                dir += g[i] * d;
                moved = moved.max(d.abs());
            }
            if moved == 0.0 {
                break;
            }
            let ft = obj.value(&trial);
            if ft.is_finite() && ft >= f + cfg.armijo * dir {
                accepted = Some((ft, t));
                break;
            }
            t *= cfg.backtrack;
        }
        let Some((ft, t)) = accepted else {
            return Ascent { value: f, point: x, iterations: it, converged: true, aborted: false };
        };
        std::mem::swap(&mut x, &mut trial);
        let gain = ft - f;
        f = obj.value_grad(&x, &mut g);
        if !f.is_finite() || g.iter().any(|v| !v.is_finite()) {
            return Ascent { value: f64::NEG_INFINITY, point: x, iterations: it, converged: false, aborted: true };
        }
        step = (t / cfg.backtrack).min(1e3);
        if gain < cfg.tolerance {
            small += 1;
            if small >= 3 {
                return Ascent { value: f, point: x, iterations: it + 1, converged: true, aborted: false };
            }
        } else {
            small = 0;
        }
    }
    Ascent { value: f, point: x, iterations: cfg.max_iters, converged: false, aborted: false }
}

fn restart_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64 + 1);
    rng
}

fn initial_point(domain: &BlockDomain, index: usize, seeds: &[Vec<f64>], rng: &mut ChaCha8Rng) -> (InitKind, Vec<f64>) {
    match index % 4 {
        0 if !seeds.is_empty() => {
            let k = index / 4;
            if k < seeds.len() {
                (InitKind::Structured, seeds[k].clone())
            } else {
                let base = &seeds[k % seeds.len()];
                let noise = domain.sample(rng, 1.0);
                let x = base.iter().zip(&noise).map(|(b, e)| 0.9 * b + 0.1 * e).collect();
                (InitKind::PerturbedStructured, x)
            }
        }
        2 => (InitKind::VertexBiased, domain.sample(rng, 0.1)),
        _ => (InitKind::Dirichlet, domain.sample(rng, 1.0)),
    }
}

/// Multi-start maximization. Structured `seeds` occupy every fourth restart
/// slot starting at 0; the remaining slots are 2:1 Dirichlet(1) versus
/// vertex-biased Dirichlet(0.1) draws.
pub fn maximize(obj: &dyn Objective, domain: &BlockDomain, cfg: &SearchConfig, seeds: &[Vec<f64>]) -> SearchResult {
    for s in seeds {
        assert_eq!(s.len(), domain.dim(), "seed dimension mismatch");
    }
    let runs: Vec<(RestartDiagnostics, Vec<f64>)> = (0..cfg.restarts)
        .into_par_iter()
        .map(|i| {
            let mut rng = restart_rng(cfg.seed, i);
            let (init, start) = initial_point(domain, i, seeds, &mut rng);
            let a = ascend(obj, domain, &start, cfg);
            let d = RestartDiagnostics {
                index: i,
                init,
                value: a.value,
                iterations: a.iterations,
                converged: a.converged,
                aborted: a.aborted,
            };
            (d, a.point)
        })
        .collect();
    let mut best: Option<usize> = None;
    for (i, (d, _)) in runs.iter().enumerate() {
        if d.aborted {
            continue;
        }
        if best.map_or(true, |b| d.value > runs[b].0.value) {
            best = Some(i);
        }
    }
    let (value, point, converged) = match best {
        Some(b) => (runs[b].0.value, runs[b].1.clone(), runs[b].0.converged),
        None => (f64::NEG_INFINITY, vec![0.0; domain.dim()], false),
    };
    SearchResult { value, point, converged, diagnostics: runs.into_iter().map(|(d, _)| d).collect() }
}

/// Number of points of the simplex grid with `dim` coordinates and
/// denominator `k`: `C(k + dim - 1, dim - 1)`.
pub fn simplex_grid_count(dim: usize, k: u32) -> u128 {
    binomial(k as u128 + dim as u128 - 1, dim as u128 - 1)
}

fn binomial(n: u128, r: u128) -> u128 {
    let r = r.min(n - r);
    let mut acc: u128 = 1;
    for i in 0..r {
        acc = acc * (n - i) / (i + 1);
    }
    acc
}

/// Iterator over all points of the simplex with coordinates in
/// `{0, 1/k, ..., 1}`, in lexicographic order of numerators.
#[derive(Debug, Clone)]
pub struct SimplexGrid {
    k: u32,
    counts: Vec<u32>,
    done: bool,
}

impl Iterator for SimplexGrid {
    type Item = Vec<f64>;

    fn next(&mut self) -> Option<Vec<f64>> {
        if self.done {
            return None;
        }
        let k = self.k as f64;
        let out = self.counts.iter().map(|&c| c as f64 / k).collect();
        // advance: find the rightmost position (excluding the last) that can
        // take one more unit from the tail
        let d = self.counts.len();
        let mut advanced = false;
        if d > 1 {
            for i in (0..d - 1).rev() {
                let tail: u32 = self.counts[i + 1..].iter().sum();
                if tail > 0 {
                    self.counts[i] += 1;
                    for c in &mut self.counts[i + 1..] {
                        *c = 0;
                    }
                    self.counts[d - 1] = tail - 1;
                    advanced = true;
                    break;
                }
            }
        }
        if !advanced {
            self.done = true;
        }
        Some(out)
    }
}

/// Enumerates the simplex grid; the first point is `(0, ..., 0, 1)`.
pub fn simplex_grid(dim: usize, k: u32) -> Result<SimplexGrid> {
    simplex_grid_capped(dim, k, GRID_CAP)
}

pub fn simplex_grid_capped(dim: usize, k: u32, cap: u128) -> Result<SimplexGrid> {
    if dim == 0 || k == 0 {
        return Err(BoundsError::Config("simplex grid needs dim >= 1 and k >= 1".into()));
    }
    let count = simplex_grid_count(dim, k);
    if count > cap {
        return Err(BoundsError::GridCap { count, cap });
    }
    let mut counts = vec![0; dim];
    counts[dim - 1] = k;
    Ok(SimplexGrid { k, counts, done: false })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoldenResult {
    pub argmin: f64,
    pub value: f64,
    /// Every evaluation as `(lambda, value, subgradient)`.
    pub evaluations: Vec<(f64, f64, Option<f64>)>,
    pub converged: bool,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct GoldenConfig {
    /// Stop when the bracket is narrower than this.
    pub tol: f64,
    /// Stop when a subgradient hint is smaller than this in magnitude.
    pub subgradient_tol: f64,
    /// Assumed evaluation noise for the convexity warning.
    pub noise: f64,
    pub max_evals: usize,
    /// Sign-driven bisection steps performed before golden section.
    pub bisection_steps: usize,
}

impl Default for GoldenConfig {
    fn default() -> Self {
        Self { tol: 1e-4, subgradient_tol: 1e-6, noise: 1e-6, max_evals: 80, bisection_steps: 6 }
    }
}

/// Minimizes a convex function on `[0, 1]`.
///
/// `f` returns the value and optionally a subgradient at the query point.
/// When subgradients are available the endpoints are probed first (a
/// nonnegative slope at 0 or a nonpositive slope at 1 settles the problem),
/// then a few sign-driven bisection steps shrink the bracket before the
/// golden-section phase.
pub fn golden_section_min<F>(mut f: F, cfg: &GoldenConfig) -> GoldenResult
where
    F: FnMut(f64) -> (f64, Option<f64>),
{
    let mut evals: Vec<(f64, f64, Option<f64>)> = Vec::new();
    let mut eval = |x: f64, evals: &mut Vec<(f64, f64, Option<f64>)>| {
        let (v, s) = f(x);
        evals.push((x, v, s));
        (v, s)
    };
    let finish = |evals: Vec<(f64, f64, Option<f64>)>, converged: bool, cfg: &GoldenConfig| {
        let (argmin, value) = evals
            .iter()
            .fold((f64::NAN, f64::INFINITY), |acc, &(x, v, _)| if v < acc.1 { (x, v) } else { acc });
        let warnings = convexity_warnings(&evals, cfg.noise);
        GoldenResult { argmin, value, evaluations: evals, converged, warnings }
    };

    let (_, s0) = eval(0.0, &mut evals);
    let (_, s1) = eval(1.0, &mut evals);
    let (mut a, mut b) = (0.0f64, 1.0f64);
    if let (Some(s0), Some(s1)) = (s0, s1) {
        if s0 >= -cfg.subgradient_tol {
            return finish(evals, true, cfg);
        }
        if s1 <= cfg.subgradient_tol {
            return finish(evals, true, cfg);
        }
        for _ in 0..cfg.bisection_steps {
            let m = 0.5 * (a + b);
            let (_, s) = eval(m, &mut evals);
            match s {
                Some(s) if s.abs() < cfg.subgradient_tol => return finish(evals, true, cfg),
                Some(s) if s > 0.0 => b = m,
                Some(_) => a = m,
                None => break,
            }
            if b - a < cfg.tol {
                return finish(evals, true, cfg);
            }
        }
    }

    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, _) = eval(c, &mut evals);
    let (mut fd, _) = eval(d, &mut evals);
    while b - a > cfg.tol {
        if evals.len() >= cfg.max_evals {
            return finish(evals, false, cfg);
        }
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = eval(c, &mut evals).0;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = eval(d, &mut evals).0;
        }
    }
    finish(evals, true, cfg)
}

/// Midpoint-style convexity test over consecutive evaluated points.
fn convexity_warnings(evals: &[(f64, f64, Option<f64>)], noise: f64) -> Vec<String> {
    let mut pts: Vec<(f64, f64)> = evals.iter().map(|&(x, v, _)| (x, v)).collect();
    pts.sort_by(|p, q| p.0.partial_cmp(&q.0).unwrap());
    pts.dedup_by(|p, q| (p.0 - q.0).abs() < 1e-15);
    let mut out = Vec::new();
    for w in pts.windows(3) {
        let (x1, v1) = w[0];
        let (x2, v2) = w[1];
        let (x3, v3) = w[2];
        let chord = v1 + (v3 - v1) * (x2 - x1) / (x3 - x1);
        if v2 > chord + 10.0 * noise {
            out.push(format!("non-convex samples at lambda = {x2:.6}: {v2:.9} above chord {chord:.9}"));
        }
    }
    out
}
