//! Two-receiver discrete memoryless broadcast channels `q(y, z | x)`,
//! products of channels and class predicates.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{BoundsError, Result};
use crate::functional::{Form, InfoObjective, InfoProgram, Param, Vars, Weighted};
use crate::search::{maximize, simplex_grid, simplex_grid_count, SearchConfig};

/// Row-sum tolerance for channels built in memory.
pub const ROW_TOL: f64 = 1e-12;
/// Row-sum tolerance accepted when reading channel files.
pub const FILE_ROW_TOL: f64 = 1e-9;
/// Largest flattened alphabet `make_product` builds by default.
pub const DEFAULT_MAX_ALPHABET: usize = 4096;
/// A gap above this refutes an ordering between the receivers.
pub const WITNESS_GAP: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Receiver {
    Y,
    Z,
}

impl Receiver {
    pub fn other(self) -> Self {
        match self {
            Receiver::Y => Receiver::Z,
            Receiver::Z => Receiver::Y,
        }
    }
}

/// `q[x][y][z]`, stored flat in row-major order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ChannelFile", into = "ChannelFile")]
pub struct Channel {
    nx: usize,
    ny: usize,
    nz: usize,
    q: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ChannelFile {
    nx: usize,
    ny: usize,
    nz: usize,
    q: Vec<Vec<Vec<f64>>>,
}

impl TryFrom<ChannelFile> for Channel {
    type Error = BoundsError;

    fn try_from(f: ChannelFile) -> Result<Self> {
        let c = Channel::from_nested(&f.q).or_else(|e| match e {
            BoundsError::NotStochastic { .. } => Channel::from_nested_renormalizing(&f.q, FILE_ROW_TOL),
            e => Err(e),
        })?;
        if (c.nx, c.ny, c.nz) != (f.nx, f.ny, f.nz) {
            return Err(BoundsError::Shape(format!(
                "declared sizes ({}, {}, {}) do not match q of shape ({}, {}, {})",
                f.nx, f.ny, f.nz, c.nx, c.ny, c.nz
            )));
        }
        Ok(c)
    }
}

impl From<Channel> for ChannelFile {
    fn from(c: Channel) -> Self {
        let q = (0..c.nx)
            .map(|x| c.row(x).chunks(c.nz).map(<[f64]>::to_vec).collect())
            .collect();
        ChannelFile { nx: c.nx, ny: c.ny, nz: c.nz, q }
    }
}

fn nested_shape(q: &[Vec<Vec<f64>>]) -> Result<(usize, usize, usize)> {
    let nx = q.len();
    let ny = q.first().map_or(0, Vec::len);
    let nz = q.first().and_then(|r| r.first()).map_or(0, Vec::len);
    if nx == 0 || ny == 0 || nz == 0 {
        return Err(BoundsError::Shape("channel alphabets must be nonempty".into()));
    }
    for (x, row) in q.iter().enumerate() {
        if row.len() != ny || row.iter().any(|r| r.len() != nz) {
            return Err(BoundsError::Shape(format!("row {x} is ragged")));
        }
    }
    Ok((nx, ny, nz))
}

impl Channel {
    /// Builds a channel from a flat `q[x][y][z]` array; every row must sum to
    /// one within `ROW_TOL`.
    pub fn new(nx: usize, ny: usize, nz: usize, q: Vec<f64>) -> Result<Self> {
        Self::with_tolerance(nx, ny, nz, q, ROW_TOL)
    }

    fn with_tolerance(nx: usize, ny: usize, nz: usize, q: Vec<f64>, tol: f64) -> Result<Self> {
        if nx == 0 || ny == 0 || nz == 0 {
            return Err(BoundsError::Shape("channel alphabets must be nonempty".into()));
        }
        if q.len() != nx * ny * nz {
            return Err(BoundsError::Shape(format!("expected {} entries, got {}", nx * ny * nz, q.len())));
        }
        if let Some((index, &value)) = q.iter().enumerate().find(|(_, v)| !v.is_finite() || **v < 0.0) {
            return Err(BoundsError::InvalidEntry { index, value });
        }
        for (row, r) in q.chunks(ny * nz).enumerate() {
            let sum: f64 = r.iter().sum();
            if (sum - 1.0).abs() > tol {
                return Err(BoundsError::NotStochastic { row, sum, tol });
            }
        }
        Ok(Self { nx, ny, nz, q })
    }

    pub fn from_nested(q: &[Vec<Vec<f64>>]) -> Result<Self> {
        let (nx, ny, nz) = nested_shape(q)?;
        Self::new(nx, ny, nz, q.iter().flatten().flatten().copied().collect())
    }

    /// Accepts rows within `tol` of stochastic and rescales each row that
    /// deviates by more than `ROW_TOL`.
    pub fn from_nested_renormalizing(q: &[Vec<Vec<f64>>], tol: f64) -> Result<Self> {
        let (nx, ny, nz) = nested_shape(q)?;
        let mut c = Self::with_tolerance(nx, ny, nz, q.iter().flatten().flatten().copied().collect(), tol)?;
        for r in c.q.chunks_mut(ny * nz) {
            let s: f64 = r.iter().sum();
            if (s - 1.0).abs() > ROW_TOL {
                r.iter_mut().for_each(|v| *v /= s);
            }
        }
        Ok(c)
    }

    /// Channel whose outputs are conditionally independent given `x`:
    /// `q(y, z | x) = qy(y | x) qz(z | x)`.
    pub fn from_marginals(qy: &[Vec<f64>], qz: &[Vec<f64>]) -> Result<Self> {
        if qy.len() != qz.len() || qy.is_empty() {
            return Err(BoundsError::Shape("marginal kernels need the same nonempty input alphabet".into()));
        }
        let (ny, nz) = (qy[0].len(), qz[0].len());
        if qy.iter().any(|r| r.len() != ny) || qz.iter().any(|r| r.len() != nz) {
            return Err(BoundsError::Shape("ragged marginal kernel".into()));
        }
        let q = qy
            .iter()
            .zip(qz)
            .flat_map(|(ry, rz)| ry.iter().flat_map(move |a| rz.iter().map(move |b| a * b)))
            .collect();
        Self::new(qy.len(), ny, nz, q)
    }

    /// Both receivers observe the input.
    pub fn noiseless(n: usize) -> Result<Self> {
        let mut q = vec![0.0; n * n * n];
        for x in 0..n {
            q[x * n * n + x * n + x] = 1.0;
        }
        Self::new(n, n, n, q)
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn nz(&self) -> usize {
        self.nz
    }

    /// `q(·, · | x)` flattened as `y * nz + z`.
    pub fn row(&self, x: usize) -> &[f64] {
        let w = self.ny * self.nz;
        &self.q[x * w..(x + 1) * w]
    }

    pub fn get(&self, x: usize, y: usize, z: usize) -> f64 {
        self.q[(x * self.ny + y) * self.nz + z]
    }

    pub fn flat(&self) -> &[f64] {
        &self.q
    }

    /// Nonzero entries `(y, z, q)` of every input row.
    pub fn sparse_rows(&self) -> Vec<Vec<(usize, usize, f64)>> {
        (0..self.nx)
            .map(|x| {
                self.row(x)
                    .iter()
                    .enumerate()
                    .filter(|(_, &v)| v > 0.0)
                    .map(|(i, &v)| (i / self.nz, i % self.nz, v))
                    .collect()
            })
            .collect()
    }

    /// `q(y | x)` as rows.
    pub fn marginal_y(&self) -> Vec<Vec<f64>> {
        (0..self.nx).map(|x| self.row(x).chunks(self.nz).map(|r| r.iter().sum()).collect()).collect()
    }

    /// `q(z | x)` as rows.
    pub fn marginal_z(&self) -> Vec<Vec<f64>> {
        (0..self.nx)
            .map(|x| {
                let mut m = vec![0.0; self.nz];
                for (i, v) in self.row(x).iter().enumerate() {
                    m[i % self.nz] += v;
                }
                m
            })
            .collect()
    }

    pub fn marginal(&self, r: Receiver) -> Vec<Vec<f64>> {
        match r {
            Receiver::Y => self.marginal_y(),
            Receiver::Z => self.marginal_z(),
        }
    }

    /// The same channel with the receivers exchanged.
    pub fn mirror(&self) -> Self {
        let mut q = vec![0.0; self.q.len()];
        for x in 0..self.nx {
            for y in 0..self.ny {
                for z in 0..self.nz {
                    q[(x * self.nz + z) * self.ny + y] = self.get(x, y, z);
                }
            }
        }
        Self { nx: self.nx, ny: self.nz, nz: self.ny, q }
    }

    /// Relabels symbols: old `(x, y, z)` becomes `(px[x], py[y], pz[z])`.
    pub fn relabel(&self, px: &[usize], py: &[usize], pz: &[usize]) -> Result<Self> {
        for (p, n) in [(px, self.nx), (py, self.ny), (pz, self.nz)] {
            let mut seen = vec![false; n];
            if p.len() != n || p.iter().any(|&i| i >= n || std::mem::replace(&mut seen[i], true)) {
                return Err(BoundsError::Shape("relabeling is not a permutation".into()));
            }
        }
        let mut q = vec![0.0; self.q.len()];
        for x in 0..self.nx {
            for y in 0..self.ny {
                for z in 0..self.nz {
                    q[(px[x] * self.ny + py[y]) * self.nz + pz[z]] = self.get(x, y, z);
                }
            }
        }
        Ok(Self { q, ..*self })
    }

    /// True iff every row of `q(receiver | x)` is a point mass within
    /// `ROW_TOL`.
    pub fn is_deterministic(&self, r: Receiver) -> bool {
        self.marginal(r).iter().all(|row| row.iter().any(|&v| (v - 1.0).abs() <= ROW_TOL))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("channel serializes")
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json() + "\n")?;
        Ok(())
    }
}

/// Deterministic kernel `x -> class[x]` over `n` outputs.
pub fn deterministic_kernel(class: &[usize], n: usize) -> Vec<Vec<f64>> {
    class.iter().map(|&c| (0..n).map(|o| if o == c { 1.0 } else { 0.0 }).collect()).collect()
}

pub fn bsc_kernel(p: f64) -> Vec<Vec<f64>> {
    vec![vec![1.0 - p, p], vec![p, 1.0 - p]]
}

/// Binary erasure kernel with outputs `(0, 1, erasure)`.
pub fn bec_kernel(e: f64) -> Vec<Vec<f64>> {
    vec![vec![1.0 - e, 0.0, e], vec![0.0, 1.0 - e, e]]
}

/// Row-stochastic matrix product `a b`.
pub fn compose_kernels(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    a.iter()
        .map(|ra| {
            let mut out = vec![0.0; b[0].len()];
            for (k, &w) in ra.iter().enumerate() {
                for (o, v) in out.iter_mut().zip(&b[k]) {
                    *o += w * v;
                }
            }
            out
        })
        .collect()
}

/// Two channels used in parallel, together with their flattened product.
/// Symbols pair up row-major: `(a1, a2) -> a1 * n2 + a2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProductChannel {
    pub c1: Channel,
    pub c2: Channel,
    #[serde(skip)]
    flattened: Option<Channel>,
}

#[derive(Serialize, Deserialize)]
struct ProductFile {
    product: [Channel; 2],
}

impl ProductChannel {
    pub fn flattened(&self) -> &Channel {
        self.flattened.as_ref().expect("built by make_product")
    }

    pub fn load(path: &Path, max_alphabet: usize) -> Result<Self> {
        let f: ProductFile = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        let [c1, c2] = f.product;
        make_product_capped(&c1, &c2, max_alphabet)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&ProductFile { product: [self.c1.clone(), self.c2.clone()] }).expect("serializes")
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json() + "\n")?;
        Ok(())
    }

    /// Reversely semi-deterministic: `Y1` and `Z2` deterministic.
    pub fn is_reversely_semi_deterministic(&self) -> bool {
        self.c1.is_deterministic(Receiver::Y) && self.c2.is_deterministic(Receiver::Z)
    }
}

pub fn make_product(c1: &Channel, c2: &Channel) -> Result<ProductChannel> {
    make_product_capped(c1, c2, DEFAULT_MAX_ALPHABET)
}

pub fn make_product_capped(c1: &Channel, c2: &Channel, max_alphabet: usize) -> Result<ProductChannel> {
    let (nx, ny, nz) = (c1.nx * c2.nx, c1.ny * c2.ny, c1.nz * c2.nz);
    if let Some(&size) = [nx, ny, nz].iter().find(|&&s| s > max_alphabet) {
        return Err(BoundsError::AlphabetOverflow { size, max: max_alphabet });
    }
    let mut q = vec![0.0; nx * ny * nz];
    for x1 in 0..c1.nx {
        for x2 in 0..c2.nx {
            let x = x1 * c2.nx + x2;
            for y1 in 0..c1.ny {
                for z1 in 0..c1.nz {
                    let a = c1.get(x1, y1, z1);
                    if a == 0.0 {
                        continue;
                    }
                    for y2 in 0..c2.ny {
                        for z2 in 0..c2.nz {
                            let (y, z) = (y1 * c2.ny + y2, z1 * c2.nz + z2);
                            q[(x * ny + y) * nz + z] = a * c2.get(x2, y2, z2);
                        }
                    }
                }
            }
        }
    }
    // rows of products of stochastic rows are stochastic up to rounding
    let flat = Channel::with_tolerance(nx, ny, nz, q, 1e-10)?;
    Ok(ProductChannel { c1: c1.clone(), c2: c2.clone(), flattened: Some(flat) })
}

/// Result of the numerical more-capable test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MoreCapable {
    /// `true` is best effort: no input law with a positive gap was found.
    pub verdict: bool,
    /// Largest `I(X; weaker) - I(X; stronger)` found.
    pub gap: f64,
    /// Input law attaining `gap`.
    pub witness: Vec<f64>,
    /// The local search did not converge from the best start.
    pub unknown: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TriState {
    Yes,
    No,
    Unknown,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LessNoisy {
    pub verdict: TriState,
    /// Largest `I(U; weaker) - I(U; stronger)` found with binary `U`.
    pub gap: f64,
    /// `p(u, x)` over `2 x nx`, row-major in `u`.
    pub witness: Vec<f64>,
    /// How a `yes` verdict was certified, if it was.
    pub certificate: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassReport {
    pub y_deterministic: bool,
    pub z_deterministic: bool,
    pub y_more_capable: MoreCapable,
    pub z_more_capable: MoreCapable,
    pub y_less_noisy: LessNoisy,
    pub z_less_noisy: LessNoisy,
}

fn gap_forms(vars: Vars, source: u32, stronger: Receiver) -> Form {
    let (s, w) = match stronger {
        Receiver::Y => (vars.y(), vars.z()),
        Receiver::Z => (vars.z(), vars.y()),
    };
    Form::new().mi(source, w, 0, 1.0).mi(source, s, 0, -1.0)
}

/// Searches for an input law under which `stronger` sees less than the
/// other receiver: a coarse simplex grid seeds multi-start ascent.
pub fn is_more_capable(c: &Channel, stronger: Receiver, cfg: &SearchConfig) -> MoreCapable {
    let vars = Vars::new(0);
    let prog = InfoProgram::new(&[], c, &[gap_forms(vars, vars.x(), stronger)]);
    let obj = InfoObjective::new(&prog, Param::Joint, Weighted(vec![1.0]));
    let seeds = grid_seeds(c.nx, cfg.grid_resolution, |p| prog.values(p)[0], 4);
    let res = maximize(&obj, &obj.domain(), cfg, &seeds);
    let gap = res.value;
    MoreCapable { verdict: gap <= WITNESS_GAP, gap, witness: res.point, unknown: !res.converged }
}

/// Best `keep` points of the finest simplex grid of denominator at most
/// `resolution` with at most 20000 points.
fn grid_seeds(dim: usize, resolution: u32, f: impl Fn(&[f64]) -> f64, keep: usize) -> Vec<Vec<f64>> {
    let mut k = resolution;
    while k > 1 && simplex_grid_count(dim, k) > 20_000 {
        k -= 1;
    }
    let Ok(grid) = simplex_grid(dim, k) else {
        return Vec::new();
    };
    let mut scored: Vec<(f64, Vec<f64>)> = grid.map(|p| (f(&p), p)).collect();
    // stable sort keeps enumeration order among ties
    scored.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap_or(std::cmp::Ordering::Equal));
    scored.into_iter().take(keep).map(|(_, p)| p).collect()
}

/// Less-noisy test restricted to binary `U`.
///
/// `no` carries a witness with gap above `WITNESS_GAP`. `yes` is returned
/// only with a certificate: identical output marginals, or `q(weaker | x)`
/// obtained from an invertible `q(stronger | x)` by a stochastic kernel.
pub fn less_noisy_test(c: &Channel, stronger: Receiver, cfg: &SearchConfig) -> LessNoisy {
    let vars = Vars::new(1);
    let prog = InfoProgram::new(&[2], c, &[gap_forms(vars, vars.aux(0), stronger)]);
    let obj = InfoObjective::new(&prog, Param::Joint, Weighted(vec![1.0]));
    let res = maximize(&obj, &obj.domain(), cfg, &[]);
    let (gap, witness) = (res.value, res.point);
    if gap > WITNESS_GAP {
        return LessNoisy { verdict: TriState::No, gap, witness, certificate: None };
    }
    let certificate = degradation_certificate(c, stronger);
    let verdict = if certificate.is_some() { TriState::Yes } else { TriState::Unknown };
    LessNoisy { verdict, gap, witness, certificate }
}

fn degradation_certificate(c: &Channel, stronger: Receiver) -> Option<String> {
    let s = c.marginal(stronger);
    let w = c.marginal(stronger.other());
    let same = s.len() == w.len()
        && s.iter().zip(&w).all(|(a, b)| a.len() == b.len() && a.iter().zip(b).all(|(u, v)| (u - v).abs() <= ROW_TOL));
    if same {
        return Some("identical output marginals".into());
    }
    if s.len() != s[0].len() {
        return None;
    }
    let inv = invert(&s)?;
    let d = compose_kernels(&inv, &w);
    let stochastic = d.iter().all(|r| {
        r.iter().all(|&v| v >= -1e-12) && (r.iter().sum::<f64>() - 1.0).abs() <= 1e-9
    });
    stochastic.then(|| "weaker output is a stochastic degradation of the stronger output".into())
}

/// Gauss-Jordan inverse with partial pivoting; `None` when singular.
fn invert(a: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    let n = a.len();
    let mut m: Vec<Vec<f64>> = a
        .iter()
        .enumerate()
        .map(|(i, r)| r.iter().copied().chain((0..n).map(|j| f64::from(u8::from(i == j)))).collect())
        .collect();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| m[i][col].abs().partial_cmp(&m[j][col].abs()).unwrap())?;
        if m[piv][col].abs() < 1e-12 {
            return None;
        }
        m.swap(col, piv);
        let p = m[col][col];
        m[col].iter_mut().for_each(|v| *v /= p);
        for r in 0..n {
            if r != col {
                let f = m[r][col];
                if f != 0.0 {
                    let pivot_row = m[col].clone();
                    m[r].iter_mut().zip(&pivot_row).for_each(|(v, pv)| *v -= f * pv);
                }
            }
        }
    }
    Some(m.into_iter().map(|r| r[n..].to_vec()).collect())
}

pub fn classify(c: &Channel, cfg: &SearchConfig) -> ClassReport {
    ClassReport {
        y_deterministic: c.is_deterministic(Receiver::Y),
        z_deterministic: c.is_deterministic(Receiver::Z),
        y_more_capable: is_more_capable(c, Receiver::Y, cfg),
        z_more_capable: is_more_capable(c, Receiver::Z, cfg),
        y_less_noisy: less_noisy_test(c, Receiver::Y, cfg),
        z_less_noisy: less_noisy_test(c, Receiver::Z, cfg),
    }
}
