//! Probability tensors and Shannon quantities in bits.
//!
//! Zero-mass cells are skipped exactly when evaluating `-p log2 p`, so
//! deterministic channels (which put exact zeros everywhere) need no
//! flooring.

use serde::{Deserialize, Serialize};

use crate::error::{BoundsError, Result};

/// Normalization tolerance enforced at construction.
pub const NORM_TOL: f64 = 1e-12;

/// Values of `I(A;B|C)` in `[-MI_CLAMP, 0)` are reported as exactly zero.
pub const MI_CLAMP: f64 = 1e-10;

/// `-Σ p log2 p` over a slice, skipping zeros.
pub fn entropy_bits(p: &[f64]) -> f64 {
    let mut h = 0.0;
    for &v in p {
        if v > 0.0 {
            h -= v * v.log2();
        }
    }
    h
}

/// Binary entropy `H2(x)` in bits.
pub fn binary_entropy(x: f64) -> f64 {
    entropy_bits(&[x, 1.0 - x])
}

/// `H(Σ w_j o_j) - Σ w_j H(o_j)` for output laws `o_j`, the information a
/// mixture label carries about the output. Concave in `w`; the gradient is
/// written into `grad` when given.
pub fn mixture_information(outs: &[Vec<f64>], w: &[f64], grad: Option<&mut [f64]>) -> f64 {
    let n = outs[0].len();
    let mut m = vec![0.0; n];
    for (o, &wj) in outs.iter().zip(w) {
        for (mi, oi) in m.iter_mut().zip(o) {
            *mi += wj * oi;
        }
    }
    let hs: Vec<f64> = outs.iter().map(|o| entropy_bits(o)).collect();
    let t = entropy_bits(&m) - w.iter().zip(&hs).map(|(a, b)| a * b).sum::<f64>();
    if let Some(g) = grad {
        let d: Vec<f64> = m.iter().map(|&v| -(v.max(1e-14).log2() + std::f64::consts::LOG2_E)).collect();
        for (j, o) in outs.iter().enumerate() {
            g[j] = o.iter().zip(&d).map(|(a, b)| a * b).sum::<f64>() - hs[j];
        }
    }
    t
}

/// Output law of input `px` through the row-stochastic `kernel`.
pub fn output_law(px: &[f64], kernel: &[Vec<f64>]) -> Vec<f64> {
    let mut o = vec![0.0; kernel[0].len()];
    for (p, row) in px.iter().zip(kernel) {
        for (oi, k) in o.iter_mut().zip(row) {
            *oi += p * k;
        }
    }
    o
}

/// A joint probability mass function over a finite product alphabet, stored
/// row-major (last axis fastest).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbTensor {
    dims: Vec<usize>,
    values: Vec<f64>,
}

impl ProbTensor {
    /// Builds a tensor, rejecting negative entries and total mass further
    /// than [`NORM_TOL`] from one.
    pub fn new(dims: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        let t = Self::unchecked(dims, values)?;
        let total: f64 = t.values.iter().sum();
        if (total - 1.0).abs() > NORM_TOL {
            return Err(BoundsError::NotNormalized { total, tol: NORM_TOL });
        }
        Ok(t)
    }

    /// Builds a tensor from nonnegative weights and rescales them to unit
    /// mass. This is the only place where renormalization happens.
    pub fn normalized(dims: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        let mut t = Self::unchecked(dims, values)?;
        let total: f64 = t.values.iter().sum();
        if total <= 0.0 {
            return Err(BoundsError::NotNormalized { total, tol: NORM_TOL });
        }
        t.values.iter_mut().for_each(|v| *v /= total);
        Ok(t)
    }

    fn unchecked(dims: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        if dims.iter().any(|&d| d == 0) {
            return Err(BoundsError::Shape(format!("zero-sized axis in {dims:?}")));
        }
        let n: usize = dims.iter().product();
        if n != values.len() {
            return Err(BoundsError::Shape(format!(
                "dims {dims:?} need {n} values, got {}",
                values.len()
            )));
        }
        if let Some((index, &value)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !(v.is_finite() && **v >= 0.0))
        {
            return Err(BoundsError::InvalidEntry { index, value });
        }
        Ok(Self { dims, values })
    }

    /// Point mass at the given multi-index.
    pub fn point_mass(dims: Vec<usize>, at: &[usize]) -> Result<Self> {
        let n: usize = dims.iter().product();
        let mut values = vec![0.0; n];
        let idx = flat_index(&dims, at)?;
        values[idx] = 1.0;
        Self::new(dims, values)
    }

    pub fn uniform(dims: Vec<usize>) -> Result<Self> {
        let n: usize = dims.iter().product();
        Self::new(dims, vec![1.0 / n as f64; n])
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn ndim(&self) -> usize {
        self.dims.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Probability at a multi-index.
    pub fn get(&self, at: &[usize]) -> Result<f64> {
        Ok(self.values[flat_index(&self.dims, at)?])
    }

    fn check_axes(&self, axes: &[usize]) -> Result<()> {
        for &a in axes {
            if a >= self.ndim() {
                return Err(BoundsError::InvalidAxis { axis: a, ndim: self.ndim() });
            }
        }
        Ok(())
    }

    /// Marginal over `axes`, in the order given.
    pub fn marginal(&self, axes: &[usize]) -> Result<ProbTensor> {
        self.check_axes(axes)?;
        check_disjoint(&[axes])?;
        let dims: Vec<usize> = axes.iter().map(|&a| self.dims[a]).collect();
        let values = self.marginal_values(axes);
        Ok(ProbTensor { dims, values })
    }

    fn marginal_values(&self, axes: &[usize]) -> Vec<f64> {
        let strides = strides(&self.dims);
        let out_dims: Vec<usize> = axes.iter().map(|&a| self.dims[a]).collect();
        let out_strides = strides_of(&out_dims);
        let mut out = vec![0.0; out_dims.iter().product::<usize>().max(1)];
        for (flat, &v) in self.values.iter().enumerate() {
            if v == 0.0 {
                continue;
            }
            let mut o = 0;
            for (k, &a) in axes.iter().enumerate() {
                let coord = (flat / strides[a]) % self.dims[a];
                o += coord * out_strides[k];
            }
            out[o] += v;
        }
        out
    }

    /// Reorders axes so that new axis `k` is old axis `perm[k]`.
    pub fn permute_axes(&self, perm: &[usize]) -> Result<ProbTensor> {
        if perm.len() != self.ndim() {
            return Err(BoundsError::Shape(format!(
                "permutation of length {} for {} axes",
                perm.len(),
                self.ndim()
            )));
        }
        self.check_axes(perm)?;
        check_disjoint(&[perm])?;
        let dims: Vec<usize> = perm.iter().map(|&a| self.dims[a]).collect();
        Ok(ProbTensor { dims, values: self.marginal_values(perm) })
    }

    /// Appends a new axis distributed as `kernel[x][·]` where `x` is the
    /// coordinate along `axis`: the contraction `p(..., x, ...) k(new | x)`.
    pub fn with_kernel(&self, axis: usize, kernel: &[Vec<f64>]) -> Result<ProbTensor> {
        self.check_axes(&[axis])?;
        if kernel.len() != self.dims[axis] {
            return Err(BoundsError::Shape(format!(
                "kernel has {} rows, axis {axis} has size {}",
                kernel.len(),
                self.dims[axis]
            )));
        }
        let m = kernel.first().map_or(0, |r| r.len());
        if m == 0 || kernel.iter().any(|r| r.len() != m) {
            return Err(BoundsError::Shape("ragged or empty kernel".into()));
        }
        let strides = strides(&self.dims);
        let mut values = Vec::with_capacity(self.values.len() * m);
        for (flat, &v) in self.values.iter().enumerate() {
            let x = (flat / strides[axis]) % self.dims[axis];
            values.extend(kernel[x].iter().map(|k| v * k));
        }
        let mut dims = self.dims.clone();
        dims.push(m);
        ProbTensor::new(dims, values)
    }

    fn joint_entropy(&self, axes: &[usize]) -> f64 {
        if axes.is_empty() {
            return 0.0;
        }
        entropy_bits(&self.marginal_values(axes))
    }
}

fn strides_of(dims: &[usize]) -> Vec<usize> {
    let mut s = vec![1; dims.len()];
    for k in (0..dims.len().saturating_sub(1)).rev() {
        s[k] = s[k + 1] * dims[k + 1];
    }
    s
}

fn strides(dims: &[usize]) -> Vec<usize> {
    strides_of(dims)
}

fn flat_index(dims: &[usize], at: &[usize]) -> Result<usize> {
    if at.len() != dims.len() {
        return Err(BoundsError::Shape(format!("index {at:?} for dims {dims:?}")));
    }
    let mut idx = 0;
    for (k, (&i, &d)) in at.iter().zip(dims).enumerate() {
        if i >= d {
            return Err(BoundsError::InvalidAxis { axis: k, ndim: dims.len() });
        }
        idx = idx * d + i;
    }
    Ok(idx)
}

fn check_disjoint(sets: &[&[usize]]) -> Result<()> {
    let mut seen = Vec::new();
    for set in sets {
        for &a in *set {
            if seen.contains(&a) {
                return Err(BoundsError::OverlappingAxes(a));
            }
            seen.push(a);
        }
    }
    Ok(())
}

/// `H(over | given)` in bits.
pub fn entropy(p: &ProbTensor, over: &[usize], given: &[usize]) -> Result<f64> {
    p.check_axes(over)?;
    p.check_axes(given)?;
    check_disjoint(&[over, given])?;
    let both: Vec<usize> = over.iter().chain(given).copied().collect();
    let h = p.joint_entropy(&both) - p.joint_entropy(given);
    Ok(h.max(0.0))
}

/// `I(A;B|C)` in bits, clamped to zero when within [`MI_CLAMP`] below it.
pub fn mutual_information(p: &ProbTensor, a: &[usize], b: &[usize], given: &[usize]) -> Result<f64> {
    for s in [a, b, given] {
        p.check_axes(s)?;
    }
    check_disjoint(&[a, b, given])?;
    let ac: Vec<usize> = a.iter().chain(given).copied().collect();
    let bc: Vec<usize> = b.iter().chain(given).copied().collect();
    let abc: Vec<usize> = a.iter().chain(b).chain(given).copied().collect();
    let i = p.joint_entropy(&ac) + p.joint_entropy(&bc) - p.joint_entropy(&abc) - p.joint_entropy(given);
    Ok(if i < 0.0 && i > -MI_CLAMP { 0.0 } else { i })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn uniform_over_four_is_two_bits() {
        let p = ProbTensor::uniform(vec![4]).unwrap();
        assert!((entropy(&p, &[0], &[]).unwrap() - 2.0).abs() < 1e-15);
    }

    #[test]
    fn point_mass_has_zero_entropy() {
        let p = ProbTensor::point_mass(vec![5], &[3]).unwrap();
        assert_eq!(entropy(&p, &[0], &[]).unwrap(), 0.0);
    }

    #[test]
    fn third_two_thirds() {
        // log2(3) - 2/3, evaluated independently in extended precision.
        let p = ProbTensor::new(vec![2], vec![1.0 / 3.0, 2.0 / 3.0]).unwrap();
        let h = entropy(&p, &[0], &[]).unwrap();
        assert!((h - 0.918_295_834_054_489_6).abs() < 1e-14, "{h}");
    }

    #[test]
    fn independent_bits_have_zero_information() {
        let p = ProbTensor::uniform(vec![2, 2]).unwrap();
        assert_eq!(mutual_information(&p, &[0], &[1], &[]).unwrap(), 0.0);
    }

    #[test]
    fn self_information_of_four_symbols() {
        let mut v = vec![0.0; 16];
        for i in 0..4 {
            v[i * 4 + i] = 0.25;
        }
        let p = ProbTensor::new(vec![4, 4], v).unwrap();
        assert!((mutual_information(&p, &[0], &[1], &[]).unwrap() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn rejects_bad_tensors_and_axes() {
        assert!(matches!(
            ProbTensor::new(vec![2], vec![0.5, 0.6]),
            Err(BoundsError::NotNormalized { .. })
        ));
        assert!(matches!(
            ProbTensor::new(vec![2], vec![1.5, -0.5]),
            Err(BoundsError::InvalidEntry { .. })
        ));
        let p = ProbTensor::uniform(vec![2, 3]).unwrap();
        assert!(matches!(entropy(&p, &[2], &[]), Err(BoundsError::InvalidAxis { .. })));
        assert!(matches!(
            mutual_information(&p, &[0], &[0], &[]),
            Err(BoundsError::OverlappingAxes(0))
        ));
        let n = ProbTensor::normalized(vec![2], vec![1.0, 3.0]).unwrap();
        assert_eq!(n.values(), &[0.25, 0.75]);
    }

    fn random_tensor(dims: Vec<usize>, raw: &[f64]) -> ProbTensor {
        let n: usize = dims.iter().product();
        let w: Vec<f64> = raw.iter().take(n).map(|v| v * v).collect();
        ProbTensor::normalized(dims, w).unwrap()
    }

    proptest! {
        #[test]
        fn chain_rule_and_symmetry(raw in proptest::collection::vec(0.0f64..1.0, 24)) {
            prop_assume!(raw.iter().map(|v| v * v).sum::<f64>() > 1e-3);
            let p = random_tensor(vec![2, 3, 4], &raw);
            let hab = entropy(&p, &[0, 1], &[]).unwrap();
            let ha = entropy(&p, &[0], &[]).unwrap();
            let hb_a = entropy(&p, &[1], &[0]).unwrap();
            prop_assert!((hab - ha - hb_a).abs() < 1e-10);
            let i_ab = mutual_information(&p, &[0], &[1], &[2]).unwrap();
            let i_ba = mutual_information(&p, &[1], &[0], &[2]).unwrap();
            prop_assert!(i_ab >= -1e-10);
            prop_assert!((i_ab - i_ba).abs() < 1e-10);
        }

        #[test]
        fn permutation_invariance(raw in proptest::collection::vec(0.0f64..1.0, 24)) {
            prop_assume!(raw.iter().map(|v| v * v).sum::<f64>() > 1e-3);
            let p = random_tensor(vec![2, 3, 4], &raw);
            // new axis k is old axis perm[k]; old axis j lives at inv[j]
            let perm = [2, 0, 1];
            let inv = [1, 2, 0];
            let q = p.permute_axes(&perm).unwrap();
            let a = mutual_information(&p, &[0], &[2], &[1]).unwrap();
            let b = mutual_information(&q, &[inv[0]], &[inv[2]], &[inv[1]]).unwrap();
            prop_assert!((a - b).abs() < 1e-12);
            let ha = entropy(&p, &[1, 2], &[0]).unwrap();
            let hb = entropy(&q, &[inv[1], inv[2]], &[inv[0]]).unwrap();
            prop_assert!((ha - hb).abs() < 1e-12);
        }

        #[test]
        fn data_processing(raw in proptest::collection::vec(0.0f64..1.0, 3),
                           k1 in proptest::collection::vec(0.01f64..1.0, 12),
                           k2 in proptest::collection::vec(0.01f64..1.0, 12)) {
            prop_assume!(raw.iter().sum::<f64>() > 1e-3);
            let pa = ProbTensor::normalized(vec![3], raw.clone()).unwrap();
            let rows = |k: &[f64], n: usize, m: usize| -> Vec<Vec<f64>> {
                (0..n).map(|i| {
                    let r = &k[i * m..(i + 1) * m];
                    let s: f64 = r.iter().sum();
                    r.iter().map(|v| v / s).collect()
                }).collect()
            };
            let pab = pa.with_kernel(0, &rows(&k1, 3, 4)).unwrap();
            let pabc = pab.with_kernel(1, &rows(&k2, 4, 3)).unwrap();
            let i_ac = mutual_information(&pabc, &[0], &[2], &[]).unwrap();
            let i_ab = mutual_information(&pabc, &[0], &[1], &[]).unwrap();
            prop_assert!(i_ac <= i_ab + 1e-10);
        }
    }
}
