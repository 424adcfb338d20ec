//! The pair-partition example: a product of two four-input channels on
//! which Marton's sum rate is 8/3 while the UV sum rate is at least 44/15.
//!
//! Each component has a deterministic binary receiver that learns whether
//! the input is in `{0, 1}` or `{2, 3}`, and a noisy six-ary receiver that
//! observes one of the three unordered pairs containing the input, chosen
//! uniformly. Pairs are indexed `{01}, {02}, {03}, {12}, {13}, {23}`.
//! Component 1 has `Y1` deterministic; component 2 is its mirror, with `Z2`
//! deterministic.

use serde::{Deserialize, Serialize};

use crate::bounds::{evaluate_uv_point, uv_sum_rate, UvAuxiliary, UvPoint};
use crate::channel::{deterministic_kernel, make_product, Channel, ProductChannel, Receiver};
use crate::error::{BoundsError, Result};
use crate::info::binary_entropy;
use crate::marton::{
    build_lambda_curve, marton_sum_rate, product_seeds, uniform, AuxiliaryJoint, Cardinalities, CurveOptions,
    LambdaCurve,
};
use crate::report::{Check, Relation};
use crate::search::{golden_section_min, GoldenConfig, SearchConfig};

pub const PAIRS: [(usize, usize); 6] = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)];

/// `{0, 1} -> 0`, `{2, 3} -> 1`.
pub fn class(x: usize) -> usize {
    x / 2
}

/// `{0, 2} -> 0`, `{1, 3} -> 1`.
pub fn pairing(x: usize) -> usize {
    x % 2
}

pub fn pair_kernel() -> Vec<Vec<f64>> {
    (0..4)
        .map(|x| PAIRS.iter().map(|&(i, j)| if i == x || j == x { 1.0 / 3.0 } else { 0.0 }).collect())
        .collect()
}

/// One component, with the deterministic receiver as given.
pub fn component(deterministic: Receiver) -> Channel {
    let det = deterministic_kernel(&[0, 0, 1, 1], 2);
    let noisy = pair_kernel();
    let c = match deterministic {
        Receiver::Y => Channel::from_marginals(&det, &noisy),
        Receiver::Z => Channel::from_marginals(&noisy, &det),
    };
    c.expect("component kernels are stochastic")
}

/// `Y1` deterministic in component 1, `Z2` deterministic in component 2.
pub fn build_product() -> ProductChannel {
    make_product(&component(Receiver::Y), &component(Receiver::Z)).expect("16-input product fits")
}

/// `(1/3) H2(x) - log2 3`.
pub fn f_closed_form(x: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&x) {
        return Err(BoundsError::Domain { value: x, domain: "[0, 1]" });
    }
    Ok(binary_entropy(x) / 3.0 - 3f64.log2())
}

/// `λ ↦ max λ-SR` at the uniform input: `5/3 - 2λ/3` then `4/3` when `Z`
/// is deterministic, and the same curve at `1 - λ` when `Y` is.
pub fn lambda_curve_analytic(deterministic: Receiver, lambda: f64) -> f64 {
    let l = match deterministic {
        Receiver::Z => lambda,
        Receiver::Y => 1.0 - lambda,
    };
    if l <= 0.5 {
        5.0 / 3.0 - 2.0 * l / 3.0
    } else {
        4.0 / 3.0
    }
}

/// Left and right slopes of [`lambda_curve_analytic`].
fn analytic_slopes(deterministic: Receiver, lambda: f64) -> (f64, f64) {
    let (l, sign) = match deterministic {
        Receiver::Z => (lambda, 1.0),
        Receiver::Y => (1.0 - lambda, -1.0),
    };
    let left = if l <= 0.5 { -2.0 / 3.0 } else { 0.0 };
    let right = if l < 0.5 { -2.0 / 3.0 } else { 0.0 };
    if sign > 0.0 {
        (left, right)
    } else {
        (-right, -left)
    }
}

/// A maximizer of λ-SR at the uniform input, on the λ-SR cardinality
/// profile of the component.
pub fn analytic_maximizer(deterministic: Receiver, lambda: f64) -> AuxiliaryJoint {
    let px = uniform(4);
    let c = component(deterministic);
    let card = Cardinalities::lambda_sr(&c);
    let dims = (card.nu, card.nv, card.nw);
    let low = match deterministic {
        Receiver::Y => lambda <= 0.5,
        Receiver::Z => lambda >= 0.5,
    };
    let a = match (deterministic, low) {
        // U = Y, V = pairing
        (Receiver::Y, true) => AuxiliaryJoint::deterministic(&px, dims, class, pairing, |_| 0),
        // W = Y, V = X
        (Receiver::Y, false) => AuxiliaryJoint::deterministic(&px, dims, |_| 0, |x| x, class),
        // U = pairing, V = Z
        (Receiver::Z, true) => AuxiliaryJoint::deterministic(&px, dims, pairing, class, |_| 0),
        // W = Z, U = X
        (Receiver::Z, false) => AuxiliaryJoint::deterministic(&px, dims, |x| x, |_| 0, class),
    };
    a.expect("labels fit the profile")
}

/// The UV auxiliaries on the product: `U = (Y1, U2~)`, `V = (V1~, Z2)`
/// where `V1~ = (V1', Q1)` and `U2~ = (U2', Q2)`. With probability `q0`
/// the primed variable is the pairing of the input, otherwise the input
/// itself. Each tilde variable is flattened to six symbols: the two pairing
/// labels, then the four inputs.
pub fn uv_witness_auxiliaries(q0: f64) -> Result<UvAuxiliary> {
    if !(0.0..=1.0).contains(&q0) {
        return Err(BoundsError::Domain { value: q0, domain: "[0, 1]" });
    }
    let (nu, nv, nx) = (12, 12, 16);
    let mut p = vec![0.0; nu * nv * nx];
    let mix = [(q0, true), (1.0 - q0, false)];
    for x1 in 0..4 {
        for x2 in 0..4 {
            for &(p1, pair1) in &mix {
                for &(p2, pair2) in &mix {
                    let v1 = if pair1 { pairing(x1) } else { 2 + x1 };
                    let u2 = if pair2 { pairing(x2) } else { 2 + x2 };
                    let u = class(x1) * 6 + u2;
                    let v = v1 * 2 + class(x2);
                    p[(u * nv + v) * nx + x1 * 4 + x2] += p1 * p2 / 16.0;
                }
            }
        }
    }
    UvAuxiliary::new(nu, nv, nx, p)
}

/// Search budgets for [`verify_separation`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SeparationConfig {
    /// Searches on a single component.
    pub component: SearchConfig,
    /// Searches on the 16-input product.
    pub product: SearchConfig,
    /// The free UV maximization.
    pub uv: SearchConfig,
    /// λ grid of the component curves whose maximizers seed the product.
    pub component_grid: Vec<f64>,
    pub golden: GoldenConfig,
}

impl SeparationConfig {
    pub fn with_seed(seed: u64) -> Self {
        Self {
            component: SearchConfig::default().with_restarts(32).with_seed(seed),
            product: SearchConfig::default().with_restarts(2).with_max_iters(300).with_seed(seed),
            uv: SearchConfig::default().with_restarts(2).with_max_iters(300).with_seed(seed),
            component_grid: vec![0.0, 0.25, 0.5, 0.75, 1.0],
            golden: GoldenConfig::default(),
        }
    }
}

impl Default for SeparationConfig {
    fn default() -> Self {
        Self::with_seed(0)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SeparationReport {
    pub analytic_lambda_star: f64,
    pub analytic_sum_rate: f64,
    pub marton_sum_rate: f64,
    pub marton_lambda_star: f64,
    pub uv_at_witness: UvPoint,
    pub uv_free: f64,
    pub checks: Vec<Check>,
    pub pass: bool,
}

/// Component curves on `grid`, component 1 first.
pub fn component_curves(cfg: &SearchConfig, grid: &[f64]) -> Result<[LambdaCurve; 2]> {
    let opts = CurveOptions::default();
    Ok([
        build_lambda_curve(&component(Receiver::Y), grid, cfg, &opts)?,
        build_lambda_curve(&component(Receiver::Z), grid, cfg, &opts)?,
    ])
}

/// Marton's sum rate on the product, seeded by products of the component
/// maximizers found on `curves`.
pub fn product_marton(
    pc: &ProductChannel,
    curves: &[LambdaCurve; 2],
    cfg: &SearchConfig,
    golden: GoldenConfig,
) -> Result<crate::marton::MartonSumRate> {
    let m1: Vec<AuxiliaryJoint> = curves[0].samples.iter().map(|s| s.maximizer.clone()).collect();
    let m2: Vec<AuxiliaryJoint> = curves[1].samples.iter().map(|s| s.maximizer.clone()).collect();
    let card = Cardinalities::product_of(&Cardinalities::lambda_sr(&pc.c1), &Cardinalities::lambda_sr(&pc.c2));
    let opts = CurveOptions { card: Some(card), px: None, pool_seeds: product_seeds(&m1, &m2)?, golden };
    marton_sum_rate(pc.flattened(), cfg, &opts)
}

pub fn verify_separation(cfg: &SeparationConfig) -> Result<SeparationReport> {
    let pc = build_product();
    let mut checks = Vec::new();

    checks.push(Check::flag("component 1 Y deterministic", pc.c1.is_deterministic(Receiver::Y)));
    checks.push(Check::flag("component 1 Z not deterministic", !pc.c1.is_deterministic(Receiver::Z)));
    checks.push(Check::flag("component 2 Z deterministic", pc.c2.is_deterministic(Receiver::Z)));
    checks.push(Check::flag("product is reversely semi-deterministic", pc.is_reversely_semi_deterministic()));

    // exact component quantities at the uniform input
    let u = uniform(4);
    let y1 = AuxiliaryJoint::deterministic(&u, (1, 1, 2), |_| 0, |_| 0, class)?;
    let sr1 = crate::marton::LambdaSr::new(&pc.c1, Cardinalities::custom(1, 1, 2));
    let parts = sr1.parts(&y1)?;
    // W = Y1: λ-SR at λ = 1 is H(Y1) + I(X1;Z1|Y1), the rest is I(X1;Z1|Y1)
    checks.push(Check::new("H(Y1)", parts.i_wy, Relation::Within, 1.0, 1e-12));
    let wv = AuxiliaryJoint::deterministic(&u, (1, 4, 2), |_| 0, |x| x, class)?;
    let xz_given_y = crate::marton::lambda_sr_value(&pc.c1, &wv, 1.0)? - 1.0;
    checks.push(Check::new("I(X1;Z1|Y1)", xz_given_y, Relation::Within, 2.0 / 3.0, 1e-12));
    let u2 = AuxiliaryJoint::deterministic(&u, (2, 1, 1), pairing, |_| 0, |_| 0)?;
    let uy = crate::marton::lambda_sr_value(&pc.c2, &u2, 0.5)?;
    checks.push(Check::new("I(U2;Y2) at the pairing", uy, Relation::Within, 1.0 / 3.0, 1e-12));

    // analytic sum of the component curves
    let golden = golden_section_min(
        |l| {
            let v = lambda_curve_analytic(Receiver::Y, l) + lambda_curve_analytic(Receiver::Z, l);
            let (a1, b1) = analytic_slopes(Receiver::Y, l);
            let (a2, b2) = analytic_slopes(Receiver::Z, l);
            let (left, right) = (a1 + a2, b1 + b2);
            let s = if left <= 0.0 && right >= 0.0 { 0.0 } else { 0.5 * (left + right) };
            (v, Some(s))
        },
        &GoldenConfig { tol: 1e-12, ..GoldenConfig::default() },
    );
    checks.push(Check::new("analytic Marton sum rate", golden.value, Relation::Within, 8.0 / 3.0, 1e-12));
    checks.push(Check::new("analytic lambda*", golden.argmin, Relation::Within, 0.5, 1e-12));

    // numeric Marton sum rate on the product
    let curves = component_curves(&cfg.component, &cfg.component_grid)?;
    let m = product_marton(&pc, &curves, &cfg.product, cfg.golden)?;
    checks.push(Check::new("numeric Marton sum rate", m.value, Relation::Within, 8.0 / 3.0, 5e-3).with_converged(m.converged));
    checks.push(Check::new("numeric lambda*", m.lambda_star, Relation::Within, 0.5, 5e-2));

    // UV at the explicit auxiliaries
    let w = uv_witness_auxiliaries(0.8)?;
    let pt = evaluate_uv_point(pc.flattened(), &w)?;
    checks.push(Check::new("UV witness R1 bound", pt.r1, Relation::Within, 22.0 / 15.0, 1e-9));
    checks.push(Check::new("UV witness R2 bound", pt.r2, Relation::Within, 22.0 / 15.0, 1e-9));
    checks.push(Check::new("UV witness sum bound via U", pt.sum_u, Relation::Within, 44.0 / 15.0, 1e-9));
    checks.push(Check::new("UV witness sum bound via V", pt.sum_v, Relation::Within, 44.0 / 15.0, 1e-9));
    checks.push(Check::new("UV witness sum rate", pt.sum_rate(), Relation::Within, 44.0 / 15.0, 1e-9));
    let px_uniform = w.px().iter().all(|&p| (p - 1.0 / 16.0).abs() < 1e-15);
    checks.push(Check::flag("UV witness input is uniform", px_uniform));

    let free = uv_sum_rate(pc.flattened(), &cfg.uv, &[w])?;
    checks.push(
        Check::new("free UV sum rate", free.value, Relation::AtLeast, 44.0 / 15.0, 1e-6).with_converged(free.converged),
    );
    checks.push(Check::new("UV minus Marton", free.value - m.value, Relation::AtLeast, 4.0 / 15.0, 5e-3));

    let pass = checks.iter().all(|c| c.pass);
    Ok(SeparationReport {
        analytic_lambda_star: golden.argmin,
        analytic_sum_rate: golden.value,
        marton_sum_rate: m.value,
        marton_lambda_star: m.lambda_star,
        uv_at_witness: pt,
        uv_free: free.value,
        checks,
        pass,
    })
}
