//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails.

use std::process::Command;
use std::time::Instant;

use bcbounds::bounds::{lp_support, region, region_support, ProductAuxiliary, RegionKind};
use bcbounds::channel::{
    bec_kernel, bsc_kernel, compose_kernels, deterministic_kernel, less_noisy_test, is_more_capable, Channel,
    Receiver, TriState,
};
use bcbounds::functional::{at_input_joint, Form, InfoObjective, InfoProgram, Param, SoftMin, Vars, Weighted};
use bcbounds::info::{binary_entropy, entropy_bits};
use bcbounds::marton::{
    build_lambda_curve, check_factorization, endpoint_sr, lambda_sr_global, marton_sum_rate, structured_seeds,
    uniform, AuxiliaryJoint, Cardinalities, CurveOptions, LambdaSr,
};
use bcbounds::minmax::{check_min_max_equality, MinMaxConfig};
use bcbounds::search::{maximize, simplex_grid, Objective, SearchConfig};
use bcbounds::separation::{build_product, component, lambda_curve_analytic, PAIRS};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Dirichlet, Distribution};
use serde_json::Value;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn random_kernel(rng: &mut ChaCha8Rng, nx: usize, n: usize) -> Vec<Vec<f64>> {
    let d = Dirichlet::new(&vec![1.0; n]).unwrap();
    (0..nx).map(|_| d.sample(rng)).collect()
}

fn random_joint_channel(rng: &mut ChaCha8Rng, nx: usize, ny: usize, nz: usize) -> Channel {
    let flat: Vec<f64> = random_kernel(rng, nx, ny * nz).into_iter().flatten().collect();
    Channel::new(nx, ny, nz, flat).unwrap()
}

fn random_tiny_channels() -> Vec<Channel> {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    (0..5).map(|_| random_joint_channel(&mut rng, 2, 2, 2)).collect()
}

/// Three products, each with one deterministic link.
fn factorization_pairs() -> Vec<(Channel, Channel)> {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let c1 = Channel::from_marginals(&deterministic_kernel(&[0, 1, 1], 2), &random_kernel(&mut rng, 3, 2)).unwrap();
    let c2 = random_joint_channel(&mut rng, 2, 2, 2);
    let c3 = random_joint_channel(&mut rng, 2, 2, 3);
    let c4 = Channel::from_marginals(&random_kernel(&mut rng, 3, 2), &deterministic_kernel(&[1, 0, 1], 2)).unwrap();
    let c5 = Channel::from_marginals(&random_kernel(&mut rng, 3, 3), &deterministic_kernel(&[0, 0, 1], 2)).unwrap();
    let c6 = Channel::from_marginals(&deterministic_kernel(&[1, 0], 2), &random_kernel(&mut rng, 2, 3)).unwrap();
    vec![(c1, c2), (c3, c4), (c5, c6)]
}

fn degraded_pair() -> Channel {
    let y = bsc_kernel(0.1);
    Channel::from_marginals(&y, &compose_kernels(&y, &bsc_kernel(0.2))).unwrap()
}

fn erasure_symmetric_pair() -> Channel {
    Channel::from_marginals(&bec_kernel(0.4), &bsc_kernel(0.1)).unwrap()
}

fn run_verify_example() -> (Vec<u8>, bool, f64) {
    let t = Instant::now();
    let out = Command::new(env!("CARGO_BIN_EXE_bcbounds")).arg("verify-example").output().expect("binary runs");
    (out.stdout, out.status.success(), t.elapsed().as_secs_f64())
}

fn criterion_1(stdout: &[u8], ok: bool, secs: f64) -> Outcome {
    let Ok(report) = serde_json::from_slice::<Value>(stdout) else {
        return outcome(false, "report is not JSON".into());
    };
    let r = &report["results"];
    let num = |k: &str| r[k].as_f64().unwrap_or(f64::NAN);
    let analytic = num("analytic_sum_rate");
    let lambda = num("analytic_lambda_star");
    let numeric = num("marton_sum_rate");
    let witness = r["uv_at_witness"].as_object().map(|p| {
        let g = |k: &str| p[k].as_f64().unwrap_or(f64::NAN);
        (g("r1") + g("r2")).min(g("sum_u")).min(g("sum_v"))
    });
    let witness = witness.unwrap_or(f64::NAN);
    let free = num("uv_free");
    let pass = ok
        && report["pass"] == Value::Bool(true)
        && (analytic - 8.0 / 3.0).abs() <= 1e-12
        && (lambda - 0.5).abs() <= 1e-12
        && (numeric - 8.0 / 3.0).abs() <= 5e-3
        && (witness - 44.0 / 15.0).abs() <= 1e-9
        && free >= 44.0 / 15.0 - 1e-6
        && secs <= 300.0;
    outcome(
        pass,
        format!(
            "analytic {analytic:.12} at lambda {lambda}, numeric {numeric:.9}, UV witness {witness:.12}, free UV {free:.9}, {secs:.1} s"
        ),
    )
}

fn criterion_2() -> Outcome {
    let c = component(Receiver::Z);
    let grid: Vec<f64> = (0..=10).map(|i| i as f64 / 10.0).collect();
    let curve = build_lambda_curve(&c, &grid, &SearchConfig::default(), &CurveOptions::default()).unwrap();
    let formula = |l: f64| if l <= 0.5 { 5.0 / 3.0 - 2.0 * l / 3.0 } else { 4.0 / 3.0 };
    let err = curve.samples.iter().map(|s| (s.value - formula(s.lambda)).abs()).fold(0.0, f64::max);
    // midpoint convexity of the analytic curve on a fine grid
    let fine: Vec<f64> = (0..=100).map(|i| i as f64 / 100.0).collect();
    let mut convex = true;
    for (i, &a) in fine.iter().enumerate() {
        for &b in &fine[i + 1..] {
            let f = |l| lambda_curve_analytic(Receiver::Z, l);
            if f(0.5 * (a + b)) > 0.5 * (f(a) + f(b)) + 1e-6 {
                convex = false;
            }
        }
    }
    let analytic_matches = grid.iter().all(|&l| (lambda_curve_analytic(Receiver::Z, l) - formula(l)).abs() < 1e-15);
    outcome(
        err <= 5e-3 && convex && analytic_matches,
        format!("max |numeric - formula| = {err:.3e} over 11 points, analytic convex: {convex}"),
    )
}

/// `H(Z) - H(Y)` on the component with `Z` deterministic, at input law `q`.
fn phi(q: &[f64]) -> f64 {
    let hz = entropy_bits(&[q[0] + q[1], q[2] + q[3]]);
    let y: Vec<f64> = PAIRS.iter().map(|&(i, j)| (q[i] + q[j]) / 3.0).collect();
    hz - entropy_bits(&y)
}

/// Upper concave envelope of `phi` at `px` by LP over a simplex grid,
/// polished by ascent on `p(u|x)` with `|U| = 8`.
fn f_oracle(px: &[f64], grid: &[Vec<f64>], prog: &InfoProgram) -> f64 {
    use minilp::{ComparisonOp, OptimizationDirection, Problem};
    let mut lp = Problem::new(OptimizationDirection::Maximize);
    let vars: Vec<_> = grid.iter().map(|q| lp.add_var(phi(q), (0.0, f64::INFINITY))).collect();
    for x in 0..4 {
        let row: Vec<_> = vars.iter().zip(grid).map(|(&v, q)| (v, q[x])).collect();
        lp.add_constraint(row.as_slice(), ComparisonOp::Eq, px[x]);
    }
    let sol = lp.solve().expect("the LP is feasible");
    let mut atoms: Vec<(f64, &Vec<f64>)> =
        vars.iter().zip(grid).map(|(&v, q)| (sol[v], q)).filter(|(t, _)| *t > 1e-12).collect();
    atoms.sort_by(|a, b| b.0.total_cmp(&a.0));
    atoms.truncate(8);
    // p(u|x) from the atoms; inputs without mass get a uniform label
    let mut cond = vec![0.0; 4 * 8];
    for x in 0..4 {
        if px[x] > 0.0 {
            for (u, (t, q)) in atoms.iter().enumerate() {
                cond[x * 8 + u] = t * q[x] / px[x];
            }
            let s: f64 = cond[x * 8..x * 8 + 8].iter().sum();
            cond[x * 8..x * 8 + 8].iter_mut().for_each(|v| *v /= s);
        } else {
            cond[x * 8..x * 8 + 8].iter_mut().for_each(|v| *v = 1.0 / 8.0);
        }
    }
    let start = prog.values(&at_input_joint(px, &cond, 8))[0];
    let obj = InfoObjective::new(prog, Param::AtInput(px.to_vec()), Weighted(vec![1.0]));
    let cfg = SearchConfig::default().with_restarts(4).with_max_iters(500);
    let res = maximize(&obj, &obj.domain(), &cfg, &[cond]);
    let polished = prog.values(&obj.joint(&res.point))[0];
    sol.objective().max(start).max(polished)
}

fn criterion_3() -> Outcome {
    let c = component(Receiver::Z);
    let v = Vars::new(1);
    let form = Form::new().h_cond(v.z(), v.aux(0), 1.0).h_cond(v.y(), v.aux(0), -1.0);
    let prog = InfoProgram::new(&[8], &c, &[form]);
    let grid: Vec<Vec<f64>> = simplex_grid(4, 32).unwrap().collect();
    let mut worst: f64 = 0.0;
    for k in 0..=32 {
        let x = k as f64 / 32.0;
        let px = [x / 2.0, x / 2.0, (1.0 - x) / 2.0, (1.0 - x) / 2.0];
        let closed = binary_entropy(x) / 3.0 - 3f64.log2();
        worst = worst.max((f_oracle(&px, &grid, &prog) - closed).abs());
    }
    outcome(worst <= 1e-6, format!("max |oracle - closed form| = {worst:.3e} at 33 points"))
}

fn criterion_4() -> Outcome {
    let c = component(Receiver::Y);
    let card = Cardinalities::lambda_sr(&c);
    let sr = LambdaSr::new(&c, card.clone());
    let cfg = SearchConfig::default().with_restarts(4).with_max_iters(300);
    // the reference point gets the larger budget; grid values are lower bounds either way
    let reference = SearchConfig::default().with_restarts(16).with_max_iters(2000);
    let grid: Vec<Vec<f64>> = simplex_grid(4, 16).unwrap().collect();
    let u = uniform(4);
    let mut pass = true;
    let mut parts = Vec::new();
    for l in [0.0, 0.5, 1.0] {
        let at = |px: &[f64], cfg: &SearchConfig| sr.maximize(l, Some(px), cfg, &structured_seeds(px, &card)).unwrap().value;
        let at_uniform = at(&u, &reference);
        let (best, arg) = grid.iter().map(|p| (at(p, &cfg), p)).fold((f64::NEG_INFINITY, &u), |a, b| if b.0 > a.0 { b } else { a });
        pass &= best <= at_uniform + 2e-3;
        parts.push(format!("lambda {l}: uniform {at_uniform:.6}, grid max {best:.6} at {arg:?}"));
    }
    outcome(pass, format!("{} grid points; {}", grid.len(), parts.join("; ")))
}

fn criterion_5() -> Outcome {
    let t = Instant::now();
    let mut gaps = Vec::new();
    for c in random_tiny_channels() {
        let r = check_min_max_equality(&c, &MinMaxConfig::default()).unwrap();
        gaps.push(r.max_gap);
    }
    let secs = t.elapsed().as_secs_f64();
    let worst = gaps.iter().cloned().fold(0.0, f64::max);
    outcome(worst <= 0.02 && secs <= 600.0, format!("largest pairwise gap {worst:.3e} over 5 channels, {secs:.1} s"))
}

fn criterion_6() -> Outcome {
    let cfg = SearchConfig::default().with_restarts(16);
    let (mut worst, mut superadditive) = (0.0f64, true);
    for (c1, c2) in factorization_pairs() {
        for l in [0.0, 0.5, 1.0] {
            let r = check_factorization(&c1, &c2, l, &cfg, 5e-3).unwrap();
            worst = worst.max(r.gap.abs());
            superadditive &= r.gap >= -1e-6;
        }
    }
    outcome(worst <= 5e-3 && superadditive, format!("max |gap| = {worst:.3e} over 3 products x 3 lambdas, superadditive: {superadditive}"))
}

fn criterion_7() -> Outcome {
    let cfg = SearchConfig::default().with_restarts(16);
    let grid: Vec<f64> = (0..=10).map(|i| i as f64 / 10.0).collect();
    let d = degraded_pair();
    let ln = less_noisy_test(&d, Receiver::Y, &cfg).verdict == TriState::Yes;
    let curve = build_lambda_curve(&d, &grid, &cfg, &CurveOptions::default()).unwrap();
    let (lo, hi) = curve.samples.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), s| (a.min(s.value), b.max(s.value)));
    let spread = hi - lo;

    let m = erasure_symmetric_pair();
    let mc = is_more_capable(&m, Receiver::Y, &cfg).verdict;
    let not_ln = less_noisy_test(&m, Receiver::Y, &cfg).verdict == TriState::No;
    let mut deviation: f64 = 0.0;
    for px in [vec![0.5, 0.5], vec![0.3, 0.7]] {
        let opts = CurveOptions { px: Some(px), ..CurveOptions::default() };
        let s = build_lambda_curve(&m, &grid, &cfg, &opts).unwrap().samples;
        let (v0, v1) = (s[0].value, s[s.len() - 1].value);
        for p in &s {
            deviation = deviation.max((p.value - ((1.0 - p.lambda) * v0 + p.lambda * v1)).abs());
        }
    }
    outcome(
        ln && spread <= 2e-3 && mc && not_ln && deviation <= 2e-3,
        format!(
            "degraded: less noisy {ln}, curve spread {spread:.3e}; erasure/symmetric: more capable {mc}, not less noisy {not_ln}, chord deviation {deviation:.3e}"
        ),
    )
}

fn criterion_8() -> Outcome {
    let cfg = SearchConfig::default().with_restarts(16);
    let mut channels = random_tiny_channels();
    channels.push(degraded_pair());
    channels.push(erasure_symmetric_pair());
    for (a, b) in factorization_pairs() {
        channels.push(a);
        channels.push(b);
    }
    channels.push(component(Receiver::Y));
    let (mut worst, mut margin) = (0.0f64, f64::INFINITY);
    for c in &channels {
        let e0 = endpoint_sr(c, 0.0, &cfg).unwrap().value;
        let e1 = endpoint_sr(c, 1.0, &cfg).unwrap().value;
        let g0 = lambda_sr_global(c, 0.0, &cfg).unwrap().value;
        let g1 = lambda_sr_global(c, 1.0, &cfg).unwrap().value;
        worst = worst.max((e0 - g0).abs()).max((e1 - g1).abs());
        let m = marton_sum_rate(c, &cfg, &CurveOptions::default()).unwrap().value;
        margin = margin.min(e0.min(e1) - m);
    }
    outcome(
        worst <= 2e-3 && margin >= -1e-6,
        format!("{} channels: max |endpoint - global| = {worst:.3e}, min(endpoints) - sum rate >= {margin:.3e}", channels.len()),
    )
}

fn random_aux(rng: &mut ChaCha8Rng, dims: (usize, usize, usize), nx: usize) -> AuxiliaryJoint {
    let n = dims.0 * dims.1 * dims.2 * nx;
    let d = Dirichlet::new(&vec![0.3; n]).unwrap();
    AuxiliaryJoint::new(dims.0, dims.1, dims.2, nx, d.sample(rng)).unwrap()
}

fn criterion_9() -> Outcome {
    let pc = build_product();
    let cfg = SearchConfig::default().with_restarts(16).with_max_iters(1000);
    let grid = [0.0, 0.25, 0.5, 0.75, 1.0];
    let mut seeds = ProductAuxiliary::curve_seeds(&pc, &SearchConfig::default().with_restarts(32), &grid).unwrap();
    seeds.extend(ProductAuxiliary::structured(&pc));
    let w = [0.0, 1.0, 1.0];
    let semi = region_support(RegionKind::SemiDeterministic, &pc, w, true, None, &cfg, &seeds).unwrap();
    let outer = region_support(RegionKind::ProductOuter, &pc, w, true, None, &cfg, &seeds).unwrap();
    let unseeded = region_support(RegionKind::ProductOuter, &pc, w, true, None, &SearchConfig::default().with_restarts(64), &[]).unwrap();
    let best_outer = outer.value.max(unseeded.value);
    // the outer polytope sits inside the semi-deterministic one at every
    // auxiliary, so its support cannot exceed that region's
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut auxes: Vec<ProductAuxiliary> = (0..200)
        .map(|_| ProductAuxiliary { a1: random_aux(&mut rng, (4, 4, 4), 4), a2: random_aux(&mut rng, (4, 4, 4), 4) })
        .collect();
    auxes.push(outer.aux.clone());
    let contained = auxes.iter().all(|a| {
        let o = lp_support(&region(RegionKind::ProductOuter, &pc, a).unwrap().inequalities, w, true).value;
        let s = lp_support(&region(RegionKind::SemiDeterministic, &pc, a).unwrap().inequalities, w, true).value;
        o <= s + 1e-9
    });
    let uv = 44.0 / 15.0;
    outcome(
        (semi.value - 8.0 / 3.0).abs() <= 5e-3 && best_outer >= 8.0 / 3.0 - 1e-6 && best_outer <= uv - 0.25 && contained,
        format!(
            "semi-deterministic {:.9}, product outer {best_outer:.9} (UV {uv:.9}, margin {:.4}), containment at 201 auxiliaries: {contained}",
            semi.value,
            uv - best_outer
        ),
    )
}

/// Largest coordinate error of the analytic gradient against central
/// differences, relative to `max(|g|, 1e-3)`.
fn gradient_error(obj: &dyn Objective, x: &[f64]) -> f64 {
    let mut g = vec![0.0; x.len()];
    obj.value_grad(x, &mut g);
    let h = 1e-6;
    let mut worst: f64 = 0.0;
    let mut y = x.to_vec();
    for i in 0..x.len() {
        y[i] = x[i] + h;
        let up = obj.value(&y);
        y[i] = x[i] - h;
        let down = obj.value(&y);
        y[i] = x[i];
        let fd = (up - down) / (2.0 * h);
        worst = worst.max((fd - g[i]).abs() / g[i].abs().max(1e-3));
    }
    worst
}

fn criterion_10() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let c = random_joint_channel(&mut rng, 3, 2, 3);
    let lsr = LambdaSr::new(&c, Cardinalities::lambda_sr(&c));
    let v = Vars::new(2);
    let (u, vv, x, y, z) = (v.aux(0), v.aux(1), v.x(), v.y(), v.z());
    let uv_forms = [
        Form::new().mi(u, y, 0, 1.0).mi(vv, z, 0, 1.0),
        Form::new().mi(u, y, 0, 1.0).mi(x, z, u, 1.0),
        Form::new().mi(vv, z, 0, 1.0).mi(x, y, vv, 1.0),
    ];
    let uv = InfoProgram::new(&[4, 4], &c, &uv_forms);
    let mixed = InfoProgram::new(&[2, 3], &c, &[Form::new().mi(u, vv, z, 1.0).h_cond(y, u | vv, -0.7).mi(x, u, y, 2.0)]);
    let mut worst: f64 = 0.0;
    for k in 0..100 {
        let l: f64 = rng.gen();
        let px: Vec<f64> = Dirichlet::new(&[2.0; 3]).unwrap().sample(&mut rng);
        let err = match k % 4 {
            0 => {
                let o = InfoObjective::new(lsr.program(), Param::Joint, Weighted(vec![l, 1.0 - l, 1.0]));
                point_error(&o, &mut rng)
            }
            1 => {
                let o = InfoObjective::new(lsr.program(), Param::AtInput(px), Weighted(vec![l, 1.0 - l, 1.0]));
                point_error(&o, &mut rng)
            }
            2 => {
                let o = InfoObjective::new(&uv, Param::Joint, SoftMin { tau: 0.05 });
                point_error(&o, &mut rng)
            }
            _ => {
                let o = InfoObjective::new(&mixed, Param::Joint, Weighted(vec![1.0]));
                point_error(&o, &mut rng)
            }
        };
        worst = worst.max(err);
    }
    outcome(worst <= 1e-4, format!("max relative error {worst:.3e} over 100 points on 4 objectives"))
}

fn point_error<S: bcbounds::functional::Scalarize>(o: &InfoObjective<'_, S>, rng: &mut ChaCha8Rng) -> f64 {
    let blocks = o.domain();
    let mut p = Vec::new();
    for &b in blocks.blocks() {
        let d = Dirichlet::new(&vec![1.0; b]).unwrap();
        let s: Vec<f64> = d.sample(rng);
        // keep away from the boundary, where entropy gradients blow up
        p.extend(s.iter().map(|v| 0.95 * v + 0.05 / b as f64));
    }
    gradient_error(o, &p)
}

fn main() {
    let (first, ok, secs) = run_verify_example();
    let criteria: Vec<(&str, Box<dyn FnOnce() -> Outcome>)> = vec![
        ("golden separation", Box::new(|| criterion_1(&first, ok, secs))),
        ("lambda curve of one component", Box::new(criterion_2)),
        ("f-function oracle", Box::new(criterion_3)),
        ("uniform input optimality", Box::new(criterion_4)),
        ("min-max equality", Box::new(criterion_5)),
        ("factorization", Box::new(criterion_6)),
        ("class-shape properties", Box::new(criterion_7)),
        ("endpoint oracle", Box::new(criterion_8)),
        ("region consistency", Box::new(criterion_9)),
        ("gradient correctness", Box::new(criterion_10)),
        (
            "determinism",
            Box::new(|| {
                let (second, _, _) = run_verify_example();
                outcome(first == second && !first.is_empty(), format!("{} report bytes, identical: {}", first.len(), first == second))
            }),
        ),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.into_iter().enumerate() {
        let t = Instant::now();
        let o = f();
        if !o.pass {
            failed += 1;
        }
        println!(
            "{} {} {name}: {} [{:.1} s]",
            if o.pass { "PASS" } else { "FAIL" },
            i + 1,
            o.detail,
            t.elapsed().as_secs_f64()
        );
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
