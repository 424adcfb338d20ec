//! Command-line front end. Reports are JSON on stdout (or `--out`); check
//! lines and the wall-clock time go to stderr so reports stay reproducible.

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use crate::bounds::{region_support, sweep_csv, uv_sum_rate, ProductAuxiliary, RegionKind, RegionSupport};
use crate::channel::{
    classify, is_more_capable, make_product, Channel, ProductChannel, Receiver, DEFAULT_MAX_ALPHABET,
};
use crate::error::{BoundsError, Result};
use crate::marton::{
    build_lambda_curve, check_factorization, marton_sum_rate, CurveOptions, FACTORIZATION_TOL,
};
use crate::minmax::{check_min_max_equality, MinMaxConfig};
use crate::report::{bits, Check, Relation, RunReport};
use crate::search::SearchConfig;
use crate::separation::{verify_separation, SeparationConfig};

/// Environment variable holding the number of worker threads.
pub const WORKERS_ENV: &str = "BCAST_WORKERS";

/// λ grid whose component maximizers seed product-region sweeps.
const SEED_GRID: [f64; 5] = [0.0, 0.25, 0.5, 0.75, 1.0];

const DEFAULT_DIRECTIONS: [[f64; 3]; 9] = [
    [1.0, 0.0, 0.0],
    [0.0, 1.0, 0.0],
    [0.0, 0.0, 1.0],
    [1.0, 1.0, 0.0],
    [1.0, 0.0, 1.0],
    [0.0, 1.0, 1.0],
    [1.0, 1.0, 1.0],
    [0.0, 1.0, 2.0],
    [0.0, 2.0, 1.0],
];

#[derive(Debug, Parser)]
#[command(name = "bcbounds", version, about = "Capacity bounds for two-receiver broadcast channels")]
pub struct Cli {
    /// Write the JSON report to this file instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed of every randomized search.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Restarts of the main search, overriding the command default.
    #[arg(long, global = true)]
    restarts: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Determinism, more-capable and less-noisy tests in both directions.
    Classify { channel: PathBuf },
    /// Marton's sum rate and the sampled λ-curve.
    Marton {
        channel: PathBuf,
        /// Number of equal λ intervals in the sampled curve.
        #[arg(long, default_value_t = 10)]
        lambda_grid: usize,
        /// Also write the curve as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Sum rate of the UV outer bound.
    Uv { channel: PathBuf },
    /// Product of two channels, optionally with a factorization check.
    Product {
        c1: PathBuf,
        c2: PathBuf,
        /// Write the product channel file here.
        #[arg(long)]
        save: Option<PathBuf>,
        #[arg(long)]
        check_factorization: bool,
        #[arg(long, default_value_t = 0.5)]
        lambda: f64,
    },
    /// Support sweep of the product outer bound.
    Outer {
        product: PathBuf,
        /// Exchange the roles of the components.
        #[arg(long)]
        mirror: bool,
        #[command(flatten)]
        sweep: SweepArgs,
    },
    /// Support sweep of a class-specific region, compared with the outer bound.
    Region {
        product: PathBuf,
        #[arg(long, value_enum)]
        class: RegionClass,
        #[command(flatten)]
        sweep: SweepArgs,
    },
    /// Rebuild the pair-partition example and check the separation.
    VerifyExample,
    /// Compare three min/max orders of Marton's sum rate (alphabets <= 3).
    MinmaxCheck { channel: PathBuf },
}

#[derive(Debug, clap::Args)]
struct SweepArgs {
    /// Directions `w0,w1,w2`, one per line.
    #[arg(long)]
    directions: Option<PathBuf>,
    /// Restrict to R0 = 0.
    #[arg(long)]
    pin_r0: bool,
    /// Also write the sweep as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum RegionClass {
    /// `Y1` and `Z2` deterministic.
    SemiDeterministic,
    /// `Z1` more capable than `Y1`, `Y2` more capable than `Z2`.
    MoreCapable,
    /// `Z1` more capable than `Y1`, `Y2` deterministic.
    Mixed,
}

impl RegionClass {
    fn kind(self) -> RegionKind {
        match self {
            RegionClass::SemiDeterministic => RegionKind::SemiDeterministic,
            RegionClass::MoreCapable => RegionKind::MoreCapable,
            RegionClass::Mixed => RegionKind::Mixed,
        }
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    if let Err(e) = configure_workers() {
        eprintln!("error: {e}");
        return 2;
    }
    let start = Instant::now();
    let report = match execute(&cli) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return 2;
        }
    };
    for c in &report.checks {
        eprintln!("{}", c.line());
    }
    let text = report.to_json();
    match &cli.out {
        Some(path) => {
            if let Err(e) = std::fs::write(path, &text) {
                eprintln!("error: cannot write {}: {e}", path.display());
                return 2;
            }
        }
        None => print!("{text}"),
    }
    eprintln!("wall clock: {:.2} s", start.elapsed().as_secs_f64());
    report.exit_code()
}

fn configure_workers() -> Result<()> {
    let Ok(v) = std::env::var(WORKERS_ENV) else { return Ok(()) };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| BoundsError::Config(format!("{WORKERS_ENV} must be a positive integer, got {v:?}")))?;
    // a second call in the same process keeps the first pool
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

fn search_config(cli: &Cli, default: SearchConfig) -> SearchConfig {
    let cfg = default.with_seed(cli.seed);
    match cli.restarts {
        Some(r) => cfg.with_restarts(r),
        None => cfg,
    }
}

fn to_value<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("results serialize")
}

fn execute(cli: &Cli) -> Result<RunReport> {
    match &cli.command {
        Command::Classify { channel } => {
            let c = Channel::load(channel)?;
            let cfg = search_config(cli, SearchConfig::default());
            cfg.validate()?;
            let r = classify(&c, &cfg);
            let unknown = r.y_more_capable.unknown || r.z_more_capable.unknown;
            Ok(RunReport::new("classify", json!({ "seed": cli.seed, "search": cfg }), to_value(&r), Vec::new())
                .with_converged(!unknown))
        }
        Command::Marton { channel, lambda_grid, csv } => {
            let c = Channel::load(channel)?;
            marton(cli, &c, *lambda_grid, csv.as_deref())
        }
        Command::Uv { channel } => {
            let c = Channel::load(channel)?;
            let cfg = search_config(cli, SearchConfig::default());
            cfg.validate()?;
            let r = uv_sum_rate(&c, &cfg, &[])?;
            let results = json!({ "sum_rate": bits(r.value), "detail": to_value(&r) });
            Ok(RunReport::new("uv", json!({ "seed": cli.seed, "search": cfg }), results, Vec::new()).with_converged(r.converged))
        }
        Command::Product { c1, c2, save, check_factorization: check, lambda } => {
            let (a, b) = (Channel::load(c1)?, Channel::load(c2)?);
            product(cli, &a, &b, save.as_deref(), check.then_some(*lambda))
        }
        Command::Outer { product, mirror, sweep } => {
            let pc = ProductChannel::load(product, DEFAULT_MAX_ALPHABET)?;
            let kind = if *mirror { RegionKind::ProductOuterMirror } else { RegionKind::ProductOuter };
            let cfg = search_config(cli, SearchConfig::default().with_restarts(16).with_max_iters(1000));
            let dirs = directions(sweep.directions.as_deref())?;
            let seeds = sweep_seeds(cli, &pc)?;
            let rows = run_sweep(kind, &pc, &dirs, sweep.pin_r0, &cfg, &seeds)?;
            write_csv(sweep.csv.as_deref(), &sweep_csv(&rows))?;
            let converged = rows.iter().all(|r| r.converged);
            let config = json!({ "seed": cli.seed, "search": cfg, "pin_r0": sweep.pin_r0, "seed_grid": SEED_GRID });
            Ok(RunReport::new("outer", config, sweep_results(kind, &rows), Vec::new()).with_converged(converged))
        }
        Command::Region { product, class, sweep } => {
            let pc = ProductChannel::load(product, DEFAULT_MAX_ALPHABET)?;
            region(cli, &pc, *class, sweep)
        }
        Command::VerifyExample => {
            let mut cfg = SeparationConfig::with_seed(cli.seed);
            if let Some(r) = cli.restarts {
                cfg.component = cfg.component.with_restarts(r);
            }
            let r = verify_separation(&cfg)?;
            let mut results = to_value(&r);
            if let Value::Object(m) = &mut results {
                m.remove("checks");
                m.remove("pass");
            }
            Ok(RunReport::new("verify-example", to_value(&cfg), results, r.checks))
        }
        Command::MinmaxCheck { channel } => {
            let c = Channel::load(channel)?;
            let mut cfg = MinMaxConfig::with_seed(cli.seed);
            if let Some(r) = cli.restarts {
                cfg.search = cfg.search.with_restarts(r);
            }
            let r = check_min_max_equality(&c, &cfg)?;
            let pairs = [
                ("max-min vs max-min-max", r.max_min, r.max_min_max),
                ("max-min-max vs min-max", r.max_min_max, r.min_max),
                ("max-min vs min-max", r.max_min, r.min_max),
            ];
            let checks = pairs.iter().map(|&(n, a, b)| Check::new(n, a - b, Relation::Within, 0.0, cfg.tol)).collect();
            Ok(RunReport::new("minmax-check", to_value(&cfg), to_value(&r), checks))
        }
    }
}

fn marton(cli: &Cli, c: &Channel, intervals: usize, csv: Option<&Path>) -> Result<RunReport> {
    if intervals == 0 {
        return Err(BoundsError::Config("--lambda-grid needs at least one interval".into()));
    }
    let cfg = search_config(cli, SearchConfig::default());
    cfg.validate()?;
    let grid: Vec<f64> = (0..=intervals).map(|i| i as f64 / intervals as f64).collect();
    let curve = build_lambda_curve(c, &grid, &cfg, &CurveOptions::default())?;
    write_csv(csv, &curve.to_csv())?;
    let opts = CurveOptions { pool_seeds: curve.samples.iter().map(|s| s.maximizer.clone()).collect(), ..Default::default() };
    let sr = marton_sum_rate(c, &cfg, &opts)?;
    let checks = vec![
        Check::flag("curve is convex and its stored lines support it", curve.warnings.is_empty()),
        Check::new("sum rate against the sampled curve minimum", sr.value, Relation::AtMost, curve.min_value, 1e-6)
            .with_converged(sr.converged),
    ];
    let samples: Vec<Value> = curve
        .samples
        .iter()
        .map(|s| json!({ "lambda": s.lambda, "value": s.value, "subgradient": s.subgradient, "converged": s.converged }))
        .collect();
    let results = json!({
        "sum_rate": bits(sr.value),
        "lambda_star": sr.lambda_star,
        "detail": to_value(&sr),
        "curve": samples,
        "curve_warnings": curve.warnings,
    });
    let converged = curve.samples.iter().all(|s| s.converged);
    Ok(RunReport::new("marton", json!({ "seed": cli.seed, "search": cfg, "lambda_grid": grid }), results, checks)
        .with_converged(converged))
}

fn product(cli: &Cli, c1: &Channel, c2: &Channel, save: Option<&Path>, lambda: Option<f64>) -> Result<RunReport> {
    let pc = make_product(c1, c2)?;
    if let Some(path) = save {
        pc.save(path)?;
    }
    let f = pc.flattened();
    let deterministic_link = [c1, c2].iter().any(|c| c.is_deterministic(Receiver::Y) || c.is_deterministic(Receiver::Z));
    let mut results = json!({
        "nx": f.nx(),
        "ny": f.ny(),
        "nz": f.nz(),
        "reversely_semi_deterministic": pc.is_reversely_semi_deterministic(),
        "deterministic_link": deterministic_link,
        "saved_to": save.map(|p| p.display().to_string()),
    });
    let cfg = search_config(cli, SearchConfig::default().with_restarts(32));
    let mut checks = Vec::new();
    if let Some(l) = lambda {
        cfg.validate()?;
        let r = check_factorization(c1, c2, l, &cfg, FACTORIZATION_TOL)?;
        checks.push(Check::new("factorization gap", r.gap, Relation::Within, 0.0, r.tol).with_converged(r.converged));
        checks.push(Check::new("superadditivity", r.gap, Relation::AtLeast, 0.0, 1e-6));
        results["factorization"] = to_value(&r);
    }
    Ok(RunReport::new("product", json!({ "seed": cli.seed, "search": cfg, "lambda": lambda }), results, checks))
}

fn region(cli: &Cli, pc: &ProductChannel, class: RegionClass, sweep: &SweepArgs) -> Result<RunReport> {
    let cfg = search_config(cli, SearchConfig::default().with_restarts(16).with_max_iters(1000));
    cfg.validate()?;
    let dirs = directions(sweep.directions.as_deref())?;
    let class_cfg = SearchConfig::default().with_seed(cli.seed);
    let mc = |c: &Channel, r: Receiver| is_more_capable(c, r, &class_cfg).verdict;
    let applicable = match class {
        RegionClass::SemiDeterministic => pc.is_reversely_semi_deterministic(),
        RegionClass::MoreCapable => mc(&pc.c1, Receiver::Z) && mc(&pc.c2, Receiver::Y),
        RegionClass::Mixed => mc(&pc.c1, Receiver::Z) && pc.c2.is_deterministic(Receiver::Y),
    };
    let seeds = sweep_seeds(cli, pc)?;
    let kind = class.kind();
    let rows = run_sweep(kind, pc, &dirs, sweep.pin_r0, &cfg, &seeds)?;
    write_csv(sweep.csv.as_deref(), &sweep_csv(&rows))?;
    let mut checks = vec![Check::flag("class conditions hold", applicable)];
    let mut outer = Vec::new();
    if applicable {
        outer = run_sweep(RegionKind::ProductOuter, pc, &dirs, sweep.pin_r0, &cfg, &seeds)?;
        for (r, o) in rows.iter().zip(&outer) {
            let name = format!("support {:?} against the outer bound", r.weights);
            checks.push(Check::new(name, r.value - o.value, Relation::Within, 0.0, 5e-3).with_converged(r.converged && o.converged));
        }
    }
    let mut results = sweep_results(kind, &rows);
    results["outer"] = sweep_results(RegionKind::ProductOuter, &outer);
    let config = json!({ "seed": cli.seed, "search": cfg, "pin_r0": sweep.pin_r0, "seed_grid": SEED_GRID });
    let converged = rows.iter().all(|r| r.converged);
    Ok(RunReport::new("region", config, results, checks).with_converged(converged))
}

fn sweep_seeds(cli: &Cli, pc: &ProductChannel) -> Result<Vec<ProductAuxiliary>> {
    let cfg = SearchConfig::default().with_restarts(32).with_seed(cli.seed);
    let mut seeds = ProductAuxiliary::curve_seeds(pc, &cfg, &SEED_GRID)?;
    seeds.extend(ProductAuxiliary::structured(pc));
    Ok(seeds)
}

fn run_sweep(
    kind: RegionKind,
    pc: &ProductChannel,
    dirs: &[[f64; 3]],
    pin_r0: bool,
    cfg: &SearchConfig,
    seeds: &[ProductAuxiliary],
) -> Result<Vec<RegionSupport>> {
    dirs.iter().map(|&w| region_support(kind, pc, w, pin_r0, None, cfg, seeds)).collect()
}

fn sweep_results(kind: RegionKind, rows: &[RegionSupport]) -> Value {
    let list: Vec<Value> = rows
        .iter()
        .map(|r| {
            json!({
                "weights": r.weights,
                "value": r.value,
                "display": bits(r.value),
                "vertex": r.vertex,
                "converged": r.converged,
            })
        })
        .collect();
    json!({ "region": kind.name(), "supports": list })
}

/// Reads `w0,w1,w2` per line (commas or whitespace); blank lines, `#`
/// comments and a `w0,w1,w2` header are skipped.
pub fn parse_directions(text: &str) -> Result<Vec<[f64; 3]>> {
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() || line.replace(' ', "") == "w0,w1,w2" {
            continue;
        }
        let vals: Vec<f64> = line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|s| !s.is_empty())
            .map(|s| s.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| BoundsError::Config(format!("direction line {}: {e}", n + 1)))?;
        let w: [f64; 3] = vals
            .try_into()
            .map_err(|v: Vec<f64>| BoundsError::Config(format!("direction line {} has {} entries, expected 3", n + 1, v.len())))?;
        out.push(w);
    }
    if out.is_empty() {
        return Err(BoundsError::Config("no directions given".into()));
    }
    Ok(out)
}

fn directions(path: Option<&Path>) -> Result<Vec<[f64; 3]>> {
    match path {
        Some(p) => parse_directions(&std::fs::read_to_string(p)?),
        None => Ok(DEFAULT_DIRECTIONS.to_vec()),
    }
}

fn write_csv(path: Option<&Path>, text: &str) -> Result<()> {
    if let Some(p) = path {
        std::fs::write(p, text)?;
    }
    Ok(())
}
