//! Command-line front end: pricing, operator checks, martingale analysis,
//! simulation and payoff tables. Reports are JSON with sorted keys; surfaces
//! and tables are CSV.

use std::fs;
use std::io::Write as _;
use std::path::PathBuf;

use clap::error::ErrorKind;
use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};
use serde::Deserialize;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::gauge_analysis::{
    gauge_martingale_quadratic, gauge_martingale_sums, martingale_roots, volcoeff_audit,
};
use crate::grid::{default_grid_2d, default_x_axis, make_grid_2d, sample, Grid, LogGrid1D};
use crate::montecarlo::{delta_hedge_test, mc_price, simulate_gbm_with, simulate_mg_with, Record};
use crate::operators::{
    build_bs_hamiltonian, build_gauge_hamiltonian, build_mg_hamiltonian, commutator, transform_audit, gauge_operator,
    GaugeField, GaugeForm, LinearOperator,
};
use crate::params::{ModelParams, SigmaMode};
use crate::payoff::payoff_table;
use crate::pricing::{bs_closed_form, price_bs, price_mg, OptionContract, OptionKind};

/// Environment variable capping the worker-thread count.
pub const THREADS_ENV: &str = "GAUGE_HAMILTON_THREADS";

#[derive(Parser, Debug)]
#[command(name = "gauge-hamilton", version, about = "BS, MG and gauge Hamiltonians: pricing, audits and simulation")]
pub struct Cli {
    /// JSON file with default values for any flag (snake_case keys); flags win.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Report format.
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Write CSV output here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Price a European option by backward PDE evolution.
    Price(PriceArgs),
    /// Run an operator or substitution audit.
    Check(CheckArgs),
    /// Positive log-variance roots of a u^2 + mu u + lambda = 0.
    Martingale(MartingaleArgs),
    /// Exponent sums annihilated by the gauge Hamiltonian.
    GaugeMartingale(GaugeMartingaleArgs),
    /// CSV of a Hamiltonian acting on a reference function, term by term.
    Surface(SurfaceArgs),
    /// CSV of holder and writer profit over a price range.
    PayoffTable(PayoffArgs),
    /// Simulate price (and variance) paths and a Monte Carlo price.
    Simulate(SimulateArgs),
    /// Delta-hedge replication error statistics.
    Hedge(HedgeArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum PriceModel {
    Bs,
    Mg,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum SimModel {
    Gbm,
    Mg,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Which {
    Expansion,
    BsLimit,
    Commutator,
    Volcoeff,
    #[value(name = "eq22")]
    Transform,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum ThetaShape {
    Linear,
    Constant,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum HamiltonianName {
    Bs,
    Mg,
    Gauge,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Reference {
    /// e^x
    Exp,
    /// exp(-(x - x0)^2 - (y - y0)^2) about the box centre
    Gaussian,
    /// sin(x) cos(y)
    Sincos,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
enum Kind {
    Call,
    Put,
}

impl From<Kind> for OptionKind {
    fn from(k: Kind) -> Self {
        match k {
            Kind::Call => OptionKind::Call,
            Kind::Put => OptionKind::Put,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
enum SigmaFlag {
    Local,
    Constant,
}

/// Values accepted from `--config`.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RunConfig {
    r: Option<f64>,
    sigma: Option<f64>,
    phi: Option<f64>,
    lambda: Option<f64>,
    mu: Option<f64>,
    zeta: Option<f64>,
    alpha: Option<f64>,
    rho: Option<f64>,
    omega: Option<f64>,
    vol_vol_half: Option<bool>,
    sigma_mode: Option<SigmaFlag>,
    kind: Option<Kind>,
    k: Option<f64>,
    premium: Option<f64>,
    t: Option<f64>,
    s0: Option<f64>,
    v0: Option<f64>,
    nx: Option<usize>,
    ny: Option<usize>,
    steps: Option<usize>,
    paths: Option<usize>,
    seed: Option<u64>,
    format: Option<Format>,
    out: Option<PathBuf>,
}

#[derive(Args, Debug, Default)]
struct ModelArgs {
    #[arg(long)]
    r: Option<f64>,
    #[arg(long)]
    sigma: Option<f64>,
    /// Expected return; defaults to r.
    #[arg(long)]
    phi: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    lambda: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    mu: Option<f64>,
    #[arg(long)]
    zeta: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    rho: Option<f64>,
    /// Put zeta^2/2 instead of zeta^2 on the variance second derivative.
    #[arg(long)]
    vol_vol_half: bool,
    #[arg(long, value_enum)]
    sigma_mode: Option<SigmaFlag>,
}

#[derive(Args, Debug)]
struct ContractArgs {
    #[arg(long, value_enum)]
    kind: Option<Kind>,
    /// Strike.
    #[arg(long)]
    k: Option<f64>,
    /// Maturity.
    #[arg(long)]
    t: Option<f64>,
    #[arg(long)]
    s0: Option<f64>,
}

#[derive(Args, Debug)]
struct PriceArgs {
    #[arg(long, value_enum, default_value = "bs")]
    model: PriceModel,
    #[command(flatten)]
    contract: ContractArgs,
    #[command(flatten)]
    model_args: ModelArgs,
    /// Initial variance (mg).
    #[arg(long)]
    v0: Option<f64>,
    #[arg(long)]
    nx: Option<usize>,
    #[arg(long)]
    ny: Option<usize>,
    #[arg(long)]
    steps: Option<usize>,
}

#[derive(Args, Debug)]
struct CheckArgs {
    #[arg(long, value_enum)]
    what: Which,
    #[arg(long, value_enum, default_value = "linear")]
    theta: ThetaShape,
    #[arg(long, allow_hyphen_values = true)]
    omega: Option<f64>,
    #[command(flatten)]
    model_args: ModelArgs,
    /// Points per axis on the coarse grid.
    #[arg(long)]
    nx: Option<usize>,
}

#[derive(Args, Debug)]
struct MartingaleArgs {
    #[arg(long, allow_hyphen_values = true)]
    mu: f64,
    #[arg(long, allow_hyphen_values = true)]
    lambda: f64,
    /// Leading coefficient on e^{2y}.
    #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
    a: f64,
}

#[derive(Args, Debug)]
struct GaugeMartingaleArgs {
    #[arg(long)]
    r: Option<f64>,
    #[arg(long)]
    sigma: Option<f64>,
}

#[derive(Args, Debug)]
struct SurfaceArgs {
    #[arg(long, value_enum)]
    hamiltonian: HamiltonianName,
    #[arg(long, value_enum, default_value = "exp")]
    reference: Reference,
    #[command(flatten)]
    model_args: ModelArgs,
    #[arg(long, default_value_t = 3.6, allow_hyphen_values = true)]
    x_min: f64,
    #[arg(long, default_value_t = 5.6, allow_hyphen_values = true)]
    x_max: f64,
    #[arg(long, default_value_t = -5.0, allow_hyphen_values = true)]
    y_min: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    y_max: f64,
    #[arg(long)]
    nx: Option<usize>,
    #[arg(long)]
    ny: Option<usize>,
}

#[derive(Args, Debug)]
struct PayoffArgs {
    #[arg(long, value_enum)]
    kind: Option<Kind>,
    #[arg(long)]
    k: Option<f64>,
    #[arg(long)]
    premium: Option<f64>,
    #[arg(long, default_value_t = 0.0)]
    s_min: f64,
    #[arg(long)]
    s_max: Option<f64>,
    #[arg(long, default_value_t = 101)]
    n: usize,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[arg(long, value_enum, default_value = "gbm")]
    model: SimModel,
    #[command(flatten)]
    contract: ContractArgs,
    #[command(flatten)]
    model_args: ModelArgs,
    #[arg(long)]
    v0: Option<f64>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    paths: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Write all paths to this binary file.
    #[arg(long)]
    dump: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct HedgeArgs {
    #[command(flatten)]
    contract: ContractArgs,
    #[command(flatten)]
    model_args: ModelArgs,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    paths: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

enum Failure {
    Usage(clap::Error),
    Numeric(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Numeric(e)
    }
}

type Outcome = std::result::Result<i32, Failure>;

fn usage(kind: ErrorKind, msg: impl std::fmt::Display) -> Failure {
    Failure::Usage(Cli::command().error(kind, msg))
}

struct Ctx {
    cfg: RunConfig,
    format: Format,
    out: Option<PathBuf>,
}

impl Ctx {
    fn model(&self, m: &ModelArgs, default_mode: SigmaMode) -> ModelParams {
        let c = &self.cfg;
        let d = ModelParams::default();
        let r = m.r.or(c.r).unwrap_or(d.r);
        let mode = match m.sigma_mode.or(c.sigma_mode) {
            Some(SigmaFlag::Local) => SigmaMode::Local,
            Some(SigmaFlag::Constant) => SigmaMode::Constant,
            None => default_mode,
        };
        ModelParams {
            r,
            sigma: m.sigma.or(c.sigma).unwrap_or(d.sigma),
            phi: m.phi.or(c.phi).unwrap_or(r),
            lambda: m.lambda.or(c.lambda).unwrap_or(d.lambda),
            mu: m.mu.or(c.mu).unwrap_or(d.mu),
            zeta: m.zeta.or(c.zeta).unwrap_or(d.zeta),
            alpha: m.alpha.or(c.alpha).unwrap_or(d.alpha),
            rho: m.rho.or(c.rho).unwrap_or(d.rho),
            omega: c.omega.unwrap_or(d.omega),
            vol_vol_half: m.vol_vol_half || c.vol_vol_half.unwrap_or(false),
            sigma_mode: mode,
        }
    }

    fn contract(&self, a: &ContractArgs, premium: f64) -> std::result::Result<(OptionContract, f64), Failure> {
        let c = &self.cfg;
        let k = a.k.or(c.k).ok_or_else(|| usage(ErrorKind::MissingRequiredArgument, "the following required argument was not provided: --k <K>"))?;
        let kind = a.kind.or(c.kind).unwrap_or(Kind::Call);
        let t = a.t.or(c.t).unwrap_or(1.0);
        let s0 = a.s0.or(c.s0).unwrap_or(100.0);
        Ok((OptionContract::new(kind.into(), k, premium, t)?, s0))
    }

    fn emit(&self, report: Value) -> Result<()> {
        let text = match self.format {
            Format::Json => serde_json::to_string_pretty(&report).expect("report serialises"),
            Format::Csv => {
                let mut s = String::from("key,value\n");
                if let Value::Object(map) = &report {
                    for (k, v) in map {
                        s.push_str(&format!("{k},{v}\n"));
                    }
                }
                s
            }
        };
        println!("{text}");
        Ok(())
    }

    fn write_csv(&self, csv: &str) -> Result<()> {
        match &self.out {
            Some(p) => fs::write(p, csv)?,
            None => std::io::stdout().write_all(csv.as_bytes())?,
        }
        Ok(())
    }
}

fn rel_json(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else {
        Value::Null
    }
}

fn price(ctx: &Ctx, a: &PriceArgs) -> Outcome {
    let (contract, s0) = ctx.contract(&a.contract, 0.0)?;
    let c = &ctx.cfg;
    let steps = a.steps.or(c.steps);
    match a.model {
        PriceModel::Bs => {
            let params = ctx.model(&a.model_args, SigmaMode::Constant);
            let nx = a.nx.or(c.nx).unwrap_or(401);
            let grid = default_x_axis(s0, params.sigma.max(0.05), contract.maturity, nx)?;
            let pde = price_bs(&params, &contract, s0, &grid, steps.unwrap_or(200))?;
            let exact = bs_closed_form(&params, &contract, s0)?;
            ctx.emit(json!({
                "model": "bs",
                "price": pde,
                "closed_form": exact,
                "rel_err": rel_json((pde - exact).abs() / exact.abs()),
            }))?;
        }
        PriceModel::Mg => {
            let params = ctx.model(&a.model_args, SigmaMode::Local);
            let v0 = a.v0.or(c.v0).unwrap_or(0.04);
            let nx = a.nx.or(c.nx).unwrap_or(201);
            let ny = a.ny.or(c.ny).unwrap_or(71);
            let grid = default_grid_2d(s0, v0, contract.maturity, nx, ny)?;
            let value = price_mg(&params, &contract, s0, v0, &grid, steps.unwrap_or(100))?;
            let reference = bs_closed_form(&ModelParams::black_scholes(params.r, v0.sqrt()), &contract, s0)?;
            ctx.emit(json!({
                "model": "mg",
                "price": value,
                "bs_at_sqrt_v0": reference,
                "rel_diff_to_bs": rel_json((value - reference).abs() / reference.abs()),
            }))?;
        }
    }
    Ok(0)
}

fn check_report(name: &str, residual: f64, tolerance: f64, pass: bool, extra: Value) -> Value {
    let mut v = json!({ "name": name, "residual": residual, "tolerance": tolerance, "pass": pass });
    if let (Value::Object(m), Value::Object(e)) = (&mut v, extra) {
        m.extend(e);
    }
    v
}

fn check(ctx: &Ctx, a: &CheckArgs) -> Outcome {
    let n = a.nx.or(ctx.cfg.nx).unwrap_or(41);
    if n < 5 {
        return Err(usage(ErrorKind::ValueValidation, "--nx must be at least 5"));
    }
    let (report, gated) = match a.what {
        Which::Expansion => {
            let params = ctx.model(&a.model_args, SigmaMode::Constant);
            let diff = |n: usize| -> Result<Vec<f64>> {
                let g: Grid = make_grid_2d(-1.0, 1.0, n, -1.0, 1.0, n)?.into();
                let f = sample(g, |x, y| x.sin() * y.cos())?;
                let fa = build_gauge_hamiltonian(&params, g, GaugeForm::Factored)?.apply(&f)?;
                let fb = build_gauge_hamiltonian(&params, g, GaugeForm::Expanded)?.apply(&f)?;
                Ok(fa.combine(1.0, &fb, -1.0)?.into_values())
            };
            let nf = 2 * n - 1;
            let (dc, df) = (diff(n)?, diff(nf)?);
            // Compare at the coarse interior nodes, which the fine grid shares.
            let (mut coarse, mut fine) = (0.0f64, 0.0f64);
            for i in 2..n - 2 {
                for j in 2..n - 2 {
                    coarse = coarse.max(dc[i * n + j].abs());
                    fine = fine.max(df[2 * i * nf + 2 * j].abs());
                }
            }
            let order = (coarse / fine).log2();
            let tolerance = coarse / 2f64.powf(1.9);
            (check_report("expansion", fine, tolerance, fine <= tolerance, json!({ "coarse_residual": coarse, "order": order })), true)
        }
        Which::BsLimit => {
            let params = ctx.model(&a.model_args, SigmaMode::Local);
            let g: Grid = make_grid_2d(3.0, 6.0, n, -5.0, 0.0, n)?.into();
            let f = sample(g, |x, _| (0.7 * x).sin() + (x - 4.5).powi(2))?;
            let gauge = build_gauge_hamiltonian(&params, g, GaugeForm::Expanded)?.apply(&f)?;
            let bs = build_bs_hamiltonian(&params, g)?.apply(&f)?;
            let residual = gauge.max_abs_diff(&bs, 1)?;
            (check_report("bs-limit", residual, 0.0, residual == 0.0, json!({})), true)
        }
        Which::Commutator => {
            let params = ctx.model(&a.model_args, SigmaMode::Constant);
            let omega = a.omega.or(ctx.cfg.omega).unwrap_or(1.0);
            let gauge = match a.theta {
                ThetaShape::Linear => GaugeField::linear(1.0, 0.0),
                ThetaShape::Constant => GaugeField::constant(1.0),
            }
            .with_omega(omega);
            let g: Grid = LogGrid1D::new(-1.0, 1.0, n)?.into();
            let norm = commutator_norm(&params, &gauge, g)?;
            let (tolerance, pass) = match a.theta {
                ThetaShape::Linear => (1e-6, norm > 1e-6),
                ThetaShape::Constant => (1e-12, norm <= 1e-12),
            };
            let expect = if a.theta == ThetaShape::Linear { "nonzero" } else { "zero" };
            (check_report("commutator", norm, tolerance, pass, json!({ "expect": expect, "omega": omega })), true)
        }
        Which::Volcoeff => {
            let params = ctx.model(&a.model_args, SigmaMode::Local);
            let g = make_grid_2d(-1.0, 1.0, 5, -5.0, 1.0, n)?;
            let rep = volcoeff_audit(&params, &g)?;
            let matches = rep.exact_blocks_rel <= 1e-12 && (params.vol_vol_half || rep.d2y_vs_half_variance <= 1e-12);
            let mut extra = serde_json::to_value(rep).expect("report serialises");
            if let Value::Object(m) = &mut extra {
                m.insert("report_only".into(), json!(true));
            }
            (check_report("volcoeff", rep.d2y_vs_half_variance, 1e-12, matches, extra), false)
        }
        Which::Transform => {
            let params = ctx.model(&a.model_args, SigmaMode::Constant);
            let omega = a.omega.or(ctx.cfg.omega).unwrap_or(1.0);
            let gauge = match a.theta {
                ThetaShape::Linear => GaugeField::linear(1.0, 0.0),
                ThetaShape::Constant => GaugeField::constant(1.0),
            }
            .with_omega(omega);
            let g: Grid = LogGrid1D::new(-1.0, 1.0, n)?.into();
            let audit = transform_audit(&params, &gauge, g)?;
            let residual = audit.literal_vs_left.min(audit.literal_vs_right);
            let mut extra = serde_json::to_value(audit).expect("report serialises");
            if let Value::Object(m) = &mut extra {
                m.insert("report_only".into(), json!(true));
            }
            (check_report("eq22", residual, 0.0, residual == 0.0, extra), false)
        }
    };
    let pass = report["pass"].as_bool().unwrap_or(false);
    ctx.emit(report)?;
    Ok(if gated && !pass { 1 } else { 0 })
}

/// Max over a few unit-sup-norm test functions of the interior sup norm of `[H_BS, U] f`.
fn commutator_norm(params: &ModelParams, gauge: &GaugeField, g: Grid) -> Result<f64> {
    let h = build_bs_hamiltonian(params, g)?;
    let u = gauge_operator(gauge, g)?;
    let c: LinearOperator = commutator(&h, &u)?;
    let tests: [fn(f64) -> f64; 4] = [|x| x.cos(), |x| (2.0 * x).sin(), |x| (-x * x).exp(), |x| 0.5 * (1.0 + x)];
    let mut worst: f64 = 0.0;
    for t in tests {
        let f = sample(g, |x, _| t(x))?;
        let scale = f.values().iter().map(|v| v.abs()).fold(0.0, f64::max);
        worst = worst.max(c.apply(&f)?.max_abs(1) / scale);
    }
    Ok(worst)
}

fn martingale(ctx: &Ctx, a: &MartingaleArgs) -> Outcome {
    let roots = martingale_roots(a.a, a.mu, a.lambda)?;
    ctx.emit(serde_json::to_value(roots).expect("report serialises"))?;
    Ok(0)
}

fn gauge_martingale(ctx: &Ctx, a: &GaugeMartingaleArgs) -> Outcome {
    let r = a.r.or(ctx.cfg.r).unwrap_or(0.02);
    let sigma = a.sigma.or(ctx.cfg.sigma).unwrap_or(0.2);
    let params = ModelParams::black_scholes(r, sigma);
    let (c1, c2) = gauge_martingale_sums(&params)?;
    let v = sigma * sigma;
    ctx.emit(json!({
        "r": r,
        "sigma": sigma,
        "sums": [c1, c2],
        "quadratic_at_sums": [gauge_martingale_quadratic(v, r, c1), gauge_martingale_quadratic(v, r, c2)],
    }))?;
    Ok(0)
}

fn surface(ctx: &Ctx, a: &SurfaceArgs) -> Outcome {
    let params = ctx.model(&a.model_args, SigmaMode::Local);
    let nx = a.nx.or(ctx.cfg.nx).unwrap_or(41);
    let ny = a.ny.or(ctx.cfg.ny).unwrap_or(21);
    let grid: Grid = make_grid_2d(a.x_min, a.x_max, nx, a.y_min, a.y_max, ny)?.into();
    let (xc, yc) = (0.5 * (a.x_min + a.x_max), 0.5 * (a.y_min + a.y_max));
    let f = match a.reference {
        Reference::Exp => sample(grid, |x, _| x.exp())?,
        Reference::Gaussian => sample(grid, |x, y| (-(x - xc).powi(2) - (y - yc).powi(2)).exp())?,
        Reference::Sincos => sample(grid, |x, y| x.sin() * y.cos())?,
    };
    let h = match a.hamiltonian {
        HamiltonianName::Bs => build_bs_hamiltonian(&params, grid)?,
        HamiltonianName::Mg => build_mg_hamiltonian(&params, grid)?,
        HamiltonianName::Gauge => build_gauge_hamiltonian(&params, grid, GaugeForm::Expanded)?,
    };
    let columns: Vec<Vec<f64>> = h.terms().iter().map(|t| t.matrix.mul_vec(f.values())).collect();
    let total = h.apply(&f)?;
    let mut csv = String::from("x,y,reference");
    for t in h.terms() {
        csv.push(',');
        csv.push_str(&t.label);
    }
    csv.push_str(",value\n");
    for k in 0..grid.len() {
        let (x, y) = grid.coords(k);
        csv.push_str(&format!("{x:.16e},{y:.16e},{:.16e}", f.values()[k]));
        for col in &columns {
            csv.push_str(&format!(",{:.16e}", col[k]));
        }
        csv.push_str(&format!(",{:.16e}\n", total.values()[k]));
    }
    ctx.write_csv(&csv)?;
    Ok(0)
}

fn payoff_cmd(ctx: &Ctx, a: &PayoffArgs) -> Outcome {
    let c = &ctx.cfg;
    let k = a.k.or(c.k).ok_or_else(|| usage(ErrorKind::MissingRequiredArgument, "the following required argument was not provided: --k <K>"))?;
    let kind = a.kind.or(c.kind).unwrap_or(Kind::Call);
    let premium = a.premium.or(c.premium).unwrap_or(0.0);
    let contract = OptionContract::new(kind.into(), k, premium, c.t.unwrap_or(1.0))?;
    let s_max = a.s_max.unwrap_or(2.0 * k);
    ctx.write_csv(&payoff_table(&contract, a.s_min, s_max, a.n)?)?;
    Ok(0)
}

fn simulate(ctx: &Ctx, a: &SimulateArgs) -> Outcome {
    let c = &ctx.cfg;
    let (contract, s0) = ctx.contract(&a.contract, 0.0)?;
    let steps = a.steps.or(c.steps).unwrap_or(100);
    let paths = a.paths.or(c.paths).unwrap_or(10_000);
    let seed = a.seed.or(c.seed).unwrap_or(42);
    let record = if a.dump.is_some() { Record::Full } else { Record::Endpoints };
    let (params, ensemble) = match a.model {
        SimModel::Gbm => {
            let p = ctx.model(&a.model_args, SigmaMode::Constant);
            (p, simulate_gbm_with(&p, s0, contract.maturity, steps, paths, seed, record)?)
        }
        SimModel::Mg => {
            let p = ctx.model(&a.model_args, SigmaMode::Local);
            let v0 = a.v0.or(c.v0).unwrap_or(0.04);
            (p, simulate_mg_with(&p, s0, v0, contract.maturity, steps, paths, seed, record)?)
        }
    };
    if let Some(path) = &a.dump {
        ensemble.save_binary(path)?;
    }
    if let Some(path) = &ctx.out {
        fs::write(path, ensemble.to_csv()).map_err(Error::from)?;
    }
    let (price, se) = match mc_price(&ensemble, &contract, params.r) {
        Ok((p, s)) => (rel_json(p), rel_json(s)),
        Err(Error::DriftMismatch { .. }) => (Value::Null, Value::Null),
        Err(e) => return Err(e.into()),
    };
    ctx.emit(json!({
        "model": if a.model == SimModel::Gbm { "gbm" } else { "mg" },
        "n_paths": paths,
        "n_steps": steps,
        "seed": seed,
        "price": price,
        "std_error": se,
    }))?;
    Ok(0)
}

fn hedge(ctx: &Ctx, a: &HedgeArgs) -> Outcome {
    let c = &ctx.cfg;
    let (contract, s0) = ctx.contract(&a.contract, 0.0)?;
    let params = ctx.model(&a.model_args, SigmaMode::Constant);
    let steps = a.steps.or(c.steps).unwrap_or(52);
    let paths = a.paths.or(c.paths).unwrap_or(10_000);
    let seed = a.seed.or(c.seed).unwrap_or(42);
    let stats = delta_hedge_test(&params, &contract, s0, steps, paths, seed)?;
    ctx.emit(serde_json::to_value(stats).expect("report serialises"))?;
    Ok(0)
}

fn configure_threads() {
    if let Some(n) = std::env::var(THREADS_ENV).ok().and_then(|v| v.trim().parse::<usize>().ok()) {
        if n > 0 {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
}

fn load_config(path: &Option<PathBuf>) -> std::result::Result<RunConfig, Failure> {
    let Some(path) = path else {
        return Ok(RunConfig::default());
    };
    let text = fs::read_to_string(path).map_err(|e| usage(ErrorKind::Io, format!("cannot read config {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| usage(ErrorKind::ValueValidation, format!("invalid config {}: {e}", path.display())))
}

/// Parses `args` and runs the subcommand; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    configure_threads();
    let outcome = load_config(&cli.config).and_then(|cfg| {
        let ctx = Ctx {
            format: cli.format.or(cfg.format).unwrap_or(Format::Json),
            out: cli.out.clone().or_else(|| cfg.out.clone()),
            cfg,
        };
        match &cli.command {
            Command::Price(a) => price(&ctx, a),
            Command::Check(a) => check(&ctx, a),
            Command::Martingale(a) => martingale(&ctx, a),
            Command::GaugeMartingale(a) => gauge_martingale(&ctx, a),
            Command::Surface(a) => surface(&ctx, a),
            Command::PayoffTable(a) => payoff_cmd(&ctx, a),
            Command::Simulate(a) => simulate(&ctx, a),
            Command::Hedge(a) => hedge(&ctx, a),
        }
    });
    match outcome {
        Ok(code) => code,
        Err(Failure::Usage(e)) => {
            let _ = e.print();
            e.exit_code()
        }
        Err(Failure::Numeric(e)) => {
            eprintln!("error: {e}");
            1
        }
    }
}
