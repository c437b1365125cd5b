use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Grid, GridFunction};
use crate::operators::LinearOperator;
use crate::sparse::{BandedLu, CsrMatrix};

use super::OptionKind;

/// Relative residual every linear solve must meet.
pub const SOLVE_TOLERANCE: f64 = 1e-10;

/// What the boundary rows of the evolution system hold.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Boundary {
    /// Keep the operator's own (one-sided) boundary rows.
    Operator,
    /// Far-field option asymptotics in `x` and linearity `C_0 - 2 C_1 + C_2 = 0` in `y`.
    FarField { kind: OptionKind, strike: f64, rate: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EvolveOptions {
    /// 0 explicit, 1 implicit, 1/2 trapezoidal.
    pub theta: f64,
    /// Fully implicit steps taken first when `theta < 1`.
    pub rannacher_steps: usize,
    pub boundary: Boundary,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        Self { theta: 0.5, rannacher_steps: 2, boundary: Boundary::Operator }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    /// Largest relative residual over all solves.
    pub max_residual: f64,
    /// `dtau` limit for stability of the explicit part, when it applies.
    pub stability_bound: Option<f64>,
    pub warnings: Vec<String>,
}

/// Option values at `valuation_time`, plus the slice one step later for time derivatives.
#[derive(Clone, Debug, PartialEq)]
pub struct PriceSurface {
    values: GridFunction,
    previous: GridFunction,
    valuation_time: f64,
    dt: f64,
    diagnostics: Diagnostics,
}

impl PriceSurface {
    pub fn grid(&self) -> &Grid {
        self.values.grid()
    }

    pub fn values(&self) -> &GridFunction {
        &self.values
    }

    /// Slice at `valuation_time + dt`.
    pub fn previous(&self) -> &GridFunction {
        &self.previous
    }

    pub fn valuation_time(&self) -> f64 {
        self.valuation_time
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn diagnostics(&self) -> &Diagnostics {
        &self.diagnostics
    }

    pub fn interpolate(&self, x: f64, y: f64) -> Result<f64> {
        self.values.interpolate(x, y)
    }

    pub fn to_csv(&self) -> String {
        format!("# t={}\n{}", self.valuation_time, self.values.to_csv())
    }

    pub fn write_csv(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }
}

enum RowKind {
    Dirichlet { low: bool, x: f64 },
    Linearity(Vec<(usize, f64)>),
}

fn boundary_rows(grid: &Grid, boundary: Boundary) -> Vec<(usize, RowKind)> {
    let Boundary::FarField { .. } = boundary else {
        return Vec::new();
    };
    let (nx, ny) = (grid.nx(), grid.ny());
    let mut rows = Vec::new();
    for i in 0..nx {
        for j in 0..ny {
            let k = grid.index(i, j);
            if i == 0 || i == nx - 1 {
                rows.push((k, RowKind::Dirichlet { low: i == 0, x: grid.x_axis().point(i) }));
            } else if ny > 1 && j == 0 {
                rows.push((k, RowKind::Linearity(vec![(k, 1.0), (k + 1, -2.0), (k + 2, 1.0)])));
            } else if ny > 1 && j == ny - 1 {
                rows.push((k, RowKind::Linearity(vec![(k - 2, 1.0), (k - 1, -2.0), (k, 1.0)])));
            }
        }
    }
    rows
}

fn far_field(boundary: Boundary, low: bool, x: f64, tau: f64) -> f64 {
    match boundary {
        Boundary::Operator => unreachable!("operator boundary has no Dirichlet rows"),
        Boundary::FarField { kind, strike, rate } => {
            let pv = strike * (-rate * tau).exp();
            match (kind, low) {
                (OptionKind::Call, true) | (OptionKind::Put, false) => 0.0,
                (OptionKind::Call, false) => x.exp() - pv,
                (OptionKind::Put, true) => pv - x.exp(),
            }
        }
    }
}

struct Stepper {
    theta: f64,
    lhs: CsrMatrix,
    lu: BandedLu,
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x.abs()).fold(0.0, f64::max)
}

impl Stepper {
    fn new(a: &CsrMatrix, theta: f64, dtau: f64, rows: &[(usize, RowKind)]) -> Result<Self> {
        let n = a.dim();
        let mut lhs = CsrMatrix::identity(n).add(a, theta * dtau);
        let replacements: Vec<(usize, Vec<(usize, f64)>)> = rows
            .iter()
            .map(|(k, kind)| match kind {
                RowKind::Dirichlet { .. } => (*k, vec![(*k, 1.0)]),
                RowKind::Linearity(r) => (*k, r.clone()),
            })
            .collect();
        if !replacements.is_empty() {
            lhs = lhs.with_rows_replaced(&replacements);
        }
        let lu = BandedLu::factor(&lhs)?;
        Ok(Self { theta, lhs, lu })
    }

    /// Solves `lhs y = b`, refining once if needed; returns the relative residual.
    fn solve(&self, b: &[f64], step: usize) -> Result<(Vec<f64>, f64)> {
        let scale = inf_norm(b).max(1.0);
        let mut y = self.lu.solve(b);
        let residual = |y: &[f64]| -> Vec<f64> {
            let ay = self.lhs.mul_vec(y);
            b.iter().zip(ay).map(|(bi, ai)| bi - ai).collect()
        };
        let mut r = residual(&y);
        let mut rel = inf_norm(&r) / scale;
        if rel > SOLVE_TOLERANCE {
            let dy = self.lu.solve(&r);
            y.iter_mut().zip(dy).for_each(|(yi, d)| *yi += d);
            r = residual(&y);
            rel = inf_norm(&r) / scale;
        }
        if !(rel <= SOLVE_TOLERANCE) || y.iter().any(|v| !v.is_finite()) {
            return Err(Error::Solve {
                step,
                reason: format!("relative residual {rel:e} after one refinement (tolerance {SOLVE_TOLERANCE:e})"),
            });
        }
        Ok((y, rel))
    }
}

/// Backward evolution of `dC/dt = H C` from `terminal` at `t = maturity` to `t = 0`,
/// keeping the operator's own boundary rows and a Rannacher start when `theta = 1/2`.
pub fn evolve(h: &LinearOperator, terminal: &GridFunction, maturity: f64, n_steps: usize, theta: f64) -> Result<PriceSurface> {
    let rannacher_steps = if theta == 0.5 { 2 } else { 0 };
    evolve_with(h, terminal, maturity, n_steps, &EvolveOptions { theta, rannacher_steps, boundary: Boundary::Operator })
}

/// In `tau = T - t` each step solves
/// `(I + theta dtau H') C_new = (I - (1 - theta) dtau H') C_old` and then
/// discounts by `exp(-s dtau)`, where `s I` is the scalar shift split off `H`.
pub fn evolve_with(
    h: &LinearOperator,
    terminal: &GridFunction,
    maturity: f64,
    n_steps: usize,
    opts: &EvolveOptions,
) -> Result<PriceSurface> {
    let grid = *h.grid();
    if terminal.grid() != &grid {
        return Err(Error::GridMismatch);
    }
    if !(maturity > 0.0 && maturity.is_finite()) {
        return Err(Error::InvalidParams { field: "maturity", reason: format!("must be > 0, got {maturity}") });
    }
    if n_steps == 0 {
        return Err(Error::InvalidParams { field: "n_steps", reason: "must be >= 1".into() });
    }
    if !(0.0..=1.0).contains(&opts.theta) {
        return Err(Error::InvalidParams { field: "theta", reason: format!("must lie in [0, 1], got {}", opts.theta) });
    }
    let dtau = maturity / n_steps as f64;
    let (shift, rest) = h.split_scalar_shift();
    let a = rest.matrix();
    let discount = (-shift * dtau).exp();
    let rows = boundary_rows(&grid, opts.boundary);

    let mut diagnostics = Diagnostics::default();
    if opts.theta < 0.5 {
        let rho = (0..a.dim()).map(|i| a.row(i).map(|(_, v)| v.abs()).sum::<f64>()).fold(0.0, f64::max);
        let bound = 2.0 / ((1.0 - 2.0 * opts.theta) * rho);
        diagnostics.stability_bound = Some(bound);
        if dtau > bound {
            diagnostics
                .warnings
                .push(format!("dtau = {dtau:e} exceeds the explicit stability bound {bound:e}; expect growth"));
        }
    }

    let main = Stepper::new(&a, opts.theta, dtau, &rows)?;
    let startup = if opts.rannacher_steps > 0 && opts.theta < 1.0 { Some(Stepper::new(&a, 1.0, dtau, &rows)?) } else { None };

    let mut c = terminal.values().to_vec();
    let mut previous = c.clone();
    for step in 0..n_steps {
        let stepper = match &startup {
            Some(s) if step < opts.rannacher_steps => s,
            _ => &main,
        };
        let explicit = 1.0 - stepper.theta;
        let mut b = c.clone();
        if explicit != 0.0 {
            let ac = a.mul_vec(&c);
            b.iter_mut().zip(ac).for_each(|(bi, v)| *bi -= explicit * dtau * v);
        }
        let tau_new = (step + 1) as f64 * dtau;
        for (k, kind) in &rows {
            b[*k] = match kind {
                RowKind::Dirichlet { low, x } => far_field(opts.boundary, *low, *x, tau_new) / discount,
                RowKind::Linearity(_) => 0.0,
            };
        }
        let (y, rel) = stepper.solve(&b, step)?;
        diagnostics.max_residual = diagnostics.max_residual.max(rel);
        previous = std::mem::replace(&mut c, y.into_iter().map(|v| discount * v).collect());
    }
    let values = GridFunction::new(grid, c).map_err(|e| Error::Solve { step: n_steps, reason: e.to_string() })?;
    let previous = GridFunction::new(grid, previous)?;
    Ok(PriceSurface { values, previous, valuation_time: 0.0, dt: dtau, diagnostics })
}
