use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::GridFunction;
use crate::params::ModelParams;
use crate::pricing::PriceSurface;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BetaOptions {
    /// Points with `|dC/dV|` below this fraction of its interior maximum are masked.
    pub rel_threshold: f64,
    /// Grid points within this distance of the boundary are masked.
    pub margin: usize,
}

impl Default for BetaOptions {
    fn default() -> Self {
        Self { rel_threshold: 1e-2, margin: 2 }
    }
}

/// Market price of volatility risk on the unmasked points; masked entries hold 0.
#[derive(Clone, Debug, PartialEq)]
pub struct BetaField {
    pub beta: GridFunction,
    pub valid: Vec<bool>,
}

impl BetaField {
    pub fn n_valid(&self) -> usize {
        self.valid.iter().filter(|&&v| v).count()
    }

    /// Max `|beta_self - beta_other|` over points valid in both.
    pub fn max_diff_on_common_mask(&self, other: &BetaField) -> Result<(f64, usize)> {
        if self.beta.grid() != other.beta.grid() {
            return Err(Error::GridMismatch);
        }
        let mut worst = 0.0f64;
        let mut n = 0;
        for k in 0..self.valid.len() {
            if self.valid[k] && other.valid[k] {
                worst = worst.max((self.beta.values()[k] - other.beta.values()[k]).abs());
                n += 1;
            }
        }
        Ok((worst, n))
    }
}

/// `beta = [C_t + r S C_S + (lambda + mu V) C_V + V S^2 C_SS / 2 + rho zeta V^{1/2+alpha} S C_SV
/// + k zeta^2 V^{2 alpha} C_VV - r C] / C_V`, with `k` the vol-of-vol factor, evaluated in
/// `(x, y)` by central differences and `C_t` from the two stored slices.
pub fn beta_field(surface: &PriceSurface, params: &ModelParams, opts: &BetaOptions) -> Result<BetaField> {
    let g = *surface.grid();
    let Some(ya) = g.y_axis().copied() else {
        return Err(Error::Domain("beta needs a two-dimensional surface".into()));
    };
    let c = surface.values();
    let later = surface.previous();
    let (nx, ny) = (g.nx(), g.ny());
    let (hx, hy) = (g.x_axis().spacing(), ya.spacing());
    let margin = opts.margin.max(1);
    let p = params;
    let kappa = p.vol_vol_factor();

    let mut cv = vec![0.0; g.len()];
    let mut num = vec![0.0; g.len()];
    let mut inside = vec![false; g.len()];
    for i in margin..nx.saturating_sub(margin) {
        for j in margin..ny.saturating_sub(margin) {
            let k = g.index(i, j);
            let y = ya.point(j);
            let v = y.exp();
            let f = |di: isize, dj: isize| c.at((i as isize + di) as usize, (j as isize + dj) as usize);
            let cx = (f(1, 0) - f(-1, 0)) / (2.0 * hx);
            let cy = (f(0, 1) - f(0, -1)) / (2.0 * hy);
            let cxx = (f(1, 0) - 2.0 * f(0, 0) + f(-1, 0)) / (hx * hx);
            let cyy = (f(0, 1) - 2.0 * f(0, 0) + f(0, -1)) / (hy * hy);
            let cxy = (f(1, 1) - f(1, -1) - f(-1, 1) + f(-1, -1)) / (4.0 * hx * hy);
            let ct = (later.at(i, j) - f(0, 0)) / surface.dt();
            let ev = (-y).exp();
            let n = ct + p.r * cx + (p.lambda + p.mu * v) * ev * cy + 0.5 * v * (cxx - cx)
                + p.rho * p.zeta * v.powf(0.5 + p.alpha) * ev * cxy
                + kappa * p.zeta * p.zeta * v.powf(2.0 * p.alpha) * ev * ev * (cyy - cy)
                - p.r * f(0, 0);
            cv[k] = ev * cy;
            num[k] = n;
            inside[k] = true;
        }
    }
    let scale = cv.iter().zip(&inside).filter(|(_, &m)| m).map(|(v, _)| v.abs()).fold(0.0, f64::max);
    // Round-off in a V-independent surface must not count as sensitivity.
    let floor = 1e-10 * c.values().iter().map(|v| v.abs()).fold(0.0, f64::max);
    let cut = (opts.rel_threshold * scale).max(floor);
    let mut beta = vec![0.0; g.len()];
    let mut valid = vec![false; g.len()];
    for k in 0..g.len() {
        if inside[k] && cv[k].abs() > cut && cv[k] != 0.0 {
            beta[k] = num[k] / cv[k];
            valid[k] = true;
        }
    }
    Ok(BetaField { beta: GridFunction::new(g, beta)?, valid })
}
