use std::io::{Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::ModelParams;
use crate::pricing::OptionContract;

/// Variance floor applied after reflection.
pub const V_FLOOR: f64 = 1e-8;

const MAGIC: &[u8; 8] = b"MGPATHS1";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Euler,
    LogEuler,
}

/// Which time slices an ensemble keeps.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Record {
    #[default]
    Full,
    /// Only `t = 0` and `t = T`.
    Endpoints,
}

/// Simulated paths stored row-major, one row of `times.len()` values per path.
#[derive(Clone, Debug, PartialEq)]
pub struct PathEnsemble {
    times: Vec<f64>,
    s: Vec<f64>,
    v: Option<Vec<f64>>,
    n_paths: usize,
    seed: u64,
    scheme: Scheme,
    drift: f64,
}

impl PathEnsemble {
    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn n_paths(&self) -> usize {
        self.n_paths
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    /// Drift `phi` the price paths were generated with.
    pub fn drift(&self) -> f64 {
        self.drift
    }

    pub fn maturity(&self) -> f64 {
        *self.times.last().expect("ensemble has at least two times")
    }

    pub fn s_path(&self, p: usize) -> &[f64] {
        let n = self.times.len();
        &self.s[p * n..(p + 1) * n]
    }

    pub fn v_path(&self, p: usize) -> Option<&[f64]> {
        let n = self.times.len();
        self.v.as_ref().map(|v| &v[p * n..(p + 1) * n])
    }

    pub fn terminal_s(&self) -> Vec<f64> {
        (0..self.n_paths).map(|p| *self.s_path(p).last().unwrap()).collect()
    }

    pub fn terminal_v(&self) -> Option<Vec<f64>> {
        self.v.as_ref().map(|_| (0..self.n_paths).map(|p| *self.v_path(p).unwrap().last().unwrap()).collect())
    }

    /// `path,s_first,s_last[,v_first,v_last]`.
    pub fn to_csv(&self) -> String {
        use std::fmt::Write as _;
        let mut out = String::from(if self.v.is_some() { "path,s_first,s_last,v_first,v_last\n" } else { "path,s_first,s_last\n" });
        for p in 0..self.n_paths {
            let s = self.s_path(p);
            let _ = write!(out, "{p},{:.16e},{:.16e}", s[0], s[s.len() - 1]);
            if let Some(v) = self.v_path(p) {
                let _ = write!(out, ",{:.16e},{:.16e}", v[0], v[v.len() - 1]);
            }
            out.push('\n');
        }
        out
    }

    /// Binary dump: magic, then `n_paths, n_times, has_v, seed` as little-endian
    /// u64, then times, S rows and (if present) V rows as little-endian f64.
    pub fn write_binary(&self, mut w: impl Write) -> Result<()> {
        w.write_all(MAGIC)?;
        let header = [self.n_paths as u64, self.times.len() as u64, self.v.is_some() as u64, self.seed];
        for h in header {
            w.write_all(&h.to_le_bytes())?;
        }
        let body = self.times.iter().chain(&self.s).chain(self.v.iter().flatten());
        for x in body {
            w.write_all(&x.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn save_binary(&self, path: impl AsRef<Path>) -> Result<()> {
        let f = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_binary(f)
    }

    /// Reads a dump written by [`PathEnsemble::write_binary`]. Scheme and drift are not stored.
    pub fn read_binary(mut r: impl Read) -> Result<(Vec<f64>, Vec<f64>, Option<Vec<f64>>, u64)> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Format("bad magic".into()));
        }
        let mut u = [0u64; 4];
        for x in &mut u {
            let mut b = [0u8; 8];
            r.read_exact(&mut b)?;
            *x = u64::from_le_bytes(b);
        }
        let (n_paths, n_times, has_v, seed) = (u[0] as usize, u[1] as usize, u[2] != 0, u[3]);
        let mut read_f64s = |n: usize| -> Result<Vec<f64>> {
            let mut buf = vec![0u8; n * 8];
            r.read_exact(&mut buf).map_err(|e| Error::Format(format!("truncated body: {e}")))?;
            Ok(buf.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
        };
        let times = read_f64s(n_times)?;
        let s = read_f64s(n_paths * n_times)?;
        let v = if has_v { Some(read_f64s(n_paths * n_times)?) } else { None };
        Ok((times, s, v, seed))
    }
}

fn path_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Generator for the price noise of path `p`; the variance noise uses the next stream.
pub(crate) fn price_rng(seed: u64, p: usize) -> ChaCha8Rng {
    path_rng(seed, 2 * p as u64)
}

fn variance_rng(seed: u64, p: usize) -> ChaCha8Rng {
    path_rng(seed, 2 * p as u64 + 1)
}

/// `(Z1, rho Z1 + sqrt(1 - rho^2) Z')`.
pub fn correlate(rho: f64, z1: f64, z_prime: f64) -> (f64, f64) {
    (z1, rho * z1 + (1.0 - rho * rho).max(0.0).sqrt() * z_prime)
}

/// Empirical correlation of `n` noise pairs drawn exactly as [`simulate_mg`] draws them.
pub fn noise_correlation(rho: f64, n: usize, seed: u64) -> f64 {
    let mut a = price_rng(seed, 0);
    let mut b = variance_rng(seed, 0);
    let (mut s1, mut s2, mut s11, mut s22, mut s12) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for _ in 0..n {
        let (z1, z2) = correlate(rho, a.sample(StandardNormal), b.sample(StandardNormal));
        s1 += z1;
        s2 += z2;
        s11 += z1 * z1;
        s22 += z2 * z2;
        s12 += z1 * z2;
    }
    let nf = n as f64;
    let cov = s12 / nf - s1 * s2 / (nf * nf);
    let v1 = s11 / nf - s1 * s1 / (nf * nf);
    let v2 = s22 / nf - s2 * s2 / (nf * nf);
    cov / (v1 * v2).sqrt()
}

fn check_inputs(s0: f64, maturity: f64, n_steps: usize, n_paths: usize) -> Result<()> {
    if !(s0 > 0.0 && s0.is_finite()) {
        return Err(Error::InvalidParams { field: "s0", reason: format!("must be > 0, got {s0}") });
    }
    if !(maturity > 0.0 && maturity.is_finite()) {
        return Err(Error::InvalidParams { field: "maturity", reason: format!("must be > 0, got {maturity}") });
    }
    if n_steps == 0 || n_paths == 0 {
        return Err(Error::InvalidParams { field: "n_steps", reason: "n_steps and n_paths must be >= 1".into() });
    }
    Ok(())
}

fn time_axis(maturity: f64, n_steps: usize, record: Record) -> Vec<f64> {
    match record {
        Record::Full => (0..=n_steps).map(|i| maturity * i as f64 / n_steps as f64).collect(),
        Record::Endpoints => vec![0.0, maturity],
    }
}

/// One log-Euler step of the price with variance `var` and volatility `vol = sqrt(var)`.
pub(crate) fn log_step(s: f64, drift: f64, var: f64, vol: f64, dt: f64, z: f64) -> f64 {
    s * ((drift - 0.5 * var) * dt + vol * dt.sqrt() * z).exp()
}

pub fn simulate_gbm(params: &ModelParams, s0: f64, maturity: f64, n_steps: usize, n_paths: usize, seed: u64) -> Result<PathEnsemble> {
    simulate_gbm_with(params, s0, maturity, n_steps, n_paths, seed, Record::Full)
}

/// `ln S` advances by `(phi - sigma^2/2) dt + sigma sqrt(dt) Z`.
pub fn simulate_gbm_with(
    params: &ModelParams,
    s0: f64,
    maturity: f64,
    n_steps: usize,
    n_paths: usize,
    seed: u64,
    record: Record,
) -> Result<PathEnsemble> {
    params.validate()?;
    check_inputs(s0, maturity, n_steps, n_paths)?;
    let dt = maturity / n_steps as f64;
    let (phi, sigma) = (params.phi, params.sigma);
    let var = sigma * sigma;
    let times = time_axis(maturity, n_steps, record);
    let width = times.len();
    let mut s = vec![0.0; n_paths * width];
    s.par_chunks_mut(width).enumerate().for_each(|(p, row)| {
        let mut rng = price_rng(seed, p);
        let mut x = s0;
        row[0] = s0;
        for step in 1..=n_steps {
            x = log_step(x, phi, var, sigma, dt, rng.sample(StandardNormal));
            if record == Record::Full {
                row[step] = x;
            }
        }
        row[width - 1] = x;
    });
    Ok(PathEnsemble { times, s, v: None, n_paths, seed, scheme: Scheme::LogEuler, drift: phi })
}

/// Variance: exact linear drift over each step plus an Euler diffusion increment,
/// reflected and floored at [`V_FLOOR`]. Price: log-Euler with `sigma = sqrt(V)`.
pub fn simulate_mg(
    params: &ModelParams,
    s0: f64,
    v0: f64,
    maturity: f64,
    n_steps: usize,
    n_paths: usize,
    seed: u64,
) -> Result<PathEnsemble> {
    simulate_mg_with(params, s0, v0, maturity, n_steps, n_paths, seed, Record::Full)
}

#[allow(clippy::too_many_arguments)]
pub fn simulate_mg_with(
    params: &ModelParams,
    s0: f64,
    v0: f64,
    maturity: f64,
    n_steps: usize,
    n_paths: usize,
    seed: u64,
    record: Record,
) -> Result<PathEnsemble> {
    params.validate()?;
    check_inputs(s0, maturity, n_steps, n_paths)?;
    if !(v0 > 0.0 && v0.is_finite()) {
        return Err(Error::InvalidParams { field: "v0", reason: format!("must be > 0, got {v0}") });
    }
    let dt = maturity / n_steps as f64;
    let p = *params;
    let decay = (p.mu * dt).exp();
    // lambda * (e^{mu dt} - 1) / mu, with the mu -> 0 limit.
    let inflow = if p.mu == 0.0 { p.lambda * dt } else { p.lambda * (p.mu * dt).exp_m1() / p.mu };
    let sqdt = dt.sqrt();
    let times = time_axis(maturity, n_steps, record);
    let width = times.len();
    let mut s = vec![0.0; n_paths * width];
    let mut v = vec![0.0; n_paths * width];
    s.par_chunks_mut(width).zip(v.par_chunks_mut(width)).enumerate().for_each(|(path, (srow, vrow))| {
        let mut ra = price_rng(seed, path);
        let mut rb = variance_rng(seed, path);
        let (mut x, mut var) = (s0, v0);
        srow[0] = s0;
        vrow[0] = v0;
        for step in 1..=n_steps {
            let (z1, z2) = correlate(p.rho, ra.sample(StandardNormal), rb.sample(StandardNormal));
            let next_v = var * decay + inflow + p.zeta * var.powf(p.alpha) * sqdt * z2;
            x = log_step(x, p.phi, var, var.sqrt(), dt, z1);
            var = next_v.abs().max(V_FLOOR);
            if record == Record::Full {
                srow[step] = x;
                vrow[step] = var;
            }
        }
        srow[width - 1] = x;
        vrow[width - 1] = var;
    });
    Ok(PathEnsemble { times, s, v: Some(v), n_paths, seed, scheme: Scheme::LogEuler, drift: p.phi })
}

/// Pairwise (cascade) sum; the reduction order depends only on the length.
pub fn pairwise_sum(x: &[f64]) -> f64 {
    if x.len() <= 32 {
        return x.iter().sum();
    }
    let mid = x.len() / 2;
    pairwise_sum(&x[..mid]) + pairwise_sum(&x[mid..])
}

/// Mean and standard error (sample std over `sqrt(n)`).
pub fn mean_and_se(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = pairwise_sum(x) / n;
    if x.len() < 2 {
        return (mean, 0.0);
    }
    let dev: Vec<f64> = x.iter().map(|v| (v - mean) * (v - mean)).collect();
    let var = pairwise_sum(&dev) / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Discounted mean payoff and its standard error. The ensemble must have been simulated with `phi = r`.
pub fn mc_price(ensemble: &PathEnsemble, contract: &OptionContract, r: f64) -> Result<(f64, f64)> {
    contract.validate()?;
    if ensemble.drift != r {
        return Err(Error::DriftMismatch { drift: ensemble.drift, rate: r });
    }
    let t = ensemble.maturity();
    if (t - contract.maturity).abs() > 1e-12 * t.max(1.0) {
        return Err(Error::Domain(format!("ensemble horizon {t} differs from contract maturity {}", contract.maturity)));
    }
    let payoffs: Vec<f64> = ensemble.terminal_s().iter().map(|&s| contract.payoff(s)).collect();
    let (m, se) = mean_and_se(&payoffs);
    let df = (-r * t).exp();
    Ok((df * m, df * se))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pricing::{bs_closed_form, OptionKind};

    fn bs(sigma: f64) -> ModelParams {
        ModelParams::black_scholes(0.05, sigma)
    }

    #[test]
    fn zero_volatility_is_deterministic() {
        let e = simulate_gbm(&bs(0.0), 100.0, 1.0, 10, 50, 1).unwrap();
        let target = 100.0 * 0.05f64.exp();
        for s in e.terminal_s() {
            assert!((s / target - 1.0).abs() < 1e-14);
        }
        let call = OptionContract::call(90.0, 1.0).unwrap();
        let (price, se) = mc_price(&e, &call, 0.05).unwrap();
        assert!((price - (-0.05f64).exp() * (target - 90.0)).abs() < 1e-12);
        assert!(se < 1e-12);
    }

    #[test]
    fn replay_is_bit_identical_across_thread_counts() {
        let p = ModelParams { zeta: 0.4, rho: -0.3, mu: -1.0, lambda: 0.04, ..Default::default() };
        let a = simulate_mg(&p, 100.0, 0.04, 1.0, 20, 300, 9).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let b = pool.install(|| simulate_mg(&p, 100.0, 0.04, 1.0, 20, 300, 9).unwrap());
        assert_eq!(a, b);
        assert_ne!(a, simulate_mg(&p, 100.0, 0.04, 1.0, 20, 300, 10).unwrap());
    }

    #[test]
    fn frozen_variance_matches_gbm_draws() {
        let p = ModelParams { phi: 0.07, ..Default::default() };
        let mg = simulate_mg(&p, 100.0, 0.04, 1.0, 12, 200, 3).unwrap();
        let gbm = simulate_gbm(&ModelParams { sigma: 0.2, ..p }, 100.0, 1.0, 12, 200, 3).unwrap();
        for (a, b) in mg.terminal_s().iter().zip(gbm.terminal_s()) {
            assert!((a / b - 1.0).abs() < 1e-12);
        }
        assert!(mg.terminal_v().unwrap().iter().all(|&v| v == 0.04));
    }

    #[test]
    fn mean_reverting_variance_without_noise() {
        let p = ModelParams { lambda: 0.04, mu: -2.0, ..Default::default() };
        let e = simulate_mg(&p, 100.0, 0.09, 1.0, 37, 4, 5).unwrap();
        let exact = 0.09 * (-2.0f64).exp() + (0.04 / 2.0) * (1.0 - (-2.0f64).exp());
        for v in e.terminal_v().unwrap() {
            assert!((v - exact).abs() < 1e-14 * exact, "{v} vs {exact}");
        }
    }

    #[test]
    fn noise_correlation_sweep() {
        let n = 100_000;
        for rho in [-1.0, -0.5, 0.0, 0.5, 1.0] {
            let c = noise_correlation(rho, n, 11);
            assert!((c - rho).abs() <= 3.0 / (n as f64).sqrt(), "{rho}: {c}");
        }
    }

    #[test]
    fn variance_stays_above_floor() {
        let p = ModelParams { zeta: 2.0, alpha: 1.0, mu: -5.0, lambda: 0.0, ..Default::default() };
        let e = simulate_mg(&p, 100.0, 0.01, 1.0, 50, 200, 2).unwrap();
        for path in 0..e.n_paths() {
            assert!(e.v_path(path).unwrap().iter().all(|&v| v >= V_FLOOR));
            assert!(e.s_path(path).iter().all(|&s| s > 0.0));
        }
    }

    #[test]
    fn sweep_against_closed_form() {
        for sigma in [0.1, 0.2, 0.4] {
            let p = bs(sigma);
            let e = simulate_gbm_with(&p, 100.0, 1.0, 1, 200_000, 17, Record::Endpoints).unwrap();
            for k in [80.0, 100.0, 120.0] {
                for kind in [OptionKind::Call, OptionKind::Put] {
                    let c = OptionContract::new(kind, k, 0.0, 1.0).unwrap();
                    let (price, se) = mc_price(&e, &c, 0.05).unwrap();
                    let exact = bs_closed_form(&p, &c, 100.0).unwrap();
                    assert!((price - exact).abs() <= 3.0 * se + 1e-12, "{sigma} {k} {kind:?}: {price} +/- {se} vs {exact}");
                }
            }
        }
    }

    #[test]
    fn risk_neutral_precondition() {
        let e = simulate_gbm(&ModelParams { phi: 0.1, ..bs(0.2) }, 100.0, 1.0, 2, 10, 0).unwrap();
        let err = mc_price(&e, &OptionContract::call(100.0, 1.0).unwrap(), 0.05).unwrap_err();
        assert!(err.to_string().contains("risk-neutral pricing requires phi = r"));
    }

    #[test]
    fn exports_round_trip() {
        let p = ModelParams { zeta: 0.3, ..Default::default() };
        let e = simulate_mg(&p, 100.0, 0.04, 0.5, 4, 3, 8).unwrap();
        let csv = e.to_csv();
        assert_eq!(csv.lines().count(), 4);
        assert!(csv.starts_with("path,s_first,s_last,v_first,v_last\n"));
        let mut buf = Vec::new();
        e.write_binary(&mut buf).unwrap();
        assert_eq!(&buf[..8], b"MGPATHS1");
        assert_eq!(buf.len(), 8 + 32 + 8 * (5 + 2 * 15));
        let (times, s, v, seed) = PathEnsemble::read_binary(&buf[..]).unwrap();
        assert_eq!(times, e.times);
        assert_eq!(s, e.s);
        assert_eq!(v, e.v);
        assert_eq!(seed, 8);
        assert!(PathEnsemble::read_binary(&buf[..20]).is_err());
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(matches!(PathEnsemble::read_binary(&bad[..]), Err(Error::Format(_))));
    }

    #[test]
    fn pairwise_sum_is_accurate() {
        let x = vec![0.1; 1_000_001];
        assert!((pairwise_sum(&x) - 100_000.1).abs() < 1e-8);
    }
}
