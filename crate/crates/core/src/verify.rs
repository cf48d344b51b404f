//! Self-check suite: exact identities, quadrature oracles, the finite-chain
//! inequalities and a few margined Monte-Carlo checks.
//!
//! Every row reports a measured value, the bound it is held to and the slack
//! (`bound - measured` for upper bounds). Deterministic checks use fixed
//! tolerances; Monte-Carlo checks allow 3 SE for one-sided bounds and 4 SE
//! for two-sided agreement.

use std::io::Write;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::diagnostics::{self, gaussian_conductance_bound};
use crate::error::Result;
use crate::finite_chain;
use crate::kernels::{self, KernelParams};
use crate::oracle1d::{self, Profile1D};
use crate::potential::Potential;
use crate::quad::{integrate, QuadOptions};
use crate::rng::{derive_seed, label_id, rng_from_seed, SimRng};
use crate::stats::Moments;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct VerifyOptions {
    /// Perturb the acceptance ratio used by the `log_accept_ratio_*` checks.
    /// A negative control: with it set, those checks must fail.
    pub corrupt_acceptance: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VerifyRow {
    pub check: String,
    pub measured: f64,
    pub bound: f64,
    pub slack: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct VerifyReport {
    pub rows: Vec<VerifyRow>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.rows.iter().all(|r| r.passed)
    }

    pub fn failures(&self) -> Vec<&VerifyRow> {
        self.rows.iter().filter(|r| !r.passed).collect()
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        for r in &self.rows {
            wtr.serialize(r)?;
        }
        wtr.flush()?;
        Ok(())
    }
}

struct Suite {
    seed: u64,
    rows: Vec<VerifyRow>,
}

impl Suite {
    fn rng(&self, name: &str) -> SimRng {
        rng_from_seed(self.stream(name))
    }

    fn stream(&self, name: &str) -> u64 {
        derive_seed(self.seed, label_id(name))
    }

    /// `measured ≤ bound`.
    fn at_most(&mut self, name: &str, measured: f64, bound: f64) {
        let slack = bound - measured;
        self.rows.push(VerifyRow { check: name.into(), measured, bound, slack, passed: slack >= 0.0 });
    }

    /// `measured ≥ bound`.
    fn at_least(&mut self, name: &str, measured: f64, bound: f64) {
        let slack = measured - bound;
        self.rows.push(VerifyRow { check: name.into(), measured, bound, slack, passed: slack >= 0.0 });
    }
}

fn normal_vec(rng: &mut SimRng, d: usize, scale: f64) -> Vec<f64> {
    (0..d).map(|_| scale * rng.sample::<f64, _>(StandardNormal)).collect()
}

fn sq_norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

/// Run the suite. Fails only on configuration or numerical errors; inequality
/// failures are reported in the rows.
pub fn run_verify(seed: u64, opts: VerifyOptions) -> Result<VerifyReport> {
    let mut s = Suite { seed, rows: Vec::new() };
    acceptance_checks(&mut s, opts)?;
    potential_checks(&mut s)?;
    oracle_checks(&mut s)?;
    finite_checks(&mut s)?;
    monte_carlo_checks(&mut s)?;
    Ok(VerifyReport { rows: s.rows })
}

fn acceptance_checks(s: &mut Suite, opts: VerifyOptions) -> Result<()> {
    let log_ratio = |p: &Potential, h: f64, x: &[f64], y: &[f64]| -> Result<f64> {
        let r = kernels::log_accept_ratio(p, h, x, y)?;
        Ok(if opts.corrupt_acceptance { r + 0.05 * h * (sq_norm(x) + sq_norm(y)) } else { r })
    };

    let (d, h) = (16, 0.3);
    let gauss = Potential::gaussian(d)?;
    let mut rng = s.rng("log_accept_ratio_gaussian_identity");
    let mut worst: f64 = 0.0;
    for _ in 0..2000 {
        let x = normal_vec(&mut rng, d, 1.5);
        let y = kernels::propose_mala(&gauss, h, &x, &mut rng)?;
        let closed = 0.25 * h * (sq_norm(&x) - sq_norm(&y));
        worst = worst.max((log_ratio(&gauss, h, &x, &y)? - closed).abs());
    }
    s.at_most("log_accept_ratio_gaussian_identity", worst, 1e-9);

    let adv = Potential::adversarial(d, 0.2)?;
    let mut rng = s.rng("log_accept_ratio_antisymmetry");
    let mut worst: f64 = 0.0;
    for _ in 0..2000 {
        let x = normal_vec(&mut rng, d, 1.0);
        let y = kernels::propose_mala(&adv, 0.5, &x, &mut rng)?;
        worst = worst.max((log_ratio(&adv, 0.5, &x, &y)? + log_ratio(&adv, 0.5, &y, &x)?).abs());
    }
    s.at_most("log_accept_ratio_antisymmetry", worst, 1e-10);

    // d = 1 acceptance at a point against quadrature
    let (h, x0) = (0.2f64, 1.0f64);
    let one = Potential::gaussian(1)?;
    let mean = (1.0 - h) * x0;
    let var = 2.0 * h;
    let exact = integrate(
        |y: f64| {
            let q = (-(y - mean).powi(2) / (2.0 * var)).exp() / (2.0 * std::f64::consts::PI * var).sqrt();
            q * (0.25 * h * (x0 * x0 - y * y)).min(0.0).exp()
        },
        mean - 15.0,
        mean + 15.0,
        QuadOptions::default(),
    )?;
    let mut rng = s.rng("log_accept_ratio_acceptance_quadrature");
    let mut m = Moments::default();
    for _ in 0..100_000 {
        let y = kernels::propose_mala(&one, h, &[x0], &mut rng)?;
        m.push(log_ratio(&one, h, &[x0], &y)?.min(0.0).exp());
    }
    s.at_most("log_accept_ratio_acceptance_quadrature", (m.mean() - exact).abs(), 4.0 * m.std_error());
    Ok(())
}

fn potential_checks(s: &mut Suite) -> Result<()> {
    let d = 4;
    let p = Potential::adversarial(d, 0.2)?;
    let mut rng = s.rng("potential_gradient_fd");
    let step = 1e-5;
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let x = normal_vec(&mut rng, d, 1.5);
        let (_, g) = p.evaluate(&x)?;
        for i in 0..d {
            let (mut a, mut b) = (x.clone(), x.clone());
            a[i] += step;
            b[i] -= step;
            let fd = (p.value(&a) - p.value(&b)) / (2.0 * step);
            worst = worst.max((fd - g[i]).abs() / g[i].abs().max(1.0));
        }
    }
    s.at_most("potential_gradient_fd", worst, 1e-6);

    let report = p.verify_regularity(200, s.stream("potential_curvature_bounds"));
    let (alpha, beta) = p.convexity_bounds();
    let excess = (alpha - report.min_curvature()).max(report.max_curvature() - beta);
    s.at_most("potential_curvature_bounds", excess, 1e-3);
    Ok(())
}

fn oracle_checks(s: &mut Suite) -> Result<()> {
    let gz = oracle1d::normalizing_constant(&Profile1D::gaussian())?;
    s.at_most("oracle_gaussian_normalizer", (gz - (2.0 * std::f64::consts::PI).sqrt()).abs(), 1e-12);

    let mut rng = s.rng("oracle_trig_moment_quadrature");
    let gauss = Profile1D::gaussian();
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let a: f64 = rng.gen_range(-3.0..3.0);
        let b: f64 = rng.gen_range(0.1..2.0);
        let gamma: f64 = rng.gen_range(0.0..0.25);
        let d = 1usize << rng.gen_range(2..10);
        let t = b * (d as f64).powf(gamma);
        for ell in 0..=4u32 {
            let closed = oracle1d::trig_sin_moment(ell, a, b, gamma, d)?;
            let quad = gauss.expectation(|x| x.powi(ell as i32) * (a + t * x).sin())?;
            worst = worst.max((closed - quad).abs());
        }
    }
    s.at_most("oracle_trig_moment_quadrature", worst, 1e-8);

    let eta = 0.2;
    let mut excess_ratio: f64 = 0.0;
    let mut kl_ratio: f64 = 0.0;
    for k in 8..=16 {
        let d = 1usize << k;
        let dd = d as f64;
        excess_ratio = excess_ratio.max(oracle1d::ripple_normalizer_excess(d, eta, 1.0)?.abs() / (2.0 * dd.powf(-0.8)));
        kl_ratio = kl_ratio.max(oracle1d::kl_gaussian_vs_adversarial(eta, d)? / (2.0 * dd.powf(0.2)));
    }
    s.at_most("oracle_normalizer_excess_ratio", excess_ratio, 1.0);
    s.at_most("oracle_kl_ratio", kl_ratio, 1.0);

    let d = 1usize << 14;
    let prof = Profile1D::from_potential(&Potential::adversarial(d, eta)?)?;
    let ratio = oracle1d::expected_cos(&prof, eta, d)? / (0.25 * (d as f64).powf(-2.0 * eta));
    s.at_least("oracle_expected_cos_ratio_low", ratio, 0.8);
    s.at_most("oracle_expected_cos_ratio_high", ratio, 1.2);

    let flat = oracle1d::coordinate_factor_scaled(0.7, 0.1, eta, 4096, 0.0)?;
    s.at_most("oracle_coordinate_factor_flat", (flat - 1.0).abs(), 1e-12);

    let prof = Profile1D::from_potential(&Potential::adversarial(64, eta)?)?;
    let table = oracle1d::inverse_cdf_table(&prof, oracle1d::DEFAULT_GRID)?;
    let worst = (1..1000)
        .map(|k| {
            let u = k as f64 / 1000.0;
            (table.cdf(table.inverse(u)) - u).abs()
        })
        .fold(0.0, f64::max);
    s.at_most("oracle_cdf_roundtrip", worst, 1e-9);
    Ok(())
}

fn finite_checks(s: &mut Suite) -> Result<()> {
    let suite = finite_chain::random_suite(500, 10, 50, s.stream("finite_chain"))?;
    for (check, slack) in suite.worst_by_check() {
        s.at_least(&format!("finite_{check}"), slack, -finite_chain::EXACT_TOL);
    }
    Ok(())
}

fn monte_carlo_checks(s: &mut Suite) -> Result<()> {
    // equal-covariance Gaussians at mean distance 2σ
    let sigma = 0.8f64;
    let mut shift = vec![0.0; 8];
    shift[0] = 2.0 * sigma;
    let p = diagnostics::IsoGaussian { mean: shift, var: sigma * sigma };
    let q = diagnostics::IsoGaussian { mean: vec![0.0; 8], var: sigma * sigma };
    let est = diagnostics::gaussian_pair_tv(&p, &q, 50_000, s.stream("mc_tv_closed_form"))?;
    let exact = oracle1d::gaussian_tv_equal_cov(2.0 * sigma, sigma * sigma)?;
    s.at_most("mc_tv_closed_form", (est.value - exact).abs(), 4.0 * est.std_error);

    let h = 0.2;
    let one = Potential::gaussian(1)?;
    let ula = diagnostics::stationary_second_moment(&one, &KernelParams::ula(h), 200_000, s.stream("mc_ula_variance"))?;
    s.at_most("mc_ula_variance", (ula.value - 1.0 / (1.0 - 0.5 * h)).abs(), 4.0 * ula.std_error);
    let mala = diagnostics::stationary_second_moment(&one, &KernelParams::mala(h), 200_000, s.stream("mc_mala_variance"))?;
    s.at_most("mc_mala_variance", (mala.value - 1.0).abs(), 4.0 * mala.std_error);

    let proj = diagnostics::projection_check_gaussian(0.05, 8, 100, 500, s.stream("mc_projection_gaussian"))?;
    s.at_most("mc_projection_gaussian", proj.lhs.value, proj.rhs.value + 3.0 * proj.combined_se);

    let d = 64;
    let h = (d as f64).powf(-0.2);
    let gauss = Potential::gaussian(d)?;
    let mut rng = s.rng("mc_conductance_bound");
    let mut worst = f64::NEG_INFINITY;
    for k in 0..5 {
        let mut x = normal_vec(&mut rng, d, 1.0);
        let norm = sq_norm(&x).sqrt();
        if norm > (d as f64).sqrt() {
            let scale = (d as f64).sqrt() / norm;
            x.iter_mut().for_each(|v| *v *= scale);
        }
        let acc = diagnostics::acceptance_at(&gauss, h, &x, 2000, derive_seed(s.stream("mc_conductance_bound"), k))?;
        let bound = gaussian_conductance_bound(sq_norm(&x), h, d);
        worst = worst.max(acc.acceptance.value - bound - 3.0 * acc.acceptance.std_error);
    }
    s.at_most("mc_conductance_bound", worst, 0.0);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn negative_control_names_ratio_checks() {
        let r = run_verify(5, VerifyOptions { corrupt_acceptance: true }).unwrap();
        let failed: Vec<_> = r.failures().iter().map(|f| f.check.clone()).collect();
        assert!(!failed.is_empty());
        assert!(failed.iter().all(|c| c.starts_with("log_accept_ratio")), "{failed:?}");
    }
}
