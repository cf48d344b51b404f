//! One-dimensional quadrature oracles and closed forms.
//!
//! Everything here is computed independently of the Markov kernels so it can
//! serve as the reference side of the statistical checks.

use std::f64::consts::PI;
use std::sync::Arc;

use statrs::function::erf::erf;

use crate::error::{Error, Result};
use crate::potential::{ripple_params, Potential, ScalarFn};
use crate::quad::{gk15, integrate, QuadOptions};

const SQRT_2PI: f64 = 2.506_628_274_631_000_5;

/// A 1-D target `pi_1 ∝ exp(-v)` truncated to `[-radius, radius]`.
#[derive(Clone)]
pub struct Profile1D {
    v: ScalarFn,
    pub radius: f64,
    pub tolerance: f64,
    /// Lower bound on `v''`; used for the truncation radius and tail bound.
    pub alpha: f64,
}

impl std::fmt::Debug for Profile1D {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Profile1D")
            .field("radius", &self.radius)
            .field("tolerance", &self.tolerance)
            .field("alpha", &self.alpha)
            .finish_non_exhaustive()
    }
}

pub const DEFAULT_TOLERANCE: f64 = 1e-12;

impl Profile1D {
    pub fn new(v: impl Fn(f64) -> f64 + Send + Sync + 'static, alpha: f64, tolerance: f64) -> Result<Self> {
        if !(alpha > 0.0) || !(tolerance > 0.0) {
            return Err(Error::Input("profile needs alpha > 0 and tolerance > 0".into()));
        }
        Ok(Profile1D {
            v: Arc::new(v),
            radius: 10f64.max(10.0 / alpha.sqrt()),
            tolerance,
            alpha,
        })
    }

    pub fn gaussian() -> Self {
        Self::new(|t| 0.5 * t * t, 1.0, DEFAULT_TOLERANCE).expect("valid constants")
    }

    /// `v(t) = t²/2 - amplitude/(2d^{2η}) cos(d^η t)`; `amplitude = 1` is the
    /// adversarial coordinate profile, `amplitude = 0` the standard Gaussian.
    pub fn ripple(d: usize, eta: f64, amplitude: f64) -> Self {
        let (amp, freq) = ripple_params(d, eta);
        let amp = amp * amplitude;
        let alpha = (1.0 - amp * freq * freq).max(0.5);
        Self::new(move |t| 0.5 * t * t - amp * (freq * t).cos(), alpha, DEFAULT_TOLERANCE).expect("valid constants")
    }

    /// Coordinate profile of a separable potential.
    pub fn from_potential(p: &Potential) -> Result<Self> {
        if !p.is_separable() {
            return Err(Error::Unsupported("target is not separable".into()));
        }
        let (alpha, _) = p.convexity_bounds();
        let q = p.clone();
        Self::new(move |t| q.profile_value(t).expect("separable"), alpha, DEFAULT_TOLERANCE)
    }

    pub fn with_tolerance(mut self, tolerance: f64) -> Self {
        self.tolerance = tolerance;
        self
    }

    pub fn v(&self, t: f64) -> f64 {
        (self.v)(t)
    }

    /// Upper bound on the fraction of mass outside `[-R, R]`, from
    /// `v(t) ≥ v(0) + α t²/2` (minimizer at the origin).
    pub fn tail_mass_bound(&self) -> f64 {
        let tail = statrs::function::erf::erfc(self.radius * (0.5 * self.alpha).sqrt());
        let dominating = (-self.v(0.0)).exp() * (2.0 * PI / self.alpha).sqrt() * tail;
        match self.normalizing_constant() {
            Ok(z) if z > 0.0 => dominating / z,
            _ => f64::INFINITY,
        }
    }

    fn opts(&self, abs_tol: f64) -> QuadOptions {
        QuadOptions {
            abs_tol,
            rel_tol: 0.0,
            initial_pieces: 64,
            max_segments: 50_000,
        }
    }

    /// `∫ exp(-v)` over the truncation window.
    pub fn normalizing_constant(&self) -> Result<f64> {
        integrate(|t| (-self.v(t)).exp(), -self.radius, self.radius, self.opts(self.tolerance))
    }

    /// `E_{pi_1}[g]` to absolute tolerance `self.tolerance`.
    pub fn expectation<G: Fn(f64) -> f64>(&self, g: G) -> Result<f64> {
        let z = integrate(|t| (-self.v(t)).exp(), -self.radius, self.radius, self.opts(1e-3 * self.tolerance))?;
        let num = integrate(|t| g(t) * (-self.v(t)).exp(), -self.radius, self.radius, self.opts(0.5 * self.tolerance * z))?;
        Ok(num / z)
    }
}

pub fn quad_expectation<G: Fn(f64) -> f64>(prof: &Profile1D, g: G) -> Result<f64> {
    prof.expectation(g)
}

pub fn normalizing_constant(prof: &Profile1D) -> Result<f64> {
    prof.normalizing_constant()
}

/// `E_{pi_1}[cos(d^η x)]`.
pub fn expected_cos(prof: &Profile1D, eta: f64, d: usize) -> Result<f64> {
    let freq = (d as f64).powf(eta);
    prof.expectation(|t| (freq * t).cos())
}

/// `E_γ[exp(ε cos(ω ξ))] - 1` for the ripple of `(d, η, amplitude)`, i.e.
/// `Z/√(2π) - 1`, integrated as `expm1` to avoid cancellation.
pub fn ripple_normalizer_excess(d: usize, eta: f64, amplitude: f64) -> Result<f64> {
    let (amp, freq) = ripple_params(d, eta);
    let eps = amp * amplitude;
    let opts = QuadOptions {
        abs_tol: 1e-18,
        rel_tol: 1e-12,
        initial_pieces: 128,
        max_segments: 50_000,
    };
    let v = integrate(|t| (eps * (freq * t).cos()).exp_m1() * (-0.5 * t * t).exp(), -12.0, 12.0, opts)?;
    Ok(v / SQRT_2PI)
}

/// `E[ξ^ℓ sin(a + b d^γ ξ)]` for `ξ ~ N(0, 1)`, `ℓ ≤ 4`.
///
/// With `t = b d^γ` the moment is `sin(a + ℓπ/2) He_ℓ(t) exp(-t²/2)`, where
/// `He_ℓ` is the probabilists' Hermite polynomial.
pub fn trig_sin_moment(ell: u32, a: f64, b: f64, gamma: f64, d: usize) -> Result<f64> {
    let t = b * (d as f64).powf(gamma);
    let hermite = match ell {
        0 => 1.0,
        1 => t,
        2 => t * t - 1.0,
        3 => t * (t * t - 3.0),
        4 => {
            let t2 = t * t;
            t2 * t2 - 6.0 * t2 + 3.0
        }
        _ => return Err(Error::Unsupported(format!("moment order {ell} > 4"))),
    };
    let phase = match ell % 4 {
        0 => a.sin(),
        1 => a.cos(),
        2 => -a.sin(),
        _ => -a.cos(),
    };
    Ok(phase * hermite * (-0.5 * t * t).exp())
}

/// `KL(γ ‖ pi_η)` between the standard Gaussian and the adversarial product
/// target: `d ln(Z/√(2π)) - (d/(2d^{2η})) e^{-d^{2η}/2}`.
pub fn kl_gaussian_vs_adversarial(eta: f64, d: usize) -> Result<f64> {
    kl_gaussian_vs_ripple(eta, d, 1.0)
}

pub fn kl_gaussian_vs_ripple(eta: f64, d: usize, amplitude: f64) -> Result<f64> {
    if !(eta > 0.0 && eta < 0.25) {
        return Err(Error::Input(format!("eta must lie in (0, 1/4), got {eta}")));
    }
    let (amp, freq) = ripple_params(d, eta);
    let eps = amp * amplitude;
    let excess = ripple_normalizer_excess(d, eta, amplitude)?;
    let gauss_cos = (-0.5 * freq * freq).exp();
    let dd = d as f64;
    Ok(dd * excess.ln_1p() - dd * eps * gauss_cos)
}

/// Per-coordinate factor of the control bound in the lower-bound argument:
/// `E exp[cos(ω y)/(2d^{2η}) + ((1-h)y - x₁) sin(ω y)/(4d^η) - h sin²(ω y)/(16 d^{2η})]`
/// with `y ~ N((1-h)x₁/(1+h²), 2h/(1+h²))`, `ω = d^η`.
pub fn coordinate_factor(x1: f64, h: f64, eta: f64, d: usize) -> Result<f64> {
    coordinate_factor_scaled(x1, h, eta, d, 1.0)
}

/// [`coordinate_factor`] with the ripple amplitude multiplied by `amplitude`.
pub fn coordinate_factor_scaled(x1: f64, h: f64, eta: f64, d: usize, amplitude: f64) -> Result<f64> {
    if !(h > 0.0 && h < 1.0) {
        return Err(Error::Input(format!("h must lie in (0, 1), got {h}")));
    }
    let freq = (d as f64).powf(eta);
    let a2 = amplitude / (2.0 * freq * freq);
    let a1 = amplitude / (4.0 * freq);
    let a3 = amplitude * h / (16.0 * freq * freq);
    let mean = (1.0 - h) * x1 / (1.0 + h * h);
    let sd = (2.0 * h / (1.0 + h * h)).sqrt();
    let integrand = |xi: f64| {
        let y = mean + sd * xi;
        let (s, c) = (freq * y).sin_cos();
        let e = a2 * c + ((1.0 - h) * y - x1) * s * a1 - a3 * s * s;
        e.exp() * (-0.5 * xi * xi).exp()
    };
    let opts = QuadOptions {
        abs_tol: 1e-14,
        rel_tol: 0.0,
        initial_pieces: 96,
        max_segments: 50_000,
    };
    Ok(integrate(integrand, -12.0, 12.0, opts)? / SQRT_2PI)
}

/// `2Φ(Δ/(2σ)) - 1`, the total variation between two isotropic Gaussians
/// with common covariance `σ² I` and mean distance `Δ`.
pub fn gaussian_tv_equal_cov(mean_dist: f64, sigma2: f64) -> Result<f64> {
    if !(sigma2 > 0.0) {
        return Err(Error::Input("sigma2 must be positive".into()));
    }
    let z = mean_dist.abs() / (2.0 * sigma2.sqrt());
    Ok(erf(z / std::f64::consts::SQRT_2))
}

/// Standard normal CDF.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * statrs::function::erf::erfc(-z / std::f64::consts::SQRT_2)
}

/// Monotone piecewise-cubic CDF of a [`Profile1D`] on a uniform grid.
///
/// Nodes carry the exact cumulative mass (Gauss–Kronrod per cell) and the
/// normalized density as slope; slopes are limited Fritsch–Carlson style so
/// each cell is monotone.
#[derive(Clone, Debug)]
pub struct CdfTable {
    grid: Vec<f64>,
    cdf: Vec<f64>,
    slope: Vec<f64>,
    // guide[k] = first cell whose right cdf exceeds k / guide.len()
    guide: Vec<u32>,
    pub tolerance: f64,
}

impl CdfTable {
    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn cdf_values(&self) -> &[f64] {
        &self.cdf
    }

    /// `F(x)`; 0 left of the grid, 1 right of it.
    pub fn cdf(&self, x: f64) -> f64 {
        let n = self.grid.len();
        if x <= self.grid[0] {
            return 0.0;
        }
        if x >= self.grid[n - 1] {
            return 1.0;
        }
        let dx = self.grid[1] - self.grid[0];
        let k = (((x - self.grid[0]) / dx) as usize).min(n - 2);
        self.eval_cell(k, (x - self.grid[k]) / dx)
    }

    fn eval_cell(&self, k: usize, s: f64) -> f64 {
        let dx = self.grid[k + 1] - self.grid[k];
        let (f0, f1) = (self.cdf[k], self.cdf[k + 1]);
        let (m0, m1) = (self.slope[k] * dx, self.slope[k + 1] * dx);
        let s2 = s * s;
        let s3 = s2 * s;
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        h00 * f0 + h10 * m0 + h01 * f1 + h11 * m1
    }

    fn eval_cell_deriv(&self, k: usize, s: f64) -> f64 {
        let dx = self.grid[k + 1] - self.grid[k];
        let (f0, f1) = (self.cdf[k], self.cdf[k + 1]);
        let (m0, m1) = (self.slope[k] * dx, self.slope[k + 1] * dx);
        let s2 = s * s;
        (6.0 * s2 - 6.0 * s) * (f0 - f1) + (3.0 * s2 - 4.0 * s + 1.0) * m0 + (3.0 * s2 - 2.0 * s) * m1
    }

    /// Generalized inverse `F^{-1}(u)` for `u ∈ [0, 1]`.
    pub fn inverse(&self, u: f64) -> f64 {
        let n = self.grid.len();
        let u = u.clamp(0.0, 1.0);
        let g = ((u * self.guide.len() as f64) as usize).min(self.guide.len() - 1);
        let mut k = self.guide[g] as usize;
        while k + 2 < n && self.cdf[k + 1] < u {
            k += 1;
        }
        let (lo_f, hi_f) = (self.cdf[k], self.cdf[k + 1]);
        if hi_f <= lo_f {
            return self.grid[k];
        }
        // safeguarded Newton on the local parameter
        let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
        let mut s = ((u - lo_f) / (hi_f - lo_f)).clamp(0.0, 1.0);
        for _ in 0..60 {
            let f = self.eval_cell(k, s) - u;
            if f.abs() <= 1e-15 {
                break;
            }
            if f > 0.0 {
                hi = s;
            } else {
                lo = s;
            }
            let df = self.eval_cell_deriv(k, s);
            let mut next = if df > 0.0 { s - f / df } else { f64::NAN };
            if !(next > lo && next < hi) {
                next = 0.5 * (lo + hi);
            }
            if (next - s).abs() <= 1e-16 {
                s = next;
                break;
            }
            s = next;
        }
        self.grid[k] + s * (self.grid[k + 1] - self.grid[k])
    }
}

/// Build a [`CdfTable`] with `n_grid` nodes on `[-R, R]`.
pub fn inverse_cdf_table(prof: &Profile1D, n_grid: usize) -> Result<CdfTable> {
    if n_grid < 64 {
        return Err(Error::Input(format!("n_grid must be at least 64, got {n_grid}")));
    }
    let r = prof.radius;
    let dx = 2.0 * r / (n_grid - 1) as f64;
    let grid: Vec<f64> = (0..n_grid).map(|k| -r + dx * k as f64).collect();
    let density = |t: f64| (-prof.v(t)).exp();
    let mut cdf = Vec::with_capacity(n_grid);
    cdf.push(0.0);
    let mut acc = 0.0;
    for w in grid.windows(2) {
        // two panels per cell keeps the per-cell error far below the table tolerance
        let mid = 0.5 * (w[0] + w[1]);
        acc += gk15(&density, w[0], mid).0 + gk15(&density, mid, w[1]).0;
        cdf.push(acc);
    }
    let z = acc;
    if !(z.is_finite() && z > 0.0) {
        return Err(Error::Numeric("profile has no finite positive mass".into()));
    }
    cdf.iter_mut().for_each(|c| *c /= z);
    let mut slope: Vec<f64> = grid.iter().map(|&t| density(t) / z).collect();
    for k in 0..n_grid - 1 {
        if cdf[k + 1] < cdf[k] {
            return Err(Error::Internal(format!("numeric CDF decreases at node {k}")));
        }
        let secant = (cdf[k + 1] - cdf[k]) / dx;
        if secant == 0.0 {
            slope[k] = 0.0;
            slope[k + 1] = 0.0;
            continue;
        }
        let a = slope[k] / secant;
        let b = slope[k + 1] / secant;
        let norm = a * a + b * b;
        if norm > 9.0 {
            let tau = 3.0 / norm.sqrt();
            slope[k] = tau * a * secant;
            slope[k + 1] = tau * b * secant;
        }
    }
    let n_guide = n_grid;
    let mut guide = Vec::with_capacity(n_guide);
    let mut k = 0usize;
    for g in 0..n_guide {
        let u = g as f64 / n_guide as f64;
        while k + 2 < n_grid && cdf[k + 1] <= u {
            k += 1;
        }
        guide.push(k as u32);
    }
    let table = CdfTable {
        grid,
        cdf,
        slope,
        guide,
        tolerance: prof.tolerance.max(prof.tail_mass_bound()),
    };
    Ok(table)
}

/// Default table resolution used by the exact separable sampler.
pub const DEFAULT_GRID: usize = 8192;

pub fn standard_normal_pdf(t: f64) -> f64 {
    (-0.5 * t * t).exp() / (2.0 * PI).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaussian_moments() {
        let g = Profile1D::gaussian();
        assert!((g.expectation(|_| 1.0).unwrap() - 1.0).abs() < 1e-12);
        assert!((g.expectation(|t| t * t).unwrap() - 1.0).abs() < 1e-10);
        let c = g.expectation(|t| (2.0 * t).cos()).unwrap();
        assert!((c - (-2.0f64).exp()).abs() < 1e-9);
        assert!((c - 0.135_335_283_2).abs() < 1e-9);
        let z = g.normalizing_constant().unwrap();
        assert!((z - 2.506_628_274_6).abs() < 1e-10);
    }

    #[test]
    fn adversarial_z_exceeds_gaussian() {
        let z = Profile1D::ripple(256, 0.2, 1.0).normalizing_constant().unwrap();
        assert!(z > SQRT_2PI);
        assert!(ripple_normalizer_excess(256, 0.2, 1.0).unwrap() > 0.0);
    }

    #[test]
    fn excess_agrees_with_direct_quadrature() {
        for &d in &[64usize, 1024] {
            let direct = Profile1D::ripple(d, 0.2, 1.0).normalizing_constant().unwrap() / SQRT_2PI - 1.0;
            let excess = ripple_normalizer_excess(d, 0.2, 1.0).unwrap();
            assert!((direct - excess).abs() < 1e-11, "{direct} vs {excess}");
        }
    }

    #[test]
    fn expected_cos_closed_form_for_gaussian() {
        let d = 16;
        let v = expected_cos(&Profile1D::ripple(d, 0.2, 0.0), 0.2, d).unwrap();
        let w2 = (d as f64).powf(0.4);
        assert!((v - (-0.5 * w2).exp()).abs() < 1e-11);
        let one = expected_cos(&Profile1D::ripple(1, 0.2, 1.0), 0.2, 1).unwrap();
        assert!(one > -1.0 && one < 1.0);
    }

    #[test]
    fn trig_moment_examples() {
        let v = trig_sin_moment(0, PI / 2.0, 1.0, 0.25, 16).unwrap();
        assert!((v - (-2.0f64).exp()).abs() < 1e-15);
        for &b in &[0.1, 1.0, 3.0] {
            assert_eq!(trig_sin_moment(0, 0.0, b, 0.3, 9).unwrap(), 0.0);
        }
        assert!(matches!(trig_sin_moment(5, 0.0, 1.0, 0.0, 1), Err(Error::Unsupported(_))));
    }

    #[test]
    fn trig_moment_matches_quadrature() {
        let g = Profile1D::gaussian();
        let (a, b, gamma, d) = (0.3, 0.5, 0.2, 64usize);
        let t = b * (d as f64).powf(gamma);
        for ell in 0..=4u32 {
            let closed = trig_sin_moment(ell, a, b, gamma, d).unwrap();
            let quad = g.expectation(|x| x.powi(ell as i32) * (a + t * x).sin()).unwrap();
            assert!((closed - quad).abs() < 1e-8, "ell {ell}: {closed} vs {quad}");
        }
    }

    #[test]
    fn kl_is_zero_without_ripple_and_nonnegative() {
        assert!(kl_gaussian_vs_ripple(0.2, 256, 0.0).unwrap().abs() < 1e-15);
        for &d in &[1usize, 8, 256, 65536] {
            assert!(kl_gaussian_vs_adversarial(0.2, d).unwrap() >= -1e-12);
        }
    }

    #[test]
    fn coordinate_factor_without_ripple_is_one() {
        for &x in &[-3.0, 0.0, 1.7] {
            let v = coordinate_factor_scaled(x, 0.1, 0.2, 4096, 0.0).unwrap();
            assert!((v - 1.0).abs() < 1e-13);
        }
        assert!(coordinate_factor(0.0, 1.5, 0.2, 16).is_err());
    }

    #[test]
    fn gaussian_tv_values() {
        assert_eq!(gaussian_tv_equal_cov(0.0, 1.0).unwrap(), 0.0);
        let v = gaussian_tv_equal_cov(2.0, 1.0).unwrap();
        assert!((v - 0.682_689_492_1).abs() < 1e-10);
        for k in 0..50 {
            let h = 0.01 + 0.02 * k as f64;
            let delta = 0.1 * k as f64;
            let tv = gaussian_tv_equal_cov(delta, 2.0 * h).unwrap();
            assert!(tv <= delta / (2.0 * h).sqrt() + 1e-15);
            assert!((0.0..1.0).contains(&tv));
        }
        assert!(gaussian_tv_equal_cov(1.0, 0.0).is_err());
    }

    #[test]
    fn cdf_table_gaussian_quantiles() {
        let t = inverse_cdf_table(&Profile1D::gaussian(), DEFAULT_GRID).unwrap();
        assert!(t.inverse(0.5).abs() < 1e-8);
        assert!((t.inverse(normal_cdf(1.0)) - 1.0).abs() < 1e-6);
        for k in 0..200 {
            let x = -6.0 + 0.06 * k as f64;
            assert!((t.cdf(x) - normal_cdf(x)).abs() < 1e-8);
        }
    }

    #[test]
    fn cdf_table_round_trip_adversarial() {
        let t = inverse_cdf_table(&Profile1D::ripple(4096, 0.2, 1.0), DEFAULT_GRID).unwrap();
        for k in 1..=99 {
            let u = k as f64 / 100.0;
            assert!((t.cdf(t.inverse(u)) - u).abs() < 1e-6);
        }
        assert!(t.cdf_values().windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn cdf_table_rejects_small_grid() {
        assert!(inverse_cdf_table(&Profile1D::gaussian(), 10).is_err());
    }
}
