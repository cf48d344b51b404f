//! Target potentials `V` with `pi ∝ exp(-V)`.
//!
//! Potentials are not shifted to have `V(0) = 0`. The adversarial cosine
//! potential has `V(0) = -d^(1-2η)/2`; every consumer in this crate only uses
//! differences of `V`, and the Metropolis-adjusted kernel is invariant under
//! additive constants.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::rng::rng_from_seed;

pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// `η = 1/4 - 0.05`.
pub const ETA_DELTA_050: f64 = 0.25 - 0.05;
/// `η = 1/4 - 0.055`.
pub const ETA_DELTA_055: f64 = 0.25 - 0.055;

/// A one-dimensional profile `v` for a separable potential `V(x) = Σ v(x_i)`.
///
/// The curvature range is the caller's claim; it is only checked by
/// [`Potential::verify_regularity`].
#[derive(Clone)]
pub struct SeparableProfile {
    pub value: ScalarFn,
    pub derivative: ScalarFn,
    pub curvature: (f64, f64),
}

impl SeparableProfile {
    pub fn new(
        value: impl Fn(f64) -> f64 + Send + Sync + 'static,
        derivative: impl Fn(f64) -> f64 + Send + Sync + 'static,
        curvature: (f64, f64),
    ) -> Self {
        SeparableProfile {
            value: Arc::new(value),
            derivative: Arc::new(derivative),
            curvature,
        }
    }
}

impl fmt::Debug for SeparableProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SeparableProfile")
            .field("curvature", &self.curvature)
            .finish_non_exhaustive()
    }
}

#[derive(Clone, Debug)]
pub enum PotentialKind {
    /// `‖x‖²/2`.
    Gaussian,
    /// `‖x‖²/2 - (1/(2d^{2η})) Σ cos(d^η x_i)`.
    AdversarialCosine { eta: f64 },
    CustomSeparable(SeparableProfile),
    /// `‖x‖²/2 + (c/2) Σ (x_i - x_{i+1})²`. Not separable; exists so that
    /// routines restricted to separable targets have something to refuse.
    CoupledQuadratic { coupling: f64 },
}

#[derive(Clone, Debug)]
pub struct Potential {
    kind: PotentialKind,
    d: usize,
    alpha: f64,
    beta: f64,
    // cosine ripple (amplitude 1/(2d^{2η}), frequency d^η) for the adversarial kind
    ripple: (f64, f64),
}

impl Potential {
    pub fn gaussian(d: usize) -> Result<Self> {
        check_dim(d)?;
        Ok(Potential {
            kind: PotentialKind::Gaussian,
            d,
            alpha: 1.0,
            beta: 1.0,
            ripple: (0.0, 0.0),
        })
    }

    /// Adversarial cosine-perturbed Gaussian; `eta` must lie in `(0, 1/4)`.
    pub fn adversarial(d: usize, eta: f64) -> Result<Self> {
        check_dim(d)?;
        if !(eta > 0.0 && eta < 0.25) {
            return Err(Error::Input(format!("eta must lie in (0, 1/4), got {eta}")));
        }
        let (amplitude, frequency) = ripple_params(d, eta);
        Ok(Potential {
            kind: PotentialKind::AdversarialCosine { eta },
            d,
            alpha: 0.5,
            beta: 1.5,
            ripple: (amplitude, frequency),
        })
    }

    /// Adversarial potential with `η = 1/4 - delta`.
    pub fn adversarial_with_delta(d: usize, delta: f64) -> Result<Self> {
        Self::adversarial(d, 0.25 - delta)
    }

    pub fn custom_separable(d: usize, profile: SeparableProfile) -> Result<Self> {
        check_dim(d)?;
        let (a, b) = profile.curvature;
        if !(a > 0.0 && a <= b && b.is_finite()) {
            return Err(Error::Input(format!("curvature range must satisfy 0 < a <= b, got ({a}, {b})")));
        }
        Ok(Potential {
            kind: PotentialKind::CustomSeparable(profile),
            d,
            alpha: a,
            beta: b,
            ripple: (0.0, 0.0),
        })
    }

    pub fn coupled_quadratic(d: usize, coupling: f64) -> Result<Self> {
        check_dim(d)?;
        if !(coupling >= 0.0 && coupling.is_finite()) {
            return Err(Error::Input(format!("coupling must be finite and >= 0, got {coupling}")));
        }
        let beta = if d > 1 { 1.0 + 4.0 * coupling } else { 1.0 };
        Ok(Potential {
            kind: PotentialKind::CoupledQuadratic { coupling },
            d,
            alpha: 1.0,
            beta,
            ripple: (0.0, 0.0),
        })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn kind(&self) -> &PotentialKind {
        &self.kind
    }

    pub fn eta(&self) -> Option<f64> {
        match self.kind {
            PotentialKind::AdversarialCosine { eta } => Some(eta),
            _ => None,
        }
    }

    /// `(α, β)` with `α I ⪯ ∇²V ⪯ β I`.
    pub fn convexity_bounds(&self) -> (f64, f64) {
        (self.alpha, self.beta)
    }

    pub fn condition_number(&self) -> f64 {
        self.beta / self.alpha
    }

    pub fn is_separable(&self) -> bool {
        !matches!(self.kind, PotentialKind::CoupledQuadratic { .. })
    }

    /// True when `V(x) = V(-x)`; holds for the built-in kinds.
    pub fn is_symmetric(&self) -> bool {
        match &self.kind {
            PotentialKind::CustomSeparable(p) => {
                [0.3, 1.1, 2.7].iter().all(|&t| ((p.value)(t) - (p.value)(-t)).abs() <= 1e-12 * (1.0 + (p.value)(t).abs()))
            }
            _ => true,
        }
    }

    /// Cosine ripple `(amplitude, frequency)` of the adversarial kind.
    pub fn ripple(&self) -> Option<(f64, f64)> {
        match self.kind {
            PotentialKind::AdversarialCosine { .. } => Some(self.ripple),
            _ => None,
        }
    }

    /// The 1-D profile `v` of a separable potential.
    pub fn profile_value(&self, t: f64) -> Option<f64> {
        match &self.kind {
            PotentialKind::Gaussian => Some(0.5 * t * t),
            PotentialKind::AdversarialCosine { .. } => {
                let (amp, freq) = self.ripple;
                Some(0.5 * t * t - amp * (freq * t).cos())
            }
            PotentialKind::CustomSeparable(p) => Some((p.value)(t)),
            PotentialKind::CoupledQuadratic { .. } => None,
        }
    }

    pub fn profile_derivative(&self, t: f64) -> Option<f64> {
        match &self.kind {
            PotentialKind::Gaussian => Some(t),
            PotentialKind::AdversarialCosine { .. } => {
                let (amp, freq) = self.ripple;
                Some(t + amp * freq * (freq * t).sin())
            }
            PotentialKind::CustomSeparable(p) => Some((p.derivative)(t)),
            PotentialKind::CoupledQuadratic { .. } => None,
        }
    }

    /// Value and gradient with dimension and finiteness checks.
    pub fn evaluate(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        self.check_point(x)?;
        let mut grad = vec![0.0; self.d];
        let value = self.value_and_gradient(x, &mut grad);
        if !value.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::Numeric("potential produced a non-finite value".into()));
        }
        Ok((value, grad))
    }

    pub(crate) fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.d {
            return Err(Error::Input(format!("expected a point of dimension {}, got {}", self.d, x.len())));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Input("point has non-finite entries".into()));
        }
        Ok(())
    }

    /// Unchecked value; `x.len()` must equal the dimension.
    pub fn value(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.d);
        match &self.kind {
            PotentialKind::Gaussian => 0.5 * dot(x, x),
            PotentialKind::AdversarialCosine { .. } => {
                let (amp, freq) = self.ripple;
                x.iter().map(|&t| 0.5 * t * t - amp * (freq * t).cos()).sum()
            }
            PotentialKind::CustomSeparable(p) => x.iter().map(|&t| (p.value)(t)).sum(),
            PotentialKind::CoupledQuadratic { coupling } => {
                let diff: f64 = x.windows(2).map(|w| (w[0] - w[1]).powi(2)).sum();
                0.5 * dot(x, x) + 0.5 * coupling * diff
            }
        }
    }

    /// Writes `∇V(x)` into `grad` and returns `V(x)`.
    pub fn value_and_gradient(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        debug_assert_eq!(x.len(), self.d);
        debug_assert_eq!(grad.len(), self.d);
        match &self.kind {
            PotentialKind::Gaussian => {
                grad.copy_from_slice(x);
                0.5 * dot(x, x)
            }
            PotentialKind::AdversarialCosine { .. } => {
                let (amp, freq) = self.ripple;
                let slope = amp * freq;
                let mut value = 0.0;
                for (g, &t) in grad.iter_mut().zip(x) {
                    let (s, c) = (freq * t).sin_cos();
                    value += 0.5 * t * t - amp * c;
                    *g = t + slope * s;
                }
                value
            }
            PotentialKind::CustomSeparable(p) => {
                let mut value = 0.0;
                for (g, &t) in grad.iter_mut().zip(x) {
                    value += (p.value)(t);
                    *g = (p.derivative)(t);
                }
                value
            }
            PotentialKind::CoupledQuadratic { coupling } => {
                let c = *coupling;
                let n = x.len();
                for i in 0..n {
                    let mut g = x[i];
                    if i > 0 {
                        g += c * (x[i] - x[i - 1]);
                    }
                    if i + 1 < n {
                        g += c * (x[i] - x[i + 1]);
                    }
                    grad[i] = g;
                }
                self.value(x)
            }
        }
    }

    pub fn gradient(&self, x: &[f64], grad: &mut [f64]) {
        self.value_and_gradient(x, grad);
    }

    /// Probe directional curvatures `(V(x+εu) - 2V(x) + V(x-εu))/ε²` at
    /// `n_probes` random points and unit directions. The first probe sits at
    /// the origin.
    pub fn verify_regularity(&self, n_probes: usize, seed: u64) -> RegularityReport {
        const EPS: f64 = 1e-3;
        let mut rng = rng_from_seed(seed);
        let d = self.d;
        let mut probes = Vec::with_capacity(n_probes);
        let mut x = vec![0.0; d];
        let mut u = vec![0.0; d];
        let mut plus = vec![0.0; d];
        let mut minus = vec![0.0; d];
        for k in 0..n_probes.max(1) {
            if k == 0 {
                x.iter_mut().for_each(|v| *v = 0.0);
            } else {
                let scale = 2.0 / self.alpha.sqrt();
                x.iter_mut().for_each(|v| *v = scale * rng.sample::<f64, _>(StandardNormal));
            }
            loop {
                u.iter_mut().for_each(|v| *v = rng.sample(StandardNormal));
                let norm = dot(&u, &u).sqrt();
                if norm > 0.0 {
                    u.iter_mut().for_each(|v| *v /= norm);
                    break;
                }
            }
            for i in 0..d {
                plus[i] = x[i] + EPS * u[i];
                minus[i] = x[i] - EPS * u[i];
            }
            let curvature = (self.value(&plus) - 2.0 * self.value(&x) + self.value(&minus)) / (EPS * EPS);
            probes.push(CurvatureProbe {
                x_norm: dot(&x, &x).sqrt(),
                curvature,
            });
        }
        RegularityReport {
            alpha: self.alpha,
            beta: self.beta,
            probes,
        }
    }

    /// `key=value` form accepted by [`Potential::from_str`].
    pub fn spec_string(&self) -> Result<String> {
        match &self.kind {
            PotentialKind::Gaussian => Ok(format!("kind=gaussian\nd={}\n", self.d)),
            PotentialKind::AdversarialCosine { eta } => Ok(format!("kind=adversarial\nd={}\neta={}\n", self.d, eta)),
            PotentialKind::CoupledQuadratic { coupling } => {
                Ok(format!("kind=coupled\nd={}\ncoupling={}\n", self.d, coupling))
            }
            PotentialKind::CustomSeparable(_) => {
                Err(Error::Unsupported("custom profiles have no textual form".into()))
            }
        }
    }
}

/// Amplitude `1/(2d^{2η})` and frequency `d^η` of the adversarial ripple.
pub fn ripple_params(d: usize, eta: f64) -> (f64, f64) {
    let freq = (d as f64).powf(eta);
    (0.5 / (freq * freq), freq)
}

fn check_dim(d: usize) -> Result<()> {
    if d == 0 {
        return Err(Error::Input("dimension must be positive".into()));
    }
    Ok(())
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Clone, Copy, Debug)]
pub struct CurvatureProbe {
    pub x_norm: f64,
    pub curvature: f64,
}

#[derive(Clone, Debug)]
pub struct RegularityReport {
    pub alpha: f64,
    pub beta: f64,
    pub probes: Vec<CurvatureProbe>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Violation {
    BelowAlpha { curvature: f64, x_norm: f64 },
    AboveBeta { curvature: f64, x_norm: f64 },
}

impl RegularityReport {
    pub fn min_curvature(&self) -> f64 {
        self.probes.iter().map(|p| p.curvature).fold(f64::INFINITY, f64::min)
    }

    pub fn max_curvature(&self) -> f64 {
        self.probes.iter().map(|p| p.curvature).fold(f64::NEG_INFINITY, f64::max)
    }

    /// Probes outside `[alpha - tol, beta + tol]`, worst first.
    pub fn violations(&self, tol: f64) -> Vec<Violation> {
        let mut out: Vec<(f64, Violation)> = Vec::new();
        for p in &self.probes {
            if p.curvature < self.alpha - tol {
                out.push((self.alpha - p.curvature, Violation::BelowAlpha { curvature: p.curvature, x_norm: p.x_norm }));
            } else if p.curvature > self.beta + tol {
                out.push((p.curvature - self.beta, Violation::AboveBeta { curvature: p.curvature, x_norm: p.x_norm }));
            }
        }
        out.sort_by(|a, b| b.0.total_cmp(&a.0));
        out.into_iter().map(|(_, v)| v).collect()
    }

    pub fn passes(&self, tol: f64) -> bool {
        self.violations(tol).is_empty()
    }
}

impl FromStr for Potential {
    type Err = Error;

    /// Parses a `key=value` block (one pair per line, `#` comments allowed):
    /// `kind` ∈ {gaussian, adversarial, coupled}, `d`, and `eta` or `delta`
    /// for the adversarial kind, `coupling` for the coupled kind.
    fn from_str(s: &str) -> Result<Self> {
        let mut kind = None;
        let mut d = None;
        let mut eta = None;
        let mut delta = None;
        let mut coupling = None;
        for (key, value) in parse_pairs(s)? {
            match key.as_str() {
                "kind" => kind = Some(value),
                "d" => d = Some(parse_num::<usize>(&key, &value)?),
                "eta" => eta = Some(parse_num::<f64>(&key, &value)?),
                "delta" => delta = Some(parse_num::<f64>(&key, &value)?),
                "coupling" => coupling = Some(parse_num::<f64>(&key, &value)?),
                _ => return Err(Error::Config(format!("unknown potential key '{key}'"))),
            }
        }
        let d = d.ok_or_else(|| Error::Config("missing key 'd'".into()))?;
        match kind.as_deref() {
            Some("gaussian") => Potential::gaussian(d),
            Some("adversarial") => match (eta, delta) {
                (Some(eta), None) => Potential::adversarial(d, eta),
                (None, Some(delta)) => Potential::adversarial_with_delta(d, delta),
                (None, None) => Err(Error::Config("adversarial potential needs 'eta' or 'delta'".into())),
                (Some(_), Some(_)) => Err(Error::Config("give only one of 'eta' and 'delta'".into())),
            },
            Some("coupled") => Potential::coupled_quadratic(d, coupling.unwrap_or(0.5)),
            Some(other) => Err(Error::Config(format!("unknown potential kind '{other}'"))),
            None => Err(Error::Config("missing key 'kind'".into())),
        }
    }
}

/// Splits a `key=value` block into trimmed pairs; blank lines and `#`
/// comments are skipped, and `;` also separates pairs.
pub fn parse_pairs(s: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for raw in s.lines().flat_map(|l| l.split(';')) {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("expected key=value, got '{line}'")))?;
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

pub(crate) fn parse_num<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("invalid value '{value}' for key '{key}'")))
}
