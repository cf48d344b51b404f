//! Langevin transition kernels and chain drivers.
//!
//! The MALA proposal is `y = x - h∇V(x) + √(2h) ξ`. The accept test compares
//! `ln u` with `ln a(x, y)` for `u ~ Uniform(0, 1]`, where
//!
//! ```text
//! ln a(x, y) = V(x) - V(y) + (‖y - x + h∇V(x)‖² - ‖x - y + h∇V(y)‖²) / (4h)
//! ```
//!
//! A [`ChainState`] caches `V(x)` and `∇V(x)`; they change only when a
//! proposal is accepted, so a rejected step leaves the state bitwise intact.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::oracle1d::{inverse_cdf_table, CdfTable, Profile1D, DEFAULT_GRID};
use crate::potential::{Potential, PotentialKind};
use crate::rng::{derive_seed, rng_from_seed, SimRng};
use crate::stats::{BatchMeans, EstimateWithSE, Moments};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Variant {
    Mala,
    Ula,
    /// Exact Ornstein–Uhlenbeck transition; Gaussian target only.
    OuExact,
    /// Euler path of `substeps` inner steps approximating the diffusion.
    DiffusionRef,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KernelParams {
    pub h: f64,
    pub variant: Variant,
    pub substeps: usize,
}

impl KernelParams {
    pub fn mala(h: f64) -> Self {
        KernelParams { h, variant: Variant::Mala, substeps: 1 }
    }

    pub fn ula(h: f64) -> Self {
        KernelParams { h, variant: Variant::Ula, substeps: 1 }
    }

    pub fn ou_exact(h: f64) -> Self {
        KernelParams { h, variant: Variant::OuExact, substeps: 1 }
    }

    pub fn diffusion_ref(h: f64, substeps: usize) -> Self {
        KernelParams { h, variant: Variant::DiffusionRef, substeps }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.h > 0.0 && self.h.is_finite()) {
            return Err(Error::Input(format!("step size must be positive, got {}", self.h)));
        }
        if self.substeps == 0 {
            return Err(Error::Input("substeps must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct ChainState {
    x: Vec<f64>,
    grad: Vec<f64>,
    value: f64,
    rng: SimRng,
    step_index: u64,
}

impl ChainState {
    pub fn new(p: &Potential, x0: &[f64], seed: u64) -> Result<Self> {
        let (value, grad) = p.evaluate(x0)?;
        Ok(ChainState {
            x: x0.to_vec(),
            grad,
            value,
            rng: rng_from_seed(seed),
            step_index: 0,
        })
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    /// Cached `∇V(x)`.
    pub fn grad(&self) -> &[f64] {
        &self.grad
    }

    /// Cached `V(x)`.
    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn step_index(&self) -> u64 {
        self.step_index
    }

    pub fn rng_mut(&mut self) -> &mut SimRng {
        &mut self.rng
    }
}

/// One realized transition.
#[derive(Clone, Debug, PartialEq)]
pub struct StepRecord {
    pub proposal: Vec<f64>,
    /// `ln a(x, y)`; zero for variants without an accept test.
    pub log_ratio: f64,
    pub accepted: bool,
    /// `(x₁ - y₁)²` of the realized move, 0 on rejection.
    pub sq_displacement_coord1: f64,
}

impl StepRecord {
    /// `min(1, a(x, y))`.
    pub fn accept_prob(&self) -> f64 {
        self.log_ratio.min(0.0).exp()
    }
}

fn propose_into<R: Rng + ?Sized>(x: &[f64], grad: &[f64], h: f64, rng: &mut R, out: &mut [f64]) {
    let scale = (2.0 * h).sqrt();
    for ((o, &xi), &gi) in out.iter_mut().zip(x).zip(grad) {
        let z: f64 = rng.sample(StandardNormal);
        *o = xi - h * gi + scale * z;
    }
}

/// Draw `y ~ N(x - h∇V(x), 2h I)`.
pub fn propose_mala<R: Rng + ?Sized>(p: &Potential, h: f64, x: &[f64], rng: &mut R) -> Result<Vec<f64>> {
    p.check_point(x)?;
    let mut grad = vec![0.0; x.len()];
    p.gradient(x, &mut grad);
    let mut y = vec![0.0; x.len()];
    propose_into(x, &grad, h, rng, &mut y);
    Ok(y)
}

/// `ln a(x, y)` from cached values and gradients at both points.
pub(crate) fn log_ratio_cached(h: f64, x: &[f64], vx: f64, gx: &[f64], y: &[f64], vy: f64, gy: &[f64]) -> f64 {
    let mut forward = 0.0;
    let mut backward = 0.0;
    for i in 0..x.len() {
        let f = y[i] - x[i] + h * gx[i];
        let b = x[i] - y[i] + h * gy[i];
        forward += f * f;
        backward += b * b;
    }
    (vx - vy) + (forward - backward) / (4.0 * h)
}

/// `ln a(x, y) = ln[pi(y)Q(y, x)] - ln[pi(x)Q(x, y)]`. Exactly antisymmetric
/// in `(x, y)`.
pub fn log_accept_ratio(p: &Potential, h: f64, x: &[f64], y: &[f64]) -> Result<f64> {
    if !(h > 0.0) {
        return Err(Error::Input(format!("step size must be positive, got {h}")));
    }
    let (vx, gx) = p.evaluate(x)?;
    let (vy, gy) = p.evaluate(y)?;
    let r = log_ratio_cached(h, x, vx, &gx, y, vy, &gy);
    if r.is_nan() {
        return Err(Error::Numeric("acceptance ratio is NaN".into()));
    }
    Ok(r)
}

/// Scratch buffers for repeated proposals from a fixed point.
pub(crate) struct ProposalScratch {
    pub y: Vec<f64>,
    pub gy: Vec<f64>,
}

impl ProposalScratch {
    pub fn new(d: usize) -> Self {
        ProposalScratch { y: vec![0.0; d], gy: vec![0.0; d] }
    }

    /// Propose from `(x, vx, gx)` and return `ln a(x, y)`; the proposal is left
    /// in `self.y` and its gradient in `self.gy`.
    pub fn propose_and_score<R: Rng + ?Sized>(
        &mut self,
        p: &Potential,
        h: f64,
        x: &[f64],
        vx: f64,
        gx: &[f64],
        rng: &mut R,
    ) -> (f64, f64) {
        propose_into(x, gx, h, rng, &mut self.y);
        let vy = p.value_and_gradient(&self.y, &mut self.gy);
        (log_ratio_cached(h, x, vx, gx, &self.y, vy, &self.gy), vy)
    }
}

fn check_variant(params: &KernelParams, expected: Variant) -> Result<()> {
    params.validate()?;
    if params.variant != expected {
        return Err(Error::Input(format!("expected {expected:?} parameters, got {:?}", params.variant)));
    }
    Ok(())
}

/// One Metropolis-adjusted Langevin transition.
pub fn mala_step(p: &Potential, params: &KernelParams, s: &mut ChainState) -> Result<StepRecord> {
    check_variant(params, Variant::Mala)?;
    Ok(mala_step_unchecked(p, params.h, s))
}

fn mala_step_unchecked(p: &Potential, h: f64, s: &mut ChainState) -> StepRecord {
    let d = s.x.len();
    let mut scratch = ProposalScratch::new(d);
    let (log_ratio, vy) = scratch.propose_and_score(p, h, &s.x, s.value, &s.grad, &mut s.rng);
    let u = 1.0 - s.rng.gen::<f64>();
    let accepted = u.ln() <= log_ratio;
    let dx1 = s.x[0] - scratch.y[0];
    s.step_index += 1;
    if accepted {
        s.x.copy_from_slice(&scratch.y);
        std::mem::swap(&mut s.grad, &mut scratch.gy);
        s.value = vy;
    }
    StepRecord {
        proposal: scratch.y,
        log_ratio,
        accepted,
        sq_displacement_coord1: if accepted { dx1 * dx1 } else { 0.0 },
    }
}

/// One unadjusted Langevin transition; always "accepted".
pub fn ula_step(p: &Potential, params: &KernelParams, s: &mut ChainState) -> Result<StepRecord> {
    check_variant(params, Variant::Ula)?;
    Ok(ula_step_unchecked(p, params.h, s))
}

fn ula_step_unchecked(p: &Potential, h: f64, s: &mut ChainState) -> StepRecord {
    let mut y = vec![0.0; s.x.len()];
    propose_into(&s.x, &s.grad, h, &mut s.rng, &mut y);
    let dx1 = s.x[0] - y[0];
    s.x.copy_from_slice(&y);
    s.value = p.value_and_gradient(&s.x, &mut s.grad);
    s.step_index += 1;
    StepRecord {
        proposal: y,
        log_ratio: 0.0,
        accepted: true,
        sq_displacement_coord1: dx1 * dx1,
    }
}

/// Exact Ornstein–Uhlenbeck transition `y ~ N(e^{-h} x, (1 - e^{-2h}) I)`,
/// the time-`h` law of `dX = -X dt + √2 dB`.
pub fn ou_exact_step<R: Rng + ?Sized>(h: f64, x: &[f64], rng: &mut R) -> Vec<f64> {
    let decay = (-h).exp();
    let sd = (-(-2.0 * h).exp_m1()).sqrt();
    x.iter()
        .map(|&xi| {
            let z: f64 = rng.sample(StandardNormal);
            decay * xi + sd * z
        })
        .collect()
}

/// Endpoint of an Euler–Maruyama path of `dX = -∇V(X) dt + √2 dB` over time
/// `h` with `substeps` equal steps.
pub fn diffusion_reference_step<R: Rng + ?Sized>(
    p: &Potential,
    h: f64,
    x: &[f64],
    substeps: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    p.check_point(x)?;
    if substeps == 0 {
        return Err(Error::Input("substeps must be at least 1".into()));
    }
    let dt = h / substeps as f64;
    let mut cur = x.to_vec();
    let mut next = vec![0.0; x.len()];
    let mut grad = vec![0.0; x.len()];
    for _ in 0..substeps {
        p.gradient(&cur, &mut grad);
        propose_into(&cur, &grad, dt, rng, &mut next);
        std::mem::swap(&mut cur, &mut next);
    }
    Ok(cur)
}

/// One transition of any variant.
pub fn step(p: &Potential, params: &KernelParams, s: &mut ChainState) -> Result<StepRecord> {
    params.validate()?;
    match params.variant {
        Variant::Mala => Ok(mala_step_unchecked(p, params.h, s)),
        Variant::Ula => Ok(ula_step_unchecked(p, params.h, s)),
        Variant::OuExact => {
            if !matches!(p.kind(), PotentialKind::Gaussian) {
                return Err(Error::Unsupported("the exact OU kernel needs the Gaussian target".into()));
            }
            let y = ou_exact_step(params.h, &s.x, &mut s.rng);
            Ok(move_to(p, s, y))
        }
        Variant::DiffusionRef => {
            let y = diffusion_reference_step(p, params.h, &s.x.clone(), params.substeps, &mut s.rng)?;
            Ok(move_to(p, s, y))
        }
    }
}

fn move_to(p: &Potential, s: &mut ChainState, y: Vec<f64>) -> StepRecord {
    let dx1 = s.x[0] - y[0];
    s.x.copy_from_slice(&y);
    s.value = p.value_and_gradient(&s.x, &mut s.grad);
    s.step_index += 1;
    StepRecord {
        proposal: y,
        log_ratio: 0.0,
        accepted: true,
        sq_displacement_coord1: dx1 * dx1,
    }
}

/// Summary of a chain run.
#[derive(Clone, Debug, PartialEq)]
pub struct ChainSummary {
    pub final_state: Vec<f64>,
    pub n_steps: usize,
    /// Fraction of accepted proposals; `None` for an empty run.
    pub acceptance_rate: Option<f64>,
    /// Mean of `min(1, a(x, y))` over the run.
    pub mean_accept_prob: Option<f64>,
    pub mean_sq_displacement_coord1: Option<f64>,
    /// Batch-means estimate of `E[x₁²]` over the visited states.
    pub coord1_second_moment: Option<EstimateWithSE>,
    /// Every `thin`-th state, when requested.
    pub trajectory: Option<Vec<Vec<f64>>>,
}

/// Run `n_steps` transitions from `x0`.
pub fn run_chain(
    p: &Potential,
    params: &KernelParams,
    x0: &[f64],
    n_steps: usize,
    seed: u64,
    thin: Option<usize>,
) -> Result<ChainSummary> {
    params.validate()?;
    let mut state = ChainState::new(p, x0, seed)?;
    let mut accepted = 0usize;
    let mut accept_prob = Moments::default();
    let mut disp = Moments::default();
    let mut second = BatchMeans::for_length(n_steps, 100);
    let mut trajectory = thin.map(|_| vec![x0.to_vec()]);
    for k in 0..n_steps {
        let rec = step(p, params, &mut state)?;
        accepted += rec.accepted as usize;
        accept_prob.push(rec.accept_prob());
        disp.push(rec.sq_displacement_coord1);
        second.push(state.x[0] * state.x[0]);
        if let (Some(t), Some(every)) = (trajectory.as_mut(), thin) {
            if (k + 1) % every.max(1) == 0 {
                t.push(state.x.clone());
            }
        }
    }
    let nonempty = n_steps > 0;
    Ok(ChainSummary {
        final_state: state.x,
        n_steps,
        acceptance_rate: nonempty.then(|| accepted as f64 / n_steps as f64),
        mean_accept_prob: nonempty.then(|| accept_prob.mean()),
        mean_sq_displacement_coord1: nonempty.then(|| disp.mean()),
        coord1_second_moment: second.estimate(),
        trajectory,
    })
}

/// Exact sampler for separable targets: each coordinate is drawn from the
/// shared 1-D marginal by inverting a [`CdfTable`].
#[derive(Clone, Debug)]
pub struct SeparableSampler {
    d: usize,
    table: CdfTable,
}

impl SeparableSampler {
    pub fn new(p: &Potential) -> Result<Self> {
        let prof = Profile1D::from_potential(p)?;
        Ok(SeparableSampler {
            d: p.dim(),
            table: inverse_cdf_table(&prof, DEFAULT_GRID)?,
        })
    }

    pub fn table(&self) -> &CdfTable {
        &self.table
    }

    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        for o in out.iter_mut() {
            *o = self.table.inverse(rng.gen::<f64>());
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let mut x = vec![0.0; self.d];
        self.sample_into(rng, &mut x);
        x
    }
}

/// `n` i.i.d. exact draws from a separable target, one row per draw. Row `i`
/// uses the stream `derive_seed(seed, i)`.
pub fn sample_separable_target(p: &Potential, n: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    let sampler = SeparableSampler::new(p)?;
    Ok((0..n)
        .map(|i| sampler.sample(&mut rng_from_seed(derive_seed(seed, i as u64))))
        .collect())
}
