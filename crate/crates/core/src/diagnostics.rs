//! Monte-Carlo estimators for acceptance, rejection (= `‖T_x - Q_x‖_TV`),
//! spectral-gap ceilings, total variation and mixing.
//!
//! Every stochastic estimate carries a standard error. Work is split into
//! independent units (states, replicas) whose seeds are derived from the
//! caller's seed by unit index, and results are reduced in index order, so
//! outputs do not depend on the thread count.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kernels::{self, ChainState, KernelParams, ProposalScratch, SeparableSampler};
use crate::oracle1d::{inverse_cdf_table, CdfTable, Profile1D, DEFAULT_GRID};
use crate::potential::{Potential, PotentialKind};
use crate::rng::{derive_path, derive_seed, rng_from_seed, SimRng};
use crate::stats::{EstimateWithSE, Moments};

/// The event `‖x‖_∞ < 4√ln(8d)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TypicalSetFilter {
    pub sup_bound: f64,
    pub enabled: bool,
}

impl TypicalSetFilter {
    pub fn for_dim(d: usize) -> Self {
        TypicalSetFilter {
            sup_bound: 4.0 * (8.0 * d as f64).ln().sqrt(),
            enabled: true,
        }
    }

    pub fn disabled() -> Self {
        TypicalSetFilter { sup_bound: f64::INFINITY, enabled: false }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        !self.enabled || x.iter().all(|v| v.abs() < self.sup_bound)
    }
}

/// Acceptance and rejection estimates from one shared batch of proposals.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AcceptanceAtPoint {
    /// `A(x) = E_{y~Q_x} min(1, a(x, y))`.
    pub acceptance: EstimateWithSE,
    /// `1 - A(x) = ‖T_x - Q_x‖_TV`.
    pub rejection: EstimateWithSE,
}

fn acceptance_draws(p: &Potential, h: f64, x: &[f64], n_mc: usize, rng: &mut SimRng) -> Moments {
    let mut gx = vec![0.0; x.len()];
    let vx = p.value_and_gradient(x, &mut gx);
    let mut scratch = ProposalScratch::new(x.len());
    let mut m = Moments::default();
    for _ in 0..n_mc {
        let (log_ratio, _) = scratch.propose_and_score(p, h, x, vx, &gx, rng);
        m.push(log_ratio.min(0.0).exp());
    }
    m
}

/// Estimate `A(x)` and `‖T_x - Q_x‖_TV = 1 - A(x)` at a fixed point.
pub fn acceptance_at(p: &Potential, h: f64, x: &[f64], n_mc: usize, seed: u64) -> Result<AcceptanceAtPoint> {
    p.check_point(x)?;
    if !(h > 0.0) {
        return Err(Error::Input(format!("step size must be positive, got {h}")));
    }
    if n_mc < 100 {
        return Err(Error::Input(format!("n_mc must be at least 100, got {n_mc}")));
    }
    let m = acceptance_draws(p, h, x, n_mc, &mut rng_from_seed(seed));
    let se = m.std_error();
    Ok(AcceptanceAtPoint {
        acceptance: EstimateWithSE::new(m.mean(), se, n_mc),
        rejection: EstimateWithSE::new(1.0 - m.mean(), se, n_mc),
    })
}

/// `‖T_x - Q_x‖_TV = 1 - ∫ Q(x, y) min(1, a(x, y)) dy`.
pub fn rejection_probability(p: &Potential, h: f64, x: &[f64], n_mc: usize, seed: u64) -> Result<EstimateWithSE> {
    Ok(acceptance_at(p, h, x, n_mc, seed)?.rejection)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MeanAcceptance {
    pub estimate: EstimateWithSE,
    /// Fraction of stationary draws discarded by the typical-set filter.
    pub filtered_fraction: f64,
}

/// `E_{x~pi} A(x)` by double Monte Carlo over exact stationary draws.
///
/// State `i` draws from stream `derive_seed(seed, i)`, redrawing while the
/// filter rejects; the standard error is taken across states, so it covers
/// both levels of sampling.
pub fn mean_acceptance(
    p: &Potential,
    h: f64,
    n_states: usize,
    n_mc: usize,
    filter: TypicalSetFilter,
    seed: u64,
) -> Result<MeanAcceptance> {
    let sampler = SeparableSampler::new(p)?;
    mean_acceptance_with(p, &sampler, h, n_states, n_mc, filter, seed)
}

/// [`mean_acceptance`] reusing a prebuilt sampler.
pub fn mean_acceptance_with(
    p: &Potential,
    sampler: &SeparableSampler,
    h: f64,
    n_states: usize,
    n_mc: usize,
    filter: TypicalSetFilter,
    seed: u64,
) -> Result<MeanAcceptance> {
    if !(h > 0.0) {
        return Err(Error::Input(format!("step size must be positive, got {h}")));
    }
    if n_states < 2 || n_mc == 0 {
        return Err(Error::Input("need at least two states and one proposal per state".into()));
    }
    let d = p.dim();
    let per_state: Vec<(f64, usize)> = (0..n_states)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng_from_seed(derive_seed(seed, i as u64));
            let mut x = vec![0.0; d];
            let mut draws = 0usize;
            loop {
                draws += 1;
                sampler.sample_into(&mut rng, &mut x);
                if filter.contains(&x) || draws >= 1000 {
                    break;
                }
            }
            (acceptance_draws(p, h, &x, n_mc, &mut rng).mean(), draws)
        })
        .collect();
    let values: Vec<f64> = per_state.iter().map(|v| v.0).collect();
    let drawn: usize = per_state.iter().map(|v| v.1).sum();
    Ok(MeanAcceptance {
        estimate: EstimateWithSE::from_iid(&values),
        filtered_fraction: (drawn - n_states) as f64 / drawn as f64,
    })
}

/// Closed-form `E_{y~Q_x} √a(x, y)` for the Gaussian target, which bounds
/// `∫ Q(x, y) A(x, y) dy`:
/// `exp(h²(1 - h/4)/(4(1 + h²/2)) ‖x‖² - (d/2) ln(1 + h²/2))`.
pub fn gaussian_conductance_bound(x_norm2: f64, h: f64, d: usize) -> f64 {
    let a = h * h * (1.0 - 0.25 * h) / (4.0 * (1.0 + 0.5 * h * h));
    (a * x_norm2 - 0.5 * d as f64 * (0.5 * h * h).ln_1p()).exp()
}

/// Upper estimate of the spectral gap from the Rayleigh quotient of
/// `f(x) = x₁`: `(½ E[(x₁ - y₁)²]) / Var(x₁)` with `x ~ pi`, `y ~ T(x, ·)`.
/// The SE uses the delta method for the ratio.
pub fn dirichlet_gap_upper(p: &Potential, h: f64, n: usize, seed: u64) -> Result<EstimateWithSE> {
    if !p.is_separable() {
        return Err(Error::Unsupported("dirichlet_gap_upper needs a separable target".into()));
    }
    if !p.is_symmetric() {
        return Err(Error::Unsupported("dirichlet_gap_upper needs a symmetric target".into()));
    }
    if n < 2 {
        return Err(Error::Input("need at least two samples".into()));
    }
    let sampler = SeparableSampler::new(p)?;
    let params = KernelParams::mala(h);
    params.validate()?;
    let d = p.dim();
    let pairs: Vec<(f64, f64)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let stream = derive_seed(seed, i as u64);
            let mut rng = rng_from_seed(stream);
            let x = sampler.sample(&mut rng);
            let mut state = ChainState::new(p, &x, derive_seed(stream, 1)).expect("finite stationary draw");
            let rec = kernels::step(p, &params, &mut state).expect("validated parameters");
            debug_assert_eq!(x.len(), d);
            (x[0], 0.5 * rec.sq_displacement_coord1)
        })
        .collect();
    Ok(rayleigh_ratio(&pairs))
}

/// `mean(b) / var(a)` for pairs `(a_i, b_i)` with a delta-method SE.
pub(crate) fn rayleigh_ratio(pairs: &[(f64, f64)]) -> EstimateWithSE {
    let n = pairs.len() as f64;
    let mean_x = pairs.iter().map(|v| v.0).sum::<f64>() / n;
    let num: Vec<f64> = pairs.iter().map(|v| v.1).collect();
    let den: Vec<f64> = pairs.iter().map(|v| (v.0 - mean_x).powi(2) * n / (n - 1.0)).collect();
    let mn = num.iter().sum::<f64>() / n;
    let md = den.iter().sum::<f64>() / n;
    let var_n = num.iter().map(|v| (v - mn).powi(2)).sum::<f64>() / (n - 1.0);
    let var_d = den.iter().map(|v| (v - md).powi(2)).sum::<f64>() / (n - 1.0);
    let cov = num.iter().zip(&den).map(|(a, b)| (a - mn) * (b - md)).sum::<f64>() / (n - 1.0);
    let ratio = mn / md;
    let var_ratio = (var_n / (md * md) + mn * mn * var_d / md.powi(4) - 2.0 * mn * cov / md.powi(3)) / n;
    EstimateWithSE::new(ratio, var_ratio.max(0.0).sqrt(), pairs.len())
}

/// `TV(P, Q) = E_P[(1 - q/p)₊]` from `n` draws of `P`.
pub fn tv_mc_estimate<LP, LQ, S>(log_p: LP, log_q: LQ, sampler_p: S, n: usize, seed: u64) -> Result<EstimateWithSE>
where
    LP: Fn(&[f64]) -> f64,
    LQ: Fn(&[f64]) -> f64,
    S: Fn(&mut SimRng) -> Vec<f64>,
{
    if n < 2 {
        return Err(Error::Input("need at least two samples".into()));
    }
    let mut rng = rng_from_seed(seed);
    let mut m = Moments::default();
    for _ in 0..n {
        let z = sampler_p(&mut rng);
        let (lp, lq) = (log_p(&z), log_q(&z));
        if !lp.is_finite() || lq.is_nan() || lq == f64::INFINITY {
            return Err(Error::Numeric("non-finite log density".into()));
        }
        m.push((-(lq - lp).exp_m1()).max(0.0));
    }
    Ok(EstimateWithSE::new(m.mean(), m.std_error(), n))
}

/// Isotropic Gaussian `N(mean, var I)`.
#[derive(Clone, Debug, PartialEq)]
pub struct IsoGaussian {
    pub mean: Vec<f64>,
    pub var: f64,
}

impl IsoGaussian {
    pub fn log_density(&self, z: &[f64]) -> f64 {
        let d = self.mean.len() as f64;
        let sq: f64 = z.iter().zip(&self.mean).map(|(a, b)| (a - b).powi(2)).sum();
        -0.5 * sq / self.var - 0.5 * d * (2.0 * std::f64::consts::PI * self.var).ln()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let sd = self.var.sqrt();
        self.mean
            .iter()
            .map(|m| m + sd * rng.sample::<f64, _>(StandardNormal))
            .collect()
    }

    /// Time-`h` Ornstein–Uhlenbeck kernel at `x`: `N(e^{-h} x, (1 - e^{-2h}) I)`.
    pub fn ou_kernel(h: f64, x: &[f64]) -> Self {
        IsoGaussian {
            mean: x.iter().map(|v| (-h).exp() * v).collect(),
            var: -(-2.0 * h).exp_m1(),
        }
    }

    /// MALA proposal at `x` for the standard Gaussian target: `N((1 - h) x, 2h I)`.
    pub fn gaussian_mala_proposal(h: f64, x: &[f64]) -> Self {
        IsoGaussian {
            mean: x.iter().map(|v| (1.0 - h) * v).collect(),
            var: 2.0 * h,
        }
    }
}

/// `TV(P, Q)` between two isotropic Gaussians, sampling from `P`.
pub fn gaussian_pair_tv(p: &IsoGaussian, q: &IsoGaussian, n: usize, seed: u64) -> Result<EstimateWithSE> {
    tv_mc_estimate(|z| p.log_density(z), |z| q.log_density(z), |r| p.sample(r), n, seed)
}

/// `‖Q̄_x - Q_x‖_TV` for the Gaussian target, Q̄ the exact OU kernel.
pub fn discretization_tv_gaussian(h: f64, x: &[f64], n: usize, seed: u64) -> Result<EstimateWithSE> {
    gaussian_pair_tv(&IsoGaussian::ou_kernel(h, x), &IsoGaussian::gaussian_mala_proposal(h, x), n, seed)
}

/// `(β^{4/3} h / 2) √(d + β^{2/3} ‖x‖²)`, the bound on `‖Q̄_x - Q_x‖_TV`
/// valid for `h ≤ 1/(3β^{4/3})`.
pub fn discretization_tv_bound(beta: f64, h: f64, d: usize, x_norm2: f64) -> f64 {
    0.5 * beta.powf(4.0 / 3.0) * h * (d as f64 + beta.powf(2.0 / 3.0) * x_norm2).sqrt()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProjectionReport {
    /// `Ê_{x~pi} ‖T_x - Q_x‖_TV`.
    pub lhs: EstimateWithSE,
    /// `2 Ê_{x~pi} ‖Q̄_x - Q_x‖_TV`.
    pub rhs: EstimateWithSE,
    pub combined_se: f64,
    pub passed: bool,
}

impl ProjectionReport {
    /// `rhs + 3·SE - lhs`; nonnegative when the check passes.
    pub fn slack(&self) -> f64 {
        self.rhs.value + 3.0 * self.combined_se - self.lhs.value
    }
}

/// Check `E‖T_x - Q_x‖ ≤ 2 E‖Q̄_x - Q_x‖` on the Gaussian target with the
/// exact OU kernel as Q̄, at a 3-SE margin.
pub fn projection_check_gaussian(h: f64, d: usize, n_states: usize, n_mc: usize, seed: u64) -> Result<ProjectionReport> {
    if !(h > 0.0 && h <= 1.0 / 3.0) {
        return Err(Error::Input(format!("h must lie in (0, 1/3], got {h}")));
    }
    if n_states < 2 {
        return Err(Error::Input("need at least two states".into()));
    }
    let p = Potential::gaussian(d)?;
    let rows: Vec<(f64, f64)> = (0..n_states)
        .into_par_iter()
        .map(|i| -> Result<(f64, f64)> {
            let stream = derive_seed(seed, i as u64);
            let mut rng = rng_from_seed(stream);
            let x: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
            let rej = rejection_probability(&p, h, &x, n_mc, derive_seed(stream, 1))?;
            let tv = discretization_tv_gaussian(h, &x, n_mc, derive_seed(stream, 2))?;
            Ok((rej.value, tv.value))
        })
        .collect::<Result<_>>()?;
    let lhs = EstimateWithSE::from_iid(&rows.iter().map(|r| r.0).collect::<Vec<_>>());
    let tv = EstimateWithSE::from_iid(&rows.iter().map(|r| r.1).collect::<Vec<_>>());
    let rhs = EstimateWithSE::new(2.0 * tv.value, 2.0 * tv.std_error, tv.n_samples);
    let combined_se = lhs.combined_se(&rhs);
    Ok(ProjectionReport {
        lhs,
        rhs,
        combined_se,
        passed: lhs.value <= rhs.value + 3.0 * combined_se,
    })
}

/// Kolmogorov distance between the empirical CDF of `values` and `table`.
pub fn ks_distance(values: &mut [f64], table: &CdfTable) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len() as f64;
    values.iter().enumerate().fold(0.0, |acc: f64, (i, &v)| {
        let f = table.cdf(v);
        acc.max(((i + 1) as f64 / n - f).abs()).max((f - i as f64 / n).abs())
    })
}

/// Sliced-TV proxy: the largest per-coordinate Kolmogorov distance between
/// the sample marginals and the exact 1-D marginal. A lower bound on the
/// full total-variation distance.
pub fn sliced_tv_to_target(samples: &[Vec<f64>], prof: &Profile1D) -> Result<f64> {
    let table = inverse_cdf_table(prof, DEFAULT_GRID)?;
    sliced_tv_with_table(samples, &table)
}

pub fn sliced_tv_with_table(samples: &[Vec<f64>], table: &CdfTable) -> Result<f64> {
    if samples.len() < 1000 {
        return Err(Error::Input(format!("need at least 1000 samples, got {}", samples.len())));
    }
    let d = samples[0].len();
    if samples.iter().any(|s| s.len() != d) {
        return Err(Error::Input("ragged sample matrix".into()));
    }
    let mut column = vec![0.0; samples.len()];
    let mut worst: f64 = 0.0;
    for j in 0..d {
        for (c, s) in column.iter_mut().zip(samples) {
            *c = s[j];
        }
        worst = worst.max(ks_distance(&mut column, table));
    }
    Ok(worst)
}

#[derive(Clone, Debug, PartialEq)]
pub struct MixingMeasurement {
    /// First step at which the sliced-TV proxy fell below `eps`. Since the
    /// proxy lower-bounds total variation, this lower-bounds the mixing time.
    pub first_below: Option<usize>,
    /// Proxy value after `k` steps, `k = 0..=last step run`.
    pub trace: Vec<f64>,
    pub max_steps: usize,
}

impl MixingMeasurement {
    /// Step count, or `max_steps` when the threshold was never reached.
    pub fn steps_or_sentinel(&self) -> usize {
        self.first_below.unwrap_or(self.max_steps)
    }
}

/// Run `n_replicas` independent chains from `x0_sampler` in lockstep and
/// record the sliced-TV proxy to the separable target after each step.
/// With `stop_early` the run ends at the first step below `eps`.
#[allow(clippy::too_many_arguments)]
pub fn mixing_time_measure<S>(
    p: &Potential,
    params: &KernelParams,
    x0_sampler: S,
    eps: f64,
    max_steps: usize,
    n_replicas: usize,
    seed: u64,
    stop_early: bool,
) -> Result<MixingMeasurement>
where
    S: Fn(&mut SimRng) -> Vec<f64> + Sync,
{
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::Input(format!("eps must lie in (0, 1), got {eps}")));
    }
    params.validate()?;
    let table = inverse_cdf_table(&Profile1D::from_potential(p)?, DEFAULT_GRID)?;
    let mut chains: Vec<ChainState> = (0..n_replicas)
        .map(|i| {
            let stream = derive_path(seed, &[i as u64]);
            let x0 = x0_sampler(&mut rng_from_seed(stream));
            ChainState::new(p, &x0, derive_seed(stream, 1))
        })
        .collect::<Result<_>>()?;
    let proxy = |chains: &[ChainState]| -> Result<f64> {
        let xs: Vec<Vec<f64>> = chains.iter().map(|c| c.x().to_vec()).collect();
        sliced_tv_with_table(&xs, &table)
    };
    let mut trace = vec![proxy(&chains)?];
    let mut first_below = (trace[0] < eps).then_some(0);
    for k in 1..=max_steps {
        if stop_early && first_below.is_some() {
            break;
        }
        chains
            .par_iter_mut()
            .try_for_each(|c| kernels::step(p, params, c).map(|_| ()))?;
        let v = proxy(&chains)?;
        trace.push(v);
        if first_below.is_none() && v < eps {
            first_below = Some(k);
        }
    }
    Ok(MixingMeasurement { first_below, trace, max_steps })
}

/// Stationary second moment of `x₁` along one long chain from an exact draw,
/// with a batch-means SE.
pub fn stationary_second_moment(p: &Potential, params: &KernelParams, n_steps: usize, seed: u64) -> Result<EstimateWithSE> {
    let sampler = SeparableSampler::new(p)?;
    let x0 = sampler.sample(&mut rng_from_seed(derive_seed(seed, 0)));
    let summary = kernels::run_chain(p, params, &x0, n_steps, derive_seed(seed, 1), None)?;
    summary
        .coord1_second_moment
        .ok_or_else(|| Error::Input("chain too short for batch means".into()))
}

/// `Ê‖X̄_t - x‖²` for the diffusion started at `x`, from the fine-step
/// reference path (or the exact OU law on the Gaussian target).
pub fn diffusion_msd(p: &Potential, t: f64, x: &[f64], substeps: usize, n: usize, seed: u64) -> Result<EstimateWithSE> {
    p.check_point(x)?;
    let mut rng = rng_from_seed(seed);
    let exact = matches!(p.kind(), PotentialKind::Gaussian) && substeps == 0;
    let mut m = Moments::default();
    for _ in 0..n {
        let y = if exact {
            kernels::ou_exact_step(t, x, &mut rng)
        } else {
            kernels::diffusion_reference_step(p, t, x, substeps, &mut rng)?
        };
        let sq: f64 = y.iter().zip(x).map(|(a, b)| (a - b).powi(2)).sum();
        m.push(sq);
    }
    Ok(EstimateWithSE::new(m.mean(), m.std_error(), n))
}

/// `3t(d + β^{2/3}‖x‖²)`, valid for `t ≤ 1/(3β^{4/3})`.
pub fn msd_bound(beta: f64, t: f64, d: usize, x_norm2: f64) -> f64 {
    3.0 * t * (d as f64 + beta.powf(2.0 / 3.0) * x_norm2)
}

/// Mean acceptance over caller-supplied states, for targets without an
/// exact sampler.
pub fn mean_acceptance_at_states(p: &Potential, h: f64, states: &[Vec<f64>], n_mc: usize, seed: u64) -> Result<EstimateWithSE> {
    if states.len() < 2 {
        return Err(Error::Input("need at least two states".into()));
    }
    let values: Vec<f64> = states
        .par_iter()
        .enumerate()
        .map(|(i, x)| -> Result<f64> {
            p.check_point(x)?;
            Ok(acceptance_draws(p, h, x, n_mc, &mut rng_from_seed(derive_seed(seed, i as u64))).mean())
        })
        .collect::<Result<_>>()?;
    Ok(EstimateWithSE::from_iid(&values))
}
