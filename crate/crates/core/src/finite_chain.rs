//! Finite-state Metropolis chains, checked exactly.
//!
//! Everything here is dense linear algebra on at most 20 states: eigen
//! spectral gaps, conductance by enumerating all subsets, and exact evolution
//! of distributions.

use std::io::Write;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::{Distribution, Exp1};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::rng::{derive_seed, rng_from_seed, SimRng};
use crate::stats::EstimateWithSE;

/// Largest state count accepted by subset enumeration.
pub const MAX_ENUM_STATES: usize = 20;

const STOCHASTIC_TOL: f64 = 1e-12;
const REVERSIBLE_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
pub struct FiniteChain {
    pi: DVector<f64>,
    q: DMatrix<f64>,
    t: DMatrix<f64>,
}

fn check_distribution(pi: &DVector<f64>) -> Result<()> {
    if pi.is_empty() {
        return Err(Error::Input("empty distribution".into()));
    }
    if pi.iter().any(|p| !(p.is_finite() && *p > 0.0)) {
        return Err(Error::Input("pi must be positive and finite".into()));
    }
    if (pi.sum() - 1.0).abs() > STOCHASTIC_TOL {
        return Err(Error::Input(format!("pi sums to {}", pi.sum())));
    }
    Ok(())
}

fn check_stochastic(m: &DMatrix<f64>, n: usize, name: &str) -> Result<()> {
    if m.nrows() != n || m.ncols() != n {
        return Err(Error::Input(format!("{name} must be {n}x{n}, got {}x{}", m.nrows(), m.ncols())));
    }
    if m.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(Error::Input(format!("{name} has negative or non-finite entries")));
    }
    for (i, row) in m.row_iter().enumerate() {
        if (row.sum() - 1.0).abs() > STOCHASTIC_TOL {
            return Err(Error::Input(format!("row {i} of {name} sums to {}", row.sum())));
        }
    }
    Ok(())
}

/// `max_{i,j} |pi_i K_ij - pi_j K_ji|`.
pub fn detailed_balance_error(k: &DMatrix<f64>, pi: &DVector<f64>) -> f64 {
    let n = pi.len();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            worst = worst.max((pi[i] * k[(i, j)] - pi[j] * k[(j, i)]).abs());
        }
    }
    worst
}

impl FiniteChain {
    /// Wrap a kernel `t` that is already reversible for `pi`.
    pub fn from_kernel(pi: DVector<f64>, q: DMatrix<f64>, t: DMatrix<f64>) -> Result<Self> {
        check_distribution(&pi)?;
        let n = pi.len();
        check_stochastic(&q, n, "Q")?;
        check_stochastic(&t, n, "T")?;
        let err = detailed_balance_error(&t, &pi);
        if err > REVERSIBLE_TOL {
            return Err(Error::Input(format!("T is not reversible for pi (error {err:.3e})")));
        }
        Ok(FiniteChain { pi, q, t })
    }

    pub fn n(&self) -> usize {
        self.pi.len()
    }

    pub fn pi(&self) -> &DVector<f64> {
        &self.pi
    }

    pub fn q(&self) -> &DMatrix<f64> {
        &self.q
    }

    pub fn t(&self) -> &DMatrix<f64> {
        &self.t
    }

    pub fn detailed_balance_error(&self) -> f64 {
        detailed_balance_error(&self.t, &self.pi)
    }

    /// `max_j |(pi T)_j - pi_j|`.
    pub fn stationarity_error(&self) -> f64 {
        let moved = self.t.tr_mul(&self.pi);
        (moved - &self.pi).amax()
    }

    /// `mu T`.
    pub fn step_distribution(&self, mu: &DVector<f64>) -> DVector<f64> {
        self.t.tr_mul(mu)
    }
}

/// Metropolis adjustment of `q` toward `pi`:
/// `T_ij = Q_ij min(1, pi_j Q_ji / (pi_i Q_ij))` off the diagonal, with the
/// rejected mass on the diagonal. A zero reverse proposal gives ratio 0.
pub fn metropolize(q: &DMatrix<f64>, pi: &DVector<f64>) -> Result<FiniteChain> {
    check_distribution(pi)?;
    let n = pi.len();
    check_stochastic(q, n, "Q")?;
    let mut t = DMatrix::zeros(n, n);
    for i in 0..n {
        let mut off = 0.0;
        for j in 0..n {
            if i == j || q[(i, j)] == 0.0 {
                continue;
            }
            // min(Q_ij, pi_j Q_ji / pi_i) avoids dividing by Q_ij
            let v = q[(i, j)].min(pi[j] * q[(j, i)] / pi[i]);
            t[(i, j)] = v;
            off += v;
        }
        t[(i, i)] = 1.0 - off;
    }
    Ok(FiniteChain { pi: pi.clone(), q: q.clone(), t })
}

/// `Σ_i pi_i Σ_{j≠i} |A_ij - B_ij|`.
pub fn offdiag_l1(a: &DMatrix<f64>, b: &DMatrix<f64>, pi: &DVector<f64>) -> Result<f64> {
    let n = pi.len();
    if a.shape() != (n, n) || b.shape() != (n, n) {
        return Err(Error::Input("offdiag_l1: shape mismatch".into()));
    }
    Ok((0..n).map(|i| pi[i] * row_offdiag_l1(a, b, i)).sum())
}

fn row_offdiag_l1(a: &DMatrix<f64>, b: &DMatrix<f64>, i: usize) -> f64 {
    (0..a.ncols()).filter(|&j| j != i).map(|j| (a[(i, j)] - b[(i, j)]).abs()).sum()
}

/// Eigenvalues of `T`, descending, from `D^{1/2} T D^{-1/2}` with `D = diag(pi)`.
pub fn eigenvalues(c: &FiniteChain) -> Vec<f64> {
    let n = c.n();
    let s = DMatrix::from_fn(n, n, |i, j| c.pi[i].sqrt() * c.t[(i, j)] / c.pi[j].sqrt());
    let sym = (&s + s.transpose()) * 0.5;
    let mut ev: Vec<f64> = SymmetricEigen::new(sym).eigenvalues.iter().copied().collect();
    ev.sort_by(|a, b| b.total_cmp(a));
    ev
}

/// `1 - λ₂(T)`.
pub fn spectral_gap(c: &FiniteChain) -> f64 {
    let ev = eigenvalues(c);
    if ev.len() < 2 {
        return 0.0;
    }
    (1.0 - ev[1]).clamp(0.0, 2.0)
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpectralQuantities {
    pub gap: f64,
    pub conductance: f64,
    pub eigenvalues: Vec<f64>,
    /// `(pi(S), flow(S, S^c))` for every nonempty `S` with `pi(S) ≤ 1/2`.
    cuts: Vec<(f64, f64)>,
}

impl SpectralQuantities {
    /// `C_s = inf { flow(S) / (pi(S) - s) : s < pi(S) ≤ 1/2 }`, or `None`
    /// when no subset has mass in `(s, 1/2]`.
    pub fn s_conductance(&self, s: f64) -> Option<f64> {
        self.cuts
            .iter()
            .filter(|(m, _)| *m > s)
            .map(|(m, f)| f / (m - s))
            .min_by(f64::total_cmp)
    }

    /// Largest `pi(S)` among enumerated sets; `C_s` is defined for `s` below it.
    pub fn max_cut_mass(&self) -> f64 {
        self.cuts.iter().map(|c| c.0).fold(0.0, f64::max)
    }

    pub fn cuts(&self) -> &[(f64, f64)] {
        &self.cuts
    }
}

/// Gap by eigendecomposition; conductance and s-conductance by enumerating
/// all `2^n` subsets.
pub fn spectral_quantities(c: &FiniteChain) -> Result<SpectralQuantities> {
    let n = c.n();
    if n > MAX_ENUM_STATES {
        return Err(Error::Resource(format!("subset enumeration needs n ≤ {MAX_ENUM_STATES}, got {n}")));
    }
    let eigenvalues = eigenvalues(c);
    let gap = if n < 2 { 0.0 } else { (1.0 - eigenvalues[1]).clamp(0.0, 2.0) };
    let flux = DMatrix::from_fn(n, n, |i, j| c.pi[i] * c.t[(i, j)]);
    let mut cuts = Vec::new();
    for mask in 1u32..(1u32 << n) {
        let mass: f64 = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| c.pi[i]).sum();
        if mass > 0.5 + 1e-15 {
            continue;
        }
        let mut flow = 0.0;
        for i in (0..n).filter(|i| mask >> i & 1 == 1) {
            for j in (0..n).filter(|j| mask >> j & 1 == 0) {
                flow += flux[(i, j)];
            }
        }
        cuts.push((mass, flow));
    }
    let conductance = cuts
        .iter()
        .map(|(m, f)| f / m)
        .min_by(f64::total_cmp)
        .unwrap_or(0.0)
        .clamp(0.0, 1.0);
    Ok(SpectralQuantities { gap, conductance, eigenvalues, cuts })
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProjectionReport {
    /// `offdiag_l1(T, Q, pi)`.
    pub global_lhs: f64,
    /// `2 offdiag_l1(Q̄, Q, pi)`.
    pub global_rhs: f64,
    /// Per state `(Σ_{j≠i}|T-Q|_ij, pointwise right side)`.
    pub per_state: Vec<(f64, f64)>,
}

impl ProjectionReport {
    pub fn global_slack(&self) -> f64 {
        self.global_rhs - self.global_lhs
    }

    pub fn worst_state_slack(&self) -> f64 {
        self.per_state.iter().map(|(l, r)| r - l).fold(f64::INFINITY, f64::min)
    }

    pub fn passes(&self, tol: f64) -> bool {
        self.global_slack() >= -tol && self.worst_state_slack() >= -tol
    }
}

/// Compare the Metropolis kernel of `q` with an arbitrary `pi`-reversible
/// kernel `qbar`, globally and per state:
/// `Σ_{j≠i}|T-Q|_ij ≤ 2Σ_{j≠i}|Q̄-Q|_ij + Σ_{j≠i, Q̄_ji>0} (pi_j Q̄_ji / pi_i)|Q_ji/Q̄_ji - 1|`.
pub fn projection_check(q: &DMatrix<f64>, qbar: &DMatrix<f64>, pi: &DVector<f64>) -> Result<ProjectionReport> {
    let c = metropolize(q, pi)?;
    let n = pi.len();
    check_stochastic(qbar, n, "Qbar")?;
    let err = detailed_balance_error(qbar, pi);
    if err > REVERSIBLE_TOL {
        return Err(Error::Input(format!("Qbar is not reversible for pi (error {err:.3e})")));
    }
    let per_state = (0..n)
        .map(|i| {
            let lhs = row_offdiag_l1(&c.t, q, i);
            let reverse: f64 = (0..n)
                .filter(|&j| j != i && qbar[(j, i)] > 0.0)
                .map(|j| pi[j] * qbar[(j, i)] / pi[i] * (q[(j, i)] / qbar[(j, i)] - 1.0).abs())
                .sum();
            (lhs, 2.0 * row_offdiag_l1(qbar, q, i) + reverse)
        })
        .collect();
    Ok(ProjectionReport {
        global_lhs: offdiag_l1(&c.t, q, pi)?,
        global_rhs: 2.0 * offdiag_l1(qbar, q, pi)?,
        per_state,
    })
}

/// `max_i mu_i / pi_i`.
pub fn warmness(mu: &DVector<f64>, pi: &DVector<f64>) -> f64 {
    mu.iter().zip(pi.iter()).map(|(m, p)| m / p).fold(0.0, f64::max)
}

pub fn tv_distance(mu: &DVector<f64>, pi: &DVector<f64>) -> f64 {
    0.5 * (mu - pi).abs().sum()
}

/// `χ²(mu ‖ pi) = Σ (mu_i - pi_i)² / pi_i`.
pub fn chi_square(mu: &DVector<f64>, pi: &DVector<f64>) -> f64 {
    mu.iter().zip(pi.iter()).map(|(m, p)| (m - p) * (m - p) / p).sum()
}

/// Default `s` grid for the mixing bound.
pub const S_GRID: [f64; 7] = [0.01, 0.05, 0.1, 0.2, 0.3, 0.4, 0.49];

#[derive(Clone, Debug, PartialEq)]
pub struct EvolveStep {
    pub n: usize,
    pub warmness: f64,
    pub tv: f64,
    pub chi_square: f64,
    /// `(s, M₀s + M₀ exp(-C_s² n / 2))` for each `s` where `C_s` is defined.
    pub lovasz: Vec<(f64, f64)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvolveReport {
    pub m0: f64,
    pub steps: Vec<EvolveStep>,
}

impl EvolveReport {
    /// `M₀ - max_n warmness(mu_n)`.
    pub fn warmness_slack(&self) -> f64 {
        self.steps.iter().map(|s| self.m0 - s.warmness).fold(f64::INFINITY, f64::min)
    }

    /// `min_n 2M₀ TV(mu_n) - χ²(mu_n)`.
    pub fn chi_square_slack(&self) -> f64 {
        self.steps
            .iter()
            .map(|s| 2.0 * self.m0 * s.tv - s.chi_square)
            .fold(f64::INFINITY, f64::min)
    }

    /// `min_{n,s} bound - TV(mu_n)`.
    pub fn lovasz_slack(&self) -> f64 {
        self.steps
            .iter()
            .flat_map(|st| st.lovasz.iter().map(move |(_, b)| b - st.tv))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn passes(&self, tol: f64) -> bool {
        self.warmness_slack() >= -tol && self.chi_square_slack() >= -tol && self.lovasz_slack() >= -tol
    }
}

/// Evolve `mu0` for `n_steps` steps and record warmness, TV, χ² and the
/// s-conductance mixing bound on [`S_GRID`] at each step (including step 0).
pub fn evolve_and_check(c: &FiniteChain, mu0: &DVector<f64>, n_steps: usize) -> Result<EvolveReport> {
    let sq = spectral_quantities(c)?;
    evolve_with(c, &sq, mu0, n_steps, &S_GRID)
}

pub fn evolve_with(
    c: &FiniteChain,
    sq: &SpectralQuantities,
    mu0: &DVector<f64>,
    n_steps: usize,
    s_grid: &[f64],
) -> Result<EvolveReport> {
    if mu0.len() != c.n() || mu0.iter().any(|m| !(m.is_finite() && *m >= 0.0)) || (mu0.sum() - 1.0).abs() > STOCHASTIC_TOL {
        return Err(Error::Input("mu0 must be a probability vector over the chain's states".into()));
    }
    let m0 = warmness(mu0, &c.pi);
    let cs: Vec<(f64, f64)> = s_grid
        .iter()
        .filter_map(|&s| sq.s_conductance(s).map(|v| (s, v)))
        .collect();
    let mut mu = mu0.clone();
    let mut steps = Vec::with_capacity(n_steps + 1);
    for n in 0..=n_steps {
        if n > 0 {
            mu = c.step_distribution(&mu);
        }
        steps.push(EvolveStep {
            n,
            warmness: warmness(&mu, &c.pi),
            tv: tv_distance(&mu, &c.pi),
            chi_square: chi_square(&mu, &c.pi),
            lovasz: cs
                .iter()
                .map(|&(s, v)| (s, m0 * s + m0 * (-v * v * n as f64 / 2.0).exp()))
                .collect(),
        });
    }
    Ok(EvolveReport { m0, steps })
}

/// Probability vector from a symmetric Dirichlet(1).
pub fn random_distribution(n: usize, rng: &mut SimRng) -> DVector<f64> {
    let w: Vec<f64> = (0..n).map(|_| Exp1.sample(rng)).collect::<Vec<f64>>();
    let total: f64 = w.iter().sum();
    DVector::from_iterator(n, w.into_iter().map(|v| v / total))
}

/// Row-normalised matrix of uniform `(0, 1]` entries.
pub fn random_proposal(n: usize, rng: &mut SimRng) -> DMatrix<f64> {
    let mut m = DMatrix::from_fn(n, n, |_, _| 1.0 - rng.gen::<f64>());
    for mut row in m.row_iter_mut() {
        let s = row.sum();
        row /= s;
    }
    m
}

/// A seeded `(pi, Q, Q̄)` triple; `Q̄` is the Metropolis kernel of an
/// independent proposal, so it is reversible for `pi`.
#[derive(Clone, Debug)]
pub struct RandomInstance {
    pub seed: u64,
    pub pi: DVector<f64>,
    pub q: DMatrix<f64>,
    pub qbar: DMatrix<f64>,
}

impl RandomInstance {
    pub fn generate(n: usize, seed: u64) -> Result<Self> {
        if n == 0 {
            return Err(Error::Input("need at least one state".into()));
        }
        let mut rng = rng_from_seed(seed);
        let pi = random_distribution(n, &mut rng);
        let q = random_proposal(n, &mut rng);
        let other = random_proposal(n, &mut rng);
        let qbar = metropolize(&other, &pi)?.t;
        Ok(RandomInstance { seed, pi, q, qbar })
    }
}

/// One inequality outcome. `slack ≥ 0` means it held.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckRow {
    pub instance_seed: u64,
    pub check: &'static str,
    pub slack: f64,
}

/// Tolerance applied to every exact finite-chain check.
pub const EXACT_TOL: f64 = 1e-12;

/// Run every exact check on one random instance with `n` states.
pub fn check_instance(n: usize, seed: u64, n_steps: usize) -> Result<Vec<CheckRow>> {
    let inst = RandomInstance::generate(n, seed)?;
    let c = metropolize(&inst.q, &inst.pi)?;
    let sq = spectral_quantities(&c)?;
    let proj = projection_check(&inst.q, &inst.qbar, &inst.pi)?;
    let mut rng = rng_from_seed(derive_seed(seed, 1));
    let mu0 = if rng.gen::<bool>() {
        let mut v = DVector::zeros(n);
        v[rng.gen_range(0..n)] = 1.0;
        v
    } else {
        random_distribution(n, &mut rng)
    };
    let ev = evolve_with(&c, &sq, &mu0, n_steps, &S_GRID)?;
    let row = |check, slack| CheckRow { instance_seed: seed, check, slack };
    Ok(vec![
        row("detailed_balance", EXACT_TOL - c.detailed_balance_error()),
        row("stationarity", EXACT_TOL - c.stationarity_error()),
        row("projection_global", proj.global_slack()),
        row("projection_pointwise", proj.worst_state_slack()),
        row("warmness_monotone", ev.warmness_slack()),
        row("chi_square_warm", ev.chi_square_slack()),
        row("cheeger_lower", sq.gap - sq.conductance * sq.conductance / 8.0),
        row("cheeger_upper", 2.0 * sq.conductance - sq.gap),
        row("s_conductance_mixing", ev.lovasz_slack()),
    ])
}

/// Outcome of the random-instance suite.
#[derive(Clone, Debug, PartialEq)]
pub struct SuiteReport {
    pub rows: Vec<CheckRow>,
}

impl SuiteReport {
    pub fn failures(&self) -> Vec<&CheckRow> {
        self.rows.iter().filter(|r| r.slack < -EXACT_TOL).collect()
    }

    pub fn passed(&self) -> bool {
        self.failures().is_empty()
    }

    /// Smallest slack per check id, in first-seen order.
    pub fn worst_by_check(&self) -> Vec<(&'static str, f64)> {
        let mut out: Vec<(&'static str, f64)> = Vec::new();
        for r in &self.rows {
            match out.iter_mut().find(|(c, _)| *c == r.check) {
                Some(e) => e.1 = e.1.min(r.slack),
                None => out.push((r.check, r.slack)),
            }
        }
        out
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

/// `n_instances` random chains with 2..=`max_n` states; instance `k` uses
/// seed `derive_seed(seed, k)` and `2 + k % (max_n - 1)` states.
pub fn random_suite(n_instances: usize, max_n: usize, n_steps: usize, seed: u64) -> Result<SuiteReport> {
    if !(2..=MAX_ENUM_STATES).contains(&max_n) {
        return Err(Error::Input(format!("max_n must lie in 2..={MAX_ENUM_STATES}")));
    }
    let per: Vec<Vec<CheckRow>> = (0..n_instances)
        .into_par_iter()
        .map(|k| check_instance(2 + k % (max_n - 1), derive_seed(seed, k as u64), n_steps))
        .collect::<Result<_>>()?;
    Ok(SuiteReport { rows: per.into_iter().flatten().collect() })
}

/// MALA on a uniform 1-D grid: proposals are the Gaussian proposal density
/// evaluated on the grid and normalised per row, then metropolized.
pub fn discretized_mala_1d<V, G>(v: V, dv: G, h: f64, grid: &[f64]) -> Result<FiniteChain>
where
    V: Fn(f64) -> f64,
    G: Fn(f64) -> f64,
{
    if grid.len() < 2 || !(h > 0.0) {
        return Err(Error::Input("need a grid of at least two points and h > 0".into()));
    }
    let n = grid.len();
    let vmin = grid.iter().map(|&x| v(x)).fold(f64::INFINITY, f64::min);
    let w: Vec<f64> = grid.iter().map(|&x| (vmin - v(x)).exp()).collect();
    let total: f64 = w.iter().sum();
    let pi = DVector::from_iterator(n, w.into_iter().map(|p| p / total));
    let mut q = DMatrix::zeros(n, n);
    for (i, &x) in grid.iter().enumerate() {
        let mean = x - h * dv(x);
        let logs: Vec<f64> = grid.iter().map(|&y| -(y - mean).powi(2) / (4.0 * h)).collect();
        let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let row: Vec<f64> = logs.iter().map(|l| (l - top).exp()).collect();
        let s: f64 = row.iter().sum();
        for (j, r) in row.into_iter().enumerate() {
            q[(i, j)] = r / s;
        }
    }
    metropolize(&q, &pi)
}

/// Monte-Carlo Rayleigh quotient of `f(i) = values[i]` on a finite chain:
/// `½Ê[(f(x) - f(y))²] / Var̂ f(x)` with `x ~ pi`, `y ~ T(x, ·)`.
pub fn rayleigh_estimate(c: &FiniteChain, values: &[f64], n: usize, seed: u64) -> Result<EstimateWithSE> {
    if values.len() != c.n() || n < 2 {
        return Err(Error::Input("values must match the state count and n ≥ 2".into()));
    }
    let mut rng = rng_from_seed(seed);
    let pi: Vec<f64> = c.pi.iter().copied().collect();
    let rows: Vec<Vec<f64>> = c.t.row_iter().map(|r| r.iter().copied().collect()).collect();
    let pick = |w: &[f64], rng: &mut SimRng| -> usize {
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        for (k, p) in w.iter().enumerate() {
            acc += p;
            if u < acc {
                return k;
            }
        }
        w.len() - 1
    };
    let pairs: Vec<(f64, f64)> = (0..n)
        .map(|_| {
            let i = pick(&pi, &mut rng);
            let j = pick(&rows[i], &mut rng);
            (values[i], 0.5 * (values[i] - values[j]).powi(2))
        })
        .collect();
    Ok(crate::diagnostics::rayleigh_ratio(&pairs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn two_state() -> FiniteChain {
        let q = DMatrix::from_row_slice(2, 2, &[0.5, 0.5, 0.5, 0.5]);
        let pi = DVector::from_vec(vec![2.0 / 3.0, 1.0 / 3.0]);
        metropolize(&q, &pi).unwrap()
    }

    #[test]
    fn two_state_kernel() {
        let c = two_state();
        let want = DMatrix::from_row_slice(2, 2, &[0.75, 0.25, 0.5, 0.5]);
        assert_abs_diff_eq!((c.t() - want).amax(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(offdiag_l1(c.t(), c.q(), c.pi()).unwrap(), 1.0 / 6.0, epsilon = 1e-15);
        let sq = spectral_quantities(&c).unwrap();
        assert_abs_diff_eq!(sq.gap, 0.75, epsilon = 1e-12);
        assert_abs_diff_eq!(sq.conductance, 0.5, epsilon = 1e-12);
    }

    #[test]
    fn reversible_proposal_is_fixed_point() {
        let pi = DVector::from_vec(vec![0.25; 4]);
        let q = DMatrix::from_fn(4, 4, |i, j| if i == j { 0.0 } else { 1.0 / 3.0 });
        let c = metropolize(&q, &pi).unwrap();
        assert_abs_diff_eq!((c.t() - &q).amax(), 0.0, epsilon = 1e-15);
        let inst = RandomInstance::generate(5, 9).unwrap();
        let c = metropolize(&inst.qbar, &inst.pi).unwrap();
        assert_abs_diff_eq!((c.t() - &inst.qbar).amax(), 0.0, epsilon = 1e-15);
        let bad = DMatrix::from_row_slice(2, 2, &[0.5, 0.0, 0.0, 0.0]);
        assert!(metropolize(&bad, &DVector::from_vec(vec![0.5, 0.5])).is_err());
    }

    #[test]
    fn identity_is_disconnected() {
        let pi = DVector::from_vec(vec![0.2, 0.3, 0.5]);
        let id = DMatrix::identity(3, 3);
        let c = FiniteChain::from_kernel(pi, id.clone(), id).unwrap();
        let sq = spectral_quantities(&c).unwrap();
        assert_eq!(sq.gap, 0.0);
        assert_eq!(sq.conductance, 0.0);
    }

    #[test]
    fn too_many_states() {
        let n = 21;
        let pi = DVector::from_element(n, 1.0 / n as f64);
        let q = DMatrix::from_element(n, n, 1.0 / n as f64);
        let c = metropolize(&q, &pi).unwrap();
        assert!(matches!(spectral_quantities(&c), Err(Error::Resource(_))));
        assert!(spectral_gap(&c) > 0.9);
    }

    #[test]
    fn projection_self_and_nonreversible() {
        let inst = RandomInstance::generate(6, 4).unwrap();
        let t = metropolize(&inst.q, &inst.pi).unwrap().t().clone();
        assert!(projection_check(&inst.q, &t, &inst.pi).unwrap().passes(1e-12));
        assert!(matches!(projection_check(&inst.q, &inst.q, &inst.pi), Err(Error::Input(_))));
    }

    #[test]
    fn two_state_evolution() {
        let c = two_state();
        let mu0 = DVector::from_vec(vec![1.0, 0.0]);
        let r = evolve_and_check(&c, &mu0, 1).unwrap();
        assert_abs_diff_eq!(r.m0, 1.5, epsilon = 1e-15);
        assert_abs_diff_eq!(r.steps[1].warmness, 1.125, epsilon = 1e-15);
        assert!(r.passes(1e-12));
        let at_pi = evolve_and_check(&c, c.pi(), 10).unwrap();
        assert!(at_pi.steps.iter().all(|s| s.tv < 1e-15));
    }

    #[test]
    fn s_conductance_nondecreasing() {
        let inst = RandomInstance::generate(7, 11).unwrap();
        let c = metropolize(&inst.q, &inst.pi).unwrap();
        let sq = spectral_quantities(&c).unwrap();
        let mut prev = 0.0;
        for k in 0..50 {
            let s = 0.01 * k as f64;
            if let Some(v) = sq.s_conductance(s) {
                assert!(v >= prev - 1e-15);
                prev = v;
            }
        }
    }

    #[test]
    fn small_suite_passes() {
        let r = random_suite(40, 8, 30, 1).unwrap();
        assert!(r.passed(), "{:?}", r.failures());
    }

    #[test]
    fn rayleigh_bounds_gap() {
        let grid: Vec<f64> = (0..15).map(|k| -3.5 + 0.5 * k as f64).collect();
        let c = discretized_mala_1d(|x| 0.5 * x * x, |x| x, 0.3, &grid).unwrap();
        let gap = spectral_gap(&c);
        let est = rayleigh_estimate(&c, &grid, 200_000, 5).unwrap();
        assert!(est.value >= gap - 3.0 * est.std_error, "{est:?} vs {gap}");
    }
}
