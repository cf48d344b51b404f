//! Parameter sweeps over dimension and step size, written as CSV rows.
//!
//! Each `(d, h)` cell gets its own seed derived from the sweep seed, the
//! experiment label and the cell coordinates. Rows are sorted into a fixed
//! order before writing, so identical configs give identical files.

use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::diagnostics::{self, TypicalSetFilter};
use crate::error::{Error, Result};
use crate::kernels::KernelParams;
use crate::potential::{parse_pairs, Potential};
use crate::rng::{derive_path, derive_seed, label_id};

/// CSV header of every sweep file.
pub const HEADER: &str = "experiment,d,h,eta,estimator,value,std_error,n,seed";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Experiment {
    Accept,
    Collapse,
    Gap,
    Mix,
}

impl Experiment {
    pub fn label(self) -> &'static str {
        match self {
            Experiment::Accept => "accept",
            Experiment::Collapse => "collapse",
            Experiment::Gap => "gap",
            Experiment::Mix => "mix",
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Experiment {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "accept" => Ok(Experiment::Accept),
            "collapse" => Ok(Experiment::Collapse),
            "gap" => Ok(Experiment::Gap),
            "mix" => Ok(Experiment::Mix),
            _ => Err(Error::Config(format!("unknown experiment '{s}'"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TargetKind {
    Gaussian,
    Adversarial,
    Coupled,
}

/// How the step size depends on the dimension.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HRule {
    /// Every value in `h_grid`, independent of `d`.
    Fixed,
    /// `h = c d^p`.
    Power,
    /// `h = c √α / (β^{4/3} √d ln(d κ M₀ / ε))`.
    Theorem1,
}

impl FromStr for HRule {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fixed" => Ok(HRule::Fixed),
            "power" => Ok(HRule::Power),
            "theorem1" => Ok(HRule::Theorem1),
            _ => Err(Error::Config(format!("unknown h_rule '{s}' (fixed|power|theorem1)"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepConfig {
    pub experiment: Experiment,
    pub target: TargetKind,
    pub eta: f64,
    pub coupling: f64,
    pub d_grid: Vec<usize>,
    pub h_rule: HRule,
    pub h_grid: Vec<f64>,
    pub c: f64,
    pub p: f64,
    /// Accuracy `ε` in the theorem1 rule and threshold for `mix`.
    pub eps: f64,
    /// Warmness `M₀` in the theorem1 rule; `None` derives it from `x0_var`.
    pub m0: Option<f64>,
    /// Variance of the `N(0, x0_var I)` start used by `mix`.
    pub x0_var: f64,
    pub n_states: usize,
    pub n_mc: usize,
    pub n_replicas: usize,
    pub max_steps: usize,
    pub filter: bool,
    /// Also estimate Gaussian acceptance at the same `(d, h)`.
    pub gaussian_reference: bool,
    pub seed: u64,
    pub output_path: Option<PathBuf>,
}

fn pow2_range(lo: u32, hi: u32) -> Vec<usize> {
    (lo..=hi).map(|k| 1usize << k).collect()
}

impl SweepConfig {
    pub fn default_for(experiment: Experiment) -> Self {
        let base = SweepConfig {
            experiment,
            target: TargetKind::Gaussian,
            eta: 0.2,
            coupling: 0.5,
            d_grid: pow2_range(6, 12),
            h_rule: HRule::Power,
            h_grid: vec![1e-3, 1e-2, 0.05, 0.1, 0.3, 0.5],
            c: 0.5,
            p: -1.0 / 3.0,
            eps: 0.1,
            m0: None,
            x0_var: 0.5,
            n_states: 200,
            n_mc: 200,
            n_replicas: 1000,
            max_steps: 20_000,
            filter: true,
            gaussian_reference: false,
            seed: 0,
            output_path: None,
        };
        match experiment {
            Experiment::Accept => base,
            Experiment::Collapse => SweepConfig {
                target: TargetKind::Adversarial,
                d_grid: pow2_range(8, 16),
                c: 1.0,
                p: -0.4,
                n_states: 2000,
                n_mc: 4,
                gaussian_reference: true,
                ..base
            },
            Experiment::Gap => SweepConfig {
                target: TargetKind::Adversarial,
                d_grid: vec![64],
                h_rule: HRule::Fixed,
                n_states: 100_000,
                ..base
            },
            Experiment::Mix => SweepConfig {
                d_grid: vec![64],
                h_rule: HRule::Theorem1,
                c: 0.1,
                ..base
            },
        }
    }

    /// Defaults for `experiment`, then every `key=value` pair of `text`.
    pub fn parse(experiment: Experiment, text: &str) -> Result<Self> {
        let mut cfg = SweepConfig::default_for(experiment);
        for (k, v) in parse_pairs(text)? {
            cfg.set(&k, &v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: FromStr>(key: &str, v: &str) -> Result<T> {
            v.parse().map_err(|_| Error::Config(format!("bad value '{v}' for '{key}'")))
        }
        fn flag(key: &str, v: &str) -> Result<bool> {
            match v {
                "true" | "on" | "1" => Ok(true),
                "false" | "off" | "0" => Ok(false),
                _ => Err(Error::Config(format!("bad value '{v}' for '{key}'"))),
            }
        }
        match key {
            "experiment" => {
                let e: Experiment = value.parse()?;
                if e != self.experiment {
                    return Err(Error::Config(format!("config is for '{e}', command runs '{}'", self.experiment)));
                }
            }
            "target" => {
                self.target = match value {
                    "gaussian" => TargetKind::Gaussian,
                    "adversarial" => TargetKind::Adversarial,
                    "coupled" => TargetKind::Coupled,
                    _ => return Err(Error::Config(format!("unknown target '{value}'"))),
                }
            }
            "eta" => self.eta = num(key, value)?,
            "delta" => self.eta = 0.25 - num::<f64>(key, value)?,
            "coupling" => self.coupling = num(key, value)?,
            "d_grid" => self.d_grid = parse_d_grid(value)?,
            "h_rule" => self.h_rule = value.parse()?,
            "h" | "h_grid" => {
                self.h_grid = value
                    .split(',')
                    .map(|s| num(key, s.trim()))
                    .collect::<Result<_>>()?
            }
            "c" => self.c = num(key, value)?,
            "p" => self.p = num(key, value)?,
            "eps" => self.eps = num(key, value)?,
            "m0" => self.m0 = Some(num(key, value)?),
            "x0_var" => self.x0_var = num(key, value)?,
            "n_states" | "n" => self.n_states = num(key, value)?,
            "n_mc" => self.n_mc = num(key, value)?,
            "n_replicas" => self.n_replicas = num(key, value)?,
            "max_steps" => self.max_steps = num(key, value)?,
            "filter" => self.filter = flag(key, value)?,
            "gaussian_reference" => self.gaussian_reference = flag(key, value)?,
            "seed" => self.seed = num(key, value)?,
            "output_path" | "out" => self.output_path = Some(PathBuf::from(value)),
            _ => return Err(Error::Config(format!("unknown config key '{key}'"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.d_grid.is_empty() || self.d_grid.contains(&0) {
            return Err(Error::Config("d_grid must be nonempty with positive entries".into()));
        }
        if self.h_rule == HRule::Fixed && (self.h_grid.is_empty() || self.h_grid.iter().any(|h| !(*h > 0.0))) {
            return Err(Error::Config("fixed h_rule needs a nonempty grid of positive h".into()));
        }
        if !(self.c > 0.0) {
            return Err(Error::Config("c must be positive".into()));
        }
        if !(self.eps > 0.0 && self.eps < 1.0) {
            return Err(Error::Config("eps must lie in (0, 1)".into()));
        }
        if !(self.x0_var > 0.0) {
            return Err(Error::Config("x0_var must be positive".into()));
        }
        if self.n_states < 2 || self.n_mc == 0 || self.n_replicas < 1000 {
            return Err(Error::Config("need n_states ≥ 2, n_mc ≥ 1, n_replicas ≥ 1000".into()));
        }
        Ok(())
    }

    pub fn potential(&self, d: usize) -> Result<Potential> {
        match self.target {
            TargetKind::Gaussian => Potential::gaussian(d),
            TargetKind::Adversarial => Potential::adversarial(d, self.eta),
            TargetKind::Coupled => Potential::coupled_quadratic(d, self.coupling),
        }
    }

    /// Warmness of `N(0, x0_var I)` relative to the standard Gaussian,
    /// `x0_var^{-d/2}` when `x0_var < 1` (unbounded otherwise).
    pub fn warmness(&self, d: usize) -> f64 {
        self.m0.unwrap_or_else(|| {
            if self.x0_var < 1.0 {
                self.x0_var.powf(-0.5 * d as f64)
            } else {
                f64::INFINITY
            }
        })
    }

    /// Step sizes used at dimension `d`.
    pub fn step_sizes(&self, p: &Potential) -> Result<Vec<f64>> {
        let d = p.dim() as f64;
        match self.h_rule {
            HRule::Fixed => Ok(self.h_grid.clone()),
            HRule::Power => Ok(vec![self.c * d.powf(self.p)]),
            HRule::Theorem1 => {
                let (alpha, beta) = p.convexity_bounds();
                let m0 = self.warmness(p.dim());
                let log_term = (d.ln() + p.condition_number().ln() + m0.ln() - self.eps.ln()).max(1.0);
                if !log_term.is_finite() {
                    return Err(Error::Config("theorem1 rule needs a finite warmness (set m0 or x0_var < 1)".into()));
                }
                Ok(vec![self.c * alpha.sqrt() / (beta.powf(4.0 / 3.0) * d.sqrt() * log_term)])
            }
        }
    }
}

fn parse_d_grid(s: &str) -> Result<Vec<usize>> {
    // "64,128,256" or "2^6..2^12"
    if let Some((lo, hi)) = s.split_once("..") {
        let exp = |t: &str| -> Result<u32> {
            t.trim()
                .strip_prefix("2^")
                .and_then(|e| e.parse().ok())
                .filter(|e: &u32| *e < 40)
                .ok_or_else(|| Error::Config(format!("bad d_grid range '{s}'")))
        };
        let (a, b) = (exp(lo)?, exp(hi)?);
        if a > b {
            return Err(Error::Config(format!("empty d_grid range '{s}'")));
        }
        return Ok(pow2_range(a, b));
    }
    s.split(',')
        .map(|t| t.trim().parse().map_err(|_| Error::Config(format!("bad d_grid entry '{t}'"))))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub experiment: String,
    pub d: usize,
    pub h: f64,
    pub eta: Option<f64>,
    pub estimator: String,
    pub value: f64,
    /// Empty for deterministic quantities such as step counts.
    pub std_error: Option<f64>,
    pub n: usize,
    pub seed: u64,
}

fn canonical_order(a: &SweepRow, b: &SweepRow) -> std::cmp::Ordering {
    a.experiment
        .cmp(&b.experiment)
        .then(a.d.cmp(&b.d))
        .then(a.h.total_cmp(&b.h))
        .then(a.estimator.cmp(&b.estimator))
}

struct Cell {
    d: usize,
    h: f64,
    seed: u64,
}

/// Run every `(d, h)` cell of `cfg` and return rows in canonical order.
pub fn run_sweep(cfg: &SweepConfig) -> Result<Vec<SweepRow>> {
    cfg.validate()?;
    let exp_id = label_id(cfg.experiment.label());
    let mut cells = Vec::new();
    for &d in &cfg.d_grid {
        let p = cfg.potential(d)?;
        for (k, h) in cfg.step_sizes(&p)?.into_iter().enumerate() {
            cells.push(Cell { d, h, seed: derive_path(cfg.seed, &[exp_id, d as u64, k as u64]) });
        }
    }
    let per_cell: Vec<Vec<SweepRow>> = cells
        .par_iter()
        .map(|cell| run_cell(cfg, cell))
        .collect::<Result<_>>()?;
    let mut rows: Vec<SweepRow> = per_cell.into_iter().flatten().collect();
    rows.sort_by(canonical_order);
    Ok(rows)
}

fn run_cell(cfg: &SweepConfig, cell: &Cell) -> Result<Vec<SweepRow>> {
    let p = cfg.potential(cell.d)?;
    let eta = p.eta();
    let row = |estimator: &str, value: f64, std_error: Option<f64>, n: usize| SweepRow {
        experiment: cfg.experiment.label().to_string(),
        d: cell.d,
        h: cell.h,
        eta,
        estimator: estimator.to_string(),
        value,
        std_error,
        n,
        seed: cell.seed,
    };
    let filter = if cfg.filter { TypicalSetFilter::for_dim(cell.d) } else { TypicalSetFilter::disabled() };
    let mut out = Vec::new();
    match cfg.experiment {
        Experiment::Accept | Experiment::Collapse => {
            let m = diagnostics::mean_acceptance(&p, cell.h, cfg.n_states, cfg.n_mc, filter, cell.seed)?;
            out.push(row("mean_acceptance", m.estimate.value, Some(m.estimate.std_error), cfg.n_states));
            out.push(row("filtered_fraction", m.filtered_fraction, None, cfg.n_states));
            if cfg.gaussian_reference {
                let g = Potential::gaussian(cell.d)?;
                let m = diagnostics::mean_acceptance(&g, cell.h, cfg.n_states, cfg.n_mc, filter, derive_seed(cell.seed, 1))?;
                out.push(row("mean_acceptance_gaussian", m.estimate.value, Some(m.estimate.std_error), cfg.n_states));
            }
        }
        Experiment::Gap => {
            let e = diagnostics::dirichlet_gap_upper(&p, cell.h, cfg.n_states, cell.seed)?;
            out.push(row("dirichlet_gap_upper", e.value, Some(e.std_error), cfg.n_states));
            out.push(row("gap_ceiling_5h", 5.0 * cell.h, None, cfg.n_states));
        }
        Experiment::Mix => {
            let sd = cfg.x0_var.sqrt();
            let d = cell.d;
            let m = diagnostics::mixing_time_measure(
                &p,
                &KernelParams::mala(cell.h),
                |r| (0..d).map(|_| sd * r.sample::<f64, _>(StandardNormal)).collect(),
                cfg.eps,
                cfg.max_steps,
                cfg.n_replicas,
                cell.seed,
                true,
            )?;
            let last = *m.trace.last().expect("trace holds step 0");
            out.push(row("mixing_steps_lower_bound", m.steps_or_sentinel() as f64, None, cfg.n_replicas));
            out.push(row("reached_eps", if m.first_below.is_some() { 1.0 } else { 0.0 }, None, cfg.n_replicas));
            out.push(row("final_sliced_tv", last, None, cfg.n_replicas));
        }
    }
    Ok(out)
}

pub fn write_rows<W: Write>(rows: &[SweepRow], w: W) -> Result<()> {
    let mut wtr = csv::WriterBuilder::new().has_headers(false).from_writer(w);
    wtr.write_record(HEADER.split(','))?;
    for r in rows {
        wtr.serialize(r)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn write_rows_to_path(rows: &[SweepRow], path: &Path) -> Result<()> {
    write_rows(rows, BufWriter::new(File::create(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_config() {
        let cfg = SweepConfig::parse(
            Experiment::Accept,
            "target=adversarial\neta=0.2\nd_grid=2^6..2^8 # three\nh_rule=power; c=1; p=-0.4\nn_states=10",
        )
        .unwrap();
        assert_eq!(cfg.d_grid, vec![64, 128, 256]);
        assert_eq!(cfg.target, TargetKind::Adversarial);
        assert_eq!(cfg.n_states, 10);
        let h = cfg.step_sizes(&cfg.potential(256).unwrap()).unwrap();
        assert!((h[0] - 256f64.powf(-0.4)).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_config() {
        assert!(matches!(SweepConfig::parse(Experiment::Accept, "colour=red"), Err(Error::Config(_))));
        assert!(SweepConfig::parse(Experiment::Accept, "c=0").is_err());
        assert!(SweepConfig::parse(Experiment::Accept, "d_grid=").is_err());
        assert!(SweepConfig::parse(Experiment::Gap, "experiment=mix").is_err());
    }

    #[test]
    fn theorem1_rule() {
        let cfg = SweepConfig::default_for(Experiment::Mix);
        let p = Potential::gaussian(64).unwrap();
        let h = cfg.step_sizes(&p).unwrap()[0];
        let expected = 0.1 / (8.0 * (64f64.ln() + 32.0 * 2f64.ln() + 10f64.ln()));
        assert!((h - expected).abs() < 1e-15);
    }

    #[test]
    fn header_and_order() {
        let cfg = SweepConfig::parse(Experiment::Gap, "target=gaussian; d_grid=4; h_grid=0.3,0.01; n_states=200").unwrap();
        let rows = run_sweep(&cfg).unwrap();
        assert_eq!(rows.len(), 4);
        assert!(rows[0].h < rows[2].h);
        let mut buf = Vec::new();
        write_rows(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with(&format!("{HEADER}\n")));
        assert!(text.contains("gap,4,0.01,,dirichlet_gap_upper,"));
    }
}
