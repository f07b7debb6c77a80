//! Random-instance trials.
//!
//! Instance `k` of a run with seed `s` is drawn from its own SplitMix64 stream, seeded
//! with the `k`-th output of a SplitMix64 stream seeded with `s`. Every data entry is
//! uniform on `[-range, range]`; draws are rejected until some `Qi` is indefinite and
//! both Slater checks pass. Streams are independent, so instances can be generated and
//! tested in parallel while the report stays in index order.

use std::fmt::Write as _;

use qc2qp::model::{homogenize, Qc2qpInstance};
use qc2qp::recovery::{run_gap_test, VerdictKind};
use qc2qp::sdp::{check_dual_slater, check_primal_slater, SolverConfig};
use qc2qp::symmat::{eigendecompose, SymMatrix};
use qc2qp::Error;
use rand::{Rng, RngCore, SeedableRng};
use rand_xoshiro::SplitMix64;
use rayon::prelude::*;
use serde::Serialize;

/// Draws per instance before the run is abandoned.
pub const DEFAULT_MAX_ATTEMPTS: usize = 2_000;

#[derive(Debug, thiserror::Error)]
pub enum TrialError {
    #[error("invalid trial argument: {0}")]
    InvalidArgument(String),
    #[error("instance {index} (seed {seed:#018x}): no acceptable draw in {attempts} attempts")]
    BudgetExhausted {
        index: usize,
        seed: u64,
        attempts: usize,
    },
    #[error(transparent)]
    Core(#[from] Error),
}

#[derive(Debug, Clone, Copy)]
pub struct TrialConfig {
    pub count: usize,
    pub n: usize,
    pub seed: u64,
    pub range: f64,
    pub eps2: f64,
    pub solver: SolverConfig,
    pub max_attempts: usize,
}

impl TrialConfig {
    pub fn new(count: usize, n: usize, seed: u64) -> Self {
        Self {
            count,
            n,
            seed,
            range: 5.0,
            eps2: qc2qp::gaptest::DEFAULT_EPS2,
            solver: SolverConfig::default(),
            max_attempts: DEFAULT_MAX_ATTEMPTS,
        }
    }

    fn validate(&self) -> Result<(), TrialError> {
        if self.count == 0 {
            return Err(TrialError::InvalidArgument("count must be at least 1".into()));
        }
        if self.n == 0 {
            return Err(TrialError::InvalidArgument("dimension must be at least 1".into()));
        }
        if !(self.range > 0.0) || !self.range.is_finite() {
            return Err(TrialError::InvalidArgument(format!(
                "range must be positive and finite, got {}",
                self.range
            )));
        }
        if self.max_attempts == 0 {
            return Err(TrialError::InvalidArgument("max_attempts must be at least 1".into()));
        }
        self.solver.validate()?;
        Ok(())
    }
}

/// Per-instance seeds of a run.
pub fn instance_seeds(seed: u64, count: usize) -> Vec<u64> {
    let mut master = SplitMix64::seed_from_u64(seed);
    (0..count).map(|_| master.next_u64()).collect()
}

/// One unconditioned draw with entries uniform on `[-range, range]`.
pub fn random_instance<R: Rng>(rng: &mut R, n: usize, range: f64) -> Qc2qpInstance {
    let mut sym = || {
        let mut m = SymMatrix::zeros(n);
        for i in 0..n {
            for j in i..n {
                m.set(i, j, rng.random_range(-range..=range));
            }
        }
        m
    };
    let (q0, q1, q2) = (sym(), sym(), sym());
    let mut vec = || (0..n).map(|_| rng.random_range(-range..=range)).collect::<Vec<_>>();
    let (b0, b1, b2) = (vec(), vec(), vec());
    let c1 = rng.random_range(-range..=range);
    let c2 = rng.random_range(-range..=range);
    Qc2qpInstance::new(q0, b0, q1, b1, c1, q2, b2, c2).expect("finite data of matching shape")
}

pub fn is_nonconvex(inst: &Qc2qpInstance) -> Result<bool, Error> {
    for i in 0..3 {
        let eig = eigendecompose(&inst.quadratic(i)?.q)?;
        if eig.min_eigenvalue() < 0.0 && eig.max_eigenvalue() > 0.0 {
            return Ok(true);
        }
    }
    Ok(false)
}

pub fn satisfies_slater(inst: &Qc2qpInstance, cfg: &SolverConfig) -> Result<bool, Error> {
    let h = homogenize(inst);
    Ok(check_dual_slater(&h, cfg)?.holds && check_primal_slater(&h, cfg)?.holds)
}

/// Rejection-samples the instance for one per-instance seed. Returns it with the number
/// of draws used.
pub fn sample_instance(
    seed: u64,
    n: usize,
    range: f64,
    cfg: &SolverConfig,
    max_attempts: usize,
) -> Result<Option<(Qc2qpInstance, usize)>, Error> {
    let mut rng = SplitMix64::seed_from_u64(seed);
    for attempt in 1..=max_attempts {
        let inst = random_instance(&mut rng, n, range);
        if is_nonconvex(&inst)? && satisfies_slater(&inst, cfg)? {
            return Ok(Some((inst, attempt)));
        }
    }
    Ok(None)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TrialOutcome {
    NoGap,
    Gap,
    AssumptionViolated,
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialLine {
    pub index: usize,
    pub seed: u64,
    pub attempts: usize,
    pub outcome: TrialOutcome,
    pub relaxation_value: Option<f64>,
    /// Recovery case for no-gap verdicts, error text for failures.
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialReport {
    pub total: usize,
    pub no_gap_count: usize,
    pub gap_count: usize,
    pub assumption_violations: usize,
    /// Runs that stopped on a numerical error.
    pub error_count: usize,
    pub seed: u64,
    pub n: usize,
    pub range: f64,
    pub lines: Vec<TrialLine>,
}

impl TrialReport {
    pub fn render(&self) -> String {
        let mut s = String::new();
        writeln!(
            s,
            "trials: total {} | no gap {} | gap {} | assumption violations {} | errors {}",
            self.total, self.no_gap_count, self.gap_count, self.assumption_violations, self.error_count
        )
        .unwrap();
        writeln!(s, "seed {} | n {} | range {}", self.seed, self.n, self.range).unwrap();
        for l in &self.lines {
            let value = l
                .relaxation_value
                .map_or_else(|| "-".to_string(), |v| format!("{v:.10e}"));
            writeln!(
                s,
                "{:>5} {:#018x} attempts={:<4} {:<20} relaxation={} {}",
                l.index,
                l.seed,
                l.attempts,
                format!("{:?}", l.outcome),
                value,
                l.detail
            )
            .unwrap();
        }
        s
    }
}

fn run_one(index: usize, seed: u64, cfg: &TrialConfig) -> Result<TrialLine, TrialError> {
    let Some((inst, attempts)) = sample_instance(seed, cfg.n, cfg.range, &cfg.solver, cfg.max_attempts)?
    else {
        return Err(TrialError::BudgetExhausted {
            index,
            seed,
            attempts: cfg.max_attempts,
        });
    };
    let (outcome, relaxation_value, detail) = match run_gap_test(&inst, &cfg.solver, cfg.eps2) {
        Ok(v) => match &v.kind {
            VerdictKind::NoGap(rec) => (
                TrialOutcome::NoGap,
                Some(v.relaxation_value),
                format!("{:?}", rec.case_label),
            ),
            VerdictKind::Gap(_) => (TrialOutcome::Gap, Some(v.relaxation_value), String::new()),
        },
        Err(e @ Error::AssumptionViolated { .. }) => (TrialOutcome::AssumptionViolated, None, e.to_string()),
        Err(e) => (TrialOutcome::Error, None, e.to_string()),
    };
    log::debug!("trial {index}: {outcome:?}");
    Ok(TrialLine {
        index,
        seed,
        attempts,
        outcome,
        relaxation_value,
        detail,
    })
}

pub fn run_trials(cfg: &TrialConfig) -> Result<TrialReport, TrialError> {
    cfg.validate()?;
    let seeds = instance_seeds(cfg.seed, cfg.count);
    let lines = seeds
        .par_iter()
        .enumerate()
        .map(|(k, &s)| run_one(k, s, cfg))
        .collect::<Result<Vec<_>, _>>()?;
    let count = |o: TrialOutcome| lines.iter().filter(|l| l.outcome == o).count();
    Ok(TrialReport {
        total: lines.len(),
        no_gap_count: count(TrialOutcome::NoGap),
        gap_count: count(TrialOutcome::Gap),
        assumption_violations: count(TrialOutcome::AssumptionViolated),
        error_count: count(TrialOutcome::Error),
        seed: cfg.seed,
        n: cfg.n,
        range: cfg.range,
        lines,
    })
}
