//! Optimality gap test end to end, and construction of a global minimizer from the
//! relaxation when no gap exists.
//!
//! When Property I⁺(ε2) fails, one of five situations applies and each yields a vector
//! `x = [t; z]` in the range of X* that is isotropic (or sign-feasible) for both
//! constraint forms; `z/t` then solves the original problem.

use serde::Serialize;

use crate::decomp::{
    balanced_decomposition, joint_zero_in_span, rotate_pair, spectral_rank_one, BalanceMode,
};
use crate::error::{Assumption, Error, Result};
use crate::gaptest::{
    evaluate_property_I, evaluate_property_I_plus, purify, uniqueness_certificate, PropertyReport,
    PurifiedPair, UniquenessCertificate,
};
use crate::model::{
    dehomogenize, evaluate_q, homogenize, HomogeneousVector, HomogenizedInstance, Quadratic, Qc2qpInstance,
};
use crate::sdp::{
    build_relaxation, check_dual_slater, check_primal_slater, solve, DualSlaterCheck,
    PrimalDualSolution, PrimalSlaterCheck, SolverConfig,
};
use crate::symmat::{cholesky, cholesky_solve, dot, eigendecompose, norm, SymMatrix};

/// Smallest admissible `|t|` when dividing out the homogeneous coordinate.
pub const DEGENERATE_T_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CaseLabel {
    /// A multiplier vanishes.
    Case1,
    /// Both multipliers positive, rank of X* at least three.
    Case2,
    /// Rank two, but no decomposition separates the M2 signs.
    Case3,
    /// Rank two with a sign-separating decomposition, Z* rank too small.
    Case4,
    /// Everything but the nonzero M1 cross term holds.
    Case5,
    /// X* already has rank one.
    Rank1Direct,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecoveredSolution {
    pub z: Vec<f64>,
    pub objective: f64,
    pub q1_value: f64,
    pub q2_value: f64,
    pub case_label: CaseLabel,
    pub witness_vector: HomogeneousVector,
}

impl RecoveredSolution {
    /// `(1 + ‖z‖²)·(1 + data scale)`, the natural size of `qᵢ(z)`.
    pub fn scale(&self, inst: &Qc2qpInstance) -> f64 {
        (1.0 + dot(&self.z, &self.z)) * (1.0 + inst.data_scale())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "verdict", content = "detail")]
pub enum VerdictKind {
    NoGap(RecoveredSolution),
    Gap(PropertyReport),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GapVerdict {
    pub kind: VerdictKind,
    pub relaxation_value: f64,
    pub property_i_plus: PropertyReport,
    pub property_i: PropertyReport,
    pub certificate: Option<UniquenessCertificate>,
    pub solution: PrimalDualSolution,
    pub primal_slater: PrimalSlaterCheck,
    pub dual_slater: DualSlaterCheck,
}

impl GapVerdict {
    pub fn is_gap(&self) -> bool {
        matches!(self.kind, VerdictKind::Gap(_))
    }
}

fn finalize(inst: &Qc2qpInstance, x: Vec<f64>, case_label: CaseLabel) -> Result<RecoveredSolution> {
    let mut w = HomogeneousVector::from_slice(&x);
    if w.t < 0.0 {
        w = HomogeneousVector::from_slice(&x.iter().map(|v| -v).collect::<Vec<_>>());
    }
    let z = dehomogenize(&w, DEGENERATE_T_TOL).map_err(|_| Error::DegenerateT {
        largest: w.t.abs(),
        tol: DEGENERATE_T_TOL,
    })?;
    Ok(RecoveredSolution {
        objective: evaluate_q(inst, 0, &z)?,
        q1_value: evaluate_q(inst, 1, &z)?,
        q2_value: evaluate_q(inst, 2, &z)?,
        z,
        case_label,
        witness_vector: w,
    })
}

/// The candidate with the largest `|t|`, or `DegenerateT`.
fn largest_t<'a>(cands: impl IntoIterator<Item = &'a Vec<f64>>) -> Result<Vec<f64>> {
    let best = cands
        .into_iter()
        .max_by(|a, b| a[0].abs().total_cmp(&b[0].abs()))
        .cloned();
    match best {
        Some(x) if x[0].abs() > DEGENERATE_T_TOL => Ok(x),
        Some(x) => Err(Error::DegenerateT {
            largest: x[0].abs(),
            tol: DEGENERATE_T_TOL,
        }),
        None => Err(Error::DegenerateT {
            largest: 0.0,
            tol: DEGENERATE_T_TOL,
        }),
    }
}

/// Builds a global minimizer from a purified pair whose Property I⁺(ε2) report fails.
pub fn recover(
    h: &HomogenizedInstance,
    pair: &PurifiedPair,
    report: &PropertyReport,
    eps2: f64,
) -> Result<RecoveredSolution> {
    if report.holds {
        return Err(Error::InvalidArgument(
            "Property I+ holds, so no rank-one solution exists".into(),
        ));
    }
    let inst = h.to_instance();
    let rank = pair.rank_x();
    let x = &pair.x_star;
    match rank {
        0 => Err(Error::DecompositionPrecondition("X* vanishes at eps2".into())),
        1 => {
            let d = spectral_rank_one(x, eps2)?;
            finalize(&inst, d.vectors[0].clone(), CaseLabel::Rank1Direct)
        }
        _ if !report.cond_i1 => case_one(h, &inst, pair, eps2),
        r if r >= 3 => case_two(h, &inst, pair, eps2),
        _ => {
            let d = match &report.decomposition {
                Some(d) => d.clone(),
                None => balanced_decomposition(x, &h.m1, BalanceMode::Zero, eps2)?,
            };
            let (x1, x2) = (&d.vectors[0], &d.vectors[1]);
            let product = h.m2.quad_form(x1) * h.m2.quad_form(x2);
            if !(product < -eps2 * eps2) {
                return finalize(&inst, largest_t(&d.vectors)?, CaseLabel::Case3);
            }
            if !report.cond_i2 {
                return case_four(h, &inst, pair, x1, x2, eps2);
            }
            if h.m1.bilinear(x1, x2).abs() <= eps2 {
                let (u, v) = rotate_pair(x1, x2, &h.m2)?;
                return finalize(&inst, largest_t([&u, &v])?, CaseLabel::Case5);
            }
            Err(Error::InvalidArgument(
                "all conditions hold on the decomposition; the report is inconsistent".into(),
            ))
        }
    }
}

fn case_one(
    h: &HomogenizedInstance,
    inst: &Qc2qpInstance,
    pair: &PurifiedPair,
    eps2: f64,
) -> Result<RecoveredSolution> {
    // The form with a vanishing multiplier only needs feasibility, so decompose against
    // the other one and keep a term that is feasible for it.
    let (g, y, other) = if pair.y1 <= eps2 && pair.y2 > eps2 {
        (&h.m2, pair.y2, &h.m1)
    } else {
        (&h.m1, pair.y1, &h.m2)
    };
    let mode = if y > eps2 {
        BalanceMode::Zero
    } else {
        BalanceMode::Nonpositive
    };
    let d = balanced_decomposition(&pair.x_star, g, mode, eps2)?;
    let feasible: Vec<&Vec<f64>> = d
        .vectors
        .iter()
        .filter(|v| other.quad_form(v) <= eps2)
        .collect();
    if feasible.is_empty() {
        return Err(Error::DecompositionStall {
            unmet: d.len(),
            total: crate::symmat::inner_unchecked(other, &pair.x_star),
        });
    }
    finalize(inst, largest_t(feasible)?, CaseLabel::Case1)
}

fn case_two(
    h: &HomogenizedInstance,
    inst: &Qc2qpInstance,
    pair: &PurifiedPair,
    eps2: f64,
) -> Result<RecoveredSolution> {
    let d = balanced_decomposition(&pair.x_star, &h.m1, BalanceMode::Zero, eps2)?;
    let values = d.form_values(&h.m2);
    let direct: Vec<&Vec<f64>> = d
        .vectors
        .iter()
        .zip(&values)
        .filter(|(v, m)| m.abs() < eps2 && v[0].abs() > DEGENERATE_T_TOL)
        .map(|(v, _)| v)
        .collect();
    if !direct.is_empty() {
        return finalize(inst, largest_t(direct)?, CaseLabel::Case2);
    }
    let r = d.len();
    let hi = (0..r).max_by(|&i, &j| values[i].total_cmp(&values[j])).unwrap();
    let lo = (0..r).min_by(|&i, &j| values[i].total_cmp(&values[j])).unwrap();
    let mut last_err = Error::NoCommonIsotropicVector { tol: eps2 };
    for third in (0..r).filter(|&k| k != hi && k != lo) {
        let span = [d.vectors[hi].clone(), d.vectors[lo].clone(), d.vectors[third].clone()];
        let cands = joint_zero_in_span(&span, &h.m1, &h.m2, eps2)?;
        match largest_t(&cands) {
            Ok(x) => return finalize(inst, x, CaseLabel::Case2),
            Err(e) => last_err = if cands.is_empty() { last_err } else { e },
        }
    }
    Err(last_err)
}

fn case_four(
    h: &HomogenizedInstance,
    inst: &Qc2qpInstance,
    pair: &PurifiedPair,
    x1: &[f64],
    x2: &[f64],
    eps2: f64,
) -> Result<RecoveredSolution> {
    let sum = pair.x_star.add_scaled(1.0, &pair.z_star);
    let eig = eigendecompose(&sum)?;
    let k = eig.dim() - 1;
    if eig.eigenvalues[k] >= eps2 {
        return Err(Error::DecompositionPrecondition(format!(
            "X* + Z* is nonsingular at eps2 (smallest eigenvalue {:e})",
            eig.eigenvalues[k]
        )));
    }
    let len = norm(x1).max(norm(x2));
    let y: Vec<f64> = eig.eigenvector(k).iter().map(|v| v * len).collect();
    let cands = joint_zero_in_span(&[x1.to_vec(), x2.to_vec(), y], &h.m1, &h.m2, eps2)?;
    if cands.is_empty() {
        return Err(Error::NoCommonIsotropicVector { tol: eps2 });
    }
    finalize(inst, largest_t(&cands)?, CaseLabel::Case4)
}

/// Full test: Slater checks, relaxation, purification, Property I⁺(ε2), then either the
/// uniqueness certificate or a recovered global minimizer.
pub fn run_gap_test(inst: &Qc2qpInstance, cfg: &SolverConfig, eps2: f64) -> Result<GapVerdict> {
    let h = homogenize(inst);
    let primal_slater = check_primal_slater(&h, cfg)?;
    if !primal_slater.holds {
        return Err(Error::AssumptionViolated {
            assumption: Assumption::PrimalSlater,
            detail: format!("largest strict-feasibility margin {:e}", primal_slater.margin),
        });
    }
    let dual_slater = check_dual_slater(&h, cfg)?;
    if !dual_slater.holds {
        return Err(Error::AssumptionViolated {
            assumption: Assumption::DualSlater,
            detail: format!(
                "no witness found over {} points; best normalized margin {:e} at y = ({:e}, {:e})",
                dual_slater.points_evaluated,
                dual_slater.best_margin,
                dual_slater.best_y.0,
                dual_slater.best_y.1
            ),
        });
    }
    let solution = solve(&build_relaxation(&h), cfg)?;
    let pair = purify(&solution, eps2)?;
    let property_i_plus = evaluate_property_I_plus(&pair, &h)?;
    let property_i = evaluate_property_I(&pair, &h)?;
    log::info!(
        "relaxation value {:.10}, rank X* {}, rank Z* {}, property I+ {}",
        solution.primal_objective,
        pair.rank_x(),
        pair.rank_z(),
        property_i_plus.holds
    );
    let (kind, certificate) = if property_i_plus.holds {
        let cert = uniqueness_certificate(&property_i_plus, &h)?;
        (VerdictKind::Gap(property_i_plus.clone()), Some(cert))
    } else {
        let rec = recover(&h, &pair, &property_i_plus, eps2)?;
        log::info!("recovered via {:?}: z = {:?}", rec.case_label, rec.z);
        (VerdictKind::NoGap(rec), None)
    };
    Ok(GapVerdict {
        kind,
        relaxation_value: solution.primal_objective,
        property_i_plus,
        property_i,
        certificate,
        solution,
        primal_slater,
        dual_slater,
    })
}

/// Best point found by the grid search.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleResult {
    pub z: Vec<f64>,
    pub value: f64,
}

/// Constraint slack allowed when the oracle classifies a point as feasible.
pub const ORACLE_FEASIBILITY_SLACK: f64 = 1e-9;
const ORACLE_SEEDS: usize = 8;
const ZOOM_SIDE: usize = 11;

/// Dense grid scan of a two-dimensional instance, then local zoom refinement from the
/// best few grid points.
///
/// Each refinement round scans an `11 × 11` grid on a window around the current best
/// point and halves the window. A point left on exactly one constraint boundary is then
/// slid along that boundary curve, which a fixed lattice cannot follow.
pub fn brute_force_oracle(
    inst: &Qc2qpInstance,
    bounds: &[(f64, f64)],
    grid_points: usize,
    refine_iters: usize,
) -> Result<OracleResult> {
    if inst.n != 2 || bounds.len() != 2 {
        return Err(Error::InvalidArgument(format!(
            "the oracle needs n = 2 and two intervals, got n = {} and {} intervals",
            inst.n,
            bounds.len()
        )));
    }
    if grid_points < 2 {
        return Err(Error::InvalidArgument("grid needs at least 2 points per side".into()));
    }
    for &(lo, hi) in bounds {
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::InvalidArgument(format!("invalid interval [{lo}, {hi}]")));
        }
    }
    let [f0, f1, f2] = [0, 1, 2].map(|i| inst.quadratic(i).unwrap().clone());
    let eval = |z: &[f64]| -> Option<f64> {
        if f1.eval(z) <= ORACLE_FEASIBILITY_SLACK && f2.eval(z) <= ORACLE_FEASIBILITY_SLACK {
            Some(f0.eval(z))
        } else {
            None
        }
    };
    let step = [0, 1].map(|k| (bounds[k].1 - bounds[k].0) / (grid_points - 1) as f64);
    let mut seeds: Vec<(f64, [f64; 2])> = Vec::with_capacity(ORACLE_SEEDS + 1);
    for i in 0..grid_points {
        let x = bounds[0].0 + i as f64 * step[0];
        for j in 0..grid_points {
            let z = [x, bounds[1].0 + j as f64 * step[1]];
            let Some(v) = eval(&z) else { continue };
            if seeds.len() == ORACLE_SEEDS && v >= seeds[ORACLE_SEEDS - 1].0 {
                continue;
            }
            let near = seeds.iter().position(|(_, s)| {
                (s[0] - z[0]).abs() <= 3.0 * step[0] && (s[1] - z[1]).abs() <= 3.0 * step[1]
            });
            match near {
                Some(k) if seeds[k].0 <= v => continue,
                Some(k) => {
                    seeds.remove(k);
                }
                None => {}
            }
            let at = seeds.partition_point(|(w, _)| *w <= v);
            seeds.insert(at, (v, z));
            seeds.truncate(ORACLE_SEEDS);
        }
    }
    if seeds.is_empty() {
        return Err(Error::NoFeasiblePointInBox);
    }
    let clamp = |v: f64, k: usize| v.clamp(bounds[k].0, bounds[k].1);
    let mut best: Option<(f64, [f64; 2])> = None;
    for (mut value, mut center) in seeds {
        let mut half = step;
        for _ in 0..refine_iters {
            for a in 0..ZOOM_SIDE {
                for b in 0..ZOOM_SIDE {
                    let frac = |k: usize| -1.0 + 2.0 * k as f64 / (ZOOM_SIDE - 1) as f64;
                    let z = [
                        clamp(center[0] + frac(a) * half[0], 0),
                        clamp(center[1] + frac(b) * half[1], 1),
                    ];
                    if let Some(v) = eval(&z) {
                        if v < value {
                            value = v;
                            center = z;
                        }
                    }
                }
            }
            half = [half[0] * 0.5, half[1] * 0.5];
        }
        let (value, center) = slide_along_boundary(&[&f1, &f2], &eval, value, center, step[0].max(step[1]));
        if best.map_or(true, |(b, _)| value < b) {
            best = Some((value, center));
        }
    }
    let (value, z) = best.expect("at least one seed");
    Ok(OracleResult { z: z.to_vec(), value })
}

const SLIDE_MAX_STEPS: usize = 400;

fn gradient(q: &Quadratic, z: &[f64; 2]) -> [f64; 2] {
    let qz = q.q.matvec(z);
    [2.0 * (qz[0] + q.b[0]), 2.0 * (qz[1] + q.b[1])]
}

/// Newton steps along the gradient onto `q(z) = 0`.
fn project_onto(q: &Quadratic, mut z: [f64; 2]) -> Option<[f64; 2]> {
    for _ in 0..30 {
        let r = q.eval(&z);
        let g = gradient(q, &z);
        let gg = g[0] * g[0] + g[1] * g[1];
        if !(gg > 0.0) {
            return None;
        }
        if r.abs() <= 1e-14 * (1.0 + gg.sqrt() * (1.0 + z[0].abs() + z[1].abs())) {
            return Some(z);
        }
        z = [z[0] - r * g[0] / gg, z[1] - r * g[1] / gg];
    }
    Some(z)
}

/// Local descent along the single active constraint curve through `z`, if there is one.
fn slide_along_boundary(
    constraints: &[&Quadratic; 2],
    eval: &impl Fn(&[f64]) -> Option<f64>,
    mut value: f64,
    mut z: [f64; 2],
    initial_step: f64,
) -> (f64, [f64; 2]) {
    let active: Vec<&Quadratic> = constraints
        .iter()
        .copied()
        .filter(|q| q.eval(&z) >= -1e-6)
        .collect();
    let [q] = active[..] else {
        return (value, z);
    };
    let mut t = initial_step;
    for _ in 0..SLIDE_MAX_STEPS {
        if t <= 1e-13 * (1.0 + z[0].abs() + z[1].abs()) {
            break;
        }
        let g = gradient(q, &z);
        let norm = g[0].hypot(g[1]);
        if !(norm > 0.0) {
            break;
        }
        let tangent = [-g[1] / norm, g[0] / norm];
        let moved = [1.0, -1.0].iter().find_map(|&sign| {
            let p = project_onto(q, [z[0] + sign * t * tangent[0], z[1] + sign * t * tangent[1]])?;
            eval(&p).filter(|&v| v < value).map(|v| (v, p))
        });
        match moved {
            Some((v, p)) => {
                value = v;
                z = p;
                t *= 2.0;
            }
            None => t *= 0.5,
        }
    }
    (value, z)
}

/// Box containing every feasible `z` with `q0(z) <= value_bound`, derived from
/// multipliers `y1, y2 >= 0` with `Q0 + y1·Q1 + y2·Q2 ≻ 0`.
///
/// For feasible `z` the Lagrangian `L = q0 + y1·q1 + y2·q2` is at most `q0(z)`, and `L`
/// is a strictly convex quadratic, so its sublevel set is a ball around its minimizer.
pub fn lagrangian_box(
    inst: &Qc2qpInstance,
    y1: f64,
    y2: f64,
    value_bound: f64,
) -> Result<Vec<(f64, f64)>> {
    let [q0, q1, q2] = [0, 1, 2].map(|i| inst.quadratic(i).unwrap().clone());
    let q = q0.q.add_scaled(y1, &q1.q).add_scaled(y2, &q2.q);
    let g: Vec<f64> = (0..inst.n)
        .map(|i| q0.b[i] + y1 * q1.b[i] + y2 * q2.b[i])
        .collect();
    let c = y1 * q1.c + y2 * q2.c;
    let l = cholesky(&q)?;
    let qinv_g = cholesky_solve(&l, &g);
    let center: Vec<f64> = qinv_g.iter().map(|v| -v).collect();
    let l_min = c - dot(&g, &qinv_g);
    let lambda_min = eigendecompose(&q)?.min_eigenvalue();
    if !(lambda_min > 0.0) {
        return Err(Error::NotPositiveDefinite {
            pivot: 0,
            value: lambda_min,
        });
    }
    let radius = ((value_bound - l_min).max(0.0) / lambda_min).sqrt();
    let pad = 1e-6 * (1.0 + radius);
    Ok(center
        .iter()
        .map(|&m| (m - radius - pad, m + radius + pad))
        .collect())
}

/// `q0 + y1·q1 + y2·q2` bound helper for callers holding a dual witness.
pub fn lagrangian_matrix(inst: &Qc2qpInstance, y1: f64, y2: f64) -> SymMatrix {
    inst.objective
        .q
        .add_scaled(y1, &inst.constraints[0].q)
        .add_scaled(y2, &inst.constraints[1].q)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::fixtures::{gap_example, no_gap_example};

    #[test]
    fn no_gap_example_recovers_printed_solution() {
        let v = run_gap_test(&no_gap_example(), &SolverConfig::default(), 1e-5).unwrap();
        assert!((v.relaxation_value - -54.8271062).abs() < 1e-4);
        let VerdictKind::NoGap(rec) = &v.kind else {
            panic!("expected no gap")
        };
        assert_eq!(rec.case_label, CaseLabel::Rank1Direct);
        assert!((rec.z[0] - -0.7547192).abs() < 1e-4 && (rec.z[1] - -3.9916123).abs() < 1e-4);
        assert!((rec.objective - -54.8271061).abs() < 1e-4);
        assert!(v.certificate.is_none());
    }

    #[test]
    fn gap_example_reports_gap() {
        let v = run_gap_test(&gap_example(), &SolverConfig::default(), 1e-5).unwrap();
        assert!(v.is_gap());
        assert!((v.relaxation_value - -3.1269177).abs() < 1e-4);
        assert_eq!(v.certificate.as_ref().unwrap().nullspace_dim_of_av, 0);
    }

    #[test]
    fn convex_instance_has_zero_solution() {
        let i = SymMatrix::identity(2);
        let inst = Qc2qpInstance::new(i.clone(), vec![0.0; 2], i.clone(), vec![0.0; 2], -1.0, i, vec![0.0; 2], -1.0)
            .unwrap();
        let v = run_gap_test(&inst, &SolverConfig::default(), 1e-5).unwrap();
        let VerdictKind::NoGap(rec) = &v.kind else {
            panic!("expected no gap")
        };
        assert!(rec.z.iter().all(|c| c.abs() < 1e-4));
        assert!(rec.objective.abs() < 1e-6);
    }

    #[test]
    fn dual_slater_failure_is_reported() {
        let d = SymMatrix::from_diagonal(&[1.0, -1.0]);
        let inst = Qc2qpInstance::new(d.clone(), vec![0.0; 2], d.clone(), vec![0.0; 2], 0.0, d, vec![0.0; 2], 0.0)
            .unwrap();
        let err = run_gap_test(&inst, &SolverConfig::default(), 1e-5).unwrap_err();
        assert!(matches!(
            err,
            Error::AssumptionViolated {
                assumption: Assumption::DualSlater,
                ..
            }
        ));
    }

    #[test]
    fn oracle_examples() {
        let r = brute_force_oracle(&no_gap_example(), &[(-10.0, 10.0), (-10.0, 10.0)], 401, 60).unwrap();
        assert!((r.value - -54.8271061).abs() < 1e-3, "{r:?}");
        let shifted = brute_force_oracle(&no_gap_example(), &[(100.0, 101.0), (100.0, 101.0)], 51, 10);
        assert!(matches!(shifted, Err(Error::NoFeasiblePointInBox)));
        assert!(brute_force_oracle(&no_gap_example(), &[(1.0, 1.0), (0.0, 1.0)], 51, 10).is_err());
    }

    #[test]
    fn lagrangian_box_contains_optimum() {
        let inst = gap_example();
        let v = run_gap_test(&inst, &SolverConfig::default(), 1e-5).unwrap();
        let w = v.dual_slater.witness.unwrap();
        let bx = lagrangian_box(&inst, w.y1, w.y2, -1.5).unwrap();
        let z = [0.5251114, -0.3446140];
        for k in 0..2 {
            assert!(bx[k].0 <= z[k] && z[k] <= bx[k].1, "{bx:?}");
        }
        assert!(eigendecompose(&lagrangian_matrix(&inst, w.y1, w.y2)).unwrap().min_eigenvalue() > 0.0);
    }
}
