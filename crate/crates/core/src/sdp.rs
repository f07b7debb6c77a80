//! Dense primal–dual interior-point solver for the semidefinite relaxation
//!
//! ```text
//! minimize    M0 ⋅ X
//! subject to  M1 ⋅ X <= 0,  M2 ⋅ X <= 0,  I00 ⋅ X = 1,  X ⪰ 0
//! ```
//!
//! and its dual (maximize y0 s.t. y0·I00 − y1·M1 − y2·M2 + Z = M0, y1, y2 >= 0, Z ⪰ 0),
//! together with numerical checks of strict feasibility on both sides.
//!
//! Internally every program is brought to the standard form
//! `min C⋅X + cᵀs  s.t.  Aᵢ⋅X + aᵢᵀs = bᵢ,  X ⪰ 0, s >= 0` on the cone
//! PSD(dim) ⊕ ℝ₊ᵏ. Iterations follow Mehrotra's predictor–corrector scheme with
//! Nesterov–Todd scaling: with `G` chosen so that `G⁻¹XG⁻ᵀ = GᵀZG = Λ` (diagonal),
//! the linearized complementarity condition becomes the Lyapunov equation
//! `Λ∘(ΔX̃ + ΔZ̃) = R`, which is solved entrywise.

use serde::Serialize;

use crate::error::{Assumption, Error, Result};
use crate::model::HomogenizedInstance;
use crate::symmat::{
    cholesky, cholesky_solve, dot, eigendecompose, inner_unchecked, EigenDecomposition, Matrix,
    SymMatrix,
};

/// Default solver precision.
pub const DEFAULT_EPS1: f64 = 1.49e-8;

/// Iterations without improvement of the best residual before infeasibility is declared.
const STALL_WINDOW: usize = 30;
/// Iterate norm beyond which the run is treated as diverging.
const DIVERGENCE_NORM: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolverConfig {
    pub eps1: f64,
    pub max_iterations: usize,
    /// Fraction of the distance to the cone boundary taken per step, in (0, 1).
    pub step_fraction: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            eps1: DEFAULT_EPS1,
            max_iterations: 200,
            step_fraction: 0.98,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.eps1 > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "eps1 must be positive, got {}",
                self.eps1
            )));
        }
        if !(self.step_fraction > 0.0 && self.step_fraction < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "step fraction must lie in (0, 1), got {}",
                self.step_fraction
            )));
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidArgument("max_iterations must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Sense {
    LessEqual,
    Equal,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinearConstraint {
    pub coefficient: SymMatrix,
    pub rhs: f64,
    pub sense: Sense,
}

/// `min cost⋅X` over `X ⪰ 0` subject to linear matrix constraints.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConeProgram {
    pub cost: SymMatrix,
    pub constraints: Vec<LinearConstraint>,
    pub psd_dim: usize,
}

impl ConeProgram {
    pub fn new(cost: SymMatrix, constraints: Vec<LinearConstraint>) -> Result<Self> {
        let psd_dim = cost.dim();
        for c in &constraints {
            if c.coefficient.dim() != psd_dim {
                return Err(Error::DimensionMismatch {
                    what: "constraint coefficient",
                    expected: psd_dim,
                    found: c.coefficient.dim(),
                });
            }
            if !c.rhs.is_finite() || !c.coefficient.is_finite() {
                return Err(Error::NonFinite("constraint data"));
            }
        }
        if !cost.is_finite() {
            return Err(Error::NonFinite("cost matrix"));
        }
        Ok(Self {
            cost,
            constraints,
            psd_dim,
        })
    }

    /// True for the relaxation layout: two `<=` rows followed by one `=` row.
    pub fn is_relaxation_shaped(&self) -> bool {
        matches!(
            self.constraints.iter().map(|c| c.sense).collect::<Vec<_>>()[..],
            [Sense::LessEqual, Sense::LessEqual, Sense::Equal]
        )
    }

    fn to_standard(&self) -> StandardProgram {
        let slack_rows: Vec<usize> = self
            .constraints
            .iter()
            .enumerate()
            .filter(|(_, c)| c.sense == Sense::LessEqual)
            .map(|(i, _)| i)
            .collect();
        let n_lp = slack_rows.len();
        let rows = self
            .constraints
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let mut lp = vec![0.0; n_lp];
                if let Some(k) = slack_rows.iter().position(|&r| r == i) {
                    lp[k] = 1.0;
                }
                StandardRow {
                    psd: c.coefficient.clone(),
                    lp,
                    rhs: c.rhs,
                }
            })
            .collect();
        StandardProgram {
            dim: self.psd_dim,
            cost: self.cost.clone(),
            cost_lp: vec![0.0; n_lp],
            rows,
        }
    }
}

/// Relaxation of the homogenized problem: cost M0, rows `M1⋅X <= 0`, `M2⋅X <= 0`, `I00⋅X = 1`.
pub fn build_relaxation(h: &HomogenizedInstance) -> ConeProgram {
    ConeProgram {
        cost: h.m0.clone(),
        constraints: vec![
            LinearConstraint {
                coefficient: h.m1.clone(),
                rhs: 0.0,
                sense: Sense::LessEqual,
            },
            LinearConstraint {
                coefficient: h.m2.clone(),
                rhs: 0.0,
                sense: Sense::LessEqual,
            },
            LinearConstraint {
                coefficient: h.i00.clone(),
                rhs: 1.0,
                sense: Sense::Equal,
            },
        ],
        psd_dim: h.dim,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Residuals {
    /// `max|bᵢ − Aᵢ⋅X − sᵢ| / (1 + max|bᵢ|)`.
    pub primal_infeas: f64,
    /// `‖y0·I00 − y1·M1 − y2·M2 + Z − M0‖_max / (1 + ‖M0‖_max)`.
    pub dual_infeas: f64,
    /// `|primal − dual| / (1 + |primal|)`.
    pub relative_gap: f64,
}

/// Primal solution X̂ and dual solution (Ẑ, ŷ0, ŷ1, ŷ2) of the relaxation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PrimalDualSolution {
    pub x: SymMatrix,
    pub z: SymMatrix,
    pub y0: f64,
    pub y1: f64,
    pub y2: f64,
    pub primal_objective: f64,
    pub dual_objective: f64,
    pub residuals: Residuals,
    pub iterations: usize,
    /// Precision the solve was run at.
    pub eps1: f64,
}

/// Solves a relaxation-shaped program (rows `<=`, `<=`, `=`).
pub fn solve(prog: &ConeProgram, cfg: &SolverConfig) -> Result<PrimalDualSolution> {
    cfg.validate()?;
    if !prog.is_relaxation_shaped() {
        return Err(Error::InvalidProgram(
            "expected two inequality rows followed by one equality row".into(),
        ));
    }
    let std = prog.to_standard();
    let sol = solve_standard(&std, cfg, Assumption::PrimalSlater, Assumption::DualSlater)?;
    // Dual equality rows enter as Σ wᵢAᵢ + Z = C; inequality multipliers are yᵢ = −wᵢ.
    Ok(PrimalDualSolution {
        x: sol.x,
        z: sol.z,
        y0: sol.w[2],
        y1: -sol.w[0],
        y2: -sol.w[1],
        primal_objective: sol.primal_objective,
        dual_objective: sol.dual_objective,
        residuals: sol.residuals,
        iterations: sol.iterations,
        eps1: cfg.eps1,
    })
}

struct StandardRow {
    psd: SymMatrix,
    lp: Vec<f64>,
    rhs: f64,
}

struct StandardProgram {
    dim: usize,
    cost: SymMatrix,
    cost_lp: Vec<f64>,
    rows: Vec<StandardRow>,
}

impl StandardProgram {
    fn n_lp(&self) -> usize {
        self.cost_lp.len()
    }

    fn apply(&self, x: &SymMatrix, s: &[f64]) -> Vec<f64> {
        self.rows
            .iter()
            .map(|r| inner_unchecked(&r.psd, x) + dot(&r.lp, s))
            .collect()
    }

    /// `Σ wᵢ Aᵢ` split into its PSD and linear parts.
    fn adjoint(&self, w: &[f64]) -> (SymMatrix, Vec<f64>) {
        let mut psd = SymMatrix::zeros(self.dim);
        let mut lp = vec![0.0; self.n_lp()];
        for (r, &wi) in self.rows.iter().zip(w) {
            psd = psd.add_scaled(wi, &r.psd);
            for (l, a) in lp.iter_mut().zip(&r.lp) {
                *l += wi * a;
            }
        }
        (psd, lp)
    }

    fn cost_scale(&self) -> f64 {
        self.cost
            .max_abs()
            .max(self.cost_lp.iter().fold(0.0, |m, v| m.max(v.abs())))
    }

    fn rhs_scale(&self) -> f64 {
        self.rows.iter().fold(0.0, |m, r| m.max(r.rhs.abs()))
    }
}

struct StandardSolution {
    x: SymMatrix,
    s: Vec<f64>,
    w: Vec<f64>,
    z: SymMatrix,
    primal_objective: f64,
    dual_objective: f64,
    residuals: Residuals,
    iterations: usize,
}

/// NT scaling point: `G⁻¹XG⁻ᵀ = GᵀZG = diag(lambda)` with `W = GGᵀ`; the linear part
/// uses `g = sqrt(s/σ)` and `lambda_lp = sqrt(s·σ)`.
struct Scaling {
    g: Matrix,
    lambda: Vec<f64>,
    g_lp: Vec<f64>,
    lambda_lp: Vec<f64>,
}

fn sqrt_and_inv_sqrt(eig: &EigenDecomposition) -> (SymMatrix, SymMatrix) {
    let floor = f64::MIN_POSITIVE.sqrt();
    (
        eig.map_eigenvalues(|l| l.max(floor).sqrt()),
        eig.map_eigenvalues(|l| 1.0 / l.max(floor).sqrt()),
    )
}

fn nt_scaling(x: &SymMatrix, z: &SymMatrix, s: &[f64], sigma: &[f64]) -> Result<Scaling> {
    let (x_half, _) = sqrt_and_inv_sqrt(&eigendecompose(x)?);
    let x_half_d = x_half.to_dense();
    let middle = x_half_d.sandwich(z);
    let (_, middle_inv_half) = sqrt_and_inv_sqrt(&eigendecompose(&middle)?);
    let w = x_half_d.sandwich(&middle_inv_half);
    let (w_half, _) = sqrt_and_inv_sqrt(&eigendecompose(&w)?);
    let w_half_d = w_half.to_dense();
    let v = w_half_d.sandwich(z);
    let v_eig = eigendecompose(&v)?;
    let g = w_half_d.matmul(&v_eig.basis);
    let lambda = v_eig.eigenvalues.iter().map(|l| l.max(f64::MIN_POSITIVE)).collect();
    let g_lp = s.iter().zip(sigma).map(|(a, b)| (a / b).sqrt()).collect();
    let lambda_lp = s.iter().zip(sigma).map(|(a, b)| (a * b).sqrt()).collect();
    Ok(Scaling {
        g,
        lambda,
        g_lp,
        lambda_lp,
    })
}

struct Direction {
    dx: SymMatrix,
    ds: Vec<f64>,
    dw: Vec<f64>,
    dz: SymMatrix,
    dsigma: Vec<f64>,
    dx_scaled: SymMatrix,
    dz_scaled: SymMatrix,
    ds_scaled: Vec<f64>,
    dsigma_scaled: Vec<f64>,
}

/// Cholesky of the Schur complement with diagonal jitter fallback.
fn factor_schur(h: &SymMatrix) -> Result<Matrix> {
    if let Ok(l) = cholesky(h) {
        return Ok(l);
    }
    let norm = h.max_abs().max(f64::MIN_POSITIVE);
    let mut jitter = norm * 1e-15;
    while jitter <= norm * 1e-12 {
        if let Ok(l) = cholesky(&h.add_scaled(jitter, &SymMatrix::identity(h.dim()))) {
            return Ok(l);
        }
        jitter *= 10.0;
    }
    cholesky(&h.add_scaled(norm * 1e-12, &SymMatrix::identity(h.dim())))
}

struct NewtonSystem<'a> {
    prog: &'a StandardProgram,
    scaling: &'a Scaling,
    /// `GᵀAᵢG` for every row.
    scaled_rows: Vec<SymMatrix>,
    schur: SymMatrix,
    factor: Matrix,
    r_p: &'a [f64],
    r_d: &'a SymMatrix,
    r_d_lp: &'a [f64],
}

impl<'a> NewtonSystem<'a> {
    /// The Schur complement `Hᵢₖ = Aᵢ⋅(W Aₖ W)` is formed as the Gram matrix of the scaled
    /// rows `GᵀAᵢG`, which keeps it accurate when `W` is badly conditioned.
    fn new(
        prog: &'a StandardProgram,
        scaling: &'a Scaling,
        r_p: &'a [f64],
        r_d: &'a SymMatrix,
        r_d_lp: &'a [f64],
    ) -> Result<Self> {
        let m = prog.rows.len();
        let gt = scaling.g.transpose();
        let scaled_rows: Vec<SymMatrix> = prog.rows.iter().map(|r| gt.sandwich(&r.psd)).collect();
        let g2: Vec<f64> = scaling.g_lp.iter().map(|g| g * g).collect();
        let schur = SymMatrix::from_upper_fn(m, |i, k| {
            let lp: f64 = (0..g2.len())
                .map(|j| prog.rows[i].lp[j] * g2[j] * prog.rows[k].lp[j])
                .sum();
            inner_unchecked(&scaled_rows[i], &scaled_rows[k]) + lp
        });
        Ok(Self {
            prog,
            scaling,
            factor: factor_schur(&schur)?,
            scaled_rows,
            schur,
            r_p,
            r_d,
            r_d_lp,
        })
    }

    /// Cholesky solve followed by one step of iterative refinement.
    fn solve_schur(&self, rhs: &[f64]) -> Vec<f64> {
        let mut x = cholesky_solve(&self.factor, rhs);
        let hx = self.schur.matvec(&x);
        let resid: Vec<f64> = rhs.iter().zip(&hx).map(|(r, h)| r - h).collect();
        let corr = cholesky_solve(&self.factor, &resid);
        for (v, c) in x.iter_mut().zip(&corr) {
            *v += c;
        }
        x
    }

    /// Solves the Newton system for complementarity right-hand sides given in scaled coordinates.
    fn solve(&self, rc: &SymMatrix, rc_lp: &[f64]) -> Direction {
        let sc = self.scaling;
        let prog = self.prog;
        let n = prog.dim;
        let lam = &sc.lambda;
        let d = SymMatrix::from_upper_fn(n, |i, j| 2.0 * rc.get(i, j) / (lam[i] + lam[j]));
        let d_lp: Vec<f64> = rc_lp.iter().zip(&sc.lambda_lp).map(|(r, l)| r / l).collect();

        let gt = sc.g.transpose();
        let rd_scaled = gt.sandwich(self.r_d);
        let gd_lp: Vec<f64> = sc.g_lp.iter().zip(&d_lp).map(|(g, d)| g * d).collect();
        let g2r_lp: Vec<f64> = sc
            .g_lp
            .iter()
            .zip(self.r_d_lp)
            .map(|(g, r)| g * g * r)
            .collect();
        let rhs: Vec<f64> = prog
            .rows
            .iter()
            .zip(&self.scaled_rows)
            .zip(self.r_p)
            .map(|((row, a), rp)| {
                rp - inner_unchecked(a, &d) - dot(&row.lp, &gd_lp)
                    + inner_unchecked(a, &rd_scaled)
                    + dot(&row.lp, &g2r_lp)
            })
            .collect();
        let dw = self.solve_schur(&rhs);

        let (at_dw, at_dw_lp) = prog.adjoint(&dw);
        let dz = self.r_d.sub(&at_dw);
        let dsigma: Vec<f64> = self.r_d_lp.iter().zip(&at_dw_lp).map(|(r, a)| r - a).collect();

        let mut dz_scaled = rd_scaled;
        for (a, &wi) in self.scaled_rows.iter().zip(&dw) {
            dz_scaled = dz_scaled.add_scaled(-wi, a);
        }
        let dx_scaled = d.sub(&dz_scaled);
        let dx = sc.g.sandwich(&dx_scaled);
        let dsigma_scaled: Vec<f64> = sc.g_lp.iter().zip(&dsigma).map(|(g, v)| g * v).collect();
        let ds_scaled: Vec<f64> = d_lp.iter().zip(&dsigma_scaled).map(|(a, b)| a - b).collect();
        let ds: Vec<f64> = sc.g_lp.iter().zip(&ds_scaled).map(|(g, v)| g * v).collect();
        Direction {
            dx,
            ds,
            dw,
            dz,
            dsigma,
            dx_scaled,
            dz_scaled,
            ds_scaled,
            dsigma_scaled,
        }
    }
}

/// Largest `α` with `Λ + α·D ⪰ 0` (PSD part) and `λ + α·d >= 0` (linear part).
fn max_step(lambda: &[f64], d: &SymMatrix, lambda_lp: &[f64], d_lp: &[f64]) -> Result<f64> {
    let n = lambda.len();
    let inv: Vec<f64> = lambda.iter().map(|l| 1.0 / l.sqrt()).collect();
    let scaled = SymMatrix::from_upper_fn(n, |i, j| inv[i] * d.get(i, j) * inv[j]);
    let min_eig = eigendecompose(&scaled)?.min_eigenvalue();
    let mut alpha = if min_eig < 0.0 {
        -1.0 / min_eig
    } else {
        f64::INFINITY
    };
    for (l, dl) in lambda_lp.iter().zip(d_lp) {
        if *dl < 0.0 {
            alpha = alpha.min(-l / dl);
        }
    }
    Ok(alpha)
}

fn solve_standard(
    prog: &StandardProgram,
    cfg: &SolverConfig,
    primal_hint: Assumption,
    dual_hint: Assumption,
) -> Result<StandardSolution> {
    let n = prog.dim;
    let n_lp = prog.n_lp();
    let m = prog.rows.len();
    let nu = (n + n_lp) as f64;
    let b: Vec<f64> = prog.rows.iter().map(|r| r.rhs).collect();
    let cost_scale = prog.cost_scale();
    let rhs_scale = prog.rhs_scale();

    let start = 1.0 + prog.cost.max_abs();
    let mut x = SymMatrix::identity(n).scaled(start);
    let mut z = SymMatrix::identity(n).scaled(start);
    let mut s = vec![1.0; n_lp];
    let mut sigma = vec![1.0; n_lp];
    let mut w = vec![0.0; m];

    let mut best_merit = f64::INFINITY;
    let mut best_at = 0;
    let mut last = (f64::INFINITY, f64::INFINITY, f64::INFINITY);

    for iter in 0..=cfg.max_iterations {
        let ax = prog.apply(&x, &s);
        let r_p: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
        let (atw, atw_lp) = prog.adjoint(&w);
        let r_d = prog.cost.sub(&atw).sub(&z);
        let r_d_lp: Vec<f64> = (0..n_lp)
            .map(|j| prog.cost_lp[j] - atw_lp[j] - sigma[j])
            .collect();

        let pobj = inner_unchecked(&prog.cost, &x) + dot(&prog.cost_lp, &s);
        let dobj = dot(&b, &w);
        let pinf = r_p.iter().fold(0.0f64, |a, v| a.max(v.abs())) / (1.0 + rhs_scale);
        let dinf = r_d
            .max_abs()
            .max(r_d_lp.iter().fold(0.0f64, |a, v| a.max(v.abs())))
            / (1.0 + cost_scale);
        let rgap = (pobj - dobj).abs() / (1.0 + pobj.abs());
        let comp = (inner_unchecked(&x, &z) + dot(&s, &sigma)) / (1.0 + pobj.abs());
        last = (pinf, dinf, rgap);
        log::debug!(
            "ipm iter {iter:3}: pobj={pobj:+.10e} dobj={dobj:+.10e} pinf={pinf:.2e} dinf={dinf:.2e} gap={rgap:.2e}"
        );

        if pinf <= cfg.eps1 && dinf <= cfg.eps1 && rgap <= cfg.eps1 && comp <= cfg.eps1 {
            return Ok(StandardSolution {
                x,
                s,
                w,
                z,
                primal_objective: pobj,
                dual_objective: dobj,
                residuals: Residuals {
                    primal_infeas: pinf,
                    dual_infeas: dinf,
                    relative_gap: rgap,
                },
                iterations: iter,
            });
        }
        if iter == cfg.max_iterations {
            break;
        }

        let primal_norm = x.max_abs().max(s.iter().fold(0.0, |a, v| a.max(v.abs())));
        let dual_norm = z
            .max_abs()
            .max(w.iter().fold(0.0, |a, v| a.max(v.abs())));
        if !(primal_norm < DIVERGENCE_NORM) || !pobj.is_finite() {
            return Err(Error::DualInfeasible {
                iterations: iter,
                hint: dual_hint,
            });
        }
        if !(dual_norm < DIVERGENCE_NORM) || !dobj.is_finite() {
            return Err(Error::PrimalInfeasible {
                iterations: iter,
                hint: primal_hint,
            });
        }
        let merit = pinf.max(dinf).max(rgap).max(comp);
        if merit < 0.5 * best_merit {
            best_merit = merit;
            best_at = iter;
        } else if iter - best_at >= STALL_WINDOW {
            return Err(if pinf >= dinf {
                Error::PrimalInfeasible {
                    iterations: iter,
                    hint: primal_hint,
                }
            } else {
                Error::DualInfeasible {
                    iterations: iter,
                    hint: dual_hint,
                }
            });
        }

        let mu = (inner_unchecked(&x, &z) + dot(&s, &sigma)) / nu;
        let scaling = nt_scaling(&x, &z, &s, &sigma)?;
        let system = NewtonSystem::new(prog, &scaling, &r_p, &r_d, &r_d_lp)?;
        let lam = &scaling.lambda;
        let lam_lp = &scaling.lambda_lp;

        // Predictor: affine-scaling direction.
        let rc_aff = SymMatrix::from_diagonal(&lam.iter().map(|l| -l * l).collect::<Vec<_>>());
        let rc_aff_lp: Vec<f64> = lam_lp.iter().map(|l| -l * l).collect();
        let aff = system.solve(&rc_aff, &rc_aff_lp);
        let ap = max_step(lam, &aff.dx_scaled, lam_lp, &aff.ds_scaled)?.min(1.0);
        let ad = max_step(lam, &aff.dz_scaled, lam_lp, &aff.dsigma_scaled)?.min(1.0);
        let lam_mat = SymMatrix::from_diagonal(lam);
        let xs_aff = lam_mat.add_scaled(ap, &aff.dx_scaled);
        let zs_aff = lam_mat.add_scaled(ad, &aff.dz_scaled);
        let lp_aff: f64 = (0..n_lp)
            .map(|j| (lam_lp[j] + ap * aff.ds_scaled[j]) * (lam_lp[j] + ad * aff.dsigma_scaled[j]))
            .sum();
        let mu_aff = ((inner_unchecked(&xs_aff, &zs_aff) + lp_aff) / nu).max(0.0);
        let centering = (mu_aff / mu).clamp(0.0, 1.0).powi(3);

        // Corrector: centering plus second-order term.
        let dxa = aff.dx_scaled.to_dense();
        let dza = aff.dz_scaled.to_dense();
        let cross = dxa.matmul(&dza).symmetric_part();
        let rc = SymMatrix::from_upper_fn(n, |i, j| {
            let target = if i == j { centering * mu - lam[i] * lam[i] } else { 0.0 };
            target - cross.get(i, j)
        });
        let rc_lp: Vec<f64> = (0..n_lp)
            .map(|j| centering * mu - lam_lp[j] * lam_lp[j] - aff.ds_scaled[j] * aff.dsigma_scaled[j])
            .collect();
        let dir = system.solve(&rc, &rc_lp);
        let ap = (cfg.step_fraction * max_step(lam, &dir.dx_scaled, lam_lp, &dir.ds_scaled)?).min(1.0);
        let ad =
            (cfg.step_fraction * max_step(lam, &dir.dz_scaled, lam_lp, &dir.dsigma_scaled)?).min(1.0);

        x = x.add_scaled(ap, &dir.dx);
        for (v, d) in s.iter_mut().zip(&dir.ds) {
            *v += ap * d;
        }
        z = z.add_scaled(ad, &dir.dz);
        for (v, d) in sigma.iter_mut().zip(&dir.dsigma) {
            *v += ad * d;
        }
        for (v, d) in w.iter_mut().zip(&dir.dw) {
            *v += ad * d;
        }
    }
    Err(Error::MaxIterations {
        iterations: cfg.max_iterations,
        primal_infeas: last.0,
        dual_infeas: last.1,
        relative_gap: last.2,
    })
}

/// Outcome of the strict primal feasibility check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PrimalSlaterCheck {
    pub holds: bool,
    /// Optimal `s` of `max s  s.t.  Mi⋅X <= −s, tr X = 1, X ⪰ s·I`.
    pub margin: f64,
}

/// Decides whether some `X ≻ 0` has `M1⋅X < 0` and `M2⋅X < 0`.
///
/// Such an `X` can always be rescaled to `I00⋅X = 1`, so the check maximizes the
/// margin `s` over the trace-normalized set, which keeps the auxiliary program bounded.
pub fn check_primal_slater(h: &HomogenizedInstance, cfg: &SolverConfig) -> Result<PrimalSlaterCheck> {
    cfg.validate()?;
    let n = h.dim;
    let s0 = 1.0 / n as f64;
    let ident = SymMatrix::identity(n);
    // X = X' + (s0 − u)·I with X' ⪰ 0 and u >= 0; minimize u.
    let row = |m: &SymMatrix, slack: usize| {
        let k = m.trace() + 1.0;
        let mut lp = vec![-k, 0.0, 0.0];
        lp[slack] = 1.0;
        StandardRow {
            psd: m.clone(),
            lp,
            rhs: -s0 * k,
        }
    };
    let prog = StandardProgram {
        dim: n,
        cost: SymMatrix::zeros(n),
        cost_lp: vec![1.0, 0.0, 0.0],
        rows: vec![
            row(&h.m1, 1),
            row(&h.m2, 2),
            StandardRow {
                psd: ident,
                lp: vec![-(n as f64), 0.0, 0.0],
                rhs: 0.0,
            },
        ],
    };
    let sol = solve_standard(&prog, cfg, Assumption::PrimalSlater, Assumption::PrimalSlater)?;
    let margin = s0 - sol.s[0];
    Ok(PrimalSlaterCheck {
        holds: margin > 100.0 * cfg.eps1,
        margin,
    })
}

/// Multipliers certifying strict dual feasibility.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DualWitness {
    pub y0: f64,
    pub y1: f64,
    pub y2: f64,
    /// Smallest eigenvalue of `M0 − y0·I00 + y1·M1 + y2·M2` at the witness.
    pub min_eigenvalue: f64,
}

/// Outcome of the strict dual feasibility search.
///
/// `holds == false` means no witness was found, not that none exists.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DualSlaterCheck {
    pub holds: bool,
    pub witness: Option<DualWitness>,
    /// Best normalized margin `λmin(Q0 + y1·Q1 + y2·Q2) / (1 + y1 + y2)` seen.
    pub best_margin: f64,
    pub best_y: (f64, f64),
    pub points_evaluated: usize,
}

const DUAL_GRID_SIDE: usize = 17;
const DUAL_LOG_MIN: f64 = -6.0;
const DUAL_LOG_MAX: f64 = 6.0;

/// Searches `y1, y2 > 0` with `Q0 + y1·Q1 + y2·Q2 ≻ 0`, then picks `y0` to make the
/// bordered matrix positive definite (always possible by Schur complement).
pub fn check_dual_slater(h: &HomogenizedInstance, cfg: &SolverConfig) -> Result<DualSlaterCheck> {
    cfg.validate()?;
    let n = h.n();
    let q = |m: &SymMatrix| SymMatrix::from_upper_fn(n, |i, j| m.get(i + 1, j + 1));
    let (q0, q1, q2) = (q(&h.m0), q(&h.m1), q(&h.m2));
    let mut evaluated = 0usize;
    let mut margin_at = |l1: f64, l2: f64| -> Result<f64> {
        evaluated += 1;
        let (y1, y2) = (10f64.powf(l1), 10f64.powf(l2));
        let qy = q0.add_scaled(y1, &q1).add_scaled(y2, &q2);
        Ok(eigendecompose(&qy)?.min_eigenvalue() / (1.0 + y1 + y2))
    };

    let step = (DUAL_LOG_MAX - DUAL_LOG_MIN) / (DUAL_GRID_SIDE - 1) as f64;
    let mut best = (f64::NEG_INFINITY, 0.0, 0.0);
    for i in 0..DUAL_GRID_SIDE {
        for j in 0..DUAL_GRID_SIDE {
            let (l1, l2) = (DUAL_LOG_MIN + i as f64 * step, DUAL_LOG_MIN + j as f64 * step);
            let m = margin_at(l1, l2)?;
            if m > best.0 {
                best = (m, l1, l2);
            }
        }
    }
    // Pattern ascent in log space from the best grid point.
    let mut h_step = step / 2.0;
    while h_step > 1e-6 {
        let mut improved = false;
        for (d1, d2) in [(1.0, 0.0), (-1.0, 0.0), (0.0, 1.0), (0.0, -1.0), (1.0, 1.0), (-1.0, -1.0), (1.0, -1.0), (-1.0, 1.0)] {
            let (l1, l2) = (best.1 + d1 * h_step, best.2 + d2 * h_step);
            if !(DUAL_LOG_MIN - 2.0..=DUAL_LOG_MAX + 2.0).contains(&l1)
                || !(DUAL_LOG_MIN - 2.0..=DUAL_LOG_MAX + 2.0).contains(&l2)
            {
                continue;
            }
            let m = margin_at(l1, l2)?;
            if m > best.0 {
                best = (m, l1, l2);
                improved = true;
            }
        }
        if !improved {
            h_step /= 2.0;
        }
    }

    let (y1, y2) = (10f64.powf(best.1), 10f64.powf(best.2));
    let scale = 1.0 + q0.max_abs().max(q1.max_abs()).max(q2.max_abs());
    let mut witness = None;
    if best.0 > 1e-12 * scale {
        let qy = q0.add_scaled(y1, &q1).add_scaled(y2, &q2);
        let xi: Vec<f64> = (0..n)
            .map(|j| h.m0.get(0, j + 1) + y1 * h.m1.get(0, j + 1) + y2 * h.m2.get(0, j + 1))
            .collect();
        let l = cholesky(&qy)?;
        let qinv_xi = cholesky_solve(&l, &xi);
        let y0 = y1 * h.m1.get(0, 0) + y2 * h.m2.get(0, 0) - dot(&xi, &qinv_xi) - 1.0;
        let full = h
            .m0
            .add_scaled(-y0, &h.i00)
            .add_scaled(y1, &h.m1)
            .add_scaled(y2, &h.m2);
        let min_eigenvalue = eigendecompose(&full)?.min_eigenvalue();
        if min_eigenvalue > 0.0 {
            witness = Some(DualWitness {
                y0,
                y1,
                y2,
                min_eigenvalue,
            });
        }
    }
    Ok(DualSlaterCheck {
        holds: witness.is_some(),
        witness,
        best_margin: best.0,
        best_y: (y1, y2),
        points_evaluated: evaluated,
    })
}
