//! Purification of approximate relaxation solutions and the Property I / I⁺(ε2) tests.
//!
//! Conditions are evaluated in a fixed order: multiplier positivity, rank of Z*, rank
//! of X*, and only then a single rank-one decomposition of X* balanced against M1,
//! on which the sign-product and cross-term conditions are read off.

use serde::Serialize;

use crate::decomp::{balanced_decomposition, BalanceMode, RankOneDecomposition};
use crate::error::{Error, Result};
use crate::model::HomogenizedInstance;
use crate::sdp::PrimalDualSolution;
use crate::symmat::{eigendecompose, numerical_rank, Matrix, SymMatrix};

/// Default purification tolerance.
pub const DEFAULT_EPS2: f64 = 1e-5;

/// Relaxation pair with eigenvalues below `eps2` set to zero.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PurifiedPair {
    pub x_star: SymMatrix,
    pub z_star: SymMatrix,
    pub y0: f64,
    pub y1: f64,
    pub y2: f64,
    pub eps1: f64,
    pub eps2: f64,
    /// Eigenvalues of `x_star` after thresholding, descending.
    pub x_spectrum: Vec<f64>,
    pub z_spectrum: Vec<f64>,
}

fn threshold(a: &SymMatrix, eps2: f64) -> Result<(SymMatrix, Vec<f64>)> {
    let eig = eigendecompose(a)?;
    let spectrum = eig
        .eigenvalues
        .iter()
        .map(|&l| if l < eps2 { 0.0 } else { l })
        .collect();
    Ok((eig.map_eigenvalues(|l| if l < eps2 { 0.0 } else { l }), spectrum))
}

pub fn purify(sol: &PrimalDualSolution, eps2: f64) -> Result<PurifiedPair> {
    if !(eps2 > 0.0) {
        return Err(Error::InvalidArgument(format!("eps2 must be positive, got {eps2}")));
    }
    let (x_star, x_spectrum) = threshold(&sol.x, eps2)?;
    let (z_star, z_spectrum) = threshold(&sol.z, eps2)?;
    Ok(PurifiedPair {
        x_star,
        z_star,
        y0: sol.y0,
        y1: sol.y1,
        y2: sol.y2,
        eps1: sol.eps1,
        eps2,
        x_spectrum,
        z_spectrum,
    })
}

impl PurifiedPair {
    /// `rank(X*, eps2)`, read from the thresholded spectrum.
    pub fn rank_x(&self) -> usize {
        self.x_spectrum.iter().filter(|&&l| l > self.eps2).count()
    }

    pub fn rank_z(&self) -> usize {
        self.z_spectrum.iter().filter(|&&l| l > self.eps2).count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum PropertyKind {
    /// Property I(ε2): conditions 1–3, the M1 equalities and the M2 sign product.
    I,
    /// Property I⁺(ε2): additionally the nonzero M1 cross term.
    IPlus,
}

/// Quantities the conditions are decided from.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Measured {
    pub y1: f64,
    pub y2: f64,
    pub rank_x: usize,
    pub rank_z: usize,
    pub n: usize,
    /// `M1 ⋅ xᵢxᵢᵀ` for the two decomposition vectors.
    pub m1_values: Option<[f64; 2]>,
    /// `M2 ⋅ xᵢxᵢᵀ` for the two decomposition vectors.
    pub m2_values: Option<[f64; 2]>,
    /// `(M2 ⋅ x₁x₁ᵀ)(M2 ⋅ x₂x₂ᵀ)`.
    pub m2_product: Option<f64>,
    /// `M1 ⋅ x₁x₂ᵀ`.
    pub m1_cross: Option<f64>,
    /// `M2 ⋅ x₁x₂ᵀ`.
    pub m2_cross: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PropertyReport {
    pub kind: PropertyKind,
    pub eps2: f64,
    pub cond_i1: bool,
    pub cond_i2: bool,
    pub cond_i3: bool,
    /// `None` when conditions 1–3 already decided the outcome.
    pub cond_4_equalities: Option<bool>,
    pub cond_4_product: Option<bool>,
    pub cond_4_cross: Option<bool>,
    pub measured: Measured,
    pub decomposition: Option<RankOneDecomposition>,
    /// Whether the property holds (for I⁺(ε2): an optimality gap is reported).
    pub holds: bool,
}

impl PropertyReport {
    /// Recomputes every flag from `measured` and `eps2`.
    pub fn recompute_flags(m: &Measured, eps2: f64) -> [Option<bool>; 6] {
        let i1 = m.y1 > eps2 && m.y2 > eps2;
        let i2 = m.rank_z + 1 == m.n;
        let i3 = m.rank_x == 2;
        [
            Some(i1),
            Some(i2),
            Some(i3),
            m.m1_values.map(|v| v.iter().all(|x| x.abs() < eps2)),
            m.m2_product.map(|p| p < -eps2 * eps2),
            m.m1_cross.map(|c| c.abs() > eps2),
        ]
    }

    pub fn first_three(&self) -> bool {
        self.cond_i1 && self.cond_i2 && self.cond_i3
    }
}

fn evaluate(pair: &PurifiedPair, h: &HomogenizedInstance, kind: PropertyKind) -> Result<PropertyReport> {
    let eps2 = pair.eps2;
    let n = h.n();
    let mut measured = Measured {
        y1: pair.y1,
        y2: pair.y2,
        rank_x: pair.rank_x(),
        rank_z: pair.rank_z(),
        n,
        m1_values: None,
        m2_values: None,
        m2_product: None,
        m1_cross: None,
        m2_cross: None,
    };
    let cond_i1 = measured.y1 > eps2 && measured.y2 > eps2;
    let cond_i2 = measured.rank_z + 1 == n;
    let cond_i3 = measured.rank_x == 2;
    let mut report = PropertyReport {
        kind,
        eps2,
        cond_i1,
        cond_i2,
        cond_i3,
        cond_4_equalities: None,
        cond_4_product: None,
        cond_4_cross: None,
        measured: measured.clone(),
        decomposition: None,
        holds: false,
    };
    if !report.first_three() {
        log::debug!("conditions 1-3: {cond_i1} {cond_i2} {cond_i3}; property fails");
        return Ok(report);
    }
    let d = balanced_decomposition(&pair.x_star, &h.m1, BalanceMode::Zero, eps2)?;
    fill_condition_four(&mut measured, &d, h);
    let [_, _, _, eq, prod, cross] = PropertyReport::recompute_flags(&measured, eps2);
    report.cond_4_equalities = eq;
    report.cond_4_product = prod;
    report.cond_4_cross = cross;
    report.holds = eq == Some(true)
        && prod == Some(true)
        && (kind == PropertyKind::I || cross == Some(true));
    report.measured = measured;
    report.decomposition = Some(d);
    Ok(report)
}

pub(crate) fn fill_condition_four(m: &mut Measured, d: &RankOneDecomposition, h: &HomogenizedInstance) {
    let (x1, x2) = (&d.vectors[0], &d.vectors[1]);
    let m1 = [h.m1.quad_form(x1), h.m1.quad_form(x2)];
    let m2 = [h.m2.quad_form(x1), h.m2.quad_form(x2)];
    m.m1_values = Some(m1);
    m.m2_values = Some(m2);
    m.m2_product = Some(m2[0] * m2[1]);
    m.m1_cross = Some(h.m1.bilinear(x1, x2));
    m.m2_cross = Some(h.m2.bilinear(x1, x2));
}

/// Property I⁺(ε2) test; `holds` means an optimality gap.
#[allow(non_snake_case)]
pub fn evaluate_property_I_plus(pair: &PurifiedPair, h: &HomogenizedInstance) -> Result<PropertyReport> {
    evaluate(pair, h, PropertyKind::IPlus)
}

/// Property I(ε2) test, on the same single balanced decomposition.
#[allow(non_snake_case)]
pub fn evaluate_property_I(pair: &PurifiedPair, h: &HomogenizedInstance) -> Result<PropertyReport> {
    evaluate(pair, h, PropertyKind::I)
}

/// Γ matrix whose invertibility shows the rank-two relaxation solution is unique.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UniquenessCertificate {
    pub gamma: [[f64; 3]; 3],
    pub determinant: f64,
    /// `−(2·M1⋅x₁x₂ᵀ)·(α·(t₁² + t₂²))`.
    pub closed_form_determinant: f64,
    pub nullspace_dim_of_av: usize,
}

/// Builds Γ from the two decomposition vectors in `report`.
pub fn uniqueness_certificate(report: &PropertyReport, h: &HomogenizedInstance) -> Result<UniquenessCertificate> {
    let d = report.decomposition.as_ref().ok_or(Error::MissingDecomposition)?;
    if d.len() != 2 {
        return Err(Error::MissingDecomposition);
    }
    certificate_from_pair(&d.vectors[0], &d.vectors[1], h, report.eps2)
}

pub(crate) fn certificate_from_pair(
    x1: &[f64],
    x2: &[f64],
    h: &HomogenizedInstance,
    eps2: f64,
) -> Result<UniquenessCertificate> {
    let alpha = h.m2.quad_form(x1);
    let cross1 = h.m1.bilinear(x1, x2);
    let (t1, t2) = (x1[0], x2[0]);
    let gamma = [
        [h.m1.quad_form(x1), 2.0 * cross1, h.m1.quad_form(x2)],
        [alpha, 2.0 * h.m2.bilinear(x1, x2), -alpha],
        [t1 * t1, 2.0 * t1 * t2, t2 * t2],
    ];
    let g = Matrix::from_fn(3, 3, |i, j| gamma[i][j]);
    let determinant = g.determinant();
    let closed_form_determinant = -(2.0 * cross1) * (alpha * (t1 * t1 + t2 * t2));
    let scale = (1.0 + g.max_abs()).powi(3);
    let nullspace_dim_of_av = if determinant.abs() > eps2.powi(3) * scale {
        0
    } else {
        let gtg = g.transpose().matmul(&g).symmetric_part();
        let rank = numerical_rank(&gtg, (eps2 * (1.0 + g.max_abs())).powi(2))?;
        (3 - rank).max(1)
    };
    Ok(UniquenessCertificate {
        gamma,
        determinant,
        closed_form_determinant,
        nullspace_dim_of_av,
    })
}
