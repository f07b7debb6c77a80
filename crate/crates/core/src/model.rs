//! Problem data for a quadratic program with two quadratic constraints,
//!
//! ```text
//! minimize    zᵀQ0 z + 2 b0ᵀz
//! subject to  zᵀQi z + 2 biᵀz + ci <= 0,   i = 1, 2,
//! ```
//!
//! and its homogenization in `x = [t; z]` through the bordered matrices
//! `Mi = [[ci, biᵀ], [bi, Qi]]` (with `c0 = 0`).

use serde::Serialize;

use crate::error::{Error, Result};
use crate::symmat::{dot, SymMatrix};

/// Default threshold on `|t|` below which a homogeneous vector is rejected.
pub const DEFAULT_DEHOMOGENIZE_TOL: f64 = 1e-8;

/// One quadratic `zᵀQz + 2bᵀz + c`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Quadratic {
    pub q: SymMatrix,
    pub b: Vec<f64>,
    pub c: f64,
}

impl Quadratic {
    pub fn eval(&self, z: &[f64]) -> f64 {
        self.q.quad_form(z) + 2.0 * dot(&self.b, z) + self.c
    }

    /// Bordered matrix `[[c, bᵀ], [b, Q]]`.
    pub fn bordered(&self) -> SymMatrix {
        let b = &self.b;
        SymMatrix::from_upper_fn(b.len() + 1, |i, j| match (i, j) {
            (0, 0) => self.c,
            (0, j) => b[j - 1],
            (i, j) => self.q.get(i - 1, j - 1),
        })
    }
}

/// Raw QC2QP data. No definiteness is required of any `Qi`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Qc2qpInstance {
    pub n: usize,
    pub objective: Quadratic,
    pub constraints: [Quadratic; 2],
}

impl Qc2qpInstance {
    /// Validates shapes and finiteness. The objective constant is forced to zero.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        q0: SymMatrix,
        b0: Vec<f64>,
        q1: SymMatrix,
        b1: Vec<f64>,
        c1: f64,
        q2: SymMatrix,
        b2: Vec<f64>,
        c2: f64,
    ) -> Result<Self> {
        let n = q0.dim();
        if n == 0 {
            return Err(Error::InvalidArgument("dimension n must be positive".into()));
        }
        for (what, q) in [("Q1", &q1), ("Q2", &q2)] {
            if q.dim() != n {
                return Err(Error::DimensionMismatch {
                    what,
                    expected: n,
                    found: q.dim(),
                });
            }
        }
        for (what, b) in [("b0", &b0), ("b1", &b1), ("b2", &b2)] {
            if b.len() != n {
                return Err(Error::DimensionMismatch {
                    what,
                    expected: n,
                    found: b.len(),
                });
            }
        }
        let finite = [&q0, &q1, &q2].iter().all(|q| q.is_finite())
            && [&b0, &b1, &b2].iter().all(|b| b.iter().all(|v| v.is_finite()))
            && c1.is_finite()
            && c2.is_finite();
        if !finite {
            return Err(Error::NonFinite("instance data"));
        }
        Ok(Self {
            n,
            objective: Quadratic {
                q: q0,
                b: b0,
                c: 0.0,
            },
            constraints: [
                Quadratic {
                    q: q1,
                    b: b1,
                    c: c1,
                },
                Quadratic {
                    q: q2,
                    b: b2,
                    c: c2,
                },
            ],
        })
    }

    /// The quadratic with index 0 (objective), 1 or 2 (constraints).
    pub fn quadratic(&self, i: usize) -> Result<&Quadratic> {
        match i {
            0 => Ok(&self.objective),
            1 | 2 => Ok(&self.constraints[i - 1]),
            _ => Err(Error::InvalidIndex(i)),
        }
    }

    /// Same instance with the two constraints interchanged.
    pub fn swapped_constraints(&self) -> Self {
        let [a, b] = self.constraints.clone();
        Self {
            n: self.n,
            objective: self.objective.clone(),
            constraints: [b, a],
        }
    }

    /// Largest absolute data entry, used to scale tolerances.
    pub fn data_scale(&self) -> f64 {
        std::iter::once(&self.objective)
            .chain(self.constraints.iter())
            .map(|q| {
                q.q.max_abs()
                    .max(q.b.iter().fold(0.0, |m, v| m.max(v.abs())))
                    .max(q.c.abs())
            })
            .fold(0.0, f64::max)
    }
}

/// `zᵀQᵢz + 2bᵢᵀz + cᵢ` with `c₀ = 0`.
pub fn evaluate_q(inst: &Qc2qpInstance, i: usize, z: &[f64]) -> Result<f64> {
    let quad = inst.quadratic(i)?;
    if z.len() != inst.n {
        return Err(Error::DimensionMismatch {
            what: "evaluation point",
            expected: inst.n,
            found: z.len(),
        });
    }
    Ok(quad.eval(z))
}

/// Bordered matrices of dimension `n + 1` plus the trace-pinning matrix `I00`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HomogenizedInstance {
    pub dim: usize,
    pub m0: SymMatrix,
    pub m1: SymMatrix,
    pub m2: SymMatrix,
    pub i00: SymMatrix,
}

impl HomogenizedInstance {
    /// Original variable count `n = dim − 1`.
    pub fn n(&self) -> usize {
        self.dim - 1
    }

    pub fn constraint(&self, i: usize) -> &SymMatrix {
        match i {
            1 => &self.m1,
            2 => &self.m2,
            _ => panic!("constraint index must be 1 or 2"),
        }
    }

    /// Recovers the raw instance from the bordered blocks.
    pub fn to_instance(&self) -> Qc2qpInstance {
        let n = self.n();
        let split = |m: &SymMatrix| {
            let q = SymMatrix::from_upper_fn(n, |i, j| m.get(i + 1, j + 1));
            let b = (0..n).map(|j| m.get(0, j + 1)).collect::<Vec<_>>();
            (q, b, m.get(0, 0))
        };
        let (q0, b0, _) = split(&self.m0);
        let (q1, b1, c1) = split(&self.m1);
        let (q2, b2, c2) = split(&self.m2);
        Qc2qpInstance {
            n,
            objective: Quadratic {
                q: q0,
                b: b0,
                c: 0.0,
            },
            constraints: [
                Quadratic {
                    q: q1,
                    b: b1,
                    c: c1,
                },
                Quadratic {
                    q: q2,
                    b: b2,
                    c: c2,
                },
            ],
        }
    }
}

pub fn homogenize(inst: &Qc2qpInstance) -> HomogenizedInstance {
    let dim = inst.n + 1;
    let mut m0 = inst.objective.bordered();
    m0.set(0, 0, 0.0);
    HomogenizedInstance {
        dim,
        m0,
        m1: inst.constraints[0].bordered(),
        m2: inst.constraints[1].bordered(),
        i00: SymMatrix::unit_diagonal(dim, 0),
    }
}

/// `x = [t; z]` in the lifted space.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HomogeneousVector {
    pub t: f64,
    pub z: Vec<f64>,
}

impl HomogeneousVector {
    pub fn from_slice(x: &[f64]) -> Self {
        Self {
            t: x[0],
            z: x[1..].to_vec(),
        }
    }

    pub fn to_vec(&self) -> Vec<f64> {
        std::iter::once(self.t).chain(self.z.iter().copied()).collect()
    }

    pub fn lift(z: &[f64]) -> Self {
        Self {
            t: 1.0,
            z: z.to_vec(),
        }
    }
}

/// `z / t`, rejecting `|t| <= tol`.
pub fn dehomogenize(x: &HomogeneousVector, tol: f64) -> Result<Vec<f64>> {
    if !(x.t.abs() > tol) {
        return Err(Error::DegenerateHomogeneous { t: x.t, tol });
    }
    Ok(x.z.iter().map(|v| v / x.t).collect())
}
