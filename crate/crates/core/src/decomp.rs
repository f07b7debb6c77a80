//! Rank-one decompositions `X = Σ xᵢxᵢᵀ` constrained by quadratic forms.
//!
//! The pairwise rotation takes two vectors whose `G`-values have opposite signs and
//! mixes them so the first one becomes `G`-isotropic while the outer-product sum is
//! unchanged. Repeating it yields decompositions whose every term has `G`-value zero
//! (or nonpositive). Joint isotropic vectors of two forms are found inside the span of
//! at most three decomposition vectors by tracing the isotropic cone of the first form
//! and root-finding the second form along it.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::symmat::{dot, eigendecompose, inner_unchecked, norm, SymMatrix};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankOneDecomposition {
    pub vectors: Vec<Vec<f64>>,
    /// `‖X − Σ xᵢxᵢᵀ‖_max` against the matrix that was decomposed.
    pub reconstruction_residual: f64,
    /// Number of pairwise rotations applied after the spectral start.
    pub rotations: usize,
}

impl RankOneDecomposition {
    fn new(x: &SymMatrix, vectors: Vec<Vec<f64>>, rotations: usize) -> Self {
        let residual = x.sub(&SymMatrix::sum_of_outer(x.dim(), &vectors)).max_abs();
        Self {
            vectors,
            reconstruction_residual: residual,
            rotations,
        }
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    /// `xᵢᵀ G xᵢ` for each vector.
    pub fn form_values(&self, g: &SymMatrix) -> Vec<f64> {
        self.vectors.iter().map(|v| g.quad_form(v)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum BalanceMode {
    /// Every vector gets `|xᵀGx| < eps2`.
    Zero,
    /// Every vector gets `xᵀGx < eps2`.
    Nonpositive,
}

/// `1 + ‖X‖_max·‖G‖_max`.
pub fn form_scale(x: &SymMatrix, g: &SymMatrix) -> f64 {
    1.0 + x.max_abs() * g.max_abs()
}

/// Flips the sign so the leading coordinate is positive, or the largest one when the
/// leading coordinate vanishes.
fn canonical_sign(mut v: Vec<f64>) -> Vec<f64> {
    let scale = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let pivot = if v.first().map_or(false, |t| t.abs() > 1e-12 * scale) {
        v[0]
    } else {
        v.iter().copied().fold(0.0, |m: f64, x| if x.abs() > m.abs() { x } else { m })
    };
    if pivot < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
    v
}

/// `√λᵢ·qᵢ` for every eigenpair with `λᵢ > eps2`.
pub fn spectral_rank_one(x: &SymMatrix, eps2: f64) -> Result<RankOneDecomposition> {
    let eig = eigendecompose(x)?;
    let min = eig.min_eigenvalue();
    if min < -10.0 * eps2 {
        return Err(Error::NotPsd { min_eigenvalue: min });
    }
    let vectors = eig
        .eigenvalues
        .iter()
        .enumerate()
        .filter(|(_, &l)| l > eps2)
        .map(|(k, &l)| {
            let s = l.sqrt();
            canonical_sign(eig.eigenvector(k).into_iter().map(|v| v * s).collect())
        })
        .collect();
    Ok(RankOneDecomposition::new(x, vectors, 0))
}

/// Mixes `xi` and `xj` so the first output is `G`-isotropic; `uuᵀ + vvᵀ = xixiᵀ + xjxjᵀ`.
pub fn rotate_pair(xi: &[f64], xj: &[f64], g: &SymMatrix) -> Result<(Vec<f64>, Vec<f64>)> {
    if xi.len() != g.dim() || xj.len() != g.dim() {
        return Err(Error::DimensionMismatch {
            what: "rotated vector",
            expected: g.dim(),
            found: if xi.len() != g.dim() { xi.len() } else { xj.len() },
        });
    }
    let a = g.quad_form(xi);
    let c = g.quad_form(xj);
    if !(a * c < 0.0) {
        return Err(Error::SameSignPair {
            first: a,
            second: c,
        });
    }
    let b = g.bilinear(xi, xj);
    // Roots of cγ² + 2bγ + a = 0; the product of the roots is a/c < 0, so both are real.
    let q = -(b + b.signum() * (b * b - a * c).sqrt());
    let (r1, r2) = (q / c, a / q);
    let mut gamma = if r1.abs() <= r2.abs() { r1 } else { r2 };
    let slope = 2.0 * (c * gamma + b);
    if slope != 0.0 {
        gamma -= (c * gamma * gamma + 2.0 * b * gamma + a) / slope;
    }
    let s = 1.0 / (1.0 + gamma * gamma).sqrt();
    let u = xi.iter().zip(xj).map(|(p, q)| (p + gamma * q) * s).collect();
    let v = xj.iter().zip(xi).map(|(q, p)| (q - gamma * p) * s).collect();
    Ok((u, v))
}

/// Spectral decomposition of `X` followed by pairwise rotations until every term meets
/// the `mode` target against `G`.
pub fn balanced_decomposition(
    x: &SymMatrix,
    g: &SymMatrix,
    mode: BalanceMode,
    eps2: f64,
) -> Result<RankOneDecomposition> {
    if g.dim() != x.dim() {
        return Err(Error::DimensionMismatch {
            what: "form matrix",
            expected: x.dim(),
            found: g.dim(),
        });
    }
    let scale = form_scale(x, g);
    let total = inner_unchecked(g, x);
    let admissible = match mode {
        BalanceMode::Zero => total.abs() <= eps2 * scale,
        BalanceMode::Nonpositive => total <= eps2 * scale,
    };
    if !admissible {
        return Err(Error::DecompositionPrecondition(format!(
            "G.X = {total:e} is outside the {mode:?} target at eps2 = {eps2:e}"
        )));
    }
    let mut vectors = spectral_rank_one(x, eps2)?.vectors;
    let mut rotations = 0;
    let r = vectors.len();
    loop {
        let values: Vec<f64> = vectors.iter().map(|v| g.quad_form(v)).collect();
        let unmet: Vec<usize> = (0..r)
            .filter(|&k| match mode {
                BalanceMode::Zero => values[k].abs() >= eps2,
                BalanceMode::Nonpositive => values[k] >= eps2,
            })
            .collect();
        if unmet.is_empty() {
            break;
        }
        let argmax = (0..r).max_by(|&i, &j| values[i].total_cmp(&values[j])).unwrap();
        let argmin = (0..r).min_by(|&i, &j| values[i].total_cmp(&values[j])).unwrap();
        let pair = match mode {
            BalanceMode::Zero if values[argmax] > 0.0 && values[argmin] < 0.0 => {
                // Rotate the larger-magnitude unmet vector against the opposite extreme.
                let i = *unmet
                    .iter()
                    .max_by(|&&i, &&j| values[i].abs().total_cmp(&values[j].abs()))
                    .unwrap();
                Some(if values[i] > 0.0 { (i, argmin) } else { (i, argmax) })
            }
            BalanceMode::Nonpositive if values[argmin] < 0.0 => Some((argmax, argmin)),
            _ => None,
        };
        let Some((i, j)) = pair else {
            return Err(Error::DecompositionStall {
                unmet: unmet.len(),
                total,
            });
        };
        if rotations > r * r {
            return Err(Error::DecompositionStall {
                unmet: unmet.len(),
                total,
            });
        }
        let (u, v) = rotate_pair(&vectors[i], &vectors[j], g)?;
        log::trace!("rotate ({i}, {j}): values {:e}, {:e}", values[i], values[j]);
        // The isotropic vector leaves the pool of candidates; the remainder stays at i.
        vectors[i] = v;
        vectors[j] = u;
        rotations += 1;
    }
    Ok(RankOneDecomposition::new(x, vectors, rotations))
}

/// A vector `x` in the range of `X` with `|xᵀM1x| < eps2` and `|xᵀM2x| < eps2`,
/// normalized so that `X − xxᵀ ⪰ 0` has rank one less than `X`.
///
/// Among several admissible directions the one with the largest leading coordinate
/// relative to its length is returned.
pub fn joint_zero_vector(
    x: &SymMatrix,
    m1: &SymMatrix,
    m2: &SymMatrix,
    eps2: f64,
) -> Result<Vec<f64>> {
    for (g, what) in [(m1, "first form"), (m2, "second form")] {
        if g.dim() != x.dim() {
            return Err(Error::DimensionMismatch {
                what,
                expected: x.dim(),
                found: g.dim(),
            });
        }
        let v = inner_unchecked(g, x);
        if v.abs() > eps2 * form_scale(x, g) {
            return Err(Error::DecompositionPrecondition(format!(
                "{what} has G.X = {v:e}, expected zero at eps2 = {eps2:e}"
            )));
        }
    }
    let spectral = spectral_rank_one(x, eps2)?;
    if !(2..=3).contains(&spectral.len()) {
        return Err(Error::DecompositionPrecondition(format!(
            "numerical rank {} outside 2..=3",
            spectral.len()
        )));
    }
    joint_zero_in_span(&spectral.vectors, m1, m2, eps2)?
        .into_iter()
        .next()
        .ok_or(Error::NoCommonIsotropicVector { tol: eps2 })
}

/// Joint isotropic vectors `x = Vu` (`‖u‖ = 1`, `V = [w₁ … w_k]`, `k <= 3`), best first.
///
/// Returns an empty list when none exist at tolerance `eps2`.
pub(crate) fn joint_zero_in_span(
    span: &[Vec<f64>],
    m1: &SymMatrix,
    m2: &SymMatrix,
    eps2: f64,
) -> Result<Vec<Vec<f64>>> {
    let k = span.len();
    if !(1..=3).contains(&k) {
        return Err(Error::DecompositionPrecondition(format!(
            "joint isotropic search needs 1 to 3 spanning vectors, got {k}"
        )));
    }
    let restrict = |m: &SymMatrix| SymMatrix::from_upper_fn(k, |i, j| m.bilinear(&span[i], &span[j]));
    let a = restrict(m1);
    let b = restrict(m2);
    let zero_tol = 1e-2 * eps2;

    let (families, check) = match isotropic_families(&a, zero_tol)? {
        Some(f) => (f, &b),
        None => match isotropic_families(&b, zero_tol)? {
            Some(f) => (f, &a),
            None => (vec![Family::Point(unit(k, 0))], &a),
        },
    };

    let mut found: Vec<Vec<f64>> = Vec::new();
    for family in &families {
        for u in family.zeros_of(check) {
            let u = scale_to_unit(&u);
            if a.quad_form(&u).abs() < eps2
                && b.quad_form(&u).abs() < eps2
                && !found.iter().any(|f| dot(f, &u).abs() > 1.0 - 1e-10)
            {
                found.push(u);
            }
        }
    }
    let dim = span[0].len();
    let mut out: Vec<Vec<f64>> = found
        .iter()
        .map(|u| {
            let x: Vec<f64> = (0..dim)
                .map(|r| (0..k).map(|c| span[c][r] * u[c]).sum())
                .collect();
            canonical_sign(x)
        })
        .filter(|x| m1.quad_form(x).abs() < eps2 && m2.quad_form(x).abs() < eps2)
        .collect();
    let lead = |x: &Vec<f64>| x[0].abs() / norm(x).max(f64::MIN_POSITIVE);
    out.sort_by(|p, q| lead(q).total_cmp(&lead(p)));
    Ok(out)
}

fn unit(k: usize, i: usize) -> Vec<f64> {
    let mut e = vec![0.0; k];
    e[i] = 1.0;
    e
}

fn scale_to_unit(u: &[f64]) -> Vec<f64> {
    let n = norm(u);
    u.iter().map(|v| v / n).collect()
}

/// A connected piece of the isotropic cone of a form on ℝᵏ (`k <= 3`).
enum Family {
    Point(Vec<f64>),
    /// `u(φ) = c + cos φ·a + sin φ·b` for `φ ∈ [0, period)`.
    Arc {
        c: Vec<f64>,
        a: Vec<f64>,
        b: Vec<f64>,
        period: f64,
    },
}

const ARC_SAMPLES: usize = 2048;
const BISECTIONS: usize = 200;

impl Family {
    fn at(c: &[f64], a: &[f64], b: &[f64], phi: f64) -> Vec<f64> {
        let (s, co) = phi.sin_cos();
        (0..a.len()).map(|i| c[i] + co * a[i] + s * b[i]).collect()
    }

    /// Directions on this family where `uᵀGu` vanishes, including tangential zeros.
    fn zeros_of(&self, g: &SymMatrix) -> Vec<Vec<f64>> {
        match self {
            Family::Point(p) => vec![p.clone()],
            Family::Arc { c, a, b, period } => {
                let f = |phi: f64| {
                    let u = Self::at(c, a, b, phi);
                    g.quad_form(&u) / dot(&u, &u)
                };
                let h = period / ARC_SAMPLES as f64;
                let vals: Vec<f64> = (0..=ARC_SAMPLES).map(|i| f(i as f64 * h)).collect();
                let mut roots = Vec::new();
                for i in 0..ARC_SAMPLES {
                    let (lo, hi) = (i as f64 * h, (i + 1) as f64 * h);
                    if vals[i] == 0.0 {
                        roots.push(lo);
                    } else if vals[i] * vals[i + 1] < 0.0 {
                        roots.push(bisect(&f, lo, hi, vals[i]));
                    }
                }
                for i in 0..ARC_SAMPLES {
                    let prev = vals[(i + ARC_SAMPLES - 1) % ARC_SAMPLES];
                    let next = vals[i + 1];
                    let cur = vals[i];
                    if cur.abs() <= prev.abs() && cur.abs() <= next.abs() && prev * cur > 0.0 && cur * next > 0.0 {
                        let phi = i as f64 * h;
                        roots.push(golden_min(&|p: f64| f(p).abs(), phi - h, phi + h));
                    }
                }
                roots.into_iter().map(|phi| Self::at(c, a, b, phi)).collect()
            }
        }
    }
}

fn bisect(f: &impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, mut flo: f64) -> f64 {
    for _ in 0..BISECTIONS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return mid;
        }
        if fm * flo < 0.0 {
            hi = mid;
        } else {
            lo = mid;
            flo = fm;
        }
    }
    0.5 * (lo + hi)
}

fn golden_min(f: &impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = hi - r * (hi - lo);
    let mut x2 = lo + r * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..BISECTIONS {
        if hi - lo <= 1e-15 * (1.0 + lo.abs()) {
            break;
        }
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - r * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + r * (hi - lo);
            f2 = f(x2);
        }
    }
    0.5 * (lo + hi)
}

/// Isotropic cone of `A` on ℝᵏ as a union of families, or `None` when `A` vanishes
/// at tolerance (every direction is isotropic).
fn isotropic_families(a: &SymMatrix, zero_tol: f64) -> Result<Option<Vec<Family>>> {
    let k = a.dim();
    let eig = eigendecompose(a)?;
    let lam = &eig.eigenvalues;
    let basis: Vec<Vec<f64>> = (0..k).map(|i| eig.eigenvector(i)).collect();
    let pos: Vec<usize> = (0..k).filter(|&i| lam[i] > zero_tol).collect();
    let neg: Vec<usize> = (0..k).filter(|&i| lam[i] < -zero_tol).collect();
    let zero: Vec<usize> = (0..k).filter(|&i| lam[i].abs() <= zero_tol).collect();
    if zero.len() == k {
        return Ok(None);
    }
    let e = |i: usize, s: f64| -> Vec<f64> { basis[i].iter().map(|v| v * s).collect() };
    let add = |p: &[f64], q: &[f64], s: f64| -> Vec<f64> { p.iter().zip(q).map(|(x, y)| x + s * y).collect() };
    let inv_sqrt = |i: usize| 1.0 / lam[i].abs().sqrt();
    let zero_vec = vec![0.0; k];
    let mut out = Vec::new();

    // Directions mixing one positive and one negative eigenvector (weights balanced).
    let balanced = |i: usize, j: usize, sign: f64| add(&e(i, inv_sqrt(i)), &e(j, inv_sqrt(j)), sign);

    match (pos.len(), neg.len(), zero.len()) {
        (p, n, 0) if p == k || n == k => {}
        (1, 1, 0) => {
            out.push(Family::Point(balanced(pos[0], neg[0], 1.0)));
            out.push(Family::Point(balanced(pos[0], neg[0], -1.0)));
        }
        (2, 1, 0) | (1, 2, 0) => {
            let (odd, pair) = if pos.len() == 1 { (pos[0], &neg) } else { (neg[0], &pos) };
            out.push(Family::Arc {
                c: e(odd, inv_sqrt(odd)),
                a: e(pair[0], inv_sqrt(pair[0])),
                b: e(pair[1], inv_sqrt(pair[1])),
                period: 2.0 * std::f64::consts::PI,
            });
        }
        (1, 1, 1) => {
            for sign in [1.0, -1.0] {
                out.push(Family::Arc {
                    c: zero_vec.clone(),
                    a: balanced(pos[0], neg[0], sign),
                    b: e(zero[0], 1.0),
                    period: std::f64::consts::PI,
                });
            }
        }
        (_, _, 1) => out.push(Family::Point(e(zero[0], 1.0))),
        (_, _, 2) => out.push(Family::Arc {
            c: zero_vec,
            a: e(zero[0], 1.0),
            b: e(zero[1], 1.0),
            period: std::f64::consts::PI,
        }),
        _ => {}
    }
    Ok(Some(out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::fixtures::{gap_example, no_gap_example};
    use crate::model::homogenize;
    use crate::symmat::numerical_rank;
    use proptest::prelude::*;

    /// X* printed for the gap example.
    fn gap_x_star() -> SymMatrix {
        SymMatrix::from_rows(&[
            vec![1.0000000, 0.9982700, -1.2814553],
            vec![0.9982700, 2.2688396, -0.0999477],
            vec![-1.2814553, -0.0999477, 2.7352111],
        ])
        .unwrap()
    }

    fn no_gap_x_star() -> SymMatrix {
        SymMatrix::outer(&[-1.0, 0.7547192, 3.9916123])
    }

    #[test]
    fn spectral_examples() {
        let d = spectral_rank_one(&SymMatrix::outer(&[1.0, 2.0]), 1e-5).unwrap();
        assert_eq!(d.len(), 1);
        assert!((d.vectors[0][0] - 1.0).abs() < 1e-12 && (d.vectors[0][1] - 2.0).abs() < 1e-12);

        let d = spectral_rank_one(&no_gap_x_star(), 1e-5).unwrap();
        assert_eq!(d.len(), 1);
        let expect = [-1.0, 0.7547192, 3.9916123];
        let s = if d.vectors[0][0] * expect[0] > 0.0 { 1.0 } else { -1.0 };
        for (v, e) in d.vectors[0].iter().zip(expect) {
            assert!((s * v - e).abs() < 1e-4);
        }

        assert!(spectral_rank_one(&SymMatrix::zeros(3), 1e-5).unwrap().is_empty());
        let neg = SymMatrix::from_diagonal(&[1.0, -1.0]);
        assert!(matches!(spectral_rank_one(&neg, 1e-5), Err(Error::NotPsd { .. })));
    }

    #[test]
    fn rotate_symmetric_case() {
        let g = SymMatrix::from_diagonal(&[1.0, -1.0]);
        let (u, v) = rotate_pair(&[1.0, 0.0], &[0.0, 1.0], &g).unwrap();
        assert!(g.quad_form(&u).abs() < 1e-15);
        assert!((u[0].abs() - 0.5f64.sqrt()).abs() < 1e-15 && (u[1].abs() - 0.5f64.sqrt()).abs() < 1e-15);
        let sum = SymMatrix::outer(&u).add_scaled(1.0, &SymMatrix::outer(&v));
        assert!(sum.sub(&SymMatrix::identity(2)).max_abs() < 1e-15);
        assert!(matches!(
            rotate_pair(&[1.0, 0.0], &[2.0, 0.0], &g),
            Err(Error::SameSignPair { .. })
        ));
    }

    #[test]
    fn rotate_gap_example_pair() {
        let h = homogenize(&gap_example());
        let d = spectral_rank_one(&gap_x_star(), 1e-5).unwrap();
        assert_eq!(d.len(), 2);
        let before = d.form_values(&h.m1);
        assert!((before[0].abs() - 7.3247).abs() < 1e-3 && before[0] * before[1] < 0.0);
        let (u, v) = rotate_pair(&d.vectors[0], &d.vectors[1], &h.m1).unwrap();
        assert!(h.m1.quad_form(&u).abs() < 1e-5);
        assert!(h.m1.quad_form(&v).abs() < 1e-5);
        let (a, b) = (h.m2.quad_form(&u), h.m2.quad_form(&v));
        assert!((a.abs() - 15.148).abs() < 1e-2 && a * b < 0.0, "{a} {b}");
    }

    #[test]
    fn balanced_examples() {
        let g = SymMatrix::from_diagonal(&[1.0, -1.0, 0.0]);
        let x = SymMatrix::outer(&[0.0, 0.0, 2.0]);
        let d = balanced_decomposition(&x, &g, BalanceMode::Zero, 1e-5).unwrap();
        assert_eq!(d.rotations, 0);
        assert_eq!(d.vectors, spectral_rank_one(&x, 1e-5).unwrap().vectors);

        let h = homogenize(&gap_example());
        let d = balanced_decomposition(&gap_x_star(), &h.m1, BalanceMode::Zero, 1e-5).unwrap();
        assert_eq!(d.len(), 2);
        for v in d.form_values(&h.m1) {
            assert!(v.abs() < 1e-5);
        }
        let m2 = d.form_values(&h.m2);
        assert!(m2[0] * m2[1] < -1e-10);

        let h = homogenize(&no_gap_example());
        let d = balanced_decomposition(&no_gap_x_star(), &h.m1, BalanceMode::Zero, 1e-5).unwrap();
        assert_eq!(d.len(), 1);
        assert!(d.form_values(&h.m1)[0].abs() < 1e-5);
    }

    #[test]
    fn balanced_rejects_and_stalls() {
        let g = SymMatrix::identity(2);
        let x = SymMatrix::identity(2);
        assert!(matches!(
            balanced_decomposition(&x, &g, BalanceMode::Zero, 1e-5),
            Err(Error::DecompositionPrecondition(_))
        ));
        let x = SymMatrix::from_diagonal(&[1.0, 1.0]);
        let g = SymMatrix::from_diagonal(&[1.0, -1.0]);
        let d = balanced_decomposition(&x, &g, BalanceMode::Nonpositive, 1e-5).unwrap();
        assert!(d.form_values(&g).iter().all(|&v| v < 1e-5));
    }

    #[test]
    fn nonpositive_mode_moves_positive_terms() {
        let g = SymMatrix::from_diagonal(&[1.0, -3.0, 0.5]);
        let x = SymMatrix::from_diagonal(&[1.0, 1.0, 1.0]);
        let d = balanced_decomposition(&x, &g, BalanceMode::Nonpositive, 1e-5).unwrap();
        assert!(d.form_values(&g).iter().all(|&v| v < 1e-5), "{:?}", d.form_values(&g));
        assert!(d.reconstruction_residual < 1e-12);
    }

    #[test]
    fn joint_zero_trivial_and_error_path() {
        let x = SymMatrix::from_diagonal(&[4.0, 1.0, 0.0]);
        let z = SymMatrix::zeros(3);
        let v = joint_zero_vector(&x, &z, &z, 1e-5).unwrap();
        assert!(norm(&v) > 0.0);

        let x = SymMatrix::identity(2);
        let m1 = SymMatrix::from_diagonal(&[1.0, -1.0]);
        let m2 = SymMatrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        assert!(matches!(
            joint_zero_vector(&x, &m1, &m2, 1e-5),
            Err(Error::NoCommonIsotropicVector { .. })
        ));
    }

    #[test]
    fn joint_zero_rank_three() {
        // Forms with zero trace on the identity, both indefinite.
        let x = SymMatrix::identity(3);
        let m1 = SymMatrix::from_diagonal(&[1.0, -1.0, 0.0]);
        let m2 = SymMatrix::from_rows(&[
            vec![0.0, 0.0, 1.0],
            vec![0.0, 1.0, 0.0],
            vec![1.0, 0.0, -1.0],
        ])
        .unwrap();
        let v = joint_zero_vector(&x, &m1, &m2, 1e-5).unwrap();
        assert!(m1.quad_form(&v).abs() < 1e-5 && m2.quad_form(&v).abs() < 1e-5);
        assert!((norm(&v) - 1.0).abs() < 1e-9);
    }

    fn vec_strategy(len: usize) -> impl Strategy<Value = Vec<f64>> {
        proptest::collection::vec(-3.0f64..3.0, len)
    }

    fn sym_strategy(dim: usize) -> impl Strategy<Value = SymMatrix> {
        proptest::collection::vec(-3.0f64..3.0, dim * (dim + 1) / 2).prop_map(move |e| {
            let mut it = e.into_iter();
            SymMatrix::from_upper_fn(dim, |_, _| it.next().unwrap())
        })
    }

    fn with_opposite_signs() -> impl Strategy<Value = (Vec<f64>, Vec<f64>, SymMatrix)> {
        (2usize..6)
            .prop_flat_map(|d| (vec_strategy(d), vec_strategy(d), sym_strategy(d)))
            .prop_filter("opposite signs", |(p, q, g)| g.quad_form(p) * g.quad_form(q) < -1e-6)
    }

    proptest! {
        #[test]
        fn rotation_preserves_pair_and_zeroes_first((p, q, g) in with_opposite_signs()) {
            let (u, v) = rotate_pair(&p, &q, &g).unwrap();
            let before = SymMatrix::outer(&p).add_scaled(1.0, &SymMatrix::outer(&q));
            let after = SymMatrix::outer(&u).add_scaled(1.0, &SymMatrix::outer(&v));
            let scale = 1.0 + before.max_abs() * (1.0 + g.max_abs());
            prop_assert!(after.sub(&before).max_abs() <= 1e-10 * scale);
            prop_assert!(g.quad_form(&u).abs() <= 1e-12 * scale);
        }

        #[test]
        fn balanced_keeps_sum_and_meets_target(
            (vs, g) in (3usize..6).prop_flat_map(|d| (
                proptest::collection::vec(vec_strategy(d), 2..=3),
                sym_strategy(d),
            ))
        ) {
            let dim = g.dim();
            let x = SymMatrix::sum_of_outer(dim, &vs);
            let r = numerical_rank(&x, 1e-5).unwrap();
            let d = balanced_decomposition(&x, &g, BalanceMode::Nonpositive, 1e-5);
            let total = inner_unchecked(&g, &x);
            prop_assume!(total <= 0.0);
            let d = d.unwrap();
            prop_assert!(d.reconstruction_residual <= 1e-10 * (1.0 + x.max_abs()));
            prop_assert!(d.rotations <= r * r);
            prop_assert!(d.form_values(&g).iter().all(|&v| v < 1e-5));
        }

        #[test]
        fn joint_zero_lies_in_range(
            (vs, m1, m2) in (3usize..6).prop_flat_map(|d| (
                proptest::collection::vec(vec_strategy(d), 3),
                sym_strategy(d),
                sym_strategy(d),
            ))
        ) {
            let dim = m1.dim();
            let x = SymMatrix::sum_of_outer(dim, &vs);
            let spec = spectral_rank_one(&x, 1e-5).unwrap();
            prop_assume!(spec.len() == 3);
            // Make both forms vanish on X by subtracting a multiple of a PD matrix.
            let shift = |m: &SymMatrix| {
                let t = inner_unchecked(m, &x) / x.trace();
                m.add_scaled(-t, &SymMatrix::identity(dim))
            };
            let (m1, m2) = (shift(&m1), shift(&m2));
            if let Ok(v) = joint_zero_vector(&x, &m1, &m2, 1e-5) {
                prop_assert!(m1.quad_form(&v).abs() < 1e-5 && m2.quad_form(&v).abs() < 1e-5);
                // Projection onto the orthogonal complement of the range.
                let eig = eigendecompose(&x).unwrap();
                let mut residual = v.clone();
                for k in 0..3 {
                    let q = eig.eigenvector(k);
                    let c = dot(&q, &v);
                    residual.iter_mut().zip(&q).for_each(|(r, qi)| *r -= c * qi);
                }
                prop_assert!(norm(&residual) <= 1e-8);
                let rest = x.sub(&SymMatrix::outer(&v));
                prop_assert!(eigendecompose(&rest).unwrap().min_eigenvalue() > -1e-8);
            }
        }
    }
}
