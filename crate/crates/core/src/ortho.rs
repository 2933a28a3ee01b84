//! Gram machinery for the semi-inner product: Gram matrices, projections onto
//! finite spans, and left g-orthogonal sequences.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::sip::g;
use crate::spaces::{common_space, PExponent, Vector};

/// Relative singularity guard: a family is treated as dependent when
/// `|Γ| < DEPENDENCE_TOL · Π ‖y_i‖²`.
pub const DEPENDENCE_TOL: f64 = 1e-12;

/// Pivot threshold for the linear-independence check of an input family.
pub const INDEPENDENCE_TOL: f64 = 1e-10;

/// `entries[i][j] = g(y_i, y_j)`. Not symmetric unless `p = 2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GramMatrix {
    pub entries: Vec<Vec<f64>>,
    pub family: Vec<Vector>,
    #[serde(skip)]
    exponent: Option<PExponent>,
}

impl GramMatrix {
    pub fn exponent(&self) -> Option<PExponent> {
        self.exponent
    }

    pub fn determinant(&self) -> f64 {
        linalg::det(&self.entries).expect("Gram matrices are square")
    }

    fn dependence_threshold(&self) -> f64 {
        DEPENDENCE_TOL * self.family.iter().map(|y| y.norm().powi(2)).product::<f64>()
    }
}

pub fn gram_matrix(ys: &[Vector]) -> Result<GramMatrix> {
    let space = common_space(ys)?;
    let entries = ys
        .iter()
        .map(|yi| ys.iter().map(|yj| g(yi, yj)).collect())
        .collect();
    Ok(GramMatrix {
        entries,
        family: ys.to_vec(),
        exponent: space.map(|s| s.exponent()),
    })
}

/// `Γ(y_1, …, y_n) = det[g(y_i, y_j)]`.
pub fn gram_determinant(ys: &[Vector]) -> Result<f64> {
    Ok(gram_matrix(ys)?.determinant())
}

fn check_target(x: &Vector, ys: &[Vector]) -> Result<()> {
    if let Some(y) = ys.first() {
        if x.dim() != y.dim() {
            return Err(Error::Dimension {
                expected: y.dim(),
                found: x.dim(),
            });
        }
        if x.space() != y.space() {
            return Err(Error::MixedSpaces);
        }
    }
    Ok(())
}

/// Coefficients `c` of the projection `x_Y = Σ c_j y_j`, together with `Γ(Y)`.
///
/// `c` solves `[g(y_i, y_j)] c = [g(y_i, x)]`, i.e. `g(y_i, x - x_Y) = 0`
/// for every `i`.
pub fn projection_coefficients(x: &Vector, ys: &[Vector]) -> Result<(Vec<f64>, f64)> {
    check_target(x, ys)?;
    let gram = gram_matrix(ys)?;
    let gamma = gram.determinant();
    if ys.is_empty() {
        return Ok((Vec::new(), gamma));
    }
    if !(gamma.abs() >= gram.dependence_threshold()) {
        return Err(Error::DependentFamily { gram_det: gamma });
    }
    let rhs: Vec<f64> = ys.iter().map(|y| g(y, x)).collect();
    let c = linalg::solve_refined(&gram.entries, &rhs)?.ok_or(Error::DependentFamily { gram_det: gamma })?;
    Ok((c, gamma))
}

fn combine(x: &Vector, ys: &[Vector], c: &[f64]) -> Vector {
    ys.iter()
        .zip(c)
        .fold(x.space().zero(), |acc, (y, &cj)| acc.axpy(cj, y))
}

/// Gram-Schmidt projection `x_Y` of `x` onto `span Y`, by linear solve.
pub fn project(x: &Vector, ys: &[Vector]) -> Result<Vector> {
    let (c, _) = projection_coefficients(x, ys)?;
    Ok(combine(x, ys, &c))
}

/// Largest family accepted by [`bordered_determinant_project`].
pub const BORDERED_MAX: usize = 3;

/// `x_Y = -(1/Γ) det B`, where `B` is the bordered matrix with first row
/// `(0, y_1, …, y_n)` and rows `(g(y_i, x), g(y_i, y_1), …, g(y_i, y_n))`.
///
/// The vector-valued first row is expanded formally by cofactors, each minor
/// evaluated by cofactor expansion in extended precision. Kept as an oracle
/// for [`project`].
pub fn bordered_determinant_project(x: &Vector, ys: &[Vector]) -> Result<Vector> {
    if ys.len() > BORDERED_MAX {
        return Err(Error::UnsupportedSize(format!(
            "bordered determinant projection supports at most {BORDERED_MAX} vectors, got {}",
            ys.len()
        )));
    }
    check_target(x, ys)?;
    let gram = gram_matrix(ys)?;
    let gamma = linalg::accurate_det(&gram.entries)?;
    if ys.is_empty() {
        return Ok(x.space().zero());
    }
    if !(gamma.abs() >= gram.dependence_threshold()) {
        return Err(Error::DependentFamily { gram_det: gamma });
    }
    let n = ys.len();
    // numeric rows of B, columns 0..=n
    let lower: Vec<Vec<f64>> = ys
        .iter()
        .zip(&gram.entries)
        .map(|(y, row)| {
            let mut r = Vec::with_capacity(n + 1);
            r.push(g(y, x));
            r.extend_from_slice(row);
            r
        })
        .collect();
    let mut acc = x.space().zero();
    for j in 1..=n {
        let sub: Vec<Vec<f64>> = lower
            .iter()
            .map(|r| {
                r.iter()
                    .enumerate()
                    .filter(|&(c, _)| c != j)
                    .map(|(_, &v)| v)
                    .collect()
            })
            .collect();
        let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
        let cofactor = sign * linalg::accurate_det(&sub)?;
        acc = acc.axpy(cofactor, &ys[j - 1]);
    }
    Ok(acc.scale(-1.0 / gamma))
}

/// The left g-orthogonal sequence of an independent family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrthogonalizationResult {
    pub originals: Vec<Vector>,
    pub orthogonalized: Vec<Vector>,
    /// Step `i` holds the coefficients of `(x_i)_{S_{i-1}}` with respect to
    /// `x_1°, …, x_{i-1}°`; step 0 is empty.
    pub coefficients: Vec<Vec<f64>>,
    /// `Γ(x_1°, …, x_{i-1}°)` for each step `i ≥ 1`.
    pub step_gram_dets: Vec<f64>,
}

impl OrthogonalizationResult {
    /// `Π ‖x_i°‖_p`.
    pub fn norm_product(&self) -> f64 {
        self.orthogonalized.iter().map(Vector::norm).product()
    }
}

/// True when the vectors are linearly independent at `INDEPENDENCE_TOL`.
pub fn is_independent(xs: &[Vector], tol: f64) -> bool {
    let rows: Vec<Vec<f64>> = xs.iter().map(|x| x.coords().to_vec()).collect();
    linalg::numerical_rank(&rows, tol) == xs.len()
}

/// `x_1° = x_1`, `x_i° = x_i - (x_i)_{S_{i-1}}`.
///
/// Each projection is taken against the already orthogonalized predecessors
/// `x_1°, …, x_{i-1}°`. They span the same `S_{i-1}`, and because `g` is
/// linear only in its second argument this is the choice that yields
/// `g(x_i°, x_j°) = 0` for all `i < j`. It also makes every step Gram matrix
/// lower triangular with diagonal `‖x_k°‖²`, hence nonsingular.
pub fn left_g_orthogonalize(xs: &[Vector]) -> Result<OrthogonalizationResult> {
    common_space(xs)?;
    if !is_independent(xs, INDEPENDENCE_TOL) {
        return Err(Error::DependentFamily { gram_det: 0.0 });
    }
    let mut orthogonalized: Vec<Vector> = Vec::with_capacity(xs.len());
    let mut coefficients = Vec::with_capacity(xs.len());
    let mut step_gram_dets = Vec::with_capacity(xs.len());
    for x in xs {
        if orthogonalized.is_empty() {
            orthogonalized.push(x.clone());
            coefficients.push(Vec::new());
            continue;
        }
        let (c, gamma) = projection_coefficients(x, &orthogonalized)?;
        let next = x.sub(&combine(x, &orthogonalized, &c));
        orthogonalized.push(next);
        coefficients.push(c);
        step_gram_dets.push(gamma);
    }
    Ok(OrthogonalizationResult {
        originals: xs.to_vec(),
        orthogonalized,
        coefficients,
        step_gram_dets,
    })
}
