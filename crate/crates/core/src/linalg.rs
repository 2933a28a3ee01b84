//! Small dense linear algebra on row-major `Vec<Vec<f64>>` matrices.
//!
//! Everything here targets the desk-scale sizes used by n-norms (n ≤ d ≤ 8),
//! so clarity wins over blocking or SIMD.

use std::cmp::Ordering;

use crate::error::{Error, Result};

fn check_square(m: &[Vec<f64>]) -> Result<usize> {
    let n = m.len();
    if let Some((i, row)) = m.iter().enumerate().find(|(_, r)| r.len() != n) {
        return Err(Error::Shape(format!(
            "row {i} has {} entries in a {n}-row matrix",
            row.len()
        )));
    }
    Ok(n)
}

/// Pivot preference: larger magnitude first, then the row contents, so the
/// choice never depends on where a row sits in the matrix.
fn pivot_order(a: &[f64], b: &[f64], col: usize) -> Ordering {
    a[col]
        .abs()
        .total_cmp(&b[col].abs())
        .then_with(|| {
            a[col..]
                .iter()
                .zip(&b[col..])
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| o.is_ne())
                .unwrap_or(Ordering::Equal)
        })
}

/// Determinant by LU elimination with partial pivoting.
///
/// Pivot ties are broken by row contents rather than row position. The
/// elimination is therefore equivariant under row permutations, which makes
/// the result exactly alternating: permuting rows changes only the sign.
pub fn det(m: &[Vec<f64>]) -> Result<f64> {
    let n = check_square(m)?;
    let mut a: Vec<Vec<f64>> = m.to_vec();
    Ok(det_in_place(&mut a, n))
}

pub(crate) fn det_in_place(a: &mut [Vec<f64>], n: usize) -> f64 {
    if n == 0 {
        return 1.0;
    }
    let mut sign = 1.0;
    let mut acc = 1.0;
    for k in 0..n {
        let mut best = k;
        for r in k + 1..n {
            if pivot_order(&a[r], &a[best], k).is_gt() {
                best = r;
            }
        }
        if best != k {
            a.swap(best, k);
            sign = -sign;
        }
        let pivot = a[k][k];
        if pivot == 0.0 {
            return 0.0;
        }
        acc *= pivot;
        let (head, tail) = a.split_at_mut(k + 1);
        let prow = &head[k];
        for row in tail.iter_mut() {
            let l = row[k] / pivot;
            if l != 0.0 {
                for c in k + 1..n {
                    row[c] -= l * prow[c];
                }
            }
            row[k] = 0.0;
        }
    }
    sign * acc
}

/// Solves `a · x = b` by Gaussian elimination with partial pivoting.
/// Returns `None` when a zero pivot is hit.
pub fn solve(a: &[Vec<f64>], b: &[f64]) -> Result<Option<Vec<f64>>> {
    let n = check_square(a)?;
    if b.len() != n {
        return Err(Error::Dimension {
            expected: n,
            found: b.len(),
        });
    }
    let mut m: Vec<Vec<f64>> = a
        .iter()
        .zip(b)
        .map(|(row, &rhs)| {
            let mut r = row.clone();
            r.push(rhs);
            r
        })
        .collect();
    for k in 0..n {
        let best = (k..n)
            .max_by(|&i, &j| m[i][k].abs().total_cmp(&m[j][k].abs()).then(j.cmp(&i)))
            .unwrap();
        m.swap(k, best);
        let pivot = m[k][k];
        if pivot == 0.0 {
            return Ok(None);
        }
        let (head, tail) = m.split_at_mut(k + 1);
        let prow = &head[k];
        for row in tail.iter_mut() {
            let l = row[k] / pivot;
            for c in k..=n {
                row[c] -= l * prow[c];
            }
        }
    }
    let mut x = vec![0.0; n];
    for k in (0..n).rev() {
        let s: f64 = (k + 1..n).map(|c| m[k][c] * x[c]).sum();
        x[k] = (m[k][n] - s) / m[k][k];
    }
    Ok(Some(x))
}

/// [`solve`] followed by two steps of iterative refinement with residuals
/// accumulated in double-double arithmetic.
pub fn solve_refined(a: &[Vec<f64>], b: &[f64]) -> Result<Option<Vec<f64>>> {
    let Some(mut x) = solve(a, b)? else {
        return Ok(None);
    };
    for _ in 0..2 {
        let r: Vec<f64> = a
            .iter()
            .zip(b)
            .map(|(row, &bi)| {
                let acc = row
                    .iter()
                    .zip(&x)
                    .fold(Dd::from_f64(bi), |acc, (&aij, &xj)| {
                        acc.add(Dd::from_f64(aij).mul(Dd::from_f64(-xj)))
                    });
                acc.hi + acc.lo
            })
            .collect();
        match solve(a, &r)? {
            Some(dx) => x.iter_mut().zip(dx).for_each(|(xi, d)| *xi += d),
            None => break,
        }
    }
    Ok(Some(x))
}

/// The matrix with row `r` and column `c` removed.
pub fn minor(m: &[Vec<f64>], r: usize, c: usize) -> Vec<Vec<f64>> {
    m.iter()
        .enumerate()
        .filter(|&(i, _)| i != r)
        .map(|(_, row)| {
            row.iter()
                .enumerate()
                .filter(|&(j, _)| j != c)
                .map(|(_, &v)| v)
                .collect()
        })
        .collect()
}

/// Cofactor matrix `C[i][j] = (-1)^(i+j) det(minor(i, j))`.
pub fn cofactors(m: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let n = check_square(m)?;
    let mut out = vec![vec![0.0; n]; n];
    for (i, row) in out.iter_mut().enumerate() {
        for (j, c) in row.iter_mut().enumerate() {
            let mut sub = minor(m, i, j);
            let s = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
            *c = s * det_in_place(&mut sub, n - 1);
        }
    }
    Ok(out)
}

/// Determinant by recursive cofactor expansion along the first row.
/// Exponential cost; meant for matrices of size four or less.
pub fn laplace_det(m: &[Vec<f64>]) -> Result<f64> {
    let n = check_square(m)?;
    Ok(laplace(m, n))
}

fn laplace(m: &[Vec<f64>], n: usize) -> f64 {
    match n {
        0 => 1.0,
        1 => m[0][0],
        2 => m[0][0] * m[1][1] - m[0][1] * m[1][0],
        _ => (0..n)
            .map(|j| {
                let s = if j % 2 == 0 { 1.0 } else { -1.0 };
                s * m[0][j] * laplace(&minor(m, 0, j), n - 1)
            })
            .sum(),
    }
}

/// Double-double number `hi + lo` with `|lo| ≤ ulp(hi)/2`.
#[derive(Debug, Clone, Copy)]
struct Dd {
    hi: f64,
    lo: f64,
}

impl Dd {
    fn from_f64(v: f64) -> Self {
        Dd { hi: v, lo: 0.0 }
    }

    fn renorm(s: f64, e: f64) -> Self {
        let hi = s + e;
        Dd {
            hi,
            lo: e - (hi - s),
        }
    }

    fn add(self, o: Dd) -> Dd {
        let s = self.hi + o.hi;
        let bb = s - self.hi;
        let err = (self.hi - (s - bb)) + (o.hi - bb);
        Dd::renorm(s, err + self.lo + o.lo)
    }

    fn mul(self, o: Dd) -> Dd {
        let p = self.hi * o.hi;
        let err = self.hi.mul_add(o.hi, -p);
        Dd::renorm(p, err + self.hi * o.lo + self.lo * o.hi)
    }

    fn neg(self) -> Dd {
        Dd {
            hi: -self.hi,
            lo: -self.lo,
        }
    }
}

fn laplace_dd(m: &[Vec<Dd>]) -> Dd {
    match m.len() {
        0 => Dd::from_f64(1.0),
        1 => m[0][0],
        n => (0..n).fold(Dd::from_f64(0.0), |acc, j| {
            let sub: Vec<Vec<Dd>> = m[1..]
                .iter()
                .map(|row| {
                    row.iter()
                        .enumerate()
                        .filter(|&(c, _)| c != j)
                        .map(|(_, &v)| v)
                        .collect()
                })
                .collect();
            let term = m[0][j].mul(laplace_dd(&sub));
            acc.add(if j % 2 == 0 { term } else { term.neg() })
        }),
    }
}

/// Cofactor expansion carried out in double-double arithmetic, so the result
/// is the correctly rounded determinant of the given entries up to a few
/// units in the last place, however much the expansion cancels.
/// Exponential cost; meant for matrices of size four or less.
pub fn accurate_det(m: &[Vec<f64>]) -> Result<f64> {
    check_square(m)?;
    let dd: Vec<Vec<Dd>> = m
        .iter()
        .map(|r| r.iter().map(|&v| Dd::from_f64(v)).collect())
        .collect();
    let r = laplace_dd(&dd);
    Ok(r.hi + r.lo)
}

/// Numerical rank of the row family, by Gaussian elimination with complete
/// pivoting on rows rescaled to unit Euclidean length. A pivot below `tol`
/// ends the elimination.
pub fn numerical_rank(rows: &[Vec<f64>], tol: f64) -> usize {
    let mut a: Vec<Vec<f64>> = rows
        .iter()
        .map(|r| {
            let s = r.iter().map(|v| v * v).sum::<f64>().sqrt();
            if s > 0.0 {
                r.iter().map(|v| v / s).collect()
            } else {
                r.clone()
            }
        })
        .collect();
    let n = a.len();
    let d = a.first().map_or(0, Vec::len);
    let mut rank = 0;
    for k in 0..n.min(d) {
        let mut best = (k, k, 0.0f64);
        for (i, row) in a.iter().enumerate().skip(k) {
            for (j, v) in row.iter().enumerate().skip(k) {
                if v.abs() > best.2 {
                    best = (i, j, v.abs());
                }
            }
        }
        if best.2 < tol {
            break;
        }
        a.swap(k, best.0);
        for row in a.iter_mut() {
            row.swap(k, best.1);
        }
        let (head, tail) = a.split_at_mut(k + 1);
        let prow = &head[k];
        for row in tail.iter_mut() {
            let l = row[k] / prow[k];
            for c in k..d {
                row[c] -= l * prow[c];
            }
        }
        rank += 1;
    }
    rank
}
