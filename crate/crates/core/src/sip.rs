//! The semi-inner product `g(x, y) = (‖x‖/2)(τ₋(x,y) + τ₊(x,y))` on l^p.
//!
//! On l^p the one-sided derivatives `τ±` average to a linear form in `y`, so
//! [`g`] uses the closed form
//!
//! ```text
//! g(x, y) = ‖x‖^(2-p) Σ_k |x_k|^(p-1) sgn(x_k) y_k      (p > 1)
//! g(x, y) = ‖x‖₁ Σ_{x_k ≠ 0} sgn(x_k) y_k                (p = 1)
//! ```
//!
//! while [`tau`] and [`g_numeric`] recompute the same quantity from difference
//! quotients of the norm. The numeric route exists to cross-check the closed
//! form and is not used by the other modules.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spaces::{lp_norm, sgn, DualFunctional, Vector};

/// One-sided directional derivatives of `t ↦ ‖x + t y‖` at `t = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TauPair {
    pub tau_minus: f64,
    pub tau_plus: f64,
    /// `(signed step, difference quotient)` for every evaluated step.
    pub step_trace: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SipMethod {
    ClosedForm,
    Numeric,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SipConfig {
    pub method: SipMethod,
    pub steps: Vec<f64>,
    pub extrapolation_order: usize,
}

impl Default for SipConfig {
    fn default() -> Self {
        Self {
            method: SipMethod::ClosedForm,
            steps: vec![1e-3, 1e-4, 1e-5],
            extrapolation_order: 2,
        }
    }
}

impl SipConfig {
    pub fn validate(&self) -> Result<()> {
        if self.steps.is_empty() {
            return Err(Error::Config("at least one step is required".into()));
        }
        if self.steps.iter().any(|&h| !(h > 1e-9) || !h.is_finite()) {
            return Err(Error::Config("steps must be finite and > 1e-9".into()));
        }
        if self.steps.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::Config("steps must be strictly decreasing".into()));
        }
        Ok(())
    }
}

fn assert_same_dim(x: &Vector, y: &Vector) {
    assert_eq!(
        x.dim(),
        y.dim(),
        "semi-inner product of vectors with different dimensions"
    );
}

/// Neville extrapolation of the samples `(h_i, q_i)` to `h = 0`.
fn extrapolate_to_zero(samples: &[(f64, f64)]) -> f64 {
    let mut t: Vec<f64> = samples.iter().map(|s| s.1).collect();
    let h: Vec<f64> = samples.iter().map(|s| s.0).collect();
    let m = t.len();
    for level in 1..m {
        for i in 0..m - level {
            let (hi, hj) = (h[i], h[i + level]);
            t[i] = (hj * t[i] - hi * t[i + 1]) / (hj - hi);
        }
    }
    t[0]
}

/// Richardson-extrapolated one-sided difference quotients.
///
/// Steps are shrunk when some coordinate of `x` is small relative to the
/// matching coordinate of `y`: the quotient is only a polynomial in `h`
/// while no coordinate of `x + h y` changes sign.
pub fn tau(x: &Vector, y: &Vector, cfg: &SipConfig) -> Result<TauPair> {
    cfg.validate()?;
    assert_same_dim(x, y);
    if x.is_zero() {
        return Err(Error::ZeroVector);
    }
    let p = x.exponent();
    let nx = x.norm();
    let radius = x
        .coords()
        .iter()
        .zip(y.coords())
        .filter(|(a, b)| **a != 0.0 && **b != 0.0)
        .map(|(a, b)| (a / b).abs())
        .fold(f64::INFINITY, f64::min);
    let shrink = (0.1 * radius / cfg.steps[0]).min(1.0);
    let used = (cfg.extrapolation_order + 1).min(cfg.steps.len());
    let mut trace = Vec::with_capacity(2 * cfg.steps.len());
    let mut one_side = |dir: f64| {
        let samples: Vec<(f64, f64)> = cfg
            .steps
            .iter()
            .map(|&h0| {
                let h = h0 * shrink;
                let shifted: Vec<f64> = x
                    .coords()
                    .iter()
                    .zip(y.coords())
                    .map(|(a, b)| a + dir * h * b)
                    .collect();
                let q = (lp_norm(&shifted, p) - nx) / (dir * h);
                trace.push((dir * h, q));
                (h, q)
            })
            .collect();
        extrapolate_to_zero(&samples[..used])
    };
    let tau_minus = one_side(-1.0);
    let tau_plus = one_side(1.0);
    Ok(TauPair {
        tau_minus,
        tau_plus,
        step_trace: trace,
    })
}

/// Closed-form semi-inner product. `g(0, y) = 0`.
///
/// Panics if `x` and `y` have different dimensions.
pub fn g(x: &Vector, y: &Vector) -> f64 {
    assert_same_dim(x, y);
    let p = x.exponent();
    let nx = x.norm();
    if nx == 0.0 {
        return 0.0;
    }
    let pairs = x.coords().iter().zip(y.coords());
    if p.is_one() {
        let s: f64 = pairs
            .filter(|(a, _)| **a != 0.0)
            .map(|(a, b)| sgn(*a) * b)
            .sum();
        return nx * s;
    }
    let e = p.p() - 1.0;
    let s: f64 = pairs.map(|(a, b)| a.abs().powf(e) * sgn(*a) * b).sum();
    nx.powf(2.0 - p.p()) * s
}

/// `g` recomputed as the average of the numeric one-sided derivatives.
pub fn g_numeric(x: &Vector, y: &Vector, cfg: &SipConfig) -> Result<f64> {
    let t = tau(x, y, cfg)?;
    Ok(0.5 * x.norm() * (t.tau_minus + t.tau_plus))
}

/// Evaluates `g` with the method selected in `cfg`.
pub fn g_with(x: &Vector, y: &Vector, cfg: &SipConfig) -> Result<f64> {
    match cfg.method {
        SipMethod::ClosedForm => Ok(g(x, y)),
        SipMethod::Numeric if x.is_zero() => Ok(0.0),
        SipMethod::Numeric => g_numeric(x, y, cfg),
    }
}

/// Coefficients `c` with `g(x, y) = Σ c_k y_k`.
pub fn g_coefficients(x: &Vector) -> Vec<f64> {
    let d = x.dim();
    (0..d).map(|k| g(x, &x.space().basis(k))).collect()
}

/// The bounded functional `y ↦ g(x, y)/‖x‖`, of dual norm at most one.
pub fn g_functional(x: &Vector) -> Result<DualFunctional> {
    let nx = x.norm();
    if nx == 0.0 {
        return Err(Error::ZeroVector);
    }
    let coeffs = g_coefficients(x).into_iter().map(|c| c / nx).collect();
    DualFunctional::new(*x.space(), coeffs)
}

/// `x ⊥_g y`, i.e. `|g(x, y)| ≤ tol (1 + ‖x‖‖y‖)`. Not symmetric for `p ≠ 2`.
pub fn is_g_orthogonal(x: &Vector, y: &Vector, tol: f64) -> bool {
    g(x, y).abs() <= tol * (1.0 + x.norm() * y.norm())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub passed: bool,
    /// Scaled residual; `passed` iff it is at most the tolerance.
    pub residual: f64,
}

impl Check {
    fn new(raw: f64, scale: f64, tol: f64) -> Self {
        let residual = raw / (1.0 + scale);
        Check {
            passed: residual <= tol,
            residual,
        }
    }
}

/// Outcome of the semi-inner product identities on one instance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GPropertyReport {
    /// `g(x, x) = ‖x‖²`
    pub g1: Check,
    /// `g(αx, βy) = αβ g(x, y)`
    pub g2: Check,
    /// `g(x, x + y) = ‖x‖² + g(x, y)`
    pub g3: Check,
    /// `|g(x, y)| ≤ ‖x‖‖y‖`
    pub g4: Check,
    /// `g(x, αy + βy') = α g(x, y) + β g(x, y')`, with `y'` the cyclic
    /// shift of `y`.
    pub linearity: Check,
}

impl GPropertyReport {
    pub fn all_passed(&self) -> bool {
        self.checks().iter().all(|c| c.passed)
    }

    pub fn checks(&self) -> [Check; 5] {
        [self.g1, self.g2, self.g3, self.g4, self.linearity]
    }

    pub fn worst_residual(&self) -> f64 {
        self.checks().iter().fold(0.0, |m, c| m.max(c.residual))
    }
}

/// Checks (G1)–(G4) and linearity in `y` for the closed-form `g`.
pub fn check_g_properties(x: &Vector, y: &Vector, alpha: f64, beta: f64, tol: f64) -> GPropertyReport {
    check_g_properties_with(g, x, y, alpha, beta, tol)
}

/// Same checks against an arbitrary candidate for `g`.
pub fn check_g_properties_with<G>(
    gf: G,
    x: &Vector,
    y: &Vector,
    alpha: f64,
    beta: f64,
    tol: f64,
) -> GPropertyReport
where
    G: Fn(&Vector, &Vector) -> f64,
{
    assert_same_dim(x, y);
    let nx = x.norm();
    let ny = y.norm();
    let gxy = gf(x, y);

    let g1 = Check::new((gf(x, x) - nx * nx).abs(), nx * nx, tol);

    let g2 = Check::new(
        (gf(&x.scale(alpha), &y.scale(beta)) - alpha * beta * gxy).abs(),
        (alpha * beta).abs() * nx * ny,
        tol,
    );

    let g3 = Check::new(
        (gf(x, &x.add(y)) - nx * nx - gxy).abs(),
        nx * nx + nx * ny,
        tol,
    );

    let g4 = Check::new((gxy.abs() - nx * ny).max(0.0), nx * ny, tol);

    let mut shifted = y.coords().to_vec();
    shifted.rotate_left(1);
    let y2 = Vector::new(*y.space(), shifted).expect("rotation keeps the shape");
    let combo = y.scale(alpha).axpy(beta, &y2);
    let linearity = Check::new(
        (gf(x, &combo) - alpha * gxy - beta * gf(x, &y2)).abs(),
        (alpha.abs() * ny + beta.abs() * y2.norm()) * nx,
        tol,
    );

    GPropertyReport {
        g1,
        g2,
        g3,
        g4,
        linearity,
    }
}
