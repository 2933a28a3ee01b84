//! Multilinear n-functionals on l^p stored as dense coefficient tensors, the
//! curry/uncurry correspondence with operators into (n−1)-functionals, and
//! estimators for their norms.
//!
//! Coefficients are flat and row-major by slot: the last slot varies fastest.
//! Currying fixes the last slot, so `curry` and `uncurry` move the same
//! buffer and the round trip is exact.
//!
//! Two norms are estimated from below:
//!
//! ```text
//! ‖f‖_{n,1} = sup |f(x_1, …, x_n)| / (‖x_1‖ ⋯ ‖x_n‖)
//! ‖f‖_{n,n} = sup |f(x_1, …, x_n)| / ‖x_1, …, x_n‖_G
//! ```
//!
//! The second is finite only for antisymmetric `f`. Its denominator is exact
//! at `p = 2` and an estimate otherwise, which the result reports.

use rand::Rng;
use serde::de::{self, Deserializer};
use serde::ser::Serializer;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::nnorms::{gahler_n_norm_estimate, gahler_n_norm_euclidean, NNormConfig};
use crate::spaces::{
    derive_seed, dot, lp_norm, lq_norm, norming_point, random_tuple, rng, uniform_coords,
    Conditioning, DualFunctional, PExponent, Permutation, SpaceSpec, Vector,
};

/// Largest order accepted by [`antisymmetrize`] and [`det_functional`].
pub const MAX_ORDER: usize = 6;

/// Tuples whose n-norm falls below this are skipped by [`norm_nn`].
pub const DEGENERATE_DENOMINATOR: f64 = 1e-10;

/// Relative tolerance used by [`norm_nn`] to accept a functional as
/// antisymmetric.
pub const ANTISYMMETRY_TOL: f64 = 1e-9;

const ANTISYMMETRY_TRIALS: usize = 16;

#[derive(Debug, Clone, PartialEq)]
pub struct MultiFunctional {
    order: usize,
    space: SpaceSpec,
    coeffs: Vec<f64>,
}

fn contract_last(c: &[f64], d: usize, x: &[f64]) -> Vec<f64> {
    c.chunks_exact(d).map(|ch| dot(ch, x)).collect()
}

fn contract_first(c: &[f64], d: usize, x: &[f64]) -> Vec<f64> {
    let stride = c.len() / d;
    (0..stride)
        .map(|k| (0..d).map(|i| x[i] * c[i * stride + k]).sum())
        .collect()
}

fn multi_index(mut flat: usize, d: usize, n: usize) -> Vec<usize> {
    let mut idx = vec![0; n];
    for slot in (0..n).rev() {
        idx[slot] = flat % d;
        flat /= d;
    }
    idx
}

fn flat_index(idx: &[usize], d: usize) -> usize {
    idx.iter().fold(0, |acc, &i| acc * d + i)
}

impl MultiFunctional {
    pub fn new(space: SpaceSpec, order: usize, coeffs: Vec<f64>) -> Result<Self> {
        let expected = space.dim().pow(order as u32);
        if coeffs.len() != expected {
            return Err(Error::Shape(format!(
                "order-{order} tensor on dimension {} needs {expected} coefficients, got {}",
                space.dim(),
                coeffs.len()
            )));
        }
        if let Some(i) = coeffs.iter().position(|c| !c.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        Ok(Self { order, space, coeffs })
    }

    pub fn zero(space: SpaceSpec, order: usize) -> Self {
        Self {
            order,
            space,
            coeffs: vec![0.0; space.dim().pow(order as u32)],
        }
    }

    /// Tensor with `coeffs[j_1 … j_n] = entry(&[j_1, …, j_n])` (0-based).
    pub fn from_fn(space: SpaceSpec, order: usize, entry: impl Fn(&[usize]) -> f64) -> Result<Self> {
        let d = space.dim();
        let coeffs = (0..d.pow(order as u32))
            .map(|flat| entry(&multi_index(flat, d, order)))
            .collect();
        Self::new(space, order, coeffs)
    }

    /// The rank-one tensor `w_1 ⊗ ⋯ ⊗ w_n`.
    pub fn outer(space: SpaceSpec, factors: &[Vec<f64>]) -> Result<Self> {
        if let Some(f) = factors.iter().find(|f| f.len() != space.dim()) {
            return Err(Error::Dimension {
                expected: space.dim(),
                found: f.len(),
            });
        }
        Self::from_fn(space, factors.len(), |idx| {
            idx.iter().zip(factors).map(|(&j, w)| w[j]).product()
        })
    }

    /// Order-0 functional: a scalar.
    pub fn scalar(space: SpaceSpec, value: f64) -> Self {
        Self {
            order: 0,
            space,
            coeffs: vec![value],
        }
    }

    pub fn from_dual(w: &DualFunctional) -> Self {
        Self {
            order: 1,
            space: *w.space(),
            coeffs: w.coeffs().to_vec(),
        }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn space(&self) -> &SpaceSpec {
        &self.space
    }

    pub fn dim(&self) -> usize {
        self.space.dim()
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeff(&self, idx: &[usize]) -> f64 {
        self.coeffs[flat_index(idx, self.dim())]
    }

    /// The same coefficients viewed on l^p of the same dimension.
    pub fn with_exponent(&self, p: PExponent) -> Result<Self> {
        Ok(Self {
            space: SpaceSpec::with_exponent(self.dim(), p)?,
            ..self.clone()
        })
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|&c| c == 0.0)
    }

    pub fn frobenius_norm(&self) -> f64 {
        lp_norm(&self.coeffs, PExponent::new(2.0).expect("p = 2 is valid"))
    }

    fn check_tuple(&self, xs: &[Vector]) -> Result<()> {
        if xs.len() != self.order {
            return Err(Error::Shape(format!(
                "order-{} functional applied to {} vectors",
                self.order,
                xs.len()
            )));
        }
        if let Some(x) = xs.iter().find(|x| *x.space() != self.space) {
            return Err(Error::Shape(format!(
                "vector in l^{} of dimension {} for a functional on l^{} of dimension {}",
                x.exponent().p(),
                x.dim(),
                self.space.p(),
                self.dim()
            )));
        }
        Ok(())
    }

    /// `Σ coeffs[j_1 … j_n] x_1[j_1] ⋯ x_n[j_n]`.
    pub fn evaluate(&self, xs: &[Vector]) -> Result<f64> {
        self.check_tuple(xs)?;
        let rows: Vec<&[f64]> = xs.iter().map(Vector::coords).collect();
        Ok(self.eval_raw(&rows))
    }

    fn eval_raw(&self, xs: &[&[f64]]) -> f64 {
        let d = self.dim();
        let mut t = self.coeffs.clone();
        for x in xs.iter().rev() {
            t = contract_last(&t, d, x);
        }
        t[0]
    }

    /// Coefficients of the linear form `x_j ↦ f(x_1, …, x_j, …, x_n)` with the
    /// other slots held fixed.
    fn slot_form(&self, xs: &[&[f64]], j: usize) -> Vec<f64> {
        let d = self.dim();
        let mut t = self.coeffs.clone();
        for x in &xs[..j] {
            t = contract_first(&t, d, x);
        }
        for x in xs[j + 1..].iter().rev() {
            t = contract_last(&t, d, x);
        }
        t
    }

    fn check_compatible(&self, other: &Self) -> Result<()> {
        if self.order != other.order || self.space != other.space {
            return Err(Error::Shape(format!(
                "cannot combine an order-{} functional on l^{}(R^{}) with an order-{} functional on l^{}(R^{})",
                self.order,
                self.space.p(),
                self.dim(),
                other.order,
                other.space.p(),
                other.dim()
            )));
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_compatible(other)?;
        let coeffs = self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a + b).collect();
        Ok(Self { coeffs, ..self.clone() })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.scale(-1.0))
    }

    pub fn scale(&self, alpha: f64) -> Self {
        Self {
            coeffs: self.coeffs.iter().map(|c| alpha * c).collect(),
            ..self.clone()
        }
    }

    pub fn neg(&self) -> Self {
        self.scale(-1.0)
    }
}

/// `Alt(f)(x_1, …, x_n) = (1/n!) Σ_σ sgn(σ) f(x_σ(1), …, x_σ(n))`.
pub fn antisymmetrize(f: &MultiFunctional) -> Result<MultiFunctional> {
    let n = f.order;
    if n > MAX_ORDER {
        return Err(Error::UnsupportedSize(format!(
            "antisymmetrization is limited to order {MAX_ORDER}, got {n}"
        )));
    }
    let d = f.dim();
    let perms: Vec<(Permutation, f64)> = Permutation::all(n)
        .map(|s| {
            let sign = f64::from(s.sign());
            (s, sign)
        })
        .collect();
    let norm = perms.len() as f64;
    let mut coeffs = vec![0.0; f.coeffs.len()];
    let mut permuted = vec![0; n];
    for (flat, c) in coeffs.iter_mut().enumerate() {
        let idx = multi_index(flat, d, n);
        let mut acc = 0.0;
        for (sigma, sign) in &perms {
            for (i, slot) in permuted.iter_mut().enumerate() {
                *slot = idx[sigma.apply(i)];
            }
            acc += sign * f.coeffs[flat_index(&permuted, d)];
        }
        *c = acc / norm;
    }
    Ok(MultiFunctional { coeffs, ..f.clone() })
}

fn dependent_tuple(space: &SpaceSpec, n: usize, seed: u64) -> Vec<Vector> {
    if n == 1 {
        return vec![space.zero()];
    }
    let mut r = rng(derive_seed(seed, 0));
    let mut xs = random_tuple(space, n - 1, derive_seed(seed, 1), Conditioning::Generic);
    let combo = xs
        .iter()
        .fold(space.zero(), |acc, x| acc.axpy(r.gen_range(-1.0..=1.0), x));
    xs.insert(r.gen_range(0..n), combo);
    xs
}

/// Worst violation of antisymmetry over random tuples, relative to the
/// Cauchy-Schwarz scale `‖coeffs‖_F Π ‖x_i‖_2`.
///
/// Each trial compares `f(x)` with `−f(τx)` for a random transposition `τ`
/// and evaluates `f` on a random dependent tuple.
pub fn antisymmetry_violation(f: &MultiFunctional, trials: usize, seed: u64) -> f64 {
    let n = f.order;
    let frob = f.frobenius_norm();
    if n < 2 || frob == 0.0 {
        return 0.0;
    }
    let scale = |xs: &[Vector]| -> f64 {
        frob * xs
            .iter()
            .map(|x| lp_norm(x.coords(), PExponent::new(2.0).expect("valid")))
            .product::<f64>()
    };
    let mut worst: f64 = 0.0;
    for t in 0..trials {
        let s = derive_seed(seed, t as u64);
        let xs = random_tuple(&f.space, n, derive_seed(s, 0), Conditioning::Generic);
        let mut r = rng(derive_seed(s, 1));
        let i = r.gen_range(0..n);
        let j = (i + r.gen_range(1..n)) % n;
        let mut swapped = xs.clone();
        swapped.swap(i, j);
        let a = f.evaluate(&xs).expect("tuple built for f");
        let b = f.evaluate(&swapped).expect("tuple built for f");
        worst = worst.max((a + b).abs() / scale(&xs));

        let dep = dependent_tuple(&f.space, n, derive_seed(s, 2));
        let sc = scale(&dep);
        if sc > 0.0 {
            worst = worst.max(f.evaluate(&dep).expect("tuple built for f").abs() / sc);
        }
    }
    worst
}

/// Randomized antisymmetry test: transpositions flip the sign and dependent
/// tuples map to zero, both within `tol` relative to `‖coeffs‖_F Π ‖x_i‖_2`.
pub fn is_antisymmetric(f: &MultiFunctional, trials: usize, seed: u64, tol: f64) -> bool {
    antisymmetry_violation(f, trials, seed) <= tol
}

/// The determinant as an order-`d` functional on `R^d` (with `p = 2`).
pub fn det_functional(d: usize) -> Result<MultiFunctional> {
    det_functional_in(d, 2.0)
}

/// The determinant functional on l^p of dimension `d`.
pub fn det_functional_in(d: usize, p: f64) -> Result<MultiFunctional> {
    if !(1..=MAX_ORDER).contains(&d) {
        return Err(Error::Range(format!(
            "determinant functional needs 1 ≤ d ≤ {MAX_ORDER}, got {d}"
        )));
    }
    let space = SpaceSpec::new(d, p)?;
    MultiFunctional::from_fn(space, d, |idx| {
        let mut seen = vec![false; d];
        for &j in idx {
            if seen[j] {
                return 0.0;
            }
            seen[j] = true;
        }
        f64::from(Permutation::new(idx.to_vec()).expect("distinct indices").sign())
    })
}

fn nest(coeffs: &[f64], d: usize, order: usize) -> Value {
    if order == 0 {
        return Value::from(coeffs[0]);
    }
    let stride = coeffs.len() / d;
    Value::Array(
        coeffs
            .chunks_exact(stride)
            .map(|ch| nest(ch, d, order - 1))
            .collect(),
    )
}

fn flatten(v: &Value, d: usize, order: usize, out: &mut Vec<f64>) -> std::result::Result<(), String> {
    if order == 0 {
        return match v.as_f64() {
            Some(x) => {
                out.push(x);
                Ok(())
            }
            None => Err(format!("expected a number, found {v}")),
        };
    }
    match v.as_array() {
        Some(items) if items.len() == d => items.iter().try_for_each(|it| flatten(it, d, order - 1, out)),
        Some(items) => Err(format!("expected {d} entries, found {}", items.len())),
        None => Err(format!("expected an array, found {v}")),
    }
}

#[derive(Serialize, Deserialize)]
struct TensorRepr {
    order: usize,
    space: SpaceSpec,
    coeffs: Value,
}

impl Serialize for MultiFunctional {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        TensorRepr {
            order: self.order,
            space: self.space,
            coeffs: nest(&self.coeffs, self.dim(), self.order),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for MultiFunctional {
    fn deserialize<D: Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let repr = TensorRepr::deserialize(de)?;
        let mut flat = Vec::new();
        flatten(&repr.coeffs, repr.space.dim(), repr.order, &mut flat).map_err(de::Error::custom)?;
        MultiFunctional::new(repr.space, repr.order, flat).map_err(de::Error::custom)
    }
}

/// The operator `u_f : z ↦ f(·, …, ·, z)` into (n−1)-functionals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurriedOperator {
    inner: MultiFunctional,
}

impl CurriedOperator {
    /// The operator with `u(e_k) = images[k]`, extended linearly.
    pub fn from_images(images: &[MultiFunctional]) -> Result<Self> {
        let first = images
            .first()
            .ok_or_else(|| Error::Shape("operator needs one image per basis vector".into()))?;
        let space = first.space;
        if images.len() != space.dim() {
            return Err(Error::Shape(format!(
                "{} images for dimension {}",
                images.len(),
                space.dim()
            )));
        }
        for h in images {
            first.check_compatible(h)?;
        }
        let d = space.dim();
        let stride = first.coeffs.len();
        let mut coeffs = vec![0.0; stride * d];
        for (k, h) in images.iter().enumerate() {
            for (m, c) in h.coeffs.iter().enumerate() {
                coeffs[m * d + k] = *c;
            }
        }
        Ok(Self {
            inner: MultiFunctional::new(space, first.order + 1, coeffs)?,
        })
    }

    pub fn space(&self) -> &SpaceSpec {
        &self.inner.space
    }

    /// Order of the uncurried functional.
    pub fn order(&self) -> usize {
        self.inner.order
    }

    pub fn inner(&self) -> &MultiFunctional {
        &self.inner
    }

    /// `f_z = f(·, …, ·, z)`, an (n−1)-functional; a scalar when `n = 1`.
    pub fn apply(&self, z: &Vector) -> Result<MultiFunctional> {
        if *z.space() != self.inner.space {
            return Err(Error::Shape("argument lives in a different space".into()));
        }
        Ok(MultiFunctional {
            order: self.inner.order - 1,
            space: self.inner.space,
            coeffs: contract_last(&self.inner.coeffs, self.inner.dim(), z.coords()),
        })
    }
}

pub fn curry(f: &MultiFunctional) -> Result<CurriedOperator> {
    if f.order == 0 {
        return Err(Error::Shape("a scalar has no slot to curry".into()));
    }
    Ok(CurriedOperator { inner: f.clone() })
}

/// `f_u(x_1, …, x_n) = u(x_n)(x_1, …, x_{n−1})`.
pub fn uncurry(u: &CurriedOperator) -> MultiFunctional {
    u.inner.clone()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormMode {
    N1,
    Nn,
    Op,
    #[serde(rename = "opG")]
    OpG,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorDiagnostics {
    pub restarts: usize,
    pub iterations_per_restart: Vec<usize>,
    pub converged: bool,
}

/// A certified lower bound on a functional norm together with the tuple that
/// attains it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionalNormEstimate {
    pub value: f64,
    pub witness: Vec<Vector>,
    pub mode: NormMode,
    pub denominator_exact: bool,
    pub diagnostics: EstimatorDiagnostics,
}

struct Run {
    value: f64,
    tuple: Vec<Vec<f64>>,
    sweeps: usize,
    converged: bool,
}

fn unit_random_tuple(n: usize, space: &SpaceSpec, seed: u64) -> Vec<Vec<f64>> {
    let mut r = rng(seed);
    (0..n)
        .map(|_| loop {
            let c = uniform_coords(&mut r, space.dim());
            let norm = lp_norm(&c, space.exponent());
            if norm > 1e-3 {
                break c.into_iter().map(|v| v / norm).collect();
            }
        })
        .collect()
}

fn normalized(x: &[f64], p: PExponent) -> Vec<f64> {
    let norm = lp_norm(x, p);
    if norm == 0.0 {
        x.to_vec()
    } else {
        x.iter().map(|v| v / norm).collect()
    }
}

fn as_refs(tuple: &[Vec<f64>]) -> Vec<&[f64]> {
    tuple.iter().map(Vec::as_slice).collect()
}

fn best_run(runs: Vec<Run>) -> (Run, Vec<usize>) {
    let sweeps = runs.iter().map(|r| r.sweeps).collect();
    let best = runs
        .into_iter()
        .reduce(|b, r| if r.value > b.value { r } else { b })
        .expect("at least one start");
    (best, sweeps)
}

fn starts_for(f: &MultiFunctional, space: &SpaceSpec, cfg: &NNormConfig, seeded: &[Vec<Vector>]) -> Result<Vec<Vec<Vec<f64>>>> {
    let n = f.order;
    let mut starts: Vec<Vec<Vec<f64>>> = (0..cfg.restarts)
        .map(|k| unit_random_tuple(n, space, derive_seed(cfg.seed, k as u64)))
        .collect();
    for w in seeded {
        if w.len() != n || w.iter().any(|x| x.dim() != space.dim()) {
            return Err(Error::Shape("seeded witness does not fit the functional".into()));
        }
        starts.push(w.iter().map(|x| normalized(x.coords(), space.exponent())).collect());
    }
    Ok(starts)
}

fn n1_ascent(f: &MultiFunctional, p: PExponent, mut xs: Vec<Vec<f64>>, cfg: &NNormConfig) -> Run {
    let n = f.order;
    let mut current = f.eval_raw(&as_refs(&xs)).abs();
    let mut sweeps = 0;
    let mut converged = false;
    while sweeps < cfg.max_iters {
        sweeps += 1;
        let before = current;
        for j in 0..n {
            let phi = f.slot_form(&as_refs(&xs), j);
            if let Some(x) = norming_point(&phi, p) {
                let candidate = lq_norm(&phi, p.q());
                if candidate >= current {
                    xs[j] = x;
                    current = candidate;
                }
            }
        }
        current = f.eval_raw(&as_refs(&xs)).abs();
        if current - before <= cfg.conv_tol * current.max(f64::MIN_POSITIVE) {
            converged = true;
            break;
        }
    }
    Run {
        value: current,
        tuple: xs,
        sweeps,
        converged,
    }
}

fn to_vectors(space: SpaceSpec, tuple: &[Vec<f64>]) -> Result<Vec<Vector>> {
    tuple.iter().map(|x| Vector::new(space, x.clone())).collect()
}

fn n1_impl(f: &MultiFunctional, p: PExponent, cfg: &NNormConfig, seeded: &[Vec<Vector>], mode: NormMode) -> Result<FunctionalNormEstimate> {
    cfg.validate()?;
    let space = SpaceSpec::with_exponent(f.dim(), p)?;
    let n = f.order;
    let diagnostics = |iters: Vec<usize>, converged| EstimatorDiagnostics {
        restarts: iters.len(),
        iterations_per_restart: iters,
        converged,
    };
    if n == 0 || f.is_zero() {
        let witness = (0..n).map(|_| space.basis(0)).collect();
        return Ok(FunctionalNormEstimate {
            value: if n == 0 { f.coeffs[0].abs() } else { 0.0 },
            witness,
            mode,
            denominator_exact: true,
            diagnostics: diagnostics(Vec::new(), true),
        });
    }
    let starts = starts_for(f, &space, cfg, seeded)?;
    let runs: Vec<Run> = map_starts(cfg.parallel, starts, |s| n1_ascent(f, p, s, cfg));
    let (best, iters) = best_run(runs);
    let witness = to_vectors(space, &best.tuple)?;
    let denom: f64 = best.tuple.iter().map(|x| lp_norm(x, p)).product();
    Ok(FunctionalNormEstimate {
        value: f.eval_raw(&as_refs(&best.tuple)).abs() / denom,
        witness,
        mode,
        denominator_exact: true,
        diagnostics: diagnostics(iters, best.converged),
    })
}

fn map_starts<F>(parallel: bool, starts: Vec<Vec<Vec<f64>>>, run: F) -> Vec<Run>
where
    F: Fn(Vec<Vec<f64>>) -> Run + Sync + Send,
{
    use rayon::prelude::*;
    if parallel {
        starts.into_par_iter().map(run).collect()
    } else {
        starts.into_iter().map(run).collect()
    }
}

/// Lower bound on `‖f‖_{n,1}` by alternating maximization over unit tuples.
///
/// With every slot but `j` fixed, `f` is the linear form `φ_j` in `x_j`, and
/// the best unit `x_j` is the norming point of `φ_j`, worth `‖φ_j‖_q`.
pub fn norm_n1(f: &MultiFunctional, p: PExponent, cfg: &NNormConfig) -> Result<FunctionalNormEstimate> {
    n1_impl(f, p, cfg, &[], NormMode::N1)
}

/// [`norm_n1`] with extra starting tuples on top of the random restarts.
pub fn norm_n1_seeded(
    f: &MultiFunctional,
    p: PExponent,
    cfg: &NNormConfig,
    seeded: &[Vec<Vector>],
) -> Result<FunctionalNormEstimate> {
    n1_impl(f, p, cfg, seeded, NormMode::N1)
}

struct Denominator {
    p: PExponent,
    space: SpaceSpec,
    inner: NNormConfig,
}

impl Denominator {
    fn new(space: SpaceSpec, cfg: &NNormConfig) -> Self {
        Self {
            p: space.exponent(),
            space,
            inner: NNormConfig {
                restarts: 2,
                max_iters: cfg.max_iters.min(50),
                seed: derive_seed(cfg.seed, 0x64_656e_6f6d),
                parallel: false,
                ..cfg.clone()
            },
        }
    }

    fn exact(&self) -> bool {
        self.p.is_euclidean()
    }

    fn eval(&self, tuple: &[Vec<f64>]) -> f64 {
        let xs = to_vectors(self.space, tuple).expect("tuple lives in the space");
        if self.exact() {
            gahler_n_norm_euclidean(&xs).expect("p = 2 and n ≤ d")
        } else {
            gahler_n_norm_estimate(&xs, &self.inner)
                .expect("validated configuration and n ≤ d")
                .value
        }
    }

    fn ratio(&self, f: &MultiFunctional, tuple: &[Vec<f64>]) -> f64 {
        let d = self.eval(tuple);
        if d < DEGENERATE_DENOMINATOR {
            0.0
        } else {
            f.eval_raw(&as_refs(tuple)).abs() / d
        }
    }
}

fn nn_ascent(f: &MultiFunctional, den: &Denominator, mut xs: Vec<Vec<f64>>, cfg: &NNormConfig) -> Run {
    let n = f.order;
    let p = den.p;
    let mut current = den.ratio(f, &xs);
    let max_iters = if den.exact() { cfg.max_iters } else { cfg.max_iters.min(20) };
    let mut sweeps = 0;
    let mut converged = false;
    while sweeps < max_iters {
        sweeps += 1;
        let before = current;
        for j in 0..n {
            let phi = f.slot_form(&as_refs(&xs), j);
            // at p = 2 the form annihilates the other slots, so x_j ∝ φ_j is optimal
            let step = if den.exact() {
                Some(normalized(&phi, p))
            } else {
                norming_point(&phi, p)
            };
            if let Some(x) = step.filter(|x| x.iter().any(|&v| v != 0.0)) {
                let old = std::mem::replace(&mut xs[j], x);
                let candidate = den.ratio(f, &xs);
                if candidate >= current {
                    current = candidate;
                } else {
                    xs[j] = old;
                }
            }
        }
        if current - before <= cfg.conv_tol * current.max(f64::MIN_POSITIVE) {
            converged = true;
            break;
        }
    }
    Run {
        value: current,
        tuple: xs,
        sweeps,
        converged,
    }
}

fn nn_impl(f: &MultiFunctional, p: PExponent, cfg: &NNormConfig, seeded: &[Vec<Vector>], mode: NormMode) -> Result<FunctionalNormEstimate> {
    cfg.validate()?;
    let space = SpaceSpec::with_exponent(f.dim(), p)?;
    let n = f.order;
    if n > space.dim() {
        return Err(Error::Rank { n, d: space.dim() });
    }
    let violation = antisymmetry_violation(f, ANTISYMMETRY_TRIALS, derive_seed(cfg.seed, 0x61_6c74));
    if violation > ANTISYMMETRY_TOL {
        return Err(Error::NotAntisymmetric { violation });
    }
    let den = Denominator::new(space, cfg);
    if n == 0 || f.is_zero() {
        let witness = (0..n).map(|k| space.basis(k)).collect();
        return Ok(FunctionalNormEstimate {
            value: if n == 0 { f.coeffs[0].abs() } else { 0.0 },
            witness,
            mode,
            denominator_exact: den.exact(),
            diagnostics: EstimatorDiagnostics {
                restarts: 0,
                iterations_per_restart: Vec::new(),
                converged: true,
            },
        });
    }
    let starts = starts_for(f, &space, cfg, seeded)?;
    let runs = map_starts(cfg.parallel, starts, |s| nn_ascent(f, &den, s, cfg));
    let (best, iters) = best_run(runs);
    Ok(FunctionalNormEstimate {
        value: den.ratio(f, &best.tuple),
        witness: to_vectors(space, &best.tuple)?,
        mode,
        denominator_exact: den.exact(),
        diagnostics: EstimatorDiagnostics {
            restarts: iters.len(),
            iterations_per_restart: iters,
            converged: best.converged,
        },
    })
}

/// Lower bound on `‖f‖_{n,n}` for antisymmetric `f`.
///
/// Tuples whose n-norm is below [`DEGENERATE_DENOMINATOR`] are excluded.
/// For `p ≠ 2` the denominator is itself a lower bound from
/// [`gahler_n_norm_estimate`], so the ratio may overshoot; the estimate then
/// has `denominator_exact = false`.
pub fn norm_nn(f: &MultiFunctional, p: PExponent, cfg: &NNormConfig) -> Result<FunctionalNormEstimate> {
    nn_impl(f, p, cfg, &[], NormMode::Nn)
}

/// [`norm_nn`] with extra starting tuples on top of the random restarts.
pub fn norm_nn_seeded(
    f: &MultiFunctional,
    p: PExponent,
    cfg: &NNormConfig,
    seeded: &[Vec<Vector>],
) -> Result<FunctionalNormEstimate> {
    nn_impl(f, p, cfg, seeded, NormMode::Nn)
}

/// `‖u‖_op = sup ‖u(x)‖ / ‖x‖`, evaluated through `‖u_f‖_op = ‖f‖_{n,1}`.
pub fn op_norm(u: &CurriedOperator, p: PExponent, cfg: &NNormConfig) -> Result<FunctionalNormEstimate> {
    n1_impl(&u.inner, p, cfg, &[], NormMode::Op)
}

pub fn op_norm_seeded(
    u: &CurriedOperator,
    p: PExponent,
    cfg: &NNormConfig,
    seeded: &[Vec<Vector>],
) -> Result<FunctionalNormEstimate> {
    n1_impl(&u.inner, p, cfg, seeded, NormMode::Op)
}

/// `‖u‖_G`, the n-norm counterpart of [`op_norm`], evaluated as
/// `‖f_u‖_{n,n}`.
pub fn op_norm_g(u: &CurriedOperator, p: PExponent, cfg: &NNormConfig) -> Result<FunctionalNormEstimate> {
    nn_impl(&u.inner, p, cfg, &[], NormMode::OpG)
}

pub fn op_norm_g_seeded(
    u: &CurriedOperator,
    p: PExponent,
    cfg: &NNormConfig,
    seeded: &[Vec<Vector>],
) -> Result<FunctionalNormEstimate> {
    nn_impl(&u.inner, p, cfg, seeded, NormMode::OpG)
}

/// Euclidean Gram-Schmidt on a tuple, each result rescaled to unit p-norm.
/// Vectors already in the span of their predecessors are kept as they are.
fn orthonormalized(xs: &[Vector]) -> Vec<Vector> {
    let mut basis: Vec<Vec<f64>> = Vec::new();
    let mut out = Vec::with_capacity(xs.len());
    for x in xs {
        let mut r = x.coords().to_vec();
        for q in &basis {
            let c = dot(&r, q);
            r.iter_mut().zip(q).for_each(|(a, b)| *a -= c * b);
        }
        let len = r.iter().map(|v| v * v).sum::<f64>().sqrt();
        if len <= 1e-12 * lp_norm(x.coords(), PExponent::new(2.0).expect("valid")) {
            out.push(x.clone());
            continue;
        }
        basis.push(r.iter().map(|v| v / len).collect());
        let unit = normalized(&r, x.exponent());
        out.push(Vector::new(*x.space(), unit).expect("finite"));
    }
    out
}

/// Both estimates of a sandwich pair after cross-seeding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SandwichEstimate {
    /// `‖f‖_{n,1}` or `‖u‖_op`.
    pub norm_bound: FunctionalNormEstimate,
    /// `‖f‖_{n,n}` or `‖u‖_G`.
    pub nnorm_bound: FunctionalNormEstimate,
    pub rounds: usize,
}

const MAX_SHARING_ROUNDS: usize = 4;

fn shared_witness(
    f: &MultiFunctional,
    p: PExponent,
    cfg: &NNormConfig,
    modes: (NormMode, NormMode),
) -> Result<SandwichEstimate> {
    let mut n1 = n1_impl(f, p, cfg, &[], modes.0)?;
    let mut nn = nn_impl(f, p, cfg, &[n1.witness.clone()], modes.1)?;
    let mut rounds = 1;
    while rounds < MAX_SHARING_ROUNDS {
        rounds += 1;
        let next_n1 = n1_impl(f, p, cfg, &[orthonormalized(&nn.witness)], modes.0)?;
        let next_nn = nn_impl(f, p, cfg, &[next_n1.witness.clone(), nn.witness.clone()], modes.1)?;
        let stable = next_n1.value <= n1.value && next_nn.value <= nn.value;
        if next_n1.value >= n1.value {
            n1 = next_n1;
        }
        if next_nn.value >= nn.value {
            nn = next_nn;
        }
        if stable {
            break;
        }
    }
    Ok(SandwichEstimate {
        norm_bound: n1,
        nnorm_bound: nn,
        rounds,
    })
}

/// Estimates `‖f‖_{n,1}` and `‖f‖_{n,n}` with shared witnesses: each
/// estimator also starts from the other's best tuple (orthonormalized when
/// passed to the `n,1` side) until neither improves.
pub fn functional_sandwich(f: &MultiFunctional, p: PExponent, cfg: &NNormConfig) -> Result<SandwichEstimate> {
    shared_witness(f, p, cfg, (NormMode::N1, NormMode::Nn))
}

/// [`functional_sandwich`] for `‖u‖_op` and `‖u‖_G`.
pub fn operator_sandwich(u: &CurriedOperator, p: PExponent, cfg: &NNormConfig) -> Result<SandwichEstimate> {
    shared_witness(&u.inner, p, cfg, (NormMode::Op, NormMode::OpG))
}

/// `|f(xs)| / ‖xs‖_G` at `p = 2`; `None` when the tuple is dependent.
pub fn gahler_ratio(f: &MultiFunctional, xs: &[Vector]) -> Result<Option<f64>> {
    let value = f.evaluate(xs)?;
    let den = gahler_n_norm_euclidean(xs)?;
    Ok((den > 0.0).then(|| value.abs() / den))
}
