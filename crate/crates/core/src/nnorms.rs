//! The two n-norms on l^p: the determinant power-sum n-norm and the Gähler
//! n-norm
//!
//! ```text
//! ‖x_1, …, x_n‖_G = sup { |det[f_j(x_i)]| : ‖f_j‖ ≤ 1 }.
//! ```
//!
//! The Gähler supremum has no closed form for `p ≠ 2`. [`gahler_n_norm_estimate`]
//! reports a certified lower bound found by alternating maximization: with all
//! functionals but `f_j` fixed, the determinant is the linear functional
//! `f_j(v_j)` where `v_j = Σ_i C_ij x_i` contracts the cofactors of column `j`,
//! so the optimal `f_j` is the norming functional of `v_j`. Every slot update
//! is therefore exact and the objective never decreases.
//!
//! One start is seeded with `f_j = g_{x_j°}`, built from the left g-orthogonal
//! sequence. On that start `|det| = Π ‖x_j°‖`, so the estimate always respects
//! the lower bound of [`sandwich_bounds`].

use itertools::Itertools;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::ortho::left_g_orthogonalize;
use crate::sip::g_functional;
use crate::spaces::{
    common_space, derive_seed, lp_norm, lq_norm, norming_coeffs, random_tuple, random_vector, rng,
    uniform_coords, Conditioning, DualFunctional, PExponent, Permutation, SpaceSpec, Vector,
};

/// Minors up to this size are evaluated in extended precision by
/// [`lp_n_norm`], which keeps the result accurate to a few ulps even for
/// nearly dependent tuples.
pub const ACCURATE_MINOR_MAX: usize = 4;

/// Rank threshold below which a tuple is treated as exactly dependent.
pub const EXACT_RANK_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NNormConfig {
    pub restarts: usize,
    pub max_iters: usize,
    /// Stop once a full sweep improves the objective by less than this
    /// relative amount.
    pub conv_tol: f64,
    pub seed: u64,
    pub witness_seeding: bool,
    /// Run restarts on the rayon pool. Results do not depend on this flag.
    #[serde(default)]
    pub parallel: bool,
}

impl Default for NNormConfig {
    fn default() -> Self {
        Self {
            restarts: 8,
            max_iters: 100,
            conv_tol: 1e-10,
            seed: 0,
            witness_seeding: true,
            parallel: false,
        }
    }
}

impl NNormConfig {
    pub fn validate(&self) -> Result<()> {
        if self.restarts == 0 {
            return Err(Error::Config("restarts must be at least 1".into()));
        }
        if self.max_iters == 0 {
            return Err(Error::Config("max_iters must be at least 1".into()));
        }
        if !(self.conv_tol > 0.0) {
            return Err(Error::Config("conv_tol must be positive".into()));
        }
        Ok(())
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

/// Result of [`gahler_n_norm_estimate`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GahlerEstimate {
    /// `|det[f_j(x_i)]|` at `functionals`; a lower bound on the norm.
    pub value: f64,
    pub functionals: Vec<DualFunctional>,
    /// `Π ‖x_i°‖` (zero for dependent tuples).
    pub lower_bound: f64,
    /// `n! Π ‖x_i‖`.
    pub upper_bound: f64,
    /// Sweeps used by each start, random starts first, witness start last.
    pub iterations_per_restart: Vec<usize>,
    /// Whether the winning start met the convergence tolerance.
    pub converged: bool,
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

fn tuple_space(xs: &[Vector]) -> Result<SpaceSpec> {
    let space = common_space(xs)?.ok_or(Error::Shape("empty tuple".into()))?;
    if xs.len() > space.dim() {
        return Err(Error::Rank {
            n: xs.len(),
            d: space.dim(),
        });
    }
    Ok(space)
}

fn rows(xs: &[Vector]) -> Vec<Vec<f64>> {
    xs.iter().map(|x| x.coords().to_vec()).collect()
}

/// `‖x_1, …, x_n‖_p = (Σ_{j_1 < … < j_n} |det(x_i[j_k])|^p)^(1/p)`.
///
/// Equal to the normalized sum over all index tuples: tuples with a repeated
/// index contribute zero and the `n!` orderings of a set share one `|det|`.
pub fn lp_n_norm(xs: &[Vector]) -> Result<f64> {
    let space = tuple_space(xs)?;
    let n = xs.len();
    let p = space.exponent();
    let minors: Vec<f64> = (0..space.dim())
        .combinations(n)
        .map(|cols| {
            let sub: Vec<Vec<f64>> = xs
                .iter()
                .map(|x| cols.iter().map(|&c| x.coords()[c]).collect())
                .collect();
            if n <= ACCURATE_MINOR_MAX {
                linalg::accurate_det(&sub)
            } else {
                linalg::det(&sub)
            }
            .expect("square by construction")
        })
        .collect();
    Ok(lp_norm(&minors, p))
}

/// Euclidean Gähler n-norm: the volume `√det[⟨x_i, x_j⟩]` of the spanned
/// parallelepiped, evaluated as the product of modified Gram-Schmidt residual
/// lengths (the same quantity without squaring the condition number).
pub fn gahler_n_norm_euclidean(xs: &[Vector]) -> Result<f64> {
    let space = tuple_space(xs)?;
    if !space.exponent().is_euclidean() {
        return Err(Error::Unsupported(format!(
            "closed-form Gähler n-norm needs p = 2, got p = {}",
            space.p()
        )));
    }
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(xs.len());
    let mut volume = 1.0;
    for x in xs {
        let mut r = x.coords().to_vec();
        for q in &basis {
            let c: f64 = r.iter().zip(q).map(|(a, b)| a * b).sum();
            r.iter_mut().zip(q).for_each(|(a, b)| *a -= c * b);
        }
        let len = r.iter().map(|a| a * a).sum::<f64>().sqrt();
        volume *= len;
        if len == 0.0 {
            return Ok(0.0);
        }
        basis.push(r.into_iter().map(|a| a / len).collect());
    }
    Ok(volume)
}

/// `(Π ‖x_i°‖, n! Π ‖x_i‖)`; the lower bound is zero for dependent tuples.
pub fn sandwich_bounds(xs: &[Vector]) -> Result<(f64, f64)> {
    tuple_space(xs)?;
    let upper = factorial(xs.len()) * xs.iter().map(Vector::norm).product::<f64>();
    let lower = match left_g_orthogonalize(xs) {
        Ok(r) => r.norm_product(),
        Err(Error::DependentFamily { .. }) => 0.0,
        Err(e) => return Err(e),
    };
    Ok((lower, upper))
}

/// One run of alternating maximization from a fixed start.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AscentTrace {
    pub value: f64,
    pub functionals: Vec<Vec<f64>>,
    pub sweeps: usize,
    pub converged: bool,
    /// `|det|` at the start and after every slot update.
    pub objective_history: Vec<f64>,
}

fn pairing_matrix(xs: &[Vec<f64>], fs: &[Vec<f64>]) -> Vec<Vec<f64>> {
    xs.iter()
        .map(|x| fs.iter().map(|f| crate::spaces::dot(f, x)).collect())
        .collect()
}

fn abs_det(xs: &[Vec<f64>], fs: &[Vec<f64>]) -> f64 {
    let mut a = pairing_matrix(xs, fs);
    let n = a.len();
    linalg::det_in_place(&mut a, n).abs()
}

/// `v_j = Σ_i C_ij x_i`, so that `det[f_k(x_i)] = f_j(v_j)`.
fn cofactor_contraction(xs: &[Vec<f64>], fs: &[Vec<f64>], j: usize) -> Vec<f64> {
    let a = pairing_matrix(xs, fs);
    let n = xs.len();
    let d = xs[0].len();
    let mut v = vec![0.0; d];
    for (i, x) in xs.iter().enumerate() {
        let mut sub = linalg::minor(&a, i, j);
        let sign = if (i + j).is_multiple_of(2) { 1.0 } else { -1.0 };
        let c = sign * linalg::det_in_place(&mut sub, n - 1);
        if c != 0.0 {
            v.iter_mut().zip(x).for_each(|(a, b)| *a += c * b);
        }
    }
    v
}

fn ascend(xs: &[Vec<f64>], p: PExponent, mut fs: Vec<Vec<f64>>, cfg: &NNormConfig) -> AscentTrace {
    let n = xs.len();
    let mut current = abs_det(xs, &fs);
    let mut history = vec![current];
    let mut sweeps = 0;
    let mut converged = false;
    while sweeps < cfg.max_iters {
        sweeps += 1;
        let before = current;
        for j in 0..n {
            let v = cofactor_contraction(xs, &fs, j);
            // a flat slot keeps its functional
            if let Some(f) = norming_coeffs(&v, p) {
                let candidate = lp_norm(&v, p);
                if candidate >= current {
                    fs[j] = f;
                    current = candidate;
                }
            }
            history.push(current);
        }
        current = abs_det(xs, &fs);
        if current - before <= cfg.conv_tol * current.max(f64::MIN_POSITIVE) {
            converged = true;
            break;
        }
    }
    AscentTrace {
        value: abs_det(xs, &fs),
        functionals: fs,
        sweeps,
        converged,
        objective_history: history,
    }
}

/// Runs alternating maximization from the given functionals.
pub fn alternating_ascent(
    xs: &[Vector],
    start: &[DualFunctional],
    cfg: &NNormConfig,
) -> Result<AscentTrace> {
    cfg.validate()?;
    let space = tuple_space(xs)?;
    if start.len() != xs.len() {
        return Err(Error::Shape(format!(
            "{} functionals for {} vectors",
            start.len(),
            xs.len()
        )));
    }
    let fs = start.iter().map(|f| f.coeffs().to_vec()).collect();
    Ok(ascend(&rows(xs), space.exponent(), fs, cfg))
}

fn random_functional<R: Rng>(r: &mut R, space: &SpaceSpec) -> Vec<f64> {
    loop {
        let c = uniform_coords(r, space.dim());
        let norm = lq_norm(&c, space.exponent().q());
        if norm > 1e-3 {
            return c.into_iter().map(|v| v / norm).collect();
        }
    }
}

const MAX_DEGENERATE_DRAWS: usize = 16;

fn random_start_ascent(xs: &[Vec<f64>], space: &SpaceSpec, k: usize, cfg: &NNormConfig) -> AscentTrace {
    let mut r = rng(derive_seed(cfg.seed, k as u64));
    let mut trace = None;
    for _ in 0..MAX_DEGENERATE_DRAWS {
        let fs: Vec<Vec<f64>> = (0..xs.len()).map(|_| random_functional(&mut r, space)).collect();
        let t = ascend(xs, space.exponent(), fs, cfg);
        // every cofactor contraction vanished: redraw
        let flat = t.value == 0.0;
        trace = Some(t);
        if !flat {
            break;
        }
    }
    trace.expect("at least one draw")
}

/// Certified lower bound on the Gähler n-norm, with a priori bounds.
///
/// Tuples of exact rank below `n` return value zero. Restarts are reduced by
/// maximum value with ties going to the lowest start index, so the result is
/// the same whether or not `cfg.parallel` is set.
pub fn gahler_n_norm_estimate(xs: &[Vector], cfg: &NNormConfig) -> Result<GahlerEstimate> {
    cfg.validate()?;
    let space = tuple_space(xs)?;
    let n = xs.len();
    let data = rows(xs);
    let upper = factorial(n) * xs.iter().map(Vector::norm).product::<f64>();
    if linalg::numerical_rank(&data, EXACT_RANK_TOL) < n {
        let zero = DualFunctional::new(space, vec![0.0; space.dim()])?;
        return Ok(GahlerEstimate {
            value: 0.0,
            functionals: vec![zero; n],
            lower_bound: 0.0,
            upper_bound: upper,
            iterations_per_restart: Vec::new(),
            converged: true,
        });
    }

    let orth = left_g_orthogonalize(xs).ok();
    let lower = orth.as_ref().map_or(0.0, |o| o.norm_product());

    let run = |k: usize| -> AscentTrace {
        if k < cfg.restarts {
            return random_start_ascent(&data, &space, k, cfg);
        }
        let o = orth.as_ref().expect("witness start requires an orthogonalization");
        let fs = o
            .orthogonalized
            .iter()
            .map(|x| g_functional(x).map(|f| f.coeffs().to_vec()))
            .collect::<Result<Vec<_>>>()
            .expect("orthogonalized vectors are nonzero");
        ascend(&data, space.exponent(), fs, cfg)
    };
    let starts = cfg.restarts + usize::from(cfg.witness_seeding && orth.is_some());
    let traces: Vec<AscentTrace> = if cfg.parallel {
        (0..starts).into_par_iter().map(run).collect()
    } else {
        (0..starts).map(run).collect()
    };

    let best = traces
        .iter()
        .enumerate()
        .fold(0, |b, (k, t)| if t.value > traces[b].value { k } else { b });
    let winner = &traces[best];
    let functionals = winner
        .functionals
        .iter()
        .map(|f| DualFunctional::new(space, f.clone()))
        .collect::<Result<Vec<_>>>()?;
    Ok(GahlerEstimate {
        value: winner.value,
        functionals,
        lower_bound: lower,
        upper_bound: upper,
        iterations_per_restart: traces.iter().map(|t| t.sweeps).collect(),
        converged: winner.converged,
    })
}

/// Per-axiom tolerances for [`check_n_norm_axioms`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AxiomTolerances {
    /// Absolute: dependent tuples must map below it, generic ones above.
    pub degeneracy: f64,
    /// Relative change under a permutation of the tuple.
    pub permutation: f64,
    /// Relative error of `‖αx_1, …‖ = |α| ‖x_1, …‖`.
    pub homogeneity: f64,
    /// Relative slack in the triangle inequality in the first slot.
    pub triangle: f64,
}

impl Default for AxiomTolerances {
    fn default() -> Self {
        Self {
            degeneracy: 1e-9,
            permutation: 1e-12,
            homogeneity: 1e-10,
            triangle: 1e-10,
        }
    }
}

impl AxiomTolerances {
    pub fn uniform(tol: f64) -> Self {
        Self {
            degeneracy: tol,
            permutation: tol,
            homogeneity: tol,
            triangle: tol,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axiom {
    Degeneracy,
    Permutation,
    Homogeneity,
    Triangle,
}

impl Axiom {
    pub const ALL: [Axiom; 4] = [
        Axiom::Degeneracy,
        Axiom::Permutation,
        Axiom::Homogeneity,
        Axiom::Triangle,
    ];
}

/// Outcome of one axiom on one random instance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AxiomTrial {
    pub axiom: Axiom,
    pub passed: bool,
    pub violation: f64,
}

/// The random instance behind one axiom trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxiomInstance {
    pub tuple: Vec<Vector>,
    pub dependent: Vec<Vector>,
    pub extra: Vector,
    pub alpha: f64,
    pub permutation: Vec<usize>,
}

impl AxiomInstance {
    pub fn generate(spec: &SpaceSpec, n: usize, seed: u64) -> Self {
        let tuple = random_tuple(spec, n, derive_seed(seed, 1), Conditioning::Generic);
        let mut r = rng(derive_seed(seed, 2));
        let dependent = if n == 1 {
            vec![spec.zero()]
        } else {
            let mut dep = random_tuple(spec, n - 1, derive_seed(seed, 3), Conditioning::Generic);
            let combo = dep
                .iter()
                .fold(spec.zero(), |acc, x| acc.axpy(r.gen_range(-1.0..=1.0), x));
            let at = r.gen_range(0..n);
            dep.insert(at, combo);
            dep
        };
        let extra = random_vector(spec, derive_seed(seed, 4), Conditioning::Generic);
        let alpha = r.gen_range(0.1..=3.0) * if r.gen_bool(0.5) { 1.0 } else { -1.0 };
        let mut permutation: Vec<usize> = (0..n).collect();
        if n > 1 {
            while permutation.iter().enumerate().all(|(i, &v)| i == v) {
                for i in (1..n).rev() {
                    permutation.swap(i, r.gen_range(0..=i));
                }
            }
        }
        Self {
            tuple,
            dependent,
            extra,
            alpha,
            permutation,
        }
    }
}

fn rel(diff: f64, scale: f64) -> f64 {
    if diff == 0.0 {
        0.0
    } else {
        diff / scale.abs().max(f64::MIN_POSITIVE)
    }
}

/// Evaluates the four n-norm axioms on one instance.
pub fn check_axioms_once<F>(norm: &F, inst: &AxiomInstance, tol: &AxiomTolerances) -> [AxiomTrial; 4]
where
    F: Fn(&[Vector]) -> f64 + ?Sized,
{
    let xs = &inst.tuple;
    let base = norm(xs);

    let dep = norm(&inst.dependent).abs();
    let deg_violation = if base > tol.degeneracy {
        dep
    } else {
        dep.max(2.0 * tol.degeneracy - base)
    };
    let degeneracy = AxiomTrial {
        axiom: Axiom::Degeneracy,
        passed: dep <= tol.degeneracy && base > tol.degeneracy,
        violation: deg_violation,
    };

    let sigma = Permutation::new(inst.permutation.clone()).expect("generated permutation");
    let permuted: Vec<Vector> = (0..xs.len()).map(|i| xs[sigma.apply(i)].clone()).collect();
    let perm_violation = rel((norm(&permuted) - base).abs(), base);
    let permutation = AxiomTrial {
        axiom: Axiom::Permutation,
        passed: perm_violation <= tol.permutation,
        violation: perm_violation,
    };

    let mut scaled = xs.clone();
    scaled[0] = scaled[0].scale(inst.alpha);
    let expected = inst.alpha.abs() * base;
    let hom_violation = rel((norm(&scaled) - expected).abs(), expected);
    let homogeneity = AxiomTrial {
        axiom: Axiom::Homogeneity,
        passed: hom_violation <= tol.homogeneity,
        violation: hom_violation,
    };

    let mut summed = xs.clone();
    summed[0] = summed[0].add(&inst.extra);
    let mut swapped = xs.clone();
    swapped[0] = inst.extra.clone();
    let rhs = base + norm(&swapped);
    let tri_violation = rel((norm(&summed) - rhs).max(0.0), rhs);
    let triangle = AxiomTrial {
        axiom: Axiom::Triangle,
        passed: tri_violation <= tol.triangle,
        violation: tri_violation,
    };

    [degeneracy, permutation, homogeneity, triangle]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AxiomOutcome {
    pub axiom: Axiom,
    pub trials: usize,
    pub passes: usize,
    pub worst_violation: f64,
    /// Index of the first failing trial.
    pub first_failure: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxiomReport {
    pub outcomes: Vec<AxiomOutcome>,
}

impl AxiomReport {
    pub fn all_passed(&self) -> bool {
        self.outcomes.iter().all(|o| o.passes == o.trials)
    }

    pub fn outcome(&self, axiom: Axiom) -> &AxiomOutcome {
        self.outcomes
            .iter()
            .find(|o| o.axiom == axiom)
            .expect("all axioms are reported")
    }
}

/// Randomized check of the four n-norm axioms for an arbitrary evaluator.
pub fn check_n_norm_axioms<F>(
    norm: &F,
    spec: &SpaceSpec,
    n: usize,
    trials: usize,
    seed: u64,
    tol: &AxiomTolerances,
) -> Result<AxiomReport>
where
    F: Fn(&[Vector]) -> f64 + ?Sized,
{
    if n == 0 || n > spec.dim() {
        return Err(Error::Rank { n, d: spec.dim() });
    }
    let mut outcomes: Vec<AxiomOutcome> = Axiom::ALL
        .iter()
        .map(|&axiom| AxiomOutcome {
            axiom,
            trials: 0,
            passes: 0,
            worst_violation: 0.0,
            first_failure: None,
        })
        .collect();
    for t in 0..trials {
        let inst = AxiomInstance::generate(spec, n, derive_seed(seed, t as u64));
        for (o, r) in outcomes.iter_mut().zip(check_axioms_once(norm, &inst, tol)) {
            o.trials += 1;
            o.worst_violation = o.worst_violation.max(r.violation);
            if r.passed {
                o.passes += 1;
            } else if o.first_failure.is_none() {
                o.first_failure = Some(t);
            }
        }
    }
    Ok(AxiomReport { outcomes })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn v(p: f64, c: &[f64]) -> Vector {
        SpaceSpec::new(c.len(), p).unwrap().vector(c.to_vec()).unwrap()
    }

    #[test]
    fn lp_n_norm_examples() {
        assert_eq!(lp_n_norm(&[v(2.0, &[1.0, 0.0]), v(2.0, &[0.0, 1.0])]).unwrap(), 1.0);
        assert_eq!(lp_n_norm(&[v(2.0, &[1.0, 1.0]), v(2.0, &[1.0, -1.0])]).unwrap(), 2.0);
        assert_eq!(lp_n_norm(&[v(1.0, &[1.0, 0.0]), v(1.0, &[0.0, 1.0])]).unwrap(), 1.0);
        for p in [1.0, 1.5, 2.0, 3.0] {
            assert_eq!(lp_n_norm(&[v(p, &[1.0, 0.0]), v(p, &[2.0, 0.0])]).unwrap(), 0.0);
        }
    }

    /// The defining sum over all index tuples with the 1/n! factor.
    fn lp_n_norm_all_tuples(xs: &[Vector]) -> f64 {
        let n = xs.len();
        let d = xs[0].dim();
        let p = xs[0].exponent().p();
        let total: f64 = (0..n)
            .map(|_| 0..d)
            .multi_cartesian_product()
            .map(|idx| {
                let m: Vec<Vec<f64>> = xs.iter().map(|x| idx.iter().map(|&j| x.coords()[j]).collect()).collect();
                linalg::laplace_det(&m).unwrap().abs().powf(p)
            })
            .sum();
        (total / factorial(n)).powf(1.0 / p)
    }

    #[test]
    fn combinatorial_reduction_matches_full_sum() {
        for p in [1.0, 1.5, 2.0, 3.0] {
            for (d, n) in [(3, 2), (4, 3), (4, 2), (3, 1)] {
                let s = SpaceSpec::new(d, p).unwrap();
                let xs = random_tuple(&s, n, 17 * d as u64 + n as u64, Conditioning::Generic);
                assert_relative_eq!(lp_n_norm(&xs).unwrap(), lp_n_norm_all_tuples(&xs), max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn lp_n_norm_errors() {
        let s = SpaceSpec::new(2, 2.0).unwrap();
        let xs = random_tuple(&s, 3, 1, Conditioning::Generic);
        assert!(matches!(lp_n_norm(&xs), Err(Error::Rank { n: 3, d: 2 })));
        assert!(matches!(
            lp_n_norm(&[v(2.0, &[1.0, 0.0]), v(3.0, &[0.0, 1.0])]),
            Err(Error::MixedSpaces)
        ));
    }

    #[test]
    fn euclidean_examples() {
        let xs = [v(2.0, &[3.0, 0.0, 0.0]), v(2.0, &[0.0, 4.0, 0.0])];
        assert_eq!(gahler_n_norm_euclidean(&xs).unwrap(), 12.0);
        let s = SpaceSpec::new(3, 2.0).unwrap();
        assert_eq!(gahler_n_norm_euclidean(&[s.basis(0), s.basis(1)]).unwrap(), 1.0);
        assert_eq!(gahler_n_norm_euclidean(&[v(2.0, &[1.0, 2.0]), v(2.0, &[2.0, 4.0])]).unwrap(), 0.0);
        assert!(matches!(
            gahler_n_norm_euclidean(&[v(3.0, &[1.0, 0.0])]),
            Err(Error::Unsupported(_))
        ));
    }

    /// Brute-force oracle for d = 3, n = 2, p = 2: grid search over pairs of
    /// unit functionals on the sphere, refined locally.
    #[test]
    fn euclidean_value_matches_grid_search() {
        let xs = [v(2.0, &[3.0, 0.0, 0.0]), v(2.0, &[0.0, 4.0, 0.0])];
        let sphere: Vec<[f64; 3]> = (0..24)
            .flat_map(|i| {
                (0..48).map(move |j| {
                    let th = std::f64::consts::PI * (i as f64 + 0.5) / 24.0;
                    let ph = 2.0 * std::f64::consts::PI * j as f64 / 48.0;
                    [th.sin() * ph.cos(), th.sin() * ph.sin(), th.cos()]
                })
            })
            .collect();
        let mut best: f64 = 0.0;
        for f in &sphere {
            for h in &sphere {
                let a = [f[0] * 3.0, h[0] * 3.0];
                let b = [f[1] * 4.0, h[1] * 4.0];
                best = best.max((a[0] * b[1] - a[1] * b[0]).abs());
            }
        }
        let closed = gahler_n_norm_euclidean(&xs).unwrap();
        assert!(best <= closed * (1.0 + 1e-12));
        assert!(best > 0.98 * closed);
    }

    #[test]
    fn estimate_examples() {
        let cfg = NNormConfig::default();
        let xs = [v(2.0, &[3.0, 0.0, 0.0]), v(2.0, &[0.0, 4.0, 0.0])];
        let e = gahler_n_norm_estimate(&xs, &cfg).unwrap();
        assert!((e.value - 12.0).abs() < 1e-6);

        let x = v(3.0, &[1.0, 1.0]);
        let e = gahler_n_norm_estimate(std::slice::from_ref(&x), &cfg).unwrap();
        assert_relative_eq!(e.value, 2f64.powf(1.0 / 3.0), max_relative = 1e-12);
        assert_relative_eq!(e.value, x.norm(), max_relative = 1e-12);

        let e = gahler_n_norm_estimate(&[v(1.5, &[1.0, 2.0]), v(1.5, &[-2.0, -4.0])], &cfg).unwrap();
        assert_eq!(e.value, 0.0);
        assert!(e.converged);
    }

    #[test]
    fn estimate_invariants_hold() {
        let cfg = NNormConfig::default();
        for (k, p) in [1.0, 1.5, 2.0, 3.0].into_iter().enumerate() {
            for (d, n) in [(2, 2), (3, 2), (4, 3), (5, 3)] {
                let s = SpaceSpec::new(d, p).unwrap();
                for seed in 0..5u64 {
                    let xs = random_tuple(&s, n, 100 * k as u64 + 10 * d as u64 + seed, Conditioning::Generic);
                    let e = gahler_n_norm_estimate(&xs, &cfg.clone().with_seed(seed)).unwrap();
                    assert!(e.lower_bound - 1e-8 <= e.value && e.value <= e.upper_bound + 1e-8, "{e:?}");
                    for f in &e.functionals {
                        assert!(f.norm() <= 1.0 + 1e-12);
                    }
                    let m: Vec<Vec<f64>> = xs.iter().map(|x| e.functionals.iter().map(|f| f.apply(x)).collect()).collect();
                    assert!((linalg::det(&m).unwrap().abs() - e.value).abs() <= 1e-12 * e.value.max(1.0));
                }
            }
        }
    }

    #[test]
    fn ascent_is_monotone() {
        let cfg = NNormConfig::default();
        for p in [1.0, 1.5, 3.0, 6.0] {
            let s = SpaceSpec::new(4, p).unwrap();
            let xs = random_tuple(&s, 3, 5, Conditioning::Generic);
            let mut r = rng(9);
            let start: Vec<DualFunctional> = (0..3)
                .map(|_| DualFunctional::new(s, random_functional(&mut r, &s)).unwrap())
                .collect();
            let t = alternating_ascent(&xs, &start, &cfg).unwrap();
            for w in t.objective_history.windows(2) {
                assert!(w[1] >= w[0] - 1e-14 * w[0].max(1.0), "{:?}", t.objective_history);
            }
            assert!(t.value >= t.objective_history[0]);
        }
    }

    #[test]
    fn estimate_is_deterministic_and_parallel_safe() {
        let s = SpaceSpec::new(4, 1.5).unwrap();
        let xs = random_tuple(&s, 3, 3, Conditioning::Generic);
        let cfg = NNormConfig::default().with_seed(11);
        let a = gahler_n_norm_estimate(&xs, &cfg).unwrap();
        let b = gahler_n_norm_estimate(&xs, &NNormConfig { parallel: true, ..cfg.clone() }).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn estimate_scales_with_first_vector() {
        let cfg = NNormConfig::default().with_seed(4);
        for p in [1.0, 1.5, 3.0] {
            let s = SpaceSpec::new(4, p).unwrap();
            let xs = random_tuple(&s, 3, 21, Conditioning::Generic);
            let base = gahler_n_norm_estimate(&xs, &cfg).unwrap().value;
            for alpha in [-2.5, 0.3, 7.0] {
                let mut ys = xs.clone();
                ys[0] = ys[0].scale(alpha);
                let scaled = gahler_n_norm_estimate(&ys, &cfg).unwrap().value;
                assert!((scaled - alpha.abs() * base).abs() <= 1e-8 * alpha.abs() * base);
            }
        }
    }

    #[test]
    fn estimate_rejects_overlong_tuples_and_bad_config() {
        let s = SpaceSpec::new(2, 2.0).unwrap();
        let xs = random_tuple(&s, 3, 1, Conditioning::Generic);
        assert!(matches!(
            gahler_n_norm_estimate(&xs, &NNormConfig::default()),
            Err(Error::Rank { .. })
        ));
        let bad = NNormConfig {
            restarts: 0,
            ..NNormConfig::default()
        };
        assert!(matches!(
            gahler_n_norm_estimate(&xs[..2], &bad),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn sandwich_bounds_examples() {
        let s = SpaceSpec::new(2, 2.0).unwrap();
        assert_eq!(sandwich_bounds(&[s.basis(0), s.basis(1)]).unwrap(), (1.0, 2.0));
        assert_eq!(
            sandwich_bounds(&[v(2.0, &[2.0, 0.0]), v(2.0, &[0.0, 3.0])]).unwrap(),
            (6.0, 12.0)
        );
        let (lo, hi) = sandwich_bounds(&[v(2.0, &[1.0, 1.0]), v(2.0, &[2.0, 2.0])]).unwrap();
        assert_eq!(lo, 0.0);
        assert_relative_eq!(hi, 2.0 * 2f64.sqrt() * 8f64.sqrt(), max_relative = 1e-15);
    }

    #[test]
    fn axioms_hold_for_lp_n_norm() {
        let s = SpaceSpec::new(4, 1.5).unwrap();
        let r = check_n_norm_axioms(&|xs: &[Vector]| lp_n_norm(xs).unwrap(), &s, 3, 200, 1, &AxiomTolerances::uniform(1e-9)).unwrap();
        assert!(r.all_passed(), "{r:?}");
        let strict = check_n_norm_axioms(&|xs: &[Vector]| lp_n_norm(xs).unwrap(), &s, 3, 50, 2, &AxiomTolerances::default()).unwrap();
        assert!(strict.all_passed(), "{strict:?}");
    }

    #[test]
    fn axioms_hold_for_euclidean_gahler() {
        let s = SpaceSpec::new(3, 2.0).unwrap();
        let r = check_n_norm_axioms(&|xs: &[Vector]| gahler_n_norm_euclidean(xs).unwrap(), &s, 2, 100, 3, &AxiomTolerances::default()).unwrap();
        assert!(r.all_passed(), "{r:?}");
    }

    #[test]
    fn sum_of_norms_fails_degeneracy() {
        let s = SpaceSpec::new(3, 2.0).unwrap();
        let bogus = |xs: &[Vector]| xs.iter().map(Vector::norm).sum::<f64>();
        let r = check_n_norm_axioms(&bogus, &s, 2, 20, 5, &AxiomTolerances::default()).unwrap();
        let deg = r.outcome(Axiom::Degeneracy);
        assert_eq!(deg.passes, 0);
        assert_eq!(deg.first_failure, Some(0));
        assert!(!r.all_passed());
    }
}
