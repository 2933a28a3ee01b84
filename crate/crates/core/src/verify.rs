//! Randomized property suites over the whole library, with a JSON report.
//!
//! Every property is a deterministic function of `(seed, cell, trial)`, where
//! a cell fixes the dimension, tuple length and exponent. Trials are
//! independent work items and are aggregated by index, so reports do not
//! depend on whether the suite runs in parallel.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::functionals::{
    antisymmetrize, curry, det_functional, functional_sandwich, norm_n1, norm_nn, op_norm,
    operator_sandwich, uncurry, CurriedOperator, MultiFunctional,
};
use crate::nnorms::{
    check_axioms_once, gahler_n_norm_estimate, gahler_n_norm_euclidean, lp_n_norm, AxiomInstance,
    AxiomTolerances, NNormConfig,
};
use crate::ortho::{bordered_determinant_project, left_g_orthogonalize, project, BORDERED_MAX};
use crate::sip::{check_g_properties_with, g, g_numeric, SipConfig, SipMethod};
use crate::spaces::{
    derive_seed, random_tuple, random_vector, rng, uniform_coords, Conditioning, PExponent,
    SpaceSpec, Vector, P_MAX,
};

/// Largest dimension accepted by [`SuiteConfig::validate`].
pub const MAX_SUITE_DIM: usize = 8;

/// Functional properties use dimensions up to this bound.
pub const FUNCTIONAL_MAX_DIM: usize = 4;

/// Tensors below this Frobenius size are redrawn by [`generate_instance`].
pub const MIN_TENSOR_SIZE: f64 = 1e-6;

/// Deliberate defects for exercising the failure path of the suite.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mutation {
    /// Drops the `‖x‖^(2−p)` factor from `g`, which breaks `g(x, x) = ‖x‖²`.
    SipNormFactor,
    /// Replaces the l^p n-norm with `Σ ‖x_i‖`, which never degenerates.
    NnormSumOfNorms,
}

impl Mutation {
    pub fn name(self) -> &'static str {
        match self {
            Mutation::SipNormFactor => "sip-norm-factor",
            Mutation::NnormSumOfNorms => "nnorm-sum-of-norms",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "sip-norm-factor" => Ok(Mutation::SipNormFactor),
            "nnorm-sum-of-norms" => Ok(Mutation::NnormSumOfNorms),
            _ => Err(Error::Config(format!("unknown mutation {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteConfig {
    pub seed: u64,
    /// Trials per cell for the vector properties.
    pub trials_per_property: usize,
    /// Trials per cell for the functional-norm properties.
    pub functional_trials: usize,
    pub dims: Vec<usize>,
    pub orders: Vec<usize>,
    pub exponents: Vec<f64>,
    /// Overrides of the default tolerances, keyed by property id.
    pub tolerances: BTreeMap<String, f64>,
    pub parallel: bool,
    /// Optimizer settings for Gähler and functional estimates; the seed is
    /// replaced per trial.
    pub estimator: NNormConfig,
    /// Restrict the run to these property ids.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub only: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mutation: Option<Mutation>,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            trials_per_property: 200,
            functional_trials: 10,
            dims: vec![2, 3, 4, 5],
            orders: vec![1, 2, 3],
            exponents: vec![1.0, 1.5, 2.0, 3.0],
            tolerances: BTreeMap::new(),
            parallel: false,
            estimator: NNormConfig {
                restarts: 4,
                ..NNormConfig::default()
            },
            only: None,
            mutation: None,
        }
    }
}

impl SuiteConfig {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// Rejects empty or out-of-range lists and orders that fit no dimension.
    /// Pairs with `n > d` are otherwise skipped.
    pub fn validate(&self) -> Result<()> {
        if self.trials_per_property == 0 || self.functional_trials == 0 {
            return Err(Error::Config("trial counts must be positive".into()));
        }
        if self.dims.is_empty() || self.orders.is_empty() || self.exponents.is_empty() {
            return Err(Error::Config("dims, orders and exponents must be non-empty".into()));
        }
        if let Some(d) = self.dims.iter().find(|&&d| d == 0 || d > MAX_SUITE_DIM) {
            return Err(Error::Config(format!("dimension {d} outside 1..={MAX_SUITE_DIM}")));
        }
        if self.orders.contains(&0) {
            return Err(Error::Config("orders must be at least 1".into()));
        }
        if let Some(p) = self.exponents.iter().find(|&&p| !(1.0..=P_MAX).contains(&p)) {
            return Err(Error::Config(format!("exponent {p} outside [1, {P_MAX}]")));
        }
        let max_d = *self.dims.iter().max().expect("non-empty");
        if let Some(n) = self.orders.iter().find(|&&n| n > max_d) {
            return Err(Error::Config(format!(
                "order {n} exceeds every dimension in {:?}",
                self.dims
            )));
        }
        self.estimator.validate()?;
        let known: Vec<&str> = PROPERTIES.iter().map(|p| p.id).collect();
        let unknown = self
            .tolerances
            .keys()
            .chain(self.only.iter().flatten())
            .find(|k| !known.contains(&k.as_str()));
        if let Some(k) = unknown {
            return Err(Error::Config(format!("unknown property id {k:?}")));
        }
        if let Some((k, v)) = self.tolerances.iter().find(|(_, v)| !(**v >= 0.0)) {
            return Err(Error::Config(format!("tolerance for {k} must be non-negative, got {v}")));
        }
        Ok(())
    }

    fn tolerance(&self, def: &PropertyDef) -> f64 {
        self.tolerances.get(def.id).copied().unwrap_or(def.tolerance)
    }

    fn selected(&self, id: &str) -> bool {
        self.only.as_ref().is_none_or(|ids| ids.iter().any(|i| i == id))
    }

    /// Command line that reruns one property under this configuration.
    pub fn rerun_command(&self, property_id: &str) -> String {
        let list = |v: &[usize]| v.iter().map(usize::to_string).collect::<Vec<_>>().join(",");
        let exps = self.exponents.iter().map(f64::to_string).collect::<Vec<_>>().join(",");
        let mut cmd = format!(
            "ndual verify --seed {} --trials {} --functional-trials {} --dims {} --orders {} --p {} --only {}",
            self.seed,
            self.trials_per_property,
            self.functional_trials,
            list(&self.dims),
            list(&self.orders),
            exps,
            property_id
        );
        if !self.tolerances.is_empty() {
            let tol = self
                .tolerances
                .iter()
                .map(|(k, v)| format!("{k}={v}"))
                .collect::<Vec<_>>()
                .join(",");
            write!(cmd, " --tol {tol}").expect("writing to a String");
        }
        if let Some(m) = self.mutation {
            write!(cmd, " --mutate {}", m.name()).expect("writing to a String");
        }
        cmd
    }
}

/// One parameter cell of a property.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub d: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    pub p: f64,
}

impl Cell {
    fn space(&self) -> SpaceSpec {
        SpaceSpec::new(self.d, self.p).expect("validated cell")
    }

    fn order(&self) -> usize {
        self.n.expect("cell carries a tuple length")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Counterexample {
    pub trial: usize,
    pub cell: Cell,
    pub seed: u64,
    pub violation: f64,
    pub instance: Value,
    pub rerun: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertyRecord {
    pub property_id: String,
    /// The statement under test.
    pub anchor: String,
    pub trials: usize,
    pub passes: usize,
    /// Instances discarded as degenerate (not counted in `trials`).
    pub skipped: usize,
    pub worst_violation: f64,
    pub tolerance: f64,
    /// Soft properties are reported but do not affect the verdict.
    pub soft: bool,
    pub counterexample: Option<Counterexample>,
}

impl PropertyRecord {
    pub fn passed(&self) -> bool {
        self.passes == self.trials
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub config: SuiteConfig,
    pub properties: Vec<PropertyRecord>,
    /// True when every hard property passed all its trials.
    pub passed: bool,
    pub wall_time_ms: u64,
}

impl VerificationReport {
    pub fn property(&self, id: &str) -> Option<&PropertyRecord> {
        self.properties.iter().find(|p| p.property_id == id)
    }

    pub fn hard_failures(&self) -> impl Iterator<Item = &PropertyRecord> {
        self.properties.iter().filter(|p| !p.soft && !p.passed())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InstanceKind {
    Tuple,
    AntisymmetricTensor,
    Operator,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Instance {
    Tuple(Vec<Vector>),
    Tensor(MultiFunctional),
    Operator(CurriedOperator),
}

fn random_tensor(space: SpaceSpec, n: usize, seed: u64) -> MultiFunctional {
    let mut r = rng(seed);
    let coeffs = uniform_coords(&mut r, space.dim().pow(n as u32));
    MultiFunctional::new(space, n, coeffs).expect("shape matches")
}

fn antisymmetric_tensor(space: SpaceSpec, n: usize, seed: u64) -> Result<MultiFunctional> {
    if n > space.dim() {
        return Err(Error::Rank { n, d: space.dim() });
    }
    for attempt in 0.. {
        let f = antisymmetrize(&random_tensor(space, n, derive_seed(seed, attempt)))?;
        if f.frobenius_norm() >= MIN_TENSOR_SIZE {
            return Ok(f);
        }
    }
    unreachable!("the attempt counter is unbounded")
}

/// Deterministic random instance: a generic tuple of `n` vectors, an
/// antisymmetric order-`n` tensor, or the curried operator of one.
pub fn generate_instance(kind: InstanceKind, spec: &SpaceSpec, n: usize, seed: u64) -> Result<Instance> {
    Ok(match kind {
        InstanceKind::Tuple => Instance::Tuple(random_tuple(spec, n, seed, Conditioning::Generic)),
        InstanceKind::AntisymmetricTensor => Instance::Tensor(antisymmetric_tensor(*spec, n, seed)?),
        InstanceKind::Operator => Instance::Operator(curry(&antisymmetric_tensor(*spec, n, seed)?)?),
    })
}

struct Outcome {
    passed: bool,
    violation: f64,
    skipped: bool,
    instance: Option<Value>,
}

impl Outcome {
    fn new(violation: f64, tol: f64, instance: impl FnOnce() -> Value) -> Self {
        let passed = violation <= tol;
        Self {
            passed,
            violation,
            skipped: false,
            instance: (!passed).then(instance),
        }
    }

    fn skip() -> Self {
        Self {
            passed: true,
            violation: 0.0,
            skipped: true,
            instance: None,
        }
    }

    fn error(e: &Error, instance: Value) -> Self {
        Self {
            passed: false,
            violation: f64::INFINITY,
            skipped: false,
            instance: Some(json!({ "instance": instance, "error": e.to_string() })),
        }
    }
}

struct Ctx<'a> {
    cfg: &'a SuiteConfig,
}

impl Ctx<'_> {
    fn estimator(&self, seed: u64) -> NNormConfig {
        NNormConfig {
            seed: derive_seed(seed, 0x65_7374),
            parallel: false,
            ..self.cfg.estimator.clone()
        }
    }

    fn n_norm(&self, xs: &[Vector]) -> f64 {
        match self.cfg.mutation {
            Some(Mutation::NnormSumOfNorms) => xs.iter().map(Vector::norm).sum(),
            _ => lp_n_norm(xs).expect("tuple fits its space"),
        }
    }

    fn g(&self, x: &Vector, y: &Vector) -> f64 {
        match self.cfg.mutation {
            Some(Mutation::SipNormFactor) if !x.is_zero() => {
                g(x, y) * x.norm().powf(x.exponent().p() - 2.0)
            }
            _ => g(x, y),
        }
    }
}

type CellFn = fn(&SuiteConfig) -> Vec<Cell>;
type CheckFn = fn(&Ctx, &Cell, u64, f64) -> Outcome;

enum Trials {
    Vector,
    Functional,
    Once,
}

struct PropertyDef {
    id: &'static str,
    anchor: &'static str,
    tolerance: f64,
    soft: bool,
    trials: Trials,
    cells: CellFn,
    check: CheckFn,
}

fn tuple_cells(cfg: &SuiteConfig) -> Vec<Cell> {
    let mut out = Vec::new();
    for &d in &cfg.dims {
        for &n in cfg.orders.iter().filter(|&&n| n <= d) {
            for &p in &cfg.exponents {
                out.push(Cell { d, n: Some(n), p });
            }
        }
    }
    out
}

fn euclidean_tuple_cells(cfg: &SuiteConfig) -> Vec<Cell> {
    let mut out = Vec::new();
    for &d in &cfg.dims {
        for &n in cfg.orders.iter().filter(|&&n| n <= d) {
            out.push(Cell { d, n: Some(n), p: 2.0 });
        }
    }
    out
}

fn vector_cells(cfg: &SuiteConfig) -> Vec<Cell> {
    let mut out = Vec::new();
    for &d in &cfg.dims {
        for &p in &cfg.exponents {
            out.push(Cell { d, n: None, p });
        }
    }
    out
}

fn single_vector_cells(cfg: &SuiteConfig) -> Vec<Cell> {
    vector_cells(cfg)
        .into_iter()
        .map(|c| Cell { n: Some(1), ..c })
        .collect()
}

fn bordered_cells(cfg: &SuiteConfig) -> Vec<Cell> {
    tuple_cells(cfg)
        .into_iter()
        .filter(|c| c.order() <= BORDERED_MAX.min(c.d))
        .collect()
}

fn multi_vector_off_euclidean_cells(cfg: &SuiteConfig) -> Vec<Cell> {
    tuple_cells(cfg)
        .into_iter()
        .filter(|c| c.order() >= 2 && c.p != 2.0)
        .collect()
}

fn euclidean_functional_cells(cfg: &SuiteConfig) -> Vec<Cell> {
    let mut out = Vec::new();
    for &d in cfg.dims.iter().filter(|&&d| d <= FUNCTIONAL_MAX_DIM) {
        for &n in cfg.orders.iter().filter(|&&n| (2..=3).contains(&n) && n <= d) {
            out.push(Cell { d, n: Some(n), p: 2.0 });
        }
    }
    out
}

fn functional_cells(cfg: &SuiteConfig) -> Vec<Cell> {
    tuple_cells(cfg)
        .into_iter()
        .filter(|c| c.d <= FUNCTIONAL_MAX_DIM)
        .collect()
}

fn antisymmetric_cells(cfg: &SuiteConfig) -> Vec<Cell> {
    tuple_cells(cfg).into_iter().filter(|c| c.order() >= 2).collect()
}

fn fixed_plane(_: &SuiteConfig) -> Vec<Cell> {
    vec![Cell { d: 2, n: Some(2), p: 2.0 }]
}

fn tuple(cell: &Cell, seed: u64) -> Vec<Vector> {
    random_tuple(&cell.space(), cell.order(), seed, Conditioning::Generic)
}

fn axiom_check(ctx: &Ctx, cell: &Cell, seed: u64, tol: f64, which: usize) -> Outcome {
    let inst = AxiomInstance::generate(&cell.space(), cell.order(), seed);
    let norm = |xs: &[Vector]| ctx.n_norm(xs);
    let r = check_axioms_once(&norm, &inst, &AxiomTolerances::uniform(tol))[which];
    Outcome {
        passed: r.passed,
        violation: r.violation,
        skipped: false,
        instance: (!r.passed).then(|| serde_json::to_value(&inst).expect("serializable")),
    }
}

fn check_degeneracy(ctx: &Ctx, cell: &Cell, seed: u64, tol: f64) -> Outcome {
    axiom_check(ctx, cell, seed, tol, 0)
}

fn check_permutation(ctx: &Ctx, cell: &Cell, seed: u64, tol: f64) -> Outcome {
    axiom_check(ctx, cell, seed, tol, 1)
}

fn check_homogeneity(ctx: &Ctx, cell: &Cell, seed: u64, tol: f64) -> Outcome {
    axiom_check(ctx, cell, seed, tol, 2)
}

fn check_triangle(ctx: &Ctx, cell: &Cell, seed: u64, tol: f64) -> Outcome {
    axiom_check(ctx, cell, seed, tol, 3)
}

fn check_gahler_euclidean(ctx: &Ctx, cell: &Cell, seed: u64, tol: f64) -> Outcome {
    let xs = tuple(cell, seed);
    let exact = gahler_n_norm_euclidean(&xs).expect("p = 2");
    match gahler_n_norm_estimate(&xs, &ctx.estimator(seed)) {
        Ok(e) => Outcome::new((e.value - exact).abs() / exact, tol, || {
            json!({ "tuple": xs, "estimate": e.value, "exact": exact })
        }),
        Err(e) => Outcome::error(&e, json!({ "tuple": xs })),
    }
}

fn check_gahler_sandwich(ctx: &Ctx, cell: &Cell, seed: u64, tol: f64) -> Outcome {
    let xs = tuple(cell, seed);
    let cfg = NNormConfig {
        witness_seeding: true,
        ..ctx.estimator(seed)
    };
    match gahler_n_norm_estimate(&xs, &cfg) {
        Ok(e) => {
            let violation = (e.lower_bound - e.value).max(e.value - e.upper_bound).max(0.0);
            Outcome::new(violation, tol, || {
                json!({ "tuple": xs, "value": e.value, "lower_bound": e.lower_bound, "upper_bound": e.upper_bound })
            })
        }
        Err(e) => Outcome::error(&e, json!({ "tuple": xs })),
    }
}

fn check_gahler_single(ctx: &Ctx, cell: &Cell, seed: u64, tol: f64) -> Outcome {
    let xs = tuple(cell, seed);
    let norm = xs[0].norm();
    match gahler_n_norm_estimate(&xs, &ctx.estimator(seed)) {
        Ok(e) => Outcome::new((e.value - norm).abs() / norm, tol, || {
            json!({ "vector": xs[0], "estimate": e.value, "norm": norm })
        }),
        Err(e) => Outcome::error(&e, json!({ "tuple": xs })),
    }
}

fn check_gahler_invariance(_: &Ctx, cell: &Cell, seed: u64, tol: f64) -> Outcome {
    let xs = tuple(cell, seed);
    let orth = match left_g_orthogonalize(&xs) {
        Ok(o) => o.orthogonalized,
        Err(_) => return Outcome::skip(),
    };
    let a = gahler_n_norm_euclidean(&xs).expect("p = 2");
    let b = gahler_n_norm_euclidean(&orth).expect("p = 2");
    Outcome::new((a - b).abs() / a, tol, || {
        json!({ "tuple": xs, "orthogonalized": orth, "original": a, "after": b })
    })
}

fn check_general_invariance(ctx: &Ctx, cell: &Cell, seed: u64, tol: f64) -> Outcome {
    let xs = tuple(cell, seed);
    let orth = match left_g_orthogonalize(&xs) {
        Ok(o) => o.orthogonalized,
        Err(_) => return Outcome::skip(),
    };
    let cfg = ctx.estimator(seed);
    match (gahler_n_norm_estimate(&xs, &cfg), gahler_n_norm_estimate(&orth, &cfg)) {
        (Ok(a), Ok(b)) => Outcome::new((a.value - b.value).abs() / a.value.max(b.value), tol, || {
            json!({ "tuple": xs, "orthogonalized": orth, "original": a.value, "after": b.value })
        }),
        (Err(e), _) | (_, Err(e)) => Outcome::error(&e, json!({ "tuple": xs })),
    }
}

fn sip_pair(cell: &Cell, seed: u64) -> (Vector, Vector) {
    let s = cell.space();
    (
        random_vector(&s, derive_seed(seed, 0), Conditioning::Generic),
        random_vector(&s, derive_seed(seed, 1), Conditioning::Generic),
    )
}

fn check_sip_oracle(ctx: &Ctx, cell: &Cell, seed: u64, tol: f64) -> Outcome {
    let (x, y) = sip_pair(cell, seed);
    let cfg = SipConfig {
        method: SipMethod::Numeric,
        ..SipConfig::default()
    };
    let closed = ctx.g(&x, &y);
    match g_numeric(&x, &y, &cfg) {
        Ok(numeric) => Outcome::new((closed - numeric).abs() / (1.0 + x.norm() * y.norm()), tol, || {
            json!({ "x": x, "y": y, "closed_form": closed, "oracle": numeric })
        }),
        Err(e) => Outcome::error(&e, json!({ "x": x, "y": y })),
    }
}

fn check_sip_properties(ctx: &Ctx, cell: &Cell, seed: u64, tol: f64) -> Outcome {
    let (x, y) = sip_pair(cell, seed);
    let mut r = rng(derive_seed(seed, 2));
    let alpha = r.gen_range(-2.0..=2.0);
    let beta = r.gen_range(-2.0..=2.0);
    let report = check_g_properties_with(|a, b| ctx.g(a, b), &x, &y, alpha, beta, tol);
    Outcome::new(report.worst_residual(), tol, || {
        json!({ "x": x, "y": y, "alpha": alpha, "beta": beta, "report": report })
    })
}

fn check_left_orthogonality(ctx: &Ctx, cell: &Cell, seed: u64, tol: f64) -> Outcome {
    let xs = tuple(cell, seed);
    let orth = match left_g_orthogonalize(&xs) {
        Ok(o) => o.orthogonalized,
        Err(Error::DependentFamily { .. }) => return Outcome::skip(),
        Err(e) => return Outcome::error(&e, json!({ "tuple": xs })),
    };
    let mut worst: f64 = 0.0;
    for (i, a) in orth.iter().enumerate() {
        for b in &orth[i + 1..] {
            worst = worst.max(ctx.g(a, b).abs() / (1.0 + a.norm() * b.norm()));
        }
    }
    Outcome::new(worst, tol, || json!({ "tuple": xs, "orthogonalized": orth }))
}

fn check_bordered(_: &Ctx, cell: &Cell, seed: u64, tol: f64) -> Outcome {
    let ys = tuple(cell, seed);
    let x = random_vector(&cell.space(), derive_seed(seed, 0x78), Conditioning::Generic);
    let (a, b) = match (project(&x, &ys), bordered_determinant_project(&x, &ys)) {
        (Ok(a), Ok(b)) => (a, b),
        (Err(Error::DependentFamily { .. }), _) | (_, Err(Error::DependentFamily { .. })) => {
            return Outcome::skip()
        }
        (Err(e), _) | (_, Err(e)) => return Outcome::error(&e, json!({ "x": x, "family": ys })),
    };
    let scale = 1.0 + a.coords().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let diff = a
        .coords()
        .iter()
        .zip(b.coords())
        .fold(0.0f64, |m, (u, v)| m.max((u - v).abs()));
    Outcome::new(diff / scale, tol, || {
        json!({ "x": x, "family": ys, "solve": a, "bordered": b })
    })
}

fn classical_gram_schmidt(xs: &[Vector]) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = Vec::new();
    for x in xs {
        let mut r = x.coords().to_vec();
        for q in &out {
            let qq: f64 = q.iter().map(|v| v * v).sum();
            let c = x.coords().iter().zip(q).map(|(a, b)| a * b).sum::<f64>() / qq;
            r.iter_mut().zip(q).for_each(|(a, b)| *a -= c * b);
        }
        out.push(r);
    }
    out
}

fn check_euclidean_reduction(_: &Ctx, cell: &Cell, seed: u64, tol: f64) -> Outcome {
    let xs = tuple(cell, seed);
    let orth = match left_g_orthogonalize(&xs) {
        Ok(o) => o.orthogonalized,
        Err(e) => return Outcome::error(&e, json!({ "tuple": xs })),
    };
    let classical = classical_gram_schmidt(&xs);
    let worst = orth
        .iter()
        .zip(&classical)
        .zip(&xs)
        .map(|((a, b), x)| {
            let diff = a.coords().iter().zip(b).fold(0.0f64, |m, (u, v)| m.max((u - v).abs()));
            diff / (1.0 + x.norm())
        })
        .fold(0.0, f64::max);
    Outcome::new(worst, tol, || {
        json!({ "tuple": xs, "orthogonalized": orth, "classical": classical })
    })
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

fn sandwich_violation(norm_bound: f64, nnorm_bound: f64, n: usize) -> f64 {
    (nnorm_bound - norm_bound)
        .max(norm_bound - factorial(n) * nnorm_bound)
        .max(0.0)
}

fn check_lemma(ctx: &Ctx, cell: &Cell, seed: u64, tol: f64) -> Outcome {
    let space = cell.space();
    let f = match antisymmetric_tensor(space, cell.order(), seed) {
        Ok(f) => f,
        Err(e) => return Outcome::error(&e, Value::Null),
    };
    match functional_sandwich(&f, space.exponent(), &ctx.estimator(seed)) {
        Ok(sw) => {
            let v = sandwich_violation(sw.norm_bound.value, sw.nnorm_bound.value, cell.order());
            Outcome::new(v, tol, || json!({ "tensor": f, "estimates": sw }))
        }
        Err(e) => Outcome::error(&e, json!({ "tensor": f })),
    }
}

fn check_corollary(ctx: &Ctx, cell: &Cell, seed: u64, tol: f64) -> Outcome {
    let space = cell.space();
    let u = match antisymmetric_tensor(space, cell.order(), seed).and_then(|f| curry(&f)) {
        Ok(u) => u,
        Err(e) => return Outcome::error(&e, Value::Null),
    };
    match operator_sandwich(&u, space.exponent(), &ctx.estimator(seed)) {
        Ok(sw) => {
            let v = sandwich_violation(sw.norm_bound.value, sw.nnorm_bound.value, cell.order());
            Outcome::new(v, tol, || json!({ "operator": u, "estimates": sw }))
        }
        Err(e) => Outcome::error(&e, json!({ "operator": u })),
    }
}

fn check_isometry(ctx: &Ctx, cell: &Cell, seed: u64, tol: f64) -> Outcome {
    let space = cell.space();
    let f = random_tensor(space, cell.order(), seed);
    let u = curry(&f).expect("order at least one");
    let back = uncurry(&u);
    let xs = random_tuple(&space, cell.order(), derive_seed(seed, 1), Conditioning::Generic);
    let z = random_vector(&space, derive_seed(seed, 2), Conditioning::Generic);
    let mut head = xs.clone();
    head.pop();
    head.push(z.clone());
    let round_trip = back == f
        && back.evaluate(&xs).ok() == f.evaluate(&xs).ok()
        && u.apply(&z).and_then(|fz| fz.evaluate(&head[..head.len() - 1])).ok() == f.evaluate(&head).ok();
    let cfg = ctx.estimator(seed);
    match (norm_n1(&f, space.exponent(), &cfg), op_norm(&u, space.exponent(), &cfg)) {
        (Ok(a), Ok(b)) => {
            let violation = (a.value - b.value).abs() + if round_trip { 0.0 } else { 1.0 };
            Outcome::new(violation, tol, || {
                json!({ "tensor": f, "norm_n1": a.value, "op_norm": b.value, "round_trip": round_trip })
            })
        }
        (Err(e), _) | (_, Err(e)) => Outcome::error(&e, json!({ "tensor": f })),
    }
}

fn check_vanishing(_: &Ctx, cell: &Cell, seed: u64, tol: f64) -> Outcome {
    let space = cell.space();
    let n = cell.order();
    let f = match antisymmetric_tensor(space, n, seed) {
        Ok(f) => f,
        Err(e) => return Outcome::error(&e, Value::Null),
    };
    let mut r = rng(derive_seed(seed, 1));
    let mut xs = random_tuple(&space, n - 1, derive_seed(seed, 2), Conditioning::Generic);
    let combo = xs
        .iter()
        .fold(space.zero(), |acc, x| acc.axpy(r.gen_range(-1.0..=1.0), x));
    xs.insert(r.gen_range(0..n), combo);
    let scale: f64 = xs.iter().map(Vector::norm).product();
    if scale == 0.0 {
        return Outcome::skip();
    }
    let value = f.evaluate(&xs).expect("tuple built for f");
    Outcome::new(value.abs() / scale, tol, || json!({ "tensor": f, "tuple": xs, "value": value }))
}

fn check_desk_values(ctx: &Ctx, _: &Cell, seed: u64, tol: f64) -> Outcome {
    let cfg = ctx.estimator(seed);
    let det = det_functional(2).expect("d = 2 is supported");
    let p2 = PExponent::new(2.0).expect("valid");
    let n1 = norm_n1(&det, p2, &cfg).map(|e| e.value);
    let nn = norm_nn(&det, p2, &cfg).map(|e| e.value);
    let s3 = SpaceSpec::new(3, 2.0).expect("valid");
    let xs = [
        s3.vector(vec![3.0, 0.0, 0.0]).expect("valid"),
        s3.vector(vec![0.0, 4.0, 0.0]).expect("valid"),
    ];
    let g = gahler_n_norm_estimate(&xs, &cfg).map(|e| e.value);
    match (n1, nn, g) {
        (Ok(n1), Ok(nn), Ok(g)) => {
            let violation = (n1 - 1.0).abs().max((nn - 1.0).abs()).max((g - 12.0).abs() / 12.0);
            Outcome::new(violation, tol, || {
                json!({ "det_n1": n1, "det_nn": nn, "gahler_3_4": g })
            })
        }
        (Err(e), _, _) | (_, Err(e), _) | (_, _, Err(e)) => Outcome::error(&e, Value::Null),
    }
}

/// Threshold of the divergence property: the ratio must exceed it.
pub const DIVERGENCE_THRESHOLD: f64 = 1e6;
pub const DIVERGENCE_EPS: f64 = 1e-8;

fn check_divergence(_: &Ctx, _: &Cell, _: u64, tol: f64) -> Outcome {
    let s = SpaceSpec::new(2, 2.0).expect("valid");
    let f = MultiFunctional::outer(s, &[vec![1.0, 0.0], vec![0.0, 1.0]]).expect("valid");
    let xs = [
        s.vector(vec![1.0, 1.0]).expect("valid"),
        s.vector(vec![1.0, 1.0 + DIVERGENCE_EPS]).expect("valid"),
    ];
    let value = f.evaluate(&xs).expect("order two");
    let den = gahler_n_norm_euclidean(&xs).expect("p = 2");
    let ratio = if den > 0.0 { value.abs() / den } else { f64::INFINITY };
    let violation = (1.0 - ratio / DIVERGENCE_THRESHOLD).max(0.0);
    Outcome::new(violation, tol, || {
        json!({ "tensor": f, "tuple": xs, "ratio": ratio })
    })
}

static PROPERTIES: &[PropertyDef] = &[
    PropertyDef {
        id: "prop.axioms.degeneracy",
        anchor: "‖x_1,…,x_n‖_p = 0 iff x_1,…,x_n are linearly dependent",
        tolerance: 1e-9,
        soft: false,
        trials: Trials::Vector,
        cells: tuple_cells,
        check: check_degeneracy,
    },
    PropertyDef {
        id: "prop.axioms.permutation",
        anchor: "‖x_σ(1),…,x_σ(n)‖_p = ‖x_1,…,x_n‖_p",
        tolerance: 1e-12,
        soft: false,
        trials: Trials::Vector,
        cells: tuple_cells,
        check: check_permutation,
    },
    PropertyDef {
        id: "prop.axioms.homogeneity",
        anchor: "‖αx_1,x_2,…,x_n‖_p = |α| ‖x_1,…,x_n‖_p",
        tolerance: 1e-10,
        soft: false,
        trials: Trials::Vector,
        cells: tuple_cells,
        check: check_homogeneity,
    },
    PropertyDef {
        id: "prop.axioms.triangle",
        anchor: "‖x+x',x_2,…,x_n‖_p ≤ ‖x,x_2,…,x_n‖_p + ‖x',x_2,…,x_n‖_p",
        tolerance: 1e-10,
        soft: false,
        trials: Trials::Vector,
        cells: tuple_cells,
        check: check_triangle,
    },
    PropertyDef {
        id: "prop.gahler.euclidean",
        anchor: "p = 2: ‖x_1,…,x_n‖_G = √det[⟨x_i,x_j⟩]",
        tolerance: 1e-6,
        soft: false,
        trials: Trials::Vector,
        cells: euclidean_tuple_cells,
        check: check_gahler_euclidean,
    },
    PropertyDef {
        id: "prop.sandwich.gahler",
        anchor: "‖x_1°‖⋯‖x_n°‖ ≤ ‖x_1,…,x_n‖_G ≤ n! ‖x_1‖⋯‖x_n‖",
        tolerance: 1e-8,
        soft: false,
        trials: Trials::Vector,
        cells: tuple_cells,
        check: check_gahler_sandwich,
    },
    PropertyDef {
        id: "prop.gahler.single",
        anchor: "n = 1: ‖x‖_G = ‖x‖_p",
        tolerance: 1e-8,
        soft: false,
        trials: Trials::Vector,
        cells: single_vector_cells,
        check: check_gahler_single,
    },
    PropertyDef {
        id: "prop.gahler.invariance",
        anchor: "p = 2: ‖x_1,…,x_n‖_G = ‖x_1°,…,x_n°‖_G",
        tolerance: 1e-9,
        soft: false,
        trials: Trials::Vector,
        cells: euclidean_tuple_cells,
        check: check_gahler_invariance,
    },
    PropertyDef {
        id: "prop.gahler.invariance_general",
        anchor: "‖x_1,…,x_n‖_G = ‖x_1°,…,x_n°‖_G (compared through lower-bound estimates)",
        tolerance: 1e-6,
        soft: true,
        trials: Trials::Functional,
        cells: multi_vector_off_euclidean_cells,
        check: check_general_invariance,
    },
    PropertyDef {
        id: "prop.sip.oracle",
        anchor: "g(x,y) = (‖x‖/2)(τ₋(x,y) + τ₊(x,y))",
        tolerance: 1e-6,
        soft: false,
        trials: Trials::Vector,
        cells: vector_cells,
        check: check_sip_oracle,
    },
    PropertyDef {
        id: "prop.sip.properties",
        anchor: "g(x,x) = ‖x‖², g(αx,βy) = αβ g(x,y), g(x,x+y) = ‖x‖² + g(x,y), |g(x,y)| ≤ ‖x‖‖y‖, g(x,·) linear",
        tolerance: 1e-8,
        soft: false,
        trials: Trials::Vector,
        cells: vector_cells,
        check: check_sip_properties,
    },
    PropertyDef {
        id: "prop.ortho.left",
        anchor: "g(x_i°, x_j°) = 0 for i < j",
        tolerance: 1e-8,
        soft: false,
        trials: Trials::Vector,
        cells: tuple_cells,
        check: check_left_orthogonality,
    },
    PropertyDef {
        id: "prop.ortho.bordered",
        anchor: "x_Y = −(1/Γ) det[[Γ-matrix, g(y_i,x)], [y_1 … y_n, 0]] equals the Gram-system projection",
        tolerance: 1e-10,
        soft: false,
        trials: Trials::Vector,
        cells: bordered_cells,
        check: check_bordered,
    },
    PropertyDef {
        id: "prop.ortho.euclidean",
        anchor: "p = 2: left g-orthogonalization is classical Gram-Schmidt",
        tolerance: 1e-10,
        soft: false,
        trials: Trials::Vector,
        cells: euclidean_tuple_cells,
        check: check_euclidean_reduction,
    },
    PropertyDef {
        id: "prop.sandwich.lemma",
        anchor: "‖f‖_{n,n} ≤ ‖f‖_{n,1} ≤ n! ‖f‖_{n,n} for antisymmetric f",
        tolerance: 1e-6,
        soft: false,
        trials: Trials::Functional,
        cells: euclidean_functional_cells,
        check: check_lemma,
    },
    PropertyDef {
        id: "prop.sandwich.corollary",
        anchor: "‖u‖_G ≤ ‖u‖_op ≤ n! ‖u‖_G for antisymmetric u",
        tolerance: 1e-6,
        soft: false,
        trials: Trials::Functional,
        cells: euclidean_functional_cells,
        check: check_corollary,
    },
    PropertyDef {
        id: "prop.isometry",
        anchor: "‖f‖_{n,1} = ‖u_f‖_op and θ⁻¹∘θ = id",
        tolerance: 0.0,
        soft: false,
        trials: Trials::Functional,
        cells: functional_cells,
        check: check_isometry,
    },
    PropertyDef {
        id: "prop.antisymmetric.vanishing",
        anchor: "f antisymmetric, x_1,…,x_n dependent ⟹ f(x_1,…,x_n) = 0",
        tolerance: 1e-10,
        soft: false,
        trials: Trials::Vector,
        cells: antisymmetric_cells,
        check: check_vanishing,
    },
    PropertyDef {
        id: "prop.desk.values",
        anchor: "‖det‖_{2,1} = ‖det‖_{2,2} = 1 on Euclidean R²; ‖(3,0,0),(0,4,0)‖_G = 12",
        tolerance: 1e-6,
        soft: false,
        trials: Trials::Once,
        cells: fixed_plane,
        check: check_desk_values,
    },
    PropertyDef {
        id: "prop.divergence",
        anchor: "f = e₁⊗e₂ is unbounded against ‖·,·‖_G: |f(x,x+εe₂)| / ‖x,x+εe₂‖_G ~ 1/ε at x = e₁+e₂",
        tolerance: 0.0,
        soft: false,
        trials: Trials::Once,
        cells: fixed_plane,
        check: check_divergence,
    },
];

/// Ids of every property, in report order.
pub fn property_ids() -> Vec<&'static str> {
    PROPERTIES.iter().map(|p| p.id).collect()
}

fn fnv1a(s: &str) -> u64 {
    s.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x0100_0000_01b3)
    })
}

fn trial_seed(cfg: &SuiteConfig, id: &str, cell: usize, trial: usize) -> u64 {
    derive_seed(derive_seed(derive_seed(cfg.seed, fnv1a(id)), cell as u64), trial as u64)
}

/// Runs every selected property and aggregates the outcomes in trial order.
pub fn run_suite(cfg: &SuiteConfig) -> Result<VerificationReport> {
    cfg.validate()?;
    let start = Instant::now();
    let ctx = Ctx { cfg };
    let defs: Vec<&PropertyDef> = PROPERTIES.iter().filter(|d| cfg.selected(d.id)).collect();
    let cells: Vec<Vec<Cell>> = defs.iter().map(|d| (d.cells)(cfg)).collect();

    let mut items = Vec::new();
    for (pi, def) in defs.iter().enumerate() {
        let per_cell = match def.trials {
            Trials::Vector => cfg.trials_per_property,
            Trials::Functional => cfg.functional_trials,
            Trials::Once => 1,
        };
        for ci in 0..cells[pi].len() {
            for t in 0..per_cell {
                items.push((pi, ci, t));
            }
        }
    }
    let run = |&(pi, ci, t): &(usize, usize, usize)| -> Outcome {
        let def = defs[pi];
        let seed = trial_seed(cfg, def.id, ci, t);
        (def.check)(&ctx, &cells[pi][ci], seed, cfg.tolerance(def))
    };
    let outcomes: Vec<Outcome> = if cfg.parallel {
        items.par_iter().map(run).collect()
    } else {
        items.iter().map(run).collect()
    };

    let mut records: Vec<PropertyRecord> = defs
        .iter()
        .map(|d| PropertyRecord {
            property_id: d.id.to_string(),
            anchor: d.anchor.to_string(),
            trials: 0,
            passes: 0,
            skipped: 0,
            worst_violation: 0.0,
            tolerance: cfg.tolerance(d),
            soft: d.soft,
            counterexample: None,
        })
        .collect();
    for (&(pi, ci, t), out) in items.iter().zip(outcomes) {
        let rec = &mut records[pi];
        if out.skipped {
            rec.skipped += 1;
            continue;
        }
        rec.trials += 1;
        rec.worst_violation = rec.worst_violation.max(out.violation);
        if out.passed {
            rec.passes += 1;
        } else if rec.counterexample.is_none() {
            rec.counterexample = Some(Counterexample {
                trial: t,
                cell: cells[pi][ci],
                seed: trial_seed(cfg, defs[pi].id, ci, t),
                violation: out.violation,
                instance: out.instance.unwrap_or(Value::Null),
                rerun: cfg.rerun_command(defs[pi].id),
            });
        }
    }
    let passed = records.iter().all(|r| r.soft || r.passed());
    Ok(VerificationReport {
        config: cfg.clone(),
        properties: records,
        passed,
        wall_time_ms: start.elapsed().as_millis() as u64,
    })
}
