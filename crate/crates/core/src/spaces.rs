//! Finite-dimensional real l^p spaces: exponents, vectors, dual functionals,
//! Hölder duality, permutations and seeded instance generators.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Largest supported exponent. Beyond this `|v_k|^(p-1)` loses too much
/// precision for norming functionals to stay accurate to 1e-12.
pub const P_MAX: f64 = 16.0;

/// Conjugate exponent `q` with `1/p + 1/q = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Conjugate {
    Finite(f64),
    Infinite,
}

impl Conjugate {
    pub fn as_f64(self) -> f64 {
        match self {
            Conjugate::Finite(q) => q,
            Conjugate::Infinite => f64::INFINITY,
        }
    }
}

impl Serialize for Conjugate {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Conjugate::Finite(q) => s.serialize_f64(*q),
            Conjugate::Infinite => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Conjugate {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(q) => Ok(Conjugate::Finite(q)),
            Raw::Str(s) if s == "inf" => Ok(Conjugate::Infinite),
            Raw::Str(s) => Err(serde::de::Error::custom(format!(
                "expected a number or \"inf\", got {s:?}"
            ))),
        }
    }
}

/// An exponent `1 <= p <= 16` together with its conjugate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PExponent {
    p: f64,
    q: Conjugate,
}

impl PExponent {
    pub fn new(p: f64) -> Result<Self> {
        dual_exponent(p)
    }

    pub fn p(self) -> f64 {
        self.p
    }

    pub fn q(self) -> Conjugate {
        self.q
    }

    pub fn is_one(self) -> bool {
        self.p == 1.0
    }

    pub fn is_euclidean(self) -> bool {
        self.p == 2.0
    }
}

impl fmt::Display for PExponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.p)
    }
}

/// Builds the exponent pair for `p`; `p = 1` maps to `q = ∞`.
pub fn dual_exponent(p: f64) -> Result<PExponent> {
    if !(1.0..=P_MAX).contains(&p) {
        return Err(Error::Range(format!("p = {p} outside [1, {P_MAX}]")));
    }
    let q = if p == 1.0 {
        Conjugate::Infinite
    } else {
        Conjugate::Finite(p / (p - 1.0))
    };
    Ok(PExponent { p, q })
}

/// The space `l^p(R^d)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpaceSpec {
    d: usize,
    exponent: PExponent,
}

impl SpaceSpec {
    pub fn new(d: usize, p: f64) -> Result<Self> {
        if d == 0 {
            return Err(Error::Range("dimension must be at least 1".into()));
        }
        Ok(Self {
            d,
            exponent: dual_exponent(p)?,
        })
    }

    pub fn with_exponent(d: usize, exponent: PExponent) -> Result<Self> {
        if d == 0 {
            return Err(Error::Range("dimension must be at least 1".into()));
        }
        Ok(Self { d, exponent })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn exponent(&self) -> PExponent {
        self.exponent
    }

    pub fn p(&self) -> f64 {
        self.exponent.p
    }

    /// `‖x‖_p` for a vector that must live in this space.
    pub fn norm(&self, x: &Vector) -> Result<f64> {
        if x.dim() != self.d {
            return Err(Error::Dimension {
                expected: self.d,
                found: x.dim(),
            });
        }
        Ok(lp_norm(&x.coords, self.exponent))
    }

    pub fn vector(&self, coords: Vec<f64>) -> Result<Vector> {
        Vector::new(*self, coords)
    }

    pub fn zero(&self) -> Vector {
        Vector {
            coords: vec![0.0; self.d],
            space: *self,
        }
    }

    /// Standard basis vector `e_{k+1}` (zero-based `k`).
    pub fn basis(&self, k: usize) -> Vector {
        let mut v = self.zero();
        v.coords[k] = 1.0;
        v
    }
}

#[derive(Serialize, Deserialize)]
struct SpaceRepr {
    d: usize,
    p: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    q: Option<Conjugate>,
}

impl Serialize for SpaceSpec {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        SpaceRepr {
            d: self.d,
            p: self.exponent.p,
            q: Some(self.exponent.q),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for SpaceSpec {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = SpaceRepr::deserialize(d)?;
        let spec = SpaceSpec::new(raw.d, raw.p).map_err(serde::de::Error::custom)?;
        if let Some(q) = raw.q {
            let consistent = match (q, spec.exponent.q) {
                (Conjugate::Infinite, Conjugate::Infinite) => true,
                (Conjugate::Finite(a), Conjugate::Finite(b)) => (a - b).abs() <= 1e-9 * b,
                _ => false,
            };
            if !consistent {
                return Err(serde::de::Error::custom("q is not conjugate to p"));
            }
        }
        Ok(spec)
    }
}

/// A point of `l^p(R^d)` with finite coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "VectorRepr")]
pub struct Vector {
    space: SpaceSpec,
    coords: Vec<f64>,
}

#[derive(Deserialize)]
struct VectorRepr {
    space: SpaceSpec,
    coords: Vec<f64>,
}

impl TryFrom<VectorRepr> for Vector {
    type Error = Error;

    fn try_from(r: VectorRepr) -> Result<Self> {
        Vector::new(r.space, r.coords)
    }
}

fn check_coords(space: &SpaceSpec, coords: &[f64]) -> Result<()> {
    if coords.len() != space.d {
        return Err(Error::Dimension {
            expected: space.d,
            found: coords.len(),
        });
    }
    if let Some(i) = coords.iter().position(|c| !c.is_finite()) {
        return Err(Error::NonFinite(i));
    }
    Ok(())
}

impl Vector {
    pub fn new(space: SpaceSpec, coords: Vec<f64>) -> Result<Self> {
        check_coords(&space, &coords)?;
        Ok(Self { space, coords })
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn into_coords(self) -> Vec<f64> {
        self.coords
    }

    pub fn space(&self) -> &SpaceSpec {
        &self.space
    }

    pub fn exponent(&self) -> PExponent {
        self.space.exponent
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn norm(&self) -> f64 {
        lp_norm(&self.coords, self.space.exponent)
    }

    pub fn is_zero(&self) -> bool {
        self.coords.iter().all(|&c| c == 0.0)
    }

    pub fn dot(&self, other: &[f64]) -> f64 {
        dot(&self.coords, other)
    }

    pub fn scale(&self, alpha: f64) -> Vector {
        self.map(|c| alpha * c)
    }

    /// `self + alpha * other`; both must share a dimension.
    pub fn axpy(&self, alpha: f64, other: &Vector) -> Vector {
        assert_eq!(self.dim(), other.dim(), "axpy on vectors of different dimension");
        Vector {
            space: self.space,
            coords: self
                .coords
                .iter()
                .zip(&other.coords)
                .map(|(a, b)| a + alpha * b)
                .collect(),
        }
    }

    pub fn add(&self, other: &Vector) -> Vector {
        self.axpy(1.0, other)
    }

    pub fn sub(&self, other: &Vector) -> Vector {
        self.axpy(-1.0, other)
    }

    /// Same coordinates, reinterpreted in another space of equal dimension.
    pub fn in_space(&self, space: SpaceSpec) -> Result<Vector> {
        Vector::new(space, self.coords.clone())
    }

    fn map(&self, f: impl Fn(f64) -> f64) -> Vector {
        Vector {
            space: self.space,
            coords: self.coords.iter().map(|&c| f(c)).collect(),
        }
    }
}

/// An element of the dual space acting through the coordinate pairing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "VectorRepr")]
pub struct DualFunctional {
    space: SpaceSpec,
    #[serde(rename = "coords")]
    coeffs: Vec<f64>,
}

impl TryFrom<VectorRepr> for DualFunctional {
    type Error = Error;

    fn try_from(r: VectorRepr) -> Result<Self> {
        DualFunctional::new(r.space, r.coords)
    }
}

impl DualFunctional {
    pub fn new(space: SpaceSpec, coeffs: Vec<f64>) -> Result<Self> {
        check_coords(&space, &coeffs)?;
        Ok(Self { space, coeffs })
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn space(&self) -> &SpaceSpec {
        &self.space
    }

    pub fn apply(&self, x: &Vector) -> f64 {
        dot(&self.coeffs, x.coords())
    }

    /// Operator norm, which for l^p is the l^q norm of the coefficients.
    pub fn norm(&self) -> f64 {
        lq_norm(&self.coeffs, self.space.exponent.q)
    }

    pub fn neg(&self) -> DualFunctional {
        DualFunctional {
            space: self.space,
            coeffs: self.coeffs.iter().map(|c| -c).collect(),
        }
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn sgn(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// `(Σ |x_k|^p)^(1/p)`, rescaled by the largest entry to stay in range.
pub fn lp_norm(x: &[f64], p: PExponent) -> f64 {
    power_norm(x, p.p)
}

/// Norm in the dual space: `l^q`, or the max norm when `q = ∞`.
pub fn lq_norm(x: &[f64], q: Conjugate) -> f64 {
    match q {
        Conjugate::Infinite => x.iter().fold(0.0, |m, v| m.max(v.abs())),
        Conjugate::Finite(q) => power_norm(x, q),
    }
}

fn power_norm(x: &[f64], r: f64) -> f64 {
    if r == 1.0 {
        return x.iter().map(|v| v.abs()).sum();
    }
    let m = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if m == 0.0 {
        return 0.0;
    }
    if r == 2.0 {
        return m * x.iter().map(|v| (v / m) * (v / m)).sum::<f64>().sqrt();
    }
    m * x.iter().map(|v| (v.abs() / m).powf(r)).sum::<f64>().powf(1.0 / r)
}

/// Coefficients of the unit functional in the `q`-ball attaining `‖v‖_p` at
/// `v`. `None` for the zero vector.
pub(crate) fn norming_coeffs(v: &[f64], p: PExponent) -> Option<Vec<f64>> {
    let norm = lp_norm(v, p);
    if norm == 0.0 {
        return None;
    }
    if p.is_one() {
        return Some(v.iter().map(|&c| sgn(c)).collect());
    }
    let e = p.p - 1.0;
    Some(
        v.iter()
            .map(|&c| {
                if c == 0.0 {
                    0.0
                } else {
                    sgn(c) * (c.abs() / norm).powf(e)
                }
            })
            .collect(),
    )
}

/// The point of the `p`-unit ball maximizing `x ↦ Σ φ_k x_k`; its value is
/// `‖φ‖_q`. For `p = 1` the maximizer is a signed basis vector at the first
/// largest `|φ_k|`. `None` when `φ = 0`.
pub(crate) fn norming_point(phi: &[f64], p: PExponent) -> Option<Vec<f64>> {
    match p.q {
        Conjugate::Infinite => {
            let (k, m) = phi
                .iter()
                .enumerate()
                .fold((0, 0.0f64), |best, (k, v)| if v.abs() > best.1 { (k, v.abs()) } else { best });
            if m == 0.0 {
                return None;
            }
            let mut x = vec![0.0; phi.len()];
            x[k] = sgn(phi[k]);
            Some(x)
        }
        Conjugate::Finite(q) => {
            let norm = power_norm(phi, q);
            if norm == 0.0 {
                return None;
            }
            let e = q - 1.0;
            Some(
                phi.iter()
                    .map(|&c| {
                        if c == 0.0 {
                            0.0
                        } else {
                            sgn(c) * (c.abs() / norm).powf(e)
                        }
                    })
                    .collect(),
            )
        }
    }
}

/// The functional of dual norm one that attains `‖v‖_p` at `v`.
pub fn norming_functional(v: &Vector) -> Result<DualFunctional> {
    let coeffs = norming_coeffs(v.coords(), v.exponent()).ok_or(Error::ZeroVector)?;
    Ok(DualFunctional {
        space: *v.space(),
        coeffs,
    })
}

/// Determinant of a square matrix (LU with partial pivoting).
pub fn det(m: &[Vec<f64>]) -> Result<f64> {
    crate::linalg::det(m)
}

/// A bijection of `{0, …, n-1}` stored as its image list.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Permutation {
    images: Vec<usize>,
}

impl Permutation {
    pub fn new(images: Vec<usize>) -> Result<Self> {
        let n = images.len();
        let mut seen = vec![false; n];
        for &i in &images {
            if i >= n || std::mem::replace(&mut seen[i], true) {
                return Err(Error::Range(format!("{images:?} is not a permutation")));
            }
        }
        Ok(Self { images })
    }

    /// From the one-based image notation, e.g. `[2, 3, 1]`.
    pub fn from_one_based(images: &[usize]) -> Result<Self> {
        if images.contains(&0) {
            return Err(Error::Range("one-based images cannot contain 0".into()));
        }
        Self::new(images.iter().map(|i| i - 1).collect())
    }

    pub fn identity(n: usize) -> Self {
        Self {
            images: (0..n).collect(),
        }
    }

    /// Swap of positions `i` and `j`.
    pub fn transposition(n: usize, i: usize, j: usize) -> Self {
        let mut p = Self::identity(n);
        p.images.swap(i, j);
        p
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    pub fn images(&self) -> &[usize] {
        &self.images
    }

    pub fn apply(&self, i: usize) -> usize {
        self.images[i]
    }

    /// `(self ∘ other)(i) = self(other(i))`.
    pub fn compose(&self, other: &Permutation) -> Permutation {
        assert_eq!(self.len(), other.len());
        Permutation {
            images: other.images.iter().map(|&i| self.images[i]).collect(),
        }
    }

    /// +1 for even, -1 for odd permutations (parity of `n - #cycles`).
    pub fn sign(&self) -> i32 {
        let n = self.images.len();
        let mut seen = vec![false; n];
        let mut cycles = 0;
        for start in 0..n {
            if seen[start] {
                continue;
            }
            cycles += 1;
            let mut i = start;
            while !seen[i] {
                seen[i] = true;
                i = self.images[i];
            }
        }
        if (n - cycles).is_multiple_of(2) {
            1
        } else {
            -1
        }
    }

    /// All `n!` permutations in lexicographic order of their image lists.
    pub fn all(n: usize) -> impl Iterator<Item = Permutation> {
        use itertools::Itertools;
        (0..n)
            .permutations(n)
            .map(|images| Permutation { images })
    }
}

pub fn permutation_sign(sigma: &Permutation) -> i32 {
    sigma.sign()
}

/// Shape of randomly generated vectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Conditioning {
    /// Coordinates uniform in `[-1, 1]`.
    Generic,
    /// A positive multiple of a fixed per-dimension direction plus a
    /// perturbation of size `NEAR_DEPENDENT_SCALE` per coordinate. Vectors
    /// drawn with different seeds are therefore nearly parallel.
    NearDependent,
    /// Generic, rescaled to `‖x‖_p = 1`.
    UnitSphere,
}

pub const NEAR_DEPENDENT_SCALE: f64 = 1e-6;

const BASE_DIRECTION_SEED: u64 = 0x6e64_7561_6c5f_6469;

/// SplitMix64 finalizer, used to derive independent sub-seeds.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub(crate) fn uniform_coords<R: Rng>(rng: &mut R, d: usize) -> Vec<f64> {
    (0..d).map(|_| rng.gen_range(-1.0..=1.0)).collect()
}

fn nonzero_coords<R: Rng>(rng: &mut R, d: usize) -> Vec<f64> {
    loop {
        let c = uniform_coords(rng, d);
        if c.iter().map(|v| v * v).sum::<f64>() > 1e-6 {
            return c;
        }
    }
}

/// Unit vector (Euclidean) shared by every near-dependent draw in dimension `d`.
pub fn near_dependent_base(d: usize) -> Vec<f64> {
    let mut r = rng(derive_seed(BASE_DIRECTION_SEED, d as u64));
    let c = nonzero_coords(&mut r, d);
    let n = c.iter().map(|v| v * v).sum::<f64>().sqrt();
    c.into_iter().map(|v| v / n).collect()
}

/// Deterministic random vector for `seed`.
pub fn random_vector(spec: &SpaceSpec, seed: u64, conditioning: Conditioning) -> Vector {
    let mut r = rng(seed);
    let d = spec.dim();
    let coords = match conditioning {
        Conditioning::Generic => uniform_coords(&mut r, d),
        Conditioning::UnitSphere => {
            let c = nonzero_coords(&mut r, d);
            let n = lp_norm(&c, spec.exponent());
            c.into_iter().map(|v| v / n).collect()
        }
        Conditioning::NearDependent => {
            let scale = r.gen_range(0.5..=2.0);
            near_dependent_base(d)
                .into_iter()
                .map(|b| scale * b + NEAR_DEPENDENT_SCALE * r.gen_range(-1.0..=1.0))
                .collect()
        }
    };
    Vector {
        space: *spec,
        coords,
    }
}

/// `n` vectors drawn with seeds derived from `seed`.
pub fn random_tuple(
    spec: &SpaceSpec,
    n: usize,
    seed: u64,
    conditioning: Conditioning,
) -> Vec<Vector> {
    (0..n)
        .map(|i| random_vector(spec, derive_seed(seed, i as u64), conditioning))
        .collect()
}

/// Checks that every vector of `xs` lives in one space and returns it.
pub(crate) fn common_space(xs: &[Vector]) -> Result<Option<SpaceSpec>> {
    let Some(first) = xs.first() else {
        return Ok(None);
    };
    for x in &xs[1..] {
        if x.dim() != first.dim() {
            return Err(Error::Dimension {
                expected: first.dim(),
                found: x.dim(),
            });
        }
        if x.space() != first.space() {
            return Err(Error::MixedSpaces);
        }
    }
    Ok(Some(*first.space()))
}
