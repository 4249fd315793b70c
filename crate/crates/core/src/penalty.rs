//! Group penalty functions `sum_j |G_j|^{1/gamma_j*} rho(||b_j||_{gamma_j})`,
//! their dual norms and proximal operators, the smooth-selection variant and
//! latent duplication for overlapping groups.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use serde::de::{self, Deserializer, Visitor};
use serde::{Deserialize, Serialize, Serializer};

use crate::basis::{DesignExpansion, SmoothingFactors};
use crate::error::{check_len, invalid, Error, Result};
use crate::linalg::{norm1, norm2, norm_inf, Matrix};

/// A norm exponent `gamma >= 1`, possibly infinite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Exponent {
    Finite(f64),
    Infinity,
}

impl Exponent {
    pub const ONE: Self = Self::Finite(1.0);
    pub const TWO: Self = Self::Finite(2.0);
    pub const INF: Self = Self::Infinity;

    pub fn new(gamma: f64) -> Result<Self> {
        if gamma == f64::INFINITY {
            Ok(Self::Infinity)
        } else if gamma >= 1.0 {
            Ok(Self::Finite(gamma))
        } else {
            Err(Error::InvalidExponent(gamma))
        }
    }

    pub fn value(self) -> f64 {
        match self {
            Self::Finite(g) => g,
            Self::Infinity => f64::INFINITY,
        }
    }

    /// `1 / gamma`.
    pub fn reciprocal(self) -> f64 {
        match self {
            Self::Finite(g) => 1.0 / g,
            Self::Infinity => 0.0,
        }
    }

    /// Hoelder conjugate `gamma*`.
    pub fn conjugate(self) -> Self {
        match self {
            Self::Finite(g) if g == 1.0 => Self::Infinity,
            Self::Finite(g) => Self::Finite(g / (g - 1.0)),
            Self::Infinity => Self::ONE,
        }
    }

    pub fn norm(self, x: &[f64]) -> f64 {
        match self {
            Self::Infinity => norm_inf(x),
            Self::Finite(g) if g == 1.0 => norm1(x),
            Self::Finite(g) if g == 2.0 => norm2(x),
            Self::Finite(g) => {
                let m = norm_inf(x);
                if m == 0.0 {
                    return 0.0;
                }
                let s: f64 = x.iter().map(|v| libm::pow(v.abs() / m, g)).sum();
                m * libm::pow(s, 1.0 / g)
            }
        }
    }

    /// Group scaling `size^{1/gamma*}`: 1 for the l1 norm, `sqrt(size)` for
    /// l2, `size` for l-infinity.
    pub fn scaling(self, size: usize) -> f64 {
        libm::pow(size as f64, self.conjugate().reciprocal())
    }
}

impl fmt::Display for Exponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Finite(g) => write!(f, "{g}"),
            Self::Infinity => f.write_str("inf"),
        }
    }
}

impl Serialize for Exponent {
    fn serialize<S: Serializer>(&self, s: S) -> core::result::Result<S::Ok, S::Error> {
        match self {
            Self::Finite(g) => s.serialize_f64(*g),
            Self::Infinity => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Exponent {
    fn deserialize<D: Deserializer<'de>>(d: D) -> core::result::Result<Self, D::Error> {
        struct V;
        impl Visitor<'_> for V {
            type Value = Exponent;
            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a number >= 1 or \"inf\"")
            }
            fn visit_f64<E: de::Error>(self, v: f64) -> core::result::Result<Exponent, E> {
                Exponent::new(v).map_err(|e| E::custom(format!("{e}")))
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> core::result::Result<Exponent, E> {
                self.visit_f64(v as f64)
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> core::result::Result<Exponent, E> {
                self.visit_f64(v as f64)
            }
            fn visit_str<E: de::Error>(self, v: &str) -> core::result::Result<Exponent, E> {
                match v {
                    "inf" | "infinity" | "Infinity" => Ok(Exponent::Infinity),
                    _ => Err(E::custom(format!("unknown exponent {v:?}"))),
                }
            }
        }
        d.deserialize_any(V)
    }
}

/// Hoelder conjugate of `gamma`; `inf` is accepted.
pub fn holder_conjugate(gamma: f64) -> Result<Exponent> {
    Exponent::new(gamma).map(Exponent::conjugate)
}

/// Convex outer function with `rho(0) = 0` and `rho'(0+) > 0`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rho {
    #[default]
    Identity,
    /// `t + kappa t^2`.
    Quadratic { kappa: f64 },
}

impl Rho {
    pub fn value(self, t: f64) -> f64 {
        match self {
            Self::Identity => t,
            Self::Quadratic { kappa } => t + kappa * t * t,
        }
    }

    pub fn derivative(self, t: f64) -> f64 {
        match self {
            Self::Identity => 1.0,
            Self::Quadratic { kappa } => 1.0 + 2.0 * kappa * t,
        }
    }

    /// `rho'(0+)`.
    pub fn right_derivative_at_zero(self) -> f64 {
        self.derivative(0.0)
    }

    fn validate(self) -> Result<()> {
        match self {
            Self::Quadratic { kappa } if !(kappa >= 0.0 && kappa.is_finite()) => {
                Err(invalid("rho.kappa", format!("{kappa} must be nonnegative")))
            }
            _ => Ok(()),
        }
    }
}

/// Index sets `G_j` over the coefficient vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupStructure {
    groups: Vec<Vec<usize>>,
    dim: usize,
}

impl GroupStructure {
    pub fn new(groups: Vec<Vec<usize>>, dim: usize) -> Result<Self> {
        for (j, g) in groups.iter().enumerate() {
            if g.is_empty() {
                return Err(Error::EmptyGroup(j));
            }
            let mut seen = g.clone();
            seen.sort_unstable();
            seen.dedup();
            if seen.len() != g.len() {
                return Err(invalid("groups", format!("group {j} repeats a coordinate")));
            }
            if let Some(&c) = g.iter().find(|&&c| c >= dim) {
                return Err(invalid("groups", format!("group {j} has coordinate {c} >= {dim}")));
            }
        }
        Ok(Self { groups, dim })
    }

    /// `p` consecutive groups of size `d`.
    pub fn contiguous(p: usize, d: usize) -> Self {
        Self {
            groups: (0..p).map(|j| (j * d..(j + 1) * d).collect()).collect(),
            dim: p * d,
        }
    }

    pub fn len(&self) -> usize {
        self.groups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn group(&self, j: usize) -> &[usize] {
        &self.groups[j]
    }

    pub fn groups(&self) -> &[Vec<usize>] {
        &self.groups
    }

    /// For each coordinate, the groups containing it.
    pub fn overlap_map(&self) -> Vec<Vec<usize>> {
        let mut map = vec![Vec::new(); self.dim];
        for (j, g) in self.groups.iter().enumerate() {
            for &c in g {
                map[c].push(j);
            }
        }
        map
    }

    pub fn is_disjoint(&self) -> bool {
        self.overlap_map().iter().all(|o| o.len() <= 1)
    }

    /// Total size after duplicating shared coordinates.
    pub fn latent_dim(&self) -> usize {
        self.groups.iter().map(Vec::len).sum()
    }

    /// Coordinates in no group.
    pub fn unpenalized(&self) -> Vec<usize> {
        self.overlap_map()
            .iter()
            .enumerate()
            .filter(|(_, o)| o.is_empty())
            .map(|(c, _)| c)
            .collect()
    }
}

/// Block soft-thresholding: prox of `t ||.||_2`.
pub fn prox_l2(z: &[f64], t: f64) -> Vec<f64> {
    let nz = norm2(z);
    if nz <= t {
        vec![0.0; z.len()]
    } else {
        let s = 1.0 - t / nz;
        z.iter().map(|v| s * v).collect()
    }
}

/// Coordinate soft-thresholding: prox of `t ||.||_1`.
pub fn prox_l1(z: &[f64], t: f64) -> Vec<f64> {
    z.iter()
        .map(|&v| libm::copysign((v.abs() - t).max(0.0), v))
        .collect()
}

/// Prox of `t ||.||_inf` by Moreau decomposition: `z - P_{t B_1}(z)`.
pub fn prox_linf(z: &[f64], t: f64) -> Vec<f64> {
    if t <= 0.0 {
        return z.to_vec();
    }
    let p = project_l1_ball(z, t);
    z.iter().zip(&p).map(|(a, b)| a - b).collect()
}

/// Euclidean projection onto `{x : ||x||_1 <= radius}`.
pub fn project_l1_ball(v: &[f64], radius: f64) -> Vec<f64> {
    if norm1(v) <= radius {
        return v.to_vec();
    }
    if radius <= 0.0 {
        return vec![0.0; v.len()];
    }
    let theta = simplex_threshold(v.iter().map(|x| x.abs()).collect(), radius);
    v.iter()
        .map(|&x| libm::copysign((x.abs() - theta).max(0.0), x))
        .collect()
}

/// Threshold `theta` with `sum max(u_k - theta, 0) = radius` for `u >= 0`
/// whose sum exceeds `radius`.
fn simplex_threshold(mut u: Vec<f64>, radius: f64) -> f64 {
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cumulative = 0.0;
    let mut theta = 0.0;
    for (k, &uk) in u.iter().enumerate() {
        cumulative += uk;
        let t = (cumulative - radius) / (k + 1) as f64;
        if uk > t {
            theta = t;
        } else {
            break;
        }
    }
    theta
}

/// Euclidean projection onto the scaled simplex `{u >= 0, sum u = radius}`.
fn project_simplex(y: &[f64], radius: f64) -> Vec<f64> {
    let theta = {
        let mut u = y.to_vec();
        u.sort_by(|a, b| b.total_cmp(a));
        let mut cumulative = 0.0;
        let mut theta = 0.0;
        for (k, &uk) in u.iter().enumerate() {
            cumulative += uk;
            let t = (cumulative - radius) / (k + 1) as f64;
            if uk > t {
                theta = t;
            }
        }
        theta
    };
    y.iter().map(|v| (v - theta).max(0.0)).collect()
}

/// Prox of `t ||.||_gamma` for `gamma` in {1, 2, inf}.
pub fn prox_norm(gamma: Exponent, z: &[f64], t: f64) -> Result<Vec<f64>> {
    match gamma {
        Exponent::Infinity => Ok(prox_linf(z, t)),
        Exponent::Finite(g) if g == 1.0 => Ok(prox_l1(z, t)),
        Exponent::Finite(g) if g == 2.0 => Ok(prox_l2(z, t)),
        Exponent::Finite(g) => Err(Error::Unsupported(format!(
            "no proximal operator for gamma = {g}; use 1, 2 or inf"
        ))),
    }
}

/// Distance from `-g` to `w * subdiff ||.||_gamma (x)` for `x != 0`.
fn active_residual(gamma: Exponent, x: &[f64], g: &[f64], w: f64) -> f64 {
    match gamma {
        Exponent::Finite(p) if p == 2.0 => {
            let nx = norm2(x);
            norm2(&g.iter().zip(x).map(|(gk, xk)| gk + w * xk / nx).collect::<Vec<_>>())
        }
        Exponent::Finite(p) if p == 1.0 => {
            let s: f64 = g
                .iter()
                .zip(x)
                .map(|(&gk, &xk)| {
                    let r = if xk != 0.0 {
                        gk + w * xk.signum()
                    } else {
                        (gk.abs() - w).max(0.0)
                    };
                    r * r
                })
                .sum();
            libm::sqrt(s)
        }
        Exponent::Infinity => {
            let m = norm_inf(x);
            let mut off = 0.0;
            let mut y = Vec::new();
            for (&gk, &xk) in g.iter().zip(x) {
                if xk.abs() >= m * (1.0 - 1e-10) {
                    y.push(-gk * xk.signum());
                } else {
                    off += gk * gk;
                }
            }
            let proj = project_simplex(&y, w);
            let on: f64 = y.iter().zip(&proj).map(|(a, b)| (a - b) * (a - b)).sum();
            libm::sqrt(off + on)
        }
        Exponent::Finite(p) => {
            let nx = gamma.norm(x);
            let r: Vec<f64> = g
                .iter()
                .zip(x)
                .map(|(&gk, &xk)| {
                    gk + w * xk.signum() * libm::pow(xk.abs() / nx, p - 1.0)
                })
                .collect();
            norm2(&r)
        }
    }
}

/// The group penalty with its tuning parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PenaltySpec {
    pub rho: Rho,
    gammas: Vec<Exponent>,
    groups: GroupStructure,
    pub lambda: f64,
    per_group_lambda: Option<Vec<f64>>,
}

impl PenaltySpec {
    /// `gammas` may hold one exponent (shared) or one per group.
    pub fn new(
        rho: Rho,
        gammas: Vec<Exponent>,
        groups: GroupStructure,
        lambda: f64,
        per_group_lambda: Option<Vec<f64>>,
    ) -> Result<Self> {
        rho.validate()?;
        let gammas = match gammas.len() {
            1 => vec![gammas[0]; groups.len()],
            k if k == groups.len() => gammas,
            k => {
                return Err(invalid(
                    "gamma",
                    format!("{k} exponents for {} groups", groups.len()),
                ))
            }
        };
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(invalid("lambda", format!("{lambda} must be finite and >= 0")));
        }
        if let Some(pg) = &per_group_lambda {
            if pg.len() != groups.len() {
                return Err(invalid(
                    "per_group_lambda",
                    format!("{} values for {} groups", pg.len(), groups.len()),
                ));
            }
            if pg.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
                return Err(invalid("per_group_lambda", "values must be finite and >= 0"));
            }
        }
        Ok(Self {
            rho,
            gammas,
            groups,
            lambda,
            per_group_lambda,
        })
    }

    /// Group lasso: `p` groups of size `d`, `gamma = 2`, `rho` the identity.
    pub fn group_lasso(p: usize, d: usize, lambda: f64) -> Result<Self> {
        Self::uniform(p, d, Exponent::TWO, lambda)
    }

    /// `p` contiguous groups of size `d` sharing one exponent.
    pub fn uniform(p: usize, d: usize, gamma: Exponent, lambda: f64) -> Result<Self> {
        Self::new(
            Rho::Identity,
            vec![gamma],
            GroupStructure::contiguous(p, d),
            lambda,
            None,
        )
    }

    /// Copy with a different global `lambda`.
    pub fn with_lambda(&self, lambda: f64) -> Result<Self> {
        Self::new(
            self.rho,
            self.gammas.clone(),
            self.groups.clone(),
            lambda,
            self.per_group_lambda.clone(),
        )
    }

    pub fn dim(&self) -> usize {
        self.groups.dim()
    }

    pub fn groups(&self) -> &GroupStructure {
        &self.groups
    }

    pub fn gammas(&self) -> &[Exponent] {
        &self.gammas
    }

    pub fn gamma(&self, j: usize) -> Exponent {
        self.gammas[j]
    }

    pub fn per_group_lambda(&self) -> Option<&[f64]> {
        self.per_group_lambda.as_deref()
    }

    /// `|G_j|^{1/gamma_j*}`.
    pub fn scaling(&self, j: usize) -> f64 {
        self.gammas[j].scaling(self.groups.group(j).len())
    }

    /// `lambda_j` (per-group when set, otherwise the global value).
    pub fn group_lambda(&self, j: usize) -> f64 {
        self.per_group_lambda.as_ref().map_or(self.lambda, |v| v[j])
    }

    /// `lambda_j |G_j|^{1/gamma_j*}`.
    pub fn group_weight(&self, j: usize) -> f64 {
        self.group_lambda(j) * self.scaling(j)
    }

    pub fn block(&self, b: &[f64], j: usize) -> Vec<f64> {
        self.groups.group(j).iter().map(|&c| b[c]).collect()
    }

    pub fn group_norm(&self, b: &[f64], j: usize) -> f64 {
        self.gammas[j].norm(&self.block(b, j))
    }

    /// `P(b) = sum_j |G_j|^{1/gamma_j*} rho(||b_j||)`; with per-group
    /// tuning, `sum_j lambda_j |G_j|^{1/gamma_j*} rho(||b_j||)`.
    pub fn penalty_value(&self, b: &[f64]) -> Result<f64> {
        check_len(self.dim(), b.len())?;
        Ok((0..self.groups.len())
            .map(|j| {
                let lam = self.per_group_lambda.as_ref().map_or(1.0, |v| v[j]);
                lam * self.scaling(j) * self.rho.value(self.group_norm(b, j))
            })
            .sum())
    }

    /// The penalty term of the objective, `lambda P(b)` or the per-group sum.
    pub fn weighted_penalty(&self, b: &[f64]) -> Result<f64> {
        let p = self.penalty_value(b)?;
        Ok(if self.per_group_lambda.is_some() {
            p
        } else {
            self.lambda * p
        })
    }

    /// `||v_j||_{gamma_j*}`.
    pub fn dual_block_norm(&self, v: &[f64], j: usize) -> f64 {
        self.gammas[j].conjugate().norm(&self.block(v, j))
    }

    /// `lambda_j |G_j|^{1/gamma_j*} rho'(0+)`.
    pub fn threshold(&self, j: usize) -> f64 {
        self.group_weight(j) * self.rho.right_derivative_at_zero()
    }

    /// Whether `||v_j||_{gamma_j*}` is within the group threshold.
    pub fn threshold_event(&self, v: &[f64], j: usize) -> bool {
        self.dual_block_norm(v, j) <= self.threshold(j)
    }

    /// `argmin_x 0.5 ||x - z||^2 + step * weighted_penalty(x)`.
    pub fn prox(&self, z: &[f64], step: f64) -> Result<Vec<f64>> {
        check_len(self.dim(), z.len())?;
        if self.rho != Rho::Identity {
            return Err(Error::Unsupported(
                "proximal operator requires rho = identity".into(),
            ));
        }
        if !self.groups.is_disjoint() {
            return Err(Error::Unsupported(
                "overlapping groups: expand them with expand_overlap first".into(),
            ));
        }
        let mut out = z.to_vec();
        for j in 0..self.groups.len() {
            let block = self.block(z, j);
            let x = prox_norm(self.gammas[j], &block, step * self.group_weight(j))?;
            for (&c, v) in self.groups.group(j).iter().zip(x) {
                out[c] = v;
            }
        }
        Ok(out)
    }

    /// Optimality residual of `x` for `min smooth(x) + weighted_penalty(x)`
    /// given `g = grad smooth(x)`: dual-norm excess on zero groups, distance
    /// to the subdifferential on active groups, `|g_c|` on unpenalized
    /// coordinates.
    pub fn kkt_residual(&self, x: &[f64], g: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for c in self.groups.unpenalized() {
            worst = worst.max(g[c].abs());
        }
        for j in 0..self.groups.len() {
            let xj = self.block(x, j);
            let gj = self.block(g, j);
            let nx = self.gammas[j].norm(&xj);
            let w = self.group_weight(j);
            let r = if nx == 0.0 {
                (self.gammas[j].conjugate().norm(&gj) - w * self.rho.right_derivative_at_zero())
                    .max(0.0)
            } else {
                active_residual(self.gammas[j], &xj, &gj, w * self.rho.derivative(nx))
            };
            worst = worst.max(r);
        }
        worst
    }

    /// One element of the subdifferential of `weighted_penalty` at `b`
    /// (zero on inactive groups).
    pub fn subgradient(&self, b: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; b.len()];
        for j in 0..self.groups.len() {
            let xj = self.block(b, j);
            let nx = self.gammas[j].norm(&xj);
            if nx == 0.0 {
                continue;
            }
            let w = self.group_weight(j) * self.rho.derivative(nx);
            let u = norm_gradient(self.gammas[j], &xj, nx);
            for (&c, uk) in self.groups.group(j).iter().zip(u) {
                out[c] += w * uk;
            }
        }
        out
    }

    pub fn active_groups(&self, b: &[f64]) -> Vec<usize> {
        (0..self.groups.len())
            .filter(|&j| self.group_norm(b, j) > 0.0)
            .collect()
    }
}

/// An element of the subdifferential of `||.||_gamma` at `x != 0`.
fn norm_gradient(gamma: Exponent, x: &[f64], nx: f64) -> Vec<f64> {
    match gamma {
        Exponent::Infinity => {
            let k = x
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
                .map_or(0, |(k, _)| k);
            let mut u = vec![0.0; x.len()];
            u[k] = x[k].signum();
            u
        }
        Exponent::Finite(p) if p == 1.0 => x.iter().map(|v| if *v == 0.0 { 0.0 } else { v.signum() }).collect(),
        Exponent::Finite(p) => x
            .iter()
            .map(|&v| v.signum() * libm::pow(v.abs() / nx, p - 1.0))
            .collect(),
    }
}

/// Smooth-selection penalty `sum_j sqrt(d) rho(||R_j b_j||_gamma + sqrt(b_j^T M_j b_j))`
/// with `M_j` regularized so that `M_j = R_j^T R_j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmoothPenaltySpec {
    pub rho: Rho,
    gammas: Vec<Exponent>,
    pub lambda: f64,
    factors: SmoothingFactors,
    d: usize,
}

impl SmoothPenaltySpec {
    pub fn new(
        rho: Rho,
        gammas: Vec<Exponent>,
        lambda: f64,
        factors: SmoothingFactors,
    ) -> Result<Self> {
        rho.validate()?;
        let p = factors.groups();
        if p == 0 {
            return Err(invalid("factors", "no groups"));
        }
        let d = factors.factor(0).rows();
        let gammas = match gammas.len() {
            1 => vec![gammas[0]; p],
            k if k == p => gammas,
            k => return Err(invalid("gamma", format!("{k} exponents for {p} groups"))),
        };
        if let Some(g) = gammas.iter().find(|g| g.value() < 2.0) {
            return Err(invalid("gamma", format!("{g} < 2 is not allowed for the smooth penalty")));
        }
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(invalid("lambda", format!("{lambda} must be finite and >= 0")));
        }
        if (0..p).any(|j| factors.factor(j).rows() != d) {
            return Err(invalid("factors", "all groups must have the same size"));
        }
        if !(factors.min_factor_eigenvalue() > 0.0) {
            return Err(Error::SingularFactor { group: 0 });
        }
        Ok(Self {
            rho,
            gammas,
            lambda,
            factors,
            d,
        })
    }

    /// Elastic-net style instance: `gamma = 2`, `R_j = M_j = I`.
    pub fn identity_factors(p: usize, d: usize, lambda: f64) -> Result<Self> {
        Self::new(
            Rho::Identity,
            vec![Exponent::TWO],
            lambda,
            SmoothingFactors::identity(p, d),
        )
    }

    pub fn with_lambda(&self, lambda: f64) -> Result<Self> {
        Self::new(self.rho, self.gammas.clone(), lambda, self.factors.clone())
    }

    pub fn factors(&self) -> &SmoothingFactors {
        &self.factors
    }

    pub fn gammas(&self) -> &[Exponent] {
        &self.gammas
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn dim(&self) -> usize {
        self.d * self.factors.groups()
    }

    fn scale(&self) -> f64 {
        libm::sqrt(self.d as f64)
    }

    /// Penalty in the original coordinates (without `lambda`).
    pub fn value(&self, b: &[f64]) -> Result<f64> {
        check_len(self.dim(), b.len())?;
        let d = self.d;
        Ok((0..self.factors.groups())
            .map(|j| {
                let bj = &b[j * d..(j + 1) * d];
                let rb = self.factors.factor(j).mul_vec(bj);
                let quad = self.factors.regularized_gram(j).quadratic_form(bj).max(0.0);
                self.scale() * self.rho.value(self.gammas[j].norm(&rb) + libm::sqrt(quad))
            })
            .sum())
    }

    /// Penalty in the coordinates `b~_j = R_j b_j` (without `lambda`).
    pub fn reparametrized_value(&self, tilde: &[f64]) -> Result<f64> {
        check_len(self.dim(), tilde.len())?;
        let d = self.d;
        Ok((0..self.factors.groups())
            .map(|j| {
                let t = &tilde[j * d..(j + 1) * d];
                self.scale() * self.rho.value(self.gammas[j].norm(t) + norm2(t))
            })
            .sum())
    }

    /// Prox of `step * lambda * reparametrized_value`.
    pub fn prox_reparametrized(&self, z: &[f64], step: f64) -> Result<Vec<f64>> {
        check_len(self.dim(), z.len())?;
        if self.rho != Rho::Identity {
            return Err(Error::Unsupported(
                "proximal operator requires rho = identity".into(),
            ));
        }
        let t = step * self.lambda * self.scale();
        let d = self.d;
        let mut out = Vec::with_capacity(z.len());
        for j in 0..self.factors.groups() {
            let y = prox_norm(self.gammas[j], &z[j * d..(j + 1) * d], t)?;
            out.extend(prox_l2(&y, t));
        }
        Ok(out)
    }

    /// Optimality residual in reparametrized coordinates.
    pub fn kkt_residual_reparametrized(&self, x: &[f64], g: &[f64]) -> f64 {
        let d = self.d;
        let mut worst: f64 = 0.0;
        for j in 0..self.factors.groups() {
            let xj = &x[j * d..(j + 1) * d];
            let gj = &g[j * d..(j + 1) * d];
            let n2 = norm2(xj);
            let nx = self.gammas[j].norm(xj) + n2;
            let w = self.lambda * self.scale();
            let r = if n2 == 0.0 {
                (sum_norm_dual(self.gammas[j], gj) - w * self.rho.right_derivative_at_zero())
                    .max(0.0)
            } else {
                let wr = w * self.rho.derivative(nx);
                let shifted: Vec<f64> = gj.iter().zip(xj).map(|(g, x)| g + wr * x / n2).collect();
                active_residual(self.gammas[j], xj, &shifted, wr)
            };
            worst = worst.max(r);
        }
        worst
    }

    pub fn active_groups(&self, b: &[f64]) -> Vec<usize> {
        let d = self.d;
        (0..self.factors.groups())
            .filter(|&j| b[j * d..(j + 1) * d].iter().any(|v| *v != 0.0))
            .collect()
    }
}

/// Dual norm of `||.||_gamma + ||.||_2`: smallest `s` with
/// `dist_2(g, s B_{gamma*}) <= s`.
fn sum_norm_dual(gamma: Exponent, g: &[f64]) -> f64 {
    match gamma {
        Exponent::Finite(p) if p == 2.0 => 0.5 * norm2(g),
        Exponent::Infinity => {
            let dist = |s: f64| {
                let proj = project_l1_ball(g, s);
                norm2(&g.iter().zip(&proj).map(|(a, b)| a - b).collect::<Vec<_>>())
            };
            let (mut lo, mut hi) = (0.0, norm2(g));
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if dist(mid) <= mid {
                    hi = mid;
                } else {
                    lo = mid;
                }
                if hi - lo <= 1e-15 * hi {
                    break;
                }
            }
            hi
        }
        _ => {
            // Upper bound through the l2 part alone; exact for gamma = 2.
            norm2(g)
        }
    }
}

/// Latent-duplication form of an overlapping group structure.
#[derive(Debug, Clone, PartialEq)]
pub struct OverlapExpansion {
    /// Design with one column per (group, coordinate) pair, then the
    /// unpenalized coordinates.
    pub latent_design: DesignExpansion,
    /// Disjoint contiguous groups over the latent coordinates.
    pub latent_groups: GroupStructure,
    /// Original coordinate of every latent coordinate.
    pub map: Vec<usize>,
    original_dim: usize,
}

impl OverlapExpansion {
    /// Sums latent copies back into the original coordinates.
    pub fn recover(&self, latent: &[f64]) -> Vec<f64> {
        let mut b = vec![0.0; self.original_dim];
        for (&c, v) in self.map.iter().zip(latent) {
            b[c] += v;
        }
        b
    }

    /// The penalty over latent coordinates with the original exponents and tuning.
    pub fn latent_penalty(&self, spec: &PenaltySpec) -> Result<PenaltySpec> {
        PenaltySpec::new(
            spec.rho,
            spec.gammas.clone(),
            self.latent_groups.clone(),
            spec.lambda,
            spec.per_group_lambda.clone(),
        )
    }
}

/// Duplicates shared coordinates so that every latent group is disjoint.
pub fn expand_overlap(
    structure: &GroupStructure,
    design: &DesignExpansion,
) -> Result<OverlapExpansion> {
    check_len(structure.dim(), design.dim())?;
    let mut map: Vec<usize> = Vec::with_capacity(structure.latent_dim());
    let mut groups = Vec::with_capacity(structure.len());
    for (j, g) in structure.groups().iter().enumerate() {
        if g.is_empty() {
            return Err(Error::EmptyGroup(j));
        }
        groups.push((map.len()..map.len() + g.len()).collect());
        map.extend_from_slice(g);
    }
    map.extend(structure.unpenalized());
    let n = design.n();
    let mut matrix = Matrix::zeros(n, map.len());
    for i in 0..n {
        let src = design.row(i);
        for (dst, &c) in matrix.row_mut(i).iter_mut().zip(&map) {
            *dst = src[c];
        }
    }
    let k = map.len();
    Ok(OverlapExpansion {
        latent_design: DesignExpansion::from_matrix(matrix, 1, k)?,
        latent_groups: GroupStructure::new(groups, k)?,
        map,
        original_dim: structure.dim(),
    })
}

/// Human-readable list of exponents, e.g. `"2, 2, inf"`.
pub fn format_gammas(g: &[Exponent]) -> String {
    let parts: Vec<String> = g.iter().map(|e| format!("{e}")).collect();
    parts.join(", ")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn conjugates() {
        assert_eq!(holder_conjugate(2.0).unwrap(), Exponent::TWO);
        assert_eq!(holder_conjugate(1.0).unwrap(), Exponent::INF);
        assert_eq!(holder_conjugate(f64::INFINITY).unwrap(), Exponent::ONE);
        assert_eq!(holder_conjugate(3.0).unwrap(), Exponent::Finite(1.5));
        assert_eq!(holder_conjugate(0.5), Err(Error::InvalidExponent(0.5)));
    }

    #[test]
    fn scaling_table() {
        assert_eq!(Exponent::ONE.scaling(4), 1.0);
        assert_eq!(Exponent::TWO.scaling(4), 2.0);
        assert_eq!(Exponent::INF.scaling(4), 4.0);
    }

    #[test]
    fn penalty_examples() {
        let lasso = PenaltySpec::uniform(1, 1, Exponent::ONE, 1.0).unwrap();
        assert_eq!(lasso.penalty_value(&[-3.0]).unwrap(), 3.0);
        let gl = PenaltySpec::group_lasso(2, 4, 1.0).unwrap();
        let b = [1.0, 1.0, 1.0, 1.0, 0.0, 0.0, 0.0, 0.0];
        assert_eq!(gl.penalty_value(&b).unwrap(), 4.0);
        assert_eq!(gl.penalty_value(&[0.0; 8]).unwrap(), 0.0);
        assert!(matches!(gl.penalty_value(&[0.0; 3]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn dual_norms() {
        let gl = PenaltySpec::group_lasso(1, 2, 1.0).unwrap();
        assert_eq!(gl.dual_block_norm(&[3.0, -4.0], 0), 5.0);
        let l1 = PenaltySpec::uniform(1, 3, Exponent::ONE, 1.0).unwrap();
        assert_eq!(l1.dual_block_norm(&[0.5, -2.0, 1.0], 0), 2.0);
    }

    #[test]
    fn prox_examples() {
        let z = [3.0, 0.0];
        let x = prox_l2(&z, 1.0);
        assert!((x[0] - 2.0).abs() < 1e-15);
        assert_eq!(prox_l2(&[0.3, 0.4], 0.5), vec![0.0, 0.0]);
        // l-infinity: z = (2, 0.5), t = 1 -> (1, 0.5).
        let x = prox_linf(&[2.0, 0.5], 1.0);
        assert!((x[0] - 1.0).abs() < 1e-15 && (x[1] - 0.5).abs() < 1e-15);
        // whole block below the dual threshold collapses
        assert_eq!(prox_linf(&[0.4, -0.5], 1.0), vec![0.0, 0.0]);
    }

    #[test]
    fn l1_ball_projection() {
        let p = project_l1_ball(&[3.0, -1.0, 0.5], 2.0);
        assert!((norm1(&p) - 2.0).abs() < 1e-14);
        assert_eq!(p, vec![2.0, 0.0, 0.0]);
    }

    #[test]
    fn prox_requires_identity_rho() {
        let mut s = PenaltySpec::group_lasso(1, 2, 1.0).unwrap();
        s.rho = Rho::Quadratic { kappa: 1.0 };
        assert!(matches!(s.prox(&[1.0, 1.0], 1.0), Err(Error::Unsupported(_))));
    }

    #[test]
    fn smooth_penalty_examples() {
        let s = SmoothPenaltySpec::identity_factors(1, 4, 1.0).unwrap();
        assert_eq!(s.value(&[0.0; 4]).unwrap(), 0.0);
        let v = s.value(&[3.0, 0.0, 0.0, 0.0]).unwrap();
        assert!((v - 2.0 * 6.0).abs() < 1e-14);
        let err = SmoothPenaltySpec::new(
            Rho::Identity,
            vec![Exponent::ONE],
            1.0,
            SmoothingFactors::identity(1, 2),
        );
        assert!(err.is_err());
    }

    #[test]
    fn overlap_bookkeeping() {
        let x = DesignExpansion::from_matrix(
            Matrix::from_rows(&[vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0]]).unwrap(),
            1,
            3,
        )
        .unwrap();
        let s = GroupStructure::new(vec![vec![0, 1], vec![1, 2]], 3).unwrap();
        assert!(!s.is_disjoint());
        let e = expand_overlap(&s, &x).unwrap();
        assert_eq!(e.latent_design.dim(), 4);
        assert_eq!(e.latent_design.row(0), &[1.0, 2.0, 2.0, 3.0]);
        assert_eq!(e.recover(&[1.0, 2.0, 3.0, 4.0]), vec![1.0, 5.0, 4.0]);
        let disjoint = GroupStructure::contiguous(1, 3);
        let e = expand_overlap(&disjoint, &x).unwrap();
        assert_eq!(e.latent_design.matrix(), x.matrix());
        assert_eq!(GroupStructure::new(vec![vec![]], 3), Err(Error::EmptyGroup(0)));
    }

    #[test]
    fn kkt_residual_vanishes_at_prox_fixed_points() {
        // x = prox(x - g) means -g is in the scaled subdifferential.
        for gamma in [Exponent::ONE, Exponent::TWO, Exponent::INF] {
            let s = PenaltySpec::uniform(1, 3, gamma, 0.7).unwrap();
            let z = [1.3, -0.4, 1.1];
            let x = s.prox(&z, 1.0).unwrap();
            let g: Vec<f64> = x.iter().zip(&z).map(|(a, b)| a - b).collect();
            assert!(s.kkt_residual(&x, &g) < 1e-12, "{gamma}");
        }
    }
}
