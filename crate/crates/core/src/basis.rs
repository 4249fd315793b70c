//! Dictionary functions, the expanded design `Psi(X_i)` and the smoothing
//! factors `M_j = R_j^T R_j` built from second derivatives.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg::{dot, Matrix};
use crate::survival::SurvivalDataset;

/// Default regularization added to `M_j` before factorization.
pub const DEFAULT_EPS_R: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BasisFamily {
    /// Indicators of `d` equal-width bins; the last bin is closed.
    #[serde(alias = "step-indicator", alias = "step_indicator")]
    Step,
    /// Monomials `1, x, ..., x^(d-1)`.
    Polynomial,
    /// Clamped cubic B-splines with `d - 4` uniform interior knots.
    #[serde(alias = "cubic-bspline", alias = "cubic_bspline", alias = "b-spline")]
    Bspline,
}

impl BasisFamily {
    pub fn name(self) -> &'static str {
        match self {
            Self::Step => "step",
            Self::Polynomial => "polynomial",
            Self::Bspline => "bspline",
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDictionarySpec {
    family: BasisFamily,
    d: usize,
    domain: [f64; 2],
}

/// A dictionary `Psi_1..Psi_d` on `[a, b]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawDictionarySpec")]
pub struct DictionarySpec {
    family: BasisFamily,
    d: usize,
    domain: [f64; 2],
    #[serde(skip)]
    knots: Vec<f64>,
}

impl TryFrom<RawDictionarySpec> for DictionarySpec {
    type Error = String;
    fn try_from(raw: RawDictionarySpec) -> core::result::Result<Self, String> {
        Self::new(raw.family, raw.d, raw.domain[0], raw.domain[1]).map_err(|e| format!("{e}"))
    }
}

impl DictionarySpec {
    pub fn new(family: BasisFamily, d: usize, lower: f64, upper: f64) -> Result<Self> {
        if d == 0 {
            return Err(invalid("dictionary.d", "must be positive"));
        }
        if family == BasisFamily::Bspline && d < 4 {
            return Err(invalid("dictionary.d", "cubic B-splines need d >= 4"));
        }
        if !(lower.is_finite() && upper.is_finite() && lower < upper) {
            return Err(invalid(
                "dictionary.domain",
                format!("[{lower}, {upper}] is not a proper interval"),
            ));
        }
        let knots = if family == BasisFamily::Bspline {
            let interior = d - 4;
            let mut k = vec![lower; 4];
            let h = (upper - lower) / (interior + 1) as f64;
            k.extend((1..=interior).map(|i| lower + h * i as f64));
            k.extend([upper; 4]);
            k
        } else {
            Vec::new()
        };
        let spec = Self {
            family,
            d,
            domain: [lower, upper],
            knots,
        };
        spec.check_bound_on_grid()?;
        Ok(spec)
    }

    pub fn family(&self) -> BasisFamily {
        self.family
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn domain(&self) -> [f64; 2] {
        self.domain
    }

    /// Knot vector of the B-spline family (empty otherwise).
    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    /// `C = sup_k sup_x |Psi_k(x)|`.
    pub fn bound(&self) -> f64 {
        let [a, b] = self.domain;
        match self.family {
            BasisFamily::Step | BasisFamily::Bspline => 1.0,
            BasisFamily::Polynomial => (0..self.d as i32)
                .map(|k| libm::pow(a.abs(), k as f64).max(libm::pow(b.abs(), k as f64)))
                .fold(1.0, f64::max),
        }
    }

    fn check_bound_on_grid(&self) -> Result<()> {
        let [a, b] = self.domain;
        let c = self.bound();
        let mut psi = vec![0.0; self.d];
        for k in 0..=1000 {
            self.evaluate_into(a + (b - a) * k as f64 / 1000.0, &mut psi)?;
            if psi.iter().any(|v| !(v.abs() <= c * (1.0 + 1e-12))) {
                return Err(invalid("dictionary", "basis exceeds its bound C"));
            }
        }
        Ok(())
    }

    fn check_domain(&self, x: f64) -> Result<()> {
        let [a, b] = self.domain;
        if x >= a && x <= b {
            Ok(())
        } else {
            Err(Error::OutOfDomain {
                x,
                lower: a,
                upper: b,
            })
        }
    }

    pub fn evaluate(&self, x: f64) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.d];
        self.evaluate_into(x, &mut out)?;
        Ok(out)
    }

    /// Writes `(Psi_1(x), ..., Psi_d(x))` into `out`.
    pub fn evaluate_into(&self, x: f64, out: &mut [f64]) -> Result<()> {
        self.check_domain(x)?;
        let [a, b] = self.domain;
        match self.family {
            BasisFamily::Step => {
                out.fill(0.0);
                let k = libm::floor((x - a) / (b - a) * self.d as f64) as usize;
                out[k.min(self.d - 1)] = 1.0;
            }
            BasisFamily::Polynomial => {
                let mut v = 1.0;
                for o in out.iter_mut() {
                    *o = v;
                    v *= x;
                }
            }
            BasisFamily::Bspline => {
                let b = self.bspline_all(x);
                out.copy_from_slice(&b[3][..self.d]);
            }
        }
        Ok(())
    }

    /// Writes `(Psi_1''(x), ..., Psi_d''(x))` into `out`.
    pub fn second_derivative_into(&self, x: f64, out: &mut [f64]) -> Result<()> {
        self.check_domain(x)?;
        match self.family {
            BasisFamily::Step => return Err(Error::NotDifferentiable("step")),
            BasisFamily::Polynomial => {
                for (k, o) in out.iter_mut().enumerate() {
                    *o = if k < 2 {
                        0.0
                    } else {
                        (k * (k - 1)) as f64 * libm::pow(x, (k - 2) as f64)
                    };
                }
            }
            BasisFamily::Bspline => {
                let t = &self.knots;
                let b = self.bspline_all(x);
                let ratio = |num: f64, den: f64| if den > 0.0 { num / den } else { 0.0 };
                // First derivatives of the quadratic pieces, then the cubic second derivatives.
                let d3: Vec<f64> = (0..self.d + 1)
                    .map(|i| {
                        2.0 * (ratio(b[1][i], t[i + 2] - t[i])
                            - ratio(b[1][i + 1], t[i + 3] - t[i + 1]))
                    })
                    .collect();
                for (i, o) in out.iter_mut().enumerate() {
                    *o = 3.0 * (ratio(d3[i], t[i + 3] - t[i]) - ratio(d3[i + 1], t[i + 4] - t[i + 1]));
                }
            }
        }
        Ok(())
    }

    /// Cox-de Boor table: `table[k-1][i] = B_{i,k}(x)` for orders 1..=4.
    fn bspline_all(&self, x: f64) -> [Vec<f64>; 4] {
        let t = &self.knots;
        let m = t.len() - 1;
        // Span: last non-degenerate interval containing x, closed at the right end.
        let mut span = 3;
        for i in 3..self.d {
            if t[i] <= x && t[i] < t[i + 1] {
                span = i;
            }
        }
        let mut table: [Vec<f64>; 4] = Default::default();
        table[0] = vec![0.0; m];
        table[0][span] = 1.0;
        for k in 2..=4 {
            let prev = &table[k - 2];
            let len = m + 1 - k;
            let mut cur = vec![0.0; len];
            for (i, c) in cur.iter_mut().enumerate() {
                let left = t[i + k - 1] - t[i];
                let right = t[i + k] - t[i + 1];
                let mut v = 0.0;
                if left > 0.0 {
                    v += (x - t[i]) / left * prev[i];
                }
                if right > 0.0 {
                    v += (t[i + k] - x) / right * prev[i + 1];
                }
                *c = v;
            }
            table[k - 1] = cur;
        }
        table
    }

    /// Intervals on which the second derivatives are polynomial.
    fn pieces(&self) -> Vec<(f64, f64)> {
        match self.family {
            BasisFamily::Bspline => self
                .knots
                .windows(2)
                .filter(|w| w[1] > w[0])
                .map(|w| (w[0], w[1]))
                .collect(),
            _ => vec![(self.domain[0], self.domain[1])],
        }
    }

    /// `M_kl = int Psi_k'' Psi_l''` by 32-point Gauss-Legendre per piece.
    pub fn second_derivative_gram(&self) -> Result<Matrix> {
        if self.family == BasisFamily::Step {
            return Err(Error::NotDifferentiable("step"));
        }
        let (nodes, weights) = gauss_legendre(32);
        let d = self.d;
        let mut m = Matrix::zeros(d, d);
        let mut psi = vec![0.0; d];
        for (lo, hi) in self.pieces() {
            let half = 0.5 * (hi - lo);
            let mid = 0.5 * (hi + lo);
            for (&u, &w) in nodes.iter().zip(&weights) {
                self.second_derivative_into(mid + half * u, &mut psi)?;
                for k in 0..d {
                    for l in 0..d {
                        m[(k, l)] += w * half * psi[k] * psi[l];
                    }
                }
            }
        }
        Ok(m)
    }
}

/// Nodes and weights of the `n`-point Gauss-Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = libm::cos(core::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5));
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            if n == 1 {
                p0 = 1.0;
                p1 = z;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = -z;
        nodes[n - 1 - i] = z;
        let w = 2.0 / ((1.0 - z * z) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// Column centering and scaling applied by [`DesignExpansion::standardized`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub means: Vec<f64>,
    pub scales: Vec<f64>,
}

/// The `n x (p d)` expanded design. Group `j` occupies columns `j d..(j+1) d`.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignExpansion {
    matrix: Matrix,
    p: usize,
    d: usize,
    bound: f64,
    standardization: Option<Standardization>,
}

impl DesignExpansion {
    /// Wraps an arbitrary matrix; the bound is its largest absolute entry.
    pub fn from_matrix(matrix: Matrix, p: usize, d: usize) -> Result<Self> {
        crate::error::check_len(p * d, matrix.cols())?;
        let bound = matrix.max_abs();
        Ok(Self {
            matrix,
            p,
            d,
            bound,
            standardization: None,
        })
    }

    pub fn n(&self) -> usize {
        self.matrix.rows()
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn d(&self) -> usize {
        self.d
    }

    /// Number of coefficients `p d`.
    pub fn dim(&self) -> usize {
        self.matrix.cols()
    }

    /// Uniform bound `C` on the entries.
    pub fn bound(&self) -> f64 {
        self.bound
    }

    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }

    pub fn row(&self, i: usize) -> &[f64] {
        self.matrix.row(i)
    }

    pub fn standardization(&self) -> Option<&Standardization> {
        self.standardization.as_ref()
    }

    /// `f_b(X_i) = b^T Psi(X_i)` for every row.
    pub fn linear_predictor(&self, b: &[f64]) -> Vec<f64> {
        self.matrix.mul_vec(b)
    }

    /// Copy with every column centered and scaled to unit variance.
    /// Constant columns are only centered.
    pub fn standardized(&self) -> Self {
        let (n, k) = (self.n(), self.dim());
        let mut means = vec![0.0; k];
        let mut scales = vec![1.0; k];
        for i in 0..n {
            for (m, v) in means.iter_mut().zip(self.row(i)) {
                *m += v / n as f64;
            }
        }
        for (c, s) in scales.iter_mut().enumerate() {
            let var = (0..n)
                .map(|i| {
                    let dv = self.matrix[(i, c)] - means[c];
                    dv * dv
                })
                .sum::<f64>()
                / n as f64;
            if var > 0.0 {
                *s = libm::sqrt(var);
            }
        }
        let mut matrix = self.matrix.clone();
        for i in 0..n {
            for (c, v) in matrix.row_mut(i).iter_mut().enumerate() {
                *v = (*v - means[c]) / scales[c];
            }
        }
        let bound = matrix.max_abs();
        Self {
            matrix,
            p: self.p,
            d: self.d,
            bound,
            standardization: Some(Standardization { means, scales }),
        }
    }
}

/// Expands raw covariate rows with `spec`.
pub fn expand_covariates(rows: &[Vec<f64>], spec: &DictionarySpec) -> Result<DesignExpansion> {
    let p = rows.first().map_or(0, Vec::len);
    let d = spec.d();
    let [lower, upper] = spec.domain();
    let mut matrix = Matrix::zeros(rows.len(), p * d);
    for (row, x) in rows.iter().enumerate() {
        crate::error::check_len(p, x.len())?;
        let dst = matrix.row_mut(row);
        for (column, &v) in x.iter().enumerate() {
            spec.evaluate_into(v, &mut dst[column * d..(column + 1) * d])
                .map_err(|_| Error::CovariateOutOfBounds {
                    row,
                    column,
                    value: v,
                    lower,
                    upper,
                })?;
        }
    }
    Ok(DesignExpansion {
        matrix,
        p,
        d,
        bound: spec.bound(),
        standardization: None,
    })
}

/// Expands the dataset's covariates.
pub fn expand_design(ds: &SurvivalDataset, spec: &DictionarySpec) -> Result<DesignExpansion> {
    let rows: Vec<Vec<f64>> = ds.records().iter().map(|r| r.covariates.clone()).collect();
    expand_covariates(&rows, spec)
}

/// Per-group smoothing matrices `M_j` and upper-triangular factors `R_j`
/// with `R_j^T R_j = M_j + eps_R I`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmoothingFactors {
    grams: Vec<Matrix>,
    factors: Vec<Matrix>,
    eps_r: f64,
}

impl SmoothingFactors {
    /// Factors `M_j + eps_r I` for each supplied `M_j`.
    pub fn from_grams(grams: Vec<Matrix>, eps_r: f64) -> Result<Self> {
        if !(eps_r >= 0.0) {
            return Err(invalid("eps_R", "must be nonnegative"));
        }
        let mut factors = Vec::with_capacity(grams.len());
        for m in &grams {
            let mut reg = m.clone();
            for k in 0..m.rows() {
                reg[(k, k)] += eps_r;
            }
            factors.push(reg.cholesky()?.transpose());
        }
        Ok(Self {
            grams,
            factors,
            eps_r,
        })
    }

    /// Uses the given upper-triangular `R_j` directly; `M_j = R_j^T R_j`.
    pub fn from_factors(factors: Vec<Matrix>) -> Result<Self> {
        let mut grams = Vec::with_capacity(factors.len());
        for (group, r) in factors.iter().enumerate() {
            let upper = (0..r.rows()).all(|i| (0..i).all(|j| r[(i, j)] == 0.0));
            if r.rows() != r.cols() || !upper {
                return Err(invalid("factors", format!("R_{group} must be square upper-triangular")));
            }
            if r.upper_triangular_inverse().is_none() {
                return Err(Error::SingularFactor { group });
            }
            grams.push(r.transpose().matmul(r)?);
        }
        Ok(Self {
            grams,
            factors,
            eps_r: 0.0,
        })
    }

    /// `M_j = R_j = I` for `p` groups of size `d`.
    pub fn identity(p: usize, d: usize) -> Self {
        Self {
            grams: vec![Matrix::identity(d); p],
            factors: vec![Matrix::identity(d); p],
            eps_r: 0.0,
        }
    }

    pub fn groups(&self) -> usize {
        self.factors.len()
    }

    pub fn eps_r(&self) -> f64 {
        self.eps_r
    }

    /// Unregularized `M_j`.
    pub fn gram(&self, j: usize) -> &Matrix {
        &self.grams[j]
    }

    /// `M_j + eps_R I`, which equals `R_j^T R_j`.
    pub fn regularized_gram(&self, j: usize) -> Matrix {
        let mut m = self.grams[j].clone();
        for k in 0..m.rows() {
            m[(k, k)] += self.eps_r;
        }
        m
    }

    pub fn factor(&self, j: usize) -> &Matrix {
        &self.factors[j]
    }

    /// Smallest eigenvalue over the `R_j`.
    pub fn min_factor_eigenvalue(&self) -> f64 {
        // Triangular: eigenvalues are the diagonal entries.
        self.factors
            .iter()
            .flat_map(|r| (0..r.rows()).map(move |k| r[(k, k)]))
            .fold(f64::INFINITY, f64::min)
    }

    /// `b~_j = R_j b_j` blockwise.
    pub fn to_tilde(&self, b: &[f64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(b.len());
        let mut offset = 0;
        for r in &self.factors {
            out.extend(r.mul_vec(&b[offset..offset + r.cols()]));
            offset += r.cols();
        }
        out
    }

    /// `b_j = R_j^{-1} b~_j` blockwise.
    pub fn from_tilde(&self, tilde: &[f64]) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(tilde.len());
        let mut offset = 0;
        for (group, r) in self.factors.iter().enumerate() {
            let inv = r
                .upper_triangular_inverse()
                .ok_or(Error::SingularFactor { group })?;
            out.extend(inv.mul_vec(&tilde[offset..offset + r.cols()]));
            offset += r.cols();
        }
        Ok(out)
    }
}

/// `M_j` from the dictionary and its regularized factor, one copy per covariate.
pub fn smoothing_factors(spec: &DictionarySpec, eps_r: f64, p: usize) -> Result<SmoothingFactors> {
    let m = spec.second_derivative_gram()?;
    SmoothingFactors::from_grams(vec![m; p], eps_r)
}

/// Right-multiplies block `j` of every row by `R_j^{-1}`.
pub fn reparametrize_design(
    design: &DesignExpansion,
    factors: &SmoothingFactors,
) -> Result<DesignExpansion> {
    crate::error::check_len(design.p(), factors.groups())?;
    let d = design.d();
    let mut inverses = Vec::with_capacity(factors.groups());
    for (group, r) in factors.factors.iter().enumerate() {
        crate::error::check_len(d, r.rows())?;
        inverses.push(
            r.upper_triangular_inverse()
                .ok_or(Error::SingularFactor { group })?,
        );
    }
    let mut matrix = Matrix::zeros(design.n(), design.dim());
    for i in 0..design.n() {
        let src = design.row(i);
        let dst = matrix.row_mut(i);
        for (j, inv) in inverses.iter().enumerate() {
            let block = &src[j * d..(j + 1) * d];
            for c in 0..d {
                dst[j * d + c] = (0..d).map(|k| block[k] * inv[(k, c)]).sum();
            }
        }
    }
    DesignExpansion::from_matrix(matrix, design.p(), d)
}

/// `f_b` evaluated on the rows: convenience for `design.linear_predictor`.
pub fn f_values(design: &DesignExpansion, b: &[f64]) -> Vec<f64> {
    (0..design.n()).map(|i| dot(design.row(i), b)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::survival::{CovariateBounds, SurvivalRecord};

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn step_bins() {
        let s = DictionarySpec::new(BasisFamily::Step, 4, 0.0, 1.0).unwrap();
        assert_eq!(s.evaluate(0.3).unwrap(), vec![0.0, 1.0, 0.0, 0.0]);
        assert_eq!(s.evaluate(1.0).unwrap(), vec![0.0, 0.0, 0.0, 1.0]);
        assert_eq!(s.evaluate(0.0).unwrap(), vec![1.0, 0.0, 0.0, 0.0]);
        assert!(matches!(s.evaluate(1.5), Err(Error::OutOfDomain { .. })));
    }

    #[test]
    fn polynomial_values_and_bound() {
        let s = DictionarySpec::new(BasisFamily::Polynomial, 3, 0.0, 1.0).unwrap();
        assert_eq!(s.evaluate(0.0).unwrap(), vec![1.0, 0.0, 0.0]);
        assert_eq!(s.evaluate(0.5).unwrap(), vec![1.0, 0.5, 0.25]);
        let s = DictionarySpec::new(BasisFamily::Polynomial, 4, -2.0, 1.0).unwrap();
        assert_eq!(s.bound(), 8.0);
    }

    #[test]
    fn bspline_partition_of_unity() {
        for d in [4, 5, 6, 9] {
            let s = DictionarySpec::new(BasisFamily::Bspline, d, 0.0, 1.0).unwrap();
            for x in [0.0, 0.37, 0.5, 0.999, 1.0] {
                let v = s.evaluate(x).unwrap();
                assert!(close(v.iter().sum::<f64>(), 1.0, 1e-12), "d={d} x={x}");
                assert!(v.iter().all(|&b| b >= 0.0));
            }
        }
    }

    #[test]
    fn bspline_second_derivative_matches_differences() {
        let s = DictionarySpec::new(BasisFamily::Bspline, 7, 0.0, 2.0).unwrap();
        let h = 1e-4;
        for x in [0.13, 0.61, 1.27, 1.9] {
            let mut dd = vec![0.0; 7];
            s.second_derivative_into(x, &mut dd).unwrap();
            let (a, b, c) = (
                s.evaluate(x - h).unwrap(),
                s.evaluate(x).unwrap(),
                s.evaluate(x + h).unwrap(),
            );
            for k in 0..7 {
                let fd = (a[k] - 2.0 * b[k] + c[k]) / (h * h);
                assert!(close(dd[k], fd, 1e-4 * (1.0 + fd.abs())), "x={x} k={k}: {} vs {fd}", dd[k]);
            }
        }
    }

    #[test]
    fn gauss_legendre_exactness() {
        let (x, w) = gauss_legendre(32);
        assert!(close(w.iter().sum::<f64>(), 2.0, 1e-14));
        for k in 0..=63u32 {
            let got: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(k as i32)).sum();
            let want = if k % 2 == 1 { 0.0 } else { 2.0 / (k + 1) as f64 };
            assert!(close(got, want, 1e-13), "k={k}");
        }
    }

    #[test]
    fn polynomial_gram_is_analytic() {
        let s = DictionarySpec::new(BasisFamily::Polynomial, 3, 0.0, 1.0).unwrap();
        let m = s.second_derivative_gram().unwrap();
        let mut want = Matrix::zeros(3, 3);
        want[(2, 2)] = 4.0;
        assert!(m.max_abs_diff(&want) < 1e-12);

        let (a, b) = (-0.5, 1.5);
        let s = DictionarySpec::new(BasisFamily::Polynomial, 6, a, b).unwrap();
        let m = s.second_derivative_gram().unwrap();
        for k in 0..6usize {
            for l in 0..6usize {
                let want = if k < 2 || l < 2 {
                    0.0
                } else {
                    let e = (k + l - 3) as i32;
                    (k * (k - 1) * l * (l - 1)) as f64 * (b.powi(e) - a.powi(e)) / e as f64
                };
                assert!(close(m[(k, l)], want, 1e-12 * (1.0 + want.abs())), "{k},{l}");
            }
        }
    }

    #[test]
    fn linear_family_factor_is_sqrt_eps() {
        let s = DictionarySpec::new(BasisFamily::Polynomial, 2, 0.0, 1.0).unwrap();
        let f = smoothing_factors(&s, 1e-8, 1).unwrap();
        assert_eq!(f.gram(0).max_abs(), 0.0);
        let want = {
            let mut m = Matrix::identity(2);
            m[(0, 0)] = 1e-4;
            m[(1, 1)] = 1e-4;
            m
        };
        assert!(f.factor(0).max_abs_diff(&want) < 1e-18);
    }

    #[test]
    fn bspline_factor_reconstructs_gram() {
        let s = DictionarySpec::new(BasisFamily::Bspline, 6, 0.0, 1.0).unwrap();
        let f = smoothing_factors(&s, DEFAULT_EPS_R, 2).unwrap();
        let m = f.gram(0);
        assert!(m.is_symmetric(1e-10));
        assert!(m.min_eigenvalue() >= -1e-10);
        let r = f.factor(0);
        let rtr = r.transpose().matmul(r).unwrap();
        assert!(rtr.max_abs_diff(&f.regularized_gram(0)) <= 1e-8);
    }

    #[test]
    fn step_family_has_no_gram() {
        let s = DictionarySpec::new(BasisFamily::Step, 3, 0.0, 1.0).unwrap();
        assert_eq!(smoothing_factors(&s, 1e-8, 1), Err(Error::NotDifferentiable("step")));
    }

    #[test]
    fn expand_and_reparametrize() {
        let ds = SurvivalDataset::new(
            vec![
                SurvivalRecord::new(1.0, true, vec![0.2, 0.7]),
                SurvivalRecord::new(2.0, false, vec![0.9, 0.1]),
            ],
            CovariateBounds::default(),
            None,
        )
        .unwrap();
        let step = DictionarySpec::new(BasisFamily::Step, 2, 0.0, 1.0).unwrap();
        let x = expand_design(&ds, &step).unwrap();
        assert_eq!(x.row(0), &[1.0, 0.0, 0.0, 1.0]);
        assert_eq!(x.row(1), &[0.0, 1.0, 1.0, 0.0]);
        assert!(x.linear_predictor(&[0.0; 4]).iter().all(|&v| v == 0.0));

        let mut r = Matrix::identity(2);
        r[(0, 0)] = 2.0;
        r[(1, 1)] = 2.0;
        let f = SmoothingFactors::from_factors(vec![r.clone(), r]).unwrap();
        let y = reparametrize_design(&x, &f).unwrap();
        assert_eq!(y.row(0), &[0.5, 0.0, 0.0, 0.5]);
        let same = reparametrize_design(&x, &SmoothingFactors::identity(2, 2)).unwrap();
        assert_eq!(same.matrix(), x.matrix());
    }

    #[test]
    fn domain_violation_names_record_and_covariate() {
        let spec = DictionarySpec::new(BasisFamily::Polynomial, 2, 0.0, 0.5).unwrap();
        let err = expand_covariates(&[vec![0.1, 0.2], vec![0.3, 0.8]], &spec).unwrap_err();
        assert!(matches!(err, Error::CovariateOutOfBounds { row: 1, column: 1, .. }));
    }
}
