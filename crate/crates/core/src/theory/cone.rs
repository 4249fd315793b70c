use alloc::vec;
use alloc::vec::Vec;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{invalid, Result};
use crate::penalty::{PenaltySpec, Rho};

/// The cone `{x : P(x_{M^c}) <= mu P(x_M)}` for a support `M` of groups.
#[derive(Debug, Clone)]
pub struct Cone<'a> {
    spec: &'a PenaltySpec,
    on_support: Vec<bool>,
    mu: f64,
}

impl<'a> Cone<'a> {
    pub fn new(spec: &'a PenaltySpec, support: &[usize], mu: f64) -> Result<Self> {
        if !(mu >= 0.0 && mu.is_finite()) {
            return Err(invalid("mu", "must be finite and non-negative"));
        }
        if support.is_empty() {
            return Err(invalid("support", "needs at least one group"));
        }
        let mut on_support = vec![false; spec.groups().len()];
        for &j in support {
            if j >= on_support.len() {
                return Err(invalid("support", alloc::format!("group {j} out of range")));
            }
            on_support[j] = true;
        }
        Ok(Self {
            spec,
            on_support,
            mu,
        })
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn spec(&self) -> &PenaltySpec {
        self.spec
    }

    pub fn on_support(&self, j: usize) -> bool {
        self.on_support[j]
    }

    pub fn support(&self) -> Vec<usize> {
        (0..self.on_support.len()).filter(|&j| self.on_support[j]).collect()
    }

    /// Penalty of one group without tuning weight.
    pub fn group_penalty(&self, x: &[f64], j: usize) -> f64 {
        self.spec.scaling(j) * self.spec.rho.value(self.spec.group_norm(x, j))
    }

    /// `(P(x_M), P(x_{M^c}))`.
    pub fn parts(&self, x: &[f64]) -> (f64, f64) {
        let (mut on, mut off) = (0.0, 0.0);
        for j in 0..self.on_support.len() {
            let v = self.group_penalty(x, j);
            if self.on_support[j] {
                on += v;
            } else {
                off += v;
            }
        }
        (on, off)
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        let (on, off) = self.parts(x);
        off <= self.mu * on * (1.0 + 1e-12)
    }

    /// Random member: Gaussian on the support and, with probability 0.7, a
    /// Gaussian off-support part shrunk to a uniform fraction of the budget.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let dim = self.spec.dim();
        let mut x: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let mut off_coords = Vec::new();
        for j in 0..self.on_support.len() {
            if !self.on_support[j] {
                off_coords.extend_from_slice(self.spec.groups().group(j));
            }
        }
        let keep_off = rng.random::<f64>() < 0.7;
        let fraction: f64 = rng.random();
        if !keep_off {
            for &c in &off_coords {
                x[c] = 0.0;
            }
            return x;
        }
        let (on, off) = self.parts(&x);
        let budget = fraction * self.mu * on;
        if off > budget {
            let s = self.off_scale(&x, &off_coords, budget);
            for &c in &off_coords {
                x[c] *= s;
            }
        }
        x
    }

    /// Largest `s` in `[0, 1]` with `P(s x_{M^c}) <= budget`.
    fn off_scale(&self, x: &[f64], off_coords: &[usize], budget: f64) -> f64 {
        let (_, off) = self.parts(x);
        if self.spec.rho == Rho::Identity {
            return if off > 0.0 { (budget / off).min(1.0) } else { 1.0 };
        }
        let mut y = x.to_vec();
        let (mut lo, mut hi) = (0.0, 1.0);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            for &c in off_coords {
                y[c] = x[c] * mid;
            }
            if self.parts(&y).1 <= budget {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    }
}

/// Inverse of `rho` on `[0, inf)`.
pub(crate) fn rho_inverse(rho: Rho, v: f64) -> f64 {
    match rho {
        Rho::Identity => v,
        Rho::Quadratic { kappa } if kappa > 0.0 => {
            (libm::sqrt(1.0 + 4.0 * kappa * v) - 1.0) / (2.0 * kappa)
        }
        Rho::Quadratic { .. } => v,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;

    #[test]
    fn samples_are_members() {
        let spec = PenaltySpec::group_lasso(5, 3, 1.0).unwrap();
        let cone = Cone::new(&spec, &[1, 3], 2.0).unwrap();
        let mut rng = stream_rng(3, 5);
        for _ in 0..500 {
            let x = cone.sample(&mut rng);
            assert!(cone.contains(&x));
        }
        let q = PenaltySpec::new(
            Rho::Quadratic { kappa: 0.5 },
            alloc::vec![crate::penalty::Exponent::TWO],
            crate::penalty::GroupStructure::contiguous(4, 2),
            1.0,
            None,
        )
        .unwrap();
        let cone = Cone::new(&q, &[0], 1.0).unwrap();
        for _ in 0..200 {
            assert!(cone.contains(&cone.sample(&mut rng)));
        }
    }

    #[test]
    fn rho_inverse_roundtrip() {
        let r = Rho::Quadratic { kappa: 0.3 };
        let t = rho_inverse(r, 2.5);
        assert!((r.value(t) - 2.5).abs() < 1e-12);
    }
}
