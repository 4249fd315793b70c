use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

const SCAN_POINTS: usize = 10_000;

/// One localization constant with its certificate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VConstant {
    /// End of the feasible interval starting at 0, or `None` when even 0
    /// is infeasible.
    pub value: Option<f64>,
    pub rhs: f64,
    /// `h(value) - rhs`.
    pub residual: f64,
    /// `h(value + 1e-9) > rhs`.
    pub certified: bool,
    pub whole_interval_feasible: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VConstants {
    pub v1: VConstant,
    pub v2: VConstant,
}

/// First crossing of `h(v) = rhs` on `[0, 1]`: a dense scan followed by
/// bisection.
fn first_crossing(h: impl Fn(f64) -> f64, rhs: f64) -> VConstant {
    if !(h(0.0) <= rhs) {
        return VConstant {
            value: None,
            rhs,
            residual: h(0.0) - rhs,
            certified: false,
            whole_interval_feasible: false,
        };
    }
    let mut lo = 0.0;
    let mut hi = None;
    for k in 1..=SCAN_POINTS {
        let v = k as f64 / SCAN_POINTS as f64;
        if h(v) > rhs {
            hi = Some(v);
            break;
        }
        lo = v;
    }
    let Some(mut hi) = hi else {
        return VConstant {
            value: Some(1.0),
            rhs,
            residual: h(1.0) - rhs,
            certified: true,
            whole_interval_feasible: true,
        };
    };
    while hi - lo > 1e-12 {
        let mid = 0.5 * (lo + hi);
        if h(mid) <= rhs {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    VConstant {
        value: Some(lo),
        rhs,
        residual: h(lo) - rhs,
        certified: h(lo + 1e-9) > rhs,
        whole_interval_feasible: false,
    }
}

/// Solves for `v1` with `v e^{-2Cv} <= 16 lambda^2 rho' dbar / zeta^2` and
/// `v2` with `v e^{-2Cv} - 4 lambda dbar / (zeta^2 rho'^2) sqrt(v) <=
/// 16 lambda^2 dbar^{3/2} / (zeta^3 rho'^{3/2})`.
pub fn solve_v_constants(
    lambda: f64,
    zeta: f64,
    d_bar: f64,
    c: f64,
    rho_prime: f64,
) -> Result<VConstants> {
    if !(zeta > 0.0 && zeta.is_finite()) {
        return Err(invalid("zeta", "must be positive"));
    }
    for (name, v) in [("lambda", lambda), ("d_bar", d_bar), ("C", c)] {
        if !(v >= 0.0 && v.is_finite()) {
            return Err(invalid(name, "must be finite and non-negative"));
        }
    }
    if !(rho_prime > 0.0 && rho_prime.is_finite()) {
        return Err(invalid("rho_prime", "must be positive"));
    }
    let h = |v: f64| v * libm::exp(-2.0 * c * v);
    let rhs1 = 16.0 * lambda * lambda * rho_prime * d_bar / (zeta * zeta);
    let slope = 4.0 * lambda * d_bar / (zeta * zeta * rho_prime * rho_prime);
    let k = |v: f64| h(v) - slope * libm::sqrt(v);
    let rhs2 = 16.0 * lambda * lambda * libm::pow(d_bar, 1.5)
        / (zeta * zeta * zeta * libm::pow(rho_prime, 1.5));
    Ok(VConstants {
        v1: first_crossing(h, rhs1),
        v2: first_crossing(k, rhs2),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_rhs_gives_zero() {
        let r = solve_v_constants(0.0, 1.0, 1.0, 1.0, 1.0).unwrap();
        assert_eq!(r.v1.value, Some(0.0));
        assert!(r.v1.certified);
    }

    #[test]
    fn bisection_certificate() {
        // 16 lambda^2 dbar / zeta^2 = 0.1
        let lambda = libm::sqrt(0.1 / 16.0);
        let r = solve_v_constants(lambda, 1.0, 1.0, 1.0, 1.0).unwrap();
        let v = r.v1.value.unwrap();
        assert!((r.v1.rhs - 0.1).abs() < 1e-15);
        assert!(v * libm::exp(-2.0 * v) <= 0.1 + 1e-10);
        let w = v + 1e-9;
        assert!(w * libm::exp(-2.0 * w) > 0.1);
        assert!(r.v1.certified);
    }

    #[test]
    fn whole_interval() {
        // max of v e^{-2v} on [0,1] is 1/(2e) < 0.5
        let lambda = libm::sqrt(0.5 / 16.0);
        let r = solve_v_constants(lambda, 1.0, 1.0, 1.0, 1.0).unwrap();
        assert_eq!(r.v1.value, Some(1.0));
        assert!(r.v1.whole_interval_feasible);
    }

    #[test]
    fn rejects_nonpositive_zeta() {
        assert!(solve_v_constants(0.1, 0.0, 1.0, 1.0, 1.0).is_err());
    }
}
