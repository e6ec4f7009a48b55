//! Closed-form attack-progress results.
//!
//! Functions named `exact_*`/`displacement_*` return exact values of the
//! attacked process; `bound_*` and the moment evaluators return bounds or
//! expectations. Displacements are in radii along the attack direction.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `(1 - x)^i` evaluated in log space.
#[inline]
fn pow_one_minus(x: f64, i: u64) -> f64 {
    if i == 0 {
        return 1.0;
    }
    (i as f64 * (-x).ln_1p()).exp()
}

/// Upper bound `ln(1 + i/n)` for the growing-window learner.
pub fn bound_infinite(i: u64, n: u64) -> f64 {
    (i as f64 / n as f64).ln_1p()
}

/// Exact displacement `sum_{k=1..i} 1/(n+k)` of the growing-window learner
/// under the optimal attack.
pub fn exact_infinite(i: u64, n: u64) -> f64 {
    // Smallest terms first.
    (1..=i).rev().map(|k| 1.0 / (n + k) as f64).sum()
}

/// Number of attack points needed to reach displacement `target` against the
/// growing-window learner: `ceil(n (e^D - 1))`.
pub fn effort_inverse(target: f64, n: u64) -> Result<u64> {
    if !(target >= 0.0) || !target.is_finite() {
        return Err(Error::param("displacement", format!("{target} must be finite and >= 0")));
    }
    let x = n as f64 * target.exp_m1();
    // Absorb rounding of exp/ln round trips before taking the ceiling.
    Ok((x - 1e-9 * x.max(1.0)).ceil().max(0.0) as u64)
}

/// Exact displacement `i/n` of the average-out learner; also the expected
/// displacement of the random-out learner.
pub fn displacement_finite(i: u64, n: u64) -> f64 {
    i as f64 / n as f64
}

/// Mixing parameters of the limited-control and protected processes.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MixModel {
    /// Adversarial traffic fraction.
    pub nu: f64,
    /// Maximum false-positive rate.
    pub alpha: f64,
    pub n: u64,
    /// Second moment of the innocuous projection onto the attack direction.
    pub eps_second_moment: f64,
}

impl MixModel {
    pub fn new(nu: f64, alpha: f64, n: u64) -> Result<Self> {
        let m = Self {
            nu,
            alpha,
            n,
            eps_second_moment: 1.0,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn with_eps_second_moment(mut self, e2: f64) -> Result<Self> {
        self.eps_second_moment = e2;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.nu > 0.0 && self.nu < 1.0) {
            return Err(Error::param("nu", format!("{} not in (0, 1)", self.nu)));
        }
        if !(self.alpha >= 0.0 && self.alpha < 1.0) {
            return Err(Error::param("alpha", format!("{} not in [0, 1)", self.alpha)));
        }
        if self.n < 2 {
            return Err(Error::param("n", format!("{} < 2", self.n)));
        }
        if !(0.0..=1.0).contains(&self.eps_second_moment) {
            return Err(Error::param(
                "eps_second_moment",
                format!("{} not in [0, 1]", self.eps_second_moment),
            ));
        }
        Ok(())
    }

    /// Asymptotic expectation `nu/(1-nu)` of the limited-control process.
    pub fn limited_asymptote(&self) -> f64 {
        self.nu / (1.0 - self.nu)
    }

    /// Asymptotic upper bound of the protected process.
    pub fn protected_asymptote(&self) -> f64 {
        let (nu, a) = (self.nu, self.alpha);
        (nu + a * (1.0 - nu)) / ((1.0 - nu) * (1.0 - a))
    }
}

/// Decay constants and remainder terms at iteration `i`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundParams {
    pub c: f64,
    pub d: f64,
    /// Decay of the lower expectation bound, `(1 - (1-nu)/n)^i`.
    pub b: f64,
    pub gamma: f64,
    pub delta: f64,
    pub rho: f64,
}

impl BoundParams {
    /// Constants of the limited-control process (alpha is ignored).
    pub fn limited(i: u64, m: &MixModel) -> Self {
        let (nu, n) = (m.nu, m.n as f64);
        let c = pow_one_minus((1.0 - nu) / n, i);
        let d = pow_one_minus((1.0 - nu) / n * (2.0 - 1.0 / n), i);
        let delta = (nu * nu + (1.0 - d)) / ((2.0 * n - 1.0) * (1.0 - nu).powi(2));
        Self {
            c,
            d,
            b: c,
            gamma: c - d,
            delta,
            rho: 0.0,
        }
    }

    /// Constants of the protected process.
    pub fn protected(i: u64, m: &MixModel) -> Self {
        let (nu, a, n, e2) = (m.nu, m.alpha, m.n as f64, m.eps_second_moment);
        let c = pow_one_minus((1.0 - nu) * (1.0 - a) / n, i);
        let d = pow_one_minus((1.0 - nu) / n * (2.0 - 1.0 / n) * (1.0 - a), i);
        let b = pow_one_minus((1.0 - nu) / n, i);
        let rho = a * (1.0 - c) * (1.0 - d) * (2.0 * nu * (1.0 - a) + a)
            / ((1.0 - 1.0 / (2.0 * n)) * (1.0 - nu).powi(2) * (1.0 - a).powi(2));
        let delta = (1.0 - d) * (nu + (1.0 - nu) * e2) / ((2.0 * n - 1.0) * (1.0 - nu) * (1.0 - a));
        Self {
            c,
            d,
            b,
            gamma: c - d,
            delta,
            rho,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LimitedMoments {
    pub expectation: f64,
    pub variance_bound: f64,
}

/// Expectation and variance bound of the limited-control process
/// (every innocuous point accepted, no false-positive protection).
pub fn limited_moments(i: u64, m: &MixModel) -> Result<LimitedMoments> {
    m.validate()?;
    if m.alpha != 0.0 {
        return Err(Error::param("alpha", "limited-control moments require alpha = 0"));
    }
    let p = BoundParams::limited(i, m);
    let k = m.limited_asymptote();
    Ok(LimitedMoments {
        expectation: (1.0 - p.c) * k,
        variance_bound: p.gamma * k * k + p.delta,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProtectedMoments {
    pub expectation_upper: f64,
    pub expectation_lower: f64,
    pub variance_bound: f64,
}

/// Expectation bounds and variance bound of the protected process.
pub fn protected_moments(i: u64, m: &MixModel) -> Result<ProtectedMoments> {
    m.validate()?;
    let p = BoundParams::protected(i, m);
    let (nu, a) = (m.nu, m.alpha);
    Ok(ProtectedMoments {
        expectation_upper: (1.0 - p.c) * m.protected_asymptote(),
        expectation_lower: (1.0 - p.c) * nu / (1.0 - nu),
        variance_bound: p.gamma * nu * nu / ((1.0 - a).powi(2) * (1.0 - nu).powi(2)) + p.rho + p.delta,
    })
}

/// Minimal adversarial fraction whose asymptotic displacement reaches `d`.
pub fn nu_crit(d: f64) -> Result<f64> {
    if !(d >= 0.0) || !d.is_finite() {
        return Err(Error::param("displacement", format!("{d} must be finite and >= 0")));
    }
    Ok(d / (1.0 + d))
}

/// Approximate per-iteration progress fraction `(1/n)^(1/d)` of the
/// nearest-out greedy attack under tightly packed cells. The per-step
/// displacement estimate is this value divided by `n`.
pub fn voronoi_slope(n: u64, d: u64) -> f64 {
    (1.0 / n as f64).powf(1.0 / d as f64)
}

/// Closed form of `s_{k+1} = q s_k + p`, `s_0 = 0`, at step `i`.
pub fn geometric_series_closed_form(p: f64, q: f64, i: u64) -> f64 {
    if q == 1.0 {
        return p * i as f64;
    }
    if q > 0.0 {
        // 1 - q^i without cancellation near q = 1
        let one_minus_qi = -(i as f64 * (q - 1.0).ln_1p()).exp_m1();
        return p * one_minus_qi / (1.0 - q);
    }
    let qi = if i <= i32::MAX as u64 {
        q.powi(i as i32)
    } else {
        q.powf(i as f64)
    };
    p * (1.0 - qi) / (1.0 - q)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn infinite_examples() {
        assert_eq!(bound_infinite(0, 10), 0.0);
        assert!(close(bound_infinite(50, 50), 2f64.ln(), 1e-15));
        assert!(close(bound_infinite(500, 100), 6f64.ln(), 1e-14));
        assert!(bound_infinite(500, 100) > exact_infinite(500, 100));
        assert_eq!(exact_infinite(1, 1), 0.5);
        assert_eq!(exact_infinite(0, 7), 0.0);
        assert!(close(exact_infinite(2, 1), 1.0 / 2.0 + 1.0 / 3.0, 1e-15));
    }

    #[test]
    fn exact_matches_harmonic_difference() {
        // H_600 - H_100 by direct summation in the other order.
        let h = |m: u64| (1..=m).map(|k| 1.0 / k as f64).sum::<f64>();
        assert!(close(exact_infinite(500, 100), h(600) - h(100), 1e-12));
    }

    #[test]
    fn effort_examples() {
        assert_eq!(effort_inverse(0.0, 100).unwrap(), 0);
        assert_eq!(effort_inverse(2f64.ln(), 100).unwrap(), 100);
        assert_eq!(effort_inverse(1.0, 100).unwrap(), 172);
        assert!(effort_inverse(-1.0, 100).is_err());
    }

    #[test]
    fn finite_examples() {
        assert_eq!(displacement_finite(0, 10), 0.0);
        assert_eq!(displacement_finite(10, 10), 1.0);
        assert_eq!(displacement_finite(50, 100), 0.5);
    }

    #[test]
    fn limited_examples() {
        let m = MixModel::new(0.05, 0.0, 100).unwrap();
        let z = limited_moments(0, &m).unwrap();
        assert_eq!(z.expectation, 0.0);
        // gamma_0 = 0 and d_0 = 1 leave nu^2/((2n-1)(1-nu)^2).
        assert!(close(z.variance_bound, 0.05f64.powi(2) / (199.0 * 0.95f64.powi(2)), 1e-15));
        let far = limited_moments(10_000_000, &m).unwrap();
        assert!(close(far.expectation, 0.05 / 0.95, 1e-12));
        assert!(close(0.05 / 0.95, 0.052631578947, 1e-11));
        assert!(limited_moments(1, &MixModel::new(0.05, 0.01, 100).unwrap()).is_err());
    }

    #[test]
    fn limited_expectation_follows_its_recursion() {
        // E(D_{i+1}) = (1 - (1-nu)/n) E(D_i) + nu/n.
        let m = MixModel::new(0.1, 0.0, 50).unwrap();
        let mut e = 0.0;
        for i in 0..2000u64 {
            assert!(close(limited_moments(i, &m).unwrap().expectation, e, 1e-12));
            e = (1.0 - 0.9 / 50.0) * e + 0.1 / 50.0;
        }
    }

    #[test]
    fn protected_examples() {
        let m0 = MixModel::new(0.05, 0.0, 1000).unwrap();
        for i in [0, 1, 10, 1000, 50_000] {
            let p = protected_moments(i, &m0).unwrap();
            let l = limited_moments(i, &m0).unwrap();
            assert!(close(p.expectation_upper, l.expectation, 1e-12));
            assert!(close(p.expectation_upper, p.expectation_lower, 1e-15));
            assert!(p.variance_bound <= l.variance_bound + 1e-15);
        }
        let z = protected_moments(0, &MixModel::new(0.05, 0.02, 1000).unwrap()).unwrap();
        assert_eq!(z.expectation_upper, 0.0);
        assert_eq!(z.expectation_lower, 0.0);
        assert_eq!(z.variance_bound, 0.0);

        let m = MixModel::new(0.14, 0.005, 1000).unwrap();
        let asym = (0.14 + 0.005 * 0.86) / (0.86 * 0.995);
        assert!(close(m.protected_asymptote(), asym, 1e-15));
        assert!(close(asym, 0.1685, 2e-4));
        let far = protected_moments(100_000_000, &m).unwrap();
        assert!(close(far.expectation_upper, asym, 1e-12));
    }

    #[test]
    fn nu_crit_examples() {
        assert_eq!(nu_crit(0.0).unwrap(), 0.0);
        assert_eq!(nu_crit(1.0).unwrap(), 0.5);
        assert!(close(nu_crit(0.179).unwrap(), 0.152, 0.0005));
        for nu in [0.01, 0.05, 0.3, 0.7] {
            assert!(close(nu_crit(nu / (1.0 - nu)).unwrap(), nu, 1e-15));
        }
    }

    #[test]
    fn voronoi_examples() {
        assert!(close(voronoi_slope(100, 1_000_000), 1.0, 1e-4));
        for d in [1, 2, 50] {
            assert_eq!(voronoi_slope(1, d), 1.0);
        }
        assert!(close(voronoi_slope(100, 2), 0.1, 1e-15));
    }

    #[test]
    fn geometric_examples() {
        assert_eq!(geometric_series_closed_form(2.0, 0.3, 0), 0.0);
        assert_eq!(geometric_series_closed_form(2.0, 0.0, 5), 2.0);
        assert!(close(geometric_series_closed_form(1.0, 0.5, 3), 1.75, 1e-15));
        assert_eq!(geometric_series_closed_form(1.5, 1.0, 4), 6.0);
    }

    #[test]
    fn geometric_matches_unrolled_recursion() {
        for &(p, q) in &[(0.3, 0.999), (1.0, 0.5), (0.01, 1.0001), (2.0, 0.1)] {
            let mut s = 0.0f64;
            for i in 0..=10_000u64 {
                let c = geometric_series_closed_form(p, q, i);
                assert!((c - s).abs() <= 1e-12 * s.abs().max(1e-300) + 1e-15, "p={p} q={q} i={i}");
                s = q * s + p;
            }
        }
    }

    #[test]
    fn bound_params_ordering_over_grid() {
        for &nu in &[0.001, 0.05, 0.2, 0.5] {
            for &alpha in &[0.0, 0.005, 0.05, 0.1] {
                for &n in &[10u64, 1000, 1_000_000] {
                    let m = MixModel::new(nu, alpha, n).unwrap();
                    for &i in &[0u64, 1, 100, 10_000, 1_000_000] {
                        for p in [BoundParams::limited(i, &m), BoundParams::protected(i, &m)] {
                            assert!(p.d >= 0.0 && p.d <= p.c && p.c <= 1.0, "{p:?}");
                            assert!(p.gamma >= 0.0 && p.delta >= 0.0 && p.rho >= 0.0);
                        }
                        let pm = protected_moments(i, &m).unwrap();
                        assert!(pm.expectation_lower <= pm.expectation_upper * (1.0 + 1e-14));
                    }
                }
            }
        }
    }

    #[test]
    fn exact_never_exceeds_bound() {
        for &n in &[1u64, 10, 100, 1000] {
            let mut exact = 0.0;
            for i in 1..=1_000_000u64 {
                exact += 1.0 / (n + i) as f64;
                if i % 997 == 0 || i < 100 {
                    assert!(exact <= bound_infinite(i, n) + 1e-12, "n={n} i={i}");
                }
            }
        }
    }

    #[test]
    fn limited_expectation_monotone_and_bounded() {
        let m = MixModel::new(0.05, 0.0, 1000).unwrap();
        let mut prev = -1.0;
        for i in (0..200_000).step_by(500) {
            let e = limited_moments(i, &m).unwrap().expectation;
            assert!(e >= prev && e <= m.limited_asymptote());
            prev = e;
        }
    }
}
