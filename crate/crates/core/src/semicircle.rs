//! Closed-form quantities of the semicircle law.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::GaussLegendre;

const FRAC_1_2PI: f64 = 0.5 * std::f64::consts::FRAC_1_PI;

/// A point `z = E + i eta` of the closed upper half-plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralPoint {
    pub e: f64,
    pub eta: f64,
}

impl SpectralPoint {
    pub fn new(e: f64, eta: f64) -> Result<Self> {
        if !(eta >= 0.0) || !e.is_finite() || !eta.is_finite() {
            return Err(Error::Domain(format!("spectral point {e} + {eta}i must have finite parts and eta >= 0")));
        }
        Ok(Self { e, eta })
    }

    pub fn real(e: f64) -> Self {
        Self { e, eta: 0.0 }
    }

    pub fn z(self) -> Complex64 {
        Complex64::new(self.e, self.eta)
    }
}

/// Finite-N thresholds for outliers and for grouping them.
///
/// In the default (calibrated) mode an index `i` is an outlier when
/// `|d_i| - 1 >= outlier_factor * N^{-1/3}`. In literal mode the factor is
/// replaced by `phi^K` with `phi = (ln N)^{ln ln N}`, which at desk-scale `N`
/// classifies almost nothing as an outlier.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlParams {
    pub n: usize,
    pub k_exponent: f64,
    /// Fine grouping cutoff `s`.
    pub s_cutoff: f64,
    pub outlier_factor: f64,
    /// Coarse grouping cutoff in calibrated mode.
    pub coarse_cutoff: f64,
    pub literal: bool,
}

impl ControlParams {
    pub const DEFAULT_OUTLIER_FACTOR: f64 = 5.0;
    pub const DEFAULT_S_CUTOFF: f64 = 10.0;
    pub const DEFAULT_COARSE_CUTOFF: f64 = 1000.0;

    pub fn new(n: usize) -> Self {
        Self {
            n,
            k_exponent: 1.0,
            s_cutoff: Self::DEFAULT_S_CUTOFF,
            outlier_factor: Self::DEFAULT_OUTLIER_FACTOR,
            coarse_cutoff: Self::DEFAULT_COARSE_CUTOFF,
            literal: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 3 {
            return Err(Error::Domain(format!("N = {} is too small (need N >= 3)", self.n)));
        }
        for (name, v) in [
            ("k_exponent", self.k_exponent),
            ("s_cutoff", self.s_cutoff),
            ("outlier_factor", self.outlier_factor),
            ("coarse_cutoff", self.coarse_cutoff),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Domain(format!("{name} = {v} must be positive")));
            }
        }
        Ok(())
    }

    /// `phi = (ln N)^{ln ln N}`.
    pub fn phi(&self) -> Result<f64> {
        control_parameter(self.n)
    }

    /// The minimal `|d| - 1` of an outlier.
    pub fn outlier_threshold(&self) -> Result<f64> {
        let factor = if self.literal { self.phi()?.powf(self.k_exponent) } else { self.outlier_factor };
        Ok(factor * (self.n as f64).powf(-1.0 / 3.0))
    }

    pub fn fine_cutoff(&self) -> f64 {
        self.s_cutoff
    }

    /// Literal mode uses `phi^{K/2}`; both modes never go below the fine cutoff.
    pub fn coarse_cutoff(&self) -> Result<f64> {
        let c = if self.literal { self.phi()?.powf(0.5 * self.k_exponent) } else { self.coarse_cutoff };
        Ok(c.max(self.s_cutoff))
    }
}

/// `rho(x) = sqrt(4 - x^2)_+ / (2 pi)`.
pub fn density(x: f64) -> f64 {
    let s = 4.0 - x * x;
    if s > 0.0 {
        FRAC_1_2PI * s.sqrt()
    } else {
        0.0
    }
}

/// Semicircle distribution function in closed form.
pub fn cdf(x: f64) -> f64 {
    if x <= -2.0 {
        0.0
    } else if x >= 2.0 {
        1.0
    } else {
        x * (4.0 - x * x).sqrt() / (4.0 * std::f64::consts::PI) + (0.5 * x).asin() / std::f64::consts::PI + 0.5
    }
}

/// `int_a^b rho` by Gauss-Legendre quadrature in the angle `x = 2 sin t`,
/// where the integrand `(2/pi) cos^2 t` is smooth.
pub fn mass_by_quadrature(a: f64, b: f64, rule: &GaussLegendre) -> f64 {
    let ta = (0.5 * a.clamp(-2.0, 2.0)).asin();
    let tb = (0.5 * b.clamp(-2.0, 2.0)).asin();
    rule.integrate(ta, tb, |t| 2.0 * std::f64::consts::FRAC_1_PI * t.cos().powi(2))
}

/// The Stieltjes transform `m(z)`, the root of `m^2 + z m + 1 = 0` with
/// `m(z) ~ -1/z` at infinity (equivalently `|m| < 1` off the support).
pub fn stieltjes_m(z: SpectralPoint) -> Result<Complex64> {
    if z.eta == 0.0 && z.e.abs() <= 2.0 {
        return Err(Error::Domain(format!("z = {} lies on the support [-2, 2]", z.e)));
    }
    let zc = z.z();
    let s = ((zc - 2.0) * (zc + 2.0)).sqrt();
    // The larger root is computed without cancellation; m is its reciprocal.
    let q1 = (-zc + s) * 0.5;
    let q2 = (-zc - s) * 0.5;
    let big = if q1.norm() >= q2.norm() { q1 } else { q2 };
    Ok(Complex64::new(1.0, 0.0) / big)
}

/// `m'(z) = m^2 / (1 - m^2)`.
pub fn stieltjes_m_prime(z: SpectralPoint) -> Result<Complex64> {
    let m = stieltjes_m(z)?;
    let m2 = m * m;
    let denom = Complex64::new(1.0, 0.0) - m2;
    if denom.norm() < 1e-14 {
        return Err(Error::Domain("m'(z) is singular at the spectral edge".into()));
    }
    Ok(m2 / denom)
}

/// `theta(d) = d + 1/d` for `|d| >= 1`.
pub fn theta(d: f64) -> Result<f64> {
    if !(d.abs() >= 1.0) || !d.is_finite() {
        return Err(Error::Domain(format!("theta(d) needs |d| >= 1, got {d}")));
    }
    Ok(d + 1.0 / d)
}

/// Inverse of `theta` on the branch `|d| >= 1` with the sign of `t`.
pub fn theta_inverse(t: f64) -> Result<f64> {
    if !(t.abs() >= 2.0) || !t.is_finite() {
        return Err(Error::Domain(format!("theta inverse needs |t| >= 2, got {t}")));
    }
    let sign = t.signum();
    Ok(0.5 * (t + sign * ((t.abs() - 2.0) * (t.abs() + 2.0)).sqrt()))
}

/// Distance `||E| - 2|` to the nearest spectral edge.
pub fn kappa(e: f64) -> f64 {
    (e.abs() - 2.0).abs()
}

/// Classical eigenvalue locations: `N cdf(gamma_alpha) = alpha` for `alpha = 1..N`.
pub fn classical_locations(n: usize) -> Vec<f64> {
    let nf = n as f64;
    (1..=n)
        .map(|alpha| if alpha == n { 2.0 } else { semicircle_quantile(alpha as f64 / nf) })
        .collect()
}

/// Quantile of the semicircle law by bisection on the closed-form cdf.
pub fn semicircle_quantile(p: f64) -> f64 {
    if p <= 0.0 {
        return -2.0;
    }
    if p >= 1.0 {
        return 2.0;
    }
    let (mut lo, mut hi) = (-2.0_f64, 2.0_f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if cdf(mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// `phi_N = (ln N)^{ln ln N}`.
pub fn control_parameter(n: usize) -> Result<f64> {
    if n < 3 {
        return Err(Error::Domain(format!("control parameter needs N >= 3, got {n}")));
    }
    Ok(control_parameter_real(n as f64))
}

pub(crate) fn control_parameter_real(n: f64) -> f64 {
    let l = n.ln();
    l.powf(l.ln())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn m_by_quadrature(z: Complex64) -> Complex64 {
        // m(z) = int rho(x) / (x - z) dx with x = 2 sin t.
        let rule = GaussLegendre::new(400);
        let re = rule.integrate(-std::f64::consts::FRAC_PI_2, std::f64::consts::FRAC_PI_2, |t| {
            let w = 2.0 * std::f64::consts::FRAC_1_PI * t.cos().powi(2);
            (w / (Complex64::new(2.0 * t.sin(), 0.0) - z)).re
        });
        let im = rule.integrate(-std::f64::consts::FRAC_PI_2, std::f64::consts::FRAC_PI_2, |t| {
            let w = 2.0 * std::f64::consts::FRAC_1_PI * t.cos().powi(2);
            (w / (Complex64::new(2.0 * t.sin(), 0.0) - z)).im
        });
        Complex64::new(re, im)
    }

    #[test]
    fn density_values_and_mass() {
        assert!((density(0.0) - std::f64::consts::FRAC_1_PI).abs() < 1e-16);
        assert_eq!(density(2.0), 0.0);
        assert_eq!(density(-2.0), 0.0);
        assert_eq!(density(3.0), 0.0);
        let rule = GaussLegendre::new(64);
        assert!((mass_by_quadrature(-2.0, 2.0, &rule) - 1.0).abs() < 1e-10);
    }

    #[test]
    fn stieltjes_examples() {
        let m = stieltjes_m(SpectralPoint::real(2.5)).unwrap();
        assert!((m - Complex64::new(-0.5, 0.0)).norm() < 1e-15);
        let m = stieltjes_m(SpectralPoint::real(-2.5)).unwrap();
        assert!((m - Complex64::new(0.5, 0.0)).norm() < 1e-15);
        let m = stieltjes_m(SpectralPoint::real(3.0)).unwrap();
        assert!((m.re - (-3.0 + 5f64.sqrt()) / 2.0).abs() < 1e-15);
        assert!((m.re + 0.381_966_0).abs() < 1e-7);
        assert!(stieltjes_m(SpectralPoint::real(1.0)).is_err());
        assert!(stieltjes_m(SpectralPoint::real(2.0)).is_err());
    }

    #[test]
    fn stieltjes_matches_defining_integral() {
        for z in [Complex64::new(3.0, 0.0), Complex64::new(-2.7, 0.0), Complex64::new(0.5, 1.0), Complex64::new(-1.0, 0.3)] {
            let m = stieltjes_m(SpectralPoint::new(z.re, z.im).unwrap()).unwrap();
            assert!((m - m_by_quadrature(z)).norm() < 1e-9, "z = {z}: {m} vs {}", m_by_quadrature(z));
        }
    }

    #[test]
    fn m_prime_examples() {
        let mp = stieltjes_m_prime(SpectralPoint::real(2.5)).unwrap();
        assert!((mp.re - 1.0 / 3.0).abs() < 1e-15);
        let d: f64 = 2.0;
        let lhs = (d.abs() - 1.0) * stieltjes_m_prime(SpectralPoint::real(theta(d).unwrap())).unwrap().re;
        assert!((lhs - 1.0 / (d.abs() + 1.0)).abs() < 1e-15);
        // Central difference at z = 3.
        let h = 1e-5;
        let fd = (stieltjes_m(SpectralPoint::real(3.0 + h)).unwrap() - stieltjes_m(SpectralPoint::real(3.0 - h)).unwrap()) / (2.0 * h);
        let mp = stieltjes_m_prime(SpectralPoint::real(3.0)).unwrap();
        assert!(((fd - mp) / mp).norm() < 1e-6);
    }

    #[test]
    fn theta_examples() {
        assert_eq!(theta(2.0).unwrap(), 2.5);
        assert_eq!(theta(-2.0).unwrap(), -2.5);
        assert_eq!(theta(1.0).unwrap(), 2.0);
        assert!(theta(0.5).is_err());
        assert_eq!(theta_inverse(2.5).unwrap(), 2.0);
        assert_eq!(theta_inverse(-2.5).unwrap(), -2.0);
        assert_eq!(theta_inverse(2.0).unwrap(), 1.0);
        assert!(theta_inverse(1.9).is_err());
        let mut t = 2.01;
        while t <= 10.0 {
            assert!((theta(theta_inverse(t).unwrap()).unwrap() - t).abs() < 1e-12);
            t += 0.01;
        }
    }

    #[test]
    fn kappa_examples() {
        assert_eq!(kappa(2.5), 0.5);
        assert_eq!(kappa(0.0), 2.0);
        for d in [1.1_f64, 1.5, 2.0, 3.7, -1.3, -4.0] {
            let exact = (d.abs() - 1.0).powi(2) / d.abs();
            assert!((kappa(theta(d).unwrap()) - exact).abs() < 1e-14);
        }
    }

    #[test]
    fn classical_locations_small_n() {
        let g = classical_locations(2);
        assert!(g[0].abs() < 1e-14);
        assert_eq!(g[1], 2.0);

        // Quadrature + bisection oracle for N = 4, alpha = 1.
        let rule = GaussLegendre::new(64);
        let (mut lo, mut hi) = (-2.0, 2.0);
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if mass_by_quadrature(-2.0, mid, &rule) < 0.25 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let g = classical_locations(4);
        assert!((g[0] - 0.5 * (lo + hi)).abs() < 1e-10);
    }

    #[test]
    fn classical_locations_solve_quantile_equation() {
        let n = 500;
        let g = classical_locations(n);
        let rule = GaussLegendre::new(64);
        assert_eq!(*g.last().unwrap(), 2.0);
        assert!(g.windows(2).all(|w| w[0] < w[1]));
        for (k, &gamma) in g.iter().enumerate() {
            let alpha = (k + 1) as f64 / n as f64;
            assert!((mass_by_quadrature(-2.0, gamma, &rule) - alpha).abs() < 1e-9);
            assert!((cdf(gamma) - alpha).abs() < 1e-10);
        }
    }

    #[test]
    fn edge_behaviour_of_classical_locations() {
        // 2 - gamma_{N-k} ~ (3 pi k / (2 N))^{2/3} for small k: check the
        // ratio stays within fixed bounds as N grows.
        for n in [200usize, 2000, 20000] {
            let g = classical_locations(n);
            for k in 1..10 {
                let gap = 2.0 - g[n - 1 - k];
                let scale = (k as f64 / n as f64).powf(2.0 / 3.0);
                let ratio = gap / scale;
                assert!(ratio > 1.0 && ratio < 4.0, "n {n} k {k} ratio {ratio}");
            }
        }
    }

    #[test]
    fn control_parameter_values() {
        assert!(control_parameter(2).is_err());
        let e = std::f64::consts::E;
        assert!((control_parameter_real(e.exp()) - e).abs() < 1e-12);
        assert!((control_parameter_real((e * e).exp()) - e.powi(4)).abs() < 1e-9);
        let p15 = control_parameter(15).unwrap();
        let l = 15f64.ln();
        assert!((p15 - l.powf(l.ln())).abs() < 1e-14);
        let mut prev = 0.0;
        let mut n = 10.0_f64;
        while n <= 1e9 {
            let p = control_parameter_real(n);
            assert!(p > prev);
            prev = p;
            n *= 1.1;
        }
        assert!((control_parameter(1000).unwrap() - 41.9).abs() < 0.1);
    }

    #[test]
    fn control_params_thresholds() {
        let mut cp = ControlParams::new(1_000_000);
        assert!((cp.outlier_threshold().unwrap() - 0.05).abs() < 1e-12);
        cp.literal = true;
        let phi = cp.phi().unwrap();
        assert!((cp.outlier_threshold().unwrap() - phi * 0.01).abs() < 1e-12);
        assert!(cp.coarse_cutoff().unwrap() >= cp.fine_cutoff());
    }

    proptest! {
        #[test]
        fn self_consistent_equation_and_herglotz(e in -6.0f64..6.0, eta in 0.0f64..4.0) {
            prop_assume!(eta > 1e-3 || e.abs() > 2.001);
            let z = SpectralPoint::new(e, eta).unwrap();
            let m = stieltjes_m(z).unwrap();
            let res = m + Complex64::new(1.0, 0.0) / m + z.z();
            prop_assert!(res.norm() < 1e-12);
            if eta > 0.0 {
                prop_assert!(m.im >= 0.0);
            }
        }

        #[test]
        fn m_at_theta_is_minus_inverse_d(d in 1.001f64..9.0, neg in any::<bool>()) {
            let d = if neg { -d } else { d };
            let m = stieltjes_m(SpectralPoint::real(theta(d).unwrap())).unwrap();
            prop_assert!((m.re + 1.0 / d).abs() < 1e-12);
        }

        #[test]
        fn theta_inverse_round_trip_both_branches(d in 1.01f64..9.0, neg in any::<bool>()) {
            let d = if neg { -d } else { d };
            prop_assert!((theta_inverse(theta(d).unwrap()).unwrap() - d).abs() < 1e-12);
        }
    }
}
