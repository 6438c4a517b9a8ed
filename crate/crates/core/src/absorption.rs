//! Constitutive absorption laws for unsaturated flow in the stone matrix.
//!
//! Two formulations of the flux potential B(s) and its derivative B'(s) over
//! the saturation s = theta/n:
//!
//! * [`SymmetricLaw`]: a parabolic diffusivity profile with three parameters
//!   (s_R, s_S, D), peaking exactly at the support midpoint.
//! * [`AsymmetricLaw`]: permeability times capillary-pressure gradient,
//!   B'(s) = -k(s) P_c'(s) / mu, integrated exactly.
//!
//! Both have B' compactly supported on [s_R, s_S]: below the residual
//! saturation s_R there is no hydraulic continuity and the flux vanishes;
//! above the maximal saturation s_S the potential plateaus.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{adaptive_simpson, golden_max};
use crate::scalar::{lit, pow_pos, Real};

/// Behavioral contract for an absorption law.
pub trait AbsorptionLaw<T: Real> {
    /// Flux potential B(s). Non-decreasing, continuous, zero at and below s_R.
    fn b(&self, s: T) -> T;
    /// Diffusivity B'(s) >= 0, zero outside [s_R, s_S].
    fn b_prime(&self, s: T) -> T;
    /// Maximum of B' over the support.
    fn d_max(&self) -> T;
    /// Support endpoints (s_R, s_S) of B'.
    fn support(&self) -> (T, T);
}

fn require(cond: bool, msg: &str) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::InvalidParameter(msg.into()))
    }
}

/// Parameters of the symmetric law: residual/maximal saturation and the
/// peak diffusivity D (cm^2/s).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SymmetricParams<T> {
    pub s_r: T,
    pub s_s: T,
    pub d: T,
}

impl<T: Real> SymmetricParams<T> {
    pub fn new(s_r: T, s_s: T, d: T) -> Result<Self> {
        require(s_r > T::zero(), "s_r must be positive")?;
        require(s_r < s_s, "s_r must be below s_s")?;
        require(s_s <= T::one(), "s_s must not exceed 1")?;
        require(d > T::zero(), "d must be positive")?;
        Ok(SymmetricParams { s_r, s_s, d })
    }
}

/// Parameters of the asymmetric law (permeability and capillary pressure).
///
/// Units: c in g/(cm s^2), k_s in cm^2, mu in g/(cm s); the exponents are
/// dimensionless with gamma - alpha - 1 > 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AsymmetricParams<T> {
    pub s_r: T,
    pub s_s: T,
    pub alpha: T,
    pub c: T,
    pub k_s: T,
    pub gamma: T,
    pub mu: T,
}

impl<T: Real> AsymmetricParams<T> {
    #[allow(clippy::too_many_arguments)]
    pub fn new(s_r: T, s_s: T, alpha: T, c: T, k_s: T, gamma: T, mu: T) -> Result<Self> {
        require(s_r > T::zero(), "s_r must be positive")?;
        require(s_r < s_s, "s_r must be below s_s")?;
        require(s_s <= T::one(), "s_s must not exceed 1")?;
        require(alpha > T::zero(), "alpha must be positive")?;
        require(c > T::zero(), "c must be positive")?;
        require(k_s > T::zero(), "k_s must be positive")?;
        require(gamma > T::zero(), "gamma must be positive")?;
        require(mu > T::zero(), "mu must be positive")?;
        require(gamma - alpha - T::one() > T::zero(), "gamma - alpha - 1 must be positive")?;
        Ok(AsymmetricParams {
            s_r,
            s_s,
            alpha,
            c,
            k_s,
            gamma,
            mu,
        })
    }

    /// Relative permeability k(s) (cm^2), clamped to its endpoint values
    /// outside [s_r, s_s]; k(s_r) = 0 and k(s_s) = k_s.
    pub fn permeability(&self, s: T) -> T {
        if s <= self.s_r {
            return T::zero();
        }
        if s >= self.s_s {
            return self.k_s;
        }
        self.k_s * pow_pos((s - self.s_r) / (self.s_s - self.s_r), self.gamma)
    }

    /// Capillary pressure P_c(s) = c (s - s_s)^2 / (s - s_r)^alpha on (s_r, s_s].
    pub fn capillary_pressure(&self, s: T) -> Result<T> {
        if s <= self.s_r {
            return Err(Error::CapillaryDomain {
                s: s.to_f64().unwrap_or(f64::NAN),
            });
        }
        let d = s - self.s_s;
        Ok(self.c * d * d / pow_pos(s - self.s_r, self.alpha))
    }

    /// dP_c/ds; negative on (s_r, s_s).
    pub fn capillary_pressure_prime(&self, s: T) -> Result<T> {
        if s <= self.s_r {
            return Err(Error::CapillaryDomain {
                s: s.to_f64().unwrap_or(f64::NAN),
            });
        }
        let two = lit::<T>(2.0);
        let num = two * self.s_r - two * s - self.alpha * self.s_s + self.alpha * s;
        Ok(-self.c * (s - self.s_s) * num / pow_pos(s - self.s_r, self.alpha + T::one()))
    }
}

/// Symmetric absorption law.
#[derive(Debug, Clone, Copy)]
pub struct SymmetricLaw<T> {
    p: SymmetricParams<T>,
}

impl<T: Real> SymmetricLaw<T> {
    pub fn new(p: SymmetricParams<T>) -> Self {
        SymmetricLaw { p }
    }

    pub fn params(&self) -> &SymmetricParams<T> {
        &self.p
    }
}

impl<T: Real> AbsorptionLaw<T> for SymmetricLaw<T> {
    fn b(&self, s: T) -> T {
        let (s_r, s_s, d) = (self.p.s_r, self.p.s_s, self.p.d);
        if s <= s_r {
            return T::zero();
        }
        let k = s_r - s_s;
        let two = lit::<T>(2.0);
        let three = lit::<T>(3.0);
        if s >= s_s {
            return two / three * d * (s_s - s_r);
        }
        let a = s_r - s;
        -(two * d * a * a * (s_r - three * s_s + two * s)) / (three * k * k)
    }

    fn b_prime(&self, s: T) -> T {
        let (s_r, s_s, d) = (self.p.s_r, self.p.s_s, self.p.d);
        let k = s_r - s_s;
        let v = -(lit::<T>(4.0) * d * (s_r - s) * (s_s - s)) / (k * k);
        v.max(T::zero())
    }

    fn d_max(&self) -> T {
        self.p.d
    }

    fn support(&self) -> (T, T) {
        (self.p.s_r, self.p.s_s)
    }
}

/// Asymmetric absorption law with exact integral of B'.
///
/// B'(s) = k(s) * (-P_c'(s)) / mu on (s_r, s_s). Writing w = s - s_r and
/// delta = s_s - s_r, the integrand is
///
/// ```text
/// B'(w) = Ks c / (mu delta^gamma) * w^(gamma-alpha-1)
///         * ((alpha-2) w^2 - 2 (alpha-1) delta w + alpha delta^2)
/// ```
///
/// which integrates term by term to the closed form used in [`Self::b`].
/// Its plateau value at s_s is 2 Ks c gamma delta^(2-alpha) / (mu Q) with
/// Q = (gamma-alpha)(gamma-alpha+1)(gamma-alpha+2).
#[derive(Debug, Clone, Copy)]
pub struct AsymmetricLaw<T> {
    p: AsymmetricParams<T>,
    d_max: T,
    plateau: T,
}

impl<T: Real> AsymmetricLaw<T> {
    pub fn new(p: AsymmetricParams<T>) -> Self {
        let plateau = Self::b_closed(&p, p.s_s);
        // The peak location has no closed form for general exponents; locate
        // it once at construction.
        let prime = |s: T| Self::b_prime_raw(&p, s);
        let (_, d_max) = golden_max(prime, p.s_r, p.s_s, lit(1e-12));
        AsymmetricLaw { p, d_max, plateau }
    }

    pub fn params(&self) -> &AsymmetricParams<T> {
        &self.p
    }

    fn b_prime_raw(p: &AsymmetricParams<T>, s: T) -> T {
        if s <= p.s_r || s >= p.s_s {
            return T::zero();
        }
        let two = lit::<T>(2.0);
        let delta = p.s_s - p.s_r;
        let core = p.k_s * p.c / p.mu * pow_pos(s - p.s_r, p.gamma - p.alpha - T::one())
            / pow_pos(delta, p.gamma)
            * (s - p.s_s)
            * (two * p.s_r + s * (p.alpha - two) - p.alpha * p.s_s);
        core.max(T::zero())
    }

    fn b_closed(p: &AsymmetricParams<T>, s: T) -> T {
        if s <= p.s_r {
            return T::zero();
        }
        let s = s.min(p.s_s);
        let two = lit::<T>(2.0);
        let delta = p.s_s - p.s_r;
        let w = s - p.s_r;
        let ga = p.gamma - p.alpha;
        let c0 = p.k_s * p.c / (p.mu * pow_pos(delta, p.gamma));
        let poly = (p.alpha - two) * w * w / (ga + two)
            - two * (p.alpha - T::one()) * delta * w / (ga + T::one())
            + p.alpha * delta * delta / ga;
        c0 * pow_pos(w, ga) * poly
    }

    /// B(s) by adaptive quadrature of B' (validation path for the closed form).
    pub fn b_by_quadrature(&self, s: T, abs_tol: T) -> T {
        if s <= self.p.s_r {
            return T::zero();
        }
        let hi = s.min(self.p.s_s);
        adaptive_simpson(|x| Self::b_prime_raw(&self.p, x), self.p.s_r, hi, abs_tol)
    }

    /// Plateau value B(s_s) in the closed form displayed with the law.
    pub fn plateau(&self) -> T {
        self.plateau
    }
}

impl<T: Real> AbsorptionLaw<T> for AsymmetricLaw<T> {
    fn b(&self, s: T) -> T {
        if s >= self.p.s_s {
            return self.plateau;
        }
        Self::b_closed(&self.p, s)
    }

    fn b_prime(&self, s: T) -> T {
        Self::b_prime_raw(&self.p, s)
    }

    fn d_max(&self) -> T {
        self.d_max
    }

    fn support(&self) -> (T, T) {
        (self.p.s_r, self.p.s_s)
    }
}

/// Linear law B(s) = d * s, for scheme verification only.
///
/// Not a physical constitutive model: B' has no compact support, so the
/// degenerate-front behavior of the two stone laws is absent. Used by the
/// manufactured-solution convergence harness where an exact solution of the
/// resulting linear diffusion problem is known.
#[derive(Debug, Clone, Copy)]
pub struct LinearLaw<T> {
    pub d: T,
}

impl<T: Real> AbsorptionLaw<T> for LinearLaw<T> {
    fn b(&self, s: T) -> T {
        self.d * s
    }

    fn b_prime(&self, _s: T) -> T {
        self.d
    }

    fn d_max(&self) -> T {
        self.d
    }

    fn support(&self) -> (T, T) {
        (T::zero(), T::infinity())
    }
}

/// Runtime-selected law, as configured from a run file.
#[derive(Debug, Clone, Copy)]
pub enum Law<T> {
    Symmetric(SymmetricLaw<T>),
    Asymmetric(AsymmetricLaw<T>),
}

impl<T: Real> AbsorptionLaw<T> for Law<T> {
    fn b(&self, s: T) -> T {
        match self {
            Law::Symmetric(l) => l.b(s),
            Law::Asymmetric(l) => l.b(s),
        }
    }

    fn b_prime(&self, s: T) -> T {
        match self {
            Law::Symmetric(l) => l.b_prime(s),
            Law::Asymmetric(l) => l.b_prime(s),
        }
    }

    fn d_max(&self) -> T {
        match self {
            Law::Symmetric(l) => l.d_max(),
            Law::Asymmetric(l) => l.d_max(),
        }
    }

    fn support(&self) -> (T, T) {
        match self {
            Law::Symmetric(l) => l.support(),
            Law::Asymmetric(l) => l.support(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use proptest::prelude::*;

    fn marble_sym() -> SymmetricLaw<f64> {
        SymmetricLaw::new(SymmetricParams::new(0.227, 0.884, 1.09e-5).unwrap())
    }

    fn marble_asym_params() -> AsymmetricParams<f64> {
        AsymmetricParams::new(0.227, 0.884, 0.5, 34.19, 7.9e-9, 2.0, 8.9e-3).unwrap()
    }

    fn marble_asym() -> AsymmetricLaw<f64> {
        AsymmetricLaw::new(marble_asym_params())
    }

    #[test]
    fn sym_b_prime_examples() {
        let law = marble_sym();
        assert_eq!(law.b_prime(0.227), 0.0);
        // peak at the support midpoint equals D exactly
        let mid = (0.227 + 0.884) / 2.0;
        assert_relative_eq!(law.b_prime(mid), 1.09e-5, max_relative = 1e-14);
        // independent evaluation of the closed form at s = 0.5
        let s = 0.5;
        let oracle = 4.0 * 1.09e-5 * (0.5 - 0.227) * (0.884 - 0.5) / (0.884 - 0.227_f64).powi(2);
        assert_relative_eq!(law.b_prime(s), oracle, max_relative = 1e-14);
        assert_relative_eq!(law.b_prime(s), 1.059e-5, max_relative = 1e-3);
    }

    #[test]
    fn sym_b_examples() {
        let law = marble_sym();
        assert_eq!(law.b(0.1), 0.0);
        assert_eq!(law.b(0.227), 0.0);
        let plateau = 2.0 / 3.0 * 1.09e-5 * (0.884 - 0.227);
        assert_relative_eq!(law.b(1.0), plateau, max_relative = 1e-14);
        assert_relative_eq!(law.b(1.0), 4.774e-6, max_relative = 1e-3);
        // continuity at s_s
        assert_relative_eq!(law.b(0.884 - 1e-12), law.b(0.884), max_relative = 1e-9);
    }

    #[test]
    fn sym_peak_location_is_midpoint() {
        let law = marble_sym();
        let mid = (0.227 + 0.884) / 2.0;
        for ds in [-1e-3, 1e-3, -0.05, 0.05] {
            assert!(law.b_prime(mid + ds) < law.b_prime(mid));
        }
    }

    #[test]
    fn permeability_examples() {
        let p = marble_asym_params();
        assert_relative_eq!(p.permeability(0.884), 7.9e-9, max_relative = 1e-14);
        assert_eq!(p.permeability(0.227), 0.0);
        assert_eq!(p.permeability(0.1), 0.0);
        assert_relative_eq!(p.permeability(1.0), 7.9e-9, max_relative = 1e-14);
        let mid = (0.227 + 0.884) / 2.0;
        assert_relative_eq!(p.permeability(mid), 7.9e-9 * 0.25, max_relative = 1e-12);
    }

    #[test]
    fn capillary_pressure_examples() {
        let p = marble_asym_params();
        assert_abs_diff_eq!(p.capillary_pressure(0.884).unwrap(), 0.0);
        let s = 0.5555;
        let oracle = 34.19 * (s - 0.884_f64).powi(2) / (s - 0.227_f64).sqrt();
        assert_relative_eq!(p.capillary_pressure(s).unwrap(), oracle, max_relative = 1e-14);
        assert_relative_eq!(p.capillary_pressure(s).unwrap(), 6.437, max_relative = 1e-3);
        // divergence toward s_r
        assert!(p.capillary_pressure(0.227 + 1e-9).unwrap() > 1e3);
        assert!(p.capillary_pressure(0.2).is_err());
        assert!(p.capillary_pressure(0.227).is_err());
    }

    #[test]
    fn capillary_prime_matches_finite_differences() {
        let p = marble_asym_params();
        assert!(p.capillary_pressure_prime(0.884).unwrap() <= 0.0);
        for s in [0.5555, 0.3] {
            let h = 1e-6;
            let fd = (p.capillary_pressure(s + h).unwrap() - p.capillary_pressure(s - h).unwrap())
                / (2.0 * h);
            let an = p.capillary_pressure_prime(s).unwrap();
            assert_relative_eq!(an, fd, max_relative = 1e-6);
        }
        // decreasing on the open interval
        for s in [0.3, 0.5, 0.7, 0.86] {
            assert!(p.capillary_pressure_prime(s).unwrap() < 0.0);
        }
    }

    #[test]
    fn asym_b_prime_examples() {
        let law = marble_asym();
        assert_eq!(law.b_prime(0.227), 0.0);
        assert_eq!(law.b_prime(0.884), 0.0);
        assert_relative_eq!(law.b_prime(0.5555), 1.0875e-5, max_relative = 1e-3);
        // numerical maximization oracle: fine scan
        let mut max_scan = 0.0_f64;
        for i in 1..20000 {
            let s = 0.227 + (0.884 - 0.227) * i as f64 / 20000.0;
            max_scan = max_scan.max(law.b_prime(s));
        }
        assert_relative_eq!(law.d_max(), max_scan, max_relative = 1e-7);
        // consistency with the tabulated diffusion rate
        assert_relative_eq!(law.d_max(), 1.09e-5, max_relative = 1e-2);
    }

    #[test]
    fn asym_darcy_identity() {
        let law = marble_asym();
        let p = law.params();
        for i in 1..100 {
            let s = 0.227 + (0.884 - 0.227) * i as f64 / 100.0;
            if s >= 0.884 {
                break;
            }
            let lhs = law.b_prime(s) * p.mu;
            let rhs = -p.permeability(s) * p.capillary_pressure_prime(s).unwrap();
            assert_relative_eq!(lhs, rhs, max_relative = 1e-10);
        }
    }

    #[test]
    fn asym_b_examples_and_quadrature_crosscheck() {
        let law = marble_asym();
        assert_eq!(law.b(0.227), 0.0);
        assert_eq!(law.b(0.0), 0.0);
        let q = law.b_by_quadrature(0.7, 1e-14);
        assert_relative_eq!(law.b(0.7), q, max_relative = 1e-8);
        // plateau expression evaluated independently
        let (s_r, s_s, al, c, k_s, ga, mu) = (0.227, 0.884, 0.5, 34.19, 7.9e-9, 2.0, 8.9e-3);
        let q_den = -al * al * al + 3.0 * al * al * (ga + 1.0) - 3.0 * al * ga * (ga + 2.0)
            - 2.0 * al
            + ga * ga * ga
            + 3.0 * ga * ga
            + 2.0 * ga;
        let plateau = 2.0 * k_s * c * ga * (s_s - s_r_f(s_r, s_s)).powf(2.0 - al) / (mu * q_den);
        fn s_r_f(s_r: f64, _s_s: f64) -> f64 {
            s_r
        }
        assert_relative_eq!(law.b(1.0), plateau, max_relative = 1e-12);
        assert_relative_eq!(law.b(1.0), law.b_by_quadrature(0.884, 1e-14), max_relative = 1e-10);
        // 100-point sweep
        for i in 1..=100 {
            let s = 0.227 + (1.0 - 0.227) * i as f64 / 100.0;
            let q = law.b_by_quadrature(s, 1e-14);
            if q > 0.0 {
                assert_relative_eq!(law.b(s), q, max_relative = 1e-8);
            }
        }
    }

    #[test]
    fn both_laws_basic_shape() {
        let sym = marble_sym();
        let asym = marble_asym();
        for law in [&sym as &dyn AbsorptionLaw<f64>, &asym as &dyn AbsorptionLaw<f64>] {
            let (s_r, s_s) = law.support();
            assert_eq!(law.b(s_r), 0.0);
            assert_eq!(law.b_prime(s_r - 0.01), 0.0);
            assert_eq!(law.b_prime(s_s + 0.01), 0.0);
            let mut prev = -1.0;
            for i in 0..=1000 {
                let s = i as f64 / 1000.0;
                let b = law.b(s);
                assert!(law.b_prime(s) >= 0.0);
                assert!(b >= prev - 1e-18, "B must be non-decreasing");
                prev = b;
            }
        }
    }

    #[test]
    fn invalid_params_rejected() {
        assert!(SymmetricParams::new(0.5, 0.4, 1.0).is_err());
        assert!(SymmetricParams::new(0.0, 0.4, 1.0).is_err());
        assert!(SymmetricParams::new(0.2, 1.2, 1.0).is_err());
        assert!(SymmetricParams::new(0.2, 0.8, 0.0).is_err());
        assert!(AsymmetricParams::new(0.2, 0.8, 0.5, 1.0, 1.0, 1.4, 1.0).is_err()); // gamma-alpha-1 <= 0
        assert!(AsymmetricParams::new(0.2, 0.8, 0.5, -1.0, 1.0, 2.0, 1.0).is_err());
    }

    #[test]
    fn f32_instantiation_smoke() {
        let law = SymmetricLaw::new(SymmetricParams::<f32>::new(0.227, 0.884, 1.09e-5).unwrap());
        assert_eq!(law.b_prime(0.1), 0.0);
        let mid = (0.227 + 0.884) / 2.0;
        assert_relative_eq!(law.b_prime(mid), 1.09e-5_f32, max_relative = 1e-5_f32);
        let asym = AsymmetricLaw::new(
            AsymmetricParams::<f32>::new(0.227, 0.884, 0.5, 34.19, 7.9e-9, 2.0, 8.9e-3).unwrap(),
        );
        assert!(asym.d_max() > 0.0);
        assert!(asym.b(1.0) > 0.0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]
        #[test]
        fn prop_asym_darcy_and_monotone(
            s_r in 0.05f64..0.5,
            ds in 0.15f64..0.45,
            alpha in 0.15f64..1.2,
            dg in 0.2f64..2.0,
            s_frac in 0.02f64..0.98,
        ) {
            let s_s = (s_r + ds).min(1.0);
            prop_assume!(s_s - s_r > 0.1);
            let gamma = alpha + 1.0 + dg;
            let p = AsymmetricParams::new(s_r, s_s, alpha, 34.19, 7.9e-9, gamma, 8.9e-3).unwrap();
            let law = AsymmetricLaw::new(p);
            let s = s_r + (s_s - s_r) * s_frac;
            // Darcy identity inside the support
            if s > s_r && s < s_s {
                let lhs = law.b_prime(s) * p.mu;
                let rhs = -p.permeability(s) * p.capillary_pressure_prime(s).unwrap();
                prop_assert!((lhs - rhs).abs() <= 1e-10 * rhs.abs().max(1e-300));
            }
            // closed form equals quadrature
            let q = law.b_by_quadrature(s, 1e-16);
            prop_assert!((law.b(s) - q).abs() <= 1e-8 * q.abs().max(1e-300));
            // support and monotonicity
            prop_assert_eq!(law.b_prime(s_r), 0.0);
            prop_assert_eq!(law.b_prime(s_s), 0.0);
            prop_assert!(law.b(s) >= 0.0);
            prop_assert!(law.b(s) <= law.b(s_s) * (1.0 + 1e-12));
        }
    }
}
