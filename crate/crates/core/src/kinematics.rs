//! Minkowski four-vectors, dispersion relations and the noise-model scalars.

use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Smallest accepted value of `1 - 2 (zeta^0)^2`.
pub const ADMISSIBILITY_MARGIN: f64 = 1e-12;

/// A spatial three-vector.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ThreeVector {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl ThreeVector {
    pub const ZERO: ThreeVector = ThreeVector { x: 0.0, y: 0.0, z: 0.0 };

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        ThreeVector { x, y, z }
    }

    pub fn dot(self, other: ThreeVector) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn norm_sqr(self) -> f64 {
        self.dot(self)
    }

    pub fn norm(self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn as_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }
}

impl Add for ThreeVector {
    type Output = ThreeVector;
    fn add(self, o: ThreeVector) -> ThreeVector {
        ThreeVector::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Sub for ThreeVector {
    type Output = ThreeVector;
    fn sub(self, o: ThreeVector) -> ThreeVector {
        ThreeVector::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Neg for ThreeVector {
    type Output = ThreeVector;
    fn neg(self) -> ThreeVector {
        ThreeVector::new(-self.x, -self.y, -self.z)
    }
}

impl Mul<ThreeVector> for f64 {
    type Output = ThreeVector;
    fn mul(self, v: ThreeVector) -> ThreeVector {
        ThreeVector::new(self * v.x, self * v.y, self * v.z)
    }
}

/// A contravariant four-vector `(t, x, y, z)`; metric signature (+,-,-,-).
///
/// Used for momenta, spacetime points and the noise coupling `zeta`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FourVector {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl FourVector {
    pub const ZERO: FourVector = FourVector { t: 0.0, x: 0.0, y: 0.0, z: 0.0 };

    pub const fn new(t: f64, x: f64, y: f64, z: f64) -> Self {
        FourVector { t, x, y, z }
    }

    pub fn from_parts(t: f64, space: ThreeVector) -> Self {
        FourVector::new(t, space.x, space.y, space.z)
    }

    pub fn spatial(self) -> ThreeVector {
        ThreeVector::new(self.x, self.y, self.z)
    }

    pub fn dot(self, other: FourVector) -> f64 {
        minkowski_dot(self, other)
    }

    /// The invariant square `v.v`.
    pub fn square(self) -> f64 {
        minkowski_dot(self, self)
    }

    pub fn as_array(self) -> [f64; 4] {
        [self.t, self.x, self.y, self.z]
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        FourVector::new(a[0], a[1], a[2], a[3])
    }

    pub fn is_finite(self) -> bool {
        self.as_array().iter().all(|c| c.is_finite())
    }
}

impl Add for FourVector {
    type Output = FourVector;
    fn add(self, o: FourVector) -> FourVector {
        FourVector::new(self.t + o.t, self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Sub for FourVector {
    type Output = FourVector;
    fn sub(self, o: FourVector) -> FourVector {
        FourVector::new(self.t - o.t, self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Neg for FourVector {
    type Output = FourVector;
    fn neg(self) -> FourVector {
        FourVector::new(-self.t, -self.x, -self.y, -self.z)
    }
}

impl Mul<FourVector> for f64 {
    type Output = FourVector;
    fn mul(self, v: FourVector) -> FourVector {
        FourVector::new(self * v.t, self * v.x, self * v.y, self * v.z)
    }
}

/// `a^0 b^0 - a.b`.
pub fn minkowski_dot(a: FourVector, b: FourVector) -> f64 {
    a.t * b.t - a.x * b.x - a.y * b.y - a.z * b.z
}

/// Noise coupling four-vector, validated so that `1 - 2 (zeta^0)^2` stays
/// clear of zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ZetaParams {
    zeta: FourVector,
}

impl ZetaParams {
    pub fn new(zeta: FourVector) -> Result<Self> {
        if !zeta.is_finite() {
            return Err(Error::domain("zeta components must be finite"));
        }
        let a = 1.0 - 2.0 * zeta.t * zeta.t;
        if a <= ADMISSIBILITY_MARGIN {
            return Err(Error::domain(format!(
                "inadmissible zeta: 1 - 2 (zeta^0)^2 = {a:e} must exceed {ADMISSIBILITY_MARGIN:e}"
            )));
        }
        Ok(ZetaParams { zeta })
    }

    /// The noise-free coupling `zeta = 0`.
    pub fn zero() -> Self {
        ZetaParams { zeta: FourVector::ZERO }
    }

    pub fn vector(&self) -> FourVector {
        self.zeta
    }

    /// `1 - 2 (zeta^0)^2`, strictly positive.
    pub fn time_factor(&self) -> f64 {
        1.0 - 2.0 * self.zeta.t * self.zeta.t
    }

    /// True when the spatial part vanishes, so that noise-dependent momentum
    /// integrands stay isotropic.
    pub fn is_spatially_zero(&self) -> bool {
        self.zeta.x == 0.0 && self.zeta.y == 0.0 && self.zeta.z == 0.0
    }
}

impl<'de> Deserialize<'de> for ZetaParams {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            zeta: FourVector,
        }
        let raw = Raw::deserialize(d)?;
        ZetaParams::new(raw.zeta).map_err(serde::de::Error::custom)
    }
}

/// Dispersion relation `sqrt(|k|^2 + xi)`.
pub fn omega(kvec: ThreeVector, xi: f64) -> Result<f64> {
    check_xi(xi)?;
    Ok((kvec.norm_sqr() + xi).sqrt())
}

pub(crate) fn check_xi(xi: f64) -> Result<()> {
    if !(xi >= 0.0) || !xi.is_finite() {
        return Err(Error::domain(format!("mass squared must be finite and >= 0, got {xi}")));
    }
    Ok(())
}

/// `k^0 > 0` and `k.k > 0`.
pub fn in_positive_cone(k: FourVector) -> bool {
    k.t > 0.0 && k.square() > 0.0
}

/// Diagonal eigenvalue `2 [k^2 - 2 (zeta.k)^2]` of the noisy Liouville
/// operator. Reduces to `2 k^2` at zero noise.
pub fn lambda_noisy(k: FourVector, zeta: &ZetaParams) -> f64 {
    let c = minkowski_dot(zeta.vector(), k);
    2.0 * (k.square() - 2.0 * (c * c))
}

/// Discriminant `(1 - 2 zeta0^2)(|k|^2 + xi) + 2 (zeta.k)^2` of the shifted
/// mass shell; its inverse square root is the noisy propagator weight.
pub fn shell_discriminant(kvec: ThreeVector, xi: f64, zeta: &ZetaParams) -> f64 {
    let s = zeta.vector().spatial().dot(kvec);
    zeta.time_factor() * (kvec.norm_sqr() + xi) + 2.0 * s * s
}

/// Positive frequency on the shifted shell `xi = K^2 - 2 (zeta.K)^2`,
/// `K = (varpi, kvec)`.
///
/// The closed form is evaluated in whichever of its two algebraically equal
/// arrangements avoids cancellation; at `zeta = 0` it returns
/// `sqrt(|k|^2 + xi)`.
pub fn varpi(kvec: ThreeVector, xi: f64, zeta: &ZetaParams) -> Result<f64> {
    check_xi(xi)?;
    Ok(varpi_unchecked(kvec, xi, zeta))
}

pub(crate) fn varpi_unchecked(kvec: ThreeVector, xi: f64, zeta: &ZetaParams) -> f64 {
    let a = zeta.time_factor();
    let z0 = zeta.vector().t;
    let s = zeta.vector().spatial().dot(kvec);
    let b = 2.0 * z0 * s;
    let energy = kvec.norm_sqr() + xi + 2.0 * s * s;
    let disc = a * energy + b * b;
    assert!(disc >= 0.0, "shifted-shell discriminant negative: {disc}");
    let root = disc.sqrt();
    if b <= 0.0 {
        (root - b) / a
    } else {
        energy / (root + b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn fv() -> impl Strategy<Value = FourVector> {
        (-10.0..10.0f64, -10.0..10.0f64, -10.0..10.0f64, -10.0..10.0f64)
            .prop_map(|(t, x, y, z)| FourVector::new(t, x, y, z))
    }

    #[test]
    fn dot_examples() {
        let e = FourVector::new(1.0, 0.0, 0.0, 0.0);
        assert_eq!(minkowski_dot(e, e), 1.0);
        let l = FourVector::new(1.0, 1.0, 0.0, 0.0);
        assert_eq!(minkowski_dot(l, l), 0.0);
    }

    #[test]
    fn omega_examples() {
        assert_eq!(omega(ThreeVector::ZERO, 4.0).unwrap(), 2.0);
        assert_eq!(omega(ThreeVector::new(3.0, 0.0, 0.0), 16.0).unwrap(), 5.0);
        assert!(matches!(omega(ThreeVector::ZERO, -1.0), Err(Error::Domain(_))));
        assert!(omega(ThreeVector::ZERO, f64::NAN).is_err());
    }

    #[test]
    fn cone_examples() {
        assert!(in_positive_cone(FourVector::new(1.0, 0.0, 0.0, 0.0)));
        assert!(!in_positive_cone(FourVector::new(1.0, 2.0, 0.0, 0.0)));
        assert!(!in_positive_cone(FourVector::new(-1.0, 0.0, 0.0, 0.0)));
        assert!(!in_positive_cone(FourVector::new(1.0, 1.0, 0.0, 0.0)));
    }

    #[test]
    fn lambda_examples() {
        let k = FourVector::new(2.0, 0.0, 0.0, 0.0);
        assert_eq!(lambda_noisy(k, &ZetaParams::zero()), 8.0);
        let z = ZetaParams::new(FourVector::new(0.5, 0.0, 0.0, 0.0)).unwrap();
        assert_eq!(lambda_noisy(FourVector::new(1.0, 0.0, 0.0, 0.0), &z), 1.0);
    }

    #[test]
    fn zeta_admissibility() {
        assert!(ZetaParams::new(FourVector::new(0.7, 0.0, 0.0, 0.0)).is_ok());
        assert!(ZetaParams::new(FourVector::new(0.75, 0.0, 0.0, 0.0)).is_err());
        assert!(ZetaParams::new(FourVector::new(0.5f64.sqrt(), 0.0, 0.0, 0.0)).is_err());
        assert!(ZetaParams::new(FourVector::new(-0.8, 5.0, 0.0, 0.0)).is_err());
        assert!(ZetaParams::new(FourVector::new(0.1, f64::INFINITY, 0.0, 0.0)).is_err());
        let ok: ZetaParams = serde_json::from_str(r#"{"zeta":{"t":0.1,"x":0.3,"y":0.0,"z":0.0}}"#).unwrap();
        assert_eq!(ok.vector().x, 0.3);
        assert!(serde_json::from_str::<ZetaParams>(r#"{"zeta":{"t":0.9,"x":0,"y":0,"z":0}}"#).is_err());
    }

    #[test]
    fn varpi_zero_noise_is_omega() {
        let k = ThreeVector::new(0.3, -1.2, 2.5);
        for xi in [0.0, 0.5, 2.0, 17.0] {
            assert_eq!(varpi(k, xi, &ZetaParams::zero()).unwrap(), omega(k, xi).unwrap());
        }
    }

    #[test]
    fn varpi_spatial_noise() {
        let z = ZetaParams::new(FourVector::new(0.0, 0.3, -0.1, 0.2)).unwrap();
        let k = ThreeVector::new(1.0, 2.0, -0.5);
        let s = z.vector().spatial().dot(k);
        let expect = (k.norm_sqr() + 1.5 + 2.0 * s * s).sqrt();
        let got = varpi(k, 1.5, &z).unwrap();
        assert!(((got - expect) / expect).abs() < 1e-15);
    }

    #[test]
    fn varpi_monotone_in_xi() {
        let z = ZetaParams::new(FourVector::new(0.4, 0.2, 0.1, -0.3)).unwrap();
        let k = ThreeVector::new(0.7, -1.1, 0.4);
        let ladder: Vec<f64> = (0..200).map(|i| i as f64 * 0.05).collect();
        let vals: Vec<f64> = ladder.iter().map(|&xi| varpi(k, xi, &z).unwrap()).collect();
        assert!(vals.windows(2).all(|w| w[1] > w[0]));
    }

    proptest! {
        #[test]
        fn dot_matches_component_sum(a in fv(), b in fv()) {
            let oracle = a.t * b.t - (a.x * b.x + a.y * b.y + a.z * b.z);
            let got = minkowski_dot(a, b);
            prop_assert!((got - oracle).abs() <= 1e-12 * (1.0 + oracle.abs()));
            prop_assert_eq!(minkowski_dot(a, b), minkowski_dot(b, a));
        }

        #[test]
        fn dot_bilinear(a in fv(), b in fv(), s in -3.0..3.0f64) {
            let lhs = minkowski_dot(s * a, b);
            prop_assert!((lhs - s * minkowski_dot(a, b)).abs() < 1e-10);
            prop_assert_eq!(minkowski_dot(-a, -b), minkowski_dot(a, b));
        }

        #[test]
        fn lambda_at_zero_noise(k in fv()) {
            prop_assert_eq!(lambda_noisy(k, &ZetaParams::zero()), 2.0 * k.square());
        }

        #[test]
        fn cone_momenta_are_on_their_own_shell(
            kx in -5.0..5.0f64, ky in -5.0..5.0f64, kz in -5.0..5.0f64, xi in 1e-3..20.0f64
        ) {
            let kv = ThreeVector::new(kx, ky, kz);
            let k = FourVector::from_parts((kv.norm_sqr() + xi).sqrt(), kv);
            prop_assume!(in_positive_cone(k));
            let w = omega(kv, k.square()).unwrap();
            prop_assert!(((w - k.t) / k.t).abs() < 1e-12);
        }
    }
}
