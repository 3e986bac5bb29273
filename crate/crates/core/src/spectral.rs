//! Mass-spectral measures and the xi <-> tau Laplace pair.
//!
//! A [`SpectralMeasure`] is a sum of weighted point atoms plus an optional
//! density sampled on an ascending xi-grid. Densities are integrated with the
//! trapezoid rule on their own grid, so the grid spacing and the upper
//! truncation are explicit parts of the measure.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::kinematics::FourVector;
use crate::quadrature::{self, Rule};
use crate::{Error, Result};

/// A density on `[xi_0, xi_last]` given by samples on an ascending grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridDensity {
    xi: Vec<f64>,
    values: Vec<f64>,
}

impl GridDensity {
    pub fn new(xi: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if xi.len() != values.len() {
            return Err(Error::usage(format!(
                "density grid has {} points but {} values",
                xi.len(),
                values.len()
            )));
        }
        if xi.len() < 2 {
            return Err(Error::usage("density grid needs at least two points"));
        }
        if !(xi[0] >= 0.0) {
            return Err(Error::domain("density grid must lie in [0, inf)"));
        }
        if xi.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::usage("density grid must be strictly ascending"));
        }
        if xi.iter().chain(values.iter()).any(|v| !v.is_finite()) {
            return Err(Error::domain("density grid and values must be finite"));
        }
        Ok(GridDensity { xi, values })
    }

    /// Samples `f` on `xi`.
    pub fn sample<F: FnMut(f64) -> f64>(xi: Vec<f64>, f: F) -> Result<Self> {
        let values = xi.iter().copied().map(f).collect();
        GridDensity::new(xi, values)
    }

    pub fn grid(&self) -> &[f64] {
        &self.xi
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Trapezoid weights of the grid.
    pub fn trapezoid_weights(&self) -> Vec<f64> {
        trapezoid_weights(&self.xi)
    }
}

pub(crate) fn trapezoid_weights(xi: &[f64]) -> Vec<f64> {
    let n = xi.len();
    let mut w = vec![0.0; n];
    for i in 0..n - 1 {
        let h = xi[i + 1] - xi[i];
        w[i] += 0.5 * h;
        w[i + 1] += 0.5 * h;
    }
    w
}

/// `n + 1` points uniform on `[0, xi_max]`.
pub fn uniform_grid(xi_max: f64, n: usize) -> Vec<f64> {
    (0..=n).map(|i| xi_max * i as f64 / n as f64).collect()
}

/// `n + 1` points uniform in `sqrt(xi)` on `[0, xi_max]`. Trapezoid
/// quadrature on this grid keeps second order for integrands that behave like
/// `sqrt(xi)` or `xi ln xi` at the origin.
pub fn sqrt_graded_grid(xi_max: f64, n: usize) -> Vec<f64> {
    (0..=n)
        .map(|i| {
            let s = i as f64 / n as f64;
            xi_max * s * s
        })
        .collect()
}

/// Weighted atoms plus an optional gridded density on `[0, inf)`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SpectralMeasure {
    atoms: Vec<(f64, f64)>,
    density: Option<GridDensity>,
}

impl SpectralMeasure {
    pub fn empty() -> Self {
        SpectralMeasure::default()
    }

    pub fn new(atoms: Vec<(f64, f64)>, density: Option<GridDensity>) -> Result<Self> {
        for &(xi, w) in &atoms {
            if !(xi >= 0.0) || !xi.is_finite() || !w.is_finite() {
                return Err(Error::domain(format!("invalid atom ({xi}, {w})")));
            }
        }
        Ok(SpectralMeasure { atoms, density })
    }

    pub fn atom(xi: f64, weight: f64) -> Result<Self> {
        SpectralMeasure::new(vec![(xi, weight)], None)
    }

    pub fn from_density(density: GridDensity) -> Self {
        SpectralMeasure { atoms: Vec::new(), density: Some(density) }
    }

    pub fn atoms(&self) -> &[(f64, f64)] {
        &self.atoms
    }

    pub fn density(&self) -> Option<&GridDensity> {
        self.density.as_ref()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty() && self.density.is_none()
    }

    /// Scales every atom weight and density value.
    pub fn scaled(&self, factor: f64) -> SpectralMeasure {
        SpectralMeasure {
            atoms: self.atoms.iter().map(|&(x, w)| (x, factor * w)).collect(),
            density: self.density.as_ref().map(|d| GridDensity {
                xi: d.xi.clone(),
                values: d.values.iter().map(|v| factor * v).collect(),
            }),
        }
    }

    /// `sum_i w_i g(xi_i) + trapezoid(density * g)`.
    pub fn integrate<T, G>(&self, mut g: G) -> T
    where
        T: std::ops::Add<Output = T> + std::ops::Mul<f64, Output = T> + Default,
        G: FnMut(f64) -> T,
    {
        let mut acc = T::default();
        for &(xi, w) in &self.atoms {
            acc = acc + g(xi) * w;
        }
        if let Some(d) = &self.density {
            for ((&xi, &v), w) in d.xi.iter().zip(&d.values).zip(d.trapezoid_weights()) {
                acc = acc + g(xi) * (v * w);
            }
        }
        acc
    }
}

/// `L[rho](tau) = int e^{-tau xi} rho(xi) d xi`.
pub fn laplace_forward(measure: &SpectralMeasure, tau: f64) -> Result<f64> {
    if !(tau >= 0.0) || !tau.is_finite() {
        return Err(Error::domain(format!("tau must be finite and >= 0, got {tau}")));
    }
    Ok(measure.integrate(|xi| (-tau * xi).exp()))
}

/// Inverse transform of the exponential-step family `e^{-a tau} theta(a)`.
///
/// Without `half_scaling` the result is the atom `delta(xi - a)`. With
/// `half_scaling` the inverse is taken at argument `2 xi` of a transform at
/// `2 tau`, which leaves the atom at `a` with weight `1/2`. Non-positive `a`
/// yields the empty measure.
pub fn inverse_laplace_expstep(a: f64, half_scaling: bool) -> SpectralMeasure {
    if a > 0.0 && a.is_finite() {
        let w = if half_scaling { 0.5 } else { 1.0 };
        SpectralMeasure { atoms: vec![(a, w)], density: None }
    } else {
        SpectralMeasure::empty()
    }
}

/// Quadrature used by [`xi_convolution`]: composite Gauss-Legendre.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvolutionQuadrature {
    pub order: usize,
    pub panels: usize,
}

impl Default for ConvolutionQuadrature {
    fn default() -> Self {
        ConvolutionQuadrature { order: 8, panels: 32 }
    }
}

/// `(f * g)(xi) = int_0^xi f(xi - s) g(s) ds`.
pub fn xi_convolution<F, G>(f: F, g: G, xi: f64, q: ConvolutionQuadrature) -> Result<f64>
where
    F: Fn(f64) -> f64,
    G: Fn(f64) -> f64,
{
    if !(xi >= 0.0) || !xi.is_finite() {
        return Err(Error::domain(format!("convolution point must be >= 0, got {xi}")));
    }
    if xi == 0.0 {
        return Ok(0.0);
    }
    let rule: Rule = quadrature::composite_gauss_legendre(q.order, q.panels, 0.0, xi)?;
    Ok(rule.integrate(|s| f(xi - s) * g(s)))
}

/// `sum_i w_i K(xi_i, x) + trapezoid(rho * K)`: a Kallen-Lehmann style
/// superposition of fixed-mass kernels.
pub fn kl_spectral_integral<K>(rho: &SpectralMeasure, kernel: K, x: FourVector) -> Complex64
where
    K: Fn(f64, FourVector) -> Complex64,
{
    rho.integrate(|xi| kernel(xi, x))
}

#[derive(Serialize, Deserialize)]
struct MeasureJson {
    #[serde(default)]
    atoms: Vec<[f64; 2]>,
    #[serde(default)]
    grid: Vec<f64>,
    #[serde(default)]
    values: Vec<f64>,
}

impl Serialize for SpectralMeasure {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let (grid, values) = match &self.density {
            Some(d) => (d.xi.clone(), d.values.clone()),
            None => (Vec::new(), Vec::new()),
        };
        MeasureJson {
            atoms: self.atoms.iter().map(|&(x, w)| [x, w]).collect(),
            grid,
            values,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for SpectralMeasure {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let raw = MeasureJson::deserialize(d)?;
        let density = if raw.grid.is_empty() && raw.values.is_empty() {
            None
        } else {
            Some(GridDensity::new(raw.grid, raw.values).map_err(D::Error::custom)?)
        };
        SpectralMeasure::new(raw.atoms.into_iter().map(|[x, w]| (x, w)).collect(), density)
            .map_err(D::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn point_mass_transform() {
        let m = SpectralMeasure::atom(3.0, 2.0).unwrap();
        assert_eq!(laplace_forward(&m, 1.0).unwrap(), 2.0 * (-3.0f64).exp());
        assert!(matches!(laplace_forward(&m, -0.1), Err(Error::Domain(_))));
    }

    #[test]
    fn box_density_transform() {
        let a = 2.0;
        let tau = 0.7;
        let d = GridDensity::sample(uniform_grid(a, 2000), |_| 1.0).unwrap();
        let got = laplace_forward(&SpectralMeasure::from_density(d), tau).unwrap();
        let exact = (1.0 - (-tau * a).exp()) / tau;
        // trapezoid error bound h^2/12 * max|f''| * a
        let h: f64 = a / 2000.0;
        assert!((got - exact).abs() < h * h / 12.0 * tau * tau * a * 1.01);
    }

    #[test]
    fn exponential_density_transform() {
        let d = GridDensity::sample(uniform_grid(40.0, 20_000), |x| (-x).exp()).unwrap();
        let got = laplace_forward(&SpectralMeasure::from_density(d), 0.5).unwrap();
        assert!((got - 2.0 / 3.0).abs() < 1e-6);
    }

    #[test]
    fn expstep_inverse() {
        assert_eq!(inverse_laplace_expstep(3.0, false).atoms(), &[(3.0, 1.0)]);
        assert_eq!(inverse_laplace_expstep(1.25, true).atoms(), &[(1.25, 0.5)]);
        assert!(inverse_laplace_expstep(-1.0, false).is_empty());
        assert!(inverse_laplace_expstep(-1.0, true).is_empty());
        assert!(inverse_laplace_expstep(0.0, true).is_empty());
    }

    #[test]
    fn expstep_round_trip() {
        for a in [0.1, 1.0, 3.7] {
            for tau in [0.0, 0.4, 2.5] {
                let m = inverse_laplace_expstep(a, false);
                assert_eq!(laplace_forward(&m, tau).unwrap(), (-a * tau).exp());
            }
        }
    }

    #[test]
    fn density_validation() {
        assert!(GridDensity::new(vec![0.0], vec![1.0]).is_err());
        assert!(GridDensity::new(vec![0.0, 0.0], vec![1.0, 1.0]).is_err());
        assert!(GridDensity::new(vec![-1.0, 0.0], vec![1.0, 1.0]).is_err());
        assert!(GridDensity::new(vec![0.0, 1.0], vec![1.0]).is_err());
        assert!(SpectralMeasure::atom(-0.5, 1.0).is_err());
    }

    #[test]
    fn unit_convolution_is_interval_length() {
        let q = ConvolutionQuadrature::default();
        for xi in [0.0, 0.5, 3.0, 11.0] {
            let got = xi_convolution(|_| 1.0, |_| 1.0, xi, q).unwrap();
            assert!((got - xi).abs() < 1e-13);
        }
        assert!(xi_convolution(|_| 1.0, |_| 1.0, -1.0, q).is_err());
    }

    #[test]
    fn narrow_bump_picks_out_shifted_value() {
        // Unit-mass Gaussian bump of width 0.01 at a; (bump * g)(xi) -> g(xi - a).
        let (a, width, xi) = (1.3, 0.01, 4.0);
        let norm = 1.0 / (width * (2.0 * std::f64::consts::PI).sqrt());
        let bump = |s: f64| norm * (-(s - a) * (s - a) / (2.0 * width * width)).exp();
        let g = |s: f64| (0.3 * s).sin() + 0.1 * s * s;
        let q = ConvolutionQuadrature { order: 10, panels: 400 };
        let got = xi_convolution(bump, g, xi, q).unwrap();
        // second-order smoothing correction: g''/2 * width^2
        let expect = g(xi - a);
        assert!((got - expect).abs() < 2e-4, "got {got} want {expect}");
    }

    #[test]
    fn kl_integral_of_atoms() {
        let k = |xi: f64, x: FourVector| Complex64::new((-xi * x.t).exp(), xi);
        let x = FourVector::new(0.5, 0.0, 0.0, 0.0);
        let one = SpectralMeasure::atom(2.0, 1.0).unwrap();
        assert_eq!(kl_spectral_integral(&one, k, x), k(2.0, x));
        let two = SpectralMeasure::new(vec![(1.0, 0.25), (3.0, 2.0)], None).unwrap();
        let expect = k(1.0, x) * 0.25 + k(3.0, x) * 2.0;
        assert!((kl_spectral_integral(&two, k, x) - expect).norm() < 1e-15);
    }

    #[test]
    fn json_layout() {
        let d = GridDensity::new(vec![0.0, 1.0, 2.0], vec![1.0, 0.5, 0.25]).unwrap();
        let m = SpectralMeasure::new(vec![(1.5, 0.5)], Some(d)).unwrap();
        let s = serde_json::to_string(&m).unwrap();
        assert_eq!(s, r#"{"atoms":[[1.5,0.5]],"grid":[0.0,1.0,2.0],"values":[1.0,0.5,0.25]}"#);
        let back: SpectralMeasure = serde_json::from_str(&s).unwrap();
        assert_eq!(back, m);
        let bad = r#"{"atoms":[],"grid":[1.0,0.5],"values":[1.0,1.0]}"#;
        assert!(serde_json::from_str::<SpectralMeasure>(bad).is_err());
    }

    proptest! {
        #[test]
        fn transform_is_linear(
            a in 0.0..5.0f64, wa in -2.0..2.0f64, b in 0.0..5.0f64, wb in -2.0..2.0f64,
            c in -3.0..3.0f64, tau in 0.0..4.0f64,
        ) {
            let ma = SpectralMeasure::atom(a, wa).unwrap();
            let mb = SpectralMeasure::atom(b, wb).unwrap();
            let both = SpectralMeasure::new(vec![(a, c * wa), (b, wb)], None).unwrap();
            let lhs = laplace_forward(&both, tau).unwrap();
            let rhs = c * laplace_forward(&ma, tau).unwrap() + laplace_forward(&mb, tau).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-14 * (1.0 + lhs.abs()));
        }

        #[test]
        fn transform_of_nonnegative_measure_is_nonincreasing(
            atoms in proptest::collection::vec((0.0..10.0f64, 0.0..3.0f64), 1..6),
            t1 in 0.0..3.0f64, dt in 0.0..3.0f64,
        ) {
            let d = GridDensity::sample(uniform_grid(8.0, 64), |x| 1.0 / (1.0 + x)).unwrap();
            let m = SpectralMeasure::new(atoms, Some(d)).unwrap();
            let a = laplace_forward(&m, t1).unwrap();
            let b = laplace_forward(&m, t1 + dt).unwrap();
            prop_assert!(b <= a);
        }
    }
}
