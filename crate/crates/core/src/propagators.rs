//! Two-point kernels evaluated as regularized momentum integrals.
//!
//! Every kernel here is a superposition of plane waves
//! `e^{-i(freq(k) t - k.r)}` over the ball `|k| <= k_max` with a real,
//! non-negative weight. [`PlaneWaveSum`] stores those nodes once so that
//! a kernel can be tabulated over many separations without re-deriving the
//! quadrature. Isotropic integrands collapse to a radial rule with the
//! angular average `sin(k r)/(k r)` done in closed form; anisotropic ones
//! (noise with a spatial `zeta`) use a tensor rule in `(|k|, cos theta, phi)`.
//!
//! Time ordering is imposed by branch selection: for `t = x^0 - y^0 > 0` the
//! Wightman branch, for `t < 0` its conjugate, and at `t = 0` the mean of both.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::kinematics::{self, FourVector, ThreeVector, ZetaParams};
use crate::quadrature::{self, Rule, Scheme};
use crate::spectral;
use crate::{Error, Result};

/// Momentum-space quadrature settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureConfig {
    /// Radial cutoff of the momentum ball.
    pub k_max: f64,
    pub n_radial: usize,
    /// Nodes per angle (`cos theta` and `phi`).
    pub n_angular: usize,
    pub scheme: Scheme,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        QuadratureConfig { k_max: 8.0, n_radial: 96, n_angular: 24, scheme: Scheme::GaussLegendre }
    }
}

impl QuadratureConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.k_max > 0.0) || !self.k_max.is_finite() {
            return Err(Error::domain(format!("k_max must be positive, got {}", self.k_max)));
        }
        if self.n_radial < 2 || self.n_angular < 2 {
            return Err(Error::usage("quadrature node counts must be at least 2"));
        }
        Ok(())
    }

    /// The same configuration with every node count doubled.
    pub fn refined(&self) -> Self {
        QuadratureConfig { n_radial: 2 * self.n_radial, n_angular: 2 * self.n_angular, ..*self }
    }

    fn radial_rule(&self) -> Result<Rule> {
        self.validate()?;
        self.scheme.rule(self.n_radial, 0.0, self.k_max)
    }

    /// Tensor rule on the ball: `(k vector, weight)` with the `k^2` Jacobian
    /// folded into the weight.
    pub fn ball_nodes(&self) -> Result<Vec<(ThreeVector, f64)>> {
        let radial = self.radial_rule()?;
        let polar = self.scheme.rule(self.n_angular, -1.0, 1.0)?;
        let azimuth = quadrature::periodic(self.n_angular)?;
        let mut out = Vec::with_capacity(radial.len() * polar.len() * azimuth.len());
        for (r, wr) in radial.iter() {
            for (c, wc) in polar.iter() {
                let s = (1.0 - c * c).max(0.0).sqrt();
                for (p, wp) in azimuth.iter() {
                    let k = ThreeVector::new(r * s * p.cos(), r * s * p.sin(), r * c);
                    out.push((k, wr * r * r * wc * wp));
                }
            }
        }
        Ok(out)
    }
}

/// How angular integration is performed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Angular {
    /// Closed-form angular average; valid only for isotropic integrands.
    Radial,
    /// Full tensor quadrature.
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct RadialNode {
    k: f64,
    freq: f64,
    weight: f64,
}

/// A plane-wave node of a fully tabulated momentum integral.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaveNode {
    pub k: ThreeVector,
    /// Energy component `k^0` assigned to the node.
    pub freq: f64,
    /// Quadrature weight times the kernel's momentum-space density.
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
enum Nodes {
    Radial(Vec<RadialNode>),
    Full(Vec<WaveNode>),
}

/// `W(dx) = sum_n w_n e^{-i(freq_n dx^0 - k_n . dx)}` with real `w_n >= 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct PlaneWaveSum {
    nodes: Nodes,
}

impl PlaneWaveSum {
    /// Free field of mass squared `xi`: density `1/((2 pi)^3 2 omega)`.
    pub fn free(xi: f64, q: &QuadratureConfig, angular: Angular) -> Result<Self> {
        kinematics::check_xi(xi)?;
        let density = |k: ThreeVector| {
            let w = (k.norm_sqr() + xi).sqrt();
            (w, if w > 0.0 { 1.0 / ((2.0 * PI).powi(3) * 2.0 * w) } else { 0.0 })
        };
        Self::build(q, angular, density)
    }

    /// Noisy field: frequency `varpi(k, xi, zeta)` and density
    /// `(2 pi)^{-3/2} / sqrt(discriminant)`. Radial angular handling is
    /// accepted only when `zeta` has no spatial part.
    pub fn noisy(xi: f64, zeta: &ZetaParams, q: &QuadratureConfig, angular: Angular) -> Result<Self> {
        kinematics::check_xi(xi)?;
        if angular == Angular::Radial && !zeta.is_spatially_zero() {
            return Err(Error::usage("spatial zeta makes the noisy integrand anisotropic"));
        }
        let pref = (2.0 * PI).powf(-1.5);
        let density = |k: ThreeVector| {
            let d = kinematics::shell_discriminant(k, xi, zeta);
            let w = kinematics::varpi_unchecked(k, xi, zeta);
            (w, if d > 0.0 { pref / d.sqrt() } else { 0.0 })
        };
        Self::build(q, angular, density)
    }

    /// Noisy field with automatic angular handling.
    pub fn noisy_auto(xi: f64, zeta: &ZetaParams, q: &QuadratureConfig) -> Result<Self> {
        let angular = if zeta.is_spatially_zero() { Angular::Radial } else { Angular::Full };
        Self::noisy(xi, zeta, q, angular)
    }

    fn build<F>(q: &QuadratureConfig, angular: Angular, density: F) -> Result<Self>
    where
        F: Fn(ThreeVector) -> (f64, f64),
    {
        match angular {
            Angular::Radial => {
                let rule = q.radial_rule()?;
                let nodes = rule
                    .iter()
                    .map(|(k, w)| {
                        let (freq, rho) = density(ThreeVector::new(0.0, 0.0, k));
                        RadialNode { k, freq, weight: 4.0 * PI * k * k * w * rho }
                    })
                    .collect();
                Ok(PlaneWaveSum { nodes: Nodes::Radial(nodes) })
            }
            Angular::Full => {
                let nodes = q
                    .ball_nodes()?
                    .into_iter()
                    .map(|(k, w)| {
                        let (freq, rho) = density(k);
                        WaveNode { k, freq, weight: w * rho }
                    })
                    .collect();
                Ok(PlaneWaveSum { nodes: Nodes::Full(nodes) })
            }
        }
    }

    pub fn is_radial(&self) -> bool {
        matches!(self.nodes, Nodes::Radial(_))
    }

    /// Full nodes, when tabulated in three dimensions.
    pub fn wave_nodes(&self) -> Option<&[WaveNode]> {
        match &self.nodes {
            Nodes::Full(n) => Some(n),
            Nodes::Radial(_) => None,
        }
    }

    /// Frequencies used at every node.
    pub fn frequencies(&self) -> Vec<f64> {
        match &self.nodes {
            Nodes::Radial(n) => n.iter().map(|n| n.freq).collect(),
            Nodes::Full(n) => n.iter().map(|n| n.freq).collect(),
        }
    }

    /// Unordered (Wightman-type) sum at separation `dx`.
    pub fn wightman(&self, dx: FourVector) -> Complex64 {
        let t = dx.t;
        match &self.nodes {
            Nodes::Radial(nodes) => {
                let r = dx.spatial().norm();
                nodes
                    .iter()
                    .map(|n| Complex64::from_polar(n.weight * sinc(n.k * r), -n.freq * t))
                    .sum()
            }
            Nodes::Full(nodes) => {
                let rv = dx.spatial();
                nodes
                    .iter()
                    .map(|n| Complex64::from_polar(n.weight, -(n.freq * t - n.k.dot(rv))))
                    .sum()
            }
        }
    }

    /// Time-ordered sum: Wightman branch for `dx^0 > 0`, its mirror for
    /// `dx^0 < 0`, the branch average at equal times.
    pub fn time_ordered(&self, dx: FourVector) -> Complex64 {
        let w = self.wightman(dx);
        if dx.t > 0.0 {
            w
        } else if dx.t < 0.0 {
            w.conj()
        } else {
            Complex64::new(w.re, 0.0)
        }
    }

    /// Antisymmetrized sum `W(dx) - W(dx)^*`, the c-number commutator.
    pub fn commutator(&self, dx: FourVector) -> Complex64 {
        let w = self.wightman(dx);
        w - w.conj()
    }
}

/// `sin(x)/x` with its series near zero.
pub fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        let x2 = x * x;
        1.0 - x2 / 6.0 + x2 * x2 / 120.0
    } else {
        x.sin() / x
    }
}

/// Fixed-mass Wightman function `int d^3k/((2 pi)^3 2 omega) e^{-i(omega t - k.r)}`
/// over `|k| <= k_max`.
pub fn wightman(dx: FourVector, xi: f64, q: &QuadratureConfig) -> Result<Complex64> {
    Ok(PlaneWaveSum::free(xi, q, Angular::Radial)?.wightman(dx))
}

/// Fixed-mass Feynman propagator `i Delta_F(x, y)`.
pub fn feynman(x: FourVector, y: FourVector, xi: f64, q: &QuadratureConfig) -> Result<Complex64> {
    Ok(PlaneWaveSum::free(xi, q, Angular::Radial)?.time_ordered(x - y))
}

/// Noisy Feynman propagator with shifted frequency `varpi`.
pub fn noisy_feynman(
    x: FourVector,
    y: FourVector,
    xi: f64,
    zeta: &ZetaParams,
    q: &QuadratureConfig,
) -> Result<Complex64> {
    Ok(PlaneWaveSum::noisy_auto(xi, zeta, q)?.time_ordered(x - y))
}

/// Constant ratio `noisy_feynman / feynman` at `zeta = 0`:
/// `(2 pi)^{-3/2} / omega` against `(2 pi)^{-3} / (2 omega)`.
pub fn zero_noise_ratio() -> f64 {
    2.0 * (2.0 * PI).powf(1.5)
}

/// Nodes for the inner energy integral over `k0 in [k, sqrt(k^2 + xi_cut)]`,
/// graded towards the lower edge where the `e^{-2 tau (k0^2 - k^2)}` factor
/// concentrates.
fn energy_rule(k: f64, xi_cut: f64, tau: f64, t: f64) -> Result<Rule> {
    let top = (k * k + xi_cut).sqrt();
    let span = top - k;
    let width = (1.0 / (4.0 * tau * k.max(1e-12))).min(1.0 / (2.0 * tau).sqrt());
    let levels = ((span / width).log2().ceil() as i64 + 2).clamp(0, 40) as usize;
    let base = quadrature::graded_gauss_legendre(20, levels, k, top)?;
    // Split panels that see too much oscillation.
    let per_panel = 20;
    let mut nodes = Vec::with_capacity(base.len());
    let mut weights = Vec::with_capacity(base.len());
    let gl = quadrature::gauss_legendre(per_panel)?;
    for chunk in 0..base.len() / per_panel {
        let lo_idx = chunk * per_panel;
        let a = if chunk == 0 { k } else { panel_edge(k, top, levels, chunk) };
        let b = panel_edge(k, top, levels, chunk + 1);
        let pieces = ((t.abs() * (b - a) / 4.0).ceil() as usize).max(1);
        if pieces == 1 {
            nodes.extend_from_slice(&base.nodes[lo_idx..lo_idx + per_panel]);
            weights.extend_from_slice(&base.weights[lo_idx..lo_idx + per_panel]);
        } else {
            let h = (b - a) / pieces as f64;
            for p in 0..pieces {
                let r = gl.mapped(a + h * p as f64, a + h * (p + 1) as f64);
                nodes.extend(r.nodes);
                weights.extend(r.weights);
            }
        }
    }
    Ok(Rule { nodes, weights })
}

fn panel_edge(a: f64, b: f64, levels: usize, i: usize) -> f64 {
    // edges: a, a + (b-a) 2^{-levels}, ..., a + (b-a)/2, b
    if i == 0 {
        a
    } else if i > levels {
        b
    } else {
        a + (b - a) * 0.5f64.powi((levels + 1 - i) as i32)
    }
}

/// The tau-domain two-point kernel
/// `(2 pi)^{-3} int d^4k theta(k^0) theta(k^2) e^{-2 k^2 tau} e^{-i k.dx}`
/// with `|k| <= k_max` and `k^0 <= sqrt(|k|^2 + xi_max)`.
///
/// The energy integral is done per radial node on a graded Gauss-Legendre
/// rule; the angular average is closed form.
pub fn phi_tau_kernel(dx: FourVector, tau: f64, xi_max: f64, q: &QuadratureConfig) -> Result<Complex64> {
    if !(tau > 0.0) || !tau.is_finite() {
        return Err(Error::domain(format!("tau must be positive, got {tau}")));
    }
    if !(xi_max > 0.0) || !xi_max.is_finite() {
        return Err(Error::domain(format!("xi_max must be positive, got {xi_max}")));
    }
    let radial = q.radial_rule()?;
    let r = dx.spatial().norm();
    let t = dx.t;
    // e^{-2 tau xi} below 1e-18 contributes nothing representable.
    let xi_cut = xi_max.min(41.5 / (2.0 * tau));
    let mut acc = Complex64::new(0.0, 0.0);
    for (k, wk) in radial.iter() {
        let rule = energy_rule(k, xi_cut, tau, t)?;
        let inner: Complex64 = rule
            .iter()
            .map(|(k0, w)| {
                let mass2 = (k0 - k) * (k0 + k);
                Complex64::from_polar(w * (-2.0 * tau * mass2).exp(), -k0 * t)
            })
            .sum();
        acc += inner * (4.0 * PI * k * k * wk * sinc(k * r));
    }
    Ok(acc / (2.0 * PI).powi(3))
}

/// Mass-side form of the tau kernel: `int_0^xi_max e^{-2 tau xi} W(dx, xi) d xi`
/// by the trapezoid rule on `n_xi` intervals uniform in `sqrt(xi)`, with the
/// Wightman functions sharing the radial nodes of `q`.
pub fn wightman_laplace(dx: FourVector, tau: f64, xi_max: f64, n_xi: usize, q: &QuadratureConfig) -> Result<Complex64> {
    if !(tau > 0.0) || !tau.is_finite() {
        return Err(Error::domain(format!("tau must be positive, got {tau}")));
    }
    check_xi_max(xi_max)?;
    if n_xi < 1 {
        return Err(Error::usage("xi grid needs at least one interval"));
    }
    let grid = spectral::sqrt_graded_grid(xi_max, n_xi);
    let unit = spectral::GridDensity::sample(grid.clone(), |_| 1.0)?;
    let rho = spectral::SpectralMeasure::from_density(unit);
    let values: Vec<Complex64> = grid
        .par_iter()
        .map(|&xi| PlaneWaveSum::free(xi, q, Angular::Radial).map(|w| w.wightman(dx)))
        .collect::<Result<_>>()?;
    let lookup = |xi: f64| values[grid.partition_point(|&g| g < xi)];
    Ok(spectral::kl_spectral_integral(&rho, |xi, _| lookup(xi) * (-2.0 * tau * xi).exp(), dx))
}

/// Kind of two-point kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelKind {
    Wightman,
    Feynman,
    PhiTau,
    NoisyFeynman,
    CommutatorFixedMass,
    CommutatorCutoff,
}

impl KernelKind {
    pub fn name(self) -> &'static str {
        match self {
            KernelKind::Wightman => "wightman",
            KernelKind::Feynman => "feynman",
            KernelKind::PhiTau => "phi_tau",
            KernelKind::NoisyFeynman => "noisy_feynman",
            KernelKind::CommutatorFixedMass => "commutator_fixed_mass",
            KernelKind::CommutatorCutoff => "commutator_cutoff",
        }
    }
}

/// A kernel selection with the parameters relevant to its kind.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub kind: KernelKind,
    #[serde(default)]
    pub xi: f64,
    #[serde(default)]
    pub tau: f64,
    #[serde(default = "ZetaParams::zero")]
    pub zeta: ZetaParams,
    #[serde(default = "default_xi_max")]
    pub xi_max: f64,
}

fn default_xi_max() -> f64 {
    40.0
}

impl KernelSpec {
    pub fn new(kind: KernelKind) -> Self {
        KernelSpec { kind, xi: 1.0, tau: 1.0, zeta: ZetaParams::zero(), xi_max: default_xi_max() }
    }

    pub fn feynman(xi: f64) -> Self {
        KernelSpec { xi, ..KernelSpec::new(KernelKind::Feynman) }
    }

    pub fn noisy(xi: f64, zeta: ZetaParams) -> Self {
        KernelSpec { xi, zeta, ..KernelSpec::new(KernelKind::NoisyFeynman) }
    }

    pub fn validate(&self) -> Result<()> {
        use KernelKind::*;
        match self.kind {
            Wightman | Feynman | NoisyFeynman | CommutatorFixedMass => kinematics::check_xi(self.xi),
            PhiTau => {
                if !(self.tau > 0.0) {
                    return Err(Error::domain("phi_tau kernel needs tau > 0"));
                }
                check_xi_max(self.xi_max)
            }
            CommutatorCutoff => check_xi_max(self.xi_max),
        }
    }

    /// Kernel value `sigma(x, y)`.
    pub fn evaluate(&self, x: FourVector, y: FourVector, q: &QuadratureConfig) -> Result<Complex64> {
        self.validate()?;
        let dx = x - y;
        match self.kind {
            KernelKind::PhiTau => phi_tau_kernel(dx, self.tau, self.xi_max, q),
            KernelKind::CommutatorCutoff => commutator_cutoff(dx, self.xi_max, q),
            _ => Ok(self.stationary(q)?.eval(dx)),
        }
    }

    /// Translation-invariant evaluator that reuses its quadrature nodes.
    pub fn stationary(&self, q: &QuadratureConfig) -> Result<StationaryKernel> {
        self.validate()?;
        q.validate()?;
        Ok(match self.kind {
            KernelKind::Wightman => StationaryKernel::Waves(PlaneWaveSum::free(self.xi, q, Angular::Radial)?, Branch::Unordered),
            KernelKind::Feynman => StationaryKernel::Waves(PlaneWaveSum::free(self.xi, q, Angular::Radial)?, Branch::Ordered),
            KernelKind::NoisyFeynman => StationaryKernel::Waves(PlaneWaveSum::noisy_auto(self.xi, &self.zeta, q)?, Branch::Ordered),
            KernelKind::CommutatorFixedMass => {
                StationaryKernel::Waves(PlaneWaveSum::free(self.xi, q, Angular::Radial)?, Branch::Commutator)
            }
            KernelKind::PhiTau => StationaryKernel::PhiTau { tau: self.tau, xi_max: self.xi_max, q: *q },
            KernelKind::CommutatorCutoff => StationaryKernel::Cutoff { xi_max: self.xi_max, q: *q },
        })
    }
}

fn check_xi_max(xi_max: f64) -> Result<()> {
    if !(xi_max > 0.0) || !xi_max.is_finite() {
        return Err(Error::domain(format!("xi_max must be positive, got {xi_max}")));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    Unordered,
    Ordered,
    Commutator,
}

/// A kernel depending only on `x - y`.
#[derive(Debug, Clone)]
pub enum StationaryKernel {
    Waves(PlaneWaveSum, Branch),
    PhiTau { tau: f64, xi_max: f64, q: QuadratureConfig },
    Cutoff { xi_max: f64, q: QuadratureConfig },
}

impl StationaryKernel {
    pub fn eval(&self, dx: FourVector) -> Complex64 {
        match self {
            StationaryKernel::Waves(w, Branch::Unordered) => w.wightman(dx),
            StationaryKernel::Waves(w, Branch::Ordered) => w.time_ordered(dx),
            StationaryKernel::Waves(w, Branch::Commutator) => w.commutator(dx),
            StationaryKernel::PhiTau { tau, xi_max, q } => {
                phi_tau_kernel(dx, *tau, *xi_max, q).expect("validated phi_tau parameters")
            }
            StationaryKernel::Cutoff { xi_max, q } => {
                commutator_cutoff(dx, *xi_max, q).expect("validated cutoff parameters")
            }
        }
    }

    /// Evaluates on many separations in parallel, preserving order.
    pub fn eval_many(&self, dxs: &[FourVector]) -> Vec<Complex64> {
        dxs.par_iter().map(|&dx| self.eval(dx)).collect()
    }
}

/// Commutator kernels; `spec.kind` must be one of the commutator kinds.
pub fn commutator_kernel(dx: FourVector, spec: &KernelSpec, q: &QuadratureConfig) -> Result<Complex64> {
    spec.validate()?;
    match spec.kind {
        KernelKind::CommutatorFixedMass => Ok(PlaneWaveSum::free(spec.xi, q, Angular::Radial)?.commutator(dx)),
        KernelKind::CommutatorCutoff => commutator_cutoff(dx, spec.xi_max, q),
        other => Err(Error::usage(format!("{} is not a commutator kernel", other.name()))),
    }
}

/// Positive-cone commutator with a mass cutoff,
/// `int_{|k|<=k_max} d^3k int_{|k|}^{sqrt(|k|^2 + xi_max)} dk0 [e^{-ik.dx} - e^{ik.dx}]`.
///
/// The energy integral is elementary and done in closed form.
fn commutator_cutoff(dx: FourVector, xi_max: f64, q: &QuadratureConfig) -> Result<Complex64> {
    check_xi_max(xi_max)?;
    let radial = q.radial_rule()?;
    let r = dx.spatial().norm();
    let t = dx.t;
    let mut acc = 0.0;
    for (k, wk) in radial.iter() {
        let top = (k * k + xi_max).sqrt();
        // int_k^top sin(k0 t) dk0
        let sine_integral = if t == 0.0 {
            0.0
        } else {
            2.0 * (0.5 * (k + top) * t).sin() * (0.5 * (top - k) * t).sin() / t
        };
        acc += 4.0 * PI * k * k * wk * sinc(k * r) * sine_integral;
    }
    // [e^{-i k0 t} - e^{i k0 t}] = -2i sin(k0 t)
    Ok(Complex64::new(0.0, -2.0 * acc))
}
