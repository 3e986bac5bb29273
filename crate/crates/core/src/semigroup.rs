//! The tau-semigroup on a finite momentum lattice.
//!
//! Every operator involved is a function of the momentum operator, so in the
//! momentum eigenbasis each map acts on a coefficient matrix entry by entry:
//! entry `(i, j)` of `|k_i><k_j|` is multiplied by a scalar depending on
//! `k_i^2`, `k_j^2` and `c_i = zeta.k_i`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::fields::ModeLattice;
use crate::kinematics::{self, FourVector, ZetaParams};
use crate::quadrature;
use crate::{Error, Result};

/// Coefficients of `sum rho_ij |k_i><k_j|`, row-major.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoeffMatrix {
    lattice: Vec<FourVector>,
    rho: Vec<Complex64>,
}

impl CoeffMatrix {
    pub fn new(lattice: Vec<FourVector>, rho: Vec<Complex64>) -> Result<Self> {
        for (i, k) in lattice.iter().enumerate() {
            if !kinematics::in_positive_cone(*k) {
                return Err(Error::domain(format!("lattice momentum {i} is outside the positive cone")));
            }
            if lattice[..i].contains(k) {
                return Err(Error::domain(format!("lattice momentum {i} is repeated")));
            }
        }
        if rho.len() != lattice.len() * lattice.len() {
            return Err(Error::usage(format!(
                "{} coefficients for a {}-mode lattice",
                rho.len(),
                lattice.len()
            )));
        }
        Ok(CoeffMatrix { lattice, rho })
    }

    /// `|Phi><Phi|` from the particle amplitudes of `state`.
    pub fn outer_product(state: &ModeLattice) -> Result<Self> {
        let amps: Vec<Complex64> = state.modes().iter().map(|m| m.particle).collect();
        let rho = amps.iter().flat_map(|a| amps.iter().map(move |b| a * b.conj())).collect();
        CoeffMatrix::new(state.momenta(), rho)
    }

    pub fn dim(&self) -> usize {
        self.lattice.len()
    }

    pub fn lattice(&self) -> &[FourVector] {
        &self.lattice
    }

    pub fn entries(&self) -> &[Complex64] {
        &self.rho
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.rho[i * self.dim() + j]
    }

    /// New matrix with entry `(i, j)` multiplied by `f(i, j)`.
    pub fn map_entries<F: Fn(usize, usize) -> f64>(&self, f: F) -> CoeffMatrix {
        let n = self.dim();
        let rho = self.rho.iter().enumerate().map(|(p, z)| z * f(p / n, p % n)).collect();
        CoeffMatrix { lattice: self.lattice.clone(), rho }
    }

    /// Largest `|rho_ij - conj(rho_ji)|`.
    pub fn hermiticity_defect(&self) -> f64 {
        let n = self.dim();
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                worst = worst.max((self.get(i, j) - self.get(j, i).conj()).norm());
            }
        }
        worst
    }

    /// Largest entrywise modulus of `self - other`.
    pub fn max_diff(&self, other: &CoeffMatrix) -> f64 {
        self.rho.iter().zip(&other.rho).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }

    fn couplings(&self, zeta: &ZetaParams) -> Vec<f64> {
        self.lattice.iter().map(|k| kinematics::minkowski_dot(zeta.vector(), *k)).collect()
    }
}

impl<'de> Deserialize<'de> for CoeffMatrix {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            lattice: Vec<FourVector>,
            rho: Vec<Complex64>,
        }
        let raw = Raw::deserialize(d)?;
        CoeffMatrix::new(raw.lattice, raw.rho).map_err(serde::de::Error::custom)
    }
}

/// Free tau evolution: each amplitude times `e^{-k^2 tau}`.
pub fn mike_evolve(state: &ModeLattice, tau: f64) -> Result<ModeLattice> {
    check_tau(tau)?;
    Ok(state.map_amplitudes(|k| {
        let d = Complex64::new((-k.square() * tau).exp(), 0.0);
        (d, d)
    }))
}

fn check_tau(tau: f64) -> Result<()> {
    if !(tau >= 0.0) || !tau.is_finite() {
        return Err(Error::domain(format!("tau must be finite and >= 0, got {tau}")));
    }
    Ok(())
}

/// `lambda_ij = k_i^2 + k_j^2 - (c_i + c_j)^2`. The diagonal comes from
/// [`kinematics::lambda_noisy`] so both agree bit for bit.
pub fn liouville_eigenvalue(ki: FourVector, kj: FourVector, zeta: &ZetaParams) -> f64 {
    if ki == kj {
        return kinematics::lambda_noisy(ki, zeta);
    }
    let c = kinematics::minkowski_dot(zeta.vector(), ki) + kinematics::minkowski_dot(zeta.vector(), kj);
    ki.square() + kj.square() - c * c
}

/// `L(rho) = [k^2, rho]_+ - [zeta.k, [zeta.k, rho]_+]_+`.
pub fn liouville_apply(rho: &CoeffMatrix, zeta: &ZetaParams) -> CoeffMatrix {
    let l = &rho.lattice;
    rho.map_entries(|i, j| liouville_eigenvalue(l[i], l[j], zeta))
}

/// How the Gaussian average over `u` is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum KrausMode {
    ClosedForm,
    /// Gauss-Hermite with the given number of nodes.
    Quadrature { order: usize },
}

/// Gaussian-averaged Kraus factor
/// `(1/(2 sqrt(pi))) int du e^{-u^2/4} e^{-u c sqrt(tau)}` for `c = c_i + c_j`.
/// The closed form is `e^{tau c^2}`.
pub fn kraus_factor(c: f64, tau: f64, mode: KrausMode) -> Result<f64> {
    check_tau(tau)?;
    let rule = match mode {
        KrausMode::ClosedForm => None,
        KrausMode::Quadrature { order } => Some(quadrature::gauss_hermite(order)?),
    };
    Ok(kraus_with(c, tau, rule.as_ref()))
}

fn kraus_with(c: f64, tau: f64, rule: Option<&quadrature::Rule>) -> f64 {
    match rule {
        None => (tau * c * c).exp(),
        Some(rule) => {
            // u = 2v onto the weight e^{-v^2}
            let s = c * tau.sqrt();
            rule.integrate(|v| (-2.0 * v * s).exp()) / PI.sqrt()
        }
    }
}

/// `rho -> (1/(2 sqrt(pi))) int du e^{-u^2/4} e^{-u zeta.k sqrt(tau)} rho e^{-u zeta.k sqrt(tau)}`.
pub fn gaussian_kraus_map(rho: &CoeffMatrix, zeta: &ZetaParams, tau: f64, mode: KrausMode) -> Result<CoeffMatrix> {
    check_tau(tau)?;
    let rule = match mode {
        KrausMode::ClosedForm => None,
        KrausMode::Quadrature { order } => Some(quadrature::gauss_hermite(order)?),
    };
    let c = rho.couplings(zeta);
    Ok(rho.map_entries(|i, j| kraus_with(c[i] + c[j], tau, rule.as_ref())))
}

/// `rho -> e^{-L tau} rho`.
pub fn full_semigroup_step(rho: &CoeffMatrix, zeta: &ZetaParams, tau: f64) -> Result<CoeffMatrix> {
    check_tau(tau)?;
    let l = &rho.lattice;
    Ok(rho.map_entries(|i, j| (-liouville_eigenvalue(l[i], l[j], zeta) * tau).exp()))
}

/// Zeroes every row and column whose momentum has `lambda(k) <= 0` or
/// `k^0 <= 0`.
pub fn stability_filter(rho: &CoeffMatrix, zeta: &ZetaParams) -> CoeffMatrix {
    let keep: Vec<bool> = rho
        .lattice
        .iter()
        .map(|&k| k.t > 0.0 && kinematics::lambda_noisy(k, zeta) > 0.0)
        .collect();
    rho.map_entries(|i, j| if keep[i] && keep[j] { 1.0 } else { 0.0 })
}

/// Central-difference residual of `d rho/d tau = -[k^2, rho]_+` for
/// `rho(tau) = |Phi(tau)><Phi(tau)|`, with `Phi` the free tau evolution of
/// both particle and antiparticle amplitudes. Returns the max-norm.
pub fn von_neumann_residual(state: &ModeLattice, tau: f64, h: f64) -> Result<f64> {
    if !(tau > 0.0) || !(h > 0.0) {
        return Err(Error::domain("tau and h must be positive"));
    }
    let kk: Vec<f64> = state.modes().iter().flat_map(|m| [m.k.square(), m.k.square()]).collect();
    let psi = |s: f64| -> Vec<Complex64> {
        state
            .modes()
            .iter()
            .flat_map(|m| {
                let d = (-m.k.square() * s).exp();
                [m.particle * d, m.antiparticle * d]
            })
            .collect()
    };
    let (p, m, c) = (psi(tau + h), psi(tau - h), psi(tau));
    let mut worst: f64 = 0.0;
    for i in 0..kk.len() {
        for j in 0..kk.len() {
            let deriv = (p[i] * p[j].conj() - m[i] * m[j].conj()) / (2.0 * h);
            let r = deriv + (kk[i] + kk[j]) * c[i] * c[j].conj();
            worst = worst.max(r.norm());
        }
    }
    Ok(worst)
}
