//! Mode functions and discrete field operations on a periodic box.
//!
//! Spatial samples live on `x_j = -L + j (2L/n)`, `j = 0..n`, periodic in
//! each axis, so plane waves with lattice momenta `pi m / L` are integrated
//! exactly by the uniform rule. Time samples cover the closed window
//! `[-T/2, T/2]` with trapezoid weights.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::kinematics::{FourVector, ThreeVector};
use crate::{Error, Result};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Normalization convention for plane-wave modes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    /// `[(2 pi)^3 2 omega]^{-1/2}`: unit Klein-Gordon norm against `delta^3(k - k')`.
    Kg,
    /// `[(2 pi)^2 sqrt(2 omega)]^{-1}`: unit spacetime norm against
    /// `delta(xi - xi') delta^3(k - k')`.
    Pc,
}

impl Normalization {
    pub fn constant(self, omega: f64) -> f64 {
        match self {
            Normalization::Kg => ((2.0 * PI).powi(3) * 2.0 * omega).powf(-0.5),
            Normalization::Pc => 1.0 / ((2.0 * PI).powi(2) * (2.0 * omega).sqrt()),
        }
    }
}

/// Normalized plane wave `N(k^0) e^{-i k.x}`.
pub fn mode_function(k: FourVector, x: FourVector, normalization: Normalization) -> Result<Complex64> {
    if !(k.t > 0.0) || !k.is_finite() {
        return Err(Error::domain(format!("mode energy must be positive, got {}", k.t)));
    }
    Ok(Complex64::from_polar(normalization.constant(k.t), -k.dot(x)))
}

/// One lattice mode with particle and antiparticle amplitudes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mode {
    pub k: FourVector,
    pub particle: Complex64,
    pub antiparticle: Complex64,
}

/// A finite set of positive-energy modes with distinct momenta.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct ModeLattice {
    modes: Vec<Mode>,
}

impl ModeLattice {
    /// Accepts momenta with `k^0 > 0` and `k^2 >= 0` (massless shells allowed).
    pub fn new(modes: Vec<Mode>) -> Result<Self> {
        for (i, m) in modes.iter().enumerate() {
            if !m.k.is_finite() || !(m.k.t > 0.0) || m.k.square() < -1e-12 * m.k.t * m.k.t {
                return Err(Error::domain(format!("mode {i} is outside the closed positive cone")));
            }
            if !(m.particle.is_finite() && m.antiparticle.is_finite()) {
                return Err(Error::domain(format!("mode {i} has a non-finite amplitude")));
            }
            if modes[..i].iter().any(|o| o.k == m.k) {
                return Err(Error::domain(format!("mode {i} repeats an earlier momentum")));
            }
        }
        Ok(ModeLattice { modes })
    }

    pub fn empty() -> Self {
        ModeLattice::default()
    }

    /// Modes on the shell `k^2 = xi`: `(kvec, particle, antiparticle)`.
    pub fn on_shell(xi: f64, entries: &[(ThreeVector, Complex64, Complex64)]) -> Result<Self> {
        crate::kinematics::check_xi(xi)?;
        let modes = entries
            .iter()
            .map(|&(kv, a, b)| Mode {
                k: FourVector::from_parts((kv.norm_sqr() + xi).sqrt(), kv),
                particle: a,
                antiparticle: b,
            })
            .collect();
        ModeLattice::new(modes)
    }

    pub fn modes(&self) -> &[Mode] {
        &self.modes
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn momenta(&self) -> Vec<FourVector> {
        self.modes.iter().map(|m| m.k).collect()
    }

    /// `sum_k a e^{-ik.x} + b e^{ik.x}` with raw amplitudes.
    pub fn field(&self, x: FourVector) -> Complex64 {
        self.modes
            .iter()
            .map(|m| {
                let p = Complex64::from_polar(1.0, -m.k.dot(x));
                m.particle * p + m.antiparticle * p.conj()
            })
            .sum()
    }

    /// Amplitudes rescaled by `f(k)`; used to apply a box normalization or
    /// the tau damping.
    pub fn map_amplitudes<F: Fn(FourVector) -> (Complex64, Complex64)>(&self, f: F) -> ModeLattice {
        let modes = self
            .modes
            .iter()
            .map(|m| {
                let (a, b) = f(m.k);
                Mode { k: m.k, particle: m.particle * a, antiparticle: m.antiparticle * b }
            })
            .collect();
        ModeLattice { modes }
    }
}

impl<'de> Deserialize<'de> for ModeLattice {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            modes: Vec<Mode>,
        }
        ModeLattice::new(Raw::deserialize(d)?.modes).map_err(serde::de::Error::custom)
    }
}

/// `sum k^0 (|a|^2 + |b|^2)`; zero-point terms are not included.
pub fn energy_functional(state: &ModeLattice) -> f64 {
    state
        .modes
        .iter()
        .map(|m| m.k.t * (m.particle.norm_sqr() + m.antiparticle.norm_sqr()))
        .sum()
}

/// Heisenberg evolution over time `t`: `a -> a e^{-i k^0 t}`, `b -> b e^{i k^0 t}`.
pub fn phase_evolve(state: &ModeLattice, t: f64) -> ModeLattice {
    state.map_amplitudes(|k| {
        let p = Complex64::from_polar(1.0, -k.t * t);
        (p, p.conj())
    })
}

/// Periodic spatial box of half-width `l` and a closed time window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxGrid {
    pub l: f64,
    pub n_space: usize,
    pub t_window: f64,
    pub n_time: usize,
}

impl BoxGrid {
    pub fn new(l: f64, n_space: usize, t_window: f64, n_time: usize) -> Result<Self> {
        let g = BoxGrid { l, n_space, t_window, n_time };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.l > 0.0) || !self.l.is_finite() || !(self.t_window > 0.0) || !self.t_window.is_finite() {
            return Err(Error::domain("box half-width and time window must be positive"));
        }
        if self.n_space < 4 || !self.n_space.is_multiple_of(2) {
            return Err(Error::usage(format!("n_space must be even and >= 4, got {}", self.n_space)));
        }
        if self.n_time < 2 {
            return Err(Error::usage("n_time must be at least 2"));
        }
        Ok(())
    }

    pub fn h(&self) -> f64 {
        2.0 * self.l / self.n_space as f64
    }

    pub fn dt(&self) -> f64 {
        self.t_window / (self.n_time - 1) as f64
    }

    pub fn volume(&self) -> f64 {
        (2.0 * self.l).powi(3)
    }

    pub fn space_coords(&self) -> Vec<f64> {
        let h = self.h();
        (0..self.n_space).map(|j| -self.l + h * j as f64).collect()
    }

    pub fn time_coords(&self) -> Vec<f64> {
        let dt = self.dt();
        (0..self.n_time).map(|i| -0.5 * self.t_window + dt * i as f64).collect()
    }

    pub fn time_weights(&self) -> Vec<f64> {
        let dt = self.dt();
        (0..self.n_time)
            .map(|i| if i == 0 || i + 1 == self.n_time { 0.5 * dt } else { dt })
            .collect()
    }

    /// Spatial cell volume `h^3`.
    pub fn cell(&self) -> f64 {
        self.h().powi(3)
    }

    pub fn slice_len(&self) -> usize {
        self.n_space.pow(3)
    }

    pub fn n_points(&self) -> usize {
        self.n_time * self.slice_len()
    }

    /// Spatial position of flat slice index `s` (x-major).
    pub fn space_point(&self, s: usize) -> ThreeVector {
        let n = self.n_space;
        let h = self.h();
        let (ix, iy, iz) = (s / (n * n), (s / n) % n, s % n);
        ThreeVector::new(-self.l + h * ix as f64, -self.l + h * iy as f64, -self.l + h * iz as f64)
    }

    /// Commensurate momentum `pi m / L`.
    pub fn lattice_momentum(&self, m: [i64; 3]) -> ThreeVector {
        let s = PI / self.l;
        ThreeVector::new(s * m[0] as f64, s * m[1] as f64, s * m[2] as f64)
    }
}

/// Samples of a field and its time derivative on one time slice.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldSlice {
    pub t: f64,
    pub values: Vec<Complex64>,
    pub dt_values: Vec<Complex64>,
}

impl FieldSlice {
    /// Analytic slice of `sum a N e^{-ikx} + b N e^{ikx}`, with `N` the box
    /// normalization `(2 k^0 V)^{-1/2}` when `box_normalized`.
    pub fn from_modes(state: &ModeLattice, grid: &BoxGrid, t: f64, box_normalized: bool) -> Result<Self> {
        grid.validate()?;
        let v = grid.volume();
        let norms: Vec<f64> = state
            .modes
            .iter()
            .map(|m| if box_normalized { (2.0 * m.k.t * v).powf(-0.5) } else { 1.0 })
            .collect();
        let (values, dt_values) = (0..grid.slice_len())
            .into_par_iter()
            .map(|s| {
                let x = FourVector::from_parts(t, grid.space_point(s));
                let mut f = Complex64::new(0.0, 0.0);
                let mut df = Complex64::new(0.0, 0.0);
                for (m, &nrm) in state.modes.iter().zip(&norms) {
                    let p = Complex64::from_polar(nrm, -m.k.dot(x));
                    let a = m.particle * p;
                    let b = m.antiparticle * p.conj();
                    f += a + b;
                    df += -I * m.k.t * a + I * m.k.t * b;
                }
                (f, df)
            })
            .unzip();
        Ok(FieldSlice { t, values, dt_values })
    }

    /// Two adjacent slices at `t_mid -/+ dt/2`; the derivative is their central
    /// difference and the value their mean.
    pub fn from_two_slices(t_mid: f64, dt: f64, before: &[Complex64], after: &[Complex64]) -> Result<Self> {
        if before.len() != after.len() {
            return Err(Error::usage("time slices have different sizes"));
        }
        if !(dt > 0.0) {
            return Err(Error::domain("slice separation must be positive"));
        }
        let values = before.iter().zip(after).map(|(a, b)| 0.5 * (a + b)).collect();
        let dt_values = before.iter().zip(after).map(|(a, b)| (b - a) / dt).collect();
        Ok(FieldSlice { t: t_mid, values, dt_values })
    }
}

/// Klein-Gordon inner product `i int phi^* <-> d_0 psi d^3x` by the periodic
/// rule on the box.
pub fn kg_inner_product(phi: &FieldSlice, psi: &FieldSlice, grid: &BoxGrid) -> Result<Complex64> {
    let n = grid.slice_len();
    if [phi.values.len(), phi.dt_values.len(), psi.values.len(), psi.dt_values.len()]
        .iter()
        .any(|&l| l != n)
    {
        return Err(Error::usage("field slices do not match the grid"));
    }
    if (phi.t - psi.t).abs() > 1e-12 * (1.0 + phi.t.abs()) {
        return Err(Error::usage("field slices are taken at different times"));
    }
    let s: Complex64 = (0..n)
        .map(|j| phi.values[j].conj() * psi.dt_values[j] - phi.dt_values[j].conj() * psi.values[j])
        .sum();
    Ok(I * s * grid.cell())
}

/// Momentum-space form of the inner product for box-normalized fields built on
/// the same momenta: `sum conj(a) a' - conj(b) b'`. Valid when all modes
/// share one mass shell.
pub fn parseval_sum(phi: &ModeLattice, psi: &ModeLattice) -> Result<Complex64> {
    if phi.len() != psi.len() || phi.modes.iter().zip(&psi.modes).any(|(a, b)| a.k != b.k) {
        return Err(Error::usage("lattices must list the same momenta in the same order"));
    }
    Ok(phi
        .modes
        .iter()
        .zip(&psi.modes)
        .map(|(a, b)| a.particle.conj() * b.particle - a.antiparticle.conj() * b.antiparticle)
        .sum())
}

/// Samples on every point of a [`BoxGrid`], index `(it, ix, iy, iz)` row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    pub grid: BoxGrid,
    pub values: Vec<Complex64>,
}

impl GridField {
    pub fn new(grid: BoxGrid, values: Vec<Complex64>) -> Result<Self> {
        grid.validate()?;
        if values.len() != grid.n_points() {
            return Err(Error::usage(format!(
                "expected {} samples, got {}",
                grid.n_points(),
                values.len()
            )));
        }
        Ok(GridField { grid, values })
    }

    pub fn sample<F: Fn(FourVector) -> Complex64 + Sync>(grid: BoxGrid, f: F) -> Result<Self> {
        grid.validate()?;
        let times = grid.time_coords();
        let ns = grid.slice_len();
        let values = (0..grid.n_points())
            .into_par_iter()
            .map(|p| f(FourVector::from_parts(times[p / ns], grid.space_point(p % ns))))
            .collect();
        Ok(GridField { grid, values })
    }

    pub fn slice(&self, it: usize) -> &[Complex64] {
        let ns = self.grid.slice_len();
        &self.values[it * ns..(it + 1) * ns]
    }
}

/// `(box + xi) phi` by second-order central differences, periodic in space,
/// on the interior time slices `1..n_time-1`. Output is laid out like the
/// input with the first and last slices dropped.
pub fn el_residual(phi: &GridField, xi: f64) -> Result<Vec<Complex64>> {
    let g = phi.grid;
    if g.n_time < 3 {
        return Err(Error::usage("el_residual needs at least 3 time slices"));
    }
    let n = g.n_space;
    let ns = g.slice_len();
    let (h2, dt2) = (g.h() * g.h(), g.dt() * g.dt());
    let v = &phi.values;
    let idx = |it: usize, ix: usize, iy: usize, iz: usize| it * ns + (ix * n + iy) * n + iz;
    let out = (1..g.n_time - 1)
        .into_par_iter()
        .flat_map_iter(|it| {
            (0..ns).map(move |s| {
                let (ix, iy, iz) = (s / (n * n), (s / n) % n, s % n);
                let c = v[idx(it, ix, iy, iz)];
                let d_tt = (v[idx(it + 1, ix, iy, iz)] - 2.0 * c + v[idx(it - 1, ix, iy, iz)]) / dt2;
                let (xp, xm) = ((ix + 1) % n, (ix + n - 1) % n);
                let (yp, ym) = ((iy + 1) % n, (iy + n - 1) % n);
                let (zp, zm) = ((iz + 1) % n, (iz + n - 1) % n);
                let lap = (v[idx(it, xp, iy, iz)] + v[idx(it, xm, iy, iz)] + v[idx(it, ix, yp, iz)]
                    + v[idx(it, ix, ym, iz)]
                    + v[idx(it, ix, iy, zp)]
                    + v[idx(it, ix, iy, zm)]
                    - 6.0 * c)
                    / h2;
                d_tt - lap + xi * c
            })
        })
        .collect();
    Ok(out)
}

/// Max tau-evolution residual at the sample points of the coarsest grid
/// for `levels` grids, each halving `h`, `dt` and `dtau` together. The
/// coarsest grid is `4^3` points on a unit half-width box with one interior
/// time sample, `dtau = 0.1`.
pub fn mike_refinement(state: &ModeLattice, tau: f64, levels: usize) -> Result<Vec<f64>> {
    if levels == 0 || levels > 6 {
        return Err(Error::usage(format!("refinement levels must be in 1..=6, got {levels}")));
    }
    (0..levels)
        .map(|lvl| {
            let f = 1usize << lvl;
            let grid = BoxGrid::new(1.0, 4 * f, 1.0, 2 * f + 1)?;
            let res = mike_residual_field(state, tau, 0.1 / f as f64, &grid)?;
            let n = grid.n_space;
            let ns = grid.slice_len();
            // t = 0 sits on interior slice f - 1 (slice 0 is skipped)
            let it = f - 1;
            let mut worst: f64 = 0.0;
            for ix in (0..n).step_by(f) {
                for iy in (0..n).step_by(f) {
                    for iz in (0..n).step_by(f) {
                        worst = worst.max(res[it * ns + (ix * n + iy) * n + iz].norm());
                    }
                }
            }
            Ok(worst)
        })
        .collect()
}

/// Pointwise residual `dPhi/dtau - box Phi` of the tau-evolved mode sum
/// `Phi(x, tau) = sum e^{-k^2 tau} (a e^{-ikx} + b e^{ikx})`, both
/// derivatives by central differences: `dtau` in tau, the grid spacings in
/// `x`. Evaluated at interior time samples and every spatial sample.
pub fn mike_residual_field(state: &ModeLattice, tau: f64, dtau: f64, grid: &BoxGrid) -> Result<Vec<Complex64>> {
    grid.validate()?;
    if !(tau > 0.0) || !(dtau > 0.0) {
        return Err(Error::domain("tau and dtau must be positive"));
    }
    if grid.n_time < 3 {
        return Err(Error::usage("mike_residual needs at least 3 time slices"));
    }
    let phi = |x: FourVector, s: f64| -> Complex64 {
        state
            .modes
            .iter()
            .map(|m| {
                let damp = (-m.k.square() * s).exp();
                let p = Complex64::from_polar(damp, -m.k.dot(x));
                m.particle * p + m.antiparticle * Complex64::from_polar(damp, m.k.dot(x))
            })
            .sum()
    };
    let (h, dt) = (grid.h(), grid.dt());
    let times = grid.time_coords();
    let ns = grid.slice_len();
    let steps = [
        (FourVector::new(dt, 0.0, 0.0, 0.0), 1.0 / (dt * dt)),
        (FourVector::new(0.0, h, 0.0, 0.0), -1.0 / (h * h)),
        (FourVector::new(0.0, 0.0, h, 0.0), -1.0 / (h * h)),
        (FourVector::new(0.0, 0.0, 0.0, h), -1.0 / (h * h)),
    ];
    Ok((ns..(grid.n_time - 1) * ns)
        .into_par_iter()
        .map(|p| {
            let x = FourVector::from_parts(times[p / ns], grid.space_point(p % ns));
            let c = phi(x, tau);
            let d_tau = (phi(x, tau + dtau) - phi(x, tau - dtau)) / (2.0 * dtau);
            let boxed: Complex64 = steps
                .iter()
                .map(|&(e, s)| (phi(x + e, tau) - 2.0 * c + phi(x - e, tau)) * s)
                .sum();
            d_tau - boxed
        })
        .collect())
}

/// Max-norm of [`mike_residual_field`].
pub fn mike_residual(state: &ModeLattice, tau: f64, dtau: f64, grid: &BoxGrid) -> Result<f64> {
    Ok(max_abs(&mike_residual_field(state, tau, dtau, grid)?))
}

pub fn max_abs(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Overlap of two `Pc`-normalized modes of equal `kvec` and masses `xi`,
/// `xi2`, integrated over the time window `[-T/2, T/2]` with the spatial
/// delta stripped. Tends to `delta(xi - xi2)` as `T` grows: the peak is
/// `T / (4 pi omega)` and the first zero sits at `|omega - omega2| = 2 pi / T`.
pub fn windowed_xi_overlap(kvec: ThreeVector, xi: f64, xi2: f64, t_window: f64) -> Result<f64> {
    let w1 = crate::kinematics::omega(kvec, xi)?;
    let w2 = crate::kinematics::omega(kvec, xi2)?;
    if !(w1 > 0.0 && w2 > 0.0) {
        return Err(Error::domain("overlap needs positive frequencies"));
    }
    if !(t_window > 0.0) {
        return Err(Error::domain("time window must be positive"));
    }
    let half = 0.5 * (w1 - w2) * t_window;
    let sinc = if half == 0.0 { 1.0 } else { half.sin() / half };
    Ok(t_window * sinc / (4.0 * PI * (w1 * w2).sqrt()))
}
