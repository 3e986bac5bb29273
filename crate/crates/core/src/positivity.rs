//! Kernel positivity functionals `sigma[f] = int int f^*(x) sigma(x, y) f(y)`.
//!
//! Two independent evaluation paths are provided on a [`BoxGrid`]:
//!
//! * direct: the double trapezoid sum with the kernel tabulated on the
//!   lattice of grid differences;
//! * momentum: for time-ordered plane-wave kernels, per momentum node
//!   `sigma_n = W_n [ |C|^2 + |S|^2 + (sign-ordered term) ]` with
//!   `C, S` the cosine and sine transforms of `f` at `(freq_n, k_n)`.
//!   The first part is a sum of squares, so `Re sigma >= 0` holds by
//!   construction; the sign-ordered part is purely imaginary.
//!
//! Both paths discretize the same integral with the same nodes, so they
//! agree to rounding when they share a [`PlaneWaveSum`].

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::fields::{BoxGrid, GridField};
use crate::kinematics::{FourVector, ZetaParams};
use crate::propagators::{Angular, KernelKind, KernelSpec, PlaneWaveSum, QuadratureConfig, WaveNode};
use crate::{Error, Result};

/// Default cap on grid points for the quadratic-cost direct path.
pub const DIRECT_POINT_CAP: usize = 1 << 13;

/// Gaussian wave packet
/// `A exp(-sum_mu (x_mu - c_mu)^2 / (2 w_mu^2)) e^{-i q.x}`,
/// with `q.x` the Minkowski product.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianPacket {
    pub center: FourVector,
    pub widths: [f64; 4],
    pub carrier: FourVector,
    pub amplitude: Complex64,
}

impl GaussianPacket {
    pub fn validate(&self) -> Result<()> {
        if self.widths.iter().any(|w| !(*w > 0.0) || !w.is_finite()) {
            return Err(Error::domain("packet widths must be positive and finite"));
        }
        if !self.center.is_finite() || !self.carrier.is_finite() || !self.amplitude.is_finite() {
            return Err(Error::domain("packet parameters must be finite"));
        }
        if self.amplitude.norm() == 0.0 {
            return Err(Error::domain("packet amplitude must be nonzero"));
        }
        Ok(())
    }

    pub fn value(&self, x: FourVector) -> Complex64 {
        let (xa, ca) = (x.as_array(), self.center.as_array());
        let e: f64 = (0..4).map(|m| ((xa[m] - ca[m]) / self.widths[m]).powi(2)).sum();
        self.amplitude * Complex64::from_polar((-0.5 * e).exp(), -self.carrier.dot(x))
    }

    /// One-dimensional factor along axis `mu` (0 is time); the amplitude sits
    /// in the time factor.
    fn axis_factor(&self, mu: usize, s: f64) -> Complex64 {
        let c = self.center.as_array()[mu];
        let q = self.carrier.as_array()[mu];
        let g = (-0.5 * ((s - c) / self.widths[mu]).powi(2)).exp();
        // e^{-i q.x} = e^{-i q0 t} prod_j e^{+i q_j x_j}
        let phase = if mu == 0 { -q * s } else { q * s };
        let base = Complex64::from_polar(g, phase);
        if mu == 0 {
            base * self.amplitude
        } else {
            base
        }
    }
}

/// A test function on a spacetime box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum TestFunction {
    Grid { grid: BoxGrid, values: Vec<Complex64> },
    GaussianPacket(GaussianPacket),
}

impl TestFunction {
    pub fn packet(p: GaussianPacket) -> Result<Self> {
        p.validate()?;
        Ok(TestFunction::GaussianPacket(p))
    }

    pub fn from_grid(field: GridField) -> Result<Self> {
        if field.values.iter().all(|z| z.norm() == 0.0) {
            return Err(Error::domain("grid test function has zero norm"));
        }
        Ok(TestFunction::Grid { grid: field.grid, values: field.values })
    }

    /// Samples on `grid`, index `(it, ix, iy, iz)` row-major.
    pub fn samples(&self, grid: &BoxGrid) -> Result<Vec<Complex64>> {
        match self {
            TestFunction::Grid { grid: g, values } => {
                check_grid(g, grid, values.len())?;
                Ok(values.clone())
            }
            TestFunction::GaussianPacket(p) => {
                p.validate()?;
                Ok(GridField::sample(*grid, |x| p.value(x))?.values)
            }
        }
    }

    /// `f -> alpha f`.
    pub fn scaled(&self, alpha: Complex64) -> TestFunction {
        match self {
            TestFunction::Grid { grid, values } => {
                TestFunction::Grid { grid: *grid, values: values.iter().map(|v| v * alpha).collect() }
            }
            TestFunction::GaussianPacket(p) => {
                TestFunction::GaussianPacket(GaussianPacket { amplitude: p.amplitude * alpha, ..*p })
            }
        }
    }
}

fn check_grid(own: &BoxGrid, grid: &BoxGrid, len: usize) -> Result<()> {
    if own != grid || len != grid.n_points() {
        return Err(Error::usage("grid test function sampled on a different grid"));
    }
    Ok(())
}

/// Sampling ranges for random packets, as fractions of the box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PacketRanges {
    /// Centers uniform in `[-s L, s L]` (space) and `[-s T/2, s T/2]` (time).
    pub center_fraction: f64,
    pub width_min: f64,
    pub width_max: f64,
    /// Carrier components uniform in `[-q, q]`.
    pub carrier_max: f64,
}

impl Default for PacketRanges {
    fn default() -> Self {
        PacketRanges { center_fraction: 0.3, width_min: 0.35, width_max: 0.9, carrier_max: 2.0 }
    }
}

/// `n` seeded Gaussian packets.
pub fn random_packets(n: usize, seed: u64, grid: &BoxGrid, ranges: &PacketRanges) -> Result<Vec<TestFunction>> {
    grid.validate()?;
    if !(ranges.width_min > 0.0 && ranges.width_max >= ranges.width_min) {
        return Err(Error::domain("packet width range must be positive and ordered"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let half = [0.5 * grid.t_window, grid.l, grid.l, grid.l];
    (0..n)
        .map(|_| {
            let mut c = [0.0; 4];
            let mut w = [0.0; 4];
            let mut q = [0.0; 4];
            for m in 0..4 {
                let s = ranges.center_fraction * half[m];
                c[m] = rng.gen_range(-s..=s);
                w[m] = rng.gen_range(ranges.width_min..=ranges.width_max);
                q[m] = rng.gen_range(-ranges.carrier_max..=ranges.carrier_max);
            }
            let amp = Complex64::from_polar(rng.gen_range(0.5..2.0), rng.gen_range(0.0..std::f64::consts::TAU));
            TestFunction::packet(GaussianPacket {
                center: FourVector::from_array(c),
                widths: w,
                carrier: FourVector::from_array(q),
                amplitude: amp,
            })
        })
        .collect()
}

/// `n` seeded complex noise fields smoothed by one diffusion pass
/// (periodic in space, reflecting in time).
pub fn smoothed_noise(n: usize, seed: u64, grid: &BoxGrid) -> Result<Vec<TestFunction>> {
    grid.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (ns, nt, m) = (grid.slice_len(), grid.n_time, grid.n_space);
    (0..n)
        .map(|_| {
            let raw: Vec<Complex64> = (0..grid.n_points())
                .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                .collect();
            let idx = |it: usize, ix: usize, iy: usize, iz: usize| it * ns + (ix * m + iy) * m + iz;
            let mut out = raw.clone();
            for it in 0..nt {
                for ix in 0..m {
                    for iy in 0..m {
                        for iz in 0..m {
                            let c = raw[idx(it, ix, iy, iz)];
                            let tp = if it + 1 < nt { it + 1 } else { it.saturating_sub(1) };
                            let tm = if it > 0 { it - 1 } else { (it + 1).min(nt - 1) };
                            let nb = [
                                raw[idx(tp, ix, iy, iz)],
                                raw[idx(tm, ix, iy, iz)],
                                raw[idx(it, (ix + 1) % m, iy, iz)],
                                raw[idx(it, (ix + m - 1) % m, iy, iz)],
                                raw[idx(it, ix, (iy + 1) % m, iz)],
                                raw[idx(it, ix, (iy + m - 1) % m, iz)],
                                raw[idx(it, ix, iy, (iz + 1) % m)],
                                raw[idx(it, ix, iy, (iz + m - 1) % m)],
                            ];
                            out[idx(it, ix, iy, iz)] = c + 0.1 * nb.iter().map(|v| v - c).sum::<Complex64>();
                        }
                    }
                }
            }
            TestFunction::from_grid(GridField::new(*grid, out)?)
        })
        .collect()
}

/// Trapezoid weight of every grid point.
fn point_weights(grid: &BoxGrid) -> Vec<f64> {
    let wt = grid.time_weights();
    let cell = grid.cell();
    let ns = grid.slice_len();
    (0..grid.n_points()).map(|p| wt[p / ns] * cell).collect()
}

/// `sum_x sum_y w_x w_y f^*(x) sigma(x, y) f(y)` for a general kernel.
pub fn functional_direct<K>(kernel: K, f: &TestFunction, grid: &BoxGrid, max_points: usize) -> Result<Complex64>
where
    K: Fn(FourVector, FourVector) -> Complex64 + Sync,
{
    check_cap(grid, max_points)?;
    let fw = weighted_samples(f, grid)?;
    let pts = grid_points(grid);
    let acc: Vec<Complex64> = (0..pts.len())
        .into_par_iter()
        .map(|p| {
            if fw[p] == Complex64::new(0.0, 0.0) {
                return Complex64::new(0.0, 0.0);
            }
            let row: Complex64 = (0..pts.len()).map(|q| kernel(pts[p], pts[q]) * fw[q]).sum();
            fw[p].conj() * row
        })
        .collect();
    Ok(acc.into_iter().sum())
}

fn check_cap(grid: &BoxGrid, max_points: usize) -> Result<()> {
    grid.validate()?;
    if grid.n_points() > max_points {
        return Err(Error::usage(format!(
            "direct functional on {} points exceeds the cap of {max_points}; use the momentum path",
            grid.n_points()
        )));
    }
    Ok(())
}

fn weighted_samples(f: &TestFunction, grid: &BoxGrid) -> Result<Vec<Complex64>> {
    let s = f.samples(grid)?;
    Ok(s.iter().zip(point_weights(grid)).map(|(v, w)| v * w).collect())
}

fn grid_points(grid: &BoxGrid) -> Vec<FourVector> {
    let times = grid.time_coords();
    let ns = grid.slice_len();
    (0..grid.n_points())
        .map(|p| FourVector::from_parts(times[p / ns], grid.space_point(p % ns)))
        .collect()
}

/// Kernel values on every grid difference `x - y`.
pub struct DifferenceTable {
    dims: [usize; 4],
    values: Vec<Complex64>,
}

impl DifferenceTable {
    pub fn build<K: Fn(FourVector) -> Complex64 + Sync>(kernel: K, grid: &BoxGrid) -> Result<Self> {
        grid.validate()?;
        let (nt, n) = (grid.n_time, grid.n_space);
        let dims = [2 * nt - 1, 2 * n - 1, 2 * n - 1, 2 * n - 1];
        let (dt, h) = (grid.dt(), grid.h());
        let total: usize = dims.iter().product();
        let values = (0..total)
            .into_par_iter()
            .map(|p| {
                let it = p / (dims[1] * dims[2] * dims[3]);
                let r = p % (dims[1] * dims[2] * dims[3]);
                let (ix, iy, iz) = (r / (dims[2] * dims[3]), (r / dims[3]) % dims[2], r % dims[3]);
                let off = |i: usize, c: usize| i as f64 - (c - 1) as f64;
                kernel(FourVector::new(
                    off(it, nt) * dt,
                    off(ix, n) * h,
                    off(iy, n) * h,
                    off(iz, n) * h,
                ))
            })
            .collect();
        Ok(DifferenceTable { dims, values })
    }

    fn at(&self, d: [usize; 4]) -> Complex64 {
        let [_, a, b, c] = self.dims;
        self.values[((d[0] * a + d[1]) * b + d[2]) * c + d[3]]
    }
}

/// Direct double sum for a translation-invariant kernel given as a table.
pub fn functional_direct_table(table: &DifferenceTable, f: &TestFunction, grid: &BoxGrid) -> Result<Complex64> {
    let (nt, n) = (grid.n_time, grid.n_space);
    if table.dims != [2 * nt - 1, 2 * n - 1, 2 * n - 1, 2 * n - 1] {
        return Err(Error::usage("difference table was built for another grid"));
    }
    let fw = weighted_samples(f, grid)?;
    let coords = |p: usize| [p / (n * n * n), (p / (n * n)) % n, (p / n) % n, p % n];
    let centre = [nt - 1, n - 1, n - 1, n - 1];
    let acc: Vec<Complex64> = (0..fw.len())
        .into_par_iter()
        .map(|p| {
            let cp = coords(p);
            let mut row = Complex64::new(0.0, 0.0);
            for (q, fq) in fw.iter().enumerate() {
                let cq = coords(q);
                let d = [
                    cp[0] + centre[0] - cq[0],
                    cp[1] + centre[1] - cq[1],
                    cp[2] + centre[2] - cq[2],
                    cp[3] + centre[3] - cq[3],
                ];
                row += table.at(d) * fq;
            }
            fw[p].conj() * row
        })
        .collect();
    Ok(acc.into_iter().sum())
}

/// Result of the momentum path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentumValue {
    /// `Re` is the factored sum of squares, `Im` the sign-ordered term.
    pub value: Complex64,
    /// The sign-ordered term computed on its own; its real part should vanish.
    pub theta_term: Complex64,
}

/// Per-slice transforms `U_i = sum_x w f e^{ik.x}` and `V_i = sum_x w f e^{-ik.x}`.
enum Prepared {
    Separable { times: Vec<f64>, time: Vec<Complex64>, space: Vec<f64>, axes: [Vec<Complex64>; 3] },
    Dense { times: Vec<f64>, space: Vec<f64>, slices: Vec<Vec<Complex64>> },
}

impl Prepared {
    fn new(f: &TestFunction, grid: &BoxGrid) -> Result<Self> {
        grid.validate()?;
        let times = grid.time_coords();
        let wt = grid.time_weights();
        let space = grid.space_coords();
        let h = grid.h();
        match f {
            TestFunction::GaussianPacket(p) => {
                p.validate()?;
                let time = times.iter().zip(&wt).map(|(&t, &w)| p.axis_factor(0, t) * w).collect();
                let axis = |mu| space.iter().map(|&x| p.axis_factor(mu, x) * h).collect();
                Ok(Prepared::Separable { axes: [axis(1), axis(2), axis(3)], time, times, space })
            }
            TestFunction::Grid { grid: g, values } => {
                check_grid(g, grid, values.len())?;
                let ns = grid.slice_len();
                let cell = grid.cell();
                let slices = (0..grid.n_time)
                    .map(|i| values[i * ns..(i + 1) * ns].iter().map(|v| v * (wt[i] * cell)).collect())
                    .collect();
                Ok(Prepared::Dense { times, space, slices })
            }
        }
    }

    /// `(U, V)` per time slice for node `(freq, k)`.
    fn transforms(&self, node: &WaveNode) -> (Vec<Complex64>, Vec<Complex64>) {
        let kk = node.k.as_array();
        let phases = |space: &[f64], j: usize| -> Vec<Complex64> {
            space.iter().map(|&x| Complex64::from_polar(1.0, -kk[j] * x)).collect()
        };
        match self {
            Prepared::Separable { times, time, space, axes } => {
                let mut minus = Complex64::new(1.0, 0.0);
                let mut plus = Complex64::new(1.0, 0.0);
                for (j, axis) in axes.iter().enumerate() {
                    let ph = phases(space, j);
                    minus *= axis.iter().zip(&ph).map(|(a, p)| a * p).sum::<Complex64>();
                    plus *= axis.iter().zip(&ph).map(|(a, p)| a * p.conj()).sum::<Complex64>();
                }
                times
                    .iter()
                    .zip(time)
                    .map(|(&t, &ft)| {
                        let e = Complex64::from_polar(1.0, node.freq * t);
                        (ft * e * minus, ft * e.conj() * plus)
                    })
                    .unzip()
            }
            Prepared::Dense { times, space, slices } => {
                let (px, py, pz) = (phases(space, 0), phases(space, 1), phases(space, 2));
                let n = space.len();
                times
                    .iter()
                    .zip(slices)
                    .map(|(&t, slice)| {
                        let mut minus = Complex64::new(0.0, 0.0);
                        let mut plus = Complex64::new(0.0, 0.0);
                        for (s, v) in slice.iter().enumerate() {
                            let p = px[s / (n * n)] * py[(s / n) % n] * pz[s % n];
                            minus += v * p;
                            plus += v * p.conj();
                        }
                        let e = Complex64::from_polar(1.0, node.freq * t);
                        (minus * e, plus * e.conj())
                    })
                    .unzip()
            }
        }
    }
}

/// Sum of squares and sign-ordered term for one node.
fn node_terms(u: &[Complex64], v: &[Complex64]) -> (f64, Complex64) {
    let a: Complex64 = u.iter().sum();
    let b: Complex64 = v.iter().sum();
    // |C|^2 + |S|^2 with C = (a + b)/2, S = (a - b)/(2i)
    let squares = 0.5 * (a.norm_sqr() + b.norm_sqr());
    // 1/2 sum_ij sgn(t_i - t_j) [U_i^* U_j - V_i^* V_j] via prefix sums
    let (mut below_u, mut below_v) = (Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0));
    let mut theta = Complex64::new(0.0, 0.0);
    for i in 0..u.len() {
        let above_u = a - below_u - u[i];
        let above_v = b - below_v - v[i];
        theta += u[i].conj() * (below_u - above_u) - v[i].conj() * (below_v - above_v);
        below_u += u[i];
        below_v += v[i];
    }
    (squares, 0.5 * theta)
}

/// Momentum path for a time-ordered plane-wave kernel tabulated in three
/// dimensions.
pub fn functional_momentum(f: &TestFunction, spectrum: &PlaneWaveSum, grid: &BoxGrid) -> Result<MomentumValue> {
    let nodes = spectrum
        .wave_nodes()
        .ok_or_else(|| Error::usage("momentum path needs a fully tabulated spectrum"))?;
    let prep = Prepared::new(f, grid)?;
    let parts: Vec<(f64, Complex64)> = nodes
        .par_iter()
        .map(|node| {
            if node.weight == 0.0 {
                return (0.0, Complex64::new(0.0, 0.0));
            }
            let (u, v) = prep.transforms(node);
            let (sq, th) = node_terms(&u, &v);
            (node.weight * sq, th * node.weight)
        })
        .collect();
    let re: f64 = parts.iter().map(|p| p.0).sum();
    let theta: Complex64 = parts.iter().map(|p| p.1).sum();
    if !re.is_finite() || !theta.is_finite() {
        return Err(Error::Numerical("non-finite momentum functional".into()));
    }
    Ok(MomentumValue { value: Complex64::new(re, theta.im), theta_term: theta })
}

/// Momentum path for the noisy time-ordered kernel.
pub fn functional_momentum_noisy(
    f: &TestFunction,
    xi: f64,
    zeta: &ZetaParams,
    grid: &BoxGrid,
    q: &QuadratureConfig,
) -> Result<MomentumValue> {
    functional_momentum(f, &PlaneWaveSum::noisy(xi, zeta, q, Angular::Full)?, grid)
}

/// Momentum path for the free Feynman kernel.
pub fn functional_momentum_free(f: &TestFunction, xi: f64, grid: &BoxGrid, q: &QuadratureConfig) -> Result<MomentumValue> {
    functional_momentum(f, &PlaneWaveSum::free(xi, q, Angular::Full)?, grid)
}

/// `|Re|` of the sign-ordered term alone, which must vanish: the term is a
/// Hermitian form against an antisymmetric sign, hence purely imaginary.
pub fn imaginary_antisymmetry_check(
    f: &TestFunction,
    xi: f64,
    zeta: &ZetaParams,
    grid: &BoxGrid,
    q: &QuadratureConfig,
) -> Result<f64> {
    let spectrum = PlaneWaveSum::noisy(xi, zeta, q, Angular::Full)?;
    let nodes = spectrum.wave_nodes().expect("full spectrum");
    let prep = Prepared::new(f, grid)?;
    // explicit pair sum, symmetrized over the swap x <-> y
    let re: f64 = nodes
        .par_iter()
        .map(|node| {
            let (u, v) = prep.transforms(node);
            let mut t = Complex64::new(0.0, 0.0);
            for i in 0..u.len() {
                for j in 0..u.len() {
                    let s = (i as i64 - j as i64).signum() as f64;
                    let direct = u[i].conj() * u[j] - v[i].conj() * v[j];
                    let swapped = u[j].conj() * u[i] - v[j].conj() * v[i];
                    t += 0.5 * s * (direct - swapped);
                }
            }
            node.weight * 0.5 * t.re
        })
        .collect::<Vec<_>>()
        .into_iter()
        .sum();
    Ok(re.abs())
}

/// Sweep verdict; "positive" means no violation was found at the tolerance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Positive,
    Violated,
    Inconclusive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvalPath {
    Momentum,
    Direct,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionResult {
    pub id: usize,
    pub re: f64,
    pub im: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelReport {
    pub kernel: KernelSpec,
    pub seed: Option<u64>,
    pub path: EvalPath,
    pub per_function: Vec<FunctionResult>,
    pub min_re: f64,
    pub min_im: f64,
    /// `max |sigma[f]|` over the successful evaluations.
    pub scale: f64,
    pub verdict_re: Verdict,
    pub failures: usize,
    pub quadrature: QuadratureConfig,
    pub grid: BoxGrid,
    pub tolerance: f64,
}

impl KernelReport {
    /// CSV with one row per test function.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("id,sigma_re,sigma_im,error\n");
        for r in &self.per_function {
            s.push_str(&format!("{},{},{},{}\n", r.id, r.re, r.im, r.error.as_deref().unwrap_or("")));
        }
        s
    }
}

/// Evaluates `sigma[f]` over `family` with `eval` and assembles the report.
#[allow(clippy::too_many_arguments)]
pub fn sweep_with<E>(
    kernel: KernelSpec,
    family: &[TestFunction],
    grid: &BoxGrid,
    q: &QuadratureConfig,
    tolerance: f64,
    seed: Option<u64>,
    path: EvalPath,
    eval: E,
) -> Result<KernelReport>
where
    E: Fn(&TestFunction) -> Result<Complex64> + Sync,
{
    if family.is_empty() {
        return Err(Error::usage("sweep needs at least one test function"));
    }
    if !(tolerance >= 0.0) {
        return Err(Error::domain("tolerance must be >= 0"));
    }
    let per_function: Vec<FunctionResult> = family
        .par_iter()
        .enumerate()
        .map(|(id, f)| match eval(f) {
            Ok(z) if z.is_finite() => FunctionResult { id, re: z.re, im: z.im, error: None },
            Ok(_) => FunctionResult { id, re: f64::NAN, im: f64::NAN, error: Some("non-finite value".into()) },
            Err(e) => FunctionResult { id, re: f64::NAN, im: f64::NAN, error: Some(e.to_string()) },
        })
        .collect();
    let ok: Vec<&FunctionResult> = per_function.iter().filter(|r| r.error.is_none()).collect();
    let failures = per_function.len() - ok.len();
    let min_re = ok.iter().map(|r| r.re).fold(f64::INFINITY, f64::min);
    let min_im = ok.iter().map(|r| r.im).fold(f64::INFINITY, f64::min);
    let scale = ok.iter().map(|r| r.re.hypot(r.im)).fold(0.0, f64::max);
    let verdict_re = if ok.is_empty() || failures * 10 > per_function.len() {
        Verdict::Inconclusive
    } else if min_re >= -tolerance * scale {
        Verdict::Positive
    } else {
        Verdict::Violated
    };
    Ok(KernelReport {
        kernel,
        seed,
        path,
        per_function,
        min_re,
        min_im,
        scale,
        verdict_re,
        failures,
        quadrature: *q,
        grid: *grid,
        tolerance,
    })
}

/// Sweep using the momentum path for time-ordered plane-wave kernels and the
/// direct path otherwise.
pub fn sweep(
    kernel: KernelSpec,
    family: &[TestFunction],
    grid: &BoxGrid,
    q: &QuadratureConfig,
    tolerance: f64,
    seed: Option<u64>,
) -> Result<KernelReport> {
    kernel.validate()?;
    match kernel.kind {
        KernelKind::Feynman | KernelKind::NoisyFeynman => {
            let spectrum = if kernel.kind == KernelKind::Feynman {
                PlaneWaveSum::free(kernel.xi, q, Angular::Full)?
            } else {
                PlaneWaveSum::noisy(kernel.xi, &kernel.zeta, q, Angular::Full)?
            };
            sweep_with(kernel, family, grid, q, tolerance, seed, EvalPath::Momentum, |f| {
                Ok(functional_momentum(f, &spectrum, grid)?.value)
            })
        }
        _ => {
            check_cap(grid, DIRECT_POINT_CAP)?;
            let k = kernel.stationary(q)?;
            let table = DifferenceTable::build(|dx| k.eval(dx), grid)?;
            sweep_with(kernel, family, grid, q, tolerance, seed, EvalPath::Direct, |f| {
                functional_direct_table(&table, f, grid)
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::Scheme;

    fn grid() -> BoxGrid {
        BoxGrid::new(1.5, 4, 2.0, 4).unwrap()
    }

    fn q() -> QuadratureConfig {
        QuadratureConfig { k_max: 4.0, n_radial: 12, n_angular: 8, scheme: Scheme::GaussLegendre }
    }

    fn packet() -> TestFunction {
        TestFunction::packet(GaussianPacket {
            center: FourVector::new(0.1, -0.2, 0.3, 0.0),
            widths: [0.6, 0.5, 0.7, 0.4],
            carrier: FourVector::new(1.0, 0.5, -0.3, 0.2),
            amplitude: Complex64::new(0.8, 0.6),
        })
        .unwrap()
    }

    #[test]
    fn packet_validation() {
        let mut p = match packet() {
            TestFunction::GaussianPacket(p) => p,
            _ => unreachable!(),
        };
        p.widths[2] = 0.0;
        assert!(TestFunction::packet(p).is_err());
    }

    #[test]
    fn separable_samples_match_pointwise() {
        let g = grid();
        let f = packet();
        let TestFunction::GaussianPacket(p) = f else { unreachable!() };
        let pts = grid_points(&g);
        let s = f.samples(&g).unwrap();
        for (x, v) in pts.iter().zip(&s) {
            let prod = p.axis_factor(0, x.t) * p.axis_factor(1, x.x) * p.axis_factor(2, x.y) * p.axis_factor(3, x.z);
            assert!((prod - v).norm() < 1e-14);
        }
    }

    #[test]
    fn rank_one_identity_and_imaginary_kernels() {
        let g = grid();
        let f = packet();
        let h = |x: FourVector| Complex64::from_polar(1.0 + 0.1 * x.x, 0.7 * x.t - 0.2 * x.y);
        let got = functional_direct(|x, y| h(x) * h(y).conj(), &f, &g, DIRECT_POINT_CAP).unwrap();
        let w = point_weights(&g);
        let s = f.samples(&g).unwrap();
        let pts = grid_points(&g);
        let single: Complex64 = (0..pts.len()).map(|p| h(pts[p]).conj() * s[p] * w[p]).sum();
        assert!((got - single.norm_sqr()).norm() < 1e-10 * single.norm_sqr());
        let imag = functional_direct(|x, y| Complex64::i() * h(x) * h(y).conj(), &f, &g, DIRECT_POINT_CAP).unwrap();
        assert!(imag.re.abs() < 1e-12 * imag.norm());
        let wmap: std::collections::HashMap<[u64; 4], f64> =
            pts.iter().zip(&w).map(|(p, w)| (p.as_array().map(f64::to_bits), *w)).collect();
        let ident = functional_direct(
            |x, y| if x == y { Complex64::new(1.0 / wmap[&x.as_array().map(f64::to_bits)], 0.0) } else { Complex64::new(0.0, 0.0) },
            &f,
            &g,
            DIRECT_POINT_CAP,
        )
        .unwrap();
        let norm: f64 = s.iter().zip(&w).map(|(v, w)| v.norm_sqr() * w).sum();
        assert!((ident.re - norm).abs() < 1e-12 * norm && ident.im.abs() < 1e-12 * norm, "{ident} vs {norm}");
        assert!(functional_direct(|_, _| Complex64::new(1.0, 0.0), &f, &g, 10).is_err());
    }

    #[test]
    fn momentum_matches_direct_with_shared_nodes() {
        let g = grid();
        let z = ZetaParams::new(FourVector::new(0.2, 0.2, 0.0, 0.0)).unwrap();
        let spectrum = PlaneWaveSum::noisy(0.5, &z, &q(), Angular::Full).unwrap();
        let table = DifferenceTable::build(|dx| spectrum.time_ordered(dx), &g).unwrap();
        let noise = smoothed_noise(2, 3, &g).unwrap();
        for f in [packet(), noise[0].clone(), noise[1].clone()] {
            let m = functional_momentum(&f, &spectrum, &g).unwrap();
            let d = functional_direct_table(&table, &f, &g).unwrap();
            assert!((m.value - d).norm() < 1e-10 * d.norm(), "{} vs {}", m.value, d);
            assert!(m.value.re >= 0.0);
            assert!(m.theta_term.re.abs() < 1e-10 * d.norm());
        }
    }

    #[test]
    fn table_matches_generic_direct() {
        let g = grid();
        let k = KernelSpec::feynman(1.0).stationary(&q()).unwrap();
        let table = DifferenceTable::build(|dx| k.eval(dx), &g).unwrap();
        let f = packet();
        let a = functional_direct_table(&table, &f, &g).unwrap();
        let b = functional_direct(|x, y| k.eval(x - y), &f, &g, DIRECT_POINT_CAP).unwrap();
        assert!((a - b).norm() < 1e-12 * b.norm());
    }

    #[test]
    fn sweep_verdicts() {
        let g = grid();
        let fam = random_packets(6, 11, &g, &PacketRanges::default()).unwrap();
        let spec = KernelSpec::feynman(1.0);
        let rep = sweep(spec, &fam, &g, &q(), 1e-8, Some(11)).unwrap();
        assert_eq!(rep.verdict_re, Verdict::Positive);
        assert_eq!(rep.per_function.len(), 6);
        let spectrum = PlaneWaveSum::free(1.0, &q(), Angular::Full).unwrap();
        let neg = sweep_with(spec, &fam, &g, &q(), 1e-8, Some(11), EvalPath::Momentum, |f| {
            Ok(-functional_momentum(f, &spectrum, &g)?.value)
        })
        .unwrap();
        assert_eq!(neg.verdict_re, Verdict::Violated);
        let failing = sweep_with(spec, &fam, &g, &q(), 1e-8, None, EvalPath::Direct, |_| {
            Err(Error::Numerical("boom".into()))
        })
        .unwrap();
        assert_eq!(failing.verdict_re, Verdict::Inconclusive);
        assert!(sweep(spec, &[], &g, &q(), 1e-8, None).is_err());
    }

    #[test]
    fn seeded_families_are_reproducible() {
        let g = grid();
        let a = random_packets(5, 42, &g, &PacketRanges::default()).unwrap();
        let b = random_packets(5, 42, &g, &PacketRanges::default()).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, random_packets(5, 43, &g, &PacketRanges::default()).unwrap());
        assert_eq!(smoothed_noise(2, 1, &g).unwrap(), smoothed_noise(2, 1, &g).unwrap());
    }

    #[test]
    fn report_json_and_csv() {
        let g = grid();
        let fam = random_packets(3, 5, &g, &PacketRanges::default()).unwrap();
        let rep = sweep(KernelSpec::feynman(2.0), &fam, &g, &q(), 1e-8, Some(5)).unwrap();
        let js = serde_json::to_string(&rep).unwrap();
        let back: KernelReport = serde_json::from_str(&js).unwrap();
        assert_eq!(back, rep);
        let csv = rep.to_csv();
        assert_eq!(csv.lines().count(), 4);
        let first: Vec<&str> = csv.lines().nth(1).unwrap().split(',').collect();
        assert_eq!(first[1].parse::<f64>().unwrap(), rep.per_function[0].re);
    }
}
