#![allow(dead_code)]

use kgvar::fields::{self, Mode, ModeLattice};
use kgvar::kinematics::minkowski_dot;
use kgvar::semigroup::CoeffMatrix;
use kgvar::{Complex64, FourVector, ThreeVector, ZetaParams};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn rand_c(r: &mut ChaCha8Rng) -> Complex64 {
    c(r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0))
}

/// `log2(e_coarse / e_fine)` for successive halvings.
pub fn orders(errors: &[f64]) -> Vec<f64> {
    errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect()
}

pub fn random_zeta(r: &mut ChaCha8Rng) -> ZetaParams {
    ZetaParams::new(FourVector::new(
        r.gen_range(-0.6..0.6),
        r.gen_range(-0.8..0.8),
        r.gen_range(-0.8..0.8),
        r.gen_range(-0.8..0.8),
    ))
    .unwrap()
}

/// Random positive-cone momentum with `k^2` in `[0.2, 4]`.
pub fn random_cone(r: &mut ChaCha8Rng) -> FourVector {
    let kv = ThreeVector::new(r.gen_range(-1.5..1.5), r.gen_range(-1.5..1.5), r.gen_range(-1.5..1.5));
    let m2: f64 = r.gen_range(0.2..4.0);
    FourVector::from_parts((kv.norm_sqr() + m2).sqrt(), kv)
}

pub fn random_lattice(r: &mut ChaCha8Rng, n: usize) -> Vec<FourVector> {
    (0..n).map(|_| random_cone(r)).collect()
}

pub fn random_hermitian(r: &mut ChaCha8Rng, lattice: Vec<FourVector>) -> CoeffMatrix {
    let n = lattice.len();
    let mut m = vec![c(0.0, 0.0); n * n];
    for i in 0..n {
        m[i * n + i] = c(r.gen_range(-1.0..1.0), 0.0);
        for j in i + 1..n {
            let z = rand_c(r);
            m[i * n + j] = z;
            m[j * n + i] = z.conj();
        }
    }
    CoeffMatrix::new(lattice, m).unwrap()
}

pub fn to_dmatrix(rho: &CoeffMatrix) -> DMatrix<Complex64> {
    let n = rho.dim();
    DMatrix::from_fn(n, n, |i, j| rho.get(i, j))
}

pub fn diag(values: &[f64]) -> DMatrix<Complex64> {
    DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(values.len(), values.iter().map(|&v| c(v, 0.0))))
}

pub fn anti(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    a * b + b * a
}

/// `[zeta.k, [zeta.k, rho]_+]_+` built from explicit matrices.
pub fn nested_anticommutator(rho: &CoeffMatrix, zeta: &ZetaParams) -> DMatrix<Complex64> {
    let cs: Vec<f64> = rho.lattice().iter().map(|k| minkowski_dot(zeta.vector(), *k)).collect();
    let z = diag(&cs);
    anti(&z, &anti(&z, &to_dmatrix(rho)))
}

/// `[k^2, rho]_+ - [zeta.k, [zeta.k, rho]_+]_+` from explicit matrices.
pub fn liouville_oracle(rho: &CoeffMatrix, zeta: &ZetaParams) -> DMatrix<Complex64> {
    let k2: Vec<f64> = rho.lattice().iter().map(|k| k.square()).collect();
    anti(&diag(&k2), &to_dmatrix(rho)) - nested_anticommutator(rho, zeta)
}

pub fn max_entry_diff(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

/// Random modes with generic (off-lattice) momenta.
pub fn random_modes(r: &mut ChaCha8Rng, n: usize) -> ModeLattice {
    let modes = (0..n)
        .map(|_| Mode { k: random_cone(r), particle: rand_c(r), antiparticle: rand_c(r) })
        .collect();
    ModeLattice::new(modes).unwrap()
}

pub fn mike_errors(state: &ModeLattice, tau: f64, levels: usize) -> Vec<f64> {
    fields::mike_refinement(state, tau, levels).unwrap()
}
