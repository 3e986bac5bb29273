use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use kgvar::fields::BoxGrid;
use kgvar::positivity::{functional_direct_table, functional_momentum, random_packets, DifferenceTable, PacketRanges};
use kgvar::propagators::{phi_tau_kernel, wightman_laplace, Angular, KernelSpec, PlaneWaveSum, QuadratureConfig};
use kgvar::quadrature::{gauss_hermite, gauss_legendre, Scheme};
use kgvar::semigroup::{full_semigroup_step, gaussian_kraus_map, CoeffMatrix, KrausMode};
use kgvar::kinematics::varpi;
use kgvar::{Complex64, FourVector, ThreeVector, ZetaParams};

fn q() -> QuadratureConfig {
    QuadratureConfig { k_max: 6.0, n_radial: 32, n_angular: 16, scheme: Scheme::GaussLegendre }
}

fn zeta() -> ZetaParams {
    ZetaParams::new(FourVector::new(0.2, 0.2, 0.0, 0.0)).unwrap()
}

fn rules(c: &mut Criterion) {
    let mut g = c.benchmark_group("rules");
    for n in [16, 64, 256] {
        g.bench_with_input(BenchmarkId::new("gauss_legendre", n), &n, |b, &n| b.iter(|| gauss_legendre(n).unwrap()));
    }
    g.bench_function("gauss_hermite_60", |b| b.iter(|| gauss_hermite(60).unwrap()));
    g.finish();
}

fn shell(c: &mut Criterion) {
    let z = zeta();
    c.bench_function("varpi", |b| {
        b.iter(|| varpi(black_box(ThreeVector::new(0.3, -1.2, 0.7)), black_box(1.5), &z).unwrap())
    });
}

fn kernels(c: &mut Criterion) {
    let q = q();
    let dx = FourVector::new(0.5, 0.3, 0.0, 0.1);
    let mut g = c.benchmark_group("kernels");
    let free = PlaneWaveSum::free(1.0, &q, Angular::Radial).unwrap();
    g.bench_function("wightman_radial", |b| b.iter(|| free.wightman(black_box(dx))));
    let noisy = PlaneWaveSum::noisy(1.0, &zeta(), &q, Angular::Full).unwrap();
    g.bench_function("noisy_full", |b| b.iter(|| noisy.time_ordered(black_box(dx))));
    g.sample_size(20);
    g.bench_function("phi_tau", |b| b.iter(|| phi_tau_kernel(black_box(dx), 0.5, 40.0, &q).unwrap()));
    g.bench_function("wightman_laplace_200", |b| b.iter(|| wightman_laplace(black_box(dx), 0.5, 40.0, 200, &q).unwrap()));
    g.finish();
}

fn functionals(c: &mut Criterion) {
    let q = q();
    let grid = BoxGrid::new(1.5, 6, 3.0, 6).unwrap();
    let f = random_packets(1, 3, &grid, &PacketRanges::default()).unwrap().remove(0);
    let spectrum = PlaneWaveSum::noisy(1.0, &zeta(), &q, Angular::Full).unwrap();
    let k = KernelSpec::noisy(1.0, zeta()).stationary(&q).unwrap();
    let table = DifferenceTable::build(|dx| k.eval(dx), &grid).unwrap();
    let mut g = c.benchmark_group("functionals");
    g.sample_size(20);
    g.bench_function("momentum_6x4", |b| b.iter(|| functional_momentum(black_box(&f), &spectrum, &grid).unwrap()));
    g.bench_function("direct_table_6x4", |b| b.iter(|| functional_direct_table(&table, black_box(&f), &grid).unwrap()));
    g.finish();
}

fn semigroup(c: &mut Criterion) {
    let n = 32;
    let lattice: Vec<FourVector> = (0..n)
        .map(|i| {
            let kv = ThreeVector::new(0.1 * i as f64, 0.05 * i as f64, -0.02 * i as f64);
            FourVector::from_parts((kv.norm_sqr() + 1.0).sqrt(), kv)
        })
        .collect();
    let rho: Vec<Complex64> =
        (0..n * n).map(|p| if p / n == p % n { Complex64::new(1.0, 0.0) } else { Complex64::new(0.0, 0.0) }).collect();
    let rho = CoeffMatrix::new(lattice, rho).unwrap();
    let z = zeta();
    let mut g = c.benchmark_group("semigroup_32");
    g.bench_function("full_step", |b| b.iter(|| full_semigroup_step(black_box(&rho), &z, 0.3).unwrap()));
    g.bench_function("kraus_gh40", |b| {
        b.iter(|| gaussian_kraus_map(black_box(&rho), &z, 0.3, KrausMode::Quadrature { order: 40 }).unwrap())
    });
    g.finish();
}

criterion_group!(benches, rules, shell, kernels, functionals, semigroup);
criterion_main!(benches);
