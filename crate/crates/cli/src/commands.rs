use kgvar::fields::{self, ModeLattice};
use kgvar::kinematics::{lambda_noisy, minkowski_dot, omega, varpi};
use kgvar::positivity::{self, random_packets, smoothed_noise, Verdict};
use kgvar::propagators::{phi_tau_kernel, wightman_laplace};
use kgvar::semigroup::{self, CoeffMatrix, KrausMode};
use kgvar::{Complex64, FourVector, ThreeVector, ZetaParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::json;

use crate::config::*;
use crate::output::{Outputs, Row, Table};
use crate::Failure;

/// What a finished command hands back to `main`.
pub struct Done {
    pub outputs: Outputs,
    /// False when a check or verdict failed (exit 1).
    pub passed: bool,
    pub line: String,
}

pub fn run(params: &Params) -> Result<Done, Failure> {
    match params {
        Params::Dispersion(p) => dispersion(p),
        Params::Propagator(p) => propagator(p),
        Params::Positivity(p) => positivity(p),
        Params::LaplaceCheck(p) => laplace_check(p),
        Params::Semigroup(p) => semigroup(p),
        Params::MikeCheck(p) => mike_check(p),
    }
}

fn zeta(z: [f64; 4]) -> Result<ZetaParams, Failure> {
    ZetaParams::new(FourVector::from_array(z)).map_err(Failure::from_config)
}

fn random_momenta(rng: &mut ChaCha8Rng, n: usize, range: f64) -> Vec<ThreeVector> {
    (0..n)
        .map(|_| ThreeVector::new(rng.gen_range(-range..range), rng.gen_range(-range..range), rng.gen_range(-range..range)))
        .collect()
}

fn random_amp(rng: &mut ChaCha8Rng) -> Complex64 {
    Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
}

fn orders(errors: &[f64]) -> Vec<f64> {
    errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect()
}

fn dispersion(p: &DispersionParams) -> Result<Done, Failure> {
    let z = zeta(p.zeta)?;
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let momenta = random_momenta(&mut rng, p.n_momenta, p.k_range);
    let mut csv = Table::new(&["k_x", "k_y", "k_z", "xi", "omega", "varpi", "lambda", "shell_residual"]);
    let mut dat = Table::new(&["k_abs", "xi", "omega", "varpi"]);
    let mut worst: f64 = 0.0;
    let mut min_varpi = f64::INFINITY;
    for &xi in &p.xi {
        for &kv in &momenta {
            let w = omega(kv, xi)?;
            let v = varpi(kv, xi, &z)?;
            let k = FourVector::from_parts(v, kv);
            let zk = minkowski_dot(z.vector(), k);
            let res = (xi - (k.square() - 2.0 * zk * zk)).abs();
            worst = worst.max(res);
            min_varpi = min_varpi.min(v);
            csv.push(Row::new().fs(&kv.as_array()).fs(&[xi, w, v, lambda_noisy(k, &z), res]));
            dat.push(Row::new().fs(&[kv.norm(), xi, w, v]));
        }
    }
    let passed = worst <= p.tolerance && min_varpi > 0.0;
    Ok(Done {
        outputs: Outputs {
            results: json!({ "max_shell_residual": worst, "min_varpi": min_varpi, "passed": passed }),
            summary: csv,
            dat: vec![("dispersion.dat".into(), dat)],
        },
        passed,
        line: format!("max shell residual {worst:.3e}, min varpi {min_varpi:.4}"),
    })
}

fn propagator(p: &PropagatorParams) -> Result<Done, Failure> {
    let spec = p.kernel();
    let q = p.quadrature();
    let points: Vec<FourVector> = if p.dx.is_empty() {
        let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
        let r = p.point_range;
        (0..p.n_points)
            .map(|_| FourVector::new(rng.gen_range(-r..r), rng.gen_range(-r..r), rng.gen_range(-r..r), rng.gen_range(-r..r)))
            .collect()
    } else {
        p.dx.iter().map(|&a| FourVector::from_array(a)).collect()
    };
    let values = spec.stationary(&q)?.eval_many(&points);
    let refined = spec.stationary(&q.refined())?.eval_many(&points);
    if values.iter().chain(&refined).any(|z| !z.is_finite()) {
        return Err(Failure::numerical("non-finite kernel value"));
    }
    let scale = refined.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let mut csv = Table::new(&[
        "dx_t", "dx_x", "dx_y", "dx_z", "xi", "tau", "zeta_t", "zeta_x", "zeta_y", "zeta_z", "value_re", "value_im",
        "refined_re", "refined_im", "rel_change", "k_max", "n_radial", "n_angular",
    ]);
    let mut dat = Table::new(&["dx_t", "dx_r", "value_re", "value_im"]);
    let mut worst: f64 = 0.0;
    for ((dx, v), r) in points.iter().zip(&values).zip(&refined) {
        let rel = (v - r).norm() / r.norm().max(1e-3 * scale).max(f64::MIN_POSITIVE);
        worst = worst.max(rel);
        csv.push(
            Row::new()
                .fs(&dx.as_array())
                .fs(&[spec.xi, spec.tau])
                .fs(&spec.zeta.vector().as_array())
                .c(*v)
                .c(*r)
                .f(rel)
                .f(q.k_max)
                .i(q.n_radial)
                .i(q.n_angular),
        );
        dat.push(Row::new().f(dx.t).f(dx.spatial().norm()).c(*v));
    }
    let passed = worst <= p.tolerance;
    Ok(Done {
        outputs: Outputs {
            results: json!({
                "kernel": spec,
                "max_refinement_change": worst,
                "passed": passed,
            }),
            summary: csv,
            dat: vec![("propagator.dat".into(), dat)],
        },
        passed,
        line: format!("{} at {} points, max change under refinement {worst:.3e}", spec.kind.name(), points.len()),
    })
}

fn positivity(p: &PositivityParams) -> Result<Done, Failure> {
    let grid = p.grid()?;
    let spec = p.kernel()?;
    let family = match p.family {
        Family::Packets => random_packets(p.n_functions, p.seed, &grid, &p.ranges())?,
        Family::Noise => smoothed_noise(p.n_functions, p.seed, &grid)?,
    };
    let report = positivity::sweep(spec, &family, &grid, &p.quadrature(), p.tolerance, Some(p.seed))?;
    let mut csv = Table::new(&["id", "sigma_re", "sigma_im", "error"]);
    let mut dat = Table::new(&["id", "sigma_re", "sigma_im"]);
    for r in &report.per_function {
        csv.push(Row::new().i(r.id).f(r.re).f(r.im).s(r.error.as_deref().unwrap_or("")));
        dat.push(Row::new().i(r.id).f(r.re).f(r.im));
    }
    if report.verdict_re == Verdict::Inconclusive {
        return Err(Failure::numerical(format!("{} of {} evaluations failed", report.failures, family.len())));
    }
    let passed = report.verdict_re == Verdict::Positive;
    let line = format!(
        "{} over {} functions: {:?}, min Re {:.4e}, scale {:.4e}",
        spec.kind.name(),
        family.len(),
        report.verdict_re,
        report.min_re,
        report.scale
    );
    Ok(Done {
        outputs: Outputs {
            results: serde_json::to_value(&report).map_err(|e| Failure::numerical(e.to_string()))?,
            summary: csv,
            dat: vec![("sigma.dat".into(), dat)],
        },
        passed,
        line,
    })
}

fn laplace_check(p: &LaplaceParams) -> Result<Done, Failure> {
    let q = p.quadrature();
    let pairs: Vec<(usize, FourVector, f64)> = p
        .dx
        .iter()
        .enumerate()
        .flat_map(|(i, &d)| p.tau.iter().map(move |&t| (i, FourVector::from_array(d), t)))
        .collect();
    let values: Vec<(Complex64, Complex64)> = pairs
        .par_iter()
        .map(|&(_, dx, tau)| {
            Ok((wightman_laplace(dx, tau, p.xi_max, p.n_xi, &q)?, phi_tau_kernel(dx, tau, p.xi_max, &q)?))
        })
        .collect::<Result<_, kgvar::Error>>()?;
    let mut csv = Table::new(&[
        "dx_t", "dx_x", "dx_y", "dx_z", "tau", "lhs_re", "lhs_im", "rhs_re", "rhs_im", "rel_error",
    ]);
    let mut dat = Table::new(&["tau", "dx_index", "rel_error"]);
    let mut worst: f64 = 0.0;
    for (&(i, dx, tau), &(l, r)) in pairs.iter().zip(&values) {
        let rel = (l - r).norm() / r.norm();
        if !rel.is_finite() {
            return Err(Failure::numerical(format!("non-finite relative error at dx {i}, tau {tau}")));
        }
        worst = worst.max(rel);
        csv.push(Row::new().fs(&dx.as_array()).f(tau).c(l).c(r).f(rel));
        dat.push(Row::new().f(tau).i(i).f(rel));
    }
    let passed = worst < p.tolerance;
    Ok(Done {
        outputs: Outputs {
            results: json!({ "max_rel_error": worst, "pairs": pairs.len(), "passed": passed }),
            summary: csv,
            dat: vec![("laplace.dat".into(), dat)],
        },
        passed,
        line: format!("{} (dx, tau) pairs, max relative error {worst:.3e}", pairs.len()),
    })
}

fn frobenius(m: &CoeffMatrix) -> f64 {
    m.entries().iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn trace(m: &CoeffMatrix) -> Complex64 {
    (0..m.dim()).map(|i| m.get(i, i)).sum()
}

fn semigroup(p: &SemigroupParams) -> Result<Done, Failure> {
    let z = zeta(p.zeta)?;
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let entries: Vec<(ThreeVector, Complex64, Complex64)> = random_momenta(&mut rng, p.n_modes, p.k_range)
        .into_iter()
        .map(|kv| (kv, random_amp(&mut rng), Complex64::new(0.0, 0.0)))
        .collect();
    let state = ModeLattice::on_shell(p.xi, &entries)?;
    let mut rho = CoeffMatrix::outer_product(&state)?;
    if p.filter {
        rho = semigroup::stability_filter(&rho, &z);
    }
    let mode = if p.kraus_order == 0 { KrausMode::ClosedForm } else { KrausMode::Quadrature { order: p.kraus_order } };
    let lambdas: Vec<f64> = rho.lattice().iter().map(|&k| lambda_noisy(k, &z)).collect();
    let mut csv = Table::new(&[
        "tau", "full_trace_re", "full_trace_im", "full_norm", "full_hermiticity", "kraus_trace_re", "kraus_trace_im",
        "kraus_norm", "kraus_hermiticity",
    ]);
    let mut dat = Table::new(&["tau", "full_norm", "kraus_norm"]);
    let mut herm: f64 = 0.0;
    let mut last = rho.clone();
    for &tau in &p.tau {
        let full = semigroup::full_semigroup_step(&rho, &z, tau)?;
        let kraus = semigroup::gaussian_kraus_map(&rho, &z, tau, mode)?;
        let (fnorm, knorm) = (frobenius(&full), frobenius(&kraus));
        if !fnorm.is_finite() || !knorm.is_finite() {
            return Err(Failure::numerical(format!("matrix overflow at tau {tau}")));
        }
        herm = herm.max(full.hermiticity_defect() / fnorm.max(1.0)).max(kraus.hermiticity_defect() / knorm.max(1.0));
        csv.push(
            Row::new()
                .f(tau)
                .c(trace(&full))
                .fs(&[fnorm, full.hermiticity_defect()])
                .c(trace(&kraus))
                .fs(&[knorm, kraus.hermiticity_defect()]),
        );
        dat.push(Row::new().fs(&[tau, fnorm, knorm]));
        last = full;
    }
    // semigroup law on consecutive pairs of the ladder
    let mut law: f64 = 0.0;
    for w in p.tau.windows(2) {
        let two = semigroup::full_semigroup_step(&semigroup::full_semigroup_step(&rho, &z, w[0])?, &z, w[1])?;
        let one = semigroup::full_semigroup_step(&rho, &z, w[0] + w[1])?;
        law = law.max(two.max_diff(&one) / frobenius(&one).max(1.0));
    }
    let passed = law <= p.tolerance && herm <= p.tolerance;
    Ok(Done {
        outputs: Outputs {
            results: json!({
                "lambda": lambdas,
                "initial": rho,
                "final": last,
                "semigroup_law_defect": law,
                "hermiticity_defect": herm,
                "kraus": mode,
                "passed": passed,
            }),
            summary: csv,
            dat: vec![("semigroup.dat".into(), dat)],
        },
        passed,
        line: format!("{} modes, semigroup law defect {law:.3e}, hermiticity defect {herm:.3e}", p.n_modes),
    })
}

fn mike_check(p: &MikeParams) -> Result<Done, Failure> {
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let entries: Vec<(ThreeVector, Complex64, Complex64)> = random_momenta(&mut rng, p.n_modes, p.k_range)
        .into_iter()
        .map(|kv| (kv, random_amp(&mut rng), random_amp(&mut rng)))
        .collect();
    let state = ModeLattice::on_shell(p.xi, &entries)?;
    let mike = fields::mike_refinement(&state, p.tau, p.levels)?;
    let hs: Vec<f64> = (0..p.levels).map(|l| 1e-2 / (1u32 << l) as f64).collect();
    let vn: Vec<f64> = hs.iter().map(|&h| semigroup::von_neumann_residual(&state, p.tau, h)).collect::<Result<_, _>>()?;
    if mike.iter().chain(&vn).any(|e| !(e.is_finite() && *e > 0.0)) {
        return Err(Failure::numerical("residuals must be finite and nonzero to estimate orders"));
    }
    let (mo, vo) = (orders(&mike), orders(&vn));
    let mut csv = Table::new(&["level", "h", "dt", "dtau", "field_residual", "vn_step", "vn_residual"]);
    let mut dat = Table::new(&["level", "field_residual", "vn_residual"]);
    for l in 0..p.levels {
        let f = (1u32 << l) as f64;
        csv.push(Row::new().i(l).fs(&[0.5 / f, 0.5 / f, 0.1 / f, mike[l], hs[l], vn[l]]));
        dat.push(Row::new().i(l).fs(&[mike[l], vn[l]]));
    }
    let passed = mo.iter().chain(&vo).all(|o| (o - 2.0).abs() <= p.tolerance);
    Ok(Done {
        outputs: Outputs {
            results: json!({
                "field_orders": mo,
                "von_neumann_orders": vo,
                "state": state,
                "passed": passed,
            }),
            summary: csv,
            dat: vec![("residuals.dat".into(), dat)],
        },
        passed,
        line: format!("field-equation orders {mo:.3?}, von Neumann orders {vo:.3?}"),
    })
}
