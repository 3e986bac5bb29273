//! Layered run configuration.
//!
//! Resolution order, later wins: built-in defaults, the `[command]` section
//! of the config file, `--set key=value` pairs, then the dedicated flags
//! (`--seed`, `--tolerance`). The merged table is deserialized into the
//! command's parameter struct, which rejects unknown keys, and every
//! physical parameter is checked before anything runs.

use std::path::{Path, PathBuf};

use kgvar::fields::BoxGrid;
use kgvar::positivity::PacketRanges;
use kgvar::propagators::{KernelKind, KernelSpec, QuadratureConfig};
use kgvar::quadrature::Scheme;
use kgvar::{FourVector, ZetaParams};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::Failure;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Command {
    Dispersion,
    Propagator,
    NoisyPropagator,
    Positivity,
    LaplaceCheck,
    Semigroup,
    MikeCheck,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Dispersion => "dispersion",
            Command::Propagator => "propagator",
            Command::NoisyPropagator => "noisy-propagator",
            Command::Positivity => "positivity",
            Command::LaplaceCheck => "laplace-check",
            Command::Semigroup => "semigroup",
            Command::MikeCheck => "mike-check",
        }
    }
}

/// Keys accepted outside any command section.
const TOP_LEVEL: [&str; 2] = ["out", "threads"];

/// Everything taken from the command line.
#[derive(Debug, Default)]
pub struct Overrides {
    pub config: Option<PathBuf>,
    pub seed: Option<u64>,
    pub tolerance: Option<f64>,
    pub out: Option<PathBuf>,
    pub threads: Option<usize>,
    pub set: Vec<String>,
}

/// Settings that shape the run but not its results; kept out of reports so
/// two runs into different directories stay byte-identical.
#[derive(Debug)]
pub struct RunEnv {
    pub out: PathBuf,
    pub threads: Option<usize>,
}

pub struct Resolved {
    pub env: RunEnv,
    pub params: Params,
}

/// Parameters of one command, after validation.
#[derive(Debug, Clone, Serialize)]
#[serde(untagged)]
pub enum Params {
    Dispersion(DispersionParams),
    Propagator(PropagatorParams),
    Positivity(PositivityParams),
    LaplaceCheck(LaplaceParams),
    Semigroup(SemigroupParams),
    MikeCheck(MikeParams),
}

pub fn resolve(cmd: Command, o: &Overrides) -> Result<Resolved, Failure> {
    let file = match &o.config {
        Some(p) => read_file(p)?,
        None => toml::Table::new(),
    };
    let mut section = toml::Table::new();
    let mut out = None;
    let mut threads = None;
    for (k, v) in file {
        match (k.as_str(), v) {
            ("out", toml::Value::String(s)) => out = Some(PathBuf::from(s)),
            ("threads", toml::Value::Integer(n)) if n > 0 => threads = Some(n as usize),
            (name, toml::Value::Table(t)) if name == cmd.name() => section = t,
            (_, toml::Value::Table(_)) => {} // other commands
            (name, _) if TOP_LEVEL.contains(&name) => {
                return Err(Failure::config(format!("top-level key `{name}` has the wrong type")))
            }
            (name, _) => return Err(Failure::config(format!("unknown top-level key `{name}`"))),
        }
    }
    for pair in &o.set {
        let (k, v) = pair
            .split_once('=')
            .ok_or_else(|| Failure::config(format!("--set expects key=value, got `{pair}`")))?;
        section.insert(k.trim().to_string(), parse_value(v.trim()));
    }
    if let Some(s) = o.seed {
        section.insert("seed".into(), toml::Value::Integer(s as i64));
    }
    if let Some(t) = o.tolerance {
        section.insert("tolerance".into(), toml::Value::Float(t));
    }
    let env = RunEnv {
        out: o.out.clone().or(out).unwrap_or_else(|| PathBuf::from(format!("kgvar-{}", cmd.name()))),
        threads: o.threads.or(threads),
    };
    if env.threads == Some(0) {
        return Err(Failure::config("--threads must be positive"));
    }
    let params = match cmd {
        Command::Dispersion => Params::Dispersion(load::<DispersionParams>(section)?),
        Command::Propagator => Params::Propagator(load::<PropagatorParams>(section)?.checked(false)?),
        Command::NoisyPropagator => Params::Propagator(load::<PropagatorParams>(section)?.checked(true)?),
        Command::Positivity => Params::Positivity(load::<PositivityParams>(section)?),
        Command::LaplaceCheck => Params::LaplaceCheck(load::<LaplaceParams>(section)?),
        Command::Semigroup => Params::Semigroup(load::<SemigroupParams>(section)?),
        Command::MikeCheck => Params::MikeCheck(load::<MikeParams>(section)?),
    };
    params.validate()?;
    Ok(Resolved { env, params })
}

fn read_file(p: &Path) -> Result<toml::Table, Failure> {
    let text = std::fs::read_to_string(p).map_err(|e| Failure::config(format!("cannot read {}: {e}", p.display())))?;
    text.parse::<toml::Table>().map_err(|e| Failure::config(format!("{}: {e}", p.display())))
}

/// TOML literal if it parses as one, otherwise a bare string.
fn parse_value(v: &str) -> toml::Value {
    format!("v = {v}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(v.to_string()))
}

fn load<T: DeserializeOwned>(section: toml::Table) -> Result<T, Failure> {
    T::deserialize(toml::Value::Table(section)).map_err(|e| Failure::config(e.to_string().trim().to_string()))
}

fn zeta_of(z: [f64; 4]) -> Result<ZetaParams, Failure> {
    ZetaParams::new(FourVector::from_array(z)).map_err(Failure::from_config)
}

fn positive(name: &str, v: f64) -> Result<(), Failure> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Failure::config(format!("`{name}` must be positive and finite, got {v}")))
    }
}

fn nonneg(name: &str, v: f64) -> Result<(), Failure> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Failure::config(format!("`{name}` must be finite and >= 0, got {v}")))
    }
}

fn finite4(name: &str, pts: &[[f64; 4]]) -> Result<(), Failure> {
    if pts.iter().flatten().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Failure::config(format!("`{name}` has non-finite components")))
    }
}

impl Params {
    fn validate(&self) -> Result<(), Failure> {
        match self {
            Params::Dispersion(p) => {
                zeta_of(p.zeta)?;
                positive("k_range", p.k_range)?;
                p.xi.iter().try_for_each(|&x| nonneg("xi", x))?;
                nonneg("tolerance", p.tolerance)?;
                if p.n_momenta == 0 || p.xi.is_empty() {
                    return Err(Failure::config("need at least one momentum and one xi"));
                }
            }
            Params::Propagator(p) => {
                p.kernel().validate().map_err(Failure::from_config)?;
                p.quadrature().validate().map_err(Failure::from_config)?;
                finite4("dx", &p.dx)?;
                positive("point_range", p.point_range)?;
                nonneg("tolerance", p.tolerance)?;
            }
            Params::Positivity(p) => {
                p.kernel()?.validate().map_err(Failure::from_config)?;
                p.quadrature().validate().map_err(Failure::from_config)?;
                p.grid()?;
                nonneg("tolerance", p.tolerance)?;
                positive("width_min", p.width_min)?;
                positive("width_max", p.width_max)?;
                nonneg("center_fraction", p.center_fraction)?;
                nonneg("carrier_max", p.carrier_max)?;
                if p.width_min > p.width_max {
                    return Err(Failure::config("`width_min` exceeds `width_max`"));
                }
                if p.n_functions == 0 {
                    return Err(Failure::config("`n_functions` must be positive"));
                }
            }
            Params::LaplaceCheck(p) => {
                p.quadrature().validate().map_err(Failure::from_config)?;
                positive("xi_max", p.xi_max)?;
                p.tau.iter().try_for_each(|&t| positive("tau", t))?;
                finite4("dx", &p.dx)?;
                positive("tolerance", p.tolerance)?;
                if p.n_xi == 0 || p.tau.is_empty() || p.dx.is_empty() {
                    return Err(Failure::config("need n_xi > 0 and non-empty tau and dx lists"));
                }
            }
            Params::Semigroup(p) => {
                zeta_of(p.zeta)?;
                nonneg("xi", p.xi)?;
                positive("k_range", p.k_range)?;
                p.tau.iter().try_for_each(|&t| nonneg("tau", t))?;
                nonneg("tolerance", p.tolerance)?;
                if p.n_modes == 0 || p.tau.is_empty() {
                    return Err(Failure::config("need at least one mode and one tau"));
                }
                if p.kraus_order == 1 {
                    return Err(Failure::config("`kraus_order` must be 0 (closed form) or >= 2"));
                }
            }
            Params::MikeCheck(p) => {
                nonneg("xi", p.xi)?;
                positive("tau", p.tau)?;
                positive("k_range", p.k_range)?;
                nonneg("tolerance", p.tolerance)?;
                if p.n_modes == 0 || !(2..=5).contains(&p.levels) {
                    return Err(Failure::config("need n_modes >= 1 and levels in 2..=5"));
                }
            }
        }
        Ok(())
    }
}

/// Flat quadrature keys shared by the kernel commands.
macro_rules! quadrature_of {
    ($p:expr) => {
        QuadratureConfig { k_max: $p.k_max, n_radial: $p.n_radial, n_angular: $p.n_angular, scheme: $p.scheme }
    };
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DispersionParams {
    pub seed: u64,
    /// Max allowed shell residual.
    pub tolerance: f64,
    pub n_momenta: usize,
    /// Momentum components uniform in `[-k_range, k_range]`.
    pub k_range: f64,
    pub xi: Vec<f64>,
    pub zeta: [f64; 4],
}

impl Default for DispersionParams {
    fn default() -> Self {
        DispersionParams { seed: 7, tolerance: 1e-9, n_momenta: 64, k_range: 3.0, xi: vec![0.5, 1.0, 2.0], zeta: [0.1, 0.2, 0.0, 0.0] }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PropagatorParams {
    pub seed: u64,
    /// Max relative change allowed when every node count is doubled.
    pub tolerance: f64,
    pub kernel: KernelKind,
    pub xi: f64,
    pub tau: f64,
    pub xi_max: f64,
    pub zeta: [f64; 4],
    /// Separations; when empty, `n_points` random ones are drawn.
    pub dx: Vec<[f64; 4]>,
    pub n_points: usize,
    pub point_range: f64,
    pub k_max: f64,
    pub n_radial: usize,
    pub n_angular: usize,
    pub scheme: Scheme,
}

impl Default for PropagatorParams {
    fn default() -> Self {
        PropagatorParams {
            seed: 7,
            tolerance: 1e-4,
            kernel: KernelKind::Feynman,
            xi: 1.0,
            tau: 0.5,
            xi_max: 40.0,
            zeta: [0.0; 4],
            dx: Vec::new(),
            n_points: 8,
            point_range: 1.5,
            k_max: 6.0,
            n_radial: 64,
            n_angular: 16,
            scheme: Scheme::GaussLegendre,
        }
    }
}

impl PropagatorParams {
    /// Pins the kernel for `noisy-propagator` and forbids it elsewhere.
    fn checked(mut self, noisy: bool) -> Result<Self, Failure> {
        if noisy {
            self.kernel = KernelKind::NoisyFeynman;
        } else if self.kernel == KernelKind::NoisyFeynman {
            return Err(Failure::config("use the noisy-propagator command for the noisy kernel"));
        }
        if noisy || self.zeta != [0.0; 4] {
            zeta_of(self.zeta)?;
        }
        Ok(self)
    }

    pub fn kernel(&self) -> KernelSpec {
        let zeta = ZetaParams::new(FourVector::from_array(self.zeta)).unwrap_or_else(|_| ZetaParams::zero());
        KernelSpec { kind: self.kernel, xi: self.xi, tau: self.tau, zeta, xi_max: self.xi_max }
    }

    pub fn quadrature(&self) -> QuadratureConfig {
        quadrature_of!(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Packets,
    Noise,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PositivityParams {
    pub seed: u64,
    /// Scale-relative tolerance on the minimum real part.
    pub tolerance: f64,
    pub kernel: KernelKind,
    pub xi: f64,
    pub tau: f64,
    pub xi_max: f64,
    pub zeta: [f64; 4],
    pub family: Family,
    pub n_functions: usize,
    pub center_fraction: f64,
    pub width_min: f64,
    pub width_max: f64,
    pub carrier_max: f64,
    pub l: f64,
    pub n_space: usize,
    pub t_window: f64,
    pub n_time: usize,
    pub k_max: f64,
    pub n_radial: usize,
    pub n_angular: usize,
    pub scheme: Scheme,
}

impl Default for PositivityParams {
    fn default() -> Self {
        let r = PacketRanges::default();
        PositivityParams {
            seed: 7,
            tolerance: 1e-8,
            kernel: KernelKind::Feynman,
            xi: 1.0,
            tau: 0.5,
            xi_max: 40.0,
            zeta: [0.0; 4],
            family: Family::Packets,
            n_functions: 200,
            center_fraction: r.center_fraction,
            width_min: r.width_min,
            width_max: r.width_max,
            carrier_max: r.carrier_max,
            l: 2.0,
            n_space: 8,
            t_window: 4.0,
            n_time: 8,
            k_max: 6.0,
            n_radial: 32,
            n_angular: 16,
            scheme: Scheme::GaussLegendre,
        }
    }
}

impl PositivityParams {
    pub fn kernel(&self) -> Result<KernelSpec, Failure> {
        Ok(KernelSpec { kind: self.kernel, xi: self.xi, tau: self.tau, zeta: zeta_of(self.zeta)?, xi_max: self.xi_max })
    }

    pub fn quadrature(&self) -> QuadratureConfig {
        quadrature_of!(self)
    }

    pub fn grid(&self) -> Result<BoxGrid, Failure> {
        BoxGrid::new(self.l, self.n_space, self.t_window, self.n_time).map_err(Failure::from_config)
    }

    pub fn ranges(&self) -> PacketRanges {
        PacketRanges {
            center_fraction: self.center_fraction,
            width_min: self.width_min,
            width_max: self.width_max,
            carrier_max: self.carrier_max,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LaplaceParams {
    pub seed: u64,
    /// Max relative error between the two sides.
    pub tolerance: f64,
    pub dx: Vec<[f64; 4]>,
    pub tau: Vec<f64>,
    pub xi_max: f64,
    pub n_xi: usize,
    pub k_max: f64,
    pub n_radial: usize,
    pub n_angular: usize,
    pub scheme: Scheme,
}

impl Default for LaplaceParams {
    fn default() -> Self {
        LaplaceParams {
            seed: 7,
            tolerance: 1e-3,
            dx: vec![[0.0; 4], [0.5, 0.3, 0.0, 0.0], [-1.0, 0.2, 0.4, 0.1], [1.5, 1.0, -0.5, 0.3]],
            tau: vec![0.2, 0.5, 1.0, 2.0],
            xi_max: 40.0,
            n_xi: 400,
            k_max: 6.0,
            n_radial: 64,
            n_angular: 16,
            scheme: Scheme::GaussLegendre,
        }
    }
}

impl LaplaceParams {
    pub fn quadrature(&self) -> QuadratureConfig {
        quadrature_of!(self)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SemigroupParams {
    pub seed: u64,
    /// Allowed defect of the semigroup law and of Hermiticity, relative to
    /// the matrix norm.
    pub tolerance: f64,
    pub n_modes: usize,
    pub xi: f64,
    pub k_range: f64,
    pub zeta: [f64; 4],
    pub tau: Vec<f64>,
    /// Gauss-Hermite order for the Kraus map; 0 selects the closed form.
    pub kraus_order: usize,
    pub filter: bool,
}

impl Default for SemigroupParams {
    fn default() -> Self {
        SemigroupParams {
            seed: 7,
            tolerance: 1e-12,
            n_modes: 6,
            xi: 1.0,
            k_range: 1.5,
            zeta: [0.1, 0.2, 0.0, 0.0],
            tau: vec![0.0, 0.1, 0.2, 0.5, 1.0],
            kraus_order: 0,
            filter: true,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MikeParams {
    pub seed: u64,
    /// Allowed distance of each observed order from 2.
    pub tolerance: f64,
    pub n_modes: usize,
    pub xi: f64,
    pub k_range: f64,
    pub tau: f64,
    pub levels: usize,
}

impl Default for MikeParams {
    fn default() -> Self {
        MikeParams { seed: 7, tolerance: 0.2, n_modes: 2, xi: 1.0, k_range: 1.5, tau: 0.2, levels: 3 }
    }
}
