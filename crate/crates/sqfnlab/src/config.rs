//! Experiment configuration: a single JSON document.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use sqfn::kernels::{Kernel, Omega};
use sqfn::sets::{self, Generator, Region};
use sqfn::AdrSetF64;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub set: SetSpec,
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default)]
    pub dyadic: DyadicSpec,
    #[serde(default)]
    pub tents: TentSpec,
    #[serde(default)]
    pub kernel: Option<KernelSpec>,
    pub experiment: ExperimentSpec,
    #[serde(default)]
    pub seed: Option<u64>,
    pub output: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "generator", rename_all = "snake_case", deny_unknown_fields)]
pub enum SetSpec {
    Circle {
        #[serde(default = "one")]
        radius: f64,
        n: usize,
    },
    FlatSegment {
        #[serde(default = "one")]
        half_width: f64,
        n: usize,
    },
    PeriodicLine {
        #[serde(default = "two")]
        period: f64,
        n: usize,
    },
    /// Graph of A(x) = amplitude·sin(frequency·x) over [−half_width, half_width].
    Graph {
        amplitude: f64,
        #[serde(default = "one")]
        frequency: f64,
        #[serde(default = "one")]
        half_width: f64,
        n: usize,
    },
    Koch {
        generation: usize,
    },
    Cantor4 {
        generation: usize,
    },
    /// Cloud JSON with `weights` and `d`, path relative to the config file.
    Custom {
        path: PathBuf,
    },
}

fn one() -> f64 {
    1.0
}

fn two() -> f64 {
    2.0
}

impl SetSpec {
    pub fn build(&self, base: &Path) -> sqfn::Result<AdrSetF64> {
        match self {
            SetSpec::Circle { radius, n } => sets::make_circle(*radius, *n),
            SetSpec::FlatSegment { half_width, n } => sets::make_flat_segment(*half_width, *n),
            SetSpec::PeriodicLine { period, n } => sets::make_periodic_line(*period, *n),
            SetSpec::Graph { amplitude, frequency, half_width, n } => {
                let (a, w) = (*amplitude, *frequency);
                sets::make_lipschitz_graph(move |x: f64| a * (w * x).sin(), (a * w).abs(), *half_width, *n)
            }
            SetSpec::Koch { generation } => sets::make_koch(*generation),
            SetSpec::Cantor4 { generation } => sets::make_four_corners(*generation),
            SetSpec::Custom { path } => {
                let p = if path.is_absolute() { path.clone() } else { base.join(path) };
                let text = std::fs::read_to_string(&p).map_err(|e| sqfn::Error::InvalidInput(format!("{}: {e}", p.display())))?;
                let doc: sqfn::qspace::CloudDoc = serde_json::from_str(&text).map_err(|e| sqfn::Error::Json(e.to_string()))?;
                AdrSetF64::from_doc(&doc)
            }
        }
    }

    /// Sample count or generation.
    pub fn level(&self) -> Option<usize> {
        match self {
            SetSpec::Circle { n, .. } | SetSpec::FlatSegment { n, .. } | SetSpec::PeriodicLine { n, .. } | SetSpec::Graph { n, .. } => Some(*n),
            SetSpec::Koch { generation } | SetSpec::Cantor4 { generation } => Some(*generation),
            SetSpec::Custom { .. } => None,
        }
    }

    /// Same family at another sample count or generation.
    pub fn at_level(&self, level: usize) -> Option<Self> {
        let mut s = self.clone();
        match &mut s {
            SetSpec::Circle { n, .. } | SetSpec::FlatSegment { n, .. } | SetSpec::PeriodicLine { n, .. } | SetSpec::Graph { n, .. } => *n = level,
            SetSpec::Koch { generation } | SetSpec::Cantor4 { generation } => *generation = level,
            SetSpec::Custom { .. } => return None,
        }
        Some(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSpec {
    /// Defaults to the bounding square of E widened by a quarter of its diameter.
    pub region: Option<Region<f64>>,
    pub max_cell: f64,
    pub refine: bool,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec { region: None, max_cell: 0.25, refine: true }
    }
}

impl GridSpec {
    pub fn region_for(&self, e: &AdrSetF64) -> Region<f64> {
        if let Some(r) = &self.region {
            return r.clone();
        }
        let pts = e.points();
        let dim = pts.dim;
        let mut lo = vec![f64::INFINITY; dim];
        let mut hi = vec![f64::NEG_INFINITY; dim];
        for i in 0..e.len() {
            for (k, v) in pts.point(i).iter().enumerate() {
                lo[k] = lo[k].min(*v);
                hi[k] = hi[k].max(*v);
            }
        }
        let half = (0..dim).map(|k| (hi[k] - lo[k]) / 2.0).fold(0.0, f64::max) + 0.25 * e.diameter().max(1e-3);
        let mid: Vec<f64> = (0..dim).map(|k| (hi[k] + lo[k]) / 2.0).collect();
        let mut region = Region { lo: mid.iter().map(|m| m - half).collect(), hi: mid.iter().map(|m| m + half).collect() };
        if let Some(sqfn::qspace::Ambient::Cylinder { period }) = e.reg.ambient_metric() {
            region.lo[0] = -period / 2.0;
            region.hi[0] = period / 2.0;
            for k in 1..dim {
                region.lo[k] = mid[k] - period / 2.0;
                region.hi[k] = mid[k] + period / 2.0;
            }
        }
        region
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DyadicSpec {
    /// Defaults to the generation one past the sample spacing.
    pub k_max: Option<i32>,
    pub delta: f64,
}

impl Default for DyadicSpec {
    fn default() -> Self {
        DyadicSpec { k_max: None, delta: 0.5 }
    }
}

impl DyadicSpec {
    pub fn k_max_for(&self, e: &AdrSetF64, delta: f64) -> i32 {
        self.k_max.unwrap_or_else(|| default_k_max(e, delta))
    }
}

pub fn default_k_max(e: &AdrSetF64, delta: f64) -> i32 {
    let s = e.min_spacing();
    if s <= 0.0 {
        return 0;
    }
    (s.ln() / delta.ln()).ceil() as i32 + 1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TentSpec {
    pub lambda: f64,
    pub c_star: Option<f64>,
}

impl Default for TentSpec {
    fn default() -> Self {
        TentSpec { lambda: 4.0, c_star: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum KernelSpec {
    RieszGrad {
        #[serde(default)]
        period: Option<f64>,
    },
    HomogeneousOdd {
        omega: Omega<f64>,
        #[serde(default)]
        d: Option<f64>,
    },
    Variable {
        amplitude: f64,
        #[serde(default)]
        d: Option<f64>,
    },
}

impl KernelSpec {
    pub fn build(&self, e: &AdrSetF64) -> Kernel<f64> {
        match self {
            KernelSpec::RieszGrad { period } => Kernel::riesz_grad(*period),
            KernelSpec::HomogeneousOdd { omega, d } => Kernel::homogeneous_odd(omega.clone(), d.unwrap_or(e.dim_d)),
            KernelSpec::Variable { amplitude, d } => Kernel::variable(*amplitude, d.unwrap_or(e.dim_d)),
        }
    }

    /// Riesz gradient on curves (periodic on the periodic line), θ = ω₁/|z|^{d+1} elsewhere.
    pub fn default_for(e: &AdrSetF64) -> Self {
        match e.generator {
            Generator::PeriodicLine => KernelSpec::RieszGrad { period: e.reg.ambient_metric().and_then(|m| match m {
                sqfn::qspace::Ambient::Cylinder { period } => Some(period),
                _ => None,
            }) },
            Generator::Koch | Generator::Cantor4 | Generator::Custom => KernelSpec::HomogeneousOdd { omega: Omega::Coordinate { j: 0 }, d: None },
            _ => KernelSpec::RieszGrad { period: None },
        }
    }
}

macro_rules! params {
    ($name:ident { $($field:ident : $ty:ty = $default:expr),* $(,)? }) => {
        #[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
        #[serde(default, deny_unknown_fields)]
        pub struct $name {
            $(pub $field: $ty,)*
        }

        impl Default for $name {
            fn default() -> Self {
                $name { $($field: $default,)* }
            }
        }
    };
}

params!(T1Params { samples: usize = 20, modes: usize = 8, probes: usize = 200, aperture: f64 = 1.0, p: f64 = 2.0 });
params!(GraphSfeParams { samples: usize = 20, modes: usize = 8, max_ratio: f64 = 5.0, max_change: f64 = 0.15 });
params!(HyperplaneParams { factor: f64 = 10.0, near: f64 = 4.0 });
params!(CantorParams { g_min: usize = 3, g_max: usize = 6, min_growth: f64 = 2.0 });
params!(KochParams { g_min: usize = 5, g_max: usize = 7, samples: usize = 0 });
params!(BetaParams { levels: Vec<usize> = Vec::new(), radius: Option<f64> = None });
params!(ApertureParams { kappa1: f64 = 0.5, kappa2: f64 = 2.0, p: f64 = 2.0, q: f64 = 2.0, samples: usize = 10, modes: usize = 8 });
params!(LusinParams { kappa: f64 = 1.0, p: f64 = 4.0, q: f64 = 2.0, samples: usize = 10, modes: usize = 8, probes: usize = 100 });
params!(InfinityParams {
    t_small: f64 = 10.0,
    t_large: f64 = 100.0,
    kappa_wide: Option<f64> = None,
    kappa_narrow: Option<f64> = None,
    min_growth: f64 = 1.8,
    max_narrow_change: f64 = 0.1,
});
params!(CalderonParams { samples: usize = 10, modes: usize = 8, max_lp: f64 = 10.0, residual_tol: f64 = 1e-8 });
params!(DyadicAuditParams { deltas: Vec<f64> = vec![0.3, 0.5, 0.7], tents: bool = true });

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum ExperimentSpec {
    T1Panel(T1Params),
    GraphSfe(GraphSfeParams),
    HyperplaneNull(HyperplaneParams),
    CantorDivergence(CantorParams),
    KochExploratory(KochParams),
    BetaCarleson(BetaParams),
    Aperture(ApertureParams),
    LusinCarleson(LusinParams),
    InfinityCounterexample(InfinityParams),
    CalderonSuite(CalderonParams),
    DyadicAudit(DyadicAuditParams),
}

impl ExperimentSpec {
    pub fn name(&self) -> &'static str {
        match self {
            ExperimentSpec::T1Panel(_) => "t1_panel",
            ExperimentSpec::GraphSfe(_) => "graph_sfe",
            ExperimentSpec::HyperplaneNull(_) => "hyperplane_null",
            ExperimentSpec::CantorDivergence(_) => "cantor_divergence",
            ExperimentSpec::KochExploratory(_) => "koch_exploratory",
            ExperimentSpec::BetaCarleson(_) => "beta_carleson",
            ExperimentSpec::Aperture(_) => "aperture",
            ExperimentSpec::LusinCarleson(_) => "lusin_carleson",
            ExperimentSpec::InfinityCounterexample(_) => "infinity_counterexample",
            ExperimentSpec::CalderonSuite(_) => "calderon_suite",
            ExperimentSpec::DyadicAudit(_) => "dyadic_audit",
        }
    }

    /// Experiments that draw seeded random inputs.
    pub fn randomized(&self) -> bool {
        match self {
            ExperimentSpec::T1Panel(_)
            | ExperimentSpec::GraphSfe(_)
            | ExperimentSpec::Aperture(_)
            | ExperimentSpec::LusinCarleson(_)
            | ExperimentSpec::CalderonSuite(_) => true,
            ExperimentSpec::KochExploratory(p) => p.samples > 0,
            _ => false,
        }
    }
}

#[derive(Debug)]
pub enum ConfigError {
    Io(String),
    Parse(String),
    Invalid(String),
}

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ConfigError::Io(m) => write!(f, "cannot read config: {m}"),
            ConfigError::Parse(m) => write!(f, "malformed config: {m}"),
            ConfigError::Invalid(m) => write!(f, "invalid config: {m}"),
        }
    }
}

impl std::error::Error for ConfigError {}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let cfg: ExperimentConfig = serde_json::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Checks that do not require building anything.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: &str| Err(ConfigError::Invalid(m.to_string()));
        if self.experiment.randomized() && self.seed.is_none() {
            return bad(&format!("experiment `{}` draws random inputs and needs a seed", self.experiment.name()));
        }
        if !(self.grid.max_cell > 0.0) {
            return bad("grid.max_cell must be positive");
        }
        if !(self.dyadic.delta > 0.0 && self.dyadic.delta < 1.0) {
            return bad("dyadic.delta must lie in (0, 1)");
        }
        if !(self.tents.lambda > 0.0) {
            return bad("tents.lambda must be positive");
        }
        if let Some(r) = &self.grid.region {
            if r.lo.len() != r.hi.len() || r.lo.iter().zip(&r.hi).any(|(a, b)| !(a < b)) {
                return bad("grid.region needs lo < hi on every axis");
            }
        }
        match (&self.experiment, &self.set) {
            (ExperimentSpec::HyperplaneNull(_), SetSpec::PeriodicLine { .. }) => {}
            (ExperimentSpec::HyperplaneNull(_), _) => return bad("hyperplane_null needs set.generator = periodic_line"),
            (ExperimentSpec::CantorDivergence(p), SetSpec::Cantor4 { .. }) if p.g_min < p.g_max => {}
            (ExperimentSpec::CantorDivergence(_), _) => return bad("cantor_divergence needs a cantor4 set and g_min < g_max"),
            (ExperimentSpec::KochExploratory(p), SetSpec::Koch { .. }) if p.g_min <= p.g_max => {}
            (ExperimentSpec::KochExploratory(_), _) => return bad("koch_exploratory needs a koch set and g_min <= g_max"),
            (ExperimentSpec::GraphSfe(_), SetSpec::Custom { .. }) => return bad("graph_sfe needs a generated set with a resolution"),
            (ExperimentSpec::BetaCarleson(p), SetSpec::Custom { .. }) if !p.levels.is_empty() => {
                return bad("beta_carleson levels need a generated set");
            }
            (ExperimentSpec::Aperture(p), _) if !(p.kappa1 > 0.0 && p.kappa2 > 0.0 && p.p > 0.0 && p.q > 0.0) => {
                return bad("aperture needs positive kappa1, kappa2, p, q");
            }
            (ExperimentSpec::LusinCarleson(p), _) if !(p.p > p.q && p.q > 0.0 && p.kappa > 0.0) => {
                return bad("lusin_carleson needs p > q > 0 and kappa > 0");
            }
            (ExperimentSpec::InfinityCounterexample(p), _) if !(p.t_small >= 10.0 && p.t_large > p.t_small) => {
                return bad("infinity_counterexample needs 10 <= t_small < t_large");
            }
            (ExperimentSpec::DyadicAudit(p), _) if p.deltas.iter().any(|d| !(*d > 0.0 && *d < 1.0)) => {
                return bad("dyadic_audit deltas must lie in (0, 1)");
            }
            _ => {}
        }
        if let Some(KernelSpec::HomogeneousOdd { omega: Omega::Coordinate { j }, .. }) = &self.kernel {
            if *j >= 2 {
                return bad("kernel omega coordinate must be 0 or 1 for planar sets");
            }
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON serialization, ignoring the output directory.
    pub fn digest(&self) -> String {
        let mut c = self.clone();
        c.output = PathBuf::new();
        let canon = serde_json::to_vec(&c).expect("config serializes");
        Sha256::digest(&canon).iter().map(|b| format!("{b:02x}")).collect()
    }
}
