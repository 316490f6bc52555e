//! The named experiments. Each returns an [`Outcome`]; contract failures are
//! recorded as failed checks rather than errors so the report is still written.

use std::collections::BTreeMap;
use std::path::Path;

use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

use sqfn::dyadic::{build_grid, rescale_to_half, DyadicGrid, GridConstants};
use sqfn::functionals::{self, CubeRow, FunctionalReport};
use sqfn::kernels::{apply_theta, periodic_quadrature_bound, Field, Kernel};
use sqfn::sets::{make_ambient_grid, AmbientGrid, Generator};
use sqfn::tentspace::{self, band, build_aperture};
use sqfn::whitney::{build_tents, whitney_cover, TentConstants, TentStructure};
use sqfn::{calderon, sets, AdrSetF64};

use crate::config::*;

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    fn new(name: &str, header: &[&str]) -> Self {
        Table { name: name.to_string(), header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    fn push(&mut self, row: Vec<String>) {
        self.rows.push(row);
    }
}

#[derive(Debug, Default)]
pub struct Outcome {
    pub reports: Vec<FunctionalReport<f64>>,
    pub constants: BTreeMap<String, Value>,
    pub checks: Vec<Check>,
    pub tables: Vec<Table>,
}

impl Outcome {
    fn check(&mut self, name: &str, passed: bool, detail: impl Into<String>) {
        self.checks.push(Check { name: name.to_string(), passed, detail: detail.into() });
    }

    fn constant(&mut self, key: &str, v: impl Serialize) {
        self.constants.insert(key.to_string(), serde_json::to_value(v).unwrap_or(Value::Null));
    }

    fn report(&mut self, name: &str, value: f64) -> Result<(), RunError> {
        let r = FunctionalReport::new(name, value).ctx(name)?;
        self.reports.push(r);
        Ok(())
    }

    fn report_rows(&mut self, name: &str, value: f64, rows: Vec<CubeRow<f64>>) -> Result<(), RunError> {
        let r = FunctionalReport::new(name, value).ctx(name)?.with_details(rows);
        self.reports.push(r);
        Ok(())
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

/// A library error together with the stage that raised it.
#[derive(Debug)]
pub struct RunError {
    pub stage: String,
    pub source: sqfn::Error,
}

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.stage, self.source)
    }
}

impl std::error::Error for RunError {}

trait Ctx<T> {
    fn ctx(self, stage: &str) -> Result<T, RunError>;
}

impl<T> Ctx<T> for sqfn::Result<T> {
    fn ctx(self, stage: &str) -> Result<T, RunError> {
        self.map_err(|source| RunError { stage: stage.to_string(), source })
    }
}

fn num(x: f64) -> String {
    format!("{x}")
}

/// Geometric scaffolding shared by the experiments.
pub struct Scaffold {
    pub e: AdrSetF64,
    pub cells: AmbientGrid<f64>,
    pub dyadic: Option<(DyadicGrid<f64>, GridConstants<f64>)>,
    pub tents: Option<(TentStructure<f64>, TentConstants<f64>)>,
}

#[derive(Clone, Copy, PartialEq)]
enum Depth {
    Cells,
    Tents,
}

fn scaffold(cfg: &ExperimentConfig, spec: &SetSpec, base: &Path, depth: Depth) -> Result<Scaffold, RunError> {
    let e = spec.build(base).ctx("sets")?;
    let region = cfg.grid.region_for(&e);
    let cells = make_ambient_grid(&e, &region, cfg.grid.max_cell, cfg.grid.refine).ctx("ambient grid")?;
    if depth == Depth::Cells {
        return Ok(Scaffold { e, cells, dyadic: None, tents: None });
    }
    let delta = cfg.dyadic.delta;
    let grid = build_grid(&e, cfg.dyadic.k_max_for(&e, delta), delta).ctx("dyadic")?;
    let gc = grid.verify(&e).ctx("dyadic")?;
    let cover = whitney_cover(&cells, &e, cfg.tents.lambda).ctx("whitney")?;
    let ts = build_tents(&grid, &cover, &cells, &e, cfg.tents.c_star).ctx("whitney")?;
    let tc = ts.verify(&grid, &cells, &e).ctx("whitney")?;
    Ok(Scaffold { e, cells, dyadic: Some((grid, gc)), tents: Some((ts, tc)) })
}

fn record_geometry(out: &mut Outcome, sc: &Scaffold, prefix: &str) {
    out.constant(&format!("{prefix}samples"), sc.e.len());
    out.constant(&format!("{prefix}cells"), sc.cells.len());
    out.constant(&format!("{prefix}discarded_measure"), sc.cells.discarded_measure);
    if let Some((g, gc)) = &sc.dyadic {
        out.constant(&format!("{prefix}a0"), gc.a0);
        out.constant(&format!("{prefix}a1"), gc.a1);
        out.constant(&format!("{prefix}max_children"), gc.n_children);
        out.constant(&format!("{prefix}kappa_e"), g.kappa_e);
        out.constant(&format!("{prefix}k_max"), g.k_max);
    }
    if let Some((_, tc)) = &sc.tents {
        out.constant(&format!("{prefix}tent_constants"), tc);
    }
}

fn kernel_for(cfg: &ExperimentConfig, e: &AdrSetF64) -> Kernel<f64> {
    cfg.kernel.clone().unwrap_or_else(|| KernelSpec::default_for(e)).build(e)
}

/// Curve parameter of each sample rescaled to [−1, 1]; the x coordinate when there is none.
fn unit_param(e: &AdrSetF64) -> Vec<f64> {
    let t: Vec<f64> = match &e.param {
        Some(p) => p.clone(),
        None => (0..e.len()).map(|i| e.point(i)[0]).collect(),
    };
    let lo = t.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = t.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi > lo {
        t.iter().map(|v| 2.0 * (v - lo) / (hi - lo) - 1.0).collect()
    } else {
        vec![0.0; t.len()]
    }
}

/// Seeded smooth trigonometric test functions Σ_k a_k cos(kπs/2) + b_k sin(kπs/2).
/// The same seed gives the same functions at every resolution.
fn smooth_family(e: &AdrSetF64, count: usize, modes: usize, seed: u64) -> Vec<Vec<f64>> {
    let s = unit_param(e);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let co: Vec<(f64, f64)> = (0..modes).map(|_| (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
            s.iter()
                .map(|x| {
                    co.iter()
                        .enumerate()
                        .map(|(j, (a, b))| {
                            let w = (j as f64 + 1.0) * std::f64::consts::PI * x / 2.0;
                            a * w.cos() + b * w.sin()
                        })
                        .sum()
                })
                .collect()
        })
        .collect()
}

fn l2_sq(f: &[f64], e: &AdrSetF64) -> f64 {
    f.iter().zip(&e.weights).map(|(a, w)| a * a * w).sum()
}

fn m_of(sc: &Scaffold) -> f64 {
    sc.cells.ambient_dim_m
}

fn seed_of(cfg: &ExperimentConfig) -> u64 {
    cfg.seed.unwrap_or(0)
}

pub fn run(cfg: &ExperimentConfig, base: &Path) -> Result<Outcome, RunError> {
    match &cfg.experiment {
        ExperimentSpec::T1Panel(p) => t1_panel(cfg, base, p),
        ExperimentSpec::GraphSfe(p) => graph_sfe(cfg, base, p),
        ExperimentSpec::HyperplaneNull(p) => hyperplane_null(cfg, base, p),
        ExperimentSpec::CantorDivergence(p) => cantor_divergence(cfg, base, p),
        ExperimentSpec::KochExploratory(p) => koch_exploratory(cfg, base, p),
        ExperimentSpec::BetaCarleson(p) => beta_carleson(cfg, base, p),
        ExperimentSpec::Aperture(p) => aperture(cfg, base, p),
        ExperimentSpec::LusinCarleson(p) => lusin_carleson(cfg, base, p),
        ExperimentSpec::InfinityCounterexample(p) => infinity_counterexample(p),
        ExperimentSpec::CalderonSuite(p) => calderon_suite(cfg, base, p),
        ExperimentSpec::DyadicAudit(p) => dyadic_audit(cfg, base, p),
    }
}

fn carleson_table(name: &str, rows: &[CubeRow<f64>]) -> Table {
    let mut t = Table::new(name, &["cube", "generation", "value"]);
    for r in rows {
        t.push(vec![r.cube.to_string(), r.generation.to_string(), num(r.value)]);
    }
    t
}

fn t1_panel(cfg: &ExperimentConfig, base: &Path, p: &T1Params) -> Result<Outcome, RunError> {
    let mut out = Outcome::default();
    let sc = scaffold(cfg, &cfg.set, base, Depth::Tents)?;
    record_geometry(&mut out, &sc, "");
    let (e, cells) = (&sc.e, &sc.cells);
    let (grid, _) = sc.dyadic.as_ref().unwrap();
    let (ts, _) = sc.tents.as_ref().unwrap();
    let k = kernel_for(cfg, e);
    let (up, m) = (k.params.upsilon, m_of(&sc));
    let seed = seed_of(cfg);

    // (1) square function estimate on seeded smooth f
    let fam = smooth_family(e, p.samples, p.modes, seed);
    let mut fields = Vec::with_capacity(fam.len());
    let mut ratios = Vec::new();
    let mut sfe = Table::new("sfe", &["sample", "ratio"]);
    for (i, f) in fam.iter().enumerate() {
        let u = apply_theta(&k, e, f, cells).ctx("kernels")?;
        let r = functionals::square_function_norm(&u, cells, e, up, m) / l2_sq(f, e);
        sfe.push(vec![i.to_string(), num(r)]);
        ratios.push(r);
        fields.push(u);
    }
    let b = band(&ratios);
    out.report("sfe_ratio_max", b.max)?;
    out.constant("sfe_ratio_min", b.min);
    out.tables.push(sfe);

    // (2) tent Carleson norm of Θ1
    let one = vec![1.0; e.len()];
    let u1 = apply_theta(&k, e, &one, cells).ctx("kernels")?;
    let (cn, rows) = functionals::carleson_tent_norm(&u1, ts, grid, cells, e, up, m);
    out.tables.push(carleson_table("carleson_tent", &rows));
    out.report_rows("carleson_tent_theta1", cn, rows)?;

    // (4) ball Carleson norm of Θ1
    let probes = functionals::ball_probes(e, p.probes, seed);
    let cb = functionals::carleson_ball_norm(&u1, e, cells, up, m, &probes).ctx("functionals")?;
    out.report("carleson_ball_theta1", cb)?;

    // (5) para-accretive b = 1 + i·sin(πs)/2
    let s = unit_param(e);
    let b_re = vec![1.0; e.len()];
    let b_im: Vec<f64> = s.iter().map(|x| 0.5 * (std::f64::consts::PI * x).sin()).collect();
    let bc: Vec<Complex<f64>> = b_re.iter().zip(&b_im).map(|(a, b)| Complex::new(*a, *b)).collect();
    let para = functionals::para_accretive_check(&bc, grid, e, 0.5, 0.5).ctx("functionals")?;
    out.check("para_accretive_b", para.holds, format!("witness {:?}", para.witness));
    let u_im = apply_theta(&k, e, &b_im, cells).ctx("kernels")?;
    let ub = stack_fields(&u1, &u_im);
    let (cbn, _) = functionals::carleson_tent_norm(&ub, ts, grid, cells, e, up, m);
    out.report("carleson_tent_theta_b", cbn)?;

    // (11) weak-L^p bound for the area function
    let geom = build_aperture(e, cells, p.aperture).ctx("tentspace")?;
    let mut family = Vec::new();
    for (u, f) in fields.iter().zip(&fam) {
        family.push((tentspace::area_operator(u, &geom, cells, 2.0, m, up, true).ctx("tentspace")?, f.clone()));
    }
    let wl = functionals::weak_lp_constant(&family, e, p.p).ctx("functionals")?;
    out.report("weak_lp_area", wl)?;
    out.constant("aperture_epsilon", geom.epsilon);
    out.check("panel_finite", out.reports.iter().all(|r| r.value.is_finite()), "all functionals finite");
    Ok(out)
}

/// |Θ(a + ib)|² = |Θa|² + |Θb|² for a real kernel: stack the components.
fn stack_fields(a: &Field<f64>, b: &Field<f64>) -> Field<f64> {
    let (ca, cb) = (a.components, b.components);
    let mut values = Vec::with_capacity(a.values.len() + b.values.len());
    for i in 0..a.len() {
        values.extend_from_slice(&a.values[i * ca..(i + 1) * ca]);
        values.extend_from_slice(&b.values[i * cb..(i + 1) * cb]);
    }
    Field { components: ca + cb, values }
}

fn graph_sfe(cfg: &ExperimentConfig, base: &Path, p: &GraphSfeParams) -> Result<Outcome, RunError> {
    let mut out = Outcome::default();
    let n = cfg.set.level().unwrap_or(0);
    let seed = seed_of(cfg);
    let mut table = Table::new("graph_sfe", &["resolution", "sample", "ratio"]);
    let mut per_level: Vec<Vec<f64>> = Vec::new();
    for level in [n, 2 * n] {
        let spec = cfg.set.at_level(level).unwrap();
        let sc = scaffold(cfg, &spec, base, Depth::Cells)?;
        let k = kernel_for(cfg, &sc.e);
        let fam = smooth_family(&sc.e, p.samples, p.modes, seed);
        let mut ratios = Vec::new();
        for (i, f) in fam.iter().enumerate() {
            let u = apply_theta(&k, &sc.e, f, &sc.cells).ctx("kernels")?;
            let r = functionals::square_function_norm(&u, &sc.cells, &sc.e, k.params.upsilon, m_of(&sc)) / l2_sq(f, &sc.e);
            table.push(vec![level.to_string(), i.to_string(), num(r)]);
            ratios.push(r);
        }
        let b = band(&ratios);
        out.check(&format!("spread_{level}"), b.max / b.min <= p.max_ratio, format!("max/min = {}", b.max / b.min));
        out.report(&format!("sfe_ratio_max_{level}"), b.max)?;
        out.constant(&format!("cells_{level}"), sc.cells.len());
        per_level.push(ratios);
    }
    let change = per_level[0].iter().zip(&per_level[1]).map(|(a, b)| ((a - b) / a).abs()).fold(0.0, f64::max);
    out.check("resolution_change", change < p.max_change, format!("max relative change {change}"));
    out.constant("max_relative_change", change);
    out.tables.push(table);
    Ok(out)
}

fn hyperplane_null(cfg: &ExperimentConfig, base: &Path, p: &HyperplaneParams) -> Result<Outcome, RunError> {
    let mut out = Outcome::default();
    let sc = scaffold(cfg, &cfg.set, base, Depth::Tents)?;
    record_geometry(&mut out, &sc, "");
    let (e, cells) = (&sc.e, &sc.cells);
    let (grid, _) = sc.dyadic.as_ref().unwrap();
    let (ts, _) = sc.tents.as_ref().unwrap();
    let period = match cfg.set {
        SetSpec::PeriodicLine { period, .. } => period,
        _ => unreachable!("validated"),
    };
    let k = cfg.kernel.clone().unwrap_or(KernelSpec::RieszGrad { period: Some(period) }).build(e);
    let (up, m) = (k.params.upsilon, m_of(&sc));
    let u1 = apply_theta(&k, e, &vec![1.0; e.len()], cells).ctx("kernels")?;
    let h = e.min_spacing();
    let mut worst = 0.0f64;
    let mut bound = Vec::with_capacity(cells.len() * u1.components);
    for c in 0..cells.len() {
        let bd = periodic_quadrature_bound(cells.delta[c], h, period, 1.0);
        if cells.delta[c] >= p.near * h {
            worst = worst.max(u1.norm_sq(c).sqrt() / bd);
        }
        bound.push(bd);
        bound.extend(std::iter::repeat_n(0.0, u1.components - 1));
    }
    let bf = Field { components: u1.components, values: bound };
    let (cn, rows) = functionals::carleson_tent_norm(&u1, ts, grid, cells, e, up, m);
    let (cq, _) = functionals::carleson_tent_norm(&bf, ts, grid, cells, e, up, m);
    out.tables.push(carleson_table("carleson_tent", &rows));
    out.report_rows("carleson_tent_theta1", cn, rows)?;
    out.report("carleson_tent_quadrature_bound", cq)?;
    out.report("pointwise_ratio_max", worst)?;
    out.check("pointwise_bound", worst <= 1.0, format!("max |Θ1|/bound = {worst} on cells with δ >= {}·spacing", p.near));
    out.check("carleson_bound", cn <= p.factor * cq, format!("{cn} vs {}·{cq}", p.factor));
    Ok(out)
}

fn cantor_divergence(cfg: &ExperimentConfig, base: &Path, p: &CantorParams) -> Result<Outcome, RunError> {
    let mut out = Outcome::default();
    let mut table = Table::new("cantor_profile", &["generation", "samples", "cells", "carleson_tent", "square_function"]);
    let mut profile = Vec::new();
    for g in p.g_min..=p.g_max {
        let sc = scaffold(cfg, &SetSpec::Cantor4 { generation: g }, base, Depth::Tents)?;
        let (e, cells) = (&sc.e, &sc.cells);
        let k = kernel_for(cfg, e);
        let u1 = apply_theta(&k, e, &vec![1.0; e.len()], cells).ctx("kernels")?;
        let (cn, _) = functionals::carleson_tent_norm(&u1, &sc.tents.as_ref().unwrap().0, &sc.dyadic.as_ref().unwrap().0, cells, e, k.params.upsilon, m_of(&sc));
        let sf = functionals::square_function_norm(&u1, cells, e, k.params.upsilon, m_of(&sc));
        table.push(vec![g.to_string(), e.len().to_string(), cells.len().to_string(), num(cn), num(sf)]);
        out.report(&format!("carleson_tent_g{g}"), cn)?;
        record_geometry(&mut out, &sc, &format!("g{g}_"));
        profile.push(cn);
    }
    let increasing = profile.windows(2).all(|w| w[1] > w[0]);
    let growth = profile.last().unwrap() / profile[0];
    out.check("strictly_increasing", increasing, format!("{profile:?}"));
    out.check("growth", growth >= p.min_growth, format!("last/first = {growth}"));
    out.constant("growth", growth);
    out.tables.push(table);
    Ok(out)
}

fn koch_exploratory(cfg: &ExperimentConfig, base: &Path, p: &KochParams) -> Result<Outcome, RunError> {
    let mut out = Outcome::default();
    let mut table = Table::new("koch_profile", &["generation", "samples", "cells", "carleson_tent", "square_function_1", "sfe_ratio_max"]);
    let mut last = None;
    for g in p.g_min..=p.g_max {
        let sc = scaffold(cfg, &SetSpec::Koch { generation: g }, base, Depth::Tents)?;
        let (e, cells) = (&sc.e, &sc.cells);
        let k = kernel_for(cfg, e);
        let (up, m) = (k.params.upsilon, m_of(&sc));
        let u1 = apply_theta(&k, e, &vec![1.0; e.len()], cells).ctx("kernels")?;
        let (cn, _) = functionals::carleson_tent_norm(&u1, &sc.tents.as_ref().unwrap().0, &sc.dyadic.as_ref().unwrap().0, cells, e, up, m);
        let sf1 = functionals::square_function_norm(&u1, cells, e, up, m) / e.total_weight();
        let mut sfe_max = 0.0f64;
        for f in smooth_family(e, p.samples, 8, seed_of(cfg)) {
            let u = apply_theta(&k, e, &f, cells).ctx("kernels")?;
            sfe_max = sfe_max.max(functionals::square_function_norm(&u, cells, e, up, m) / l2_sq(&f, e));
        }
        table.push(vec![g.to_string(), e.len().to_string(), cells.len().to_string(), num(cn), num(sf1), num(sfe_max)]);
        out.report(&format!("carleson_tent_g{g}"), cn)?;
        record_geometry(&mut out, &sc, &format!("g{g}_"));
        if let Some(prev) = last {
            out.constant(&format!("relative_change_g{g}"), (cn - prev) / prev);
        }
        last = Some(cn);
    }
    out.constant("exploratory", "boundedness on the Koch curve is observed, not asserted");
    out.check("finite", out.reports.iter().all(|r| r.value.is_finite()), "profile finite");
    out.tables.push(table);
    Ok(out)
}

fn beta_carleson(cfg: &ExperimentConfig, base: &Path, p: &BetaParams) -> Result<Outcome, RunError> {
    let mut out = Outcome::default();
    let levels: Vec<Option<usize>> = if p.levels.is_empty() { vec![None] } else { p.levels.iter().map(|l| Some(*l)).collect() };
    let mut table = Table::new("beta_carleson", &["level", "samples", "center", "radius", "value"]);
    let mut values = Vec::new();
    for level in levels {
        let spec = match level {
            Some(l) => cfg.set.at_level(l).unwrap(),
            None => cfg.set.clone(),
        };
        let e = spec.build(base).ctx("sets")?;
        let x0 = nearest_to_centroid(&e);
        let r = p.radius.unwrap_or(e.diameter() / 2.0);
        let v = sets::beta_carleson_sum(&e, x0, r).ctx("sets")?;
        let tag = level.or(spec.level()).unwrap_or(0);
        table.push(vec![tag.to_string(), e.len().to_string(), x0.to_string(), num(r), num(v)]);
        out.report(&format!("beta_carleson_{tag}"), v)?;
        values.push(v);
    }
    out.check("finite", values.iter().all(|v| v.is_finite()), format!("{values:?}"));
    if matches!(cfg.set, SetSpec::Cantor4 { .. }) && values.len() > 1 {
        out.check("increasing", values.windows(2).all(|w| w[1] > w[0]), "Cantor sums grow with generation");
    }
    out.tables.push(table);
    Ok(out)
}

fn nearest_to_centroid(e: &AdrSetF64) -> usize {
    let dim = e.points().dim;
    let w = e.total_weight();
    let c: Vec<f64> = (0..dim).map(|k| (0..e.len()).map(|i| e.point(i)[k] * e.weights[i]).sum::<f64>() / w).collect();
    e.reg.nearest_point(&c).1
}

fn theta_family(cfg: &ExperimentConfig, sc: &Scaffold, samples: usize, modes: usize) -> Result<Vec<Field<f64>>, RunError> {
    let k = kernel_for(cfg, &sc.e);
    smooth_family(&sc.e, samples, modes, seed_of(cfg)).iter().map(|f| apply_theta(&k, &sc.e, f, &sc.cells).ctx("kernels")).collect()
}

fn aperture(cfg: &ExperimentConfig, base: &Path, p: &ApertureParams) -> Result<Outcome, RunError> {
    let mut out = Outcome::default();
    let sc = scaffold(cfg, &cfg.set, base, Depth::Cells)?;
    record_geometry(&mut out, &sc, "");
    let (e, cells) = (&sc.e, &sc.cells);
    let up = kernel_for(cfg, e).params.upsilon;
    let fields = theta_family(cfg, &sc, p.samples, p.modes)?;
    let g1 = build_aperture(e, cells, p.kappa1).ctx("tentspace")?;
    let g2 = build_aperture(e, cells, p.kappa2).ctx("tentspace")?;
    for (name, g) in [("kappa1", &g1), ("kappa2", &g2)] {
        let dual = (0..cells.len()).all(|c| g.projections[c].iter().all(|&x| g.cones[x].binary_search(&c).is_ok()))
            && g.cones.iter().map(|c| c.len()).sum::<usize>() == g.projections.iter().map(|p| p.len()).sum::<usize>();
        out.check(&format!("duality_{name}"), dual, "y ∈ Γ(x) ⇔ x ∈ π_y");
        out.constant(&format!("epsilon_{name}"), g.epsilon);
    }
    let m = m_of(&sc);
    let r12 = tentspace::aperture_ratios(&fields, &g1, &g2, cells, e, p.p, p.q, m, up).ctx("tentspace")?;
    let r21 = tentspace::aperture_ratios(&fields, &g2, &g1, cells, e, p.p, p.q, m, up).ctx("tentspace")?;
    let (b12, b21) = (band(&r12), band(&r21));
    let mut table = Table::new("aperture_ratios", &["sample", "ratio_12", "ratio_21"]);
    for (i, (a, b)) in r12.iter().zip(&r21).enumerate() {
        table.push(vec![i.to_string(), num(*a), num(*b)]);
    }
    out.tables.push(table);
    out.report("aperture_band_max", b12.max)?;
    out.report("aperture_band_min", b12.min)?;
    let finite = b12.min > 0.0 && b12.max.is_finite() && b21.min > 0.0 && b21.max.is_finite();
    out.check("band_finite", finite, format!("[{}, {}]", b12.min, b12.max));
    let recip = (b12.min * b21.max - 1.0).abs() <= 1e-12 && (b12.max * b21.min - 1.0).abs() <= 1e-12;
    out.check("band_reciprocal", recip, format!("[{}, {}] vs [{}, {}]", b12.min, b12.max, b21.min, b21.max));
    Ok(out)
}

fn lusin_carleson(cfg: &ExperimentConfig, base: &Path, p: &LusinParams) -> Result<Outcome, RunError> {
    let mut out = Outcome::default();
    let sc = scaffold(cfg, &cfg.set, base, Depth::Cells)?;
    record_geometry(&mut out, &sc, "");
    let (e, cells) = (&sc.e, &sc.cells);
    let up = kernel_for(cfg, e).params.upsilon;
    let fields = theta_family(cfg, &sc, p.samples, p.modes)?;
    let geom = build_aperture(e, cells, p.kappa).ctx("tentspace")?;
    let probes = if e.len() <= 256 {
        tentspace::all_ball_probes(e)
    } else {
        // seeded probes plus one ball around every sample holding all of E
        let mut pr = functionals::ball_probes(e, p.probes, seed_of(cfg));
        pr.extend((0..e.len()).map(|x| (x, e.diameter())));
        pr
    };
    out.constant("probes", probes.len());
    let r = tentspace::lusin_carleson_ratios(&fields, &geom, cells, e, &probes, p.p, p.q, m_of(&sc), up).ctx("tentspace")?;
    let b = band(&r);
    let mut table = Table::new("lusin_carleson", &["sample", "ratio"]);
    for (i, v) in r.iter().enumerate() {
        table.push(vec![i.to_string(), num(*v)]);
    }
    out.tables.push(table);
    out.report("lusin_carleson_max", b.max)?;
    out.report("lusin_carleson_min", b.min)?;
    out.check("band_finite", b.count > 0 && b.min > 0.0 && b.max.is_finite(), format!("[{}, {}]", b.min, b.max));
    Ok(out)
}

fn infinity_counterexample(p: &InfinityParams) -> Result<Outcome, RunError> {
    let mut out = Outcome::default();
    let (dw, dn) = tentspace::default_counterexample_apertures();
    let (kw, kn) = (p.kappa_wide.unwrap_or(dw), p.kappa_narrow.unwrap_or(dn));
    let (w1, n1) = tentspace::infinity_counterexample(p.t_small, kw, kn).ctx("tentspace")?;
    let (w2, n2) = tentspace::infinity_counterexample(p.t_large, kw, kn).ctx("tentspace")?;
    let mut table = Table::new("infinity_counterexample", &["truncation", "sup_wide", "sup_narrow"]);
    table.push(vec![num(p.t_small), num(w1), num(n1)]);
    table.push(vec![num(p.t_large), num(w2), num(n2)]);
    out.tables.push(table);
    out.constant("kappa_wide", kw);
    out.constant("kappa_narrow", kn);
    out.constant("slope_wide", tentspace::cone_slope(kw));
    out.constant("slope_narrow", tentspace::cone_slope(kn));
    out.report("sup_wide_large", w2)?;
    out.report("sup_narrow_large", n2)?;
    let growth = w2 / w1;
    let change = ((n2 - n1) / n1).abs();
    out.check("wide_grows", growth >= p.min_growth, format!("ratio {growth}"));
    out.check("narrow_stable", change < p.max_narrow_change, format!("relative change {change}"));
    Ok(out)
}

fn calderon_suite(cfg: &ExperimentConfig, base: &Path, p: &CalderonParams) -> Result<Outcome, RunError> {
    let mut out = Outcome::default();
    let e = cfg.set.build(base).ctx("sets")?;
    let ati = calderon::build_ati(&e, None, calderon::default_phi).ctx("calderon")?;
    out.constant("kappa_e", ati.kappa_e);
    out.constant("l_fine", ati.l_fine);
    out.constant("dropped_scales", &ati.dropped);
    out.constant("scales", &ati.reports);
    let d = ati.differences();
    let n = e.len();
    let ann = d.iter().map(|m| m.apply(&vec![1.0; n]).iter().fold(0.0f64, |a, v| a.max(v.abs()))).fold(0.0, f64::max);
    out.check("constants_annihilated", ann <= 1e-12, format!("max |D_l 1| = {ann}"));
    let mut table = Table::new("reproducing", &["band", "residual", "norm_r", "algebra_gap", "condition"]);
    let mut norms = Vec::new();
    let mut residual_ok = true;
    for nn in 0..=d.len() {
        let r = calderon::reproducing_formula(&ati, nn).ctx("calderon")?;
        table.push(vec![nn.to_string(), num(r.residual), num(r.norm_r), num(r.algebra_gap), num(r.condition)]);
        if r.norm_r < 0.9 && r.residual > p.residual_tol {
            residual_ok = false;
        }
        norms.push(r.norm_r);
        if norms.len() > 1 && r.norm_r == 0.0 && norms[norms.len() - 2] == 0.0 {
            break;
        }
    }
    out.tables.push(table);
    out.check("residual", residual_ok, format!("residual <= {} wherever ||R_N|| < 0.9", p.residual_tol));
    let nonzero: Vec<f64> = norms.iter().copied().take_while(|v| *v > 0.0).collect();
    let decreasing = nonzero.windows(2).all(|w| w[1] < w[0]) && norms.iter().skip(nonzero.len()).all(|v| *v == 0.0);
    out.check("norm_r_decreasing", decreasing, format!("{norms:?}"));
    out.report("norm_r_0", norms[0])?;
    let cot = calderon::cotlar_decay(&ati).ctx("calderon")?;
    let mut ct = Table::new("cotlar", &["j", "k", "norm"]);
    for (j, k, v) in &cot.table {
        ct.push(vec![j.to_string(), k.to_string(), num(*v)]);
    }
    out.tables.push(ct);
    out.constant("cotlar_slope", cot.slope);
    out.check("cotlar_slope", cot.slope < 0.0, format!("slope {}", cot.slope));
    let fam = smooth_family(&e, p.samples, p.modes, seed_of(cfg));
    let mut rng = ChaCha8Rng::seed_from_u64(seed_of(cfg) ^ 0x5eed);
    let mut all = fam;
    all.extend((0..p.samples).map(|_| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect::<Vec<f64>>()));
    let lp = calderon::littlewood_paley(&ati, &all);
    let lb = band(&lp);
    out.report("littlewood_paley_max", lb.max)?;
    out.check("littlewood_paley", lb.max <= p.max_lp, format!("max ratio {}", lb.max));
    Ok(out)
}

fn dyadic_audit(cfg: &ExperimentConfig, base: &Path, p: &DyadicAuditParams) -> Result<Outcome, RunError> {
    let mut out = Outcome::default();
    let e = cfg.set.build(base).ctx("sets")?;
    let mut table = Table::new("dyadic_audit", &["delta", "kappa_e", "k_max", "cubes", "a0", "a1", "max_children"]);
    let mut maps = Table::new("rescale_maps", &["delta", "new_generation", "source_generation"]);
    for &delta in &p.deltas {
        let k_max = if delta == cfg.dyadic.delta { cfg.dyadic.k_max_for(&e, delta) } else { default_k_max(&e, delta) };
        let grid = build_grid(&e, k_max, delta).ctx("dyadic")?;
        let verdict = grid.verify(&e);
        match &verdict {
            Ok(gc) => {
                table.push(vec![num(delta), grid.kappa_e.to_string(), k_max.to_string(), grid.cubes.len().to_string(), num(gc.a0), num(gc.a1), gc.n_children.to_string()]);
                out.check(&format!("grid_{delta}"), gc.a0 > 0.0, format!("a0 = {}, a1 = {}, N = {}", gc.a0, gc.a1, gc.n_children));
                out.report(&format!("a0_{delta}"), gc.a0)?;
            }
            Err(err) => out.check(&format!("grid_{delta}"), false, err.to_string()),
        }
        if delta != 0.5 && verdict.is_ok() {
            match rescale_to_half(&grid, &e) {
                Ok((half, map)) => {
                    for (j, k) in &map {
                        maps.push(vec![num(delta), j.to_string(), k.to_string()]);
                    }
                    let ok = half.verify(&e);
                    out.check(&format!("rescaled_{delta}"), ok.is_ok(), ok.err().map(|x| x.to_string()).unwrap_or_default());
                }
                Err(err) => out.check(&format!("rescaled_{delta}"), false, err.to_string()),
            }
        }
    }
    out.tables.push(table);
    out.tables.push(maps);
    if p.tents {
        let sc = scaffold(cfg, &cfg.set, base, Depth::Tents)?;
        record_geometry(&mut out, &sc, "tents_");
        let tc = sc.tents.as_ref().unwrap().1;
        out.check("tent_geometry", tc.unresolved_cells == 0, format!("{tc:?}"));
    }
    out.constant("generator", json!(e.generator));
    out.constant("periodic", e.generator == Generator::PeriodicLine);
    Ok(out)
}
