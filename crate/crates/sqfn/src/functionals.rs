//! Square-function and Carleson functionals, para-accretivity, the stopping
//! time, local T(b) and the discrete Carleson embedding.

use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::dyadic::DyadicGrid;
use crate::error::{Error, Result};
use crate::kernels::{apply_theta_at, Field, Kernel};
use crate::qspace::PointSet;
use crate::scalar::Scalar;
use crate::sets::{AdrSet, AmbientGrid};
use crate::whitney::TentStructure;

#[derive(Debug, Clone, Copy, Serialize)]
pub struct CubeRow<S> {
    pub cube: usize,
    pub generation: i32,
    pub value: S,
}

#[derive(Debug, Clone, Serialize)]
pub struct FunctionalReport<S> {
    pub name: String,
    pub value: S,
    pub config_digest: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub details: Option<Vec<CubeRow<S>>>,
}

impl<S: Scalar> FunctionalReport<S> {
    pub fn new(name: &str, value: S) -> Result<Self> {
        if !(value >= S::zero() && value.is_finite()) {
            return Err(Error::invariant("report", format!("{name} = {value} is not finite and nonnegative")));
        }
        Ok(FunctionalReport { name: name.to_string(), value, config_digest: String::new(), details: None })
    }

    pub fn with_details(mut self, rows: Vec<CubeRow<S>>) -> Self {
        self.details = Some(rows);
        self
    }

    pub fn with_digest(mut self, digest: &str) -> Self {
        self.config_digest = digest.to_string();
        self
    }
}

/// δ^{2υ−(m−d)}.
#[inline]
pub fn sf_weight<S: Scalar>(delta: S, upsilon: S, m: S, d: S) -> S {
    delta.powf(S::of(2.0) * upsilon - (m - d))
}

/// Σ_cells |Θf|² δ_E^{2υ−(m−d)} μ.
pub fn square_function_norm<S: Scalar>(field: &Field<S>, grid: &AmbientGrid<S>, e: &AdrSet<S>, upsilon: S, m: S) -> S {
    (0..grid.len())
        .map(|c| field.norm_sq(c) * sf_weight(grid.delta[c], upsilon, m, e.dim_d) * grid.measure[c])
        .sum()
}

/// max over cubes of (1/σ(Q)) Σ_{T_E(Q)} |Θ1|² δ^{2υ−(m−d)} μ, with the per-cube table.
pub fn carleson_tent_norm<S: Scalar>(
    field: &Field<S>,
    tents: &TentStructure<S>,
    dyadic: &DyadicGrid<S>,
    grid: &AmbientGrid<S>,
    e: &AdrSet<S>,
    upsilon: S,
    m: S,
) -> (S, Vec<CubeRow<S>>) {
    let dens: Vec<S> = (0..grid.len()).map(|c| field.norm_sq(c) * sf_weight(grid.delta[c], upsilon, m, e.dim_d) * grid.measure[c]).collect();
    let rows: Vec<CubeRow<S>> = dyadic
        .cubes
        .par_iter()
        .map(|q| {
            let s: S = tents.tents[q.id].iter().map(|&c| dens[c]).sum();
            CubeRow { cube: q.id, generation: q.generation, value: s / e.measure_of(&q.members) }
        })
        .collect();
    let v = rows.iter().fold(S::zero(), |a, r| a.max(r.value));
    (v, rows)
}

/// Seeded surface-ball probes (sample, radius) with radii log-uniform over the resolvable range.
/// Prefixes agree across counts, so a larger count is a larger family.
pub fn ball_probes<S: Scalar>(e: &AdrSet<S>, count: usize, seed: u64) -> Vec<(usize, S)> {
    let (lo, hi) = crate::sets::resolvable_range(e);
    let (llo, lhi) = (lo.to_f64c().ln(), hi.max(lo).to_f64c().ln());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| (rng.gen_range(0..e.len()), S::of(rng.gen_range(llo..=lhi).exp()))).collect()
}

/// max over probes of (1/σ(Δ(x,r))) Σ_{cells in B(x,r)} |Θ1|² δ^{2υ−(m−d)} μ.
pub fn carleson_ball_norm<S: Scalar>(field: &Field<S>, e: &AdrSet<S>, grid: &AmbientGrid<S>, upsilon: S, m: S, probes: &[(usize, S)]) -> Result<S> {
    let metric = e.reg.ambient_metric().ok_or_else(|| Error::InvalidInput("ball norms need ambient coordinates".into()))?;
    let index = crate::qspace::RegularizedMetric::ambient(grid.centers.clone(), metric)?;
    Ok(probes
        .par_iter()
        .map(|&(x, r)| {
            let mut hits = Vec::new();
            index.within_point(e.point(x), r, false, &mut hits);
            let s: S = hits.iter().map(|&c| field.norm_sq(c) * sf_weight(grid.delta[c], upsilon, m, e.dim_d) * grid.measure[c]).sum();
            let mut ball = Vec::new();
            e.reg.within_sample(x, r, false, &mut ball);
            s / e.measure_of(&ball)
        })
        .reduce(S::zero, |a, b| a.max(b)))
}

/// ‖f‖_{L^p(σ)}; p = ∞ gives the max.
pub fn lp_norm<S: Scalar>(f: &[S], e: &AdrSet<S>, p: S) -> S {
    if p.is_infinite() {
        return f.iter().fold(S::zero(), |a, v| a.max(v.abs()));
    }
    f.iter().zip(&e.weights).map(|(v, w)| v.abs().powf(p) * *w).sum::<S>().powf(S::one() / p)
}

/// sup_λ λ σ({𝒜 > λ})^{1/p}, exact over the attained values of 𝒜.
pub fn weak_lp_quasinorm<S: Scalar>(area: &[S], e: &AdrSet<S>, p: S) -> S {
    let mut order: Vec<usize> = (0..area.len()).collect();
    order.sort_by(|&a, &b| area[b].partial_cmp(&area[a]).unwrap());
    let mut best = S::zero();
    let mut mass = S::zero();
    let mut i = 0;
    while i < order.len() {
        let a = area[order[i]];
        while i < order.len() && area[order[i]] == a {
            mass += e.weights[order[i]];
            i += 1;
        }
        if a > S::zero() {
            best = best.max(a * mass.powf(S::one() / p));
        }
    }
    best
}

/// max over the family of weak-L^p(𝒜f)/‖f‖_{L^p}; entries are (area values, f).
pub fn weak_lp_constant<S: Scalar>(family: &[(Vec<S>, Vec<S>)], e: &AdrSet<S>, p: S) -> Result<S> {
    if !(p > S::zero()) {
        return Err(Error::OutOfRange("p must be positive".into()));
    }
    let mut best = S::zero();
    for (area, f) in family {
        let nf = lp_norm(f, e, p);
        if nf > S::zero() {
            best = best.max(weak_lp_quasinorm(area, e, p) / nf);
        }
    }
    Ok(best)
}

fn mean<S: Scalar>(b: &[Complex<S>], e: &AdrSet<S>, idx: &[usize]) -> Complex<S> {
    let mut s = Complex::new(S::zero(), S::zero());
    let mut w = S::zero();
    for &i in idx {
        s += b[i] * e.weights[i];
        w += e.weights[i];
    }
    s / w
}

pub fn real_to_complex<S: Scalar>(b: &[S]) -> Vec<Complex<S>> {
    b.iter().map(|v| Complex::new(*v, S::zero())).collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct ParaAccretive {
    pub holds: bool,
    /// A cube with no admissible descendant.
    pub witness: Option<usize>,
}

/// Every cube Q must contain a descendant Q̃ with ℓ(Q̃) ≥ cℓ(Q) and |⨍_{Q̃} b| ≥ C.
pub fn para_accretive_check<S: Scalar>(b: &[Complex<S>], grid: &DyadicGrid<S>, e: &AdrSet<S>, c: S, big_c: S) -> Result<ParaAccretive> {
    if b.len() != e.len() {
        return Err(Error::InvalidInput("b length differs from the set".into()));
    }
    let means: Vec<S> = grid.cubes.par_iter().map(|q| mean(b, e, &q.members).norm()).collect();
    let witness = grid
        .cubes
        .par_iter()
        .find_first(|q| {
            let mut stack = vec![q.id];
            while let Some(x) = stack.pop() {
                let cx = &grid.cubes[x];
                if cx.side < c * q.side {
                    continue;
                }
                if means[x] >= big_c {
                    return false;
                }
                stack.extend_from_slice(&cx.children);
            }
            true
        })
        .map(|q| q.id);
    Ok(ParaAccretive { holds: witness.is_none(), witness })
}

#[derive(Debug, Clone, Serialize)]
pub struct StoppingTime<S> {
    pub selected: Vec<usize>,
    pub f_q: Vec<usize>,
    pub eta: S,
}

/// Renormalize b to Q̃-mean 1 and stop at maximal cubes with Re mean ≤ 1/2.
pub fn stopping_time<S: Scalar>(b: &[Complex<S>], grid: &DyadicGrid<S>, e: &AdrSet<S>, q: usize, q_tilde: usize) -> Result<StoppingTime<S>> {
    if !grid.is_within(q_tilde, q) {
        return Err(Error::InvalidInput(format!("cube {q_tilde} is not inside cube {q}")));
    }
    let m0 = mean(b, e, &grid.cubes[q_tilde].members);
    if m0.norm() == S::zero() {
        return Err(Error::InvalidInput("b has zero mean on the starting cube".into()));
    }
    let bn: Vec<Complex<S>> = b.iter().map(|v| *v / m0).collect();
    let half = S::of(0.5);
    let mut selected = Vec::new();
    let mut f_q = Vec::new();
    let mut stack = vec![q_tilde];
    while let Some(x) = stack.pop() {
        let mx = mean(&bn, e, &grid.cubes[x].members);
        if x != q_tilde && mx.re <= half {
            selected.push(x);
            continue;
        }
        if mx.norm() < half {
            return Err(Error::invariant("stopping time", format!("cube {x} kept with |mean| < 1/2")));
        }
        f_q.push(x);
        stack.extend(grid.cubes[x].children.iter().rev());
    }
    selected.sort_unstable();
    f_q.sort_unstable();
    let mut seen = vec![false; e.len()];
    let mut stopped = S::zero();
    for &s in &selected {
        for &i in &grid.cubes[s].members {
            if seen[i] {
                return Err(Error::invariant("stopping time", "selected cubes overlap"));
            }
            seen[i] = true;
            stopped += e.weights[i];
        }
    }
    let total = e.measure_of(&grid.cubes[q_tilde].members);
    Ok(StoppingTime { selected, f_q, eta: (total - stopped) / total })
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct LocalTbRow<S> {
    pub cube: usize,
    pub generation: i32,
    /// ∫|b_Q|²/σ(Q).
    pub size: S,
    /// |∫_Q b_Q|/σ(Q).
    pub mean: S,
    /// ∫_{T(Q)} |Θb_Q|² δ^{2υ−(m−d)} dμ / σ(Q).
    pub tent: S,
}

#[derive(Debug, Clone, Serialize)]
pub struct LocalTb<S> {
    pub holds: bool,
    pub rows: Vec<LocalTbRow<S>>,
    /// Smallest C₀ the system satisfies.
    pub c0_needed: S,
    /// Largest c₀ the system satisfies.
    pub mean_min: S,
}

/// Check the three local T(b) conditions on every cube up to generation `max_generation`.
#[allow(clippy::too_many_arguments)]
pub fn local_tb_check<S: Scalar, B: Fn(usize) -> Vec<S> + Sync>(
    system: B,
    tents: &TentStructure<S>,
    kernel: &Kernel<S>,
    e: &AdrSet<S>,
    dyadic: &DyadicGrid<S>,
    grid: &AmbientGrid<S>,
    max_generation: i32,
    c0_big: S,
    c0_small: S,
) -> Result<LocalTb<S>> {
    let m = grid.ambient_dim_m;
    let up = kernel.params.upsilon;
    let cubes: Vec<usize> = dyadic.cubes.iter().filter(|q| q.generation <= max_generation).map(|q| q.id).collect();
    let rows: Vec<LocalTbRow<S>> = cubes
        .par_iter()
        .map(|&id| {
            let q = &dyadic.cubes[id];
            let b = system(id);
            let sq = e.measure_of(&q.members);
            let size: S = b.iter().zip(&e.weights).map(|(v, w)| *v * *v * *w).sum::<S>() / sq;
            let mean = q.members.iter().map(|&i| b[i] * e.weights[i]).sum::<S>().abs() / sq;
            let cells = &tents.tents[id];
            let tent = if cells.is_empty() {
                Ok(S::zero())
            } else {
                let pts = PointSet::new(grid.centers.dim, cells.iter().flat_map(|&c| grid.center(c).to_vec()).collect())?;
                let f = apply_theta_at(kernel, e, &b, &pts)?;
                Ok(cells.iter().enumerate().map(|(k, &c)| f.norm_sq(k) * sf_weight(grid.delta[c], up, m, e.dim_d) * grid.measure[c]).sum::<S>() / sq)
            };
            tent.map(|tent| LocalTbRow { cube: id, generation: q.generation, size, mean, tent })
        })
        .collect::<Result<_>>()?;
    let c0_needed = rows.iter().fold(S::zero(), |a, r| a.max(r.size).max(r.tent));
    let mean_min = rows.iter().fold(S::infinity(), |a, r| a.min(r.mean));
    Ok(LocalTb { holds: c0_needed <= c0_big && mean_min >= c0_small, rows, c0_needed, mean_min })
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct Embedding<S> {
    pub lhs: S,
    pub rhs: S,
    pub packing: S,
}

/// Σ A_Q B_Q against C Σ_x A*(x) σ_x with the measured packing constant C.
pub fn carleson_embedding<S: Scalar>(a: &[S], b: &[S], e: &AdrSet<S>, grid: &DyadicGrid<S>) -> Result<Embedding<S>> {
    let nq = grid.cubes.len();
    if a.len() != nq || b.len() != nq {
        return Err(Error::InvalidInput("A and B need one value per cube".into()));
    }
    if b.iter().any(|v| *v < S::zero()) {
        return Err(Error::InvalidInput("B must be nonnegative".into()));
    }
    let mut sub = b.to_vec();
    for ids in grid.generations.iter().rev() {
        for &id in ids {
            if let Some(p) = grid.cubes[id].parent {
                let v = sub[id];
                sub[p] += v;
            }
        }
    }
    let packing = grid.cubes.iter().map(|q| sub[q.id] / e.measure_of(&q.members)).fold(S::zero(), |x, y| x.max(y));
    if !packing.is_finite() {
        return Err(Error::Numerical("packing constant is infinite".into()));
    }
    let lhs: S = a.iter().zip(b).map(|(x, y)| *x * *y).sum();
    let star: S = (0..e.len())
        .map(|x| {
            let s = (grid.kappa_e..=grid.k_max).map(|k| a[grid.cube_at(k, x)].abs()).fold(S::zero(), |u, v| u.max(v));
            s * e.weights[x]
        })
        .sum();
    Ok(Embedding { lhs, rhs: packing * star, packing })
}
