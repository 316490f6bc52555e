//! Whitney covers of X∖E, the Whitney regions U_Q and dyadic Carleson tents.
//!
//! Balls are centered at ambient-grid cells. Distances off E use ρ_# of the
//! ambient space, which is the ambient metric for the geodesic settings
//! supported here; δ_E is the distance to the sampled cloud.

use rayon::prelude::*;
use serde::Serialize;

use crate::dyadic::DyadicGrid;
use crate::error::{Error, Result};
use crate::qspace::{Ambient, RegularizedMetric};
use crate::scalar::Scalar;
use crate::sets::{AdrSet, AmbientGrid};

#[derive(Debug, Clone, Copy, Serialize)]
pub struct WhitneyBall<S> {
    pub cell: usize,
    pub radius: S,
    pub shell: i32,
}

#[derive(Debug, Clone)]
pub struct WhitneyCover<S: Scalar> {
    pub balls: Vec<WhitneyBall<S>>,
    pub lambda: S,
    /// Measured max δ_E(center)/r + 1, so ΛI meets E for every ball.
    pub big_lambda: S,
    /// Measured bounded-overlap constant of the λ-dilates on cell centers.
    pub overlap: usize,
    /// Cells whose center lies in each ball.
    pub ball_cells: Vec<Vec<usize>>,
    metric: Ambient<S>,
}

/// Index of the ambient cell centers for range queries.
fn cell_index<S: Scalar>(cells: &AmbientGrid<S>, metric: Ambient<S>) -> Result<RegularizedMetric<S>> {
    RegularizedMetric::ambient(cells.centers.clone(), metric)
}

fn ambient_of<S: Scalar>(e: &AdrSet<S>) -> Result<Ambient<S>> {
    e.reg.ambient_metric().ok_or_else(|| Error::InvalidInput("Whitney covers need a cloud with ambient coordinates".into()))
}

/// Shell j with 2^{-j} ≤ s < 2^{-j+1}.
pub fn shell_of<S: Scalar>(s: S) -> i32 {
    let half = S::of(0.5);
    let mut j = (-s.log2()).ceil().to_i32().unwrap_or(0);
    while half.powi(j) > s {
        j += 1;
    }
    while half.powi(j - 1) <= s {
        j -= 1;
    }
    j
}

pub fn whitney_cover<S: Scalar>(cells: &AmbientGrid<S>, e: &AdrSet<S>, lambda: S) -> Result<WhitneyCover<S>> {
    let metric = ambient_of(e)?;
    let c = e.reg.c_rho();
    if lambda < S::of(2.0) * c {
        return Err(Error::OutOfRange(format!("lambda = {lambda} must be at least 2 C_rho = {}", S::of(2.0) * c)));
    }
    let n = cells.len();
    let four_lc = S::of(4.0) * lambda * c;
    let shells: Vec<i32> = cells.delta.iter().map(|&d| shell_of(d / four_lc)).collect();
    let (jmin, jmax) = (*shells.iter().min().unwrap(), *shells.iter().max().unwrap());
    let index = cell_index(cells, metric)?;
    let mut balls = Vec::new();
    let mut hits = Vec::new();
    let mut marked = vec![false; n];
    for j in jmin..=jmax {
        let r = S::of(0.5).powi(j);
        for i in 0..n {
            if shells[i] != j || marked[i] {
                continue;
            }
            balls.push(WhitneyBall { cell: i, radius: r, shell: j });
            hits.clear();
            index.within_point(cells.center(i), r, false, &mut hits);
            for &h in &hits {
                if shells[h] == j {
                    marked[h] = true;
                }
            }
        }
    }
    let ball_cells: Vec<Vec<usize>> = balls
        .par_iter()
        .map(|b| {
            let mut out = Vec::new();
            index.within_point(cells.center(b.cell), b.radius, false, &mut out);
            out.sort_unstable();
            out
        })
        .collect();
    // invariants
    let mut covered = vec![false; n];
    for bc in &ball_cells {
        for &x in bc {
            covered[x] = true;
        }
    }
    if let Some(x) = covered.iter().position(|&v| !v) {
        return Err(Error::invariant("whitney covering", format!("cell {x} is in no ball")));
    }
    let mut big_lambda = S::zero();
    for (k, b) in balls.iter().enumerate() {
        let d = cells.delta[b.cell];
        if !(lambda * b.radius < d) {
            return Err(Error::invariant("whitney dilate", format!("ball {k}: lambda r = {} meets E (delta = {d})", lambda * b.radius)));
        }
        big_lambda = big_lambda.max(d / b.radius + S::one());
    }
    // overlap of λ-dilates, one index of ball centers per shell
    let mut counts = vec![0usize; n];
    for j in jmin..=jmax {
        let ids: Vec<usize> = (0..balls.len()).filter(|&k| balls[k].shell == j).collect();
        if ids.is_empty() {
            continue;
        }
        let pts = crate::qspace::PointSet::new(cells.centers.dim, ids.iter().flat_map(|&k| cells.center(balls[k].cell).to_vec()).collect())?;
        let shell_index = RegularizedMetric::ambient(pts, metric)?;
        let lr = lambda * S::of(0.5).powi(j);
        let add: Vec<usize> = (0..n)
            .into_par_iter()
            .map(|x| {
                let mut out = Vec::new();
                shell_index.within_point(cells.center(x), lr, false, &mut out);
                out.len()
            })
            .collect();
        for (c, a) in counts.iter_mut().zip(add) {
            *c += a;
        }
    }
    let overlap = counts.into_iter().max().unwrap_or(0);
    Ok(WhitneyCover { balls, lambda, big_lambda, overlap, ball_cells, metric })
}

/// Measured constants of a tent structure.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct TentConstants<S> {
    pub c_star: S,
    /// C_o = C_*C_ρΛ.
    pub c_o: S,
    /// max over cubes and U_Q cells of max(δ_E/ℓ, ℓ/δ_E).
    pub c_o_measured: S,
    /// Certified C with T_E(Q) ⊆ B(x, Cℓ(Q)) for all x ∈ Q.
    pub c_tent: S,
    /// Largest ε with B(x_Q, εℓ(Q)) ∩ cells ⊆ T_E(Q) on the resolvable band.
    pub epsilon: S,
    /// Σ_Q 1_{U_Q} bound on cells.
    pub overlap: usize,
    /// ε of the covering lemma, 2^{-N} with N−1 ≤ log₂C_ρ³ < N.
    pub epsilon_cover: S,
    pub cover_checked: usize,
    /// Cells with δ_E below 2^{-k_max}, too fine for the grid's generations.
    pub unresolved_cells: usize,
    pub empty_u: usize,
}

#[derive(Debug, Clone)]
pub struct TentStructure<S> {
    pub c_star: S,
    /// Whitney ball ids per cube.
    pub w_q: Vec<Vec<usize>>,
    /// Sorted cell ids per cube.
    pub u_q: Vec<Vec<usize>>,
    /// Sorted cell ids of T_E(Q) per cube.
    pub tents: Vec<Vec<usize>>,
    pub constants: TentConstants<S>,
}

/// ε = 2^{-N} with N−1 ≤ log₂(C_ρ³) < N.
pub fn covering_epsilon<S: Scalar>(c_rho: S) -> S {
    let l = (c_rho * c_rho * c_rho).log2();
    let n = l.floor() + S::one();
    S::of(2.0).powf(-n)
}

fn merge_sorted(a: &[usize], b: &[usize]) -> Vec<usize> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() || j < b.len() {
        let v = if j == b.len() || (i < a.len() && a[i] <= b[j]) {
            let v = a[i];
            i += 1;
            v
        } else {
            let v = b[j];
            j += 1;
            v
        };
        if out.last() != Some(&v) {
            out.push(v);
        }
    }
    out
}

pub fn build_tents<S: Scalar>(
    grid: &DyadicGrid<S>,
    cover: &WhitneyCover<S>,
    cells: &AmbientGrid<S>,
    e: &AdrSet<S>,
    c_star: Option<S>,
) -> Result<TentStructure<S>> {
    let c = e.reg.c_rho();
    let floor = S::of(4.0) * c.powi(4) * cover.big_lambda;
    let c_star = c_star.unwrap_or(floor);
    if c_star < floor * (S::one() - S::rel_tol()) {
        return Err(Error::OutOfRange(format!("C_star = {c_star} below 4 C_rho^4 Lambda = {floor}")));
    }
    let metric = cover.metric;
    let reg = &e.reg;
    let a1 = grid.constants.a1;
    // cube-center index per generation
    let gen_index: Vec<RegularizedMetric<S>> = grid
        .generations
        .iter()
        .map(|ids| {
            let pts = crate::qspace::PointSet::new(e.points().dim, ids.iter().flat_map(|&id| e.point(grid.cubes[id].center).to_vec()).collect())?;
            RegularizedMetric::ambient(pts, metric)
        })
        .collect::<Result<_>>()?;
    // W_Q by ball: generations with ℓ ∈ [r/C*, C*r] and ℓ ≥ δ − r
    let pairs: Vec<Vec<usize>> = cover
        .balls
        .par_iter()
        .map(|b| {
            let x = cells.center(b.cell);
            let delta = cells.delta[b.cell];
            let mut found = Vec::new();
            let mut cand = Vec::new();
            for k in grid.kappa_e..=grid.k_max {
                let l = S::of(0.5).powi(k);
                if l * c_star < b.radius || l > c_star * b.radius || l + b.radius < delta {
                    continue;
                }
                let g = (k - grid.kappa_e) as usize;
                cand.clear();
                gen_index[g].within_point(x, (S::one() + a1) * l + b.radius, true, &mut cand);
                for &a in &cand {
                    let id = grid.generations[g][a];
                    let reach = l + b.radius;
                    if grid.cubes[id].members.iter().any(|&y| reg.dist_point(x, y) <= reach) {
                        found.push(id);
                    }
                }
            }
            found
        })
        .collect();
    let mut w_q = vec![Vec::new(); grid.cubes.len()];
    for (bid, qs) in pairs.into_iter().enumerate() {
        for q in qs {
            w_q[q].push(bid);
        }
    }
    let u_q: Vec<Vec<usize>> = w_q
        .par_iter()
        .map(|bs| {
            let mut v: Vec<usize> = bs.iter().flat_map(|&b| cover.ball_cells[b].iter().copied()).collect();
            v.sort_unstable();
            v.dedup();
            v
        })
        .collect();
    // tents bottom-up
    let mut tents: Vec<Vec<usize>> = vec![Vec::new(); grid.cubes.len()];
    for ids in grid.generations.iter().rev() {
        let level: Vec<(usize, Vec<usize>)> = ids
            .par_iter()
            .map(|&id| {
                let mut t = u_q[id].clone();
                for &ch in &grid.cubes[id].children {
                    t = merge_sorted(&t, &tents[ch]);
                }
                (id, t)
            })
            .collect();
        for (id, t) in level {
            tents[id] = t;
        }
    }
    let mut ts = TentStructure {
        c_star,
        w_q,
        u_q,
        tents,
        constants: TentConstants {
            c_star,
            c_o: c_star * c * cover.big_lambda,
            c_o_measured: S::zero(),
            c_tent: S::zero(),
            epsilon: S::zero(),
            overlap: 0,
            epsilon_cover: covering_epsilon(c),
            cover_checked: 0,
            unresolved_cells: 0,
            empty_u: 0,
        },
    };
    ts.constants = ts.verify(grid, cells, e)?;
    Ok(ts)
}

impl<S: Scalar> TentStructure<S> {
    pub fn in_tent(&self, q: usize, cell: usize) -> bool {
        self.tents[q].binary_search(&cell).is_ok()
    }

    /// Check the five tent invariants and return measured constants.
    pub fn verify(&self, grid: &DyadicGrid<S>, cells: &AmbientGrid<S>, e: &AdrSet<S>) -> Result<TentConstants<S>> {
        let mut k = self.constants;
        let reg = &e.reg;
        let metric = reg.ambient_metric().ok_or_else(|| Error::InvalidInput("tents need ambient coordinates".into()))?;
        let beta = reg.triangle_exponent();
        // UUU-rf
        let mut c_o_measured = S::one();
        for (q, u) in self.u_q.iter().enumerate() {
            let l = grid.cubes[q].side;
            for &x in u {
                let d = cells.delta[x];
                c_o_measured = c_o_measured.max(d / l).max(l / d);
            }
        }
        if c_o_measured > k.c_o {
            return Err(Error::invariant("UUU-rf", format!("measured {c_o_measured} exceeds C_o = {}", k.c_o)));
        }
        k.c_o_measured = c_o_measured;
        k.empty_u = self.u_q.iter().filter(|u| u.is_empty()).count();
        // dFvK by the triangle bound through x_Q
        let c_tent = grid
            .cubes
            .par_iter()
            .map(|cube| {
                let xq = e.point(cube.center);
                let inner = cube.members.iter().map(|&y| reg.dist(cube.center, y)).fold(S::zero(), |a, b| a.max(b));
                let outer = self.tents[cube.id].iter().map(|&x| metric.dist(xq, cells.center(x))).fold(S::zero(), |a, b| a.max(b));
                (inner.powf(beta) + outer.powf(beta)).powf(S::one() / beta) / cube.side
            })
            .reduce(S::zero, |a, b| a.max(b));
        k.c_tent = c_tent;
        // zjrh on the resolvable band
        let fine = S::of(0.5).powi(grid.k_max);
        let index = cell_index(cells, metric)?;
        let eps = grid
            .cubes
            .par_iter()
            .map(|cube| {
                let xq = e.point(cube.center);
                index
                    .nearest_point_where(xq, |x| cells.delta[x] >= fine && !self.in_tent(cube.id, x))
                    .map_or(S::infinity(), |p| p.0 / cube.side)
            })
            .reduce(S::infinity, |a, b| a.min(b));
        if !(eps > S::zero()) {
            return Err(Error::invariant("zjrh", "a tent misses cells arbitrarily close to its center"));
        }
        k.epsilon = eps;
        // doj
        let mut count = vec![0usize; cells.len()];
        for u in &self.u_q {
            for &x in u {
                count[x] += 1;
            }
        }
        k.overlap = count.into_iter().max().unwrap_or(0);
        // doj.cF
        let cut = k.epsilon_cover * e.diameter();
        let top = grid.top();
        let mut checked = 0;
        let mut unresolved = 0;
        for x in 0..cells.len() {
            let d = cells.delta[x];
            if d < fine {
                unresolved += 1;
                continue;
            }
            if d < cut {
                checked += 1;
                if !self.in_tent(top, x) {
                    return Err(Error::invariant("doj.cF", format!("cell {x} with delta {d} lies in no U_Q")));
                }
            }
        }
        k.cover_checked = checked;
        k.unresolved_cells = unresolved;
        Ok(k)
    }

    /// Exact sup over x ∈ Q, y ∈ T_E(Q) of ρ(x, y)/ℓ(Q).
    pub fn tent_radius_exact(&self, grid: &DyadicGrid<S>, cells: &AmbientGrid<S>, e: &AdrSet<S>, q: usize) -> S {
        let cube = &grid.cubes[q];
        cube.members
            .par_iter()
            .map(|&y| self.tents[q].iter().map(|&x| e.reg.dist_point(cells.center(x), y)).fold(S::zero(), |a, b| a.max(b)))
            .reduce(S::zero, |a, b| a.max(b))
            / cube.side
    }

    /// JSON export: cube id → tent cell ids.
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::Value::Object(
            self.tents.iter().enumerate().map(|(q, t)| (q.to_string(), serde_json::json!(t))).collect(),
        )
    }
}
