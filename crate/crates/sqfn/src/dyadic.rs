//! Christ-type dyadic cubes on finite clouds.
//!
//! Nets are nested: generation k+1 starts from the generation-k centers and
//! greedily adds samples in index order. Points are assigned to their nearest
//! finest-generation center and inherit coarser cubes through parent links, so
//! partition and nesting hold by construction.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::sets::AdrSet;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Serialize)]
pub struct Cube<S> {
    pub id: usize,
    pub generation: i32,
    pub center: usize,
    pub members: Vec<usize>,
    pub parent: Option<usize>,
    pub children: Vec<usize>,
    pub side: S,
}

/// Measured constants of a grid.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct GridConstants<S> {
    /// Largest a₀ with B(x_Q, a₀ℓ(Q)) ∩ E ⊆ Q for every cube.
    pub a0: S,
    /// Smallest a₁ with Q ⊆ closed B(x_Q, a₁ℓ(Q)) for every cube.
    pub a1: S,
    /// Largest number of children.
    pub n_children: usize,
    /// Smallest σ(child)/σ(parent).
    pub min_child_ratio: S,
}

#[derive(Debug, Clone, Serialize)]
pub struct DyadicGrid<S> {
    pub kappa_e: i32,
    pub k_max: i32,
    pub delta: S,
    pub cubes: Vec<Cube<S>>,
    /// Cube ids per generation, index k − κ_E.
    pub generations: Vec<Vec<usize>>,
    /// For each generation, the cube id containing each sample.
    #[serde(skip)]
    pub cube_of: Vec<Vec<usize>>,
    pub constants: GridConstants<S>,
}

/// One generation given by centers and a point → local-cube labelling.
struct Level<S> {
    side: S,
    centers: Vec<usize>,
    label: Vec<usize>,
}

/// κ with δ^{κ+1} < diam ≤ δ^κ (0 for a single point).
pub fn kappa_for<S: Scalar>(diam: S, delta: S) -> i32 {
    if diam <= S::zero() {
        return 0;
    }
    let mut k = (diam.ln() / delta.ln()).floor().to_i32().unwrap_or(0);
    while delta.powi(k) < diam {
        k -= 1;
    }
    while delta.powi(k + 1) >= diam {
        k += 1;
    }
    k
}

impl<S: Scalar> DyadicGrid<S> {
    pub fn generation(&self, k: i32) -> &[usize] {
        &self.generations[(k - self.kappa_e) as usize]
    }

    pub fn cube(&self, id: usize) -> &Cube<S> {
        &self.cubes[id]
    }

    /// Cube of generation k containing sample x.
    pub fn cube_at(&self, k: i32, x: usize) -> usize {
        self.cube_of[(k - self.kappa_e) as usize][x]
    }

    pub fn top(&self) -> usize {
        self.generations[0][0]
    }

    pub fn sigma(&self, e: &AdrSet<S>, id: usize) -> S {
        e.measure_of(&self.cubes[id].members)
    }

    /// All cubes contained in `id`, including itself, in breadth-first order.
    pub fn descendants(&self, id: usize) -> Vec<usize> {
        let mut out = vec![id];
        let mut head = 0;
        while head < out.len() {
            let c = out[head];
            out.extend_from_slice(&self.cubes[c].children);
            head += 1;
        }
        out
    }

    /// Is `a` contained in `b` (ancestor-or-self test)?
    pub fn is_within(&self, a: usize, b: usize) -> bool {
        let mut c = Some(a);
        let gb = self.cubes[b].generation;
        while let Some(x) = c {
            if x == b {
                return true;
            }
            if self.cubes[x].generation <= gb {
                return false;
            }
            c = self.cubes[x].parent;
        }
        false
    }

    fn assemble(e: &AdrSet<S>, kappa_e: i32, delta: S, levels: Vec<Level<S>>) -> Result<Self> {
        let n = e.len();
        let mut cubes: Vec<Cube<S>> = Vec::new();
        let mut generations = Vec::with_capacity(levels.len());
        let mut cube_of: Vec<Vec<usize>> = Vec::with_capacity(levels.len());
        for (g, lv) in levels.iter().enumerate() {
            let k = kappa_e + g as i32;
            let base = cubes.len();
            let mut members = vec![Vec::new(); lv.centers.len()];
            for x in 0..n {
                let l = lv.label[x];
                if l >= lv.centers.len() {
                    return Err(Error::invariant("partition", format!("sample {x} unlabelled at generation {k}")));
                }
                members[l].push(x);
            }
            let ids: Vec<usize> = (0..lv.centers.len()).map(|l| base + l).collect();
            for (l, mem) in members.into_iter().enumerate() {
                if mem.is_empty() {
                    return Err(Error::invariant("partition", format!("empty cube {} at generation {k}", base + l)));
                }
                let parent = if g == 0 {
                    None
                } else {
                    Some(cube_of[g - 1][lv.centers[l]])
                };
                cubes.push(Cube { id: base + l, generation: k, center: lv.centers[l], members: mem, parent, children: vec![], side: lv.side });
            }
            cube_of.push(lv.label.iter().map(|&l| base + l).collect::<Vec<usize>>());
            generations.push(ids);
        }
        for id in 0..cubes.len() {
            if let Some(p) = cubes[id].parent {
                cubes[p].children.push(id);
            }
        }
        let k_max = kappa_e + levels.len() as i32 - 1;
        let mut grid = DyadicGrid {
            kappa_e,
            k_max,
            delta,
            cubes,
            generations,
            cube_of,
            constants: GridConstants { a0: S::zero(), a1: S::zero(), n_children: 0, min_child_ratio: S::zero() },
        };
        grid.constants = grid.verify(e)?;
        Ok(grid)
    }

    /// Check partition, nesting, ball sandwich and bounded children; return the measured constants.
    pub fn verify(&self, e: &AdrSet<S>) -> Result<GridConstants<S>> {
        let n = e.len();
        for (g, ids) in self.generations.iter().enumerate() {
            let mut seen = vec![usize::MAX; n];
            for &id in ids {
                for &x in &self.cubes[id].members {
                    if seen[x] != usize::MAX {
                        return Err(Error::invariant("partition", format!("sample {x} in cubes {} and {id}", seen[x])));
                    }
                    seen[x] = id;
                }
            }
            if let Some(x) = seen.iter().position(|&c| c == usize::MAX) {
                return Err(Error::invariant("partition", format!("sample {x} uncovered at generation {}", self.kappa_e + g as i32)));
            }
        }
        for c in &self.cubes {
            if c.children.is_empty() {
                if c.generation < self.k_max {
                    return Err(Error::invariant("nesting", format!("cube {} has no children", c.id)));
                }
                continue;
            }
            let mut union: Vec<usize> = c.children.iter().flat_map(|&ch| self.cubes[ch].members.iter().copied()).collect();
            union.sort_unstable();
            let mut own = c.members.clone();
            own.sort_unstable();
            if union != own {
                return Err(Error::invariant("nesting", format!("cube {} differs from the union of its children", c.id)));
            }
        }
        let reg = &e.reg;
        let ratios: Vec<(usize, S, S)> = self
            .cubes
            .par_iter()
            .map(|c| {
                let g = (c.generation - self.kappa_e) as usize;
                let inside = |j: usize| self.cube_of[g][j] == c.id;
                let outside = if reg.is_dense() {
                    (0..n).filter(|&j| !inside(j)).map(|j| reg.dist(c.center, j)).fold(S::infinity(), |a, b| a.min(b))
                } else {
                    reg.nearest_point_where(e.point(c.center), |j| !inside(j)).map_or(S::infinity(), |p| p.0)
                };
                let reach = c.members.iter().map(|&x| reg.dist(c.center, x)).fold(S::zero(), |a, b| a.max(b));
                (c.id, outside / c.side, reach / c.side)
            })
            .collect();
        let mut a0 = S::infinity();
        let mut a1 = S::zero();
        for &(id, lo, hi) in &ratios {
            if !(lo > S::zero()) {
                return Err(Error::invariant("ball sandwich", format!("cube {id} has a0 = 0")));
            }
            a0 = a0.min(lo);
            a1 = a1.max(hi);
        }
        let mut n_children = 0;
        let mut min_child_ratio = S::one();
        for c in &self.cubes {
            n_children = n_children.max(c.children.len());
            if !c.children.is_empty() {
                let s = e.measure_of(&c.members);
                for &ch in &c.children {
                    min_child_ratio = min_child_ratio.min(e.measure_of(&self.cubes[ch].members) / s);
                }
            }
        }
        if self.cubes.iter().any(|c| c.generation < self.k_max && c.children.is_empty()) {
            return Err(Error::invariant("children", "childless interior cube"));
        }
        Ok(GridConstants { a0, a1, n_children: n_children.max(1), min_child_ratio })
    }

    /// JSON export: generations → cubes → {center, members, parent, children}.
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "kappa_E": self.kappa_e,
            "k_max": self.k_max,
            "delta": self.delta.to_f64c(),
            "generations": self.generations.iter().map(|ids| ids.iter().map(|&id| {
                let c = &self.cubes[id];
                serde_json::json!({"id": c.id, "center": c.center, "members": c.members, "parent": c.parent, "children": c.children})
            }).collect::<Vec<_>>()).collect::<Vec<_>>(),
        })
    }
}

/// Nested greedy nets at separation δ^k, nearest-center assignment, ancestry propagation.
pub fn build_grid<S: Scalar>(e: &AdrSet<S>, k_max: i32, delta: S) -> Result<DyadicGrid<S>> {
    if !(delta > S::zero() && delta < S::one()) {
        return Err(Error::OutOfRange(format!("delta = {delta} must lie in (0, 1)")));
    }
    let n = e.len();
    if n == 0 {
        return Err(Error::EmptySet);
    }
    let reg = &e.reg;
    let kappa_e = kappa_for(e.diameter(), delta);
    if k_max < kappa_e {
        return Err(Error::OutOfRange(format!("k_max = {k_max} below kappa_E = {kappa_e}")));
    }
    let spacing = e.min_spacing();
    if n > 1 && delta.powi(k_max) < spacing {
        log::info!("delta^k_max = {} is below the sample spacing {spacing}; finest generations are singletons", delta.powi(k_max));
    }
    // nested nets
    let mut nets: Vec<Vec<usize>> = vec![vec![0]];
    let mut is_center = vec![false; n];
    is_center[0] = true;
    let mut hits = Vec::new();
    for k in kappa_e + 1..=k_max {
        let r = delta.powi(k);
        let mut centers = nets.last().unwrap().clone();
        let mut marked = vec![false; n];
        for &c in &centers {
            hits.clear();
            reg.within_sample(c, r, false, &mut hits);
            for &j in &hits {
                marked[j] = true;
            }
        }
        for i in 0..n {
            if !marked[i] {
                centers.push(i);
                is_center[i] = true;
                hits.clear();
                reg.within_sample(i, r, false, &mut hits);
                for &j in &hits {
                    marked[j] = true;
                }
            }
        }
        nets.push(centers);
    }
    // parent of each center: nearest center one generation up
    let nearest_among = |x: usize, k: i32, pool: &[bool]| -> usize {
        let r = delta.powi(k);
        let mut cand = Vec::new();
        reg.within_sample(x, r, false, &mut cand);
        cand.retain(|&j| pool[j]);
        cand.into_iter()
            .map(|j| (reg.dist(x, j), j))
            .min_by(|a, b| a.partial_cmp(b).unwrap())
            .map(|p| p.1)
            .expect("maximal net covers every sample")
    };
    let g_count = nets.len();
    let mut levels: Vec<Level<S>> = Vec::with_capacity(g_count);
    let mut local: Vec<Vec<usize>> = Vec::with_capacity(g_count);
    for net in &nets {
        let mut l = vec![usize::MAX; n];
        for (a, &c) in net.iter().enumerate() {
            l[c] = a;
        }
        local.push(l);
    }
    // finest assignment
    let fin = g_count - 1;
    let mut pool = vec![false; n];
    for &c in &nets[fin] {
        pool[c] = true;
    }
    let k_fin = kappa_e + fin as i32;
    let assign: Vec<usize> = (0..n).into_par_iter().map(|x| if pool[x] { x } else { nearest_among(x, k_fin, &pool) }).collect();
    let mut center_of: Vec<usize> = assign;
    let mut labels: Vec<Vec<usize>> = vec![Vec::new(); g_count];
    labels[fin] = center_of.iter().map(|&c| local[fin][c]).collect();
    for g in (0..fin).rev() {
        let k = kappa_e + g as i32;
        let mut pool = vec![false; n];
        for &c in &nets[g] {
            pool[c] = true;
        }
        let parent_of: Vec<usize> = nets[g + 1]
            .par_iter()
            .map(|&c| if pool[c] { c } else if g == 0 { nets[0][0] } else { nearest_among(c, k, &pool) })
            .collect();
        let mut up = vec![usize::MAX; n];
        for (a, &c) in nets[g + 1].iter().enumerate() {
            up[c] = parent_of[a];
        }
        center_of = center_of.iter().map(|&c| up[c]).collect();
        labels[g] = center_of.iter().map(|&c| local[g][c]).collect();
    }
    for (g, (net, label)) in nets.into_iter().zip(labels).enumerate() {
        levels.push(Level { side: delta.powi(kappa_e + g as i32), centers: net, label });
    }
    DyadicGrid::assemble(e, kappa_e, delta, levels)
}

/// Generation map of the δ → 1/2 rescaling: (new dyadic generation j, source generation).
pub fn rescale_map<S: Scalar>(delta: S, kappa_src: i32, k_max_src: i32, kappa_new: i32) -> Vec<(i32, i32)> {
    let half = S::of(0.5);
    let mut out = Vec::new();
    if delta == half {
        return (kappa_src..=k_max_src).map(|k| (k, k)).collect();
    }
    if delta > half {
        // m_j: largest m with δ^m ≥ 2^{-j}
        let m_of = |j: i32| -> i32 {
            let target = half.powi(j);
            let mut m = (target.ln() / delta.ln()).floor().to_i32().unwrap_or(0);
            while delta.powi(m + 1) >= target {
                m += 1;
            }
            while delta.powi(m) < target {
                m -= 1;
            }
            m
        };
        let mut j = kappa_new;
        loop {
            let m = m_of(j);
            if m > k_max_src {
                break;
            }
            out.push((j, m.max(kappa_src)));
            j += 1;
        }
    } else {
        // m_k: smallest m with 2^{-m} ≤ δ^k; D_j = 𝔇_k for m_k ≤ j < m_{k+1}
        let m_of = |k: i32| -> i32 {
            let target = delta.powi(k);
            let mut m = (-target.log2()).ceil().to_i32().unwrap_or(0);
            while half.powi(m - 1) <= target {
                m -= 1;
            }
            while half.powi(m) > target {
                m += 1;
            }
            m
        };
        let last = m_of(k_max_src + 1);
        for j in kappa_new..last {
            let mut k = kappa_src;
            while k < k_max_src && m_of(k + 1) <= j {
                k += 1;
            }
            out.push((j, k));
        }
    }
    out
}

/// Relabel generations so side lengths are powers of 1/2.
pub fn rescale_to_half<S: Scalar>(grid: &DyadicGrid<S>, e: &AdrSet<S>) -> Result<(DyadicGrid<S>, Vec<(i32, i32)>)> {
    let half = S::of(0.5);
    if grid.delta == half {
        let map = (grid.kappa_e..=grid.k_max).map(|k| (k, k)).collect();
        return Ok((grid.clone(), map));
    }
    let kappa_new = kappa_for(e.diameter(), half);
    let map = rescale_map(grid.delta, grid.kappa_e, grid.k_max, kappa_new);
    if map.is_empty() {
        return Err(Error::OutOfRange("rescaling leaves no generations".into()));
    }
    let levels: Vec<Level<S>> = map
        .iter()
        .map(|&(j, k)| {
            let ids = grid.generation(k);
            let mut local = vec![usize::MAX; grid.cubes.len()];
            for (a, &id) in ids.iter().enumerate() {
                local[id] = a;
            }
            let g = (k - grid.kappa_e) as usize;
            Level {
                side: half.powi(j),
                centers: ids.iter().map(|&id| grid.cubes[id].center).collect(),
                label: grid.cube_of[g].iter().map(|&id| local[id]).collect(),
            }
        })
        .collect();
    Ok((DyadicGrid::assemble(e, map[0].0, half, levels)?, map))
}

/// Standard dyadic intervals of a one-parameter set (segment or graph) over its parameter range.
pub fn dyadic_intervals<S: Scalar>(e: &AdrSet<S>, lo: S, hi: S, levels: usize) -> Result<DyadicGrid<S>> {
    let param = e.param.as_ref().ok_or_else(|| Error::InvalidInput("set has no curve parameter".into()))?;
    if !(hi > lo) {
        return Err(Error::InvalidInput("empty parameter range".into()));
    }
    if param.iter().any(|&t| t < lo || t >= hi) {
        return Err(Error::InvalidInput("parameter outside [lo, hi)".into()));
    }
    let len = hi - lo;
    let kappa = kappa_for(len, S::of(0.5));
    let mut out = Vec::with_capacity(levels + 1);
    for g in 0..=levels {
        let parts = 1usize << g;
        let width = len / S::of_usize(parts);
        let label: Vec<usize> = param
            .iter()
            .map(|&t| (((t - lo) / width).floor().to_usize().unwrap_or(0)).min(parts - 1))
            .collect();
        let mut centers = vec![usize::MAX; parts];
        let mut best = vec![S::infinity(); parts];
        for (x, &l) in label.iter().enumerate() {
            let mid = lo + (S::of_usize(l) + S::of(0.5)) * width;
            let d = (param[x] - mid).abs();
            if d < best[l] {
                best[l] = d;
                centers[l] = x;
            }
        }
        if centers.contains(&usize::MAX) {
            return Err(Error::OutOfRange(format!("level {g} has empty intervals; too few samples")));
        }
        out.push(Level { side: S::of(0.5).powi(kappa + g as i32), centers, label });
    }
    DyadicGrid::assemble(e, kappa, S::of(0.5), out)
}

/// Row of [`thin_boundary_profile`].
#[derive(Debug, Clone, Copy, Serialize)]
pub struct BoundaryRow<S> {
    pub cube: usize,
    pub generation: i32,
    pub t: S,
    pub ratio: S,
}

/// σ({x ∈ Q : dist(x, E∖Q) ≤ t ℓ(Q)})/σ(Q) per cube and t, plus the fitted exponent ϑ
/// of the generation-averaged ratio against t.
pub fn thin_boundary_profile<S: Scalar>(grid: &DyadicGrid<S>, e: &AdrSet<S>, t_values: &[S]) -> (Vec<BoundaryRow<S>>, S) {
    let t_max = t_values.iter().fold(S::zero(), |a, &b| a.max(b));
    let reg = &e.reg;
    let rows: Vec<Vec<BoundaryRow<S>>> = grid
        .cubes
        .par_iter()
        .map(|c| {
            let g = (c.generation - grid.kappa_e) as usize;
            let sigma_q = e.measure_of(&c.members);
            let mut hits = Vec::new();
            let reach: Vec<S> = c
                .members
                .iter()
                .map(|&x| {
                    hits.clear();
                    reg.within_sample(x, t_max * c.side, true, &mut hits);
                    hits.iter()
                        .filter(|&&j| grid.cube_of[g][j] != c.id)
                        .map(|&j| reg.dist(x, j))
                        .fold(S::infinity(), |a, b| a.min(b))
                })
                .collect();
            t_values
                .iter()
                .map(|&t| {
                    let s: S = c.members.iter().zip(&reach).filter(|(_, d)| **d <= t * c.side).map(|(&x, _)| e.weights[x]).sum();
                    BoundaryRow { cube: c.id, generation: c.generation, t, ratio: s / sigma_q }
                })
                .collect()
        })
        .collect();
    let rows: Vec<BoundaryRow<S>> = rows.into_iter().flatten().collect();
    // fit log(mean ratio) against log t over t with mean ratio in (0, 1)
    let mut pts = Vec::new();
    for &t in t_values {
        let sel: Vec<S> = rows.iter().filter(|r| r.t == t).map(|r| r.ratio).collect();
        let mean = sel.iter().copied().sum::<S>() / S::of_usize(sel.len().max(1));
        if mean > S::zero() && mean < S::one() && t > S::zero() {
            pts.push((t.ln(), mean.ln()));
        }
    }
    (rows, fit_slope(&pts))
}

/// Least-squares slope of y against x (NaN with fewer than two points).
pub fn fit_slope<S: Scalar>(pts: &[(S, S)]) -> S {
    if pts.len() < 2 {
        return S::nan();
    }
    let k = S::of_usize(pts.len());
    let mx = pts.iter().map(|p| p.0).sum::<S>() / k;
    let my = pts.iter().map(|p| p.1).sum::<S>() / k;
    let sxy: S = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: S = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    sxy / sxx
}
