//! Finite quasi-metric spaces, their constants, and the regularized distance ρ_#.
//!
//! ρ_#(x,y) is the infimum over chains x = ξ₁, …, ξ_{N+1} = y of
//! (Σ ρ_sym(ξ_i, ξ_{i+1})^α)^{1/α}, with α = 1/log₂ C_ρ. On a finite cloud the
//! infimum is a shortest path in the complete graph with weights ρ_sym^α, and a
//! bottleneck path when α = ∞.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::index::KdTree;
use crate::scalar::{le_tol, Scalar};

// ---------------------------------------------------------------------------
// Points and ambient metrics
// ---------------------------------------------------------------------------

/// Flattened list of points in ℝ^dim.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSet<S> {
    pub dim: usize,
    pub data: Vec<S>,
}

impl<S: Scalar> PointSet<S> {
    pub fn new(dim: usize, data: Vec<S>) -> Result<Self> {
        if dim == 0 || !data.len().is_multiple_of(dim) {
            return Err(Error::InvalidInput(format!("{} coordinates do not split into dimension {dim}", data.len())));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite coordinate".into()));
        }
        Ok(PointSet { dim, data })
    }

    pub fn from_rows(rows: &[Vec<S>]) -> Result<Self> {
        let dim = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::InvalidInput("ragged point list".into()));
        }
        Self::new(dim, rows.concat())
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn point(&self, i: usize) -> &[S] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }
}

/// Closed-form metric on the ambient space.
///
/// Both variants are geodesic, so C_ρ = 2, C̃_ρ = 1, α = 1 and ρ_# = ρ on the
/// whole ambient space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Ambient<S> {
    Euclidean,
    /// Flat cylinder: axis 0 is periodic, canonical window `[-period/2, period/2)`.
    Cylinder { period: S },
}

impl<S: Scalar> Ambient<S> {
    #[inline]
    pub fn wrap(&self, v: S) -> S {
        match *self {
            Ambient::Euclidean => v,
            Ambient::Cylinder { period } => v - period * (v / period + S::of(0.5)).floor(),
        }
    }

    /// Displacement a − b, with the periodic component reduced to the shortest representative.
    #[inline]
    pub fn delta(&self, a: &[S], b: &[S], out: &mut [S]) {
        for ((o, x), y) in out.iter_mut().zip(a).zip(b) {
            *o = *x - *y;
        }
        if let Ambient::Cylinder { .. } = self {
            out[0] = self.wrap(out[0]);
        }
    }

    #[inline]
    pub fn dist(&self, a: &[S], b: &[S]) -> S {
        let mut s = S::zero();
        for (k, (x, y)) in a.iter().zip(b).enumerate() {
            let mut d = *x - *y;
            if k == 0 {
                d = self.wrap(d);
            }
            s += d * d;
        }
        s.sqrt()
    }

    /// Query points whose Euclidean neighbourhoods cover the metric neighbourhood of `q`.
    fn images(&self, q: &[S]) -> Vec<Vec<S>> {
        match *self {
            Ambient::Euclidean => vec![q.to_vec()],
            Ambient::Cylinder { period } => {
                let mut c = q.to_vec();
                c[0] = self.wrap(c[0]);
                let mut lo = c.clone();
                lo[0] -= period;
                let mut hi = c.clone();
                hi[0] += period;
                vec![c, lo, hi]
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Quasi-metric spaces
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
enum Source<S> {
    Matrix { n: usize, m: Vec<S> },
    Points { points: PointSet<S>, metric: Ambient<S> },
}

/// Finite point cloud with a quasi-distance.
#[derive(Debug, Clone)]
pub struct QuasiMetricSpace<S> {
    source: Source<S>,
}

fn validate_matrix<S: Scalar>(n: usize, m: &[S]) -> Result<()> {
    for i in 0..n {
        for j in 0..n {
            let v = m[i * n + j];
            if !v.is_finite() || v < S::zero() {
                return Err(Error::BadDistance { i, j, value: v.to_f64c() });
            }
            if i == j && v != S::zero() {
                return Err(Error::BadDistance { i, j, value: v.to_f64c() });
            }
            if i != j && v == S::zero() {
                return Err(Error::ZeroDistance { i, j });
            }
        }
    }
    Ok(())
}

impl<S: Scalar> QuasiMetricSpace<S> {
    /// Space given by an explicit row-major n×n matrix.
    pub fn from_matrix(n: usize, m: Vec<S>) -> Result<Self> {
        if m.len() != n * n || n == 0 {
            return Err(Error::InvalidInput(format!("matrix of {} entries is not {n}x{n}", m.len())));
        }
        validate_matrix(n, &m)?;
        Ok(QuasiMetricSpace { source: Source::Matrix { n, m } })
    }

    pub fn from_rows(rows: &[Vec<S>]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidInput("distance matrix is not square".into()));
        }
        Self::from_matrix(n, rows.concat())
    }

    /// Space given by coordinates and a closed-form ambient metric.
    pub fn from_points(points: PointSet<S>, metric: Ambient<S>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptySet);
        }
        let space = QuasiMetricSpace { source: Source::Points { points, metric } };
        let n = space.len();
        // coincident samples would violate positivity
        let pts = space.coordinates().unwrap();
        let tree = KdTree::new(pts.dim, &pts.data);
        let mut hits = Vec::new();
        for i in 0..n {
            hits.clear();
            tree.within_sq(pts.point(i), S::zero(), true, &mut hits);
            if let Some(&j) = hits.iter().find(|&&j| j != i) {
                return Err(Error::ZeroDistance { i: i.min(j), j: i.max(j) });
            }
        }
        Ok(space)
    }

    /// Space from coordinates and an arbitrary evaluator, materialized as a matrix.
    pub fn from_fn<F: Fn(&[S], &[S]) -> S>(points: &PointSet<S>, f: F) -> Result<Self> {
        let n = points.len();
        let mut m = vec![S::zero(); n * n];
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    m[i * n + j] = f(points.point(i), points.point(j));
                }
            }
        }
        Self::from_matrix(n, m)
    }

    pub fn len(&self) -> usize {
        match &self.source {
            Source::Matrix { n, .. } => *n,
            Source::Points { points, .. } => points.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn dist(&self, i: usize, j: usize) -> S {
        match &self.source {
            Source::Matrix { n, m } => m[i * n + j],
            Source::Points { points, metric } => metric.dist(points.point(i), points.point(j)),
        }
    }

    pub fn coordinates(&self) -> Option<&PointSet<S>> {
        match &self.source {
            Source::Points { points, .. } => Some(points),
            Source::Matrix { .. } => None,
        }
    }

    pub fn ambient(&self) -> Option<Ambient<S>> {
        match &self.source {
            Source::Points { metric, .. } => Some(*metric),
            Source::Matrix { .. } => None,
        }
    }

    /// Dense row-major distance matrix.
    pub fn matrix(&self) -> Vec<S> {
        match &self.source {
            Source::Matrix { m, .. } => m.clone(),
            Source::Points { .. } => {
                let n = self.len();
                let mut m = vec![S::zero(); n * n];
                m.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
                    for (j, v) in row.iter_mut().enumerate() {
                        *v = self.dist(i, j);
                    }
                });
                m
            }
        }
    }

    /// Parse `{ "points": [[..],..] }` (optionally with `"period"`) or `{ "matrix": [[..],..] }`.
    pub fn from_json(text: &str) -> Result<Self> {
        let doc: CloudDoc = serde_json::from_str(text).map_err(|e| Error::Json(e.to_string()))?;
        doc.into_space()
    }
}

/// JSON layout of a cloud; `weights` and `d` are used by custom ADR sets.
#[derive(Debug, Clone, Deserialize, Serialize)]
pub struct CloudDoc {
    #[serde(default)]
    pub points: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub matrix: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub period: Option<f64>,
    #[serde(default)]
    pub weights: Option<Vec<f64>>,
    #[serde(default)]
    pub d: Option<f64>,
}

impl CloudDoc {
    pub fn into_space<S: Scalar>(&self) -> Result<QuasiMetricSpace<S>> {
        let conv = |rows: &Vec<Vec<f64>>| -> Vec<Vec<S>> {
            rows.iter().map(|r| r.iter().map(|&v| S::of(v)).collect()).collect()
        };
        match (&self.points, &self.matrix) {
            (Some(p), None) => {
                let metric = match self.period {
                    Some(period) => Ambient::Cylinder { period: S::of(period) },
                    None => Ambient::Euclidean,
                };
                QuasiMetricSpace::from_points(PointSet::from_rows(&conv(p))?, metric)
            }
            (None, Some(m)) => QuasiMetricSpace::from_rows(&conv(m)),
            _ => Err(Error::Json("expected exactly one of `points` or `matrix`".into())),
        }
    }
}

// ---------------------------------------------------------------------------
// Constants
// ---------------------------------------------------------------------------

/// α_ρ, with +∞ kept as a distinct value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Alpha<S> {
    Finite(S),
    Infinite,
}

impl<S: Scalar> Alpha<S> {
    pub fn from_c_rho(c: S) -> Self {
        if c <= S::one() {
            Alpha::Infinite
        } else {
            Alpha::Finite(S::one() / c.log2())
        }
    }

    pub fn value(&self) -> S {
        match *self {
            Alpha::Finite(a) => a,
            Alpha::Infinite => S::infinity(),
        }
    }

    pub fn is_infinite(&self) -> bool {
        matches!(self, Alpha::Infinite)
    }
}

impl<S: Scalar> Serialize for Alpha<S> {
    fn serialize<Z: Serializer>(&self, s: Z) -> std::result::Result<Z::Ok, Z::Error> {
        match self {
            Alpha::Finite(a) => s.serialize_f64(a.to_f64c()),
            Alpha::Infinite => s.serialize_str("infinity"),
        }
    }
}

/// Measured (C_ρ, C̃_ρ, α_ρ).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Constants<S: Scalar> {
    pub c_rho: S,
    pub c_tilde: S,
    pub alpha: Alpha<S>,
}

impl<S: Scalar> Constants<S> {
    /// Constants of a geodesic ambient metric.
    pub fn geodesic() -> Self {
        Constants { c_rho: S::of(2.0), c_tilde: S::one(), alpha: Alpha::Finite(S::one()) }
    }
}

fn min_max_ratio<S: Scalar>(n: usize, m: &[S]) -> S {
    // For each source x: t[y] = min_z max(ρ(x,z), ρ(z,y)); z = x or z = y only
    // contribute the ratio 1, which is the floor of C_ρ anyway.
    (0..n)
        .into_par_iter()
        .map(|x| {
            let row = &m[x * n..(x + 1) * n];
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_unstable_by(|&a, &b| row[a].partial_cmp(&row[b]).unwrap().then(a.cmp(&b)));
            let mut t: Vec<S> = row.to_vec();
            let mut t_max = t.iter().fold(S::zero(), |a, &b| a.max(b));
            for (step, &z) in order.iter().enumerate() {
                let az = row[z];
                if az >= t_max {
                    break;
                }
                let rz = &m[z * n..(z + 1) * n];
                for (ty, &b) in t.iter_mut().zip(rz) {
                    let v = if az > b { az } else { b };
                    *ty = if v < *ty { v } else { *ty };
                }
                if step % 32 == 31 {
                    t_max = t.iter().fold(S::zero(), |a, &b| a.max(b));
                }
            }
            let mut c = S::one();
            for y in 0..n {
                if y != x && t[y] > S::zero() {
                    c = c.max(row[y] / t[y]);
                }
            }
            c
        })
        .reduce(S::one, |a, b| a.max(b))
}

/// Measure C_ρ, C̃_ρ and α_ρ by exact O(n³) scan.
pub fn measure_constants<S: Scalar>(space: &QuasiMetricSpace<S>) -> Result<Constants<S>> {
    let n = space.len();
    if n < 2 {
        return Err(Error::OutOfRange("measure_constants needs at least 2 points".into()));
    }
    let m = space.matrix();
    validate_matrix(n, &m)?;
    Ok(constants_of_matrix(n, &m))
}

fn constants_of_matrix<S: Scalar>(n: usize, m: &[S]) -> Constants<S> {
    let mut c_tilde = S::one();
    for i in 0..n {
        for j in 0..n {
            if i != j {
                c_tilde = c_tilde.max(m[j * n + i] / m[i * n + j]);
            }
        }
    }
    let c_rho = min_max_ratio(n, m);
    Constants { c_rho, c_tilde, alpha: Alpha::from_c_rho(c_rho) }
}

/// ρ_sym(x,y) = max(ρ(x,y), ρ(y,x)).
pub fn symmetrize<S: Scalar>(n: usize, m: &[S]) -> Vec<S> {
    let mut s = m.to_vec();
    for i in 0..n {
        for j in 0..i {
            let v = m[i * n + j].max(m[j * n + i]);
            s[i * n + j] = v;
            s[j * n + i] = v;
        }
    }
    s
}

// ---------------------------------------------------------------------------
// Regularization
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
enum Sharp<S> {
    Dense { n: usize, m: Vec<S> },
    Ambient { points: PointSet<S>, metric: Ambient<S>, tree: KdTree<S> },
}

/// The regularized quasi-distance ρ_# on a finite cloud.
///
/// Dense clouds carry the full n×n matrix. Clouds sitting in a geodesic
/// ambient space use the closed form ρ_# = ρ, which also extends to ambient
/// points off the cloud.
#[derive(Debug, Clone)]
pub struct RegularizedMetric<S: Scalar> {
    pub constants: Constants<S>,
    sharp: Sharp<S>,
}

fn floyd_sum<S: Scalar>(n: usize, d: &mut [S]) {
    let mut rk = vec![S::zero(); n];
    for k in 0..n {
        rk.copy_from_slice(&d[k * n..(k + 1) * n]);
        d.par_chunks_mut(n).for_each(|row| {
            let dik = row[k];
            for (v, &b) in row.iter_mut().zip(&rk) {
                let c = dik + b;
                *v = if c < *v { c } else { *v };
            }
        });
    }
}

fn floyd_minimax<S: Scalar>(n: usize, d: &mut [S]) {
    let mut rk = vec![S::zero(); n];
    for k in 0..n {
        rk.copy_from_slice(&d[k * n..(k + 1) * n]);
        d.par_chunks_mut(n).for_each(|row| {
            let dik = row[k];
            for (v, &b) in row.iter_mut().zip(&rk) {
                let c = if dik > b { dik } else { b };
                *v = if c < *v { c } else { *v };
            }
        });
    }
}

fn floyd_logsum<S: Scalar>(n: usize, d: &mut [S]) {
    // d holds α·log(ρ); path combination is log-sum-exp
    for k in 0..n {
        let rk: Vec<S> = d[k * n..(k + 1) * n].to_vec();
        d.par_chunks_mut(n).for_each(|row| {
            let dik = row[k];
            for (v, &b) in row.iter_mut().zip(&rk) {
                let (hi, lo) = if dik > b { (dik, b) } else { (b, dik) };
                let c = if lo == S::neg_infinity() { hi } else { hi + (lo - hi).exp().ln_1p() };
                if c < *v {
                    *v = c;
                }
            }
        });
    }
}

/// Compute ρ_# on the cloud by all-pairs shortest paths in snowflaked weights.
pub fn regularize<S: Scalar>(space: &QuasiMetricSpace<S>) -> Result<RegularizedMetric<S>> {
    let n = space.len();
    let constants = if n < 2 {
        Constants { c_rho: S::one(), c_tilde: S::one(), alpha: Alpha::Infinite }
    } else {
        measure_constants(space)?
    };
    let sym = symmetrize(n, &space.matrix());
    let m = sharp_from_sym(n, sym, constants.alpha);
    Ok(RegularizedMetric { constants, sharp: Sharp::Dense { n, m } })
}

fn sharp_from_sym<S: Scalar>(n: usize, sym: Vec<S>, alpha: Alpha<S>) -> Vec<S> {
    let mut d = sym;
    match alpha {
        Alpha::Infinite => floyd_minimax(n, &mut d),
        Alpha::Finite(a) => {
            let top = d.iter().fold(S::zero(), |x, &y| x.max(y));
            if top == S::zero() {
                return d;
            }
            let low = d.iter().filter(|v| **v > S::zero()).fold(top, |x, &y| x.min(y));
            // stay in the linear domain unless the smallest weight would underflow
            let floor = S::min_positive_value().powf(S::of(0.8));
            if (low / top).powf(a) > floor {
                for v in d.iter_mut() {
                    *v = (*v / top).powf(a);
                }
                floyd_sum(n, &mut d);
                for v in d.iter_mut() {
                    *v = top * v.powf(S::one() / a);
                }
            } else {
                for v in d.iter_mut() {
                    *v = if *v == S::zero() { S::neg_infinity() } else { a * (*v / top).ln() };
                }
                floyd_logsum(n, &mut d);
                for v in d.iter_mut() {
                    *v = if *v == S::neg_infinity() { S::zero() } else { top * (*v / a).exp() };
                }
            }
        }
    }
    for i in 0..n {
        d[i * n + i] = S::zero();
        for j in 0..i {
            // identical path sets; remove roundoff asymmetry
            let v = d[i * n + j].min(d[j * n + i]);
            d[i * n + j] = v;
            d[j * n + i] = v;
        }
    }
    d
}

impl<S: Scalar> RegularizedMetric<S> {
    /// Closed form for a cloud in a geodesic ambient space: ρ_# = ρ.
    pub fn ambient(points: PointSet<S>, metric: Ambient<S>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptySet);
        }
        if let Ambient::Cylinder { period } = metric {
            let half = period / S::of(2.0);
            if points.data.chunks(points.dim).any(|p| p[0] < -half || p[0] >= half) {
                return Err(Error::InvalidInput("cylinder points must lie in [-period/2, period/2)".into()));
            }
        }
        let tree = KdTree::new(points.dim, &points.data);
        Ok(RegularizedMetric { constants: Constants::geodesic(), sharp: Sharp::Ambient { points, metric, tree } })
    }

    /// Regularization of a cloud; geodesic ambient clouds use the closed form.
    pub fn of_space(space: &QuasiMetricSpace<S>) -> Result<Self> {
        match (space.coordinates(), space.ambient()) {
            (Some(p), Some(metric)) => Self::ambient(p.clone(), metric),
            _ => regularize(space),
        }
    }

    /// Dense regularized metric from a precomputed symmetric matrix (no checks beyond shape).
    pub fn from_dense(constants: Constants<S>, n: usize, m: Vec<S>) -> Result<Self> {
        if m.len() != n * n {
            return Err(Error::InvalidInput("matrix shape".into()));
        }
        Ok(RegularizedMetric { constants, sharp: Sharp::Dense { n, m } })
    }

    pub fn len(&self) -> usize {
        match &self.sharp {
            Sharp::Dense { n, .. } => *n,
            Sharp::Ambient { points, .. } => points.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn c_rho(&self) -> S {
        self.constants.c_rho
    }

    pub fn alpha(&self) -> Alpha<S> {
        self.constants.alpha
    }

    /// Exponent β = min(1, α) for which (ρ_#)^β obeys the triangle inequality.
    pub fn triangle_exponent(&self) -> S {
        self.alpha().value().min(S::one())
    }

    #[inline]
    pub fn dist(&self, i: usize, j: usize) -> S {
        match &self.sharp {
            Sharp::Dense { n, m } => m[i * n + j],
            Sharp::Ambient { points, metric, .. } => metric.dist(points.point(i), points.point(j)),
        }
    }

    pub fn coordinates(&self) -> Option<&PointSet<S>> {
        match &self.sharp {
            Sharp::Ambient { points, .. } => Some(points),
            Sharp::Dense { .. } => None,
        }
    }

    pub fn ambient_metric(&self) -> Option<Ambient<S>> {
        match &self.sharp {
            Sharp::Ambient { metric, .. } => Some(*metric),
            Sharp::Dense { .. } => None,
        }
    }

    pub fn is_dense(&self) -> bool {
        matches!(self.sharp, Sharp::Dense { .. })
    }

    /// Materialized matrix of ρ_# on the cloud.
    pub fn matrix(&self) -> Vec<S> {
        match &self.sharp {
            Sharp::Dense { m, .. } => m.clone(),
            Sharp::Ambient { .. } => {
                let n = self.len();
                let mut m = vec![S::zero(); n * n];
                m.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
                    for (j, v) in row.iter_mut().enumerate() {
                        *v = self.dist(i, j);
                    }
                });
                m
            }
        }
    }

    /// Sample indices j with ρ_#(i, j) < r (or ≤ r), appended to `out`.
    pub fn within_sample(&self, i: usize, r: S, inclusive: bool, out: &mut Vec<usize>) {
        match &self.sharp {
            Sharp::Dense { n, m } => {
                let row = &m[i * n..(i + 1) * n];
                out.extend((0..*n).filter(|&j| row[j] < r || (inclusive && row[j] <= r)));
            }
            Sharp::Ambient { points, .. } => self.within_point(points.point(i), r, inclusive, out),
        }
    }

    /// Sample indices within distance r of an ambient point (ambient clouds only).
    pub fn within_point(&self, q: &[S], r: S, inclusive: bool, out: &mut Vec<usize>) {
        let Sharp::Ambient { metric, tree, .. } = &self.sharp else {
            panic!("within_point requires an ambient metric");
        };
        let start = out.len();
        for img in metric.images(q) {
            tree.within_sq(&img, r * r, inclusive, out);
        }
        if matches!(metric, Ambient::Cylinder { .. }) {
            out[start..].sort_unstable();
            let mut keep = start;
            for k in start..out.len() {
                if k == start || out[k] != out[keep - 1] {
                    out[keep] = out[k];
                    keep += 1;
                }
            }
            out.truncate(keep);
        }
    }

    /// Nearest sample to an ambient point: (distance, index), lowest index on ties.
    pub fn nearest_point(&self, q: &[S]) -> (S, usize) {
        self.nearest_point_where(q, |_| true).expect("nonempty cloud")
    }

    pub fn nearest_point_where<F: Fn(usize) -> bool>(&self, q: &[S], keep: F) -> Option<(S, usize)> {
        let Sharp::Ambient { metric, tree, .. } = &self.sharp else {
            panic!("nearest_point requires an ambient metric");
        };
        let mut best: Option<(S, usize)> = None;
        for img in metric.images(q) {
            if let Some((d2, j)) = tree.nearest_where_sq(&img, &keep) {
                let better = match best {
                    None => true,
                    Some((bd, bj)) => d2 < bd || (d2 == bd && j < bj),
                };
                if better {
                    best = Some((d2, j));
                }
            }
        }
        best.map(|(d2, j)| (d2.sqrt(), j))
    }

    /// ρ_# between an ambient point and sample j (ambient clouds only).
    pub fn dist_point(&self, q: &[S], j: usize) -> S {
        match &self.sharp {
            Sharp::Ambient { points, metric, .. } => metric.dist(q, points.point(j)),
            Sharp::Dense { .. } => panic!("dist_point requires an ambient metric"),
        }
    }

    /// Smallest positive distance from each sample to another sample.
    pub fn min_spacing(&self) -> S {
        let n = self.len();
        if n < 2 {
            return S::zero();
        }
        match &self.sharp {
            Sharp::Dense { m, .. } => m.iter().filter(|v| **v > S::zero()).fold(S::infinity(), |a, &b| a.min(b)),
            Sharp::Ambient { points, .. } => (0..n)
                .map(|i| {
                    self.nearest_point_where(points.point(i), |j| j != i).map_or(S::infinity(), |p| p.0)
                })
                .fold(S::infinity(), |a, b| a.min(b)),
        }
    }

    /// diam_{ρ_#} of the cloud.
    pub fn diameter(&self) -> S {
        let n = self.len();
        match &self.sharp {
            Sharp::Dense { m, .. } => m.iter().fold(S::zero(), |a, &b| a.max(b)),
            Sharp::Ambient { .. } => (0..n)
                .into_par_iter()
                .map(|i| (0..n).map(|j| self.dist(i, j)).fold(S::zero(), |a, b| a.max(b)))
                .reduce(S::zero, |a, b| a.max(b)),
        }
    }

    /// Check C_ρ^{-2} ρ ≤ ρ_# ≤ C̃_ρ ρ over all pairs.
    pub fn check_sandwich(&self, space: &QuasiMetricSpace<S>) -> Result<()> {
        let n = self.len();
        let c2 = self.constants.c_rho * self.constants.c_rho;
        for i in 0..n {
            for j in 0..n {
                let (r, s) = (space.dist(i, j), self.dist(i, j));
                if !le_tol(r / c2, s) || !le_tol(s, self.constants.c_tilde * r) {
                    return Err(Error::invariant("sandwich", format!("pair ({i},{j}): rho={r}, rho_sharp={s}")));
                }
            }
        }
        Ok(())
    }

    /// Exhaustive triangle check for (ρ_#)^β; β = ∞ checks the ultrametric inequality.
    pub fn check_triangle(&self, beta: S) -> Result<()> {
        let n = self.len();
        let m = self.matrix();
        let ultra = beta.is_infinite();
        let p: Vec<S> = if ultra { m.clone() } else { m.iter().map(|v| v.powf(beta)).collect() };
        for x in 0..n {
            for z in 0..n {
                let pxz = p[x * n + z];
                for y in 0..n {
                    let rhs = if ultra { pxz.max(p[z * n + y]) } else { pxz + p[z * n + y] };
                    if !le_tol(p[x * n + y], rhs) {
                        return Err(Error::invariant(
                            "triangle",
                            format!("triple ({x},{z},{y}) with beta={beta}"),
                        ));
                    }
                }
            }
        }
        Ok(())
    }
}

/// δ_E(x) = min over e ∈ E of ρ_#(x, e).
pub fn dist_to_set<S: Scalar>(reg: &RegularizedMetric<S>, x: usize, set: &[usize]) -> Result<S> {
    if set.is_empty() {
        return Err(Error::EmptySet);
    }
    Ok(set.iter().map(|&e| reg.dist(x, e)).fold(S::infinity(), |a, b| a.min(b)))
}

const HOLDER_FULL_SCAN: usize = 60;
const HOLDER_SAMPLES: usize = 2_000_000;
const HOLDER_SEED: u64 = 0x5eed_0001;

/// Largest ratio |ρ_#(x,y) − ρ_#(z,w)| / RHS over quadruples, where
/// RHS = (1/β)·max(ρ_#(x,y)^{1−β}, ρ_#(z,w)^{1−β})·(ρ_#(x,z)^β + ρ_#(y,w)^β).
pub fn holder_defect<S: Scalar>(reg: &RegularizedMetric<S>, beta: S) -> Result<S> {
    let a = reg.alpha().value();
    if !(beta > S::zero() && beta.is_finite() && le_tol(beta, a)) {
        return Err(Error::OutOfRange(format!("beta={beta} must lie in (0, alpha={a}]")));
    }
    let n = reg.len();
    let m = reg.matrix();
    let one = S::one();
    let quad = |x: usize, y: usize, z: usize, w: usize| -> S {
        if beta >= one && (x == y || z == w) {
            return S::zero();
        }
        let (dxy, dzw) = (m[x * n + y], m[z * n + w]);
        let lhs = (dxy - dzw).abs();
        if lhs == S::zero() {
            return S::zero();
        }
        let e = one - beta;
        let f = |v: S| if v == S::zero() && e <= S::zero() { S::infinity() } else { v.powf(e) };
        let rhs = f(dxy).max(f(dzw)) * (m[x * n + z].powf(beta) + m[y * n + w].powf(beta)) / beta;
        if rhs == S::zero() {
            S::infinity()
        } else {
            lhs / rhs
        }
    };
    let worst = if n <= HOLDER_FULL_SCAN {
        (0..n)
            .into_par_iter()
            .map(|x| {
                let mut w = S::zero();
                for y in 0..n {
                    for z in 0..n {
                        for v in 0..n {
                            w = w.max(quad(x, y, z, v));
                        }
                    }
                }
                w
            })
            .reduce(S::zero, |a, b| a.max(b))
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(HOLDER_SEED);
        let mut w = S::zero();
        for _ in 0..HOLDER_SAMPLES {
            let q: [usize; 4] = std::array::from_fn(|_| rng.gen_range(0..n));
            w = w.max(quad(q[0], q[1], q[2], q[3]));
        }
        w
    };
    Ok(worst)
}
