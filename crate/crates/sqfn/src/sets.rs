//! Sampled ADR sets, ambient quadrature grids for X∖E, and geometric diagnostics.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qspace::{Ambient, CloudDoc, PointSet, QuasiMetricSpace, RegularizedMetric};
use crate::scalar::Scalar;

/// Which generator produced a set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Generator {
    Graph,
    PeriodicLine,
    Circle,
    Koch,
    Cantor4,
    Custom,
}

pub type LipFn<S> = Arc<dyn Fn(S) -> S + Send + Sync>;

/// Samples of E with quadrature weights approximating σ.
#[derive(Clone)]
pub struct AdrSet<S: Scalar> {
    pub cloud: QuasiMetricSpace<S>,
    pub reg: RegularizedMetric<S>,
    pub weights: Vec<S>,
    pub dim_d: S,
    pub generator: Generator,
    pub lip_function: Option<LipFn<S>>,
    /// Curve parameter of each sample (graph abscissa, arc angle, …) when one exists.
    pub param: Option<Vec<S>>,
    /// Closed-form σ(E) when the generator has one.
    pub expected_total: Option<S>,
}

impl<S: Scalar> fmt::Debug for AdrSet<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("AdrSet")
            .field("n", &self.len())
            .field("dim_d", &self.dim_d)
            .field("generator", &self.generator)
            .finish()
    }
}

impl<S: Scalar> AdrSet<S> {
    fn assemble(
        points: PointSet<S>,
        metric: Ambient<S>,
        weights: Vec<S>,
        dim_d: S,
        generator: Generator,
        expected_total: Option<S>,
    ) -> Result<Self> {
        if weights.iter().any(|w| !(*w > S::zero()) || !w.is_finite()) {
            return Err(Error::invariant("weights", "all weights must be positive and finite"));
        }
        let cloud = QuasiMetricSpace::from_points(points.clone(), metric)?;
        let reg = RegularizedMetric::ambient(points, metric)?;
        Ok(AdrSet { cloud, reg, weights, dim_d, generator, lip_function: None, param: None, expected_total })
    }

    /// Custom set from the qspace JSON schema plus `weights` and `d`.
    pub fn from_doc(doc: &CloudDoc) -> Result<Self> {
        let cloud: QuasiMetricSpace<S> = doc.into_space()?;
        let weights: Vec<S> = doc
            .weights
            .as_ref()
            .ok_or_else(|| Error::Json("custom set needs `weights`".into()))?
            .iter()
            .map(|&w| S::of(w))
            .collect();
        let d = S::of(doc.d.ok_or_else(|| Error::Json("custom set needs `d`".into()))?);
        if weights.len() != cloud.len() {
            return Err(Error::InvalidInput("one weight per point required".into()));
        }
        if weights.iter().any(|w| !(*w > S::zero())) {
            return Err(Error::invariant("weights", "all weights must be positive"));
        }
        let reg = RegularizedMetric::of_space(&cloud)?;
        Ok(AdrSet {
            cloud,
            reg,
            weights,
            dim_d: d,
            generator: Generator::Custom,
            lip_function: None,
            param: None,
            expected_total: None,
        })
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn points(&self) -> &PointSet<S> {
        self.reg.coordinates().expect("set has coordinates")
    }

    pub fn point(&self, i: usize) -> &[S] {
        self.points().point(i)
    }

    pub fn total_weight(&self) -> S {
        self.weights.iter().copied().sum()
    }

    /// σ of an index set.
    pub fn measure_of(&self, idx: &[usize]) -> S {
        idx.iter().map(|&i| self.weights[i]).sum()
    }

    pub fn min_spacing(&self) -> S {
        self.reg.min_spacing()
    }

    pub fn diameter(&self) -> S {
        match self.generator {
            Generator::Circle => {
                // antipodal pairs may be absent at odd counts; the scan is exact
                self.reg.diameter()
            }
            _ => self.reg.diameter(),
        }
    }

    /// σ(B_{ρ_#}(x_i, r) ∩ E) with the open ball.
    pub fn ball_measure(&self, i: usize, r: S) -> S {
        let mut hits = Vec::new();
        self.reg.within_sample(i, r, false, &mut hits);
        self.measure_of(&hits)
    }

    /// Check the weight total against the generator's closed form.
    pub fn check_total(&self) -> Result<()> {
        if let Some(t) = self.expected_total {
            let got = self.total_weight();
            if ((got - t) / t).abs() > S::of(1e-6) {
                return Err(Error::invariant("total weight", format!("{got} vs closed form {t}")));
            }
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Generators
// ---------------------------------------------------------------------------

/// Graph {(x, A(x))} over a uniform midpoint grid of [−w, w].
pub fn make_lipschitz_graph<S, F>(a: F, lip_m: S, half_width: S, n_samples: usize) -> Result<AdrSet<S>>
where
    S: Scalar,
    F: Fn(S) -> S + Send + Sync + 'static,
{
    if n_samples < 16 {
        return Err(Error::OutOfRange(format!("n_samples = {n_samples} < 16")));
    }
    if !(half_width > S::zero()) || !(lip_m >= S::zero()) {
        return Err(Error::OutOfRange("half_width must be positive and lip_M nonnegative".into()));
    }
    let dx = S::of(2.0) * half_width / S::of_usize(n_samples);
    let xs: Vec<S> = (0..n_samples).map(|i| -half_width + (S::of_usize(i) + S::of(0.5)) * dx).collect();
    let ys: Vec<S> = xs.iter().map(|&x| a(x)).collect();
    if ys.iter().any(|y| !y.is_finite()) {
        return Err(Error::InvalidInput("graph function is not finite on the grid".into()));
    }
    // spot-check the Lipschitz bound on consecutive and random pairs
    let slack = |dx: S| lip_m * dx * (S::one() + S::of(1e-9)) + S::of(1e-12);
    let mut rng = ChaCha8Rng::seed_from_u64(0x11b);
    let mut pairs: Vec<(usize, usize)> = (1..n_samples).map(|i| (i - 1, i)).collect();
    pairs.extend((0..1000).map(|_| (rng.gen_range(0..n_samples), rng.gen_range(0..n_samples))));
    for (i, j) in pairs {
        if (ys[i] - ys[j]).abs() > slack((xs[i] - xs[j]).abs()) {
            return Err(Error::InvalidInput(format!(
                "Lipschitz spot-check failed between x={} and x={}",
                xs[i], xs[j]
            )));
        }
    }
    let h = dx / S::of(2.0);
    let weights: Vec<S> = xs
        .iter()
        .map(|&x| {
            let slope = (a(x + h) - a(x - h)) / (S::of(2.0) * h);
            (S::one() + slope * slope).sqrt() * dx
        })
        .collect();
    let mut data = Vec::with_capacity(2 * n_samples);
    for (x, y) in xs.iter().zip(&ys) {
        data.push(*x);
        data.push(*y);
    }
    let flat = ys.iter().all(|y| *y == S::zero());
    let expected = if flat { Some(S::of(2.0) * half_width) } else { None };
    let mut set = AdrSet::assemble(PointSet::new(2, data)?, Ambient::Euclidean, weights, S::one(), Generator::Graph, expected)?;
    set.lip_function = Some(Arc::new(a));
    set.param = Some(xs);
    Ok(set)
}

/// Flat segment [−w, w]×{0}.
pub fn make_flat_segment<S: Scalar>(half_width: S, n_samples: usize) -> Result<AdrSet<S>> {
    make_lipschitz_graph(|_| S::zero(), S::zero(), half_width, n_samples)
}

/// The line ℝ×{0} on the flat cylinder of the given period (a hyperplane without endpoints).
pub fn make_periodic_line<S: Scalar>(period: S, n_samples: usize) -> Result<AdrSet<S>> {
    if n_samples < 16 || !(period > S::zero()) {
        return Err(Error::OutOfRange("periodic line needs period > 0 and n_samples >= 16".into()));
    }
    let dx = period / S::of_usize(n_samples);
    let half = period / S::of(2.0);
    let xs: Vec<S> = (0..n_samples).map(|i| -half + (S::of_usize(i) + S::of(0.5)) * dx).collect();
    let data: Vec<S> = xs.iter().flat_map(|&x| [x, S::zero()]).collect();
    let mut set = AdrSet::assemble(
        PointSet::new(2, data)?,
        Ambient::Cylinder { period },
        vec![dx; n_samples],
        S::one(),
        Generator::PeriodicLine,
        Some(period),
    )?;
    set.param = Some(xs);
    Ok(set)
}

/// Equispaced samples of the circle of the given radius.
pub fn make_circle<S: Scalar>(radius: S, n_samples: usize) -> Result<AdrSet<S>> {
    if !(radius > S::zero()) {
        return Err(Error::OutOfRange("radius must be positive".into()));
    }
    if n_samples < 4 {
        return Err(Error::OutOfRange("n_samples must be at least 4".into()));
    }
    let tau = S::of(2.0) * S::PI();
    let angles: Vec<S> = (0..n_samples).map(|i| tau * S::of_usize(i) / S::of_usize(n_samples)).collect();
    let data: Vec<S> = angles.iter().flat_map(|&t| [radius * t.cos(), radius * t.sin()]).collect();
    let w = tau * radius / S::of_usize(n_samples);
    let mut set = AdrSet::assemble(
        PointSet::new(2, data)?,
        Ambient::Euclidean,
        vec![w; n_samples],
        S::one(),
        Generator::Circle,
        Some(tau * radius),
    )?;
    set.param = Some(angles);
    Ok(set)
}

pub const KOCH_MAX_GENERATION: usize = 9;
pub const CANTOR_MAX_GENERATION: usize = 8;

/// Midpoints of the 4^g segments of the Koch curve over the unit base segment.
pub fn make_koch<S: Scalar>(generation: usize) -> Result<AdrSet<S>> {
    if generation > KOCH_MAX_GENERATION {
        return Err(Error::OutOfRange(format!("Koch generation {generation} > {KOCH_MAX_GENERATION}")));
    }
    let (c, s) = (S::of(0.5), S::of(3f64.sqrt() / 2.0));
    let third = S::one() / S::of(3.0);
    let mut segs: Vec<[S; 4]> = vec![[S::zero(), S::zero(), S::one(), S::zero()]];
    for _ in 0..generation {
        let mut next = Vec::with_capacity(segs.len() * 4);
        for &[x0, y0, x1, y1] in &segs {
            let (vx, vy) = ((x1 - x0) * third, (y1 - y0) * third);
            let a = (x0 + vx, y0 + vy);
            let b = (x0 + S::of(2.0) * vx, y0 + S::of(2.0) * vy);
            let apex = (a.0 + c * vx - s * vy, a.1 + s * vx + c * vy);
            next.push([x0, y0, a.0, a.1]);
            next.push([a.0, a.1, apex.0, apex.1]);
            next.push([apex.0, apex.1, b.0, b.1]);
            next.push([b.0, b.1, x1, y1]);
        }
        segs = next;
    }
    let half = S::of(0.5);
    let data: Vec<S> = segs.iter().flat_map(|q| [(q[0] + q[2]) * half, (q[1] + q[3]) * half]).collect();
    let n = segs.len();
    let d = S::of(4f64.ln() / 3f64.ln());
    AdrSet::assemble(PointSet::new(2, data)?, Ambient::Euclidean, vec![S::one() / S::of_usize(n); n], d, Generator::Koch, Some(S::one()))
}

/// Cell centers of the planar four-corner Cantor construction (ratio 1/4).
pub fn make_four_corners<S: Scalar>(generation: usize) -> Result<AdrSet<S>> {
    if generation > CANTOR_MAX_GENERATION {
        return Err(Error::OutOfRange(format!("Cantor generation {generation} > {CANTOR_MAX_GENERATION}")));
    }
    let mut cells: Vec<(S, S, S)> = vec![(S::zero(), S::zero(), S::one())];
    for _ in 0..generation {
        let mut next = Vec::with_capacity(cells.len() * 4);
        for &(x, y, s) in &cells {
            let t = s / S::of(4.0);
            let far = s - t;
            next.push((x, y, t));
            next.push((x + far, y, t));
            next.push((x, y + far, t));
            next.push((x + far, y + far, t));
        }
        cells = next;
    }
    let half = S::of(0.5);
    let data: Vec<S> = cells.iter().flat_map(|&(x, y, s)| [x + s * half, y + s * half]).collect();
    let n = cells.len();
    AdrSet::assemble(PointSet::new(2, data)?, Ambient::Euclidean, vec![S::one() / S::of_usize(n); n], S::one(), Generator::Cantor4, Some(S::one()))
}

// ---------------------------------------------------------------------------
// Ambient grid
// ---------------------------------------------------------------------------

/// Axis-aligned box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Region<S> {
    pub lo: Vec<S>,
    pub hi: Vec<S>,
}

impl<S: Scalar> Region<S> {
    pub fn square(half: S) -> Self {
        Region { lo: vec![-half, -half], hi: vec![half, half] }
    }

    pub fn volume(&self) -> S {
        self.lo.iter().zip(&self.hi).map(|(a, b)| *b - *a).fold(S::one(), |p, v| p * v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridOptions<S> {
    pub max_cell: S,
    pub refine_near_e: bool,
    /// Smallest diameter that may still be split near E; defaults to twice the sample spacing.
    pub min_cell: Option<S>,
}

/// Quadrature cells for X∖E.
#[derive(Debug, Clone)]
pub struct AmbientGrid<S> {
    pub centers: PointSet<S>,
    pub measure: Vec<S>,
    pub diam: Vec<S>,
    pub delta: Vec<S>,
    /// Nearest sample of E to each center.
    pub nearest: Vec<usize>,
    pub ambient_dim_m: S,
    /// μ of cells dropped because δ_E(center) ≤ cell diameter.
    pub discarded_measure: S,
    pub min_cell: S,
}

impl<S: Scalar> AmbientGrid<S> {
    pub fn len(&self) -> usize {
        self.measure.len()
    }

    pub fn is_empty(&self) -> bool {
        self.measure.is_empty()
    }

    pub fn center(&self, c: usize) -> &[S] {
        self.centers.point(c)
    }

    /// Σ_cells g(δ_E)·μ.
    pub fn integrate_delta<F: Fn(S) -> S>(&self, g: F) -> S {
        self.delta.iter().zip(&self.measure).map(|(d, m)| g(*d) * *m).sum()
    }
}

pub fn make_ambient_grid<S: Scalar>(e: &AdrSet<S>, region: &Region<S>, max_cell: S, refine_near_e: bool) -> Result<AmbientGrid<S>> {
    make_ambient_grid_with(e, region, GridOptions { max_cell, refine_near_e, min_cell: None })
}

/// Dyadic subdivision of `region`, graded by δ_E when `refine_near_e` is set.
pub fn make_ambient_grid_with<S: Scalar>(e: &AdrSet<S>, region: &Region<S>, opts: GridOptions<S>) -> Result<AmbientGrid<S>> {
    let dim = e.points().dim;
    if region.lo.len() != dim || region.hi.len() != dim {
        return Err(Error::InvalidInput("region dimension differs from the set".into()));
    }
    if !(opts.max_cell > S::zero()) {
        return Err(Error::OutOfRange("max_cell must be positive".into()));
    }
    let pts = e.points();
    for i in 0..e.len() {
        for (k, v) in pts.point(i).iter().enumerate() {
            if *v < region.lo[k] || *v > region.hi[k] {
                return Err(Error::InvalidInput("region does not contain the set".into()));
            }
        }
    }
    if let Ambient::Cylinder { period } = e.reg.ambient_metric().unwrap_or(Ambient::Euclidean) {
        let half = period / S::of(2.0);
        if region.lo[0] != -half || region.hi[0] != half {
            return Err(Error::InvalidInput("cylinder region must span exactly one period on axis 0".into()));
        }
    }
    let min_cell = opts.min_cell.unwrap_or_else(|| S::of(2.0) * e.min_spacing());
    let two = S::of(2.0);

    struct Out<S> {
        centers: Vec<S>,
        measure: Vec<S>,
        diam: Vec<S>,
        delta: Vec<S>,
        nearest: Vec<usize>,
        discarded: S,
    }
    let mut out = Out { centers: vec![], measure: vec![], diam: vec![], delta: vec![], nearest: vec![], discarded: S::zero() };
    let mut stack: Vec<(Vec<S>, Vec<S>)> = vec![(region.lo.clone(), region.hi.clone())];
    while let Some((lo, hi)) = stack.pop() {
        let center: Vec<S> = lo.iter().zip(&hi).map(|(a, b)| (*a + *b) / two).collect();
        let diam = lo.iter().zip(&hi).map(|(a, b)| (*b - *a) * (*b - *a)).sum::<S>().sqrt();
        let vol = lo.iter().zip(&hi).map(|(a, b)| *b - *a).fold(S::one(), |p, v| p * v);
        let (delta, near) = e.reg.nearest_point(&center);
        let split = if delta <= diam {
            opts.refine_near_e && diam > min_cell
        } else {
            diam > opts.max_cell || (opts.refine_near_e && diam > delta / two && diam > min_cell)
        };
        if split {
            for mask in 0..(1usize << dim) {
                let mut clo = lo.clone();
                let mut chi = hi.clone();
                for k in 0..dim {
                    if mask >> k & 1 == 1 {
                        clo[k] = center[k];
                    } else {
                        chi[k] = center[k];
                    }
                }
                stack.push((clo, chi));
            }
        } else if delta <= diam {
            out.discarded += vol;
        } else {
            out.centers.extend_from_slice(&center);
            out.measure.push(vol);
            out.diam.push(diam);
            out.delta.push(delta);
            out.nearest.push(near);
        }
    }
    if out.measure.is_empty() {
        return Err(Error::InvalidInput("ambient grid is empty (region too small)".into()));
    }
    // deterministic order independent of traversal: sort by center coordinates
    let n = out.measure.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        out.centers[a * dim..(a + 1) * dim]
            .partial_cmp(&out.centers[b * dim..(b + 1) * dim])
            .unwrap()
    });
    let pick = |v: &Vec<S>| order.iter().map(|&i| v[i]).collect::<Vec<S>>();
    Ok(AmbientGrid {
        centers: PointSet::new(dim, order.iter().flat_map(|&i| out.centers[i * dim..(i + 1) * dim].to_vec()).collect())?,
        measure: pick(&out.measure),
        diam: pick(&out.diam),
        delta: pick(&out.delta),
        nearest: order.iter().map(|&i| out.nearest[i]).collect(),
        ambient_dim_m: S::of_usize(dim),
        discarded_measure: out.discarded,
        min_cell,
    })
}

// ---------------------------------------------------------------------------
// Diagnostics
// ---------------------------------------------------------------------------

/// Radius range [5·spacing, diam] where the discrete measure is expected to look ADR.
pub fn resolvable_range<S: Scalar>(e: &AdrSet<S>) -> (S, S) {
    (S::of(5.0) * e.min_spacing(), e.diameter())
}

fn gamma(x: f64) -> f64 {
    // Lanczos approximation, g = 7
    const C: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        std::f64::consts::PI / ((std::f64::consts::PI * x).sin() * gamma(1.0 - x))
    } else {
        let x = x - 1.0;
        let t = x + 7.5;
        let a = C.iter().enumerate().skip(1).fold(C[0], |acc, (i, c)| acc + c / (x + i as f64));
        (2.0 * std::f64::consts::PI).sqrt() * t.powf(x + 0.5) * (-t).exp() * a
    }
}

/// ω_d = π^{d/2}/Γ(d/2 + 1), the Hausdorff normalization of a d-ball.
pub fn unit_ball_volume<S: Scalar>(d: S) -> S {
    let d = d.to_f64c();
    S::of(std::f64::consts::PI.powf(d / 2.0) / gamma(d / 2.0 + 1.0))
}

/// σ(Δ(x_i, r)) / (ω_d r^d).
pub fn adr_ratio<S: Scalar>(e: &AdrSet<S>, i: usize, r: S) -> S {
    e.ball_measure(i, r) / (unit_ball_volume(e.dim_d) * r.powf(e.dim_d))
}

/// max over sampled (x, r) of max(ratio, 1/ratio) with the ω_d-normalized ratio.
pub fn adr_constant<S: Scalar>(e: &AdrSet<S>, n_probes: usize, rng_seed: u64) -> Result<S> {
    if n_probes < 10 {
        return Err(Error::OutOfRange("adr_constant needs at least 10 probes".into()));
    }
    let (r0, r1) = resolvable_range(e);
    if !(r0 < r1) {
        return Err(Error::OutOfRange("empty resolvable radius range".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let probes: Vec<(usize, S)> = (0..n_probes)
        .map(|_| {
            let t: f64 = rng.gen();
            let r = (r0.ln() + S::of(t) * (r1.ln() - r0.ln())).exp();
            (rng.gen_range(0..e.len()), r)
        })
        .collect();
    Ok(probes
        .par_iter()
        .map(|&(i, r)| {
            let ratio = adr_ratio(e, i, r);
            ratio.max(S::one() / ratio)
        })
        .reduce(|| S::one(), |a, b| a.max(b)))
}

/// Eigenvalues of a small symmetric matrix (cyclic Jacobi), ascending.
pub fn symmetric_eigenvalues<S: Scalar>(dim: usize, a: &[S]) -> Vec<S> {
    let mut m = a.to_vec();
    for _sweep in 0..64 {
        let off: S = (0..dim).flat_map(|i| (0..dim).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| m[i * dim + j] * m[i * dim + j]).sum();
        if off <= S::epsilon() * S::epsilon() * (0..dim).map(|i| m[i * dim + i] * m[i * dim + i]).sum::<S>().max(S::min_positive_value()) {
            break;
        }
        for p in 0..dim {
            for q in p + 1..dim {
                let apq = m[p * dim + q];
                if apq == S::zero() {
                    continue;
                }
                let theta = (m[q * dim + q] - m[p * dim + p]) / (S::of(2.0) * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + S::one()).sqrt());
                let c = S::one() / (t * t + S::one()).sqrt();
                let s = t * c;
                for k in 0..dim {
                    let (akp, akq) = (m[k * dim + p], m[k * dim + q]);
                    m[k * dim + p] = c * akp - s * akq;
                    m[k * dim + q] = s * akp + c * akq;
                }
                for k in 0..dim {
                    let (apk, aqk) = (m[p * dim + k], m[q * dim + k]);
                    m[p * dim + k] = c * apk - s * aqk;
                    m[q * dim + k] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut ev: Vec<S> = (0..dim).map(|i| m[i * dim + i]).collect();
    ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
    ev
}

/// Minimal Σ w·dist(y, P)² over affine n-planes P, by weighted total least squares.
pub fn plane_fit_residual<S: Scalar>(pts: &PointSet<S>, idx: &[usize], w: &[S], plane_dim: usize) -> S {
    let dim = pts.dim;
    let total: S = idx.iter().map(|&i| w[i]).sum();
    let mut mean = vec![S::zero(); dim];
    for &i in idx {
        for k in 0..dim {
            mean[k] += w[i] * pts.point(i)[k];
        }
    }
    for v in mean.iter_mut() {
        *v /= total;
    }
    let mut cov = vec![S::zero(); dim * dim];
    for &i in idx {
        let p = pts.point(i);
        for a in 0..dim {
            for b in 0..dim {
                cov[a * dim + b] += w[i] * (p[a] - mean[a]) * (p[b] - mean[b]);
            }
        }
    }
    let ev = symmetric_eigenvalues(dim, &cov);
    ev[..dim.saturating_sub(plane_dim)].iter().map(|v| v.max(S::zero())).sum()
}

/// β₂(x, t) with lines as the approximating planes (n = 1).
pub fn beta2<S: Scalar>(e: &AdrSet<S>, x: usize, t: S) -> Result<S> {
    if !(t > S::zero()) {
        return Err(Error::OutOfRange("t must be positive".into()));
    }
    let mut idx = Vec::new();
    e.reg.within_sample(x, t, false, &mut idx);
    if idx.len() < 2 {
        return Err(Error::InvalidInput(format!("fewer than 2 samples in B(x_{x}, {t})")));
    }
    let n = S::one();
    let res = plane_fit_residual(e.points(), &idx, &e.weights, 1);
    Ok((res / (t.powf(n) * t * t)).sqrt())
}

/// r^{-n} ∫_0^r ∫_{B(x0,t)∩E} β₂(x,t)² dσ(x) dt/t over dyadic t down to the resolvable floor.
pub fn beta_carleson_sum<S: Scalar>(e: &AdrSet<S>, x0: usize, r: S) -> Result<S> {
    let floor = S::of(5.0) * e.min_spacing();
    let ln2 = S::LN_2();
    let mut total = S::zero();
    let mut t = r;
    let mut ball = Vec::new();
    while t >= floor {
        ball.clear();
        e.reg.within_sample(x0, t, false, &mut ball);
        // collect first so the summation order does not depend on scheduling
        let terms: Vec<S> = ball
            .par_iter()
            .map(|&x| beta2(e, x, t).map(|b| b * b * e.weights[x]).unwrap_or(S::zero()))
            .collect();
        let layer: S = terms.iter().copied().sum();
        total += layer * ln2;
        t /= S::of(2.0);
    }
    Ok(total / r)
}

/// Greedy cover at scale eps: Σ diam(covered subset)^d. A heuristic upper-bound estimator.
pub fn hausdorff_premeasure<S: Scalar>(reg: &RegularizedMetric<S>, eps: S, d: S) -> Result<S> {
    if !(eps > S::zero()) {
        return Err(Error::OutOfRange("eps must be positive".into()));
    }
    let n = reg.len();
    let mut covered = vec![false; n];
    let mut total = S::zero();
    let mut ball = Vec::new();
    for p in 0..n {
        if covered[p] {
            continue;
        }
        ball.clear();
        reg.within_sample(p, eps, false, &mut ball);
        ball.retain(|&j| !covered[j]);
        let mut diam = S::zero();
        for (a, &i) in ball.iter().enumerate() {
            covered[i] = true;
            for &j in &ball[a + 1..] {
                diam = diam.max(reg.dist(i, j));
            }
        }
        total += if diam > S::zero() { diam.powf(d) } else { S::zero() };
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_segment_total() {
        let e = make_flat_segment(1.0f64, 1000).unwrap();
        assert!((e.total_weight() - 2.0).abs() < 1e-6);
        e.check_total().unwrap();
    }

    #[test]
    fn sine_graph_weights() {
        let e = make_lipschitz_graph(|x: f64| 0.3 * x.sin(), 0.3, 1.0, 1000).unwrap();
        let dx = 2.0 / 1000.0;
        for &w in &e.weights {
            assert!(w >= dx - 1e-15 && w <= (1.09f64).sqrt() * dx + 1e-15);
        }
        // frozen from adaptive quadrature of sqrt(1 + 0.09 cos^2 x) on [-1, 1]
        assert!((e.total_weight() - 2.064_329_826_727).abs() < 1e-6, "{}", e.total_weight());
    }

    #[test]
    fn lipschitz_violation_rejected() {
        assert!(make_lipschitz_graph(|x: f64| 2.0 * x, 1.0, 1.0, 64).is_err());
        assert!(make_flat_segment(1.0f64, 8).is_err());
    }

    #[test]
    fn circle_weights() {
        let e = make_circle(1.0, 4).unwrap();
        for &w in &e.weights {
            assert!((w - std::f64::consts::FRAC_PI_2).abs() < 1e-15);
        }
        let big = make_circle(2.5, 4096).unwrap();
        assert!((big.total_weight() - 5.0 * std::f64::consts::PI).abs() < 1e-9);
        assert!(make_circle(0.0f64, 64).is_err());
        // cap arc length 4 asin(0.05) over r = 0.1
        let ratio = big_ratio(&make_circle(1.0, 4096).unwrap(), 0.1);
        let w = 2.0 * std::f64::consts::PI / 4096.0;
        assert!((ratio - 4.0 * 0.05f64.asin() / 0.1).abs() <= 2.0 * w / 0.1, "{ratio}");
    }

    fn big_ratio(e: &AdrSet<f64>, r: f64) -> f64 {
        e.ball_measure(0, r) / r
    }

    #[test]
    fn koch_small_generations() {
        let g0 = make_koch::<f64>(0).unwrap();
        assert_eq!(g0.len(), 1);
        assert_eq!(g0.weights, vec![1.0]);
        assert_eq!(g0.point(0), &[0.5, 0.0]);
        let g2 = make_koch::<f64>(2).unwrap();
        assert_eq!(g2.len(), 16);
        assert!(g2.weights.iter().all(|&w| w == 1.0 / 16.0));
        assert!(make_koch::<f64>(10).is_err());
        let g1 = make_koch::<f64>(1).unwrap();
        // apex of the first bump sits at (1/2, sqrt(3)/6)
        let mid = (g1.point(1)[1] + g1.point(2)[1]) / 2.0;
        assert!((mid - 3f64.sqrt() / 12.0).abs() < 1e-12);
    }

    #[test]
    fn four_corners_small() {
        let g1 = make_four_corners::<f64>(1).unwrap();
        let mut pts: Vec<(f64, f64)> = (0..4).map(|i| (g1.point(i)[0], g1.point(i)[1])).collect();
        pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(pts, vec![(0.125, 0.125), (0.125, 0.875), (0.875, 0.125), (0.875, 0.875)]);
        for g in 0..5 {
            assert!((make_four_corners::<f64>(g).unwrap().total_weight() - 1.0).abs() < 1e-12);
        }
        assert!(make_four_corners::<f64>(9).is_err());
    }

    #[test]
    fn ambient_grid_posts() {
        let e = make_flat_segment(1.0f64, 256).unwrap();
        let region = Region::square(2.0);
        let g = make_ambient_grid(&e, &region, 0.5, true).unwrap();
        assert!(g.delta.iter().zip(&g.diam).all(|(d, h)| d > h));
        assert!(g.measure.iter().all(|m| *m > 0.0));
        let total: f64 = g.measure.iter().sum();
        assert!(total + g.discarded_measure <= region.volume() * (1.0 + 1e-12));
        assert!((total + g.discarded_measure - region.volume()).abs() < 1e-9);
        assert!(g.diam.iter().all(|h| *h <= 0.5));
    }

    #[test]
    fn ambient_grid_rejects_small_region() {
        let e = make_flat_segment(1.0f64, 64).unwrap();
        assert!(make_ambient_grid(&e, &Region::square(0.5), 0.5, true).is_err());
    }

    #[test]
    fn flat_adr_constant() {
        let e = make_flat_segment(1.0f64, 512).unwrap();
        let c = adr_constant(&e, 400, 7).unwrap();
        // one extra sample at the 5-spacing floor is worth 0.1
        assert!(c <= 2.0 + 0.1 + 1e-9, "{c}");
        assert!(adr_constant(&e, 5, 7).is_err());
    }

    #[test]
    fn circle_adr_constant() {
        let e = make_circle(1.0, 1024).unwrap();
        let c = adr_constant(&e, 400, 3).unwrap();
        assert!(c <= std::f64::consts::FRAC_PI_2 + 1e-3, "{c}");
        assert!(c >= 1.0, "{c}");
    }

    #[test]
    fn unit_ball_normalization() {
        assert!((unit_ball_volume(1.0f64) - 2.0).abs() < 1e-12);
        assert!((unit_ball_volume(2.0f64) - std::f64::consts::PI).abs() < 1e-12);
        assert!((unit_ball_volume(0.0f64) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn beta_vanishes_on_segment() {
        let e = make_flat_segment(1.0f64, 256).unwrap();
        for &(x, t) in &[(10, 0.1), (128, 0.5), (200, 1.5)] {
            assert!(beta2(&e, x, t).unwrap() < 1e-12);
        }
        assert!(beta2(&e, 0, 1e-4).is_err());
    }

    #[test]
    fn jacobi_eigenvalues() {
        let ev = symmetric_eigenvalues(3, &[2.0f64, 1.0, 0.0, 1.0, 2.0, 0.0, 0.0, 0.0, 5.0]);
        assert!((ev[0] - 1.0).abs() < 1e-12 && (ev[1] - 3.0).abs() < 1e-12 && (ev[2] - 5.0).abs() < 1e-12);
    }

    #[test]
    fn premeasure_small_cases() {
        let one = make_koch::<f64>(0).unwrap();
        assert_eq!(hausdorff_premeasure(&one.reg, 0.1, 1.0).unwrap(), 0.0);
        let seg = make_flat_segment(1.0f64, 2000).unwrap();
        let h = hausdorff_premeasure(&seg.reg, 0.01, 1.0).unwrap();
        assert!((h - 2.0).abs() < 0.2, "{h}");
    }
}
