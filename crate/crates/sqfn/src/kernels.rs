//! Kernels θ(x, y) and the operator Θf(x) = ∫_E θ(x, y) f(y) dσ(y) by
//! one-point-per-sample quadrature.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qspace::{Ambient, PointSet};
use crate::scalar::Scalar;
use crate::sets::{AdrSet, AmbientGrid};

/// Exponent data of a kernel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelParams<S> {
    pub d: S,
    pub upsilon: S,
    pub alpha: S,
    pub a: S,
    pub c_theta: S,
}

/// Odd angular profile Ω of a homogeneous kernel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Omega<S> {
    /// Ω(ω) = ω_j.
    Coordinate { j: usize },
    /// Planar Ω(φ) = Σ_k c_k cos((2k+1)φ) + s_k sin((2k+1)φ).
    OddHarmonics { cos: Vec<S>, sin: Vec<S> },
}

impl<S: Scalar> Omega<S> {
    fn eval(&self, w: &[S]) -> S {
        match self {
            Omega::Coordinate { j } => w[*j],
            Omega::OddHarmonics { cos, sin } => {
                let phi = w[1].atan2(w[0]);
                let mut s = S::zero();
                for (k, c) in cos.iter().enumerate() {
                    s += *c * (S::of_usize(2 * k + 1) * phi).cos();
                }
                for (k, c) in sin.iter().enumerate() {
                    s += *c * (S::of_usize(2 * k + 1) * phi).sin();
                }
                s
            }
        }
    }

    fn sup(&self) -> S {
        match self {
            Omega::Coordinate { .. } => S::one(),
            Omega::OddHarmonics { cos, sin } => cos.iter().chain(sin).map(|c| c.abs()).sum(),
        }
    }

    /// Bound on |∇_ω Ω| along the sphere.
    fn lip(&self) -> S {
        match self {
            Omega::Coordinate { .. } => S::one(),
            Omega::OddHarmonics { cos, sin } => {
                let a: S = cos.iter().enumerate().map(|(k, c)| S::of_usize(2 * k + 1) * c.abs()).sum();
                let b: S = sin.iter().enumerate().map(|(k, c)| S::of_usize(2 * k + 1) * c.abs()).sum();
                a + b
            }
        }
    }
}

pub type CustomFn<S> = Arc<dyn Fn(&[S], &[S], &mut [S]) + Send + Sync>;
pub type PsiFn<S> = Arc<dyn Fn(&[S]) -> S + Send + Sync>;

#[derive(Clone)]
pub enum KernelKind<S> {
    /// ∇K with K(z) = z/|z|² in the plane; periodic in axis 0 when a period is set.
    RieszGrad { period: Option<S> },
    /// Ω(z/|z|)/|z|^{d+υ}.
    HomogeneousOdd { omega: Omega<S> },
    /// (1 + amp·cos x₁)·z₁/|z|^{d+1+υ}: the coefficient varies with x.
    Variable { amplitude: S },
    /// 2^{-k}ψ_k(x − y) at a fixed scale k.
    DyadicPsi { psi: PsiFn<S>, k: i32 },
    Custom { f: CustomFn<S>, components: usize },
}

impl<S: fmt::Debug> fmt::Debug for KernelKind<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KernelKind::RieszGrad { period } => write!(f, "RieszGrad {{ period: {period:?} }}"),
            KernelKind::HomogeneousOdd { omega } => write!(f, "HomogeneousOdd {{ omega: {omega:?} }}"),
            KernelKind::Variable { amplitude } => write!(f, "Variable {{ amplitude: {amplitude:?} }}"),
            KernelKind::DyadicPsi { k, .. } => write!(f, "DyadicPsi {{ k: {k} }}"),
            KernelKind::Custom { components, .. } => write!(f, "Custom {{ components: {components} }}"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Kernel<S> {
    pub kind: KernelKind<S>,
    pub params: KernelParams<S>,
}

/// csc²(w), stable for large |Im w|.
fn csc2<S: Scalar>(w: Complex<S>) -> Complex<S> {
    let i = Complex::new(S::zero(), S::one());
    let q = if w.im >= S::zero() { (i * w * S::of(2.0)).exp() } else { (-i * w * S::of(2.0)).exp() };
    let one = Complex::new(S::one(), S::zero());
    q * S::of(-4.0) / ((one - q) * (one - q))
}

impl<S: Scalar> Kernel<S> {
    /// Planar Riesz-gradient kernel: d = 1, υ = 1, components ∂₁K₁, ∂₁K₂, ∂₂K₁, ∂₂K₂.
    pub fn riesz_grad(period: Option<S>) -> Self {
        Kernel {
            kind: KernelKind::RieszGrad { period },
            params: KernelParams { d: S::one(), upsilon: S::one(), alpha: S::one(), a: S::zero(), c_theta: S::of(16.0) * S::SQRT_2() },
        }
    }

    /// Ω(z/|z|)/|z|^{d+1}; with Ω = ω₁ this is the default kernel on fractal sets.
    pub fn homogeneous_odd(omega: Omega<S>, d: S) -> Self {
        let c = (omega.sup() * (d + S::one()) + omega.lip()) * S::of(2.0).powf(d + S::of(2.0));
        Kernel { kind: KernelKind::HomogeneousOdd { omega }, params: KernelParams { d, upsilon: S::one(), alpha: S::one(), a: S::zero(), c_theta: c } }
    }

    pub fn variable(amplitude: S, d: S) -> Self {
        let c = (S::one() + amplitude.abs()) * (d + S::of(3.0)) * S::of(2.0).powf(d + S::of(2.0));
        Kernel { kind: KernelKind::Variable { amplitude }, params: KernelParams { d, upsilon: S::one(), alpha: S::one(), a: S::zero(), c_theta: c } }
    }

    pub fn dyadic_psi(psi: PsiFn<S>, k: i32, d: S) -> Self {
        Kernel { kind: KernelKind::DyadicPsi { psi, k }, params: KernelParams { d, upsilon: S::one(), alpha: S::one(), a: S::zero(), c_theta: S::infinity() } }
    }

    pub fn custom(f: CustomFn<S>, components: usize, params: KernelParams<S>) -> Self {
        Kernel { kind: KernelKind::Custom { f, components }, params }
    }

    pub fn components(&self) -> usize {
        match &self.kind {
            KernelKind::RieszGrad { .. } => 4,
            KernelKind::Custom { components, .. } => *components,
            _ => 1,
        }
    }

    /// θ at ambient point x and displacement z = x − y.
    pub fn eval(&self, x: &[S], z: &[S], out: &mut [S]) {
        match &self.kind {
            KernelKind::RieszGrad { period } => {
                let zc = Complex::new(z[0], z[1]);
                let fp = match period {
                    None => -(zc * zc).inv(),
                    Some(p) => {
                        let s = S::PI() / *p;
                        csc2(zc * s) * (-(s * s))
                    }
                };
                out[0] = fp.re;
                out[1] = -fp.im;
                out[2] = -fp.im;
                out[3] = -fp.re;
            }
            KernelKind::HomogeneousOdd { omega } => {
                let r = norm(z);
                let w: Vec<S> = z.iter().map(|v| *v / r).collect();
                out[0] = omega.eval(&w) / r.powf(self.params.d + self.params.upsilon);
            }
            KernelKind::Variable { amplitude } => {
                let r = norm(z);
                out[0] = (S::one() + *amplitude * x[0].cos()) * z[0] / r.powf(self.params.d + self.params.upsilon + S::one());
            }
            KernelKind::DyadicPsi { psi, k } => {
                let s = S::of(2.0).powi(*k);
                let w: Vec<S> = z.iter().map(|v| *v / s).collect();
                out[0] = psi(&w) * s.powf(-self.params.d) / s;
            }
            KernelKind::Custom { f, .. } => f(x, z, out),
        }
    }
}

fn norm<S: Scalar>(z: &[S]) -> S {
    z.iter().map(|v| *v * *v).sum::<S>().sqrt()
}

/// Standard odd bump ψ(z) = z₁·exp(−1/(1−|z|²)) on the unit ball.
pub fn odd_bump<S: Scalar>() -> PsiFn<S> {
    Arc::new(|z: &[S]| {
        let r2: S = z.iter().map(|v| *v * *v).sum();
        if r2 >= S::one() {
            S::zero()
        } else {
            z[0] * (-S::one() / (S::one() - r2)).exp()
        }
    })
}

/// Θf at arbitrary evaluation points, flattened `points × components`.
#[derive(Debug, Clone, PartialEq)]
pub struct Field<S> {
    pub components: usize,
    pub values: Vec<S>,
}

impl<S: Scalar> Field<S> {
    pub fn len(&self) -> usize {
        self.values.len() / self.components.max(1)
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn at(&self, i: usize) -> &[S] {
        &self.values[i * self.components..(i + 1) * self.components]
    }

    /// |Θf(x_i)|² summed over components.
    pub fn norm_sq(&self, i: usize) -> S {
        self.at(i).iter().map(|v| *v * *v).sum()
    }

    pub fn scaled(&self, c: S) -> Self {
        Field { components: self.components, values: self.values.iter().map(|v| *v * c).collect() }
    }
}

fn ambient_of<S: Scalar>(e: &AdrSet<S>) -> Result<Ambient<S>> {
    e.reg.ambient_metric().ok_or_else(|| Error::InvalidInput("kernels need a cloud with ambient coordinates".into()))
}

/// Θf evaluated at the given points.
pub fn apply_theta_at<S: Scalar>(k: &Kernel<S>, e: &AdrSet<S>, f: &[S], points: &PointSet<S>) -> Result<Field<S>> {
    if f.len() != e.len() {
        return Err(Error::InvalidInput(format!("f has {} values for {} samples", f.len(), e.len())));
    }
    if f.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("f must be finite".into()));
    }
    let metric = ambient_of(e)?;
    let periodic_kernel = matches!(k.kind, KernelKind::RieszGrad { period: Some(_) });
    let nc = k.components();
    let dim = points.dim;
    let support: Vec<usize> = (0..e.len()).filter(|&i| f[i] != S::zero()).collect();
    let mut values = vec![S::zero(); points.len() * nc];
    let bad = std::sync::atomic::AtomicUsize::new(usize::MAX);
    values.par_chunks_mut(nc.max(1)).enumerate().for_each(|(c, acc)| {
        let x = points.point(c);
        let mut z = vec![S::zero(); dim];
        let mut th = vec![S::zero(); nc];
        for &i in &support {
            let y = e.point(i);
            if periodic_kernel {
                for (zz, (a, b)) in z.iter_mut().zip(x.iter().zip(y)) {
                    *zz = *a - *b;
                }
            } else {
                metric.delta(x, y, &mut z);
            }
            if z.iter().all(|v| *v == S::zero()) {
                bad.store(c, std::sync::atomic::Ordering::Relaxed);
                return;
            }
            k.eval(x, &z, &mut th);
            let wf = f[i] * e.weights[i];
            for (a, t) in acc.iter_mut().zip(&th) {
                *a += *t * wf;
            }
        }
    });
    let b = bad.load(std::sync::atomic::Ordering::Relaxed);
    if b != usize::MAX {
        return Err(Error::InvalidInput(format!("evaluation point {b} lies on E")));
    }
    Ok(Field { components: nc, values })
}

/// Θf at the ambient cell centers.
pub fn apply_theta<S: Scalar>(k: &Kernel<S>, e: &AdrSet<S>, f: &[S], grid: &AmbientGrid<S>) -> Result<Field<S>> {
    apply_theta_at(k, e, f, &grid.centers)
}

/// Measured size and Hölder constants from seeded random admissible pairs.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct KernelCheck<S> {
    pub size: S,
    pub holder: S,
    pub pairs: usize,
}

/// Spot-check |θ| ≤ C/ρ^{d+υ}·(δ_E/ρ)^{-a} and the Hölder bound in y for ρ(y,ỹ) ≤ ρ(x,y)/2.
pub fn spot_check<S: Scalar>(k: &Kernel<S>, e: &AdrSet<S>, grid: &AmbientGrid<S>, pairs: usize, seed: u64) -> Result<KernelCheck<S>> {
    let metric = ambient_of(e)?;
    let p = k.params;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nc = k.components();
    let dim = e.points().dim;
    let (mut size, mut holder) = (S::zero(), S::zero());
    let (mut t1, mut t2) = (vec![S::zero(); nc], vec![S::zero(); nc]);
    let mut z = vec![S::zero(); dim];
    let mut done = 0;
    let mut hits = Vec::new();
    for _ in 0..pairs * 20 {
        if done == pairs {
            break;
        }
        let c = rng.gen_range(0..grid.len());
        let i = rng.gen_range(0..e.len());
        let x = grid.center(c);
        let y = e.point(i);
        let r = metric.dist(x, y);
        metric.delta(x, y, &mut z);
        k.eval(x, &z, &mut t1);
        let delta = grid.delta[c];
        let s = norm(&t1) * r.powf(p.d + p.upsilon) * (delta / r).powf(p.a);
        size = size.max(s);
        hits.clear();
        e.reg.within_sample(i, r / S::of(2.0), true, &mut hits);
        if hits.len() > 1 {
            let j = hits[rng.gen_range(0..hits.len())];
            let ry = e.reg.dist(i, j);
            if ry > S::zero() {
                metric.delta(x, e.point(j), &mut z);
                k.eval(x, &z, &mut t2);
                let diff: S = t1.iter().zip(&t2).map(|(a, b)| (*a - *b) * (*a - *b)).sum::<S>().sqrt();
                holder = holder.max(diff * r.powf(p.d + p.upsilon + p.alpha) / ry.powf(p.alpha));
            }
        }
        done += 1;
    }
    if size > p.c_theta * (S::one() + S::rel_tol()) || holder > p.c_theta * (S::one() + S::rel_tol()) {
        return Err(Error::invariant("kernel bounds", format!("measured size {size}, Hölder {holder} exceed C_theta = {}", p.c_theta)));
    }
    Ok(KernelCheck { size, holder, pairs: done })
}

/// Bound on |Θf| at height δ above the sampled periodic line, where the exact value is 0.
///
/// The integrand is analytic in the strip |Im y| < δ, so the equispaced rule has error
/// at most 2P·M(a)/(e^{2πa/h} − 1) with a = δ/2; a rounding term n·ε·Σ|terms| is added.
/// The result bounds the Euclidean norm of all four kernel components.
pub fn periodic_quadrature_bound<S: Scalar>(delta: S, spacing: S, period: S, f_sup: S) -> S {
    let s = S::PI() / period;
    let two = S::of(2.0);
    let a = delta / two;
    let strip_sup = s * s / (s * (delta - a)).sinh().powi(2);
    let trap = two * period * strip_sup / ((two * S::PI() * a / spacing).exp() - S::one());
    let n = period / spacing;
    let row_sum = period * s * s / (s * delta).sinh().powi(2);
    let rounding = S::of(4.0) * n * S::epsilon() * row_sum;
    two * (trap + rounding) * f_sup
}

/// Truncated ∫_{-R}^{R} (∂_jK)(y, a·y + t) dy for K(x) = x₁/|x|² in the plane (j ∈ {1, 2}).
pub fn cancellation_test(j: usize, a_slope: f64, t: f64, r: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::OutOfRange("t must be positive".into()));
    }
    if j != 1 && j != 2 {
        return Err(Error::OutOfRange("component j must be 1 or 2".into()));
    }
    if !(r > 0.0) {
        return Err(Error::OutOfRange("R must be positive".into()));
    }
    let g = move |y: f64| {
        let (x1, x2) = (y, a_slope * y + t);
        let q = x1 * x1 + x2 * x2;
        if j == 1 {
            (x2 * x2 - x1 * x1) / (q * q)
        } else {
            -2.0 * x1 * x2 / (q * q)
        }
    };
    // geometric breakpoints keep each piece well resolved
    let mut knots = vec![0.0];
    let mut b = t.min(1.0) / 4.0;
    while b < r {
        knots.push(b);
        b *= 2.0;
    }
    knots.push(r);
    let mut total = 0.0;
    for w in knots.windows(2) {
        total += quadrature::double_exponential::integrate(g, w[0], w[1], 1e-14).integral;
        total += quadrature::double_exponential::integrate(g, -w[1], -w[0], 1e-14).integral;
    }
    Ok(total)
}

/// g_k(x_i) = Σ_j ψ_k(x_i − y_j) f_j w_j with ψ_k(x) = 2^{-kd}ψ(x/2^k), ψ supported in the unit ball.
pub fn dyadic_convolution_field<S: Scalar>(psi: &PsiFn<S>, e: &AdrSet<S>, f: &[S], k_range: std::ops::RangeInclusive<i32>) -> Result<Vec<Vec<S>>> {
    if f.len() != e.len() {
        return Err(Error::InvalidInput("f length differs from the set".into()));
    }
    let metric = ambient_of(e)?;
    // oddness spot-check
    let mut rng = ChaCha8Rng::seed_from_u64(0x0dd);
    let dim = e.points().dim;
    for _ in 0..100 {
        let z: Vec<S> = (0..dim).map(|_| S::of(rng.gen_range(-1.0..1.0))).collect();
        let mz: Vec<S> = z.iter().map(|v| -*v).collect();
        let (a, b) = (psi(&z), psi(&mz));
        if (a + b).abs() > S::rel_tol() * (S::one() + a.abs()) {
            return Err(Error::InvalidInput("psi is not odd".into()));
        }
    }
    let (lo, hi) = crate::sets::resolvable_range(e);
    let d = e.dim_d;
    Ok(k_range
        .map(|k| {
            let s = S::of(2.0).powi(k);
            if s < lo / S::of(5.0) || s > S::of(2.0) * hi {
                log::warn!("scale 2^{k} outside the resolvable range");
            }
            (0..e.len())
                .into_par_iter()
                .map(|i| {
                    let mut hits = Vec::new();
                    e.reg.within_sample(i, s, false, &mut hits);
                    let mut z = vec![S::zero(); dim];
                    let mut acc = S::zero();
                    for &j in &hits {
                        metric.delta(e.point(i), e.point(j), &mut z);
                        for v in z.iter_mut() {
                            *v /= s;
                        }
                        acc += psi(&z) * f[j] * e.weights[j];
                    }
                    acc * s.powf(-d)
                })
                .collect()
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sets::{make_ambient_grid, make_circle, make_flat_segment, Region};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn segment_grid(n: usize) -> (AdrSet<f64>, AmbientGrid<f64>) {
        let e = make_flat_segment(1.0, n).unwrap();
        let g = make_ambient_grid(&e, &Region::square(2.0), 0.5, true).unwrap();
        (e, g)
    }

    #[test]
    fn riesz_matches_line_quadrature() {
        let e = make_flat_segment(1.0, 4096).unwrap();
        let p = PointSet::new(2, vec![0.3, 0.5]).unwrap();
        let k = Kernel::riesz_grad(None);
        let v = apply_theta_at(&k, &e, &vec![1.0; e.len()], &p).unwrap();
        // oracle: components of ∇[(x−y)/|x−y|²] integrated over y ∈ [−1, 1]
        let (x1, x2) = (0.3f64, 0.5f64);
        let comp = |c: usize| {
            quadrature::double_exponential::integrate(
                |y: f64| {
                    let (u, w) = (x1 - y, x2);
                    let q = u * u + w * w;
                    let d11 = (w * w - u * u) / (q * q);
                    let d12 = -2.0 * u * w / (q * q);
                    [d11, d12, d12, -d11][c]
                },
                -1.0,
                1.0,
                1e-13,
            )
            .integral
        };
        for c in 0..4 {
            assert_relative_eq!(v.at(0)[c], comp(c), max_relative = 1e-3, epsilon = 1e-9);
        }
    }

    #[test]
    fn periodic_sum_matches_images() {
        let k = Kernel::riesz_grad(Some(2.0));
        let plain = Kernel::riesz_grad(None);
        let z = [0.37, 0.21];
        let mut a = [0.0; 4];
        k.eval(&z, &z, &mut a);
        let mut s = [0.0; 4];
        let mut t = [0.0; 4];
        for m in -20000..=20000 {
            plain.eval(&z, &[z[0] + 2.0 * m as f64, z[1]], &mut t);
            for c in 0..4 {
                s[c] += t[c];
            }
        }
        for c in 0..4 {
            assert_relative_eq!(a[c], s[c], epsilon = 1e-4);
        }
        // far from the axis the stable branch decays instead of overflowing
        k.eval(&z, &[0.1, 400.0], &mut a);
        assert!(a.iter().all(|v| v.is_finite() && v.abs() < 1e-100));
    }

    #[test]
    fn zero_and_linearity() {
        let (e, g) = segment_grid(128);
        let k = Kernel::riesz_grad(None);
        let n = e.len();
        let zero = apply_theta(&k, &e, &vec![0.0; n], &g).unwrap();
        assert!(zero.values.iter().all(|v| *v == 0.0));
        let f: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).sin()).collect();
        let h: Vec<f64> = (0..n).map(|i| (i as f64 * 0.11).cos()).collect();
        let fh: Vec<f64> = f.iter().zip(&h).map(|(a, b)| a + b).collect();
        let (a, b, c) = (apply_theta(&k, &e, &f, &g).unwrap(), apply_theta(&k, &e, &h, &g).unwrap(), apply_theta(&k, &e, &fh, &g).unwrap());
        for i in 0..a.values.len() {
            assert!((a.values[i] + b.values[i] - c.values[i]).abs() <= 1e-12 * (1.0 + c.values[i].abs()));
        }
    }

    #[test]
    fn rejects_points_on_e() {
        let (e, _) = segment_grid(16);
        let p = PointSet::new(2, e.point(3).to_vec()).unwrap();
        assert!(apply_theta_at(&Kernel::riesz_grad(None), &e, &[1.0; 16], &p).is_err());
    }

    #[test]
    fn spot_checks_pass() {
        let e = make_circle(1.0, 512).unwrap();
        let g = make_ambient_grid(&e, &Region::square(1.5), 0.25, true).unwrap();
        for k in [Kernel::riesz_grad(None), Kernel::homogeneous_odd(Omega::Coordinate { j: 0 }, 1.0), Kernel::variable(0.5, 1.0)] {
            let c = spot_check(&k, &e, &g, 1000, 7).unwrap();
            assert!(c.size > 0.0 && c.holder > 0.0);
        }
        let h = Kernel::homogeneous_odd(Omega::OddHarmonics { cos: vec![1.0, 0.5], sin: vec![0.0, 0.25] }, 1.0);
        spot_check(&h, &e, &g, 1000, 7).unwrap();
    }

    #[test]
    fn cancellation_examples() {
        assert!(cancellation_test(2, 0.0, 1.0, 1e4).unwrap().abs() < 1e-12);
        assert!(cancellation_test(2, 1.0, 1.0, 1e4).unwrap().abs() <= 1e-3);
        assert!(cancellation_test(1, 0.5, 2.0, 1e4).unwrap().abs() <= 1e-3);
        assert!(cancellation_test(1, 0.5, 0.0, 1e4).is_err());
    }

    #[test]
    fn convolution_symmetry_and_zero() {
        let e = make_flat_segment(1.0, 201).unwrap();
        let psi = odd_bump::<f64>();
        let zero = dyadic_convolution_field(&psi, &e, &vec![0.0; 201], -4..=-1).unwrap();
        assert!(zero.iter().flatten().all(|v| *v == 0.0));
        // f even about the midpoint sample 100, ψ odd ⇒ g_k vanishes there
        let f: Vec<f64> = (0..201).map(|i| ((i as f64 - 100.0) / 40.0).powi(2)).collect();
        let g = dyadic_convolution_field(&psi, &e, &f, -5..=0).unwrap();
        for row in &g {
            assert!(row[100].abs() < 1e-12);
        }
        let not_odd: PsiFn<f64> = Arc::new(|z: &[f64]| z[0] * z[0]);
        assert!(dyadic_convolution_field(&not_odd, &e, &f, 0..=0).is_err());
    }

    proptest! {
        #[test]
        fn homogeneity(x in -3.0f64..3.0, y in -3.0f64..3.0, lam in 0.1f64..10.0) {
            prop_assume!(x * x + y * y > 1e-4);
            for k in [Kernel::riesz_grad(None), Kernel::homogeneous_odd(Omega::Coordinate { j: 0 }, 1.0)] {
                let nc = k.components();
                let (mut a, mut b) = (vec![0.0; nc], vec![0.0; nc]);
                k.eval(&[x, y], &[x, y], &mut a);
                k.eval(&[x, y], &[lam * x, lam * y], &mut b);
                let s = lam.powf(-(k.params.d + k.params.upsilon));
                for c in 0..nc {
                    prop_assert!((b[c] - s * a[c]).abs() <= 1e-9 * (1.0 + a[c].abs() * s));
                }
            }
        }

        #[test]
        fn riesz_is_odd(x in -3.0f64..3.0, y in -3.0f64..3.0) {
            prop_assume!(x * x + y * y > 1e-4);
            let k = Kernel::riesz_grad(None);
            let (mut a, mut b) = ([0.0; 4], [0.0; 4]);
            k.eval(&[0.0, 0.0], &[x, y], &mut a);
            k.eval(&[0.0, 0.0], &[-x, -y], &mut b);
            // ∇K is even since K is odd
            for c in 0..4 {
                prop_assert!((a[c] - b[c]).abs() <= 1e-12 * (1.0 + a[c].abs()));
            }
        }
    }
}
