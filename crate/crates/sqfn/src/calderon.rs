//! Discrete approximation to the identity on a finite cloud, its
//! Littlewood–Paley pieces and the Calderón reproducing identity.
//!
//! Operators act on L²(E, σ) and are stored in applied form
//! (Sf)(x) = Σ_y S(x,y) f(y) σ_y, i.e. raw kernel times diag(σ).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::dyadic::{fit_slope, kappa_for};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::sets::AdrSet;

/// Dense row-major square matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Mat<S> {
    pub n: usize,
    pub a: Vec<S>,
}

impl<S: Scalar> Mat<S> {
    pub fn zeros(n: usize) -> Self {
        Mat { n, a: vec![S::zero(); n * n] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.a[i * n + i] = S::one();
        }
        m
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> S {
        self.a[i * self.n + j]
    }

    pub fn add(&self, o: &Self) -> Self {
        Mat { n: self.n, a: self.a.iter().zip(&o.a).map(|(x, y)| *x + *y).collect() }
    }

    pub fn sub(&self, o: &Self) -> Self {
        Mat { n: self.n, a: self.a.iter().zip(&o.a).map(|(x, y)| *x - *y).collect() }
    }

    pub fn scale(&self, c: S) -> Self {
        Mat { n: self.n, a: self.a.iter().map(|x| *x * c).collect() }
    }

    /// Product with zero entries of the left factor skipped.
    pub fn matmul(&self, o: &Self) -> Self {
        let n = self.n;
        let mut out = vec![S::zero(); n * n];
        out.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
            for k in 0..n {
                let v = self.a[i * n + k];
                if v == S::zero() {
                    continue;
                }
                for (r, b) in row.iter_mut().zip(&o.a[k * n..(k + 1) * n]) {
                    *r += v * *b;
                }
            }
        });
        Mat { n, a: out }
    }

    pub fn apply(&self, f: &[S]) -> Vec<S> {
        let n = self.n;
        (0..n).map(|i| self.a[i * n..(i + 1) * n].iter().zip(f).map(|(x, y)| *x * *y).sum()).collect()
    }

    pub fn transpose(&self) -> Self {
        let n = self.n;
        let mut t = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                t.a[j * n + i] = self.a[i * n + j];
            }
        }
        t
    }

    pub fn max_abs(&self) -> S {
        self.a.iter().fold(S::zero(), |m, v| m.max(v.abs()))
    }

    /// Inverse by LU with partial pivoting; also returns the ∞-norm condition number.
    pub fn inverse(&self) -> Result<(Self, S)> {
        let n = self.n;
        let mut lu = self.a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let p = (k..n).max_by(|&x, &y| lu[x * n + k].abs().partial_cmp(&lu[y * n + k].abs()).unwrap()).unwrap();
            if lu[p * n + k] == S::zero() {
                return Err(Error::Numerical("singular matrix".into()));
            }
            if p != k {
                for j in 0..n {
                    lu.swap(k * n + j, p * n + j);
                }
                perm.swap(k, p);
            }
            let piv = lu[k * n + k];
            let (head, tail) = lu.split_at_mut((k + 1) * n);
            let row_k = &head[k * n..(k + 1) * n];
            tail.par_chunks_mut(n).for_each(|row| {
                let f = row[k] / piv;
                row[k] = f;
                if f != S::zero() {
                    for j in k + 1..n {
                        row[j] -= f * row_k[j];
                    }
                }
            });
        }
        let cols: Vec<Vec<S>> = (0..n)
            .into_par_iter()
            .map(|c| {
                let mut x: Vec<S> = (0..n).map(|i| if perm[i] == c { S::one() } else { S::zero() }).collect();
                for i in 0..n {
                    let mut s = x[i];
                    for j in 0..i {
                        s -= lu[i * n + j] * x[j];
                    }
                    x[i] = s;
                }
                for i in (0..n).rev() {
                    let mut s = x[i];
                    for j in i + 1..n {
                        s -= lu[i * n + j] * x[j];
                    }
                    x[i] = s / lu[i * n + i];
                }
                x
            })
            .collect();
        let mut inv = Self::zeros(n);
        for (c, col) in cols.iter().enumerate() {
            for i in 0..n {
                inv.a[i * n + c] = col[i];
            }
        }
        let inf_norm = |m: &Self| (0..n).map(|i| m.a[i * n..(i + 1) * n].iter().map(|v| v.abs()).sum::<S>()).fold(S::zero(), |a, b| a.max(b));
        let cond = inf_norm(self) * inf_norm(&inv);
        if !cond.is_finite() {
            return Err(Error::Numerical("inverse is not finite".into()));
        }
        Ok((inv, cond))
    }

    /// Operator norm on L²(σ) by power iteration on T*T.
    pub fn weighted_norm(&self, sigma: &[S]) -> Result<S> {
        let n = self.n;
        let sq: Vec<S> = sigma.iter().map(|s| s.sqrt()).collect();
        // M = W^{1/2} T W^{-1/2} has the same norm in the Euclidean inner product
        let m: Vec<S> = (0..n * n).map(|k| self.a[k] * sq[k / n] / sq[k % n]).collect();
        if m.iter().all(|v| *v == S::zero()) {
            return Ok(S::zero());
        }
        let mut rng = ChaCha8Rng::seed_from_u64(0x9071);
        let mut v: Vec<S> = (0..n).map(|_| S::of(rng.gen_range(0.5..1.5))).collect();
        let mut lam = S::zero();
        let tol = S::of(1e-8).max(S::rel_tol());
        for _ in 0..20_000 {
            let nv = v.iter().map(|x| *x * *x).sum::<S>().sqrt();
            for x in v.iter_mut() {
                *x /= nv;
            }
            let mv: Vec<S> = (0..n).into_par_iter().map(|i| m[i * n..(i + 1) * n].iter().zip(&v).map(|(a, b)| *a * *b).sum()).collect();
            let mut w = vec![S::zero(); n];
            for i in 0..n {
                let c = mv[i];
                if c != S::zero() {
                    for (wj, mij) in w.iter_mut().zip(&m[i * n..(i + 1) * n]) {
                        *wj += *mij * c;
                    }
                }
            }
            let next: S = w.iter().zip(&v).map(|(a, b)| *a * *b).sum();
            v = w;
            if next == S::zero() {
                return Ok(S::zero());
            }
            if (next - lam).abs() <= tol * next {
                return Ok(next.sqrt());
            }
            lam = next;
        }
        Err(Error::Numerical("power iteration did not converge".into()))
    }
}

/// Bump profile φ(t) = max(0, 1−t)².
pub fn default_phi<S: Scalar>(t: S) -> S {
    let u = (S::one() - t).max(S::zero());
    u * u
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ScaleReport<S> {
    pub l: i32,
    pub iterations: usize,
    pub row_error: S,
    /// max 2^l ρ(x,y) over the support.
    pub support: S,
    /// max S_l(x,y)/2^{ld}.
    pub height: S,
    /// Measured constant of the Hölder condition in x (exponent 1).
    pub holder_ii: S,
    /// Measured constant of the double-difference condition (exponents 1, 1).
    pub double_iii: S,
}

#[derive(Debug, Clone)]
pub struct AtiFamily<S> {
    pub kappa_e: i32,
    pub l_fine: i32,
    /// Scales kept, coarse to fine; dropped scales are listed separately.
    pub scales: Vec<i32>,
    pub dropped: Vec<i32>,
    /// Applied operators S_l (raw kernel times diag σ).
    pub ops: Vec<Mat<S>>,
    /// Raw symmetric kernels S_l(x, y).
    pub raw: Vec<Mat<S>>,
    pub sigma: Vec<S>,
    pub reports: Vec<ScaleReport<S>>,
}

/// Finest level L: smallest l with 2^{-l} below the minimum spacing.
pub fn finest_level<S: Scalar>(e: &AdrSet<S>) -> i32 {
    let s = e.min_spacing();
    if s == S::zero() {
        return kappa_for(e.diameter(), S::of(0.5));
    }
    let mut l = (-s.log2()).floor().to_i32().unwrap_or(0);
    while S::of(0.5).powi(l) >= s {
        l += 1;
    }
    l
}

/// Symmetric scaling d with Σ_y d_x K(x,y) d_y σ_y = 1 for all x.
fn sinkhorn<S: Scalar>(k: &Mat<S>, sigma: &[S], tol: S, max_iter: usize) -> Option<(Vec<S>, usize, S)> {
    let n = k.n;
    let mut d: Vec<S> = vec![S::one(); n];
    let row = |d: &[S]| -> Vec<S> {
        (0..n)
            .into_par_iter()
            .map(|x| k.a[x * n..(x + 1) * n].iter().zip(d).zip(sigma).map(|((kv, dv), s)| *kv * *dv * *s).sum())
            .collect()
    };
    let mut best = S::infinity();
    let mut stall = 0;
    for it in 0..max_iter {
        let r = row(&d);
        let err = (0..n).map(|x| (d[x] * r[x] - S::one()).abs()).fold(S::zero(), |a, b| a.max(b));
        if err <= tol {
            return Some((d, it, err));
        }
        if err < best * S::of(0.999) {
            best = err;
            stall = 0;
        } else {
            stall += 1;
            if stall > 50 && best <= S::of(1e-10) {
                return Some((d, it, err));
            }
        }
        for x in 0..n {
            if !(r[x] > S::zero()) {
                return None;
            }
            d[x] = (d[x] / r[x]).sqrt();
        }
    }
    None
}

pub fn build_ati<S: Scalar, F: Fn(S) -> S + Sync>(e: &AdrSet<S>, l_fine: Option<i32>, phi: F) -> Result<AtiFamily<S>> {
    let n = e.len();
    if n == 0 {
        return Err(Error::EmptySet);
    }
    let reg = &e.reg;
    let kappa_e = kappa_for(e.diameter(), S::of(0.5));
    let l_min = finest_level(e);
    let l_fine = l_fine.unwrap_or(l_min);
    if l_fine < l_min {
        return Err(Error::OutOfRange(format!("2^-L must lie below the minimum spacing (L >= {l_min})")));
    }
    let sigma = e.weights.clone();
    let d = e.dim_d;
    let dist = reg.matrix();
    let tol = S::of(2e-13).max(S::rel_tol() * S::of(1e-3));
    let mut scales = Vec::new();
    let mut dropped = Vec::new();
    let mut ops = Vec::new();
    let mut raw = Vec::new();
    let mut reports = Vec::new();
    for l in kappa_e..=l_fine {
        let two_l = S::of(2.0).powi(l);
        let h = two_l.powf(d);
        let k = Mat { n, a: dist.par_iter().map(|r| h * phi(two_l * *r)).collect() };
        let Some((dv, iterations, row_error)) = sinkhorn(&k, &sigma, tol, 10_000) else {
            log::warn!("scale {l} dropped: scaling did not converge");
            dropped.push(l);
            continue;
        };
        let mut s = Mat::zeros(n);
        for x in 0..n {
            for y in 0..n {
                s.a[x * n + y] = dv[x] * k.a[x * n + y] * dv[y];
            }
        }
        // exact symmetry: average the two triangles
        for x in 0..n {
            for y in x + 1..n {
                let v = (s.a[x * n + y] + s.a[y * n + x]) / S::of(2.0);
                s.a[x * n + y] = v;
                s.a[y * n + x] = v;
            }
        }
        let support = (0..n * n).filter(|&q| s.a[q] != S::zero()).map(|q| two_l * dist[q]).fold(S::zero(), |a, b| a.max(b));
        let height = s.max_abs() / h;
        let (holder_ii, double_iii) = regularity(&s, &dist, n, two_l, h);
        reports.push(ScaleReport { l, iterations, row_error, support, height, holder_ii, double_iii });
        let applied = Mat { n, a: (0..n * n).map(|q| s.a[q] * sigma[q % n]).collect() };
        scales.push(l);
        ops.push(applied);
        raw.push(s);
    }
    if scales.last() != Some(&l_fine) {
        return Err(Error::Numerical("finest scale did not converge".into()));
    }
    let mut fam = AtiFamily { kappa_e, l_fine, scales, dropped, ops, raw, sigma, reports };
    fam.verify()?;
    // S_L is the identity up to rounding; store it exactly so the telescoping sums close
    *fam.ops.last_mut().unwrap() = Mat::identity(n);
    Ok(fam)
}

/// Measured constants of the first-order and double-difference regularity conditions,
/// probed on pairs of up to 8 nearest neighbours within the scale.
fn regularity<S: Scalar>(s: &Mat<S>, dist: &[S], n: usize, two_l: S, h: S) -> (S, S) {
    let nbrs: Vec<Vec<usize>> = (0..n)
        .map(|x| {
            let mut c: Vec<(S, usize)> = (0..n).filter(|&y| y != x && two_l * dist[x * n + y] <= S::one()).map(|y| (dist[x * n + y], y)).collect();
            c.sort_by(|a, b| a.partial_cmp(b).unwrap());
            c.into_iter().take(8).map(|p| p.1).collect()
        })
        .collect();
    let ii = (0..n)
        .into_par_iter()
        .map(|x| {
            let mut m = S::zero();
            for &xp in &nbrs[x] {
                let r = two_l * dist[x * n + xp];
                for y in 0..n {
                    m = m.max((s.get(x, y) - s.get(xp, y)).abs() / (h * r));
                }
            }
            m
        })
        .reduce(S::zero, |a, b| a.max(b));
    let iii = (0..n)
        .into_par_iter()
        .map(|x| {
            let mut m = S::zero();
            for &xp in &nbrs[x] {
                let rx = two_l * dist[x * n + xp];
                for y in 0..n {
                    for &yp in &nbrs[y] {
                        let ry = two_l * dist[y * n + yp];
                        let dd = s.get(x, y) - s.get(xp, y) - s.get(x, yp) + s.get(xp, yp);
                        m = m.max(dd.abs() / (h * rx * ry));
                    }
                }
            }
            m
        })
        .reduce(S::zero, |a, b| a.max(b));
    (ii, iii)
}

impl<S: Scalar> AtiFamily<S> {
    pub fn n(&self) -> usize {
        self.sigma.len()
    }

    /// Symmetry, normalization, support and the identity at the finest scale.
    pub fn verify(&self) -> Result<()> {
        let n = self.n();
        for (i, s) in self.raw.iter().enumerate() {
            for x in 0..n {
                for y in 0..n {
                    if s.get(x, y) != s.get(y, x) {
                        return Err(Error::invariant("ati symmetry", format!("scale {}: ({x},{y})", self.scales[i])));
                    }
                    if s.get(x, y) < S::zero() {
                        return Err(Error::invariant("ati positivity", format!("scale {}", self.scales[i])));
                    }
                }
                let row: S = (0..n).map(|y| self.ops[i].get(x, y)).sum();
                if (row - S::one()).abs() > S::of(1e-10).max(S::rel_tol()) {
                    return Err(Error::invariant("ati normalization", format!("scale {} row {x}: {row}", self.scales[i])));
                }
            }
            if self.reports[i].support >= S::one() {
                return Err(Error::invariant("ati support", format!("scale {}", self.scales[i])));
            }
        }
        let fine = self.ops.last().unwrap();
        if fine.sub(&Mat::identity(n)).max_abs() > S::of(1e-12).max(S::rel_tol()) {
            return Err(Error::invariant("ati finest scale", "S_L is not the identity"));
        }
        Ok(())
    }

    /// D_l = S_{l+1} − S_l over consecutive kept scales.
    pub fn differences(&self) -> Vec<Mat<S>> {
        self.ops.windows(2).map(|w| w[1].sub(&w[0])).collect()
    }

    /// D_l^N = Σ_{|i|≤N} D_{l+i} by telescoping.
    pub fn band(&self, l: usize, nn: usize) -> Mat<S> {
        let top = (l + nn + 1).min(self.ops.len() - 1);
        let bot = l.saturating_sub(nn);
        self.ops[top].sub(&self.ops[bot])
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct Reproducing<S> {
    pub n_band: usize,
    pub residual: S,
    pub norm_r: S,
    /// ‖T̃_N − (I − R_N)‖ in max-entry norm.
    pub algebra_gap: S,
    pub condition: S,
}

/// Calderón reproducing identity for band width N.
pub fn reproducing_formula<S: Scalar>(ati: &AtiFamily<S>, nn: usize) -> Result<Reproducing<S>> {
    let n = ati.n();
    let eye = Mat::identity(n);
    let d = ati.differences();
    let s0 = &ati.ops[0];
    let total = eye.sub(s0);
    let mut t_n = Mat::zeros(n);
    let mut r_n = Mat::zeros(n);
    for l in 0..d.len() {
        let band = ati.band(l, nn);
        t_n = t_n.add(&d[l].matmul(&band));
        let off = total.sub(&band);
        r_n = r_n.add(&d[l].matmul(&off));
    }
    let two_minus = eye.scale(S::of(2.0)).sub(s0);
    let t_tilde = t_n.add(&s0.matmul(&two_minus));
    let algebra_gap = t_tilde.sub(&eye.sub(&r_n)).max_abs();
    let norm_r = r_n.weighted_norm(&ati.sigma)?;
    let (inv, condition) = match t_tilde.inverse() {
        Ok(v) => v,
        Err(_) => return Err(Error::Numerical(format!("T~_N singular at N = {nn}; ||R_N|| = {norm_r}"))),
    };
    let r = s0.sub(&eye.scale(S::of(2.0))).matmul(&inv);
    let lhs = eye.add(&s0.matmul(&r)).sub(&t_n.matmul(&inv));
    let residual = lhs.weighted_norm(&ati.sigma)?;
    Ok(Reproducing { n_band: nn, residual, norm_r, algebra_gap, condition })
}

#[derive(Debug, Clone, Serialize)]
pub struct Cotlar<S> {
    /// (j, k, ‖D_jD_k‖).
    pub table: Vec<(usize, usize, S)>,
    /// Fitted slope of log₂‖D_jD_k‖ against |j−k| over j ≠ k.
    pub slope: S,
}

pub fn cotlar_decay<S: Scalar>(ati: &AtiFamily<S>) -> Result<Cotlar<S>> {
    let d = ati.differences();
    if d.len() < 3 {
        return Err(Error::OutOfRange("need at least four scales".into()));
    }
    let pairs: Vec<(usize, usize)> = (0..d.len()).flat_map(|j| (0..d.len()).map(move |k| (j, k))).collect();
    let table: Vec<(usize, usize, S)> = pairs
        .iter()
        .map(|&(j, k)| d[j].matmul(&d[k]).weighted_norm(&ati.sigma).map(|v| (j, k, v)))
        .collect::<Result<_>>()?;
    let pts: Vec<(S, S)> = table
        .iter()
        .filter(|t| t.0 != t.1 && t.2 > S::zero())
        .map(|t| (S::of_usize(t.0.abs_diff(t.1)), t.2.log2()))
        .collect();
    Ok(Cotlar { table, slope: fit_slope(&pts) })
}

/// Σ_l ‖D_l f‖²_σ / ‖f‖²_σ per f; zero f is skipped.
pub fn littlewood_paley<S: Scalar>(ati: &AtiFamily<S>, family: &[Vec<S>]) -> Vec<S> {
    let d = ati.differences();
    let norm2 = |v: &[S]| v.iter().zip(&ati.sigma).map(|(x, s)| *x * *x * *s).sum::<S>();
    family
        .iter()
        .filter(|f| norm2(f) > S::zero())
        .map(|f| d.iter().map(|m| norm2(&m.apply(f))).sum::<S>() / norm2(f))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sets::{make_circle, make_flat_segment, make_koch};

    #[test]
    fn single_point_family() {
        let e = make_koch::<f64>(0).unwrap();
        let ati = build_ati(&e, None, default_phi).unwrap();
        assert!(ati.ops.iter().all(|m| (m.a[0] - 1.0).abs() < 1e-12));
        assert!((ati.raw[0].a[0] - 1.0 / e.weights[0]).abs() < 1e-9);
    }

    #[test]
    fn segment_family_invariants() {
        let e = make_flat_segment(1.0f64, 64).unwrap();
        let ati = build_ati(&e, None, default_phi).unwrap();
        assert_eq!(*ati.scales.first().unwrap(), ati.kappa_e);
        assert!(ati.dropped.is_empty());
        let d = ati.differences();
        let n = e.len();
        // telescoping Σ D_l = I − S_κ
        let mut sum = Mat::zeros(n);
        for m in &d {
            sum = sum.add(m);
        }
        assert!(sum.sub(&Mat::identity(n).sub(&ati.ops[0])).max_abs() < 1e-12);
        // constants are annihilated
        for m in &d {
            assert!(m.apply(&vec![1.0; n]).iter().all(|v| v.abs() < 1e-12));
        }
        assert!(ati.reports.iter().all(|r| r.holder_ii.is_finite() && r.double_iii.is_finite()));
    }

    #[test]
    fn inverse_roundtrip() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let n = 20;
        let m = Mat { n, a: (0..n * n).map(|k| rng.gen_range(-1.0..1.0) + if k % (n + 1) == 0 { 5.0 } else { 0.0 }).collect() };
        let (inv, cond) = m.inverse().unwrap();
        assert!(m.matmul(&inv).sub(&Mat::identity(n)).max_abs() < 1e-12);
        assert!(cond >= 1.0);
        assert!(Mat::<f64>::zeros(3).inverse().is_err());
    }

    #[test]
    fn weighted_norm_matches_dense_oracle() {
        // diagonal operator: norm is the largest |entry| regardless of σ
        let n = 5;
        let mut m = Mat::<f64>::zeros(n);
        for i in 0..n {
            m.a[i * n + i] = i as f64 - 3.5;
        }
        let sigma = vec![0.1, 0.2, 0.3, 0.2, 0.2];
        assert!((m.weighted_norm(&sigma).unwrap() - 3.5).abs() < 1e-6);
        // rank one f ↦ <f, 1>_σ g has norm ‖1‖_σ‖g‖_σ
        let g = [1.0, -2.0, 0.5, 0.0, 1.0];
        let r1 = Mat { n, a: (0..n * n).map(|k| g[k / n] * sigma[k % n]).collect() };
        let ng: f64 = g.iter().zip(&sigma).map(|(x, s)| x * x * s).sum::<f64>().sqrt();
        let n1: f64 = sigma.iter().sum::<f64>().sqrt();
        assert!((r1.weighted_norm(&sigma).unwrap() - ng * n1).abs() < 1e-6);
    }

    #[test]
    fn reproducing_identity_on_circle() {
        let e = make_circle(1.0f64, 96).unwrap();
        let ati = build_ati(&e, None, default_phi).unwrap();
        let nd = ati.differences().len();
        let mut last = f64::INFINITY;
        for nn in 0..=nd {
            let r = reproducing_formula(&ati, nn).unwrap();
            assert!(r.algebra_gap < 1e-12);
            if r.norm_r < 0.9 {
                assert!(r.residual <= 1e-8, "N = {nn}: {}", r.residual);
            }
            if last > 0.0 {
                assert!(r.norm_r < last, "N = {nn}: {} vs {last}", r.norm_r);
            }
            last = r.norm_r;
        }
        let big = reproducing_formula(&ati, nd).unwrap();
        assert_eq!(big.norm_r, 0.0);
        assert!(big.residual <= 1e-12);
    }

    #[test]
    fn cotlar_and_lp() {
        let e = make_flat_segment(1.0f64, 128).unwrap();
        let ati = build_ati(&e, None, default_phi).unwrap();
        let c = cotlar_decay(&ati).unwrap();
        assert!(c.slope < 0.0);
        for &(j, k, v) in &c.table {
            let w = c.table.iter().find(|t| t.0 == k && t.1 == j).unwrap().2;
            // D_l is self-adjoint in L²(σ), so ‖D_jD_k‖ = ‖D_kD_j‖
            assert!((v - w).abs() <= 1e-6 * v.max(1e-300));
        }
        let n = e.len();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let fam: Vec<Vec<f64>> = (0..10).map(|_| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
        let lp = littlewood_paley(&ati, &fam);
        assert!(lp.iter().all(|v| *v <= 10.0));
        let consts = littlewood_paley(&ati, &[vec![2.0; n]]);
        assert!(consts[0] < 1e-20);
        let scaled: Vec<Vec<f64>> = fam.iter().map(|f| f.iter().map(|v| 3.0 * v).collect()).collect();
        let lp3 = littlewood_paley(&ati, &scaled);
        for (a, b) in lp.iter().zip(&lp3) {
            assert!((a - b).abs() < 1e-12 * a);
        }
    }
}
