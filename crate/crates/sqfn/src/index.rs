//! Static kd-tree over Euclidean points: range and nearest queries.

use crate::scalar::Scalar;

/// Balanced kd-tree in implicit (median-in-slice) layout.
#[derive(Debug, Clone)]
pub struct KdTree<S> {
    dim: usize,
    pts: Vec<S>,
    // order[mid] is the node stored at the midpoint of each subrange
    order: Vec<usize>,
    axis: Vec<u8>,
}

#[inline]
fn sq_dist<S: Scalar>(a: &[S], b: &[S]) -> S {
    let mut s = S::zero();
    for (x, y) in a.iter().zip(b) {
        let d = *x - *y;
        s += d * d;
    }
    s
}

impl<S: Scalar> KdTree<S> {
    /// Build from flattened coordinates (`pts.len() == n * dim`).
    pub fn new(dim: usize, pts: &[S]) -> Self {
        assert!(dim > 0 && pts.len().is_multiple_of(dim));
        let n = pts.len() / dim;
        let mut tree = KdTree { dim, pts: pts.to_vec(), order: (0..n).collect(), axis: vec![0; n] };
        tree.build(0, n);
        tree
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    pub fn point(&self, i: usize) -> &[S] {
        &self.pts[i * self.dim..(i + 1) * self.dim]
    }

    fn build(&mut self, lo: usize, hi: usize) {
        if hi - lo <= 1 {
            return;
        }
        // split on the axis of largest spread
        let mut best = (0usize, S::neg_infinity());
        for a in 0..self.dim {
            let (mut mn, mut mx) = (S::infinity(), S::neg_infinity());
            for &i in &self.order[lo..hi] {
                let v = self.pts[i * self.dim + a];
                mn = mn.min(v);
                mx = mx.max(v);
            }
            if mx - mn > best.1 {
                best = (a, mx - mn);
            }
        }
        let a = best.0;
        let mid = (lo + hi) / 2;
        let (dim, pts) = (self.dim, &self.pts);
        self.order[lo..hi].select_nth_unstable_by(mid - lo, |&i, &j| {
            pts[i * dim + a]
                .partial_cmp(&pts[j * dim + a])
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(i.cmp(&j))
        });
        self.axis[mid] = a as u8;
        self.build(lo, mid);
        self.build(mid + 1, hi);
    }

    /// Indices with squared distance `< r2` (or `<= r2` when `inclusive`), appended to `out`.
    pub fn within_sq(&self, q: &[S], r2: S, inclusive: bool, out: &mut Vec<usize>) {
        self.within_rec(0, self.len(), q, r2, inclusive, out);
    }

    fn within_rec(&self, lo: usize, hi: usize, q: &[S], r2: S, inc: bool, out: &mut Vec<usize>) {
        if lo >= hi {
            return;
        }
        let mid = (lo + hi) / 2;
        let i = self.order[mid];
        let d2 = sq_dist(q, self.point(i));
        if d2 < r2 || (inc && d2 <= r2) {
            out.push(i);
        }
        if hi - lo == 1 {
            return;
        }
        let a = self.axis[mid] as usize;
        let diff = q[a] - self.pts[i * self.dim + a];
        let plane = diff * diff;
        let reach = plane < r2 || (inc && plane <= r2);
        if diff <= S::zero() {
            self.within_rec(lo, mid, q, r2, inc, out);
            if reach {
                self.within_rec(mid + 1, hi, q, r2, inc, out);
            }
        } else {
            self.within_rec(mid + 1, hi, q, r2, inc, out);
            if reach {
                self.within_rec(lo, mid, q, r2, inc, out);
            }
        }
    }

    /// Nearest point (squared distance, index); ties go to the lowest index.
    pub fn nearest_sq(&self, q: &[S]) -> Option<(S, usize)> {
        self.nearest_where_sq(q, |_| true)
    }

    /// Nearest point satisfying `keep`; ties go to the lowest index.
    pub fn nearest_where_sq<F: Fn(usize) -> bool>(&self, q: &[S], keep: F) -> Option<(S, usize)> {
        let mut best: Option<(S, usize)> = None;
        self.nearest_rec(0, self.len(), q, &keep, &mut best);
        best
    }

    fn nearest_rec<F: Fn(usize) -> bool>(
        &self,
        lo: usize,
        hi: usize,
        q: &[S],
        keep: &F,
        best: &mut Option<(S, usize)>,
    ) {
        if lo >= hi {
            return;
        }
        let mid = (lo + hi) / 2;
        let i = self.order[mid];
        if keep(i) {
            let d2 = sq_dist(q, self.point(i));
            let better = match *best {
                None => true,
                Some((bd, bi)) => d2 < bd || (d2 == bd && i < bi),
            };
            if better {
                *best = Some((d2, i));
            }
        }
        if hi - lo == 1 {
            return;
        }
        let a = self.axis[mid] as usize;
        let diff = q[a] - self.pts[i * self.dim + a];
        let (first, second) = if diff <= S::zero() { ((lo, mid), (mid + 1, hi)) } else { ((mid + 1, hi), (lo, mid)) };
        self.nearest_rec(first.0, first.1, q, keep, best);
        let plane = diff * diff;
        if best.is_none_or(|(bd, _)| plane <= bd) {
            self.nearest_rec(second.0, second.1, q, keep, best);
        }
    }
}
