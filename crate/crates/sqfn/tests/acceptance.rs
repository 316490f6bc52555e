//! Acceptance criteria, one test each. Every test prints a single PASS/FAIL
//! line; run with `--release -- --nocapture --test-threads 1` to see them in order.

use std::f64::consts::PI;

use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sqfn::calderon::{self, AtiFamily};
use sqfn::dyadic::{build_grid, dyadic_intervals, kappa_for, rescale_to_half, DyadicGrid};
use sqfn::functionals::{self, real_to_complex};
use sqfn::kernels::{apply_theta, cancellation_test, periodic_quadrature_bound, Field, Kernel, Omega};
use sqfn::qspace::{regularize, Alpha, QuasiMetricSpace};
use sqfn::sets::{self, make_ambient_grid, AmbientGrid, Region};
use sqfn::tentspace::{self, band, build_aperture};
use sqfn::whitney::{build_tents, whitney_cover, TentConstants, TentStructure};
use sqfn::AdrSetF64;

type Verdict = Result<String, String>;

fn report(criterion: usize, title: &str, v: Verdict) {
    match v {
        Ok(detail) => println!("PASS {criterion:>2} {title}: {detail}"),
        Err(detail) => {
            println!("FAIL {criterion:>2} {title}: {detail}");
            panic!("criterion {criterion} ({title}) failed: {detail}");
        }
    }
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn lib<T>(r: sqfn::Result<T>, stage: &str) -> Result<T, String> {
    r.map_err(|e| format!("{stage}: {e}"))
}

// ---------------------------------------------------------------------------
// shared geometry
// ---------------------------------------------------------------------------

fn sine_graph(n: usize) -> AdrSetF64 {
    sets::make_lipschitz_graph(|x: f64| 0.5 * (2.0 * PI * x).sin(), 3.2, 0.5, n).unwrap()
}

fn k_max_for(e: &AdrSetF64, delta: f64) -> i32 {
    (e.min_spacing().ln() / delta.ln()).ceil() as i32 + 1
}

/// Bounding square of E padded by a quarter of its diameter.
fn padded_region(e: &AdrSetF64) -> Region<f64> {
    let pts = e.points();
    let (mut lo, mut hi) = (vec![f64::INFINITY; pts.dim], vec![f64::NEG_INFINITY; pts.dim]);
    for i in 0..e.len() {
        for (k, v) in pts.point(i).iter().enumerate() {
            lo[k] = lo[k].min(*v);
            hi[k] = hi[k].max(*v);
        }
    }
    let half = (0..pts.dim).map(|k| (hi[k] - lo[k]) / 2.0).fold(0.0, f64::max) + 0.25 * e.diameter();
    let mid: Vec<f64> = (0..pts.dim).map(|k| (hi[k] + lo[k]) / 2.0).collect();
    Region { lo: mid.iter().map(|m| m - half).collect(), hi: mid.iter().map(|m| m + half).collect() }
}

struct Tents {
    cells: AmbientGrid<f64>,
    grid: DyadicGrid<f64>,
    tents: TentStructure<f64>,
    constants: TentConstants<f64>,
}

fn tents_over(e: &AdrSetF64, region: &Region<f64>) -> Result<Tents, String> {
    let cells = lib(make_ambient_grid(e, region, 0.25, true), "ambient grid")?;
    let grid = lib(build_grid(e, k_max_for(e, 0.5), 0.5), "dyadic")?;
    lib(grid.verify(e), "dyadic")?;
    let cover = lib(whitney_cover(&cells, e, 4.0), "whitney")?;
    let tents = lib(build_tents(&grid, &cover, &cells, e, None), "tents")?;
    let constants = lib(tents.verify(&grid, &cells, e), "tents")?;
    Ok(Tents { cells, grid, tents, constants })
}

/// Seeded Σ_k a_k cos(kπs/2) + b_k sin(kπs/2) on the curve parameter rescaled to [−1, 1].
fn smooth_family(e: &AdrSetF64, count: usize, modes: usize, seed: u64) -> Vec<Vec<f64>> {
    let t = e.param.clone().unwrap();
    let lo = t.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = t.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let s: Vec<f64> = t.iter().map(|v| 2.0 * (v - lo) / (hi - lo) - 1.0).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let co: Vec<(f64, f64)> = (0..modes).map(|_| (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
            s.iter()
                .map(|x| co.iter().enumerate().map(|(j, (a, b))| {
                    let w = (j as f64 + 1.0) * PI * x / 2.0;
                    a * w.cos() + b * w.sin()
                }).sum())
                .collect()
        })
        .collect()
}

fn l2_sq(f: &[f64], e: &AdrSetF64) -> f64 {
    f.iter().zip(&e.weights).map(|(a, w)| a * a * w).sum()
}

// ---------------------------------------------------------------------------
// 1. metrization
// ---------------------------------------------------------------------------

/// Brute-force C_ρ and α from all triples.
fn alpha_oracle(n: usize, m: &[f64]) -> Alpha<f64> {
    let mut c = 1.0f64;
    for x in 0..n {
        for y in 0..n {
            if x == y {
                continue;
            }
            for z in 0..n {
                c = c.max(m[x * n + y] / m[x * n + z].max(m[z * n + y]));
            }
        }
    }
    Alpha::from_c_rho(c)
}

/// inf over simple chains x = x₀, …, x_k = y of (Σ ρ_sym(x_i, x_{i+1})^α)^{1/α}, or the minimax chain for α = ∞.
fn chain_oracle(n: usize, m: &[f64], alpha: Alpha<f64>) -> Vec<f64> {
    let sym = |i: usize, j: usize| m[i * n + j].max(m[j * n + i]);
    let step = |acc: f64, w: f64| match alpha {
        Alpha::Infinite => acc.max(w),
        Alpha::Finite(a) => acc + w.powf(a),
    };
    fn walk(at: usize, acc: f64, used: &mut Vec<bool>, best: &mut [f64], n: usize, edge: &dyn Fn(usize, usize) -> f64, step: &dyn Fn(f64, f64) -> f64) {
        for next in 0..n {
            if used[next] {
                continue;
            }
            let v = step(acc, edge(at, next));
            best[next] = best[next].min(v);
            used[next] = true;
            walk(next, v, used, best, n, edge, step);
            used[next] = false;
        }
    }
    let mut out = vec![0.0; n * n];
    for x in 0..n {
        let mut best = vec![f64::INFINITY; n];
        let mut used = vec![false; n];
        used[x] = true;
        walk(x, 0.0, &mut used, &mut best, n, &sym, &step);
        for y in 0..n {
            out[x * n + y] = match alpha {
                _ if x == y => 0.0,
                Alpha::Infinite => best[y],
                Alpha::Finite(a) => best[y].powf(1.0 / a),
            };
        }
    }
    out
}

fn random_quasi_metric(rng: &mut ChaCha8Rng, kind: usize) -> (usize, Vec<f64>) {
    let n = rng.gen_range(2..=6);
    let mut m = vec![0.0; n * n];
    match kind % 3 {
        // arbitrary positive and asymmetric
        0 => {
            for i in 0..n {
                for j in 0..n {
                    if i != j {
                        m[i * n + j] = rng.gen_range(0.05..1.0);
                    }
                }
            }
        }
        // snowflaked-up planar distances with a mild asymmetry
        1 => {
            let p: Vec<(f64, f64)> = (0..n).map(|_| (rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0))).collect();
            let power = rng.gen_range(1.0..3.0);
            for i in 0..n {
                for j in 0..n {
                    if i != j {
                        let d = ((p[i].0 - p[j].0).powi(2) + (p[i].1 - p[j].1).powi(2)).sqrt().max(1e-3);
                        m[i * n + j] = d.powf(power) * rng.gen_range(1.0..1.5);
                    }
                }
            }
        }
        // ultrametric from random heights on a line: C_ρ = 1, α = ∞
        _ => {
            let h: Vec<f64> = (0..n.saturating_sub(1)).map(|_| rng.gen_range(0.1..1.0)).collect();
            for i in 0..n {
                for j in 0..n {
                    if i != j {
                        let (a, b) = (i.min(j), i.max(j));
                        m[i * n + j] = h[a..b].iter().copied().fold(0.0, f64::max);
                    }
                }
            }
        }
    }
    (n, m)
}

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

fn metrization() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut infinite = 0;
    for case in 0..50 {
        let (n, m) = random_quasi_metric(&mut rng, case);
        let space = lib(QuasiMetricSpace::from_matrix(n, m.clone()), "space")?;
        let reg = lib(regularize(&space), "regularize")?;
        let alpha = alpha_oracle(n, &m);
        ensure(
            match (alpha, reg.alpha()) {
                (Alpha::Infinite, Alpha::Infinite) => true,
                (Alpha::Finite(a), Alpha::Finite(b)) => rel_close(a, b, 1e-12),
                _ => false,
            },
            || format!("case {case}: alpha {:?} vs oracle {alpha:?}", reg.alpha()),
        )?;
        infinite += usize::from(alpha.is_infinite());
        let want = chain_oracle(n, &m, alpha);
        for i in 0..n {
            for j in 0..n {
                let got = reg.dist(i, j);
                ensure(rel_close(got, want[i * n + j], 1e-9), || format!("case {case} ({i},{j}): {got} vs chain oracle {}", want[i * n + j]))?;
            }
        }
    }

    // built-in clouds: dense regularization, pairwise sandwich; the largest is circle/4096
    let sandwich: Vec<(&str, AdrSetF64)> = vec![
        ("flat_segment/1024", sets::make_flat_segment(1.0, 1024).unwrap()),
        ("periodic_line/1024", sets::make_periodic_line(2.0, 1024).unwrap()),
        ("circle/4096", sets::make_circle(1.0, 4096).unwrap()),
        ("sine_graph/1024", sine_graph(1024)),
        ("koch/5", sets::make_koch(5).unwrap()),
        ("cantor4/5", sets::make_four_corners(5).unwrap()),
    ];
    for (name, e) in &sandwich {
        let space = lib(QuasiMetricSpace::from_points(e.points().clone(), e.reg.ambient_metric().unwrap()), name)?;
        let reg = lib(regularize(&space), name)?;
        lib(reg.check_sandwich(&space), name)?;
    }
    let small: Vec<(&str, AdrSetF64)> = vec![
        ("flat_segment/200", sets::make_flat_segment(1.0, 200).unwrap()),
        ("periodic_line/200", sets::make_periodic_line(2.0, 200).unwrap()),
        ("circle/200", sets::make_circle(1.0, 200).unwrap()),
        ("sine_graph/200", sine_graph(200)),
        ("koch/3", sets::make_koch(3).unwrap()),
        ("cantor4/3", sets::make_four_corners(3).unwrap()),
    ];
    for (name, e) in &small {
        let space = lib(QuasiMetricSpace::from_points(e.points().clone(), e.reg.ambient_metric().unwrap()), name)?;
        let reg = lib(regularize(&space), name)?;
        lib(reg.check_sandwich(&space), name)?;
        lib(reg.check_triangle(reg.alpha().value()), name)?;
    }
    Ok(format!("50 matrices match the chain oracle ({infinite} ultrametric), {} clouds sandwiched, {} triangle-checked", sandwich.len() + small.len(), small.len()))
}

#[test]
fn criterion_01_metrization() {
    report(1, "metrization", metrization());
}

// ---------------------------------------------------------------------------
// 2. dyadic audit
// ---------------------------------------------------------------------------

/// Generation map of the δ → 1/2 relabelling found by scanning the defining inequalities.
fn rescale_oracle(delta: f64, kappa_src: i32, k_max_src: i32, kappa_new: i32) -> Vec<(i32, i32)> {
    let mut out = Vec::new();
    if delta > 0.5 {
        // new generation j uses the last source generation with δ^m ≥ 2^{-j}
        for j in kappa_new.. {
            let mut m = i32::MIN;
            for k in -64..=256 {
                if delta.powi(k) >= 0.5f64.powi(j) {
                    m = k;
                }
            }
            if m > k_max_src {
                break;
            }
            out.push((j, m.max(kappa_src)));
        }
    } else {
        // source generation k starts at the first j with 2^{-j} ≤ δ^k
        let start = |k: i32| (-64..=256).find(|&j| 0.5f64.powi(j) <= delta.powi(k)).unwrap();
        for j in kappa_new..start(k_max_src + 1) {
            let k = (kappa_src..=k_max_src).filter(|&k| start(k) <= j).max().unwrap_or(kappa_src);
            out.push((j, k));
        }
    }
    out
}

fn audit_sets() -> Vec<(&'static str, AdrSetF64)> {
    vec![
        ("circle/4096", sets::make_circle(1.0, 4096).unwrap()),
        ("koch/7", sets::make_koch(7).unwrap()),
        ("sine_graph/2048", sine_graph(2048)),
    ]
}

fn dyadic_audit() -> Verdict {
    ensure(rescale_oracle(0.7, 0, 10, 0).contains(&(2, 3)), || "oracle: δ = 0.7 should map j = 2 to generation 3".into())?;
    let m3 = rescale_oracle(0.3, 0, 4, 0);
    ensure(m3.contains(&(2, 1)) && m3.contains(&(1, 0)), || format!("oracle: δ = 0.3 gives {m3:?}"))?;
    let mut notes = Vec::new();
    for (name, e) in audit_sets() {
        let g = lib(build_grid(&e, k_max_for(&e, 0.5), 0.5), name)?;
        let gc = lib(g.verify(&e), name)?;
        ensure(gc.a0 > 0.0, || format!("{name}: a0 = {}", gc.a0))?;
        notes.push(format!("{name} a0={:.3} a1={:.3} N={}", gc.a0, gc.a1, gc.n_children));
        for delta in [0.3, 0.7] {
            let g = lib(build_grid(&e, k_max_for(&e, delta), delta), name)?;
            lib(g.verify(&e), name)?;
            let (half, map) = lib(rescale_to_half(&g, &e), name)?;
            let want = rescale_oracle(delta, g.kappa_e, g.k_max, kappa_for(e.diameter(), 0.5));
            ensure(map == want, || format!("{name} δ={delta}: map {map:?} vs oracle {want:?}"))?;
            lib(half.verify(&e), name)?;
        }
    }
    Ok(notes.join("; "))
}

#[test]
fn criterion_02_dyadic_audit() {
    report(2, "dyadic audit", dyadic_audit());
}

// ---------------------------------------------------------------------------
// 3. tent geometry
// ---------------------------------------------------------------------------

fn tent_geometry() -> Verdict {
    let mut notes = Vec::new();
    for (name, e) in audit_sets() {
        let t = tents_over(&e, &padded_region(&e))?;
        let c = t.constants;
        ensure(c.unresolved_cells == 0, || format!("{name}: {} unresolved cells", c.unresolved_cells))?;
        ensure(c.epsilon > 0.0 && c.c_tent.is_finite(), || format!("{name}: {c:?}"))?;
        notes.push(format!(
            "{name} C_o={:.2}/{:.1} C_tent={:.2} eps={:.3} overlap={} cover={}",
            c.c_o_measured, c.c_o, c.c_tent, c.epsilon, c.overlap, c.cover_checked
        ));
    }
    Ok(notes.join("; "))
}

#[test]
fn criterion_03_tent_geometry() {
    report(3, "tent geometry", tent_geometry());
}

// ---------------------------------------------------------------------------
// 4. hyperplane null
// ---------------------------------------------------------------------------

fn hyperplane_null() -> Verdict {
    let period = 2.0;
    let e = lib(sets::make_periodic_line(period, 256), "sets")?;
    let region = Region { lo: vec![-1.0, -1.0], hi: vec![1.0, 1.0] };
    let t = tents_over(&e, &region)?;
    let k = Kernel::riesz_grad(Some(period));
    let (up, m) = (k.params.upsilon, t.cells.ambient_dim_m);
    let u1 = lib(apply_theta(&k, &e, &vec![1.0; e.len()], &t.cells), "kernels")?;
    let h = e.min_spacing();
    let mut worst = 0.0f64;
    let mut bound = Vec::new();
    for c in 0..t.cells.len() {
        let b = periodic_quadrature_bound(t.cells.delta[c], h, period, 1.0);
        if t.cells.delta[c] >= 4.0 * h {
            worst = worst.max(u1.norm_sq(c).sqrt() / b);
        }
        bound.push(b);
        bound.extend(std::iter::repeat_n(0.0, u1.components - 1));
    }
    let bf = Field { components: u1.components, values: bound };
    let (cn, _) = functionals::carleson_tent_norm(&u1, &t.tents, &t.grid, &t.cells, &e, up, m);
    let (cq, _) = functionals::carleson_tent_norm(&bf, &t.tents, &t.grid, &t.cells, &e, up, m);
    ensure(worst <= 1.0, || format!("pointwise |Θ1|/bound reaches {worst}"))?;
    ensure(cn <= 10.0 * cq, || format!("Carleson {cn} > 10 × {cq}"))?;
    Ok(format!("max |Θ1|/bound = {worst:.2e}, Carleson {cn:.3e} vs bound {cq:.3e}"))
}

#[test]
fn criterion_04_hyperplane_null() {
    report(4, "hyperplane null", hyperplane_null());
}

// ---------------------------------------------------------------------------
// 5. graph square function stability
// ---------------------------------------------------------------------------

fn graph_sfe() -> Verdict {
    let k = Kernel::riesz_grad(None);
    let mut per_level = Vec::new();
    let mut notes = Vec::new();
    for n in [1024, 2048] {
        let e = sine_graph(n);
        let cells = lib(make_ambient_grid(&e, &padded_region(&e), 0.25, true), "ambient grid")?;
        let mut ratios = Vec::new();
        for f in smooth_family(&e, 20, 8, 7) {
            let u = lib(apply_theta(&k, &e, &f, &cells), "kernels")?;
            ratios.push(functionals::square_function_norm(&u, &cells, &e, k.params.upsilon, cells.ambient_dim_m) / l2_sq(&f, &e));
        }
        let b = band(&ratios);
        ensure(b.min > 0.0 && b.max / b.min <= 5.0, || format!("n={n}: max/min = {}", b.max / b.min))?;
        notes.push(format!("n={n} max/min={:.3}", b.max / b.min));
        per_level.push(ratios);
    }
    let change = per_level[0].iter().zip(&per_level[1]).map(|(a, b)| ((a - b) / a).abs()).fold(0.0, f64::max);
    ensure(change < 0.15, || format!("relative change {change} between resolutions"))?;
    Ok(format!("{}, max change {:.2}%", notes.join(", "), 100.0 * change))
}

#[test]
fn criterion_05_graph_sfe() {
    report(5, "graph SFE stability", graph_sfe());
}

// ---------------------------------------------------------------------------
// 6. Cantor divergence
// ---------------------------------------------------------------------------

fn cantor_divergence() -> Verdict {
    let k = Kernel::homogeneous_odd(Omega::Coordinate { j: 0 }, 1.0);
    let mut profile = Vec::new();
    for g in 3..=6 {
        let e = lib(sets::make_four_corners(g), "sets")?;
        let t = tents_over(&e, &padded_region(&e))?;
        let u1 = lib(apply_theta(&k, &e, &vec![1.0; e.len()], &t.cells), "kernels")?;
        let (cn, _) = functionals::carleson_tent_norm(&u1, &t.tents, &t.grid, &t.cells, &e, k.params.upsilon, t.cells.ambient_dim_m);
        profile.push(cn);
    }
    ensure(profile.windows(2).all(|w| w[1] > w[0]), || format!("profile not increasing: {profile:?}"))?;
    let growth = profile[3] / profile[0];
    ensure(growth >= 2.0, || format!("g6/g3 = {growth}"))?;
    Ok(format!("profile {:?}, g6/g3 = {growth:.2}", profile.iter().map(|v| format!("{v:.2}")).collect::<Vec<_>>()))
}

#[test]
fn criterion_06_cantor_divergence() {
    report(6, "Cantor divergence", cantor_divergence());
}

// ---------------------------------------------------------------------------
// 7. kernel cancellation
// ---------------------------------------------------------------------------

fn kernel_cancellation() -> Verdict {
    let mut worst = 0.0f64;
    for j in [1, 2] {
        for a in [0.0, 0.5, 1.0] {
            for t in [0.5, 1.0, 2.0] {
                let v = lib(cancellation_test(j, a, t, 1e4), "kernels")?;
                ensure(v.abs() <= 1e-3, || format!("j={j} a={a} t={t}: {v}"))?;
                worst = worst.max(v.abs());
            }
        }
    }
    Ok(format!("max |integral| = {worst:.2e} over 18 cases"))
}

#[test]
fn criterion_07_kernel_cancellation() {
    report(7, "kernel cancellation", kernel_cancellation());
}

// ---------------------------------------------------------------------------
// 8. Calderón reproducing formula
// ---------------------------------------------------------------------------

fn calderon_on(name: &str, e: &AdrSetF64) -> Result<String, String> {
    let ati: AtiFamily<f64> = lib(calderon::build_ati(e, None, calderon::default_phi), name)?;
    let n = e.len();
    let d = ati.differences();
    let ann = d.iter().flat_map(|m| m.apply(&vec![1.0; n])).fold(0.0f64, |a, v| a.max(v.abs()));
    ensure(ann <= 1e-12, || format!("{name}: max |D_l 1| = {ann}"))?;
    let mut norms = Vec::new();
    for nn in 0..=d.len() {
        let r = lib(calderon::reproducing_formula(&ati, nn), name)?;
        ensure(r.norm_r >= 0.9 || r.residual <= 1e-8, || format!("{name} N={nn}: residual {} with ||R_N|| = {}", r.residual, r.norm_r))?;
        norms.push(r.norm_r);
        if r.norm_r == 0.0 {
            break;
        }
    }
    ensure(norms.windows(2).all(|w| w[1] < w[0]), || format!("{name}: ||R_N|| not decreasing: {norms:?}"))?;
    let cot = lib(calderon::cotlar_decay(&ati), name)?;
    ensure(cot.slope < 0.0, || format!("{name}: Cotlar slope {}", cot.slope))?;
    Ok(format!("{name} ||R_0||={:.3} bands={} slope={:.2}", norms[0], norms.len(), cot.slope))
}

fn calderon_suite() -> Verdict {
    let a = calderon_on("segment/512", &sets::make_flat_segment(1.0, 512).unwrap())?;
    let b = calderon_on("circle/512", &sets::make_circle(1.0, 512).unwrap())?;
    Ok(format!("{a}; {b}"))
}

#[test]
fn criterion_08_calderon() {
    report(8, "Calderón suite", calderon_suite());
}

// ---------------------------------------------------------------------------
// 9. tent spaces
// ---------------------------------------------------------------------------

fn tent_spaces() -> Verdict {
    // cone/projection duality against the distance definition
    let e = sets::make_circle(1.0, 256).unwrap();
    let cells = lib(make_ambient_grid(&e, &padded_region(&e), 0.25, true), "ambient grid")?;
    let g1 = lib(build_aperture(&e, &cells, 0.5), "aperture")?;
    let g2 = lib(build_aperture(&e, &cells, 2.0), "aperture")?;
    for (kappa, g) in [(0.5, &g1), (2.0, &g2)] {
        for c in 0..cells.len() {
            let by_dist: Vec<usize> = (0..e.len()).filter(|&x| e.reg.dist_point(cells.center(c), x) < (1.0 + kappa) * cells.delta[c]).collect();
            ensure(g.projections[c] == by_dist, || format!("κ={kappa}: projection of cell {c} differs"))?;
            ensure(by_dist.iter().all(|&x| g.cones[x].binary_search(&c).is_ok()), || format!("κ={kappa}: cone misses cell {c}"))?;
        }
        let total: usize = g.cones.iter().map(Vec::len).sum();
        ensure(total == g.projections.iter().map(Vec::len).sum::<usize>(), || format!("κ={kappa}: cone and projection counts differ"))?;
    }

    // Fubini on 30 seeded instances over 30-sample clouds
    let mut rng = ChaCha8Rng::seed_from_u64(30);
    let mut fubini = 0.0f64;
    for case in 0..30 {
        let small = if case % 2 == 0 { sets::make_flat_segment(1.0, 30).unwrap() } else { sets::make_circle(1.0, 30).unwrap() };
        let sc = lib(make_ambient_grid(&small, &padded_region(&small), 0.5, true), "ambient grid")?;
        let geom = lib(build_aperture(&small, &sc, rng.gen_range(0.1..3.0)), "aperture")?;
        let u: Vec<f64> = (0..sc.len()).map(|c| rng.gen_range(0.0..1.0) * sc.measure[c]).collect();
        let a: Vec<bool> = (0..small.len()).map(|_| rng.gen_bool(0.5)).collect();
        let (l, r) = tentspace::fubini_sides(&u, &geom, &a, &small);
        let gap = (l - r).abs() / l.abs().max(f64::MIN_POSITIVE);
        ensure(gap <= 1e-10, || format!("Fubini case {case}: {l} vs {r}"))?;
        fubini = fubini.max(gap);
    }

    // aperture bands
    let k = Kernel::riesz_grad(None);
    let (up, m) = (k.params.upsilon, cells.ambient_dim_m);
    let fields: Vec<Field<f64>> = smooth_family(&e, 10, 8, 3).iter().map(|f| apply_theta(&k, &e, f, &cells).unwrap()).collect();
    let r12 = lib(tentspace::aperture_ratios(&fields, &g1, &g2, &cells, &e, 2.0, 2.0, m, up), "aperture")?;
    let r21 = lib(tentspace::aperture_ratios(&fields, &g2, &g1, &cells, &e, 2.0, 2.0, m, up), "aperture")?;
    let (b12, b21) = (band(&r12), band(&r21));
    ensure(b12.min > 0.0 && b12.max.is_finite(), || format!("aperture band [{}, {}]", b12.min, b12.max))?;
    ensure(
        (b12.min * b21.max - 1.0).abs() <= 1e-12 && (b12.max * b21.min - 1.0).abs() <= 1e-12,
        || format!("bands [{}, {}] and [{}, {}] not reciprocal", b12.min, b12.max, b21.min, b21.max),
    )?;

    // Lusin/Carleson band, p = 4, q = 2, every ball on circle/128
    let e4 = sets::make_circle(1.0, 128).unwrap();
    let c4 = lib(make_ambient_grid(&e4, &padded_region(&e4), 0.25, true), "ambient grid")?;
    let geom = lib(build_aperture(&e4, &c4, 1.0), "aperture")?;
    let f4: Vec<Field<f64>> = smooth_family(&e4, 10, 8, 4).iter().map(|f| apply_theta(&k, &e4, f, &c4).unwrap()).collect();
    let probes = tentspace::all_ball_probes(&e4);
    let lc = lib(tentspace::lusin_carleson_ratios(&f4, &geom, &c4, &e4, &probes, 4.0, 2.0, c4.ambient_dim_m, up), "lusin")?;
    let bl = band(&lc);
    ensure(bl.count > 0 && bl.min > 0.0 && bl.max.is_finite(), || format!("Lusin band [{}, {}]", bl.min, bl.max))?;

    // the p = ∞ counterexample
    let (kw, kn) = tentspace::default_counterexample_apertures();
    let (w10, n10) = lib(tentspace::infinity_counterexample(10.0, kw, kn), "counterexample")?;
    let (w100, n100) = lib(tentspace::infinity_counterexample(100.0, kw, kn), "counterexample")?;
    let growth = w100 / w10;
    let change = ((n100 - n10) / n10).abs();
    ensure(growth >= 1.8, || format!("sup_wide grows only by {growth}"))?;
    ensure(change < 0.1, || format!("sup_narrow changes by {change}"))?;

    Ok(format!(
        "duality exact, Fubini gap {fubini:.1e}, aperture band [{:.3}, {:.3}], Lusin band [{:.3}, {:.3}], wide growth {growth:.3}, narrow change {:.2}%",
        b12.min, b12.max, bl.min, bl.max, 100.0 * change
    ))
}

#[test]
fn criterion_09_tent_spaces() {
    report(9, "tent-space suite", tent_spaces());
}

// ---------------------------------------------------------------------------
// 10. density points
// ---------------------------------------------------------------------------

/// A*_γ by checking every closed ball B(x, ρ(x, y)).
fn density_oracle(a: &[bool], gamma: f64, e: &AdrSetF64) -> Vec<bool> {
    let n = e.len();
    (0..n)
        .map(|x| {
            (0..n).all(|y| {
                let r = e.reg.dist(x, y);
                let (mut s, mut sa) = (0.0, 0.0);
                for z in (0..n).filter(|&z| e.reg.dist(x, z) <= r) {
                    s += e.weights[z];
                    if a[z] {
                        sa += e.weights[z];
                    }
                }
                sa >= gamma * s
            })
        })
        .collect()
}

fn density_points() -> Verdict {
    let e = sets::make_circle(1.0, 128).unwrap();
    let a: Vec<bool> = e.param.as_ref().unwrap().iter().map(|t: &f64| t.cos() <= 0.0).collect();
    let c = tentspace::doubling_constant_3(&e);
    let out_a: f64 = (0..e.len()).filter(|&x| !a[x]).map(|x| e.weights[x]).sum();
    let mut notes = vec![format!("C = {c:.3}")];
    for gamma in [0.5, 0.9] {
        let star = lib(tentspace::density_points(&a, gamma, &e), "density")?;
        ensure((0..e.len()).all(|x| !star[x] || a[x]), || format!("γ={gamma}: A* not inside A"))?;
        let out_s: f64 = (0..e.len()).filter(|&x| !star[x]).map(|x| e.weights[x]).sum();
        ensure(out_s <= c / (1.0 - gamma) * out_a, || format!("γ={gamma}: σ(E∖A*) = {out_s} > C/(1−γ)·σ(E∖A) = {}", c / (1.0 - gamma) * out_a))?;
        notes.push(format!("γ={gamma} σ(E∖A*)/σ(E∖A)={:.3}", out_s / out_a));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let clouds: Vec<AdrSetF64> = vec![
        sets::make_circle(1.0, 200).unwrap(),
        sets::make_flat_segment(1.0, 150).unwrap(),
        sets::make_koch(3).unwrap(),
        sets::make_four_corners(3).unwrap(),
    ];
    for (i, cloud) in clouds.iter().enumerate() {
        let a: Vec<bool> = (0..cloud.len()).map(|_| rng.gen_bool(0.8)).collect();
        for gamma in [0.3, 0.5, 0.9] {
            let got = lib(tentspace::density_points(&a, gamma, cloud), "density")?;
            ensure(got == density_oracle(&a, gamma, cloud), || format!("cloud {i} γ={gamma}: differs from the all-radii oracle"))?;
        }
    }
    notes.push(format!("{} clouds match the brute-force oracle", clouds.len()));
    Ok(notes.join(", "))
}

#[test]
fn criterion_10_density_points() {
    report(10, "density points", density_points());
}

// ---------------------------------------------------------------------------
// 11. stopping time
// ---------------------------------------------------------------------------

fn mean_on(b: &[Complex<f64>], e: &AdrSetF64, idx: &[usize]) -> Complex<f64> {
    let s: Complex<f64> = idx.iter().map(|&i| b[i] * e.weights[i]).sum();
    s / e.measure_of(idx)
}

fn stopping() -> Verdict {
    let e = sets::make_flat_segment(0.5, 256).unwrap();
    let g = lib(dyadic_intervals(&e, -0.5, 0.5, 6), "intervals")?;
    let top = g.top();
    let b: Vec<f64> = e.param.as_ref().unwrap().iter().map(|&x| if x + 0.5 < 0.75 { 1.0 } else { -1.0 }).collect();
    let st = lib(functionals::stopping_time(&real_to_complex(&b), &g, &e, top, top), "stopping time")?;
    let right = g.generation(g.kappa_e + 1)[1];
    ensure(st.selected == vec![right], || format!("selected {:?}, expected [{right}]", st.selected))?;
    ensure((st.eta - 0.5).abs() <= 1e-12, || format!("η = {}", st.eta))?;

    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut checked = 0;
    let mut lowest = f64::INFINITY;
    for case in 0..50 {
        let raw: Vec<Complex<f64>> = (0..e.len()).map(|_| Complex::new(rng.gen_range(-1.0..2.0), rng.gen_range(-1.0..1.0))).collect();
        let m0 = mean_on(&raw, &e, &g.cube(top).members);
        let bn: Vec<Complex<f64>> = raw.iter().map(|v| v / m0).collect();
        let st = lib(functionals::stopping_time(&bn, &g, &e, top, top), "stopping time")?;
        for &q in &st.f_q {
            let m = mean_on(&bn, &e, &g.cube(q).members).norm();
            ensure(m >= 0.5, || format!("case {case}: cube {q} in F_Q has |mean| = {m}"))?;
            lowest = lowest.min(m);
            checked += 1;
        }
    }
    Ok(format!("3/4 example stops at the right half with η = {}; {checked} F_Q cubes over 50 b, min |mean| = {lowest:.3}", st.eta))
}

#[test]
fn criterion_11_stopping_time() {
    report(11, "stopping time", stopping());
}
