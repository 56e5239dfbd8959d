//! Acceptance suite: one line per criterion.

use std::time::Instant;

use divdiv_plate::adapt::{run_adaptive, run_uniform, IterationRecord, Quantity, RunConfig, RunHistory};
use divdiv_plate::assembly::{default_order, Discretization};
use divdiv_plate::mesh::{builders, dot, BcKind, Mesh, Point2, TriGeom};
use divdiv_plate::poly::{sym_apply, sym_form};
use divdiv_plate::postprocess::{error_norms, exact_sigma_norm, postprocess_deflection};
use divdiv_plate::problems::{jump_square, lshape_clamped_corner, lshape_simply_supported, manufactured};
use divdiv_plate::quadrature::{edge_point, quad_edge};
use divdiv_plate::solver::solve;
use divdiv_plate::spaces::basis::{dof_functionals, tau2, EdgeFunctionals};
use divdiv_plate::spaces::{build_local_basis, SigmaSpace, SplitPolicy};
use divdiv_plate::verify::{check_complex, check_nestedness};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    id: &'static str,
    pass: bool,
    /// reported but not required: the criterion is conditional on an unconfirmed assumption
    conditional: bool,
    detail: String,
}

fn outcome(id: &'static str, pass: bool, detail: String) -> Outcome {
    Outcome { id, pass, conditional: false, detail }
}

// reference columns: sigma L2, divdiv, w L2, Qw L2, Qw 2h, w* 2h
const REF_QUANTITIES: [Quantity; 6] =
    [Quantity::SigmaL2, Quantity::DivDiv, Quantity::W, Quantity::Qw, Quantity::Qw2h, Quantity::WStar2h];
// orders at levels 3->4 and 4->5
const REF_ORDERS: [[f64; 2]; 6] = [[3.82, 3.94], [1.87, 1.98], [1.84, 1.94], [3.68, 3.93], [3.44, 3.80], [3.76, 3.92]];
// errors at levels 3, 4, 5; the w entry at level 4 is read as 5.4184e-06
const REF_ERRORS: [[f64; 3]; 6] = [
    [4.2808e-04, 3.0212e-05, 1.9634e-06],
    [3.1020e-01, 8.5000e-02, 2.1742e-02],
    [1.9384e-05, 5.4184e-06, 1.4091e-06],
    [7.8629e-06, 6.1317e-07, 4.0323e-08],
    [3.1250e-04, 2.8884e-05, 2.0723e-06],
    [6.9398e-04, 5.1392e-05, 3.3972e-06],
];

fn two_digits(x: f64) -> f64 {
    let e = x.abs().log10().floor();
    (x / 10f64.powf(e - 1.0)).round() * 10f64.powf(e - 1.0)
}

fn criterion1(h: &RunHistory, secs: f64) -> Vec<Outcome> {
    let mut worst = 0.0f64;
    let mut orders = String::new();
    for (q, r) in REF_QUANTITIES.iter().zip(REF_ORDERS) {
        let o = h.orders(*q);
        worst = worst.max((o[2] - r[0]).abs()).max((o[3] - r[1]).abs());
        orders += &format!(" {}={:.2}/{:.2}", q.label(), o[2], o[3]);
    }
    // no printed column for the energy error; it is norm-equivalent to sigma L2
    let cinv = h.orders(Quantity::SigmaCinv);
    worst = worst.max((cinv[2] - REF_ORDERS[0][0]).abs()).max((cinv[3] - REF_ORDERS[0][1]).abs());
    orders += &format!(" {}={:.2}/{:.2}", Quantity::SigmaCinv.label(), cinv[2], cinv[3]);
    let a = outcome(
        "1a",
        worst <= 0.15 && secs <= 600.0,
        format!("orders 3->4/4->5 within 0.15 of reference (max dev {worst:.3}, {secs:.0}s):{orders}"),
    );
    let mut mismatches = 0;
    let mut ratios = String::new();
    for (q, r) in REF_QUANTITIES.iter().zip(REF_ERRORS) {
        for (lvl, rv) in (3..=5).zip(r) {
            let v = q.of(&h.records[lvl - 1]);
            if two_digits(v) != two_digits(rv) {
                mismatches += 1;
            }
            if lvl == 5 {
                ratios += &format!(" {}={:.3}", q.label(), v / rv);
            }
        }
    }
    let mut b = outcome(
        "1b",
        mismatches == 0,
        format!("errors at levels 3-5 equal reference to 2 digits: {mismatches}/18 differ; level-5 ratio ours/reference:{ratios}"),
    );
    b.conditional = true;
    vec![a, b]
}

fn in_range(x: f64, lo: f64, hi: f64) -> bool {
    x >= lo && x <= hi
}

fn slope(h: &RunHistory, q: Quantity) -> f64 {
    h.tail_rate(q, 10.0).unwrap_or(f64::NAN)
}

fn criterion2() -> (Outcome, RunHistory) {
    let t0 = Instant::now();
    let p = lshape_clamped_corner();
    let u = run_uniform(&p, 5, &RunConfig::default()).expect("uniform run");
    let (us, uw) = (slope(&u, Quantity::SigmaL2), slope(&u, Quantity::W));
    let (a, err) = run_adaptive(&p, &RunConfig { max_dofs: 100_000, max_iter: 1000, ..Default::default() });
    let (s, ws, eta, w) = (slope(&a, Quantity::SigmaL2), slope(&a, Quantity::WStar2h), slope(&a, Quantity::Eta41), slope(&a, Quantity::W));
    let secs = t0.elapsed().as_secs_f64();
    let pass = err.is_none()
        && in_range(us, -0.32, -0.22)
        && in_range(uw, -0.62, -0.48)
        && [s, ws, eta].iter().all(|&x| in_range(x, -2.2, -1.8))
        && in_range(w, -1.15, -0.85)
        && secs <= 900.0;
    let last = a.records.last().map_or(0, |r| r.ndof_sigma);
    let detail = format!(
        "uniform sigma {us:.3} w {uw:.3}; adaptive ({} iterations, {last} sigma dofs) sigma {s:.3} w* {ws:.3} eta {eta:.3} w {w:.3}; {secs:.0}s{}",
        a.records.len(),
        err.map_or(String::new(), |e| format!("; stopped: {e}"))
    );
    (outcome("2", pass, detail), a)
}

fn criterion3() -> Outcome {
    let t0 = Instant::now();
    let p = lshape_simply_supported();
    let u = run_uniform(&p, 5, &RunConfig::default()).expect("uniform run");
    let us = slope(&u, Quantity::SigmaL2);
    let (a, err) = run_adaptive(&p, &RunConfig { max_dofs: 100_000, max_iter: 1000, ..Default::default() });
    let s = slope(&a, Quantity::SigmaL2);
    let secs = t0.elapsed().as_secs_f64();
    let pass = err.is_none() && in_range(s, -2.2, -1.8) && us > -1.5 && secs <= 900.0;
    outcome("3", pass, format!("adaptive sigma {s:.3} ({} iterations), uniform sigma {us:.3}; {secs:.0}s", a.records.len()))
}

fn random_triangle(rng: &mut ChaCha8Rng, id: usize) -> TriGeom {
    loop {
        let p: [Point2; 3] = std::array::from_fn(|_| Point2::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)));
        if let Ok(g) = TriGeom::new(id, p) {
            if g.min_angle() > 10f64.to_radians() {
                return g;
            }
        }
    }
}

fn jumps(mesh: &Mesh, sp: &SigmaSpace, x: &[f64]) -> f64 {
    let q = quad_edge(8).unwrap();
    let (mut worst, mut scale) = (0.0f64, 0.0f64);
    for e in &mesh.edges {
        let [Some(t0), Some(t1)] = e.tris else { continue };
        let (a, b) = (mesh.vertices[e.v[0]].p, mesh.vertices[e.v[1]].p);
        // normal moment and effective shear along the edge, seen from triangle t
        let traces = |t: usize| {
            let g = &sp.geoms[t];
            let f = sp.function(t, x);
            let dv = f.div(g);
            let tn = f.form(e.tangent, e.normal).grad(g);
            q.params()
                .map(|s| {
                    let l = g.barycentric(Point2::new(a.x + s * (b.x - a.x), a.y + s * (b.y - a.y)));
                    let nn = sym_form(f.eval(l), e.normal, e.normal);
                    let shear = dot(dv.eval(l), e.normal) + dot(tn.eval(l), e.tangent);
                    (nn, shear)
                })
                .collect::<Vec<_>>()
        };
        for (u, v) in traces(t0).into_iter().zip(traces(t1)) {
            scale = scale.max(u.0.abs()).max(u.1.abs());
            worst = worst.max((u.0 - v.0).abs()).max((u.1 - v.1).abs());
        }
    }
    worst / scale.max(f64::MIN_POSITIVE)
}

fn criterion4() -> Outcome {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut dual = 0.0f64;
    let mut trace = 0.0f64;
    let q = quad_edge(10).unwrap();
    for id in 0..50 {
        let g = random_triangle(&mut rng, id);
        for k in [3, 4] {
            let b = build_local_basis(&g, k).expect("unisolvent");
            let d = dof_functionals(&g, &b);
            for r in 0..d.nrows() {
                for c in 0..d.ncols() {
                    let e = if r == c { 1.0 } else { 0.0 };
                    dual = dual.max((d[(r, c)] - e).abs());
                }
            }
            for i in 0..3 {
                for l in 0..k {
                    let f = tau2(&g, k, i, l);
                    let dv = f.div(&g);
                    for s in q.params() {
                        let v = dv.eval(edge_point(i, s));
                        trace = trace.max((dot(v, g.n[i]) - EdgeFunctionals::b(k, l, s)).abs());
                        for e in 0..3 {
                            let tn = sym_apply(f.eval(edge_point(e, s)), g.n[e]);
                            trace = trace.max(tn[0].abs()).max(tn[1].abs());
                        }
                    }
                }
            }
        }
    }
    let mut jump = 0.0f64;
    for (m0, seed) in [(builders::lshape_clamped_corner(), 1u64), (builders::unit_square(BcKind::Clamped), 2)] {
        let mut m = m0;
        for _ in 0..4 {
            let marked: Vec<usize> = (0..m.num_triangles()).filter(|_| rng.gen_bool(0.4)).collect();
            m = m.bisect(&marked);
        }
        for policy in [SplitPolicy::None, SplitPolicy::Bisection] {
            let sp = SigmaSpace::new(&m, 3, policy).unwrap();
            let mut r = ChaCha8Rng::seed_from_u64(seed);
            let x: Vec<f64> = (0..sp.ndof()).map(|_| r.gen_range(-1.0..1.0)).collect();
            jump = jump.max(jumps(&m, &sp, &x));
        }
    }
    let secs = t0.elapsed().as_secs_f64();
    let pass = dual <= 1e-10 && trace <= 1e-12 && jump <= 1e-10;
    outcome(
        "4",
        pass,
        format!("dof duality {dual:.1e} (50 triangles, k=3,4), divdiv trace identity {trace:.1e}, conformity jumps {jump:.1e}; {secs:.1}s"),
    )
}

fn criterion5() -> Outcome {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut failed = vec![];
    let mut ranks = 0;
    let mut low = f64::INFINITY;
    for i in 0..10 {
        let mut m = if i % 2 == 0 { builders::lshape_clamped_corner() } else { builders::lshape_simply_supported() };
        for _ in 0..2 + i % 3 {
            let marked: Vec<usize> = (0..m.num_triangles()).filter(|_| rng.gen_bool(0.35)).collect();
            m = m.bisect(&marked);
        }
        let r = check_complex(&m, 3, i as u64).expect("complex check");
        if m.num_triangles() <= 200 {
            ranks += 1;
        }
        if let Some(c) = r.get("smallest kept singular value / largest") {
            low = low.min(c.computed.parse().unwrap_or(f64::NAN));
        }
        for c in r.checks.iter().filter(|c| !c.pass || c.skipped.is_some()) {
            failed.push(format!("mesh {i} ({} triangles): {} computed {}", m.num_triangles(), c.name, c.computed));
        }
    }
    let secs = t0.elapsed().as_secs_f64();
    outcome(
        "5",
        failed.is_empty() && ranks == 10,
        format!("10 refined meshes: ledgers, divdiv sym curl, surjectivity ({ranks} meshes <= 200 triangles, min rel singular value {low:.2e}); {secs:.1}s {}", failed.join("; ")),
    )
}

fn criterion6() -> Outcome {
    let m = builders::unit_square(BcKind::Clamped).uniform_refine();
    let fine = m.bisect(&[0]);
    let r = check_nestedness(&m, &fine, 3).expect("nestedness");
    let ext = r.get("extended space nested").unwrap();
    let std = r.get("conforming space not nested").unwrap();
    outcome(
        "6",
        ext.pass && std.pass && std.skipped.is_none(),
        format!("extended max residual {} (<= 1e-10), conforming max residual {} (> 1e-3)", ext.computed, std.computed),
    )
}

fn criterion7() -> Outcome {
    let p = manufactured(5, BcKind::Clamped);
    let mesh = p.mesh.uniform_refine().uniform_refine();
    let d = Discretization::new(&p, &mesh, 3, SplitPolicy::None, default_order(3)).unwrap();
    let s = solve(&d).unwrap();
    let post = postprocess_deflection(&d, &s).unwrap();
    let e = error_norms(&d, &s, &post).unwrap();
    let rel = e.sigma_l2 / exact_sigma_norm(&d);
    outcome("7", rel <= 1e-9 && mesh.num_triangles() == 32, format!("quintic on {} triangles: relative sigma error {rel:.2e}", mesh.num_triangles()))
}

fn spread(v: &[f64]) -> (f64, f64, f64) {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    (s[0], s[s.len() / 2], s[s.len() - 1])
}

fn criterion8(uniform: &RunHistory, adaptive: &RunHistory) -> Outcome {
    let ratio = |r: &IterationRecord| Quantity::Eta41.of(r) / Quantity::SigmaCinv.of(r);
    let u: Vec<f64> = uniform.records[1..].iter().map(ratio).collect();
    let last = adaptive.records.last().map_or(0.0, |r| r.ndof() as f64);
    let a: Vec<f64> = adaptive.records.iter().filter(|r| r.ndof() as f64 * 10.0 >= last).map(ratio).collect();
    // each sequence on its own: the effectivity constant is problem dependent
    let (ul, um, uh) = spread(&u);
    let (al, am, ah) = spread(&a);
    let pooled: Vec<f64> = u.iter().chain(&a).copied().collect();
    let (pl, pm, ph) = spread(&pooled);
    let pass = pooled.iter().all(|x| x.is_finite() && *x > 0.0) && uh / ul < 3.0 && ah / al < 3.0;
    outcome(
        "8",
        pass,
        format!(
            "eta/error: {} uniform levels [{ul:.2}, {uh:.2}] median {um:.2}; {} adaptive tail steps [{al:.2}, {ah:.2}] median {am:.2}; pooled [{pl:.2}, {ph:.2}] median {pm:.2} (max/median {:.2})",
            u.len(),
            a.len(),
            ph / pm
        ),
    )
}

fn main() {
    let mut out = vec![];
    let report = |o: &Outcome| {
        let tag = if o.pass { "PASS" } else { "FAIL" };
        let cond = if o.conditional { " (conditional)" } else { "" };
        println!("criterion {}: {tag}{cond} {}", o.id, o.detail);
    };
    for o in [criterion4(), criterion5(), criterion6(), criterion7()] {
        report(&o);
        out.push(o);
    }
    let t0 = Instant::now();
    let table = run_uniform(&jump_square(), 5, &RunConfig::default()).expect("uniform run");
    for o in criterion1(&table, t0.elapsed().as_secs_f64()) {
        report(&o);
        out.push(o);
    }
    let (o, adaptive) = criterion2();
    report(&o);
    out.push(o);
    let o = criterion3();
    report(&o);
    out.push(o);
    let o = criterion8(&table, &adaptive);
    report(&o);
    out.push(o);
    let required_failures: Vec<&str> = out.iter().filter(|o| !o.pass && !o.conditional).map(|o| o.id).collect();
    if required_failures.is_empty() {
        println!("acceptance: all required criteria pass");
    } else {
        println!("acceptance: failing {}", required_failures.join(", "));
        std::process::exit(1);
    }
}
