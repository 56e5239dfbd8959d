//! Postprocessed deflection, the mesh-dependent H2 norm and error norms.

use faer::linalg::solvers::Solve;
use faer::Mat;
use rayon::prelude::*;
use thiserror::Error;

use crate::assembly::{project_degree, Discretization};
use crate::mesh::{BcKind, Mesh, Point2, TriGeom};
use crate::poly::{exponents, frob, BarycentricPoly, MatPoly, MonoTable, Sym, VecPoly};
use crate::quadrature::{quad_edge, QuadRule};
use crate::solver::Solution;

#[derive(Debug, Error, PartialEq)]
pub enum PostError {
    #[error("local postprocessing system is singular on triangle {0}")]
    Singular(usize),
}

/// Value, gradient and hessian of a polynomial on one triangle.
#[derive(Clone, Debug)]
pub struct PolyJet {
    pub p: BarycentricPoly,
    pub grad: VecPoly,
    pub hess: MatPoly,
}

impl PolyJet {
    pub fn new(p: BarycentricPoly, g: &TriGeom) -> Self {
        let grad = p.grad(g);
        let hess = p.hessian(g);
        Self { p, grad, hess }
    }

    pub fn at(&self, l: [f64; 3]) -> (f64, [f64; 2], Sym) {
        (self.p.eval(l), self.grad.eval(l), self.hess.eval(l))
    }
}

/// Piecewise P_{k+2} deflection.
#[derive(Clone, Debug)]
pub struct PostDeflection {
    pub polys: Vec<PolyJet>,
}

/// Discrete deflection on triangle `t` as a polynomial.
pub fn w_poly(k: usize, t: usize, w: &[f64], range: std::ops::Range<usize>) -> BarycentricPoly {
    BarycentricPoly { deg: k - 2, coef: w[range].to_vec(), tri: t }
}

/// Local H2 projection: hessian closest to C^{-1} sigma_h with the P_{k-2}
/// moments of w_h.
pub fn postprocess_deflection(d: &Discretization, sol: &Solution) -> Result<PostDeflection, PostError> {
    let k = d.k();
    let rule = &d.rules.tri;
    let polys = (0..d.mesh.num_triangles())
        .into_par_iter()
        .map(|t| {
            let g = &d.sigma.geoms[t];
            let sh = d.sigma.function(t, &sol.sigma);
            let target: Vec<Sym> = rule.points.iter().enumerate().map(|(q, &l)| d.coefs[t][q].apply_inv(sh.eval(l))).collect();
            let wh = w_poly(k, t, &sol.w, d.u.range(t));
            let p = local_h2_projection(k, g, rule, &target, &wh).ok_or(PostError::Singular(t))?;
            Ok(PolyJet::new(p, g))
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(PostDeflection { polys })
}

/// Minimize ||hess p - target|| over P_{k+2}(K) subject to Q_K p = Q_K wh.
pub fn local_h2_projection(k: usize, g: &TriGeom, rule: &QuadRule, target: &[Sym], wh: &BarycentricPoly) -> Option<BarycentricPoly> {
    let t = g.id;
    let d = k + 2;
    let ex = exponents(d);
    let n = ex.len();
    let m = exponents(k - 2).len();
    let hs: Vec<Vec<Sym>> = ex
        .iter()
        .map(|&e| {
            let h = BarycentricPoly::lam(e, t).hessian(g);
            rule.points.iter().map(|&l| h.eval(l)).collect()
        })
        .collect();
    let tp = MonoTable::new(d, &rule.points);
    let tq = MonoTable::new(k - 2, &rule.points);
    let whv = wh.eval_table(&tq);
    let mut a = Mat::<f64>::zeros(n + m, n + m);
    let mut b = Mat::<f64>::zeros(n + m, 1);
    for (q, w) in rule.weights.iter().enumerate() {
        let w = w * g.area;
        let phi = &tp.vals[q * n..(q + 1) * n];
        let psi = &tq.vals[q * m..(q + 1) * m];
        for i in 0..n {
            b[(i, 0)] += w * frob(hs[i][q], target[q]);
            for j in i..n {
                a[(i, j)] += w * frob(hs[i][q], hs[j][q]);
            }
            for (r, ps) in psi.iter().enumerate() {
                a[(n + r, i)] += w * phi[i] * ps;
            }
        }
        for (r, ps) in psi.iter().enumerate() {
            b[(n + r, 0)] += w * whv[q] * ps;
        }
    }
    for i in 0..n {
        for j in 0..i {
            a[(i, j)] = a[(j, i)];
        }
        for r in 0..m {
            a[(i, n + r)] = a[(n + r, i)];
        }
    }
    // symmetric scaling: the hessian block grows like h^-2, the moment block like h^2
    let mut sc = vec![1.0; n + m];
    for (i, c) in sc.iter_mut().enumerate().take(n) {
        *c = 1.0 / a[(i, i)].sqrt();
    }
    for r in n..n + m {
        let big = (0..n).map(|i| (a[(r, i)] * sc[i]).abs()).fold(0.0, f64::max);
        sc[r] = 1.0 / big;
    }
    let a = Mat::from_fn(n + m, n + m, |i, j| sc[i] * a[(i, j)] * sc[j]);
    let b = Mat::from_fn(n + m, 1, |i, _| sc[i] * b[(i, 0)]);
    let x = a.partial_piv_lu().solve(&b);
    let coef: Vec<f64> = (0..n).map(|i| sc[i] * x[(i, 0)]).collect();
    coef.iter().all(|c| c.is_finite()).then_some(BarycentricPoly { deg: d, coef, tri: t })
}

/// Broken function given on each triangle at physical points.
pub type Broken<'a> = dyn Fn(usize, Point2) -> (f64, [f64; 2], Sym) + Sync + 'a;

/// |v|_{2,h} with jump terms on interior and clamped edges and value jumps on
/// simply supported edges.
pub fn norm_2h(mesh: &Mesh, geoms: &[TriGeom], rule: &QuadRule, edge_order: usize, v: &Broken) -> f64 {
    let cells: f64 = (0..mesh.num_triangles())
        .into_par_iter()
        .map(|t| {
            let g = &geoms[t];
            rule.points
                .iter()
                .zip(&rule.weights)
                .map(|(&l, w)| {
                    let h = v(t, g.point(l)).2;
                    w * g.area * frob(h, h)
                })
                .sum::<f64>()
        })
        .sum();
    let er = quad_edge(edge_order).expect("edge rule");
    let edges: f64 = (0..mesh.num_edges())
        .into_par_iter()
        .map(|e| {
            let ed = &mesh.edges[e];
            let (with_value, with_slope) = match ed.label.map(|l| l.kind) {
                None | Some(BcKind::Clamped) => (true, true),
                Some(BcKind::SimplySupported) => (true, false),
                Some(BcKind::Free) => (false, false),
            };
            if !with_value {
                return 0.0;
            }
            let a = mesh.vertices[ed.v[0]].p;
            let b = mesh.vertices[ed.v[1]].p;
            let n = ed.normal;
            let (mut jv, mut jd) = (0.0, 0.0);
            for (s, w) in er.params().zip(&er.weights) {
                let x = Point2::new(a.x + s * (b.x - a.x), a.y + s * (b.y - a.y));
                let mut val = 0.0;
                let mut dn = 0.0;
                for (side, tri) in ed.tris.iter().enumerate() {
                    if let Some(t) = tri {
                        let (f, gr, _) = v(*t, x);
                        let sg = if side == 0 { 1.0 } else { -1.0 };
                        val += sg * f;
                        dn += sg * (gr[0] * n[0] + gr[1] * n[1]);
                    }
                }
                jv += w * ed.length * val * val;
                jd += w * ed.length * dn * dn;
            }
            let h = ed.length;
            jv / h.powi(3) + if with_slope { jd / h } else { 0.0 }
        })
        .sum();
    (cells + edges).sqrt()
}

/// The seven reported error norms.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ErrorNorms {
    pub sigma_l2: f64,
    pub sigma_cinv: f64,
    pub divdiv: f64,
    pub w: f64,
    pub qw: f64,
    pub qw_2h: f64,
    pub wstar_2h: f64,
}

/// Errors against the exact solution, or `None` without one.
pub fn error_norms(d: &Discretization, sol: &Solution, post: &PostDeflection) -> Option<ErrorNorms> {
    let pb = d.problem;
    if !pb.has_exact() {
        return None;
    }
    let k = d.k();
    let rule = &d.rules.tri;
    let nt = d.mesh.num_triangles();
    let per: Vec<([f64; 5], PolyJet)> = (0..nt)
        .into_par_iter()
        .map(|t| {
            let g = &d.sigma.geoms[t];
            let hint = g.centroid();
            let sh = d.sigma.function(t, &sol.sigma);
            let dd = sh.divdiv(g);
            let wh = w_poly(k, t, &sol.w, d.u.range(t));
            let qcoef = project_degree(k - 2, g, rule, &|l| pb.w(g.point(l), hint));
            let qw = BarycentricPoly { deg: k - 2, coef: qcoef, tri: t };
            let diff = &qw - &wh;
            let mut acc = [0.0; 5];
            for (q, (&l, w)) in rule.points.iter().zip(&rule.weights).enumerate() {
                let wa = w * g.area;
                let x = g.point(l);
                let s = pb.sigma(x, hint);
                let sv = sh.eval(l);
                let e = [s[0] - sv[0], s[1] - sv[1], s[2] - sv[2]];
                acc[0] += wa * frob(e, e);
                acc[1] += wa * frob(d.coefs[t][q].apply_inv(e), e);
                let r = pb.f(x, hint) - dd.eval(l);
                acc[2] += wa * r * r;
                let ew = pb.w(x, hint) - wh.eval(l);
                acc[3] += wa * ew * ew;
                let eq = diff.eval(l);
                acc[4] += wa * eq * eq;
            }
            (acc, PolyJet::new(diff, g))
        })
        .collect();
    let mut acc = [0.0; 5];
    for (a, _) in &per {
        for i in 0..5 {
            acc[i] += a[i];
        }
    }
    let geoms = &d.sigma.geoms;
    let eorder = d.rules.order;
    let qdiff: Vec<PolyJet> = per.into_iter().map(|p| p.1).collect();
    let qw_2h = norm_2h(d.mesh, geoms, rule, eorder, &|t, x| qdiff[t].at(geoms[t].barycentric(x)));
    let wstar_2h = norm_2h(d.mesh, geoms, rule, eorder, &|t, x| {
        let hint = geoms[t].centroid();
        let ex = pb.derivs(x, hint).unwrap();
        let (v, gr, h) = post.polys[t].at(geoms[t].barycentric(x));
        (ex.w - v, [ex.grad[0] - gr[0], ex.grad[1] - gr[1]], [ex.hess[0] - h[0], ex.hess[1] - h[1], ex.hess[2] - h[2]])
    });
    Some(ErrorNorms {
        sigma_l2: acc[0].sqrt(),
        sigma_cinv: acc[1].sqrt(),
        divdiv: acc[2].sqrt(),
        w: acc[3].sqrt(),
        qw: acc[4].sqrt(),
        qw_2h,
        wstar_2h,
    })
}

/// ||sigma||_0 of the exact bending moment.
pub fn exact_sigma_norm(d: &Discretization) -> f64 {
    let rule = &d.rules.tri;
    d.sigma
        .geoms
        .iter()
        .map(|g| {
            let hint = g.centroid();
            rule.points
                .iter()
                .zip(&rule.weights)
                .map(|(&l, w)| {
                    let s = d.problem.sigma(g.point(l), hint);
                    w * g.area * frob(s, s)
                })
                .sum::<f64>()
        })
        .sum::<f64>()
        .sqrt()
}
