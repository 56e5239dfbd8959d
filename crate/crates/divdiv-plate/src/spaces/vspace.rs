//! The H1(div) vector space of degree k+1 whose symmetric curl lands in the
//! bending moment space, and its extended variant.

use faer::linalg::solvers::DenseSolveCore;
use faer::Mat;

use crate::mesh::{Mesh, TriGeom};
use crate::poly::{exponents, num_monomials, BarycentricPoly, VecPoly};
use crate::quadrature::{edge_point, quad_edge, quad_triangle};

use super::basis::{apply_functionals, bubbles, EdgeFunctionals};
use super::dofmap::{SigmaDofMap, SplitVertex};
use super::SigmaSpace;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VLocalDof {
    /// comp 0,1: value; 2..6: d_x phi1, d_y phi1, d_x phi2, d_y phi2
    Vertex { v: usize, comp: usize },
    /// moment of component `comp` against the j-th edge monomial of degree k-3
    EdgeValue { edge: usize, comp: usize, j: usize },
    /// moment of div against the j-th edge monomial of degree k-2
    EdgeDiv { edge: usize, j: usize },
    Interior { j: usize },
}

pub fn dim_v_local(k: usize) -> usize {
    (k + 2) * (k + 3)
}

pub fn v_local_dofs(k: usize) -> Vec<VLocalDof> {
    let mut d = vec![];
    for v in 0..3 {
        for comp in 0..6 {
            d.push(VLocalDof::Vertex { v, comp });
        }
    }
    for edge in 0..3 {
        for comp in 0..2 {
            for j in 0..k - 2 {
                d.push(VLocalDof::EdgeValue { edge, comp, j });
            }
        }
        for j in 0..k - 1 {
            d.push(VLocalDof::EdgeDiv { edge, j });
        }
    }
    for j in 0..(k - 3) * (k - 1) {
        d.push(VLocalDof::Interior { j });
    }
    d
}

fn edge_mono(deg: usize, j: usize, s: f64) -> f64 {
    (1.0 - s).powi((deg - j) as i32) * s.powi(j as i32)
}

/// Interior test fields: P_{k-4}^2 plus x^perp times homogeneous P_{k-4},
/// centred at the centroid.
fn interior_tests(g: &TriGeom, k: usize, x: [f64; 2]) -> Vec<[f64; 2]> {
    let m = k - 4;
    let c = g.centroid();
    let (dx, dy) = ((x[0] - c.x) / g.diameter(), (x[1] - c.y) / g.diameter());
    let mut out = vec![];
    for comp in 0..2 {
        for a in 0..=m {
            for b in 0..=m - a {
                let v = dx.powi(a as i32) * dy.powi(b as i32);
                out.push(if comp == 0 { [v, 0.0] } else { [0.0, v] });
            }
        }
    }
    for a in 0..=m {
        let v = dx.powi(a as i32) * dy.powi((m - a) as i32);
        out.push([-dy * v, dx * v]);
    }
    out
}

/// Evaluates all local V functionals on `phi`.
pub fn apply_v_functionals(g: &TriGeom, k: usize, phi: &VecPoly) -> Vec<f64> {
    let mut out = Vec::with_capacity(dim_v_local(k));
    let jac = phi.jacobian(g);
    for v in 0..3 {
        let mut l = [0.0; 3];
        l[v] = 1.0;
        out.push(phi.c[0].eval(l));
        out.push(phi.c[1].eval(l));
        for row in &jac {
            for d in row {
                out.push(d.eval(l));
            }
        }
    }
    let dv = phi.div(g);
    let qe = quad_edge(2 * k + 4).expect("supported order");
    for i in 0..3 {
        for comp in 0..2 {
            for j in 0..k - 2 {
                out.push(qe.params().zip(&qe.weights).map(|(s, w)| w * phi.c[comp].eval(edge_point(i, s)) * edge_mono(k - 3, j, s)).sum());
            }
        }
        for j in 0..k - 1 {
            out.push(qe.params().zip(&qe.weights).map(|(s, w)| w * dv.eval(edge_point(i, s)) * edge_mono(k - 2, j, s)).sum());
        }
    }
    if k >= 4 {
        let q = quad_triangle(2 * k + 2).expect("supported order");
        let n = (k - 3) * (k - 1);
        let mut acc = vec![0.0; n];
        for (l, w) in q.points.iter().zip(&q.weights) {
            let x = g.point(*l);
            let f = phi.eval(*l);
            for (a, t) in acc.iter_mut().zip(interior_tests(g, k, [x.x, x.y])) {
                *a += w * (f[0] * t[0] + f[1] * t[1]);
            }
        }
        out.extend(acc);
    }
    out
}

/// Nodal basis of P_{k+1}(K; R^2) dual to the V functionals.
pub fn v_local_basis(g: &TriGeom, k: usize) -> Vec<VecPoly> {
    let d = k + 1;
    let nm = num_monomials(d);
    let mut raw = vec![];
    for comp in 0..2 {
        for e in exponents(d) {
            let mut v = VecPoly::zero(d, g.id);
            v.c[comp] = BarycentricPoly::lam(e, g.id);
            raw.push(v);
        }
    }
    let n = 2 * nm;
    let mut m = Mat::<f64>::zeros(n, n);
    for (c, f) in raw.iter().enumerate() {
        for (r, v) in apply_v_functionals(g, k, f).into_iter().enumerate() {
            m[(r, c)] = v;
        }
    }
    let inv = m.partial_piv_lu().inverse();
    (0..n)
        .map(|j| {
            let mut f = VecPoly::zero(d, g.id);
            for (c, r) in raw.iter().enumerate() {
                let a = inv[(c, j)];
                for comp in 0..2 {
                    for (x, y) in f.c[comp].coef.iter_mut().zip(&r.c[comp].coef) {
                        *x += a * y;
                    }
                }
            }
            f
        })
        .collect()
}

/// Global numbering of V (or its extension when `splits` is nonempty: the
/// component t^T grad(phi) n may jump across the split line).
#[derive(Clone, Debug)]
pub struct VDofMap {
    pub k: usize,
    pub ndof: usize,
    pub local: Vec<Vec<Vec<(usize, f64)>>>,
    /// (phi1, phi2, gradient dofs...) per vertex, 6 or 7 entries
    pub vertex_dofs: Vec<Vec<usize>>,
    pub edge_dofs: Vec<Vec<usize>>,
    pub interior_dofs: Vec<Vec<usize>>,
}

impl VDofMap {
    pub fn new(mesh: &Mesh, k: usize, splits: &[SplitVertex]) -> Self {
        let nv = mesh.num_vertices();
        let mut split_of = vec![None; nv];
        for (i, s) in splits.iter().enumerate() {
            split_of[s.vertex] = Some(i);
        }
        let mut next = 0;
        let mut take = |n: usize| {
            let r: Vec<usize> = (next..next + n).collect();
            next += n;
            r
        };
        let vertex_dofs: Vec<Vec<usize>> = (0..nv).map(|v| take(if split_of[v].is_some() { 7 } else { 6 })).collect();
        let edge_dofs: Vec<Vec<usize>> = (0..mesh.num_edges()).map(|_| take(2 * (k - 2) + k - 1)).collect();
        let interior_dofs: Vec<Vec<usize>> = (0..mesh.num_triangles()).map(|_| take((k - 3) * (k - 1))).collect();
        let ndof = next;
        let dofs = v_local_dofs(k);
        let mut local = vec![];
        for (t, tri) in mesh.triangles.iter().enumerate() {
            let mut rows = vec![];
            for d in &dofs {
                rows.push(match *d {
                    VLocalDof::Vertex { v, comp } => {
                        let gv = tri.v[v];
                        let vd = &vertex_dofs[gv];
                        match (split_of[gv], comp) {
                            (None, _) | (_, 0) | (_, 1) => vec![(vd[comp], 1.0)],
                            (Some(si), _) => {
                                let s = &splits[si];
                                let (n, tg) = (s.normal, s.tangent);
                                // G_ab = sum over frame pairs of g_xy x_a y_b
                                let (a, b) = ((comp - 2) / 2, (comp - 2) % 2);
                                let tn = if s.plus.contains(&t) { vd[4] } else { vd[5] };
                                vec![
                                    (vd[2], n[a] * n[b]),
                                    (vd[3], n[a] * tg[b]),
                                    (tn, tg[a] * n[b]),
                                    (vd[6], tg[a] * tg[b]),
                                ]
                            }
                        }
                    }
                    VLocalDof::EdgeValue { edge, comp, j } => {
                        let e = mesh.tri_edges[t][edge];
                        let same = mesh.triangles[t].v[(edge + 1) % 3] == mesh.edges[e].v[0];
                        let gj = if same { j } else { k - 3 - j };
                        vec![(edge_dofs[e][comp * (k - 2) + gj], 1.0)]
                    }
                    VLocalDof::EdgeDiv { edge, j } => {
                        let e = mesh.tri_edges[t][edge];
                        let same = mesh.triangles[t].v[(edge + 1) % 3] == mesh.edges[e].v[0];
                        let gj = if same { j } else { k - 2 - j };
                        vec![(edge_dofs[e][2 * (k - 2) + gj], 1.0)]
                    }
                    VLocalDof::Interior { j } => vec![(interior_dofs[t][j], 1.0)],
                });
            }
            local.push(rows);
        }
        Self { k, ndof, local, vertex_dofs, edge_dofs, interior_dofs }
    }

    pub fn local_values(&self, t: usize, y: &[f64]) -> Vec<f64> {
        self.local[t].iter().map(|row| row.iter().map(|&(g, c)| c * y[g]).sum()).collect()
    }
}

/// V space with its local bases.
#[derive(Clone, Debug)]
pub struct VSpace {
    pub map: VDofMap,
    pub bases: Vec<Vec<VecPoly>>,
}

impl VSpace {
    pub fn new(mesh: &Mesh, k: usize, splits: &[SplitVertex]) -> Self {
        use rayon::prelude::*;
        let bases = (0..mesh.num_triangles()).into_par_iter().map(|t| v_local_basis(&mesh.geometry(t), k)).collect();
        Self { map: VDofMap::new(mesh, k, splits), bases }
    }

    pub fn function(&self, t: usize, y: &[f64]) -> VecPoly {
        let vals = self.map.local_values(t, y);
        let b = &self.bases[t];
        let mut f = VecPoly::zero(b[0].c[0].deg, t);
        for (p, v) in b.iter().zip(vals) {
            if v != 0.0 {
                for c in 0..2 {
                    for (a, x) in f.c[c].coef.iter_mut().zip(&p.c[c].coef) {
                        *a += v * x;
                    }
                }
            }
        }
        f
    }
}

/// Sigma coefficients of sym curl of the V function `y`, read off with the
/// defining functionals of the bending moment space.
pub fn sym_curl_lift(mesh: &Mesh, v: &VSpace, sigma: &SigmaSpace, y: &[f64]) -> Vec<f64> {
    let k = sigma.map.k;
    let ef = EdgeFunctionals::new(k);
    let mut cache: Vec<Option<Vec<f64>>> = vec![None; mesh.num_triangles()];
    let map: &SigmaDofMap = &sigma.map;
    let mut out = vec![0.0; map.ndof];
    for (gd, def) in map.defining.iter().enumerate() {
        let vals = cache[def.tri].get_or_insert_with(|| {
            let g = &sigma.geoms[def.tri];
            let tau = v.function(def.tri, y).sym_curl(g);
            apply_functionals(g, k, &ef, &bubbles(g, k), &tau)
        });
        out[gd] = def.weights.iter().map(|&(r, w)| w * vals[r]).sum();
    }
    out
}
