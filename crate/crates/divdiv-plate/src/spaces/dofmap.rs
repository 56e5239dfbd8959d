//! Global numbering of the bending moment spaces and the deflection space.

use crate::mesh::{dot, Mesh};
use crate::poly::{num_monomials, outer, sym_outer, MatPoly};

use super::basis::{dim_bubble, local_dofs, LocalDof};

/// Vertex where the tangential-tangential component is allowed to jump
/// across the line through it with normal `normal`.
#[derive(Clone, Debug, PartialEq)]
pub struct SplitVertex {
    pub vertex: usize,
    pub normal: [f64; 2],
    pub tangent: [f64; 2],
    /// triangles of the star on the positive side
    pub plus: Vec<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SplitPolicy {
    /// the conforming space
    None,
    /// every interior vertex created by bisection, with the bisected edge's frame
    Bisection,
    /// every vertex on the vertical line x = c
    VerticalLine(f64),
}

impl SplitPolicy {
    pub fn split_vertices(&self, mesh: &Mesh) -> Vec<SplitVertex> {
        match *self {
            SplitPolicy::None => vec![],
            SplitPolicy::Bisection => mesh
                .interior_bisection_vertices()
                .into_iter()
                .map(|v| {
                    let b = mesh.vertices[v].bisect.unwrap();
                    let (plus, _) = mesh.patches(v).unwrap();
                    SplitVertex { vertex: v, normal: b.normal, tangent: b.tangent, plus }
                })
                .collect(),
            SplitPolicy::VerticalLine(c) => (0..mesh.num_vertices())
                .filter(|&v| (mesh.vertices[v].p.x - c).abs() < 1e-12)
                .filter_map(|v| {
                    let n = [1.0, 0.0];
                    let (plus, minus) = mesh.patches_with_normal(v, n, false).unwrap();
                    (!plus.is_empty() && !minus.is_empty()).then(|| SplitVertex {
                        vertex: v,
                        normal: n,
                        tangent: [0.0, 1.0],
                        plus,
                    })
                })
                .collect(),
        }
    }
}

/// Global functional that recovers a dof from the local functionals of one element.
#[derive(Clone, Debug, PartialEq)]
pub struct Defining {
    pub tri: usize,
    pub weights: Vec<(usize, f64)>,
}

/// Degrees of freedom of the bending moment space (conforming or extended).
#[derive(Clone, Debug)]
pub struct SigmaDofMap {
    pub k: usize,
    pub ndof: usize,
    pub dofs: Vec<LocalDof>,
    /// `local[t][r]` expresses local functional `r` on triangle `t` in global dofs
    pub local: Vec<Vec<Vec<(usize, f64)>>>,
    /// 3 canonical components, or (nn, nt, tt+, tt-) at split vertices
    pub vertex_dofs: Vec<Vec<usize>>,
    /// per edge: k div-trace, k-1 nn-trace, k-1 nt-trace dofs in global orientation
    pub edge_dofs: Vec<Vec<usize>>,
    pub interior_dofs: Vec<Vec<usize>>,
    pub splits: Vec<SplitVertex>,
    /// index into `splits` per vertex
    pub split_of: Vec<Option<usize>>,
    pub defining: Vec<Defining>,
}

/// Weights w with w . (xx, xy, yy) = a^T tau b.
fn form_weights(a: [f64; 2], b: [f64; 2]) -> [f64; 3] {
    let s = sym_outer(a, b);
    [0.5 * s[0], s[1], 0.5 * s[2]]
}

impl SigmaDofMap {
    pub fn new(mesh: &Mesh, k: usize, policy: SplitPolicy) -> Self {
        Self::with_splits(mesh, k, policy.split_vertices(mesh))
    }

    pub fn with_splits(mesh: &Mesh, k: usize, splits: Vec<SplitVertex>) -> Self {
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
        let vertex_dofs: Vec<Vec<usize>> = (0..nv).map(|v| take(if split_of[v].is_some() { 4 } else { 3 })).collect();
        let per_edge = k + 2 * (k - 1);
        let edge_dofs: Vec<Vec<usize>> = (0..mesh.num_edges()).map(|_| take(per_edge)).collect();
        let nb = dim_bubble(k);
        let interior_dofs: Vec<Vec<usize>> = (0..mesh.num_triangles()).map(|_| take(nb)).collect();
        let ndof = next;
        let dofs = local_dofs(k);

        let mut defining: Vec<Option<Defining>> = vec![None; ndof];
        let mut local = Vec::with_capacity(mesh.num_triangles());
        for (t, tri) in mesh.triangles.iter().enumerate() {
            let g = mesh.geometry(t);
            let mut rows: Vec<Vec<(usize, f64)>> = Vec::with_capacity(dofs.len());
            for (r, d) in dofs.iter().enumerate() {
                match *d {
                    LocalDof::Vertex { v, comp } => {
                        let gv = tri.v[v];
                        let vd = &vertex_dofs[gv];
                        match split_of[gv] {
                            None => {
                                rows.push(vec![(vd[comp], 1.0)]);
                                defining[vd[comp]].get_or_insert(Defining { tri: t, weights: vec![(r, 1.0)] });
                            }
                            Some(si) => {
                                let s = &splits[si];
                                let (n, tt) = (s.normal, s.tangent);
                                let plus = s.plus.contains(&t);
                                // canonical component in the (n, t) frame
                                let nn = outer(n)[comp];
                                let nt = sym_outer(n, tt)[comp];
                                let ttc = outer(tt)[comp];
                                let ttd = if plus { vd[2] } else { vd[3] };
                                rows.push(vec![(vd[0], nn), (vd[1], nt), (ttd, ttc)]);
                                let base = 3 * v;
                                let wn = form_weights(n, n);
                                let wt = form_weights(n, tt);
                                let wtt = form_weights(tt, tt);
                                let mk = |w: [f64; 3]| Defining {
                                    tri: t,
                                    weights: (0..3).map(|c| (base + c, w[c])).collect(),
                                };
                                defining[vd[0]].get_or_insert_with(|| mk(wn));
                                defining[vd[1]].get_or_insert_with(|| mk(wt));
                                defining[ttd].get_or_insert_with(|| mk(wtt));
                            }
                        }
                    }
                    LocalDof::DivTrace { edge, j } => {
                        let e = mesh.tri_edges[t][edge];
                        let (same, sign) = orientation(mesh, t, edge, &g.n[edge]);
                        let gj = if same { j } else { k - 1 - j };
                        let gd = edge_dofs[e][gj];
                        rows.push(vec![(gd, sign)]);
                        defining[gd].get_or_insert(Defining { tri: t, weights: vec![(r, sign)] });
                    }
                    LocalDof::Trace { edge, comp, j } => {
                        let e = mesh.tri_edges[t][edge];
                        let (same, _) = orientation(mesh, t, edge, &g.n[edge]);
                        let gj = if same { j } else { k - 2 - j };
                        let gd = edge_dofs[e][k + comp * (k - 1) + gj];
                        rows.push(vec![(gd, 1.0)]);
                        defining[gd].get_or_insert(Defining { tri: t, weights: vec![(r, 1.0)] });
                    }
                    LocalDof::Interior { j } => {
                        let gd = interior_dofs[t][j];
                        rows.push(vec![(gd, 1.0)]);
                        defining[gd].get_or_insert(Defining { tri: t, weights: vec![(r, 1.0)] });
                    }
                }
            }
            local.push(rows);
        }
        let defining = defining.into_iter().map(|d| d.expect("every dof is touched by an element")).collect();
        Self { k, ndof, dofs, local, vertex_dofs, edge_dofs, interior_dofs, splits, split_of, defining }
    }

    pub fn is_extended(&self) -> bool {
        !self.splits.is_empty()
    }

    /// Local functional values on triangle `t` of the global function `x`.
    pub fn local_values(&self, t: usize, x: &[f64]) -> Vec<f64> {
        self.local[t].iter().map(|row| row.iter().map(|&(g, c)| c * x[g]).sum()).collect()
    }
}

/// Whether local edge `i` of triangle `t` runs in the global direction, and n_i . n_e.
pub fn orientation(mesh: &Mesh, t: usize, i: usize, ni: &[f64; 2]) -> (bool, f64) {
    let e = &mesh.edges[mesh.tri_edges[t][i]];
    let a = mesh.triangles[t].v[(i + 1) % 3];
    let sign = if dot(*ni, e.normal) > 0.0 { 1.0 } else { -1.0 };
    (a == e.v[0], sign)
}

/// Combination of local shape functions with the given local values.
pub fn combine(funcs: &[MatPoly], vals: &[f64]) -> MatPoly {
    let mut f = MatPoly::zero(funcs[0].deg(), funcs[0].c[0].tri);
    for (p, &v) in funcs.iter().zip(vals) {
        if v != 0.0 {
            for m in 0..3 {
                for (a, b) in f.c[m].coef.iter_mut().zip(&p.c[m].coef) {
                    *a += v * b;
                }
            }
        }
    }
    f
}

/// Discontinuous P_{k-2}, numbered element by element with the barycentric monomials.
#[derive(Clone, Debug)]
pub struct UDofMap {
    pub deg: usize,
    pub per_tri: usize,
    pub ndof: usize,
}

impl UDofMap {
    pub fn new(mesh: &Mesh, k: usize) -> Self {
        let deg = k - 2;
        let per_tri = num_monomials(deg);
        Self { deg, per_tri, ndof: per_tri * mesh.num_triangles() }
    }
    pub fn range(&self, t: usize) -> std::ops::Range<usize> {
        t * self.per_tri..(t + 1) * self.per_tri
    }
}
