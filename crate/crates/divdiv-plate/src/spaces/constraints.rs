//! Affine constraints on global dofs, their elimination, and the essential
//! boundary conditions of the bending moment space.

use std::collections::BTreeMap;

use faer::linalg::solvers::DenseSolveCore;
use faer::Mat;
use thiserror::Error;

use crate::mesh::{dot, BcKind, Mesh, Point2};
use crate::poly::sym_outer;
use crate::quadrature::gauss_01;

use super::basis::EdgeFunctionals;
use super::SigmaSpace;

#[derive(Debug, Error, PartialEq)]
pub enum ConstraintError {
    #[error("inconsistent constraint at {entity} (residual {residual:e})")]
    Inconsistent { entity: String, residual: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Constraint {
    pub entries: Vec<(usize, f64)>,
    pub rhs: f64,
    pub entity: String,
}

#[derive(Clone, Debug, Default)]
pub struct ConstraintSet {
    pub rows: Vec<Constraint>,
}

/// x = T y + g, where y collects the free dofs.
#[derive(Clone, Debug)]
pub struct Reduction {
    pub n: usize,
    pub free: Vec<usize>,
    /// reduced index of each free global dof
    pub free_index: Vec<Option<usize>>,
    /// slave dof: (reduced coefficients, constant)
    pub slaves: BTreeMap<usize, (Vec<(usize, f64)>, f64)>,
    pub dropped: Vec<String>,
}

impl ConstraintSet {
    pub fn push(&mut self, entries: Vec<(usize, f64)>, rhs: f64, entity: impl Into<String>) {
        self.rows.push(Constraint { entries, rhs, entity: entity.into() });
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Largest |row . x - rhs| relative to the row scale.
    pub fn max_residual(&self, x: &[f64]) -> f64 {
        self.rows
            .iter()
            .map(|r| {
                let v: f64 = r.entries.iter().map(|&(j, c)| c * x[j]).sum();
                let s = r.entries.iter().map(|&(j, c)| (c * x[j]).abs()).fold(r.rhs.abs(), f64::max).max(1.0);
                (v - r.rhs).abs() / s
            })
            .fold(0.0, f64::max)
    }

    /// Eliminates one dof per independent row, pivoting on the largest
    /// coefficient (ties to the smaller index).
    pub fn reduce(&self, n: usize) -> Result<Reduction, ConstraintError> {
        // slave -> (entries over dofs that were free when it was created, constant)
        let mut order: Vec<usize> = vec![];
        let mut expr: BTreeMap<usize, (BTreeMap<usize, f64>, f64)> = BTreeMap::new();
        let mut dropped = vec![];
        for row in &self.rows {
            let mut acc: BTreeMap<usize, f64> = BTreeMap::new();
            let mut rhs = row.rhs;
            let mut stack: Vec<(usize, f64)> = row.entries.clone();
            while let Some((j, c)) = stack.pop() {
                match expr.get(&j) {
                    Some((e, k)) => {
                        rhs -= c * k;
                        for (&i, &a) in e {
                            stack.push((i, c * a));
                        }
                    }
                    None => *acc.entry(j).or_insert(0.0) += c,
                }
            }
            let scale = acc.values().fold(0.0f64, |m, c| m.max(c.abs()));
            let raw_scale = row.entries.iter().fold(0.0f64, |m, e| m.max(e.1.abs())).max(f64::MIN_POSITIVE);
            if scale <= 1e-10 * raw_scale {
                if rhs.abs() > 1e-9 * (row.rhs.abs() + raw_scale) {
                    return Err(ConstraintError::Inconsistent { entity: row.entity.clone(), residual: rhs });
                }
                dropped.push(row.entity.clone());
                continue;
            }
            acc.retain(|_, c| c.abs() > 1e-14 * scale);
            let (&p, &cp) = acc
                .iter()
                .fold(None::<(&usize, &f64)>, |best, cur| match best {
                    Some(b) if b.1.abs() >= cur.1.abs() => Some(b),
                    _ => Some(cur),
                })
                .unwrap();
            let e: BTreeMap<usize, f64> = acc.iter().filter(|(&j, _)| j != p).map(|(&j, &c)| (j, -c / cp)).collect();
            expr.insert(p, (e, rhs / cp));
            order.push(p);
        }
        // back-substitute so that every slave depends on free dofs only
        let mut resolved: BTreeMap<usize, (BTreeMap<usize, f64>, f64)> = BTreeMap::new();
        for &s in order.iter().rev() {
            let (e, c) = &expr[&s];
            let mut out: BTreeMap<usize, f64> = BTreeMap::new();
            let mut k = *c;
            for (&j, &a) in e {
                match resolved.get(&j) {
                    Some((f, d)) => {
                        k += a * d;
                        for (&i, &b) in f {
                            *out.entry(i).or_insert(0.0) += a * b;
                        }
                    }
                    None => *out.entry(j).or_insert(0.0) += a,
                }
            }
            resolved.insert(s, (out, k));
        }
        let free: Vec<usize> = (0..n).filter(|j| !resolved.contains_key(j)).collect();
        let mut free_index = vec![None; n];
        for (i, &j) in free.iter().enumerate() {
            free_index[j] = Some(i);
        }
        let slaves = resolved
            .into_iter()
            .map(|(s, (e, c))| (s, (e.into_iter().map(|(j, a)| (free_index[j].unwrap(), a)).collect(), c)))
            .collect();
        Ok(Reduction { n, free, free_index, slaves, dropped })
    }
}

impl Reduction {
    pub fn identity(n: usize) -> Self {
        Self { n, free: (0..n).collect(), free_index: (0..n).map(Some).collect(), slaves: BTreeMap::new(), dropped: vec![] }
    }

    pub fn nfree(&self) -> usize {
        self.free.len()
    }

    /// Row `i` of T as reduced entries and the row of g.
    pub fn row(&self, i: usize) -> (Vec<(usize, f64)>, f64) {
        match self.free_index[i] {
            Some(r) => (vec![(r, 1.0)], 0.0),
            None => self.slaves[&i].clone(),
        }
    }

    pub fn expand(&self, y: &[f64]) -> Vec<f64> {
        let mut x = vec![0.0; self.n];
        for (i, &j) in self.free.iter().enumerate() {
            x[j] = y[i];
        }
        for (&s, (e, c)) in &self.slaves {
            x[s] = c + e.iter().map(|&(j, a)| a * y[j]).sum::<f64>();
        }
        x
    }
}

/// Local frame of a boundary edge and a point inside the adjacent triangle
/// that selects the piece of piecewise defined data.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EdgeFrame {
    pub n: [f64; 2],
    pub t: [f64; 2],
    pub hint: Point2,
}

/// Boundary moment data: m_b on simply supported and free edges, the
/// effective shear h_b on free edges and the corner forces at free corners.
pub trait MomentData: Sync {
    fn m_b(&self, x: Point2, f: &EdgeFrame) -> f64;
    fn h_b(&self, x: Point2, f: &EdgeFrame) -> f64;
    /// (t+ . sigma n+) - (t- . sigma n-) with e- incoming and e+ outgoing counterclockwise
    fn corner_jump(&self, x: Point2, minus: &EdgeFrame, plus: &EdgeFrame) -> f64;
}

pub struct ZeroData;

impl MomentData for ZeroData {
    fn m_b(&self, _: Point2, _: &EdgeFrame) -> f64 {
        0.0
    }
    fn h_b(&self, _: Point2, _: &EdgeFrame) -> f64 {
        0.0
    }
    fn corner_jump(&self, _: Point2, _: &EdgeFrame, _: &EdgeFrame) -> f64 {
        0.0
    }
}

pub fn edge_frame(mesh: &Mesh, e: usize) -> EdgeFrame {
    let ed = &mesh.edges[e];
    let t = ed.tris[0].expect("edge has a triangle");
    EdgeFrame { n: ed.normal, t: ed.tangent, hint: mesh.geometry(t).centroid() }
}

/// Edge projections with respect to the parameter s in [0, 1] from the
/// lower-index endpoint.
pub struct EdgeProjector {
    pub k: usize,
    pts: Vec<(f64, f64)>,
    /// inverse Gram of the degree k-2 monomials against the trace basis
    trace_inv: Mat<f64>,
    b_inv: Mat<f64>,
}

fn mono(deg: usize, j: usize, s: f64) -> f64 {
    (1.0 - s).powi((deg - j) as i32) * s.powi(j as i32)
}

impl EdgeProjector {
    pub fn new(k: usize, order: usize) -> Self {
        let pts = gauss_01(order / 2 + 2);
        let g1 = Mat::from_fn(k - 1, k - 1, |a, b| pts.iter().map(|&(s, w)| w * mono(k - 2, a, s) * EdgeFunctionals::e(k, b, s)).sum::<f64>());
        let g2 = Mat::from_fn(k, k, |a, b| pts.iter().map(|&(s, w)| w * EdgeFunctionals::b(k, a, s) * EdgeFunctionals::b(k, b, s)).sum::<f64>());
        Self { k, trace_inv: g1.partial_piv_lu().inverse(), b_inv: g2.partial_piv_lu().inverse(), pts }
    }

    pub fn points(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.pts.iter().copied()
    }

    /// Trace coefficients of pi m: endpoint values plus moments against P_{k-2}.
    pub fn interp(&self, m: &dyn Fn(f64) -> f64) -> (f64, f64, Vec<f64>) {
        let k = self.k;
        let (m0, m1) = (m(0.0), m(1.0));
        let rhs: Vec<f64> = (0..k - 1)
            .map(|a| self.pts.iter().map(|&(s, w)| w * mono(k - 2, a, s) * (m(s) - m0 * (1.0 - s).powi(k as i32) - m1 * s.powi(k as i32))).sum())
            .collect();
        let c = (0..k - 1).map(|i| (0..k - 1).map(|j| self.trace_inv[(i, j)] * rhs[j]).sum()).collect();
        (m0, m1, c)
    }

    pub fn eval_interp(&self, (m0, m1, c): &(f64, f64, Vec<f64>), s: f64) -> f64 {
        let k = self.k;
        m0 * (1.0 - s).powi(k as i32) + m1 * s.powi(k as i32) + c.iter().enumerate().map(|(j, a)| a * EdgeFunctionals::e(k, j, s)).sum::<f64>()
    }

    /// L2 projection onto P_{k-1} in the div-trace basis.
    pub fn project(&self, h: &dyn Fn(f64) -> f64) -> Vec<f64> {
        let k = self.k;
        let rhs: Vec<f64> = (0..k).map(|a| self.pts.iter().map(|&(s, w)| w * EdgeFunctionals::b(k, a, s) * h(s)).sum()).collect();
        (0..k).map(|i| (0..k).map(|j| self.b_inv[(i, j)] * rhs[j]).sum()).collect()
    }

    pub fn eval_b(&self, c: &[f64], s: f64) -> f64 {
        c.iter().enumerate().map(|(j, a)| a * EdgeFunctionals::b(self.k, j, s)).sum()
    }
}

pub fn point_on(mesh: &Mesh, e: usize, s: f64) -> Point2 {
    let ed = &mesh.edges[e];
    let (a, b) = (mesh.vertices[ed.v[0]].p, mesh.vertices[ed.v[1]].p);
    Point2::new(a.x + s * (b.x - a.x), a.y + s * (b.y - a.y))
}

/// Evaluates data at an edge point; a non-finite value at an endpoint is
/// replaced by the limit along the edge.
pub fn along(mesh: &Mesh, e: usize, s: f64, f: &dyn Fn(Point2) -> f64) -> f64 {
    let v = f(point_on(mesh, e, s));
    if v.is_finite() {
        return v;
    }
    let d = if s < 0.5 { 1e-9 } else { -1e-9 };
    f(point_on(mesh, e, s + d))
}

/// Expression of a^T tau(x) b at vertex `lv` of triangle `t` in global dofs.
fn vertex_form(space: &SigmaSpace, t: usize, lv: usize, a: [f64; 2], b: [f64; 2]) -> Vec<(usize, f64)> {
    let s = sym_outer(a, b);
    let w = [0.5 * s[0], s[1], 0.5 * s[2]];
    let mut acc: BTreeMap<usize, f64> = BTreeMap::new();
    for c in 0..3 {
        for &(g, x) in &space.map.local[t][3 * lv + c] {
            *acc.entry(g).or_insert(0.0) += w[c] * x;
        }
    }
    acc.into_iter().filter(|e| e.1 != 0.0).collect()
}

fn local_vertex(mesh: &Mesh, t: usize, v: usize) -> usize {
    mesh.triangles[t].v.iter().position(|&x| x == v).unwrap()
}

/// Essential conditions of the bending moment space on simply supported and
/// free edges; `ZeroData` gives the homogeneous space.
pub fn boundary_constraints(space: &SigmaSpace, mesh: &Mesh, data: &dyn MomentData) -> ConstraintSet {
    let k = space.k();
    let proj = EdgeProjector::new(k, 2 * k + 4);
    let ef = EdgeFunctionals::new(k);
    let mut cs = ConstraintSet::default();
    for (e, ed) in mesh.edges.iter().enumerate() {
        let Some(label) = ed.label else { continue };
        if label.kind == BcKind::Clamped {
            continue;
        }
        let t = ed.tris[0].unwrap();
        let fr = edge_frame(mesh, e);
        let (n, tg) = (ed.normal, ed.tangent);
        let mb = |s: f64| along(mesh, e, s, &|x| data.m_b(x, &fr));
        let (m0, m1, c) = proj.interp(&mb);
        for (end, val) in [(0, m0), (1, m1)] {
            let lv = local_vertex(mesh, t, ed.v[end]);
            cs.push(vertex_form(space, t, lv, n, n), val, format!("vertex {} on edge {}", ed.v[end], e));
        }
        let dofs = &space.map.edge_dofs[e];
        for (j, cj) in c.iter().enumerate() {
            cs.push(vec![(dofs[k + j], 1.0)], *cj, format!("edge {e} normal moment {j}"));
        }
        if label.kind != BcKind::Free {
            continue;
        }
        // n.div(tau) + d_t(t.tau n) = P h_b, coefficientwise in the div-trace basis
        let (pa, pb) = (mesh.vertices[ed.v[0]].p, mesh.vertices[ed.v[1]].p);
        let d = pb.sub(pa);
        let scale = dot(tg, d) / ed.length / ed.length;
        let p0 = vertex_form(space, t, local_vertex(mesh, t, ed.v[0]), tg, n);
        let p1 = vertex_form(space, t, local_vertex(mesh, t, ed.v[1]), tg, n);
        let deriv = |f: &dyn Fn(f64) -> f64| ef.div_coefs(&ef.s.iter().map(|&s| f(s)).collect::<Vec<_>>());
        let kf = k as f64;
        let d0 = deriv(&|s| -kf * (1.0 - s).powi(k as i32 - 1));
        let d1 = deriv(&|s| kf * s.powi(k as i32 - 1));
        let dm: Vec<Vec<f64>> = (0..k - 1)
            .map(|m| {
                deriv(&|s| {
                    let (a, b) = ((k - 1 - m) as i32, (m + 1) as i32);
                    let mut v = b as f64 * (1.0 - s).powi(a) * s.powi(b - 1);
                    if a > 0 {
                        v -= a as f64 * (1.0 - s).powi(a - 1) * s.powi(b);
                    }
                    v
                })
            })
            .collect();
        let hb = |s: f64| along(mesh, e, s, &|x| data.h_b(x, &fr));
        let ph = proj.project(&hb);
        for j in 0..k {
            let mut acc: BTreeMap<usize, f64> = BTreeMap::new();
            acc.insert(dofs[j], 1.0);
            for &(g, x) in &p0 {
                *acc.entry(g).or_insert(0.0) += scale * d0[j] * x;
            }
            for &(g, x) in &p1 {
                *acc.entry(g).or_insert(0.0) += scale * d1[j] * x;
            }
            for (m, dmm) in dm.iter().enumerate() {
                *acc.entry(dofs[k + (k - 1) + m]).or_insert(0.0) += scale * dmm[j];
            }
            let entries = acc.into_iter().filter(|e| e.1.abs() > 1e-15).collect();
            cs.push(entries, ph[j], format!("edge {e} shear {j}"));
        }
    }
    for &v in &mesh.corners_f {
        let (em, ep) = mesh.boundary_pair(v).expect("corner on the boundary");
        let (fm, fp) = (edge_frame(mesh, em), edge_frame(mesh, ep));
        let tm = mesh.edges[em].tris[0].unwrap();
        let tp = mesh.edges[ep].tris[0].unwrap();
        let mut acc: BTreeMap<usize, f64> = BTreeMap::new();
        for (g, x) in vertex_form(space, tp, local_vertex(mesh, tp, v), fp.t, fp.n) {
            *acc.entry(g).or_insert(0.0) += x;
        }
        for (g, x) in vertex_form(space, tm, local_vertex(mesh, tm, v), fm.t, fm.n) {
            *acc.entry(g).or_insert(0.0) -= x;
        }
        let p = data.corner_jump(mesh.vertices[v].p, &fm, &fp);
        cs.push(acc.into_iter().filter(|e| e.1.abs() > 1e-15).collect(), p, format!("free corner {v}"));
    }
    cs
}
