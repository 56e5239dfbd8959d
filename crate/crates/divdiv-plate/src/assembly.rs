//! Assembly of the mixed system: mass and divdiv blocks, load and boundary
//! trace functionals, data projections and constraint reduction.

use rayon::prelude::*;
use thiserror::Error;

use crate::mesh::{BcKind, Mesh, TriGeom};
use crate::poly::{exponents, frob, BarycentricPoly, MatPoly, MonoTable, Sym};
use crate::problems::{LocalCoef, PlateProblem};
use crate::quadrature::{edge_point, quad_edge, quad_triangle, QuadError, QuadRule};
use crate::spaces::constraints::{boundary_constraints, ConstraintError, EdgeFrame, Reduction};
use crate::spaces::{SigmaSpace, SpaceError, SplitPolicy, UDofMap};

#[derive(Debug, Error, PartialEq)]
pub enum AssemblyError {
    #[error(transparent)]
    Quadrature(#[from] QuadError),
    #[error(transparent)]
    Space(#[from] SpaceError),
    #[error(transparent)]
    Constraint(#[from] ConstraintError),
    #[error("coefficient is not positive definite on triangle {0}")]
    NotPositive(usize),
}

/// Compressed sparse rows with sorted, merged entries.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseMatrix {
    pub nrows: usize,
    pub ncols: usize,
    pub ptr: Vec<usize>,
    pub idx: Vec<usize>,
    pub val: Vec<f64>,
}

impl SparseMatrix {
    pub fn from_triplets(nrows: usize, ncols: usize, mut t: Vec<(usize, usize, f64)>) -> Self {
        t.par_sort_unstable_by_key(|e| (e.0, e.1));
        let mut ptr = vec![0; nrows + 1];
        let mut idx = Vec::with_capacity(t.len() / 2);
        let mut val: Vec<f64> = Vec::with_capacity(t.len() / 2);
        let mut last = None;
        for (i, j, v) in t {
            if last == Some((i, j)) {
                *val.last_mut().unwrap() += v;
            } else {
                idx.push(j);
                val.push(v);
                ptr[i + 1] += 1;
                last = Some((i, j));
            }
        }
        for i in 0..nrows {
            ptr[i + 1] += ptr[i];
        }
        Self { nrows, ncols, ptr, idx, val }
    }

    pub fn nnz(&self) -> usize {
        self.val.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        (self.ptr[i]..self.ptr[i + 1]).map(move |p| (self.idx[p], self.val[p]))
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.row(i).find(|e| e.0 == j).map_or(0.0, |e| e.1)
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.nrows).map(|i| self.row(i).map(|(j, v)| v * x[j]).sum()).collect()
    }

    pub fn mul_t_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.ncols];
        for (i, xi) in x.iter().enumerate() {
            for (j, v) in self.row(i) {
                y[j] += v * xi;
            }
        }
        y
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.nrows).flat_map(move |i| self.row(i).map(move |(j, v)| (i, j, v)))
    }
}

/// Quadrature rule shared by all elements with tabulated U basis values.
#[derive(Clone, Debug)]
pub struct ElementRules {
    pub order: usize,
    pub tri: QuadRule,
    pub edge: QuadRule,
    /// U basis values at the triangle points, `u_vals[q * nu + j]`
    pub u_vals: Vec<f64>,
    pub nu: usize,
}

impl ElementRules {
    pub fn new(k: usize, order: usize) -> Result<Self, QuadError> {
        let tri = quad_triangle(order)?;
        let edge = quad_edge(order)?;
        let t = MonoTable::new(k - 2, &tri.points);
        let nu = exponents(k - 2).len();
        Ok(Self { order, tri, edge, u_vals: t.vals, nu })
    }
}

pub fn default_order(k: usize) -> usize {
    2 * k + 4
}

/// U basis function `j` on triangle `t`.
pub fn u_basis(k: usize, t: usize, j: usize) -> BarycentricPoly {
    BarycentricPoly::lam(exponents(k - 2)[j], t)
}

/// Coefficient at the quadrature points of each triangle.
pub fn local_coefs(problem: &PlateProblem, geoms: &[TriGeom], rule: &QuadRule) -> Result<Vec<Vec<LocalCoef>>, AssemblyError> {
    geoms
        .iter()
        .map(|g| {
            rule.points
                .iter()
                .map(|&l| {
                    let c = problem.coef.at(g.point(l));
                    if c.c > 0.0 && c.nu > -1.0 && c.nu < 1.0 {
                        Ok(c)
                    } else {
                        Err(AssemblyError::NotPositive(g.id))
                    }
                })
                .collect()
        })
        .collect()
}

/// Values of the local basis and its divdiv at the triangle points.
pub struct Tabulated {
    pub vals: Vec<Vec<Sym>>,
    pub dd: Vec<Vec<f64>>,
}

pub fn tabulate(sigma: &SigmaSpace, t: usize, rule: &QuadRule) -> Tabulated {
    let g = &sigma.geoms[t];
    let b = &sigma.bases[t];
    let deg = b.funcs[0].deg();
    let table = MonoTable::new(deg, &rule.points);
    let ddtable = MonoTable::new(deg.saturating_sub(2), &rule.points);
    let vals = b
        .funcs
        .iter()
        .map(|f| {
            let c: Vec<Vec<f64>> = f.c.iter().map(|p| p.eval_table(&table)).collect();
            (0..rule.len()).map(|q| [c[0][q], c[1][q], c[2][q]]).collect()
        })
        .collect();
    let dd = b.funcs.iter().map(|f| f.divdiv(g).eval_table(&ddtable)).collect();
    Tabulated { vals, dd }
}

struct Local {
    a: Vec<(usize, usize, f64)>,
    b: Vec<(usize, usize, f64)>,
    f_sigma: Vec<(usize, f64)>,
    f_u: Vec<(usize, f64)>,
}

fn scatter(rows: &[Vec<(usize, f64)>], m: &[Vec<f64>], cols: &[Vec<(usize, f64)>], out: &mut Vec<(usize, usize, f64)>) {
    for (r, row) in rows.iter().enumerate() {
        for (s, col) in cols.iter().enumerate() {
            let v = m[r][s];
            if v == 0.0 {
                continue;
            }
            for &(gi, ci) in row {
                for &(gj, cj) in col {
                    out.push((gi, gj, v * ci * cj));
                }
            }
        }
    }
}

fn local_edge(mesh: &Mesh, t: usize, e: usize) -> usize {
    mesh.tri_edges[t].iter().position(|&x| x == e).unwrap()
}

/// Boundary trace functional of one local shape function set on local edge `i`:
/// <n.tau n, g_b>_C + <t.tau n, d_t w_b>_{C,S} - <n.div tau, w_b>_{C,S}.
fn trace_terms(problem: &PlateProblem, g: &TriGeom, funcs: &[MatPoly], i: usize, kind: BcKind, rule: &QuadRule) -> Vec<f64> {
    let (n, t) = (g.n[i], g.t[i]);
    let fr = EdgeFrame { n, t, hint: g.centroid() };
    let divs: Vec<_> = funcs.iter().map(|f| f.div(g)).collect();
    let mut out = vec![0.0; funcs.len()];
    for (s, w) in rule.params().zip(&rule.weights) {
        let l = edge_point(i, s);
        let x = g.point(l);
        let (wb, dtw, gb) = problem.clamped_data(x, &fr);
        let wl = w * g.len[i];
        for (r, f) in funcs.iter().enumerate() {
            let v = f.eval(l);
            let tn = crate::poly::sym_form(v, t, n);
            let dv = divs[r].eval(l);
            let dn = dv[0] * n[0] + dv[1] * n[1];
            let mut acc = tn * dtw - dn * wb;
            if kind == BcKind::Clamped {
                acc += crate::poly::sym_form(v, n, n) * gb;
            }
            out[r] += wl * acc;
        }
    }
    out
}

/// Endpoint terms of a free edge at vertices shared with a clamped or simply
/// supported edge, where the deflection is prescribed.
fn junction_terms(problem: &PlateProblem, g: &TriGeom, funcs: &[MatPoly], i: usize, ends: [bool; 2]) -> Vec<f64> {
    let (n, t) = (g.n[i], g.t[i]);
    let fr = EdgeFrame { n, t, hint: g.centroid() };
    let x0 = g.point(edge_point(i, 0.0));
    let x1 = g.point(edge_point(i, 1.0));
    let forward = (x1.x - x0.x) * t[0] + (x1.y - x0.y) * t[1] > 0.0;
    let mut out = vec![0.0; funcs.len()];
    for (end, s) in [(0, 0.0), (1, 1.0)] {
        if !ends[end] {
            continue;
        }
        let l = edge_point(i, s);
        let (wb, _, _) = problem.clamped_data(g.point(l), &fr);
        let sign = if (end == 1) == forward { 1.0 } else { -1.0 };
        for (r, f) in funcs.iter().enumerate() {
            out[r] += sign * crate::poly::sym_form(f.eval(l), t, n) * wb;
        }
    }
    out
}

/// The unreduced mixed system: A (Sigma x Sigma), B (U x Sigma) and loads.
#[derive(Clone, Debug)]
pub struct System {
    pub a: SparseMatrix,
    pub b: SparseMatrix,
    pub f_sigma: Vec<f64>,
    pub f_u: Vec<f64>,
}

pub struct Discretization<'a> {
    pub problem: &'a PlateProblem,
    pub mesh: &'a Mesh,
    pub sigma: SigmaSpace,
    pub u: UDofMap,
    /// coefficient per triangle and quadrature point
    pub coefs: Vec<Vec<LocalCoef>>,
    pub rules: ElementRules,
}

impl<'a> Discretization<'a> {
    pub fn new(problem: &'a PlateProblem, mesh: &'a Mesh, k: usize, policy: SplitPolicy, order: usize) -> Result<Self, AssemblyError> {
        let sigma = SigmaSpace::new(mesh, k, policy)?;
        let u = UDofMap::new(mesh, k);
        let rules = ElementRules::new(k, order)?;
        let coefs = local_coefs(problem, &sigma.geoms, &rules.tri)?;
        Ok(Self { problem, mesh, sigma, u, coefs, rules })
    }

    pub fn k(&self) -> usize {
        self.sigma.k()
    }

    pub fn assemble(&self) -> System {
        let mesh = self.mesh;
        let rules = &self.rules;
        let nu = rules.nu;
        let mut kinds = vec![(false, false); mesh.num_vertices()];
        for e in &mesh.edges {
            if let Some(label) = e.label {
                for &v in &e.v {
                    if label.kind == BcKind::Free {
                        kinds[v].0 = true;
                    } else {
                        kinds[v].1 = true;
                    }
                }
            }
        }
        let junction = |v: usize| kinds[v].0 && kinds[v].1;
        let locals: Vec<Local> = (0..mesh.num_triangles())
            .into_par_iter()
            .map(|t| {
                let g = &self.sigma.geoms[t];
                let tab = tabulate(&self.sigma, t, &rules.tri);
                let c = &self.coefs[t];
                let n = tab.vals.len();
                let mut am = vec![vec![0.0; n]; n];
                let mut bm = vec![vec![0.0; n]; nu];
                let mut fu = vec![0.0; nu];
                for (q, (l, w)) in rules.tri.points.iter().zip(&rules.tri.weights).enumerate() {
                    let wa = w * g.area;
                    let cinv: Vec<Sym> = tab.vals.iter().map(|v| c[q].apply_inv(v[q])).collect();
                    for r in 0..n {
                        for s in r..n {
                            am[r][s] += wa * frob(cinv[s], tab.vals[r][q]);
                        }
                    }
                    let psi = &rules.u_vals[q * nu..(q + 1) * nu];
                    for (j, p) in psi.iter().enumerate() {
                        for s in 0..n {
                            bm[j][s] += wa * tab.dd[s][q] * p;
                        }
                    }
                    let f = self.problem.f(g.point(*l), g.centroid());
                    for (j, p) in psi.iter().enumerate() {
                        fu[j] += wa * f * p;
                    }
                }
                for r in 0..n {
                    for s in 0..r {
                        am[r][s] = am[s][r];
                    }
                }
                let rows = &self.sigma.map.local[t];
                let mut a = Vec::with_capacity(n * n);
                scatter(rows, &am, rows, &mut a);
                let urows: Vec<Vec<(usize, f64)>> = self.u.range(t).map(|i| vec![(i, 1.0)]).collect();
                let mut b = Vec::with_capacity(nu * n);
                scatter(&urows, &bm, rows, &mut b);
                let mut f_sigma = vec![];
                for (i, &e) in mesh.tri_edges[t].iter().enumerate() {
                    let Some(label) = mesh.edges[e].label else { continue };
                    if !self.problem.has_exact() {
                        continue;
                    }
                    let funcs = &self.sigma.bases[t].funcs;
                    let tr = if label.kind == BcKind::Free {
                        let tv = mesh.triangles[t].v;
                        let ends = [junction(tv[(i + 1) % 3]), junction(tv[(i + 2) % 3])];
                        if !ends[0] && !ends[1] {
                            continue;
                        }
                        junction_terms(self.problem, g, funcs, i, ends)
                    } else {
                        trace_terms(self.problem, g, funcs, i, label.kind, &rules.edge)
                    };
                    for (r, v) in tr.into_iter().enumerate() {
                        for &(gi, ci) in &rows[r] {
                            f_sigma.push((gi, ci * v));
                        }
                    }
                }
                let f_u = self.u.range(t).zip(fu).collect();
                Local { a, b, f_sigma, f_u }
            })
            .collect();
        let ns = self.sigma.ndof();
        let mut f_sigma = vec![0.0; ns];
        let mut f_u = vec![0.0; self.u.ndof];
        let mut at = Vec::with_capacity(locals.iter().map(|l| l.a.len()).sum());
        let mut bt = Vec::with_capacity(locals.iter().map(|l| l.b.len()).sum());
        for l in locals {
            at.extend(l.a);
            bt.extend(l.b);
            for (i, v) in l.f_sigma {
                f_sigma[i] += v;
            }
            for (i, v) in l.f_u {
                f_u[i] += v;
            }
        }
        System {
            a: SparseMatrix::from_triplets(ns, ns, at),
            b: SparseMatrix::from_triplets(self.u.ndof, ns, bt),
            f_sigma,
            f_u,
        }
    }

    /// Essential boundary conditions of the bending moment space.
    pub fn reduction(&self) -> Result<(Reduction, crate::spaces::constraints::ConstraintSet), AssemblyError> {
        let cs = boundary_constraints(&self.sigma, self.mesh, self.problem);
        let r = cs.reduce(self.sigma.ndof())?;
        Ok((r, cs))
    }
}

/// The mixed system on the free dofs: [A' B'^T; B' 0].
#[derive(Clone, Debug)]
pub struct ReducedSystem {
    pub a: SparseMatrix,
    pub b: SparseMatrix,
    pub f_sigma: Vec<f64>,
    pub f_u: Vec<f64>,
}

pub fn reduce(sys: &System, red: &Reduction) -> ReducedSystem {
    let nf = red.nfree();
    let rows: Vec<(Vec<(usize, f64)>, f64)> = (0..red.n).map(|i| red.row(i)).collect();
    let mut f_sigma = vec![0.0; nf];
    for (i, (e, _)) in rows.iter().enumerate() {
        for &(r, c) in e {
            f_sigma[r] += c * sys.f_sigma[i];
        }
    }
    let mut at = Vec::with_capacity(sys.a.nnz());
    for (i, j, v) in sys.a.triplets() {
        let (ei, _) = &rows[i];
        let (ej, gj) = &rows[j];
        for &(ri, ci) in ei {
            if *gj != 0.0 {
                f_sigma[ri] -= v * ci * gj;
            }
            for &(rj, cj) in ej {
                at.push((ri, rj, v * ci * cj));
            }
        }
    }
    let mut f_u = sys.f_u.clone();
    let mut bt = Vec::with_capacity(sys.b.nnz());
    for (i, j, v) in sys.b.triplets() {
        let (ej, gj) = &rows[j];
        f_u[i] -= v * gj;
        for &(rj, cj) in ej {
            bt.push((i, rj, v * cj));
        }
    }
    ReducedSystem {
        a: SparseMatrix::from_triplets(nf, nf, at),
        b: SparseMatrix::from_triplets(sys.b.nrows, nf, bt),
        f_sigma,
        f_u,
    }
}

/// L2 projection of `f` onto P_{k-2} on triangle `t`, as U coefficients.
pub fn project_u(k: usize, g: &TriGeom, rule: &QuadRule, f: &dyn Fn([f64; 3]) -> f64) -> Vec<f64> {
    project_degree(k - 2, g, rule, f)
}

/// L2 projection onto homogeneous barycentric polynomials of degree `d`.
pub fn project_degree(d: usize, g: &TriGeom, rule: &QuadRule, f: &dyn Fn([f64; 3]) -> f64) -> Vec<f64> {
    use faer::linalg::solvers::Solve;
    let ex = exponents(d);
    let n = ex.len();
    let table = MonoTable::new(d, &rule.points);
    let mut m = faer::Mat::<f64>::zeros(n, n);
    let mut rhs = faer::Mat::<f64>::zeros(n, 1);
    for (q, (l, w)) in rule.points.iter().zip(&rule.weights).enumerate() {
        let phi = &table.vals[q * n..(q + 1) * n];
        let fv = f(*l);
        for i in 0..n {
            rhs[(i, 0)] += w * phi[i] * fv;
            for j in 0..n {
                m[(i, j)] += w * phi[i] * phi[j];
            }
        }
    }
    let _ = g;
    let x = m.partial_piv_lu().solve(&rhs);
    (0..n).map(|i| x[(i, 0)]).collect()
}

/// Local edge index helper exposed for the estimator and postprocessing.
pub fn edge_in_triangle(mesh: &Mesh, t: usize, e: usize) -> usize {
    local_edge(mesh, t, e)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::builders::unit_square;
    use crate::problems::{manufactured, zero_data, Coefficient};
    use std::sync::Arc;

    #[test]
    fn sparse_merges_duplicates() {
        let m = SparseMatrix::from_triplets(2, 3, vec![(1, 2, 1.0), (0, 0, 2.0), (1, 2, 0.5), (1, 0, -1.0)]);
        assert_eq!(m.nnz(), 3);
        assert_eq!(m.get(1, 2), 1.5);
        assert_eq!(m.mul_vec(&[1.0, 0.0, 2.0]), vec![2.0, 2.0]);
        assert_eq!(m.mul_t_vec(&[1.0, 1.0]), vec![1.0, 0.0, 1.5]);
    }

    #[test]
    fn mass_is_symmetric_and_scales() {
        let mesh = unit_square(BcKind::Clamped).uniform_refine();
        let p1 = zero_data("a", mesh.clone(), Coefficient::identity(), 1.0);
        let p2 = zero_data("b", mesh.clone(), Coefficient::Scalar(Arc::new(|_| 2.0)), 1.0);
        let d1 = Discretization::new(&p1, &mesh, 3, SplitPolicy::None, 10).unwrap();
        let d2 = Discretization::new(&p2, &mesh, 3, SplitPolicy::None, 10).unwrap();
        let s1 = d1.assemble();
        let s2 = d2.assemble();
        let mut maxa: f64 = 0.0;
        for (i, j, v) in s1.a.triplets() {
            maxa = maxa.max(v.abs());
            assert!((v - s1.a.get(j, i)).abs() <= 1e-13 * maxa.max(1.0));
            // C = 2 I halves the compliance
            assert!((s2.a.get(i, j) - 0.5 * v).abs() <= 1e-13 * v.abs().max(1.0));
        }
        for i in 0..s1.a.nrows {
            assert!(s1.a.get(i, i) > 0.0);
        }
        // f = 1 tested with the constant: sum of barycentric monomials of degree 1 is 1
        let total: f64 = s1.f_u.iter().sum();
        assert!((total - 1.0).abs() < 1e-13);
        assert!(s1.f_sigma.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn divdiv_of_interpolated_quadratic_moment() {
        // sigma = hess of w in P4: divdiv sigma = bilap w, constant here
        let mesh = unit_square(BcKind::Clamped).uniform_refine();
        let p = zero_data("q", mesh.clone(), Coefficient::identity(), 0.0);
        let d = Discretization::new(&p, &mesh, 3, SplitPolicy::None, 10).unwrap();
        let sys = d.assemble();
        // sigma = (x^2, 0, y^2) has divdiv = 4
        let x = d.sigma.interpolate(&|t| {
            let g = &d.sigma.geoms[t];
            let xs = BarycentricPoly { deg: 1, coef: vec![g.p[0].x, g.p[1].x, g.p[2].x], tri: t };
            let ys = BarycentricPoly { deg: 1, coef: vec![g.p[0].y, g.p[1].y, g.p[2].y], tri: t };
            MatPoly { c: [&xs * &xs, BarycentricPoly::zero(2, t), &ys * &ys] }
        });
        let bx = sys.b.mul_vec(&x);
        for t in 0..mesh.num_triangles() {
            let g = &d.sigma.geoms[t];
            // integral of a degree-1 barycentric monomial is |K|/3
            for i in d.u.range(t) {
                assert!((bx[i] - 4.0 * g.area / 3.0).abs() < 1e-12, "{} {}", bx[i], g.area);
            }
        }
        let _ = manufactured(5, BcKind::Clamped);
    }
}
