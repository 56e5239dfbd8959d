//! Local shape functions of the H(divdiv) element built from the explicit
//! barycentric formulas, made exactly dual to the element functionals.

use faer::linalg::solvers::DenseSolveCore;
use faer::Mat;

use crate::mesh::{dot, TriGeom};
use crate::poly::{outer, sym_outer, BarycentricPoly, MatPoly, Sym};
use crate::quadrature::{edge_point, gauss_01, quad_triangle};

use super::SpaceError;

/// Which local functional a shape function is dual to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum LocalDof {
    /// canonical component (xx, xy, yy) of the value at vertex `v`
    Vertex { v: usize, comp: usize },
    /// coefficient `j` of n_i^T div(tau) on edge `edge`
    DivTrace { edge: usize, j: usize },
    /// coefficient `j` of the interior part of n^T tau n (`comp = 0`) or t^T tau n (`comp = 1`)
    Trace { edge: usize, comp: usize, j: usize },
    Interior { j: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Group {
    Bubble = 1,
    EdgeDivDiv = 2,
    EdgeTrace = 3,
    Vertex = 4,
}

impl LocalDof {
    pub fn group(&self) -> Group {
        match self {
            LocalDof::Vertex { .. } => Group::Vertex,
            LocalDof::DivTrace { .. } => Group::EdgeDivDiv,
            LocalDof::Trace { .. } => Group::EdgeTrace,
            LocalDof::Interior { .. } => Group::Bubble,
        }
    }
}

pub fn dim_local(k: usize) -> usize {
    3 * (k + 1) * (k + 2) / 2
}

pub fn dim_bubble(k: usize) -> usize {
    3 * k * (k - 3) / 2
}

/// Local dof order: vertices, then per edge (div-trace, nn trace, nt trace), then interior.
pub fn local_dofs(k: usize) -> Vec<LocalDof> {
    let mut d = Vec::with_capacity(dim_local(k));
    for v in 0..3 {
        for comp in 0..3 {
            d.push(LocalDof::Vertex { v, comp });
        }
    }
    for edge in 0..3 {
        for j in 0..k {
            d.push(LocalDof::DivTrace { edge, j });
        }
        for comp in 0..2 {
            for j in 0..k - 1 {
                d.push(LocalDof::Trace { edge, comp, j });
            }
        }
    }
    for j in 0..dim_bubble(k) {
        d.push(LocalDof::Interior { j });
    }
    d
}

/// Edge polynomial bases in the parameter s (from the first to the second
/// endpoint) and the coefficient-extraction maps.
#[derive(Clone, Debug)]
pub struct EdgeFunctionals {
    pub k: usize,
    pub s: Vec<f64>,
    pub w: Vec<f64>,
    /// k x nq map from values to coefficients in the div-trace basis B_j
    pub div_map: Mat<f64>,
    /// (k-1) x nq map from values to coefficients in the trace basis E_j
    pub trace_map: Mat<f64>,
}

fn pw(x: f64, n: usize) -> f64 {
    x.powi(n as i32)
}

impl EdgeFunctionals {
    pub fn new(k: usize) -> Self {
        let g = gauss_01(k + 2);
        let s: Vec<f64> = g.iter().map(|p| p.0).collect();
        let w: Vec<f64> = g.iter().map(|p| p.1).collect();
        let mk = |n: usize, f: &dyn Fn(usize, f64) -> f64| {
            let gram = Mat::from_fn(n, n, |a, b| (0..s.len()).map(|q| w[q] * f(a, s[q]) * f(b, s[q])).sum::<f64>());
            let inv = gram.partial_piv_lu().inverse();
            let proj = Mat::from_fn(n, s.len(), |a, q| w[q] * f(a, s[q]));
            &inv * &proj
        };
        let div_map = mk(k, &|j, s| Self::b(k, j, s));
        let trace_map = mk(k - 1, &|j, s| Self::e(k, j, s));
        Self { k, s, w, div_map, trace_map }
    }

    /// Div-trace basis: (1-s)^2, (1-s)^(k-1-j) s^j for 0<j<k-1, s^2.
    pub fn b(k: usize, j: usize, s: f64) -> f64 {
        if j == 0 {
            pw(1.0 - s, 2)
        } else if j == k - 1 {
            s * s
        } else {
            pw(1.0 - s, k - 1 - j) * pw(s, j)
        }
    }

    /// Interior trace basis (1-s)^(k-1-j) s^(j+1).
    pub fn e(k: usize, j: usize, s: f64) -> f64 {
        pw(1.0 - s, k - 1 - j) * pw(s, j + 1)
    }

    pub fn div_coefs(&self, vals: &[f64]) -> Vec<f64> {
        (0..self.k).map(|j| (0..vals.len()).map(|q| self.div_map[(j, q)] * vals[q]).sum()).collect()
    }

    /// Coefficients of p - p(0)(1-s)^k - p(1)s^k in the E basis.
    pub fn trace_coefs(&self, vals: &[f64], p0: f64, p1: f64) -> Vec<f64> {
        let k = self.k;
        let r: Vec<f64> = vals
            .iter()
            .zip(&self.s)
            .map(|(v, &s)| v - p0 * pw(1.0 - s, k) - p1 * pw(s, k))
            .collect();
        (0..k - 1).map(|j| (0..r.len()).map(|q| self.trace_map[(j, q)] * r[q]).sum()).collect()
    }
}

fn tperp(g: &TriGeom, i: usize, j: usize) -> Sym {
    if j == 0 {
        outer(g.n[i])
    } else {
        sym_outer(g.n[i], g.t[i])
    }
}

fn canonical(j: usize) -> Sym {
    let mut s = [0.0; 3];
    s[j] = 1.0;
    s
}

/// The edge div-trace functions; `l = 0` and `l = k-1` are the squared
/// endpoint functions, the others carry a P_{k-3} factor.
pub fn tau2(g: &TriGeom, k: usize, i: usize, l: usize) -> MatPoly {
    let (i1, i2) = ((i + 1) % 3, (i + 2) % 3);
    let id = g.id;
    let mut e = [0usize; 3];
    if l == 0 {
        e[i] = 1;
        e[i1] = 2;
        let c = -g.h[i] / dot(g.n[i], g.t[i2]).powi(2);
        MatPoly::from_scalar(&BarycentricPoly::lam(e, id), outer(g.t[i2])).scale(c)
    } else if l == k - 1 {
        e[i] = 1;
        e[i2] = 2;
        let c = -g.h[i] / dot(g.n[i], g.t[i1]).powi(2);
        MatPoly::from_scalar(&BarycentricPoly::lam(e, id), outer(g.t[i1])).scale(c)
    } else {
        e[i] = 1;
        e[i1] = 1 + (k - 2 - l);
        e[i2] = 1 + (l - 1);
        MatPoly::from_scalar(&BarycentricPoly::lam(e, id), sym_outer(g.t[i1], g.t[i2])).scale(g.c[i])
    }
}

/// Raw interior bubble functions.
pub fn bubbles(g: &TriGeom, k: usize) -> Vec<MatPoly> {
    let mut out = vec![];
    if k < 4 {
        return out;
    }
    let id = g.id;
    for i in 0..3 {
        let (i1, i2) = ((i + 1) % 3, (i + 2) % 3);
        for m in 0..=k - 4 {
            let mut e = [0; 3];
            e[i1] = 2 + (k - 4 - m);
            e[i2] = 2 + m;
            out.push(MatPoly::from_scalar(&BarycentricPoly::lam(e, id), outer(g.t[i])));
        }
    }
    for i in 0..3 {
        let (i1, i2) = ((i + 1) % 3, (i + 2) % 3);
        for f in crate::poly::exponents(k - 4) {
            let mut e = f;
            e[i] += 2;
            e[i1] += 1;
            e[i2] += 1;
            out.push(MatPoly::from_scalar(&BarycentricPoly::lam(e, id), sym_outer(g.t[i1], g.t[i2])));
        }
    }
    out
}

/// Evaluates every local functional on `tau`, in the order of [`local_dofs`].
pub fn apply_functionals(g: &TriGeom, k: usize, ef: &EdgeFunctionals, bub: &[MatPoly], tau: &MatPoly) -> Vec<f64> {
    let mut out = Vec::with_capacity(dim_local(k));
    for v in 0..3 {
        let mut l = [0.0; 3];
        l[v] = 1.0;
        out.extend_from_slice(&tau.eval(l));
    }
    let dv = tau.div(g);
    for i in 0..3 {
        let (n, t) = (g.n[i], g.t[i]);
        let dn = &dv.c[0].scale(n[0]) + &dv.c[1].scale(n[1]);
        let vals: Vec<f64> = ef.s.iter().map(|&s| dn.eval(edge_point(i, s))).collect();
        out.extend(ef.div_coefs(&vals));
        for (a, b) in [(n, n), (t, n)] {
            let p = tau.form(a, b);
            let vals: Vec<f64> = ef.s.iter().map(|&s| p.eval(edge_point(i, s))).collect();
            out.extend(ef.trace_coefs(&vals, p.eval(edge_point(i, 0.0)), p.eval(edge_point(i, 1.0))));
        }
    }
    if !bub.is_empty() {
        let q = quad_triangle(2 * k).expect("supported order");
        for b in bub {
            let mut s = 0.0;
            for (l, w) in q.points.iter().zip(&q.weights) {
                s += w * crate::poly::frob(tau.eval(*l), b.eval(*l));
            }
            out.push(s);
        }
    }
    out
}

/// The raw functions of all four groups in local dof order.
pub fn raw_functions(g: &TriGeom, k: usize, ef: &EdgeFunctionals) -> Vec<MatPoly> {
    let id = g.id;
    let t2: Vec<Vec<MatPoly>> = (0..3).map(|i| (0..k).map(|l| tau2(g, k, i, l)).collect()).collect();
    let mut out = Vec::with_capacity(dim_local(k));
    for i in 0..3 {
        let (i1, i2) = ((i + 1) % 3, (i + 2) % 3);
        let mut e = [0; 3];
        e[i] = 3;
        let l3 = BarycentricPoly::lam(e, id);
        for j in 0..3 {
            let s = canonical(j);
            let mut f = MatPoly::from_scalar(&l3, s);
            let a1 = 3.0 * crate::poly::sym_form(s, g.n[i], g.n[i1]) / g.h[i];
            let a2 = 3.0 * crate::poly::sym_form(s, g.n[i], g.n[i2]) / g.h[i];
            f.axpy(a1, &t2[i1][k - 1]);
            f.axpy(a2, &t2[i2][0]);
            out.push(f);
        }
    }
    for i in 0..3 {
        let (i1, i2) = ((i + 1) % 3, (i + 2) % 3);
        out.extend(t2[i].iter().cloned());
        for comp in 0..2 {
            for m in 0..k - 1 {
                let mut e = [0; 3];
                e[i1] = k - 1 - m;
                e[i2] = m + 1;
                let raw = MatPoly::from_scalar(&BarycentricPoly::lam(e, id), tperp(g, i, comp));
                out.push(remove_div_trace(g, ef, &t2, raw));
            }
        }
    }
    out.extend(bubbles(g, k));
    out.into_iter().map(|f| f.elevate(k)).collect()
}

/// tau minus its div-trace components along the group-2 functions, so that
/// div(tau).n vanishes on the boundary while tau n is unchanged.
pub fn remove_div_trace(g: &TriGeom, ef: &EdgeFunctionals, t2: &[Vec<MatPoly>], tau: MatPoly) -> MatPoly {
    let dv = tau.div(g);
    let mut out = tau;
    for i in 0..3 {
        let n = g.n[i];
        let dn = &dv.c[0].scale(n[0]) + &dv.c[1].scale(n[1]);
        let vals: Vec<f64> = ef.s.iter().map(|&s| dn.eval(edge_point(i, s))).collect();
        for (l, c) in ef.div_coefs(&vals).into_iter().enumerate() {
            if c != 0.0 {
                out.axpy(-c, &t2[i][l]);
            }
        }
    }
    out
}

/// Local basis on one triangle: `funcs[r]` is dual to `dofs[r]`.
#[derive(Clone, Debug)]
pub struct LocalBasis {
    pub k: usize,
    pub tri: usize,
    pub funcs: Vec<MatPoly>,
    pub dofs: Vec<LocalDof>,
    /// Frobenius-norm condition estimate of the functional matrix on the raw functions
    pub cond: f64,
}

impl LocalBasis {
    pub fn group_sizes(&self) -> [usize; 4] {
        let mut s = [0; 4];
        for d in &self.dofs {
            s[d.group() as usize - 1] += 1;
        }
        s
    }
}

fn frob_norm(m: &Mat<f64>) -> f64 {
    let mut s = 0.0;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            s += m[(i, j)] * m[(i, j)];
        }
    }
    s.sqrt()
}

pub fn build_local_basis(g: &TriGeom, k: usize) -> Result<LocalBasis, SpaceError> {
    let ef = EdgeFunctionals::new(k.max(3));
    build_local_basis_with(g, k, &ef)
}

pub fn build_local_basis_with(g: &TriGeom, k: usize, ef: &EdgeFunctionals) -> Result<LocalBasis, SpaceError> {
    if k < 3 {
        return Err(SpaceError::DegreeTooLow(k));
    }
    let raw = raw_functions(g, k, ef);
    let bub = bubbles(g, k);
    let n = raw.len();
    let mut d = Mat::<f64>::zeros(n, n);
    for (c, f) in raw.iter().enumerate() {
        for (r, v) in apply_functionals(g, k, ef, &bub, f).into_iter().enumerate() {
            d[(r, c)] = v;
        }
    }
    let inv = d.partial_piv_lu().inverse();
    let cond = frob_norm(&d) * frob_norm(&inv);
    if !cond.is_finite() || cond > 1e14 {
        return Err(SpaceError::Unisolvence { tri: g.id, cond });
    }
    let mut funcs = Vec::with_capacity(n);
    for j in 0..n {
        let mut f = MatPoly::zero(k, g.id);
        for (c, r) in raw.iter().enumerate() {
            let a = inv[(c, j)];
            if a != 0.0 {
                for m in 0..3 {
                    for (x, y) in f.c[m].coef.iter_mut().zip(&r.c[m].coef) {
                        *x += a * y;
                    }
                }
            }
        }
        funcs.push(f);
    }
    Ok(LocalBasis { k, tri: g.id, funcs, dofs: local_dofs(k), cond })
}

/// Matrix of functional `r` applied to basis function `c`.
pub fn dof_functionals(g: &TriGeom, b: &LocalBasis) -> Mat<f64> {
    let ef = EdgeFunctionals::new(b.k);
    let bub = bubbles(g, b.k);
    let n = b.funcs.len();
    let mut d = Mat::<f64>::zeros(n, n);
    for (c, f) in b.funcs.iter().enumerate() {
        for (r, v) in apply_functionals(g, b.k, &ef, &bub, f).into_iter().enumerate() {
            d[(r, c)] = v;
        }
    }
    d
}

/// The explicit edge-trace functions for k = 3 as printed with the element.
pub fn explicit_trace_k3(g: &TriGeom, i: usize, j: usize, second: bool) -> MatPoly {
    let k = 3;
    let id = g.id;
    let (i1, i2) = ((i + 1) % 3, (i + 2) % 3);
    let tp = tperp(g, i, j);
    let f = |a: [f64; 2], b: [f64; 2]| crate::poly::sym_form(tp, a, b);
    let bubble = MatPoly::from_scalar(&BarycentricPoly::lam([1, 1, 1], id), sym_outer(g.t[i1], g.t[i2]));
    let mut e = [0; 3];
    if !second {
        e[i1] = 2;
        e[i2] = 1;
        let mut r = MatPoly::from_scalar(&BarycentricPoly::lam(e, id), tp);
        r.axpy(f(g.n[i2], g.n[i2]) / g.h[i2], &tau2(g, k, i2, k - 1));
        r.axpy(f(g.n[i2], g.n[i]) / g.h[i2], &tau2(g, k, i, 0));
        r.axpy(2.0 * g.c[i] * f(g.n[i1], g.n[i]) / g.h[i1], &bubble);
        r
    } else {
        e[i1] = 1;
        e[i2] = 2;
        let mut r = MatPoly::from_scalar(&BarycentricPoly::lam(e, id), tp);
        r.axpy(f(g.n[i1], g.n[i1]) / g.h[i1], &tau2(g, k, i1, 0));
        r.axpy(f(g.n[i1], g.n[i]) / g.h[i1], &tau2(g, k, i, k - 1));
        r.axpy(2.0 * g.c[i] * f(g.n[i2], g.n[i]) / g.h[i2], &bubble);
        r
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::Point2;
    use crate::quadrature::quad_edge;

    fn reference() -> TriGeom {
        TriGeom::new(0, [Point2::new(0.0, 0.0), Point2::new(1.0, 0.0), Point2::new(0.0, 1.0)]).unwrap()
    }

    fn skew() -> TriGeom {
        TriGeom::new(4, [Point2::new(0.2, 0.1), Point2::new(1.4, 0.3), Point2::new(0.5, 1.1)]).unwrap()
    }

    fn max_off_identity(d: &Mat<f64>) -> f64 {
        let mut m: f64 = 0.0;
        for i in 0..d.nrows() {
            for j in 0..d.ncols() {
                let e = if i == j { 1.0 } else { 0.0 };
                m = m.max((d[(i, j)] - e).abs());
            }
        }
        m
    }

    #[test]
    fn counts_and_groups() {
        let b = build_local_basis(&reference(), 3).unwrap();
        assert_eq!(b.funcs.len(), 30);
        assert_eq!(b.group_sizes(), [0, 9, 12, 9]);
        let b4 = build_local_basis(&skew(), 4).unwrap();
        assert_eq!(b4.funcs.len(), 45);
        assert_eq!(b4.group_sizes()[0], 6);
        assert!(matches!(build_local_basis(&reference(), 2), Err(SpaceError::DegreeTooLow(2))));
    }

    #[test]
    fn raw_functions_are_dual_for_k3() {
        // the printed formulas are already dual at k = 3
        for g in [reference(), skew()] {
            let ef = EdgeFunctionals::new(3);
            let raw = raw_functions(&g, 3, &ef);
            let mut d = Mat::<f64>::zeros(30, 30);
            for (c, f) in raw.iter().enumerate() {
                for (r, v) in apply_functionals(&g, 3, &ef, &[], f).into_iter().enumerate() {
                    d[(r, c)] = v;
                }
            }
            assert!(max_off_identity(&d) < 1e-11, "{}", max_off_identity(&d));
        }
    }

    #[test]
    fn duality_identity() {
        for k in 3..=5 {
            for g in [reference(), skew()] {
                let b = build_local_basis(&g, k).unwrap();
                let d = dof_functionals(&g, &b);
                let tol = if k <= 4 { 1e-10 } else { 1e-9 };
                assert!(max_off_identity(&d) < tol, "k={k} {}", max_off_identity(&d));
            }
        }
    }

    #[test]
    fn div_trace_identity() {
        let g = skew();
        let k = 4;
        let q = quad_edge(10).unwrap();
        for i in 0..3 {
            for l in 0..k {
                let f = tau2(&g, k, i, l);
                let dv = f.div(&g);
                for s in q.params() {
                    let lp = edge_point(i, s);
                    let v = dv.eval(lp);
                    let got = v[0] * g.n[i][0] + v[1] * g.n[i][1];
                    let expect = EdgeFunctionals::b(k, l, s);
                    assert!((got - expect).abs() < 1e-12, "{i} {l} {got} {expect}");
                    // tau n vanishes on the boundary
                    for e in 0..3 {
                        let lq = edge_point(e, s);
                        let tn = crate::poly::sym_apply(f.eval(lq), g.n[e]);
                        assert!(tn[0].abs() < 1e-12 && tn[1].abs() < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn vertex_functions_reproduce_canonical_values() {
        let g = skew();
        let ef = EdgeFunctionals::new(3);
        let raw = raw_functions(&g, 3, &ef);
        for i in 0..3 {
            for j in 0..3 {
                let f = &raw[3 * i + j];
                for v in 0..3 {
                    let mut l = [0.0; 3];
                    l[v] = 1.0;
                    let val = f.eval(l);
                    for c in 0..3 {
                        let e = if v == i && c == j { 1.0 } else { 0.0 };
                        assert!((val[c] - e).abs() < 1e-13);
                    }
                }
            }
        }
    }

    #[test]
    fn explicit_trace_formula_matches_modification() {
        let g = skew();
        let ef = EdgeFunctionals::new(3);
        let raw = raw_functions(&g, 3, &ef);
        let dofs = local_dofs(3);
        for i in 0..3 {
            for j in 0..2 {
                for (m, second) in [(0, false), (1, true)] {
                    let r = dofs.iter().position(|d| *d == LocalDof::Trace { edge: i, comp: j, j: m }).unwrap();
                    let ex = explicit_trace_k3(&g, i, j, second).elevate(3);
                    for c in 0..3 {
                        let diff = (&ex.c[c] - &raw[r].c[c]).max_abs_coef();
                        assert!(diff < 1e-12, "edge {i} comp {j} m {m}: {diff}");
                    }
                }
            }
        }
    }

    #[test]
    fn bubbles_have_zero_traces() {
        let g = skew();
        let q = quad_edge(12).unwrap();
        for b in bubbles(&g, 5) {
            let dv = b.div(&g);
            for e in 0..3 {
                for s in q.params() {
                    let l = edge_point(e, s);
                    let tn = crate::poly::sym_apply(b.eval(l), g.n[e]);
                    let d = dv.eval(l);
                    assert!(tn[0].abs() < 1e-13 && tn[1].abs() < 1e-13);
                    assert!((d[0] * g.n[e][0] + d[1] * g.n[e][1]).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn needle_triangle_is_unisolvent() {
        let g = TriGeom::new(0, [Point2::new(0.0, 0.0), Point2::new(1.0, 0.0), Point2::new(0.5, 0.01)]).unwrap();
        let b = build_local_basis(&g, 3).unwrap();
        assert!(b.cond.is_finite() && b.cond > 1.0);
        let d = dof_functionals(&g, &b);
        assert!(max_off_identity(&d) < 1e-8);
    }
}
