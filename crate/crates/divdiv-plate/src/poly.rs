//! Homogeneous polynomials in barycentric coordinates and the plate operators.

use std::ops::{Add, Mul, Sub};

use thiserror::Error;

use crate::mesh::TriGeom;

#[derive(Debug, Error, PartialEq)]
pub enum PolyError {
    #[error("polynomials live on different triangles ({0} and {1})")]
    MixedTriangles(usize, usize),
}

pub fn num_monomials(d: usize) -> usize {
    (d + 1) * (d + 2) / 2
}

/// Index of `l1^a l2^b l3^(d-a-b)` among degree-`d` monomials.
pub fn mono_index(d: usize, a: usize, b: usize) -> usize {
    (d - a) * (d - a + 1) / 2 + (d - a - b)
}

pub fn exponents(d: usize) -> Vec<[usize; 3]> {
    let mut v = Vec::with_capacity(num_monomials(d));
    for a in (0..=d).rev() {
        for b in (0..=d - a).rev() {
            v.push([a, b, d - a - b]);
        }
    }
    v
}

fn powi(x: f64, n: usize) -> f64 {
    let mut r = 1.0;
    for _ in 0..n {
        r *= x;
    }
    r
}

/// Scalar polynomial of homogeneous degree `deg` in (l1, l2, l3).
#[derive(Clone, Debug, PartialEq)]
pub struct BarycentricPoly {
    pub deg: usize,
    pub coef: Vec<f64>,
    pub tri: usize,
}

impl BarycentricPoly {
    pub fn zero(deg: usize, tri: usize) -> Self {
        Self { deg, coef: vec![0.0; num_monomials(deg)], tri }
    }

    pub fn constant(c: f64, tri: usize) -> Self {
        Self { deg: 0, coef: vec![c], tri }
    }

    pub fn lambda(i: usize, tri: usize) -> Self {
        let mut e = [0; 3];
        e[i] = 1;
        Self::monomial(e, 1.0, tri)
    }

    pub fn monomial(e: [usize; 3], c: f64, tri: usize) -> Self {
        let d = e[0] + e[1] + e[2];
        let mut p = Self::zero(d, tri);
        p.coef[mono_index(d, e[0], e[1])] = c;
        p
    }

    /// Product of powers `l_{i}^{e_i}`, a shorthand for the formulas.
    pub fn lam(e: [usize; 3], tri: usize) -> Self {
        Self::monomial(e, 1.0, tri)
    }

    pub fn eval(&self, l: [f64; 3]) -> f64 {
        let d = self.deg;
        let mut s = 0.0;
        let mut idx = 0;
        for a in (0..=d).rev() {
            let pa = powi(l[0], a);
            for b in (0..=d - a).rev() {
                s += self.coef[idx] * pa * powi(l[1], b) * powi(l[2], d - a - b);
                idx += 1;
            }
        }
        s
    }

    /// Raises the homogeneous degree by multiplying with (l1+l2+l3)^(d-deg).
    pub fn elevate(&self, d: usize) -> Self {
        assert!(d >= self.deg);
        let mut p = self.clone();
        while p.deg < d {
            let nd = p.deg + 1;
            let mut q = Self::zero(nd, p.tri);
            for (e, c) in exponents(p.deg).into_iter().zip(p.coef.iter()) {
                if *c == 0.0 {
                    continue;
                }
                q.coef[mono_index(nd, e[0] + 1, e[1])] += c;
                q.coef[mono_index(nd, e[0], e[1] + 1)] += c;
                q.coef[mono_index(nd, e[0], e[1])] += c;
            }
            p = q;
        }
        p
    }

    pub fn scale(&self, s: f64) -> Self {
        Self { deg: self.deg, coef: self.coef.iter().map(|c| c * s).collect(), tri: self.tri }
    }

    pub fn checked_add(&self, o: &Self) -> Result<Self, PolyError> {
        if self.tri != o.tri {
            return Err(PolyError::MixedTriangles(self.tri, o.tri));
        }
        let d = self.deg.max(o.deg);
        let mut a = self.elevate(d);
        let b = o.elevate(d);
        for (x, y) in a.coef.iter_mut().zip(b.coef) {
            *x += y;
        }
        Ok(a)
    }

    pub fn checked_mul(&self, o: &Self) -> Result<Self, PolyError> {
        if self.tri != o.tri {
            return Err(PolyError::MixedTriangles(self.tri, o.tri));
        }
        let d = self.deg + o.deg;
        let mut r = Self::zero(d, self.tri);
        let eo = exponents(o.deg);
        for (e, c) in exponents(self.deg).into_iter().zip(self.coef.iter()) {
            if *c == 0.0 {
                continue;
            }
            for (f, g) in eo.iter().zip(o.coef.iter()) {
                r.coef[mono_index(d, e[0] + f[0], e[1] + f[1])] += c * g;
            }
        }
        Ok(r)
    }

    /// Formal partial derivative with respect to `l_i`.
    pub fn d_dlambda(&self, i: usize) -> Self {
        if self.deg == 0 {
            return Self::zero(0, self.tri);
        }
        let d = self.deg - 1;
        let mut r = Self::zero(d, self.tri);
        for (e, c) in exponents(self.deg).into_iter().zip(self.coef.iter()) {
            if e[i] == 0 || *c == 0.0 {
                continue;
            }
            let mut f = e;
            f[i] -= 1;
            r.coef[mono_index(d, f[0], f[1])] += c * e[i] as f64;
        }
        r
    }

    pub fn grad(&self, g: &TriGeom) -> VecPoly {
        let mut out = [Self::zero(self.deg.saturating_sub(1), self.tri), Self::zero(self.deg.saturating_sub(1), self.tri)];
        for i in 0..3 {
            let di = self.d_dlambda(i);
            for c in 0..2 {
                out[c] = &out[c] + &di.scale(g.grad_lambda[i][c]);
            }
        }
        VecPoly { c: out }
    }

    /// Derivative in the Cartesian direction `dir` (0 = x, 1 = y).
    pub fn partial(&self, g: &TriGeom, dir: usize) -> Self {
        let mut out = Self::zero(self.deg.saturating_sub(1), self.tri);
        for i in 0..3 {
            out = &out + &self.d_dlambda(i).scale(g.grad_lambda[i][dir]);
        }
        out
    }

    pub fn hessian(&self, g: &TriGeom) -> MatPoly {
        let px = self.partial(g, 0);
        let py = self.partial(g, 1);
        MatPoly { c: [px.partial(g, 0), px.partial(g, 1), py.partial(g, 1)] }
    }

    /// The same function written in the barycentric coordinates of `to`.
    pub fn transfer(&self, from: &TriGeom, to: &TriGeom) -> Self {
        let lin: Vec<Self> = (0..3)
            .map(|i| {
                let b = [from.barycentric(to.p[0]), from.barycentric(to.p[1]), from.barycentric(to.p[2])];
                Self { deg: 1, coef: vec![b[0][i], b[1][i], b[2][i]], tri: to.id }
            })
            .collect();
        let mut out = Self::zero(self.deg, to.id);
        for (e, c) in exponents(self.deg).into_iter().zip(self.coef.iter()) {
            if *c == 0.0 {
                continue;
            }
            let mut m = Self::constant(*c, to.id);
            for i in 0..3 {
                for _ in 0..e[i] {
                    m = &m * &lin[i];
                }
            }
            out = &out + &m;
        }
        out
    }

    pub fn max_abs_coef(&self) -> f64 {
        self.coef.iter().fold(0.0, |m, c| m.max(c.abs()))
    }

    /// Values at a tabulated set of barycentric points.
    pub fn eval_table(&self, t: &MonoTable) -> Vec<f64> {
        let p = if self.deg == t.deg { std::borrow::Cow::Borrowed(self) } else { std::borrow::Cow::Owned(self.elevate(t.deg)) };
        let n = num_monomials(t.deg);
        t.vals
            .chunks(n)
            .map(|row| row.iter().zip(p.coef.iter()).map(|(a, b)| a * b).sum())
            .collect()
    }
}

impl Add for &BarycentricPoly {
    type Output = BarycentricPoly;
    fn add(self, o: &BarycentricPoly) -> BarycentricPoly {
        self.checked_add(o).expect("polynomials on the same triangle")
    }
}

impl Sub for &BarycentricPoly {
    type Output = BarycentricPoly;
    fn sub(self, o: &BarycentricPoly) -> BarycentricPoly {
        self.checked_add(&o.scale(-1.0)).expect("polynomials on the same triangle")
    }
}

impl Mul for &BarycentricPoly {
    type Output = BarycentricPoly;
    fn mul(self, o: &BarycentricPoly) -> BarycentricPoly {
        self.checked_mul(o).expect("polynomials on the same triangle")
    }
}

/// Monomial values of one degree at a list of barycentric points.
#[derive(Clone, Debug)]
pub struct MonoTable {
    pub deg: usize,
    pub npts: usize,
    pub vals: Vec<f64>,
}

impl MonoTable {
    pub fn new(deg: usize, pts: &[[f64; 3]]) -> Self {
        let ex = exponents(deg);
        let mut vals = Vec::with_capacity(pts.len() * ex.len());
        for l in pts {
            for e in &ex {
                vals.push(powi(l[0], e[0]) * powi(l[1], e[1]) * powi(l[2], e[2]));
            }
        }
        Self { deg, npts: pts.len(), vals }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct VecPoly {
    pub c: [BarycentricPoly; 2],
}

impl VecPoly {
    pub fn zero(deg: usize, tri: usize) -> Self {
        Self { c: [BarycentricPoly::zero(deg, tri), BarycentricPoly::zero(deg, tri)] }
    }
    pub fn eval(&self, l: [f64; 3]) -> [f64; 2] {
        [self.c[0].eval(l), self.c[1].eval(l)]
    }
    pub fn add(&self, o: &Self) -> Self {
        Self { c: [&self.c[0] + &o.c[0], &self.c[1] + &o.c[1]] }
    }
    pub fn scale(&self, s: f64) -> Self {
        Self { c: [self.c[0].scale(s), self.c[1].scale(s)] }
    }
    pub fn div(&self, g: &TriGeom) -> BarycentricPoly {
        &self.c[0].partial(g, 0) + &self.c[1].partial(g, 1)
    }
    pub fn sym_curl(&self, g: &TriGeom) -> MatPoly {
        let (p, q) = (&self.c[0], &self.c[1]);
        let off = (&q.partial(g, 1) - &p.partial(g, 0)).scale(0.5);
        MatPoly { c: [p.partial(g, 1), off, q.partial(g, 0).scale(-1.0)] }
    }
    pub fn eps(&self, g: &TriGeom) -> MatPoly {
        let (p, q) = (&self.c[0], &self.c[1]);
        let off = (&p.partial(g, 1) + &q.partial(g, 0)).scale(0.5);
        MatPoly { c: [p.partial(g, 0), off, q.partial(g, 1)] }
    }
    /// Jacobian rows (d_x v_i, d_y v_i).
    pub fn jacobian(&self, g: &TriGeom) -> [[BarycentricPoly; 2]; 2] {
        [
            [self.c[0].partial(g, 0), self.c[0].partial(g, 1)],
            [self.c[1].partial(g, 0), self.c[1].partial(g, 1)],
        ]
    }
}

/// Symmetric-matrix polynomial, components (s11, s12, s22).
#[derive(Clone, Debug, PartialEq)]
pub struct MatPoly {
    pub c: [BarycentricPoly; 3],
}

/// Symmetric matrix stored as (s11, s12, s22).
pub type Sym = [f64; 3];

pub fn sym_outer(a: [f64; 2], b: [f64; 2]) -> Sym {
    // a b^T + b a^T
    [2.0 * a[0] * b[0], a[0] * b[1] + a[1] * b[0], 2.0 * a[1] * b[1]]
}

pub fn outer(a: [f64; 2]) -> Sym {
    [a[0] * a[0], a[0] * a[1], a[1] * a[1]]
}

pub fn sym_apply(s: Sym, v: [f64; 2]) -> [f64; 2] {
    [s[0] * v[0] + s[1] * v[1], s[1] * v[0] + s[2] * v[1]]
}

pub fn sym_form(s: Sym, a: [f64; 2], b: [f64; 2]) -> f64 {
    crate::mesh::dot(a, sym_apply(s, b))
}

pub fn frob(a: Sym, b: Sym) -> f64 {
    a[0] * b[0] + 2.0 * a[1] * b[1] + a[2] * b[2]
}

impl MatPoly {
    pub fn zero(deg: usize, tri: usize) -> Self {
        Self { c: [0, 1, 2].map(|_| BarycentricPoly::zero(deg, tri)) }
    }
    pub fn from_scalar(p: &BarycentricPoly, s: Sym) -> Self {
        Self { c: [p.scale(s[0]), p.scale(s[1]), p.scale(s[2])] }
    }
    pub fn deg(&self) -> usize {
        self.c.iter().map(|p| p.deg).max().unwrap()
    }
    pub fn eval(&self, l: [f64; 3]) -> Sym {
        [self.c[0].eval(l), self.c[1].eval(l), self.c[2].eval(l)]
    }
    pub fn add(&self, o: &Self) -> Self {
        Self { c: [&self.c[0] + &o.c[0], &self.c[1] + &o.c[1], &self.c[2] + &o.c[2]] }
    }
    pub fn axpy(&mut self, a: f64, o: &Self) {
        for i in 0..3 {
            self.c[i] = &self.c[i] + &o.c[i].scale(a);
        }
    }
    pub fn scale(&self, s: f64) -> Self {
        Self { c: [self.c[0].scale(s), self.c[1].scale(s), self.c[2].scale(s)] }
    }
    pub fn elevate(&self, d: usize) -> Self {
        Self { c: [self.c[0].elevate(d), self.c[1].elevate(d), self.c[2].elevate(d)] }
    }
    /// Row-wise divergence.
    pub fn div(&self, g: &TriGeom) -> VecPoly {
        VecPoly {
            c: [
                &self.c[0].partial(g, 0) + &self.c[1].partial(g, 1),
                &self.c[1].partial(g, 0) + &self.c[2].partial(g, 1),
            ],
        }
    }
    /// Row-wise rot.
    pub fn rot(&self, g: &TriGeom) -> VecPoly {
        VecPoly {
            c: [
                &self.c[1].partial(g, 0) - &self.c[0].partial(g, 1),
                &self.c[2].partial(g, 0) - &self.c[1].partial(g, 1),
            ],
        }
    }
    pub fn divdiv(&self, g: &TriGeom) -> BarycentricPoly {
        self.div(g).div(g)
    }
    /// The scalar polynomial a^T tau b.
    pub fn form(&self, a: [f64; 2], b: [f64; 2]) -> BarycentricPoly {
        let s = sym_outer(a, b);
        let w = [0.5 * s[0], s[1], 0.5 * s[2]];
        let mut r = self.c[0].scale(w[0]);
        r = &r + &self.c[1].scale(w[1]);
        &r + &self.c[2].scale(w[2])
    }
    pub fn max_abs_coef(&self) -> f64 {
        self.c.iter().map(|p| p.max_abs_coef()).fold(0.0, f64::max)
    }
    pub fn transfer(&self, from: &TriGeom, to: &TriGeom) -> Self {
        Self { c: [0, 1, 2].map(|i| self.c[i].transfer(from, to)) }
    }
}
