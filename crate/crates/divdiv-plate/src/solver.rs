//! Direct solution of the reduced saddle point system.

use faer::linalg::solvers::Solve;
use faer::sparse::{SparseColMat, Triplet};
use faer::Mat;
use thiserror::Error;

use crate::assembly::{reduce, AssemblyError, Discretization, ReducedSystem, SparseMatrix};

#[derive(Debug, Error, PartialEq)]
pub enum SolverError {
    #[error("matrix is structurally singular at column {0}")]
    Singular(usize),
    #[error("sparse factorization failed")]
    Factorization,
    #[error("relative residual {0:.3e} exceeds tolerance")]
    Residual(f64),
    #[error(transparent)]
    Assembly(#[from] AssemblyError),
}

pub const RESIDUAL_TOL: f64 = 1e-9;

#[derive(Clone, Debug)]
pub struct KktSolution {
    pub sigma: Vec<f64>,
    /// the Lagrange multiplier z = -w
    pub z: Vec<f64>,
    pub residual: f64,
}

fn kkt_apply(r: &ReducedSystem, x: &[f64]) -> Vec<f64> {
    let n = r.a.nrows;
    let (s, z) = x.split_at(n);
    let mut top = r.a.mul_vec(s);
    for (t, v) in top.iter_mut().zip(r.b.mul_t_vec(z)) {
        *t += v;
    }
    let mut out = top;
    out.extend(r.b.mul_vec(s));
    out
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Diagonal equilibration: sigma unknowns by the mass diagonal, constraint
/// rows by their largest entry after column scaling.
fn equilibrate(r: &ReducedSystem) -> (ReducedSystem, Vec<f64>, Vec<f64>) {
    let n = r.a.nrows;
    let mut cs = vec![1.0; n];
    for (i, j, v) in r.a.triplets() {
        if i == j && v > 0.0 {
            cs[i] = 1.0 / v.sqrt();
        }
    }
    let mut rs = vec![0.0f64; r.b.nrows];
    for (i, j, v) in r.b.triplets() {
        rs[i] = rs[i].max((v * cs[j]).abs());
    }
    for x in rs.iter_mut() {
        *x = if *x > 0.0 { 1.0 / *x } else { 1.0 };
    }
    let a = SparseMatrix::from_triplets(n, n, r.a.triplets().map(|(i, j, v)| (i, j, cs[i] * v * cs[j])).collect());
    let b = SparseMatrix::from_triplets(r.b.nrows, n, r.b.triplets().map(|(i, j, v)| (i, j, rs[i] * v * cs[j])).collect());
    let f_sigma = r.f_sigma.iter().zip(&cs).map(|(f, c)| f * c).collect();
    let f_u = r.f_u.iter().zip(&rs).map(|(f, c)| f * c).collect();
    (ReducedSystem { a, b, f_sigma, f_u }, cs, rs)
}

/// Solve [A B^T; B 0] [s; z] = [f; g] by sparse LU with one refinement step.
/// The reported residual is relative and measured on the equilibrated system.
pub fn solve_kkt(r: &ReducedSystem) -> Result<KktSolution, SolverError> {
    let (r, cs, rs) = &equilibrate(r);
    let n = r.a.nrows;
    let m = r.b.nrows;
    let dim = n + m;
    let mut t = Vec::with_capacity(r.a.nnz() + 2 * r.b.nnz());
    for (i, j, v) in r.a.triplets() {
        t.push(Triplet::new(i, j, v));
    }
    for (i, j, v) in r.b.triplets() {
        t.push(Triplet::new(n + i, j, v));
        t.push(Triplet::new(j, n + i, v));
    }
    let mat = SparseColMat::<usize, f64>::try_new_from_triplets(dim, dim, &t).map_err(|_| SolverError::Factorization)?;
    drop(t);
    let lu = mat.sp_lu().map_err(|e| match e {
        faer::sparse::linalg::LuError::SymbolicSingular { index } => SolverError::Singular(index),
        _ => SolverError::Factorization,
    })?;
    let mut rhs: Vec<f64> = r.f_sigma.clone();
    rhs.extend_from_slice(&r.f_u);
    let solve = |b: &[f64]| -> Vec<f64> {
        let bm = Mat::from_fn(dim, 1, |i, _| b[i]);
        let x = lu.solve(&bm);
        (0..dim).map(|i| x[(i, 0)]).collect()
    };
    let mut x = solve(&rhs);
    let bnorm = norm(&rhs).max(f64::MIN_POSITIVE);
    let res = |x: &[f64]| -> Vec<f64> { rhs.iter().zip(kkt_apply(r, x)).map(|(b, ax)| b - ax).collect() };
    let r0 = res(&x);
    let d = solve(&r0);
    for (a, b) in x.iter_mut().zip(d) {
        *a += b;
    }
    let rel = norm(&res(&x)) / bnorm;
    if !rel.is_finite() || rel > RESIDUAL_TOL {
        return Err(SolverError::Residual(rel));
    }
    let z = x.split_off(n).into_iter().zip(rs).map(|(z, c)| z * c).collect();
    let sigma = x.into_iter().zip(cs).map(|(s, c)| s * c).collect();
    Ok(KktSolution { sigma, z, residual: rel })
}

/// Discrete solution in global coefficients.
#[derive(Clone, Debug)]
pub struct Solution {
    pub sigma: Vec<f64>,
    pub w: Vec<f64>,
    pub residual: f64,
    pub ndof_sigma: usize,
    pub ndof_u: usize,
}

/// Assemble, impose the essential conditions and solve.
pub fn solve(d: &Discretization) -> Result<Solution, SolverError> {
    let sys = d.assemble();
    let (red, _) = d.reduction()?;
    let rs = reduce(&sys, &red);
    drop(sys);
    let kkt = solve_kkt(&rs)?;
    let sigma = red.expand(&kkt.sigma);
    let w = kkt.z.iter().map(|z| -z).collect();
    Ok(Solution { sigma, w, residual: kkt.residual, ndof_sigma: red.nfree(), ndof_u: d.u.ndof })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> ReducedSystem {
        let a = SparseMatrix::from_triplets(3, 3, vec![(0, 0, 2.0), (1, 1, 3.0), (2, 2, 1.0), (0, 1, 0.5), (1, 0, 0.5)]);
        let b = SparseMatrix::from_triplets(1, 3, vec![(0, 0, 1.0), (0, 2, 1.0)]);
        ReducedSystem { a, b, f_sigma: vec![1.0, 2.0, 3.0], f_u: vec![4.0] }
    }

    #[test]
    fn small_saddle_point() {
        let r = small();
        let s = solve_kkt(&r).unwrap();
        let mut x = s.sigma.clone();
        x.extend(&s.z);
        let ax = kkt_apply(&r, &x);
        let b = [1.0, 2.0, 3.0, 4.0];
        for (p, q) in ax.iter().zip(b) {
            assert!((p - q).abs() < 1e-13);
        }
    }

    #[test]
    fn repeated_solves_are_identical() {
        let r = small();
        let a = solve_kkt(&r).unwrap();
        let b = solve_kkt(&r).unwrap();
        assert_eq!(a.sigma, b.sigma);
        assert_eq!(a.z, b.z);
    }

    #[test]
    fn singular_is_reported() {
        let a = SparseMatrix::from_triplets(2, 2, vec![(0, 0, 1.0)]);
        let b = SparseMatrix::from_triplets(0, 2, vec![]);
        let r = ReducedSystem { a, b, f_sigma: vec![1.0, 1.0], f_u: vec![] };
        assert!(solve_kkt(&r).is_err());
    }
}

#[cfg(test)]
mod patch {
    use super::*;
    use crate::assembly::{default_order, Discretization};
    use crate::mesh::BcKind;
    use crate::postprocess::{error_norms, exact_sigma_norm, postprocess_deflection};
    use crate::problems::manufactured;
    use crate::spaces::SplitPolicy;

    #[test]
    fn quintic_is_reproduced() {
        let p = manufactured(5, BcKind::Clamped);
        let mesh = p.mesh.uniform_refine().uniform_refine();
        assert_eq!(mesh.num_triangles(), 32);
        let d = Discretization::new(&p, &mesh, 3, SplitPolicy::None, default_order(3)).unwrap();
        let s = solve(&d).unwrap();
        let post = postprocess_deflection(&d, &s).unwrap();
        let e = error_norms(&d, &s, &post).unwrap();
        let rel = e.sigma_l2 / exact_sigma_norm(&d);
        eprintln!("{e:?} rel {rel:e}");
        assert!(rel < 1e-9);
    }
}
