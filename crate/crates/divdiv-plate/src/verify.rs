//! Executable checks of the discrete structure: the complex ending in divdiv,
//! dimension counts, surjectivity, nestedness of the extended space and the
//! boundary version of the complex.

use std::fmt::Write as _;

use faer::Mat;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::assembly::{default_order, reduce, AssemblyError, Discretization};
use crate::mesh::{BcKind, Mesh, TriGeom};
use crate::poly::{frob, MatPoly};
use crate::problems::{zero_data, Coefficient};
use crate::quadrature::{quad_triangle, QuadRule};
use crate::spaces::constraints::{boundary_constraints, ZeroData};
use crate::spaces::vspace::{sym_curl_lift, VSpace};
use crate::spaces::{SigmaSpace, SpaceError, SplitPolicy, UDofMap};

#[derive(Debug, Error)]
pub enum VerifyError {
    #[error(transparent)]
    Space(#[from] SpaceError),
    #[error(transparent)]
    Assembly(#[from] AssemblyError),
    #[error("fine triangle {0} lies in no coarse triangle")]
    Unrelated(usize),
    #[error("singular value decomposition failed")]
    Svd,
}

/// Singular values below this fraction of the largest count as zero.
pub const RANK_TOL: f64 = 1e-8;
pub const NESTED_TOL: f64 = 1e-10;
pub const NON_NESTED_MIN: f64 = 1e-3;

#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: String,
    pub expected: String,
    pub computed: String,
    pub tolerance: Option<f64>,
    pub pass: bool,
    /// set when the check was not applicable
    pub skipped: Option<String>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct VerificationReport {
    pub checks: Vec<Check>,
}

impl VerificationReport {
    fn exact(&mut self, name: &str, expected: i64, computed: i64) {
        self.checks.push(Check {
            name: name.into(),
            expected: expected.to_string(),
            computed: computed.to_string(),
            tolerance: None,
            pass: expected == computed,
            skipped: None,
        });
    }

    fn at_most(&mut self, name: &str, value: f64, tol: f64) {
        self.checks.push(Check {
            name: name.into(),
            expected: format!("<= {tol:e}"),
            computed: format!("{value:e}"),
            tolerance: Some(tol),
            pass: value <= tol,
            skipped: None,
        });
    }

    fn at_least(&mut self, name: &str, value: f64, min: f64) {
        self.checks.push(Check {
            name: name.into(),
            expected: format!("> {min:e}"),
            computed: format!("{value:e}"),
            tolerance: Some(min),
            pass: value > min,
            skipped: None,
        });
    }

    fn skip(&mut self, name: &str, note: &str) {
        self.checks.push(Check {
            name: name.into(),
            expected: "-".into(),
            computed: "-".into(),
            tolerance: None,
            pass: true,
            skipped: Some(note.into()),
        });
    }

    pub fn extend(&mut self, o: VerificationReport) {
        self.checks.extend(o.checks);
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn get(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn to_text(&self) -> String {
        let w = self.checks.iter().map(|c| c.name.len()).max().unwrap_or(0);
        let mut s = String::new();
        for c in &self.checks {
            let status = match (&c.skipped, c.pass) {
                (Some(_), _) => "skip",
                (None, true) => "ok",
                (None, false) => "FAIL",
            };
            let _ = write!(s, "{status:<5}{:<w$}  expected {:<12} computed {}", c.name, c.expected, c.computed);
            if let Some(n) = &c.skipped {
                let _ = write!(s, "  ({n})");
            }
            s.push('\n');
        }
        s
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("name,expected,computed,tolerance,pass,note\n");
        for c in &self.checks {
            let tol = c.tolerance.map_or("nan".into(), |t| format!("{t:e}"));
            let _ = writeln!(s, "{},{},{},{},{},{}", c.name, c.expected, c.computed, tol, c.pass, c.skipped.as_deref().unwrap_or(""));
        }
        s
    }
}

fn rule() -> QuadRule {
    quad_triangle(12).expect("triangle rule")
}

fn l2_sq(p: &MatPoly, g: &TriGeom, rule: &QuadRule) -> f64 {
    rule.points.iter().zip(&rule.weights).map(|(&l, w)| {
        let v = p.eval(l);
        w * g.area * frob(v, v)
    }).sum()
}

fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

/// Largest relative sup-distance between sym curl of the V function and its
/// Sigma lift, and the largest |divdiv| of the lift.
fn lift_errors(mesh: &Mesh, v: &VSpace, sigma: &SigmaSpace, y: &[f64], x: &[f64]) -> (f64, f64) {
    let pts = [[1.0, 0.0, 0.0], [0.2, 0.3, 0.5], [0.6, 0.1, 0.3], [0.0, 0.5, 0.5]];
    let (mut lift, mut dd, mut scale) = (0.0f64, 0.0f64, 0.0f64);
    for t in 0..mesh.num_triangles() {
        let g = &sigma.geoms[t];
        let a = v.function(t, y).sym_curl(g);
        let b = sigma.function(t, x);
        let d = b.divdiv(g);
        let diam2 = g.diameter().powi(2);
        for l in pts {
            let (p, q) = (a.eval(l), b.eval(l));
            scale = scale.max(p.iter().fold(0.0, |m, c| m.max(c.abs())));
            lift = lift.max((0..3).map(|i| (p[i] - q[i]).abs()).fold(0.0, f64::max));
            dd = dd.max(d.eval(l).abs() * diam2);
        }
    }
    let scale = scale.max(f64::MIN_POSITIVE);
    (lift / scale, dd / scale)
}

fn numerical_rank(m: &Mat<f64>) -> Result<(usize, f64), VerifyError> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Ok((0, 0.0));
    }
    let s = m.singular_values().map_err(|_| VerifyError::Svd)?;
    let top = s.iter().cloned().fold(0.0, f64::max);
    let kept: Vec<f64> = s.into_iter().filter(|&x| x > RANK_TOL * top).collect();
    let low = kept.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok((kept.len(), low / top))
}

/// Counts, exactness and surjectivity on a mesh.
pub fn check_complex(mesh: &Mesh, k: usize, seed: u64) -> Result<VerificationReport, VerifyError> {
    let mut rep = VerificationReport::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sigma = SigmaSpace::new(mesh, k, SplitPolicy::None)?;
    let v = VSpace::new(mesh, k, &[]);
    let u = UDofMap::new(mesh, k);
    let contractible = mesh.is_contractible();
    if contractible {
        rep.exact("dim Sigma - dim U = dim V - 3", v.map.ndof as i64 - 3, sigma.ndof() as i64 - u.ndof as i64);
    } else {
        rep.skip("dim Sigma - dim U = dim V - 3", "mesh is not contractible");
    }

    let y = random_vec(&mut rng, v.map.ndof);
    let x = sym_curl_lift(mesh, &v, &sigma, &y);
    let (lift, dd) = lift_errors(mesh, &v, &sigma, &y, &x);
    rep.at_most("sym curl V in Sigma", lift, 1e-10);
    rep.at_most("divdiv sym curl = 0", dd, 1e-11);

    let splits = SplitPolicy::Bisection.split_vertices(mesh);
    let nsplit = splits.len() as i64;
    let sx = SigmaSpace::with_splits(mesh, k, splits.clone())?;
    let vx = VSpace::new(mesh, k, &splits);
    rep.exact("dim ext Sigma - dim Sigma = #split vertices", nsplit, sx.ndof() as i64 - sigma.ndof() as i64);
    rep.exact("dim ext V - dim V = #split vertices", nsplit, vx.map.ndof as i64 - v.map.ndof as i64);
    let y = random_vec(&mut rng, vx.map.ndof);
    let x = sym_curl_lift(mesh, &vx, &sx, &y);
    let (lift, dd) = lift_errors(mesh, &vx, &sx, &y, &x);
    rep.at_most("sym curl ext V in ext Sigma", lift, 1e-10);
    rep.at_most("divdiv sym curl ext = 0", dd, 1e-11);

    if contractible {
        let (rank, expected, low) = divdiv_rank(mesh, k)?;
        rep.exact("rank divdiv on Sigma_0", expected as i64, rank as i64);
        rep.at_least("smallest kept singular value / largest", low, RANK_TOL);
    } else {
        rep.skip("rank divdiv on Sigma_0", "mesh is not contractible");
    }
    Ok(rep)
}

/// Numerical rank of divdiv from the homogeneous Sigma_0 into U, the rank
/// expected (full unless all edges are free) and the smallest kept relative
/// singular value.
pub fn divdiv_rank(mesh: &Mesh, k: usize) -> Result<(usize, usize, f64), VerifyError> {
    let p = zero_data("rank", mesh.clone(), Coefficient::identity(), 0.0);
    let d = Discretization::new(&p, &p.mesh, k, SplitPolicy::None, default_order(k))?;
    let sys = d.assemble();
    let (red, _) = d.reduction()?;
    let rs = reduce(&sys, &red);
    let mut m = Mat::<f64>::zeros(rs.b.nrows, rs.b.ncols);
    for (i, j, x) in rs.b.triplets() {
        m[(i, j)] += x;
    }
    // row scaling keeps the rank threshold independent of element size
    for i in 0..m.nrows() {
        let s = (0..m.ncols()).map(|j| m[(i, j)].abs()).fold(0.0, f64::max);
        if s > 0.0 {
            for j in 0..m.ncols() {
                m[(i, j)] /= s;
            }
        }
    }
    let (rank, low) = numerical_rank(&m)?;
    let all_free = mesh.edges.iter().filter_map(|e| e.label).all(|l| l.kind == BcKind::Free);
    let expected = if all_free { d.u.ndof - 3 } else { d.u.ndof };
    Ok((rank, expected, low))
}

fn containing(coarse: &[TriGeom], g: &TriGeom) -> Option<usize> {
    let c = g.centroid();
    coarse.iter().position(|h| {
        let inside = |l: [f64; 3]| l.iter().all(|&x| x > -1e-10);
        inside(h.barycentric(c)) && g.p.iter().all(|&p| inside(h.barycentric(p)))
    })
}

/// Largest relative L2 residual of the best approximation of every coarse
/// basis function in the fine space.
fn nest_residuals(coarse: &Mesh, fine: &Mesh, k: usize, policy: SplitPolicy) -> Result<Vec<f64>, VerifyError> {
    let sc = SigmaSpace::new(coarse, k, policy)?;
    let p = zero_data("nest", fine.clone(), Coefficient::identity(), 0.0);
    let d = Discretization::new(&p, &p.mesh, k, policy, default_order(k))?;
    let mass = d.assemble().a;
    let n = mass.nrows;
    let trips: Vec<_> = mass.triplets().map(|(i, j, v)| faer::sparse::Triplet::new(i, j, v)).collect();
    let a = faer::sparse::SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &trips).map_err(|_| VerifyError::Svd)?;
    let lu = a.sp_lu().map_err(|_| VerifyError::Svd)?;
    let rule = rule();
    let fg: Vec<TriGeom> = (0..fine.num_triangles()).map(|t| fine.geometry(t)).collect();
    let parent: Vec<usize> = fg.iter().enumerate().map(|(t, g)| containing(&sc.geoms, g).ok_or(VerifyError::Unrelated(t))).collect::<Result<_, _>>()?;
    let fs = &d.sigma;
    let mut out = vec![];
    for gdof in 0..sc.ndof() {
        let pieces = sc.basis_function(gdof);
        let mut restricted: Vec<Option<MatPoly>> = vec![None; fg.len()];
        for (t, g) in fg.iter().enumerate() {
            if let Some((_, f)) = pieces.iter().find(|(c, _)| *c == parent[t]) {
                restricted[t] = Some(f.transfer(&sc.geoms[parent[t]], g));
            }
        }
        let mut rhs = Mat::<f64>::zeros(n, 1);
        let mut norm_sq = 0.0;
        for (t, f) in restricted.iter().enumerate() {
            let Some(f) = f else { continue };
            let g = &fg[t];
            norm_sq += l2_sq(f, g, &rule);
            for (r, phi) in fs.bases[t].funcs.iter().enumerate() {
                let ip: f64 = rule.points.iter().zip(&rule.weights).map(|(&l, w)| w * g.area * frob(f.eval(l), phi.eval(l))).sum();
                for &(gi, c) in &fs.map.local[t][r] {
                    rhs[(gi, 0)] += c * ip;
                }
            }
        }
        use faer::linalg::solvers::Solve;
        let x = lu.solve(&rhs);
        let xv: Vec<f64> = (0..n).map(|i| x[(i, 0)]).collect();
        let mut res_sq = 0.0;
        for (t, g) in fg.iter().enumerate() {
            let ph = fs.function(t, &xv);
            let diff = match &restricted[t] {
                Some(f) => f.add(&ph.scale(-1.0)),
                None => ph,
            };
            res_sq += l2_sq(&diff, g, &rule);
        }
        out.push((res_sq / norm_sq.max(f64::MIN_POSITIVE)).sqrt());
    }
    Ok(out)
}

/// The extended space on `coarse` must lie in the extended space on `fine`;
/// the conforming space must not.
pub fn check_nestedness(coarse: &Mesh, fine: &Mesh, k: usize) -> Result<VerificationReport, VerifyError> {
    let mut rep = VerificationReport::default();
    let ext = nest_residuals(coarse, fine, k, SplitPolicy::Bisection)?;
    let worst = ext.iter().cloned().fold(0.0, f64::max);
    rep.at_most("extended space nested", worst, NESTED_TOL);
    let created = fine.interior_bisection_vertices().len() > coarse.interior_bisection_vertices().len();
    if !created {
        rep.skip("conforming space not nested", "no new interior vertex");
    } else {
        let std = nest_residuals(coarse, fine, k, SplitPolicy::None)?;
        let worst = std.iter().cloned().fold(0.0, f64::max);
        rep.at_least("conforming space not nested", worst, NON_NESTED_MIN);
    }
    Ok(rep)
}

/// Collocation rows forcing a V function to be an RT field on each free
/// component (zero on the first) and to have constant normal component on
/// each simply supported edge. Columns past the V dofs are the field and edge
/// parameters.
fn boundary_kernel_rows(mesh: &Mesh, v: &VSpace, k: usize) -> (Vec<Vec<(usize, f64)>>, usize) {
    let nv = v.map.ndof;
    let mut comps: Vec<usize> = mesh.edges.iter().filter_map(|e| e.label).filter(|l| l.kind == BcKind::Free).map(|l| l.component).collect();
    comps.sort_unstable();
    comps.dedup();
    let mut extra = nv;
    let mut field = std::collections::HashMap::new();
    for (i, c) in comps.iter().enumerate() {
        if i > 0 {
            field.insert(*c, extra);
            extra += 3;
        }
    }
    let mut rows = vec![];
    let samples: Vec<f64> = (0..k + 3).map(|i| (i as f64 + 0.5) / (k + 3) as f64).chain([0.0, 1.0]).collect();
    for ed in &mesh.edges {
        let Some(label) = ed.label else { continue };
        if label.kind == BcKind::Clamped {
            continue;
        }
        let t = ed.tris[0].expect("boundary edge has a triangle");
        let g = mesh.geometry(t);
        let s_col = if label.kind == BcKind::SimplySupported {
            extra += 1;
            Some(extra - 1)
        } else {
            None
        };
        let (a, b) = (mesh.vertices[ed.v[0]].p, mesh.vertices[ed.v[1]].p);
        for &s in &samples {
            let x = crate::mesh::Point2::new(a.x + s * (b.x - a.x), a.y + s * (b.y - a.y));
            let l = g.barycentric(x);
            let vals: Vec<[f64; 2]> = v.bases[t].iter().map(|p| p.eval(l)).collect();
            let comp_row = |w: [f64; 2]| {
                let mut r = vec![];
                for (loc, val) in vals.iter().enumerate() {
                    let c = w[0] * val[0] + w[1] * val[1];
                    if c != 0.0 {
                        for &(gi, m) in &v.map.local[t][loc] {
                            r.push((gi, m * c));
                        }
                    }
                }
                r
            };
            match s_col {
                Some(col) => {
                    let mut r = comp_row(ed.normal);
                    r.push((col, -1.0));
                    rows.push(r);
                }
                None => {
                    // phi = (a0 + b x, a1 + b y)
                    for c in 0..2 {
                        let mut w = [0.0; 2];
                        w[c] = 1.0;
                        let mut r = comp_row(w);
                        if let Some(&f) = field.get(&label.component) {
                            r.push((f + c, -1.0));
                            r.push((f + 2, -if c == 0 { x.x } else { x.y }));
                        }
                        rows.push(r);
                    }
                }
            }
        }
    }
    (rows, extra)
}

/// sym curl of the boundary-constrained V functions satisfies the homogeneous
/// constraints of Sigma_0; a perturbed function must not.
pub fn check_boundary_kernel(mesh: &Mesh, k: usize, seed: u64) -> Result<VerificationReport, VerifyError> {
    let mut rep = VerificationReport::default();
    let kinds: Vec<BcKind> = mesh.edges.iter().filter_map(|e| e.label.map(|l| l.kind)).collect();
    if !kinds.contains(&BcKind::SimplySupported) && !kinds.contains(&BcKind::Free) {
        rep.skip("sym curl V_0 in Sigma_0", "no simply supported or free edges");
        return Ok(rep);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sigma = SigmaSpace::new(mesh, k, SplitPolicy::None)?;
    let v = VSpace::new(mesh, k, &[]);
    let cons = boundary_constraints(&sigma, mesh, &ZeroData);
    let (rows, ncols) = boundary_kernel_rows(mesh, &v, k);
    let mut c = Mat::<f64>::zeros(rows.len().max(1), ncols);
    for (i, r) in rows.iter().enumerate() {
        let s = r.iter().fold(0.0f64, |m, e| m.max(e.1.abs())).max(f64::MIN_POSITIVE);
        for &(j, x) in r {
            c[(i, j)] += x / s;
        }
    }
    let svd = c.svd().map_err(|_| VerifyError::Svd)?;
    let sv = svd.S().column_vector();
    let top = (0..sv.nrows()).map(|i| sv[i]).fold(0.0, f64::max);
    let rank = (0..sv.nrows()).filter(|&i| sv[i] > 1e-10 * top).count();
    let vt = svd.V();
    let mut y = vec![0.0; ncols];
    for col in rank..ncols {
        let a: f64 = rng.gen_range(-1.0..1.0);
        for (i, yi) in y.iter_mut().enumerate() {
            *yi += a * vt[(i, col)];
        }
    }
    // one correction step y -= C^+ C y
    let u = svd.U();
    let cy: Vec<f64> = (0..c.nrows()).map(|i| (0..ncols).map(|j| c[(i, j)] * y[j]).sum()).collect();
    for r in 0..rank {
        let a: f64 = (0..c.nrows()).map(|i| u[(i, r)] * cy[i]).sum::<f64>() / sv[r];
        for (i, yi) in y.iter_mut().enumerate() {
            *yi -= a * vt[(i, r)];
        }
    }
    y.truncate(v.map.ndof);
    let x = sym_curl_lift(mesh, &v, &sigma, &y);
    let ymax = y.iter().fold(0.0f64, |m, a| m.max(a.abs()));
    rep.exact("dim V_0 > 0", 1, (ncols > rank && ymax > 0.0) as i64);
    rep.at_most("sym curl V_0 in Sigma_0", cons.max_residual(&x), 1e-10);
    let bad: Vec<f64> = y.iter().map(|a| a + 0.1 * rng.gen_range(-1.0..1.0)).collect();
    let xb = sym_curl_lift(mesh, &v, &sigma, &bad);
    rep.at_least("perturbed V function violates Sigma_0", cons.max_residual(&xb), NON_NESTED_MIN);
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::builders;

    #[test]
    fn square_ledgers() {
        let m = builders::unit_square(BcKind::Clamped);
        let r = check_complex(&m, 3, 1).unwrap();
        assert!(r.passed(), "{}", r.to_text());
    }

    #[test]
    fn annulus_skips_counts() {
        let m = builders::square_ring();
        let r = check_complex(&m, 3, 1).unwrap();
        assert!(r.get("dim Sigma - dim U = dim V - 3").unwrap().skipped.is_some());
    }

    #[test]
    fn identity_refinement_is_nested() {
        let m = builders::unit_square(BcKind::Clamped).uniform_refine();
        let r = check_nestedness(&m, &m, 3).unwrap();
        assert!(r.passed(), "{}", r.to_text());
    }
}
