//! Benchmark plate problems with exact solutions, and manufactured ones.

use std::f64::consts::PI;
use std::sync::Arc;

use crate::jet::Jet;
use crate::mesh::{builders, dot, BcKind, BoundaryLabel, Mesh, Point2};
use crate::poly::{sym_apply, Sym};
use crate::spaces::constraints::{EdgeFrame, MomentData};
use crate::spaces::SplitPolicy;

pub type ScalarField = Arc<dyn Fn(Point2) -> f64 + Send + Sync>;

/// The elasticity tensor, constant on each piece: C s = c((1-nu) s + nu tr(s) I).
#[derive(Clone)]
pub enum Coefficient {
    Hooke { d: f64, nu: f64 },
    /// alpha(x) times the identity, evaluated at a point of the element
    Scalar(ScalarField),
}

impl std::fmt::Debug for Coefficient {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Coefficient::Hooke { d, nu } => write!(f, "Hooke {{ d: {d}, nu: {nu} }}"),
            Coefficient::Scalar(_) => write!(f, "Scalar(..)"),
        }
    }
}

impl Coefficient {
    pub fn identity() -> Self {
        Coefficient::Scalar(Arc::new(|_| 1.0))
    }

    /// Bending rigidity E t^3 / (12 (1 - nu^2)).
    pub fn hooke_from(e: f64, t: f64, nu: f64) -> Self {
        Coefficient::Hooke { d: e * t.powi(3) / (12.0 * (1.0 - nu * nu)), nu }
    }

    /// (c, nu) on the piece containing `hint`.
    pub fn params(&self, hint: Point2) -> (f64, f64) {
        match self {
            Coefficient::Hooke { d, nu } => (*d, *nu),
            Coefficient::Scalar(a) => (a(hint), 0.0),
        }
    }

    pub fn at(&self, hint: Point2) -> LocalCoef {
        let (c, nu) = self.params(hint);
        LocalCoef { c, nu }
    }
}

/// The coefficient frozen on one element.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LocalCoef {
    pub c: f64,
    pub nu: f64,
}

impl LocalCoef {
    pub fn apply(&self, s: Sym) -> Sym {
        let tr = s[0] + s[2];
        let a = self.c * (1.0 - self.nu);
        let b = self.c * self.nu * tr;
        [a * s[0] + b, a * s[1], a * s[2] + b]
    }
    pub fn apply_inv(&self, s: Sym) -> Sym {
        let tr = s[0] + s[2];
        let q = self.nu / (1.0 + self.nu) * tr;
        let d = self.c * (1.0 - self.nu);
        [(s[0] - q) / d, s[1] / d, (s[2] - q) / d]
    }
}

/// Exact deflection as a Taylor jet; `hint` selects the piece.
pub trait Exact: Send + Sync {
    fn jet(&self, x: Point2, hint: Point2) -> Jet;
}

impl<F: Fn(Jet, Jet, Point2) -> Jet + Send + Sync> Exact for F {
    fn jet(&self, x: Point2, hint: Point2) -> Jet {
        self(Jet::x(x.x), Jet::y(x.y), hint)
    }
}

#[derive(Clone)]
pub struct PlateProblem {
    pub name: String,
    pub mesh: Mesh,
    pub coef: Coefficient,
    pub exact: Option<Arc<dyn Exact>>,
    /// load used when there is no exact solution
    pub load: ScalarField,
    /// the split rule used when the extended space is requested
    pub extended: SplitPolicy,
    /// whether the extended space is the default
    pub prefers_extended: bool,
    /// mesh of level l >= 1 for uniform studies; otherwise `mesh` refined l - 1 times
    pub uniform_meshes: Option<fn(usize) -> Mesh>,
}

impl std::fmt::Debug for PlateProblem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PlateProblem")
            .field("name", &self.name)
            .field("coef", &self.coef)
            .field("exact", &self.exact.is_some())
            .finish()
    }
}

/// Derivatives of the exact deflection at a point.
#[derive(Clone, Copy, Debug)]
pub struct Derivs {
    pub w: f64,
    pub grad: [f64; 2],
    pub hess: Sym,
    /// w_xxx, w_xxy, w_xyy, w_yyy
    pub third: [f64; 4],
    pub bilap: f64,
}

impl Derivs {
    pub fn from_jet(j: &Jet) -> Self {
        Self {
            w: j.value(),
            grad: [j.d(1, 0), j.d(0, 1)],
            hess: [j.d(2, 0), j.d(1, 1), j.d(0, 2)],
            third: [j.d(3, 0), j.d(2, 1), j.d(1, 2), j.d(0, 3)],
            bilap: j.d(4, 0) + 2.0 * j.d(2, 2) + j.d(0, 4),
        }
    }
    pub fn grad_lap(&self) -> [f64; 2] {
        [self.third[0] + self.third[2], self.third[1] + self.third[3]]
    }
    /// Derivative of the hessian in direction `v`.
    pub fn hess_dir(&self, v: [f64; 2]) -> Sym {
        let t = self.third;
        [v[0] * t[0] + v[1] * t[1], v[0] * t[1] + v[1] * t[2], v[0] * t[2] + v[1] * t[3]]
    }
}

impl PlateProblem {
    /// Mesh of uniform level `l` (level 1 is the coarsest).
    pub fn uniform_mesh(&self, l: usize) -> Mesh {
        match self.uniform_meshes {
            Some(f) => f(l),
            None => (1..l).fold(self.mesh.clone(), |m, _| m.uniform_refine()),
        }
    }

    pub fn derivs(&self, x: Point2, hint: Point2) -> Option<Derivs> {
        self.exact.as_ref().map(|e| Derivs::from_jet(&e.jet(x, hint)))
    }

    pub fn w(&self, x: Point2, hint: Point2) -> f64 {
        self.derivs(x, hint).map_or(0.0, |d| d.w)
    }

    pub fn sigma(&self, x: Point2, hint: Point2) -> Sym {
        match self.derivs(x, hint) {
            Some(d) => self.coef.at(hint).apply(d.hess),
            None => [0.0; 3],
        }
    }

    /// div(sigma) = c grad(lap w) for this family of coefficients.
    pub fn div_sigma(&self, x: Point2, hint: Point2) -> [f64; 2] {
        match self.derivs(x, hint) {
            Some(d) => {
                let c = self.coef.params(hint).0;
                let g = d.grad_lap();
                [c * g[0], c * g[1]]
            }
            None => [0.0; 2],
        }
    }

    pub fn f(&self, x: Point2, hint: Point2) -> f64 {
        match self.derivs(x, hint) {
            Some(d) => self.coef.params(hint).0 * d.bilap,
            None => (self.load)(x),
        }
    }

    pub fn has_exact(&self) -> bool {
        self.exact.is_some()
    }

    /// w_b, d_t w_b, g_b on a boundary edge.
    pub fn clamped_data(&self, x: Point2, fr: &EdgeFrame) -> (f64, f64, f64) {
        match self.derivs(x, fr.hint) {
            Some(d) => (d.w, dot(d.grad, fr.t), dot(d.grad, fr.n)),
            None => (0.0, 0.0, 0.0),
        }
    }

    /// d_tt w_b and d_t g_b, the tangential data used by the estimator.
    pub fn tangential_data(&self, x: Point2, fr: &EdgeFrame) -> (f64, f64) {
        match self.derivs(x, fr.hint) {
            Some(d) => (crate::poly::sym_form(d.hess, fr.t, fr.t), crate::poly::sym_form(d.hess, fr.t, fr.n)),
            None => (0.0, 0.0),
        }
    }

    pub fn with_mesh(&self, mesh: Mesh) -> Self {
        Self { mesh, uniform_meshes: None, ..self.clone() }
    }
}

impl MomentData for PlateProblem {
    fn m_b(&self, x: Point2, fr: &EdgeFrame) -> f64 {
        crate::poly::sym_form(self.sigma(x, fr.hint), fr.n, fr.n)
    }
    fn h_b(&self, x: Point2, fr: &EdgeFrame) -> f64 {
        let Some(d) = self.derivs(x, fr.hint) else { return 0.0 };
        let lc = self.coef.at(fr.hint);
        let ds = lc.apply(d.hess_dir(fr.t));
        let g = d.grad_lap();
        crate::poly::sym_form(ds, fr.t, fr.n) + lc.c * dot(g, fr.n)
    }
    fn corner_jump(&self, x: Point2, m: &EdgeFrame, p: &EdgeFrame) -> f64 {
        let v = |fr: &EdgeFrame| {
            let s = self.sigma(x, fr.hint);
            crate::poly::sym_form(s, fr.t, fr.n)
        };
        v(p) - v(m)
    }
}

pub const CLAMPED_CORNER_ALPHA: f64 = 0.544483736782464;
pub const CLAMPED_CORNER_C: f64 = 1.8414;

/// The constant that makes the corner solution vanish on both legs.
pub fn clamped_corner_c_exact() -> f64 {
    let a = CLAMPED_CORNER_ALPHA;
    let psi = 0.75 * PI;
    -((a + 1.0) * psi).cos() / ((a - 1.0) * psi).cos()
}

fn polar(x: Jet, y: Jet, theta0: f64) -> (Jet, Jet) {
    let r = (x * x + y * y).powf(0.5);
    (r, Jet::atan2_from(y, x, theta0))
}

pub fn clamped_corner_solution(c: f64) -> impl Fn(Jet, Jet, Point2) -> Jet + Send + Sync {
    move |x: Jet, y: Jet, _| {
        let a = CLAMPED_CORNER_ALPHA;
        let th0 = y.value().atan2(x.value());
        let (r, phi) = polar(x, y, th0);
        let psi = phi + (-PI / 4.0);
        r.powf(1.0 + a) * ((psi * (a + 1.0)).cos() + (psi * (a - 1.0)).cos() * c)
    }
}

/// L-shaped plate clamped on the two legs of the reentrant corner, free elsewhere.
pub fn lshape_clamped_corner() -> PlateProblem {
    PlateProblem {
        name: "lshape_clamped_corner".into(),
        mesh: builders::lshape_clamped_corner(),
        coef: Coefficient::identity(),
        exact: Some(Arc::new(clamped_corner_solution(CLAMPED_CORNER_C))),
        load: Arc::new(|_| 0.0),
        extended: SplitPolicy::Bisection,
        prefers_extended: false,
        uniform_meshes: None,
    }
}

pub fn simply_supported_solution(x: Jet, y: Jet, _: Point2) -> Jet {
    let mut th0 = y.value().atan2(x.value());
    if th0 < 0.0 {
        th0 += 2.0 * PI;
    }
    let (r, th) = polar(x, y, th0);
    r.powf(4.0 / 3.0) * (th * (2.0 / 3.0)).sin()
}

/// L-shaped plate simply supported on the reentrant edges, clamped elsewhere.
pub fn lshape_simply_supported() -> PlateProblem {
    PlateProblem {
        name: "lshape_simply_supported".into(),
        mesh: builders::lshape_simply_supported(),
        coef: Coefficient::identity(),
        exact: Some(Arc::new(simply_supported_solution)),
        load: Arc::new(|_| 0.0),
        extended: SplitPolicy::Bisection,
        prefers_extended: false,
        uniform_meshes: None,
    }
}

pub fn jump_square_solution(x: Jet, y: Jet, hint: Point2) -> Jet {
    let y4 = {
        let y2 = y * y;
        y2 * y2
    };
    let ym = {
        let a = y + (-1.0);
        let a2 = a * a;
        a2 * a2
    };
    let s = 1.0 / (0.4 - 1.0);
    if hint.x < 0.5 {
        (x * x * 2.88 + x * (-4.48) + 1.92) * x * x * y4 * ym * s
    } else {
        let xm = x + (-1.0);
        (x * x * (-4.8) + x * 6.4 + (-1.6)) * xm * xm * y4 * ym * s
    }
}

pub fn jump_alpha(p: Point2) -> f64 {
    if p.x < 0.5 {
        1.0
    } else {
        0.2
    }
}

/// Clamped unit square with a coefficient jump across x = 1/2.
pub fn jump_square() -> PlateProblem {
    PlateProblem {
        name: "jump_square".into(),
        mesh: builders::unit_square_grid(2, BcKind::Clamped),
        coef: Coefficient::Scalar(Arc::new(jump_alpha)),
        exact: Some(Arc::new(jump_square_solution)),
        load: Arc::new(|_| 0.0),
        extended: SplitPolicy::VerticalLine(0.5),
        prefers_extended: true,
        uniform_meshes: Some(|l| builders::unit_square_grid(1 << (l - 1), BcKind::Clamped)),
    }
}

/// Fixed polynomial deflections of degree 2, 5 or 6 on the unit square.
pub fn manufactured(degree: usize, kind: BcKind) -> PlateProblem {
    let w: fn(Jet, Jet, Point2) -> Jet = match degree {
        0..=2 => |x, y, _| x * x * 0.5 + x * y * 0.25 - y * y + x,
        3..=5 => |x, y, _| {
            let x2 = x * x;
            let y2 = y * y;
            x2 * x2 * x * 0.3 - x2 * x * y2 + x * y2 * y2 * 0.7 + x2 * y * 2.0 - y2 * y + x * y + 1.0
        },
        _ => |x, y, _| {
            let x3 = x * x * x;
            let y3 = y * y * y;
            x3 * y3 + x * x * y - y3 * x * 0.5
        },
    };
    PlateProblem {
        name: format!("manufactured_p{degree}"),
        mesh: builders::unit_square(kind),
        coef: Coefficient::identity(),
        exact: Some(Arc::new(w)),
        load: Arc::new(|_| 0.0),
        extended: SplitPolicy::Bisection,
        prefers_extended: false,
        uniform_meshes: None,
    }
}

/// A problem without exact solution: constant load and homogeneous data.
pub fn zero_data(name: &str, mesh: Mesh, coef: Coefficient, load: f64) -> PlateProblem {
    PlateProblem {
        name: name.into(),
        mesh,
        coef,
        exact: None,
        load: Arc::new(move |_| load),
        extended: SplitPolicy::Bisection,
        prefers_extended: false,
        uniform_meshes: None,
    }
}

pub const NAMES: [&str; 6] = [
    "lshape_clamped_corner",
    "lshape_simply_supported",
    "jump_square",
    "manufactured_p2",
    "manufactured_p5",
    "manufactured_p6",
];

pub fn by_name(name: &str) -> Option<PlateProblem> {
    Some(match name {
        "lshape_clamped_corner" => lshape_clamped_corner(),
        "lshape_simply_supported" => lshape_simply_supported(),
        "jump_square" => jump_square(),
        "manufactured_p2" => manufactured(2, BcKind::Clamped),
        "manufactured_p5" => manufactured(5, BcKind::Clamped),
        "manufactured_p6" => manufactured(6, BcKind::Clamped),
        _ => return None,
    })
}

/// Relabels every boundary edge of a mesh with one kind.
pub fn relabel(mesh: &Mesh, kind: BcKind) -> Mesh {
    let labels: Vec<(usize, usize, BoundaryLabel)> = mesh
        .edges
        .iter()
        .filter(|e| e.is_boundary())
        .map(|e| (e.v[0], e.v[1], BoundaryLabel { kind, component: 0 }))
        .collect();
    Mesh::from_raw(
        mesh.vertices.iter().map(|v| v.p).collect(),
        mesh.triangles.iter().map(|t| t.v).collect(),
        &labels,
    )
    .expect("relabeling keeps the mesh valid")
}

/// Moments n^T sigma n and t^T sigma n of a symmetric matrix.
pub fn normal_moments(s: Sym, n: [f64; 2]) -> (f64, f64) {
    let t = [-n[1], n[0]];
    let sn = sym_apply(s, n);
    (dot(n, sn), dot(t, sn))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn pt(rng: &mut ChaCha8Rng, lo: [f64; 2], hi: [f64; 2]) -> Point2 {
        Point2::new(rng.gen_range(lo[0]..hi[0]), rng.gen_range(lo[1]..hi[1]))
    }

    #[test]
    fn hooke_inverse() {
        let c = Coefficient::hooke_from(1.0, 1.0, 0.3).at(Point2::default());
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..10 {
            let s = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
            let r = c.apply_inv(c.apply(s));
            for i in 0..3 {
                assert!((r[i] - s[i]).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn clamped_corner_closure() {
        let p = lshape_clamped_corner();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..10 {
            let x = pt(&mut rng, [0.05, 0.05], [0.9, 0.9]);
            assert!(p.f(x, x).abs() < 1e-9);
        }
        // with the truncated constant the legs carry a small residual
        let exact = clamped_corner_solution(clamped_corner_c_exact());
        for s in [0.1, 0.5, 0.9] {
            for x in [Point2::new(-s, 0.0), Point2::new(0.0, -s)] {
                let hint = Point2::new(x.x.min(0.0) * 0.5 + 0.01, x.y.min(0.0) * 0.5 + 0.01);
                let d = Derivs::from_jet(&exact.jet(x, hint));
                assert!(d.w.abs() < 1e-12 && d.grad[0].abs() < 1e-11 && d.grad[1].abs() < 1e-11);
                assert!(p.w(x, hint).abs() < 1e-4);
            }
        }
        assert!((clamped_corner_c_exact() - CLAMPED_CORNER_C).abs() < 1e-4);
        // |hess w| ~ r^(alpha - 1)
        let h = |r: f64| {
            let x = Point2::new(r * 0.6, r * 0.8);
            let s = p.sigma(x, x);
            (s[0] * s[0] + 2.0 * s[1] * s[1] + s[2] * s[2]).sqrt()
        };
        let slope = (h(1e-3) / h(1e-2)).log10() / -1.0;
        assert!((slope - (CLAMPED_CORNER_ALPHA - 1.0)).abs() < 0.02, "{slope}");
    }

    #[test]
    fn simply_supported_closure() {
        let p = lshape_simply_supported();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10 {
            let x = pt(&mut rng, [-0.9, 0.05], [0.9, 0.9]);
            let d = p.derivs(x, x).unwrap();
            assert!(d.bilap.abs() < 1e-9);
            // the laplacian is (4/3) r^(-2/3) sin(2 theta / 3), not zero
            let r = x.norm();
            let th = x.y.atan2(x.x);
            let lap = d.hess[0] + d.hess[2];
            assert!((lap - 4.0 / 3.0 * r.powf(-2.0 / 3.0) * (2.0 * th / 3.0).sin()).abs() < 1e-10);
        }
        for s in [0.2, 0.7] {
            for (x, n) in [(Point2::new(s, 0.0), [0.0, -1.0]), (Point2::new(0.0, -s), [1.0, 0.0])] {
                let fr = EdgeFrame { n, t: [-n[1], n[0]], hint: Point2::new(-0.1, 0.1) };
                assert!(p.w(x, fr.hint).abs() < 1e-12);
                assert!(p.m_b(x, &fr).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn jump_square_interface() {
        let p = jump_square();
        let (l, r) = (Point2::new(0.25, 0.5), Point2::new(0.75, 0.5));
        for y in [0.1, 0.37, 0.8] {
            let x = Point2::new(0.5, y);
            let a = p.derivs(x, l).unwrap();
            let b = p.derivs(x, r).unwrap();
            assert!((a.w - b.w).abs() < 1e-12);
            assert!((a.grad[0] - b.grad[0]).abs() < 1e-12 && (a.grad[1] - b.grad[1]).abs() < 1e-12);
            let (nn1, nt1) = normal_moments(p.sigma(x, l), [1.0, 0.0]);
            let (nn2, nt2) = normal_moments(p.sigma(x, r), [1.0, 0.0]);
            assert!((nn1 - nn2).abs() < 1e-10 && (nt1 - nt2).abs() < 1e-10);
        }
        for s in [0.2, 0.6] {
            for x in [Point2::new(s, 0.0), Point2::new(0.0, s), Point2::new(1.0, s), Point2::new(s, 1.0)] {
                let d = p.derivs(x, x).unwrap();
                assert!(d.w.abs() < 1e-12 && d.grad[0].abs() < 1e-12 && d.grad[1].abs() < 1e-12);
            }
        }
    }

    #[test]
    fn manufactured_load() {
        let p = manufactured(2, BcKind::Clamped);
        let x = Point2::new(0.3, 0.4);
        assert_eq!(p.f(x, x), 0.0);
        let s = p.sigma(x, x);
        assert!((s[0] - 1.0).abs() < 1e-14 && (s[1] - 0.25).abs() < 1e-14 && (s[2] + 2.0).abs() < 1e-14);
        let p6 = manufactured(6, BcKind::Clamped);
        // bilaplacian of x^3 y^3 is 72 x y
        assert!((p6.f(x, x) - 72.0 * 0.12).abs() < 1e-10);
    }
}
