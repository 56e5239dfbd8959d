//! Residual a posteriori error estimator for the bending moment.

use rayon::prelude::*;

use crate::assembly::{project_degree, Discretization};
use crate::mesh::{BcKind, Point2};
use crate::poly::{sym_apply, MatPoly};
use crate::solver::Solution;
use crate::spaces::constraints::{along, point_on, EdgeFrame, EdgeProjector, MomentData};

/// Squared contributions attributed to one triangle.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ElementIndicator {
    /// h_K^2 ||rot C^{-1} sigma_h||^2
    pub volume: f64,
    /// h_K ||[C^{-1} sigma_h t]||^2 summed over the interior edges of K
    pub edge: f64,
    pub clamped: f64,
    pub simply: f64,
    pub osc_f: f64,
    pub osc_mb: f64,
    pub osc_hb: f64,
}

impl ElementIndicator {
    pub fn total(&self) -> f64 {
        self.volume + self.edge + self.clamped + self.simply + self.osc_f + self.osc_mb + self.osc_hb
    }
}

#[derive(Clone, Debug, Default)]
pub struct EstimatorReport {
    pub elements: Vec<ElementIndicator>,
    /// squared global residual part with edge terms counted once and h_e weights
    pub eta1_sq: f64,
    pub osc_f_sq: f64,
    pub osc_mb_sq: f64,
    pub osc_hb_sq: f64,
}

impl EstimatorReport {
    /// eta = eta_1 + osc with the edge-weighted global sum.
    pub fn eta41(&self) -> f64 {
        self.eta1_sq.sqrt() + self.osc()
    }

    pub fn osc(&self) -> f64 {
        self.osc_f_sq.sqrt() + self.osc_mb_sq.sqrt() + self.osc_hb_sq.sqrt()
    }

    /// Square root of the sum of the element indicators.
    pub fn eta52(&self) -> f64 {
        self.indicators().iter().sum::<f64>().sqrt()
    }

    /// Squared element indicators used for marking.
    pub fn indicators(&self) -> Vec<f64> {
        self.elements.iter().map(|e| e.total()).collect()
    }

    /// One row per element: id, barycenter and every squared component.
    pub fn to_csv(&self, centroids: &[Point2]) -> String {
        let mut s = String::from("element,x,y,volume,edge,clamped,simply,osc_f,osc_mb,osc_hb\n");
        for (i, (e, c)) in self.elements.iter().zip(centroids).enumerate() {
            s += &format!(
                "{i},{},{},{:e},{:e},{:e},{:e},{:e},{:e},{:e}\n",
                c.x, c.y, e.volume, e.edge, e.clamped, e.simply, e.osc_f, e.osc_mb, e.osc_hb
            );
        }
        s
    }
}

/// C^{-1} sigma_h on triangle `t` with the coefficient frozen at the centroid.
pub fn compliance_moment(d: &Discretization, sol: &Solution, t: usize) -> MatPoly {
    let g = &d.sigma.geoms[t];
    let c = d.problem.coef.at(g.centroid());
    let s = d.sigma.function(t, &sol.sigma);
    let mut out = s.clone();
    for m in 0..s.c[0].coef.len() {
        let v = c.apply_inv([s.c[0].coef[m], s.c[1].coef[m], s.c[2].coef[m]]);
        for i in 0..3 {
            out.c[i].coef[m] = v[i];
        }
    }
    out
}

pub fn h_k(area: f64) -> f64 {
    area.sqrt()
}

/// Element and edge contributions of the residual estimator.
pub fn estimate(d: &Discretization, sol: &Solution) -> EstimatorReport {
    let mesh = d.mesh;
    let k = d.k();
    let pb = d.problem;
    let rule = &d.rules.tri;
    let nt = mesh.num_triangles();
    let cs: Vec<MatPoly> = (0..nt).into_par_iter().map(|t| compliance_moment(d, sol, t)).collect();
    let proj = EdgeProjector::new(k, d.rules.order);
    let mut elements: Vec<ElementIndicator> = (0..nt)
        .into_par_iter()
        .map(|t| {
            let g = &d.sigma.geoms[t];
            let hk = h_k(g.area);
            let rot = cs[t].rot(g);
            let hint = g.centroid();
            let qf = project_degree(k - 2, g, rule, &|l| pb.f(g.point(l), hint));
            let qf = crate::poly::BarycentricPoly { deg: k - 2, coef: qf, tri: t };
            let (mut vol, mut osc) = (0.0, 0.0);
            for (&l, w) in rule.points.iter().zip(&rule.weights) {
                let r = rot.eval(l);
                vol += w * g.area * (r[0] * r[0] + r[1] * r[1]);
                let e = pb.f(g.point(l), hint) - qf.eval(l);
                osc += w * g.area * e * e;
            }
            ElementIndicator { volume: hk * hk * vol, osc_f: hk.powi(4) * osc, ..Default::default() }
        })
        .collect();

    // (edge, squared residual) for interior jumps and boundary terms
    let edge_terms: Vec<(f64, f64, f64, f64)> = (0..mesh.num_edges())
        .into_par_iter()
        .map(|e| {
            let ed = &mesh.edges[e];
            let kind = ed.label.map(|l| l.kind);
            let mut jump = 0.0;
            let mut bterm = 0.0;
            let (mut omb, mut ohb) = (0.0, 0.0);
            let t0 = ed.tris[0].unwrap();
            let g0 = &d.sigma.geoms[t0];
            let li = crate::assembly::edge_in_triangle(mesh, t0, e);
            let fr = EdgeFrame { n: g0.n[li], t: g0.t[li], hint: g0.centroid() };
            for (s, w) in proj.points() {
                let x = point_on(mesh, e, s);
                let wl = w * ed.length;
                match kind {
                    None => {
                        let t1 = ed.tris[1].unwrap();
                        let a = sym_apply(cs[t0].eval(g0.barycentric(x)), ed.tangent);
                        let b = sym_apply(cs[t1].eval(d.sigma.geoms[t1].barycentric(x)), ed.tangent);
                        jump += wl * ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2));
                    }
                    Some(BcKind::Clamped) => {
                        let (dtt, dtg) = pb.tangential_data(x, &fr);
                        let v = sym_apply(cs[t0].eval(g0.barycentric(x)), fr.t);
                        let r = [v[0] - dtt * fr.t[0] - dtg * fr.n[0], v[1] - dtt * fr.t[1] - dtg * fr.n[1]];
                        bterm += wl * (r[0] * r[0] + r[1] * r[1]);
                    }
                    Some(BcKind::SimplySupported) => {
                        let (dtt, _) = pb.tangential_data(x, &fr);
                        let v = sym_apply(cs[t0].eval(g0.barycentric(x)), fr.t);
                        let r = v[0] * fr.t[0] + v[1] * fr.t[1] - dtt;
                        bterm += wl * r * r;
                    }
                    Some(BcKind::Free) => {}
                }
            }
            if matches!(kind, Some(BcKind::SimplySupported) | Some(BcKind::Free)) && pb.has_exact() {
                let gf = crate::spaces::constraints::edge_frame(mesh, e);
                let mb = |s: f64| along(mesh, e, s, &|x| pb.m_b(x, &gf));
                let pi = proj.interp(&mb);
                for (s, w) in proj.points() {
                    omb += w * ed.length * (mb(s) - proj.eval_interp(&pi, s)).powi(2);
                }
                if kind == Some(BcKind::Free) {
                    let hb = |s: f64| along(mesh, e, s, &|x| pb.h_b(x, &gf));
                    let c = proj.project(&hb);
                    for (s, w) in proj.points() {
                        ohb += w * ed.length * (hb(s) - proj.eval_b(&c, s)).powi(2);
                    }
                }
            }
            (jump, bterm, omb, ohb)
        })
        .collect();

    let mut report = EstimatorReport::default();
    for (t, el) in elements.iter().enumerate() {
        let _ = t;
        report.eta1_sq += el.volume;
        report.osc_f_sq += el.osc_f;
    }
    for (e, &(jump, bterm, omb, ohb)) in edge_terms.iter().enumerate() {
        let ed = &mesh.edges[e];
        let he = ed.length;
        let kind = ed.label.map(|l| l.kind);
        report.eta1_sq += he * (jump + bterm);
        report.osc_mb_sq += he * omb;
        report.osc_hb_sq += he.powi(3) * ohb;
        for t in ed.tris.iter().flatten() {
            let hk = h_k(d.sigma.geoms[*t].area);
            let el = &mut elements[*t];
            el.edge += hk * jump;
            match kind {
                Some(BcKind::Clamped) => el.clamped += hk * bterm,
                Some(BcKind::SimplySupported) => el.simply += hk * bterm,
                _ => {}
            }
            el.osc_mb += he * omb;
            el.osc_hb += he.powi(3) * ohb;
        }
    }
    report.elements = elements;
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::default_order;
    use crate::mesh::BcKind;
    use crate::problems::manufactured;
    use crate::solver::solve;
    use crate::spaces::SplitPolicy;

    #[test]
    fn exact_moment_has_zero_residual() {
        let p = manufactured(5, BcKind::Clamped);
        let mesh = p.mesh.uniform_refine();
        let d = Discretization::new(&p, &mesh, 3, SplitPolicy::None, default_order(3)).unwrap();
        let s = solve(&d).unwrap();
        let r = estimate(&d, &s);
        assert!(r.eta41() < 1e-9, "{r:?}");
        assert!(r.eta52() < 1e-9);
        assert_eq!(r.osc_f_sq, 0.0_f64.max(r.osc_f_sq));
    }

    #[test]
    fn totals_are_sums_of_parts() {
        let p = manufactured(6, BcKind::SimplySupported);
        let mesh = p.mesh.uniform_refine();
        let d = Discretization::new(&p, &mesh, 3, SplitPolicy::None, default_order(3)).unwrap();
        let s = solve(&d).unwrap();
        let r = estimate(&d, &s);
        let sum: f64 = r.elements.iter().map(|e| e.total()).sum();
        assert!((r.eta52().powi(2) - sum).abs() <= 1e-13 * sum);
        assert!(r.elements.iter().all(|e| e.volume >= 0.0 && e.edge >= 0.0 && e.osc_f >= 0.0));
        assert!(r.eta41() > 0.0);
    }
}
