//! Uniform and adaptive refinement loops, run histories and rate fits.

use std::fmt::Write as _;
use std::time::Instant;

use thiserror::Error;

use crate::assembly::{default_order, Discretization};
use crate::estimator::{estimate, EstimatorReport};
use crate::mesh::Mesh;
use crate::postprocess::{error_norms, postprocess_deflection, ErrorNorms, PostError};
use crate::problems::PlateProblem;
use crate::solver::{solve, SolverError};
use crate::spaces::SplitPolicy;

#[derive(Debug, Error, PartialEq)]
pub enum RunError {
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Post(#[from] PostError),
    #[error("theta must lie in (0, 1), got {0}")]
    Theta(f64),
    #[error("at least one level is required")]
    NoLevels,
}

#[derive(Debug, Error, PartialEq)]
pub enum RateError {
    #[error("need at least two points, got {0}")]
    TooFew(usize),
    #[error("nonpositive value {0} in the data")]
    Nonpositive(f64),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SpaceKind {
    Standard,
    Extended,
}

#[derive(Clone, Debug)]
pub struct RunConfig {
    pub k: usize,
    pub theta: f64,
    pub max_dofs: usize,
    pub max_iter: usize,
    pub space: Option<SpaceKind>,
    pub quad_order: Option<usize>,
    /// record wall time per iteration (otherwise `nan`, keeping output reproducible)
    pub timing: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self { k: 3, theta: 0.3, max_dofs: 200_000, max_iter: 25, space: None, quad_order: None, timing: false }
    }
}

impl RunConfig {
    pub fn policy(&self, p: &PlateProblem) -> SplitPolicy {
        let ext = match self.space {
            Some(SpaceKind::Extended) => true,
            Some(SpaceKind::Standard) => false,
            None => p.prefers_extended,
        };
        if ext {
            p.extended
        } else {
            SplitPolicy::None
        }
    }

    pub fn order(&self) -> usize {
        self.quad_order.unwrap_or_else(|| default_order(self.k))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct IterationRecord {
    pub iter: usize,
    pub ntri: usize,
    pub ndof_sigma: usize,
    pub ndof_u: usize,
    pub eta41: f64,
    pub eta52: f64,
    pub osc_f: f64,
    pub osc_mb: f64,
    pub osc_hb: f64,
    pub errors: Option<ErrorNorms>,
    pub marked: usize,
    pub seconds: f64,
}

impl IterationRecord {
    /// Total number of unknowns.
    pub fn ndof(&self) -> usize {
        self.ndof_sigma + self.ndof_u
    }
}

#[derive(Clone, Debug, Default)]
pub struct RunHistory {
    pub problem: String,
    pub records: Vec<IterationRecord>,
    /// final mesh of the run
    pub mesh: Option<Mesh>,
}

pub const CSV_HEADER: &str = "iter,ntri,ndof_sigma,ndof_u,eta41,eta52,osc_f,osc_mb,osc_hb,err_sigma_L2,err_sigma_Cinv,err_divdiv,err_w,err_Qw,err_Qw_2h,err_wstar_2h,marked,seconds";

fn num(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else {
        format!("{v:.10e}")
    }
}

/// Quantities that can be fitted against the number of unknowns.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Quantity {
    Eta41,
    Eta52,
    SigmaL2,
    SigmaCinv,
    DivDiv,
    W,
    Qw,
    Qw2h,
    WStar2h,
}

impl Quantity {
    pub const ERRORS: [Quantity; 7] =
        [Quantity::SigmaL2, Quantity::SigmaCinv, Quantity::DivDiv, Quantity::W, Quantity::Qw, Quantity::Qw2h, Quantity::WStar2h];

    /// Column name in the history CSV.
    pub fn label(self) -> &'static str {
        match self {
            Quantity::Eta41 => "eta41",
            Quantity::Eta52 => "eta52",
            Quantity::SigmaL2 => "err_sigma_L2",
            Quantity::SigmaCinv => "err_sigma_Cinv",
            Quantity::DivDiv => "err_divdiv",
            Quantity::W => "err_w",
            Quantity::Qw => "err_Qw",
            Quantity::Qw2h => "err_Qw_2h",
            Quantity::WStar2h => "err_wstar_2h",
        }
    }

    pub fn of(self, r: &IterationRecord) -> f64 {
        let e = |f: fn(&ErrorNorms) -> f64| r.errors.as_ref().map_or(f64::NAN, f);
        match self {
            Quantity::Eta41 => r.eta41,
            Quantity::Eta52 => r.eta52,
            Quantity::SigmaL2 => e(|e| e.sigma_l2),
            Quantity::SigmaCinv => e(|e| e.sigma_cinv),
            Quantity::DivDiv => e(|e| e.divdiv),
            Quantity::W => e(|e| e.w),
            Quantity::Qw => e(|e| e.qw),
            Quantity::Qw2h => e(|e| e.qw_2h),
            Quantity::WStar2h => e(|e| e.wstar_2h),
        }
    }
}

impl RunHistory {
    pub fn to_csv(&self) -> String {
        let mut s = String::from(CSV_HEADER);
        s.push('\n');
        for r in &self.records {
            let e = r.errors.unwrap_or(ErrorNorms {
                sigma_l2: f64::NAN,
                sigma_cinv: f64::NAN,
                divdiv: f64::NAN,
                w: f64::NAN,
                qw: f64::NAN,
                qw_2h: f64::NAN,
                wstar_2h: f64::NAN,
            });
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                r.iter,
                r.ntri,
                r.ndof_sigma,
                r.ndof_u,
                num(r.eta41),
                num(r.eta52),
                num(r.osc_f),
                num(r.osc_mb),
                num(r.osc_hb),
                num(e.sigma_l2),
                num(e.sigma_cinv),
                num(e.divdiv),
                num(e.w),
                num(e.qw),
                num(e.qw_2h),
                num(e.wstar_2h),
                r.marked,
                num(r.seconds)
            );
        }
        s
    }

    pub fn series(&self, q: Quantity) -> Vec<(f64, f64)> {
        self.records.iter().map(|r| (r.ndof() as f64, q.of(r))).collect()
    }

    /// Least-squares slope of log q against log N over the last `tail` records.
    pub fn rate(&self, q: Quantity, tail: usize) -> Result<f64, RateError> {
        let s = self.series(q);
        fit_rate(&s[s.len().saturating_sub(tail)..])
    }

    /// Slope over the records with N at least the final N divided by `span`.
    pub fn tail_rate(&self, q: Quantity, span: f64) -> Result<f64, RateError> {
        let s = self.series(q);
        let last = s.last().map_or(0.0, |p| p.0);
        let tail: Vec<_> = s.into_iter().filter(|p| p.0 * span >= last).collect();
        fit_rate(&tail)
    }

    /// log2(e_i / e_{i+1}) for consecutive records.
    pub fn orders(&self, q: Quantity) -> Vec<f64> {
        successive_orders(&self.series(q).iter().map(|p| p.1).collect::<Vec<_>>())
    }
}

/// Least-squares slope of log y against log x.
pub fn fit_rate(pts: &[(f64, f64)]) -> Result<f64, RateError> {
    if pts.len() < 2 {
        return Err(RateError::TooFew(pts.len()));
    }
    if let Some(&(x, y)) = pts.iter().find(|p| !(p.0 > 0.0 && p.1 > 0.0)) {
        return Err(RateError::Nonpositive(if x > 0.0 { y } else { x }));
    }
    let n = pts.len() as f64;
    let lx: Vec<f64> = pts.iter().map(|p| p.0.ln()).collect();
    let ly: Vec<f64> = pts.iter().map(|p| p.1.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    Ok(sxy / sxx)
}

pub fn successive_orders(e: &[f64]) -> Vec<f64> {
    e.windows(2).map(|w| (w[0] / w[1]).log2()).collect()
}

/// Minimal set whose squared indicators reach `theta` of the total; the
/// largest indicators are taken first with ties by ascending id.
pub fn mark_dorfler(eta_sq: &[f64], theta: f64) -> Vec<usize> {
    let total: f64 = eta_sq.iter().sum();
    let mut order: Vec<usize> = (0..eta_sq.len()).collect();
    order.sort_by(|&a, &b| eta_sq[b].total_cmp(&eta_sq[a]).then(a.cmp(&b)));
    let mut acc = 0.0;
    let mut out = vec![];
    for i in order {
        if acc >= theta * total && !out.is_empty() {
            break;
        }
        acc += eta_sq[i];
        out.push(i);
    }
    out.sort_unstable();
    out
}

/// Everything produced by one solve on one mesh.
pub struct Step {
    pub record: IterationRecord,
    pub report: EstimatorReport,
}

pub fn step(problem: &PlateProblem, mesh: &Mesh, cfg: &RunConfig, iter: usize) -> Result<Step, RunError> {
    let t0 = Instant::now();
    let d = Discretization::new(problem, mesh, cfg.k, cfg.policy(problem), cfg.order()).map_err(SolverError::from)?;
    let sol = solve(&d)?;
    let post = postprocess_deflection(&d, &sol)?;
    let errors = error_norms(&d, &sol, &post);
    let report = estimate(&d, &sol);
    let record = IterationRecord {
        iter,
        ntri: mesh.num_triangles(),
        ndof_sigma: sol.ndof_sigma,
        ndof_u: sol.ndof_u,
        eta41: report.eta41(),
        eta52: report.eta52(),
        osc_f: report.osc_f_sq.sqrt(),
        osc_mb: report.osc_mb_sq.sqrt(),
        osc_hb: report.osc_hb_sq.sqrt(),
        errors,
        marked: 0,
        seconds: if cfg.timing { t0.elapsed().as_secs_f64() } else { f64::NAN },
    };
    Ok(Step { record, report })
}

/// Solve on the uniform levels 1..=levels of the problem.
pub fn run_uniform(problem: &PlateProblem, levels: usize, cfg: &RunConfig) -> Result<RunHistory, RunError> {
    if levels == 0 {
        return Err(RunError::NoLevels);
    }
    let mut h = RunHistory { problem: problem.name.clone(), ..Default::default() };
    for l in 1..=levels {
        let mesh = problem.uniform_mesh(l);
        let s = step(problem, &mesh, cfg, l)?;
        h.records.push(s.record);
        h.mesh = Some(mesh);
    }
    Ok(h)
}

/// Free Sigma dofs on `mesh` without assembling.
pub fn sigma_dofs(problem: &PlateProblem, mesh: &Mesh, cfg: &RunConfig) -> Result<usize, RunError> {
    let d = Discretization::new(problem, mesh, cfg.k, cfg.policy(problem), cfg.order()).map_err(SolverError::from)?;
    let (red, _) = d.reduction().map_err(SolverError::from)?;
    Ok(red.nfree())
}

/// Solve, estimate, mark and bisect until the iteration limit or until the
/// next mesh would carry more than `max_dofs` free Sigma dofs.
/// A failed solve ends the loop and returns the partial history with the error.
pub fn run_adaptive(problem: &PlateProblem, cfg: &RunConfig) -> (RunHistory, Option<RunError>) {
    let mut h = RunHistory { problem: problem.name.clone(), ..Default::default() };
    if !(cfg.theta > 0.0 && cfg.theta < 1.0) {
        return (h, Some(RunError::Theta(cfg.theta)));
    }
    let mut mesh = problem.mesh.clone();
    for it in 0..cfg.max_iter {
        let s = match step(problem, &mesh, cfg, it) {
            Ok(s) => s,
            Err(e) => {
                h.mesh = Some(mesh);
                return (h, Some(e));
            }
        };
        let mut rec = s.record;
        if it + 1 == cfg.max_iter {
            h.records.push(rec);
            break;
        }
        let marked = mark_dorfler(&s.report.indicators(), cfg.theta);
        let next = mesh.bisect(&marked);
        match sigma_dofs(problem, &next, cfg) {
            Ok(n) if n <= cfg.max_dofs => {
                rec.marked = marked.len();
                h.records.push(rec);
                mesh = next;
            }
            Ok(_) => {
                h.records.push(rec);
                break;
            }
            Err(e) => {
                h.records.push(rec);
                h.mesh = Some(mesh);
                return (h, Some(e));
            }
        }
    }
    h.mesh = Some(mesh);
    (h, None)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dorfler_examples() {
        assert_eq!(mark_dorfler(&[4.0, 3.0, 2.0, 1.0], 0.5), vec![0, 1]);
        assert_eq!(mark_dorfler(&[1.0, 3.0, 2.0, 4.0], 1e-9), vec![3]);
        assert_eq!(mark_dorfler(&[4.0, 3.0, 2.0, 1.0], 0.999), vec![0, 1, 2, 3]);
        // ties go to the smaller id
        assert_eq!(mark_dorfler(&[1.0, 1.0, 1.0, 1.0], 0.5), vec![0, 1]);
    }

    #[test]
    fn rate_of_power_law() {
        let pts: Vec<(f64, f64)> = (1..6).map(|i| (10f64.powi(i), 3.0 * 10f64.powi(-2 * i))).collect();
        assert!((fit_rate(&pts).unwrap() + 2.0).abs() < 1e-12);
        let flat: Vec<(f64, f64)> = (1..4).map(|i| (i as f64, 5.0)).collect();
        assert_eq!(fit_rate(&flat).unwrap(), 0.0);
        assert_eq!(fit_rate(&[(1.0, 1.0)]), Err(RateError::TooFew(1)));
        assert!(fit_rate(&[(1.0, 1.0), (2.0, 0.0)]).is_err());
    }

    #[test]
    fn orders_of_table_values() {
        let o = successive_orders(&[3.0212e-5, 1.9634e-6]);
        assert!((o[0] - 3.94).abs() < 0.005);
    }
}
