//! Writes the element indicators of the error estimator after a few adaptive
//! steps on the clamped L-shape, one CSV row per element.

use divdiv_plate::adapt::{run_adaptive, RunConfig};
use divdiv_plate::assembly::{default_order, Discretization};
use divdiv_plate::estimator::estimate;
use divdiv_plate::problems::lshape_clamped_corner;
use divdiv_plate::solver::solve;
use divdiv_plate::spaces::SplitPolicy;

fn main() {
    let p = lshape_clamped_corner();
    let (h, _) = run_adaptive(&p, &RunConfig { max_iter: 8, ..Default::default() });
    let mesh = h.mesh.unwrap();
    let d = Discretization::new(&p, &mesh, 3, SplitPolicy::None, default_order(3)).unwrap();
    let s = solve(&d).unwrap();
    let r = estimate(&d, &s);
    let c: Vec<_> = d.sigma.geoms.iter().map(|g| g.centroid()).collect();
    print!("{}", r.to_csv(&c));
    eprintln!("eta {:.4e}, {} elements", r.eta41(), mesh.num_triangles());
}
