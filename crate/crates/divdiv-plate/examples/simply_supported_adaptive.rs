//! L-shaped plate simply supported at the reentrant corner: uniform against
//! adaptive refinement.

use divdiv_plate::adapt::{run_adaptive, run_uniform, Quantity, RunConfig};
use divdiv_plate::problems::lshape_simply_supported;

fn main() {
    let p = lshape_simply_supported();
    let max_dofs = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(20_000);
    let u = run_uniform(&p, 4, &RunConfig::default()).expect("uniform run");
    let (a, err) = run_adaptive(&p, &RunConfig { max_dofs, max_iter: 400, ..Default::default() });
    if let Some(e) = err {
        eprintln!("stopped: {e}");
    }
    for (name, h) in [("uniform", &u), ("adaptive", &a)] {
        let last = h.records.last().unwrap();
        println!(
            "{name:<9} N {:>7}  sigma error {:.3e}  slope {:.2}",
            last.ndof(),
            Quantity::SigmaL2.of(last),
            h.tail_rate(Quantity::SigmaL2, 10.0).unwrap_or(f64::NAN)
        );
    }
}
