//! Adaptive run on the L-shaped plate clamped at the reentrant corner.
//! Prints the history as CSV followed by the slopes over the last decade of N.

use divdiv_plate::adapt::{run_adaptive, Quantity, RunConfig};
use divdiv_plate::problems::lshape_clamped_corner;

fn main() {
    let p = lshape_clamped_corner();
    let max_dofs = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(20_000);
    let cfg = RunConfig { max_dofs, max_iter: 400, ..Default::default() };
    let (h, err) = run_adaptive(&p, &cfg);
    print!("{}", h.to_csv());
    if let Some(e) = err {
        eprintln!("stopped: {e}");
    }
    for q in [Quantity::SigmaL2, Quantity::W, Quantity::WStar2h, Quantity::Eta41] {
        println!("# {q:?} slope {:.3}", h.tail_rate(q, 10.0).unwrap_or(f64::NAN));
    }
}
