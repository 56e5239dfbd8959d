//! Uniform refinement on the square whose stiffness jumps across x = 1/2,
//! solved in the space with relaxed tangential continuity on the interface.
//! Prints errors and successive orders per level.

use divdiv_plate::adapt::{run_uniform, RunConfig};
use divdiv_plate::cli::rate_table;
use divdiv_plate::problems::jump_square;

fn main() {
    let levels = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(5);
    let h = run_uniform(&jump_square(), levels, &RunConfig::default()).expect("uniform run");
    print!("{}", rate_table(&h));
}
