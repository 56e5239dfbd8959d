//! Dimension counts, exactness and nestedness on a randomly refined L-shape.

use divdiv_plate::mesh::builders;
use divdiv_plate::verify::{check_boundary_kernel, check_complex, check_nestedness};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut m = builders::lshape_clamped_corner();
    for _ in 0..3 {
        let marked: Vec<usize> = (0..m.num_triangles()).filter(|_| rng.gen_bool(0.4)).collect();
        m = m.bisect(&marked);
    }
    let fine = m.bisect(&[0, 5]);
    let mut r = check_complex(&m, 3, 1).unwrap();
    r.extend(check_nestedness(&m, &fine, 3).unwrap());
    r.extend(check_boundary_kernel(&m, 3, 1).unwrap());
    print!("{}", r.to_text());
    std::process::exit(if r.passed() { 0 } else { 3 });
}
