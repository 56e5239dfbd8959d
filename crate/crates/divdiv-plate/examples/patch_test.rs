//! A quintic deflection is reproduced up to rounding for every combination of
//! clamped, simply supported and free edges on the unit square.

use divdiv_plate::assembly::{default_order, Discretization};
use divdiv_plate::mesh::{BcKind, BoundaryLabel, Mesh, Point2};
use divdiv_plate::postprocess::{error_norms, exact_sigma_norm, postprocess_deflection};
use divdiv_plate::problems::manufactured;
use divdiv_plate::solver::solve;
use divdiv_plate::spaces::SplitPolicy;

fn square(kinds: [BcKind; 4]) -> Mesh {
    let p = vec![Point2::new(0.0, 0.0), Point2::new(1.0, 0.0), Point2::new(1.0, 1.0), Point2::new(0.0, 1.0)];
    // consecutive edges of one kind share a component
    let mut comp = [0, 1, 2, 3];
    for i in 1..4 {
        if kinds[i] == kinds[i - 1] {
            comp[i] = comp[i - 1];
        }
    }
    if kinds[3] == kinds[0] {
        let (c, c0) = (comp[3], comp[0]);
        comp.iter_mut().filter(|x| **x == c).for_each(|x| *x = c0);
    }
    let edges: Vec<_> = (0..4).map(|i| (i, (i + 1) % 4, BoundaryLabel { kind: kinds[i], component: comp[i] })).collect();
    Mesh::from_raw(p, vec![[0, 1, 2], [0, 2, 3]], &edges).unwrap()
}

fn main() {
    use BcKind::*;
    let layouts = [
        [Clamped; 4],
        [SimplySupported; 4],
        [Clamped, Free, Free, Clamped],
        [Clamped, SimplySupported, Free, Free],
        [SimplySupported, Free, Free, SimplySupported],
        [Free, Free, Free, Clamped],
    ];
    for kinds in layouts {
        let p = manufactured(5, Clamped);
        let mesh = square(kinds).uniform_refine().uniform_refine();
        let d = Discretization::new(&p, &mesh, 3, SplitPolicy::None, default_order(3)).unwrap();
        let s = solve(&d).unwrap();
        let post = postprocess_deflection(&d, &s).unwrap();
        let e = error_norms(&d, &s, &post).unwrap();
        let name: String = kinds.iter().map(|k| k.letter()).collect();
        println!("{name}  relative sigma error {:.2e}  w* error {:.2e}", e.sigma_l2 / exact_sigma_norm(&d), e.wstar_2h);
    }
}
