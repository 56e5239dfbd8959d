//! Newest vertex bisection toward the reentrant corner, written in the text mesh format and
//! read back.

use divdiv_plate::mesh::{builders, load_mesh, write_mesh};

fn main() {
    let mut m = builders::lshape_clamped_corner();
    for _ in 0..12 {
        let marked: Vec<usize> = (0..m.num_triangles())
            .filter(|&k| m.triangles[k].v.iter().any(|&v| m.vertices[v].p.norm() < 1e-14))
            .collect();
        m = m.bisect(&marked);
    }
    println!("{} triangles, min angle {:.2} deg", m.num_triangles(), m.min_angle().to_degrees());
    let text = write_mesh(&m);
    let back = load_mesh(&text).expect("round trip");
    assert_eq!(back.num_triangles(), m.num_triangles());
    print!("{text}");
}
