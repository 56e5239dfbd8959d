use divdiv_plate::adapt::{run_adaptive, RunConfig};
use divdiv_plate::mesh::write_mesh;
use divdiv_plate::problems::lshape_clamped_corner;

#[test]
fn adaptive_runs_are_bitwise_identical() {
    let cfg = RunConfig { max_dofs: 4000, ..Default::default() };
    let p = lshape_clamped_corner();
    let (a, ea) = run_adaptive(&p, &cfg);
    let (b, eb) = run_adaptive(&p, &cfg);
    assert!(ea.is_none() && eb.is_none());
    assert!(a.records.len() > 3);
    assert_eq!(a.to_csv(), b.to_csv());
    assert_eq!(write_mesh(a.mesh.as_ref().unwrap()), write_mesh(b.mesh.as_ref().unwrap()));
    for (x, y) in a.records.iter().zip(&b.records) {
        assert_eq!(x.eta41.to_bits(), y.eta41.to_bits());
    }
}

#[test]
fn dof_budget_is_respected() {
    let cfg = RunConfig { max_dofs: 2500, ..Default::default() };
    let (h, err) = run_adaptive(&lshape_clamped_corner(), &cfg);
    assert!(err.is_none());
    assert!(h.records.iter().all(|r| r.ndof_sigma <= 2500));
    assert_eq!(h.records.last().unwrap().marked, 0);
}
