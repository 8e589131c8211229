use cornerset::polytope::{Polytope, Tolerances, UnionRegion};
use cornerset::synthesis::*;
use nalgebra::{dmatrix, dvector};

#[test]
fn probe_clamp_toy() {
    let sys = LinearSystem::new(
        dmatrix![1.0, 0.0; 0.0, 1.0],
        dmatrix![1.0; 0.0],
        dmatrix![0.0; 1.0],
        dvector![0.0, 0.0],
        Polytope::from_bounds(&[-10.0, 0.0], &[10.0, 1.0]).unwrap(),
        Polytope::from_bounds(&[-1.0], &[1.0]).unwrap(),
        Polytope::from_bounds(&[-0.3], &[0.3]).unwrap(),
        0.1,
    )
    .unwrap()
    .with_clamps(vec![StateClamp { dim: 1, lo: 0.0, hi: 1.0, kind: ClampKind::PlantEnforced }])
    .unwrap();
    let tol = Tolerances::default();
    let safe = UnionRegion::from_polytope(Polytope::from_bounds(&[-5.0, 0.0], &[5.0, 1.0]).unwrap());
    let pre = robust_pre(&safe, &sys, &tol).unwrap();
    println!("pre parts: {}", pre.parts().len());
    for p in pre.parts() {
        println!("rows={} {:?}", p.num_rows(), p.rows());
    }
}
