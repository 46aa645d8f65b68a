mod common;

use common::{families, family_contacts, hessian_oracle_error};
use foliage::polar::SolverOptions;

#[test]
fn restricted_hessian_matches_chart_finite_differences() {
    let opts = SolverOptions::default();
    for f in families() {
        let pts = family_contacts(&f, 200, &opts);
        assert_eq!(pts.len(), 200, "{}: only {} contacts", f.name, pts.len());
        let worst = pts.iter().map(|z| hessian_oracle_error(&f.model, &f.morse, z)).fold(0.0, f64::max);
        println!("{}: worst relative error {worst:e}", f.name);
        assert!(worst < 1e-5, "{}: relative error {worst:e}", f.name);
    }
}

#[test]
fn oracle_rejects_the_flat_tangent_hessian() {
    let opts = SolverOptions::default();
    for f in families().into_iter().filter(|f| ["pham 3,4", "weighted quadric", "twisted diagonal"].contains(&f.name)) {
        let pts = family_contacts(&f, 20, &opts);
        let worst = pts
            .iter()
            .map(|z| {
                let (t, h) = common::flat_hessian(&f.model, &f.morse, z);
                common::oracle_distance(&f.model, &f.morse, z, &t, &h)
            })
            .fold(0.0, f64::max);
        assert!(worst > 1e-3, "{}: flat Hessian within {worst:e} of the oracle everywhere", f.name);
    }
}
