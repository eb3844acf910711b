//! Library results against closed forms worked out by hand.

use soliton_core::catalog;
use soliton_core::field::DiffMode;
use soliton_core::tensor_lab::d1;
use soliton_core::warped::WarpedProfile;

/// Components (12, 13, 23) of `d(fθ)` for a fibred catalog case.
fn vertical_two_form(id: &str, p: &[f64]) -> [f64; 3] {
    let case = catalog::get(id).unwrap();
    let s = case.setup().unwrap().unwrap();
    let f = &case.decomposition.as_ref().unwrap().f;
    let fj = f.expand(p, 2, DiffMode::Analytic, 1e-4).unwrap()[0];
    let w: Vec<_> = s.jets(p, 2).unwrap().theta.iter().map(|t| *t * fj).collect();
    let m = d1(&w);
    [m[0][1].value(), m[0][2].value(), m[1][2].value()]
}

#[test]
fn nil_vertical_two_form() {
    for p in [[1.0, 1.0, 0.0], [0.3, -0.6, 0.2], [-0.9, 0.4, -0.5]] {
        let (y1, y2, y3) = (p[0], p[1], p[2]);
        let want = [-2.0 * (y1 * y2 + y3), -y2, y1];
        let got = vertical_two_form("nil", &p);
        for (g, w) in got.iter().zip(want) {
            assert!((g - w).abs() < 1e-12, "{p:?}: {got:?} vs {want:?}");
        }
    }
}

#[test]
fn sol_vertical_two_form() {
    for p in [[0.0f64, 0.0, 1.0], [0.4, -0.2, -0.7]] {
        let want = [0.0, 8.0 * p[2] * (-2.0 * p[0]).exp(), 0.0];
        let got = vertical_two_form("sol", &p);
        for (g, w) in got.iter().zip(want) {
            assert!((g - w).abs() < 1e-12, "{p:?}: {got:?}");
        }
    }
}

#[test]
fn power_law_profile_flow() {
    // λ = t^{1/√2}, A = K = 0: f = (λ″ + 0)/λ′ − 3λ′/λ = (1/√2 − 1)/t − 3/(√2 t) = −(√2 + 1)/t.
    let p = WarpedProfile::from_exprs("t^(1/sqrt(2))", None, 0.0, 0.0).unwrap();
    for t in [1.0, 1.3, 2.0] {
        assert!((p.f_from_lambda(t).unwrap() + (2f64.sqrt() + 1.0) / t).abs() < 1e-12);
    }
}

#[test]
fn sl2_ricci_eigenvalues() {
    let case = catalog::get("sl2").unwrap();
    let p = [0.3, 0.9, 0.1];
    let c = soliton_core::tensor_lab::curvature(&case.g, &p).unwrap();
    let g = case.g.matrix(&p).unwrap();
    let l = g.cholesky().unwrap().l().try_inverse().unwrap();
    let m = &l * c.ricci.matrix() * l.transpose();
    let mut e: Vec<f64> = m.symmetric_eigenvalues().iter().copied().collect();
    e.sort_by(f64::total_cmp);
    for (got, want) in e.iter().zip([-1.5, -1.5, 0.5]) {
        assert!((got - want).abs() < 1e-10, "{e:?}");
    }
    assert!((c.scalar + 2.5).abs() < 1e-10);
}
