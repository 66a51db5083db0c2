use std::sync::Arc;

use specmeas::gallery::{
    by_name, cmv_entry, continued_fraction, jacobi_coefficients, list, make_cmv, make_jacobi, make_penrose,
    make_sparse_schrodinger, CmvFamily, CouplingRule, JacobiFamily, SparseSpec,
};
use specmeas::resolvent::resolvent_action;
use specmeas::{DecayVector, C64};

#[test]
fn jacobi_matrices_are_symmetric_tridiagonal() {
    for fam in [
        JacobiFamily::Jacobi { a: 0.7, b: 0.3 },
        JacobiFamily::Laguerre { a: 0.5 },
        JacobiFamily::Charlier { a: 2.0 },
        JacobiFamily::Free,
    ] {
        let g = make_jacobi(fam.clone()).unwrap();
        for i in 1..40 {
            for j in 1..40 {
                let e = g.op.entry(i, j);
                assert_eq!(e, g.op.entry(j, i).conj());
                if i.abs_diff(j) > 1 {
                    assert_eq!(e, C64::new(0.0, 0.0));
                }
            }
            let (a, b) = jacobi_coefficients(&fam, i);
            assert_eq!(g.op.entry(i, i).re, b);
            assert_eq!(g.op.entry(i, i + 1).re, a);
        }
    }
}

#[test]
fn legendre_recurrence_in_closed_form() {
    // a_k = k / sqrt(4k^2 - 1), b_k = 0 for the uniform weight on [-1, 1].
    let fam = JacobiFamily::Jacobi { a: 0.0, b: 0.0 };
    for k in 1..100 {
        let kf = k as f64;
        let (a, b) = jacobi_coefficients(&fam, k);
        assert!((a - kf / (4.0 * kf * kf - 1.0).sqrt()).abs() < 1e-15);
        assert!(b.abs() < 1e-15);
    }
}

#[test]
fn cmv_sections_are_unitary() {
    for fam in [CmvFamily::RogersSzego { q: 0.5 }, CmvFamily::Geronimus { a: C64::new(0.3, 0.4) }] {
        let g = make_cmv(fam.clone()).unwrap();
        // Columns j <= 20 are supported in rows <= 23; their Gram matrix is I.
        for j in 1..=20 {
            for k in 1..=20 {
                let dot: C64 = (1..=30).map(|i| g.op.entry(i, j) * g.op.entry(i, k).conj()).sum();
                let want = if j == k { 1.0 } else { 0.0 };
                assert!((dot - want).norm() < 1e-14, "{fam:?} ({j},{k}): {dot}");
            }
        }
        let alpha = |n: usize| fam.verblunsky(n);
        assert_eq!(g.op.entry(1, 1), cmv_entry(&alpha, 1, 1));
        assert_eq!(g.op.entry(1, 1), alpha(0).conj());
    }
}

#[test]
fn continued_fraction_matches_the_resolvent() {
    let fam = JacobiFamily::Jacobi { a: 0.7, b: 0.3 };
    let g = make_jacobi(fam.clone()).unwrap();
    for z in [C64::new(0.2, 0.3), C64::new(-0.9, 0.05), C64::new(1.5, -0.2)] {
        let sol = resolvent_action(&g.op, &DecayVector::basis(1), z, 600).unwrap();
        let cf = continued_fraction(&fam, z, 4000);
        assert!((sol.coeffs[0] - cf).norm() <= sol.bound + 1e-10, "{z}");
    }
}

#[test]
fn sparse_potential_sits_at_factorials() {
    let spec = SparseSpec { rule: CouplingRule::Inverse(2.0), jmax: 5 };
    let sites = spec.sites();
    // 1! = 1 and 2! = 2 are distinct, so every j contributes its own site.
    assert_eq!(sites.iter().map(|s| s.0).collect::<Vec<_>>(), vec![1, 2, 6, 24, 120]);
    let g = make_sparse_schrodinger(spec).unwrap();
    for n in 1..130 {
        let v = sites.iter().find(|s| s.0 == n).map_or(0.0, |s| s.1);
        assert_eq!(g.op.entry(n, n).re, 2.0 + v, "site {n}");
        assert_eq!(g.op.entry(n, n + 1).re, -1.0);
    }
    assert_eq!(spec.expected_type(), "ac");
    assert_eq!(SparseSpec { rule: CouplingRule::Constant(1.0), jmax: 5 }.expected_type(), "sc");
}

#[test]
fn penrose_patch_is_a_connected_symmetric_graph() {
    let patch = make_penrose(10.0).unwrap();
    assert!(patch.len() > 300);
    assert!(patch.is_connected());
    for (v, nb) in patch.neighbours.iter().enumerate() {
        for &w in nb {
            assert!(patch.neighbours[w - 1].contains(&(v + 1)), "edge {}-{w} not symmetric", v + 1);
        }
        // Rhombus tilings have vertex degrees between 3 and 7.
        assert!((3..=7).contains(&patch.degree[v]), "vertex {} has degree {}", v + 1, patch.degree[v]);
    }
    // Rows of H_0 sum to zero, as for any graph Laplacian.
    for j in 1..=50 {
        let s: C64 = (1..=patch.len()).map(|i| patch.op.entry(i, j)).sum();
        assert!(s.norm() < 1e-12 || patch.degree[j - 1] != patch.neighbours[j - 1].len());
    }
}

#[test]
fn every_listed_name_builds_with_defaults() {
    for (name, _) in list() {
        if name == "penrose" {
            continue;
        }
        let g = by_name(name, &Default::default()).unwrap_or_else(|e| panic!("{name}: {e}"));
        assert!(g.op.entry(1, 1).is_finite());
    }
    assert!(by_name("nope", &Default::default()).is_err());
}

#[test]
fn custom_families_use_their_rules() {
    let fam = JacobiFamily::Custom(Arc::new(|k| (1.0 / k as f64, k as f64)));
    let g = make_jacobi(fam).unwrap();
    assert_eq!(g.op.entry(3, 3).re, 3.0);
    assert_eq!(g.op.entry(3, 4).re, 1.0 / 3.0);
}
