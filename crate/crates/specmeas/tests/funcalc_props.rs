use std::sync::Arc;

use proptest::prelude::*;
use specmeas::funcalc::{apply_cb_function, apply_holomorphic, evolve, BoundedFunctionSpec, ContourSpec, Equation, EvolveOptions};
use specmeas::gallery::{make_finite_diagonal, make_jacobi, JacobiFamily};
use specmeas::poisson::MeasureOptions;
use specmeas::{DecayVector, ResolventOptions, C64};

fn get(v: &[C64], i: usize) -> C64 {
    v.get(i).copied().unwrap_or_default()
}

fn dist(a: &[C64], b: &[C64]) -> f64 {
    (0..a.len().max(b.len())).map(|i| (get(a, i) - get(b, i)).norm_sqr()).sum::<f64>().sqrt()
}

fn norm(a: &[C64]) -> f64 {
    a.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn schrodinger_on_a_diagonal_is_a_phase(d in prop::collection::vec(-2.0f64..2.0, 1..5), t in 0.0f64..3.0) {
        let g = make_finite_diagonal(d.clone());
        let x: Vec<C64> = (0..d.len()).map(|k| C64::new(1.0 / (k + 1) as f64, 0.5)).collect();
        let r = evolve(&g.op, &DecayVector::finite(x.clone()), Equation::Schrodinger, t, 1e-8, &EvolveOptions::default()).unwrap();
        let want: Vec<C64> = x.iter().zip(&d).map(|(c, &l)| c * C64::new(0.0, -l * t).exp()).collect();
        prop_assert!(dist(&r.vector, &want) <= 1e-6, "{:?} vs {want:?}", r.vector);
    }

    #[test]
    fn diffusion_on_a_diagonal_decays_each_mode(d in prop::collection::vec(0.05f64..3.0, 1..5), t in 0.1f64..2.0, half in any::<bool>()) {
        let alpha = if half { 0.5 } else { 1.0 };
        let g = make_finite_diagonal(d.clone());
        let x: Vec<C64> = (0..d.len()).map(|_| C64::new(1.0, 0.0)).collect();
        let r = evolve(&g.op, &DecayVector::finite(x), Equation::FractionalDiffusion { alpha }, t, 1e-8, &EvolveOptions::default()).unwrap();
        let want: Vec<C64> = d.iter().map(|&l| C64::new((-t * l.powf(alpha)).exp(), 0.0)).collect();
        prop_assert!(dist(&r.vector, &want) <= 1e-5, "{:?} vs {want:?}", r.vector);
    }

    #[test]
    fn evolution_is_linear_and_unitary(c1 in -1.0f64..1.0, c2 in -1.0f64..1.0, t in 0.1f64..2.0) {
        let g = make_jacobi(JacobiFamily::Jacobi { a: 0.2, b: -0.4 }).unwrap();
        let opts = EvolveOptions::default();
        let run = |v: &DecayVector| evolve(&g.op, v, Equation::Schrodinger, t, 1e-9, &opts).unwrap().vector;
        let u1 = run(&DecayVector::basis(1));
        let u2 = run(&DecayVector::basis(2));
        let mixed = run(&DecayVector::finite(vec![C64::new(c1, 0.0), C64::new(0.0, c2)]));
        let combo: Vec<C64> = (0..u1.len().max(u2.len())).map(|i| get(&u1, i) * c1 + get(&u2, i) * C64::new(0.0, c2)).collect();
        prop_assert!(dist(&mixed, &combo) <= 1e-6);
        prop_assert!((norm(&u1) - 1.0).abs() <= 1e-6);
        prop_assert!((norm(&mixed) - (c1 * c1 + c2 * c2).sqrt()).abs() <= 1e-6);
    }
}

#[test]
fn bounded_calculus_converges_on_a_diagonal() {
    let g = make_finite_diagonal(vec![0.3, -0.8]);
    let x = DecayVector::finite(vec![C64::new(0.6, 0.0), C64::new(0.8, 0.0)]);
    let spec = BoundedFunctionSpec::new(|l: f64| C64::new(l.cos(), l.sin())).with_lipschitz(1.0);
    let want = [C64::new(0.6, 0.0) * C64::new(0.0, 0.3).exp(), C64::new(0.8, 0.0) * C64::new(0.0, -0.8).exp()];
    let mut prev = f64::INFINITY;
    for n in [5, 20, 80] {
        let (v, _) = apply_cb_function(&g.op, &x, &spec, n, &MeasureOptions::default()).unwrap();
        let err = dist(&v, &want);
        assert!(err < prev, "stage {n}: {err}");
        prev = err;
    }
    assert!(prev < 0.02, "{prev}");
}

#[test]
fn contour_calculus_reproduces_a_polynomial() {
    // T^2 e_1 for the free Jacobi matrix is (1/4, 0, 1/4).
    let g = make_jacobi(JacobiFamily::Free).unwrap();
    let w: Arc<dyn Fn(C64) -> C64 + Send + Sync> = Arc::new(|z: C64| z * z);
    let contour = ContourSpec::rectangle(-2.0, 2.0, 1.0, 24, w);
    let r = apply_holomorphic(&g.op, &DecayVector::basis(1), &contour, 1e-9, &ResolventOptions::default()).unwrap();
    let want = [C64::new(0.25, 0.0), C64::new(0.0, 0.0), C64::new(0.25, 0.0)];
    assert!(dist(&r.vector, &want) <= 1e-8, "{:?}", &r.vector[..4.min(r.vector.len())]);
}

#[test]
fn evolve_rejects_negative_time() {
    let g = make_jacobi(JacobiFamily::Free).unwrap();
    assert!(evolve(&g.op, &DecayVector::basis(1), Equation::Schrodinger, -1.0, 1e-8, &EvolveOptions::default()).is_err());
}
