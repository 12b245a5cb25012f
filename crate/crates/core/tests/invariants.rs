use proptest::prelude::*;

use torus_hjb::approx::{inf_convolution, mollify_space, sup_convolution, MollifierSpec};
use torus_hjb::model::{legendre_numeric, Diffusion, TrigPoly};
use torus_hjb::pde::{solve_cauchy, Dissipation, Scheme, SolveConfig};
use torus_hjb::{GridFunction, ModelSpec, TorusGrid};

const N: usize = 24;

fn grid() -> TorusGrid {
    TorusGrid::new(1, N).unwrap()
}

fn model(m: f64, a0: f64) -> ModelSpec {
    ModelSpec::power(1, m)
        .unwrap()
        .with_potential(TrigPoly::cosine(1, 0.5, 1))
        .with_diffusion(Diffusion::Constant { a0 })
}

fn data() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0..1.0f64, N)
}

fn scheme() -> impl Strategy<Value = Scheme> {
    prop_oneof![Just(Scheme::LaxFriedrichs(Dissipation::Local)), Just(Scheme::Upwind)]
}

fn evolve(model: &ModelSpec, u0: &GridFunction, scheme: &Scheme) -> GridFunction {
    let cfg = SolveConfig::new(0.25).with_scheme(scheme.clone());
    solve_cauchy(model, u0, &cfg).unwrap().last().clone()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn adding_a_constant_commutes_with_the_flow(
        v in data(), k in -5.0..5.0f64, m in 1.5..3.0f64, a0 in 0.0..0.2f64, s in scheme()
    ) {
        let model = model(m, a0);
        let u0 = GridFunction::new(grid(), v).unwrap();
        let base = evolve(&model, &u0, &s);
        let moved = evolve(&model, &u0.shifted(k), &s);
        prop_assert!(moved.sup_distance(&base.shifted(k)) <= 1e-10);
    }

    #[test]
    fn ordered_data_stay_ordered(
        v in data(), bump in prop::collection::vec(0.0..0.5f64, N), m in 1.5..3.0f64, a0 in 0.0..0.2f64, s in scheme()
    ) {
        let model = model(m, a0);
        let lo = GridFunction::new(grid(), v.clone()).unwrap();
        let hi = GridFunction::new(grid(), v.iter().zip(&bump).map(|(a, b)| a + b).collect()).unwrap();
        let (u, w) = (evolve(&model, &lo, &s), evolve(&model, &hi, &s));
        for (a, b) in u.values().iter().zip(w.values()) {
            prop_assert!(a <= &(b + 1e-12));
        }
    }

    #[test]
    fn mollification_fixes_constants(c in -10.0..10.0f64, k in 2u32..6) {
        let f = GridFunction::constant(TorusGrid::new(1, 64).unwrap(), c);
        let spec = MollifierSpec::new(0.5f64.powi(k as i32)).unwrap();
        let g = mollify_space(&f, &spec).unwrap();
        prop_assert!(g.sup_distance(&f) <= 1e-12);
    }

    #[test]
    fn convolutions_bracket_the_function(v in data(), eps in 0.01..0.5f64, delta in 0.01..0.5f64) {
        let w = GridFunction::new(grid(), v).unwrap();
        let up = sup_convolution(&w, eps).unwrap();
        let down = inf_convolution(&w, delta).unwrap();
        for i in 0..N {
            prop_assert!(down.values()[i] <= w.values()[i]);
            prop_assert!(w.values()[i] <= up.values()[i]);
        }
    }

    #[test]
    fn closed_form_lagrangian_matches_numeric_legendre(m in 1.5..4.0f64, x in 0.0..1.0f64, q in -2.0..2.0f64) {
        let model = model(m, 0.0);
        let (x, q) = ([x, 0.0], [q, 0.0]);
        let exact = model.lagrangian(&x, &q);
        let num = legendre_numeric(&model, &x, &q, 6.0, 120_001).unwrap();
        prop_assert!(!num.on_boundary);
        prop_assert!((exact - num.value).abs() <= 1e-6, "{exact} vs {}", num.value);
    }
}
