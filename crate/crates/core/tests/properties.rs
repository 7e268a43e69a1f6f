use jbstar::algebra::{self, formulas, IsotopeContext};
use jbstar::linalg::{self, c, CMat};
use jbstar::model::{random_element, random_selfadjoint, random_unitary, random_unitary_scaled};
use jbstar::spectral;
use jbstar::unitary;
use jbstar::{Element, Model, ModelDescriptor, Tolerances};
use num_complex::Complex64;
use proptest::prelude::*;
use std::sync::Arc;

fn models() -> Vec<Arc<Model>> {
    [
        ModelDescriptor::full(1),
        ModelDescriptor::full(3),
        ModelDescriptor::symmetric(2),
        ModelDescriptor::direct_sum(vec![ModelDescriptor::full(2), ModelDescriptor::symmetric(3)]),
        ModelDescriptor::circle(16, ModelDescriptor::full(2)),
        ModelDescriptor::symmetric_circle(16),
    ]
    .iter()
    .map(|d| Model::build(d).unwrap())
    .collect()
}

fn model_strategy() -> impl Strategy<Value = Arc<Model>> {
    (0..models().len()).prop_map(|i| models()[i].clone())
}

fn tol() -> Tolerances {
    Tolerances::default()
}

/// Regular element with well-separated singular values and a given number of zeros per block.
fn regular(m: &Arc<Model>, seed: u64, drop: usize) -> Element {
    let w = random_unitary(m, seed);
    let v = random_unitary(m, seed + 1);
    let shapes = m.blocks().to_vec();
    w.map_blocks_indexed(|k, wb| {
        let n = wb.nrows();
        let keep = n.saturating_sub(drop).max(1);
        let d = CMat::from_fn(n, n, |i, j| if i == j && i < keep { c(0.5 + i as f64) } else { c(0.0) });
        if shapes[k].symmetric {
            wb * d * wb.transpose()
        } else {
            wb * d * v.blocks()[k].adjoint()
        }
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn svd_reconstructs_blocks(seed in any::<u64>(), drop in 0usize..3) {
        let m = Model::build(&ModelDescriptor::full(4)).unwrap();
        let a = regular(&m, seed, drop);
        let b = &a.blocks()[0];
        let d = linalg::svd(b);
        let sigma = CMat::from_diagonal(&d.singular_values.map(c));
        prop_assert!((&d.u * sigma * &d.v_adj - b).norm() < 1e-12);
        prop_assert!((d.u.adjoint() * &d.u - linalg::identity(4)).norm() < 1e-12);
        let values: Vec<f64> = d.singular_values.iter().copied().collect();
        prop_assert!(values.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn unitary_logarithm_inverts_exponential(seed in any::<u64>()) {
        let m = Model::build(&ModelDescriptor::full(3)).unwrap();
        // norm-π generators put an eigenvalue on the branch cut, so stay inside it
        let u = random_unitary_scaled(&m, seed, 3.0);
        let (h, gap) = linalg::unitary_log(&u.blocks()[0]);
        prop_assert!(gap > 1e-3);
        let back = linalg::exp_i_hermitian(&h, 1.0);
        prop_assert!((back - &u.blocks()[0]).norm() < 1e-11);
    }

    #[test]
    fn jordan_and_fundamental_identities(m in model_strategy(), seed in any::<u64>()) {
        let (a, b, x) = (random_element(&m, seed, 1.0), random_element(&m, seed ^ 1, 1.0), random_element(&m, seed ^ 2, 1.0));
        let a2 = a.square();
        prop_assert!(a.jordan(&b).jordan(&a2).distance(&a.jordan(&b.jordan(&a2))) < 1e-12);
        let u = |p: &Element, y: &Element| formulas::u_quadratic(|s: &Element, t: &Element| s.jordan(t), p, y);
        prop_assert!(u(&u(&a, &b), &x).distance(&u(&a, &u(&b, &u(&a, &x)))) < 1e-12);
        prop_assert!(u(&a, &x).distance(&a.u_op(&x)) < 1e-13);
    }

    #[test]
    fn triple_product_formulas_agree(m in model_strategy(), seed in any::<u64>()) {
        let (x, y, z) = (random_element(&m, seed, 1.0), random_element(&m, seed ^ 3, 1.0), random_element(&m, seed ^ 4, 1.0));
        let generic = formulas::triple(|s: &Element, t: &Element| s.jordan(t), Element::adjoint, &x, &y, &z);
        prop_assert!(generic.distance(&x.triple(&y, &z)) < 1e-13);
        prop_assert!(x.triple(&y, &z).norm() <= 1.0 + 1e-12);
    }

    #[test]
    fn isotope_triple_products_coincide(m in model_strategy(), seed in any::<u64>()) {
        let u = random_unitary(&m, seed);
        let ctx = IsotopeContext::unitary(&u, &tol()).unwrap();
        let (x, y, z) = (random_element(&m, seed ^ 5, 1.0), random_element(&m, seed ^ 6, 1.0), random_element(&m, seed ^ 7, 1.0));
        prop_assert!(ctx.triple(&x, &y, &z).distance(&x.triple(&y, &z)) < 1e-12);
        prop_assert!(ctx.product(&u, &x).distance(&x) < 1e-12);
        // the frame is a Jordan *-isomorphism M → M(u)
        let (fx, fy) = (ctx.from_standard(&x), ctx.from_standard(&y));
        prop_assert!(ctx.from_standard(&x.jordan(&y)).distance(&ctx.product(&fx, &fy)) < 1e-11);
        prop_assert!(ctx.from_standard(&x.adjoint()).distance(&ctx.involution(&fx).unwrap()) < 1e-11);
    }

    #[test]
    fn generalized_inverse_identities(m in model_strategy(), seed in any::<u64>(), drop in 0usize..2) {
        let t = tol();
        let a = regular(&m, seed, drop);
        let dagger = spectral::generalized_inverse(&a, &t).unwrap();
        let r = spectral::range_tripotent(&a, &t).unwrap();
        let re = r.element();
        let x = random_element(&m, seed ^ 8, 1.0);
        // Q(a)Q(a†) = Q(a†)Q(a) = P₂(r(a))
        let p2 = r.peirce(2, &x).unwrap();
        prop_assert!(a.q_op(&dagger.q_op(&x)).distance(&p2) < 1e-10);
        prop_assert!(dagger.q_op(&a.q_op(&x)).distance(&p2) < 1e-10);
        // L(a, a†) = L(r, r)
        prop_assert!(a.l_op(&dagger, &x).distance(&re.l_op(re, &x)) < 1e-10);
        // {a, a, a†} = a and {a, r, a†} = r
        prop_assert!(a.triple(&a, &dagger).distance(&a) < 1e-10);
        prop_assert!(a.triple(re, &dagger).distance(re) < 1e-10);
        // a = (a ∘_r a) ∘_r a† with x ∘_r y = {x, r, y}
        prop_assert!(a.triple(re, &a).triple(re, &dagger).distance(&a) < 1e-10);
        let sum = (0..=2).map(|k| r.peirce(k, &x).unwrap()).fold(m.zero(), |acc, p| acc + p);
        prop_assert!(sum.distance(&x) < 1e-12);
    }

    #[test]
    fn odd_functional_calculus_composes(m in model_strategy(), seed in any::<u64>()) {
        let a = random_element(&m, seed, 1.5);
        let f = |t: f64| t * t * t + 2.0 * t;
        let g = |t: f64| 0.5 * t * t * t - t;
        let ft = spectral::triple_functional_calculus_real(f, &a).unwrap();
        let composed = spectral::triple_functional_calculus_real(g, &ft).unwrap();
        let direct = spectral::triple_functional_calculus_real(|t| g(f(t)), &a).unwrap();
        prop_assert!(composed.distance(&direct) < 1e-9 * direct.norm().max(1.0));
        // the polynomial f agrees with its triple-power expression a^[3] + 2a
        let poly = &spectral::odd_power(&a, 1) + &a.scale(2.0);
        prop_assert!(ft.distance(&poly) < 1e-11);
    }

    #[test]
    fn factor_step_bounds(seed in any::<u64>(), scale in 0.05f64..1.6) {
        let m = Model::build(&ModelDescriptor::symmetric(3)).unwrap();
        let u = random_unitary(&m, seed);
        let e = random_unitary_scaled(&m, seed ^ 9, scale / 2.0);
        let v = e.u_op(&u);
        prop_assume!(u.distance(&v) < 1.9);
        let h = unitary::factor_step(&u, &v, &tol()).unwrap();
        prop_assert!(h.norm() <= std::f64::consts::PI * u.norm() + 1e-12);
        prop_assert!(h.symmetry_residual() < 1e-9);
        let ctx = IsotopeContext::unitary(&u, &tol()).unwrap();
        prop_assert!(ctx.exp_i(&h).distance(&v) < 1e-8);
    }

    #[test]
    fn isotope_components_agree(seed in any::<u64>()) {
        let m = Model::build(&ModelDescriptor::circle(32, ModelDescriptor::full(2))).unwrap();
        let t = tol();
        let u = random_unitary_scaled(&m, seed, 2.0);
        let ctx = IsotopeContext::unitary(&u, &t).unwrap();
        let x = random_unitary_scaled(&m, seed ^ 10, 2.0);
        let plain = unitary::in_principal_component(&x, &t).unwrap();
        let iso = unitary::in_principal_component_of_isotope(&x, &ctx, &t).unwrap();
        prop_assert_eq!(plain.verdict, iso.verdict);
    }
}

#[test]
fn central_elements_of_direct_sums() {
    let m = Model::build(&ModelDescriptor::direct_sum(vec![ModelDescriptor::full(2), ModelDescriptor::full(1)])).unwrap();
    let z = m.unit().map_blocks_indexed(|k, b| b * Complex64::new(k as f64 + 2.0, 1.0));
    assert!(algebra::is_central(&z, &tol()));
    let h = random_selfadjoint(&m, 1, 1.0);
    assert!(!algebra::is_central(&h, &tol()));
}
