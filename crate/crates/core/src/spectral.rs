//! Triple spectrum, triple functional calculus, generalized inverses, range
//! tripotents and Peirce projections.
//!
//! In a matrix block `a = U Σ V*` the subtriple generated by `a` is
//! `{U f(Σ) V* : f ∈ C₀(Ω_a)}`, so every triple-functional-calculus operation
//! reduces to an SVD per block.

use crate::element::Element;
use crate::error::{Error, Result};
use crate::linalg::{self, c, CMat};
use crate::tolerance::Tolerances;
use num_complex::Complex64;

/// Relative threshold below which a singular value is treated as an exact zero.
const ZERO_RELATIVE: f64 = 1e-12;

fn zero_threshold(a: &Element) -> f64 {
    ZERO_RELATIVE * a.norm().max(1.0)
}

/// Nonzero singular values, per grid point and globally.
#[derive(Debug, Clone, PartialEq)]
pub struct TripleSpectrum {
    per_point: Vec<Vec<f64>>,
    values: Vec<f64>,
}

impl TripleSpectrum {
    /// Sorted union over all points; nearly equal values are merged.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// One sorted list per grid point (a single entry for matrix models).
    pub fn per_point(&self) -> &[Vec<f64>] {
        &self.per_point
    }

    pub fn max(&self) -> Option<f64> {
        self.values.last().copied()
    }

    pub fn min(&self) -> Option<f64> {
        self.values.first().copied()
    }
}

fn sorted_merged(mut values: Vec<f64>) -> Vec<f64> {
    values.sort_by(f64::total_cmp);
    let mut out: Vec<f64> = Vec::with_capacity(values.len());
    for v in values {
        match out.last() {
            Some(&last) if (v - last).abs() <= 1e-12 * v.max(1.0) => {}
            _ => out.push(v),
        }
    }
    out
}

fn point_groups(a: &Element) -> Vec<&[CMat]> {
    let per = a.model().blocks_per_point();
    a.blocks().chunks(per).collect()
}

pub fn triple_spectrum(a: &Element) -> TripleSpectrum {
    let zero = zero_threshold(a);
    let per_point: Vec<Vec<f64>> = point_groups(a)
        .into_iter()
        .map(|blocks| {
            let vals = blocks
                .iter()
                .flat_map(linalg::singular_values)
                .filter(|&s| s > zero)
                .collect();
            sorted_merged(vals)
        })
        .collect();
    let values = sorted_merged(per_point.iter().flatten().copied().collect());
    TripleSpectrum { per_point, values }
}

fn apply_to_block(b: &CMat, zero: f64, f: &impl Fn(f64) -> Complex64) -> Result<CMat> {
    let svd = linalg::svd(b);
    let mut diag = Vec::with_capacity(svd.singular_values.len());
    for &s in svd.singular_values.iter() {
        if s <= zero {
            diag.push(c(0.0));
            continue;
        }
        let value = f(s);
        if !value.re.is_finite() || !value.im.is_finite() {
            return Err(Error::UndefinedOnSpectrum { point: s });
        }
        diag.push(value);
    }
    let d = CMat::from_diagonal(&nalgebra::DVector::from_vec(diag));
    Ok(&svd.u * d * &svd.v_adj)
}

/// `f_t(a) = U f(Σ) V*` blockwise, with `f(0) = 0` imposed on the kernel.
/// Symmetric blocks are projected back onto the symmetric matrices; the
/// projection only removes rounding since the subtriple generated by a
/// symmetric `a` consists of symmetric matrices.
pub fn triple_functional_calculus(f: impl Fn(f64) -> Complex64, a: &Element) -> Result<Element> {
    let zero = zero_threshold(a);
    let mut blocks = Vec::with_capacity(a.blocks().len());
    for (b, shape) in a.blocks().iter().zip(a.model().blocks()) {
        let m = apply_to_block(b, zero, &f)?;
        blocks.push(if shape.symmetric { (&m + m.transpose()) * c(0.5) } else { m });
    }
    Ok(a.map_blocks_indexed(|k, _| blocks[k].clone()))
}

/// Real-valued convenience wrapper.
pub fn triple_functional_calculus_real(f: impl Fn(f64) -> f64, a: &Element) -> Result<Element> {
    triple_functional_calculus(|t| c(f(t)), a)
}

/// Odd triple power `a^[2n+1]` through the recursion `a^[2n+1] = {a, a, a^[2n-1]}`.
pub fn odd_power(a: &Element, n: u32) -> Element {
    (0..n).fold(a.clone(), |acc, _| a.triple(a, &acc))
}

/// `a^[2] = U Σ² V*`, the image of `t ↦ t²` under the triple functional calculus.
pub fn triple_square(a: &Element) -> Element {
    triple_functional_calculus(|t| c(t * t), a).expect("t² is finite")
}

/// Unique cubic root in the subtriple generated by `a`.
pub fn cubic_root(a: &Element) -> Element {
    triple_functional_calculus(|t| c(t.cbrt()), a).expect("cube root is finite")
}

/// Checks `0 ∉ Ω_a` under the discretized convention: per block, singular
/// values below `1e-12·max(1,‖a‖)` are exact zeros, values between that and
/// `ε_inv` make `a` non-regular, and in circle models the number of nonzero
/// singular values must not change across the grid (a rank drop means `0` is
/// an accumulation point of the spectrum in the continuum limit).
pub fn regularity_check(a: &Element, tol: &Tolerances) -> Result<()> {
    let zero = zero_threshold(a);
    let mut ranks = Vec::new();
    for blocks in point_groups(a) {
        let mut rank = 0;
        for s in blocks.iter().flat_map(linalg::singular_values) {
            if s > zero && s <= tol.invertible {
                return Err(Error::NotRegular { value: s });
            }
            if s > zero {
                rank += 1;
            }
        }
        ranks.push(rank);
    }
    if a.model().is_circle() {
        let (lo, hi) = (ranks.iter().min(), ranks.iter().max());
        if lo != hi {
            let smallest = a.min_singular_value();
            return Err(Error::NotRegular { value: smallest });
        }
    }
    Ok(())
}

pub fn is_von_neumann_regular(a: &Element, tol: &Tolerances) -> bool {
    regularity_check(a, tol).is_ok()
}

/// `a† = U Σ⁻¹ V*` on the support of `a`; satisfies `Q(a)(a†) = a` and
/// `Q(a†)(a) = a†`. For invertible `a` this is `(a⁻¹)*`.
pub fn generalized_inverse(a: &Element, tol: &Tolerances) -> Result<Element> {
    regularity_check(a, tol)?;
    triple_functional_calculus(|t| c(1.0 / t), a)
}

/// A tripotent: `{e, e, e} = e`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tripotent {
    e: Element,
}

impl Tripotent {
    pub fn new(e: Element, tol: &Tolerances) -> Result<Self> {
        let residual = tripotent_residual(&e);
        if residual > tol.identity * 10.0 {
            return Err(Error::NotTripotent { residual });
        }
        Ok(Tripotent { e })
    }

    pub fn element(&self) -> &Element {
        &self.e
    }

    pub fn into_element(self) -> Element {
        self.e
    }

    /// Number of unit singular values per block, summed.
    pub fn rank(&self) -> usize {
        self.e
            .blocks()
            .iter()
            .flat_map(linalg::singular_values)
            .filter(|&s| s > 0.5)
            .count()
    }

    pub fn peirce(&self, k: u8, x: &Element) -> Result<Element> {
        peirce_projection(self, k, x)
    }
}

pub fn tripotent_residual(e: &Element) -> f64 {
    e.triple(e, e).distance(e)
}

/// `r(a) = Q(a†)(a^[2])`.
pub fn range_tripotent(a: &Element, tol: &Tolerances) -> Result<Tripotent> {
    let dagger = generalized_inverse(a, tol)?;
    let r = dagger.q_op(&triple_square(a));
    Tripotent::new(r, tol)
}

/// Peirce projections `P₂ = Q(e)²`, `P₁ = 2(L(e,e) − Q(e)²)`, `P₀ = Id − 2L(e,e) + Q(e)²`.
pub fn peirce_projection(e: &Tripotent, k: u8, x: &Element) -> Result<Element> {
    let e = &e.e;
    e.check_same_model(x)?;
    let q2 = e.q_op(&e.q_op(x));
    let l = e.l_op(e, x);
    match k {
        2 => Ok(q2),
        1 => Ok((&l - &q2).scale(2.0)),
        0 => Ok(&(x - &l.scale(2.0)) + &q2),
        _ => Err(Error::Precondition(format!("Peirce index must be 0, 1 or 2, got {k}"))),
    }
}

/// Diagnostics for "`a` is positive and invertible in the Peirce-2 algebra of `e`".
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeirceTwoPositivity {
    /// `‖P₂(e)a − a‖`.
    pub projection_residual: f64,
    /// `‖{e, a, e} − a‖`: self-adjointness for the involution `x ↦ {e, x, e}`.
    pub selfadjoint_residual: f64,
    /// Smallest of the `rank(e)` leading eigenvalues of `e* a` over all blocks.
    pub min_eigenvalue: f64,
    /// Largest magnitude among the remaining eigenvalues (should vanish).
    pub kernel_eigenvalue: f64,
}

impl PeirceTwoPositivity {
    pub fn holds(&self, tol: f64) -> bool {
        self.projection_residual <= tol
            && self.selfadjoint_residual <= tol
            && self.min_eigenvalue > tol
            && self.kernel_eigenvalue <= tol
    }
}

/// In the Peirce-2 space of `e`, the Jordan algebra with product `{x, e, y}`
/// is realized by `x ↦ e* x`, which maps it onto the Hermitian matrices on
/// the initial space of `e`. Positivity and invertibility of `a` there mean
/// that `e* a` has exactly `rank(e)` strictly positive eigenvalues.
pub fn peirce_two_positivity(a: &Element, e: &Tripotent) -> Result<PeirceTwoPositivity> {
    let p2 = peirce_projection(e, 2, a)?;
    let ea = e.e.triple(a, &e.e);
    let mut min_eigenvalue = f64::INFINITY;
    let mut kernel_eigenvalue: f64 = 0.0;
    for (eb, ab) in e.e.blocks().iter().zip(a.blocks()) {
        let rank = linalg::singular_values(eb).into_iter().filter(|&s| s > 0.5).count();
        let (values, _) = linalg::hermitian_eigen(&(eb.adjoint() * ab));
        let mut sorted: Vec<f64> = values.iter().copied().collect();
        sorted.sort_by(|x, y| y.total_cmp(x));
        for (i, v) in sorted.into_iter().enumerate() {
            if i < rank {
                min_eigenvalue = min_eigenvalue.min(v);
            } else {
                kernel_eigenvalue = kernel_eigenvalue.max(v.abs());
            }
        }
    }
    Ok(PeirceTwoPositivity {
        projection_residual: p2.distance(a),
        selfadjoint_residual: ea.distance(a),
        min_eigenvalue,
        kernel_eigenvalue,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{random_element, random_unitary, Model, ModelDescriptor};
    use std::f64::consts::PI;
    use std::sync::Arc;

    fn m2() -> Arc<Model> {
        Model::build(&ModelDescriptor::full(2)).unwrap()
    }

    fn mat(model: &Arc<Model>, entries: [f64; 4]) -> Element {
        let m = CMat::from_row_slice(2, 2, &entries.map(c));
        Element::from_blocks(model.clone(), vec![m], 1e-10).unwrap()
    }

    fn diag(model: &Arc<Model>, a: f64, b: f64) -> Element {
        mat(model, [a, 0.0, 0.0, b])
    }

    /// Random element of rank one per block in `M_3`.
    fn rank_deficient(model: &Arc<Model>, seed: u64) -> Element {
        let a = random_element(model, seed, 1.0);
        let b = random_element(model, seed + 1000, 1.0);
        a.map_blocks_indexed(|k, m| {
            let col = m.column(0).into_owned();
            let row = b.blocks()[k].row(0).into_owned();
            col * row
        })
    }

    #[test]
    fn spectrum_examples() {
        let m = m2();
        assert_eq!(triple_spectrum(&m.unit()).values(), &[1.0]);
        let s = triple_spectrum(&diag(&m, 3.0, -4.0));
        assert!((s.values()[0] - 3.0).abs() < 1e-14 && (s.values()[1] - 4.0).abs() < 1e-14);
        let s = triple_spectrum(&mat(&m, [0.0, 2.0, 0.0, 0.0]));
        assert_eq!(s.values().len(), 1);
        assert!((s.values()[0] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn spectrum_of_invertible_avoids_zero() {
        let m = Model::build(&ModelDescriptor::full(3)).unwrap();
        let a = random_element(&m, 4, 1.0) + m.unit().scale(3.0);
        let s = triple_spectrum(&a);
        assert!(s.min().unwrap() >= a.min_singular_value() - 1e-14);
        assert!(s.max().unwrap() <= a.norm() + 1e-14);
    }

    #[test]
    fn functional_calculus_examples() {
        let m = Model::build(&ModelDescriptor::full(3)).unwrap();
        let a = random_element(&m, 5, 2.0);
        let id = triple_functional_calculus_real(|t| t, &a).unwrap();
        assert!(id.distance(&a) < 1e-13);

        let m2 = m2();
        let d = diag(&m2, 2.0, 1.0);
        let cube = triple_functional_calculus_real(|t| t.powi(3), &d).unwrap();
        assert!(cube.distance(&diag(&m2, 8.0, 1.0)) < 1e-13);
        assert!(cube.distance(&d.triple(&d, &d)) < 1e-13);
        assert!(cube.distance(&odd_power(&d, 1)) < 1e-13);
        // one more recursion step is the fifth power
        let fifth = d.triple(&d, &d.triple(&d, &d));
        assert!(fifth.distance(&diag(&m2, 32.0, 1.0)) < 1e-12);
    }

    #[test]
    fn odd_powers_match_the_recursion() {
        let m = Model::build(&ModelDescriptor::symmetric(3)).unwrap();
        let a = random_element(&m, 6, 1.5);
        for n in 0..4 {
            let f = triple_functional_calculus_real(|t| t.powi(2 * n as i32 + 1), &a).unwrap();
            assert!(f.distance(&odd_power(&a, n)) < 1e-12 * a.norm().powi(2 * n as i32 + 1));
            assert!(f.symmetry_residual() < 1e-14);
        }
    }

    #[test]
    fn cubic_root_round_trip() {
        let m = Model::build(&ModelDescriptor::full(3)).unwrap();
        let a = random_element(&m, 7, 1.0);
        let b = cubic_root(&a);
        assert!(b.triple(&b, &b).distance(&a) < 1e-12);
    }

    #[test]
    fn undefined_function_is_reported() {
        let m = m2();
        let err = triple_functional_calculus_real(|t| if t > 1.5 { f64::NAN } else { t }, &diag(&m, 2.0, 1.0));
        assert!(matches!(err, Err(Error::UndefinedOnSpectrum { .. })));
    }

    #[test]
    fn generalized_inverse_examples() {
        let m = m2();
        let tol = Tolerances::default();
        assert!(generalized_inverse(&m.unit(), &tol).unwrap().distance(&m.unit()) < 1e-15);
        let g = generalized_inverse(&diag(&m, 2.0, 0.0), &tol).unwrap();
        assert!(g.distance(&diag(&m, 0.5, 0.0)) < 1e-15);
        let a = diag(&m, 2.0, -1.0);
        let g = generalized_inverse(&a, &tol).unwrap();
        assert!(g.distance(&diag(&m, 0.5, -1.0)) < 1e-15);
        let inv = crate::algebra::inverse(&a, &tol).unwrap().adjoint();
        assert!(g.distance(&inv) < 1e-15);
    }

    #[test]
    fn generalized_inverse_is_the_adjoint_of_moore_penrose() {
        let m = Model::build(&ModelDescriptor::full(3)).unwrap();
        let tol = Tolerances::default();
        let a = rank_deficient(&m, 8);
        let g = generalized_inverse(&a, &tol).unwrap();
        let mp = a.blocks()[0].clone().pseudo_inverse(1e-12).unwrap().adjoint();
        assert!((&g.blocks()[0] - mp).norm() < 1e-10);
        assert!(a.q_op(&g).distance(&a) < 1e-12);
        assert!(g.q_op(&a).distance(&g) < 1e-10);
    }

    #[test]
    fn nearly_singular_values_are_not_regular() {
        let m = m2();
        let tol = Tolerances::default();
        assert!(is_von_neumann_regular(&diag(&m, 1.0, 0.0), &tol));
        assert!(is_von_neumann_regular(&diag(&m, 1.0, 2.0), &tol));
        assert!(!is_von_neumann_regular(&diag(&m, 1.0, 1e-11), &tol));
        assert!(matches!(generalized_inverse(&diag(&m, 1.0, 1e-11), &tol), Err(Error::NotRegular { .. })));
    }

    #[test]
    fn circle_regularity_convention() {
        let tol = Tolerances::default();
        let model = Model::build(&ModelDescriptor::circle(64, ModelDescriptor::full(2))).unwrap();
        let fiber = model.fiber().unwrap().clone();
        let bump = model
            .circle_element(|l| fiber.unit().scale(1.0 - l.arg().cos()))
            .unwrap();
        assert!(!is_von_neumann_regular(&bump, &tol));
        let constant = model.constant(&diag(&fiber, 1.0, 0.0)).unwrap();
        assert!(is_von_neumann_regular(&constant, &tol));
        let moving = model
            .circle_element(|l| diag(&fiber, 1.0, 0.0).map_blocks(|b| b * c(2.0 + (l.arg() + PI / 3.0).cos())))
            .unwrap();
        assert!(is_von_neumann_regular(&moving, &tol));
    }

    #[test]
    fn range_tripotent_examples() {
        let m = m2();
        let tol = Tolerances::default();
        let u = random_unitary(&m, 9);
        assert!(range_tripotent(&u, &tol).unwrap().element().distance(&u) < 1e-12);
        let r = range_tripotent(&diag(&m, 2.0, -3.0), &tol).unwrap();
        assert!(r.element().distance(&diag(&m, 1.0, -1.0)) < 1e-14);
        let r = range_tripotent(&diag(&m, 1.0, 0.0), &tol).unwrap();
        assert!(r.element().distance(&diag(&m, 1.0, 0.0)) < 1e-14);
    }

    #[test]
    fn range_tripotent_of_rank_deficient_element() {
        let m = Model::build(&ModelDescriptor::full(3)).unwrap();
        let tol = Tolerances::default();
        let a = rank_deficient(&m, 10);
        let r = range_tripotent(&a, &tol).unwrap();
        assert_eq!(r.rank(), 1);
        assert!(peirce_two_positivity(&a, &r).unwrap().holds(1e-9));
        let g = generalized_inverse(&a, &tol).unwrap();
        // {a, r(a), a^[-1]} = r(a) and {a, a, a^[-1]} = a
        assert!(a.triple(r.element(), &g).distance(r.element()) < 1e-10);
        assert!(a.triple(&a, &g).distance(&a) < 1e-10);
    }

    #[test]
    fn peirce_projections_of_a_diagonal_idempotent() {
        let m = m2();
        let tol = Tolerances::default();
        let e = Tripotent::new(diag(&m, 1.0, 0.0), &tol).unwrap();
        let x = mat(&m, [1.0, 2.0, 3.0, 4.0]);
        assert!(peirce_projection(&e, 2, &x).unwrap().distance(&mat(&m, [1.0, 0.0, 0.0, 0.0])) < 1e-15);
        assert!(peirce_projection(&e, 1, &x).unwrap().distance(&mat(&m, [0.0, 2.0, 3.0, 0.0])) < 1e-15);
        assert!(peirce_projection(&e, 0, &x).unwrap().distance(&mat(&m, [0.0, 0.0, 0.0, 4.0])) < 1e-15);
        assert!(peirce_projection(&e, 3, &x).is_err());
    }

    #[test]
    fn unit_tripotent_has_full_peirce_two_space() {
        let m = Model::build(&ModelDescriptor::full(3)).unwrap();
        let tol = Tolerances::default();
        let e = Tripotent::new(m.unit(), &tol).unwrap();
        let x = random_element(&m, 11, 1.0);
        assert!(peirce_projection(&e, 2, &x).unwrap().distance(&x) < 1e-15);
        assert!(peirce_projection(&e, 1, &x).unwrap().norm() < 1e-15);
        assert!(peirce_projection(&e, 0, &x).unwrap().norm() < 1e-15);
    }

    #[test]
    fn non_tripotent_is_rejected() {
        let m = m2();
        assert!(matches!(
            Tripotent::new(diag(&m, 2.0, 0.0), &Tolerances::default()),
            Err(Error::NotTripotent { .. })
        ));
    }
}
