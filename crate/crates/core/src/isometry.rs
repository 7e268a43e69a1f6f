//! Surjective isometries between unitary sets: the structured form
//! `Δ(u) = p∘U_{e^{ik_n}}⋯U_{e^{ik_1}}Φ(u) + (1−p)∘(U_{e^{−ik_n}}⋯U_{e^{−ik_1}}Φ(u))*`,
//! recovery of its data from black-box evaluations on unitaries, and the
//! extendibility questions around it.
//!
//! Black-box isometries are plain closures `Fn(&Element) -> Element` that are
//! only ever evaluated on unitaries.

use crate::algebra::{self, IsotopeContext};
use crate::element::Element;
use crate::error::{Error, Result};
use crate::linalg::{self, c, CMat, I};
use crate::model::{self, Model, ModelDescriptor};
use crate::tolerance::Tolerances;
use crate::unitary::{self, UChainFactorization};
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::sync::Arc;

/// Accuracy of data recovered through numerical derivatives.
pub const RECOVERY_TOL: f64 = 1e-6;

/// Above this complex dimension, Jordan *-isomorphism checks use random pairs
/// instead of all basis pairs.
const EXHAUSTIVE_PAIR_DIM: usize = 64;
const RANDOM_PAIRS: usize = 256;

/// Real-linear map between models, stored as a matrix over the real
/// coordinates (`Model::real_coords`).
#[derive(Debug, Clone, PartialEq)]
pub struct RealLinearMap {
    source: Arc<Model>,
    target: Arc<Model>,
    matrix: DMatrix<f64>,
}

/// Largest residuals of the Jordan *-isomorphism equations.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct JordanDefect {
    pub unit: f64,
    pub product: f64,
    pub involution: f64,
    pub complex_linearity: f64,
}

impl JordanDefect {
    pub fn max(&self) -> f64 {
        self.unit.max(self.product).max(self.involution).max(self.complex_linearity)
    }
}

impl RealLinearMap {
    pub fn from_matrix(source: Arc<Model>, target: Arc<Model>, matrix: DMatrix<f64>) -> Result<Self> {
        if matrix.nrows() != target.real_dim() || matrix.ncols() != source.real_dim() {
            return Err(Error::Shape(format!(
                "real-linear map must be {}x{}, got {}x{}",
                target.real_dim(),
                source.real_dim(),
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        Ok(RealLinearMap { source, target, matrix })
    }

    /// Matrix of a real-linear function, column by column on the real basis.
    pub fn from_fn(source: &Arc<Model>, target: &Arc<Model>, f: impl Fn(&Element) -> Element) -> Self {
        let basis = source.real_basis();
        let mut matrix = DMatrix::zeros(target.real_dim(), basis.len());
        for (j, b) in basis.iter().enumerate() {
            let image = target.real_coords(&f(b));
            matrix.column_mut(j).copy_from_slice(&image);
        }
        RealLinearMap { source: source.clone(), target: target.clone(), matrix }
    }

    pub fn identity(model: &Arc<Model>) -> Self {
        let n = model.real_dim();
        RealLinearMap { source: model.clone(), target: model.clone(), matrix: DMatrix::identity(n, n) }
    }

    pub fn source(&self) -> &Arc<Model> {
        &self.source
    }

    pub fn target(&self) -> &Arc<Model> {
        &self.target
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn apply(&self, x: &Element) -> Element {
        let coords = nalgebra::DVector::from_vec(self.source.real_coords(x));
        let image = &self.matrix * coords;
        self.target.from_real_coords(image.as_slice())
    }

    /// `self ∘ inner`.
    pub fn compose(&self, inner: &RealLinearMap) -> Result<Self> {
        if self.source.descriptor() != inner.target.descriptor() {
            return Err(Error::ModelMismatch);
        }
        Ok(RealLinearMap {
            source: inner.source.clone(),
            target: self.target.clone(),
            matrix: &self.matrix * &inner.matrix,
        })
    }

    pub fn inverse(&self) -> Result<Self> {
        let inv = self
            .matrix
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::Precondition("real-linear map is not invertible".into()))?;
        Ok(RealLinearMap { source: self.target.clone(), target: self.source.clone(), matrix: inv })
    }

    pub fn negated(&self) -> Self {
        RealLinearMap { source: self.source.clone(), target: self.target.clone(), matrix: -&self.matrix }
    }

    /// Largest entrywise difference between two maps of the same shape.
    pub fn entry_distance(&self, other: &RealLinearMap) -> f64 {
        if self.matrix.shape() != other.matrix.shape() {
            return f64::INFINITY;
        }
        (&self.matrix - &other.matrix).amax()
    }

    /// `max |‖T x‖ − ‖x‖| / ‖x‖` over the real basis and random elements.
    pub fn isometry_defect(&self, samples: usize, seed: u64) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut worst: f64 = 0.0;
        let mut check = |x: &Element| {
            let n = x.norm();
            if n > 0.0 {
                worst = worst.max((self.apply(x).norm() - n).abs() / n);
            }
        };
        if self.source.real_dim() <= 2 * EXHAUSTIVE_PAIR_DIM {
            self.source.real_basis().iter().for_each(&mut check);
        }
        for _ in 0..samples {
            check(&model::random_element(&self.source, rng.random(), 1.0));
        }
        worst
    }

    /// Residuals of `T(1) = 1`, `T(a∘b) = T(a)∘T(b)`, `T(a*) = T(a)*` and
    /// `T(ia) = iT(a)` for the products and involutions of the given isotopes.
    pub fn jordan_defect(&self, source: &IsotopeContext, target: &IsotopeContext, seed: u64) -> JordanDefect {
        let mut d = JordanDefect {
            unit: self.apply(source.unit()).distance(target.unit()),
            ..Default::default()
        };
        let basis = self.source.complex_basis();
        let images: Vec<Element> = basis.iter().map(|b| self.apply(b)).collect();
        for (b, img) in basis.iter().zip(&images) {
            if let (Ok(bs), Ok(is)) = (source.involution(b), target.involution(img)) {
                d.involution = d.involution.max(self.apply(&bs).distance(&is));
            }
            d.complex_linearity = d.complex_linearity.max(self.apply(&b.scale_complex(I)).distance(&img.scale_complex(I)));
        }
        let mut product = |i: usize, j: usize| {
            let lhs = self.apply(&source.product(&basis[i], &basis[j]));
            let rhs = target.product(&images[i], &images[j]);
            d.product = d.product.max(lhs.distance(&rhs));
        };
        if basis.len() <= EXHAUSTIVE_PAIR_DIM {
            for i in 0..basis.len() {
                for j in i..basis.len() {
                    product(i, j);
                }
            }
        } else {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for _ in 0..RANDOM_PAIRS {
                product(rng.random_range(0..basis.len()), rng.random_range(0..basis.len()));
            }
        }
        d
    }

    pub fn standard_jordan_defect(&self) -> JordanDefect {
        self.jordan_defect(&IsotopeContext::standard(&self.source), &IsotopeContext::standard(&self.target), 0)
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.matrix.row_iter().map(|r| r.iter().copied().collect()).collect()
    }

    pub fn from_rows(source: Arc<Model>, target: Arc<Model>, rows: &[Vec<f64>]) -> Result<Self> {
        let ncols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != ncols) {
            return Err(Error::Shape("ragged real-linear map matrix".into()));
        }
        let matrix = DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]);
        Self::from_matrix(source, target, matrix)
    }
}

fn unit_context(model: &Arc<Model>, unit: Option<&Element>, tol: &Tolerances) -> Result<IsotopeContext> {
    match unit {
        Some(w) => IsotopeContext::unitary(w, tol),
        None => Ok(IsotopeContext::standard(model)),
    }
}

/// `Δ(u) = p∘U_{e^{ik_n}}⋯U_{e^{ik_1}}Φ(u) + (1−p)∘(U_{e^{−ik_n}}⋯U_{e^{−ik_1}}Φ(u))*`.
///
/// With `source_unit = w₁` and `target_unit = w₂` all operations (product,
/// involution, exponentials, `U`-operators and the unit `1 → w₂`) are those
/// of the isotopes `M(w₁)` and `N(w₂)`.
#[derive(Debug, Clone)]
pub struct StructuredIsometry {
    prefactors: Vec<Element>,
    p: Element,
    phi: RealLinearMap,
    source_unit: Option<Element>,
    target_unit: Option<Element>,
    source_ctx: IsotopeContext,
    target_ctx: IsotopeContext,
}

/// Wire format of [`StructuredIsometry`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StructuredIsometryJson {
    pub source: ModelDescriptor,
    pub target: ModelDescriptor,
    pub prefactors: Vec<Element>,
    pub p: Element,
    pub phi: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_unit: Option<Element>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_unit: Option<Element>,
}

/// Verification tolerance for structural invariants of stored isometries.
const STRUCTURE_TOL: f64 = 1e-8;

impl StructuredIsometry {
    pub fn new(prefactors: Vec<Element>, p: Element, phi: RealLinearMap, tol: &Tolerances) -> Result<Self> {
        Self::with_units(prefactors, p, phi, None, None, tol)
    }

    pub fn with_units(
        prefactors: Vec<Element>,
        p: Element,
        phi: RealLinearMap,
        source_unit: Option<Element>,
        target_unit: Option<Element>,
        tol: &Tolerances,
    ) -> Result<Self> {
        let source_ctx = unit_context(phi.source(), source_unit.as_ref(), tol)?;
        let target_ctx = unit_context(phi.target(), target_unit.as_ref(), tol)?;
        let iso = StructuredIsometry { prefactors, p, phi, source_unit, target_unit, source_ctx, target_ctx };
        iso.validate(tol)?;
        Ok(iso)
    }

    /// Checks the invariants with a tolerance suited to recovered data.
    pub fn validate(&self, tol: &Tolerances) -> Result<()> {
        let target = self.phi.target();
        let invalid = |what: String| Err(Error::InvalidIsometry(what));
        if self.p.model().descriptor() != target.descriptor() {
            return invalid("p does not belong to the target model".into());
        }
        let ctx = &self.target_ctx;
        let bound = STRUCTURE_TOL.max(tol.identity);
        let idem = ctx.product(&self.p, &self.p).distance(&self.p);
        let sa = ctx.selfadjoint_residual(&self.p);
        if idem.max(sa) > bound {
            return invalid(format!("p is not a projection (residual {:.3e})", idem.max(sa)));
        }
        if !ctx.is_central(&self.p, &tol.with_identity(bound)) {
            return invalid("p is not central".into());
        }
        for k in &self.prefactors {
            if k.model().descriptor() != target.descriptor() {
                return invalid("prefactor does not belong to the target model".into());
            }
            let r = ctx.selfadjoint_residual(k);
            if r > bound * k.norm().max(1.0) {
                return invalid(format!("prefactor is not self-adjoint (residual {r:.3e})"));
            }
        }
        let defect = self.phi.jordan_defect(&self.source_ctx, &self.target_ctx, 0);
        if defect.max() > RECOVERY_TOL {
            return invalid(format!("phi is not a Jordan *-isomorphism (defect {:.3e})", defect.max()));
        }
        Ok(())
    }

    /// `Φ = Id`, `p = 1`, no prefactors.
    pub fn identity(model: &Arc<Model>) -> Self {
        let ctx = IsotopeContext::standard(model);
        StructuredIsometry {
            prefactors: Vec::new(),
            p: model.unit(),
            phi: RealLinearMap::identity(model),
            source_unit: None,
            target_unit: None,
            source_ctx: ctx.clone(),
            target_ctx: ctx,
        }
    }

    /// `u ↦ u*`: `Φ = Id`, `p = 0`.
    pub fn conjugation(model: &Arc<Model>) -> Self {
        StructuredIsometry { p: model.zero(), ..Self::identity(model) }
    }

    pub fn prefactors(&self) -> &[Element] {
        &self.prefactors
    }

    pub fn p(&self) -> &Element {
        &self.p
    }

    pub fn phi(&self) -> &RealLinearMap {
        &self.phi
    }

    pub fn source(&self) -> &Arc<Model> {
        self.phi.source()
    }

    pub fn target(&self) -> &Arc<Model> {
        self.phi.target()
    }

    pub fn source_unit(&self) -> Option<&Element> {
        self.source_unit.as_ref()
    }

    pub fn target_unit(&self) -> Option<&Element> {
        self.target_unit.as_ref()
    }

    pub fn target_context(&self) -> &IsotopeContext {
        &self.target_ctx
    }

    pub fn apply(&self, u: &Element) -> Element {
        let ctx = &self.target_ctx;
        let y = self.phi.apply(u);
        let forward = self.prefactors.iter().fold(y.clone(), |acc, k| ctx.quadratic(&ctx.exp_i(k), &acc));
        let backward = self
            .prefactors
            .iter()
            .fold(y, |acc, k| ctx.quadratic(&ctx.exp_i(&k.scale(-1.0)), &acc));
        let q = ctx.unit() - &self.p;
        let back_star = ctx.involution(&backward).expect("unitary isotope");
        &ctx.product(&self.p, &forward) + &ctx.product(&q, &back_star)
    }

    /// Inverse of a unital structured isometry in standard frames:
    /// `Δ₀⁻¹(v) = Φ⁻¹(p∘v + (1−p)∘v*)`, which is structured with `Φ⁻¹` and `Φ⁻¹(p)`.
    pub fn unital_inverse(&self, tol: &Tolerances) -> Result<Self> {
        if !self.prefactors.is_empty() || self.source_unit.is_some() || self.target_unit.is_some() {
            return Err(Error::Precondition("inverse is only provided for unital isometries in standard frames".into()));
        }
        let inv = self.phi.inverse()?;
        let p = inv.apply(&self.p);
        Self::new(Vec::new(), p, inv, tol)
    }

    pub fn to_json_value(&self) -> StructuredIsometryJson {
        StructuredIsometryJson {
            source: self.source().descriptor().clone(),
            target: self.target().descriptor().clone(),
            prefactors: self.prefactors.clone(),
            p: self.p.clone(),
            phi: self.phi.rows(),
            source_unit: self.source_unit.clone(),
            target_unit: self.target_unit.clone(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_json_value()).expect("isometry serialization cannot fail")
    }

    pub fn from_json_value(value: StructuredIsometryJson, tol: &Tolerances) -> Result<Self> {
        let source = Model::build(&value.source)?;
        let target = Model::build(&value.target)?;
        let phi = RealLinearMap::from_rows(source, target, &value.phi)?;
        Self::with_units(value.prefactors, value.p, phi, value.source_unit, value.target_unit, tol)
    }

    pub fn from_json(text: &str, tol: &Tolerances) -> Result<Self> {
        Self::from_json_value(serde_json::from_str(text)?, tol)
    }
}

/// Black-box one-parameter family `t ↦ u(t)` with the sample grid used to check
/// `u(0) = 1` and `U_{u(t)}(u(s)) = u(2t+s)`.
pub struct OneParameterFamily<'a> {
    sampler: Box<dyn Fn(f64) -> Element + 'a>,
    samples: Vec<f64>,
}

const DEFAULT_FAMILY_SAMPLES: [f64; 6] = [-1.0, -0.5, -0.25, 0.25, 0.5, 1.0];

impl<'a> OneParameterFamily<'a> {
    pub fn new(sampler: impl Fn(f64) -> Element + 'a, samples: Vec<f64>) -> Self {
        OneParameterFamily { sampler: Box::new(sampler), samples }
    }

    pub fn with_default_samples(sampler: impl Fn(f64) -> Element + 'a) -> Self {
        Self::new(sampler, DEFAULT_FAMILY_SAMPLES.to_vec())
    }

    /// `t ↦ e^{ith}`.
    pub fn exponential(h: &Element) -> OneParameterFamily<'static> {
        let h = h.clone();
        OneParameterFamily::with_default_samples(move |t| h.exp_it(t))
    }

    pub fn at(&self, t: f64) -> Element {
        (self.sampler)(t)
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    /// Largest residual of `u(0) = 1` and `U_{u(t)}(u(s)) = u(2t+s)` on the samples.
    pub fn invariant_residual(&self) -> f64 {
        let u0 = self.at(0.0);
        let mut worst = u0.distance(&u0.model().unit());
        let values: Vec<Element> = self.samples.iter().map(|&t| self.at(t)).collect();
        for (i, &t) in self.samples.iter().enumerate() {
            for (j, &s) in self.samples.iter().enumerate() {
                let lhs = values[i].u_op(&values[j]);
                worst = worst.max(lhs.distance(&self.at(2.0 * t + s)));
            }
        }
        worst
    }
}

const STONE_STEP: f64 = 1e-4;

/// Generator `h` with `u(t) = e^{ith}`, from a central difference at `t = 0`
/// refined by one Richardson step.
pub fn stone_parameter(family: &OneParameterFamily<'_>, tol: &Tolerances) -> Result<Element> {
    let residual = family.invariant_residual();
    if residual > tol.stone {
        return Err(Error::FamilyInvariantViolated { residual });
    }
    let derivative = |delta: f64| (family.at(delta) - family.at(-delta)).scale(0.5 / delta);
    let coarse = derivative(STONE_STEP);
    let fine = derivative(STONE_STEP / 2.0);
    let d = (fine.scale(4.0) - coarse).scale(1.0 / 3.0);
    let h = d.scale_complex(-I).selfadjoint_part().symmetrized();
    let residual = family
        .samples
        .iter()
        .map(|&t| family.at(t).distance(&h.exp_it(t)))
        .fold(0.0, f64::max);
    if residual > tol.stone {
        return Err(Error::NonConvergent { residual });
    }
    Ok(h)
}

fn require_unital<F: Fn(&Element) -> Element>(delta0: &F, source: &Arc<Model>, tol: &Tolerances) -> Result<Element> {
    let one = delta0(&source.unit());
    let residual = one.distance(&one.model().unit());
    if residual > tol.identity.max(1e-12) * 10.0 {
        return Err(Error::NotUnital { residual });
    }
    Ok(one)
}

/// `k(h, Δ₀)`: the self-adjoint element with `Δ₀(e^{ith}) = e^{itk}`.
pub fn derive_k<F: Fn(&Element) -> Element>(delta0: &F, h: &Element, tol: &Tolerances) -> Result<Element> {
    require_unital(delta0, h.model(), tol)?;
    let family = OneParameterFamily::with_default_samples(|t| delta0(&h.exp_it(t)));
    stone_parameter(&family, tol)
}

/// Data of a unital isometry `Δ₀ = p∘Φ + (1−p)∘Φ(·)*`.
#[derive(Debug, Clone)]
pub struct UnitalDecomposition {
    /// The central symmetry `s = k(1, Δ₀) = 2p − 1`.
    pub s: Element,
    pub p: Element,
    pub phi: RealLinearMap,
    pub jordan_defect: JordanDefect,
    /// `max ‖Δ₀(e^{ih}) − (p∘Φ(e^{ih}) + (1−p)∘Φ(e^{ih})*)‖` over random `h`.
    pub verification_residual: f64,
}

const VERIFICATION_SAMPLES: u64 = 4;

pub fn decompose_unital_isometry<F: Fn(&Element) -> Element>(
    delta0: &F,
    source: &Arc<Model>,
    tol: &Tolerances,
) -> Result<UnitalDecomposition> {
    let target = require_unital(delta0, source, tol)?.model().clone();
    let s = derive_k(delta0, &source.unit(), tol)?;
    let one = target.unit();
    let sym = s.square().distance(&one).max(s.selfadjoint_residual());
    if sym > RECOVERY_TOL {
        return Err(Error::NotCentralSymmetry(format!("s² = 1 and s = s* fail by {sym:.3e}")));
    }
    if !algebra::is_central(&s, &tol.with_identity(RECOVERY_TOL)) {
        return Err(Error::NotCentralSymmetry("s is not central".into()));
    }
    let p = (&one + &s).scale(0.5);

    let sa_images: Vec<Element> = source
        .selfadjoint_basis()
        .iter()
        .map(|b| derive_k(delta0, b, tol).map(|k| s.jordan(&k)))
        .collect::<Result<_>>()?;
    let phi_sa = |x: &Element| {
        source
            .selfadjoint_coords(x)
            .iter()
            .zip(&sa_images)
            .fold(target.zero(), |acc, (&t, img)| acc + img.scale(t))
    };
    let phi = RealLinearMap::from_fn(source, &target, |x| {
        &phi_sa(&x.selfadjoint_part()) + &phi_sa(&x.skew_part()).scale_complex(I)
    });

    let jordan_defect = phi.standard_jordan_defect();
    if jordan_defect.max() > RECOVERY_TOL {
        return Err(Error::NotJordanIsomorphism(format!("defect {:.3e}", jordan_defect.max())));
    }
    let q = &one - &p;
    let verification_residual = (0..VERIFICATION_SAMPLES)
        .map(|seed| {
            let u = model::random_unitary(source, 0xdec0 + seed);
            let image = phi.apply(&u);
            let expected = &p.jordan(&image) + &q.jordan(&image.adjoint());
            delta0(&u).distance(&expected)
        })
        .fold(0.0, f64::max);
    if verification_residual > RECOVERY_TOL {
        return Err(Error::HypothesisFailed(format!(
            "Δ₀ differs from p∘Φ + (1−p)∘Φ* by {verification_residual:.3e}"
        )));
    }
    Ok(UnitalDecomposition { s, p, phi, jordan_defect, verification_residual })
}

/// Full decomposition: factor `Δ(1)` into a `U`-chain `k_1, …, k_n`, reduce to
/// the unital map `Δ₀ = U_{e^{−ik_1}}⋯U_{e^{−ik_n}}Δ` and decompose it.
///
/// Prefactor chains are not unique; a different chain with the same evaluation
/// changes `Φ` by an inner automorphism while `p` is unaffected.
pub fn decompose<F: Fn(&Element) -> Element>(delta: &F, source: &Arc<Model>, tol: &Tolerances) -> Result<StructuredIsometry> {
    let w = delta(&source.unit());
    let membership = unitary::in_principal_component(&w, tol)?;
    let chain: UChainFactorization = match membership.certificate {
        Some(cert) if membership.is_principal() => cert,
        _ => {
            return Err(Error::Precondition(format!(
                "Δ(1) is not certified to lie in the principal component: {}",
                membership.justification
            )))
        }
    };
    let delta0 = |u: &Element| chain.apply_inverse(&delta(u));
    let unital = decompose_unital_isometry(&delta0, source, tol)?;
    StructuredIsometry::new(chain.hs, unital.p, unital.phi, tol)
}

/// Decomposition of an isometry on the component of `w₁` in the isotope pair
/// `(M(w₁), N(w₂))`, `w₂ = Δ(w₁)`. Both isotopes are identified with the
/// standard algebras through the principal square roots of `w₁` and `w₂`;
/// the unital map obtained that way is decomposed and transported back.
pub fn general_decompose<F: Fn(&Element) -> Element>(delta: &F, w1: &Element, tol: &Tolerances) -> Result<StructuredIsometry> {
    let source = w1.model().clone();
    let w2 = delta(w1);
    let target = w2.model().clone();
    let ctx1 = IsotopeContext::unitary(w1, tol)?;
    let ctx2 = IsotopeContext::unitary(&w2, tol)?;
    let delta_std = |u: &Element| ctx2.to_standard(&delta(&ctx1.from_standard(u)));
    let unital = decompose_unital_isometry(&delta_std, &source, tol)?;
    let from1_inv = RealLinearMap::from_fn(&source, &source, |x| ctx1.to_standard(x));
    let to2 = RealLinearMap::from_fn(&target, &target, |x| ctx2.from_standard(x));
    let phi = to2.compose(&unital.phi)?.compose(&from1_inv)?;
    let p = ctx2.from_standard(&unital.p);
    StructuredIsometry::with_units(Vec::new(), p, phi, Some(w1.clone()), Some(w2), tol)
}

/// Sampling parameters for [`verify_inverted_triple_preservation`].
#[derive(Debug, Clone, Copy)]
pub struct TripleCheckOptions {
    /// Rejection samples for members of `L⁰_{u,v}`.
    pub samples: usize,
    /// Membership band on the two defining distance equalities.
    pub band: f64,
    /// Sample pairs for the metric condition (B.1).
    pub metric_samples: usize,
    pub seed: u64,
}

impl Default for TripleCheckOptions {
    fn default() -> Self {
        TripleCheckOptions { samples: 10_000, band: 1e-3, metric_samples: 16, seed: 0x7121 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InvertedTripleReport {
    pub distance: f64,
    /// `K = 2 − 2‖u − v‖`.
    pub k_constant: f64,
    /// `‖Δ(U_v(u*)) − U_{Δ(v)}(Δ(u)*)‖`.
    pub residual: f64,
    /// `max |d(U_v(x*), U_v(y*)) − d(x, y)|` on sampled unitaries.
    pub metric_defect: f64,
    /// Sampled approximate members of `L⁰_{u,v}` other than `v` itself.
    pub members: usize,
    pub candidates: usize,
    /// `min ‖U_v(w*) − w‖ − K‖w − v‖` over members, including `w = v`.
    pub min_slack: f64,
    /// Whether the inequality held up to the membership band.
    pub inequality_holds: bool,
    /// No sampled member besides `v`: the inequality was only checked at `v`.
    pub vacuous: bool,
}

/// Checks `Δ(U_v(u*)) = U_{Δ(v)}(Δ(u)*)` for `‖u − v‖ < 1/2` and the two
/// metric conditions behind it.
pub fn verify_inverted_triple_preservation<F: Fn(&Element) -> Element>(
    delta: &F,
    u: &Element,
    v: &Element,
    options: TripleCheckOptions,
) -> Result<InvertedTripleReport> {
    u.check_same_model(v)?;
    let distance = u.distance(v);
    if distance >= 0.5 {
        return Err(Error::Precondition(format!("‖u − v‖ = {distance:.6} is not below 1/2")));
    }
    let k_constant = 2.0 - 2.0 * distance;
    let lhs = delta(&v.u_op(&u.adjoint()));
    let rhs = delta(v).u_op(&delta(u).adjoint());
    let residual = lhs.distance(&rhs);

    let model = u.model();
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let mut metric_defect: f64 = 0.0;
    for _ in 0..options.metric_samples {
        let x = model::random_unitary(model, rng.random());
        let y = model::random_unitary(model, rng.random());
        let d1 = v.u_op(&x.adjoint()).distance(&v.u_op(&y.adjoint()));
        metric_defect = metric_defect.max((d1 - x.distance(&y)).abs());
    }

    let reflected = v.u_op(&u.adjoint());
    let slack = |w: &Element| w.distance(&v.u_op(&w.adjoint())) - k_constant * w.distance(v);
    let mut min_slack = slack(v);
    let mut members = 0;
    let (lo, hi) = ((1e-4f64).ln(), distance.max(2e-4).ln());
    for _ in 0..options.samples {
        let eps = rng.random_range(lo..hi).exp();
        let g = model::random_selfadjoint(model, rng.random(), eps / 2.0);
        let w = g.exp_i().u_op(v);
        let ok = (u.distance(&w) - distance).abs() <= options.band && (reflected.distance(&w) - distance).abs() <= options.band;
        if ok {
            members += 1;
            min_slack = min_slack.min(slack(&w));
        }
    }
    Ok(InvertedTripleReport {
        distance,
        k_constant,
        residual,
        metric_defect,
        members,
        candidates: options.samples,
        min_slack,
        inequality_holds: min_slack >= -4.0 * options.band,
        vacuous: members == 0,
    })
}

/// True iff all per-component extensions coincide. Each map must be an
/// isometry of the whole space.
pub fn check_extendable(per_component: &[RealLinearMap], tol: &Tolerances) -> Result<bool> {
    for (j, t) in per_component.iter().enumerate() {
        let defect = t.isometry_defect(8, j as u64);
        if defect > STRUCTURE_TOL {
            return Err(Error::Precondition(format!("map {j} is not an isometry (defect {defect:.3e})")));
        }
    }
    Ok(per_component
        .windows(2)
        .all(|w| w[0].entry_distance(&w[1]) <= tol.identity))
}

/// Central projection `p` with `T = T₀` on `M∘p` and `T = −T₀` on `M∘(1−p)`,
/// given `U_{T₀(u)} = U_{T(u)}` on principal unitaries: `p = T₀⁻¹((1 + T(1))/2)`.
pub fn align_central_projection(t: &RealLinearMap, t0: &RealLinearMap, tol: &Tolerances, samples: usize, seed: u64) -> Result<Element> {
    let defect = t0.standard_jordan_defect();
    if defect.max() > STRUCTURE_TOL {
        return Err(Error::NotJordanIsomorphism(format!("T₀ defect {:.3e}", defect.max())));
    }
    let source = t0.source();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..samples {
        let u = model::random_unitary(source, rng.random());
        let x = model::random_element(t0.target(), rng.random(), 1.0);
        let gap = t0.apply(&u).u_op(&x).distance(&t.apply(&u).u_op(&x));
        if gap > STRUCTURE_TOL {
            return Err(Error::HypothesisFailed(format!("U_T₀(u) ≠ U_T(u) (residual {gap:.3e})")));
        }
    }
    let s = t.apply(&source.unit());
    let sym = s.square().distance(&s.model().unit()).max(s.selfadjoint_residual());
    if sym > STRUCTURE_TOL {
        return Err(Error::NotCentralSymmetry(format!("T(1) is not a symmetry (residual {sym:.3e})")));
    }
    let q1 = (&s.model().unit() + &s).scale(0.5);
    let p = t0.inverse()?.apply(&q1);
    if !algebra::is_central(&p, &tol.with_identity(STRUCTURE_TOL)) {
        return Err(Error::NotCentralSymmetry("aligned projection is not central".into()));
    }
    Ok(p)
}

fn random_unitary_block(rng: &mut ChaCha8Rng, dim: usize, symmetric: bool) -> CMat {
    if symmetric {
        // real orthogonal: Q factor of a real Gaussian matrix
        let g = DMatrix::<f64>::from_fn(dim, dim, |_, _| StandardNormal.sample(rng));
        let q = g.qr().q();
        q.map(c)
    } else {
        let g = CMat::from_fn(dim, dim, |_, _| Complex64::new(StandardNormal.sample(rng), StandardNormal.sample(rng)));
        let h = (&g + g.adjoint()) * c(0.5);
        linalg::exp_i_hermitian(&h, PI)
    }
}

fn random_symmetry_block(rng: &mut ChaCha8Rng, dim: usize, symmetric: bool) -> CMat {
    let w = random_unitary_block(rng, dim, symmetric);
    let signs = nalgebra::DVector::from_fn(dim, |_, _| if rng.random_bool(0.5) { c(1.0) } else { c(-1.0) });
    &w * CMat::from_diagonal(&signs) * w.adjoint()
}

/// One random generator of the Jordan *-automorphism group of a matrix model:
/// blockwise transposition, a permutation of isomorphic summands, an inner
/// automorphism `x ↦ w x w*` (orthogonal `w` in symmetric blocks), or `U_v`
/// with `v` a symmetry.
pub fn random_jordan_generator(model: &Arc<Model>, rng: &mut ChaCha8Rng) -> Result<RealLinearMap> {
    if model.is_circle() {
        return Err(Error::Precondition("random automorphisms are generated for matrix models only".into()));
    }
    let shapes = model.blocks().to_vec();
    let kind = rng.random_range(0..4);
    let map = match kind {
        0 => {
            let mask: Vec<bool> = shapes.iter().map(|_| rng.random_bool(0.5)).collect();
            RealLinearMap::from_fn(model, model, |x| x.map_blocks_indexed(|k, b| if mask[k] { b.transpose() } else { b.clone() }))
        }
        1 => {
            let mut perm: Vec<usize> = (0..shapes.len()).collect();
            let mut classes: Vec<Vec<usize>> = Vec::new();
            for (k, s) in shapes.iter().enumerate() {
                match classes.iter_mut().find(|cls| shapes[cls[0]] == *s) {
                    Some(cls) => cls.push(k),
                    None => classes.push(vec![k]),
                }
            }
            for cls in &classes {
                let mut shuffled = cls.clone();
                shuffled.shuffle(rng);
                for (&from, &to) in cls.iter().zip(&shuffled) {
                    perm[to] = from;
                }
            }
            RealLinearMap::from_fn(model, model, |x| x.map_blocks_indexed(|k, _| x.blocks()[perm[k]].clone()))
        }
        2 => {
            let ws: Vec<CMat> = shapes.iter().map(|s| random_unitary_block(rng, s.dim, s.symmetric)).collect();
            RealLinearMap::from_fn(model, model, |x| x.map_blocks_indexed(|k, b| &ws[k] * b * ws[k].adjoint()))
        }
        _ => {
            let vs: Vec<CMat> = shapes.iter().map(|s| random_symmetry_block(rng, s.dim, s.symmetric)).collect();
            RealLinearMap::from_fn(model, model, |x| x.map_blocks_indexed(|k, b| &vs[k] * b * &vs[k]))
        }
    };
    Ok(map)
}

/// Composition of a few random generators.
pub fn random_jordan_automorphism(model: &Arc<Model>, seed: u64) -> Result<RealLinearMap> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let count = rng.random_range(1..=3);
    let mut map = RealLinearMap::identity(model);
    for _ in 0..count {
        map = random_jordan_generator(model, &mut rng)?.compose(&map)?;
    }
    Ok(map)
}

/// Random central projection: the unit of a random subset of the simple summands.
pub fn random_central_projection(model: &Arc<Model>, seed: u64) -> Result<Element> {
    if model.is_circle() {
        return Err(Error::Precondition("random central projections are generated for matrix models only".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mask: Vec<bool> = model.blocks().iter().map(|_| rng.random_bool(0.5)).collect();
    Ok(model
        .unit()
        .map_blocks_indexed(|k, b| if mask[k] { b.clone() } else { CMat::zeros(b.nrows(), b.ncols()) }))
}

/// Random structured isometry of a matrix model with up to `max_prefactors` prefactors.
pub fn random_structured_isometry(model: &Arc<Model>, seed: u64, max_prefactors: usize, tol: &Tolerances) -> Result<StructuredIsometry> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(0..=max_prefactors);
    let prefactors = (0..n)
        .map(|_| {
            let scale = rng.random_range(0.1..1.2);
            model::random_selfadjoint(model, rng.random(), scale)
        })
        .collect();
    let p = random_central_projection(model, rng.random())?;
    let phi = random_jordan_automorphism(model, rng.random())?;
    StructuredIsometry::new(prefactors, p, phi, tol)
}

/// The glued isometry `Δ = T₁` on the principal component and `T₂` elsewhere,
/// with `T_j = U_{u_j}` for distinct principal unitaries `u₁ = 1`, `u₂ = e^{ic}`.
#[derive(Debug, Clone)]
pub struct NonExtendableExample {
    model: Arc<Model>,
    u1: Element,
    u2: Element,
    t1: RealLinearMap,
    t2: RealLinearMap,
    witness: Element,
    tol: Tolerances,
}

/// Summary of a pair check on the glued isometry.
#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
pub struct PairCheck {
    pub pairs: usize,
    pub cross_pairs: usize,
    /// `max |d(Δx, Δy) − d(x, y)|`.
    pub max_defect: f64,
    /// `max |d(x, y) − 2|` and `max |d(Δx, Δy) − 2|` over cross-component pairs.
    pub max_cross_gap: f64,
}

/// Builds the example in a circle model; matrix models have a connected unitary set.
pub fn build_nonextendable_example(model: &Arc<Model>, tol: &Tolerances) -> Result<NonExtendableExample> {
    let fiber = match model.fiber() {
        Some(f) => f.clone(),
        None => return Err(Error::ConnectedUnitarySet),
    };
    let u1 = model.unit();
    let u2 = model.unit().scale(PI / 4.0).exp_i();
    let witness = model.circle_element(|lambda| {
        fiber.unit().map_blocks_indexed(|k, b| {
            let mut m = b.clone();
            if k == 0 {
                m[(0, 0)] = lambda;
            }
            m
        })
    })?;
    let winding = unitary::winding_number(&witness, tol)?;
    if winding == 0 {
        return Err(Error::Precondition("witness lies in the principal component".into()));
    }
    for u in [&u1, &u2] {
        if !unitary::in_principal_component(u, tol)?.is_principal() {
            return Err(Error::Precondition("U-operator factors must be principal".into()));
        }
    }
    let t1 = RealLinearMap::from_fn(model, model, |x| u1.u_op(x));
    let t2 = RealLinearMap::from_fn(model, model, |x| u2.u_op(x));
    Ok(NonExtendableExample { model: model.clone(), u1, u2, t1, t2, witness, tol: *tol })
}

fn cosine_bump(theta: f64, center: f64, half_width: f64) -> f64 {
    let d = linalg::wrap_phase(theta - center);
    if d.abs() >= half_width {
        0.0
    } else {
        (0.5 * PI * d / half_width).cos().powi(2)
    }
}

impl NonExtendableExample {
    pub fn model(&self) -> &Arc<Model> {
        &self.model
    }

    pub fn operators(&self) -> (&Element, &Element) {
        (&self.u1, &self.u2)
    }

    pub fn maps(&self) -> [&RealLinearMap; 2] {
        [&self.t1, &self.t2]
    }

    /// A unitary outside the principal component (winding number ≠ 0).
    pub fn witness(&self) -> &Element {
        &self.witness
    }

    pub fn is_principal(&self, x: &Element) -> Result<bool> {
        Ok(unitary::winding_number(x, &self.tol)? == 0)
    }

    pub fn apply(&self, x: &Element) -> Result<Element> {
        Ok(if self.is_principal(x)? { self.u1.u_op(x) } else { self.u2.u_op(x) })
    }

    pub fn is_extendable(&self) -> Result<bool> {
        check_extendable(&[self.t1.clone(), self.t2.clone()], &self.tol)
    }

    pub fn principal_sample(&self, seed: u64) -> Element {
        model::random_unitary(&self.model, seed)
    }

    /// `U_{e^{ih}}(w₀)`, in the component of the witness.
    pub fn secondary_sample(&self, seed: u64) -> Element {
        model::random_unitary_scaled(&self.model, seed, PI / 2.0).u_op(&self.witness)
    }

    /// Cross-component pair `(x, y')` realizing distance 2 on the grid both
    /// before and after `Δ`. In the continuum, unitaries in different
    /// components are at distance 2; on a finite grid that value is only
    /// approached, so `y` is multiplied by a continuous scalar phase `e^{iβ}`
    /// (which stays in its component) that rotates an eigenvalue of `x* y` to
    /// `−1` at one grid point and an eigenvalue of `Δ(x)* Δ(y)` to `−1` at the
    /// antipodal grid point.
    pub fn cross_pair(&self, seed: u64) -> Result<(Element, Element)> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = self.principal_sample(rng.random());
        let y = self.secondary_sample(rng.random());
        let n = self.model.grid_size().expect("circle model");
        let k1 = rng.random_range(0..n);
        let k2 = (k1 + n / 2) % n;
        let dx = self.u1.u_op(&x);
        let dy = self.u2.u_op(&y);
        let first_eigenvalue = |a: &Element, b: &Element, k: usize| -> Result<Complex64> {
            let fa = self.model.fiber_value(a, k)?;
            let fb = self.model.fiber_value(b, k)?;
            Ok(linalg::unitary_eigen(&fa.adjoint().matmul(&fb).blocks()[0]).0[0])
        };
        let mu1 = first_eigenvalue(&x, &y, k1)?;
        let mu2 = first_eigenvalue(&dx, &dy, k2)?;
        let beta1 = (-mu1.conj()).arg();
        let beta2 = (-mu2.conj()).arg();
        let grid = self.model.grid_points();
        let (theta1, theta2) = (grid[k1].arg(), grid[k2].arg());
        let per = self.model.blocks_per_point();
        let phase = y.map_blocks_indexed(|k, b| {
            let theta = grid[k / per].arg();
            let beta = beta1 * cosine_bump(theta, theta1, PI / 2.0) + beta2 * cosine_bump(theta, theta2, PI / 2.0);
            b * Complex64::from_polar(1.0, beta)
        });
        Ok((x, phase))
    }

    /// Checks isometry of `Δ` on `pairs` sampled pairs cycling through
    /// principal/principal, secondary/secondary and both cross orders.
    pub fn check_pairs(&self, pairs: usize, seed: u64) -> Result<PairCheck> {
        let mut out = PairCheck { pairs, ..Default::default() };
        for i in 0..pairs {
            let s = seed.wrapping_mul(1_000_003).wrapping_add(i as u64);
            let (x, y, cross) = match i % 4 {
                0 => (self.principal_sample(2 * s), self.principal_sample(2 * s + 1), false),
                1 => (self.secondary_sample(2 * s), self.secondary_sample(2 * s + 1), false),
                2 => {
                    let (x, y) = self.cross_pair(s)?;
                    (x, y, true)
                }
                _ => {
                    let (x, y) = self.cross_pair(s)?;
                    (y, x, true)
                }
            };
            let d = x.distance(&y);
            let dd = self.apply(&x)?.distance(&self.apply(&y)?);
            out.max_defect = out.max_defect.max((d - dd).abs());
            if cross {
                out.cross_pairs += 1;
                out.max_cross_gap = out.max_cross_gap.max((d - 2.0).abs()).max((dd - 2.0).abs());
            }
        }
        Ok(out)
    }
}
