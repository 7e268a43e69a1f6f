//! Unitaries: the logarithm step between nearby unitaries, factorization of the
//! principal component into `U`-chains of exponentials, winding numbers of
//! circle-model unitaries and membership certificates.

use crate::algebra::{unitary_residual, IsotopeContext};
use crate::element::Element;
use crate::error::{Error, Result};
use crate::linalg::{self, c, CMat};
use crate::model::Model;
use crate::tolerance::Tolerances;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::sync::Arc;

/// Reconstruction accuracy demanded from factorizations and certificates.
pub const RECONSTRUCTION_TOL: f64 = 1e-8;

/// `u ∘ u* = 1` and `u² ∘ u* = u`.
pub fn is_unitary(u: &Element, tol: &Tolerances) -> bool {
    unitary_defect(u) <= tol.identity
}

/// Largest residual of the two Jordan unitarity equations.
pub fn unitary_defect(u: &Element) -> f64 {
    let us = u.adjoint();
    let a = u.jordan(&us).distance(&u.model().unit());
    let b = u.square().jordan(&us).distance(u);
    a.max(b).max(unitary_residual(u))
}

fn require_unitary(u: &Element, tol: &Tolerances) -> Result<()> {
    let residual = unitary_defect(u);
    if residual > tol.identity.max(RECONSTRUCTION_TOL) {
        return Err(Error::NotUnitary { residual });
    }
    Ok(())
}

/// Principal logarithm per block and the distance of the spectrum from `-1`.
fn blockwise_log(w: &Element) -> (Element, f64) {
    let gap = std::cell::Cell::new(f64::INFINITY);
    let log = w.map_blocks(|b| {
        let (l, g) = linalg::unitary_log(b);
        gap.set(gap.get().min(g));
        l
    });
    (log, gap.get())
}

/// Self-adjoint `h` of the isotope `M(u)` with `exp_u(i h) = v`, namely
/// `h = u·(−i Log(u* v))` with the principal logarithm.
pub fn factor_step(u: &Element, v: &Element, tol: &Tolerances) -> Result<Element> {
    u.check_same_model(v)?;
    require_unitary(u, tol)?;
    require_unitary(v, tol)?;
    let distance = u.distance(v);
    let limit = 2.0 - tol.margin;
    if distance >= limit {
        return Err(Error::DistanceTooLarge { distance, limit });
    }
    let (log, gap) = blockwise_log(&u.adjoint().matmul(v));
    if gap <= tol.branch {
        return Err(Error::LogBranch { gap });
    }
    let h = u.matmul(&log);
    // transpose symmetry of h holds for symmetric unitaries; verified, not assumed
    let asym = h.symmetry_residual();
    if asym > tol.symmetric.max(1e-12) * h.norm().max(1.0) * 10.0 {
        return Err(Error::Precondition(format!(
            "logarithm step left the symmetric matrices (residual {asym:.3e})"
        )));
    }
    Ok(h.symmetrized())
}

/// Ordered self-adjoint elements `h_1, …, h_n` representing
/// `U_{e^{ih_n}}⋯U_{e^{ih_1}}(base)`; `h_1` acts first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UChainFactorization {
    pub base: Element,
    pub hs: Vec<Element>,
}

impl UChainFactorization {
    pub fn new(base: Element, hs: Vec<Element>) -> Self {
        UChainFactorization { base, hs }
    }

    /// Chain with base `1`.
    pub fn from_unit(model: &Arc<Model>, hs: Vec<Element>) -> Self {
        UChainFactorization { base: model.unit(), hs }
    }

    pub fn empty(model: &Arc<Model>) -> Self {
        Self::from_unit(model, Vec::new())
    }

    pub fn len(&self) -> usize {
        self.hs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hs.is_empty()
    }

    pub fn evaluate(&self) -> Element {
        self.apply(&self.base)
    }

    /// `U_{e^{ih_n}}⋯U_{e^{ih_1}}(x)`.
    pub fn apply(&self, x: &Element) -> Element {
        self.hs.iter().fold(x.clone(), |acc, h| h.exp_i().u_op(&acc))
    }

    /// Inverse map `U_{e^{-ih_1}}⋯U_{e^{-ih_n}}(x)`.
    pub fn apply_inverse(&self, x: &Element) -> Element {
        self.hs.iter().rev().fold(x.clone(), |acc, h| h.exp_it(-1.0).u_op(&acc))
    }

    /// The unitaries `e^{ih_j}`, innermost first.
    pub fn exponentials(&self) -> Vec<Element> {
        self.hs.iter().map(Element::exp_i).collect()
    }

    pub fn max_selfadjoint_residual(&self) -> f64 {
        self.hs.iter().map(Element::selfadjoint_residual).fold(0.0, f64::max)
    }

    pub fn validate(&self, tol: &Tolerances) -> Result<()> {
        for h in &self.hs {
            self.base.check_same_model(h)?;
            let residual = h.selfadjoint_residual();
            if residual > tol.identity * h.norm().max(1.0) {
                return Err(Error::NotSelfAdjoint { residual });
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("chain serialization cannot fail")
    }

    pub fn from_json(text: &str, tol: &Tolerances) -> Result<Self> {
        let chain: UChainFactorization = serde_json::from_str(text)?;
        chain.validate(tol)?;
        Ok(chain)
    }

    /// Isotope `M(u)` framed by this chain, `u` being its evaluation at `1`.
    pub fn isotope(&self, tol: &Tolerances) -> Result<IsotopeContext> {
        let u = self.evaluate();
        IsotopeContext::unitary_with_frame(&u, self.exponentials(), tol)
    }
}

pub fn evaluate_u_chain(f: &UChainFactorization) -> Element {
    f.evaluate()
}

/// Factors the endpoint of a path starting at `1` whose consecutive points are
/// closer than `2 − ε_margin`. Each step peels the chain found so far with the
/// inverse `U`-operators (which are isometries), takes the logarithm against
/// `1` and halves it, using `U_{e^{ih/2}}(1) = e^{ih}`.
pub fn factor_path(path: &[Element], tol: &Tolerances) -> Result<UChainFactorization> {
    let first = path
        .first()
        .ok_or_else(|| Error::Precondition("path must contain at least the unit".into()))?;
    let model = first.model().clone();
    let one = model.unit();
    for p in path {
        one.check_same_model(p)?;
        require_unitary(p, tol)?;
    }
    let start = first.distance(&one);
    if start > RECONSTRUCTION_TOL {
        return Err(Error::Precondition(format!("path must start at the unit (distance {start:.3e})")));
    }
    // outermost first while peeling
    let mut peel: Vec<Element> = Vec::with_capacity(path.len());
    for (prev, next) in path.iter().zip(&path[1..]) {
        let distance = prev.distance(next);
        let limit = 2.0 - tol.margin;
        if distance >= limit {
            return Err(Error::DistanceTooLarge { distance, limit });
        }
        let x = peel.iter().fold(next.clone(), |acc, g| g.exp_it(-1.0).u_op(&acc));
        let h = factor_step(&one, &x, tol)?;
        peel.push(h.scale(0.5));
    }
    peel.reverse();
    Ok(UChainFactorization::from_unit(&model, peel))
}

/// Determinant of the fiber value at each grid point.
fn determinants(u: &Element) -> Result<Vec<Complex64>> {
    let model = u.model();
    if !model.is_circle() {
        return Err(Error::NotCircleModel);
    }
    let per = model.blocks_per_point();
    Ok(u.blocks()
        .chunks(per)
        .map(|blocks| blocks.iter().map(linalg::determinant).product())
        .collect())
}

/// Largest admissible phase jump between consecutive grid points.
const MAX_PHASE_JUMP: f64 = PI * (1.0 - 1e-3);

fn phase_increments(dets: &[Complex64]) -> Result<Vec<f64>> {
    let n = dets.len();
    let mut jumps = Vec::with_capacity(n);
    for k in 0..n {
        let jump = (dets[(k + 1) % n] / dets[k]).arg();
        if jump.abs() > MAX_PHASE_JUMP {
            return Err(Error::PhaseJumpTooLarge { jump });
        }
        jumps.push(jump);
    }
    Ok(jumps)
}

/// Winding number of `λ ↦ det u(λ)` around `0`.
pub fn winding_number(u: &Element, tol: &Tolerances) -> Result<i64> {
    require_unitary(u, tol)?;
    let dets = determinants(u)?;
    let total: f64 = phase_increments(&dets)?.iter().sum();
    Ok((total / (2.0 * PI)).round() as i64)
}

/// Outcome of a membership query for the principal component.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    CertifiedTrue,
    CertifiedFalse,
    Inconclusive,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Membership {
    pub verdict: Verdict,
    pub winding: Option<i64>,
    pub certificate: Option<UChainFactorization>,
    /// Distance between the certificate's evaluation and the input.
    pub residual: Option<f64>,
    pub justification: String,
}

impl Membership {
    pub fn is_principal(&self) -> bool {
        self.verdict == Verdict::CertifiedTrue
    }
}

/// Distance between a chain's evaluation and `u`.
pub fn certificate_residual(u: &Element, cert: &UChainFactorization) -> f64 {
    cert.evaluate().distance(u)
}

/// Options of the greedy certificate search in circle models.
#[derive(Debug, Clone, Copy)]
pub struct SearchOptions {
    pub seed: u64,
    pub attempts: usize,
}

impl Default for SearchOptions {
    fn default() -> Self {
        SearchOptions { seed: 0x5eed, attempts: 24 }
    }
}

pub fn in_principal_component(u: &Element, tol: &Tolerances) -> Result<Membership> {
    in_principal_component_with(u, tol, SearchOptions::default())
}

pub fn in_principal_component_with(u: &Element, tol: &Tolerances, options: SearchOptions) -> Result<Membership> {
    require_unitary(u, tol)?;
    if !u.model().is_circle() {
        return Ok(matrix_membership(u));
    }
    let winding = winding_number(u, tol)?;
    if winding != 0 {
        return Ok(Membership {
            verdict: Verdict::CertifiedFalse,
            winding: Some(winding),
            certificate: None,
            residual: None,
            justification: format!(
                "det u has winding number {winding}; the winding number is constant on components and vanishes at 1"
            ),
        });
    }
    match greedy_certificate(u, options) {
        Some((cert, residual)) => Ok(Membership {
            verdict: Verdict::CertifiedTrue,
            winding: Some(0),
            certificate: Some(cert),
            residual: Some(residual),
            justification: "winding number 0 and an explicit U-chain of exponentials reproduces u".into(),
        }),
        None => Ok(Membership {
            verdict: Verdict::Inconclusive,
            winding: Some(0),
            certificate: None,
            residual: None,
            justification: format!(
                "winding number 0 but no continuous logarithm chain was found in {} attempts",
                options.attempts
            ),
        }),
    }
}

fn matrix_membership(u: &Element) -> Membership {
    let h = u.map_blocks(|b| linalg::unitary_log(b).0).symmetrized();
    let cert = UChainFactorization::from_unit(u.model(), vec![h.scale(0.5)]);
    let residual = certificate_residual(u, &cert);
    Membership {
        verdict: Verdict::CertifiedTrue,
        winding: None,
        certificate: Some(cert),
        residual: Some(residual),
        justification: "the unitary group of a finite-dimensional matrix model is connected: u = exp(iH) = U_{exp(iH/2)}(1)"
            .into(),
    }
}

/// Principal logarithm at each grid point, accepted only if it varies
/// continuously along the grid and the spectrum keeps away from `-1`.
fn continuous_log(r: &Element, margin: f64) -> Option<Element> {
    let model = r.model();
    let per = model.blocks_per_point();
    let (log, gap) = blockwise_log(r);
    if gap <= margin {
        return None;
    }
    let points: Vec<&[CMat]> = log.blocks().chunks(per).collect();
    let n = points.len();
    for k in 0..n {
        let next = points[(k + 1) % n];
        let jump = points[k]
            .iter()
            .zip(next)
            .map(|(a, b)| linalg::spectral_norm(&(a - b)))
            .fold(0.0, f64::max);
        if jump >= PI / 2.0 {
            return None;
        }
    }
    Some(log.symmetrized())
}

/// Continuous scalar `φ/(2n)` with `det u = e^{iφ}`, `n` the fiber size.
fn determinant_phase_generator(u: &Element) -> Option<Element> {
    let dets = determinants(u).ok()?;
    let jumps = phase_increments(&dets).ok()?;
    let model = u.model();
    let size: usize = model.fiber()?.blocks().iter().map(|b| b.dim).sum();
    let mut phi = Vec::with_capacity(dets.len());
    let mut acc = dets[0].arg();
    for jump in &jumps {
        phi.push(acc);
        acc += jump;
    }
    let per = model.blocks_per_point();
    Some(u.map_blocks_indexed(|k, b| CMat::identity(b.nrows(), b.ncols()) * c(phi[k / per] / (2.0 * size as f64))))
}

fn random_constant_selfadjoint(model: &Arc<Model>, rng: &mut ChaCha8Rng, scale: f64) -> Element {
    let fiber = model.fiber().expect("circle model").clone();
    let value = crate::model::random_selfadjoint(&fiber, rng.random(), scale);
    model.constant(&value).expect("fiber element")
}

fn accept(u: &Element, hs: Vec<Element>) -> Option<(UChainFactorization, f64)> {
    let cert = UChainFactorization::from_unit(u.model(), hs);
    let residual = certificate_residual(u, &cert);
    (residual <= RECONSTRUCTION_TOL).then_some((cert, residual))
}

/// Greedy search: principal logarithm of `u`; then peel the determinant phase
/// with a central scalar and take the logarithm of the rest; then additionally
/// peel random constant self-adjoint elements.
fn greedy_certificate(u: &Element, options: SearchOptions) -> Option<(UChainFactorization, f64)> {
    let margin = 1e-3;
    if let Some(log) = continuous_log(u, margin) {
        if let Some(found) = accept(u, vec![log.scale(0.5)]) {
            return Some(found);
        }
    }
    let scalar = determinant_phase_generator(u)?;
    let rest = scalar.exp_it(-1.0).u_op(u);
    if let Some(log) = continuous_log(&rest, margin) {
        if let Some(found) = accept(u, vec![log.scale(0.5), scalar.clone()]) {
            return Some(found);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    for attempt in 0..options.attempts {
        let scale = PI * (attempt as f64 + 1.0) / (options.attempts as f64 + 1.0);
        let shift = random_constant_selfadjoint(u.model(), &mut rng, scale);
        let peeled = shift.exp_it(-1.0).u_op(&rest);
        if let Some(log) = continuous_log(&peeled, margin) {
            if let Some(found) = accept(u, vec![log.scale(0.5), shift, scalar.clone()]) {
                return Some(found);
            }
        }
    }
    None
}

/// Certificate of `w*` from one of `w`: `(U_{e^{ib_m}}⋯U_{e^{ib_1}}(1))* = U_{e^{-ib_m}}⋯U_{e^{-ib_1}}(1)`.
pub fn adjoint_certificate(w: &UChainFactorization) -> UChainFactorization {
    UChainFactorization {
        base: w.base.adjoint(),
        hs: w.hs.iter().map(|h| h.scale(-1.0)).collect(),
    }
}

/// Certificate of `U_w(u)` from certificates of `w` and `u`, by the generalized
/// fundamental identity `U_{U_{a_m}⋯U_{a_1}(1)} = U_{a_m}⋯U_{a_1}U_{a_1}⋯U_{a_m}`.
pub fn u_action_certificate(w: &UChainFactorization, u: &UChainFactorization) -> Result<UChainFactorization> {
    let one = w.base.model().unit();
    if w.base.distance(&one) > RECONSTRUCTION_TOL {
        return Err(Error::Precondition("certificate of w must start at the unit".into()));
    }
    let mut hs = u.hs.clone();
    hs.extend(w.hs.iter().rev().cloned());
    hs.extend(w.hs.iter().cloned());
    Ok(UChainFactorization { base: u.base.clone(), hs })
}

/// `u ↦ U_v(u)` on certified-principal unitaries: the image of the principal
/// component under the `U`-operator of `v`.
#[derive(Debug, Clone)]
pub struct SquareComponentAction {
    v: Element,
    winding: Option<i64>,
    tol: Tolerances,
}

/// Image of a certified-principal unitary under [`SquareComponentAction`].
#[derive(Debug, Clone)]
pub struct SquareImage {
    pub image: Element,
    pub winding: Option<i64>,
}

pub fn component_of_square(v: &Element, tol: &Tolerances) -> Result<SquareComponentAction> {
    require_unitary(v, tol)?;
    let winding = if v.model().is_circle() { Some(winding_number(v, tol)?) } else { None };
    Ok(SquareComponentAction { v: v.clone(), winding, tol: *tol })
}

impl SquareComponentAction {
    pub fn v(&self) -> &Element {
        &self.v
    }

    /// Winding number of `v²`, shared by every image.
    pub fn image_winding(&self) -> Option<i64> {
        self.winding.map(|w| 2 * w)
    }

    pub fn apply(&self, u: &Element, certificate: &UChainFactorization) -> Result<SquareImage> {
        self.v.check_same_model(u)?;
        let residual = certificate_residual(u, certificate);
        if residual > RECONSTRUCTION_TOL {
            return Err(Error::Precondition(format!(
                "certificate does not reproduce the input (residual {residual:.3e})"
            )));
        }
        let image = self.v.u_op(u);
        let winding = match self.winding {
            Some(wv) => {
                let wu = winding_number(u, &self.tol)?;
                let wi = winding_number(&image, &self.tol)?;
                if wi != 2 * wv + wu {
                    return Err(Error::HypothesisFailed(format!(
                        "winding of U_v(u) is {wi}, expected 2·{wv} + {wu}"
                    )));
                }
                Some(wi)
            }
            None => None,
        };
        Ok(SquareImage { image, winding })
    }
}

/// Membership of `x` in the principal component of the isotope `M(u)`, decided
/// by pulling `x` back to `M` through the frame isomorphism of the context.
pub fn in_principal_component_of_isotope(x: &Element, ctx: &IsotopeContext, tol: &Tolerances) -> Result<Membership> {
    if ctx.unitary_base().is_none() {
        return Err(Error::Precondition("isotope must be unitary".into()));
    }
    in_principal_component(&ctx.to_standard(x), tol)
}
