//! Jordan and triple arithmetic with model checks, inverses, centrality, and isotopes.

use crate::element::Element;
use crate::error::{Error, Result};
use crate::linalg::{self, I};
use crate::model::Model;
use crate::tolerance::Tolerances;
use std::sync::Arc;

pub fn jordan_product(a: &Element, b: &Element) -> Result<Element> {
    a.check_same_model(b)?;
    Ok(a.jordan(b))
}

pub fn involution(a: &Element) -> Element {
    a.adjoint()
}

pub fn operator_norm(a: &Element) -> f64 {
    a.norm()
}

/// `U_{a,b}(x)`; `u_bilinear(a, a, x) = U_a(x)`.
pub fn u_bilinear(a: &Element, b: &Element, x: &Element) -> Result<Element> {
    a.check_same_model(b)?;
    a.check_same_model(x)?;
    Ok(a.u_bilinear(b, x))
}

pub fn u_quadratic(a: &Element, x: &Element) -> Result<Element> {
    a.check_same_model(x)?;
    Ok(a.u_op(x))
}

pub fn triple_product(x: &Element, y: &Element, z: &Element) -> Result<Element> {
    x.check_same_model(y)?;
    x.check_same_model(z)?;
    Ok(x.triple(y, z))
}

/// Exponential series, blockwise. Skew-adjoint arguments go through the
/// Hermitian eigenbasis so that the result is unitary to rounding.
pub fn exponential(a: &Element) -> Element {
    let scale = a.norm().max(1.0);
    if (a + &a.adjoint()).norm() <= 1e-14 * scale {
        a.scale_complex(-I).selfadjoint_part().exp_i()
    } else {
        a.exp()
    }
}

/// Jordan inverse; blockwise matrix inverse.
pub fn inverse(a: &Element, tol: &Tolerances) -> Result<Element> {
    let smin = a.min_singular_value();
    if smin <= tol.invertible {
        return Err(Error::SingularElement { min_singular_value: smin });
    }
    Ok(a.map_blocks(|b| b.clone().try_inverse().expect("singular values bounded away from zero")))
}

pub fn is_invertible(a: &Element, tol: &Tolerances) -> bool {
    a.min_singular_value() > tol.invertible
}

/// Whether `(a∘c)∘b = a∘(c∘b)` for every `c` in the canonical complex basis.
pub fn operator_commute(a: &Element, b: &Element, tol: &Tolerances) -> Result<bool> {
    a.check_same_model(b)?;
    let bound = tol.identity * (a.norm() * b.norm()).max(1.0);
    Ok(a
        .model()
        .complex_basis()
        .iter()
        .all(|c| a.jordan(c).jordan(b).distance(&a.jordan(&c.jordan(b))) <= bound))
}

/// Operator-commutes with every basis element.
pub fn is_central(a: &Element, tol: &Tolerances) -> bool {
    let basis = a.model().complex_basis();
    let bound = tol.identity * a.norm().max(1.0);
    basis.iter().all(|b| {
        basis
            .iter()
            .all(|c| a.jordan(c).jordan(b).distance(&a.jordan(&c.jordan(b))) <= bound)
    })
}

/// Projection test: `p∘p = p` and `p* = p`.
pub fn projection_residual(p: &Element) -> f64 {
    p.jordan(p).distance(p).max(p.selfadjoint_residual())
}

/// Definitions via the Jordan product and involution only. They hold in any
/// Jordan *-structure, in particular in isotopes, and serve as oracles for the
/// associative shortcuts.
pub mod formulas {
    /// `U_{a,b}(x) = (a∘x)∘b + (b∘x)∘a - (a∘b)∘x`.
    pub fn u_bilinear<E>(prod: impl Fn(&E, &E) -> E, a: &E, b: &E, x: &E) -> E
    where
        for<'a> &'a E: std::ops::Add<&'a E, Output = E> + std::ops::Sub<&'a E, Output = E>,
    {
        let t1 = prod(&prod(a, x), b);
        let t2 = prod(&prod(b, x), a);
        let t3 = prod(&prod(a, b), x);
        &(&t1 + &t2) - &t3
    }

    /// `U_a(x) = 2 (a∘x)∘a - a²∘x`.
    pub fn u_quadratic<E>(prod: impl Fn(&E, &E) -> E, a: &E, x: &E) -> E
    where
        for<'a> &'a E: std::ops::Add<&'a E, Output = E> + std::ops::Sub<&'a E, Output = E>,
    {
        let ax_a = prod(&prod(a, x), a);
        let a2x = prod(&prod(a, a), x);
        &(&ax_a + &ax_a) - &a2x
    }

    /// `{x,y,z} = (x∘y*)∘z + (z∘y*)∘x - (x∘z)∘y*`.
    pub fn triple<E>(prod: impl Fn(&E, &E) -> E, star: impl Fn(&E) -> E, x: &E, y: &E, z: &E) -> E
    where
        for<'a> &'a E: std::ops::Add<&'a E, Output = E> + std::ops::Sub<&'a E, Output = E>,
    {
        let ys = star(y);
        let t1 = prod(&prod(x, &ys), z);
        let t2 = prod(&prod(z, &ys), x);
        let t3 = prod(&prod(x, z), &ys);
        &(&t1 + &t2) - &t3
    }

    /// `n`-th Jordan power by repeated multiplication with `a`.
    pub fn power<E: Clone>(prod: impl Fn(&E, &E) -> E, unit: &E, a: &E, n: u32) -> E {
        (0..n).fold(unit.clone(), |acc, _| prod(&acc, a))
    }
}

/// The isotope `M_(c)` of an invertible element `c`: product `x ∘_c y = U_{x,y}(c)`,
/// quadratic operators `U^(c)_a = U_a U_c` and unit `c⁻¹`.
///
/// For a unitary `u`, [`IsotopeContext::unitary`] builds `M(u) = M_(u*)`, which
/// has unit `u` and involution `x ↦ U_u(x*)`. A unitary isotope also carries a
/// frame: unitaries `a_1, …, a_m` with `U_{a_m}⋯U_{a_1}(1) = u`. The map
/// `T = U_{a_m}⋯U_{a_1}` is a unital Jordan *-isomorphism `M → M(u)`; by default
/// the frame is the principal square root of `u`.
#[derive(Debug, Clone)]
pub struct IsotopeContext {
    base: Element,
    unit: Element,
    unitary: Option<Element>,
    frame: Vec<Element>,
    trivial: bool,
}

/// Builds `M_(c)`.
pub fn isotope(c: &Element, tol: &Tolerances) -> Result<IsotopeContext> {
    IsotopeContext::new(c, tol)
}

impl IsotopeContext {
    pub fn new(c: &Element, tol: &Tolerances) -> Result<Self> {
        let unit = inverse(c, tol)?;
        Ok(IsotopeContext {
            base: c.clone(),
            unit,
            unitary: None,
            frame: Vec::new(),
            trivial: false,
        })
    }

    /// The `u`-isotope `M(u)` of a unitary `u`, framed by the principal square root of `u`.
    pub fn unitary(u: &Element, tol: &Tolerances) -> Result<Self> {
        let root = u.map_blocks(linalg::unitary_sqrt);
        Self::unitary_with_frame(u, vec![root], tol)
    }

    /// `M(u)` framed by unitaries with `U_{a_m}⋯U_{a_1}(1) = u`.
    pub fn unitary_with_frame(u: &Element, frame: Vec<Element>, tol: &Tolerances) -> Result<Self> {
        let limit = tol.identity.max(1e-9) * 10.0;
        let residual = unitary_residual(u);
        if residual > limit {
            return Err(Error::NotUnitary { residual });
        }
        for a in &frame {
            u.check_same_model(a)?;
            let residual = unitary_residual(a);
            if residual > limit {
                return Err(Error::NotUnitary { residual });
            }
        }
        let image = frame.iter().fold(u.model().unit(), |acc, a| a.u_op(&acc));
        let mismatch = image.distance(u);
        if mismatch > 1e-8 {
            return Err(Error::Precondition(format!("frame does not map 1 to u (residual {mismatch:.3e})")));
        }
        let trivial = u.distance(&u.model().unit()) == 0.0;
        Ok(IsotopeContext {
            base: u.adjoint(),
            unit: u.clone(),
            unitary: Some(u.clone()),
            frame,
            trivial,
        })
    }

    /// The original algebra viewed as its own isotope at the unit.
    pub fn standard(model: &Arc<Model>) -> Self {
        let one = model.unit();
        IsotopeContext {
            base: one.clone(),
            unit: one.clone(),
            unitary: Some(one),
            frame: Vec::new(),
            trivial: true,
        }
    }

    pub fn model(&self) -> &Arc<Model> {
        self.base.model()
    }

    pub fn is_standard(&self) -> bool {
        self.trivial
    }

    /// The element `c` defining the product.
    pub fn base(&self) -> &Element {
        &self.base
    }

    pub fn unit(&self) -> &Element {
        &self.unit
    }

    pub fn unitary_base(&self) -> Option<&Element> {
        self.unitary.as_ref()
    }

    pub fn frame(&self) -> &[Element] {
        &self.frame
    }

    pub fn product(&self, x: &Element, y: &Element) -> Element {
        if self.trivial {
            x.jordan(y)
        } else {
            x.u_bilinear(y, &self.base)
        }
    }

    /// Isotope involution `U_u(x*)`; only defined for unitary isotopes.
    pub fn involution(&self, x: &Element) -> Result<Element> {
        match &self.unitary {
            Some(_) if self.trivial => Ok(x.adjoint()),
            Some(u) => Ok(u.u_op(&x.adjoint())),
            None => Err(Error::Precondition("involution is defined only for unitary isotopes".into())),
        }
    }

    fn star(&self, x: &Element) -> Element {
        self.involution(x).expect("unitary isotope")
    }

    /// `U^(c)_a(x) = U_a(U_c(x))`.
    pub fn quadratic(&self, a: &Element, x: &Element) -> Element {
        if self.trivial {
            a.u_op(x)
        } else {
            a.u_op(&self.base.u_op(x))
        }
    }

    /// `U^(c)_{a,b}(x) = U_{a,b}(U_c(x))`.
    pub fn quadratic_bilinear(&self, a: &Element, b: &Element, x: &Element) -> Element {
        if self.trivial {
            a.u_bilinear(b, x)
        } else {
            a.u_bilinear(b, &self.base.u_op(x))
        }
    }

    /// Triple product built from the isotope product and involution.
    pub fn triple(&self, x: &Element, y: &Element, z: &Element) -> Element {
        formulas::triple(|a, b| self.product(a, b), |a| self.star(a), x, y, z)
    }

    /// Exponential in the isotope: `c⁻¹ exp(c a)`.
    pub fn exp(&self, a: &Element) -> Element {
        if self.trivial {
            exponential(a)
        } else {
            self.unit.matmul(&self.base.matmul(a).exp())
        }
    }

    /// `exp_c(i h)` for an isotope-self-adjoint `h`. In a unitary isotope this is
    /// `u exp(i u* h)` with `u* h` Hermitian.
    pub fn exp_i(&self, h: &Element) -> Element {
        if self.trivial {
            return h.selfadjoint_part().exp_i();
        }
        match &self.unitary {
            Some(u) => u.matmul(&u.adjoint().matmul(h).selfadjoint_part().exp_i()),
            None => self.exp(&h.scale_complex(I)),
        }
    }

    pub fn power(&self, a: &Element, n: u32) -> Element {
        formulas::power(|x, y| self.product(x, y), &self.unit, a, n)
    }

    pub fn selfadjoint_residual(&self, h: &Element) -> f64 {
        h.distance(&self.star(h))
    }

    /// Image of a standard element under the frame isomorphism `M → M(u)`.
    pub fn from_standard(&self, x: &Element) -> Element {
        self.frame.iter().fold(x.clone(), |acc, a| a.u_op(&acc))
    }

    /// Preimage under the frame isomorphism.
    pub fn to_standard(&self, x: &Element) -> Element {
        self.frame.iter().rev().fold(x.clone(), |acc, a| a.adjoint().u_op(&acc))
    }

    /// Real basis of the isotope-self-adjoint part.
    pub fn selfadjoint_basis(&self) -> Vec<Element> {
        self.model()
            .selfadjoint_basis()
            .iter()
            .map(|b| self.from_standard(b))
            .collect()
    }

    /// Coordinates dual to `selfadjoint_basis`.
    pub fn selfadjoint_coords(&self, h: &Element) -> Vec<f64> {
        self.model().selfadjoint_coords(&self.to_standard(h))
    }

    /// `x = re + i im` with `re`, `im` isotope-self-adjoint.
    pub fn cartesian(&self, x: &Element) -> (Element, Element) {
        let xs = self.star(x);
        let re = (x + &xs).scale(0.5);
        let im = (x - &xs).scale_complex(-I * 0.5);
        (re, im)
    }

    /// Whether `a` operator-commutes with the whole isotope.
    pub fn is_central(&self, a: &Element, tol: &Tolerances) -> bool {
        let basis = self.model().complex_basis();
        let bound = tol.identity * a.norm().max(1.0) * self.base.norm().powi(2).max(1.0);
        basis.iter().all(|b| {
            basis.iter().all(|x| {
                let lhs = self.product(&self.product(a, x), b);
                let rhs = self.product(a, &self.product(x, b));
                lhs.distance(&rhs) <= bound
            })
        })
    }
}

/// `max(‖u u* - 1‖, ‖u* u - 1‖)` blockwise.
pub fn unitary_residual(u: &Element) -> f64 {
    let one = u.model().unit();
    let left = u.matmul(&u.adjoint()).distance(&one);
    let right = u.adjoint().matmul(u).distance(&one);
    left.max(right)
}
