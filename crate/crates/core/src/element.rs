//! Elements of a model and their blockwise arithmetic.
//!
//! The inherent methods on [`Element`] panic when two operands come from
//! different models, the same way dense matrix libraries panic on dimension
//! mismatch. The fallible, model-checked entry points live in
//! [`crate::algebra`].

use crate::error::{Error, Result};
use crate::linalg::{self, c, CMat, I};
use crate::model::{Model, ModelDescriptor};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::Arc;

#[derive(Clone)]
pub struct Element {
    model: Arc<Model>,
    blocks: Vec<CMat>,
}

pub(crate) fn same_model_arc(a: &Arc<Model>, b: &Arc<Model>) -> bool {
    Arc::ptr_eq(a, b) || a.descriptor() == b.descriptor()
}

impl fmt::Debug for Element {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Element")
            .field("model", self.model.descriptor())
            .field("blocks", &self.blocks)
            .finish()
    }
}

impl Element {
    pub(crate) fn from_blocks_unchecked(model: Arc<Model>, blocks: Vec<CMat>) -> Self {
        debug_assert_eq!(model.blocks().len(), blocks.len());
        Element { model, blocks }
    }

    /// Builds an element, checking block shapes and transpose symmetry.
    pub fn from_blocks(model: Arc<Model>, blocks: Vec<CMat>, symmetric_tol: f64) -> Result<Self> {
        if blocks.len() != model.blocks().len() {
            return Err(Error::Shape(format!(
                "expected {} blocks, got {}",
                model.blocks().len(),
                blocks.len()
            )));
        }
        for (k, (shape, block)) in model.blocks().iter().zip(&blocks).enumerate() {
            if block.nrows() != shape.dim || block.ncols() != shape.dim {
                return Err(Error::Shape(format!(
                    "block {k} is {}x{}, expected {}x{}",
                    block.nrows(),
                    block.ncols(),
                    shape.dim,
                    shape.dim
                )));
            }
            if shape.symmetric {
                let asym = linalg::asymmetry(block);
                if asym > symmetric_tol {
                    return Err(Error::Shape(format!(
                        "block {k} violates transpose symmetry by {asym:.3e}"
                    )));
                }
            }
        }
        Ok(Element { model, blocks })
    }

    pub fn model(&self) -> &Arc<Model> {
        &self.model
    }

    pub fn blocks(&self) -> &[CMat] {
        &self.blocks
    }

    pub fn into_blocks(self) -> Vec<CMat> {
        self.blocks
    }

    pub fn same_model(&self, other: &Element) -> bool {
        same_model_arc(&self.model, &other.model)
    }

    pub fn check_same_model(&self, other: &Element) -> Result<()> {
        if self.same_model(other) {
            Ok(())
        } else {
            Err(Error::ModelMismatch)
        }
    }

    fn assert_same(&self, other: &Element) {
        assert!(self.same_model(other), "operands belong to different models");
    }

    pub fn map_blocks(&self, f: impl Fn(&CMat) -> CMat) -> Element {
        Element {
            model: self.model.clone(),
            blocks: self.blocks.iter().map(f).collect(),
        }
    }

    pub fn map_blocks_indexed(&self, f: impl Fn(usize, &CMat) -> CMat) -> Element {
        Element {
            model: self.model.clone(),
            blocks: self.blocks.iter().enumerate().map(|(k, b)| f(k, b)).collect(),
        }
    }

    pub fn zip_blocks(&self, other: &Element, f: impl Fn(&CMat, &CMat) -> CMat) -> Element {
        self.assert_same(other);
        Element {
            model: self.model.clone(),
            blocks: self.blocks.iter().zip(&other.blocks).map(|(a, b)| f(a, b)).collect(),
        }
    }

    fn zip3_blocks(&self, y: &Element, z: &Element, f: impl Fn(&CMat, &CMat, &CMat) -> CMat) -> Element {
        self.assert_same(y);
        self.assert_same(z);
        Element {
            model: self.model.clone(),
            blocks: self
                .blocks
                .iter()
                .zip(&y.blocks)
                .zip(&z.blocks)
                .map(|((a, b), c)| f(a, b, c))
                .collect(),
        }
    }

    pub fn scale(&self, t: f64) -> Element {
        self.map_blocks(|b| b * c(t))
    }

    pub fn scale_complex(&self, z: Complex64) -> Element {
        self.map_blocks(|b| b * z)
    }

    /// Involution: blockwise conjugate transpose.
    pub fn adjoint(&self) -> Element {
        self.map_blocks(|b| b.adjoint())
    }

    /// Operator norm: largest singular value over all blocks.
    pub fn norm(&self) -> f64 {
        self.blocks.iter().map(linalg::spectral_norm).fold(0.0, f64::max)
    }

    pub fn distance(&self, other: &Element) -> f64 {
        (self - other).norm()
    }

    /// Jordan product `(ab + ba) / 2`.
    pub fn jordan(&self, other: &Element) -> Element {
        self.zip_blocks(other, |a, b| (a * b + b * a) * c(0.5))
    }

    pub fn square(&self) -> Element {
        self.map_blocks(|a| a * a)
    }

    /// `n`-th power (`n = 0` gives the unit).
    pub fn power(&self, n: u32) -> Element {
        self.map_blocks(|a| a.pow(n))
    }

    /// `U_a(x) = a x a`.
    pub fn u_op(&self, x: &Element) -> Element {
        self.zip_blocks(x, |a, x| a * x * a)
    }

    /// `U_{a,b}(x) = (a x b + b x a) / 2`.
    pub fn u_bilinear(&self, b: &Element, x: &Element) -> Element {
        self.zip3_blocks(b, x, |a, b, x| (a * x * b + b * x * a) * c(0.5))
    }

    /// Triple product `{x, y, z} = (x y* z + z y* x) / 2`.
    pub fn triple(&self, y: &Element, z: &Element) -> Element {
        self.zip3_blocks(y, z, |x, y, z| {
            let ys = y.adjoint();
            (x * &ys * z + z * &ys * x) * c(0.5)
        })
    }

    /// `Q(a)(x) = {a, x, a} = a x* a`.
    pub fn q_op(&self, x: &Element) -> Element {
        self.zip_blocks(x, |a, x| a * x.adjoint() * a)
    }

    /// `L(a, b)(x) = {a, b, x}`.
    pub fn l_op(&self, b: &Element, x: &Element) -> Element {
        self.triple(b, x)
    }

    /// General exponential, blockwise.
    pub fn exp(&self) -> Element {
        self.map_blocks(linalg::expm)
    }

    /// `exp(i h)` for a self-adjoint `h`, computed through the eigenbasis.
    pub fn exp_i(&self) -> Element {
        self.map_blocks(|h| linalg::exp_i_hermitian(h, 1.0))
    }

    /// `exp(i t h)` for a self-adjoint `h`.
    pub fn exp_it(&self, t: f64) -> Element {
        self.map_blocks(|h| linalg::exp_i_hermitian(h, t))
    }

    /// Associative product `ab` of the ambient matrix realization.
    /// Not a Jordan operation; the result may leave symmetric models.
    pub fn matmul(&self, other: &Element) -> Element {
        self.zip_blocks(other, |a, b| a * b)
    }

    /// `(x + x*) / 2`.
    pub fn selfadjoint_part(&self) -> Element {
        self.map_blocks(|b| (b + b.adjoint()) * c(0.5))
    }

    /// `(x - x*) / (2i)`, so that `x = re + i im`.
    pub fn skew_part(&self) -> Element {
        self.map_blocks(|b| (b - b.adjoint()) * (-I * 0.5))
    }

    /// Projects symmetric blocks onto the transpose-symmetric matrices.
    pub fn symmetrized(&self) -> Element {
        let shapes = self.model.blocks();
        Element {
            model: self.model.clone(),
            blocks: self
                .blocks
                .iter()
                .zip(shapes)
                .map(|(b, s)| if s.symmetric { (b + b.transpose()) * c(0.5) } else { b.clone() })
                .collect(),
        }
    }

    pub fn selfadjoint_residual(&self) -> f64 {
        self.distance(&self.adjoint())
    }

    /// Largest deviation from transpose symmetry among symmetric blocks.
    pub fn symmetry_residual(&self) -> f64 {
        self.model
            .blocks()
            .iter()
            .zip(&self.blocks)
            .filter(|(s, _)| s.symmetric)
            .map(|(_, b)| linalg::asymmetry(b))
            .fold(0.0, f64::max)
    }

    /// Blockwise transpose symmetry of every block (not only symmetric ones).
    pub fn full_symmetry_residual(&self) -> f64 {
        self.blocks.iter().map(linalg::asymmetry).fold(0.0, f64::max)
    }

    /// Smallest singular value over all blocks.
    pub fn min_singular_value(&self) -> f64 {
        self.blocks
            .iter()
            .flat_map(linalg::singular_values)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn to_json_value(&self) -> ElementJson {
        ElementJson {
            model: self.model.descriptor().clone(),
            data: self
                .blocks
                .iter()
                .map(|b| {
                    (0..b.nrows())
                        .map(|i| (0..b.ncols()).map(|j| [b[(i, j)].re, b[(i, j)].im]).collect())
                        .collect()
                })
                .collect(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_json_value()).expect("element serialization cannot fail")
    }

    pub fn from_json_value(value: ElementJson, symmetric_tol: f64) -> Result<Element> {
        let model = Model::build(&value.model)?;
        let mut blocks = Vec::with_capacity(value.data.len());
        for (k, rows) in value.data.into_iter().enumerate() {
            let n = rows.len();
            let mut m = CMat::zeros(n, n);
            for (i, row) in rows.into_iter().enumerate() {
                if row.len() != n {
                    return Err(Error::Shape(format!("block {k} row {i} has {} entries, expected {n}", row.len())));
                }
                for (j, [re, im]) in row.into_iter().enumerate() {
                    m[(i, j)] = Complex64::new(re, im);
                }
            }
            blocks.push(m);
        }
        Element::from_blocks(model, blocks, symmetric_tol)
    }

    pub fn from_json(text: &str, symmetric_tol: f64) -> Result<Element> {
        let value: ElementJson = serde_json::from_str(text)?;
        Element::from_json_value(value, symmetric_tol)
    }
}

/// Wire format: `{"model": <descriptor>, "data": [block][row][col] = [re, im]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElementJson {
    pub model: ModelDescriptor,
    pub data: Vec<Vec<Vec<[f64; 2]>>>,
}

impl Serialize for Element {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_json_value().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Element {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let value = ElementJson::deserialize(deserializer)?;
        Element::from_json_value(value, crate::Tolerances::default().symmetric).map_err(serde::de::Error::custom)
    }
}

impl PartialEq for Element {
    fn eq(&self, other: &Self) -> bool {
        self.same_model(other) && self.blocks == other.blocks
    }
}

impl Add for &Element {
    type Output = Element;
    fn add(self, rhs: &Element) -> Element {
        self.zip_blocks(rhs, |a, b| a + b)
    }
}

impl Sub for &Element {
    type Output = Element;
    fn sub(self, rhs: &Element) -> Element {
        self.zip_blocks(rhs, |a, b| a - b)
    }
}

impl Add for Element {
    type Output = Element;
    fn add(self, rhs: Element) -> Element {
        &self + &rhs
    }
}

impl Sub for Element {
    type Output = Element;
    fn sub(self, rhs: Element) -> Element {
        &self - &rhs
    }
}

impl Neg for &Element {
    type Output = Element;
    fn neg(self) -> Element {
        self.scale(-1.0)
    }
}

impl Neg for Element {
    type Output = Element;
    fn neg(self) -> Element {
        self.scale(-1.0)
    }
}

impl Mul<f64> for &Element {
    type Output = Element;
    fn mul(self, t: f64) -> Element {
        self.scale(t)
    }
}

impl Mul<Complex64> for &Element {
    type Output = Element;
    fn mul(self, z: Complex64) -> Element {
        self.scale_complex(z)
    }
}
