//! Concrete finite-dimensional JB*-algebra models.
//!
//! Every model is realized as a finite list of square complex blocks. Jordan
//! and triple operations act blockwise, and the norm is the maximum of the
//! blockwise spectral norms. A `circle_function` model samples continuous
//! maps from the unit circle into its fiber at `N` equispaced points
//! `lambda_k = exp(2 pi i k / N)`; its blocks are stored grid-point major.

use crate::element::Element;
use crate::error::{Error, Result};
use crate::linalg::{c, CMat, I};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::sync::Arc;

pub const DEFAULT_GRID: usize = 256;

fn default_grid() -> usize {
    DEFAULT_GRID
}

/// Serializable description of a model.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelDescriptor {
    FullMatrix {
        n: usize,
    },
    SymmetricMatrix {
        n: usize,
    },
    CircleFunction {
        #[serde(rename = "N", default = "default_grid")]
        grid: usize,
        fiber: Box<ModelDescriptor>,
    },
    DirectSum {
        parts: Vec<ModelDescriptor>,
    },
}

impl ModelDescriptor {
    pub fn full(n: usize) -> Self {
        ModelDescriptor::FullMatrix { n }
    }

    pub fn symmetric(n: usize) -> Self {
        ModelDescriptor::SymmetricMatrix { n }
    }

    pub fn circle(grid: usize, fiber: ModelDescriptor) -> Self {
        ModelDescriptor::CircleFunction {
            grid,
            fiber: Box::new(fiber),
        }
    }

    pub fn direct_sum(parts: Vec<ModelDescriptor>) -> Self {
        ModelDescriptor::DirectSum { parts }
    }

    /// The continuous symmetric-matrix-valued counterexample algebra on the circle.
    pub fn symmetric_circle(grid: usize) -> Self {
        Self::circle(grid, Self::symmetric(2))
    }

    pub fn validate(&self) -> Result<()> {
        self.validate_inner(false)
    }

    fn validate_inner(&self, inside_circle: bool) -> Result<()> {
        match self {
            ModelDescriptor::FullMatrix { n } | ModelDescriptor::SymmetricMatrix { n } => {
                if *n == 0 {
                    return Err(Error::InvalidDescriptor("matrix dimension n must be >= 1".into()));
                }
                Ok(())
            }
            ModelDescriptor::CircleFunction { grid, fiber } => {
                if inside_circle {
                    return Err(Error::InvalidDescriptor(
                        "circle models cannot be nested inside other circle or direct-sum models".into(),
                    ));
                }
                if *grid < 8 || grid % 2 != 0 {
                    return Err(Error::InvalidDescriptor(format!(
                        "grid size N must be even and >= 8, got {grid}"
                    )));
                }
                fiber.validate_inner(true)
            }
            ModelDescriptor::DirectSum { parts } => {
                if parts.is_empty() {
                    return Err(Error::InvalidDescriptor("direct sum needs at least one part".into()));
                }
                parts.iter().try_for_each(|p| p.validate_inner(true))
            }
        }
    }

    fn collect_blocks(&self, out: &mut Vec<BlockShape>) {
        match self {
            ModelDescriptor::FullMatrix { n } => out.push(BlockShape { dim: *n, symmetric: false }),
            ModelDescriptor::SymmetricMatrix { n } => out.push(BlockShape { dim: *n, symmetric: true }),
            ModelDescriptor::CircleFunction { grid, fiber } => {
                let mut fiber_blocks = Vec::new();
                fiber.collect_blocks(&mut fiber_blocks);
                for _ in 0..*grid {
                    out.extend_from_slice(&fiber_blocks);
                }
            }
            ModelDescriptor::DirectSum { parts } => parts.iter().for_each(|p| p.collect_blocks(out)),
        }
    }
}

/// Shape of one matrix block.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockShape {
    pub dim: usize,
    pub symmetric: bool,
}

impl BlockShape {
    /// Complex dimension of the block.
    pub fn complex_dim(&self) -> usize {
        if self.symmetric {
            self.dim * (self.dim + 1) / 2
        } else {
            self.dim * self.dim
        }
    }

    /// Free entries `(i, j)`; for symmetric blocks only `i <= j`.
    fn free_entries(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let n = self.dim;
        let symmetric = self.symmetric;
        (0..n).flat_map(move |i| (0..n).filter(move |&j| !symmetric || i <= j).map(move |j| (i, j)))
    }
}

/// A validated model with its block layout.
#[derive(Debug, PartialEq)]
pub struct Model {
    descriptor: ModelDescriptor,
    blocks: Vec<BlockShape>,
    grid: Option<usize>,
    fiber: Option<Arc<Model>>,
}

/// Validates a descriptor and builds its model.
pub fn build_model(descriptor: &ModelDescriptor) -> Result<Arc<Model>> {
    Model::build(descriptor)
}

impl Model {
    pub fn build(descriptor: &ModelDescriptor) -> Result<Arc<Model>> {
        descriptor.validate()?;
        let mut blocks = Vec::new();
        descriptor.collect_blocks(&mut blocks);
        let (grid, fiber) = match descriptor {
            ModelDescriptor::CircleFunction { grid, fiber } => (Some(*grid), Some(Model::build(fiber)?)),
            _ => (None, None),
        };
        Ok(Arc::new(Model {
            descriptor: descriptor.clone(),
            blocks,
            grid,
            fiber,
        }))
    }

    pub fn descriptor(&self) -> &ModelDescriptor {
        &self.descriptor
    }

    pub fn blocks(&self) -> &[BlockShape] {
        &self.blocks
    }

    pub fn is_circle(&self) -> bool {
        self.grid.is_some()
    }

    pub fn grid_size(&self) -> Option<usize> {
        self.grid
    }

    /// Fiber model of a circle model.
    pub fn fiber(&self) -> Option<&Arc<Model>> {
        self.fiber.as_ref()
    }

    /// Number of blocks per grid point (all blocks for non-circle models).
    pub fn blocks_per_point(&self) -> usize {
        match self.grid {
            Some(n) => self.blocks.len() / n,
            None => self.blocks.len(),
        }
    }

    /// Grid points `lambda_k` on the unit circle.
    pub fn grid_points(&self) -> Vec<Complex64> {
        match self.grid {
            Some(n) => (0..n)
                .map(|k| Complex64::from_polar(1.0, 2.0 * PI * k as f64 / n as f64))
                .collect(),
            None => Vec::new(),
        }
    }

    pub fn complex_dim(&self) -> usize {
        self.blocks.iter().map(BlockShape::complex_dim).sum()
    }

    /// Dimension over the reals (twice the complex dimension).
    pub fn real_dim(&self) -> usize {
        2 * self.complex_dim()
    }

    /// Real dimension of the self-adjoint part.
    pub fn selfadjoint_dim(&self) -> usize {
        self.complex_dim()
    }

    pub fn zero(self: &Arc<Self>) -> Element {
        let blocks = self.blocks.iter().map(|b| CMat::zeros(b.dim, b.dim)).collect();
        Element::from_blocks_unchecked(self.clone(), blocks)
    }

    pub fn unit(self: &Arc<Self>) -> Element {
        let blocks = self.blocks.iter().map(|b| CMat::identity(b.dim, b.dim)).collect();
        Element::from_blocks_unchecked(self.clone(), blocks)
    }

    /// Real coordinates: for each block and free entry, the real and imaginary parts.
    pub fn real_coords(&self, x: &Element) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.real_dim());
        for (shape, block) in self.blocks.iter().zip(x.blocks()) {
            for (i, j) in shape.free_entries() {
                let z = block[(i, j)];
                out.push(z.re);
                out.push(z.im);
            }
        }
        out
    }

    pub fn from_real_coords(self: &Arc<Self>, coords: &[f64]) -> Element {
        assert_eq!(coords.len(), self.real_dim(), "real coordinate vector has wrong length");
        let mut it = coords.chunks_exact(2);
        let blocks = self
            .blocks
            .iter()
            .map(|shape| {
                let mut m = CMat::zeros(shape.dim, shape.dim);
                for (i, j) in shape.free_entries() {
                    let pair = it.next().expect("length checked");
                    let z = Complex64::new(pair[0], pair[1]);
                    m[(i, j)] = z;
                    if shape.symmetric {
                        m[(j, i)] = z;
                    }
                }
                m
            })
            .collect();
        Element::from_blocks_unchecked(self.clone(), blocks)
    }

    /// Canonical complex basis: matrix units (symmetrized in symmetric blocks).
    pub fn complex_basis(self: &Arc<Self>) -> Vec<Element> {
        let mut out = Vec::with_capacity(self.complex_dim());
        for (k, shape) in self.blocks.iter().enumerate() {
            for (i, j) in shape.free_entries() {
                let mut blocks: Vec<CMat> = self.blocks.iter().map(|b| CMat::zeros(b.dim, b.dim)).collect();
                blocks[k][(i, j)] = c(1.0);
                if shape.symmetric {
                    blocks[k][(j, i)] = c(1.0);
                }
                out.push(Element::from_blocks_unchecked(self.clone(), blocks));
            }
        }
        out
    }

    /// Canonical basis of the real vector space, matching `real_coords`.
    pub fn real_basis(self: &Arc<Self>) -> Vec<Element> {
        self.complex_basis()
            .into_iter()
            .flat_map(|b| {
                let ib = b.scale_complex(I);
                [b, ib]
            })
            .collect()
    }

    /// Canonical real basis of the self-adjoint part, dual to `selfadjoint_coords`.
    pub fn selfadjoint_basis(self: &Arc<Self>) -> Vec<Element> {
        let mut out = Vec::with_capacity(self.selfadjoint_dim());
        let zeros = || -> Vec<CMat> { self.blocks.iter().map(|b| CMat::zeros(b.dim, b.dim)).collect() };
        for (k, shape) in self.blocks.iter().enumerate() {
            for (i, j) in shape.free_entries() {
                if shape.symmetric && i > j {
                    continue;
                }
                if i == j {
                    let mut blocks = zeros();
                    blocks[k][(i, i)] = c(1.0);
                    out.push(Element::from_blocks_unchecked(self.clone(), blocks));
                } else if i < j {
                    let mut blocks = zeros();
                    blocks[k][(i, j)] = c(1.0);
                    blocks[k][(j, i)] = c(1.0);
                    out.push(Element::from_blocks_unchecked(self.clone(), blocks));
                    if !shape.symmetric {
                        let mut blocks = zeros();
                        blocks[k][(i, j)] = I;
                        blocks[k][(j, i)] = -I;
                        out.push(Element::from_blocks_unchecked(self.clone(), blocks));
                    }
                }
            }
        }
        out
    }

    /// Coordinates of a self-adjoint element in `selfadjoint_basis`.
    /// The anti-self-adjoint part of the argument is ignored.
    pub fn selfadjoint_coords(&self, x: &Element) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.selfadjoint_dim());
        for (shape, block) in self.blocks.iter().zip(x.blocks()) {
            for (i, j) in shape.free_entries() {
                if i == j {
                    out.push(block[(i, i)].re);
                } else if i < j {
                    let z = (block[(i, j)] + block[(j, i)].conj()) * 0.5;
                    out.push(z.re);
                    if !shape.symmetric {
                        out.push(z.im);
                    }
                }
            }
        }
        out
    }

    pub fn from_selfadjoint_coords(self: &Arc<Self>, coords: &[f64]) -> Element {
        let basis = self.selfadjoint_basis();
        assert_eq!(coords.len(), basis.len(), "self-adjoint coordinate vector has wrong length");
        basis
            .iter()
            .zip(coords)
            .fold(self.zero(), |acc, (b, &t)| acc + b.scale(t))
    }

    /// Builds a circle-model element by sampling a fiber-valued function at the grid points.
    pub fn circle_element(self: &Arc<Self>, f: impl Fn(Complex64) -> Element) -> Result<Element> {
        let fiber = self.fiber.as_ref().ok_or(Error::NotCircleModel)?;
        let mut blocks = Vec::with_capacity(self.blocks.len());
        for lambda in self.grid_points() {
            let value = f(lambda);
            if !crate::element::same_model_arc(value.model(), fiber) {
                return Err(Error::ModelMismatch);
            }
            blocks.extend(value.into_blocks());
        }
        Ok(Element::from_blocks_unchecked(self.clone(), blocks))
    }

    /// The constant function with the given fiber value.
    pub fn constant(self: &Arc<Self>, value: &Element) -> Result<Element> {
        self.circle_element(|_| value.clone())
    }

    /// Value of a circle-model element at grid index `k`, as a fiber element.
    pub fn fiber_value(&self, x: &Element, k: usize) -> Result<Element> {
        let fiber = self.fiber.as_ref().ok_or(Error::NotCircleModel)?;
        let per = self.blocks_per_point();
        let blocks = x.blocks()[k * per..(k + 1) * per].to_vec();
        Ok(Element::from_blocks_unchecked(fiber.clone(), blocks))
    }
}

fn gaussian_block(rng: &mut ChaCha8Rng, shape: &BlockShape) -> CMat {
    let n = shape.dim;
    let mut m = CMat::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = StandardNormal.sample(rng);
            m[(i, j)] = Complex64::new(re, im);
        }
    }
    if shape.symmetric {
        m = (&m + m.transpose()) * c(0.5);
    }
    m
}

/// Hermitian Gaussian block; real symmetric in symmetric blocks.
fn gaussian_selfadjoint_block(rng: &mut ChaCha8Rng, shape: &BlockShape) -> CMat {
    let g = gaussian_block(rng, shape);
    if shape.symmetric {
        let re = g.map(|z| c(z.re));
        (&re + re.transpose()) * c(0.5)
    } else {
        (&g + g.adjoint()) * c(0.5)
    }
}

fn rng_for(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn normalized(x: Element, scale: f64) -> Element {
    let norm = x.norm();
    if scale == 0.0 || norm == 0.0 {
        return x.model().zero();
    }
    x.scale(scale / norm)
}

/// Gaussian element with independent blocks, normalized to norm `scale`.
pub fn random_element(model: &Arc<Model>, seed: u64, scale: f64) -> Element {
    let mut rng = rng_for(seed);
    let blocks = model.blocks.iter().map(|s| gaussian_block(&mut rng, s)).collect();
    normalized(Element::from_blocks_unchecked(model.clone(), blocks), scale)
}

const CIRCLE_HARMONICS: usize = 3;

/// Random self-adjoint element of norm `scale`.
///
/// Matrix models use the Gaussian Hermitian ensemble (real symmetric in
/// symmetric blocks). Circle models use a trigonometric polynomial of degree
/// three with random self-adjoint fiber coefficients, so the sample is a
/// continuous function on the circle.
pub fn random_selfadjoint(model: &Arc<Model>, seed: u64, scale: f64) -> Element {
    let mut rng = rng_for(seed);
    let raw = match (&model.fiber, model.grid) {
        (Some(fiber), Some(_)) => {
            let coeffs: Vec<Vec<CMat>> = (0..2 * CIRCLE_HARMONICS + 1)
                .map(|_| fiber.blocks.iter().map(|s| gaussian_selfadjoint_block(&mut rng, s)).collect())
                .collect();
            let fiber = fiber.clone();
            model
                .circle_element(|lambda| {
                    let theta = lambda.arg();
                    let blocks = (0..fiber.blocks.len())
                        .map(|b| {
                            let mut m = coeffs[0][b].clone();
                            for h in 1..=CIRCLE_HARMONICS {
                                let t = h as f64 * theta;
                                m += &coeffs[2 * h - 1][b] * c(t.cos() / h as f64);
                                m += &coeffs[2 * h][b] * c(t.sin() / h as f64);
                            }
                            m
                        })
                        .collect();
                    Element::from_blocks_unchecked(fiber.clone(), blocks)
                })
                .expect("circle model has a fiber")
        }
        _ => {
            let blocks = model
                .blocks
                .iter()
                .map(|s| gaussian_selfadjoint_block(&mut rng, s))
                .collect();
            Element::from_blocks_unchecked(model.clone(), blocks)
        }
    };
    normalized(raw, scale)
}

/// Random unitary `exp(i h)` with `h = random_selfadjoint(seed, scale)`.
/// Always lies in the principal component.
pub fn random_unitary_scaled(model: &Arc<Model>, seed: u64, scale: f64) -> Element {
    random_selfadjoint(model, seed, scale).exp_i()
}

/// Random unitary with generator of norm pi.
pub fn random_unitary(model: &Arc<Model>, seed: u64) -> Element {
    random_unitary_scaled(model, seed, PI)
}
