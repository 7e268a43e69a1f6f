//! Report-producing commands behind the `jbstar` binary: identity suites,
//! factorization, component classification and isometry decomposition.

use crate::algebra::{self, formulas, IsotopeContext};
use crate::element::Element;
use crate::error::{Error, Result};
use crate::isometry::{self, StructuredIsometry, StructuredIsometryJson};
use crate::model::{self, Model, ModelDescriptor};
use crate::spectral::{self, Tripotent};
use crate::tolerance::Tolerances;
use crate::unitary::{self, UChainFactorization};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use std::fmt::Write as _;
use std::sync::Arc;

/// Inputs shared by all commands.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub model: ModelDescriptor,
    pub seed: u64,
    pub samples: usize,
    pub tolerances: Tolerances,
    /// Replaces the involution by transposition in the identity suites; the
    /// suites must then fail.
    pub corrupt_involution: bool,
}

impl RunConfig {
    pub fn new(model: ModelDescriptor) -> Self {
        RunConfig { model, seed: 0, samples: 200, tolerances: Tolerances::default(), corrupt_involution: false }
    }

    pub fn validate(&self) -> Result<()> {
        if self.samples == 0 {
            return Err(Error::Precondition("sample count must be at least 1".into()));
        }
        let t = &self.tolerances;
        if [t.identity, t.invertible, t.symmetric, t.margin, t.branch, t.stone].iter().any(|&x| !(x > 0.0)) {
            return Err(Error::Precondition("tolerances must be positive".into()));
        }
        self.model.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub samples: usize,
    pub max_residual: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl CheckResult {
    fn new(name: &str, samples: usize, max_residual: f64, tolerance: f64) -> Self {
        CheckResult { name: name.into(), samples, max_residual, tolerance, pass: max_residual <= tolerance }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Report {
    pub command: String,
    pub model: ModelDescriptor,
    pub seed: u64,
    pub checks: Vec<CheckResult>,
    #[serde(default, skip_serializing_if = "Value::is_null")]
    pub data: Value,
    pub pass: bool,
}

impl Report {
    fn new(command: &str, config: &RunConfig, checks: Vec<CheckResult>, data: Value) -> Self {
        let pass = checks.iter().all(|c| c.pass);
        Report { command: command.into(), model: config.model.clone(), seed: config.seed, checks, data, pass }
    }

    pub fn exit_code(&self) -> i32 {
        if self.pass {
            0
        } else {
            1
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization cannot fail")
    }

    pub fn to_markdown(&self) -> String {
        let mut out = String::new();
        let model = serde_json::to_string(&self.model).unwrap_or_default();
        let _ = writeln!(out, "# jbstar {}\n", self.command);
        let _ = writeln!(out, "- model: `{model}`");
        let _ = writeln!(out, "- seed: {}", self.seed);
        let _ = writeln!(out, "- result: **{}**\n", if self.pass { "pass" } else { "FAIL" });
        if !self.checks.is_empty() {
            out.push_str("| check | samples | max residual | tolerance | pass |\n|---|---:|---:|---:|:---:|\n");
            for c in &self.checks {
                let _ = writeln!(
                    out,
                    "| {} | {} | {:.3e} | {:.1e} | {} |",
                    c.name,
                    c.samples,
                    c.max_residual,
                    c.tolerance,
                    if c.pass { "yes" } else { "**no**" }
                );
            }
        }
        if !self.data.is_null() {
            let _ = writeln!(out, "\n```json\n{}\n```", serde_json::to_string_pretty(&self.data).unwrap_or_default());
        }
        out
    }
}

/// Exit code for an error: 2 for usage/configuration problems, 1 otherwise.
pub fn error_exit_code(err: &Error) -> i32 {
    match err {
        Error::InvalidDescriptor(_) | Error::Json(_) | Error::Shape(_) | Error::ModelMismatch | Error::Precondition(_) => 2,
        _ => 1,
    }
}

/// Product and involution used by the identity suites.
struct Ops {
    star: fn(&Element) -> Element,
}

impl Ops {
    fn prod(a: &Element, b: &Element) -> Element {
        a.jordan(b)
    }

    fn u(&self, a: &Element, x: &Element) -> Element {
        formulas::u_quadratic(Self::prod, a, x)
    }

    fn triple(&self, x: &Element, y: &Element, z: &Element) -> Element {
        formulas::triple(Self::prod, self.star, x, y, z)
    }
}

fn transpose_involution(a: &Element) -> Element {
    a.map_blocks(|b| b.transpose())
}

struct Suite<'a> {
    model: &'a Arc<Model>,
    rng: ChaCha8Rng,
    samples: usize,
    tol: f64,
    ops: Ops,
    checks: Vec<CheckResult>,
}

impl Suite<'_> {
    fn element(&mut self) -> Element {
        let scale = self.rng.random_range(0.5..2.0);
        model::random_element(self.model, self.rng.random(), scale)
    }

    fn selfadjoint(&mut self) -> Element {
        let scale = self.rng.random_range(0.5..2.0);
        model::random_selfadjoint(self.model, self.rng.random(), scale)
    }

    fn unitary(&mut self) -> Element {
        model::random_unitary(self.model, self.rng.random())
    }

    fn run(&mut self, name: &str, mut residual: impl FnMut(&mut Self) -> f64) {
        let worst = (0..self.samples).map(|_| residual(self)).fold(0.0, f64::max);
        let worst = if worst.is_nan() { f64::INFINITY } else { worst };
        self.checks.push(CheckResult::new(name, self.samples, worst, self.tol));
    }
}

/// Power `a^n` computed by `a^{k+1} = a∘a^k`.
fn jordan_powers(a: &Element, n: usize) -> Vec<Element> {
    let mut powers = vec![a.model().unit(), a.clone()];
    for k in 2..=n {
        powers.push(a.jordan(&powers[k - 1]));
    }
    powers
}

/// A tripotent of random rank: the spectral projection of `a` onto its large
/// singular values.
fn random_tripotent(a: &Element, tol: &Tolerances) -> Result<Tripotent> {
    let threshold = 0.5 * a.norm();
    let e = spectral::triple_functional_calculus_real(|t| if t > threshold { 1.0 } else { 0.0 }, a)?;
    Tripotent::new(e, tol)
}

fn relative(residual: f64, scale: f64) -> f64 {
    residual / scale.max(f64::MIN_POSITIVE)
}

/// Runs all algebraic identity suites. Residuals are relative to the natural
/// scale of each identity.
pub fn cmd_verify(config: &RunConfig) -> Result<Report> {
    config.validate()?;
    let model = Model::build(&config.model)?;
    let tol = config.tolerances;
    let star: fn(&Element) -> Element = if config.corrupt_involution { transpose_involution } else { Element::adjoint };
    let mut s = Suite {
        model: &model,
        rng: ChaCha8Rng::seed_from_u64(config.seed),
        samples: config.samples,
        tol: tol.identity,
        ops: Ops { star },
        checks: Vec::new(),
    };

    s.run("jordan_identity", |s| {
        let (a, b) = (s.element(), s.element());
        let a2 = a.jordan(&a);
        let r = a.jordan(&b).jordan(&a2).distance(&a.jordan(&b.jordan(&a2)));
        relative(r, a.norm().powi(3) * b.norm())
    });
    s.run("power_associativity", |s| {
        let a = s.element();
        let p = jordan_powers(&a, 12);
        let mut worst: f64 = 0.0;
        for m in 1..=6 {
            for n in 1..=6 {
                let r = p[m + n].distance(&p[m].jordan(&p[n]));
                worst = worst.max(relative(r, a.norm().powi((m + n) as i32)));
            }
        }
        worst
    });
    s.run("fundamental_identity", |s| {
        let (a, b, x) = (s.element(), s.element(), s.element());
        let lhs = s.ops.u(&s.ops.u(&a, &b), &x);
        let rhs = s.ops.u(&a, &s.ops.u(&b, &s.ops.u(&a, &x)));
        relative(lhs.distance(&rhs), a.norm().powi(4) * b.norm().powi(2) * x.norm())
    });
    s.run("fundamental_identity_chain", |s| {
        let len = s.rng.random_range(1..=4);
        let chain: Vec<Element> = (0..len).map(|_| s.element()).collect();
        let (b, x) = (s.element(), s.element());
        let apply_chain = |ops: &Ops, y: &Element| chain.iter().fold(y.clone(), |acc, a| ops.u(a, &acc));
        let apply_rev = |ops: &Ops, y: &Element| chain.iter().rev().fold(y.clone(), |acc, a| ops.u(a, &acc));
        let lhs = s.ops.u(&apply_chain(&s.ops, &b), &x);
        let rhs = apply_chain(&s.ops, &s.ops.u(&b, &apply_rev(&s.ops, &x)));
        let scale: f64 = chain.iter().map(|a| a.norm().powi(4)).product::<f64>() * b.norm().powi(2) * x.norm();
        relative(lhs.distance(&rhs), scale)
    });
    s.run("jbstar_axiom", |s| {
        let a = s.element();
        let n = a.norm();
        relative((s.ops.u(&a, &(s.ops.star)(&a)).norm() - n.powi(3)).abs(), n.powi(3))
    });
    s.run("jb_axioms", |s| {
        let (h, k) = (s.selfadjoint(), s.selfadjoint());
        let h2 = h.jordan(&h);
        let square = (h2.norm() - h.norm().powi(2)).abs();
        let monotone = (h2.norm() - (&h2 + &k.jordan(&k)).norm()).max(0.0);
        relative(square.max(monotone), h.norm().powi(2))
    });
    s.run("unitary_identities", |s| {
        let u = s.unitary();
        let us = (s.ops.star)(&u);
        let r1 = s.ops.u(&u, &us).distance(&u);
        let r2 = s.ops.u(&u, &us.jordan(&us)).distance(&u.model().unit());
        r1.max(r2)
    });
    s.run("non_expansiveness", |s| {
        let (a, b, c) = (s.element(), s.element(), s.element());
        let bound = a.norm() * b.norm() * c.norm();
        relative((s.ops.triple(&a, &b, &c).norm() - bound).max(0.0), bound)
    });
    s.run("involution_u_chain", |s| {
        let len = s.rng.random_range(1..=3);
        let chain: Vec<Element> = (0..len).map(|_| s.element()).collect();
        let a0 = s.element();
        let star = s.ops.star;
        let lhs = star(&chain.iter().fold(a0.clone(), |acc, a| s.ops.u(a, &acc)));
        let rhs = chain.iter().fold(star(&a0), |acc, a| s.ops.u(&star(a), &acc));
        let scale: f64 = chain.iter().map(|a| a.norm().powi(2)).product::<f64>() * a0.norm();
        relative(lhs.distance(&rhs), scale)
    });
    s.run("exponential_law", |s| {
        let a = s.element();
        let (t1, t2) = (s.rng.random_range(-1.0..1.0), s.rng.random_range(-1.0..1.0));
        let lhs = a.scale(t1).exp().jordan(&a.scale(t2).exp());
        let rhs = a.scale(t1 + t2).exp();
        relative(lhs.distance(&rhs), ((t1.abs() + t2.abs()) * a.norm()).exp())
    });
    s.run("peirce_sum_and_contractivity", |s| {
        let a = s.element();
        let x = s.element();
        let Ok(e) = random_tripotent(&a, &tol) else { return f64::INFINITY };
        let parts: Vec<Element> = (0..=2).map(|k| e.peirce(k, &x)).collect::<Result<_>>().unwrap_or_default();
        if parts.len() != 3 {
            return f64::INFINITY;
        }
        let sum = parts.iter().fold(x.model().zero(), |acc, p| acc + p.clone());
        let contraction = parts.iter().map(|p| (p.norm() - x.norm()).max(0.0)).fold(0.0, f64::max);
        relative(sum.distance(&x).max(contraction), x.norm())
    });
    s.run("isotope_triple_coincidence", |s| {
        let u = s.unitary();
        let (x, y, z) = (s.element(), s.element(), s.element());
        let Ok(ctx) = IsotopeContext::unitary(&u, &tol) else { return f64::INFINITY };
        let star = s.ops.star;
        let iso = formulas::triple(|a, b| ctx.product(a, b), |a| ctx.involution(a).expect("unitary isotope"), &x, &y, &z);
        let plain = formulas::triple(Ops::prod, star, &x, &y, &z);
        relative(iso.distance(&plain), x.norm() * y.norm() * z.norm())
    });
    let basis = model.complex_basis();
    s.run("isotope_unit", |s| {
        let c = &s.model.unit().scale(2.0) + &s.element().scale(0.5);
        let Ok(ctx) = algebra::isotope(&c, &tol) else { return f64::INFINITY };
        let picks = basis.len().min(16);
        (0..picks)
            .map(|_| {
                let x = &basis[s.rng.random_range(0..basis.len())];
                ctx.product(ctx.unit(), x).distance(x)
            })
            .fold(0.0, f64::max)
    });

    Ok(Report::new("verify", config, s.checks, Value::Null))
}

/// JSON accepted by `factor`: a unitary element, or a path of unitaries.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum FactorInput {
    Path { path: Vec<Element> },
    Unitary(Element),
}

/// Factors a unitary (certified principal) or a path into a `U`-chain.
pub fn cmd_factor(config: &RunConfig, input: &str) -> Result<Report> {
    config.validate()?;
    let tol = &config.tolerances;
    let input: FactorInput = serde_json::from_str(input)?;
    let (target, chain) = match input {
        FactorInput::Path { path } => {
            let chain = unitary::factor_path(&path, tol)?;
            let target = path.last().cloned().ok_or_else(|| Error::Precondition("empty path".into()))?;
            (target, chain)
        }
        FactorInput::Unitary(u) => {
            let unit = u.model().unit();
            if u.distance(&unit) <= tol.identity {
                (u.clone(), UChainFactorization::empty(u.model()))
            } else {
                let membership = unitary::in_principal_component(&u, tol)?;
                match (membership.verdict, membership.certificate) {
                    (unitary::Verdict::CertifiedTrue, Some(cert)) => (u, cert),
                    (_, _) => match membership.winding {
                        Some(w) if w != 0 => return Err(Error::NonZeroWinding { winding: w }),
                        _ => return Err(Error::Inconclusive(membership.justification)),
                    },
                }
            }
        }
    };
    let residual = chain.evaluate().distance(&target);
    let check = CheckResult::new("chain_reconstruction", 1, residual, unitary::RECONSTRUCTION_TOL);
    let data = json!({ "chain": chain, "length": chain.len(), "reconstruction_residual": residual });
    Ok(Report::new("factor", config, vec![check], data))
}

/// Winding number (circle models) and principal-component verdict of a unitary.
pub fn cmd_classify(config: &RunConfig, input: &str) -> Result<Report> {
    config.validate()?;
    let tol = &config.tolerances;
    let u = Element::from_json(input, tol.symmetric)?;
    let unitarity = unitary::unitary_defect(&u);
    let membership = unitary::in_principal_component(&u, tol)?;
    let check = CheckResult::new("unitarity", 1, unitarity, unitary::RECONSTRUCTION_TOL.max(tol.identity));
    let mut checks = vec![check];
    if let Some(residual) = membership.residual {
        checks.push(CheckResult::new("certificate_reconstruction", 1, residual, unitary::RECONSTRUCTION_TOL));
    }
    let data = json!({
        "winding": membership.winding,
        "verdict": membership.verdict,
        "principal": membership.is_principal(),
        "justification": membership.justification,
        "certificate": membership.certificate,
    });
    Ok(Report::new("classify", config, checks, data))
}

/// Which structured isometry `decompose` treats as a black box.
#[derive(Debug, Clone)]
pub enum IsometrySource {
    Identity,
    Conjugation,
    /// Random structured isometry with up to this many prefactors.
    Random { max_prefactors: usize },
    Json(String),
}

/// Decomposes a structured isometry from its action on unitaries and compares
/// the recovered data with the original.
pub fn cmd_decompose(config: &RunConfig, source: &IsometrySource) -> Result<Report> {
    config.validate()?;
    let tol = &config.tolerances;
    let model = Model::build(&config.model)?;
    let original = match source {
        IsometrySource::Identity => StructuredIsometry::identity(&model),
        IsometrySource::Conjugation => StructuredIsometry::conjugation(&model),
        IsometrySource::Random { max_prefactors } => {
            isometry::random_structured_isometry(&model, config.seed, *max_prefactors, tol)?
        }
        IsometrySource::Json(text) => {
            let value: StructuredIsometryJson = serde_json::from_str(text)?;
            StructuredIsometry::from_json_value(value, tol)?
        }
    };
    if original.source_unit().is_some() || original.target_unit().is_some() {
        return Err(Error::Precondition("decompose expects an isometry in standard frames".into()));
    }
    let source_model = original.source().clone();
    let delta = |u: &Element| original.apply(u);
    let recovered = isometry::decompose(&delta, &source_model, tol)?;

    // Φ is compared on the unital part, where it is free of prefactor gauge.
    let chain = UChainFactorization::from_unit(original.target(), original.prefactors().to_vec());
    let delta0 = |u: &Element| chain.apply_inverse(&original.apply(u));
    let unital = isometry::decompose_unital_isometry(&delta0, &source_model, tol)?;

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0xa5a5);
    let apply_residual = (0..config.samples)
        .map(|_| {
            let u = model::random_unitary(&source_model, rng.random());
            recovered.apply(&u).distance(&original.apply(&u))
        })
        .fold(0.0, f64::max);
    let checks = vec![
        CheckResult::new("p_recovery", 1, recovered.p().distance(original.p()), unitary::RECONSTRUCTION_TOL),
        CheckResult::new("phi_recovery", 1, unital.phi.entry_distance(original.phi()), isometry::RECOVERY_TOL),
        CheckResult::new("apply_round_trip", config.samples, apply_residual, isometry::RECOVERY_TOL),
        CheckResult::new("unital_verification", 1, unital.verification_residual, isometry::RECOVERY_TOL),
        CheckResult::new("jordan_isomorphism", 1, unital.jordan_defect.max(), isometry::RECOVERY_TOL),
    ];
    let data = json!({ "isometry": recovered.to_json_value(), "prefactor_count": recovered.prefactors().len() });
    Ok(Report::new("decompose", config, checks, data))
}

/// Reads a model descriptor given inline as JSON or as a path to a JSON file.
pub fn parse_model_arg(arg: &str) -> Result<ModelDescriptor> {
    let trimmed = arg.trim_start();
    let text = if trimmed.starts_with('{') {
        arg.to_string()
    } else {
        std::fs::read_to_string(arg).map_err(|e| Error::Precondition(format!("cannot read model file {arg}: {e}")))?
    };
    let descriptor: ModelDescriptor = serde_json::from_str(&text)?;
    descriptor.validate()?;
    Ok(descriptor)
}

/// Circle-model unitary `λ ↦ diag(λ^k, 1, …)` in the first summand of the fiber.
pub fn winding_witness(model: &Arc<Model>, k: i32) -> Result<Element> {
    let fiber = model.fiber().ok_or(Error::NotCircleModel)?.clone();
    model.circle_element(|lambda| {
        fiber.unit().map_blocks_indexed(|j, b| {
            let mut m = b.clone();
            if j == 0 {
                m[(0, 0)] = lambda.powi(k);
            }
            m
        })
    })
}
