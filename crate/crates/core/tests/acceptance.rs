//! Acceptance suite: one line per criterion, non-zero exit if any fails.
//! Reference values are computed here with plain matrix arithmetic
//! (associative products, nalgebra's exponential, the Penrose conditions) rather
//! than through the library's Jordan-level routines.

use jbstar::isometry::{self, OneParameterFamily, StructuredIsometry, TripleCheckOptions};
use jbstar::linalg::{self, CMat};
use jbstar::model::{self, random_selfadjoint, random_unitary, random_unitary_scaled};
use jbstar::report::{self, RunConfig};
use jbstar::spectral;
use jbstar::unitary::{self, UChainFactorization, Verdict};
use jbstar::{Element, Model, ModelDescriptor, Tolerances};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::sync::Arc;
use std::time::Instant;

type Outcome = Result<String, String>;

fn tol() -> Tolerances {
    Tolerances::default()
}

fn build(d: ModelDescriptor) -> Arc<Model> {
    Model::build(&d).unwrap()
}

fn ensure(ok: bool, msg: impl Into<String>) -> std::result::Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn blockwise_max(a: &Element, b: &Element, f: impl Fn(&CMat, &CMat) -> f64) -> f64 {
    a.blocks().iter().zip(b.blocks()).map(|(x, y)| f(x, y)).fold(0.0, f64::max)
}

fn spectral_distance(x: &CMat, y: &CMat) -> f64 {
    linalg::spectral_norm(&(x - y))
}

fn criterion_1() -> Outcome {
    let models = [
        ModelDescriptor::full(2),
        ModelDescriptor::full(3),
        ModelDescriptor::full(4),
        ModelDescriptor::symmetric(2),
        ModelDescriptor::symmetric(3),
        ModelDescriptor::circle(64, ModelDescriptor::full(2)),
    ];
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for (i, d) in models.into_iter().enumerate() {
        let cfg = RunConfig { seed: 100 + i as u64, samples: 200, ..RunConfig::new(d.clone()) };
        let r = report::cmd_verify(&cfg).map_err(|e| e.to_string())?;
        for c in &r.checks {
            worst = worst.max(c.max_residual);
            ensure(c.pass && c.max_residual <= 1e-9, format!("{} failed on {d:?}: {:.3e}", c.name, c.max_residual))?;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    ensure(secs < 60.0, format!("identity suites took {secs:.1}s"))?;
    Ok(format!("6 models x 13 identities x 200 samples, max relative residual {worst:.2e}, {secs:.1}s"))
}

fn criterion_2() -> Outcome {
    let mut worst: f64 = 0.0;
    for d in [ModelDescriptor::full(3), ModelDescriptor::symmetric(3)] {
        let m = build(d);
        for seed in 0..100u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            // u_{j+1} = e^{i g_j} u_j e^{i g_j}: consecutive points stay well inside distance 2
            let mut path = vec![m.unit()];
            for _ in 0..5 {
                let g = random_selfadjoint(&m, rng.random(), rng.random_range(0.1..0.7));
                let e = g.exp_i();
                let last = path.last().unwrap();
                path.push(e.matmul(last).matmul(&e));
            }
            let chain = unitary::factor_path(&path, &tol()).map_err(|e| e.to_string())?;
            let r = unitary::evaluate_u_chain(&chain).distance(path.last().unwrap());
            worst = worst.max(r);
        }
    }
    ensure(worst <= 1e-8, format!("endpoint residual {worst:.3e}"))?;
    Ok(format!("200 paths of length 5, max endpoint residual {worst:.2e}"))
}

fn criterion_3() -> Outcome {
    let mut worst_exp: f64 = 0.0;
    let mut worst_sa: f64 = 0.0;
    let mut worst_sym: f64 = 0.0;
    let mut max_distance: f64 = 0.0;
    let limit = 2.0 * (0.75f64).asin();
    for (k, d) in [ModelDescriptor::full(3), ModelDescriptor::symmetric(3)].into_iter().enumerate() {
        let m = build(d);
        let symmetric = k == 1;
        for seed in 0..250u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
            let u = random_unitary(&m, rng.random());
            // ‖u − u e^{ig}‖ = 2 sin(‖g‖/2) ≤ 1.5
            let g = random_selfadjoint(&m, rng.random(), rng.random_range(0.0..limit));
            let v = if symmetric {
                let half = g.scale(0.5).exp_i();
                half.matmul(&u).matmul(&half)
            } else {
                u.matmul(&g.exp_i())
            };
            let dist = u.distance(&v);
            max_distance = max_distance.max(dist);
            let h = unitary::factor_step(&u, &v, &tol()).map_err(|e| e.to_string())?;
            // M(u) ≅ M via x ↦ u* x, so exp_u(ih) = u·exp(i u* h) in matrix terms
            let recon = u
                .blocks()
                .iter()
                .zip(h.blocks())
                .zip(v.blocks())
                .map(|((ub, hb), vb)| spectral_distance(&(ub * (ub.adjoint() * hb * Complex64::i()).exp()), vb))
                .fold(0.0, f64::max);
            worst_exp = worst_exp.max(recon);
            let star_u = u.matmul(&h.adjoint()).matmul(&u);
            worst_sa = worst_sa.max(star_u.distance(&h));
            if symmetric {
                worst_sym = worst_sym.max(h.blocks().iter().map(|b| (b - b.transpose()).iter().map(|z| z.norm()).fold(0.0, f64::max)).fold(0.0, f64::max));
            }
        }
    }
    ensure(max_distance <= 1.5 + 1e-12, format!("sampled distance {max_distance}"))?;
    ensure(worst_exp <= 1e-8, format!("exp_u(ih) residual {worst_exp:.3e}"))?;
    ensure(worst_sa <= 1e-9, format!("h^(*u) residual {worst_sa:.3e}"))?;
    ensure(worst_sym <= 1e-9, format!("symmetry residual {worst_sym:.3e}"))?;
    Ok(format!(
        "500 pairs (max distance {max_distance:.3}): exp residual {worst_exp:.2e}, self-adjointness {worst_sa:.2e}, symmetry {worst_sym:.2e}"
    ))
}

/// A regular element `W D V*` (`W D Wᵀ` in symmetric blocks) with singular
/// values in `[0.3, 3]`; the rank is reduced unless `invertible`.
fn regular_element(m: &Arc<Model>, rng: &mut ChaCha8Rng, invertible: bool) -> Element {
    let w = random_unitary(m, rng.random());
    let v = random_unitary(m, rng.random());
    let keep = if invertible { usize::MAX } else { rng.random_range(1..=2) };
    let shapes = m.blocks().to_vec();
    let values: Vec<Vec<f64>> = shapes.iter().map(|s| (0..s.dim).map(|_| rng.random_range(0.3..3.0)).collect()).collect();
    w.map_blocks_indexed(|k, wb| {
        let d = CMat::from_fn(wb.nrows(), wb.ncols(), |i, j| {
            if i == j && i < keep {
                Complex64::new(values[k][i], 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        });
        if shapes[k].symmetric {
            wb * d * wb.transpose()
        } else {
            wb * d * v.blocks()[k].adjoint()
        }
    })
}

fn criterion_4() -> Outcome {
    let models = [
        ModelDescriptor::full(3),
        ModelDescriptor::symmetric(3),
        ModelDescriptor::direct_sum(vec![ModelDescriptor::full(3), ModelDescriptor::symmetric(3)]),
        ModelDescriptor::full(4),
    ];
    let mut worst: f64 = 0.0;
    let mut count = 0;
    let mut invertible_count = 0;
    let t = tol();
    for (i, d) in models.into_iter().enumerate() {
        let m = build(d);
        let mut rng = ChaCha8Rng::seed_from_u64(4000 + i as u64);
        for j in 0..50 {
            let invertible = j % 2 == 0;
            let a = regular_element(&m, &mut rng, invertible);
            let dagger = spectral::generalized_inverse(&a, &t).map_err(|e| e.to_string())?;
            let scale = a.norm().max(1.0) * dagger.norm().max(1.0);
            // Q(a)(a†) = a a†* a
            let q = a.matmul(&dagger.adjoint()).matmul(&a);
            let mut r = q.distance(&a) / a.norm();
            // a^[-1]* must satisfy the four Penrose conditions of the Moore–Penrose inverse
            let mp = blockwise_max(&a, &dagger, |ab, db| {
                let x = db.adjoint();
                let (ax, xa) = (ab * &x, &x * ab);
                spectral_distance(&(&ax * ab), ab)
                    .max(spectral_distance(&(&xa * &x), &x))
                    .max(spectral_distance(&ax.adjoint(), &ax))
                    .max(spectral_distance(&xa.adjoint(), &xa))
            });
            r = r.max(mp / scale);
            let e = spectral::range_tripotent(&a, &t).map_err(|e| e.to_string())?;
            r = r.max(spectral::tripotent_residual(e.element()));
            let pos = spectral::peirce_two_positivity(&a, &e).map_err(|e| e.to_string())?;
            ensure(pos.holds(1e-8 * a.norm().max(1.0)), format!("Peirce-2 positivity failed: {pos:?}"))?;
            if invertible {
                invertible_count += 1;
                let re = e.element();
                r = r.max(re.matmul(&re.adjoint()).distance(&m.unit()));
                let inv_star = a.map_blocks(|b| b.clone().try_inverse().unwrap().adjoint());
                r = r.max(inv_star.distance(&dagger) / scale);
                ensure(e.rank() == m.blocks().iter().map(|b| b.dim).sum::<usize>(), "range tripotent of invertible element is not unitary")?;
            }
            worst = worst.max(r);
            count += 1;
        }
    }
    ensure(worst <= 1e-8, format!("max residual {worst:.3e}"))?;
    Ok(format!("{count} regular elements ({invertible_count} invertible), max residual {worst:.2e}"))
}

fn power_of_lambda(m: &Arc<Model>, k: i32) -> Element {
    report::winding_witness(m, k).unwrap()
}

fn criterion_5() -> Outcome {
    let t = tol();
    let scalar = build(ModelDescriptor::circle(256, ModelDescriptor::full(1)));
    let w0 = unitary::winding_number(&scalar.unit(), &t).map_err(|e| e.to_string())?;
    let w1 = unitary::winding_number(&power_of_lambda(&scalar, 1), &t).map_err(|e| e.to_string())?;
    let w2 = unitary::winding_number(&power_of_lambda(&scalar, 2), &t).map_err(|e| e.to_string())?;
    ensure((w0, w1, w2) == (0, 1, 2), format!("scalar windings {w0}, {w1}, {w2}"))?;
    let sym = build(ModelDescriptor::symmetric_circle(256));
    let w = power_of_lambda(&sym, 1);
    let ws = unitary::winding_number(&w, &t).map_err(|e| e.to_string())?;
    ensure(ws == 1, format!("winding of diag(λ,1) is {ws}"))?;
    let mut nonzero = 0;
    for (i, m) in [scalar, sym, build(ModelDescriptor::circle(256, ModelDescriptor::full(2)))].iter().enumerate() {
        for seed in 0..34u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(5000 + 100 * i as u64 + seed);
            let len = rng.random_range(1..=4);
            let hs = (0..len).map(|_| random_selfadjoint(m, rng.random(), rng.random_range(0.5..3.0))).collect();
            let chain = UChainFactorization::from_unit(m, hs);
            if unitary::winding_number(&unitary::evaluate_u_chain(&chain), &t).map_err(|e| e.to_string())? != 0 {
                nonzero += 1;
            }
        }
    }
    ensure(nonzero == 0, format!("{nonzero} chains with nonzero winding"))?;
    Ok("windings 0/1/2 on the scalar circle, 1 for diag(λ,1); 102 random chains all winding 0".into())
}

fn criterion_6() -> Outcome {
    let t = tol();
    let mut worst: f64 = 0.0;
    let mut pairs = 0;
    for d in [ModelDescriptor::circle(64, ModelDescriptor::full(2)), ModelDescriptor::symmetric_circle(64)] {
        let m = build(d);
        for seed in 0..50u64 {
            let u = random_unitary_scaled(&m, 6000 + 2 * seed, 2.5);
            let w = random_unitary_scaled(&m, 6001 + 2 * seed, 2.5);
            let cu = unitary::in_principal_component(&u, &t).map_err(|e| e.to_string())?;
            let cw = unitary::in_principal_component(&w, &t).map_err(|e| e.to_string())?;
            ensure(cu.is_principal() && cw.is_principal(), format!("sample not certified: {}", cu.justification))?;
            let (cu, cw) = (cu.certificate.unwrap(), cw.certificate.unwrap());
            let star = unitary::adjoint_certificate(&cw);
            worst = worst.max(star.evaluate().distance(&w.adjoint()));
            let action = unitary::u_action_certificate(&cw, &cu).map_err(|e| e.to_string())?;
            worst = worst.max(action.evaluate().distance(&w.matmul(&u).matmul(&w)));
            pairs += 1;
        }
    }
    ensure(worst <= 1e-8, format!("certificate residual {worst:.3e}"))?;
    let m = build(ModelDescriptor::circle(64, ModelDescriptor::full(2)));
    let mut mixed = 0;
    for seed in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(6500 + seed);
        let k = rng.random_range(-2..=2);
        let u = random_unitary_scaled(&m, rng.random(), 1.5).matmul(&power_of_lambda(&m, k));
        let w = random_unitary_scaled(&m, rng.random(), 2.5);
        ensure(unitary::in_principal_component(&w, &t).map_err(|e| e.to_string())?.is_principal(), "w not certified")?;
        let wu = unitary::winding_number(&u, &t).map_err(|e| e.to_string())?;
        let image = w.matmul(&u).matmul(&w);
        let wi = unitary::winding_number(&image, &t).map_err(|e| e.to_string())?;
        ensure(wu == k as i64 && wi == wu, format!("winding {wi} of U_w(u) vs {wu} (k = {k})"))?;
        mixed += 1;
    }
    Ok(format!("{pairs} certified pairs, certificate residual {worst:.2e}; {mixed} mixed pairs keep their winding"))
}

fn criterion_7() -> Outcome {
    let models = [
        build(ModelDescriptor::full(3)),
        build(ModelDescriptor::symmetric(3)),
        build(ModelDescriptor::direct_sum(vec![ModelDescriptor::full(2), ModelDescriptor::symmetric(2)])),
        build(ModelDescriptor::circle(32, ModelDescriptor::full(2))),
    ];
    let mut worst: f64 = 0.0;
    for seed in 0..50u64 {
        let m = &models[seed as usize % models.len()];
        let mut rng = ChaCha8Rng::seed_from_u64(7000 + seed);
        let h = random_selfadjoint(m, rng.random(), rng.random_range(0.1..3.0));
        // the family is sampled through the matrix exponential, not the library's
        let hb = h.clone();
        let family = OneParameterFamily::with_default_samples(move |t| {
            hb.map_blocks(|b| (b * Complex64::new(0.0, t)).exp())
        });
        let rec = isometry::stone_parameter(&family, &tol()).map_err(|e| e.to_string())?;
        worst = worst.max(rec.distance(&h));
    }
    ensure(worst <= 1e-6, format!("‖ĥ − h‖ = {worst:.3e}"))?;
    Ok(format!("50 families, max ‖ĥ − h‖ {worst:.2e}"))
}

fn isometry_models() -> Vec<Arc<Model>> {
    vec![
        build(ModelDescriptor::direct_sum(vec![ModelDescriptor::full(2), ModelDescriptor::full(2)])),
        build(ModelDescriptor::direct_sum(vec![ModelDescriptor::full(2), ModelDescriptor::symmetric(2)])),
        build(ModelDescriptor::direct_sum(vec![
            ModelDescriptor::full(1),
            ModelDescriptor::full(1),
            ModelDescriptor::full(2),
        ])),
        build(ModelDescriptor::direct_sum(vec![ModelDescriptor::symmetric(2), ModelDescriptor::symmetric(2)])),
        build(ModelDescriptor::full(3)),
    ]
}

/// Reference evaluation of a structured isometry with associative products.
fn reference_apply(iso: &StructuredIsometry, u: &Element) -> Element {
    let y = iso.phi().apply(u);
    let conj = |k: &Element, x: &Element, sign: f64| {
        let e = k.map_blocks(|b| (b * Complex64::new(0.0, sign)).exp());
        e.matmul(x).matmul(&e)
    };
    let a = iso.prefactors().iter().fold(y.clone(), |acc, k| conj(k, &acc, 1.0));
    let b = iso.prefactors().iter().fold(y, |acc, k| conj(k, &acc, -1.0)).adjoint();
    let p = iso.p();
    let q = &p.model().unit() - p;
    // central p: p∘x = p x
    &p.matmul(&a) + &q.matmul(&b)
}

fn criterion_8() -> Outcome {
    let t = tol();
    let models = isometry_models();
    let (mut wp, mut wphi, mut wapply, mut wref) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for seed in 0..50u64 {
        let m = &models[seed as usize % models.len()];
        let iso = isometry::random_structured_isometry(m, 8000 + seed, 3, &t).map_err(|e| e.to_string())?;
        let delta = |u: &Element| iso.apply(u);
        let rec = isometry::decompose(&delta, m, &t).map_err(|e| e.to_string())?;
        wp = wp.max(rec.p().distance(iso.p())).max(jbstar::algebra::projection_residual(rec.p()));
        let chain = UChainFactorization::from_unit(m, iso.prefactors().to_vec());
        let delta0 = |u: &Element| chain.apply_inverse(&iso.apply(u));
        let unital = isometry::decompose_unital_isometry(&delta0, m, &t).map_err(|e| e.to_string())?;
        wp = wp.max(unital.p.distance(iso.p()));
        let mut rng = ChaCha8Rng::seed_from_u64(8500 + seed);
        for _ in 0..100 {
            let x = model::random_element(m, rng.random(), 1.0);
            wphi = wphi.max(unital.phi.apply(&x).distance(&iso.phi().apply(&x)));
            let u = random_unitary(m, rng.random());
            let expected = reference_apply(&iso, &u);
            wref = wref.max(iso.apply(&u).distance(&expected));
            wapply = wapply.max(rec.apply(&u).distance(&expected));
        }
    }
    ensure(wref <= 1e-10, format!("apply differs from reference evaluation by {wref:.3e}"))?;
    ensure(wp <= 1e-8, format!("p residual {wp:.3e}"))?;
    ensure(wphi <= 1e-6, format!("Φ residual {wphi:.3e}"))?;
    ensure(wapply <= 1e-6, format!("apply residual {wapply:.3e}"))?;
    Ok(format!("50 isometries: p {wp:.2e}, Φ {wphi:.2e}, apply∘decompose {wapply:.2e}"))
}

fn criterion_9() -> Outcome {
    let t = tol();
    let models = isometry_models();
    let (mut worst, mut min_k) = (0.0f64, f64::INFINITY);
    let (mut vacuous, mut members) = (0, 0);
    let mut inequality_failures = 0;
    for i in 0..100u64 {
        let m = &models[i as usize % models.len()];
        let iso = isometry::random_structured_isometry(m, 9000 + i, 3, &t).map_err(|e| e.to_string())?;
        let mut rng = ChaCha8Rng::seed_from_u64(9500 + i);
        let u = random_unitary(m, rng.random());
        let v = loop {
            let e = random_unitary_scaled(m, rng.random(), rng.random_range(0.01..0.25));
            let v = e.matmul(&u).matmul(&e);
            if u.distance(&v) < 0.5 {
                break v;
            }
        };
        let opts = TripleCheckOptions { seed: i, ..Default::default() };
        let r = isometry::verify_inverted_triple_preservation(&|x: &Element| iso.apply(x), &u, &v, opts)
            .map_err(|e| e.to_string())?;
        worst = worst.max(r.residual);
        min_k = min_k.min(r.k_constant);
        members += r.members;
        if r.vacuous {
            vacuous += 1;
        }
        if !r.inequality_holds {
            inequality_failures += 1;
        }
    }
    ensure(worst <= 1e-8, format!("residual {worst:.3e}"))?;
    ensure(min_k > 1.0, format!("K = {min_k}"))?;
    ensure(inequality_failures == 0, format!("{inequality_failures} pairs violate the sampled inequality"))?;
    Ok(format!(
        "100 pairs: residual {worst:.2e}, min K {min_k:.3}; {members} sampled band members, {vacuous} vacuous pairs"
    ))
}

fn criterion_10() -> Outcome {
    let t = tol();
    let mut lines = Vec::new();
    for d in [ModelDescriptor::circle(256, ModelDescriptor::full(1)), ModelDescriptor::symmetric_circle(256)] {
        let m = build(d);
        let ex = isometry::build_nonextendable_example(&m, &t).map_err(|e| e.to_string())?;
        let check = ex.check_pairs(200, 10).map_err(|e| e.to_string())?;
        ensure(check.max_defect <= 1e-9, format!("isometry defect {:.3e}", check.max_defect))?;
        ensure(check.max_cross_gap <= 1e-9, format!("cross distance gap {:.3e}", check.max_cross_gap))?;
        ensure(!ex.is_extendable().map_err(|e| e.to_string())?, "check_extendable returned true")?;
        // the two per-component maps differ by an honest amount: T₂ = i·T₁
        let x = random_unitary(&m, 3);
        let [t1, t2] = ex.maps();
        ensure((t2.apply(&x).distance(&t1.apply(&x).scale_complex(Complex64::i()))) < 1e-12, "T₂ ≠ i·T₁")?;
        ensure(unitary::in_principal_component(ex.witness(), &t).map_err(|e| e.to_string())?.verdict == Verdict::CertifiedFalse, "witness classified principal")?;
        lines.push(format!("defect {:.1e}, cross gap {:.1e}", check.max_defect, check.max_cross_gap));
    }
    Ok(format!("scalar: {}; symmetric: {}; not extendable in both", lines[0], lines[1]))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("identity suites", criterion_1),
        ("factorization round-trip", criterion_2),
        ("lemma step", criterion_3),
        ("spectral suite", criterion_4),
        ("winding classification", criterion_5),
        ("quadratic-subset closure", criterion_6),
        ("Stone recovery", criterion_7),
        ("isometry round-trip", criterion_8),
        ("inverted-triple preservation", criterion_9),
        ("non-extendable example", criterion_10),
    ];
    let start = Instant::now();
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let outcome = std::panic::catch_unwind(run).unwrap_or_else(|_| Err("panicked".into()));
        let secs = t.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {:>2} PASS  {name} ({secs:.1}s): {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name} ({secs:.1}s): {detail}", i + 1);
            }
        }
    }
    println!("acceptance: {} of 10 passed in {:.1}s", 10 - failed, start.elapsed().as_secs_f64());
    if failed > 0 {
        std::process::exit(1);
    }
}
