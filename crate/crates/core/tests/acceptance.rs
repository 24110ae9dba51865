//! Acceptance suite: one line per criterion, nonzero exit if any criterion fails.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use twistframe::frames::{
    bessel_bound_estimate, biorthogonality_check, decaying_coefficients, hilbertian_probe, independence_probe,
    DEFAULT_RADII,
};
use twistframe::grid::{inner_product, make_grid, sample_separable, Factor1D, GridSpec, SampledFunction};
use twistframe::heisenberg::{
    bracket_coefficient, biorthogonality_h, canonical_dual_h, condition_c_residual_h, default_group_spec,
    example_factory, g_function, g_function_default, gram_h_default, h_inner, left_translate, plancherel_prerequisite,
    GRoute, HFunction, HLatticeIndex, DEFAULT_R,
};
use twistframe::spectral::{
    canonical_dual, condition_c_residual, reciprocal_probe, weight_of, DEFAULT_EPS, DEFAULT_EPS_SCHEDULE, DEFAULT_M,
};
use twistframe::twisted::{
    kernel_of_translate, synthesize_and_norm, twisted_translate, CoefficientField, LatticeIndex,
};
use twistframe::weyl::{
    compose, hs_inner_sources, twisted_convolution, weyl_kernel, weyl_kernel_on, wide_xi_grid, KernelRoute,
    KernelSource, PlancherelCertificate,
};
use twistframe::Error;

type Outcome = Result<(bool, String), Box<dyn std::error::Error>>;
type Run = (i32, Vec<u8>, Vec<u8>);
type Criterion = (u32, &'static str, fn() -> Outcome);
type GroupCriterion = (u32, &'static str, fn(&PlancherelCertificate) -> Outcome);

fn chi(a: f64, b: f64) -> Factor1D {
    Factor1D::indicator(a, b)
}

fn plane(f: Factor1D, g: Factor1D) -> SampledFunction {
    sample_separable(vec![f, g], GridSpec::default_phase_plane()).unwrap()
}

fn unit_square() -> SampledFunction {
    plane(chi(0.0, 1.0), chi(0.0, 1.0))
}

fn rect() -> SampledFunction {
    plane(chi(0.0, 2.0), chi(0.0, 1.0))
}

fn gaussian() -> SampledFunction {
    plane(Factor1D::gaussian(PI), Factor1D::gaussian(PI))
}

fn psi() -> SampledFunction {
    let sq = unit_square();
    sq.add(&twisted_translate(&sq, LatticeIndex::new(1, 0)).unwrap()).unwrap()
}

fn ex(id: u32) -> HFunction {
    example_factory(id, None, &default_group_spec()).unwrap()
}

/// `2π Σ_r e^{−2π²(λ+r)²}`: bracket of the id=1 Gaussian example.
fn g00_closed(lam: f64) -> f64 {
    2.0 * PI * (-20..=20).map(|r| (-2.0 * PI * PI * (lam + r as f64).powi(2)).exp()).sum::<f64>()
}

fn src(phi: &SampledFunction) -> KernelSource {
    KernelSource::new(phi, 1.0, KernelRoute::Auto).unwrap()
}

fn c1() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let draw = |rng: &mut ChaCha8Rng| {
        Factor1D::gaussian(rng.gen_range(1.0..4.0))
            .shifted(rng.gen_range(-0.5..0.5))
            .modulated(rng.gen_range(-0.5..0.5))
    };
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let f = plane(draw(&mut rng), draw(&mut rng));
        let g = plane(draw(&mut rng), draw(&mut rng));
        let (kf, kg) = (
            KernelSource::new(&f, 1.0, KernelRoute::Separable)?,
            KernelSource::new(&g, 1.0, KernelRoute::Separable)?,
        );
        let (a, b) = (wide_xi_grid(&f, 1.0, 1e-14)?, wide_xi_grid(&g, 1.0, 1e-14)?);
        let xi = if a.len() >= b.len() { a } else { b };
        let hs = hs_inner_sources(&kf, &kg, &xi)?;
        let ip = inner_product(&f, &g)?;
        worst = worst.max((hs - ip).norm() / ip.norm());
    }
    Ok((worst <= 1e-6, format!("max relative error {worst:.2e} (tol 1e-6)")))
}

fn c2() -> Outcome {
    let a = make_grid(4.0, 16, false)?;
    let spec = GridSpec::phase_plane(a, a);
    let f = sample_separable(vec![Factor1D::gaussian(PI), Factor1D::gaussian(PI)], spec.clone())?;
    let g = sample_separable(vec![Factor1D::gaussian(2.0), Factor1D::gaussian(4.0)], spec)?;
    let fg = twisted_convolution(&f, &g)?;
    let inner = make_grid(4.0, 16, false)?;
    let outer = make_grid(8.0, 16, false)?;
    let kfg = weyl_kernel_on(&fg, 1.0, KernelRoute::Direct, &inner)?;
    let kf = weyl_kernel_on(&f, 1.0, KernelRoute::Direct, &inner)?;
    let kg = weyl_kernel_on(&g, 1.0, KernelRoute::Direct, &outer)?;
    let err = kfg.sub(&compose(&kf, &kg)?)?.hs_norm_sq().sqrt();
    let rel = err / kfg.hs_norm_sq().sqrt();
    Ok((rel <= 1e-4, format!("HS relative error {rel:.2e} (tol 1e-4)")))
}

fn c3() -> Outcome {
    let mut worst: f64 = 0.0;
    for phi in [unit_square(), gaussian()] {
        let k = weyl_kernel(&phi, 1.0)?;
        for idx in LatticeIndex::window(3) {
            let kt = kernel_of_translate(&k, idx)?;
            let t = twisted_translate(&phi, idx)?;
            let direct = weyl_kernel_on(&t, 1.0, KernelRoute::Auto, kt.xi_grid())?;
            worst = worst.max(kt.sup_diff(&direct)?);
        }
    }
    Ok((worst <= 1e-12, format!("sup error {worst:.2e} over |k|,|l| <= 3 (tol 1e-12)")))
}

fn c4() -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, phi) in [("unit-square", unit_square()), ("rect-2x1", rect()), ("gaussian", gaussian()), ("psi", psi())] {
        let w = weight_of(&phi, DEFAULT_M)?;
        let n = phi.norm_sq();
        let dev = (w.mass() - n).abs() / n;
        ok &= dev <= 1e-2;
        parts.push(format!("{name} {dev:.1e}"));
    }
    let w = weight_of(&unit_square(), DEFAULT_M)?;
    let sup = w.values().iter().map(|v| (v - 1.0).abs()).fold(0.0, f64::max);
    ok &= sup <= 1e-2;
    Ok((ok, format!("relative mass error: {}; unit square sup|w-1| {sup:.1e}", parts.join(", "))))
}

fn c5() -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, phi) in [("unit-square", unit_square()), ("rect-2x1", rect())] {
        let r = condition_c_residual(&src(&phi), 4, DEFAULT_M)?;
        ok &= r.satisfied() && r.max_residual() <= 1e-10;
        parts.push(format!("{name} {:.1e}", r.max_residual()));
    }
    let r = condition_c_residual(&src(&gaussian()), 2, 32)?;
    let r1 = r.residual(1).unwrap_or(0.0);
    ok &= !r.satisfied() && r1 > 10.0 * r.tail_bound;
    parts.push(format!("gaussian R_1 {r1:.3e} vs tail {:.1e}", r.tail_bound));
    Ok((ok, parts.join(", ")))
}

fn c6() -> Outcome {
    let phi = rect();
    let w = weight_of(&phi, DEFAULT_M)?;
    let d = canonical_dual(&phi, &w, DEFAULT_EPS)?;
    let dev = biorthogonality_check(&d, &phi, 3)?;
    let p = psi();
    let wp = weight_of(&p, DEFAULT_M)?;
    let refused = matches!(canonical_dual(&p, &wp, DEFAULT_EPS), Err(Error::DualRefused { .. }));
    let probe = reciprocal_probe(wp.values(), &DEFAULT_EPS_SCHEDULE);
    let ok = dev <= 1e-2 && refused && !probe.finite();
    Ok((
        ok,
        format!(
            "rect biorthogonality {dev:.2e} (tol 1e-2); psi refused {refused}, 1/w probe {:?}",
            probe.verdict
        ),
    ))
}

fn c7() -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, phi) in [("unit-square", unit_square()), ("rect-2x1", rect()), ("psi", psi())] {
        let w = weight_of(&phi, DEFAULT_M)?;
        let cc = condition_c_residual(&src(&phi), 2, DEFAULT_M)?;
        let rep = bessel_bound_estimate(&phi, &DEFAULT_RADII, Some(&w), Some(&cc), 1e-2)?;
        let mono = rep.lambda_max.windows(2).all(|p| p[1] >= p[0] - 1e-10);
        let bounded = rep.lambda_max.iter().all(|&l| l <= w.sup() + 1e-2);
        ok &= cc.satisfied() && mono && bounded;
        let lm: Vec<String> = rep.lambda_max.iter().map(|l| format!("{l:.4}")).collect();
        parts.push(format!("{name} lambda_max [{}] sup w {:.4}", lm.join(" "), w.sup()));
    }
    Ok((ok, parts.join("; ")))
}

fn c8() -> Outcome {
    let sq = unit_square();
    let w = weight_of(&sq, DEFAULT_M)?;
    let rep = independence_probe(&sq, &DEFAULT_RADII, Some(&w))?;
    let sq_ok = rep.sigma_min.iter().all(|s| (s - 1.0).abs() <= 1e-3);
    let p = psi();
    let wp = weight_of(&p, DEFAULT_M)?;
    let rp = independence_probe(&p, &DEFAULT_RADII, Some(&wp))?;
    let decreasing = rp.lambda_min.windows(2).all(|m| m[1] < m[0]);
    let toward_zero = rp.lambda_min.last().is_some_and(|&l| l < 0.1 * rp.lambda_min[0]);
    let no_null = rp.null_residual.iter().all(|&r| r >= 1e-3);
    let lm: Vec<String> = rp.lambda_min.iter().map(|l| format!("{l:.2e}")).collect();
    let nr: Vec<String> = rp.null_residual.iter().map(|l| format!("{l:.2e}")).collect();
    Ok((
        sq_ok && decreasing && toward_zero && no_null,
        format!(
            "unit square sigma_min {:?}; psi lambda_min [{}] null residual [{}]",
            rep.sigma_min,
            lm.join(" "),
            nr.join(" ")
        ),
    ))
}

fn c9() -> Outcome {
    let phi = rect();
    let w = weight_of(&phi, DEFAULT_M)?;
    let cc = condition_c_residual(&src(&phi), 2, DEFAULT_M)?;
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let mut c = CoefficientField::new();
        for _ in 0..rng.gen_range(1..=8) {
            let idx = LatticeIndex::new(rng.gen_range(-4..=4), rng.gen_range(-4..=4));
            c.insert(idx, Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
        }
        let s = synthesize_and_norm(&c, &phi, &w, Some(&cc))?;
        let lhs = s.f.norm_sq();
        worst = worst.max((lhs - s.rhs).abs() / lhs);
    }
    Ok((worst <= 1e-2, format!("max relative error {worst:.2e} (tol 1e-2)")))
}

fn c10() -> Outcome {
    let c = decaying_coefficients(3);
    let cuts = [0, 1, 2, 3];
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, phi, with_dual) in [
        ("unit-square", unit_square(), true),
        ("rect-2x1", rect(), true),
        ("psi", psi(), false),
    ] {
        let w = weight_of(&phi, DEFAULT_M)?;
        let cc = condition_c_residual(&src(&phi), 2, DEFAULT_M)?;
        let dual = if with_dual { Some(canonical_dual(&phi, &w, DEFAULT_EPS)?) } else { None };
        let rep = hilbertian_probe(&phi, &w, &c, &cuts, dual.as_ref(), Some(&cc))?;
        ok &= rep.all_hold() && !rep.cauchy.is_empty();
        let mut line = format!("{name} witnesses hold {}", rep.all_hold());
        if let Some(d) = &dual {
            ok &= rep.dual.as_ref().is_some_and(|v| !v.is_empty());
            let wd = weight_of(d, DEFAULT_M)?;
            let dev = w
                .values()
                .iter()
                .zip(wd.values())
                .filter(|(&a, _)| a > 0.1)
                .map(|(a, b)| (a * b - 1.0).abs())
                .fold(0.0, f64::max);
            ok &= dev <= 5e-2;
            line.push_str(&format!(", dual weight |w~ w - 1| {dev:.1e}"));
        }
        parts.push(line);
    }
    Ok((ok, parts.join("; ")))
}

fn c11() -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for id in [1, 4] {
        let r = condition_c_residual_h(&ex(id), 2, 2, 2)?;
        ok &= r.satisfied() && r.max_residual() <= 1e-10;
        parts.push(format!("ex{id} residual {:.1e}", r.max_residual()));
    }
    let e2 = ex(2);
    let v2 = h_inner(&e2, &left_translate(&e2, HLatticeIndex::new(0, 0, 1)))?;
    ok &= (v2.re - 1.520346).abs() <= 1e-4 && v2.im.abs() <= 1e-4;
    parts.push(format!("ex2 {:.6}", v2.re));
    let e5 = ex(5);
    let v5 = h_inner(&e5, &left_translate(&e5, HLatticeIndex::new(1, 0, 0)))?;
    ok &= (v5.re - 0.589490).abs() <= 1e-2 && v5.im.abs() <= 1e-2;
    parts.push(format!("ex5 {:.6}", v5.re));
    let r6 = condition_c_residual_h(&ex(6), 2, 2, 2)?;
    ok &= !r6.satisfied();
    parts.push(format!("ex6 residual {:.3} violated {}", r6.max_residual(), !r6.satisfied()));
    Ok((ok, parts.join(", ")))
}

fn c12(cert: &PlancherelCertificate) -> Outcome {
    let mut worst: f64 = 0.0;
    for id in [1, 2] {
        let phi = ex(id);
        for k in -2..=2 {
            for l in -2..=2 {
                let g = g_function_default(&phi, (k, l), cert)?;
                for m in -2..=2 {
                    worst = worst.max(bracket_coefficient(&phi, HLatticeIndex::new(k, l, m), &g)?.discrepancy);
                }
            }
        }
    }
    let phi = ex(1);
    let g = g_function(&phi, (0, 0), &[0.5], DEFAULT_R, GRoute::Reduced, Some(cert))?;
    let g05 = g.values()[0].re;
    let mean = g_function_default(&phi, (0, 0), cert)?.mean().re;
    let norm = phi.norm_sq();
    let ok = worst <= 1e-3
        && (g05 - 0.09038).abs() <= 1e-4
        && (g05 - g00_closed(0.5)).abs() <= 1e-4
        && (mean - norm).abs() <= 1e-2;
    Ok((
        ok,
        format!("route discrepancy {worst:.1e} (tol 1e-3); G00(0.5) {g05:.6}; mean G00 {mean:.6} vs norm {norm:.6}"),
    ))
}

fn c13(cert: &PlancherelCertificate) -> Outcome {
    let phi = ex(1);
    let d = canonical_dual_h(&phi, DEFAULT_EPS, cert)?;
    let dev = biorthogonality_h(&d.function, &phi, 2)?;
    let gd = g_function_default(&d.function, (0, 0), cert)?;
    let recip = gd
        .values()
        .iter()
        .zip(d.g00.values())
        .map(|(a, b)| (a.re * b.re - 1.0).abs())
        .fold(0.0, f64::max);
    Ok((
        dev <= 1e-3 && recip <= 5e-2,
        format!("biorthogonality {dev:.2e} (tol 1e-3); |G00~ G00 - 1| {recip:.1e} (tol 5e-2)"),
    ))
}

fn c14(cert: &PlancherelCertificate) -> Outcome {
    let phi = ex(1);
    let grid = g_function_default(&phi, (0, 0), cert)?.max_re();
    let at_peak = g_function(&phi, (0, 0), &[0.0, 1.0], DEFAULT_R, GRoute::Reduced, Some(cert))?.max_re();
    let bound = grid.max(at_peak) + 1e-2;
    let mut ok = true;
    let mut lm = Vec::new();
    for r in 1..=4 {
        let l = gram_h_default(&phi, r)?.lambda_max();
        ok &= l <= bound;
        lm.push(format!("{l:.4}"));
    }
    Ok((ok, format!("lambda_max [{}] <= {bound:.4}", lm.join(" "))))
}

fn run_reproduce(out: &Path, n: u32) -> Result<Run, Box<dyn std::error::Error>> {
    let o = Command::new(env!("CARGO_BIN_EXE_twistframe"))
        .args(["reproduce", &format!("example-{n}"), "--out"])
        .arg(out)
        .env("RUST_LOG", "error")
        .output()?;
    let report = std::fs::read(out.join("report.json"))?;
    Ok((o.status.code().unwrap_or(-1), o.stdout, report))
}

fn c15() -> Outcome {
    let base: PathBuf = std::env::temp_dir().join(format!("twistframe-acceptance-{}", std::process::id()));
    let mut ok = true;
    let mut table = Vec::new();
    for n in 1..=6u32 {
        let out = base.join(format!("example-{n}"));
        let (code_a, stdout_a, rep_a) = run_reproduce(&out, n)?;
        let (code_b, stdout_b, rep_b) = run_reproduce(&out, n)?;
        let v: serde_json::Value = serde_json::from_slice(&rep_a)?;
        let status = v["verdicts"]
            .as_array()
            .and_then(|a| a.iter().find(|x| x["name"] == "condition-c"))
            .and_then(|x| x["status"].as_str())
            .unwrap_or("missing")
            .to_string();
        let want = if n <= 4 { "condition C satisfied" } else { "condition C violated" };
        ok &= code_a == 0 && code_b == 0 && status == want && rep_a == rep_b && stdout_a == stdout_b;
        let word = status.rsplit(' ').next().unwrap_or("?");
        table.push(format!("{n}:{word}{}", if rep_a == rep_b { "" } else { "(nondeterministic)" }));
    }
    std::fs::remove_dir_all(&base).ok();
    Ok((ok, format!("verdicts {}; reports byte-identical {ok}", table.join(" "))))
}

fn record(n: u32, name: &str, f: &dyn Fn() -> Outcome) -> bool {
    let start = Instant::now();
    let (pass, detail) = match f() {
        Ok(v) => v,
        Err(e) => (false, format!("error: {e}")),
    };
    let secs = start.elapsed().as_secs_f64();
    let tag = if pass { "PASS" } else { "FAIL" };
    println!("criterion {n:2} {tag} {name} [{secs:.1}s]: {detail}");
    pass
}

fn main() {
    let mut failed = Vec::new();
    let phase_plane: [Criterion; 11] = [
        (1, "weyl-parseval", c1),
        (2, "homomorphism", c2),
        (3, "kernel-translation-law", c3),
        (4, "weight-mass", c4),
        (5, "condition-c-phase-plane", c5),
        (6, "canonical-dual", c6),
        (7, "bessel-bound", c7),
        (8, "independence", c8),
        (9, "norm-identity", c9),
        (10, "hilbertian-witnesses", c10),
        (11, "heisenberg-examples", c11),
    ];
    for (n, name, f) in phase_plane {
        if !record(n, name, &f) {
            failed.push(n);
        }
    }
    let start = Instant::now();
    let cert = plancherel_prerequisite(&default_group_spec());
    println!("scaling-Plancherel prerequisite [{:.1}s]", start.elapsed().as_secs_f64());
    let group: [GroupCriterion; 3] = [
        (12, "bracket-identity", c12),
        (13, "heisenberg-dual", c13),
        (14, "heisenberg-bessel", c14),
    ];
    for (n, name, f) in group {
        let pass = match &cert {
            Ok(c) => record(n, name, &|| f(c)),
            Err(e) => {
                println!("criterion {n:2} FAIL {name}: prerequisite failed: {e}");
                false
            }
        };
        if !pass {
            failed.push(n);
        }
    }
    if !record(15, "cli-determinism", &c15) {
        failed.push(15);
    }
    if failed.is_empty() {
        println!("acceptance: all 15 criteria pass");
    } else {
        println!("acceptance: failing criteria {failed:?}");
        std::process::exit(1);
    }
}
