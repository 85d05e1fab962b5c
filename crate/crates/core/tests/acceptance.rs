//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
//! exits non-zero if any criterion fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use bicombing_lab::axioms::{check_bicombing_properties, PROPERTIES};
use bicombing_lab::axis::{axis_pipeline, check_sqrt_bound, solve_phi_fixed_point, AxisSolverConfig, AxisStatus};
use bicombing_lab::barycenter::{equivariance_residual, verify_barycenter_lipschitz, Backend, BarycenterRequest};
use bicombing_lab::cli::run_with_threads;
use bicombing_lab::flats::{check_halfplane_monotone, cone_formula_report, nu_profile, sigma_family, verify_flat_strip};
use bicombing_lab::hyperbolicity::{estimate_delta, four_point_delta, quadruple_matrix, slim_relation_report, tight_span_quadruple, DeltaConfig, QuadrupleSpan};
use bicombing_lab::isometry::translation_length;
use bicombing_lab::metric::{sample_points, stream_rng};
use bicombing_lab::spaces::{make_ex22_space, make_ex63_space, make_normed_space, make_shift_space, NormSpec, NormedSpace, ShiftPoint};
use bicombing_lab::toruslab::{torus_report, LatticeAction, TorusConfig};
use bicombing_lab::{Bicombing, Interval, LabError, MetricSpace, ToleranceConfig};
use rand::Rng;

struct Verdict {
    ok: bool,
    detail: String,
}

fn verdict(ok: bool, detail: impl Into<String>) -> Verdict {
    Verdict { ok, detail: detail.into() }
}

fn plane(spec: NormSpec) -> NormedSpace {
    make_normed_space(spec).expect("valid norm")
}

fn grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

fn random_vec(rng: &mut impl Rng, dim: usize, r: f64) -> Vec<f64> {
    (0..dim).map(|_| rng.gen_range(-r..=r)).collect()
}

fn bicombing_axioms() -> Verdict {
    let start = Instant::now();
    let cfg = ToleranceConfig::default().with_samples(10_000).with_seed(1);
    let mut worst: f64 = 0.0;
    let mut violations = 0;
    for spec in [NormSpec::l1(2), NormSpec::linf(2), NormSpec::l2(3)] {
        let r = check_bicombing_properties(&plane(spec), &cfg).unwrap();
        for p in PROPERTIES {
            worst = worst.max(r.summary_f64(&format!("max_residual.{p}")).unwrap());
        }
        violations += r.violations.len();
    }
    let secs = start.elapsed().as_secs_f64();
    verdict(
        worst <= 1e-9 && violations == 0 && secs < 5.0,
        format!("max residual {worst:.2e}, {violations} violations, {secs:.2}s"),
    )
}

fn strip_dichotomy() -> Verdict {
    let x = make_ex22_space();
    let (xi, xp) = (x.xi(), x.xi_prime());
    let (mut on_g, mut on_gbar): (f64, f64) = (0.0, 0.0);
    for s in grid(-1.0, 2.0, 13) {
        for t in grid(0.0, 1.0, 101) {
            let p = x.segment_point(&xi.at(s), &xp.at(s + 1.0), t);
            on_g = on_g.max((p[2] - x.g(p[0], p[1])).abs());
            let q = x.segment_point(&xi.at(s + 1.0), &xp.at(s), t);
            on_gbar = on_gbar.max((q[2] - x.gbar(q[0], q[1])).abs());
        }
    }
    verdict(on_g <= 1e-9 && on_gbar <= 1e-9, format!("graph of g {on_g:.2e}, graph of gbar {on_gbar:.2e}"))
}

fn nu_profile_check() -> Verdict {
    let x = make_ex22_space();
    let rs = grid(-4.0, 4.0, 161);
    let p = nu_profile(&x, &x.xi(), &x.xi_prime(), &rs, &grid(-5.0, 5.0, 101));
    let shape = rs
        .iter()
        .zip(&p.nu)
        .map(|(r, v)| (v - r.abs().max(1.0)).abs())
        .fold(0.0, f64::max);
    verdict(
        p.constancy_residual <= 1e-9 && shape <= 1e-9,
        format!("R-dependence {:.2e}, nu vs max(|r|,1) {shape:.2e}", p.constancy_residual),
    )
}

fn flat_strip() -> Verdict {
    let mut cfg = ToleranceConfig::default().with_samples(1000).with_seed(4);
    cfg.eq_tol = 1e-8;
    let x = make_ex22_space();
    let (xi, xi2) = (x.xi(), x.xi_prime().shifted(1.0));
    let (ra, _) = verify_flat_strip(&x, &xi, &xi2, sigma_family(&x, &xi, &xi2), &cfg, 5.0).unwrap();
    let s = plane(NormSpec::linf(2));
    let a = s.affine_track("a", vec![0.0, 0.0], vec![1.0, 0.0], Interval::LINE);
    let b = s.affine_track("b", vec![0.0, 1.0], vec![1.0, 0.0], Interval::LINE);
    let (rb, _) = verify_flat_strip(&s, &a, &b, sigma_family(&s, &a, &b), &cfg, 5.0).unwrap();
    let emb = ra.summary_f64("max_embedding_residual").unwrap().max(rb.summary_f64("max_embedding_residual").unwrap());
    let tri = ra.summary_f64("norm_triangle_excess").unwrap().max(rb.summary_f64("norm_triangle_excess").unwrap());
    verdict(
        ra.is_clean() && rb.is_clean(),
        format!("embedding residual {emb:.2e}, triangle excess {tri:.2e}"),
    )
}

fn barycenters() -> Verdict {
    let mut mean_err: f64 = 0.0;
    for (k, spec) in [NormSpec::l1(2), NormSpec::linf(2), NormSpec::l2(3)].into_iter().enumerate() {
        let s = plane(spec);
        let dim = s.dim();
        for n in 1..=5usize {
            let reps = if n == 5 { 2 } else { 3 };
            for rep in 0..reps {
                let mut rng = stream_rng(5, "c5-mean", (k * 100 + n * 10 + rep) as u64);
                let tuple: Vec<Vec<f64>> = (0..n).map(|_| random_vec(&mut rng, dim, 5.0)).collect();
                let bar = BarycenterRequest::new(&s, tuple.clone(), Backend::Exact).run().unwrap();
                for c in 0..dim {
                    let mean = tuple.iter().map(|p| p[c]).sum::<f64>() / n as f64;
                    mean_err = mean_err.max((bar[c] - mean).abs());
                }
            }
        }
    }
    let l13 = plane(NormSpec::l1(3));
    let cfg = ToleranceConfig::default().with_seed(5);
    let mut lip_violations = 0;
    for i in 0..500u64 {
        let mut rng = stream_rng(5, "c5-lip", i);
        let xs: Vec<Vec<f64>> = (0..3).map(|_| random_vec(&mut rng, 3, 3.0)).collect();
        let ys: Vec<Vec<f64>> = (0..3).map(|_| random_vec(&mut rng, 3, 3.0)).collect();
        lip_violations += verify_barycenter_lipschitz(&l13, &xs, &ys, Backend::Exact, &cfg).unwrap().violations.len();
    }
    let mut equi: f64 = 0.0;
    let l1 = plane(NormSpec::l1(2));
    let shift = l1.translation(vec![0.7, -1.3]);
    let w = make_ex63_space();
    for i in 0..5u64 {
        let mut rng = stream_rng(5, "c5-equi", i);
        let xs: Vec<Vec<f64>> = (0..4).map(|_| random_vec(&mut rng, 2, 3.0)).collect();
        equi = equi.max(equivariance_residual(&l1, &shift, &xs, Backend::Exact, 1e-9).unwrap());
        let ps = sample_points(&w, 4, 50 + i).unwrap();
        for (z, z2) in [(1, 0), (0, 1), (2, -1)] {
            equi = equi.max(equivariance_residual(&w, &w.lattice(z, z2), &ps, Backend::Exact, 1e-9).unwrap());
        }
    }
    verdict(
        mean_err <= 1e-7 && lip_violations == 0 && equi <= 1e-7,
        format!("mean error {mean_err:.2e}, {lip_violations} Lipschitz violations, equivariance {equi:.2e}"),
    )
}

fn translation_lengths() -> Verdict {
    let (sp, gamma) = make_shift_space();
    let rep = translation_length(&sp, &gamma, &ShiftPoint::zero(), 4096, Some(1.0));
    let shift_ok = (rep.translation_length_estimate - 1.0).abs() <= 1e-6 && rep.bracket_holds(1e-9);
    let w = make_ex63_space();
    let x = [0.0, 0.0, 0.0];
    let mut lattice_err: f64 = 0.0;
    let mut oracle_err: f64 = 0.0;
    for ((z, z2), want) in [((1, 0), 1.0), ((0, 1), 1.0), ((1, 1), 1.0), ((2, 1), 2.0)] {
        let iso = w.lattice(z, z2);
        let est = translation_length(&w, &iso, &x, 4096, None).translation_length_estimate;
        let oracle = w.distance(&x, &iso.power(&x, 256)) / 256.0;
        lattice_err = lattice_err.max((est - want).abs());
        oracle_err = oracle_err.max((est - oracle).abs());
    }
    verdict(
        shift_ok && lattice_err <= 1e-3 && oracle_err <= 1e-3,
        format!(
            "shift |gamma| {:.9}, bracket residual {:.2e}; lattice error {lattice_err:.2e}, oracle gap {oracle_err:.2e}",
            rep.translation_length_estimate, rep.bracket_residual
        ),
    )
}

fn sqrt_bound() -> Verdict {
    let (sp, gamma) = make_shift_space();
    let zero = ShiftPoint::zero();
    let r = check_sqrt_bound(&sp, &gamma, &zero, 4096, 1e-9);
    let cfg = AxisSolverConfig {
        outer_max: 8,
        inner_tol: 1e-9,
        ..AxisSolverConfig::default()
    };
    let (no_conv, trace_ok, last) = match solve_phi_fixed_point(&sp, &gamma, &zero, &cfg) {
        Err(LabError::NoConvergence { trace, .. }) => {
            let ok = trace.iter().all(|&d| d > 0.0) && trace.windows(2).all(|w| w[1] < w[0]);
            (true, ok, trace.last().copied().unwrap_or(f64::NAN))
        }
        _ => (false, false, f64::NAN),
    };
    verdict(
        r.is_clean() && no_conv && trace_ok,
        format!(
            "{} bound violations, max ratio {:.3}; NoConvergence {no_conv}, trace decreasing {trace_ok} (last {last:.3e})",
            r.violations.len(),
            r.summary_f64("max_ratio").unwrap()
        ),
    )
}

fn axis_from_random_starts() -> Verdict {
    let w = make_ex63_space();
    let iso = w.lattice(1, 0);
    let starts = sample_points(&w, 5, 8).unwrap();
    let mut ok = true;
    let mut notes = Vec::new();
    for (i, x) in starts.iter().enumerate() {
        let r = axis_pipeline(&w, &iso, x, &AxisSolverConfig::default(), 10.0, 2000, 80 + i as u64).unwrap();
        let good = r.status == AxisStatus::Converged
            && r.fixed_point_residual <= 1e-8
            && (r.period - 1.0).abs() <= 1e-8
            && r.displacement_residual <= 1e-8
            && r.sigma_line_residual <= 1e-6;
        ok &= good;
        notes.push(format!(
            "start {i}: d_phi {:.1e}, period {:.9}, sigma-line {:.2e}, (iv) on first period {:.2e}",
            r.fixed_point_residual, r.period, r.sigma_line_residual, r.tau_consistency
        ));
    }
    verdict(ok, notes.join("; "))
}

fn legs_by_label(span: &QuadrupleSpan) -> [f64; 4] {
    let mut out = [0.0; 4];
    for (pos, &label) in span.labels.iter().enumerate() {
        out[label] = span.legs[pos];
    }
    out
}

fn permutations() -> Vec<[usize; 4]> {
    let mut out = Vec::new();
    for a in 0..4 {
        for b in 0..4 {
            for c in 0..4 {
                for d in 0..4 {
                    let p = [a, b, c, d];
                    if (0..4).all(|i| p.contains(&i)) {
                        out.push(p);
                    }
                }
            }
        }
    }
    out
}

fn tight_spans() -> Verdict {
    let l15 = plane(NormSpec::l1(5));
    let perms = permutations();
    let (mut real, mut width_gap): (f64, f64) = (0.0, 0.0);
    let mut relabel_breaks = 0;
    for i in 0..1000u64 {
        let mut rng = stream_rng(9, "c9", i);
        let pts: Vec<Vec<f64>> = (0..4).map(|_| random_vec(&mut rng, 5, 1.0)).collect();
        let d = quadruple_matrix(&l15, &pts);
        let span = tight_span_quadruple(&d, 1e-9).unwrap();
        let delta = four_point_delta(&d, 1e-9).unwrap();
        real = real.max(span.realization_residual);
        width_gap = width_gap.max((span.width - delta).abs());
        let legs = legs_by_label(&span);
        for p in &perms {
            let mut dp = [[0.0; 4]; 4];
            for a in 0..4 {
                for b in 0..4 {
                    dp[a][b] = d[p[a]][p[b]];
                }
            }
            let sp = tight_span_quadruple(&dp, 1e-9).unwrap();
            let lp = legs_by_label(&sp);
            let same = sp.width == span.width
                && four_point_delta(&dp, 1e-9).unwrap() == delta
                && (0..4).all(|k| lp[k] == legs[p[k]]);
            if !same {
                relabel_breaks += 1;
            }
        }
    }
    verdict(
        real <= 1e-9 && width_gap <= 1e-12 && relabel_breaks == 0,
        format!("realization {real:.2e}, width gap {width_gap:.2e}, {relabel_breaks} relabeling mismatches"),
    )
}

fn delta_growth() -> Verdict {
    let start = Instant::now();
    let linf = plane(NormSpec::linf(2));
    let mut ok = true;
    let mut notes = Vec::new();
    for l in [8.0, 16.0, 32.0] {
        let d = estimate_delta(&linf, &DeltaConfig::new(l, 10_000, 1)).unwrap().delta;
        ok &= d >= 0.45 * l;
        notes.push(format!("linf L={l}: {:.3}L", d / l));
    }
    let x = make_ex22_space();
    let mut worst: f64 = 0.0;
    for l in [10.0, 25.0, 50.0, 100.0] {
        worst = worst.max(estimate_delta(&x, &DeltaConfig::new(l, 10_000, 1)).unwrap().delta);
    }
    ok &= worst <= 4.0;
    notes.push(format!("ex22 max delta {worst:.3} up to L=100"));
    notes.push(format!("{:.1}s", start.elapsed().as_secs_f64()));
    verdict(ok, notes.join(", "))
}

fn slim_on<B: Bicombing>(b: &B, notes: &mut Vec<String>) -> bool {
    let r = slim_relation_report(b, &DeltaConfig::new(8.0, 2000, 1), 200, 33).unwrap();
    notes.push(format!(
        "{} delta {:.3} <= {:.3}",
        b.space_id(),
        r.summary_f64("delta").unwrap(),
        r.summary_f64("rhs").unwrap()
    ));
    r.is_clean()
}

fn slim_relation() -> Verdict {
    let mut notes = Vec::new();
    let mut ok = true;
    for spec in [NormSpec::l1(2), NormSpec::linf(2), NormSpec::l2(3)] {
        ok &= slim_on(&plane(spec), &mut notes);
    }
    ok &= slim_on(&make_ex22_space(), &mut notes);
    ok &= slim_on(&make_ex63_space(), &mut notes);
    ok &= slim_on(&make_shift_space().0, &mut notes);
    verdict(ok, notes.join("; "))
}

fn torus_residuals() -> Verdict {
    let start = Instant::now();
    let action = LatticeAction::ex63(make_ex63_space());
    let cfg = TorusConfig::new(vec![1, 2, 3], vec![0.25, 0.25]);
    let (report, exp) = torus_report(&action, &[0.0, 0.0, 0.0], &cfg, 0).unwrap();
    let bound_ok = exp.bound_violations(cfg.g.conv_tol).is_empty();
    let lhs = |i: usize, k: i64| {
        exp.residual_table
            .iter()
            .find(|r| r.generator == i && r.k == k)
            .map(|r| r.lhs)
            .unwrap()
    };
    let strict = (0..2).all(|i| lhs(i, 3) < lhs(i, 1));
    let secs = start.elapsed().as_secs_f64();
    let rows: Vec<String> = exp
        .residual_table
        .iter()
        .map(|r| format!("i={} k={} {:.3e}<={:.3e}", r.generator + 1, r.k, r.lhs, r.bound))
        .collect();
    verdict(
        bound_ok && strict && secs < 60.0,
        format!(
            "{}; bound {bound_ok}, k=3 strictly below k=1 {strict}, report violations {}, {secs:.2}s",
            rows.join(", "),
            report.violations.len()
        ),
    )
}

fn cone_metric() -> Verdict {
    let cfg = ToleranceConfig::default().with_seed(13);
    let mut ok = true;
    let mut worst: f64 = 0.0;
    let mut configs = 0;
    for spec in [NormSpec::l1(2), NormSpec::linf(2)] {
        let s = plane(spec);
        let r = cone_formula_report(&s, 20, &cfg).unwrap();
        ok &= r.is_clean();
        worst = worst.max(r.summary_f64("max_residual").unwrap());
        let xi = s.affine_track("xi", vec![0.0, 0.0], vec![1.0, 0.0], Interval::LINE);
        for i in 0..10u64 {
            let mut rng = stream_rng(13, "c13-half", i);
            let a = rng.gen_range(0.25..3.0);
            let b = rng.gen_range(0.25..3.0);
            let dir = vec![rng.gen_range(-1.0..1.0), 1.0];
            let eta = |x: f64| s.affine_track("eta", vec![x, 0.0], dir.clone(), Interval::HALF_LINE);
            let h = check_halfplane_monotone(&s, &xi, eta, a, b, &grid(-5.0, 5.0, 21), &cfg).unwrap();
            ok &= h.is_clean();
            configs += 1;
        }
    }
    verdict(ok, format!("cone formula residual {worst:.2e}, {configs} half-plane configurations"))
}

fn determinism() -> Verdict {
    let runs: [&[&str]; 5] = [
        &["axioms", "--space", "l1-plane", "--samples", "2000", "--seed", "1"],
        &["hyperbolicity", "--space", "linf-plane", "--box", "8", "--samples", "2000", "--seed", "2", "--slim"],
        &["barycenter", "--space", "ex63", "--backend", "tree", "--n", "9", "--trials", "20", "--seed", "3"],
        &["strip", "--space", "ex22", "--samples", "500"],
        &["torus", "--space", "ex63", "--k", "1,2,3", "--p", "0.25,0.25"],
    ];
    let mut same = 0;
    for args in runs {
        let argv: Vec<&str> = std::iter::once("bicombing-lab").chain(args.iter().copied()).collect();
        let outs: Vec<Vec<u8>> = [1, 4, 8]
            .iter()
            .map(|&t| run_with_threads(argv.clone(), t).unwrap())
            .collect();
        if outs.windows(2).all(|w| w[0] == w[1]) {
            same += 1;
        }
    }
    verdict(same == runs.len(), format!("{same}/{} manifests byte-identical across 1, 4, 8 threads", runs.len()))
}

fn main() {
    let criteria: [(&str, fn() -> Verdict); 14] = [
        ("bicombing axioms on normed spaces", bicombing_axioms),
        ("strip dichotomy", strip_dichotomy),
        ("nu profile", nu_profile_check),
        ("flat strip formula", flat_strip),
        ("barycenter", barycenters),
        ("translation length", translation_lengths),
        ("sqrt bound and missing fixed point", sqrt_bound),
        ("axis pipeline", axis_from_random_starts),
        ("tight span", tight_spans),
        ("delta growth vs boundedness", delta_growth),
        ("slim relation", slim_relation),
        ("torus residual", torus_residuals),
        ("cone metric and half-planes", cone_metric),
        ("determinism", determinism),
    ];
    let filter: Option<String> = std::env::args().skip(1).find(|a| !a.starts_with('-'));
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        if filter.as_deref().is_some_and(|f| !name.contains(f)) {
            continue;
        }
        let v = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            verdict(false, format!("panicked: {msg}"))
        });
        if !v.ok {
            failed += 1;
        }
        println!("criterion {:>2} {}: {name}: {}", i + 1, if v.ok { "PASS" } else { "FAIL" }, v.detail);
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
