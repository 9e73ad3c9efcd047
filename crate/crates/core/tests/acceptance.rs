//! Acceptance suite. Each test checks one criterion at its stated tolerance and
//! prints a `PASS`/`FAIL` line before asserting.

mod common;

use std::collections::BTreeSet;
use std::time::Instant;

use bgvcf_stap::grassmann::{
    estimate_ccm, principal_angles, vcf, vcf_gradient, volume, GrassmannPoint, OptimizerConfig,
};
use bgvcf_stap::linalg;
use bgvcf_stap::pipeline::{execute, run_pipeline, Estimator, PipelineConfig, RunMode};
use bgvcf_stap::sim::{simulate, ScenarioConfig, TargetSpec};
use bgvcf_stap::stap::{stap_weights, MetricKind};
use bgvcf_stap::thpd::{
    assemble_thpd, reconstruct_autocorrelation, thpd_from_snapshot, BurgConfig, ReflectionSpectrum,
};
use common::*;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn reference_config(snr_db: f64, training: std::ops::RangeInclusive<usize>) -> PipelineConfig {
    let mut cfg = PipelineConfig {
        targets: TargetSpec::reference_pair(snr_db),
        ..PipelineConfig::default()
    };
    cfg.window.training_cells = Some(training.collect());
    cfg.window.cut = Some(50);
    cfg.metrics.capon = false;
    cfg
}

#[test]
fn burg_levinson_round_trip() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0xB0B);
    let k = 32;
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let p0 = 0.5 + 1.5 * rng.random::<f64>();
        let mu: Vec<Complex64> = (0..k - 1)
            .map(|_| random_reflection(&mut rng, 0.95))
            .collect();
        let spec = ReflectionSpectrum::from_coefficients(p0, mu.clone()).unwrap();
        let r = reconstruct_autocorrelation(&spec, k).unwrap();
        assert!((r[0].re - p0).abs() <= 1e-12 * p0);
        for (got, want) in reflection_from_levinson_durbin(&r).iter().zip(&mu) {
            worst = worst.max((got - want).norm() / want.norm());
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let pass = worst < 1e-9 && secs < 5.0;
    report(
        "Burg/Levinson round trip",
        pass,
        &format!("max relative error {worst:.2e} (< 1e-9), {secs:.2} s (< 5 s)"),
    );
    assert!(pass);
}

#[test]
fn thpd_positive_definite() {
    let start = Instant::now();
    let data = simulate(
        &ScenarioConfig::default(),
        &TargetSpec::reference_pair(10.0),
    )
    .unwrap();
    let burg = BurgConfig::default();
    let mut min_eig = f64::INFINITY;
    for snap in &data.snapshots {
        let (r, _) = thpd_from_snapshot(snap.data.as_slice(), snap.cell_index, &burg).unwrap();
        let dense = r.to_dense();
        assert_eq!(dense.nrows(), 120);
        min_eig = min_eig.min(eigenvalues(&dense)[0]);
    }
    let secs = start.elapsed().as_secs_f64();
    let pass = data.snapshots.len() == 100 && min_eig > 0.0 && secs < 30.0;
    report(
        "THPD positive definiteness",
        pass,
        &format!(
            "{} matrices, smallest eigenvalue {min_eig:.3e} (> 0), {secs:.2} s (< 30 s)",
            data.snapshots.len()
        ),
    );
    assert!(pass);
}

#[test]
fn brauer_containment() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xD15C);
    let k = 8;
    let mut violations = 0;
    for cell in 0..1000 {
        let mut r = vec![c(0.1 + 5.0 * rng.random::<f64>(), 0.0)];
        r.extend((1..k).map(|_| gaussian(&mut rng) * (2.0 * rng.random::<f64>())));
        let t = assemble_thpd(r, cell).unwrap();
        let disc = t.brauer_disc().unwrap();
        let slack = 1e-12 * (disc.center.abs() + disc.radius);
        for lambda in eigenvalues(&t.to_dense()) {
            if (lambda - disc.center).abs() > disc.radius + slack {
                violations += 1;
            }
        }
    }
    let pass = violations == 0;
    report(
        "Brauer containment",
        pass,
        &format!("{violations} eigenvalues outside their disc over 1000 matrices"),
    );
    assert!(pass);
}

#[test]
fn vcf_triple_consistency() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x7C0F);
    let k = 16;
    let (mut worst_pair, mut worst_rot) = (0.0f64, 0.0f64);
    let mut in_range = true;
    for trial in 0..500 {
        let s = 1 + trial % 5;
        let u1 = random_basis(k, s, &mut rng);
        let u2 = random_basis(k, s, &mut rng);
        let det_form = vcf(&u1, &u2).unwrap();
        let sine_form: f64 = principal_angles(&u1, &u2)
            .unwrap()
            .iter()
            .map(|t| t.sin())
            .product();
        let concat = CMat::from_fn(
            k,
            2 * s,
            |i, j| if j < s { u1[(i, j)] } else { u2[(i, j - s)] },
        );
        let volume_form = volume(&concat, 2 * s) / (volume(&u1, s) * volume(&u2, s));
        for (a, b) in [
            (det_form, sine_form),
            (det_form, volume_form),
            (sine_form, volume_form),
        ] {
            worst_pair = worst_pair.max((a - b).abs());
        }
        // The oracle forms come from independent formulas.
        worst_pair = worst_pair.max((det_form - sine_product(&u1, &u2)).abs());
        worst_pair = worst_pair.max((det_form - gram_volume(&concat)).abs());
        in_range &= (0.0..=1.0).contains(&det_form);
        let q = random_unitary(s, &mut rng);
        worst_rot = worst_rot.max((vcf(&(&u1 * &q), &u2).unwrap() - det_form).abs());
    }
    let pass = worst_pair < 1e-9 && worst_rot < 1e-10 && in_range;
    report(
        "VCF triple consistency",
        pass,
        &format!(
            "max pairwise gap {worst_pair:.2e} (< 1e-9), rotation gap {worst_rot:.2e} (< 1e-10), \
             values in [0, 1]: {in_range}"
        ),
    );
    assert!(pass);
}

#[test]
fn vcf_gradient_check() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x6AD);
    let h = 1e-6;
    let mut worst = 0.0f64;
    for trial in 0..100 {
        let k = 12;
        let s = 1 + trial % 4;
        let uq = random_basis(k, s, &mut rng);
        let u = random_basis(k, s, &mut rng);
        let g = vcf_gradient(&uq, &u).unwrap();
        for _ in 0..5 {
            let t = random_tangent(&u, &mut rng);
            let plus = &u + &t * c(h, 0.0);
            let minus = &u - &t * c(h, 0.0);
            let fd = (raw_vcf(&uq, &plus) - raw_vcf(&uq, &minus)) / (2.0 * h);
            let an = real_inner(&g, &t);
            worst = worst.max((fd - an).abs() / fd.abs().max(an.abs()));
        }
    }
    let pass = worst < 1e-5;
    report(
        "Gradient check",
        pass,
        &format!("max relative error {worst:.2e} over 500 directions (< 1e-5)"),
    );
    assert!(pass);
}

#[test]
fn descent_monotone_and_planted_recovery() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x91A);
    let (k, s, n) = (20, 4, 12);
    let mut monotone = true;
    let mut worst_angle = 0.0f64;
    for _ in 0..20 {
        let truth = random_basis(k, s, &mut rng);
        let points: Vec<GrassmannPoint> = (0..n)
            .map(|cell| {
                let t = random_tangent(&truth, &mut rng) * c(0.08, 0.0);
                let basis = (&truth + t).qr().q();
                GrassmannPoint {
                    basis,
                    eigenvalues: vec![100.0, 50.0, 20.0, 10.0],
                    tail_mean: 1.0,
                    cell_index: cell,
                }
            })
            .collect();
        let est = estimate_ccm(&points, &OptimizerConfig::default()).unwrap();
        monotone &= est.objective_trace.windows(2).all(|w| w[1] <= w[0]);
        worst_angle = worst_angle.max(max_principal_angle(&est.basis.basis, &truth));
    }
    let pass = monotone && worst_angle < 0.1;
    report(
        "Descent monotonicity and planted recovery",
        pass,
        &format!(
            "non-increasing traces: {monotone}, max principal angle {worst_angle:.4} rad (< 0.1)"
        ),
    );
    assert!(pass);
}

#[test]
fn screening_reproduces_reference_flags() {
    let wide: BTreeSet<usize> = [30, 31, 32, 39, 40, 41].into();
    let narrow: BTreeSet<usize> = [30, 31, 32, 39].into();
    let (mut wide_hits, mut narrow_hits) = (0, 0);
    let mut flagged_counts = Vec::new();
    for seed in 0..10u64 {
        for (range, expected, hits) in [
            (15..=64, &wide, &mut wide_hits),
            (15..=39, &narrow, &mut narrow_hits),
        ] {
            let mut cfg = reference_config(10.0, range);
            cfg.scenario.rng_seed = seed;
            let out = execute(&cfg, RunMode::Screen).unwrap();
            let flagged: BTreeSet<usize> =
                out.cuts[0].screening.target_cells.iter().copied().collect();
            flagged_counts.push(flagged.len());
            if &flagged == expected {
                *hits += 1;
            }
        }
    }
    let pass = wide_hits >= 9 && narrow_hits >= 9;
    report(
        "Screening reproduction (50 and 25 training cells)",
        pass,
        &format!(
            "exact matches 50-cell {wide_hits}/10, 25-cell {narrow_hits}/10 (need >= 9 each); \
             flagged counts per run {flagged_counts:?}"
        ),
    );
    assert!(pass);
}

#[test]
fn improvement_factor_ordering() {
    let start = Instant::now();
    let mut cfg = reference_config(5.0, 15..=39);
    cfg.estimators = vec![Estimator::Bgvcf, Estimator::Gvcf, Estimator::Lsmi];
    let out = execute(&cfg, RunMode::Metrics).unwrap();
    let mean = |e: Estimator| {
        out.curve(MetricKind::ImprovementFactor, e)
            .unwrap()
            .mean_where(|fd| fd.abs() >= 0.05)
            .unwrap()
    };
    let (b, g, l) = (
        mean(Estimator::Bgvcf),
        mean(Estimator::Gvcf),
        mean(Estimator::Lsmi),
    );
    let secs = start.elapsed().as_secs_f64();
    let pass = b - l >= 5.0 && b >= g && secs < 300.0;
    report(
        "IF ordering",
        pass,
        &format!(
            "mean IF outside |f_d| < 0.05: bgvcf {b:.2} dB, gvcf {g:.2} dB, lsmi {l:.2} dB; \
             bgvcf - lsmi = {:.2} dB (need >= 5), bgvcf >= gvcf: {}, {secs:.1} s",
            b - l,
            b >= g
        ),
    );
    assert!(pass);
}

#[test]
fn output_scnr_ordering() {
    let mut cfg = reference_config(10.0, 15..=39);
    cfg.estimators = vec![
        Estimator::Bgvcf,
        Estimator::Gvcf,
        Estimator::Lsmi,
        Estimator::Optimal,
    ];
    cfg.metrics.scnr_sweep_db = (0..8).map(|i| -10.0 + 5.0 * i as f64).collect();
    let out = execute(&cfg, RunMode::Metrics).unwrap();
    let curve = |e: Estimator| out.curve(MetricKind::OutputScnr, e).unwrap().values.clone();
    let (b, g, l, o) = (
        curve(Estimator::Bgvcf),
        curve(Estimator::Gvcf),
        curve(Estimator::Lsmi),
        curve(Estimator::Optimal),
    );
    let mut violations = Vec::new();
    for i in 0..b.len() {
        let x = cfg.metrics.scnr_sweep_db[i];
        if b[i] < g[i] - 0.5 {
            violations.push(format!("{x} dB: bgvcf {:.2} < gvcf {:.2}", b[i], g[i]));
        }
        if g[i] < l[i] - 0.5 {
            violations.push(format!("{x} dB: gvcf {:.2} < lsmi {:.2}", g[i], l[i]));
        }
        for (name, v) in [("bgvcf", b[i]), ("gvcf", g[i]), ("lsmi", l[i])] {
            if v > o[i] + 1e-9 {
                violations.push(format!("{x} dB: {name} {v:.2} above optimal {:.2}", o[i]));
            }
        }
    }
    let pass = b.len() >= 8 && violations.is_empty();
    report(
        "Output-SCNR ordering",
        pass,
        &format!("{} sweep points, violations: {violations:?}", b.len()),
    );
    assert!(pass);
}

#[test]
fn unit_gain_and_scale_invariance() {
    let mut cfg = reference_config(10.0, 15..=39);
    cfg.metrics.scnr_sweep_db = vec![0.0, 10.0];
    let out = execute(&cfg, RunMode::Full).unwrap();
    let grid = cfg.metrics.grid();
    let (mut worst_gain, mut worst_scale) = (0.0f64, 0.0f64);
    let mut checked = 0;
    for cut in &out.cuts {
        for e in &cut.estimates {
            worst_gain = worst_gain.max((e.weights.gain() - linalg::ONE).norm());
            checked += 1;
            for &fd in grid.iter().step_by(10) {
                let v = cfg.scenario.steering(fd, cfg.metrics.look_spatial).unwrap();
                let w = stap_weights(&e.covariance, &v, e.estimator.label()).unwrap();
                worst_gain = worst_gain.max((w.gain() - linalg::ONE).norm());
                checked += 1;
                for scale in [1e-3, 1.0, 1e3] {
                    let ws = stap_weights(&e.covariance.scale(scale), &v, "scaled").unwrap();
                    worst_scale = worst_scale.max((&ws.w - &w.w).norm() / w.w.norm());
                }
            }
        }
    }
    let pass = worst_gain < 1e-10 && worst_scale < 1e-10;
    report(
        "Unit gain and scale invariance",
        pass,
        &format!(
            "{checked} weight vectors, max |w^H v - 1| {worst_gain:.2e}, \
             max relative change under scaling {worst_scale:.2e} (both < 1e-10)"
        ),
    );
    assert!(pass);
}

#[test]
fn pipeline_determinism() {
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    let mut manifests = Vec::new();
    for dir in &dirs {
        let mut cfg = reference_config(10.0, 15..=39);
        cfg.window.training_cells = None;
        cfg.window.sweep = Some([48, 52]);
        cfg.metrics.scnr_sweep_db = vec![-5.0, 5.0];
        cfg.metrics.grid_points = 41;
        cfg.metrics.capon = true;
        cfg.output_dir = dir.path().to_path_buf();
        manifests.push(run_pipeline(&cfg, RunMode::Full).unwrap());
    }
    let mut differing = Vec::new();
    let mut compared = 0;
    for file in &manifests[0].outputs {
        if file.path.extension().is_some_and(|e| e == "csv") {
            compared += 1;
            let a = std::fs::read(dirs[0].path().join(&file.path)).unwrap();
            let b = std::fs::read(dirs[1].path().join(&file.path)).unwrap();
            if a != b {
                differing.push(file.path.display().to_string());
            }
        }
    }
    let same_hash = manifests[0].config_hash == manifests[1].config_hash;
    let pass = compared >= 7 && differing.is_empty() && same_hash;
    report(
        "Determinism",
        pass,
        &format!("{compared} CSV files compared, differing: {differing:?}, config hash stable: {same_hash}"),
    );
    assert!(pass);
}
