//! Acceptance criteria, each a self-contained experiment with its own
//! tables and oracle values.

use anyhow::{Context, Result};
use pointhom::bessel::{bessel_k0, bessel_k1};
use pointhom::forms::{gamma_limsup_gap, gamma_table, distance_table};
use pointhom::grid::{Grid, GridField};
use pointhom::kernels::{background_green, free_green, harmonic_heat_kernel, QuadratureSpec, SpectralParam};
use pointhom::measures::{measure_table, measures_study};
use pointhom::quad::GaussLegendre;
use pointhom::resolvent::{
    free_resolvent_apply, gap_table, krein_apply, mean_gaps, resolvent_convergence_gap, KreinField, KreinOptions,
    KreinResolvent,
};
use pointhom::sampling::{sample_points, PointCloud};
use pointhom::scenario::{Background, DensitySpec, Scenario, StrengthSpec};
use pointhom::spectra::{convergence_study, point_spectrum, ScanOptions, StudyOptions};
use pointhom::table::{fmt_f64, Table};
use pointhom::xi::coercive_onset;
use pointhom::Point;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};
use std::f64::consts::PI;
use std::time::Instant;

/// An oracle value consumed by a criterion, with where it came from.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleValue {
    pub name: String,
    pub value: f64,
    pub source: String,
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub id: u8,
    pub title: &'static str,
    pub passed: bool,
    /// One-line human summary of the decisive numbers.
    pub summary: String,
    pub seconds: f64,
    /// Wall-clock budget; exceeding it fails the criterion.
    pub budget_seconds: f64,
    pub tables: Vec<(String, Table)>,
    pub oracles: Vec<OracleValue>,
    pub results: Value,
}

impl Outcome {
    pub fn line(&self) -> String {
        format!(
            "AC{} {} [{}] {} ({:.1}s)",
            self.id,
            if self.passed { "PASS" } else { "FAIL" },
            self.title,
            self.summary,
            self.seconds
        )
    }
}

pub const ALL: [u8; 8] = [1, 2, 3, 4, 5, 6, 7, 8];

/// Criteria re-run by the determinism check. The ground-state and
/// Gamma studies are left out to keep `verify` within a single-node budget;
/// their parallel paths (grid eigensolver, dot products, cloud fan-out) are
/// exercised by criteria 3, 4 and 6.
pub const DETERMINISM_SUBSET: [u8; 5] = [1, 3, 4, 6, 7];

/// `d = 3`, uniform unit ball, `a = 3/(16 pi)` so that `U/a = 4` inside the
/// ball, `ell = 0.8`.
pub fn ball_scenario() -> Scenario {
    Scenario {
        d: 3,
        background: Background::free(),
        density: DensitySpec::UniformBall { radius: 1.0 },
        strength: StrengthSpec::Constant { a0: 3.0 / (16.0 * PI) },
        ell: 0.8,
        lambda0: 1.0,
        seed: 0,
    }
}

pub fn run(id: u8) -> Result<Outcome> {
    let t = Instant::now();
    let mut out = match id {
        1 => ac1(),
        2 => ac2(),
        3 => ac3(),
        4 => ac4(),
        5 => ac5(),
        6 => ac6(),
        7 => ac7(),
        8 => ac8(&DETERMINISM_SUBSET),
        _ => anyhow::bail!("no acceptance criterion {id}"),
    }
    .with_context(|| format!("criterion {id}"))?;
    out.seconds = t.elapsed().as_secs_f64();
    if out.seconds > out.budget_seconds {
        out.passed = false;
        out.summary.push_str(&format!("; over budget {:.0}s", out.budget_seconds));
    }
    Ok(out)
}

fn outcome(id: u8, title: &'static str, budget_seconds: f64) -> Outcome {
    Outcome {
        id,
        title,
        passed: false,
        summary: String::new(),
        seconds: 0.0,
        budget_seconds,
        tables: Vec::new(),
        oracles: Vec::new(),
        results: Value::Null,
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn gaussian(grid: Grid, c: Point, w: f64) -> GridField {
    GridField::from_fn(grid, |x| {
        let r2: f64 = (0..3).map(|a| (x[a] - c[a]).powi(2)).sum();
        (-r2 / (2.0 * w * w)).exp()
    })
}

pub fn ac1() -> Result<Outcome> {
    let mut o = outcome(1, "one-center closed form", 1.0);
    let cloud = PointCloud::from_parts(3, vec![[0.0; 3]], vec![-1.0 / (4.0 * PI)], 0);
    let rep = point_spectrum(&cloud, &Background::free(), 1.0, -100.0, -1e-6, &ScanOptions::default())?;
    let err = rep.eigenvalues.first().map(|e| (e + 4.0).abs()).unwrap_or(f64::INFINITY);
    o.passed = rep.eigenvalues.len() == 1 && err <= 1e-6;
    o.summary = format!("{} eigenvalue(s), |E + 4| = {:.2e}", rep.eigenvalues.len(), err);
    o.tables.push(("ac1_spectrum.csv".into(), spectrum_table(&rep)));
    o.oracles.push(OracleValue {
        name: "one_center_energy".into(),
        value: -4.0,
        source: "closed form -(4 pi alpha)^2 with alpha = -1/(4 pi)".into(),
    });
    o.results = json!({ "eigenvalues": rep.eigenvalues, "abs_error": err });
    Ok(o)
}

pub fn spectrum_table(rep: &pointhom::spectra::SpectrumReport) -> Table {
    let mut t = Table::new(&["k", "E", "multiplicity"]);
    for (k, (e, m)) in rep.eigenvalues.iter().zip(&rep.multiplicities).enumerate() {
        t.push(vec![k.to_string(), fmt_f64(*e), m.to_string()]);
    }
    t
}

pub fn ac2() -> Result<Outcome> {
    let mut o = outcome(2, "ground-state homogenization", 1800.0);
    let sc = ball_scenario();
    let opts = StudyOptions {
        l: 8.0,
        h: 0.1,
        e_min: -4.0,
        e_max: -1e-3,
        tol: 1e-7,
        grid_tol: 1e-5,
        q: QuadratureSpec::default(),
    };
    let table = convergence_study(&sc, &[128, 1024], 5, &opts)?;
    let oracle = pointhom_oracles::square_well_ground_state(4.0, 1.0).context("square well binds")?;
    let e_inf = table.e1_hinf;
    let gaps = |n: usize| -> Vec<f64> {
        table
            .rows
            .iter()
            .filter(|r| r.n == n)
            .map(|r| r.gap().unwrap_or(f64::INFINITY))
            .collect()
    };
    let g128 = mean(&gaps(128));
    let g1024 = mean(&gaps(1024));
    let rel = g1024 / e_inf.abs();
    let grid_ok = (e_inf - oracle).abs() <= 0.02;
    o.passed = grid_ok && g1024 < 0.5 * g128 && rel <= 0.10;
    o.summary = format!(
        "E1(Hinf) = {e_inf:.5} vs {oracle:.5}; mean gap {g128:.4} (N=128) -> {g1024:.4} (N=1024), relative {:.1}%",
        100.0 * rel
    );
    o.tables.push(("ac2_convergence.csv".into(), table.to_table()));
    o.oracles.push(OracleValue {
        name: "square_well_ground_state".into(),
        value: oracle,
        source: "pointhom_oracles::square_well_ground_state(V0 = 4, R = 1)".into(),
    });
    o.results = json!({
        "e1_hinf": e_inf,
        "mean_gap": { "128": g128, "1024": g1024 },
        "relative_gap_1024": rel,
    });
    Ok(o)
}

pub fn ac3() -> Result<Outcome> {
    let mut o = outcome(3, "equi-coerciveness", 600.0);
    let sc = ball_scenario();
    let ns = [128usize, 256, 512, 1024, 2048];
    let clouds = ns
        .iter()
        .map(|&n| sample_points(&sc, n, sc.seed))
        .collect::<pointhom::Result<Vec<_>>>()?;
    let lambdas: Vec<f64> = (0..=24).map(|k| 2f64.powf(k as f64 / 4.0)).collect();
    let onset = coercive_onset(&clouds, &sc.background, sc.lambda0 * sc.lambda0, &lambdas, 0.5, &QuadratureSpec::default())?;
    let mut t = Table::new(&["N", "lambda", "min_eigenvalue_scaled", "offdiag_hs_norm_scaled"]);
    for r in &onset.rows {
        t.push(vec![
            r.n.to_string(),
            fmt_f64(r.lambda),
            fmt_f64(r.min_eigenvalue_scaled),
            fmt_f64(r.offdiag_hs_norm_scaled),
        ]);
    }
    let lo = onset.rows.iter().map(|r| r.lambda).fold(f64::INFINITY, f64::min);
    let ratios: Vec<f64> = ns
        .iter()
        .map(|&n| {
            let at = |lam: f64| {
                onset
                    .rows
                    .iter()
                    .find(|r| r.n == n && r.lambda == lam)
                    .map(|r| r.offdiag_hs_norm_scaled)
                    .unwrap_or(f64::NAN)
            };
            at(2.0 * lo) / at(lo)
        })
        .collect();
    let worst_ratio = ratios.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let best_min = onset
        .rows
        .iter()
        .map(|r| r.min_eigenvalue_scaled)
        .fold(f64::INFINITY, f64::min);
    match onset.lambda_star {
        Some(l) => {
            o.passed = worst_ratio <= 0.6;
            o.summary = format!("lambda* = {l}; worst HS ratio {worst_ratio:.3}");
        }
        None => {
            o.summary = format!(
                "no lambda <= 64 reaches min_eigenvalue_scaled >= 0.5 (value {best_min:.4} at lambda = {lo}); worst HS ratio {worst_ratio:.3}"
            );
        }
    }
    o.tables.push(("ac3_xi_scan.csv".into(), t));
    o.results = json!({
        "lambda_star": onset.lambda_star,
        "threshold": onset.threshold,
        "hs_ratio": ratios,
        "min_eigenvalue_scaled_at_reported_lambda": best_min,
    });
    Ok(o)
}

pub fn ac4() -> Result<Outcome> {
    let mut o = outcome(4, "Riesz and pair-sum convergence", 600.0);
    let sc = ball_scenario();
    let ns = [128usize, 512, 2048];
    let seeds = 10;
    let rows = measures_study(&sc, &ns, seeds, &[1.0], 1e-6)?;
    let riesz_oracle = pointhom_oracles::ball_riesz_oracle(3, 1.0);
    let pick = |q: &str, n: usize| -> Vec<&pointhom::measures::MeasureRow> {
        rows.iter().filter(|r| r.quantity == q && r.n == n).collect()
    };
    let riesz_err = pick("riesz_s=1", 2048)
        .iter()
        .map(|r| (r.value - riesz_oracle).abs() / riesz_oracle)
        .fold(0.0, f64::max);
    let rel = |n: usize| -> Vec<f64> { pick("pair_zeta0", n).iter().map(|r| r.gap() / r.oracle.abs()).collect() };
    let (r128, r512, r2048) = (rel(128), rel(512), rel(2048));
    let inversions = (0..seeds)
        .filter(|&k| !(r128[k] > r512[k] && r512[k] > r2048[k]))
        .count();
    let final_gap = mean(&r2048);
    o.passed = riesz_err <= 0.05 && inversions <= 1 && final_gap <= 0.02;
    o.summary = format!(
        "Riesz s=1 worst error {:.2}% at N=2048; zeta0 gap {:.2}% -> {:.2}% -> {:.2}%, {inversions} seed inversion(s)",
        100.0 * riesz_err,
        100.0 * mean(&r128),
        100.0 * mean(&r512),
        100.0 * final_gap
    );
    o.tables.push(("ac4_measures.csv".into(), measure_table(&rows)));
    o.oracles.push(OracleValue {
        name: "ball_riesz_s1".into(),
        value: riesz_oracle,
        source: "pointhom_oracles::ball_riesz_oracle(d = 3, s = 1)".into(),
    });
    o.results = json!({
        "riesz_worst_relative_error": riesz_err,
        "zeta0_mean_relative_gap": { "128": mean(&r128), "512": mean(&r512), "2048": final_gap },
        "seed_inversions": inversions,
    });
    Ok(o)
}

/// Experiment parameter `lambda = lambda* + 1`, where `lambda*` is the
/// onset of `min_eigenvalue_scaled >= a/2` over clouds of 128 and 1024
/// points.
pub fn gamma_lambda(sc: &Scenario) -> Result<f64> {
    let clouds = [128usize, 1024]
        .iter()
        .map(|&n| sample_points(sc, n, sc.seed))
        .collect::<pointhom::Result<Vec<_>>>()?;
    let a_min = clouds
        .iter()
        .flat_map(|c| c.positions.iter().map(|x| sc.strength_at(x)))
        .fold(f64::INFINITY, f64::min);
    let lambdas: Vec<f64> = (0..=24).map(|k| 2f64.powf(k as f64 / 4.0)).collect();
    let onset = coercive_onset(&clouds, &sc.background, sc.lambda0 * sc.lambda0, &lambdas, 0.5 * a_min, &QuadratureSpec::default())?;
    let star = onset.lambda_star.context("no coercive onset on the scan grid")?;
    Ok(star + 1.0)
}

pub fn ac5() -> Result<Outcome> {
    let mut o = outcome(5, "Gamma-limsup identity", 1200.0);
    let sc = ball_scenario();
    let lambda = gamma_lambda(&sc)?;
    let grid = Grid::new(3, 3.0, 0.1)?;
    let psi = gaussian(grid, [0.0; 3], 0.35);
    let rows = gamma_limsup_gap(&sc, &psi, &[128, 1024], 8, lambda, &QuadratureSpec::default())?;
    let stat = |n: usize, f: &dyn Fn(&pointhom::forms::GammaRow) -> f64| -> f64 {
        mean(&rows.iter().filter(|r| r.n == n).map(f).collect::<Vec<_>>())
    };
    let (g128, g1024) = (stat(128, &|r| r.gap()), stat(1024, &|r| r.gap()));
    let (d128, d1024) = (stat(128, &|r| r.distance), stat(1024, &|r| r.distance));
    o.passed = g1024 < g128 && d1024 < d128;
    o.summary = format!(
        "lambda = {lambda}; mean |QN - Qinf| {g128:.4} -> {g1024:.4}; mean distance {d128:.4} -> {d1024:.4}"
    );
    o.tables.push(("ac5_gamma.csv".into(), gamma_table(&rows)));
    o.tables.push(("ac5_distance.csv".into(), distance_table(&rows)));
    o.results = json!({
        "lambda": lambda,
        "qinf": rows.first().map(|r| r.qinf),
        "mean_gap": { "128": g128, "1024": g1024 },
        "mean_distance": { "128": d128, "1024": d1024 },
    });
    Ok(o)
}

pub fn ac6() -> Result<Outcome> {
    let mut o = outcome(6, "resolvent contracts", 900.0);
    let sc = ball_scenario();
    let kopts = KreinOptions::default();

    let grid = Grid::new(3, 3.0, 0.1)?;
    let f = gaussian(grid, [0.2, 0.0, -0.1], 0.5);
    let cloud = sample_points(&sc, 64, sc.seed + 1)?;
    let (l1, l2) = (3.0, 4.0);
    let r1 = KreinResolvent::new(&cloud, &sc.background, l1, 1.0, grid, &kopts)?;
    let r2 = KreinResolvent::new(&cloud, &sc.background, l2, 1.0, grid, &kopts)?;
    let ff = KreinField::from_grid(f.clone());
    let a = r1.apply_structured(&ff)?;
    let b = r2.apply_structured(&ff)?;
    let ab = r1.apply_structured(&b)?;
    let lhs = a.add_scaled(-1.0, &b)?;
    let res = lhs.add_scaled(-(l2 * l2 - l1 * l1), &ab)?;
    let identity = r1.algebra.norm(&res, kopts.tol)? / f.norm_l2();

    let big = PointCloud::from_parts(3, vec![[0.05, 0.02, 0.01]], vec![1e6], 0);
    let k = krein_apply(&big, &Background::free(), l1, 1.0, &f, &kopts)?;
    let free = free_resolvent_apply(3, l1, &f)?;
    let decoupled = k.add_scaled(-1.0, &free).norm_l2() / free.norm_l2();

    let g = Grid::new(3, 4.0, 0.1)?;
    let trials: Vec<(String, GridField)> = vec![
        ("g0".into(), gaussian(g, [0.0; 3], 0.5)),
        ("g1".into(), gaussian(g, [0.5, 0.0, 0.0], 0.4)),
        ("g2".into(), gaussian(g, [0.0, -0.3, 0.4], 0.6)),
    ];
    let rows = resolvent_convergence_gap(&sc, &[128, 1024], 3, 3.0, &trials, &kopts)?;
    let means = mean_gaps(&rows);
    let decreasing = trials.iter().all(|(id, _)| {
        let at = |n: usize| means.iter().find(|m| m.0 == n && &m.1 == id).map(|m| m.2).unwrap_or(f64::NAN);
        at(1024) < at(128)
    });
    o.passed = identity <= 1e-4 && decoupled <= 1e-4 && decreasing;
    o.summary = format!(
        "identity residual {identity:.2e}; alpha = 1e6 deviation {decoupled:.2e}; gaps decrease for all trials: {decreasing}"
    );
    o.tables.push(("ac6_resolvent_gap.csv".into(), gap_table(&rows)));
    o.results = json!({
        "identity_relative_residual": identity,
        "large_alpha_relative_deviation": decoupled,
        "mean_gaps": means.iter().map(|(n, id, g)| json!({"N": n, "f_id": id, "gap": g})).collect::<Vec<_>>(),
    });
    Ok(o)
}

pub fn ac7() -> Result<Outcome> {
    let mut o = outcome(7, "kernel certification", 300.0);
    let mut t = Table::new(&["check", "samples", "worst"]);

    let mut bessel_worst: f64 = 0.0;
    for k in 0..1000 {
        let x = 10f64.powf(-3.0 + 5.0 * k as f64 / 999.0);
        for (order, v) in [(0u32, bessel_k0(x)?), (1u32, bessel_k1(x)?)] {
            let r = pointhom_oracles::bessel_integral_oracle(order, x);
            bessel_worst = bessel_worst.max((v - r).abs() / r.abs());
        }
    }
    t.push(vec!["bessel_k0_k1".into(), "2000".into(), fmt_f64(bessel_worst)]);

    let q = QuadratureSpec::default();
    let w = 1.0;
    let bg = Background::harmonic(w);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut green_worst: f64 = 0.0;
    for k in 0..50 {
        let d = if k % 2 == 0 { 3 } else { 2 };
        let (x, y) = loop {
            let mut x = [0.0; 3];
            let mut y = [0.0; 3];
            for a in 0..d {
                x[a] = rng.gen_range(-1.5..1.5);
                y[a] = rng.gen_range(-1.5..1.5);
            }
            if pointhom::dist(&x, &y) > 0.1 {
                break (x, y);
            }
        };
        let s = rng.gen_range(-(d as f64) * w + 0.5..6.0);
        let v = background_green(&bg, d, SpectralParam { s }, &x, &y, &q)?;
        let r = pointhom_oracles::oscillator_green_oracle(d, w, s, &x[..d], &y[..d], 4000);
        green_worst = green_worst.max((v - r).abs() / r.abs().max(1.0));
    }
    t.push(vec!["harmonic_green".into(), "50".into(), fmt_f64(green_worst)]);

    let semigroup = heat_semigroup_residual(w)?;
    t.push(vec!["heat_semigroup".into(), "4".into(), fmt_f64(semigroup)]);

    let mut violations = 0usize;
    let mut margin = f64::INFINITY;
    for k in 0..1000 {
        let d = if k % 2 == 0 { 3 } else { 2 };
        let mut x = [0.0; 3];
        let mut y = [0.0; 3];
        for a in 0..d {
            x[a] = rng.gen_range(-2.0..2.0);
            y[a] = rng.gen_range(-2.0..2.0);
        }
        let lambda: f64 = rng.gen_range(0.3..3.0);
        let r = pointhom::dist(&x, &y);
        if r < 1e-3 {
            continue;
        }
        let g = background_green(&bg, d, SpectralParam::from_lambda(lambda), &x, &y, &q)?;
        let g0 = free_green(d, lambda, r)?;
        margin = margin.min(g0 - g.abs());
        if g.abs() > g0 {
            violations += 1;
        }
    }
    t.push(vec!["domination".into(), "1000".into(), violations.to_string()]);

    o.passed = bessel_worst <= 1e-9 && green_worst <= 1e-4 && semigroup <= 1e-6 && violations == 0;
    o.summary = format!(
        "Bessel {bessel_worst:.1e}; harmonic Green {green_worst:.1e}; semigroup {semigroup:.1e}; domination violations {violations}"
    );
    o.tables.push(("ac7_kernels.csv".into(), t));
    o.oracles.push(OracleValue {
        name: "bessel_integral".into(),
        value: pointhom_oracles::bessel_integral_oracle(0, 1.0),
        source: "pointhom_oracles::bessel_integral_oracle(0, 1), first of 2000 comparisons".into(),
    });
    o.oracles.push(OracleValue {
        name: "oscillator_green".into(),
        value: pointhom_oracles::oscillator_green_oracle(3, 1.0, 1.0, &[0.5, 0.0, 0.0], &[0.0, 0.3, 0.0], 4000),
        source: "pointhom_oracles::oscillator_green_oracle with 4000 terms, sample value".into(),
    });
    o.results = json!({
        "bessel_worst_relative": bessel_worst,
        "green_worst": green_worst,
        "semigroup_relative_residual": semigroup,
        "domination_violations": violations,
        "domination_min_margin": margin,
    });
    Ok(o)
}

/// Worst relative residual of `int p_t(x, z) p_s(z, y) dz = p_{t+s}(x, y)`
/// in two dimensions over a few `(t, s, x, y)`.
fn heat_semigroup_residual(w: f64) -> Result<f64> {
    let gl = GaussLegendre::get(160);
    let cases: [(f64, f64, Point, Point); 4] = [
        (0.2, 0.3, [0.1, 0.2, 0.0], [-0.3, 0.4, 0.0]),
        (0.5, 0.5, [0.0, 0.0, 0.0], [1.0, 0.0, 0.0]),
        (1.0, 0.25, [0.7, -0.2, 0.0], [0.2, 0.9, 0.0]),
        (2.0, 1.5, [-1.0, 0.5, 0.0], [0.4, -0.6, 0.0]),
    ];
    let mut worst: f64 = 0.0;
    for (t, s, x, y) in cases {
        let half = 7.0;
        let v = gl.integrate(-half, half, |z1| {
            gl.integrate(-half, half, |z2| {
                let z = [z1, z2, 0.0];
                harmonic_heat_kernel(2, w, t, &x, &z) * harmonic_heat_kernel(2, w, s, &z, &y)
            })
        });
        let exact = harmonic_heat_kernel(2, w, t + s, &x, &y);
        worst = worst.max((v - exact).abs() / exact);
    }
    Ok(worst)
}

/// Runs `ids` under pools of 1 and 8 threads and compares every CSV byte.
pub fn ac8(ids: &[u8]) -> Result<Outcome> {
    let mut o = outcome(8, "determinism", 3600.0);
    let render = |threads: usize| -> Result<Vec<(String, String)>> {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build()?;
        pool.install(|| {
            let mut files = Vec::new();
            for &id in ids {
                let out = match id {
                    1 => ac1(),
                    2 => ac2(),
                    3 => ac3(),
                    4 => ac4(),
                    5 => ac5(),
                    6 => ac6(),
                    7 => ac7(),
                    _ => anyhow::bail!("criterion {id} has no tables"),
                }?;
                files.extend(out.tables.into_iter().map(|(n, t)| (n, t.to_csv_string())));
            }
            Ok(files)
        })
    };
    let one = render(1)?;
    let eight = render(8)?;
    let differing: Vec<String> = one
        .iter()
        .zip(&eight)
        .filter(|(a, b)| a != b)
        .map(|(a, _)| a.0.clone())
        .collect();
    o.passed = one.len() == eight.len() && differing.is_empty();
    o.summary = format!(
        "{} CSV file(s) from criteria {:?} compared at 1 and 8 threads; differing: {:?}",
        one.len(),
        ids,
        differing
    );
    o.results = json!({ "criteria": ids, "files": one.len(), "differing": differing });
    Ok(o)
}
