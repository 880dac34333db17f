use pointhom::grid::{Grid, GridField};
use pointhom::kernels::QuadratureSpec;
use pointhom::resolvent::{KreinField, KreinOptions, KreinResolvent};
use pointhom::sampling::{sample_points, PointCloud};
use pointhom::scenario::{Background, DensitySpec, Scenario, StrengthSpec};
use pointhom::spectra::{ground_state, point_spectrum, ScanOptions};
use std::f64::consts::PI;

fn gaussian(grid: Grid, c: [f64; 3], w: f64) -> GridField {
    GridField::from_fn(grid, |x| {
        let r2: f64 = (0..3).map(|a| (x[a] - c[a]).powi(2)).sum();
        (-r2 / (2.0 * w * w)).exp()
    })
}

fn ball() -> Scenario {
    Scenario {
        d: 3,
        background: Background::free(),
        density: DensitySpec::UniformBall { radius: 1.0 },
        strength: StrengthSpec::Constant { a0: 3.0 / (16.0 * PI) },
        ell: 0.8,
        lambda0: 1.0,
        seed: 4,
    }
}

#[test]
fn krein_resolvent_is_symmetric() {
    let sc = ball();
    let cloud = sample_points(&sc, 32, sc.seed).unwrap();
    let grid = Grid::new(3, 2.0, 0.1).unwrap();
    let opts = KreinOptions::default();
    let r = KreinResolvent::new(&cloud, &sc.background, 2.5, 1.0, grid, &opts).unwrap();
    let f = gaussian(grid, [0.3, 0.0, 0.1], 0.4);
    let g = gaussian(grid, [-0.2, 0.25, 0.0], 0.5);
    let inner = |a: &KreinField, b: &KreinField| {
        let p = r.algebra.norm_sq(&a.add_scaled(1.0, b).unwrap(), 1e-10).unwrap();
        let m = r.algebra.norm_sq(&a.add_scaled(-1.0, b).unwrap(), 1e-10).unwrap();
        0.25 * (p - m)
    };
    let (kf, kg) = (KreinField::from_grid(f), KreinField::from_grid(g));
    let a = inner(&kg, &r.apply_structured(&kf).unwrap());
    let b = inner(&r.apply_structured(&kg).unwrap(), &kf);
    assert!((a - b).abs() <= 1e-8 * a.abs(), "{a} vs {b}");
}

#[test]
fn ground_state_is_lowest_eigenvalue() {
    let cloud = PointCloud::from_parts(
        3,
        vec![[0.0; 3], [0.8, 0.0, 0.0], [0.0, 0.9, 0.2]],
        vec![-0.05, 0.0, 0.02],
        0,
    );
    let bg = Background::free();
    let q = QuadratureSpec::default();
    let rep = point_spectrum(&cloud, &bg, 1.0, -50.0, -1e-4, &ScanOptions::default()).unwrap();
    let e = ground_state(&cloud, &bg, 1.0, -50.0, -1e-4, 1e-10, &q).unwrap().unwrap();
    assert!((e - rep.eigenvalues[0]).abs() < 1e-8, "{e} vs {:?}", rep.eigenvalues);
    assert!(rep.eigenvalues.len() <= 3);
}
