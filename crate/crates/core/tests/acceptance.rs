//! Acceptance criteria 1-8. Each criterion prints one PASS/FAIL line with its
//! measurements; the binary exits non-zero when any criterion fails.

use std::f64::consts::{FRAC_PI_2, PI};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use num_complex::Complex64;
use radfov::analysis::curves::{
    efficiency_curve, fit_power_law, reduced_kz_ellipsoid, variable_extent_set, variable_kmax_savings,
    variable_kmax_savings_3d, EfficiencyPoint, Family,
};
use radfov::analysis::phantom::{phantom_experiment, Phantom, PhantomDesign, PhantomOptions};
use radfov::analysis::{
    fwhm, lowlevel_alias_power, measure_ridge, probe_directions, two_line_psf_model, Design2D,
    RESIDUAL_RIDGE_THRESHOLD, X_AXIS, Y_AXIS,
};
use radfov::design2d::{design_2d, Design2DRequest};
use radfov::design3d::{design_pr3d_cones, design_pr3d_spiral, Method, Pr3dRequest};
use radfov::gridding::{direct_dft, grid_reconstruct, GridVolume, GriddingConfig};
use radfov::sampling::{radial_dcf, Dim, ProjectionKind};
use radfov::shapes::ShapeFn;

// criterion 1
const COUNT_2D_BUDGET: Duration = Duration::from_millis(10);
// criterion 2
const COUNT_3D_TOLERANCE: f64 = 0.03;
const COUNT_3D_BUDGET: Duration = Duration::from_secs(1);
// criterion 3
const RIDGE_TOLERANCE: f64 = 0.05;
const FWHM_TOLERANCE: f64 = 0.10;
const PSF_BUDGET: Duration = Duration::from_secs(60);
const PSF_FRAME: usize = 600;
// criterion 4 (percent)
const LOWLEVEL_SIZE: f64 = 120.0;
const DUAL_LOWLEVEL_LIMIT: f64 = 0.05;
// criterion 5
const SAVINGS_RANGE: (f64, f64) = (0.13, 0.36);
const ELLIPSOID_SAVINGS: f64 = 0.33;
const ELLIPSOID_SAVINGS_TOLERANCE: f64 = 0.03;
// criterion 6
const ALIAS_FREE_LIMIT: f64 = 0.02;
// criterion 7
const DFT_TOLERANCE: f64 = 1e-3;
const TWO_LINE_TOLERANCE: f64 = 0.05;
const GAP_TOLERANCE: f64 = 1e-12;
// criterion 8
const FIT_R2: f64 = 0.995;
const EXCESS_LIMIT: f64 = 0.01;

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: String) -> Self {
        Outcome { pass, detail }
    }
}

fn cfg() -> GriddingConfig {
    GriddingConfig::default()
}

fn criterion_1() -> Outcome {
    let cases = [
        ("circle 250", ShapeFn::circle(250.0), 393),
        ("ellipse 250x75", ShapeFn::ellipse(250.0, 75.0), 197),
        ("rect 240x65", ShapeFn::rect(240.0, 65.0), 195),
        ("circle 125", ShapeFn::circle(125.0), 196),
    ];
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, fov, expected) in cases {
        let t = Instant::now();
        let n = design_2d(&Design2DRequest::new(fov, ShapeFn::constant(0.5))).map(|s| s.len()).unwrap_or(0);
        let took = t.elapsed();
        pass &= n == expected && took < COUNT_2D_BUDGET;
        parts.push(format!("{name}: N={n} (want {expected}, {took:.1?})"));
    }
    Outcome::new(pass, parts.join("; "))
}

fn criterion_2() -> Outcome {
    let cases = [
        ("sphere 38", Pr3dRequest::sphere(38.0, 0.5, ProjectionKind::Full), 2303.0),
        ("cylinder 120x76.7x10", Pr3dRequest::cylinder(120.0, 76.7, 10.0, 0.5, ProjectionKind::Full), 2368.0),
        ("sphere 40", Pr3dRequest::sphere(40.0, 0.5, ProjectionKind::Full), 2519.0),
        ("cylinder 98x61x14", Pr3dRequest::cylinder(98.0, 61.0, 14.0, 0.5, ProjectionKind::Full), 2529.0),
        ("sphere 120", Pr3dRequest::sphere(120.0, 0.5, ProjectionKind::Full), 22656.0),
    ];
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, req, expected) in cases {
        let t = Instant::now();
        let n = design_pr3d_spiral(&req).map(|t| t.len()).unwrap_or(0) as f64;
        let took = t.elapsed();
        let err = n / expected - 1.0;
        let ok = err.abs() <= COUNT_3D_TOLERANCE && took < COUNT_3D_BUDGET;
        pass &= ok;
        parts.push(format!("{name}: N={n} vs {expected} ({:+.2}%, {took:.0?}){}", 100.0 * err, if ok { "" } else { " X" }));
    }
    Outcome::new(pass, parts.join("; "))
}

fn ridge_report(fov: ShapeFn) -> (usize, f64, Duration) {
    let t = Instant::now();
    let design = Design2D::new(fov.clone(), ShapeFn::constant(0.5)).with_radial_oversampling(2.0);
    let (psf, reference) = design.psf_pair(&[PSF_FRAME, PSF_FRAME], &cfg()).expect("psf");
    let dirs = probe_directions(36);
    let mut within = 0;
    let mut worst: f64 = 0.0;
    for &psi in &dirs {
        let err = match measure_ridge(&psf, Some(&reference), &[psi], RESIDUAL_RIDGE_THRESHOLD) {
            Ok(r) => r[0] / fov.eval(psi) - 1.0,
            Err(_) => f64::INFINITY,
        };
        if err.abs() <= RIDGE_TOLERANCE {
            within += 1;
        }
        worst = worst.max(err.abs());
    }
    (within, worst, t.elapsed())
}

fn criterion_3() -> Outcome {
    let (circle_ok, circle_worst, t1) = ridge_report(ShapeFn::circle(250.0));
    let (ellipse_ok, ellipse_worst, t2) = ridge_report(ShapeFn::ellipse(250.0, 75.0));
    let r2 = 2f64.sqrt();
    let dual = Design2D::dual(ShapeFn::ellipse(LOWLEVEL_SIZE * r2, LOWLEVEL_SIZE / r2), 0.5);
    let psf = dual.psf(1.0, &[300, 300], &cfg()).expect("psf");
    let ratio = fwhm(&psf, X_AXIS).unwrap() / fwhm(&psf, Y_AXIS).unwrap();
    let expected = dual.kmax.eval(Y_AXIS) / dual.kmax.eval(X_AXIS);
    let fwhm_err = ratio / expected - 1.0;
    let pass = circle_ok == 36
        && ellipse_ok == 36
        && fwhm_err.abs() <= FWHM_TOLERANCE
        && t1 < PSF_BUDGET
        && t2 < PSF_BUDGET;
    let worst = |w: f64| if w.is_finite() { format!("{:.1}%", 100.0 * w) } else { "no ridge".into() };
    Outcome::new(
        pass,
        format!(
            "circle-250 ridge {circle_ok}/36 within 5% (worst {}, {t1:.1?}); ellipse-250x75 {ellipse_ok}/36 (worst {}, {t2:.1?}); \
             dual-ellipse FWHM ratio {ratio:.3} vs {expected:.3} ({:+.1}%)",
            worst(circle_worst),
            worst(ellipse_worst),
            100.0 * fwhm_err
        ),
    )
}

/// Reference-subtracted low-level aliasing power in percent.
fn lowlevel_percent(design: &Design2D) -> f64 {
    let n = (2.4 * design.fov.max_value()).ceil() as usize;
    let n = n + n % 2;
    let (psf, reference) = design.psf_pair(&[n, n], &cfg()).expect("psf");
    100.0 * lowlevel_alias_power(&psf, Some(&reference), &design.fov, design.nominal_res())
}

fn criterion_4() -> Outcome {
    let d = LOWLEVEL_SIZE;
    let iso = |fov: ShapeFn| Design2D::new(fov, ShapeFn::constant(0.5)).with_radial_oversampling(2.0);
    let dual = |fov: ShapeFn| Design2D::dual(fov, 0.5).with_radial_oversampling(2.0);
    let ellipse = |a: f64| ShapeFn::ellipse(d * a.sqrt(), d / a.sqrt());
    let rect = |a: f64| ShapeFn::rect(d * (PI * a).sqrt() / 2.0, d * (PI / a).sqrt() / 2.0);
    // (label, design, target %, tolerance pp)
    let targets = [
        ("ellipse 1.5:1", iso(ellipse(1.5)), 0.60, 0.3),
        ("ellipse 2:1", iso(ellipse(2.0)), 1.3, 0.4),
        ("rect 1:1", iso(rect(1.0)), 0.67, 0.4),
        ("rect 1.5:1", iso(rect(1.5)), 0.91, 0.4),
        ("rect 2:1", iso(rect(2.0)), 1.2, 0.4),
    ];
    let mut pass = true;
    let mut parts = Vec::new();
    let mut values = Vec::new();
    for (label, design, target, tol) in targets {
        let v = lowlevel_percent(&design);
        let ok = (v - target).abs() <= tol;
        pass &= ok;
        values.push(v);
        parts.push(format!("{label} {v:.2}% (want {target}±{tol}){}", if ok { "" } else { " X" }));
    }
    let duals = [
        ("dual ellipse", dual(ellipse(2.0))),
        ("dual rect", dual(ShapeFn::rect(d * 1.72f64.sqrt(), d / 1.72f64.sqrt()))),
        ("dual diamond", dual(ShapeFn::diamond(d * FRAC_PI_2.sqrt(), d * FRAC_PI_2.sqrt()))),
    ];
    for (label, design) in duals {
        let v = lowlevel_percent(&design);
        let ok = v < DUAL_LOWLEVEL_LIMIT;
        pass &= ok;
        parts.push(format!("{label} {v:.3}%{}", if ok { "" } else { " X" }));
    }
    let monotone = values[0] < values[1] && values[2] < values[3] && values[3] < values[4];
    pass &= monotone;
    parts.push(format!("monotone {monotone}"));
    Outcome::new(pass, parts.join("; "))
}

fn criterion_5() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for (label, fov, kmax) in variable_extent_set(LOWLEVEL_SIZE).expect("shape set") {
        let s = variable_kmax_savings(&fov, &kmax, 0.5).expect("savings");
        let ok = (SAVINGS_RANGE.0..=SAVINGS_RANGE.1).contains(&s);
        pass &= ok;
        parts.push(format!("{label} {:.1}%{}", 100.0 * s, if ok { "" } else { " X" }));
    }
    let (ft, fp, kt) = reduced_kz_ellipsoid(40.0);
    let s3 = variable_kmax_savings_3d(&ft, &fp, &kt, 0.5).expect("3D savings");
    let halved = (kt.eval(0.0) / kt.eval(FRAC_PI_2) - 0.5).abs() < 1e-12;
    pass &= (s3 - ELLIPSOID_SAVINGS).abs() <= ELLIPSOID_SAVINGS_TOLERANCE && halved;
    parts.push(format!("ellipsoid kz-halved {:.1}% (want 33±3), kz extent ratio exact {halved}", 100.0 * s3));
    Outcome::new(pass, parts.join("; "))
}

fn criterion_6() -> Outcome {
    let opts = PhantomOptions { radial_fov: Some(32.0), ..Default::default() };
    let sphere = Phantom::sphere(32.0);
    let run = |method| {
        let design = PhantomDesign::Radial3D { request: Pr3dRequest::sphere(16.0, 0.5, ProjectionKind::Full), method };
        phantom_experiment(&design, &sphere, &opts).expect("3D phantom").peak_inband_alias
    };
    let cones = run(Method::ConesBased);
    let spiral = run(Method::SpiralBased);
    let matched = PhantomDesign::Radial2D { fov: ShapeFn::ellipse(120.0, 60.0), kmax: 0.5 };
    let m = phantom_experiment(&matched, &Phantom::ellipse(100.0, 50.0), &PhantomOptions::default())
        .expect("2D phantom")
        .peak_inband_alias;
    let pass = cones > spiral && m < ALIAS_FREE_LIMIT;
    Outcome::new(
        pass,
        format!(
            "undersampled sphere: cones {:.2}% > spiral {:.2}%; matched 2D arm {:.2}% (< 2%)",
            100.0 * cones,
            100.0 * spiral,
            100.0 * m
        ),
    )
}

fn max_err(a: &GridVolume, b: &GridVolume) -> f64 {
    a.data().iter().zip(b.data()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

fn criterion_7() -> Outcome {
    let mut parts = Vec::new();
    let mut pass = true;

    // gridding vs direct DFT, 3D
    let mut state = 0x2545F4914F6CDD1Du64;
    let mut next = || {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        (state >> 11) as f64 / (1u64 << 53) as f64
    };
    let mut pts = Vec::new();
    let mut vals = Vec::new();
    while pts.len() < 400 {
        let k = [next() - 0.5, next() - 0.5, next() - 0.5];
        if (k[0] * k[0] + k[1] * k[1] + k[2] * k[2]).sqrt() <= 0.5 {
            pts.push(k);
            vals.push(Complex64::new(next() - 0.5, next() - 0.5));
        }
    }
    let dims = [24, 20, 16];
    let g = grid_reconstruct(&pts, &vals, &dims, &cfg()).expect("grid");
    let d = direct_dft(&pts, &vals, &dims).expect("dft");
    let peak = d.data().iter().map(|v| v.norm()).fold(0.0, f64::max);
    let dft_err = max_err(&g, &d) / peak;
    pass &= dft_err <= DFT_TOLERANCE;
    parts.push(format!("gridding vs DFT {dft_err:.1e}"));

    // two parallel lines at ky = +-dk/2
    let (dk, kmax) = (1.0 / 16.0, 0.45);
    let mut pts = Vec::new();
    let m = 720;
    for sign in [-1.0, 1.0] {
        for j in 0..m {
            let kx = -kmax + 2.0 * kmax * (j as f64 + 0.5) / m as f64;
            pts.push([kx, sign * dk / 2.0, 0.0]);
        }
    }
    let vals = vec![Complex64::new(1.0, 0.0); pts.len()];
    let psf = grid_reconstruct(&pts, &vals, &[48, 48], &cfg()).expect("grid");
    let scale = psf.center().re;
    let mut two_line_err: f64 = 0.0;
    for i in 0..psf.data().len() {
        let o = psf.offset_of(i);
        let model = two_line_psf_model(dk, kmax, o[0] as f64, o[1] as f64);
        two_line_err = two_line_err.max((psf.data()[i].re / scale - model).abs());
    }
    pass &= two_line_err <= TWO_LINE_TOLERANCE;
    parts.push(format!("two-line model {:.2}%", 100.0 * two_line_err));

    // radial dcf against annulus areas
    let w = radial_dcf(Dim::Two, ProjectionKind::Half, &[0.0, 1.0, 2.0, 3.0]);
    let ring = |a: f64, b: f64| PI * (b * b - a * a);
    let exact = w[0] / w[1] == ring(0.0, 0.5) / ring(0.5, 1.5)
        && w[2] / w[1] == ring(1.5, 2.5) / ring(0.5, 1.5)
        && w[3] / w[1] == 3.0;
    pass &= exact;
    parts.push(format!("annulus ratios exact {exact}"));

    // isotropic degeneracy
    let set = design_2d(&Design2DRequest::new(ShapeFn::circle(200.0), ShapeFn::constant(0.5))).expect("design");
    let gaps = set.gaps();
    let spread = gaps.iter().cloned().fold(f64::MIN, f64::max) - gaps.iter().cloned().fold(f64::MAX, f64::min);
    pass &= spread <= GAP_TOLERANCE;
    parts.push(format!("isotropic gap spread {spread:.1e}"));

    // seed determinism
    let req = |seed| Pr3dRequest::sphere(30.0, 0.5, ProjectionKind::Full).with_seed(seed);
    let a = serde_json::to_vec(&design_pr3d_cones(&req(11)).unwrap()).unwrap();
    let b = serde_json::to_vec(&design_pr3d_cones(&req(11)).unwrap()).unwrap();
    let c = serde_json::to_vec(&design_pr3d_cones(&req(12)).unwrap()).unwrap();
    let deterministic = a == b && a != c;
    pass &= deterministic;
    parts.push(format!("seeded designs bit-identical {deterministic}"));

    Outcome::new(pass, parts.join("; "))
}

/// Worst relative excess of `points` over the isotropic fit at equal measure.
fn excess(points: &[EfficiencyPoint], c: f64, exponent: f64) -> f64 {
    points.iter().map(|p| p.n as f64 / (c * p.area_or_volume.powf(exponent)) - 1.0).fold(f64::MIN, f64::max)
}

fn criterion_8() -> Outcome {
    let sizes_2d: Vec<f64> = (0..9).map(|i| 50.0 + 25.0 * i as f64).collect();
    let sizes_3d: Vec<f64> = (0..5).map(|i| 20.0 + 10.0 * i as f64).collect();
    let circle = efficiency_curve(&Family::Circle, &sizes_2d).expect("circle");
    let sphere = efficiency_curve(&Family::Sphere, &sizes_3d).expect("sphere");
    let (c2, r2_2d) = fit_power_law(&circle, 0.5);
    let (c3, r2_3d) = fit_power_law(&sphere, 2.0 / 3.0);
    let mut pass = r2_2d >= FIT_R2 && r2_3d >= FIT_R2;
    let mut parts = vec![format!("circle N~A^(1/2) R2={r2_2d:.5}"), format!("sphere N~V^(2/3) R2={r2_3d:.5}")];
    let families_2d = [
        Family::Ellipse { aspect: 1.5 },
        Family::Ellipse { aspect: 2.0 },
        Family::Ellipse { aspect: 3.0 },
        Family::Rect { aspect: 1.5 },
        Family::Rect { aspect: 2.0 },
    ];
    for f in families_2d {
        let pts = efficiency_curve(&f, &sizes_2d).expect("curve");
        let (_, r2) = fit_power_law(&pts, 0.5);
        let e = excess(&pts, c2, 0.5);
        pass &= r2 >= FIT_R2 && e <= EXCESS_LIMIT;
        parts.push(format!("{} R2={r2:.4} excess {:+.1}%", f.label(), 100.0 * e));
    }
    let ellipsoid = Family::Ellipsoid { ratios: [1.0, 1.0, 2.0] };
    let pts = efficiency_curve(&ellipsoid, &sizes_3d).expect("curve");
    let (_, r2) = fit_power_law(&pts, 2.0 / 3.0);
    let e = excess(&pts, c3, 2.0 / 3.0);
    pass &= r2 >= FIT_R2 && e <= EXCESS_LIMIT;
    parts.push(format!("{} R2={r2:.4} excess {:+.1}%", ellipsoid.label(), 100.0 * e));
    Outcome::new(pass, parts.join("; "))
}

type Criterion = (u32, &'static str, fn() -> Outcome);

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        (1, "2D counts", criterion_1),
        (2, "3D counts", criterion_2),
        (3, "PSF geometry", criterion_3),
        (4, "low-level aliasing power", criterion_4),
        (5, "variable-kmax savings", criterion_5),
        (6, "method contrast", criterion_6),
        (7, "oracle suites", criterion_7),
        (8, "efficiency curves", criterion_8),
    ];
    let mut failed = 0;
    for (id, name, run) in criteria {
        let t = Instant::now();
        let outcome = run();
        if !outcome.pass {
            failed += 1;
        }
        let verdict = if outcome.pass { "PASS" } else { "FAIL" };
        println!("criterion {id} [{verdict}] {name} ({:.1?}): {}", t.elapsed(), outcome.detail);
    }
    println!("acceptance: {} passed, {failed} failed", 8 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
