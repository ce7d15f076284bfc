//! 3D radial designs built on the 2D recurrence.
//!
//! Polar shapes (`fov_theta`, `kmax_theta`) are functions of the deflection
//! angle from +z; see [`ShapeFn::polar`] for converting a shape drawn in the
//! (rho, z) half-plane. `fov_phi` is a function of the cylindrical azimuth and
//! limits the FOV in the x-y plane independently of z, so the supported
//! region is the intersection of the two.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use rand::{Rng, SeedableRng};
use rand_xoshiro::SplitMix64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::design2d::{design_2d, design_2d_relaxed, Design2DRequest};
use crate::error::{Error, Result};
use crate::sampling::{angular_dcf_3d, ProjectionKind};
use crate::shapes::ShapeFn;

const FOV_TOLERANCE: f64 = 1e-9;
const STREAM_STRIDE: u64 = 0x9E37_79B9_7F4A_7C15;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    ConesBased,
    SpiralBased,
}

/// Cone deflections from +kz with their extents.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConeSet {
    pub deflections: Vec<f64>,
    pub extents: Vec<f64>,
}

impl ConeSet {
    pub fn len(&self) -> usize {
        self.deflections.len()
    }

    pub fn is_empty(&self) -> bool {
        self.deflections.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Projection3D {
    /// Polar angle from +kz.
    pub theta: f64,
    /// Azimuth in `[0, 2pi)`.
    pub phi: f64,
    pub kmax: f64,
    pub dcf_angular: f64,
    /// Cone index for cones-based designs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cone: Option<usize>,
    /// Unwrapped azimuth accumulated along the spiral (spiral-based designs).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi_total: Option<f64>,
}

impl Projection3D {
    pub fn direction(&self) -> [f64; 3] {
        let (st, ct) = self.theta.sin_cos();
        let (sp, cp) = self.phi.sin_cos();
        [st * cp, st * sp, ct]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory3D {
    pub projections: Vec<Projection3D>,
    pub method: Method,
    pub kind: ProjectionKind,
    pub seed: u64,
    /// Projections per cone (cones-based only), pole cone first.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub cone_counts: Vec<usize>,
}

impl Trajectory3D {
    pub fn len(&self) -> usize {
        self.projections.len()
    }

    pub fn is_empty(&self) -> bool {
        self.projections.is_empty()
    }
}

/// Knots and parametrization behind a spiral-based design.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Spiral3DIntermediate {
    pub knot_theta: Vec<f64>,
    pub knot_kmax: Vec<f64>,
    /// Projections expected between consecutive knots.
    pub segment_estimates: Vec<f64>,
    pub n_phi_est: f64,
    /// Parameter value at each knot; `t[0] = 1`.
    pub knot_t: Vec<f64>,
    pub kmax_phi: f64,
}

impl Spiral3DIntermediate {
    fn interpolate(knots_t: &[f64], values: &[f64], t: f64) -> f64 {
        let last = knots_t.len() - 1;
        if t >= knots_t[last] {
            return values[last];
        }
        if t <= knots_t[0] {
            return values[0];
        }
        let i = knots_t.partition_point(|&k| k <= t) - 1;
        let span = knots_t[i + 1] - knots_t[i];
        values[i] + (values[i + 1] - values[i]) * (t - knots_t[i]) / span
    }

    pub fn theta_at(&self, t: f64) -> f64 {
        Self::interpolate(&self.knot_t, &self.knot_theta, t)
    }

    pub fn kmax_at(&self, t: f64) -> f64 {
        Self::interpolate(&self.knot_t, &self.knot_kmax, t)
    }

    pub fn total(&self) -> f64 {
        self.segment_estimates.iter().sum()
    }
}

/// Inputs shared by both 3D PR methods.
#[derive(Clone, Debug)]
pub struct Pr3dRequest {
    pub fov_theta: ShapeFn,
    pub kmax_theta: ShapeFn,
    pub fov_phi: ShapeFn,
    pub kind: ProjectionKind,
    pub seed: u64,
}

impl Pr3dRequest {
    pub fn new(fov_theta: ShapeFn, kmax_theta: ShapeFn, fov_phi: ShapeFn, kind: ProjectionKind) -> Self {
        Pr3dRequest { fov_theta, kmax_theta, fov_phi, kind, seed: 0 }
    }

    /// Sphere of diameter `fov` px at extent `kmax`.
    pub fn sphere(fov: f64, kmax: f64, kind: ProjectionKind) -> Self {
        Self::new(ShapeFn::circle(fov), ShapeFn::constant(kmax), ShapeFn::circle(fov), kind)
    }

    /// Cylinder with elliptical cross-section `wx` x `wy` and height `wz`,
    /// all in px, isotropic extent `kmax`.
    pub fn cylinder(wx: f64, wy: f64, wz: f64, kmax: f64, kind: ProjectionKind) -> Self {
        let rho = wx.max(wy);
        Self::new(
            ShapeFn::rect(rho, wz).polar(),
            ShapeFn::constant(kmax),
            ShapeFn::ellipse(wx, wy),
            kind,
        )
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    fn check_fov_constraint(&self) -> Result<()> {
        let equator = self.fov_theta.eval(FRAC_PI_2);
        let widest = self.fov_phi.max_value();
        if widest > equator * (1.0 + FOV_TOLERANCE) {
            return Err(Error::FovConstraintViolated { fov_phi: widest, fov_theta_equator: equator });
        }
        Ok(())
    }

    pub fn polar_width(&self) -> f64 {
        match self.kind {
            ProjectionKind::Full => FRAC_PI_2,
            ProjectionKind::Half => PI,
        }
    }
}

/// Uniform draw in `[0, 1)` from the substream `(seed, stream)`.
pub fn uniform_draw(seed: u64, stream: u64) -> f64 {
    let mut rng = SplitMix64::seed_from_u64(seed.wrapping_add(stream.wrapping_mul(STREAM_STRIDE)));
    rng.gen::<f64>()
}

/// Cone deflections for 3D cones imaging. The first cone sits half a polar
/// gap from the pole so that no cone degenerates to a single projection.
pub fn design_cones(fov_theta: &ShapeFn, kmax_theta: &ShapeFn) -> Result<ConeSet> {
    let phi0 = 1.0 / (2.0 * kmax_theta.eval(0.0) * fov_theta.eval(FRAC_PI_2));
    let set = design_2d(&Design2DRequest::new(fov_theta.clone(), kmax_theta.clone()).with_start(phi0))?;
    Ok(ConeSet { deflections: set.angles, extents: set.extents })
}

/// Samples one cone azimuthally with a random start angle.
fn sample_cone(fov_phi: &ShapeFn, kmax_phi: f64, width: f64, draw: f64) -> Result<Vec<f64>> {
    let span = 1.0 / (kmax_phi * fov_phi.eval(FRAC_PI_2));
    let req = Design2DRequest::new(fov_phi.clone(), ShapeFn::constant(kmax_phi))
        .with_start(draw * span)
        .with_width(width);
    Ok(design_2d_relaxed(&req)?.angles)
}

/// Cones-based 3D PR: polar cones from the 2D design, each sampled
/// azimuthally with `kmax_phi = Kmax * sin(theta)` and a randomized start.
pub fn design_pr3d_cones(req: &Pr3dRequest) -> Result<Trajectory3D> {
    req.check_fov_constraint()?;
    let cones = design_2d(
        &Design2DRequest::new(req.fov_theta.clone(), req.kmax_theta.clone()).with_width(req.polar_width()),
    )?;

    let mut rings: Vec<(f64, f64, Vec<f64>)> = cones
        .angles
        .par_iter()
        .zip(cones.extents.par_iter())
        .enumerate()
        .map(|(n, (&theta, &kmax))| {
            if n == 0 {
                return Ok((theta, kmax, vec![0.0]));
            }
            let kmax_phi = kmax * theta.sin();
            let phis = sample_cone(&req.fov_phi, kmax_phi, TAU, uniform_draw(req.seed, n as u64))?;
            Ok((theta, kmax, phis))
        })
        .collect::<Result<_>>()?;

    if req.kind == ProjectionKind::Full {
        let kmax = req.kmax_theta.eval(FRAC_PI_2);
        let draw = uniform_draw(req.seed, cones.len() as u64);
        rings.push((FRAC_PI_2, kmax, sample_cone(&req.fov_phi, kmax, PI, draw)?));
    }

    let mut projections = Vec::new();
    let mut cone_counts = Vec::with_capacity(rings.len());
    for (cone, (theta, kmax, phis)) in rings.into_iter().enumerate() {
        cone_counts.push(phis.len());
        projections.extend(phis.into_iter().map(|phi| Projection3D {
            theta,
            phi: phi.rem_euclid(TAU),
            kmax,
            dcf_angular: 0.0,
            cone: Some(cone),
            phi_total: None,
        }));
    }
    let mut traj = Trajectory3D {
        projections,
        method: Method::ConesBased,
        kind: req.kind,
        seed: req.seed,
        cone_counts,
    };
    fill_dcf(&mut traj, req);
    Ok(traj)
}

/// Polar knots and per-segment projection estimates for the spiral path.
pub fn spiral_intermediate(req: &Pr3dRequest) -> Result<Spiral3DIntermediate> {
    req.check_fov_constraint()?;
    let polar = design_2d(
        &Design2DRequest::new(req.fov_theta.clone(), req.kmax_theta.clone()).with_width(req.polar_width()),
    )?;
    let kmax_phi = req.kmax_theta.eval(FRAC_PI_2);
    let n_phi_est = design_2d(
        &Design2DRequest::new(req.fov_phi.clone(), ShapeFn::constant(kmax_phi)).with_width(TAU),
    )?
    .len() as f64;

    let end = req.polar_width();
    let mut knot_theta = polar.angles;
    let mut knot_kmax = polar.extents;
    knot_theta.push(end);
    knot_kmax.push(req.kmax_theta.eval(end));

    let mut segment_estimates: Vec<f64> = knot_theta
        .windows(2)
        .zip(knot_kmax.windows(2))
        .map(|(t, k)| n_phi_est * (0.5 * (t[0] + t[1])).sin() * (k[0] + k[1]) / (2.0 * kmax_phi))
        .collect();

    if req.kind == ProjectionKind::Full {
        // extra quarter turn past the equator
        let extra = FRAC_PI_2 + 1.0 / (4.0 * kmax_phi * req.fov_theta.eval(PI));
        knot_theta.push(extra);
        knot_kmax.push(req.kmax_theta.eval(extra));
        segment_estimates.push(n_phi_est / 4.0);
    }

    let mut knot_t = Vec::with_capacity(knot_theta.len());
    knot_t.push(1.0);
    for est in &segment_estimates {
        knot_t.push(knot_t.last().unwrap() + est);
    }

    Ok(Spiral3DIntermediate { knot_theta, knot_kmax, segment_estimates, n_phi_est, knot_t, kmax_phi })
}

/// Spiral-based 3D PR: polar angles and extents sampled from the knot
/// interpolation, azimuth accumulated with the 2D recurrence scaled by the
/// cone circumference.
pub fn design_pr3d_spiral(req: &Pr3dRequest) -> Result<Trajectory3D> {
    let spiral = spiral_intermediate(req)?;
    let n = spiral.total().round() as usize;
    if n < 2 {
        return Err(Error::DegenerateShape(format!("spiral design yields {n} projection(s)")));
    }

    let mut projections = Vec::with_capacity(n);
    let mut phi_total: f64 = 0.0;
    for m in 1..=n {
        let theta = spiral.theta_at(m as f64);
        let kmax = spiral.kmax_at(m as f64);
        projections.push(Projection3D {
            theta,
            phi: phi_total.rem_euclid(TAU),
            kmax,
            dcf_angular: 0.0,
            cone: None,
            phi_total: Some(phi_total),
        });
        phi_total += azimuth_step(&req.fov_phi, kmax * theta.sin(), phi_total);
    }

    let mut traj = Trajectory3D {
        projections,
        method: Method::SpiralBased,
        kind: req.kind,
        seed: req.seed,
        cone_counts: Vec::new(),
    };
    fill_dcf(&mut traj, req);
    Ok(traj)
}

/// Azimuthal gap on a ring of effective extent `ring_kmax`; clamped to a
/// full turn where the ring collapses (at the poles).
fn azimuth_step(fov_phi: &ShapeFn, ring_kmax: f64, phi: f64) -> f64 {
    let estimate = 1.0 / (ring_kmax * fov_phi.eval(phi + FRAC_PI_2));
    let step = 1.0 / (ring_kmax * fov_phi.eval(phi + 0.5 * estimate + FRAC_PI_2));
    if step.is_finite() && step > 0.0 {
        step.min(TAU)
    } else {
        TAU
    }
}

fn fill_dcf(traj: &mut Trajectory3D, req: &Pr3dRequest) {
    let weights = angular_dcf_3d(traj, &req.fov_theta, &req.fov_phi);
    for (p, w) in traj.projections.iter_mut().zip(weights) {
        p.dcf_angular = w;
    }
}
