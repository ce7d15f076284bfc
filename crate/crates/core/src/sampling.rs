//! Radial samples along designed projections and their separable density
//! compensation.
//!
//! Every projection carries the same normalized radial positions `u_j`, scaled
//! by its own extent, so one radial weight table serves all projections. The
//! total weight of a sample is `radial(u_j) * angular(n)`; with the angular
//! weight `Kmax / FOV(theta + pi/2)` (2D) or
//! `Kmax / (FOV_theta(theta + pi/2) * FOV_phi(phi + pi/2))` (3D) the product is
//! the k-space area (volume) each sample represents.

use std::f64::consts::{FRAC_PI_2, PI};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::design2d::ProjectionSet2D;
use crate::design3d::{Method, Trajectory3D};
use crate::error::{Error, Result};
use crate::shapes::ShapeFn;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProjectionKind {
    /// Spans `[-kmax, kmax]` through the origin.
    Full,
    /// Spans `[0, kmax]`.
    Half,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Dim {
    #[serde(rename = "2d")]
    Two,
    #[serde(rename = "3d")]
    Three,
}

impl Dim {
    pub fn rank(self) -> usize {
        match self {
            Dim::Two => 2,
            Dim::Three => 3,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TableEntry {
    pub direction: [f64; 3],
    pub kmax: f64,
    pub angular: f64,
}

/// Projections reduced to direction, extent and angular weight.
#[derive(Clone, Debug, PartialEq)]
pub struct ProjectionTable {
    pub dim: Dim,
    pub kind: ProjectionKind,
    pub entries: Vec<TableEntry>,
}

impl ProjectionTable {
    pub fn from_2d(set: &ProjectionSet2D, fov: &ShapeFn, kind: ProjectionKind) -> Self {
        let weights = angular_dcf_2d(set, fov);
        let entries = set
            .angles
            .iter()
            .zip(&set.extents)
            .zip(weights)
            .map(|((&a, &kmax), angular)| TableEntry { direction: [a.cos(), a.sin(), 0.0], kmax, angular })
            .collect();
        ProjectionTable { dim: Dim::Two, kind, entries }
    }

    pub fn from_3d(traj: &Trajectory3D) -> Self {
        let entries = traj
            .projections
            .iter()
            .map(|p| TableEntry { direction: p.direction(), kmax: p.kmax, angular: p.dcf_angular })
            .collect();
        ProjectionTable { dim: Dim::Three, kind: traj.kind, entries }
    }

    pub fn max_kmax(&self) -> f64 {
        self.entries.iter().map(|e| e.kmax).fold(0.0, f64::max)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KSample {
    pub k: [f64; 3],
    pub dcf: f64,
    pub projection: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SampledKSpace {
    pub dim: Dim,
    pub kind: ProjectionKind,
    pub samples: Vec<KSample>,
    /// Radial spacing at the longest projection, cycles/px.
    pub dkr: f64,
    /// Shared normalized radial positions in `[-1, 1]`.
    pub positions: Vec<f64>,
    pub radial_weights: Vec<f64>,
}

impl SampledKSpace {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn total_weight(&self) -> f64 {
        self.samples.iter().map(|s| s.dcf).sum()
    }
}

#[derive(Clone, Copy, Debug)]
pub struct SamplingOptions {
    /// Radial spacing at the longest projection, cycles/px.
    pub dkr: f64,
    /// Widest FOV of the design; enables the readout spacing check.
    pub max_fov: Option<f64>,
    pub allow_coarse: bool,
}

impl SamplingOptions {
    pub fn new(dkr: f64) -> Self {
        SamplingOptions { dkr, max_fov: None, allow_coarse: false }
    }

    /// Default spacing `1 / max FOV`, checked against that bound.
    pub fn for_fov(max_fov: f64) -> Self {
        SamplingOptions { dkr: 1.0 / max_fov, max_fov: Some(max_fov), allow_coarse: false }
    }
}

/// Places equally spaced radial samples on every projection and attaches
/// `radial * angular` weights. Output order follows the projection order.
pub fn sample_projections(table: &ProjectionTable, opts: &SamplingOptions) -> Result<SampledKSpace> {
    if !(opts.dkr.is_finite() && opts.dkr > 0.0) {
        return Err(Error::InvalidArgument(format!("radial spacing must be positive, got {}", opts.dkr)));
    }
    if let Some(fov) = opts.max_fov {
        let limit = 1.0 / fov;
        if opts.dkr > limit * (1.0 + 1e-12) && !opts.allow_coarse {
            return Err(Error::SpacingTooCoarse { dkr: opts.dkr, limit });
        }
    }
    let kmax_ref = table.max_kmax();
    let steps = ((kmax_ref / opts.dkr) - 1e-9).ceil().max(1.0) as i64;
    let first = match table.kind {
        ProjectionKind::Full => -steps,
        ProjectionKind::Half => 0,
    };
    let positions: Vec<f64> = (first..=steps).map(|j| j as f64 / steps as f64).collect();
    let mut radial_weights = radial_dcf(table.dim, table.kind, &positions);
    let edge = edge_cell_weight(table.dim, 1.0 / steps as f64);
    for (w, u) in radial_weights.iter_mut().zip(&positions) {
        if u.abs() == 1.0 {
            *w = edge;
        }
    }

    let samples = table
        .entries
        .par_iter()
        .enumerate()
        .flat_map_iter(|(n, e)| {
            positions.iter().zip(&radial_weights).map(move |(&u, &w)| {
                let r = u * e.kmax;
                KSample {
                    k: [r * e.direction[0], r * e.direction[1], r * e.direction[2]],
                    dcf: w * e.angular,
                    projection: n,
                }
            })
        })
        .collect();

    Ok(SampledKSpace {
        dim: table.dim,
        kind: table.kind,
        samples,
        dkr: kmax_ref / steps as f64,
        positions,
        radial_weights,
    })
}

/// `Kmax[n] / FOV(theta[n] + pi/2)` for each projection.
pub fn angular_dcf_2d(set: &ProjectionSet2D, fov: &ShapeFn) -> Vec<f64> {
    set.angles.iter().zip(&set.extents).map(|(&a, &k)| k / fov.eval(a + FRAC_PI_2)).collect()
}

/// Product of the polar and azimuthal compensation factors. Full-projection
/// spiral designs additionally ramp the weights over the last two half-turns
/// of accumulated azimuth (see [`spiral_end_ramp`]).
pub fn angular_dcf_3d(traj: &Trajectory3D, fov_theta: &ShapeFn, fov_phi: &ShapeFn) -> Vec<f64> {
    let mut weights: Vec<f64> = traj
        .projections
        .iter()
        .map(|p| p.kmax / (fov_theta.eval(p.theta + FRAC_PI_2) * fov_phi.eval(p.phi + FRAC_PI_2)))
        .collect();
    if traj.method == Method::SpiralBased && traj.kind == ProjectionKind::Full {
        for (w, r) in weights.iter_mut().zip(spiral_end_ramp(traj)) {
            *w *= r;
        }
    }
    weights
}

/// Ramp factors for a full-projection spiral: within each of the windows
/// `(end - 2pi, end - pi]` and `(end - pi, end]` of accumulated azimuth the
/// factor falls linearly in theta from 1 to 0.5; elsewhere it is 1.
pub fn spiral_end_ramp(traj: &Trajectory3D) -> Vec<f64> {
    let totals: Vec<f64> = traj.projections.iter().map(|p| p.phi_total.unwrap_or(0.0)).collect();
    let mut factors = vec![1.0; totals.len()];
    let Some(&end) = totals.last() else {
        return factors;
    };
    for (lo, hi) in [(end - 2.0 * PI, end - PI), (end - PI, end)] {
        let members: Vec<usize> = (0..totals.len()).filter(|&i| totals[i] > lo && totals[i] <= hi).collect();
        let (Some(&a), Some(&b)) = (members.first(), members.last()) else {
            continue;
        };
        let (ta, tb) = (traj.projections[a].theta, traj.projections[b].theta);
        for &i in &members {
            let frac = if tb > ta { (traj.projections[i].theta - ta) / (tb - ta) } else { 1.0 };
            factors[i] = 1.0 - 0.5 * frac;
        }
    }
    factors
}

/// Radial weights for equally spaced normalized positions: `|u| du` in 2D,
/// `u^2 du` in 3D. The origin gets the exact measure of the half-spacing
/// disk (ball) per unit angle; on full projections that cell is shared by
/// the two half-spokes of each diameter, doubling its weight.
pub fn radial_dcf(dim: Dim, kind: ProjectionKind, positions: &[f64]) -> Vec<f64> {
    let spacing = positions
        .iter()
        .map(|u| u.abs())
        .filter(|&u| u > 0.0)
        .fold(f64::INFINITY, f64::min);
    if !spacing.is_finite() {
        return vec![1.0; positions.len()];
    }
    let share = match kind {
        ProjectionKind::Full => 2.0,
        ProjectionKind::Half => 1.0,
    };
    positions
        .iter()
        .map(|&u| {
            let r = u.abs();
            match (dim, r > 0.5 * spacing) {
                (Dim::Two, true) => r * spacing,
                (Dim::Three, true) => r * r * spacing,
                // (d/2)^2 / 2 per radian
                (Dim::Two, false) => share * spacing * spacing / 8.0,
                // (d/2)^3 / 3 per steradian
                (Dim::Three, false) => share * spacing.powi(3) / 24.0,
            }
        })
        .collect()
}

/// Exact measure of the outermost cell `[1 - d/2, 1]` per unit angle: the
/// support ends at the last sample, so its cell is only half as wide.
pub fn edge_cell_weight(dim: Dim, spacing: f64) -> f64 {
    let inner = 1.0 - 0.5 * spacing;
    match dim {
        Dim::Two => 0.5 * (1.0 - inner * inner),
        Dim::Three => (1.0 - inner.powi(3)) / 3.0,
    }
}

/// Scales weights to unit sum.
pub fn normalized(weights: &[f64]) -> Vec<f64> {
    let total: f64 = weights.iter().sum();
    weights.iter().map(|w| w / total).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design2d::{design_2d, Design2DRequest};
    use crate::design3d::{design_pr3d_spiral, Pr3dRequest};

    fn single(angle: f64, kmax: f64, kind: ProjectionKind) -> ProjectionTable {
        ProjectionTable {
            dim: Dim::Two,
            kind,
            entries: vec![TableEntry { direction: [angle.cos(), angle.sin(), 0.0], kmax, angular: 1.0 }],
        }
    }

    #[test]
    fn full_projection_diameter() {
        let s = sample_projections(&single(0.3, 0.5, ProjectionKind::Full), &SamplingOptions::new(0.01)).unwrap();
        assert_eq!(s.len(), 101);
        for smp in &s.samples {
            let r = smp.k[0].hypot(smp.k[1]);
            assert!(r <= 0.5 + 1e-12);
        }
    }

    #[test]
    fn orthogonal_projections_form_plus() {
        let mut t = single(0.0, 0.5, ProjectionKind::Full);
        t.entries.push(TableEntry { direction: [0.0, 1.0, 0.0], kmax: 0.5, angular: 1.0 });
        let s = sample_projections(&t, &SamplingOptions::new(0.1)).unwrap();
        assert!(s.samples.iter().all(|p| p.k[0].abs() < 1e-15 || p.k[1].abs() < 1e-15));
        assert_eq!(s.samples.iter().filter(|p| p.projection == 1).count(), 11);
    }

    #[test]
    fn default_spacing_for_circle_design() {
        let fov = ShapeFn::circle(250.0);
        let set = design_2d(&Design2DRequest::new(fov.clone(), ShapeFn::constant(0.5))).unwrap();
        let table = ProjectionTable::from_2d(&set, &fov, ProjectionKind::Full);
        let s = sample_projections(&table, &SamplingOptions::for_fov(250.0)).unwrap();
        assert_eq!(s.positions.len(), 251);
        assert_eq!(s.len(), 251 * 393);
        assert!(s.dkr <= 1.0 / 250.0 + 1e-15);
    }

    #[test]
    fn coarse_spacing_rejected_unless_allowed() {
        let t = single(0.0, 0.5, ProjectionKind::Full);
        let mut opts = SamplingOptions::for_fov(250.0);
        opts.dkr = 0.01;
        assert!(matches!(sample_projections(&t, &opts), Err(Error::SpacingTooCoarse { .. })));
        opts.allow_coarse = true;
        assert!(sample_projections(&t, &opts).is_ok());
        assert!(sample_projections(&t, &SamplingOptions::new(0.0)).is_err());
    }

    /// Exact ring areas for cells [0, 1/2], [1/2, 3/2], [3/2, 5/2].
    #[test]
    fn radial_weights_match_annulus_areas() {
        let ring = |a: f64, b: f64| PI * (b * b - a * a);
        let oracle = [ring(0.0, 0.5), ring(0.5, 1.5), ring(1.5, 2.5)];
        let w = radial_dcf(Dim::Two, ProjectionKind::Half, &[0.0, 1.0, 2.0]);
        for i in 0..3 {
            assert!((w[i] / w[1] - oracle[i] / oracle[1]).abs() < 1e-15);
        }
        assert_eq!(w[0] / w[1], 1.0 / 8.0);
        assert_eq!(w[2] / w[1], 2.0);
    }

    #[test]
    fn radial_weights_3d_quadratic() {
        let w = radial_dcf(Dim::Three, ProjectionKind::Half, &[0.0, 1.0, 2.0, 3.0]);
        assert_eq!(w[2] / w[1], 4.0);
        assert_eq!(w[3] / w[1], 9.0);
        // ball of radius 1/2 over 4pi steradians
        assert!((w[0] * 4.0 * PI - 4.0 / 3.0 * PI * 0.125).abs() < 1e-15);
        assert_eq!(normalized(&radial_dcf(Dim::Two, ProjectionKind::Half, &[0.0])), vec![1.0]);
    }

    #[test]
    fn full_projection_origin_is_shared() {
        let half = radial_dcf(Dim::Two, ProjectionKind::Half, &[0.0, 1.0]);
        let full = radial_dcf(Dim::Two, ProjectionKind::Full, &[-1.0, 0.0, 1.0]);
        assert_eq!(full[1], 2.0 * half[0]);
        assert_eq!(full[0], full[2]);
    }

    #[test]
    fn angular_weights_2d() {
        let fov = ShapeFn::ellipse(250.0, 75.0);
        let set = design_2d(&Design2DRequest::new(fov.clone(), ShapeFn::constant(0.5))).unwrap();
        let w = angular_dcf_2d(&set, &fov);
        assert_eq!(set.angles[0], 0.0);
        assert!((w[0] - 0.5 / 75.0).abs() < 1e-15);
        let iso = ShapeFn::circle(100.0);
        let set = design_2d(&Design2DRequest::new(iso.clone(), ShapeFn::constant(0.5))).unwrap();
        assert!(angular_dcf_2d(&set, &iso).iter().all(|&x| (x - 0.005).abs() < 1e-15));
    }

    #[test]
    fn dual_design_has_uniform_angular_weights() {
        let fov = ShapeFn::rect(80.0, 50.0);
        let kmax = fov.dual(0.5);
        let set = design_2d(&Design2DRequest::new(fov.clone(), kmax)).unwrap();
        let w = angular_dcf_2d(&set, &fov);
        for x in &w {
            assert!((x - w[0]).abs() <= 1e-9 * w[0]);
        }
    }

    #[test]
    fn total_weight_is_separable_and_covers_disk() {
        let fov = ShapeFn::circle(120.0);
        let set = design_2d(&Design2DRequest::new(fov.clone(), ShapeFn::constant(0.5))).unwrap();
        let table = ProjectionTable::from_2d(&set, &fov, ProjectionKind::Full);
        let s = sample_projections(&table, &SamplingOptions::for_fov(120.0)).unwrap();
        let n_pos = s.positions.len();
        for (i, smp) in s.samples.iter().enumerate() {
            assert_eq!(smp.dcf, s.radial_weights[i % n_pos] * table.entries[smp.projection].angular);
        }
        let area = PI * 0.25;
        assert!((s.total_weight() - area).abs() / area < 0.02, "{}", s.total_weight());
    }

    #[test]
    fn full_spiral_ramp_endpoints() {
        let traj = design_pr3d_spiral(&Pr3dRequest::sphere(38.0, 0.5, ProjectionKind::Full)).unwrap();
        let ramp = spiral_end_ramp(&traj);
        assert_eq!(*ramp.last().unwrap(), 0.5);
        let end = traj.projections.last().unwrap().phi_total.unwrap();
        let penultimate: Vec<usize> = (0..traj.len())
            .filter(|&i| {
                let t = traj.projections[i].phi_total.unwrap();
                t > end - 2.0 * PI && t <= end - PI
            })
            .collect();
        let (a, b) = (penultimate[0], *penultimate.last().unwrap());
        assert_eq!(ramp[a], 1.0);
        assert_eq!(ramp[b], 0.5);
        let mid_theta = 0.5 * (traj.projections[a].theta + traj.projections[b].theta);
        let frac = (mid_theta - traj.projections[a].theta)
            / (traj.projections[b].theta - traj.projections[a].theta);
        assert!((1.0 - 0.5 * frac - 0.75).abs() < 1e-12);
        assert!(ramp[..a].iter().all(|&r| r == 1.0));
    }

    #[test]
    fn isotropic_sphere_weights_equal_away_from_ramp() {
        let req = Pr3dRequest::sphere(30.0, 0.5, ProjectionKind::Half);
        let traj = design_pr3d_spiral(&req).unwrap();
        let w = angular_dcf_3d(&traj, &req.fov_theta, &req.fov_phi);
        assert!(w.iter().all(|&x| (x - w[0]).abs() < 1e-15));
    }
}
