//! Projection angles and extents for an arbitrary `FOV(phi)` / `kmax(phi)`
//! pair.
//!
//! Adjacent spokes at angle `phi` separated by `dTheta` limit the FOV
//! perpendicular to them to `1 / (kmax(phi) * dTheta)`. The angles are
//! therefore generated sequentially with
//! `dTheta = 1 / (kmax(mid) * FOV(mid + pi/2))`, where `mid` is a first-order
//! estimate of the midpoint between the current and the next angle, and the
//! resulting set is rescaled so that it tiles the requested angular width.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::shapes::ShapeFn;

/// Angles probed when checking that a request is not degenerate.
const GUARD_ANGLES: usize = 4096;
const MAX_STEPS: usize = 50_000_000;

/// Constraint on the number of projections returned.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
#[derive(Default)]
pub enum Parity {
    #[default]
    Any,
    Even,
    Odd,
    MultipleOf(u32),
}

impl Parity {
    fn admits(self, n: usize) -> bool {
        match self {
            Parity::Any => true,
            Parity::Even => n.is_multiple_of(2),
            Parity::Odd => n % 2 == 1,
            Parity::MultipleOf(m) => m > 0 && n.is_multiple_of(m as usize),
        }
    }

    fn modulus(self) -> usize {
        match self {
            Parity::Any => 1,
            Parity::Even | Parity::Odd => 2,
            Parity::MultipleOf(m) => m.max(1) as usize,
        }
    }
}


#[derive(Clone, Debug)]
pub struct Design2DRequest {
    pub fov: ShapeFn,
    pub kmax: ShapeFn,
    pub phi0: f64,
    pub phi_width: f64,
    pub parity: Parity,
}

impl Design2DRequest {
    /// Full-projection request over `[0, pi)`.
    pub fn new(fov: ShapeFn, kmax: ShapeFn) -> Self {
        Design2DRequest { fov, kmax, phi0: 0.0, phi_width: PI, parity: Parity::Any }
    }

    pub fn with_start(mut self, phi0: f64) -> Self {
        self.phi0 = phi0;
        self
    }

    pub fn with_width(mut self, phi_width: f64) -> Self {
        self.phi_width = phi_width;
        self
    }

    pub fn with_parity(mut self, parity: Parity) -> Self {
        self.parity = parity;
        self
    }

    /// Local angular Nyquist product `kmax(phi) * FOV(phi + pi/2)`.
    pub fn density(&self, phi: f64) -> f64 {
        self.kmax.eval(phi) * self.fov.eval(phi + FRAC_PI_2)
    }

    fn validate(&self) -> Result<()> {
        if !self.phi0.is_finite() {
            return Err(Error::InvalidArgument(format!("phi0 must be finite, got {}", self.phi0)));
        }
        if !(self.phi_width > 0.0 && self.phi_width <= TAU) {
            return Err(Error::InvalidArgument(format!(
                "phi_width must lie in (0, 2pi], got {}",
                self.phi_width
            )));
        }
        if let Parity::MultipleOf(0) = self.parity {
            return Err(Error::InvalidArgument("parity multiple must be positive".into()));
        }
        Ok(())
    }

    /// Rejects requests whose widest gap would exceed a full turn's share of
    /// `phi_width`: `min_phi kmax * FOV(phi + pi/2) * phi_width < 2 pi`.
    fn guard(&self) -> Result<()> {
        let min_density = (0..GUARD_ANGLES)
            .map(|i| self.density(PI * i as f64 / GUARD_ANGLES as f64))
            .fold(f64::INFINITY, f64::min);
        if !(min_density.is_finite() && min_density > 0.0) {
            return Err(Error::DegenerateShape(format!("non-positive sampling density {min_density}")));
        }
        if min_density * self.phi_width < TAU {
            return Err(Error::DegenerateShape(format!(
                "kmax*FOV product {min_density:.4} over width {:.4} is below one full turn",
                self.phi_width
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProjectionSet2D {
    /// Projection angles in radians, strictly increasing from `phi0`.
    pub angles: Vec<f64>,
    /// Projection extents in cycles/px.
    pub extents: Vec<f64>,
    /// Factor applied to the raw angles so the set tiles `phi_width`.
    pub scale_factor: f64,
    pub phi0: f64,
    pub phi_width: f64,
    /// Largest gap of the raw (unscaled) design.
    pub max_designed_gap: f64,
}

impl ProjectionSet2D {
    pub fn len(&self) -> usize {
        self.angles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.angles.is_empty()
    }

    /// Gaps between consecutive angles, including the closing gap back to
    /// `phi0 + phi_width`.
    pub fn gaps(&self) -> Vec<f64> {
        let end = self.phi0 + self.phi_width;
        self.angles
            .windows(2)
            .map(|w| w[1] - w[0])
            .chain(self.angles.last().map(|&last| end - last))
            .collect()
    }
}

/// One step of the recurrence: the gap following `theta`.
fn next_gap(req: &Design2DRequest, theta: f64) -> f64 {
    let estimate = 1.0 / req.density(theta);
    1.0 / req.density(theta + 0.5 * estimate)
}

/// Raw angles `theta[0] = phi0, ...`, continued at least until one exceeds
/// `phi0 + phi_width`.
struct RawSequence<'a> {
    req: &'a Design2DRequest,
    thetas: Vec<f64>,
}

impl<'a> RawSequence<'a> {
    fn generate(req: &'a Design2DRequest) -> Result<Self> {
        let end = req.phi0 + req.phi_width;
        let mut seq = RawSequence { req, thetas: vec![req.phi0] };
        while *seq.thetas.last().unwrap() <= end {
            seq.push()?;
        }
        Ok(seq)
    }

    fn push(&mut self) -> Result<()> {
        if self.thetas.len() >= MAX_STEPS {
            return Err(Error::DegenerateShape(format!("more than {MAX_STEPS} projections")));
        }
        let theta = *self.thetas.last().unwrap();
        let gap = next_gap(self.req, theta);
        if !(gap.is_finite() && gap > 0.0) {
            return Err(Error::DegenerateShape(format!("invalid angular gap {gap} at {theta}")));
        }
        self.thetas.push(theta + gap);
        Ok(())
    }

    /// Raw angle with zero-based index `i`, extending the sequence if needed.
    fn at(&mut self, i: usize) -> Result<f64> {
        while self.thetas.len() <= i {
            self.push()?;
        }
        Ok(self.thetas[i])
    }
}

/// Chooses the count from the last two raw angles: keep the one closer to
/// the end of the width. Equal distances keep the larger count.
fn choose_count(thetas: &[f64], end: f64) -> usize {
    let n = thetas.len();
    let over = thetas[n - 1] - end;
    let under = end - thetas[n - 2];
    if over <= under {
        n - 1
    } else {
        n - 2
    }
}

/// Nearest admissible count to `n` (ties go to the larger), never above
/// `n + modulus`.
fn adjust_for_parity(n: usize, parity: Parity) -> usize {
    let m = parity.modulus();
    (0..=m)
        .flat_map(|d| [n + d, n.saturating_sub(d)])
        .find(|&c| c > 0 && parity.admits(c))
        .unwrap_or(n)
}

fn run(req: &Design2DRequest, min_count: usize) -> Result<ProjectionSet2D> {
    req.validate()?;
    let end = req.phi0 + req.phi_width;
    let mut seq = RawSequence::generate(req)?;
    let mut n = adjust_for_parity(choose_count(&seq.thetas, end), req.parity);
    if n < min_count {
        if min_count > 1 {
            return Err(Error::DegenerateShape(format!("design yields {n} projection(s)")));
        }
        n = 1;
    }
    let closing = seq.at(n)?;
    let scale_factor = req.phi_width / (closing - req.phi0);
    let max_designed_gap = seq.thetas[..=n].windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
    let angles: Vec<f64> =
        seq.thetas[..n].iter().map(|&t| scale_factor * (t - req.phi0) + req.phi0).collect();
    let extents = angles.iter().map(|&a| req.kmax.eval(a)).collect();
    Ok(ProjectionSet2D {
        angles,
        extents,
        scale_factor,
        phi0: req.phi0,
        phi_width: req.phi_width,
        max_designed_gap,
    })
}

/// Designs projection angles and extents for the requested shapes.
pub fn design_2d(req: &Design2DRequest) -> Result<ProjectionSet2D> {
    req.guard()?;
    run(req, 2)
}

/// Variant without the degeneracy guard that always returns at least one
/// projection; used for sampling small cones near the pole.
pub(crate) fn design_2d_relaxed(req: &Design2DRequest) -> Result<ProjectionSet2D> {
    run(req, 1)
}

/// Count of equally spaced full projections supporting a circular FOV:
/// `pi * kmax * fov`.
pub fn isotropic_count(fov: f64, kmax: f64) -> f64 {
    PI * kmax * fov
}
