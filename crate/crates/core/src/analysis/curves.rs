//! Projection count versus FOV area (2D) or volume (3D), and the projection
//! savings of reduced-resolution extents.

use std::f64::consts::PI;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::design2d::{design_2d, Design2DRequest};
use crate::design3d::{design_pr3d_spiral, Pr3dRequest};
use crate::error::{Error, Result};
use crate::sampling::ProjectionKind;
use crate::shapes::ShapeFn;

/// Shape family scaled by a single size parameter (the largest width, px).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum Family {
    Circle,
    Ellipse { aspect: f64 },
    Rect { aspect: f64 },
    Sphere,
    /// Widths proportional to `ratios` (x, y, z), largest scaled to the size.
    Ellipsoid { ratios: [f64; 3] },
}

impl Family {
    pub fn parse(name: &str, aspect: f64) -> Result<Self> {
        if !(aspect.is_finite() && aspect >= 1.0) {
            return Err(Error::InvalidArgument(format!("aspect must be >= 1, got {aspect}")));
        }
        Ok(match name {
            "circle" => Family::Circle,
            "ellipse" => Family::Ellipse { aspect },
            "rect" | "rectangle" => Family::Rect { aspect },
            "sphere" => Family::Sphere,
            "ellipsoid" => Family::Ellipsoid { ratios: [1.0, 1.0, aspect] },
            other => return Err(Error::UnknownShape(other.to_string())),
        })
    }

    pub fn label(&self) -> String {
        match self {
            Family::Circle => "circle".into(),
            Family::Ellipse { aspect } => format!("ellipse-{aspect}"),
            Family::Rect { aspect } => format!("rect-{aspect}"),
            Family::Sphere => "sphere".into(),
            Family::Ellipsoid { ratios } => format!("ellipsoid-{}:{}:{}", ratios[0], ratios[1], ratios[2]),
        }
    }

    pub fn is_3d(&self) -> bool {
        matches!(self, Family::Sphere | Family::Ellipsoid { .. })
    }

    /// 2D FOV shape at `size`.
    pub fn shape_2d(&self, size: f64) -> Option<ShapeFn> {
        match *self {
            Family::Circle => Some(ShapeFn::circle(size)),
            Family::Ellipse { aspect } => Some(ShapeFn::ellipse(size, size / aspect)),
            Family::Rect { aspect } => Some(ShapeFn::rect(size, size / aspect)),
            _ => None,
        }
    }

    /// Polar and azimuthal FOV shapes at `size`.
    pub fn shapes_3d(&self, size: f64) -> Option<(ShapeFn, ShapeFn)> {
        match *self {
            Family::Sphere => Some((ShapeFn::circle(size), ShapeFn::circle(size))),
            Family::Ellipsoid { ratios } => {
                let top = ratios.iter().cloned().fold(0.0, f64::max);
                let [x, y, z] = ratios.map(|r| size * r / top);
                Some((ShapeFn::ellipse(x.max(y), z).polar(), ShapeFn::ellipse(x, y)))
            }
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyPoint {
    pub shape: String,
    pub size_param: f64,
    pub area_or_volume: f64,
    #[serde(rename = "N")]
    pub n: usize,
}

/// Area enclosed by a central-chord FOV: `(1/2) int (FOV/2)^2 dphi`.
pub fn shape_area(fov: &ShapeFn) -> f64 {
    let steps = 1 << 14;
    let h = 2.0 * PI / steps as f64;
    (0..steps)
        .map(|i| {
            let r = 0.5 * fov.eval((i as f64 + 0.5) * h);
            0.5 * r * r * h
        })
        .sum()
}

/// Volume of the polar solid of revolution clipped by the z-invariant
/// azimuthal prism.
pub fn shape_volume(fov_theta: &ShapeFn, fov_phi: &ShapeFn) -> f64 {
    let nt = 1024;
    let np = 1024;
    let ht = PI / nt as f64;
    let hp = 2.0 * PI / np as f64;
    (0..nt)
        .into_par_iter()
        .map(|i| {
            let theta = (i as f64 + 0.5) * ht;
            let s = theta.sin();
            let polar = 0.5 * fov_theta.eval(theta);
            (0..np)
                .map(|j| {
                    let phi = (j as f64 + 0.5) * hp;
                    let r = polar.min(0.5 * fov_phi.eval(phi) / s);
                    r.powi(3) / 3.0 * s * ht * hp
                })
                .sum::<f64>()
        })
        .sum()
}

/// Projection counts over a size sweep (constant extent 0.5 cycles/px,
/// full projections; spiral design in 3D).
pub fn efficiency_curve(family: &Family, sizes: &[f64]) -> Result<Vec<EfficiencyPoint>> {
    if sizes.iter().any(|&s| !(s.is_finite() && s > 0.0)) {
        return Err(Error::InvalidArgument("sizes must be positive".into()));
    }
    sizes
        .par_iter()
        .map(|&size| {
            let (measure, n) = if let Some(fov) = family.shape_2d(size) {
                let set = design_2d(&Design2DRequest::new(fov.clone(), ShapeFn::constant(0.5)))?;
                (shape_area(&fov), set.len())
            } else {
                let (ft, fp) = family.shapes_3d(size).expect("3D family");
                let req = Pr3dRequest::new(ft.clone(), ShapeFn::constant(0.5), fp.clone(), ProjectionKind::Full);
                (shape_volume(&ft, &fp), design_pr3d_spiral(&req)?.len())
            };
            Ok(EfficiencyPoint { shape: family.label(), size_param: size, area_or_volume: measure, n })
        })
        .collect()
}

/// Least-squares fit of `N = c * measure^p` for fixed `p`; returns `(c, R^2)`.
pub fn fit_power_law(points: &[EfficiencyPoint], exponent: f64) -> (f64, f64) {
    let xs: Vec<f64> = points.iter().map(|p| p.area_or_volume.powf(exponent)).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.n as f64).collect();
    let c = xs.iter().zip(&ys).map(|(x, y)| x * y).sum::<f64>() / xs.iter().map(|x| x * x).sum::<f64>();
    let mean = ys.iter().sum::<f64>() / ys.len() as f64;
    let ss_res: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - c * x).powi(2)).sum();
    let ss_tot: f64 = ys.iter().map(|y| (y - mean).powi(2)).sum();
    (c, 1.0 - ss_res / ss_tot)
}

/// CSV with header `shape,size_param,area_or_volume,N`.
pub fn curve_csv(points: &[EfficiencyPoint]) -> String {
    let mut out = String::from("shape,size_param,area_or_volume,N\n");
    for p in points {
        let _ = writeln!(out, "{},{},{},{}", p.shape, p.size_param, p.area_or_volume, p.n);
    }
    out
}

/// `(N_iso - N_var) / N_iso` for a 2D FOV designed with a constant extent
/// `kmax_iso` and with the variable extent `kmax_var`.
pub fn variable_kmax_savings(fov: &ShapeFn, kmax_var: &ShapeFn, kmax_iso: f64) -> Result<f64> {
    let count = |k: ShapeFn| -> Result<f64> { Ok(design_2d(&Design2DRequest::new(fov.clone(), k))?.len() as f64) };
    let iso = count(ShapeFn::constant(kmax_iso))?;
    let var = count(kmax_var.clone())?;
    Ok((iso - var) / iso)
}

/// 3D counterpart using full-projection spiral designs with a variable polar
/// extent.
pub fn variable_kmax_savings_3d(
    fov_theta: &ShapeFn,
    fov_phi: &ShapeFn,
    kmax_theta_var: &ShapeFn,
    kmax_iso: f64,
) -> Result<f64> {
    let count = |k: ShapeFn| -> Result<f64> {
        let req = Pr3dRequest::new(fov_theta.clone(), k, fov_phi.clone(), ProjectionKind::Full);
        Ok(design_pr3d_spiral(&req)?.len() as f64)
    };
    let iso = count(ShapeFn::constant(kmax_iso))?;
    let var = count(kmax_theta_var.clone())?;
    Ok((iso - var) / iso)
}

/// Reduced-resolution combinations of FOV and extent at comparable size:
/// circle/star, and dual ellipse, rectangle and diamond, and an oval FOV
/// with an elliptical extent. Minimum resolution 1 px in all cases.
pub fn variable_extent_set(size: f64) -> Result<Vec<(&'static str, ShapeFn, ShapeFn)>> {
    let r2 = 2f64.sqrt();
    let rr = 1.72f64.sqrt();
    let ellipse = ShapeFn::ellipse(size * r2, size / r2);
    let rect = ShapeFn::rect(size * rr, size / rr);
    let diamond = ShapeFn::diamond(size, size);
    Ok(vec![
        ("circle/star", ShapeFn::circle(size), ShapeFn::star(0.25, 0.5)),
        ("ellipse/dual", ellipse.clone(), ellipse.dual(0.5)),
        ("rect/dual", rect.clone(), rect.dual(0.5)),
        ("diamond/dual", diamond.clone(), diamond.dual(0.5)),
        ("oval/ellipse", ShapeFn::stadium(size * r2, size / r2)?, ShapeFn::ellipse(0.5, 0.25)),
    ])
}

/// Ellipsoid FOV elongated 2:1 along z with an extent halved along kz.
pub fn reduced_kz_ellipsoid(size: f64) -> (ShapeFn, ShapeFn, ShapeFn) {
    let fov_theta = ShapeFn::ellipse(size, 2.0 * size).polar();
    let fov_phi = ShapeFn::circle(size);
    let kmax_theta = ShapeFn::ellipse(0.5, 0.25).polar();
    (fov_theta, fov_phi, kmax_theta)
}
