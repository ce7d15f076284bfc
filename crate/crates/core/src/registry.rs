//! Trajectory designers selected by mode name, and the versioned trajectory
//! file they read and write.

use std::collections::BTreeMap;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::design2d::{design_2d, Design2DRequest, ProjectionSet2D};
use crate::design3d::{design_cones, design_pr3d_cones, design_pr3d_spiral, ConeSet, Pr3dRequest, Trajectory3D};
use crate::error::{Error, Result};
use crate::sampling::{angular_dcf_2d, Dim, ProjectionKind, ProjectionTable};
use crate::shapes::{ShapeFn, ShapeSpec};

pub const SCHEMA: &str = "radial-fov/1";

/// Shapes and options handed to a designer. 3D polar shapes are already in
/// deflection-from-kz form.
#[derive(Clone, Debug)]
pub struct DesignInput {
    pub fov: Option<ShapeFn>,
    pub fov_theta: Option<ShapeFn>,
    pub fov_phi: Option<ShapeFn>,
    pub kmax: ShapeFn,
    pub kind: ProjectionKind,
    pub seed: u64,
}

impl DesignInput {
    pub fn planar(fov: ShapeFn, kmax: ShapeFn) -> Self {
        DesignInput { fov: Some(fov), fov_theta: None, fov_phi: None, kmax, kind: ProjectionKind::Full, seed: 0 }
    }

    pub fn volumetric(fov_theta: ShapeFn, fov_phi: ShapeFn, kmax: ShapeFn) -> Self {
        DesignInput {
            fov: None,
            fov_theta: Some(fov_theta),
            fov_phi: Some(fov_phi),
            kmax,
            kind: ProjectionKind::Full,
            seed: 0,
        }
    }

    pub fn with_kind(mut self, kind: ProjectionKind) -> Self {
        self.kind = kind;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    fn need(shape: &Option<ShapeFn>, flag: &str, mode: &str) -> Result<ShapeFn> {
        shape.clone().ok_or_else(|| Error::InvalidArgument(format!("mode {mode} needs a {flag} shape")))
    }

    /// 3D PR request built from the polar and azimuthal shapes.
    pub fn pr3d_request(&self, mode: &str) -> Result<Pr3dRequest> {
        Ok(Pr3dRequest::new(
            Self::need(&self.fov_theta, "fovt", mode)?,
            self.kmax.clone(),
            Self::need(&self.fov_phi, "fovp", mode)?,
            self.kind,
        )
        .with_seed(self.seed))
    }

    /// Largest FOV extent of the design, px.
    pub fn max_fov(&self) -> f64 {
        [&self.fov, &self.fov_theta, &self.fov_phi].into_iter().flatten().map(ShapeFn::max_value).fold(0.0, f64::max)
    }

    /// Named shapes as recorded in trajectory files.
    pub fn shapes(&self) -> BTreeMap<String, ShapeSpec> {
        let mut out = BTreeMap::new();
        let named = [("fov", &self.fov), ("fovt", &self.fov_theta), ("fovp", &self.fov_phi)];
        for (name, shape) in named {
            if let Some(s) = shape {
                out.insert(name.to_string(), s.spec());
            }
        }
        out.insert("kmax".to_string(), self.kmax.spec());
        out
    }
}

#[derive(Clone, Debug)]
pub enum Trajectory {
    Radial2D { set: ProjectionSet2D, fov: ShapeFn, kind: ProjectionKind },
    Cones(ConeSet),
    Radial3D(Trajectory3D),
}

impl Trajectory {
    pub fn len(&self) -> usize {
        match self {
            Trajectory::Radial2D { set, .. } => set.len(),
            Trajectory::Cones(c) => c.len(),
            Trajectory::Radial3D(t) => t.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> Dim {
        match self {
            Trajectory::Radial2D { .. } => Dim::Two,
            _ => Dim::Three,
        }
    }

    /// Projection table for sampling; cone sets carry no projections.
    pub fn table(&self) -> Result<ProjectionTable> {
        match self {
            Trajectory::Radial2D { set, fov, kind } => Ok(ProjectionTable::from_2d(set, fov, *kind)),
            Trajectory::Radial3D(t) => Ok(ProjectionTable::from_3d(t)),
            Trajectory::Cones(_) => {
                Err(Error::InvalidArgument("a cone set has no projections to sample".into()))
            }
        }
    }

    fn records(&self) -> Vec<ProjectionRecord> {
        match self {
            Trajectory::Radial2D { set, fov, .. } => set
                .angles
                .iter()
                .zip(&set.extents)
                .zip(angular_dcf_2d(set, fov))
                .map(|((&angle, &kmax), w)| ProjectionRecord {
                    theta: None,
                    phi: None,
                    angle: Some(angle),
                    kmax,
                    dcf_angular: Some(w),
                })
                .collect(),
            Trajectory::Cones(c) => c
                .deflections
                .iter()
                .zip(&c.extents)
                .map(|(&theta, &kmax)| ProjectionRecord { theta: Some(theta), phi: None, angle: None, kmax, dcf_angular: None })
                .collect(),
            Trajectory::Radial3D(t) => t
                .projections
                .iter()
                .map(|p| ProjectionRecord {
                    theta: Some(p.theta),
                    phi: Some(p.phi),
                    angle: None,
                    kmax: p.kmax,
                    dcf_angular: Some(p.dcf_angular),
                })
                .collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProjectionRecord {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub angle: Option<f64>,
    pub kmax: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dcf_angular: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryFile {
    pub schema: String,
    pub mode: String,
    pub kind: ProjectionKind,
    pub seed: u64,
    pub shapes: BTreeMap<String, ShapeSpec>,
    pub projections: Vec<ProjectionRecord>,
    #[serde(rename = "N")]
    pub n: usize,
}

impl TrajectoryFile {
    pub fn new(mode: &str, input: &DesignInput, traj: &Trajectory) -> Self {
        TrajectoryFile {
            schema: SCHEMA.to_string(),
            mode: mode.to_string(),
            kind: input.kind,
            seed: input.seed,
            shapes: input.shapes(),
            projections: traj.records(),
            n: traj.len(),
        }
    }

    /// Design input recorded in the file.
    pub fn input(&self) -> Result<DesignInput> {
        if self.schema != SCHEMA {
            return Err(Error::InvalidArgument(format!("unsupported schema `{}`", self.schema)));
        }
        let shape = |name: &str| self.shapes.get(name).map(ShapeFn::from_spec).transpose();
        let kmax = shape("kmax")?.ok_or_else(|| Error::InvalidArgument("trajectory file lacks a kmax shape".into()))?;
        Ok(DesignInput {
            fov: shape("fov")?,
            fov_theta: shape("fovt")?,
            fov_phi: shape("fovp")?,
            kmax,
            kind: self.kind,
            seed: self.seed,
        })
    }

    /// Re-runs the recorded design and checks it against the stored
    /// projections.
    pub fn rebuild(&self, registry: &DesignerRegistry) -> Result<(DesignInput, Trajectory)> {
        let input = self.input()?;
        let traj = registry.get(&self.mode)?.design(&input)?;
        if traj.len() != self.n || traj.records() != self.projections {
            return Err(Error::InvalidArgument("projections do not match the recorded design".into()));
        }
        Ok((input, traj))
    }
}

pub trait TrajectoryDesigner: Send + Sync {
    fn mode(&self) -> &'static str;
    fn dim(&self) -> Dim;
    fn design(&self, input: &DesignInput) -> Result<Trajectory>;
}

struct Pr2d;
struct Cones3d;
struct Pr3dCones;
struct Pr3dSpiral;

impl TrajectoryDesigner for Pr2d {
    fn mode(&self) -> &'static str {
        "pr2d"
    }

    fn dim(&self) -> Dim {
        Dim::Two
    }

    fn design(&self, input: &DesignInput) -> Result<Trajectory> {
        let fov = DesignInput::need(&input.fov, "fov", self.mode())?;
        let width = match input.kind {
            ProjectionKind::Full => std::f64::consts::PI,
            ProjectionKind::Half => 2.0 * std::f64::consts::PI,
        };
        let set = design_2d(&Design2DRequest::new(fov.clone(), input.kmax.clone()).with_width(width))?;
        Ok(Trajectory::Radial2D { set, fov, kind: input.kind })
    }
}

impl TrajectoryDesigner for Cones3d {
    fn mode(&self) -> &'static str {
        "cones3d"
    }

    fn dim(&self) -> Dim {
        Dim::Three
    }

    fn design(&self, input: &DesignInput) -> Result<Trajectory> {
        let fov_theta = DesignInput::need(&input.fov_theta, "fovt", self.mode())?;
        Ok(Trajectory::Cones(design_cones(&fov_theta, &input.kmax)?))
    }
}

impl TrajectoryDesigner for Pr3dCones {
    fn mode(&self) -> &'static str {
        "pr3d-cones"
    }

    fn dim(&self) -> Dim {
        Dim::Three
    }

    fn design(&self, input: &DesignInput) -> Result<Trajectory> {
        Ok(Trajectory::Radial3D(design_pr3d_cones(&input.pr3d_request(self.mode())?)?))
    }
}

impl TrajectoryDesigner for Pr3dSpiral {
    fn mode(&self) -> &'static str {
        "pr3d-spiral"
    }

    fn dim(&self) -> Dim {
        Dim::Three
    }

    fn design(&self, input: &DesignInput) -> Result<Trajectory> {
        Ok(Trajectory::Radial3D(design_pr3d_spiral(&input.pr3d_request(self.mode())?)?))
    }
}

pub struct DesignerRegistry {
    designers: BTreeMap<&'static str, Box<dyn TrajectoryDesigner>>,
}

impl Default for DesignerRegistry {
    fn default() -> Self {
        let mut reg = DesignerRegistry { designers: BTreeMap::new() };
        reg.register(Box::new(Pr2d));
        reg.register(Box::new(Cones3d));
        reg.register(Box::new(Pr3dCones));
        reg.register(Box::new(Pr3dSpiral));
        reg
    }
}

impl DesignerRegistry {
    pub fn global() -> &'static DesignerRegistry {
        static GLOBAL: OnceLock<DesignerRegistry> = OnceLock::new();
        GLOBAL.get_or_init(DesignerRegistry::default)
    }

    pub fn register(&mut self, designer: Box<dyn TrajectoryDesigner>) {
        self.designers.insert(designer.mode(), designer);
    }

    pub fn get(&self, mode: &str) -> Result<&dyn TrajectoryDesigner> {
        self.designers.get(mode).map(|d| d.as_ref()).ok_or_else(|| Error::UnknownDesigner(mode.to_string()))
    }

    pub fn modes(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.designers.keys().copied()
    }
}
