//! Radial k-space trajectory design for anisotropic fields of view.
//!
//! Shapes describe FOV and k-space extent as functions of angle; the design
//! modules turn them into 2D and 3D projection sets, which can be sampled,
//! gridded and analysed for aliasing.

pub mod analysis;
pub mod design2d;
pub mod design3d;
pub mod error;
pub mod gridding;
pub mod registry;
pub mod sampling;
pub mod shapes;

pub use error::{Error, Result};
pub use registry::{DesignInput, DesignerRegistry, Trajectory, TrajectoryDesigner, TrajectoryFile};
pub use shapes::{ShapeFn, ShapeRegistry};
