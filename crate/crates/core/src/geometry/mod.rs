//! Hull and plate geometry: longitudinal frames, half-sections and the
//! scenario parameters that place them relative to the water.

mod mesh;
mod scenario;
mod section;

pub use mesh::{
    build_fuselage_mesh, Frame, GeometryConfig, HullMesh, Profile, ProfileStation, SectionKind, DEFAULT_ARC,
    DEFAULT_FRAMES,
};
pub use scenario::{AeroConfig, KOverride, MotionMode, PressureOptions, Scenario};
pub use section::{circle_props, section_props, ArcPanel, CrossSection, DepthTable, SectionProps, DEPTH_SAMPLES};
