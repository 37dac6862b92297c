//! Disordered sphere and disc packings: generators, structure statistics and
//! ensemble-based model assessment.
//!
//! Lengths are measured in sphere diameters throughout.

pub mod contacts;
pub mod error;
pub mod generators;
pub mod geometry;
pub mod grid;
pub mod inference;
pub mod io;
pub mod order;
pub mod resistance;
pub mod rng;
pub mod stats;
pub mod tessellation;

pub use contacts::{build_contact_network, ContactNetwork, ContactRule};
pub use error::{Error, Result};
pub use geometry::{
    classify_spheres, min_gap, periodic_displacement, Boundary, Configuration, Provenance, Sphere,
    SpherePartition, Vec3,
};
pub use generators::{generate, interior_window, GeneratorSpec};
pub use grid::NeighborGrid;
pub use inference::{
    energy_distance_test, fit_and_check, ks_battery, min_contrast_fit, run_ensemble, ModelEnsemble, Panel, TestResult,
};
pub use io::{read_configuration, write_configuration, RunConfig};
pub use order::{bond_orientational, BondSet};
pub use resistance::{solve_bulk_resistance, BulkResistance, Electrodes};
pub use stats::{RadialFunction, Window};
pub use tessellation::{Tessellation, Triangulation};
