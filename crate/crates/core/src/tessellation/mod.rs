//! Delaunay triangulation, Voronoi tessellation and cell-based statistics.

mod cells;
mod delaunay;
pub mod predicates;
mod voronoi;

pub use cells::{
    cell_statistics, edge_lengths, escape_fraction, gamma_fit, local_density, quadroctahedricity,
    simplex_shape_metrics, tetrahedricity, topological_density, CellRecord, CellStats,
    EscapeDistribution, GammaFit, Histogram, LocalDensity, SimplexShape, Summary,
    TopologicalDensity,
};
pub use delaunay::{circumcenter2, circumcenter3, Triangulation, VertexKind, NONE};
pub use voronoi::{Tessellation, VoronoiCell, VoronoiFace};
