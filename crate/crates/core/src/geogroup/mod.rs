//! Geospatial grouping of buildings by codeword similarity.
//!
//! Within each boundary the members are ordered by distance to the
//! boundary's median center; walking that order, each still-unassigned
//! building seeds a group that locks every unassigned building within
//! cosine distance `tau` of it. `k_ratio` = members / groups.

mod boundary;
mod group;
mod io;
mod median;

pub use boundary::{
    boundaries_from_column, boundaries_from_polygons, contains, make_tiles, run_boundaries, sweep, Boundary,
    BoundaryKind, BoundaryResult, Rings, RunOutput, SummaryRow, SweepRow,
};
pub use group::{
    check_tau, cosine_distance, group_buildings, near_order, GeoEntity, GroupAssignment, GroupConfig, DEFAULT_SWEEP,
    DEFAULT_TAU,
};
pub use io::{
    choropleth, group_points, read_boundary_polygons, read_entities, write_assignments, write_entities, write_summary,
    write_sweep,
};
pub use median::{median_center, objective, CenterMethod};
