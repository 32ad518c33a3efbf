//! Finite-difference reference solutions of the wavy-annulus problem on a
//! body-fitted `(s, theta, z)` grid with `r = r_min + s (r_o(theta) - r_min)`.

mod linalg;
mod slice;
mod solver;
mod study;

pub use linalg::{bicgstab, CsrBuilder, CsrMatrix, Ilu0, SolveReport};
pub use slice::{read_wall_slice, write_wall_slice, WallSlice, WALL_SLICE_MAGIC, WALL_SLICE_VERSION};
pub use solver::{solve_reference, FdField, FdGrid, Inlet, SolverOptions};
pub use study::{compare_fields, grid_study, nesting, observed_orders, GridChange};
