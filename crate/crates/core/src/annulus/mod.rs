//! Wavy-annulus conduction benchmark with a body-fitted shell regularizer.

mod audit;
mod flux;
mod geometry;
mod problem;
mod shell;
mod train;

pub use audit::{dense_wall_grid, wall_bc_audit, wall_reference_compare, wall_values, WallComparison};
pub use flux::FluxProfile;
pub use geometry::AnnulusGeometry;
pub use problem::{
    cylindrical_residual, cylindrical_residuals, input_map, normal_coeffs, residual_layout, residuals_from_jets,
    six_term_loss, wall_normal_derivative, wall_normal_derivatives, wall_points, Stage2Cloud, TermBreakdown,
    TermWeights, R, THETA, Z,
};
pub use shell::{build_shell_bank, shell_resgrad_loss, ShellBank, ShellSpec};
pub use train::{audit_stage2, train_stage2, Stage2Audit, Stage2Problem, Stage2Run};
