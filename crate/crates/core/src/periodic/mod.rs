//! Quasiperiodic machinery: Ewald-summed Green functions, quasiperiodic
//! layer operators and exterior DtN maps, Case 1-3 capacitance matrices,
//! Bloch bands and bandgap reports, and honeycomb Dirac-cone analysis.

pub mod ewald;
pub mod lattice;
pub mod operators;

pub use ewald::{erfc_complex, EwaldParams, QuasiPeriodicContext};
pub use lattice::Lattice3D;
pub use operators::{
    assemble_qp_operators, bloch_direct, evaluate_bloch_mode, exterior_qp_dtn, exterior_qp_flux,
    interior_dtn_matrix, validate_cell_scene, QpOperators,
};
