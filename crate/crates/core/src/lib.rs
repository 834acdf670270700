//! Optical forces on chains of scatterers inside a two-mode waveguide.
//!
//! Beads are described by 4×4 scattering matrices acting on the forward and
//! backward amplitudes of two guided modes. Chains are solved with transfer
//! matrices, forces follow from the momentum flux balance at each bead, and
//! a paraxial estimator provides coupling coefficients for dielectric
//! spheres in a square-core guide.

// NaN inputs must fail the range checks
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod chain;
pub mod equilibria;
pub mod error;
pub mod force;
pub mod paraxial;
pub mod scatter;

pub use chain::{
    fabry_perot_oracle, solve_chain, to_transfer, BeadFields, ChainConfig, FieldState, Injection,
    PreparedChain, SeriesSolution, TransferMatrix,
};
pub use equilibria::{
    binding_distance_curve, find_equilibria, force_vs_distance, scan_stability_region,
    tractor_cutoff, Axis, BindingRow, CellStatus, DistanceRange, EquilibriumPoint, ForceSample,
    MapCell, ScanSettings, StabilityMap, TwoBeadSystem,
};
pub use error::{Error, Result};
pub use force::{
    chain_forces, closed_form_2p, closed_form_4p, particle_force, tractor_threshold, ForceResult,
};
pub use num_complex::Complex64;
pub use paraxial::{
    estimate_coupling, to_scatter_params, BeadSpec, CouplingEstimate, WaveguideSpec,
};
pub use scatter::{
    build_four_port, build_general_four_port, build_two_port, check_unitarity, propagation_matrix,
    GeneralFourPortParams, ModePair, ScatterMatrix, SimpleFourPortParams,
};
