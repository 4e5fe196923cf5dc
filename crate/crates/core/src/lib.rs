//! Self-similar convex energies on finitely ramified fractals.
//!
//! The crate builds the vertex sets of a fractal from a label table, evaluates
//! the one-level renormalization of a convex boundary energy, solves for the
//! scaling root and refines boundary data level by level into an extension that
//! keeps the renormalized energy constant.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod audit;
pub mod cascade;
pub mod config;
pub mod diagnostics;
pub mod energy;
pub mod error;
pub mod renorm;
pub mod topology;

pub use cascade::{
    build_cascade, energies, energy_at_level, minimal_extension, monotone_energy_check,
    self_similarity_residual, CellRecord, ExtensionOptions, ExtensionTrace, LevelRecord,
    MonotoneCheck, ThetaCascade,
};
pub use energy::{
    make_dirichlet, make_p_edge, make_perturbed, A2Metadata, DirichletForm, EdgePower, Energy,
    EnergyModel, FnEnergy,
};
pub use error::{Error, ErrorKind, Result};
pub use renorm::{
    quadratic_eigen, theta_bar_with, trace_form, EigenReport, HPrime, RenormResult, Renormalizer,
    SolverConfig, ThetaMethod, ThetaSolve,
};
pub use topology::{osc, Fractal, FractalSpec, LevelFunction, LevelVertexSet, Word};
pub use config::{EnergySpec, ExperimentConfig, Family};
