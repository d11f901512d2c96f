//! The router with every S1/2 and P3/2 sublevel kept.

mod basis;
mod decay;
mod hamiltonian;
mod optimize;
mod router;

pub use basis::{build_basis, AtomRole, BasisState, MultilevelBasis, SixLevelAtom};
pub use decay::{gamma_total, DecayModel};
pub use hamiltonian::build_full_hamiltonian;
pub use optimize::{evaluate_objective, optimize_geometry, Bounds, Objective, OptimizedGeometry};
pub use router::{
    full_model_circulation, router_model, run_router, run_router_with, triangle_dynamics, AuxConfig, BranchAmplitudes, FullModel,
    RouterPulses, RouterReport, RouterRun, RouterSetup, TriangleDynamics, LEFT_RECEIVER, RIGHT_RECEIVER, SENDER,
};
