//! Feasible-side EVOP as an ask-tell state machine.
//!
//! Each cycle measures the reference point (first cycle only) and its `±δ_e`
//! coordinate perturbations, fits local linear models, estimates Lipschitz
//! constants, and moves the reference to the measured point with the lowest
//! approximate Lagrangian among those whose robust constraint bounds clear
//! their back-offs.

mod config;
mod session;

pub use config::EvopConfig;
pub use session::{
    CycleData, CycleReport, EvopSession, ExperimentRecord, Measurement, Next, Purpose,
    SessionState, Suggestion, AUTO_SHRINK_HALVINGS, TIE_TOLERANCE,
};
