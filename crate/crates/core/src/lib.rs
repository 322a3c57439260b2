//! Lock-in range, pull-out frequency and cycle-slip analysis of PLL-based
//! circuits with a sinusoidal phase-detector characteristic and an active PI
//! loop filter.
//!
//! The lock-in frequency is computed from the stable manifold of the saddle
//! equilibrium ([`separatrix`]), estimated by a perturbation series in the
//! filter ratio `tau2 / tau1` ([`approx`]), and checked against direct
//! trajectory simulation with cycle-slip detection ([`integrator`]).

pub mod approx;
pub mod error;
pub mod integrator;
pub mod model;
pub mod pd_char;
pub mod report;
pub mod separatrix;
pub mod sweep;

pub use approx::SeriesOrder;
pub use error::{Error, Result};
pub use integrator::{simulate, IntegratorConfig, TrajectoryRecord};
pub use model::{Equilibrium, EquilibriumKind, LoopParams, XState, YState};
pub use pd_char::Waveform;
pub use separatrix::{lock_in_frequency, pull_out_frequency, SeparatrixCurve, TraceConfig};
pub use sweep::{LockInReport, SweepGrid};
