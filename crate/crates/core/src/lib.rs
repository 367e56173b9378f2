//! Steady-state synthesis for the signal-to-noise ratio per unit time of a
//! periodically pulsed spin-1/2 ensemble.
//!
//! Each cycle consists of a control period of normalized length `T_c`
//! followed by a detection window of length 1. For a measurement point `M`
//! the detection window relaxes the state to `S = relax(M, 1)`, and the
//! control must bring `S` back to `M` in minimum time. The figure of merit
//! is `Q(M) = y_m / √(1 + T_c)`.
//!
//! * [`bloch`]: normalized dynamics, relaxation and rotation maps.
//! * [`synthesis`]: optimal control structure for every `M`, boundary
//!   curves and the three synthesis regimes.
//! * [`qsurface`]: travel times, control times and the Q surface.
//! * [`ernst`]: the Ernst solution and numerical confirmations of its
//!   optimality.
//! * [`oracle`]: independent ODE-based checks of the closed forms.
//! * [`verify`]: the bundled verification suite.

pub mod bloch;
pub mod ernst;
pub mod error;
pub mod ode;
pub mod optim;
pub mod oracle;
pub mod qsurface;
pub mod synthesis;
pub mod verify;

pub use bloch::{total_snr, BlochState, ExperimentTiming, RelaxationPair};
pub use ernst::{ernst_solution, maximize_on_ellipsoid, maximize_q_global, q_max_surface, ErnstSolution};
pub use error::{Error, Result};
pub use qsurface::{control_time, q_grid, q_value, time_magic, time_vertical, QGrid, QSample, Trajectory};
pub use synthesis::{classify, magic_plane, regime, regime_boundaries, ControlStructure, SynthesisRegime};
