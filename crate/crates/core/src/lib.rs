//! Simultaneous reconstruction of a time-dependent heat source `F(t)` and
//! the initial temperature `u₀(x)` of
//!
//! ```text
//! u_t = u_xx + F(t),   (x, t) ∈ (0, L) × (0, t_f),   u(0, t) = u(L, t) = 0
//! ```
//!
//! from the final-time profile `u(x, t_f)` and the history `u(x*, t)` at an
//! interior sensor.
//!
//! Both unknowns are polynomials, so the temperature is linear in their
//! coefficients through Green's-function sensitivity coefficients
//! ([`forward`]). The coefficients minimize a Tikhonov functional
//! ([`objective`]) with a Fletcher–Reeves conjugate-gradient method and
//! exact line search ([`cgm`]). [`harness`] generates manufactured data,
//! evaluates errors and runs sweeps.
//!
//! ```no_run
//! use heatsource_core::harness::{run_inversion, InversionSpec, ManufacturedCase};
//!
//! let case = ManufacturedCase::sine_decay(2.97)?;
//! let inv = run_inversion(&case, &InversionSpec::default())?;
//! println!("E_F = {:e}, E_u0 = {:e}", inv.report.e_f, inv.report.e_u0);
//! # Ok::<(), heatsource_core::Error>(())
//! ```

pub mod cgm;
pub mod csv_out;
pub mod error;
pub mod forward;
pub mod harness;
pub mod objective;
pub mod series;

pub use cgm::{
    solve, ConvergenceReport, InitPolicy, IterationRecord, IterationTrace, SolveOutcome,
    SolverConfig, StationarityCheck, Status, Variant,
};
pub use error::{Block, Error, Result};
pub use forward::{
    ForwardModel, Geometry, MeasurementMesh, PolyParams, Probe, Responses, SensitivityRow,
    SensitivityTables,
};
pub use harness::{ErrorReport, InversionSpec, ManufacturedCase};
pub use objective::{Measurements, Objective, ObjectiveConfig};
pub use series::{Eigenvalue, TruncationPolicy};
