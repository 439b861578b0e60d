//! Deterministic solver for the limiting aggregation-diffusion equation and
//! the one-particle dynamics it drives.

mod convolution;
mod mckean;
mod pde;
mod weak_form;

pub use convolution::{kernel_convolution, radial_cell_average, RadialPlan, VelocityField, VelocityPlan};
pub use mckean::{mckean_vlasov_simulate, McKeanCloud};
pub use pde::{choose_dt, pde_solve, pde_step, PdeConfig, PdeEvent, PdeEventKind, PdeSolution, PdeStepper};
pub use weak_form::{weak_form_residual, TestFunction};
