//! Sorted-ℓ1 penalized regression (SLOPE) with regularization schedules
//! derived from stepdown multiple-testing procedures, a group variant, and a
//! simulation lab for measuring error-rate control.

pub mod cli;
pub mod design;
pub mod group;
pub mod io;
pub mod error;
pub mod schedules;
pub mod sim;
pub mod solver;
pub mod sorted_l1;
pub mod stats;
pub mod stepdown;

pub use design::DesignMatrix;
pub use error::{Error, Result};
pub use sorted_l1::{LambdaSchedule, ScheduleParams, ScheduleRule};
