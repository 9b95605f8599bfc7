//! Barter exchange: integral allocation search, LP relaxation and
//! dependent rounding that keeps each agent's net value nearly balanced.

pub mod cli;
pub mod io;
pub mod lp;
pub mod model;
pub mod oracle;
pub mod par;
pub mod rational;
pub mod rounding;
pub mod vbm;
pub mod verify;
