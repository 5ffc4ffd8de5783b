//! Experiment front end for the `ddc-core` library: packaged scenarios that
//! exercise the synthesis pipeline and both attack policies end to end, with
//! CSV tables and SVG plots as artifacts.

pub mod experiments;
pub mod plot;
