#![allow(clippy::needless_range_loop)]

pub mod comfort;
pub mod controller;
pub mod envelope;
pub mod exec;
pub mod pipeline;
pub mod project;
pub mod report;
pub mod season;
pub mod simulator;
pub mod synthetic;
pub mod thermal_model;
pub mod timeseries;
pub mod tuner;
