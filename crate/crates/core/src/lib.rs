//! Divide-and-Evolve: evolve sequences of intermediate states ("stations")
//! of a temporal planning problem, solve each consecutive pair with an exact
//! sub-planner, and compress the concatenated sub-plans into one schedule.

pub mod evolve;
pub mod harness;
pub mod model;
pub mod planner;
pub mod schedule;
pub mod stations;
