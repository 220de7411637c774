//! Non-clairvoyant scheduling of precedence-constrained jobs with
//! Nash-welfare rates, exact water-filling, and dual-fitting audits.

pub mod bounds;
pub mod exact;
pub mod instance;
pub mod rate_program;
pub mod schedulers;
