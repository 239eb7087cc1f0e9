//! Entity registration, tracing and ledger toolkit for an Internet of Entities.

pub mod codec;
pub mod geo;
pub mod guid;
pub mod ledger;
pub mod model;
pub mod secure;
pub mod sim;
pub mod trace;
