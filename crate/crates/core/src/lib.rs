//! Core of the TAAROA grid middleware: the wire protocol, the VM lifecycle,
//! and the four server roles.

pub mod config;
pub mod lifecycle;
pub mod net;
pub mod protocol;
pub mod registry;
pub mod machine;
pub mod repository;
pub mod scheduler;
