//! Test harness for TAAROA: boots a full cluster in one process, records
//! all inter-component traffic, and checks workflows against their
//! expected message order.

pub mod cluster;
pub mod conformance;
pub mod proxy;
pub mod trace;

pub use cluster::{BootError, Cluster, ClusterSpec, MachineFixture, ServiceFixture};
pub use conformance::{assert_stop_conformance, assert_submission_conformance, ConformanceDiff};
pub use proxy::{FaultAction, FaultRule};
pub use trace::{Exchange, Message, Role, Trace};
