//! Experiments built on the solver: scans, ratio minimization, gluing,
//! the nonexistence probe, the invariant suite and file output.

pub mod glue;
pub mod io;
pub mod probe;
pub mod ratio;
pub mod scan;
pub mod verify;
