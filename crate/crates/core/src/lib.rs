//! Day-ahead charging plans for an EV aggregator: forecasting, deterministic
//! and robust scheduling, the LP/MILP solvers they run on, and real-time
//! evaluation. The guide in `book/` walks through each part.

mod blocks;
pub mod data;
pub mod deterministic;
mod error;
pub mod fleet;
pub mod lp;
pub mod milp;
pub mod par;
pub mod realtime;
pub mod robust;
pub mod verify;

pub use error::{Error, Result};

// The guide's chapters run as doc-tests.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
    #[doc = include_str!("../../../book/src/data.md")]
    mod data {}
    #[doc = include_str!("../../../book/src/models.md")]
    mod models {}
    #[doc = include_str!("../../../book/src/solvers.md")]
    mod solvers {}
    #[doc = include_str!("../../../book/src/evaluation.md")]
    mod evaluation {}
    #[doc = include_str!("../../../book/src/verification.md")]
    mod verification {}
}
