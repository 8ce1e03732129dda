pub mod baselines;
pub mod codec;
pub mod error;
pub mod estimate;
pub mod functions;
pub mod harness;
pub mod mre;
pub mod multigrid;
pub mod rng;
pub mod selfcheck;
pub mod solver;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/overview.md")]
    struct Overview;
    #[doc = include_str!("../../../book/src/functions.md")]
    struct Functions;
    #[doc = include_str!("../../../book/src/solver.md")]
    struct Solver;
    #[doc = include_str!("../../../book/src/multigrid.md")]
    struct Multigrid;
    #[doc = include_str!("../../../book/src/codec.md")]
    struct Codec;
    #[doc = include_str!("../../../book/src/mre.md")]
    struct Mre;
    #[doc = include_str!("../../../book/src/baselines.md")]
    struct Baselines;
    #[doc = include_str!("../../../book/src/harness.md")]
    struct Harness;
}
