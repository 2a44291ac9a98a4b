pub mod congest;
pub mod error;
pub mod experiment;
pub mod flow;
pub mod ipm;
pub mod leverage;
pub mod lewis;
pub mod linalg;
pub mod mixed_ball;
pub mod tuning;

pub use error::{Error, Result};

// The guide's code listings run as doc-tests.
#[cfg(doctest)]
mod guide {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/network.md")]
    mod network {}
    #[doc = include_str!("../../../book/src/lp.md")]
    mod lp {}
    #[doc = include_str!("../../../book/src/flow.md")]
    mod flow {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    mod experiments {}
}
