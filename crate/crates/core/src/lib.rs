pub mod classify;
pub mod count;
pub mod error;
pub mod estimate;
pub mod oracle;
pub mod report;
pub mod sample;
pub mod voting;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    pub mod introduction {}
    #[doc = include_str!("../../../book/src/profiles.md")]
    pub mod profiles {}
    #[doc = include_str!("../../../book/src/tie_breaking.md")]
    pub mod tie_breaking {}
    #[doc = include_str!("../../../book/src/oracle.md")]
    pub mod oracle {}
    #[doc = include_str!("../../../book/src/characterizations.md")]
    pub mod characterizations {}
    #[doc = include_str!("../../../book/src/counting.md")]
    pub mod counting {}
    #[doc = include_str!("../../../book/src/sampling.md")]
    pub mod sampling {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    pub mod experiments {}
    #[doc = include_str!("../../../book/src/cli.md")]
    pub mod cli {}
}

#[cfg(doctest)]
#[doc = include_str!("../../../README.md")]
mod readme {}
