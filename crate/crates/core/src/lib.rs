//! Multistep quantum state preparation by sequential resonant transitions,
//! with the spectral tooling and problem models it runs on.

pub mod adiabatic;
pub mod engine;
pub mod error;
pub mod models;
pub mod spectral;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/spectral.md")]
    mod spectral {}
    #[doc = include_str!("../../../book/src/models.md")]
    mod models {}
    #[doc = include_str!("../../../book/src/engine.md")]
    mod engine {}
    #[doc = include_str!("../../../book/src/adiabatic.md")]
    mod adiabatic {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
    #[doc = include_str!("../../../book/src/artifacts.md")]
    mod artifacts {}
}
