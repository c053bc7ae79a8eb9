//! The guide under `book/`, included here so `cargo test` runs its snippets.

#[doc = include_str!("../../../book/src/intro.md")]
pub mod intro {}
#[doc = include_str!("../../../book/src/corruption.md")]
pub mod corruption {}
#[doc = include_str!("../../../book/src/pipeline.md")]
pub mod pipeline {}
#[doc = include_str!("../../../book/src/gate.md")]
pub mod gate {}
#[doc = include_str!("../../../book/src/episodes.md")]
pub mod episodes {}
#[doc = include_str!("../../../book/src/reporting.md")]
pub mod reporting {}
#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
