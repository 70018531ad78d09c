//! Doc-test bridge for the book under `book/`: each chapter is included as
//! module documentation so `cargo test` compiles and runs every Rust snippet
//! in it. If a snippet drifts from the library, the build breaks here.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/model.md")]
pub mod model {}

#[doc = include_str!("../../../book/src/bounds.md")]
pub mod bounds {}

#[doc = include_str!("../../../book/src/negative-controls.md")]
pub mod negative_controls {}

#[doc = include_str!("../../../book/src/direction-priors.md")]
pub mod direction_priors {}

#[doc = include_str!("../../../book/src/samplers.md")]
pub mod samplers {}

#[doc = include_str!("../../../book/src/simulation.md")]
pub mod simulation {}

#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
