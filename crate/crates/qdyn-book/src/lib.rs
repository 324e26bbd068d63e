//! The book under `book/` is the narrative companion to `qdyn`. mdBook
//! itself does not compile Rust snippets, so each chapter is also
//! included here as module documentation: `cargo test --doc -p qdyn-book`
//! builds and runs every fenced code block, and a failing test names the
//! chapter module it came from. Keep `book/src/SUMMARY.md` and this file
//! in sync when adding chapters.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/grid-solver.md")]
pub mod grid_solver {}

#[doc = include_str!("../../../book/src/spectral.md")]
pub mod spectral {}

#[doc = include_str!("../../../book/src/optimizer.md")]
pub mod optimizer {}

#[doc = include_str!("../../../book/src/benchmarks.md")]
pub mod benchmarks {}

#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
