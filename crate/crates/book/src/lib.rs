// mdBook cannot run examples that depend on an external crate, so every
// chapter of the guide is pulled in here as a module doc and `cargo test
// --doc` runs its code blocks against goldssr. One module per chapter keeps
// a failing block traceable to its file.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("../../../book/src/design.md")]
pub mod design {}
#[doc = include_str!("../../../book/src/estimators.md")]
pub mod estimators {}
#[doc = include_str!("../../../book/src/reestimation.md")]
pub mod reestimation {}
#[doc = include_str!("../../../book/src/simulation.md")]
pub mod simulation {}
#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
