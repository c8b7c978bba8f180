// mdbook cannot run Rust snippets against a local crate, so every chapter
// is pulled in as the doc comment of an empty module and `cargo test --doc`
// runs them. One module per chapter keeps failures traceable to a file.

#[doc = include_str!("src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("src/pages.md")]
pub mod pages {}
#[doc = include_str!("src/records.md")]
pub mod records {}
#[doc = include_str!("src/tables.md")]
pub mod tables {}
#[doc = include_str!("src/synthetic.md")]
pub mod synthetic {}
#[doc = include_str!("src/carving.md")]
pub mod carving {}
#[doc = include_str!("src/analysis.md")]
pub mod analysis {}
#[doc = include_str!("src/cli.md")]
pub mod cli {}
