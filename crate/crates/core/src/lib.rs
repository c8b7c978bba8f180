//! Reader, writer and carver for Spotlight Store-V2 metadata stores
//! (`store.db` and `.store.db`).
//!
//! ```
//! use spotlight_store::analysis::count_records;
//! use spotlight_store::parser::parse_store;
//! use spotlight_store::synth::{FileEvent, StoreModel, StoreSpec};
//!
//! let mut model = StoreModel::from_spec(&StoreSpec::empty(1)).unwrap();
//! model.apply(FileEvent::create("notes.txt")).unwrap();
//! let store = parse_store(&model.emit()).unwrap();
//! assert_eq!(count_records(&store).total, 3);
//! ```
//!
//! The guide under `book/` walks through each module with examples that
//! run as tests.

pub mod analysis;
pub mod carver;
pub mod codec;
pub mod diag;
pub mod format;
pub mod parser;
pub mod synth;
