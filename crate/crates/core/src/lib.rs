//! Knowledge-graph construction and graph-augmented retrieval over a corpus
//! of scientific abstracts.

pub mod corpus;
pub mod cypher;
pub mod embedding;
pub mod error;
pub mod eval;
pub mod graph;
pub mod llm;
pub mod ner;
pub mod pipeline;
pub mod rag;
pub mod relations;
pub mod resolution;
pub mod taxonomy;
pub mod text;
pub mod zipf;

pub use error::{Error, Result};
