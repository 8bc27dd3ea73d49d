//! Core library for turning shopping-style pages into screen-reader friendly
//! HTML.

pub mod audit;
pub mod chunker;
pub mod dom;
pub mod extract;
pub mod llm;
pub mod pipeline;
pub mod similarity;
