//! Probing toolkit for formal-language understanding and generation.

pub mod fl_ast;
pub mod harness;
pub mod kb_link;
pub mod kopl_engine;
pub mod llm;
pub mod prompt;
pub mod retrieval;
pub mod skeleton;
