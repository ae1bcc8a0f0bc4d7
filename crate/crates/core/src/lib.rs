pub mod dsl;
pub mod evaluation;
pub mod interpreter;
pub mod profiler;
pub mod representations;
pub mod runtime;
pub mod synthesis;
pub mod ui_tree;
