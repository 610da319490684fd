//! Library side of the command-line tool: the document format, the
//! deterministic JSON writer, and the command implementations. Every command
//! is a thin shell over exactly one library operation; no numerical logic
//! lives here.

pub mod commands;
pub mod format;
pub mod json;
