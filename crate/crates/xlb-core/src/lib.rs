//! Analysis of cross-language interaction code in Python and Java sources.
//!
//! The crate is organized as a pipeline of independent layers:
//!
//! - [`source_model`] parses `.py` / `.java` files into a uniform syntactic
//!   view (functions, statements, imports, call sites).
//! - [`detect`] finds cross-language interaction sites for nine FFI
//!   mechanisms (ctypes, cffi, SWIG, pybind11, Boost.Python, the raw Python
//!   C API, JNI, JNA, Jython) and classifies each by mechanism.
//! - [`taint`] propagates cross-language provenance from those sites through
//!   a bounded number of variable transfers and marks the affected lines.
//! - [`miner`] drives a GitHub mining pipeline that turns bug-fix commits
//!   touching cross-language functions into buggy/clean function pairs.
//! - [`corpus`] builds labeled, balanced, split JSONL datasets from those
//!   pairs and provides comment stripping, statistics, and binary
//!   classification metrics.

pub mod corpus;
pub mod detect;
pub mod miner;
pub mod source_model;
pub mod taint;

#[cfg(any(test, feature = "test-support"))]
pub mod testsupport;
