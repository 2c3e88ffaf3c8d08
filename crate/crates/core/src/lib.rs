//! Chest X-ray report labeling.
//!
//! Reports are split into sections, labeled by a prompted chat model or by
//! lexicon rules over thirteen finding categories, distilled into a small
//! linear classifier, and scored against reference labels.

pub mod cli;
pub mod corpus;
pub mod distill;
pub mod evalkit;
pub mod labelfile;
pub mod llm;
pub mod mapper;
pub mod synth;
pub mod taxonomy;
