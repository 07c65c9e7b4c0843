//! Toolkit for machine-paraphrase plagiarism research: few-shot paraphrase
//! generation with Pareto-optimal candidate selection, aligned corpus
//! construction, automated detectors, and the statistics used to evaluate
//! detectors and human annotations.

pub mod textmetrics;
pub mod selection;
pub mod generation;
pub mod corpus;
pub mod detection;
pub mod evaluation;
pub mod annotations;
pub mod synth;
pub mod cli;
