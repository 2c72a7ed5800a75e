//! Scholarly argumentation mining: recognition of argumentative discourse
//! units (ADUs) by BiLSTM-CRF sequence tagging and argumentative relation
//! extraction by windowed pair classification, plus the evaluation tooling.

pub mod corpus;
pub mod tagging;
pub mod embed;
pub mod nn;
pub mod crf;
pub mod config;
pub mod data;
pub mod graph;
pub mod eval;
pub mod train;
pub mod adur;
pub mod are;
pub mod pipeline;
pub mod synthetic;
