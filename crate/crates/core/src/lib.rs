//! Learning generative models of PDF objects and using them to fuzz a PDF
//! object parser.
//!
//! The pipeline: [`corpus`] extracts non-binary objects and cuts training
//! windows, [`charlm`] trains a character-level LSTM, [`sampler`] generates
//! new objects, [`mutator`] applies blind byte fuzzing, [`assembler`] appends
//! objects to host PDFs by incremental update, and [`campaign`] evaluates the
//! result against the instrumented reference parser in [`pdfcore`].

pub mod assembler;
pub mod campaign;
pub mod charlm;
pub mod corpus;
pub mod mutator;
pub mod pdfcore;
pub mod rng;
pub mod sampler;
