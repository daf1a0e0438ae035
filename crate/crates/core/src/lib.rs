//! Semi-supervised spoken-language glossification (text → sign-language
//! gloss translation).
//!
//! The pipeline annotates monolingual text twice, once with fixed
//! linguistic rules ([`rules`]) and once with the best translation model
//! found so far ([`selftrain`]), mixes the two pseudo-labelled sets with a
//! provenance tag on every source sentence, and trains a fresh
//! encoder–decoder ([`model`]) in two stages: pre-training on gold plus
//! synthetic data, then fine-tuning on gold data only. Both stages use
//! label-smoothed cross-entropy plus a symmetric-KL consistency term
//! between two dropout passes ([`training`]). [`inference`] provides
//! greedy and beam decoding and [`metrics`] the BLEU/ROUGE-L/chrF scores.

pub mod autodiff;
pub mod config;
pub mod corpus;
pub mod error;
pub mod inference;
pub mod metrics;
pub mod model;
pub mod rules;
pub mod selftrain;
pub mod toy;
pub mod training;

pub use error::{Error, Result};
