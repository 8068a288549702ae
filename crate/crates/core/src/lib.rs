//! Rating black-box sentiment analysis systems for statistical and
//! confounding bias.

pub mod causal;
pub mod datagen;
pub mod domain;
pub mod ingest;
pub mod jsonl;
pub mod rating;
pub mod report;
pub mod retry;
pub mod roundtrip;
pub mod sas;
pub mod stats;
