//! Metadata records, guidance schemas, standardization backends, exact-match
//! search, gold labels and retrieval evaluation.
//!
//! The usual flow is [`ingest`] → [`standardizer`] → [`evaluation`], with
//! [`labeler`] supplying the relevant sets and [`search`] the retrieved ones.

pub mod digest;
pub mod record;
pub mod schema;
pub mod labeler;
pub mod search;
pub mod evaluation;
pub mod ingest;
pub mod manifest;
pub mod retry;
pub mod standardizer;
