//! Hierarchical rhetorical role labeling.
//!
//! Documents are sequences of sentences; each sentence receives one rhetorical
//! role. The backbone encodes tokens, pools them into sentence vectors with
//! attention, contextualizes the sentence sequence with a bidirectional
//! recurrent layer and decodes roles with a linear-chain CRF.
//!
//! Two prototype-based extensions add corpus-level context:
//!
//! * [`pbr`] trains a bank of soft prototypes alongside the model and
//!   regularizes sentence vectors towards them.
//! * [`pcm`] precomputes one prototype per role from a frozen embedder and
//!   injects the nearest prototype into every sentence vector.
//!
//! [`harness`] ties everything together: configuration, training, grid
//! search, multi-seed runs with significance testing, and artifact export.

pub mod corpus;
pub mod encoder;
pub mod error;
pub mod harness;
pub mod layers;
pub mod metrics;
pub mod optim;
pub mod params;
pub mod pbr;
pub mod pcm;
pub mod registry;
pub mod tape;

pub use error::{Error, Result};
