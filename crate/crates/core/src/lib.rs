pub mod claimselect;
pub mod embeddings;
pub mod pipeline;
pub mod stats;
pub mod textprep;
pub mod transport;
