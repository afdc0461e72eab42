//! Belief features from imagined story continuations and their relation to
//! reader engagement.

pub mod analysis;
pub mod beliefs;
pub mod config;
pub mod corpus;
pub mod features;
pub mod imagination;
pub mod llm;
pub mod pipeline;
pub mod text;
pub mod toy;
pub mod util;
pub mod vocab;
