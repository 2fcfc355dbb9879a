//! Slow, direct reference implementations for checking `rally-core`.
//!
//! Nothing here calls into the model, recommender or tree code; the only
//! things shared are the data types and the taxonomy table.

pub mod gen;
pub mod oracle;
