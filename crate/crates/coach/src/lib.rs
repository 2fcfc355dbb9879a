//! Live coaching on top of `rally-core`: sessions that track a match as it
//! is played, a JSON API over them, and the `rallycoach` command line.

pub mod api;
pub mod cli;
pub mod error;
pub mod session;
pub mod store;

pub use error::SessionError;
pub use session::{Event, Session, SessionConfig};
pub use store::{CreateRequest, SessionStore};
