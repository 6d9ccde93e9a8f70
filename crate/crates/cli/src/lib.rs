//! `cascade-opt`: problem-file commands and the HTTP session API over
//! `cascade-core`.

pub mod api;
pub mod cli;
pub mod server;

pub use api::{ApiError, SessionStore, SessionView};
pub use cli::run;
pub use server::router;
