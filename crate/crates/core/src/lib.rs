pub mod template;
pub mod prompt;
pub mod store;
pub mod materialize;
pub mod lint;
pub mod server;
pub mod cli;
