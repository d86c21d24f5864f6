//! CLI subcommand implementations. Each returns `Ok(true)` when every
//! requested check passed its tolerance.

pub mod kernel_check;
pub mod povzner;
pub mod relax;
pub mod spectrum;
pub mod splitting;

use boltzmix_core::CoreError;

#[derive(Debug)]
pub enum CommandError {
    Config(String),
    Io(std::io::Error),
    Core(CoreError),
}

impl From<std::io::Error> for CommandError {
    fn from(e: std::io::Error) -> Self {
        CommandError::Io(e)
    }
}

impl From<CoreError> for CommandError {
    fn from(e: CoreError) -> Self {
        CommandError::Core(e)
    }
}

impl From<crate::config::ConfigError> for CommandError {
    fn from(e: crate::config::ConfigError) -> Self {
        CommandError::Config(e.to_string())
    }
}
