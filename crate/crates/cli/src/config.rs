use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;

use crate::CliError;

pub fn read_to_string(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::input(format!("cannot read {}: {e}", path.display())))
}

/// Parse a JSON config file; serde names the offending field on failure.
pub fn load<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| CliError::input(format!("invalid config {}: {e}", path.display())))
}

/// Fill every `None` field of the flags from the config file.
#[macro_export]
macro_rules! overlay {
    ($flags:expr, $file:expr; $($field:ident),+ $(,)?) => {{
        let mut flags = $flags;
        let file = $file;
        $( if flags.$field.is_none() { flags.$field = file.$field; } )+
        flags
    }};
}
