use std::fmt;
use std::fs;
use std::path::Path;

use defocus_core::RunConfig;
use serde::Serialize;

pub const SCHEMA: &str = "v1";

#[derive(Debug)]
pub enum CliError {
    /// Bad input; exit code 2.
    Invalid(String),
    /// Anything the environment did wrong; exit code 1.
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Invalid(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Invalid(m) | CliError::Runtime(m) => f.write_str(m),
        }
    }
}

impl From<defocus_core::Error> for CliError {
    fn from(e: defocus_core::Error) -> Self {
        if e.is_validation() {
            CliError::Invalid(e.to_string())
        } else {
            CliError::Runtime(e.to_string())
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;

#[derive(Serialize)]
pub struct Report<'a, T: Serialize> {
    pub schema: &'static str,
    pub command: &'static str,
    pub config: &'a RunConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cache: Option<String>,
    pub result: T,
}

impl<'a, T: Serialize> Report<'a, T> {
    pub fn new(
        command: &'static str,
        config: &'a RunConfig,
        cache: Option<String>,
        result: T,
    ) -> Self {
        Self {
            schema: SCHEMA,
            command,
            config,
            cache,
            result,
        }
    }

    pub fn to_json(&self) -> CliResult<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Writes `report.json` into `dir` and returns the JSON text.
    pub fn save(&self, dir: &Path) -> CliResult<String> {
        let json = self.to_json()?;
        fs::create_dir_all(dir)?;
        fs::write(dir.join("report.json"), format!("{json}\n"))?;
        Ok(json)
    }
}
