//! Batch driver for `curlrec`: solves, estimates and reconstructions, h- and
//! p-convergence studies, an adaptive loop and the verification suite. Every
//! command returns its console text and output files; nothing is written here.

pub mod commands;
pub mod config;
pub mod error;
pub mod marking;
pub mod report;
pub mod verify;

use std::path::Path;

pub use config::{Command, RunConfig, Settings};
pub use error::CliError;

/// Result of a command: console text, files for the output directory and
/// the names of failed oracles, if any.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Output {
    pub stdout: String,
    pub files: Vec<(String, String)>,
    pub failed: Option<String>,
}

impl Output {
    pub fn new(stdout: String) -> Self {
        Output { stdout, ..Default::default() }
    }

    pub fn with_file(mut self, name: &str, contents: String) -> Self {
        self.files.push((name.to_string(), contents));
        self
    }

    pub fn file(&self, name: &str) -> Option<&str> {
        self.files.iter().find(|(n, _)| n == name).map(|(_, c)| c.as_str())
    }

    pub fn write_to(&self, dir: &Path) -> Result<(), CliError> {
        let io = |path: &Path, source| CliError::Io { path: path.to_path_buf(), source };
        std::fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
        for (name, contents) in &self.files {
            let path = dir.join(name);
            std::fs::write(&path, contents).map_err(|e| io(&path, e))?;
        }
        Ok(())
    }
}

pub fn run(cfg: &RunConfig) -> Result<Output, CliError> {
    match cfg.command {
        Command::Solve => commands::solve(cfg),
        Command::Estimate => commands::estimate_cmd(cfg),
        Command::Reconstruct => commands::reconstruct_cmd(cfg),
        Command::StudyH => commands::study_h(cfg),
        Command::StudyP => commands::study_p(cfg),
        Command::Adapt => commands::adapt(cfg),
        Command::Verify => verify::verify(cfg),
    }
}
