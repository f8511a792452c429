use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use crate::coloring::ColoringParams;
use crate::kernel::TOL_FEAS;
use crate::lewis::TOL_LEWIS;
use crate::zonotope::PreprocessOptions;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OutputFormat {
    #[default]
    Text,
    Csv,
}

impl FromStr for OutputFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "text" => Ok(OutputFormat::Text),
            "csv" => Ok(OutputFormat::Csv),
            other => Err(format!("unknown format `{other}` (expected text or csv)")),
        }
    }
}

impl fmt::Display for OutputFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OutputFormat::Text => "text",
            OutputFormat::Csv => "csv",
        })
    }
}

/// Everything that determines a run's output.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    /// Initial scale multiplier.
    pub c0: f64,
    /// Rejected draws before the multiplier doubles.
    pub retries: usize,
    pub tol_feas: f64,
    pub tol_lewis: f64,
    pub out: Option<PathBuf>,
    pub format: OutputFormat,
    pub exact_finish: bool,
    /// Shrink vectors outside the body onto its boundary instead of failing.
    pub rescale: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            c0: 2.0,
            retries: 16,
            tol_feas: TOL_FEAS,
            tol_lewis: TOL_LEWIS,
            out: None,
            format: OutputFormat::Text,
            exact_finish: false,
            rescale: false,
        }
    }
}

impl RunConfig {
    pub fn coloring_params(&self) -> ColoringParams {
        ColoringParams {
            c0: self.c0,
            retries: self.retries,
            exact_finish: self.exact_finish,
            ..ColoringParams::default()
        }
    }

    pub fn preprocess_options(&self) -> PreprocessOptions {
        PreprocessOptions {
            tol_feas: self.tol_feas,
            rescale_outside: self.rescale,
        }
    }

    /// One-line `key=value` summary; the output path is not part of it.
    pub fn describe(&self) -> String {
        format!(
            "seed={} c0={} retries={} tol_feas={:e} tol_lewis={:e} exact_finish={} rescale={}",
            self.seed, self.c0, self.retries, self.tol_feas, self.tol_lewis, self.exact_finish, self.rescale
        )
    }
}
