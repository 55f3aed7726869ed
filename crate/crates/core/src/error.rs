use alloc::string::String;
use alloc::vec::Vec;

/// Errors produced anywhere in the core pipeline.
///
/// The variants map one-to-one onto the exit-code classes of the command
/// line (input/config, numeric, validation).
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("input error: {0}")]
    Input(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("shape error in `{op}`: {detail}")]
    Shape { op: &'static str, detail: String },
    #[error("numeric error: {0}")]
    Numeric(String),
    #[error("degenerate split: bucket `{bucket}` received no edges")]
    DegenerateSplit { bucket: &'static str },
    #[error("validation error: {summary}")]
    Validation {
        summary: String,
        offending: Vec<(usize, usize)>,
    },
}

impl Error {
    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn numeric(msg: impl Into<String>) -> Self {
        Error::Numeric(msg.into())
    }

    pub(crate) fn shape(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Shape {
            op,
            detail: detail.into(),
        }
    }
}

pub type Result<T, E = Error> = core::result::Result<T, E>;
