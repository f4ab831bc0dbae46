use std::fmt;
use std::process::ExitCode;

use kwglow::corpus::CorpusError;
use kwglow::dsp::DspError;
use kwglow::evaluation::EvalError;
use kwglow::flow::FlowError;
use kwglow::textmap::TextMapError;
use kwglow::training::TrainError;
use kwglow_serve::ServeError;

/// A failed command, classified by the exit code it maps to.
#[derive(Debug)]
pub enum Failure {
    /// Bad flags or flag values: exit 1.
    Usage(String),
    /// Unreadable or invalid input files: exit 2.
    Data(String),
    /// The work itself failed: exit 3.
    Runtime(String),
}

impl Failure {
    pub fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Data(_) => 2,
            Failure::Runtime(_) => 3,
        }
    }

    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(self.code())
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Usage(m) => write!(f, "usage error: {m}"),
            Failure::Data(m) => write!(f, "data error: {m}"),
            Failure::Runtime(m) => write!(f, "error: {m}"),
        }
    }
}

pub type CmdResult = Result<(), Failure>;

pub fn data(e: impl fmt::Display) -> Failure {
    Failure::Data(e.to_string())
}

pub fn runtime(e: impl fmt::Display) -> Failure {
    Failure::Runtime(e.to_string())
}

impl From<CorpusError> for Failure {
    fn from(e: CorpusError) -> Self {
        data(e)
    }
}

impl From<EvalError> for Failure {
    fn from(e: EvalError) -> Self {
        data(e)
    }
}

impl From<TextMapError> for Failure {
    fn from(e: TextMapError) -> Self {
        data(e)
    }
}

impl From<DspError> for Failure {
    fn from(e: DspError) -> Self {
        data(e)
    }
}

impl From<FlowError> for Failure {
    fn from(e: FlowError) -> Self {
        match e {
            FlowError::ShapeMismatch(_) | FlowError::MelTooShort { .. } | FlowError::NotDivisible { .. } | FlowError::Config(_) => {
                data(e)
            }
            _ => runtime(e),
        }
    }
}

impl From<TrainError> for Failure {
    fn from(e: TrainError) -> Self {
        match e {
            TrainError::Config(_)
            | TrainError::CorpusEmpty
            | TrainError::VersionMismatch(_)
            | TrainError::CorruptFile(_)
            | TrainError::Incompatible(_)
            | TrainError::Dsp(_) => data(e),
            TrainError::Flow(f) => f.into(),
            TrainError::NonFiniteLoss(_) | TrainError::NonFiniteAbort { .. } | TrainError::Io { .. } => runtime(e),
        }
    }
}

impl From<ServeError> for Failure {
    fn from(e: ServeError) -> Self {
        match e {
            ServeError::Store { .. } | ServeError::Ratings(_) | ServeError::Io { .. } => data(e),
            ServeError::Bind { .. } => runtime(e),
        }
    }
}
