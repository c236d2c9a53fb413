use deepsmote_core::data::DataError;
use deepsmote_core::eval::EvalError;
use deepsmote_core::nn::NnError;
use deepsmote_core::oversampler::OversampleError;
use deepsmote_core::raster::RasterError;
use deepsmote_core::trainer::TrainError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("numeric abort: {0}")]
    Numeric(String),
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) | CliError::Io { .. } => 3,
            CliError::Numeric(_) => 4,
        }
    }

    pub fn io(context: impl Into<String>) -> impl FnOnce(std::io::Error) -> CliError {
        let context = context.into();
        move |source| CliError::Io { context, source }
    }
}

impl From<DataError> for CliError {
    fn from(e: DataError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<NnError> for CliError {
    fn from(e: NnError) -> Self {
        match e {
            NnError::NonFinite(_) => CliError::Numeric(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<TrainError> for CliError {
    fn from(e: TrainError) -> Self {
        match e {
            TrainError::NonFinite { .. } => CliError::Numeric(e.to_string()),
            TrainError::Config(_) => CliError::Config(e.to_string()),
            TrainError::Nn(inner) => inner.into(),
            TrainError::MixedLabels(..) => CliError::Data(e.to_string()),
        }
    }
}

impl From<OversampleError> for CliError {
    fn from(e: OversampleError) -> Self {
        match e {
            OversampleError::Nn(inner) => inner.into(),
            OversampleError::Data(inner) => inner.into(),
            OversampleError::Plan(_) => CliError::Config(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::Data(inner) => inner.into(),
            EvalError::Nn(inner) => inner.into(),
            EvalError::Train(inner) => inner.into(),
            EvalError::Oversample(inner) => inner.into(),
            EvalError::Config(_) => CliError::Config(e.to_string()),
            EvalError::Metrics(_) | EvalError::Leak(_) => CliError::Data(e.to_string()),
        }
    }
}

impl From<RasterError> for CliError {
    fn from(e: RasterError) -> Self {
        CliError::Data(e.to_string())
    }
}
