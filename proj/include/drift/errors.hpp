#pragma once

#include <stdexcept>
#include <string>

namespace drift {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

#define DRIFT_DEFINE_ERROR(Name)         \
    class Name : public Error {          \
    public:                              \
        using Error::Error;              \
    }

// model
DRIFT_DEFINE_ERROR(DimensionError);
DRIFT_DEFINE_ERROR(ConfigError);
DRIFT_DEFINE_ERROR(LookupError);
DRIFT_DEFINE_ERROR(ContextLengthError);
DRIFT_DEFINE_ERROR(DegenerateEmbeddingError);

// losses
DRIFT_DEFINE_ERROR(NumericError);
DRIFT_DEFINE_ERROR(ParameterError);
DRIFT_DEFINE_ERROR(LabelError);
DRIFT_DEFINE_ERROR(InfiniteDivergenceError);

// data
DRIFT_DEFINE_ERROR(ParseError);
DRIFT_DEFINE_ERROR(IngestionError);
DRIFT_DEFINE_ERROR(ValidationError);
DRIFT_DEFINE_ERROR(SamplingError);
DRIFT_DEFINE_ERROR(CaptionerUnavailableError);
DRIFT_DEFINE_ERROR(ProtocolError);

// trainer
DRIFT_DEFINE_ERROR(InitializationError);
DRIFT_DEFINE_ERROR(NonFiniteLossError);
DRIFT_DEFINE_ERROR(IntegrityError);
DRIFT_DEFINE_ERROR(VersionError);

// eval
DRIFT_DEFINE_ERROR(EvaluationError);
DRIFT_DEFINE_ERROR(CompatibilityError);
DRIFT_DEFINE_ERROR(AlignmentError);

DRIFT_DEFINE_ERROR(IoError);

#undef DRIFT_DEFINE_ERROR

}  // namespace drift
