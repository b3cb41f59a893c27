#pragma once

#include <stdexcept>
#include <string>

namespace wordspot {

/// Base of every error raised by the engine. `code()` is a stable,
/// machine-readable identifier that the HTTP layer forwards to clients.
class Error : public std::runtime_error
{
public:
    Error(std::string code, const std::string& message)
        : std::runtime_error(message), code_(std::move(code))
    {
    }

    const std::string& code() const noexcept { return code_; }

private:
    std::string code_;
};

#define WORDSPOT_DEFINE_ERROR(Name, Code)                                      \
    class Name : public Error                                                  \
    {                                                                          \
    public:                                                                    \
        explicit Name(const std::string& message) : Error(Code, message) {}   \
    }

// features / images
WORDSPOT_DEFINE_ERROR(ImageFormatError, "bad_image");
WORDSPOT_DEFINE_ERROR(DegenerateWordError, "degenerate_word");

// corpus
WORDSPOT_DEFINE_ERROR(IngestError, "ingest_error");
WORDSPOT_DEFINE_ERROR(GenerationError, "generation_error");
WORDSPOT_DEFINE_ERROR(IndexFormatError, "index_format_error");
WORDSPOT_DEFINE_ERROR(VersionError, "version_error");

// retrieval
WORDSPOT_DEFINE_ERROR(DimensionError, "dimension_error");
WORDSPOT_DEFINE_ERROR(RangeError, "range_error");
WORDSPOT_DEFINE_ERROR(SpaceError, "space_error");
WORDSPOT_DEFINE_ERROR(EmptyIndexError, "empty_index");

// feedback
WORDSPOT_DEFINE_ERROR(EmptyFeedbackError, "empty_feedback");
WORDSPOT_DEFINE_ERROR(JudgmentError, "invalid_judgment");
WORDSPOT_DEFINE_ERROR(ParameterError, "invalid_parameters");
WORDSPOT_DEFINE_ERROR(SessionFormatError, "session_format_error");

// subspace
WORDSPOT_DEFINE_ERROR(InsufficientDataError, "insufficient_data");
WORDSPOT_DEFINE_ERROR(SymmetryError, "not_symmetric");
WORDSPOT_DEFINE_ERROR(NumericalError, "numerical_error");
WORDSPOT_DEFINE_ERROR(DegenerateSpectrumError, "degenerate_spectrum");
WORDSPOT_DEFINE_ERROR(ModeError, "mode_error");

// eval
WORDSPOT_DEFINE_ERROR(NoGroundTruthError, "no_ground_truth");

#undef WORDSPOT_DEFINE_ERROR

} // namespace wordspot
