#pragma once

#include <stdexcept>
#include <string>

namespace peasi {

// Base for every error the library throws. Subtypes exist so callers and
// tests can catch the specific contract violation by name.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct QuestionTooLong : Error { using Error::Error; };
struct SequenceTooLong : Error { using Error::Error; };
struct IdOutOfRange : Error { using Error::Error; };
struct ShapeMismatch : Error { using Error::Error; };
struct UnknownSentence : Error { using Error::Error; };
struct InvalidCount : Error { using Error::Error; };
struct GoldOutOfRange : Error { using Error::Error; };
struct WidthMismatch : Error { using Error::Error; };
struct ModeMismatch : Error { using Error::Error; };
struct EmptyDataset : Error { using Error::Error; };
struct NoPositivePassages : Error { using Error::Error; };
struct NoCandidates : Error { using Error::Error; };
struct UnknownMode : Error { using Error::Error; };
struct EmptyInput : Error { using Error::Error; };
struct MissingCheckpoint : Error { using Error::Error; };

// Config validation failure; `path` is the offending field, e.g. "train.mode".
struct ConfigError : Error {
    ConfigError(const std::string& path, const std::string& message)
        : Error(path + ": " + message), path(path) {}
    std::string path;
};

}  // namespace peasi
