#pragma once

#include <stdexcept>
#include <string>

namespace mrn {

/// Base class for all library errors.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Malformed source text. Carries a 1-based source position.
struct SyntaxError : Error {
    int line;
    int column;
    SyntaxError(int line_, int column_, const std::string& what_)
        : Error("syntax error at " + std::to_string(line_) + ":" + std::to_string(column_) +
                ": " + what_),
          line(line_),
          column(column_) {}
};

/// Input bytes are not valid UTF-8.
struct EncodingError : Error {
    using Error::Error;
};

/// A serialized document violates its schema. The message names the first
/// offending JSON path.
struct FormatError : Error {
    using Error::Error;
};

/// A persisted file carries an unknown format tag.
struct VersionError : Error {
    using Error::Error;
};

struct ShapeMismatch : Error {
    using Error::Error;
};

/// A primitive produced a non-finite value.
struct NumericError : Error {
    using Error::Error;
};

struct DoubleBackward : Error {
    using Error::Error;
};

struct LengthMismatch : Error {
    using Error::Error;
};

struct EmptyCorpus : Error {
    using Error::Error;
};

struct EmptyDataset : Error {
    using Error::Error;
};

struct EmptyTrainSet : Error {
    using Error::Error;
};

/// roc_auc needs at least one positive and one negative label.
struct DegenerateLabels : Error {
    using Error::Error;
};

/// A manifest entry does not line up with the functions found in its file.
struct LabelError : Error {
    using Error::Error;
};

}  // namespace mrn
