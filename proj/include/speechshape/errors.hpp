#pragma once

#include <stdexcept>
#include <string>

namespace speechshape {

/// Base class for all library errors.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// blendshape / serialization
struct SchemaError : Error { using Error::Error; };
struct ParseError : Error { using Error::Error; };
struct CsvError : Error { using Error::Error; };

// alignment
struct NoMatchError : Error { using Error::Error; };
struct SpanError : Error { using Error::Error; };
struct AggregateAlignmentError : Error { using Error::Error; };

// audio
struct WavError : Error { using Error::Error; };
struct UnsupportedEncodingError : WavError { using WavError::WavError; };

// phoneme
struct OutOfVocabularyError : Error {
    explicit OutOfVocabularyError(const std::string& w)
        : Error("out of vocabulary: \"" + w + "\""), word(w) {}
    std::string word;
};

// generator
struct TransportError : Error { using Error::Error; };
struct TimeoutError : TransportError { using TransportError::TransportError; };
struct ParseFailureError : Error { using Error::Error; };
struct LengthMismatchError : Error { using Error::Error; };

// metrics
struct MetricError : Error { using Error::Error; };

// pipeline
struct ConfigError : Error { using Error::Error; };

} // namespace speechshape
