#pragma once

#include <stdexcept>
#include <string>

namespace chronoeval {

// Base for all domain errors raised by this library. Subcommands map these
// to exit code 1; anything else escaping to main is a bug.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// gateway
struct NetworkError : Error {
    using Error::Error;
};
struct AuthError : Error {
    using Error::Error;
};
struct MalformedResponse : Error {
    using Error::Error;
};

// temporal filter
struct ParseError : Error {
    using Error::Error;
};
struct UnknownStage : Error {
    using Error::Error;
};

// leakage lab
struct DegenerateUniverse : Error {
    using Error::Error;
};
struct DivisionByZero : Error {
    using Error::Error;
};

// probe harness
struct UnknownEvent : Error {
    using Error::Error;
};

// signal pipeline
struct DuplicateKey : Error {
    using Error::Error;
};

// portfolio engine
struct EmptyJoin : Error {
    using Error::Error;
};
struct DegenerateSeries : Error {
    using Error::Error;
};
struct NonPositiveComparison : Error {
    using Error::Error;
};
struct MissingVintage : Error {
    using Error::Error;
};

// eval suite
struct JudgeParseError : Error {
    using Error::Error;
};
struct DegenerateFit : Error {
    using Error::Error;
};
struct EmptySequence : Error {
    using Error::Error;
};
struct PositiveLogprob : Error {
    using Error::Error;
};

// orchestrator
struct ConfigError : Error {
    using Error::Error;
};
struct MissingArtifact : Error {
    using Error::Error;
};

}  // namespace chronoeval
