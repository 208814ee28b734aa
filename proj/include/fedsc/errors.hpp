#pragma once

#include <stdexcept>
#include <string>

namespace fedsc {

// One exception type per contract violation so callers can catch precisely.
struct DimensionError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};
struct SchemeError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};
struct ConfigError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};
struct EmptyBatchError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};
struct EmptyDatasetError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};
struct DegenerateGradientError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct InsufficientDataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct AllFilteredError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct DegenerateTestError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct SurrogateRequiredError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};
struct ParseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ValidationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace fedsc
