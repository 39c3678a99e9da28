// errors.hpp - exception hierarchy shared by all odkit modules.
//
// The three categories map 1:1 onto the CLI exit codes:
//   ConfigError  -> 1  (bad flags, bad config file, incompatible options)
//   DataError    -> 2  (missing/malformed input, shape mismatches, bad labels)
//   NumericError -> 3  (diverged training, non-finite values in computations)
#pragma once

#include <stdexcept>
#include <string>

namespace odkit {

struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

struct DataError : std::runtime_error {
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace odkit
