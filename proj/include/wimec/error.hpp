#pragma once

#include <stdexcept>
#include <string>

namespace wimec {

// Raised for invalid model inputs detected at run time.
class ModelError : public std::runtime_error {
public:
    explicit ModelError(const std::string& what) : std::runtime_error(what) {}
};

// Raised while validating a configuration before any simulation starts.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace wimec
