#pragma once

#include <stdexcept>
#include <string>

namespace qloss {

// Invalid or missing configuration (registry files, fit configs, manifests).
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Malformed or degenerate input data (spectra, datasets).
class DataError : public std::runtime_error {
public:
    explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

// Optimizer failed to converge or the model cannot represent the data.
class FitError : public std::runtime_error {
public:
    explicit FitError(const std::string& what) : std::runtime_error(what) {}
};

// Integration or root finding left its valid regime.
class NumericalError : public std::runtime_error {
public:
    explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

} // namespace qloss
