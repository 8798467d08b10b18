#pragma once

#include <stdexcept>
#include <string>

namespace dmisac {

/// Invalid or inconsistent user-supplied configuration.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// Geometric degeneracy (coincident points, zero-length baselines, ...).
class GeometryError : public std::runtime_error {
public:
    explicit GeometryError(const std::string& what) : std::runtime_error(what) {}
};

/// Malformed or truncated data file.
class IoError : public std::runtime_error {
public:
    explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace dmisac
