#pragma once

#include <stdexcept>
#include <string>

namespace tiltrisk {

inline constexpr int kExitConfig = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitNumeric = 4;

// Error categories map onto CLI exit codes.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
    virtual int exit_code() const noexcept { return 1; }
};

class ConfigError : public Error {
public:
    using Error::Error;
    int exit_code() const noexcept override { return kExitConfig; }
};

class DataError : public Error {
public:
    using Error::Error;
    int exit_code() const noexcept override { return kExitData; }
};

class NumericError : public Error {
public:
    using Error::Error;
    int exit_code() const noexcept override { return kExitNumeric; }
};

// Input outside an operation's mathematical domain (e.g. Brier loss on y=0.5).
class DomainError : public DataError {
public:
    using DataError::DataError;
};

}  // namespace tiltrisk
