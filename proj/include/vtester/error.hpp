#pragma once

#include <stdexcept>
#include <string>

namespace vtester {

// Base for everything the library throws on purpose.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Malformed or unsupported bytes in one of the file/wire formats.
class FormatError : public Error {
public:
    using Error::Error;
};

// Socket, control-protocol and session failures.
class NetError : public Error {
public:
    using Error::Error;
};

// Metric preconditions that the input data does not meet.
class MetricError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

}  // namespace vtester
