#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace mempath {

enum class ErrorKind {
    GenerationFailed,      // rejection sampling exhausted its retry cap
    DisconnectedTerminals, // start and end are in different components
    MalformedFile,
    NewtonNoConvergence,
    SingularSystem,
    StepCollapse,          // dt/64 still violates the per-step state-change bound
    DetectionFailure,      // voltage ramp reached t_max without a kink
    ReadoutStuck,
    ReadoutOverlong,
    ConfigInvalid,
    IoFailure,
    InsufficientData,
};

const char* to_string(ErrorKind kind);

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, std::string message)
        : std::runtime_error(std::move(message)), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
    throw Error(kind, message);
}

} // namespace mempath
