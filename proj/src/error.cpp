#include "mempath/error.hpp"

#include "mempath/format.hpp"

#include <charconv>

namespace mempath {

const char* to_string(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::GenerationFailed: return "generation-failed";
    case ErrorKind::DisconnectedTerminals: return "disconnected-terminals";
    case ErrorKind::MalformedFile: return "malformed-file";
    case ErrorKind::NewtonNoConvergence: return "newton-no-convergence";
    case ErrorKind::SingularSystem: return "singular-system";
    case ErrorKind::StepCollapse: return "step-collapse";
    case ErrorKind::DetectionFailure: return "detection-failure";
    case ErrorKind::ReadoutStuck: return "readout-stuck";
    case ErrorKind::ReadoutOverlong: return "readout-overlong";
    case ErrorKind::ConfigInvalid: return "config-invalid";
    case ErrorKind::IoFailure: return "io-failure";
    case ErrorKind::InsufficientData: return "insufficient-data";
    }
    return "unknown";
}

std::string shortest(double value) {
    char buffer[40];
    auto [ptr, ec] = std::to_chars(buffer, buffer + sizeof(buffer), value);
    if (ec != std::errc()) {
        return g17(value);
    }
    return std::string(buffer, ptr);
}

} // namespace mempath
