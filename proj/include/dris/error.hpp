#pragma once

#include <stdexcept>
#include <string>

namespace dris {

// Bad run configuration (invalid ranges, unknown keys, missing files).
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Non-finite state or other fault inside the simulator. Carries the index of
// the offending instance when stepping an instance set (-1 for a lone world).
struct SimulationFault : std::runtime_error {
    int instance = -1;
    explicit SimulationFault(const std::string& msg, int instance_index = -1)
        : std::runtime_error(msg), instance(instance_index) {}
};

// Non-finite loss/gradient/parameter during optimization.
struct TrainingFault : std::runtime_error {
    explicit TrainingFault(const std::string& msg) : std::runtime_error(msg) {}
};

// Caller broke a documented precondition.
struct ContractViolation : std::logic_error {
    explicit ContractViolation(const std::string& msg) : std::logic_error(msg) {}
};

}  // namespace dris
