#pragma once

#include <stdexcept>
#include <string>

namespace qwm {

// Error taxonomy mirrors the CLI exit codes: config errors (2),
// numerical/integration failures (3), fit non-convergence (4).

struct config_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct param_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct invalid_state_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct integration_error : std::runtime_error {
    integration_error(const std::string& what, double t_fail)
        : std::runtime_error(what), time(t_fail) {}
    double time = 0.0;
};

struct convergence_error : std::runtime_error {
    convergence_error(const std::string& what, double res)
        : std::runtime_error(what), residual(res) {}
    double residual = 0.0;
};

struct fit_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

} // namespace qwm
