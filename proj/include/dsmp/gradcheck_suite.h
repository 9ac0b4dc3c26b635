#pragma once

#include <string>
#include <vector>

namespace dsmp {

struct GradCheckEntry {
    std::string name;
    double max_rel_error = 0.0;
};

struct GradCheckSuiteReport {
    std::vector<GradCheckEntry> entries;
    double max_rel_error = 0.0;
    double tolerance = 1e-4;
    bool passed() const { return max_rel_error <= tolerance; }
};

/// Reverse-mode gradients against central differences for every primitive, the steppers, the
/// losses and a full head in training mode. `inject_fault` adds a node with a deliberately wrong adjoint.
GradCheckSuiteReport run_gradcheck_suite(bool inject_fault = false, double tolerance = 1e-4);

std::string format_report(const GradCheckSuiteReport& report);

}  // namespace dsmp
