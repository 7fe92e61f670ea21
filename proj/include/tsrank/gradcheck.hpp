#pragma once

#include <string>
#include <vector>

namespace tsrank {

struct GradCheckRow {
    std::string component;
    double max_rel_error = 0;
    bool passed = false;
};

// Finite-difference audit of every differentiable path. `component_filter`
// empty means all; `inject_bug` adds a negative-control component with a
// deliberately wrong derivative, which must fail.
std::vector<GradCheckRow> gradcheck_all(const std::string& component_filter = "",
                                        bool inject_bug = false, int instances = 20,
                                        double tolerance = 1e-5);

}  // namespace tsrank
