#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "cxbench/dataset.hpp"

namespace cxbench {

enum class Method { wachter, bls, kdtreennce, mce, armin, mcer, rnce, proplace, stce, apas };

enum class ExplainStatus { valid, not_converged, infeasible };

// One counterfactual result. delta is x_prime - anchor coordinate-wise, always.
// Infeasible results carry x_prime = anchor (delta = 0) so batch metrics can
// score them without special cases.
struct Explanation {
    Instance x_prime;
    std::vector<double> delta;
    int target = 1;
    Method method = Method::mce;
    ExplainStatus status = ExplainStatus::valid;
    double solve_ms = 0.0;
};

const char* method_name(Method m);
bool parse_method(const std::string& name, Method& out);
bool method_is_robust(Method m); // {mcer, rnce, proplace, stce, apas}

const char* status_name(ExplainStatus s);

struct WachterParams {
    double lambda = 0.9;
    double eps = 1e-3;
    double lr = 0.01;
    std::size_t max_iter = 2000;
};

} // namespace cxbench
