#pragma once

#include <functional>
#include <vector>

namespace tailattrib {

struct OptimResult {
  std::vector<double> argmin;
  double objective_value = 0.0;
  bool converged = false;
  int iterations = 0;
};

using Objective = std::function<double(const std::vector<double>&)>;

// Unconstrained Nelder-Mead minimization started from x0.
OptimResult nelder_mead(const Objective& objective,
                        const std::vector<double>& x0, double tol = 1e-8,
                        int max_iter = 5000, double init_step = 0.25);

// Box-constrained variant; parameters mapped through a logistic transform so
// the simplex itself stays unconstrained.
OptimResult nelder_mead_box(const Objective& objective,
                            const std::vector<double>& x0,
                            const std::vector<double>& lower,
                            const std::vector<double>& upper,
                            double tol = 1e-8, int max_iter = 5000);

// Minimization over the unit simplex (w >= 0, sum w = 1) via softmax
// reparameterization; w0 must lie in the simplex interior or boundary.
OptimResult nelder_mead_simplex(const Objective& objective,
                                const std::vector<double>& w0,
                                double tol = 1e-8, int max_iter = 5000);

}  // namespace tailattrib
