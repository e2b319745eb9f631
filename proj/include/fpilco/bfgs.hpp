#pragma once

#include <functional>
#include <string>

#include "fpilco/linalg.hpp"

namespace fpilco {

/// Objective for minimization. Fills *grad when non-null; callers may
/// skip gradient work during line search probes.
using Objective = std::function<double(const Vec&, Vec* grad)>;

struct BfgsOptions {
    int max_evals = 150;       // objective evaluations, probes included
    double grad_tol = 1e-6;    // stop on ||g||_inf <= grad_tol * max(1, |f|)
    double f_rel_tol = 1e-9;   // stop on tiny relative improvement
    double armijo_c1 = 1e-4;
    int max_ls_steps = 30;
};

struct BfgsResult {
    Vec x;
    double fx = 0.0;
    int evals = 0;
    bool converged = false;
    std::string note;
};

/// Dense BFGS with backtracking Armijo line search. Non-finite objective
/// values are treated as failed probes (the step is shrunk). Deterministic
/// for fixed inputs.
BfgsResult bfgs_minimize(const Objective& f, Vec x0, const BfgsOptions& opts = {});

}  // namespace fpilco
