#pragma once

#include <vector>

#include "fpilco/moments.hpp"

namespace fpilco {

/// Saturating distance cost of the pendulum endpoint to the upright goal.
/// States follow the cartpole layout [x_c, theta, ...]; only the first
/// two coordinates enter the cost.
struct CostSpec {
    double sigma_c = 0.25;     // cost length scale [m]
    double pole_length = 0.2;  // l [m]
    double gamma = 1.0;        // discount
    int horizon = 60;          // T
};

/// 1 - exp(-d^2 / (2 sigma_c^2)) with
/// d^2 = (x_c - l sin(theta))^2 + (l - l cos(theta))^2; range [0, 1).
double state_cost(const CostSpec& spec, const Vec& x);

/// Exact expectation of state_cost under N(mu, Sigma): the vector
/// [x_c, sin(theta), cos(theta)] is moment-matched with closed-form
/// trigonometric moments, then the exponential-quadratic expectation is
/// applied in closed form.
double expected_cost(const CostSpec& spec, const Vec& mu, const Mat& sigma);

/// Discounted sum over per-timestep marginals (t = 0..T).
double total_cost(const CostSpec& spec, const std::vector<GaussianVec>& marginals, double gamma);

namespace builders {

Var expected_cost_b(Graph& g, const CostSpec& spec, Var mu, Var sigma);

}  // namespace builders

}  // namespace fpilco
