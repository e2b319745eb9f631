#pragma once

#include <string>

#include "fpilco/moments.hpp"
#include "fpilco/rng.hpp"

namespace fpilco {

/// Radial-basis-function controller with a bounded odd saturation on the
/// output. `lengthscales` column f holds the per-coordinate kernel widths
/// of action dimension f (the kernel uses their squares).
struct PolicyParams {
    Mat centroids;     // nc x D
    Mat weights;       // nc x F
    Mat lengthscales;  // D x F, positive
    double u_max = 10.0;

    int n_centroids() const { return static_cast<int>(centroids.rows()); }
    int state_dim() const { return static_cast<int>(centroids.cols()); }
    int action_dim() const { return static_cast<int>(weights.cols()); }
};

/// Bounded odd saturation with exact Gaussian moments; peaks at +-1.
double saturate(double a);

/// Centroids drawn around the initial state distribution, small random
/// weights, unit lengthscales.
PolicyParams init_policy(int n_centroids, int action_dim, const Vec& mu0, const Mat& v0,
                         double u_max, std::uint64_t seed);

/// Deterministic evaluation on a point input; |u| <= u_max always.
Vec policy_eval(const PolicyParams& p, const Vec& m);

struct PolicyMoments {
    Vec mean;  // F
    Mat cov;   // F x F
    Mat cpre;  // D x F, premultiplied input-output covariance
};

/// Exact Gaussian moments of the saturated RBF output under N(mu, sigma).
PolicyMoments policy_moments(const PolicyParams& p, const Vec& mu, const Mat& sigma);

void save_policy(const PolicyParams& p, const std::string& path);
PolicyParams load_policy(const std::string& path);

namespace builders {

/// Differentiable policy parameters as graph leaves. `log_ell2` holds
/// log of squared lengthscales so positivity is unconstrained.
struct PolicyLeaves {
    Var centroids;  // nc x D
    Var weights;    // nc x F
    Var log_ell2;   // D x F
};

PolicyLeaves policy_leaves(Graph& g, const PolicyParams& p);

struct PolicyVars {
    Var mean;  // F x 1
    Var cov;   // F x F
    Var cpre;  // D x F
};

PolicyVars policy_moments_b(Graph& g, const PolicyLeaves& leaves, double u_max, Var mu, Var sigma);

}  // namespace builders

}  // namespace fpilco
