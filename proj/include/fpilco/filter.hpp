#pragma once

#include "fpilco/moments.hpp"

namespace fpilco {

/// Gaussian belief over the latent state during execution.
struct Belief {
    Vec m;  // mean
    Mat v;  // covariance, symmetric PSD
};

/// Conditioning on a noisy observation z with noise covariance Sigma_eps:
/// m' = W_m m + W_z z, V' = W_m V with W_m = Sigma_eps (V+Sigma_eps)^{-1}
/// and W_z = V (V+Sigma_eps)^{-1}.
Belief filter_update(const Belief& prior, const Vec& z, const Mat& noise_cov);

/// Pushes the posterior belief through the dynamics model: stacks the
/// action with zero variance and moment-matches the GP output.
Belief filter_predict(const Belief& post, const Vec& u, const GPModel& model);

}  // namespace fpilco
