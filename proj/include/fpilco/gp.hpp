#pragma once

#include <optional>
#include <string>
#include <vector>

#include "fpilco/linalg.hpp"

namespace fpilco {

/// Training pairs for the dynamics model: rows of `inputs` are
/// state-action vectors, rows of `targets` the next-step observations.
struct GPDataset {
    Mat inputs;   // n x d_in
    Mat targets;  // n x d_out

    int size() const { return static_cast<int>(inputs.rows()); }
    int input_dim() const { return static_cast<int>(inputs.cols()); }
    int output_dim() const { return static_cast<int>(targets.cols()); }
};

/// Squared-exponential hyperparameters with a linear mean, one set per
/// output dimension.
struct GPHyper {
    Vec ell2;    // squared lengthscales (diagonal of Lambda), size d_in
    double sf2;  // signal variance
    double sn2;  // noise variance
    Vec phi;     // linear mean weights, size d_in
};

/// Per-output-dimension trained state: hyperparameters plus the
/// precomputed solves the moment formulas consume.
struct GPDim {
    Vec ell2;
    double sf2 = 1.0;
    double sn2 = 1e-2;
    Vec phi;
    Vec beta;  // (K + sn2 I)^{-1} (y - X phi)
    Mat kinv;  // (K + sn2 I)^{-1}
};

/// Immutable trained model; safe to share across threads.
struct GPModel {
    Mat inputs;   // n x d_in (n may be zero for a prior-only model)
    Mat targets;  // n x d_out
    std::vector<GPDim> dims;

    int size() const { return static_cast<int>(inputs.rows()); }
    int input_dim() const { return static_cast<int>(inputs.cols()); }
    int output_dim() const { return static_cast<int>(dims.size()); }
};

struct TrainingError : std::runtime_error {
    explicit TrainingError(const std::string& what) : std::runtime_error(what) {}
};

struct TrainOptions {
    int max_evals = 120;            // per output dimension
    double init_noise_frac = 0.01;  // sn2 init as fraction of target variance
};

/// Noise-free squared-exponential kernel matrix block for one output dim.
Mat se_kernel(const Vec& ell2, double sf2, const Mat& a, const Mat& b);

/// Assemble a model from explicit hyperparameters: computes beta and the
/// kernel inverse with a jitter ladder (1e-10 to 1e-6 relative) on
/// factorization failure. Throws TrainingError beyond the ladder.
GPModel make_gp_model(Mat inputs, Mat targets, std::vector<GPHyper> hypers);

/// Per-dimension marginal-likelihood training. When fixed_noise is given
/// it pins sn2 per output dimension instead of learning it.
GPModel train(const GPDataset& dataset, const std::optional<Vec>& fixed_noise = std::nullopt,
              const TrainOptions& opts = {});

/// Standard GP posterior at a deterministic input: per-dim mean
/// beta^T k(x) + phi^T x and latent-function variance.
void predict_point(const GPModel& model, const Vec& x, Vec& mean, Vec& var);

/// Negative log marginal likelihood of one output dimension (exposed for
/// tests and diagnostics).
double gp_nlml(const GPDataset& dataset, int dim, const GPHyper& hyper);

// Key-value text serialization, exact round-trip.
void save_model(const GPModel& model, const std::string& path);
GPModel load_model(const std::string& path);

}  // namespace fpilco
