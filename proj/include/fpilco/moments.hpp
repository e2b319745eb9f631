#pragma once

#include "fpilco/gp.hpp"
#include "fpilco/tape.hpp"

namespace fpilco {

/// Gaussian over a vector. The constructor symmetrizes the covariance
/// and clips eigenvalue dust at zero; genuinely indefinite input throws.
struct GaussianVec {
    Vec mean;
    Mat cov;

    GaussianVec() = default;
    GaussianVec(Vec m, Mat c);
};

/// Moments of the GP output under a Gaussian input. `cpre` is the
/// input-output covariance of the kernel part (f minus its linear mean),
/// premultiplied by the inverse input variance: the full input-output
/// covariance is input.cov * cpre + input.cov * phi per output column.
struct MomentOut {
    Vec mean;  // d_out
    Mat cov;   // d_out x d_out
    Mat cpre;  // d_in x d_out
};

/// Moments of the GP output under a hierarchically-uncertain input:
/// Gaussian over the inner mean (outer) with a fixed inner variance.
struct HierOut {
    Vec mean_of_mean;  // d_out
    Mat cov_of_mean;   // d_out x d_out
    Mat mean_of_var;   // d_out x d_out
    Mat cpre;          // d_in x d_out, premultiplied by outer.cov
};

/// q_i = |Lambda_a^{-1} V + I|^{-1/2} exp(-1/2 (x_i-mu)^T (Lambda_a+V)^{-1} (x_i-mu)),
/// the expected unnormalized kernel against training point i when the
/// kernel argument is smoothed by V.
Vec q_vec(const GPModel& model, int a, const Vec& mu, const Mat& v);

/// Q_ij = |R|^{-1/2} q_i^a q_j^b exp(z_ij^T R^{-1} Sigma z_ij / 2) with
/// R = Sigma((Lambda_a+V)^{-1}+(Lambda_b+V)^{-1}) + I: the expectation of
/// q_i^a q_j^b over an outer Gaussian with covariance Sigma.
Mat Q_mat(const GPModel& model, int a, int b, const Vec& mu, const Mat& sigma, const Mat& v);

/// Exact output moments for a Gaussian input (mean, covariance including
/// the expected-model-variance term, premultiplied input-output covariance).
MomentOut predict_uncertain(const GPModel& model, const GaussianVec& input);

/// Exact moments for a hierarchical input: mean and covariance of the
/// output mean, plus the expected output variance.
HierOut predict_hierarchical(const GPModel& model, const GaussianVec& outer, const Mat& inner_var);

// ---------------------------------------------------------------------
// Tape-level builders. These are the single implementation of the moment
// formulas; the plain functions above evaluate them on a scratch graph.
// The rollout and gradient code build them into larger step graphs.
namespace builders {

using ad::Graph;
using ad::Var;

/// Everything about one GP output dimension the builders need, with
/// pointers into the (caller-owned, longer-lived) GPModel.
struct GpDimRef {
    const Vec* beta;
    const Mat* kinv;
    Vec lam;  // diagonal of Lambda (= ell2)
    double sf2;
    Vec phi;
};

struct GpRef {
    const Mat* inputs;  // n x d_in
    std::vector<GpDimRef> dims;
    int n = 0;
    int d_in = 0;

    explicit GpRef(const GPModel& m);
};

/// Cached per-dimension pieces of the q computation for one smoothing
/// variance V: alpha = Nu (Lambda+V)^{-1}, the log-q vector, and the
/// precision (Lambda+V)^{-1} needed by R.
struct QParts {
    Var alpha;  // n x d
    Var lq;     // n x 1
    Var prec;   // d x d
};

/// nu = X - 1 mu^T for the model's training inputs.
Var training_offsets(Graph& g, const GpRef& gp, Var mu);

/// lam_diag: d x d diagonal matrix Var; lam_logdet: 1x1 Var with
/// log det(Lambda); v: smoothing covariance or invalid Var for V = 0.
QParts q_parts(Graph& g, Var nu, Var lam_diag, Var lam_logdet, Var v);

/// Pairwise expectation matrix Q for two part sets under outer covariance
/// sigma (which may be a zero matrix).
Var q_cross(Graph& g, const QParts& pa, const QParts& pb, Var sigma);

struct UncertainVars {
    Var mean;  // d_out x 1
    Var cov;   // d_out x d_out
    Var cpre;  // d_in x d_out
};

UncertainVars gp_predict_uncertain(Graph& g, const GpRef& gp, Var mu, Var sigma_in);

struct HierVars {
    Var mean_of_mean;  // d_out x 1
    Var cov_of_mean;   // d_out x d_out
    Var mean_of_var;   // d_out x d_out
    Var cpre;          // d_in x d_out
};

HierVars gp_predict_hier(Graph& g, const GpRef& gp, Var mu, Var sigma_outer, Var v_inner);

}  // namespace builders

}  // namespace fpilco
