#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

namespace fpilco {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Thrown when a linear-algebra step cannot proceed (singular system,
/// factorization failure, non-finite data).
struct NumericalError : std::runtime_error {
    explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

inline Mat symmetrize(const Mat& a) { return 0.5 * (a + a.transpose()); }

inline bool all_finite(const Mat& a) { return a.allFinite(); }

/// Clamp negative eigenvalues of a symmetric matrix to zero.
/// Counts a repair event only when an eigenvalue fell below -neg_tol;
/// smaller excursions are treated as floating-point dust.
Mat psd_clip(const Mat& a, double neg_tol = 1e-10, long* repair_count = nullptr);

/// Smallest eigenvalue of a symmetric matrix.
double min_eigenvalue(const Mat& a);

/// A^{1/2} for symmetric PSD A (eigenvalue square root, negatives clamped).
Mat psd_sqrt(const Mat& a);

/// FNV-1a 64-bit hash of a byte string (used for report manifests).
std::uint64_t fnv1a64(const std::string& bytes);

}  // namespace fpilco
