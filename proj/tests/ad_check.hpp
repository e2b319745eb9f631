#pragma once

// Finite-difference harness for gradient checks used across test suites.

#include <functional>
#include <vector>

#include "fpilco/linalg.hpp"
#include "fpilco/rng.hpp"

namespace fpilco::testutil {

// f rebuilds the computation from scratch on the given leaf values and
// returns the scalar objective.
using ScalarFn = std::function<double(const std::vector<Mat>&)>;

inline std::vector<Mat> fd_gradients(const ScalarFn& f, std::vector<Mat> leaves,
                                     double h = 1e-6) {
    std::vector<Mat> grads;
    for (std::size_t k = 0; k < leaves.size(); ++k) {
        Mat g = Mat::Zero(leaves[k].rows(), leaves[k].cols());
        for (Eigen::Index i = 0; i < g.rows(); ++i) {
            for (Eigen::Index j = 0; j < g.cols(); ++j) {
                double orig = leaves[k](i, j);
                leaves[k](i, j) = orig + h;
                double fp = f(leaves);
                leaves[k](i, j) = orig - h;
                double fm = f(leaves);
                leaves[k](i, j) = orig;
                g(i, j) = (fp - fm) / (2.0 * h);
            }
        }
        grads.push_back(std::move(g));
    }
    return grads;
}

inline double max_rel_err(const Mat& a, const Mat& b, double floor = 1e-6) {
    double worst = 0.0;
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < a.cols(); ++j) {
            double denom = std::max({std::abs(a(i, j)), std::abs(b(i, j)), floor});
            worst = std::max(worst, std::abs(a(i, j) - b(i, j)) / denom);
        }
    return worst;
}

inline Mat random_mat(Rng& rng, int r, int c) {
    Mat m(r, c);
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j) m(i, j) = rng.normal();
    return m;
}

inline Mat random_spd(Rng& rng, int n, double ridge = 0.5) {
    Mat a = random_mat(rng, n, n);
    return a * a.transpose() / n + ridge * Mat::Identity(n, n);
}

}  // namespace fpilco::testutil
