#include "fpilco/linalg.hpp"

namespace fpilco {

Mat psd_clip(const Mat& a, double neg_tol, long* repair_count) {
    Mat s = symmetrize(a);
    Eigen::SelfAdjointEigenSolver<Mat> es(s);
    const Vec& ev = es.eigenvalues();
    if (ev.minCoeff() >= 0.0) return s;
    if (repair_count && ev.minCoeff() < -neg_tol) ++(*repair_count);
    Vec clipped = ev.cwiseMax(0.0);
    return es.eigenvectors() * clipped.asDiagonal() * es.eigenvectors().transpose();
}

double min_eigenvalue(const Mat& a) {
    Eigen::SelfAdjointEigenSolver<Mat> es(symmetrize(a), Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
}

Mat psd_sqrt(const Mat& a) {
    Eigen::SelfAdjointEigenSolver<Mat> es(symmetrize(a));
    Vec ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

std::uint64_t fnv1a64(const std::string& bytes) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

}  // namespace fpilco
