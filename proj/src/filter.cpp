#include "fpilco/filter.hpp"

namespace fpilco {

Belief filter_update(const Belief& prior, const Vec& z, const Mat& noise_cov) {
    const Eigen::Index d = prior.m.size();
    if (z.size() != d || noise_cov.rows() != d || noise_cov.cols() != d)
        throw NumericalError("filter_update: dimension mismatch");
    Mat s = symmetrize(prior.v + noise_cov);
    Eigen::LLT<Mat> llt(s);
    if (llt.info() != Eigen::Success)
        throw NumericalError("filter_update: V + noise covariance is singular");
    // W_m = noise * S^{-1}, W_z = V * S^{-1}; computed via S^{-1} * (.) transposed
    Mat w_m = llt.solve(noise_cov).transpose();
    Mat w_z = llt.solve(prior.v).transpose();
    Belief post;
    post.m = w_m * prior.m + w_z * z;
    post.v = symmetrize(w_m * prior.v);
    return post;
}

Belief filter_predict(const Belief& post, const Vec& u, const GPModel& model) {
    const Eigen::Index d = post.m.size();
    const Eigen::Index f = u.size();
    Vec stacked(d + f);
    stacked << post.m, u;
    Mat var = Mat::Zero(d + f, d + f);
    var.topLeftCorner(d, d) = post.v;
    MomentOut out = predict_uncertain(model, GaussianVec(stacked, var));
    return Belief{out.mean, out.cov};
}

}  // namespace fpilco
