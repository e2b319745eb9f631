#pragma once

// Independent oracles for the moment formulas. Everything here computes
// from raw hyperparameters with its own linear algebra so the code paths
// under test are not reused.

#include "ad_check.hpp"
#include "fpilco/gp.hpp"
#include "fpilco/rng.hpp"

namespace fpilco::testutil {

/// Textbook GP posterior built from scratch (own kernel loop, own
/// factorization). Reads only the raw data and hyperparameters.
class PosteriorOracle {
public:
    explicit PosteriorOracle(const GPModel& model) : x_(model.inputs) {
        const int n = model.size();
        for (const GPDim& dim : model.dims) {
            DimState st;
            st.ell2 = dim.ell2;
            st.sf2 = dim.sf2;
            st.phi = dim.phi;
            Mat k(n, n);
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j) k(i, j) = kernel(st, x_.row(i), x_.row(j));
            k += dim.sn2 * Mat::Identity(n, n);
            Eigen::LDLT<Mat> ldlt(k);
            Vec r = model.targets.col(static_cast<int>(dims_.size())) - x_ * dim.phi;
            st.alpha = n > 0 ? Vec(ldlt.solve(r)) : Vec(0);
            st.kinv = n > 0 ? Mat(ldlt.solve(Mat::Identity(n, n))) : Mat(0, 0);
            dims_.push_back(std::move(st));
        }
    }

    int output_dim() const { return static_cast<int>(dims_.size()); }

    double mean(int a, const Vec& x) const {
        const DimState& st = dims_[static_cast<std::size_t>(a)];
        double m = st.phi.dot(x);
        for (Eigen::Index i = 0; i < x_.rows(); ++i)
            m += st.alpha[i] * kernel(st, x_.row(i), x.transpose());
        return m;
    }

    double var(int a, const Vec& x) const {
        const DimState& st = dims_[static_cast<std::size_t>(a)];
        if (x_.rows() == 0) return st.sf2;
        Vec k(x_.rows());
        for (Eigen::Index i = 0; i < x_.rows(); ++i) k[i] = kernel(st, x_.row(i), x.transpose());
        return st.sf2 - k.dot(st.kinv * k);
    }

    Vec mean_vec(const Vec& x) const {
        Vec m(output_dim());
        for (int a = 0; a < output_dim(); ++a) m[a] = mean(a, x);
        return m;
    }

private:
    struct DimState {
        Vec ell2, phi, alpha;
        double sf2 = 1.0;
        Mat kinv;
    };

    static double kernel(const DimState& st, const Eigen::RowVectorXd& a,
                         const Eigen::RowVectorXd& b) {
        double quad = 0.0;
        for (Eigen::Index c = 0; c < a.size(); ++c) {
            double d = a[c] - b[c];
            quad += d * d / st.ell2[c];
        }
        return st.sf2 * std::exp(-0.5 * quad);
    }

    Mat x_;
    std::vector<DimState> dims_;
};

/// Monte-Carlo moments of the GP output under a Gaussian input: outer
/// moments of the posterior mean plus the expected posterior variance on
/// the diagonal (law of total variance).
struct McMoments {
    Vec mean;
    Mat cov;
    Mat in_out_cov;  // C[x, f], not premultiplied
};

inline McMoments mc_uncertain(const PosteriorOracle& oracle, const Vec& mu, const Mat& sigma,
                              int n_samples, std::uint64_t seed) {
    const int dout = oracle.output_dim();
    const int din = static_cast<int>(mu.size());
    Rng rng(seed);
    MvnSampler sampler(mu, sigma);
    Vec sum = Vec::Zero(dout);
    Mat sum_outer = Mat::Zero(dout, dout);
    Vec sum_var = Vec::Zero(dout);
    Mat sum_xf = Mat::Zero(din, dout);
    Vec sum_x = Vec::Zero(din);
    for (int s = 0; s < n_samples; ++s) {
        Vec x = sampler.sample(rng);
        Vec f = oracle.mean_vec(x);
        sum += f;
        sum_outer += f * f.transpose();
        sum_x += x;
        sum_xf += x * f.transpose();
        for (int a = 0; a < dout; ++a) sum_var[a] += oracle.var(a, x);
    }
    double n = n_samples;
    McMoments out;
    out.mean = sum / n;
    out.cov = sum_outer / n - out.mean * out.mean.transpose();
    out.cov += Mat(Vec(sum_var / n).asDiagonal());
    out.in_out_cov = sum_xf / n - (sum_x / n) * out.mean.transpose();
    return out;
}

inline double rel_err_fro(const Mat& got, const Mat& want) {
    double denom = std::max(want.norm(), 1e-12);
    return (got - want).norm() / denom;
}

/// Random synthetic trained model for oracle tests: targets drawn from
/// the same kernel family so the posterior is well scaled.
inline GPModel random_model(Rng& rng, int n, int d_in, int d_out, bool with_mean = true) {
    Mat x = random_mat(rng, n, d_in);
    std::vector<GPHyper> hypers;
    Mat y(n, d_out);
    for (int a = 0; a < d_out; ++a) {
        GPHyper h;
        h.ell2 = Vec(d_in);
        for (int k = 0; k < d_in; ++k) h.ell2[k] = std::pow(0.6 + 0.8 * rng.uniform(), 2);
        h.sf2 = 0.5 + rng.uniform();
        h.sn2 = 0.01 + 0.02 * rng.uniform();
        h.phi = with_mean ? Vec(0.3 * random_mat(rng, d_in, 1)) : Vec(Vec::Zero(d_in));
        Mat k = se_kernel(h.ell2, h.sf2, x, x) + h.sn2 * Mat::Identity(n, n);
        Vec f = psd_sqrt(k) * rng.normal_vec(n);
        y.col(a) = f + x * h.phi;
        hypers.push_back(std::move(h));
    }
    return make_gp_model(std::move(x), std::move(y), std::move(hypers));
}

}  // namespace fpilco::testutil
