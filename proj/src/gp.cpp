#include "fpilco/gp.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "fpilco/bfgs.hpp"

namespace fpilco {

namespace {

constexpr double kLogParamBound = 30.0;

void validate_dataset(const GPDataset& ds) {
    if (ds.inputs.rows() < 1) throw TrainingError("train: empty dataset");
    if (ds.inputs.rows() != ds.targets.rows())
        throw TrainingError("train: input/target row count mismatch");
    if (!ds.inputs.allFinite() || !ds.targets.allFinite())
        throw TrainingError("train: non-finite entry in dataset");
    // duplicate inputs with conflicting targets make the likelihood degenerate
    const int n = ds.size();
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            if ((ds.inputs.row(i) - ds.inputs.row(j)).squaredNorm() < 1e-24 &&
                (ds.targets.row(i) - ds.targets.row(j)).squaredNorm() > 1e-12) {
                throw TrainingError("train: duplicate input rows with conflicting targets (rows " +
                                    std::to_string(i) + ", " + std::to_string(j) + ")");
            }
        }
    }
}

// squared distances per input coordinate, shared across likelihood evals
std::vector<Mat> coordinate_sqdist(const Mat& x) {
    std::vector<Mat> d;
    const int n = static_cast<int>(x.rows());
    for (int k = 0; k < x.cols(); ++k) {
        Mat diff = x.col(k).replicate(1, n) - x.col(k).transpose().replicate(n, 1);
        d.push_back(diff.cwiseProduct(diff));
    }
    return d;
}

Mat kernel_from_sqdist(const std::vector<Mat>& sqdist, const Vec& ell2, double sf2, int n) {
    Mat quad = Mat::Zero(n, n);
    for (std::size_t k = 0; k < sqdist.size(); ++k) quad += sqdist[k] / ell2[static_cast<int>(k)];
    return sf2 * (-0.5 * quad).array().exp().matrix();
}

struct DimObjective {
    const Mat& x;
    const Vec& y;
    const std::vector<Mat>& sqdist;
    bool learn_noise;
    double fixed_sn2;
    int d;
    int n;

    // packing: [log ell2 (d), log sf2, (log sn2), phi (d)]
    int param_count() const { return 2 * d + 1 + (learn_noise ? 1 : 0); }

    GPHyper unpack(const Vec& p) const {
        GPHyper h;
        h.ell2 = p.head(d).array().exp();
        h.sf2 = std::exp(p[d]);
        h.sn2 = learn_noise ? std::exp(p[d + 1]) : fixed_sn2;
        h.phi = p.tail(d);
        return h;
    }

    double operator()(const Vec& p, Vec* grad) const {
        if (p.head(d + 1 + (learn_noise ? 1 : 0)).cwiseAbs().maxCoeff() > kLogParamBound)
            return std::numeric_limits<double>::infinity();
        GPHyper h = unpack(p);
        Mat kf = kernel_from_sqdist(sqdist, h.ell2, h.sf2, n);
        Mat a = kf + h.sn2 * Mat::Identity(n, n);
        Eigen::LLT<Mat> llt(a);
        if (llt.info() != Eigen::Success) return std::numeric_limits<double>::infinity();
        Vec r = y - x * h.phi;
        Vec alpha = llt.solve(r);
        double logdet = 0.0;
        for (int i = 0; i < n; ++i) logdet += std::log(llt.matrixLLT()(i, i));
        double nlml = 0.5 * r.dot(alpha) + logdet + 0.5 * n * std::log(2.0 * M_PI);
        if (grad) {
            Mat b = llt.solve(Mat::Identity(n, n));
            b.noalias() -= alpha * alpha.transpose();
            Mat bk = b.cwiseProduct(kf);
            Vec g(param_count());
            for (int k = 0; k < d; ++k)
                g[k] = 0.25 / h.ell2[k] * bk.cwiseProduct(sqdist[static_cast<std::size_t>(k)]).sum();
            g[d] = 0.5 * bk.sum();
            if (learn_noise) g[d + 1] = 0.5 * h.sn2 * b.trace();
            g.tail(d) = -x.transpose() * alpha;
            *grad = g;
        }
        return nlml;
    }
};

}  // namespace

Mat se_kernel(const Vec& ell2, double sf2, const Mat& a, const Mat& b) {
    Mat k(a.rows(), b.rows());
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
        for (Eigen::Index j = 0; j < b.rows(); ++j) {
            double quad = 0.0;
            for (Eigen::Index c = 0; c < a.cols(); ++c) {
                double diff = a(i, c) - b(j, c);
                quad += diff * diff / ell2[c];
            }
            k(i, j) = sf2 * std::exp(-0.5 * quad);
        }
    }
    return k;
}

GPModel make_gp_model(Mat inputs, Mat targets, std::vector<GPHyper> hypers) {
    const int n = static_cast<int>(inputs.rows());
    GPModel model;
    model.inputs = std::move(inputs);
    model.targets = std::move(targets);
    for (std::size_t a = 0; a < hypers.size(); ++a) {
        GPHyper& h = hypers[a];
        if ((h.ell2.array() <= 0.0).any() || h.sf2 <= 0.0 || h.sn2 <= 0.0)
            throw TrainingError("make_gp_model: non-positive hyperparameter");
        GPDim dim;
        dim.ell2 = h.ell2;
        dim.sf2 = h.sf2;
        dim.sn2 = h.sn2;
        dim.phi = h.phi;
        if (n > 0) {
            Mat kf = se_kernel(h.ell2, h.sf2, model.inputs, model.inputs);
            Mat base = kf + h.sn2 * Mat::Identity(n, n);
            double scale = base.diagonal().mean();
            Eigen::LLT<Mat> llt;
            bool ok = false;
            for (double jitter : {0.0, 1e-10, 1e-8, 1e-6}) {
                llt.compute(base + jitter * scale * Mat::Identity(n, n));
                if (llt.info() == Eigen::Success) {
                    ok = true;
                    break;
                }
            }
            if (!ok)
                throw TrainingError("make_gp_model: kernel matrix not positive definite for output " +
                                    std::to_string(a) + " after jitter escalation");
            Vec r = model.targets.col(static_cast<int>(a)) - model.inputs * h.phi;
            dim.beta = llt.solve(r);
            dim.kinv = llt.solve(Mat::Identity(n, n));
        } else {
            dim.beta = Vec(0);
            dim.kinv = Mat(0, 0);
        }
        model.dims.push_back(std::move(dim));
    }
    return model;
}

double gp_nlml(const GPDataset& dataset, int dim, const GPHyper& hyper) {
    auto sqdist = coordinate_sqdist(dataset.inputs);
    DimObjective obj{dataset.inputs, dataset.targets.col(dim), sqdist,
                     false,          hyper.sn2,                dataset.input_dim(),
                     dataset.size()};
    Vec p(obj.param_count());
    p.head(obj.d) = hyper.ell2.array().log();
    p[obj.d] = std::log(hyper.sf2);
    p.tail(obj.d) = hyper.phi;
    return obj(p, nullptr);
}

GPModel train(const GPDataset& dataset, const std::optional<Vec>& fixed_noise,
              const TrainOptions& opts) {
    validate_dataset(dataset);
    const int n = dataset.size();
    const int d = dataset.input_dim();
    auto sqdist = coordinate_sqdist(dataset.inputs);

    // ordinary least squares for the linear-mean initialization
    Mat xtx = dataset.inputs.transpose() * dataset.inputs +
              1e-8 * Mat::Identity(d, d) * std::max(1.0, dataset.inputs.squaredNorm() / n);
    Mat phi0 = xtx.ldlt().solve(dataset.inputs.transpose() * dataset.targets);

    Vec input_var(d);
    for (int k = 0; k < d; ++k) {
        double mean = dataset.inputs.col(k).mean();
        input_var[k] = (dataset.inputs.col(k).array() - mean).square().sum() / std::max(1, n - 1);
        input_var[k] = std::max(input_var[k], 1e-4);
    }

    std::vector<GPHyper> hypers;
    for (int a = 0; a < dataset.output_dim(); ++a) {
        double mean = dataset.targets.col(a).mean();
        double yvar =
            std::max(1e-8, (dataset.targets.col(a).array() - mean).square().sum() / std::max(1, n - 1));
        bool learn_noise = !fixed_noise.has_value();
        double sn2 = learn_noise ? opts.init_noise_frac * yvar : (*fixed_noise)[a];
        if (sn2 <= 0.0) throw TrainingError("train: fixed noise must be positive");

        DimObjective obj{dataset.inputs, dataset.targets.col(a), sqdist, learn_noise, sn2, d, n};
        Vec p0(obj.param_count());
        p0.head(d) = input_var.array().log();
        p0[d] = std::log(yvar);
        if (learn_noise) p0[d + 1] = std::log(sn2);
        p0.tail(d) = phi0.col(a);

        BfgsOptions bopts;
        bopts.max_evals = opts.max_evals;
        bopts.grad_tol = 1e-5;
        auto res = bfgs_minimize([&obj](const Vec& p, Vec* g) { return obj(p, g); }, p0, bopts);
        if (!std::isfinite(res.fx))
            throw TrainingError("train: likelihood not finite for output " + std::to_string(a));
        hypers.push_back(obj.unpack(res.x));
    }
    return make_gp_model(dataset.inputs, dataset.targets, hypers);
}

void predict_point(const GPModel& model, const Vec& x, Vec& mean, Vec& var) {
    if (!x.allFinite()) throw NumericalError("predict_point: non-finite input");
    if (x.size() != model.input_dim() && model.size() > 0)
        throw NumericalError("predict_point: wrong input dimension");
    const int D = model.output_dim();
    mean.resize(D);
    var.resize(D);
    for (int a = 0; a < D; ++a) {
        const GPDim& dim = model.dims[static_cast<std::size_t>(a)];
        if (model.size() == 0) {
            mean[a] = dim.phi.dot(x);
            var[a] = dim.sf2;
            continue;
        }
        Mat k = se_kernel(dim.ell2, dim.sf2, model.inputs, x.transpose());
        mean[a] = dim.beta.dot(k.col(0)) + dim.phi.dot(x);
        var[a] = std::max(0.0, dim.sf2 - (k.col(0).transpose() * dim.kinv * k.col(0))(0, 0));
    }
}

// ---------------------------------------------------------------------
// serialization

namespace {

std::string fmt_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void write_row(std::ostream& os, const char* key, const Vec& v) {
    os << key;
    for (Eigen::Index i = 0; i < v.size(); ++i) os << ' ' << fmt_double(v[i]);
    os << '\n';
}

}  // namespace

void save_model(const GPModel& model, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("save_model: cannot open " + path);
    os << "format fpilco-gp-model 1\n";
    os << "n " << model.size() << "\n";
    os << "d_in " << model.input_dim() << "\n";
    os << "d_out " << model.output_dim() << "\n";
    for (int a = 0; a < model.output_dim(); ++a) {
        const GPDim& dim = model.dims[static_cast<std::size_t>(a)];
        os << "dim " << a << "\n";
        write_row(os, "ell2", dim.ell2);
        os << "sf2 " << fmt_double(dim.sf2) << "\n";
        os << "sn2 " << fmt_double(dim.sn2) << "\n";
        write_row(os, "phi", dim.phi);
    }
    for (int i = 0; i < model.size(); ++i) write_row(os, "input", model.inputs.row(i).transpose());
    for (int i = 0; i < model.size(); ++i) write_row(os, "target", model.targets.row(i).transpose());
    if (!os) throw std::runtime_error("save_model: write failed for " + path);
}

GPModel load_model(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("load_model: cannot open " + path);
    std::string line, key;
    int n = -1, d_in = -1, d_out = -1;

    auto fail = [&](const std::string& why) -> void {
        throw std::runtime_error("load_model: " + why + " in " + path);
    };

    std::vector<GPHyper> hypers;
    Mat inputs, targets;
    int in_row = 0, tgt_row = 0;
    while (std::getline(is, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ss(line);
        ss >> key;
        if (key == "format") {
            std::string name;
            int ver;
            ss >> name >> ver;
            if (name != "fpilco-gp-model" || ver != 1) fail("unknown format");
        } else if (key == "n") {
            ss >> n;
        } else if (key == "d_in") {
            ss >> d_in;
        } else if (key == "d_out") {
            ss >> d_out;
            if (n < 0 || d_in < 0) fail("header out of order");
            inputs.resize(n, d_in);
            targets.resize(n, d_out);
        } else if (key == "dim") {
            hypers.emplace_back();
            hypers.back().ell2.resize(d_in);
            hypers.back().phi.resize(d_in);
        } else if (key == "ell2") {
            for (int k = 0; k < d_in; ++k) ss >> hypers.back().ell2[k];
        } else if (key == "sf2") {
            ss >> hypers.back().sf2;
        } else if (key == "sn2") {
            ss >> hypers.back().sn2;
        } else if (key == "phi") {
            for (int k = 0; k < d_in; ++k) ss >> hypers.back().phi[k];
        } else if (key == "input") {
            if (in_row >= n) fail("too many input rows");
            for (int k = 0; k < d_in; ++k) ss >> inputs(in_row, k);
            ++in_row;
        } else if (key == "target") {
            if (tgt_row >= n) fail("too many target rows");
            for (int k = 0; k < d_out; ++k) ss >> targets(tgt_row, k);
            ++tgt_row;
        } else {
            fail("unknown key '" + key + "'");
        }
        if (!ss) fail("parse error at key '" + key + "'");
    }
    if (in_row != n || tgt_row != n || static_cast<int>(hypers.size()) != d_out)
        fail("incomplete model");
    return make_gp_model(std::move(inputs), std::move(targets), std::move(hypers));
}

}  // namespace fpilco
