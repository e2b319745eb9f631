#include "fpilco/policy.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace fpilco {

double saturate(double a) { return (9.0 * std::sin(a) + std::sin(3.0 * a)) / 8.0; }

PolicyParams init_policy(int n_centroids, int action_dim, const Vec& mu0, const Mat& v0,
                         double u_max, std::uint64_t seed) {
    Rng rng(seed);
    const int d = static_cast<int>(mu0.size());
    PolicyParams p;
    p.u_max = u_max;
    p.centroids.resize(n_centroids, d);
    MvnSampler sampler(mu0, v0);
    for (int i = 0; i < n_centroids; ++i) p.centroids.row(i) = sampler.sample(rng).transpose();
    p.weights.resize(n_centroids, action_dim);
    for (int i = 0; i < n_centroids; ++i)
        for (int f = 0; f < action_dim; ++f) p.weights(i, f) = (u_max / 10.0) * rng.normal();
    p.lengthscales = Mat::Ones(d, action_dim);
    return p;
}

Vec policy_eval(const PolicyParams& p, const Vec& m) {
    Vec u(p.action_dim());
    for (int f = 0; f < p.action_dim(); ++f) {
        double a = 0.0;
        for (int i = 0; i < p.n_centroids(); ++i) {
            double quad = 0.0;
            for (int k = 0; k < p.state_dim(); ++k) {
                double diff = (m[k] - p.centroids(i, k)) / p.lengthscales(k, f);
                quad += diff * diff;
            }
            a += p.weights(i, f) * std::exp(-0.5 * quad);
        }
        u[f] = p.u_max * saturate(a);
    }
    return u;
}

namespace builders {

PolicyLeaves policy_leaves(Graph& g, const PolicyParams& p) {
    PolicyLeaves leaves;
    leaves.centroids = g.input(p.centroids);
    leaves.weights = g.input(p.weights);
    leaves.log_ell2 = g.input(2.0 * p.lengthscales.array().log().matrix());
    return leaves;
}

namespace {

// E[sin(p A) sin(q B)] for jointly Gaussian scalars
Var sin_cross(Graph& g, Var ma, Var mb, Var va, Var vb, Var c, double p, double q) {
    Var diff = g.sub(g.scale(ma, p), g.scale(mb, q));
    Var summ = g.add(g.scale(ma, p), g.scale(mb, q));
    Var base = g.add(g.scale(va, p * p), g.scale(vb, q * q));
    Var e_minus = g.cwise_exp(g.scale(g.add(base, g.scale(c, -2.0 * p * q)), -0.5));
    Var e_plus = g.cwise_exp(g.scale(g.add(base, g.scale(c, 2.0 * p * q)), -0.5));
    Var t1 = g.scalar_mul(g.cwise_cos(diff), e_minus);
    Var t2 = g.scalar_mul(g.cwise_cos(summ), e_plus);
    return g.scale(g.sub(t1, t2), 0.5);
}

}  // namespace

PolicyVars policy_moments_b(Graph& g, const PolicyLeaves& leaves, double u_max, Var mu, Var sigma) {
    const int nc = static_cast<int>(g.value(leaves.centroids).rows());
    const int d = static_cast<int>(g.value(leaves.centroids).cols());
    const int f_dim = static_cast<int>(g.value(leaves.weights).cols());

    Var nu = g.sub(leaves.centroids, g.matmul(g.constant(Mat::Ones(nc, 1)), g.transpose(mu)));

    std::vector<QParts> parts_s(f_dim), parts_0(f_dim);
    std::vector<Var> w(f_dim), pre_mean(f_dim), cpre_rbf(f_dim);
    for (int f = 0; f < f_dim; ++f) {
        Var le = g.block(leaves.log_ell2, 0, f, d, 1);
        Var lam = g.diag(g.cwise_exp(le));
        Var ld = g.sum_all(le);
        parts_s[f] = q_parts(g, nu, lam, ld, sigma);
        parts_0[f] = q_parts(g, nu, lam, ld, Var{});
        w[f] = g.block(leaves.weights, 0, f, nc, 1);
        Var qf = g.cwise_exp(parts_s[f].lq);
        pre_mean[f] = g.dot_all(qf, w[f]);
        cpre_rbf[f] =
            g.matmul(parts_s[f].prec, g.matmul(g.transpose(nu), g.hadamard(qf, w[f])));
    }

    // pre-squash second moments
    std::vector<std::vector<Var>> pre_cov(f_dim, std::vector<Var>(f_dim));
    for (int e = 0; e < f_dim; ++e) {
        for (int f = e; f < f_dim; ++f) {
            Var q = q_cross(g, parts_0[e], parts_0[f], sigma);
            Var c = g.sub(g.bilinear(w[e], q, w[f]), g.scalar_mul(pre_mean[e], pre_mean[f]));
            if (e == f) c = g.clamp_min(c, 0.0);
            pre_cov[e][f] = pre_cov[f][e] = c;
        }
    }

    // saturation moments per dimension
    std::vector<Var> sig_mean(f_dim), dsig(f_dim), mean_parts(f_dim), cpre_cols(f_dim);
    for (int f = 0; f < f_dim; ++f) {
        Var m = pre_mean[f], v = pre_cov[f][f];
        Var e1 = g.cwise_exp(g.scale(v, -0.5));
        Var e9 = g.cwise_exp(g.scale(v, -4.5));
        Var s1 = g.scalar_mul(g.cwise_sin(m), e1);
        Var s3 = g.scalar_mul(g.cwise_sin(g.scale(m, 3.0)), e9);
        sig_mean[f] = g.scale(g.add(g.scale(s1, 9.0), s3), 1.0 / 8.0);
        Var c1 = g.scalar_mul(g.cwise_cos(m), e1);
        Var c3 = g.scalar_mul(g.cwise_cos(g.scale(m, 3.0)), e9);
        dsig[f] = g.scale(g.add(g.scale(c1, 9.0), g.scale(c3, 3.0)), 1.0 / 8.0);
        mean_parts[f] = g.scale(sig_mean[f], u_max);
        cpre_cols[f] = g.scalar_mul(g.scale(dsig[f], u_max), cpre_rbf[f]);
    }

    std::vector<std::tuple<int, int, Var>> cov_entries;
    for (int e = 0; e < f_dim; ++e) {
        for (int f = e; f < f_dim; ++f) {
            Var s11 = sin_cross(g, pre_mean[e], pre_mean[f], pre_cov[e][e], pre_cov[f][f],
                                pre_cov[e][f], 1.0, 1.0);
            Var s13 = sin_cross(g, pre_mean[e], pre_mean[f], pre_cov[e][e], pre_cov[f][f],
                                pre_cov[e][f], 1.0, 3.0);
            Var s31 = sin_cross(g, pre_mean[e], pre_mean[f], pre_cov[e][e], pre_cov[f][f],
                                pre_cov[e][f], 3.0, 1.0);
            Var s33 = sin_cross(g, pre_mean[e], pre_mean[f], pre_cov[e][e], pre_cov[f][f],
                                pre_cov[e][f], 3.0, 3.0);
            Var second = g.scale(
                g.add(g.add(g.scale(s11, 81.0), g.scale(s13, 9.0)), g.add(g.scale(s31, 9.0), s33)),
                1.0 / 64.0);
            Var cov = g.sub(second, g.scalar_mul(sig_mean[e], sig_mean[f]));
            if (e == f) cov = g.clamp_min(cov, 0.0);
            cov = g.scale(cov, u_max * u_max);
            cov_entries.emplace_back(e, f, cov);
            if (e != f) cov_entries.emplace_back(f, e, cov);
        }
    }

    PolicyVars out;
    out.mean = g.vcat(mean_parts);
    out.cov = g.assemble(f_dim, f_dim, cov_entries);
    out.cpre = g.hcat(cpre_cols);
    return out;
}

}  // namespace builders

PolicyMoments policy_moments(const PolicyParams& p, const Vec& mu, const Mat& sigma) {
    if (mu.size() != p.state_dim())
        throw NumericalError("policy_moments: state dimension mismatch");
    ad::Graph g;
    builders::PolicyLeaves leaves;
    leaves.centroids = g.constant(p.centroids);
    leaves.weights = g.constant(p.weights);
    leaves.log_ell2 = g.constant(2.0 * p.lengthscales.array().log().matrix());
    auto vars = builders::policy_moments_b(g, leaves, p.u_max, g.constant(mu),
                                           g.constant(symmetrize(sigma)));
    PolicyMoments out;
    out.mean = g.value(vars.mean).col(0);
    out.cov = g.value(vars.cov);
    out.cpre = g.value(vars.cpre);
    return out;
}

// ---------------------------------------------------------------------

namespace {

std::string fmt_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void write_mat(std::ostream& os, const char* key, const Mat& m) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        os << key;
        for (Eigen::Index j = 0; j < m.cols(); ++j) os << ' ' << fmt_double(m(i, j));
        os << '\n';
    }
}

}  // namespace

void save_policy(const PolicyParams& p, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("save_policy: cannot open " + path);
    os << "format fpilco-policy 1\n";
    os << "n_centroids " << p.n_centroids() << "\n";
    os << "state_dim " << p.state_dim() << "\n";
    os << "action_dim " << p.action_dim() << "\n";
    os << "u_max " << fmt_double(p.u_max) << "\n";
    write_mat(os, "centroid", p.centroids);
    write_mat(os, "weight", p.weights);
    write_mat(os, "lengthscale", p.lengthscales);
    if (!os) throw std::runtime_error("save_policy: write failed for " + path);
}

PolicyParams load_policy(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("load_policy: cannot open " + path);
    PolicyParams p;
    int nc = -1, d = -1, f = -1, ci = 0, wi = 0, li = 0;
    std::string line, key;
    while (std::getline(is, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ss(line);
        ss >> key;
        if (key == "format") {
            std::string name;
            int ver;
            ss >> name >> ver;
            if (name != "fpilco-policy" || ver != 1)
                throw std::runtime_error("load_policy: unknown format in " + path);
        } else if (key == "n_centroids") {
            ss >> nc;
        } else if (key == "state_dim") {
            ss >> d;
        } else if (key == "action_dim") {
            ss >> f;
            p.centroids.resize(nc, d);
            p.weights.resize(nc, f);
            p.lengthscales.resize(d, f);
        } else if (key == "u_max") {
            ss >> p.u_max;
        } else if (key == "centroid") {
            for (int k = 0; k < d; ++k) ss >> p.centroids(ci, k);
            ++ci;
        } else if (key == "weight") {
            for (int k = 0; k < f; ++k) ss >> p.weights(wi, k);
            ++wi;
        } else if (key == "lengthscale") {
            for (int k = 0; k < f; ++k) ss >> p.lengthscales(li, k);
            ++li;
        } else {
            throw std::runtime_error("load_policy: unknown key '" + key + "' in " + path);
        }
        if (!ss) throw std::runtime_error("load_policy: parse error in " + path);
    }
    if (ci != nc || wi != nc || li != d)
        throw std::runtime_error("load_policy: incomplete file " + path);
    return p;
}

}  // namespace fpilco
