#include "fpilco/cost.hpp"

#include <cmath>

namespace fpilco {

double state_cost(const CostSpec& spec, const Vec& x) {
    const double l = spec.pole_length;
    double dx = x[0] - l * std::sin(x[1]);
    double dy = l - l * std::cos(x[1]);
    double d2 = dx * dx + dy * dy;
    return 1.0 - std::exp(-0.5 * d2 / (spec.sigma_c * spec.sigma_c));
}

namespace builders {

Var expected_cost_b(Graph& g, const CostSpec& spec, Var mu, Var sigma) {
    const double l = spec.pole_length;

    Var mu_c = g.entry(mu, 0, 0);
    Var mu_t = g.entry(mu, 1, 0);
    Var s00 = g.entry(sigma, 0, 0);
    Var s01 = g.entry(sigma, 0, 1);
    Var s11 = g.entry(sigma, 1, 1);

    // closed-form Gaussian moments of [x_c, sin(theta), cos(theta)]
    Var e1 = g.cwise_exp(g.scale(s11, -0.5));
    Var e2 = g.cwise_exp(g.scale(s11, -2.0));
    Var sin_m = g.cwise_sin(mu_t);
    Var cos_m = g.cwise_cos(mu_t);
    Var sin_2m = g.cwise_sin(g.scale(mu_t, 2.0));
    Var cos_2m = g.cwise_cos(g.scale(mu_t, 2.0));
    Var ms = g.scalar_mul(sin_m, e1);
    Var mc = g.scalar_mul(cos_m, e1);
    Var half = g.scalar_constant(0.5);
    Var v_ss = g.sub(g.sub(half, g.scale(g.scalar_mul(cos_2m, e2), 0.5)), g.scalar_mul(ms, ms));
    Var v_cc = g.sub(g.add(half, g.scale(g.scalar_mul(cos_2m, e2), 0.5)), g.scalar_mul(mc, mc));
    Var v_sc = g.sub(g.scale(g.scalar_mul(sin_2m, e2), 0.5), g.scalar_mul(ms, mc));
    Var c_xs = g.scalar_mul(s01, g.scalar_mul(cos_m, e1));
    Var c_xc = g.scale(g.scalar_mul(s01, g.scalar_mul(sin_m, e1)), -1.0);

    Var m_aug = g.vcat({mu_c, ms, mc});
    Var s_aug = g.assemble(3, 3,
                           {{0, 0, s00},
                            {0, 1, c_xs},
                            {1, 0, c_xs},
                            {0, 2, c_xc},
                            {2, 0, c_xc},
                            {1, 1, v_ss},
                            {1, 2, v_sc},
                            {2, 1, v_sc},
                            {2, 2, v_cc}});

    // d^2 = |B a + b0|^2 with a = [x_c, sin, cos]: quadratic form around
    // the target t = [0, 0, 1]
    Mat w(3, 3);
    w << 1.0, -l, 0.0, -l, l * l, 0.0, 0.0, 0.0, l * l;
    w /= spec.sigma_c * spec.sigma_c;
    Var w_c = g.constant(w);
    Vec target(3);
    target << 0.0, 0.0, 1.0;

    Var d = g.sub(m_aug, g.constant(target));
    Var m_mat = g.add(g.matmul(s_aug, w_c), g.constant(Mat::Identity(3, 3)));
    Var y = g.solve_lu(m_mat, d);
    Var quad = g.dot_all(g.matmul(w_c, d), y);
    Var ldet = g.logdet_lu(m_mat);
    Var expo = g.cwise_exp(g.add(g.scale(quad, -0.5), g.scale(ldet, -0.5)));
    return g.sub(g.scalar_constant(1.0), expo);
}

}  // namespace builders

double expected_cost(const CostSpec& spec, const Vec& mu, const Mat& sigma) {
    if (mu.size() < 2 || sigma.rows() < 2)
        throw NumericalError("expected_cost: state must carry [x_c, theta]");
    ad::Graph g;
    ad::Var out = builders::expected_cost_b(g, spec, g.constant(mu), g.constant(symmetrize(sigma)));
    return g.scalar(out);
}

double total_cost(const CostSpec& spec, const std::vector<GaussianVec>& marginals, double gamma) {
    double j = 0.0, w = 1.0;
    for (const GaussianVec& m : marginals) {
        j += w * expected_cost(spec, m.mean, m.cov);
        w *= gamma;
    }
    return j;
}

}  // namespace fpilco
