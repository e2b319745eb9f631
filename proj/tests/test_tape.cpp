#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "ad_check.hpp"
#include "fpilco/tape.hpp"

using namespace fpilco;
using namespace fpilco::testutil;
namespace ad = fpilco::ad;

namespace {

// Builds a graph from leaves, reduces the tested expression to a scalar
// against fixed weights, and compares reverse-mode against central FD.
void check_gradients(const std::function<ad::Var(ad::Graph&, const std::vector<ad::Var>&)>& build,
                     const std::vector<Mat>& leaf_values, double tol = 5e-6) {
    ad::Graph g;
    std::vector<ad::Var> leaves;
    for (const Mat& v : leaf_values) leaves.push_back(g.input(v));
    ad::Var out = build(g, leaves);
    REQUIRE(g.value(out).size() == 1);
    g.backward({{out, Mat::Ones(1, 1)}});

    auto f = [&](const std::vector<Mat>& vals) {
        ad::Graph h;
        std::vector<ad::Var> ls;
        for (const Mat& v : vals) ls.push_back(h.input(v));
        return h.scalar(build(h, ls));
    };
    auto fd = fd_gradients(f, leaf_values);
    for (std::size_t k = 0; k < leaves.size(); ++k) {
        INFO("leaf ", k);
        CHECK(max_rel_err(g.grad(leaves[k]), fd[k]) < tol);
    }
}

}  // namespace

TEST_CASE("arithmetic and elementwise vjps match finite differences") {
    Rng rng(7);
    Mat a = random_mat(rng, 3, 4), b = random_mat(rng, 3, 4), w = random_mat(rng, 3, 4);

    check_gradients(
        [&](ad::Graph& g, const std::vector<ad::Var>& l) {
            ad::Var sum = g.add(l[0], g.scale(l[1], -2.5));
            ad::Var had = g.hadamard(sum, l[0]);
            return g.dot_all(had, g.constant(w));
        },
        {a, b});

    check_gradients(
        [&](ad::Graph& g, const std::vector<ad::Var>& l) {
            ad::Var e = g.cwise_exp(g.scale(l[0], 0.3));
            ad::Var s = g.cwise_sin(l[1]);
            ad::Var c = g.cwise_cos(l[1]);
            return g.sum_all(g.hadamard(e, g.sub(s, c)));
        },
        {a, b});

    Mat pos = a.array().abs().matrix() + Mat::Constant(3, 4, 0.5);
    check_gradients(
        [&](ad::Graph& g, const std::vector<ad::Var>& l) {
            return g.sum_all(g.cwise_log(l[0]));
        },
        {pos});
}

TEST_CASE("matmul transpose and scalar ops") {
    Rng rng(13);
    Mat a = random_mat(rng, 3, 5), b = random_mat(rng, 5, 2), w = random_mat(rng, 3, 2);
    Mat s = Mat::Constant(1, 1, 0.7);

    check_gradients(
        [&](ad::Graph& g, const std::vector<ad::Var>& l) {
            ad::Var prod = g.matmul(l[0], l[1]);
            ad::Var shifted = g.add_scalar(prod, l[2]);
            ad::Var scaled = g.scalar_mul(l[2], shifted);
            return g.dot_all(g.transpose(scaled), g.constant(Mat(w.transpose())));
        },
        {a, b, s});
}

TEST_CASE("spd and lu solves, logdets") {
    Rng rng(21);
    Mat spd = random_spd(rng, 4);
    Mat rhs = random_mat(rng, 4, 3), w = random_mat(rng, 4, 3);
    Mat sq = random_mat(rng, 4, 4) + 4.0 * Mat::Identity(4, 4);

    check_gradients(
        [&](ad::Graph& g, const std::vector<ad::Var>& l) {
            ad::Var sym = g.symmetrize(l[0]);
            ad::Var x = g.solve_spd(sym, l[1]);
            return g.add(g.dot_all(x, g.constant(w)), g.logdet_spd(sym));
        },
        {spd, rhs});

    check_gradients(
        [&](ad::Graph& g, const std::vector<ad::Var>& l) {
            ad::Var x = g.solve_lu(l[0], l[1]);
            return g.add(g.dot_all(x, g.constant(w)), g.logdet_lu(l[0]));
        },
        {sq, rhs});
}

TEST_CASE("reductions bilinear and exp_rank1") {
    Rng rng(34);
    Mat q = random_mat(rng, 6, 5);
    Mat u = random_mat(rng, 6, 1), v = random_mat(rng, 5, 1);
    Mat gmat = 0.2 * random_mat(rng, 6, 5);
    Mat r = 0.2 * random_mat(rng, 6, 1), s = 0.2 * random_mat(rng, 5, 1);
    Mat c = Mat::Constant(1, 1, -0.3);

    check_gradients(
        [&](ad::Graph& g, const std::vector<ad::Var>& l) {
            return g.bilinear(l[0], l[1], l[2]);
        },
        {u, q, v});

    check_gradients(
        [&](ad::Graph& g, const std::vector<ad::Var>& l) {
            ad::Var e = g.exp_rank1(l[0], l[1], l[2], l[3]);
            return g.bilinear(g.constant(u), e, g.constant(v));
        },
        {gmat, r, s, c});

    // exp_rank1 agrees with the unfused expression
    ad::Graph g;
    ad::Var G = g.input(gmat), R = g.input(r), S = g.input(s), C = g.input(c);
    ad::Var fused = g.exp_rank1(G, R, S, C);
    Mat expect =
        ((gmat.colwise() + r.col(0)).rowwise() + s.col(0).transpose()).array().exp().matrix() *
        std::exp(c(0, 0));
    CHECK((g.value(fused) - expect).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("structure ops: block vcat hcat diag assemble") {
    Rng rng(55);
    Mat a = random_mat(rng, 4, 4), b = random_mat(rng, 2, 4), vcol = random_mat(rng, 3, 1);
    Mat w6 = random_mat(rng, 6, 4), w33 = random_mat(rng, 3, 3);

    check_gradients(
        [&](ad::Graph& g, const std::vector<ad::Var>& l) {
            ad::Var top = g.block(l[0], 0, 0, 2, 4);
            ad::Var cat = g.vcat({top, l[1], g.block(l[0], 2, 0, 2, 4)});
            return g.dot_all(cat, g.constant(w6));
        },
        {a, b});

    check_gradients(
        [&](ad::Graph& g, const std::vector<ad::Var>& l) {
            ad::Var d = g.diag(l[0]);
            ad::Var row = g.hcat({g.block(d, 0, 0, 3, 2), g.block(d, 0, 2, 3, 1)});
            return g.dot_all(row, g.constant(w33));
        },
        {vcol});

    check_gradients(
        [&](ad::Graph& g, const std::vector<ad::Var>& l) {
            ad::Var s0 = g.entry(l[0], 0, 0);
            ad::Var s1 = g.entry(l[0], 1, 2);
            // symmetric placement with a repeated entry on the diagonal
            ad::Var asm_ = g.assemble(3, 3, {{0, 1, s0}, {1, 0, s0}, {2, 2, s1}, {2, 2, s0}});
            return g.dot_all(asm_, g.constant(w33));
        },
        {a});
}

TEST_CASE("guards pass gradients through and repair values") {
    Mat neg(2, 2);
    neg << 1.0, 0.9999, 0.9999, 1.0;
    Mat bad = neg - 1.0001 * Mat::Identity(2, 2);  // one clearly negative eigenvalue

    long repairs = 0;
    ad::Graph g;
    ad::Var a = g.input(bad);
    ad::Var clipped = g.psd_clip_guard(a, 1e-10, &repairs);
    CHECK(repairs == 1);
    CHECK(min_eigenvalue(g.value(clipped)) >= -1e-15);

    g.backward({{g.sum_all(clipped), Mat::Ones(1, 1)}});
    CHECK(g.grad(a).sum() == doctest::Approx(4.0));

    ad::Graph h;
    ad::Var x = h.input(Mat::Constant(1, 1, -2.0));
    ad::Var y = h.clamp_min(x, 0.0);
    CHECK(h.scalar(y) == 0.0);
}

TEST_CASE("backward accumulates through shared subexpressions") {
    // d/dx of (x*x) computed via two paths sharing a node
    ad::Graph g;
    ad::Var x = g.input(Mat::Constant(1, 1, 3.0));
    ad::Var sq = g.hadamard(x, x);
    ad::Var out = g.add(sq, sq);
    g.backward({{out, Mat::Ones(1, 1)}});
    CHECK(g.grad(x)(0, 0) == doctest::Approx(12.0));
}

TEST_CASE("errors surface as numerical failures") {
    ad::Graph g;
    ad::Var bad = g.input(-Mat::Identity(2, 2));
    CHECK_THROWS_AS(g.solve_spd(bad, g.constant(Mat::Identity(2, 2))), NumericalError);
    CHECK_THROWS_AS(g.logdet_lu(g.constant(Mat::Zero(2, 2))), NumericalError);
    CHECK_THROWS_AS(g.cwise_log(bad), NumericalError);
}
