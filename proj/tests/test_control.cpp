#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>

#include "fpilco/cartpole.hpp"
#include "oracles.hpp"

using namespace fpilco;
using namespace fpilco::testutil;

// ------------------------------------------------------------- filter

TEST_CASE("certain prior ignores the observation") {
    Belief prior{Vec::LinSpaced(4, 0.0, 3.0), Mat::Zero(4, 4)};
    Vec z = Vec::Constant(4, 9.0);
    Belief post = filter_update(prior, z, 0.5 * Mat::Identity(4, 4));
    CHECK((post.m - prior.m).cwiseAbs().maxCoeff() < 1e-14);
    CHECK(post.v.cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("symmetric fusion averages") {
    double s2 = 0.3;
    Belief prior{Vec::Zero(4), s2 * Mat::Identity(4, 4)};
    Vec z = Vec::LinSpaced(4, -1.0, 2.0);
    Belief post = filter_update(prior, z, s2 * Mat::Identity(4, 4));
    CHECK((post.m - 0.5 * z).cwiseAbs().maxCoeff() < 1e-14);
    CHECK((post.v - 0.5 * s2 * Mat::Identity(4, 4)).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("update matches information-form fusion") {
    Rng rng(7);
    for (int trial = 0; trial < 50; ++trial) {
        Belief prior{random_mat(rng, 4, 1), random_spd(rng, 4, 0.2)};
        Mat noise = random_spd(rng, 4, 0.2);
        Vec z = random_mat(rng, 4, 1);
        Belief post = filter_update(prior, z, noise);

        Mat vp_inv = prior.v.inverse(), ne_inv = noise.inverse();
        Mat v_oracle = (vp_inv + ne_inv).inverse();
        Vec m_oracle = v_oracle * (vp_inv * prior.m + ne_inv * z);
        CHECK((post.m - m_oracle).cwiseAbs().maxCoeff() < 1e-10);
        CHECK((post.v - v_oracle).cwiseAbs().maxCoeff() < 1e-10);
        // posterior covariance never exceeds the prior in Loewner order
        CHECK(min_eigenvalue(prior.v - post.v) > -1e-10);
    }
}

TEST_CASE("noise-free limit snaps to the observation") {
    Rng rng(8);
    Belief prior{random_mat(rng, 4, 1), random_spd(rng, 4, 0.5)};
    Vec z = random_mat(rng, 4, 1);
    Belief post = filter_update(prior, z, 1e-12 * Mat::Identity(4, 4));
    CHECK((post.m - z).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("degenerate prior plus degenerate noise fails loudly") {
    Belief prior{Vec::Zero(2), Mat::Zero(2, 2)};
    CHECK_THROWS_AS(filter_update(prior, Vec::Zero(2), Mat::Zero(2, 2)), NumericalError);
}

TEST_CASE("predict from a certain belief is the point posterior") {
    Rng rng(9);
    GPModel model = random_model(rng, 25, 5, 4);
    Belief post{random_mat(rng, 4, 1), Mat::Zero(4, 4)};
    Vec u = Vec::Constant(1, 0.7);
    Belief next = filter_predict(post, u, model);
    Vec stacked(5);
    stacked << post.m, u;
    Vec mean, var;
    predict_point(model, stacked, mean, var);
    CHECK((next.m - mean).cwiseAbs().maxCoeff() < 1e-10);
    for (int a = 0; a < 4; ++a) CHECK(std::abs(next.v(a, a) - var[a]) < 1e-10);
}

TEST_CASE("prior-only model with identity-on-state mean propagates the mean") {
    std::vector<GPHyper> hypers;
    for (int a = 0; a < 4; ++a) {
        GPHyper h;
        h.ell2 = Vec::Ones(5);
        h.sf2 = 0.5 + 0.1 * a;
        h.sn2 = 0.01;
        h.phi = Vec::Zero(5);
        h.phi[a] = 1.0;
        hypers.push_back(h);
    }
    GPModel model = make_gp_model(Mat(0, 5), Mat(0, 4), hypers);
    Rng rng(10);
    Belief post{random_mat(rng, 4, 1), Mat::Zero(4, 4)};
    Belief next = filter_predict(post, Vec::Constant(1, -0.3), model);
    CHECK((next.m - post.m).cwiseAbs().maxCoeff() < 1e-14);
    for (int a = 0; a < 4; ++a) CHECK(next.v(a, a) == doctest::Approx(hypers[a].sf2).epsilon(1e-12));
}

TEST_CASE("predict agrees with predict_uncertain on the stacked gaussian") {
    Rng rng(11);
    GPModel model = random_model(rng, 20, 5, 4);
    Belief post{random_mat(rng, 4, 1), random_spd(rng, 4, 0.1)};
    Vec u = Vec::Constant(1, 0.2);
    Belief next = filter_predict(post, u, model);
    Vec stacked(5);
    stacked << post.m, u;
    Mat var = Mat::Zero(5, 5);
    var.topLeftCorner(4, 4) = post.v;
    MomentOut direct = predict_uncertain(model, GaussianVec(stacked, var));
    CHECK((next.m - direct.mean).cwiseAbs().maxCoeff() == 0.0);
    CHECK((next.v - direct.cov).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("sixty update-predict cycles keep the belief psd on simulator data") {
    CartpoleParams p;
    CostSpec spec;
    PolicyParams expl = init_policy(20, 1, p.init_mean(), p.init_cov(), p.u_max, 21);
    DatasetFile data;
    for (int ep = 0; ep < 2; ++ep) {
        TrajectoryRecord rec = execute_episode(p, expl, nullptr, ExecMode::unfiltered,
                                               400 + static_cast<std::uint64_t>(ep), spec,
                                               p.obs_noise_cov());
        data.append_episode(rec, ep);
    }
    Vec noise_diag = p.obs_noise_cov().diagonal();
    GPModel model = train(data.to_gp_dataset(), noise_diag, TrainOptions{60, 0.01});

    TrajectoryRecord run =
        execute_episode(p, expl, &model, ExecMode::filtered, 1234, spec, p.obs_noise_cov());
    REQUIRE(run.steps.size() == 61);
    CHECK(!run.aborted);
    for (const auto& s : run.steps) CHECK(min_eigenvalue(s.belief.v) > -1e-10);
}

TEST_CASE("filtering is vacuous without noise") {
    CartpoleParams p;
    p.obs_pos_std = 0.0;
    p.init_std = 1e-9;
    CostSpec spec;
    PolicyParams pol = init_policy(12, 1, p.init_mean(), p.init_cov(), p.u_max, 5);
    // tiny but nonsingular filter noise stands in for the zero-noise limit
    Mat tiny = 1e-14 * Mat::Identity(4, 4);

    Rng rng(2);
    GPModel model = random_model(rng, 20, 5, 4);
    TrajectoryRecord filt = execute_episode(p, pol, &model, ExecMode::filtered, 7, spec, tiny);
    TrajectoryRecord raw = execute_episode(p, pol, nullptr, ExecMode::unfiltered, 7, spec, tiny);
    REQUIRE(!filt.aborted);
    for (std::size_t i = 0; i + 1 < filt.steps.size(); ++i)
        CHECK((filt.steps[i].u - raw.steps[i].u).cwiseAbs().maxCoeff() < 1e-6);
}

// ------------------------------------------------------------- policy

TEST_CASE("zero weights produce zero force") {
    CartpoleParams p;
    PolicyParams pol = init_policy(30, 1, p.init_mean(), p.init_cov(), p.u_max, 6);
    pol.weights.setZero();
    Rng rng(12);
    for (int i = 0; i < 5; ++i) CHECK(policy_eval(pol, random_mat(rng, 4, 1))[0] == 0.0);
    PolicyMoments pm = policy_moments(pol, random_mat(rng, 4, 1), random_spd(rng, 4, 0.3));
    CHECK(std::abs(pm.mean[0]) < 1e-15);
    CHECK(std::abs(pm.cov(0, 0)) < 1e-15);
}

TEST_CASE("force respects the bound everywhere") {
    CartpoleParams p;
    Rng rng(13);
    for (int trial = 0; trial < 20; ++trial) {
        PolicyParams pol =
            init_policy(25, 1, p.init_mean(), p.init_cov(), p.u_max, 100 + trial);
        pol.weights *= 50.0;  // drive the saturation hard
        Vec m = 3.0 * random_mat(rng, 4, 1);
        CHECK(std::abs(policy_eval(pol, m)[0]) <= 10.0 + 1e-12);
    }
}

TEST_CASE("saturation is bounded, odd, monotone up to its peak") {
    CHECK(saturate(0.0) == 0.0);
    CHECK(saturate(M_PI / 2.0) == doctest::Approx(1.0).epsilon(1e-14));
    double prev = -1.0;
    for (int i = 0; i <= 100; ++i) {
        double a = M_PI / 2.0 * i / 100.0;
        CHECK(saturate(a) >= prev - 1e-12);
        prev = saturate(a);
    }
    for (double a = -8.0; a < 8.0; a += 0.13) {
        CHECK(std::abs(saturate(a)) <= 1.0 + 1e-12);
        CHECK(saturate(-a) == doctest::Approx(-saturate(a)).epsilon(1e-14));
    }
}

TEST_CASE("deterministic input reduces moments to the point evaluation") {
    CartpoleParams p;
    Rng rng(14);
    PolicyParams pol = init_policy(20, 1, p.init_mean(), p.init_cov(), p.u_max, 17);
    Vec m = random_mat(rng, 4, 1);
    PolicyMoments pm = policy_moments(pol, m, Mat::Zero(4, 4));
    CHECK(pm.mean[0] == doctest::Approx(policy_eval(pol, m)[0]).epsilon(1e-12));
    CHECK(std::abs(pm.cov(0, 0)) < 1e-12);

    // premultiplied input-output covariance reduces to du/dm
    for (int k = 0; k < 4; ++k) {
        double h = 1e-6;
        Vec mp = m, mm = m;
        mp[k] += h;
        mm[k] -= h;
        double fd = (policy_eval(pol, mp)[0] - policy_eval(pol, mm)[0]) / (2.0 * h);
        CHECK(pm.cpre(k, 0) == doctest::Approx(fd).epsilon(1e-6));
    }
}

TEST_CASE("policy moments match monte carlo") {
    CartpoleParams p;
    Rng rng(15);
    for (int trial = 0; trial < 3; ++trial) {
        PolicyParams pol = init_policy(15, 1, p.init_mean(), p.init_cov(), p.u_max, 300 + trial);
        pol.weights *= 3.0;
        Vec mu = p.init_mean() + 0.5 * random_mat(rng, 4, 1);
        Mat sigma = random_spd(rng, 4, 0.1);
        PolicyMoments pm = policy_moments(pol, mu, sigma);

        MvnSampler sampler(mu, sigma);
        Rng mc(900 + trial);
        double sum = 0.0, sum2 = 0.0;
        Vec sum_x = Vec::Zero(4), sum_xu = Vec::Zero(4);
        const int n = 1000000;
        for (int i = 0; i < n; ++i) {
            Vec x = sampler.sample(mc);
            double u = policy_eval(pol, x)[0];
            sum += u;
            sum2 += u * u;
            sum_x += x;
            sum_xu += x * u;
        }
        double mc_mean = sum / n;
        double mc_var = sum2 / n - mc_mean * mc_mean;
        Vec mc_cov_xu = sum_xu / n - (sum_x / n) * mc_mean;
        CHECK(std::abs(pm.mean[0] - mc_mean) < 2e-2 * std::max(0.05, std::abs(mc_mean)));
        CHECK(std::abs(pm.cov(0, 0) - mc_var) < 2e-2 * std::max(0.05, mc_var));
        Vec impl_cov_xu = sigma * pm.cpre.col(0);
        CHECK((impl_cov_xu - mc_cov_xu).norm() < 2e-2 * std::max(0.05, mc_cov_xu.norm()));
    }
}

TEST_CASE("squashed moments stay inside the force bound") {
    CartpoleParams p;
    Rng rng(16);
    for (int trial = 0; trial < 25; ++trial) {
        PolicyParams pol = init_policy(12, 1, p.init_mean(), p.init_cov(), p.u_max, 500 + trial);
        pol.weights *= 1.0 + 10.0 * rng.uniform();
        PolicyMoments pm =
            policy_moments(pol, random_mat(rng, 4, 1), random_spd(rng, 4, 0.2));
        CHECK(std::abs(pm.mean[0]) <= pol.u_max);
        CHECK(pm.cov(0, 0) >= 0.0);
        CHECK(pm.cov(0, 0) <= pol.u_max * pol.u_max);
    }
}

TEST_CASE("policy serialization round-trips exactly") {
    CartpoleParams p;
    PolicyParams pol = init_policy(8, 1, p.init_mean(), p.init_cov(), p.u_max, 44);
    save_policy(pol, "policy_roundtrip.txt");
    PolicyParams loaded = load_policy("policy_roundtrip.txt");
    std::remove("policy_roundtrip.txt");
    CHECK((loaded.centroids - pol.centroids).cwiseAbs().maxCoeff() == 0.0);
    CHECK((loaded.weights - pol.weights).cwiseAbs().maxCoeff() == 0.0);
    CHECK((loaded.lengthscales - pol.lengthscales).cwiseAbs().maxCoeff() == 0.0);
    CHECK(loaded.u_max == pol.u_max);
}

TEST_CASE("policy initialization is seeded and shaped") {
    CartpoleParams p;
    PolicyParams a = init_policy(100, 1, p.init_mean(), p.init_cov(), p.u_max, 9);
    PolicyParams b = init_policy(100, 1, p.init_mean(), p.init_cov(), p.u_max, 9);
    CHECK(a.n_centroids() == 100);
    CHECK((a.centroids - b.centroids).cwiseAbs().maxCoeff() == 0.0);
    CHECK((a.lengthscales.array() == 1.0).all());
    // centroids concentrate around the initial distribution
    Vec mean = a.centroids.colwise().mean().transpose();
    CHECK((mean - p.init_mean()).cwiseAbs().maxCoeff() < 0.1);
}
