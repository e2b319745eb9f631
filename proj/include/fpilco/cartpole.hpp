#pragma once

#include <string>
#include <vector>

#include "fpilco/cost.hpp"
#include "fpilco/filter.hpp"
#include "fpilco/policy.hpp"
#include "fpilco/rng.hpp"

namespace fpilco {

/// Ground-truth cartpole: a cart on a rail with a swinging pole, state
/// [x_c, theta, xdot_c, thetadot] with theta = 0 upright.
struct CartpoleParams {
    double cart_mass = 0.5;    // m_c [kg]
    double pole_mass = 0.5;    // m_p [kg]
    double pole_length = 0.2;  // l [m]
    double friction = 0.1;     // b [N s/m]
    double gravity = 9.82;     // g [m/s^2]
    double dt = 1.0 / 30.0;    // control interval [s]
    double u_max = 10.0;       // force bound [N]
    int substeps = 10;         // RK4 substeps per control interval

    double obs_pos_std = 0.03;  // camera noise on positions [m], [rad]
    double init_std = 0.2;      // initial state spread

    Vec obs_noise_std() const {
        Vec s(4);
        s << obs_pos_std, obs_pos_std, obs_pos_std / dt, obs_pos_std / dt;
        return s;
    }
    Mat obs_noise_cov() const {
        Vec s = obs_noise_std();
        return s.cwiseProduct(s).asDiagonal();
    }
    Vec init_mean() const {
        Vec m(4);
        m << 0.0, M_PI, 0.0, 0.0;
        return m;
    }
    Mat init_cov() const { return init_std * init_std * Mat::Identity(4, 4); }
};

/// Right-hand side of the equations of motion.
Vec cartpole_ode(const CartpoleParams& p, const Vec& x, double u);

/// Zero-order-hold integration over one control interval (RK4, clamps u).
Vec cartpole_step(const CartpoleParams& p, const Vec& x, double u);

/// Mechanical energy of the rod-on-cart system; conserved when both
/// friction and force are zero.
double cartpole_energy(const CartpoleParams& p, const Vec& x);

/// z = x + eps with eps ~ N(0, obs_noise_cov), deterministic given rng state.
Vec observe(const CartpoleParams& p, const Vec& x, Rng& rng);

enum class ExecMode { unfiltered, filtered };

struct TrajectoryStep {
    int t = 0;
    Vec x;          // latent state
    Vec z;          // observation
    Vec u;          // action applied at t (empty at the final step)
    Belief belief;  // posterior belief b_{t|t} (filtered mode)
    double cost = 0.0;
};

struct TrajectoryRecord {
    std::vector<TrajectoryStep> steps;
    bool aborted = false;
    std::string diagnostic;
};

/// Runs one episode of horizon spec.horizon. Unfiltered mode feeds raw
/// observations to the policy; filtered mode starts from the fixed prior
/// belief, updates on each observation from t = 1, and acts on the
/// posterior mean. `model` is only needed in filtered mode.
TrajectoryRecord execute_episode(const CartpoleParams& p, const PolicyParams& policy,
                                 const GPModel* model, ExecMode mode, std::uint64_t seed,
                                 const CostSpec& spec, const Mat& filter_noise);

// ---------------------------------------------------------------------
// episode log file: header `episode t x1 x2 x3 x4 u z1 z2 z3 z4`, one
// row per transition (x, u) -> z

struct DatasetRow {
    int episode = 0;
    int t = 0;
    Vec x;     // observed state fed to the model (4)
    double u;  // action
    Vec z;     // next-step observation (4)
};

struct DatasetFile {
    std::vector<DatasetRow> rows;

    void append_episode(const TrajectoryRecord& rec, int episode_index);
    GPDataset to_gp_dataset() const;
    void save(const std::string& path) const;
    static DatasetFile load(const std::string& path);
};

}  // namespace fpilco
