#include "fpilco/cartpole.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace fpilco {

Vec cartpole_ode(const CartpoleParams& p, const Vec& x, double u) {
    const double mc = p.cart_mass, mp = p.pole_mass, l = p.pole_length, b = p.friction,
                 g = p.gravity;
    const double s = std::sin(x[1]), c = std::cos(x[1]);
    const double xd = x[2], td = x[3];
    const double denom = 4.0 * (mc + mp) - 3.0 * mp * c * c;
    Vec dx(4);
    dx[0] = xd;
    dx[1] = td;
    dx[2] = (-2.0 * mp * l * td * td * s + 3.0 * mp * g * s * c + 4.0 * u - 4.0 * b * xd) / denom;
    dx[3] = (-3.0 * mp * l * td * td * s * c + 6.0 * (mc + mp) * g * s + 6.0 * (u - b * xd) * c) /
            (l * denom);
    return dx;
}

Vec cartpole_step(const CartpoleParams& p, const Vec& x, double u) {
    u = std::clamp(u, -p.u_max, p.u_max);
    const double h = p.dt / p.substeps;
    Vec state = x;
    for (int i = 0; i < p.substeps; ++i) {
        Vec k1 = cartpole_ode(p, state, u);
        Vec k2 = cartpole_ode(p, state + 0.5 * h * k1, u);
        Vec k3 = cartpole_ode(p, state + 0.5 * h * k2, u);
        Vec k4 = cartpole_ode(p, state + h * k3, u);
        state += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    return state;
}

double cartpole_energy(const CartpoleParams& p, const Vec& x) {
    const double mc = p.cart_mass, mp = p.pole_mass, l = p.pole_length, g = p.gravity;
    const double c = std::cos(x[1]), xd = x[2], td = x[3];
    double kinetic = 0.5 * (mc + mp) * xd * xd - 0.5 * mp * l * c * td * xd +
                     (1.0 / 6.0) * mp * l * l * td * td;
    double potential = 0.5 * mp * g * l * c;
    return kinetic + potential;
}

Vec observe(const CartpoleParams& p, const Vec& x, Rng& rng) {
    return x + p.obs_noise_std().cwiseProduct(rng.normal_vec(4));
}

TrajectoryRecord execute_episode(const CartpoleParams& p, const PolicyParams& policy,
                                 const GPModel* model, ExecMode mode, std::uint64_t seed,
                                 const CostSpec& spec, const Mat& filter_noise) {
    Rng rng(seed);
    TrajectoryRecord rec;
    Vec x = p.init_mean() + p.init_std * rng.normal_vec(4);
    Belief belief{p.init_mean(), p.init_cov()};

    for (int t = 0; t <= spec.horizon; ++t) {
        TrajectoryStep step;
        step.t = t;
        step.x = x;
        step.z = observe(p, x, rng);
        if (mode == ExecMode::filtered && t > 0)
            belief = filter_update(belief, step.z, filter_noise);
        step.belief = belief;
        step.cost = state_cost(spec, x);
        if (t < spec.horizon) {
            const Vec& input = mode == ExecMode::filtered ? belief.m : step.z;
            step.u = policy_eval(policy, input);
            x = cartpole_step(p, x, step.u[0]);
            if (mode == ExecMode::filtered) belief = filter_predict(belief, step.u, *model);
            if (!x.allFinite()) {
                rec.steps.push_back(std::move(step));
                rec.aborted = true;
                rec.diagnostic = "non-finite state after step " + std::to_string(t);
                return rec;
            }
        }
        rec.steps.push_back(std::move(step));
    }
    return rec;
}

// ---------------------------------------------------------------------

void DatasetFile::append_episode(const TrajectoryRecord& rec, int episode_index) {
    for (std::size_t i = 0; i + 1 < rec.steps.size(); ++i) {
        const TrajectoryStep& s = rec.steps[i];
        DatasetRow row;
        row.episode = episode_index;
        row.t = s.t;
        row.x = s.z;  // the model sees observations, not latent states
        row.u = s.u[0];
        row.z = rec.steps[i + 1].z;
        rows.push_back(std::move(row));
    }
}

GPDataset DatasetFile::to_gp_dataset() const {
    GPDataset ds;
    const int n = static_cast<int>(rows.size());
    ds.inputs.resize(n, 5);
    ds.targets.resize(n, 4);
    for (int i = 0; i < n; ++i) {
        ds.inputs.row(i).head(4) = rows[static_cast<std::size_t>(i)].x.transpose();
        ds.inputs(i, 4) = rows[static_cast<std::size_t>(i)].u;
        ds.targets.row(i) = rows[static_cast<std::size_t>(i)].z.transpose();
    }
    return ds;
}

void DatasetFile::save(const std::string& path) const {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("dataset save: cannot open " + path);
    os << "episode t x1 x2 x3 x4 u z1 z2 z3 z4\n";
    char buf[32];
    for (const DatasetRow& r : rows) {
        os << r.episode << ' ' << r.t;
        auto put = [&](double v) {
            std::snprintf(buf, sizeof(buf), " %.17g", v);
            os << buf;
        };
        for (int k = 0; k < 4; ++k) put(r.x[k]);
        put(r.u);
        for (int k = 0; k < 4; ++k) put(r.z[k]);
        os << '\n';
    }
    if (!os) throw std::runtime_error("dataset save: write failed for " + path);
}

DatasetFile DatasetFile::load(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("dataset load: cannot open " + path);
    std::string header;
    std::getline(is, header);
    if (header != "episode t x1 x2 x3 x4 u z1 z2 z3 z4")
        throw std::runtime_error("dataset load: unexpected header in " + path);
    DatasetFile file;
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::istringstream ss(line);
        DatasetRow r;
        r.x.resize(4);
        r.z.resize(4);
        ss >> r.episode >> r.t;
        for (int k = 0; k < 4; ++k) ss >> r.x[k];
        ss >> r.u;
        for (int k = 0; k < 4; ++k) ss >> r.z[k];
        if (!ss) throw std::runtime_error("dataset load: parse error in " + path);
        file.rows.push_back(std::move(r));
    }
    return file;
}

}  // namespace fpilco
