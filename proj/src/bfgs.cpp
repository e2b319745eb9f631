#include "fpilco/bfgs.hpp"

#include <cmath>
#include <limits>

namespace fpilco {

BfgsResult bfgs_minimize(const Objective& f, Vec x0, const BfgsOptions& opts) {
    const int n = static_cast<int>(x0.size());
    BfgsResult res;
    res.x = std::move(x0);

    Vec g(n);
    res.fx = f(res.x, &g);
    res.evals = 1;
    if (!std::isfinite(res.fx) || !g.allFinite()) {
        res.note = "objective not finite at start";
        return res;
    }

    Mat h = Mat::Identity(n, n);  // inverse Hessian approximation
    double step0 = 1.0 / std::max(1.0, g.lpNorm<Eigen::Infinity>());

    while (res.evals < opts.max_evals) {
        if (g.lpNorm<Eigen::Infinity>() <= opts.grad_tol * std::max(1.0, std::abs(res.fx))) {
            res.converged = true;
            res.note = "gradient tolerance";
            return res;
        }

        Vec d = -(h * g);
        double slope = g.dot(d);
        if (!(slope < 0.0)) {  // lost descent direction, restart from steepest
            h.setIdentity();
            d = -g;
            slope = g.dot(d);
        }

        // backtracking Armijo search; the first probe carries the gradient
        // since a unit BFGS step is usually accepted
        double t = step0;
        step0 = 1.0;
        double f_new = std::numeric_limits<double>::infinity();
        Vec x_new, g_new(n);
        bool accepted = false, have_grad = false;
        for (int ls = 0; ls < opts.max_ls_steps && res.evals < opts.max_evals; ++ls) {
            x_new = res.x + t * d;
            bool with_grad = (ls == 0);
            f_new = f(x_new, with_grad ? &g_new : nullptr);
            ++res.evals;
            if (std::isfinite(f_new) && f_new <= res.fx + opts.armijo_c1 * t * slope) {
                accepted = true;
                have_grad = with_grad && g_new.allFinite();
                break;
            }
            t *= 0.5;
        }
        if (!accepted) {
            res.converged = true;
            res.note = "line search exhausted";
            return res;
        }

        if (!have_grad) {
            if (res.evals >= opts.max_evals) {
                res.x = x_new;
                res.fx = f_new;
                res.note = "evaluation budget";
                return res;
            }
            f_new = f(x_new, &g_new);
            ++res.evals;
            if (!std::isfinite(f_new) || !g_new.allFinite()) {
                res.note = "gradient not finite";
                return res;
            }
        }

        Vec s = x_new - res.x;
        Vec y = g_new - g;
        double improvement = res.fx - f_new;
        res.x = x_new;
        res.fx = f_new;
        g = g_new;

        double sy = s.dot(y);
        if (sy > 1e-10 * s.norm() * y.norm()) {
            double rho = 1.0 / sy;
            Mat left = Mat::Identity(n, n) - rho * s * y.transpose();
            h = left * h * left.transpose() + rho * s * s.transpose();
        }

        if (improvement >= 0.0 && improvement <= opts.f_rel_tol * std::max(1.0, std::abs(res.fx))) {
            res.converged = true;
            res.note = "function tolerance";
            return res;
        }
    }
    res.note = "evaluation budget";
    return res;
}

}  // namespace fpilco
