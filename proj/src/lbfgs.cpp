#include "recap/lbfgs.hpp"

#include <cmath>
#include <deque>
#include <stdexcept>

namespace recap::evalsuite {

namespace {

double vdot(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0;
    for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double max_abs(const std::vector<double>& v) {
    double m = 0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

struct LinePoint {
    double alpha, phi, dphi;
};

}  // namespace

LbfgsResult lbfgs_minimize(const ObjectiveFn& fg, std::vector<double> x0,
                           const LbfgsOptions& opts) {
    const size_t n = x0.size();
    std::vector<double> x = std::move(x0), g(n), g_new(n), d(n), x_new(n);
    double fx = fg(x, g);

    std::deque<std::vector<double>> s_hist, y_hist;
    std::deque<double> rho_hist;

    LbfgsResult res;
    for (size_t iter = 0; iter < opts.max_iters; ++iter) {
        if (max_abs(g) <= opts.gtol) {
            res.converged = true;
            res.iterations = iter;
            break;
        }

        // two-loop recursion
        d = g;
        std::vector<double> alpha_hist(s_hist.size());
        for (size_t k = s_hist.size(); k > 0; --k) {
            const size_t i = k - 1;
            alpha_hist[i] = rho_hist[i] * vdot(s_hist[i], d);
            for (size_t j = 0; j < n; ++j) d[j] -= alpha_hist[i] * y_hist[i][j];
        }
        double gamma = 1.0;
        if (!s_hist.empty()) {
            const double yy = vdot(y_hist.back(), y_hist.back());
            if (yy > 0) gamma = vdot(s_hist.back(), y_hist.back()) / yy;
        }
        for (double& v : d) v *= gamma;
        for (size_t k = 0; k < s_hist.size(); ++k) {
            const double beta = rho_hist[k] * vdot(y_hist[k], d);
            for (size_t j = 0; j < n; ++j) d[j] += (alpha_hist[k] - beta) * s_hist[k][j];
        }
        for (double& v : d) v = -v;

        double dphi0 = vdot(g, d);
        if (dphi0 >= 0) {  // fall back to steepest descent
            for (size_t j = 0; j < n; ++j) d[j] = -g[j];
            dphi0 = vdot(g, d);
            s_hist.clear();
            y_hist.clear();
            rho_hist.clear();
        }

        // strong Wolfe line search
        const double phi0 = fx;
        auto eval = [&](double alpha) -> LinePoint {
            for (size_t j = 0; j < n; ++j) x_new[j] = x[j] + alpha * d[j];
            const double phi = fg(x_new, g_new);
            return {alpha, phi, vdot(g_new, d)};
        };

        auto zoom = [&](LinePoint lo, LinePoint hi) -> LinePoint {
            LinePoint pt = lo;
            for (int zi = 0; zi < 50; ++zi) {
                const double alpha = 0.5 * (lo.alpha + hi.alpha);
                pt = eval(alpha);
                if (pt.phi > phi0 + opts.c1 * alpha * dphi0 || pt.phi >= lo.phi) {
                    hi = pt;
                } else {
                    if (std::abs(pt.dphi) <= -opts.c2 * dphi0) return pt;
                    if (pt.dphi * (hi.alpha - lo.alpha) >= 0) hi = lo;
                    lo = pt;
                }
                if (std::abs(hi.alpha - lo.alpha) < 1e-16) break;
            }
            return pt;
        };

        LinePoint prev{0.0, phi0, dphi0};
        LinePoint accepted{0.0, phi0, dphi0};
        double alpha = 1.0;
        bool found = false;
        for (int li = 0; li < 50; ++li) {
            LinePoint cur = eval(alpha);
            if (cur.phi > phi0 + opts.c1 * alpha * dphi0 || (li > 0 && cur.phi >= prev.phi)) {
                accepted = zoom(prev, cur);
                found = true;
                break;
            }
            if (std::abs(cur.dphi) <= -opts.c2 * dphi0) {
                accepted = cur;
                found = true;
                break;
            }
            if (cur.dphi >= 0) {
                accepted = zoom(cur, prev);
                found = true;
                break;
            }
            prev = cur;
            alpha *= 2.0;
        }
        if (!found || accepted.alpha == 0.0) {
            res.iterations = iter;
            break;  // line search failed; give up at the current point
        }

        // commit the accepted point (x_new/g_new hold its state)
        for (size_t j = 0; j < n; ++j) x_new[j] = x[j] + accepted.alpha * d[j];
        double f_acc = fg(x_new, g_new);

        std::vector<double> s(n), y(n);
        for (size_t j = 0; j < n; ++j) {
            s[j] = x_new[j] - x[j];
            y[j] = g_new[j] - g[j];
        }
        const double sy = vdot(s, y);
        if (sy > 1e-12) {
            s_hist.push_back(std::move(s));
            y_hist.push_back(std::move(y));
            rho_hist.push_back(1.0 / sy);
            if (s_hist.size() > opts.memory) {
                s_hist.pop_front();
                y_hist.pop_front();
                rho_hist.pop_front();
            }
        }
        x = x_new;
        g = g_new;
        fx = f_acc;
        res.iterations = iter + 1;
    }

    if (!res.converged && max_abs(g) <= opts.gtol) res.converged = true;
    res.x = std::move(x);
    res.fx = fx;
    return res;
}

}  // namespace recap::evalsuite
