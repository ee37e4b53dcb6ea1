#ifndef AIMM_OPTIMIZE_HPP
#define AIMM_OPTIMIZE_HPP

// Nelder-Mead simplex search with projection onto a box.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <vector>

namespace aimm {

struct Box {
    std::vector<double> lower, upper;

    std::vector<double> project(std::vector<double> x) const {
        for (std::size_t i = 0; i < x.size(); ++i) x[i] = std::clamp(x[i], lower[i], upper[i]);
        return x;
    }
};

struct NelderMeadOptions {
    int max_evaluations = 2000;
    double ftol = 1e-16;       // absolute spread of simplex values
    double xtol = 1e-10;       // simplex diameter relative to the box
    double initial_step = 0.1; // fraction of the box width
};

struct OptimizeResult {
    std::vector<double> x;
    double value = std::numeric_limits<double>::infinity();
    int evaluations = 0;
    int iterations = 0;
    bool converged = false;
    /// Best value after each iteration; non-increasing by construction.
    std::vector<double> history;
};

using Objective = std::function<double(const std::vector<double>&)>;

inline OptimizeResult nelder_mead(const Objective& f, std::vector<double> x0, const Box& box,
                                  const NelderMeadOptions& opt = {}) {
    const std::size_t n = x0.size();
    OptimizeResult res;
    auto eval = [&](const std::vector<double>& x) {
        ++res.evaluations;
        double v = f(x);
        return std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
    };

    x0 = box.project(std::move(x0));
    std::vector<std::vector<double>> s(n + 1, x0);
    std::vector<double> fv(n + 1);
    for (std::size_t i = 0; i < n; ++i) {
        double w = box.upper[i] - box.lower[i];
        double h = opt.initial_step * (std::isfinite(w) ? w : std::max(1.0, std::abs(x0[i])));
        // Step inward when x0 sits on the upper bound.
        s[i + 1][i] = x0[i] + h <= box.upper[i] ? x0[i] + h : x0[i] - h;
        s[i + 1] = box.project(s[i + 1]);
    }
    for (std::size_t i = 0; i <= n; ++i) fv[i] = eval(s[i]);

    std::vector<std::size_t> idx(n + 1);
    auto order = [&] {
        std::iota(idx.begin(), idx.end(), 0);
        std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) { return fv[a] < fv[b]; });
    };
    auto diameter = [&] {
        double d = 0.0;
        for (std::size_t i = 1; i <= n; ++i)
            for (std::size_t j = 0; j < n; ++j) {
                double w = box.upper[j] - box.lower[j];
                double scale = std::isfinite(w) && w > 0 ? w : 1.0;
                d = std::max(d, std::abs(s[i][j] - s[0][j]) / scale);
            }
        return d;
    };

    order();
    while (res.evaluations < opt.max_evaluations) {
        const std::size_t best = idx[0], worst = idx[n], second = idx[n - 1];
        res.history.push_back(fv[best]);
        ++res.iterations;
        if (std::abs(fv[worst] - fv[best]) <= opt.ftol || diameter() <= opt.xtol) {
            res.converged = true;
            break;
        }
        std::vector<double> c(n, 0.0);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j <= n; ++j)
                if (j != worst) c[i] += s[j][i] / n;
        auto along = [&](double t) {
            std::vector<double> x(n);
            for (std::size_t i = 0; i < n; ++i) x[i] = c[i] + t * (s[worst][i] - c[i]);
            return box.project(std::move(x));
        };
        auto xr = along(-1.0);
        double fr = eval(xr);
        if (fr < fv[best]) {
            auto xe = along(-2.0);
            double fe = eval(xe);
            if (fe < fr) {
                s[worst] = xe;
                fv[worst] = fe;
            } else {
                s[worst] = xr;
                fv[worst] = fr;
            }
        } else if (fr < fv[second]) {
            s[worst] = xr;
            fv[worst] = fr;
        } else {
            auto xc = fr < fv[worst] ? along(-0.5) : along(0.5);
            double fc = eval(xc);
            if (fc < std::min(fr, fv[worst])) {
                s[worst] = xc;
                fv[worst] = fc;
            } else {
                for (std::size_t j = 0; j <= n; ++j) {
                    if (j == best) continue;
                    for (std::size_t i = 0; i < n; ++i) s[j][i] = s[best][i] + 0.5 * (s[j][i] - s[best][i]);
                    s[j] = box.project(s[j]);
                    fv[j] = eval(s[j]);
                }
            }
        }
        order();
    }
    res.x = s[idx[0]];
    res.value = fv[idx[0]];
    if (res.history.empty() || res.history.back() != res.value) res.history.push_back(res.value);
    return res;
}

} // namespace aimm

#endif // AIMM_OPTIMIZE_HPP
