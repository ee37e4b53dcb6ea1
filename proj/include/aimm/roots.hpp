#ifndef AIMM_ROOTS_HPP
#define AIMM_ROOTS_HPP

// Scalar root finding for the term-structure fits: brackets grown
// geometrically from 0 inside an open domain, then bisection with secant
// (Illinois) refinement.

#include <aimm/errors.hpp>

#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace aimm {

using ScalarFn = std::function<double(double)>;

struct RootOptions {
    double tol = 1e-12;   // relative tolerance on the target value
    double xtol = 1e-15;  // relative tolerance on the bracket width
    int max_iter = 300;
};

struct RootResult {
    double x = 0.0;
    double residual = 0.0;  // f(x) - target
    int iterations = 0;
};

/// Solves f(x) = target on a bracket [a, b] with f(a) - target and
/// f(b) - target of opposite sign.
inline RootResult solve_bracketed(const ScalarFn& f, double target, double a, double b,
                                  const RootOptions& opt = {}) {
    double fa = f(a) - target, fb = f(b) - target;
    if (fa == 0.0) return {a, 0.0, 0};
    if (fb == 0.0) return {b, 0.0, 0};
    if ((fa > 0) == (fb > 0)) throw RootBracketError("root not bracketed");
    const double ftol = opt.tol * std::max(std::abs(target), 1e-300);
    int side = 0;
    RootResult best{std::abs(fa) < std::abs(fb) ? a : b, std::abs(fa) < std::abs(fb) ? fa : fb, 0};
    for (int it = 1; it <= opt.max_iter; ++it) {
        double x = (a * fb - b * fa) / (fb - fa);
        const double width = std::abs(b - a);
        // Fall back to bisection when the secant step lands near an end.
        if (!(std::min(a, b) + 0.01 * width < x && x < std::max(a, b) - 0.01 * width) || it % 8 == 0)
            x = 0.5 * (a + b);
        double fx = f(x) - target;
        if (std::abs(fx) < std::abs(best.residual)) best = {x, fx, it};
        best.iterations = it;
        if (std::abs(fx) <= ftol) return {x, fx, it};
        if ((fx > 0) == (fb > 0)) {
            b = x;
            fb = fx;
            if (side == 1) fa *= 0.5;
            side = 1;
        } else {
            a = x;
            fa = fx;
            if (side == -1) fb *= 0.5;
            side = -1;
        }
        if (std::abs(b - a) <= opt.xtol * std::max(1.0, std::abs(x))) return best;
    }
    return best;
}

/// Bracket for f(x) = target searched outward from 0 within (lower, upper),
/// assuming f is monotone. Steps double from `step`; near a finite domain end
/// the trial point approaches it geometrically.
inline std::optional<std::pair<double, double>> grow_bracket(const ScalarFn& f, double target,
                                                             double lower, double upper,
                                                             double step = 1e-3, int max_iter = 200) {
    const double f0 = f(0.0) - target;
    if (f0 == 0.0) return std::make_pair(0.0, 0.0);
    for (int dir : {+1, -1}) {
        const double end = dir > 0 ? upper : lower;
        double prev = 0.0, fprev = f0, h = step;
        for (int i = 0; i < max_iter; ++i) {
            double x = dir * h;
            if (std::isfinite(end) && std::abs(x) >= std::abs(end)) x = 0.5 * (prev + end);
            double fx;
            try {
                fx = f(x) - target;
            } catch (const Error&) {
                break;
            }
            if (!std::isfinite(fx)) break;
            if ((fx > 0) != (fprev > 0) || fx == 0.0) return std::make_pair(std::min(prev, x), std::max(prev, x));
            // Moving away from the target in this direction: try the other one.
            if (std::abs(fx) > std::abs(fprev) && i > 0) break;
            if (x == prev) break;
            prev = x;
            fprev = fx;
            h *= 2.0;
        }
    }
    return std::nullopt;
}

/// Root of a monotone f on the open interval (lower, upper) containing 0.
inline RootResult solve_monotone(const ScalarFn& f, double target, double lower, double upper,
                                 const RootOptions& opt = {}, const std::string& what = "root") {
    auto br = grow_bracket(f, target, lower, upper);
    if (!br) throw RootBracketError(what + ": target outside the attainable range");
    if (br->first == br->second) return {br->first, 0.0, 0};
    return solve_bracketed(f, target, br->first, br->second, opt);
}

/// Minimizer of a convex f on [a, b] by golden-section search.
inline double golden_minimize(const ScalarFn& f, double a, double b, double xtol = 1e-12) {
    const double g = (std::sqrt(5.0) - 1.0) / 2.0;
    double c = b - g * (b - a), d = a + g * (b - a);
    double fc = f(c), fd = f(d);
    while (std::abs(b - a) > xtol * std::max(1.0, std::abs(a) + std::abs(b))) {
        if (fc < fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    return 0.5 * (a + b);
}

/// Roots of f(x) = target for convex f on (lower, upper). Returns zero, one or
/// two roots in increasing order.
inline std::vector<double> solve_convex(const ScalarFn& f, double target, double lower, double upper,
                                        const RootOptions& opt = {}) {
    // Finite search window: the domain, or the region where f exceeds target.
    auto safe = [&](double x) {
        try {
            double v = f(x);
            return std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
        } catch (const Error&) {
            return std::numeric_limits<double>::infinity();
        }
    };
    auto edge = [&](int dir) {
        const double end = dir > 0 ? upper : lower;
        double x = 0.0, h = 1e-2;
        for (int i = 0; i < 200; ++i) {
            double nx = dir * h;
            if (std::isfinite(end) && std::abs(nx) >= std::abs(end)) nx = 0.5 * (x + end);
            if (nx == x) break;
            x = nx;
            if (safe(x) > target && safe(x) > safe(0.5 * x)) break;
            h *= 2.0;
        }
        return x;
    };
    const double lo = edge(-1), hi = edge(+1);
    const double xm = golden_minimize(safe, lo, hi);
    const double fm = safe(xm) - target;
    std::vector<double> roots;
    if (fm > 0) return roots;
    if (fm == 0) return {xm};
    if (safe(lo) - target > 0) roots.push_back(solve_bracketed(f, target, lo, xm, opt).x);
    if (safe(hi) - target > 0) roots.push_back(solve_bracketed(f, target, xm, hi, opt).x);
    return roots;
}

/// Sign changes of f - target on a uniform grid; each entry is a bracketing cell.
inline std::vector<std::pair<double, double>> grid_scan(const ScalarFn& f, double target, double a,
                                                        double b, int n) {
    std::vector<std::pair<double, double>> cells;
    double xp = a, fp = f(a) - target;
    for (int i = 1; i <= n; ++i) {
        double x = a + (b - a) * i / n, fx = f(x) - target;
        if ((fx > 0) != (fp > 0)) cells.emplace_back(xp, x);
        xp = x;
        fp = fx;
    }
    return cells;
}

} // namespace aimm

#endif // AIMM_ROOTS_HPP
