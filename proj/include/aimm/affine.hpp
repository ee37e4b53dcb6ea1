#ifndef AIMM_AFFINE_HPP
#define AIMM_AFFINE_HPP

// Closed-form transforms of the one-dimensional affine processes used as
// model drivers, and of independent products of them.
//
// For a component X started at x the extended moment generating function is
//
//     E[exp(u X_t)] = exp(phi_t(u) + psi_t(u) x),
//
// and for a product of independent components phi adds up while psi acts
// componentwise.

#include <aimm/errors.hpp>

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace aimm {

using cplx = std::complex<double>;

inline constexpr double kInf = std::numeric_limits<double>::infinity();

enum class ProcessKind { Cir, CirJump, OuJump };

inline std::string_view to_string(ProcessKind k) {
    switch (k) {
    case ProcessKind::Cir: return "CIR";
    case ProcessKind::CirJump: return "CIRJump";
    case ProcessKind::OuJump: return "OUJump";
    }
    return "?";
}

inline ProcessKind process_kind_from_string(std::string_view s) {
    if (s == "CIR") return ProcessKind::Cir;
    if (s == "CIRJump") return ProcessKind::CirJump;
    if (s == "OUJump") return ProcessKind::OuJump;
    throw SchemaError("unknown process kind '" + std::string(s) + "'");
}

/// One driving process.
///
///   CIR     dX = -lambda (X - theta) dt + 2 eta sqrt(X) dW
///   CIRJump CIR plus compound Poisson jumps, Exp(alpha) sizes at rate lambda*beta
///   OUJump  dX = -lambda (X - theta) dt + sigma dW + dL, with upward Exp(alpha_plus)
///           jumps at rate lambda*beta_plus and downward Exp(alpha_minus) jumps at
///           rate lambda*beta_minus
///
/// Fields not used by a kind are ignored.
struct AffineComponent {
    ProcessKind kind = ProcessKind::Cir;
    double lambda = 0.0;
    double theta = 0.0;
    double eta = 0.0;
    double sigma = 0.0;
    double x0 = 0.0;
    double alpha = 1.0;
    double beta = 0.0;
    double alpha_plus = 1.0;
    double beta_plus = 0.0;
    double alpha_minus = 1.0;
    double beta_minus = 0.0;

    bool nonnegative() const noexcept { return kind != ProcessKind::OuJump; }

    /// Feller-type condition lambda*theta/2 > eta^2 (CIR kinds only).
    bool strictly_positive() const noexcept {
        return nonnegative() && lambda * theta / 2.0 > eta * eta;
    }

    bool operator==(const AffineComponent&) const = default;
};

inline AffineComponent cir(double lambda, double theta, double eta, double x0) {
    AffineComponent c;
    c.kind = ProcessKind::Cir;
    c.lambda = lambda;
    c.theta = theta;
    c.eta = eta;
    c.x0 = x0;
    return c;
}

inline AffineComponent cir_jump(double lambda, double theta, double eta, double x0, double alpha,
                                double beta) {
    AffineComponent c = cir(lambda, theta, eta, x0);
    c.kind = ProcessKind::CirJump;
    c.alpha = alpha;
    c.beta = beta;
    return c;
}

inline AffineComponent ou_jump(double lambda, double theta, double sigma, double x0,
                               double alpha_plus, double beta_plus, double alpha_minus,
                               double beta_minus) {
    AffineComponent c;
    c.kind = ProcessKind::OuJump;
    c.lambda = lambda;
    c.theta = theta;
    c.sigma = sigma;
    c.x0 = x0;
    c.alpha_plus = alpha_plus;
    c.beta_plus = beta_plus;
    c.alpha_minus = alpha_minus;
    c.beta_minus = beta_minus;
    return c;
}

/// Parameter names that apply to a kind, in canonical order.
inline std::vector<std::string> parameter_names(ProcessKind kind) {
    switch (kind) {
    case ProcessKind::Cir: return {"lambda", "theta", "eta", "x0"};
    case ProcessKind::CirJump: return {"lambda", "theta", "eta", "x0", "alpha", "beta"};
    case ProcessKind::OuJump:
        return {"lambda", "theta", "sigma", "x0", "alpha_plus", "beta_plus", "alpha_minus",
                "beta_minus"};
    }
    return {};
}

inline double& parameter(AffineComponent& c, std::string_view name) {
    if (name == "lambda") return c.lambda;
    if (name == "theta") return c.theta;
    if (name == "eta") return c.eta;
    if (name == "sigma") return c.sigma;
    if (name == "x0") return c.x0;
    if (name == "alpha") return c.alpha;
    if (name == "beta") return c.beta;
    if (name == "alpha_plus") return c.alpha_plus;
    if (name == "beta_plus") return c.beta_plus;
    if (name == "alpha_minus") return c.alpha_minus;
    if (name == "beta_minus") return c.beta_minus;
    throw SchemaError("unknown process parameter '" + std::string(name) + "'");
}

inline double parameter(const AffineComponent& c, std::string_view name) {
    return parameter(const_cast<AffineComponent&>(c), name);
}

/// Returns an empty string when the parameters are admissible, else a reason.
inline std::string check_parameters(const AffineComponent& c) {
    auto finite = [](double v) { return std::isfinite(v); };
    for (const auto& n : parameter_names(c.kind))
        if (!finite(parameter(c, n))) return n + " is not finite";
    if (!(c.lambda > 0)) return "lambda must be > 0";
    switch (c.kind) {
    case ProcessKind::CirJump:
        if (!(c.alpha > 0)) return "alpha must be > 0";
        if (!(c.beta >= 0)) return "beta must be >= 0";
        [[fallthrough]];
    case ProcessKind::Cir:
        if (!(c.theta >= 0)) return "theta must be >= 0";
        if (!(c.eta > 0)) return "eta must be > 0";
        if (!(c.x0 >= 0)) return "x0 must be >= 0";
        break;
    case ProcessKind::OuJump:
        if (!(c.sigma >= 0)) return "sigma must be >= 0";
        if (!(c.alpha_plus > 0) || !(c.alpha_minus > 0)) return "alpha_plus/alpha_minus must be > 0";
        if (!(c.beta_plus >= 0) || !(c.beta_minus >= 0)) return "beta_plus/beta_minus must be >= 0";
        break;
    }
    return {};
}

/// Open interval of admissible Re(u).
struct Interval {
    double lower = -kInf;
    double upper = kInf;

    bool contains(double x) const noexcept { return lower < x && x < upper; }

    /// Shrinks both finite ends towards 0 by `factor` (0 is interior).
    Interval shrunk(double factor) const noexcept {
        return {std::isfinite(lower) ? lower * factor : lower,
                std::isfinite(upper) ? upper * factor : upper};
    }
};

namespace detail {

// 1 - exp(-x) without cancellation.
inline double one_minus_exp(double x) { return -std::expm1(-x); }

// log(1+x)/x for complex x, continuous at 0.
inline cplx log1p_over_x(cplx x, cplx log_one_plus_x) {
    if (std::abs(x) < 1e-4) {
        return 1.0 - x / 2.0 + x * x / 3.0 - x * x * x / 4.0;
    }
    return log_one_plus_x / x;
}

} // namespace detail

/// Interval of Re(u) on which the closed forms for phi_t, psi_t hold.
inline Interval component_domain(const AffineComponent& c, double t) {
    switch (c.kind) {
    case ProcessKind::Cir:
    case ProcessKind::CirJump: {
        Interval iv;
        if (t > 0) {
            double q = detail::one_minus_exp(c.lambda * t);
            iv.upper = c.lambda / (2.0 * c.eta * c.eta * q);
        }
        if (c.kind == ProcessKind::CirJump) {
            double e = std::exp(-c.lambda * t);
            double g = e + (1.0 - e) * 2.0 * c.eta * c.eta * c.alpha / c.lambda;
            iv.upper = std::min({iv.upper, c.alpha / g, c.alpha});
        }
        return iv;
    }
    case ProcessKind::OuJump: return {-c.alpha_minus, c.alpha_plus};
    }
    return {};
}

struct Transform {
    cplx phi;
    cplx psi;
};

/// phi_t(u) and psi_t(u) of a single component. Throws DomainViolation when
/// Re(u) is outside the open domain at t.
inline Transform transform(const AffineComponent& c, double t, cplx u) {
    if (t == 0.0) return {0.0, u};
    if (u == cplx(0.0)) return {0.0, 0.0};

    Interval dom = component_domain(c, t);
    if (!dom.contains(u.real())) throw DomainViolation(-1, dom.lower, dom.upper, u.real());

    const double e = std::exp(-c.lambda * t);
    const double q = detail::one_minus_exp(c.lambda * t);

    switch (c.kind) {
    case ProcessKind::Cir:
    case ProcessKind::CirJump: {
        const double s2 = 2.0 * c.eta * c.eta;
        const cplx denom = 1.0 - (s2 / c.lambda) * q * u;
        cplx phi = -(c.lambda * c.theta / s2) * std::log(denom);
        const cplx psi = e * u / denom;
        if (c.kind == ProcessKind::CirJump && c.beta != 0.0) {
            // lambda*beta/(lambda - 2 eta^2 alpha) * log((alpha - u g)/(alpha - u)),
            // rewritten so the removable singularity at lambda = 2 eta^2 alpha is harmless.
            const double kappa = s2 * c.alpha / c.lambda;
            const double g = e + q * kappa;
            const cplx a_u = c.alpha - u;
            const cplx a_ug = c.alpha - u * g;
            const cplx x = u * q * (1.0 - kappa) / a_u;
            const cplx log_ratio = std::log(a_ug) - std::log(a_u);
            phi += c.beta * q * u / a_u * detail::log1p_over_x(x, log_ratio);
        }
        return {phi, psi};
    }
    case ProcessKind::OuJump: {
        const double q2 = detail::one_minus_exp(2.0 * c.lambda * t);
        cplx phi = c.sigma * c.sigma * u * u * q2 / (4.0 * c.lambda) + c.theta * u * q;
        if (c.beta_plus != 0.0)
            phi += c.beta_plus * (std::log(c.alpha_plus - e * u) - std::log(c.alpha_plus - u));
        if (c.beta_minus != 0.0)
            phi += c.beta_minus * (std::log(c.alpha_minus + e * u) - std::log(c.alpha_minus + u));
        return {phi, e * u};
    }
    }
    return {0.0, u};
}

inline cplx phi_component(const AffineComponent& c, double t, cplx u) {
    return transform(c, t, u).phi;
}

inline cplx psi_component(const AffineComponent& c, double t, cplx u) {
    return transform(c, t, u).psi;
}

/// Var[X_t] given X_0 = x0: second cumulant, from the Riccati equations
/// differentiated twice at u = 0.
inline double component_variance(const AffineComponent& c, double t, double x0) {
    if (t <= 0.0) return 0.0;
    const double l = c.lambda, e = std::exp(-l * t), q = detail::one_minus_exp(l * t);
    const double q2 = detail::one_minus_exp(2.0 * l * t);
    switch (c.kind) {
    case ProcessKind::Cir:
    case ProcessKind::CirJump: {
        const double s2 = 2.0 * c.eta * c.eta;
        double drift = l * c.theta, jump2 = 0.0;
        if (c.kind == ProcessKind::CirJump) {
            drift += l * c.beta / c.alpha;
            jump2 = 2.0 * l * c.beta / (c.alpha * c.alpha);
        }
        return x0 * 2.0 * s2 / l * e * q + drift * s2 * q * q / (l * l) + jump2 * q2 / (2.0 * l);
    }
    case ProcessKind::OuJump: {
        const double f2 = c.sigma * c.sigma + 2.0 * l * c.beta_plus / (c.alpha_plus * c.alpha_plus) +
                          2.0 * l * c.beta_minus / (c.alpha_minus * c.alpha_minus);
        return f2 * q2 / (2.0 * l);
    }
    }
    return 0.0;
}

/// Per-component admissible intervals at a horizon.
struct DomainBound {
    std::vector<Interval> intervals;

    bool contains(std::span<const cplx> u) const {
        for (std::size_t i = 0; i < intervals.size(); ++i)
            if (u[i] != cplx(0.0) && !intervals[i].contains(u[i].real())) return false;
        return true;
    }
};

/// Ordered list of independent components; nonnegative kinds first.
class ProductProcess {
public:
    ProductProcess() = default;

    ProductProcess(std::vector<AffineComponent> components, double horizon)
        : components_(std::move(components)), horizon_(horizon) {
        if (components_.empty()) throw ValidationError("product process needs at least one component");
        if (!(horizon_ > 0)) throw ValidationError("product process horizon must be > 0");
        bool seen_real = false;
        for (std::size_t i = 0; i < components_.size(); ++i) {
            std::string why = check_parameters(components_[i]);
            if (!why.empty())
                throw ValidationError("component " + std::to_string(i) + ": " + why);
            if (components_[i].nonnegative()) {
                if (seen_real)
                    throw ValidationError("component " + std::to_string(i) +
                                          ": nonnegative components must precede real-valued ones");
                ++m_;
            } else {
                seen_real = true;
            }
        }
        if (m_ == 0) throw ValidationError("product process needs at least one nonnegative component");
    }

    std::size_t dim() const noexcept { return components_.size(); }
    std::size_t m() const noexcept { return m_; }
    std::size_t n() const noexcept { return components_.size() - m_; }
    double horizon() const noexcept { return horizon_; }

    const AffineComponent& operator[](std::size_t i) const { return components_[i]; }
    AffineComponent& component(std::size_t i) { return components_[i]; }
    const std::vector<AffineComponent>& components() const noexcept { return components_; }

    std::vector<double> initial_state() const {
        std::vector<double> x(dim());
        for (std::size_t i = 0; i < dim(); ++i) x[i] = components_[i].x0;
        return x;
    }

    /// phi_t(u) = sum of componentwise phi; writes psi_t(u) into `psi_out`.
    /// `psi_out` may alias `u`.
    cplx apply(double t, std::span<const cplx> u, std::span<cplx> psi_out,
               const char* context = nullptr) const {
        cplx phi = 0.0;
        for (std::size_t i = 0; i < dim(); ++i) {
            if (u[i] == cplx(0.0)) {
                psi_out[i] = 0.0;
                continue;
            }
            try {
                Transform tr = transform(components_[i], t, u[i]);
                phi += tr.phi;
                psi_out[i] = tr.psi;
            } catch (const DomainViolation& dv) {
                throw dv.at_component(static_cast<int>(i), context ? context : "");
            }
        }
        return phi;
    }

    cplx phi(double t, std::span<const cplx> u) const {
        std::vector<cplx> tmp(dim());
        return apply(t, u, tmp);
    }

    std::vector<cplx> psi(double t, std::span<const cplx> u) const {
        std::vector<cplx> out(dim());
        apply(t, u, out);
        return out;
    }

    DomainBound domain_bound(double t) const {
        DomainBound b;
        b.intervals.reserve(dim());
        for (const auto& c : components_) b.intervals.push_back(component_domain(c, t));
        return b;
    }

    /// Independent sub-process on the given component indices (order kept).
    ProductProcess subset(std::span<const std::size_t> indices) const {
        std::vector<AffineComponent> sub;
        for (std::size_t i : indices) sub.push_back(components_.at(i));
        return ProductProcess(std::move(sub), horizon_);
    }

    bool operator==(const ProductProcess&) const = default;

private:
    std::vector<AffineComponent> components_;
    double horizon_ = 0.0;
    std::size_t m_ = 0;
};

inline cplx phi_product(const ProductProcess& p, double t, std::span<const cplx> u) {
    return p.phi(t, u);
}

inline std::vector<cplx> psi_product(const ProductProcess& p, double t, std::span<const cplx> u) {
    return p.psi(t, u);
}

/// Conservative componentwise bound: the tightest interval over s in [0, t].
/// For the shipped kinds the domain bounds shrink monotonically in t, so the
/// value at t itself is the minimum.
inline DomainBound domain_bound(const ProductProcess& p, double t) {
    return p.domain_bound(t);
}

inline std::vector<cplx> to_complex(std::span<const double> v) {
    return std::vector<cplx>(v.begin(), v.end());
}

} // namespace aimm

#endif // AIMM_AFFINE_HPP
