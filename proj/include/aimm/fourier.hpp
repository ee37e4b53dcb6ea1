#ifndef AIMM_FOURIER_HPP
#define AIMM_FOURIER_HPP

// One-dimensional Fourier inversion of call payoffs on e^Y,
//
//     E[(e^Y - K)_+] = (K/pi) Int_0^inf Re( M(iu+R) K^{-(iu+R)} / ((iu+R)(iu+R-1)) ) du,
//
// for R > 1 with M(R) finite, and the CPI, inflation and interest-rate
// options built on it. Puts and floorlets follow from parity.

#include <aimm/errors.hpp>
#include <aimm/market_model.hpp>
#include <aimm/quadrature.hpp>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <span>
#include <string>
#include <vector>

namespace aimm {

struct ContourSpec {
    /// Damping R; NaN selects the midpoint of the admissible range.
    double damping = std::numeric_limits<double>::quiet_NaN();
    /// Used as the right end of the range when the transform exists for all R > 1.
    double damping_cap = 4.0;
    /// Fraction of the admissible range kept as margin from its boundary.
    double margin = 0.999;
    int nodes = 16;
    double rel_tol = 1e-10;
    double abs_tol = 1e-14;
    /// Target for the truncated tail, bounded through the integrand envelope.
    double tail_tol = 1e-11;
    double max_upper = 1e7;
    std::size_t max_evaluations = 4'000'000;
    /// Error estimates above this raise QuadratureError.
    double fail_tol = 1e-7;
    /// Puts from call-put parity; when false they are integrated directly with damping below 0.
    bool parity_puts = true;
};

struct QuadratureInfo {
    double damping = 0.0;
    double upper = 0.0;
    std::size_t evaluations = 0;
    double error_estimate = 0.0;
};

struct StripResult {
    std::vector<double> values;
    QuadratureInfo info;
};

using MgfFunction = std::function<cplx(cplx)>;

/// Range (1, R_max) of real damping values at which `admissible` holds, with
/// R_max = +inf when no failure is found below 1 + 2^12.
inline double damping_upper_limit(const std::function<bool(double)>& admissible) {
    double ok = 1.0, bad = kInf;
    for (double step = 0.25; step <= 4096.0; step *= 2.0) {
        if (admissible(1.0 + step)) {
            ok = 1.0 + step;
        } else {
            bad = 1.0 + step;
            break;
        }
    }
    if (!std::isfinite(bad)) return kInf;
    for (int i = 0; i < 60 && bad - ok > 1e-10 * bad; ++i) {
        double mid = 0.5 * (ok + bad);
        (admissible(mid) ? ok : bad) = mid;
    }
    return ok;
}

/// Default damping: midpoint of (1, min(R_max, cap)) after applying the margin.
inline double default_damping(const std::function<bool(double)>& admissible, const ContourSpec& spec) {
    double rmax = damping_upper_limit(admissible);
    if (rmax <= 1.0 + 1e-12) throw ContourError("no admissible damping parameter R > 1");
    double hi = std::isfinite(rmax) ? 1.0 + spec.margin * (rmax - 1.0) : kInf;
    hi = std::min(hi, spec.damping_cap);
    return 0.5 * (1.0 + hi);
}

namespace detail {

class CallStripIntegrator {
public:
    CallStripIntegrator(const MgfFunction& mgf, std::span<const double> strikes, double R,
                        const ContourSpec& spec)
        : mgf_(mgf), R_(R), spec_(spec), rule_(gauss_legendre(spec.nodes)) {
        for (double K : strikes) {
            if (!(K > 0)) throw ValidationError("Fourier call requires strictly positive strikes");
            logK_.push_back(std::log(K));
            // K/pi * K^{-R}
            scale_.push_back(std::exp((1.0 - R) * std::log(K)) / std::numbers::pi);
        }
        env_scale_ = *std::max_element(scale_.begin(), scale_.end());
    }

    StripResult run() {
        const std::size_t n = logK_.size();
        std::vector<double> total(n, 0.0);
        double err = 0.0;
        double a = 0.0, width = initial_width();
        int tail_ok = 0;
        std::vector<double> whole(n);
        while (true) {
            double b = a + width;
            panel(a, b, whole);
            adapt(a, b, whole, 0, total, err);
            a = b;
            double tail = envelope(a) * a;
            tail_ok = tail <= spec_.tail_tol ? tail_ok + 1 : 0;
            if (tail_ok >= 2) {
                err += tail;
                break;
            }
            if (a >= spec_.max_upper || evaluations_ >= spec_.max_evaluations) {
                err += tail;
                break;
            }
            width *= 2.0;
        }
        StripResult out;
        out.values = std::move(total);
        out.info = {R_, a, evaluations_, err};
        return out;
    }

private:
    double initial_width() {
        // Scale of the characteristic function from the curvature of log M at R.
        double h = 1e-3;
        try {
            double lp = std::log(std::abs(mgf_(cplx(R_ + h, 0.0))));
            double l0 = std::log(std::abs(mgf_(cplx(R_, 0.0))));
            double lm = std::log(std::abs(mgf_(cplx(R_ - h, 0.0))));
            double var = (lp - 2.0 * l0 + lm) / (h * h);
            if (std::isfinite(var) && var > 0) return std::clamp(2.0 / std::sqrt(var), 0.05, 1e4);
        } catch (const DomainViolation&) {
        }
        return 10.0;
    }

    double envelope(double u) {
        cplx z(R_, u);
        cplx m = mgf_(z);
        ++evaluations_;
        return env_scale_ * std::abs(m) / std::abs(z * (z - 1.0));
    }

    void panel(double a, double b, std::vector<double>& out) {
        std::fill(out.begin(), out.end(), 0.0);
        const double half = 0.5 * (b - a), mid = 0.5 * (a + b);
        for (std::size_t q = 0; q < rule_.nodes.size(); ++q) {
            const double u = mid + half * rule_.nodes[q];
            const cplx z(R_, u);
            const cplx base = mgf_(z) / (z * (z - 1.0));
            const double w = rule_.weights[q] * half;
            for (std::size_t j = 0; j < logK_.size(); ++j) {
                const double ph = -u * logK_[j];
                out[j] += w * scale_[j] * (base.real() * std::cos(ph) - base.imag() * std::sin(ph));
            }
        }
        evaluations_ += rule_.nodes.size();
    }

    void adapt(double a, double b, const std::vector<double>& whole, int depth,
               std::vector<double>& total, double& err) {
        const std::size_t n = logK_.size();
        const double m = 0.5 * (a + b);
        std::vector<double> left(n), right(n);
        panel(a, m, left);
        panel(m, b, right);
        double worst = 0.0;
        bool ok = true;
        for (std::size_t j = 0; j < n; ++j) {
            double fine = left[j] + right[j];
            double diff = std::abs(fine - whole[j]);
            worst = std::max(worst, diff);
            if (diff > std::max(spec_.abs_tol, spec_.rel_tol * std::abs(fine))) ok = false;
        }
        if (ok || depth >= 40 || evaluations_ >= spec_.max_evaluations) {
            for (std::size_t j = 0; j < n; ++j) total[j] += left[j] + right[j];
            err += ok ? worst / 1024.0 : worst;
            return;
        }
        adapt(a, m, left, depth + 1, total, err);
        adapt(m, b, right, depth + 1, total, err);
    }

    const MgfFunction& mgf_;
    double R_;
    const ContourSpec& spec_;
    const GaussLegendre& rule_;
    std::vector<double> logK_, scale_;
    double env_scale_ = 0.0;
    std::size_t evaluations_ = 0;
};

} // namespace detail

namespace detail {

inline StripResult damped_strip(const MgfFunction& mgf, std::span<const double> strikes, double damping,
                                const ContourSpec& spec) {
    try {
        (void)mgf(cplx(damping, 0.0));
    } catch (const DomainViolation& dv) {
        throw ContourError(std::string("transform undefined at the damping parameter: ") + dv.what());
    }
    StripResult r = detail::CallStripIntegrator(mgf, strikes, damping, spec).run();
    for (double& v : r.values) v = std::max(v, 0.0);
    if (!(r.info.error_estimate <= spec.fail_tol))
        throw QuadratureError("Fourier integral error estimate " + std::to_string(r.info.error_estimate) +
                                  " above tolerance",
                              r.info.error_estimate);
    return r;
}

} // namespace detail

/// Undiscounted E[(e^Y - K)_+] for each strike, given the MGF of Y and a
/// damping value R > 1 at which it is finite.
inline StripResult fourier_call_strip(const MgfFunction& mgf, std::span<const double> strikes,
                                      double damping, const ContourSpec& spec = {}) {
    if (!(damping > 1.0)) throw ContourError("call damping parameter must exceed 1");
    return detail::damped_strip(mgf, strikes, damping, spec);
}

/// Undiscounted E[(K - e^Y)_+]; the same integral with damping R < 0.
inline StripResult fourier_put_strip(const MgfFunction& mgf, std::span<const double> strikes,
                                     double damping, const ContourSpec& spec = {}) {
    if (!(damping < 0.0)) throw ContourError("put damping parameter must be negative");
    return detail::damped_strip(mgf, strikes, damping, spec);
}

/// Damping for puts: the call rule applied to the reflection R -> 1 - R.
inline double default_put_damping(const std::function<bool(double)>& admissible, const ContourSpec& spec) {
    return 1.0 - default_damping([&](double x) { return admissible(1.0 - x); }, spec);
}

inline double fourier_call(const MgfFunction& mgf, double strike, const ContourSpec& spec) {
    double R = spec.damping;
    if (std::isnan(R)) {
        R = default_damping(
            [&](double z) {
                try {
                    return std::isfinite(std::abs(mgf(cplx(z, 0.0))));
                } catch (const DomainViolation&) {
                    return false;
                }
            },
            spec);
    }
    double K[1] = {strike};
    return fourier_call_strip(mgf, K, R, spec).values[0];
}

// ---------------------------------------------------------------------------
// Black formulas

namespace detail {
inline double norm_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }
} // namespace detail

/// discount * E[(F e^{...} - K)_+] under a lognormal forward with volatility sigma.
inline double black_price(double forward, double strike, double expiry, double sigma, double discount,
                          bool call = true) {
    const double intrinsic = call ? std::max(forward - strike, 0.0) : std::max(strike - forward, 0.0);
    const double sd = sigma * std::sqrt(std::max(expiry, 0.0));
    if (sd <= 0.0) return discount * intrinsic;
    const double d1 = (std::log(forward / strike) + 0.5 * sd * sd) / sd, d2 = d1 - sd;
    if (call) return discount * (forward * detail::norm_cdf(d1) - strike * detail::norm_cdf(d2));
    return discount * (strike * detail::norm_cdf(-d2) - forward * detail::norm_cdf(-d1));
}

/// Black volatility reproducing `price`, by bisection to 1e-10.
inline double implied_vol_black(double forward, double strike, double expiry, double price,
                                double discount, bool call = true) {
    if (!(forward > 0) || !(strike > 0) || !(expiry > 0) || !(discount > 0))
        throw NoSolution("implied vol needs positive forward, strike, expiry and discount");
    const double intrinsic =
        discount * (call ? std::max(forward - strike, 0.0) : std::max(strike - forward, 0.0));
    const double upper = discount * (call ? forward : strike);
    const double tol = 1e-12 * std::max(upper, 1e-300);
    if (std::abs(price - intrinsic) <= tol) return 0.0;
    if (!(price > intrinsic) || !(price < upper))
        throw NoSolution("price " + std::to_string(price) + " outside the no-arbitrage band [" +
                         std::to_string(intrinsic) + ", " + std::to_string(upper) + ")");
    double lo = 0.0, hi = 1.0;
    while (black_price(forward, strike, expiry, hi, discount, call) < price) {
        lo = hi;
        hi *= 2.0;
        if (hi > 1e4) throw NoSolution("implied vol above 1e4");
    }
    while (hi - lo > 1e-12) {
        double mid = 0.5 * (lo + hi);
        (black_price(forward, strike, expiry, mid, discount, call) < price ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

/// Lognormal volatility of (shift + rate): used for inflation quotes that admit negative strikes.
inline double implied_vol_shifted_black(double forward, double strike, double expiry, double price,
                                        double discount, double shift = 1.0, bool call = true) {
    return implied_vol_black(forward + shift, strike + shift, expiry, price, discount, call);
}

// ---------------------------------------------------------------------------
// Instruments

enum class OptionKind { CpiCall, CpiPut, InflCaplet, InflFloorlet, IrCaplet, IrFloorlet };

inline std::string_view to_string(OptionKind k) {
    switch (k) {
    case OptionKind::CpiCall: return "CPI_CALL";
    case OptionKind::CpiPut: return "CPI_PUT";
    case OptionKind::InflCaplet: return "INFL_CAPLET";
    case OptionKind::InflFloorlet: return "INFL_FLOORLET";
    case OptionKind::IrCaplet: return "IR_CAPLET";
    case OptionKind::IrFloorlet: return "IR_FLOORLET";
    }
    return "?";
}

inline OptionKind option_kind_from_string(std::string_view s) {
    for (OptionKind k : {OptionKind::CpiCall, OptionKind::CpiPut, OptionKind::InflCaplet,
                         OptionKind::InflFloorlet, OptionKind::IrCaplet, OptionKind::IrFloorlet})
        if (to_string(k) == s) return k;
    throw SchemaError("unknown option kind '" + std::string(s) + "'");
}

inline bool is_call(OptionKind k) {
    return k == OptionKind::CpiCall || k == OptionKind::InflCaplet || k == OptionKind::IrCaplet;
}

/// An option on the model's index or rates. `k` is the payment date index;
/// `j` the inflation lag in tenor periods (2 = annual). Strikes are CPI levels
/// for CPI options and decimal rates otherwise.
struct OptionQuote {
    OptionKind kind = OptionKind::CpiCall;
    int k = 2;
    int j = 2;
    double strike = 0.0;
    double price = 0.0;
};

/// Setup shared by a strip of strikes on one underlying: the transform, the
/// payoff scaling and the parity forward.
struct UnderlyingSetup {
    LogAffineTransform transform;
    double discount;   // P(t, T_k)
    double accrual;    // payoff multiplier turning rate strikes into e^Y strikes
    double forward;    // E^{Q^{T_k}}[e^Y]
    double expiry;     // fixing time minus t
    bool rate_strike;  // strikes are rates K, mapped to 1 + accrual K

    double effective_strike(double K) const { return rate_strike ? 1.0 + accrual * K : K; }
};

inline UnderlyingSetup underlying(const ModelConfig& cfg, OptionKind kind, int k, int j,
                                  const StateVector& s) {
    const double P = bond_price(cfg, k, s);
    switch (kind) {
    case OptionKind::CpiCall:
    case OptionKind::CpiPut:
        return {log_cpi_transform(cfg, k, s), P, 1.0, forward_cpi(cfg, k, s), cfg.date(k) - s.t, false};
    case OptionKind::InflCaplet:
    case OptionKind::InflFloorlet: {
        const double acc = cfg.date(k) - cfg.date(k - j);
        return {yoy_transform(cfg, k, j, s), P, acc, 1.0 + acc * forward_inflation(cfg, k, j, s),
                cfg.date(k) - s.t, true};
    }
    case OptionKind::IrCaplet:
    case OptionKind::IrFloorlet: {
        const double acc = cfg.date(k) - cfg.date(k - 1);
        return {forward_rate_transform(cfg, k, s), P, acc, 1.0 + acc * forward_rate(cfg, k, s),
                cfg.date(k - 1) - s.t, true};
    }
    }
    throw ValidationError("unknown option kind");
}

struct PricedStrip {
    std::vector<double> prices;
    QuadratureInfo info;
};

/// Prices of calls (caplets) or puts (floorlets) of one kind over a strip of
/// strikes sharing k and j. Puts come from parity with the Fourier calls.
inline PricedStrip price_strip(const ModelConfig& cfg, OptionKind kind, int k, int j,
                               std::span<const double> strikes, const StateVector& s,
                               const ContourSpec& spec = {}) {
    UnderlyingSetup u = underlying(cfg, kind, k, j, s);
    std::vector<double> eff;
    for (double K : strikes) {
        double e = u.effective_strike(K);
        if (!(e > 0)) throw ValidationError("effective strike 1 + accrual*K must be positive");
        eff.push_back(e);
    }
    MgfFunction mgf = [&u](cplx z) { return u.transform(z); };
    auto admissible = [&u](double z) { return u.transform.admissible(z); };
    const bool direct_put = !is_call(kind) && !spec.parity_puts;
    double R = spec.damping;
    if (std::isnan(R))
        R = direct_put ? default_put_damping(admissible, spec) : default_damping(admissible, spec);
    else if (!u.transform.admissible(R))
        throw ContourError("damping parameter outside the admissible range");
    StripResult r = direct_put ? fourier_put_strip(mgf, eff, R, spec) : fourier_call_strip(mgf, eff, R, spec);
    PricedStrip out;
    out.info = r.info;
    for (std::size_t i = 0; i < eff.size(); ++i) {
        double v = u.discount * r.values[i];
        // Parity puts can come out a few ulps below zero deep out of the money.
        out.prices.push_back(is_call(kind) || direct_put ? v : std::max(v - u.discount * (u.forward - eff[i]), 0.0));
    }
    return out;
}

inline double price_option(const ModelConfig& cfg, OptionKind kind, int k, int j, double strike,
                           const StateVector& s, const ContourSpec& spec = {}) {
    double K[1] = {strike};
    return price_strip(cfg, kind, k, j, K, s, spec).prices[0];
}

/// P(t,T_k) E^{Q^{T_k}}[(I(T_k) - K)_+ | F_t].
inline double cpi_call(const ModelConfig& cfg, int k, double K, const StateVector& s,
                       const ContourSpec& spec = {}) {
    return price_option(cfg, OptionKind::CpiCall, k, 0, K, s, spec);
}

inline double cpi_put(const ModelConfig& cfg, int k, double K, const StateVector& s,
                      const ContourSpec& spec = {}) {
    return price_option(cfg, OptionKind::CpiPut, k, 0, K, s, spec);
}

/// P(t,T_k) E^{Q^{T_k}}[(T_k - T_{k-j}) (F_I(T_k, T_{k-j}, T_k) - K)_+ | F_t].
inline double inflation_caplet(const ModelConfig& cfg, int k, int j, double K, const StateVector& s,
                               const ContourSpec& spec = {}) {
    return price_option(cfg, OptionKind::InflCaplet, k, j, K, s, spec);
}

inline double inflation_floorlet(const ModelConfig& cfg, int k, int j, double K,
                                 const StateVector& s, const ContourSpec& spec = {}) {
    return price_option(cfg, OptionKind::InflFloorlet, k, j, K, s, spec);
}

/// P(t,T_k) E^{Q^{T_k}}[Δ_k (F^k(T_{k-1}) - K)_+ | F_t].
inline double ir_caplet(const ModelConfig& cfg, int k, double K, const StateVector& s,
                        const ContourSpec& spec = {}) {
    return price_option(cfg, OptionKind::IrCaplet, k, 1, K, s, spec);
}

inline double ir_floorlet(const ModelConfig& cfg, int k, double K, const StateVector& s,
                          const ContourSpec& spec = {}) {
    return price_option(cfg, OptionKind::IrFloorlet, k, 1, K, s, spec);
}

} // namespace aimm

#endif // AIMM_FOURIER_HPP
