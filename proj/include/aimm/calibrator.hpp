#ifndef AIMM_CALIBRATOR_HPP
#define AIMM_CALIBRATOR_HPP

// Two-stage calibration of the structured model.
//
// Nominal: utilde from the half-variance rule, then years M..1 backwards:
// X^l fitted to caplet vols on F^{2l} while ubar_{2l-1}, ubar_{2l} keep the
// discount curve matched exactly.
// Inflation: vtilde = utilde (1 + c k), then years 1..M forwards: X^{M+l}
// fitted to annual inflation option prices while vbar_{2l-1}, vbar_{2l} keep
// the ILB curve matched exactly.

#include <aimm/affine.hpp>
#include <aimm/errors.hpp>
#include <aimm/fourier.hpp>
#include <aimm/market_data.hpp>
#include <aimm/market_model.hpp>
#include <aimm/optimize.hpp>
#include <aimm/roots.hpp>

#include <cmath>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace aimm {

enum class TwoRootPolicy { SmallestAbs, Negative, Positive };
enum class ObjectiveKind { ImpliedVolMse, PriceMse };

inline std::string_view to_string(TwoRootPolicy p) {
    switch (p) {
    case TwoRootPolicy::SmallestAbs: return "SMALLEST_ABS";
    case TwoRootPolicy::Negative: return "NEGATIVE";
    case TwoRootPolicy::Positive: return "POSITIVE";
    }
    return "?";
}

inline TwoRootPolicy two_root_policy_from_string(std::string_view s) {
    for (auto p : {TwoRootPolicy::SmallestAbs, TwoRootPolicy::Negative, TwoRootPolicy::Positive})
        if (to_string(p) == s) return p;
    throw SchemaError("unknown two-root policy '" + std::string(s) + "'");
}

inline std::string_view to_string(ObjectiveKind k) {
    return k == ObjectiveKind::ImpliedVolMse ? "IMPLIED_VOL_MSE" : "PRICE_MSE";
}

inline ObjectiveKind objective_kind_from_string(std::string_view s) {
    if (s == "IMPLIED_VOL_MSE") return ObjectiveKind::ImpliedVolMse;
    if (s == "PRICE_MSE") return ObjectiveKind::PriceMse;
    throw SchemaError("unknown objective kind '" + std::string(s) + "'");
}

/// Free parameters of one component kind with their box.
struct ParameterSet {
    std::vector<std::string> names;
    std::vector<double> lower, upper;
};

struct CalibrationSettings {
    /// Common factor X^0, fixed.
    AffineComponent common = cir(0.026, 0.65, 0.5, 3.45);
    /// Starting point for every nominal X^l; parameters outside `nominal_free` stay fixed.
    AffineComponent nominal_initial = cir_jump(0.5, 1.0, 0.3, 1.0, 5.0, 0.5);
    /// The eta upper bound keeps lambda*theta/2 > eta^2 for the default lambda, theta.
    ParameterSet nominal_free{{"eta", "x0", "beta", "alpha"}, {0.02, 0.01, 0.0, 1.0}, {0.49, 5.0, 5.0, 50.0}};
    AffineComponent inflation_initial = ou_jump(0.15, 1.0, 0.03, 0.0, 10.0, 0.2, 10.0, 0.2);
    ParameterSet inflation_free{{"theta", "sigma", "beta_plus", "beta_minus"},
                                {-3.0, 0.002, 0.0, 0.0},
                                {3.0, 0.3, 3.0, 3.0}};
    ObjectiveKind nominal_objective = ObjectiveKind::ImpliedVolMse;
    ObjectiveKind inflation_objective = ObjectiveKind::PriceMse;
    /// utilde from E[exp(2 utilde_k X^0_T)] = P(0,T_k)/P(0,T); otherwise constant `utilde_constant`.
    bool half_variance_utilde = true;
    double utilde_constant = 0.0;
    double tilt_c = 0.08;
    TwoRootPolicy two_root = TwoRootPolicy::SmallestAbs;
    RootOptions roots{};
    NelderMeadOptions optimizer{600, 1e-22, 1e-10, 0.1};
    /// Starting points per year: the initial guess plus seeded draws from the box.
    int starts = 4;
    std::uint64_t seed = 20110929;
    /// Skip further starts once a year's objective is below this.
    double good_enough = 1e-18;
    ContourSpec contour{};

    bool operator==(const CalibrationSettings&) const = default;
};

struct RootDiagnostic {
    std::string sequence;  // "utilde", "ubar", "vbar"
    int k = 0;
    double value = 0.0;
    double residual = 0.0;  // relative mismatch of the fitted pillar
    int iterations = 0;
    int roots_found = 1;
    std::string note;
};

struct StageResult {
    std::string stage;  // "nominal" or "inflation"
    int year = 0;
    int component = 0;
    std::vector<std::string> names;
    std::vector<double> values;
    double objective = 0.0;
    int evaluations = 0;
    bool converged = false;
    bool rank_deficient = false;
    int quotes = 0;
    std::vector<double> history;
    std::string message;
};

struct InstrumentResidual {
    std::string instrument;  // DISCOUNT, ZCIIS, IR_CAPLET_VOL, INFL_CAPLET, INFL_FLOORLET
    double maturity = 0.0;
    double strike = 0.0;
    double market = 0.0;
    double model = 0.0;
    std::string unit;

    double error() const { return model - market; }
};

struct CalibrationReport {
    ModelConfig config;
    bool inflation_calibrated = false;
    std::vector<StageResult> stages;
    std::vector<RootDiagnostic> roots;
    std::vector<InstrumentResidual> residuals;
    std::vector<std::string> log;
    std::string failed_stage;

    double max_relative_curve_error() const {
        double m = 0.0;
        for (const auto& r : residuals)
            if (r.instrument == "DISCOUNT") m = std::max(m, std::abs(r.error()) / r.market);
        return m;
    }
    double max_zciis_error() const {
        double m = 0.0;
        for (const auto& r : residuals)
            if (r.instrument == "ZCIIS") m = std::max(m, std::abs(r.error()));
        return m;
    }
};

// ---------------------------------------------------------------------------
// Term-structure fits

namespace detail {

/// exp(phi_T(w) + psi_T(w) x0) for one component.
inline double component_mgf(const AffineComponent& c, double T, double w) {
    Transform tr = transform(c, T, w);
    return std::exp(tr.phi.real() + tr.psi.real() * c.x0);
}

} // namespace detail

/// utilde_k solving E[exp(2 utilde_k X^0_T)] = ratios[k-1], ratios[k-1] = P(0,T_k)/P(0,T).
inline std::vector<double> fit_utilde(const AffineComponent& common, double T,
                                      std::span<const double> ratios, const RootOptions& opt = {},
                                      std::vector<RootDiagnostic>* diag = nullptr) {
    std::vector<double> out;
    const Interval dom = component_domain(common, T);
    for (std::size_t i = 0; i < ratios.size(); ++i) {
        const double target = ratios[i];
        if (!(target > 0)) throw RootBracketError("utilde: ratio must be positive", static_cast<int>(i + 1));
        auto f = [&](double u) { return detail::component_mgf(common, T, 2.0 * u); };
        RootResult r;
        try {
            r = solve_monotone(f, target, 0.5 * dom.lower, 0.5 * dom.upper, opt,
                               "utilde_" + std::to_string(i + 1));
        } catch (const RootBracketError& e) {
            throw RootBracketError(e.what(), static_cast<int>(i + 1));
        }
        out.push_back(r.x);
        if (diag) diag->push_back({"utilde", static_cast<int>(i + 1), r.x, r.residual / target, r.iterations, 1, {}});
    }
    return out;
}

/// ubar_k for k in [k_lo, k_hi], iterating downwards, so that
/// M_0^{u_k} = ratios[k-1]. Entries of `ubar` above k_hi are used as given.
inline void fit_ubar_range(const ProductProcess& p, const TenorStructure& tenor,
                           std::span<const double> utilde, std::span<const double> ratios,
                           std::vector<double>& ubar, int k_lo, int k_hi, const RootOptions& opt = {},
                           std::vector<RootDiagnostic>* diag = nullptr) {
    const double T = tenor.horizon();
    const int M = tenor.years();
    ubar.resize(tenor.N, 0.0);
    for (int k = k_hi; k >= k_lo; --k) {
        const int c = detail::ceil_half(k);
        double rest = detail::component_mgf(p[0], T, utilde[k - 1]);
        for (int l = c + 1; l <= M; ++l) rest *= detail::component_mgf(p[l], T, ubar[2 * l - 2]);
        const double target = ratios[k - 1] / rest;
        const Interval dom = component_domain(p[c], T);
        auto f = [&](double u) { return detail::component_mgf(p[c], T, u); };
        RootResult r;
        try {
            r = solve_monotone(f, target, dom.lower, dom.upper, opt, "ubar_" + std::to_string(k));
        } catch (const RootBracketError& e) {
            throw RootBracketError(std::string(e.what()) + " (k=" + std::to_string(k) + ")", k);
        }
        if (r.x < 0)
            throw RootBracketError("ubar_" + std::to_string(k) + " is negative: discount ratio below the "
                                   "common-factor part (negative forward rate)", k);
        if (k % 2 == 1 && k < tenor.N && r.x < ubar[k]) {
            throw RootBracketError("ubar_" + std::to_string(k) + " below ubar_" + std::to_string(k + 1) +
                                   " (negative forward rate)", k);
        }
        ubar[k - 1] = r.x;
        if (diag) diag->push_back({"ubar", k, r.x, r.residual / target, r.iterations, 1, {}});
    }
}

inline std::vector<double> fit_ubar(const ProductProcess& p, const TenorStructure& tenor,
                                    std::span<const double> utilde, std::span<const double> ratios,
                                    const RootOptions& opt = {}, std::vector<RootDiagnostic>* diag = nullptr) {
    std::vector<double> ubar(tenor.N, 0.0);
    fit_ubar_range(p, tenor, utilde, ratios, ubar, 1, tenor.N, opt, diag);
    return ubar;
}

/// vtilde_k = utilde_k (1 + c k).
inline std::vector<double> fit_vtilde(std::span<const double> utilde, double c) {
    std::vector<double> out;
    for (std::size_t i = 0; i < utilde.size(); ++i) out.push_back(utilde[i] * (1.0 + c * (i + 1)));
    return out;
}

/// Root of f(x) = target for the individual inflation loading of one
/// component; convex f may give two roots, chosen by `policy`.
inline RootResult solve_individual_loading(const AffineComponent& c, double T, double target,
                                           TwoRootPolicy policy, const RootOptions& opt, int* roots_found,
                                           const std::string& what) {
    const Interval dom = component_domain(c, T);
    auto f = [&](double u) { return detail::component_mgf(c, T, u); };
    if (c.nonnegative()) {
        if (roots_found) *roots_found = 1;
        return solve_monotone(f, target, dom.lower, dom.upper, opt, what);
    }
    std::vector<double> roots = solve_convex(f, target, dom.lower, dom.upper, opt);
    if (roots_found) *roots_found = static_cast<int>(roots.size());
    if (roots.empty()) throw RootBracketError(what + ": target below the minimum of the convex map");
    double x = roots.front();
    if (roots.size() == 2) {
        switch (policy) {
        case TwoRootPolicy::SmallestAbs: x = std::abs(roots[0]) <= std::abs(roots[1]) ? roots[0] : roots[1]; break;
        case TwoRootPolicy::Negative: x = roots[0]; break;
        case TwoRootPolicy::Positive: x = roots[1]; break;
        }
    }
    return {x, f(x) - target, 0};
}

/// vbar_k for k in [k_lo, k_hi] so that M_0^{v_k} = ilb_ratios[k-1] given the
/// nominal part of u_k and vtilde_k.
inline void fit_vbar_range(const ProductProcess& p, const TenorStructure& tenor,
                           const ParameterGenerators& gen, std::span<const double> ilb_ratios,
                           std::vector<double>& vbar, int k_lo, int k_hi, TwoRootPolicy policy,
                           const RootOptions& opt = {}, std::vector<RootDiagnostic>* diag = nullptr) {
    const double T = tenor.horizon();
    const int M = tenor.years();
    vbar.resize(tenor.N, 0.0);
    for (int k = k_lo; k <= k_hi; ++k) {
        const int c = detail::ceil_half(k);
        double rest = detail::component_mgf(p[0], T, gen.vtilde[k - 1]);
        rest *= detail::component_mgf(p[c], T, gen.ubar[k - 1]);
        for (int l = c + 1; l <= M; ++l) rest *= detail::component_mgf(p[l], T, gen.ubar[2 * l - 2]);
        const double target = ilb_ratios[k - 1] / rest;
        int found = 0;
        RootResult r;
        const std::string what = "vbar_" + std::to_string(k);
        try {
            r = solve_individual_loading(p[M + c], T, target, policy, opt, &found, what);
        } catch (const RootBracketError& e) {
            throw RootBracketError(e.what(), k);
        }
        vbar[k - 1] = r.x;
        if (diag) {
            RootDiagnostic d{"vbar", k, r.x, r.residual / target, r.iterations, found, {}};
            if (found == 2) d.note = "two roots, policy " + std::string(to_string(policy));
            diag->push_back(d);
        }
    }
}

inline std::vector<double> fit_vbar(const ProductProcess& p, const TenorStructure& tenor,
                                    const ParameterGenerators& gen, std::span<const double> ilb_ratios,
                                    TwoRootPolicy policy = TwoRootPolicy::SmallestAbs,
                                    const RootOptions& opt = {}, std::vector<RootDiagnostic>* diag = nullptr) {
    std::vector<double> vbar(tenor.N, 0.0);
    fit_vbar_range(p, tenor, gen, ilb_ratios, vbar, 1, tenor.N, policy, opt, diag);
    return vbar;
}

/// P(0,T_k)/P(0,T) for k = 1..N.
inline std::vector<double> discount_ratios(const MarketSnapshot& s) {
    const int N = s.tenor().N;
    std::vector<double> r;
    for (int k = 1; k <= N; ++k) r.push_back(s.df(k) / s.df(N));
    return r;
}

inline std::vector<double> ilb_ratios(const MarketSnapshot& s) {
    std::vector<double> r;
    for (const auto& p : ilb_curve(s)) r.push_back(p.ratio);
    return r;
}

// ---------------------------------------------------------------------------
// Per-year option fits

namespace detail {

inline AffineComponent with_values(AffineComponent c, const ParameterSet& ps, const std::vector<double>& x) {
    for (std::size_t i = 0; i < ps.names.size(); ++i) parameter(c, ps.names[i]) = x[i];
    return c;
}

inline std::vector<double> values_of(const AffineComponent& c, const ParameterSet& ps) {
    std::vector<double> x;
    for (const auto& n : ps.names) x.push_back(parameter(c, n));
    return x;
}

/// Seeded multi-start search: the given starts first, then draws from the
/// box, then a polish from the best point.
inline OptimizeResult multi_start(const Objective& f, std::vector<std::vector<double>> starts,
                                  const ParameterSet& ps, const CalibrationSettings& st, std::uint64_t stream) {
    Box box{ps.lower, ps.upper};
    std::mt19937_64 rng(st.seed ^ (0x9E3779B97F4A7C15ULL * (stream + 1)));
    std::uniform_real_distribution<double> U(0.0, 1.0);
    while (static_cast<int>(starts.size()) < std::max(1, st.starts)) {
        std::vector<double> x(ps.names.size());
        for (std::size_t i = 0; i < x.size(); ++i) x[i] = ps.lower[i] + (0.1 + 0.8 * U(rng)) * (ps.upper[i] - ps.lower[i]);
        starts.push_back(std::move(x));
    }
    OptimizeResult best;
    int evals = 0;
    std::vector<double> history;
    auto record = [&](const OptimizeResult& r) {
        evals += r.evaluations;
        for (double h : r.history) history.push_back(history.empty() ? h : std::min(history.back(), h));
        if (r.value < best.value || best.x.empty()) best = r;
    };
    for (const auto& x0 : starts) {
        record(nelder_mead(f, x0, box, st.optimizer));
        if (best.value <= st.good_enough) break;
    }
    // Polish: restarts around the best point with a smaller simplex.
    NelderMeadOptions polish = st.optimizer;
    polish.initial_step = 0.01;
    for (int i = 0; i < 2 && best.value > st.good_enough; ++i) {
        double before = best.value;
        record(nelder_mead(f, best.x, box, polish));
        if (!(best.value < 0.5 * before)) break;
    }
    best.evaluations = evals;
    best.history = std::move(history);
    return best;
}

} // namespace detail

/// Working state shared by the per-year fits.
struct CalibrationState {
    TenorStructure tenor;
    std::vector<AffineComponent> components;  // X^0 | nominal | inflation
    ParameterGenerators gen;
    std::vector<double> ratios;      // P(0,T_k)/P(0,T)
    std::vector<double> ilb;         // P_ILB(0,T_k)/P(0,T)
    double P0T = 1.0;

    ModelConfig config() const {
        return ModelConfig::from_generators(ProductProcess(components, tenor.horizon()), tenor, gen, P0T);
    }
};

/// Caplet vols for F^{2l} from the snapshot.
inline std::vector<CapletVolQuote> caplet_quotes_for_year(const MarketSnapshot& s, int l) {
    const double expiry = s.tenor().date(2 * l - 1);
    std::vector<CapletVolQuote> out;
    for (const auto& q : s.caplet_vols)
        if (std::abs(q.expiry - expiry) < 1e-9) out.push_back(q);
    return out;
}

inline std::vector<InflationOptionQuote> inflation_quotes_for_year(const MarketSnapshot& s, int l) {
    std::vector<InflationOptionQuote> out;
    for (const auto& q : s.infl_options)
        if (std::abs(q.maturity - l) < 1e-9) out.push_back(q);
    return out;
}

/// Model Black vols of the caplets on F^{2l} at the given strikes.
inline std::vector<double> model_caplet_vols(const ModelConfig& cfg, int l, std::span<const double> strikes,
                                             const ContourSpec& contour) {
    const int k = 2 * l;
    const StateVector s0 = cfg.initial_state();
    PricedStrip ps = price_strip(cfg, OptionKind::IrCaplet, k, 1, strikes, s0, contour);
    const double F = forward_rate(cfg, k, s0), P = bond_price(cfg, k, s0);
    const double acc = cfg.date(k) - cfg.date(k - 1), expiry = cfg.date(k - 1);
    std::vector<double> vols;
    for (std::size_t i = 0; i < strikes.size(); ++i)
        vols.push_back(implied_vol_black(F, strikes[i], expiry, ps.prices[i], P * acc, true));
    return vols;
}

/// Model prices (bp) of annual inflation caplets/floorlets maturing at year l.
inline std::vector<double> model_inflation_prices_bp(const ModelConfig& cfg, int l,
                                                     std::span<const InflationOptionQuote> quotes,
                                                     const ContourSpec& contour) {
    const int k = 2 * l, j = 2;
    const StateVector s0 = cfg.initial_state();
    std::vector<double> strikes;
    for (const auto& q : quotes) strikes.push_back(q.strike);
    PricedStrip calls = price_strip(cfg, OptionKind::InflCaplet, k, j, strikes, s0, contour);
    const double P = bond_price(cfg, k, s0), acc = cfg.date(k) - cfg.date(k - j);
    const double F = forward_inflation(cfg, k, j, s0);
    std::vector<double> out;
    for (std::size_t i = 0; i < quotes.size(); ++i) {
        double price = quotes[i].caplet ? calls.prices[i]
                                      : std::max(calls.prices[i] - P * acc * (F - quotes[i].strike), 0.0);
        out.push_back(1e4 * price);
    }
    return out;
}

/// Fits X^l to the caplets on F^{2l}; ubar_{2l-1}, ubar_{2l} are refitted at
/// every evaluation. Updates `state` with the result.
inline StageResult calibrate_nominal_year(CalibrationState& state, int l, std::span<const CapletVolQuote> quotes,
                                          const CalibrationSettings& st,
                                          const std::vector<double>& warm_start = {}) {
    StageResult res;
    res.stage = "nominal";
    res.year = l;
    res.component = l;
    res.names = st.nominal_free.names;
    res.quotes = static_cast<int>(quotes.size());
    res.rank_deficient = quotes.size() < st.nominal_free.names.size();
    const auto& ps = st.nominal_free;
    std::vector<double> strikes, market;
    for (const auto& q : quotes) {
        strikes.push_back(q.strike);
        market.push_back(q.vol);
    }
    const double T = state.tenor.horizon();
    int ordering_rejections = 0;

    auto refit = [&](CalibrationState& s) {
        fit_ubar_range(ProductProcess(s.components, T), s.tenor, s.gen.utilde, s.ratios, s.gen.ubar,
                       2 * l - 1, 2 * l, st.roots);
    };

    Objective f = [&](const std::vector<double>& x) -> double {
        CalibrationState trial = state;
        trial.components[l] = detail::with_values(state.components[l], ps, x);
        if (!check_parameters(trial.components[l]).empty()) return kInf;
        try {
            refit(trial);
        } catch (const Error&) {
            return kInf;
        }
        // Componentwise decrease of u_k (no negative forward rates).
        if (trial.gen.ubar[2 * l - 2] < trial.gen.ubar[2 * l - 1]) {
            ++ordering_rejections;
            return kInf;
        }
        if (quotes.empty()) return 0.0;
        try {
            ModelConfig cfg = trial.config();
            if (st.nominal_objective == ObjectiveKind::ImpliedVolMse) {
                auto vols = model_caplet_vols(cfg, l, strikes, st.contour);
                double mse = 0.0;
                for (std::size_t i = 0; i < vols.size(); ++i) mse += (vols[i] - market[i]) * (vols[i] - market[i]);
                return mse / vols.size();
            }
            const StateVector s0 = cfg.initial_state();
            PricedStrip pr = price_strip(cfg, OptionKind::IrCaplet, 2 * l, 1, strikes, s0, st.contour);
            const double F = forward_rate(cfg, 2 * l, s0), P = bond_price(cfg, 2 * l, s0);
            const double acc = cfg.date(2 * l) - cfg.date(2 * l - 1), expiry = cfg.date(2 * l - 1);
            double mse = 0.0;
            for (std::size_t i = 0; i < strikes.size(); ++i) {
                double mkt = black_price(F, strikes[i], expiry, market[i], P * acc);
                mse += 1e8 * (pr.prices[i] - mkt) * (pr.prices[i] - mkt);
            }
            return mse / strikes.size();
        } catch (const Error&) {
            return kInf;
        }
    };

    std::vector<std::vector<double>> starts{detail::values_of(state.components[l], ps)};
    if (!warm_start.empty()) starts.insert(starts.begin(), warm_start);
    OptimizeResult best = detail::multi_start(f, starts, ps, st, static_cast<std::uint64_t>(l));
    res.values = best.x;
    res.objective = best.value;
    res.evaluations = best.evaluations;
    res.converged = best.converged;
    res.history = best.history;
    if (!std::isfinite(best.value)) {
        res.message = "no admissible parameter set found";
        throw OptimizerFailure("nominal year " + std::to_string(l) + ": " + res.message);
    }
    state.components[l] = detail::with_values(state.components[l], ps, best.x);
    refit(state);
    if (ordering_rejections > 0)
        res.message = std::to_string(ordering_rejections) + " candidates rejected for increasing u_k";
    return res;
}

/// Fits X^{M+l} to annual inflation options maturing at year l; vbar_{2l-1},
/// vbar_{2l} are refitted at every evaluation.
inline StageResult calibrate_inflation_year(CalibrationState& state, int l,
                                            std::span<const InflationOptionQuote> quotes,
                                            const CalibrationSettings& st,
                                            const std::vector<double>& warm_start = {}) {
    const int M = state.tenor.years();
    const int comp = M + l;
    StageResult res;
    res.stage = "inflation";
    res.year = l;
    res.component = comp;
    res.names = st.inflation_free.names;
    res.quotes = static_cast<int>(quotes.size());
    res.rank_deficient = quotes.size() < st.inflation_free.names.size();
    const auto& ps = st.inflation_free;
    const double T = state.tenor.horizon();

    auto refit = [&](CalibrationState& s) {
        fit_vbar_range(ProductProcess(s.components, T), s.tenor, s.gen, s.ilb, s.gen.vbar, 2 * l - 1, 2 * l,
                       st.two_root, st.roots);
    };
    std::vector<double> market;
    for (const auto& q : quotes) market.push_back(q.price_bp);

    Objective f = [&](const std::vector<double>& x) -> double {
        CalibrationState trial = state;
        trial.components[comp] = detail::with_values(state.components[comp], ps, x);
        if (!check_parameters(trial.components[comp]).empty()) return kInf;
        try {
            refit(trial);
            if (quotes.empty()) return 0.0;
            ModelConfig cfg = trial.config();
            auto bp = model_inflation_prices_bp(cfg, l, quotes, st.contour);
            double mse = 0.0;
            for (std::size_t i = 0; i < bp.size(); ++i) {
                double e = bp[i] - market[i];
                if (st.inflation_objective == ObjectiveKind::ImpliedVolMse) {
                    // Relative price error as a vega-free proxy.
                    e /= std::max(market[i], 1e-2);
                }
                mse += e * e;
            }
            return mse / bp.size();
        } catch (const Error&) {
            return kInf;
        }
    };

    std::vector<std::vector<double>> starts{detail::values_of(state.components[comp], ps)};
    if (!warm_start.empty()) starts.insert(starts.begin(), warm_start);
    OptimizeResult best = detail::multi_start(f, starts, ps, st, static_cast<std::uint64_t>(1000 + l));
    res.values = best.x;
    res.objective = best.value;
    res.evaluations = best.evaluations;
    res.converged = best.converged;
    res.history = best.history;
    if (!std::isfinite(best.value)) {
        res.message = "no admissible parameter set found";
        throw OptimizerFailure("inflation year " + std::to_string(l) + ": " + res.message);
    }
    state.components[comp] = detail::with_values(state.components[comp], ps, best.x);
    refit(state);
    return res;
}

// ---------------------------------------------------------------------------
// Residuals and orchestration

inline void append_residuals(CalibrationReport& rep, const MarketSnapshot& snap, const ContourSpec& contour) {
    const ModelConfig& cfg = rep.config;
    const StateVector s0 = cfg.initial_state();
    for (int k = 1; k <= cfg.N(); ++k)
        rep.residuals.push_back({"DISCOUNT", cfg.date(k), 0.0, snap.df(k), bond_price(cfg, k, s0), "df"});
    for (int l = 1; l <= cfg.M(); ++l) {
        auto q = caplet_quotes_for_year(snap, l);
        if (q.empty()) continue;
        std::vector<double> strikes;
        for (const auto& x : q) strikes.push_back(x.strike);
        std::vector<double> vols;
        try {
            vols = model_caplet_vols(cfg, l, strikes, contour);
        } catch (const Error& e) {
            rep.log.push_back("caplet vols year " + std::to_string(l) + ": " + e.what());
            vols.assign(q.size(), std::nan(""));
        }
        for (std::size_t i = 0; i < q.size(); ++i)
            rep.residuals.push_back({"IR_CAPLET_VOL", q[i].expiry, q[i].strike, q[i].vol, vols[i], "vol"});
    }
    if (!rep.inflation_calibrated) return;
    for (const auto& z : snap.zciis)
        rep.residuals.push_back({"ZCIIS", double(z.years), 0.0, z.rate, zciis_rate(cfg, z.years), "rate"});
    for (int l = 1; l <= cfg.M(); ++l) {
        auto q = inflation_quotes_for_year(snap, l);
        if (q.empty()) continue;
        std::vector<double> bp;
        try {
            bp = model_inflation_prices_bp(cfg, l, q, contour);
        } catch (const Error& e) {
            rep.log.push_back("inflation prices year " + std::to_string(l) + ": " + e.what());
            bp.assign(q.size(), std::nan(""));
        }
        for (std::size_t i = 0; i < q.size(); ++i)
            rep.residuals.push_back({q[i].caplet ? "INFL_CAPLET" : "INFL_FLOORLET", q[i].maturity, q[i].strike,
                                     q[i].price_bp, bp[i], "bp"});
    }
}

/// Thrown by `calibrate` when a stage fails; carries the partial report.
class CalibrationStageError : public Error {
public:
    CalibrationStageError(const std::string& stage, const std::string& what, CalibrationReport partial)
        : Error(stage + ": " + what), stage_(stage), partial_(std::move(partial)) {}
    const std::string& stage() const noexcept { return stage_; }
    const CalibrationReport& partial() const noexcept { return partial_; }

private:
    std::string stage_;
    CalibrationReport partial_;
};

/// Full calibration of a snapshot. Inflation stages are skipped for nominal-only snapshots.
inline CalibrationReport calibrate(const MarketSnapshot& snap, const CalibrationSettings& st) {
    validate_snapshot(snap);
    CalibrationReport rep;
    CalibrationState state;
    state.tenor = snap.tenor();
    const int N = state.tenor.N, M = state.tenor.years();
    const double T = state.tenor.horizon();
    const bool inflation = !snap.nominal_only();
    state.ratios = discount_ratios(snap);
    state.P0T = snap.df(N);
    state.components.push_back(st.common);
    for (int l = 1; l <= M; ++l) state.components.push_back(st.nominal_initial);
    if (inflation)
        for (int l = 1; l <= M; ++l) state.components.push_back(st.inflation_initial);

    std::string stage = "utilde";
    auto fail = [&](const std::string& what) {
        rep.failed_stage = stage;
        rep.log.push_back("stage " + stage + " failed: " + what);
        try {
            rep.config = state.config();
        } catch (const Error&) {
        }
        throw CalibrationStageError(stage, what, rep);
    };

    try {
        if (st.half_variance_utilde) {
            state.gen.utilde = fit_utilde(st.common, T, state.ratios, st.roots, &rep.roots);
        } else {
            state.gen.utilde.assign(N, st.utilde_constant);
        }
        state.gen.ubar.assign(N, 0.0);
        state.gen.vtilde.assign(N, 0.0);
        state.gen.vbar.assign(N, 0.0);

        // Previous year's fit is the first starting point of the next one.
        std::vector<std::vector<double>> stage_values;
        for (int l = M; l >= 1; --l) {
            stage = "nominal year " + std::to_string(l);
            auto q = caplet_quotes_for_year(snap, l);
            std::vector<double> warm = l < M ? stage_values.back() : std::vector<double>{};
            StageResult r = calibrate_nominal_year(state, l, q, st, warm);
            stage_values.push_back(r.values);
            rep.log.push_back(stage + ": objective " + detail::format_double(r.objective) + " after " +
                              std::to_string(r.evaluations) + " evaluations");
            if (r.rank_deficient) rep.log.push_back(stage + ": fewer quotes than free parameters");
            rep.stages.push_back(std::move(r));
        }
        stage = "ubar";
        state.gen.ubar = fit_ubar(ProductProcess(state.components, T), state.tenor, state.gen.utilde,
                                  state.ratios, st.roots, &rep.roots);

        if (inflation) {
            stage = "vtilde";
            state.ilb = ilb_ratios(snap);
            state.gen.vtilde = fit_vtilde(state.gen.utilde, st.tilt_c);
            stage_values.clear();
            for (int l = 1; l <= M; ++l) {
                stage = "inflation year " + std::to_string(l);
                auto q = inflation_quotes_for_year(snap, l);
                std::vector<double> warm = l > 1 ? stage_values.back() : std::vector<double>{};
                StageResult r = calibrate_inflation_year(state, l, q, st, warm);
                stage_values.push_back(r.values);
                rep.log.push_back(stage + ": objective " + detail::format_double(r.objective) + " after " +
                                  std::to_string(r.evaluations) + " evaluations");
                if (r.rank_deficient) rep.log.push_back(stage + ": fewer quotes than free parameters");
                rep.stages.push_back(std::move(r));
            }
            stage = "vbar";
            state.gen.vbar = fit_vbar(ProductProcess(state.components, T), state.tenor, state.gen,
                                      state.ilb, st.two_root, st.roots, &rep.roots);
            for (const auto& d : rep.roots)
                if (d.roots_found == 2) rep.log.push_back("vbar_" + std::to_string(d.k) + ": " + d.note);
        } else {
            rep.log.push_back("nominal-only snapshot: inflation stages skipped");
        }
        stage = "validate";
        if (inflation) {
            rep.config = state.config();
        } else {
            std::vector<AffineComponent> nominal(state.components.begin(), state.components.begin() + 1 + M);
            rep.config = ModelConfig::from_generators(ProductProcess(nominal, T), state.tenor, state.gen, state.P0T);
        }
        rep.config.validate();
    } catch (const CalibrationStageError&) {
        throw;
    } catch (const Error& e) {
        fail(e.what());
    }
    rep.inflation_calibrated = inflation;
    append_residuals(rep, snap, st.contour);
    return rep;
}

} // namespace aimm

#endif // AIMM_CALIBRATOR_HPP
