#ifndef AIMM_VALIDATE_HPP
#define AIMM_VALIDATE_HPP

// Invariant checks and Monte Carlo cross-checks of a model config. Each check
// yields PASS, FAIL or INCONCLUSIVE (MC checks with too few paths).

#include <aimm/fourier.hpp>
#include <aimm/market_model.hpp>
#include <aimm/mc.hpp>

#include <iomanip>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace aimm {

enum class CheckStatus { Pass, Fail, Inconclusive };

inline std::string_view to_string(CheckStatus s) {
    switch (s) {
    case CheckStatus::Pass: return "PASS";
    case CheckStatus::Fail: return "FAIL";
    case CheckStatus::Inconclusive: return "INCONCLUSIVE";
    }
    return "?";
}

struct CheckResult {
    std::string name;
    CheckStatus status = CheckStatus::Pass;
    double measured = 0.0;
    double tolerance = 0.0;
    std::string detail;
};

struct ValidationOptions {
    SimulationPlan plan{100'000, 64, 1, 8192, false};
    /// Below this many paths MC checks are reported as inconclusive.
    std::size_t min_paths = 10'000;
    double sigma_band = 3.0;
    ContourSpec contour{};
};

struct ValidationReport {
    std::vector<CheckResult> checks;

    bool passed() const {
        for (const auto& c : checks)
            if (c.status == CheckStatus::Fail) return false;
        return true;
    }
};

namespace detail {

inline std::string short_double(double x) {
    std::ostringstream os;
    os << std::setprecision(6) << x;
    return os.str();
}

inline CheckResult bounded(std::string name, double measured, double tol, std::string detail = {}) {
    return {std::move(name), measured <= tol ? CheckStatus::Pass : CheckStatus::Fail, measured, tol, std::move(detail)};
}

template <class F>
void guarded(ValidationReport& rep, const std::string& name, F&& f) {
    try {
        f();
    } catch (const std::exception& e) {
        rep.checks.push_back({name, CheckStatus::Fail, std::nan(""), 0.0, e.what()});
    }
}

} // namespace detail

inline ValidationReport validate_model(const ModelConfig& cfg, const ValidationOptions& opt = {}) {
    ValidationReport rep;
    const StateVector s0 = cfg.initial_state();
    const int N = cfg.N();

    // Structural invariants: domain, ordering (nonnegative forwards), layout.
    {
        auto issues = cfg.issues();
        std::string joined;
        for (const auto& s : issues) joined += (joined.empty() ? "" : "; ") + s;
        rep.checks.push_back({"config invariants (domain, u ordering, layout)",
                              issues.empty() ? CheckStatus::Pass : CheckStatus::Fail, double(issues.size()), 0.0,
                              joined});
        if (!issues.empty()) return rep;
    }

    detail::guarded(rep, "semiflow identity", [&] {
        std::mt19937_64 rng(opt.plan.seed);
        std::uniform_real_distribution<double> U(0.0, 1.0);
        double worst = 0.0;
        for (const auto& c : cfg.process().components())
            for (int n = 0; n < 10; ++n) {
                const double t = 0.1 + 4.9 * U(rng), s = 0.1 + 4.9 * U(rng);
                const Interval dom = component_domain(c, t + s).shrunk(0.9);
                const double lo = std::isfinite(dom.lower) ? dom.lower : -5.0, hi = std::isfinite(dom.upper) ? dom.upper : 5.0;
                const cplx u(lo + (hi - lo) * U(rng), U(rng) - 0.5);
                Transform a = transform(c, s, u), b = transform(c, t, a.psi), ab = transform(c, t + s, u);
                worst = std::max({worst, std::abs(b.phi + a.phi - ab.phi), std::abs(b.psi - ab.psi)});
            }
        rep.checks.push_back(detail::bounded("semiflow identity", worst, 1e-10));
    });

    detail::guarded(rep, "curve fit (bond prices positive and decreasing)", [&] {
        double prev = 1.0, worst = 0.0;
        for (int k = 1; k <= N; ++k) {
            double P = bond_price(cfg, k, s0);
            worst = std::max(worst, P - prev);
            prev = P;
        }
        rep.checks.push_back(detail::bounded("curve fit (bond prices positive and decreasing)", worst, 0.0));
    });

    if (cfg.has_inflation()) {
        detail::guarded(rep, "forward CPI and forward inflation MGF identities", [&] {
            double worst = 0.0;
            for (int k = 2; k <= N; ++k) {
                worst = std::max(worst, std::abs(mgf_log_cpi(cfg, k, 1.0, s0).real() / forward_cpi(cfg, k, s0) - 1.0));
                const double acc = cfg.date(k) - cfg.date(k - 2);
                worst = std::max(worst, std::abs(mgf_yoy(cfg, k, 2, 1.0, s0).real() /
                                                     (1.0 + acc * forward_inflation(cfg, k, 2, s0)) - 1.0));
            }
            rep.checks.push_back(detail::bounded("forward CPI and forward inflation MGF identities", worst, 1e-12));
        });
    }

    // Pricing invariants on one strip per option family.
    struct Family {
        OptionKind call, put;
        int k, j;
        std::vector<double> strikes;
    };
    std::vector<Family> fams{{OptionKind::IrCaplet, OptionKind::IrFloorlet, N, 1, {0.01, 0.02, 0.03, 0.04, 0.05}}};
    if (cfg.has_inflation()) {
        const double I = forward_cpi(cfg, N, s0);
        fams.push_back({OptionKind::CpiCall, OptionKind::CpiPut, N, 0, {0.9 * I, 0.95 * I, I, 1.05 * I, 1.1 * I}});
        fams.push_back({OptionKind::InflCaplet, OptionKind::InflFloorlet, N, 2, {-0.01, 0.0, 0.01, 0.02, 0.03}});
    }
    for (const auto& f : fams) {
        const std::string tag = std::string(to_string(f.call));
        detail::guarded(rep, tag + " pricing invariants", [&] {
            ContourSpec direct = opt.contour;
            direct.parity_puts = false;
            auto base = price_strip(cfg, f.call, f.k, f.j, f.strikes, s0, opt.contour);
            auto puts = price_strip(cfg, f.put, f.k, f.j, f.strikes, s0, direct).prices;
            auto u = underlying(cfg, f.call, f.k, f.j, s0);
            double parity = 0.0, mono = 0.0, convex = 0.0;
            for (std::size_t i = 0; i < f.strikes.size(); ++i) {
                parity = std::max(parity, std::abs(base.prices[i] - puts[i] -
                                                   u.discount * (u.forward - u.effective_strike(f.strikes[i]))));
                if (i > 0) mono = std::max(mono, base.prices[i] - base.prices[i - 1]);
                if (i > 0 && i + 1 < f.strikes.size())
                    convex = std::max(convex, -(base.prices[i - 1] - 2 * base.prices[i] + base.prices[i + 1]));
            }
            rep.checks.push_back(detail::bounded(tag + " put-call parity", parity, 1e-9));
            rep.checks.push_back(detail::bounded(tag + " decreasing in strike", mono, 1e-12));
            rep.checks.push_back(detail::bounded(tag + " convex in strike", convex, 1e-9));
            ContourSpec other = opt.contour, fine = opt.contour;
            other.damping = 1.0 + 0.5 * (base.info.damping - 1.0);
            fine.nodes *= 2;
            auto a = price_strip(cfg, f.call, f.k, f.j, f.strikes, s0, other).prices;
            auto b = price_strip(cfg, f.call, f.k, f.j, f.strikes, s0, fine).prices;
            double dr = 0.0, dn = 0.0;
            for (std::size_t i = 0; i < a.size(); ++i) {
                dr = std::max(dr, std::abs(a[i] - base.prices[i]));
                dn = std::max(dn, std::abs(b[i] - base.prices[i]));
            }
            rep.checks.push_back(detail::bounded(tag + " damping invariance", dr, 1e-8));
            rep.checks.push_back(detail::bounded(tag + " node-doubling invariance", dn, 1e-8));
        });
    }

    detail::guarded(rep, "forward-rate correlations nonnegative", [&] {
        double worst = 0.0;
        for (int a = 2; a <= N; ++a)
            for (int b = a + 1; b <= N; ++b)
                worst = std::max(worst, -correlation(cfg, QuantitySelector::forward_rate(a),
                                                     QuantitySelector::forward_rate(b), cfg.date(a - 1)));
        rep.checks.push_back(detail::bounded("forward-rate correlations nonnegative", worst, 0.0));
    });

    // Monte Carlo cross-checks.
    const bool enough = opt.plan.paths >= opt.min_paths;
    auto mc_check = [&](const std::string& name, double value, double reference, double se) {
        const double z = se > 0 ? std::abs(value - reference) / se : (value == reference ? 0.0 : kInf);
        CheckResult r{name, CheckStatus::Pass, z, opt.sigma_band,
                      "mc=" + detail::format_double(value) + " ref=" + detail::format_double(reference) +
                          " se=" + detail::format_double(se)};
        if (!enough) {
            r.status = CheckStatus::Inconclusive;
            r.detail += " (fewer than " + std::to_string(opt.min_paths) + " paths)";
        } else if (!(z <= opt.sigma_band)) {
            r.status = CheckStatus::Fail;
        }
        rep.checks.push_back(r);
    };
    detail::guarded(rep, "MC option prices", [&] {
        std::vector<McInstrument> ins{{OptionKind::IrCaplet, N, 1, fams[0].strikes}};
        if (cfg.has_inflation()) {
            ins.push_back({OptionKind::CpiCall, N, 0, fams[1].strikes});
            ins.push_back({OptionKind::InflCaplet, N, 2, fams[2].strikes});
        }
        auto mc = mc_price_options(cfg, ins, opt.plan);
        for (std::size_t i = 0; i < ins.size(); ++i) {
            auto f = price_strip(cfg, ins[i].kind, ins[i].k, ins[i].j, ins[i].strikes, s0, opt.contour).prices;
            for (std::size_t s = 0; s < f.size(); ++s)
                mc_check("MC vs Fourier " + std::string(to_string(ins[i].kind)) + " K=" + detail::short_double(ins[i].strikes[s]),
                         mc[i][s].value, f[s], mc[i][s].stderr_);
        }
    });
    if (cfg.has_inflation()) {
        detail::guarded(rep, "MC YYIIS at model rate", [&] {
            const int years = std::min(cfg.M(), 3);
            auto npv = mc_yyiis_npv(cfg, years, yyiis_rate(cfg, years), opt.plan);
            mc_check("MC YYIIS NPV at model rate", npv.value, 0.0, npv.stderr_);
        });
    }
    return rep;
}

} // namespace aimm

#endif // AIMM_VALIDATE_HPP
