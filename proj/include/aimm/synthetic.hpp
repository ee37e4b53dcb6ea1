#ifndef AIMM_SYNTHETIC_HPP
#define AIMM_SYNTHETIC_HPP

// Reference model and synthetic market snapshot generated from it. The
// snapshot has the shapes of a 10-year EUR inflation desk: semiannual curve,
// caplet vols for strikes 1%..6%, ZCIIS 1..10y, and annual inflation
// floorlets (-2%..1%) and caplets (2%..6%).

#include <aimm/calibrator.hpp>
#include <aimm/fourier.hpp>
#include <aimm/market_data.hpp>
#include <aimm/market_model.hpp>

#include <cmath>
#include <vector>

namespace aimm {

struct SyntheticMarket {
    TenorStructure tenor{0.5, 20};
    double zero_short = 0.016, zero_long = 0.034, zero_speed = 0.25;
    double infl_short = 0.014, infl_long = 0.021, infl_speed = 0.4;
    std::vector<double> caplet_strikes{0.01, 0.02, 0.03, 0.04, 0.05, 0.06};
    std::vector<double> floorlet_strikes{-0.02, -0.01, 0.0, 0.01};
    std::vector<double> infl_caplet_strikes{0.02, 0.03, 0.04, 0.05, 0.06};
    /// Caplet quotes whose discounted time value is below this are left out.
    double min_time_value = 1e-7;

    double zero_rate(double t) const {
        return zero_long + (zero_short - zero_long) * (1.0 - std::exp(-zero_speed * t)) / (zero_speed * t);
    }
    double discount(double t) const { return std::exp(-zero_rate(t) * t); }
    double zciis(int years) const {
        double t = years;
        return infl_long + (infl_short - infl_long) * (1.0 - std::exp(-infl_speed * t)) / (infl_speed * t);
    }
};

/// Nominal X^l of the reference model; lambda and theta match the calibration defaults.
inline AffineComponent reference_nominal(int l) {
    return cir_jump(0.5, 1.0, 0.30 + 0.01 * l, 0.9 + 0.04 * l, 6.0 - 0.2 * l, 0.3 + 0.03 * l);
}

/// Inflation X^{M+l}; lambda, x0 and alpha+- match the calibration defaults.
inline AffineComponent reference_inflation(int l) {
    return ou_jump(0.15, 0.8 + 0.02 * l, 0.03 + 0.002 * l, 0.0, 10.0, 0.3 + 0.02 * l, 10.0, 0.2 + 0.01 * l);
}

/// Model fitted exactly to the synthetic curves with the reference processes.
inline ModelConfig reference_config(const SyntheticMarket& mkt = {}, const CalibrationSettings& st = {}) {
    const TenorStructure tenor = mkt.tenor;
    const int N = tenor.N, M = tenor.years();
    const double T = tenor.horizon();
    std::vector<AffineComponent> comps{st.common};
    for (int l = 1; l <= M; ++l) comps.push_back(reference_nominal(l));
    for (int l = 1; l <= M; ++l) comps.push_back(reference_inflation(l));
    ProductProcess p(comps, T);

    std::vector<double> ratios, ilb;
    const double PT = mkt.discount(T);
    for (int k = 1; k <= N; ++k) ratios.push_back(mkt.discount(tenor.date(k)) / PT);
    std::vector<double> log_cpi(N + 1, 0.0);
    for (int y = 1; y <= M; ++y) log_cpi[2 * y] = y * std::log1p(mkt.zciis(y));
    for (int y = 1; y <= M; ++y) log_cpi[2 * y - 1] = 0.5 * (log_cpi[2 * y - 2] + log_cpi[2 * y]);
    for (int k = 1; k <= N; ++k) ilb.push_back(std::exp(log_cpi[k]) * ratios[k - 1]);

    ParameterGenerators gen;
    gen.utilde = fit_utilde(st.common, T, ratios, st.roots);
    gen.ubar = fit_ubar(p, tenor, gen.utilde, ratios, st.roots);
    gen.vtilde = fit_vtilde(gen.utilde, st.tilt_c);
    gen.vbar.assign(N, 0.0);
    gen.vbar = fit_vbar(p, tenor, gen, ilb, st.two_root, st.roots);
    return make_model_config(p, tenor, gen, PT);
}

/// Nominal-only restriction of a structured config (X^0 and X^1..X^M).
inline ModelConfig nominal_part(const ModelConfig& cfg) {
    std::vector<AffineComponent> comps(cfg.process().components().begin(),
                                       cfg.process().components().begin() + 1 + cfg.M());
    ParameterGenerators gen = *cfg.generators();
    gen.vtilde.assign(cfg.N(), 0.0);
    gen.vbar.assign(cfg.N(), 0.0);
    return ModelConfig::from_generators(ProductProcess(comps, cfg.horizon()), cfg.tenor(), gen,
                                        cfg.numeraire_discount());
}

/// Snapshot whose curves and quotes are produced by `cfg`.
inline MarketSnapshot snapshot_from_model(const ModelConfig& cfg, const SyntheticMarket& mkt = {},
                                          const ContourSpec& contour = {}) {
    MarketSnapshot s;
    s.as_of = "2011-09-29";
    const StateVector s0 = cfg.initial_state();
    for (int k = 1; k <= cfg.N(); ++k) s.discounts.push_back({cfg.date(k), bond_price(cfg, k, s0)});
    for (int l = 1; l <= cfg.M(); ++l) {
        const int k = 2 * l;
        PricedStrip ps = price_strip(cfg, OptionKind::IrCaplet, k, 1, mkt.caplet_strikes, s0, contour);
        const double F = forward_rate(cfg, k, s0), P = bond_price(cfg, k, s0);
        const double acc = cfg.date(k) - cfg.date(k - 1);
        std::vector<double> kept;
        for (std::size_t i = 0; i < mkt.caplet_strikes.size(); ++i) {
            const double K = mkt.caplet_strikes[i];
            if (ps.prices[i] - P * acc * std::max(F - K, 0.0) >= mkt.min_time_value) kept.push_back(K);
        }
        auto vols = model_caplet_vols(cfg, l, kept, contour);
        for (std::size_t i = 0; i < vols.size(); ++i) s.caplet_vols.push_back({cfg.date(k - 1), kept[i], vols[i]});
    }
    if (!cfg.has_inflation()) return s;
    for (int y = 1; y <= cfg.M(); ++y) s.zciis.push_back({y, zciis_rate(cfg, y)});
    for (int l = 1; l <= cfg.M(); ++l) {
        std::vector<InflationOptionQuote> q;
        for (double K : mkt.floorlet_strikes) q.push_back({double(l), K, false, 0.0});
        for (double K : mkt.infl_caplet_strikes) q.push_back({double(l), K, true, 0.0});
        auto bp = model_inflation_prices_bp(cfg, l, q, contour);
        for (std::size_t i = 0; i < q.size(); ++i) {
            q[i].price_bp = bp[i];
            s.infl_options.push_back(q[i]);
        }
    }
    return s;
}

} // namespace aimm

#endif // AIMM_SYNTHETIC_HPP
