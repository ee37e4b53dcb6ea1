#include <aimm/fourier.hpp>
#include <aimm/synthetic.hpp>

#include <gtest/gtest.h>

using namespace aimm;

namespace {

const ModelConfig& reference() {
    static const ModelConfig cfg = reference_config();
    return cfg;
}

MgfFunction lognormal(double S, double sigma, double T) {
    return [=](cplx z) { return std::exp(z * (std::log(S) - 0.5 * sigma * sigma * T) + 0.5 * z * z * sigma * sigma * T); };
}

struct Strip {
    OptionKind call, put;
    int k, j;
    std::vector<double> strikes;
};

std::vector<Strip> strips() {
    return {{OptionKind::CpiCall, OptionKind::CpiPut, 12, 0, {1.05, 1.1, 1.15, 1.2, 1.25}},
            {OptionKind::InflCaplet, OptionKind::InflFloorlet, 14, 2, {-0.01, 0.0, 0.01, 0.02, 0.03, 0.05}},
            {OptionKind::IrCaplet, OptionKind::IrFloorlet, 16, 1, {0.01, 0.02, 0.03, 0.04, 0.06}}};
}

} // namespace

TEST(Fourier, GaussianMatchesBlackScholes) {
    auto mgf = lognormal(100.0, 0.2, 1.0);
    EXPECT_NEAR(fourier_call(mgf, 100.0, {}), 7.965567455405804, 1e-9);
    std::vector<double> K{60, 80, 100, 120, 160};
    auto calls = fourier_call_strip(mgf, K, 2.0).values;
    auto puts = fourier_put_strip(mgf, K, -1.5).values;
    for (std::size_t i = 0; i < K.size(); ++i) {
        EXPECT_NEAR(calls[i], black_price(100.0, K[i], 1.0, 0.2, 1.0, true), 1e-9) << K[i];
        EXPECT_NEAR(puts[i], black_price(100.0, K[i], 1.0, 0.2, 1.0, false), 1e-9) << K[i];
    }
}

TEST(Fourier, PointMassGivesIntrinsicValue) {
    MgfFunction mgf = [](cplx z) { return std::exp(z * std::log(100.0)); };
    ContourSpec spec;
    spec.max_upper = 1e5;
    spec.fail_tol = 1.0;
    std::vector<double> K{90.0, 110.0};
    auto v = fourier_call_strip(mgf, K, 1.5, spec).values;
    EXPECT_NEAR(v[0], 10.0, 1e-3);
    EXPECT_NEAR(v[1], 0.0, 1e-3);
}

TEST(Fourier, RejectsInvalidDamping) {
    auto mgf = lognormal(100.0, 0.2, 1.0);
    std::vector<double> K{100.0};
    EXPECT_THROW(fourier_call_strip(mgf, K, 0.5), ContourError);
    EXPECT_THROW(fourier_put_strip(mgf, K, 0.5), ContourError);
    ContourSpec spec;
    spec.damping = 1e4;
    EXPECT_THROW(cpi_call(reference(), 4, 1.0, reference().initial_state(), spec), ContourError);
    EXPECT_THROW(ir_caplet(reference(), 4, -5.0, reference().initial_state()), ValidationError);
}

TEST(Fourier, DirectPutsSatisfyParity) {
    const auto& cfg = reference();
    auto s0 = cfg.initial_state();
    ContourSpec direct;
    direct.parity_puts = false;
    for (const auto& st : strips()) {
        auto calls = price_strip(cfg, st.call, st.k, st.j, st.strikes, s0).prices;
        auto puts = price_strip(cfg, st.put, st.k, st.j, st.strikes, s0, direct).prices;
        auto u = underlying(cfg, st.call, st.k, st.j, s0);
        for (std::size_t i = 0; i < st.strikes.size(); ++i) {
            double parity = calls[i] - puts[i] - u.discount * (u.forward - u.effective_strike(st.strikes[i]));
            EXPECT_LT(std::abs(parity), 1e-9) << to_string(st.call) << ' ' << st.strikes[i];
        }
    }
}

TEST(Fourier, PricesAreDecreasingAndConvexInStrike) {
    const auto& cfg = reference();
    auto s0 = cfg.initial_state();
    for (const auto& st : strips()) {
        std::vector<double> K;
        const double lo = st.strikes.front(), hi = st.strikes.back();
        for (int i = 0; i <= 20; ++i) K.push_back(lo + (hi - lo) * i / 20.0);
        auto c = price_strip(cfg, st.call, st.k, st.j, K, s0).prices;
        for (std::size_t i = 1; i < K.size(); ++i) EXPECT_LE(c[i], c[i - 1] + 1e-12);
        for (std::size_t i = 1; i + 1 < K.size(); ++i) EXPECT_GE(c[i - 1] - 2 * c[i] + c[i + 1], -1e-9);
    }
}

TEST(Fourier, InvariantUnderDampingAndNodeCount) {
    const auto& cfg = reference();
    auto s0 = cfg.initial_state();
    for (const auto& st : strips()) {
        auto base = price_strip(cfg, st.call, st.k, st.j, st.strikes, s0);
        ContourSpec other;
        other.damping = 1.0 + 0.5 * (base.info.damping - 1.0);
        auto shifted = price_strip(cfg, st.call, st.k, st.j, st.strikes, s0, other).prices;
        ContourSpec doubled;
        doubled.nodes = 32;
        auto fine = price_strip(cfg, st.call, st.k, st.j, st.strikes, s0, doubled).prices;
        for (std::size_t i = 0; i < st.strikes.size(); ++i) {
            EXPECT_LT(std::abs(shifted[i] - base.prices[i]), 1e-8);
            EXPECT_LT(std::abs(fine[i] - base.prices[i]), 1e-8);
        }
    }
}

TEST(Fourier, ImpliedVolatilityRoundTrip) {
    for (double K : {0.01, 0.02, 0.03, 0.05})
        for (double vol : {0.05, 0.3, 1.2}) {
            double p = black_price(0.03, K, 4.0, vol, 0.9, true);
            // Time value below double resolution carries no volatility information.
            if (p - 0.9 * std::max(0.03 - K, 0.0) < 1e-10) continue;
            EXPECT_NEAR(implied_vol_black(0.03, K, 4.0, p, 0.9, true), vol, 1e-9);
            double q = black_price(0.03, K, 4.0, vol, 0.9, false);
            EXPECT_NEAR(implied_vol_black(0.03, K, 4.0, q, 0.9, false), vol, 1e-9);
        }
    EXPECT_EQ(implied_vol_black(0.03, 0.02, 1.0, 0.01, 1.0, true), 0.0);
    EXPECT_THROW(implied_vol_black(0.03, 0.02, 1.0, 0.05, 1.0, true), NoSolution);
    EXPECT_THROW(implied_vol_black(0.03, 0.02, 1.0, 0.001, 1.0, true), NoSolution);
    double p = black_price(1.02, 1.0, 2.0, 0.01, 1.0, true);
    EXPECT_NEAR(implied_vol_shifted_black(0.02, 0.0, 2.0, p, 1.0, 1.0, true), 0.01, 1e-9);
}

TEST(Fourier, OptionKindNames) {
    for (auto k : {OptionKind::CpiCall, OptionKind::CpiPut, OptionKind::InflCaplet, OptionKind::InflFloorlet,
                   OptionKind::IrCaplet, OptionKind::IrFloorlet})
        EXPECT_EQ(option_kind_from_string(to_string(k)), k);
    EXPECT_THROW(option_kind_from_string("SWAPTION"), SchemaError);
}
