#include <aimm/market_model.hpp>
#include <aimm/synthetic.hpp>

#include <gtest/gtest.h>

#include <random>

using namespace aimm;

namespace {

const ModelConfig& reference() {
    static const ModelConfig cfg = reference_config();
    return cfg;
}

StateVector random_state(const ModelConfig& cfg, double t, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> pos(0.05, 3.0), any(-1.0, 1.0);
    StateVector s{t, {}, 1.0};
    for (const auto& c : cfg.process().components()) s.x.push_back(c.nonnegative() ? pos(rng) : c.theta + any(rng));
    return s;
}

} // namespace

TEST(MarketModel, ReproducesInputCurves) {
    const auto& cfg = reference();
    SyntheticMarket mkt;
    auto s0 = cfg.initial_state();
    for (int k = 1; k <= cfg.N(); ++k)
        EXPECT_NEAR(bond_price(cfg, k, s0) / mkt.discount(cfg.date(k)), 1.0, 1e-11) << k;
    for (int y = 1; y <= cfg.M(); ++y) EXPECT_NEAR(zciis_rate(cfg, y), mkt.zciis(y), 1e-11) << y;
}

TEST(MarketModel, StructuredLoadingsAreDecreasing) {
    const auto& cfg = reference();
    for (int k = 1; k < cfg.N(); ++k)
        for (std::size_t i = 0; i <= static_cast<std::size_t>(cfg.M()); ++i)
            EXPECT_GE(cfg.u(k)[i], cfg.u(k + 1)[i]) << k << ' ' << i;
    for (int k = 1; k <= cfg.N(); ++k)
        for (double x : cfg.u(k)) EXPECT_GE(x, 0.0);
}

TEST(MarketModel, MgfIdentitiesOnRandomStates) {
    const auto& cfg = reference();
    std::mt19937_64 rng(7);
    std::uniform_int_distribution<int> pick(2, cfg.N());
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int n = 0; n < 40; ++n) {
        const int k = pick(rng), j = std::min(k, 2);
        auto s = random_state(cfg, unit(rng) * cfg.date(k - j), rng);
        EXPECT_NEAR(mgf_log_cpi(cfg, k, 1.0, s).real() / forward_cpi(cfg, k, s), 1.0, 1e-12);
        EXPECT_NEAR(std::abs(mgf_log_cpi(cfg, k, 0.0, s) - 1.0), 0.0, 1e-13);
        const double yoy = 1.0 + (cfg.date(k) - cfg.date(k - j)) * forward_inflation(cfg, k, j, s);
        EXPECT_NEAR(mgf_yoy(cfg, k, j, 1.0, s).real() / yoy, 1.0, 1e-12);
        EXPECT_NEAR(std::abs(mgf_yoy(cfg, k, j, 0.0, s) - 1.0), 0.0, 1e-13);
    }
}

TEST(MarketModel, ForwardQuantitiesAreForwardMeasureMartingales) {
    const auto& cfg = reference();
    auto s0 = cfg.initial_state();
    for (int k : {2, 7, 14, 20}) {
        const double t = cfg.date(k - 1) * 0.6;
        AffinePair cpi = ab_pair(cfg, t, cfg.vc(k), cfg.uc(k));
        double e = (std::exp(cpi.A) * mgf_forward_measure(cfg, k, cpi.B, t, s0)).real();
        EXPECT_NEAR(e / forward_cpi(cfg, k, s0), 1.0, 1e-12) << k;
        AffinePair fr = ab_pair(cfg, t, cfg.uc(k - 1), cfg.uc(k));
        double g = (std::exp(fr.A) * mgf_forward_measure(cfg, k, fr.B, t, s0)).real();
        const double delta = cfg.date(k) - cfg.date(k - 1);
        EXPECT_NEAR(g, 1.0 + delta * forward_rate(cfg, k, s0), 1e-12) << k;
    }
}

TEST(MarketModel, TwoTimeMgfReducesToOneTime) {
    const auto& cfg = reference();
    auto s0 = cfg.initial_state();
    CVec w(cfg.dim(), 0.0), zero(cfg.dim(), 0.0);
    w[0] = 0.01;
    w[3] = 0.05;
    w[cfg.M() + 3] = -0.2;
    const int k = 12;
    cplx one = mgf_forward_measure(cfg, k, w, 4.0, s0);
    EXPECT_NEAR(std::abs(mgf_two_time(cfg, k, zero, w, 2.0, 4.0, s0) - one), 0.0, 1e-13);
    EXPECT_NEAR(std::abs(mgf_two_time(cfg, k, w, zero, 4.0, 5.0, s0) - one), 0.0, 1e-13);
    EXPECT_NEAR(std::abs(mgf_forward_measure(cfg, k, zero, 4.0, s0) - 1.0), 0.0, 1e-14);
}

TEST(MarketModel, ForwardInflationFromOriginIsZeroCouponRate) {
    const auto& cfg = reference();
    auto s0 = cfg.initial_state();
    for (int k = 1; k <= cfg.N(); ++k) {
        const double fi = forward_inflation(cfg, k, k, s0);
        EXPECT_NEAR(1.0 + cfg.date(k) * fi, forward_cpi(cfg, k, s0), 1e-12) << k;
    }
}

TEST(MarketModel, RealBondAndYyiisAreConsistent) {
    const auto& cfg = reference();
    auto s0 = cfg.initial_state();
    for (int k = 1; k <= cfg.N(); ++k)
        EXPECT_NEAR(real_bond(cfg, k), forward_cpi(cfg, k, s0) * bond_price(cfg, k, s0), 1e-15);
    const double y1 = yyiis_rate(cfg, 1);
    EXPECT_NEAR(y1, zciis_rate(cfg, 1), 1e-12);
    const double y10 = yyiis_rate(cfg, 10);
    EXPECT_GT(y10, 0.0);
    EXPECT_LT(y10, 0.05);
}

TEST(MarketModel, CorrelationSigns) {
    const auto& cfg = reference();
    for (int a = 2; a <= cfg.N(); ++a)
        for (int b = 2; b <= cfg.N(); ++b) {
            double t = std::min(cfg.date(a - 1), cfg.date(b - 1));
            if (t <= 0) continue;
            EXPECT_GE(correlation(cfg, QuantitySelector::forward_rate(a), QuantitySelector::forward_rate(b), t), 0.0);
            EXPECT_GE(correlation(cfg, QuantitySelector::forward_cpi(a), QuantitySelector::forward_rate(b), t), 0.0);
        }
    EXPECT_DOUBLE_EQ(correlation(cfg, QuantitySelector::forward_rate(6), QuantitySelector::forward_rate(6), 1.0), 1.0);
}

TEST(MarketModel, ConstantCommonLoadingDecouplesAnnualForwardRates) {
    const auto& ref = reference();
    ParameterGenerators gen = *ref.generators();
    gen.utilde.assign(ref.N(), 0.01);
    auto cfg = ModelConfig::from_generators(ref.process(), ref.tenor(), gen, ref.numeraire_discount());
    for (int a = 1; a <= cfg.M(); ++a)
        for (int b = 1; b <= cfg.M(); ++b) {
            if (a == b) continue;
            double t = cfg.date(2 * std::min(a, b) - 1);
            EXPECT_LT(std::abs(correlation(cfg, QuantitySelector::forward_rate(2 * a),
                                           QuantitySelector::forward_rate(2 * b), t)),
                      1e-12);
        }
}

TEST(MarketModel, TimeRestrictionsAreEnforced) {
    const auto& cfg = reference();
    auto s = cfg.initial_state();
    s.t = 3.0;
    EXPECT_THROW(forward_rate(cfg, 6, s), ValidationError);
    EXPECT_THROW(forward_cpi(cfg, 5, s), ValidationError);
    EXPECT_THROW(forward_inflation(cfg, 8, 4, s), ValidationError);
    EXPECT_NO_THROW(forward_rate(cfg, 7, s));
    EXPECT_THROW(zciis_rate(cfg, 11), ValidationError);
}

TEST(MarketModel, RejectsMalformedConfigs) {
    const auto& ref = reference();
    EXPECT_THROW(ModelConfig(ref.process(), TenorStructure{0.5, 19}, {}, {}), ValidationError);
    ParameterGenerators gen = *ref.generators();
    std::vector<AffineComponent> three(ref.process().components().begin(), ref.process().components().begin() + 3);
    EXPECT_THROW(ModelConfig::from_generators(ProductProcess(three, ref.horizon()), ref.tenor(), gen), ValidationError);
}

TEST(MarketModel, OutOfDomainLoadingRaisesDomainViolation) {
    const auto& ref = reference();
    ParameterGenerators gen = *ref.generators();
    gen.ubar[0] = 50.0;
    auto cfg = ModelConfig::from_generators(ref.process(), ref.tenor(), gen, ref.numeraire_discount());
    EXPECT_FALSE(cfg.issues().empty());
    EXPECT_THROW(bond_price(cfg, 1, cfg.initial_state()), DomainViolation);
}

TEST(MarketModel, RestrictionKeepsSelectedComponents) {
    const auto& cfg = reference();
    std::vector<std::size_t> idx{0, 4, static_cast<std::size_t>(cfg.M() + 4)};
    auto sub = cfg.restrict(idx);
    ASSERT_EQ(sub.dim(), 3u);
    for (int k = 1; k <= cfg.N(); ++k)
        for (std::size_t i = 0; i < idx.size(); ++i) {
            EXPECT_EQ(sub.u(k)[i], cfg.u(k)[idx[i]]);
            EXPECT_EQ(sub.v(k)[i], cfg.v(k)[idx[i]]);
        }
}
