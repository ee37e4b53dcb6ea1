#include <aimm/report.hpp>
#include <aimm/serialization.hpp>
#include <aimm/synthetic.hpp>

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

using namespace aimm;
namespace fs = std::filesystem;

namespace {

const ModelConfig& reference() {
    static const ModelConfig cfg = reference_config();
    return cfg;
}

fs::path scratch(const std::string& name) {
    fs::path dir = fs::temp_directory_path() / ("aimm_serialization_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

} // namespace

TEST(Serialization, ModelRoundTripPreservesPrices) {
    const auto& cfg = reference();
    const fs::path dir = scratch("model");
    write_json_file(to_json(cfg), dir / "model.json");
    const ModelConfig back = load_model(dir / "model.json");
    ASSERT_EQ(back.dim(), cfg.dim());
    ASSERT_EQ(back.N(), cfg.N());
    const auto s0 = cfg.initial_state();
    for (int k = 1; k <= cfg.N(); ++k) {
        EXPECT_EQ(bond_price(back, k, back.initial_state()), bond_price(cfg, k, s0)) << k;
        EXPECT_EQ(forward_cpi(back, k, back.initial_state()), forward_cpi(cfg, k, s0)) << k;
    }
    EXPECT_EQ(to_json(back).dump(), to_json(cfg).dump());
}

TEST(Serialization, ComponentRejectsUnknownFields) {
    Json j = to_json(cir(0.5, 1.0, 0.2, 1.0));
    EXPECT_EQ(component_from_json(j).lambda, 0.5);
    j["gamma"] = 1.0;
    EXPECT_THROW(component_from_json(j), SchemaError);
    Json k = to_json(cir(0.5, 1.0, 0.2, 1.0));
    k["kind"] = "Heston";
    EXPECT_THROW(component_from_json(k), SchemaError);
}

TEST(Serialization, SettingsRoundTripAndDefaults) {
    CalibrationSettings st;
    st.tilt_c = 0.15;
    st.starts = 2;
    st.two_root = TwoRootPolicy::Positive;
    const CalibrationSettings back = settings_from_json(to_json(st));
    EXPECT_EQ(back.tilt_c, 0.15);
    EXPECT_EQ(back.starts, 2);
    EXPECT_EQ(back.two_root, TwoRootPolicy::Positive);
    EXPECT_EQ(to_json(back).dump(), to_json(st).dump());
    const CalibrationSettings dflt = settings_from_json(Json::object());
    EXPECT_EQ(dflt.tilt_c, CalibrationSettings{}.tilt_c);
}

TEST(Serialization, MissingAndMalformedFiles) {
    const fs::path dir = scratch("bad");
    EXPECT_THROW(load_model(dir / "absent.json"), IoError);
    std::ofstream(dir / "broken.json") << "{ not json";
    EXPECT_THROW(load_model(dir / "broken.json"), SchemaError);
    std::ofstream(dir / "empty.json") << "{}";
    EXPECT_THROW(load_model(dir / "empty.json"), SchemaError);
}

TEST(Report, TablesCarryProvenanceHeader) {
    const auto& cfg = reference();
    const fs::path dir = scratch("tables");
    TableHeader h{{{"model", "abc"}, {"seed", "3"}}};
    TableOptions opt;
    opt.max_year = 3;
    write_forward_inflation(cfg, dir / "fi.csv", h, opt);
    write_caplet_surface(cfg, nullptr, dir / "caplets.csv", h, opt);
    std::ifstream in(dir / "fi.csv");
    std::string a, b, c;
    std::getline(in, a);
    std::getline(in, b);
    std::getline(in, c);
    EXPECT_EQ(a, "# aimm forward_inflation");
    EXPECT_EQ(b, "# inputs: model=abc seed=3");
    EXPECT_EQ(c, "year,start_yr,end_yr,forward_inflation,cpi_ratio_approximation,diff_bp");
    int rows = 0;
    for (std::string line; std::getline(in, line);) ++rows;
    EXPECT_EQ(rows, 3);
}

TEST(Report, ForwardInflationTableIsCloseToApproximation) {
    const auto rows = forward_inflation_table(reference());
    ASSERT_EQ(rows.size(), 10u);
    EXPECT_DOUBLE_EQ(rows[0].diff_bp(), 0.0);
    for (const auto& r : rows) {
        EXPECT_TRUE(std::isfinite(r.forward));
        EXPECT_LT(std::abs(r.diff_bp()), 50.0) << r.year;
    }
}

TEST(Report, ImpliedVolRoundTripAndUnresolvedTimeValue) {
    const auto& cfg = reference();
    const auto s0 = cfg.initial_state();
    const double K = 0.03;
    const double price = price_option(cfg, OptionKind::IrCaplet, 8, 1, K, s0);
    const double vol = option_implied_vol(cfg, OptionKind::IrCaplet, 8, 1, K, price);
    ASSERT_TRUE(std::isfinite(vol));
    const auto u = underlying(cfg, OptionKind::IrCaplet, 8, 1, s0);
    const double F = (u.forward - 1.0) / u.accrual;
    EXPECT_NEAR(black_price(F, K, u.expiry, vol, u.discount * u.accrual), price, 1e-13);
    EXPECT_TRUE(std::isnan(option_implied_vol(cfg, OptionKind::IrCaplet, 8, 1, K, 0.0)));
}

TEST(Report, DigestsAreStable) {
    EXPECT_EQ(hex64(fnv1a("")), "cbf29ce484222325");
    EXPECT_EQ(file_digest("/nonexistent/aimm"), "absent");
}
