// aimm: calibrate, price, surface, validate and synthesize from the command line.
//
// Exit codes: 0 success, 1 I/O or schema error, 2 calibration stage failure,
// 3 validation failure (invalid inputs, failed invariant, failed price row).

#include <aimm/calibrator.hpp>
#include <aimm/market_data.hpp>
#include <aimm/report.hpp>
#include <aimm/serialization.hpp>
#include <aimm/synthetic.hpp>
#include <aimm/validate.hpp>

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <optional>

namespace fs = std::filesystem;
using namespace aimm;

namespace {

constexpr int kOk = 0, kIo = 1, kStage = 2, kInvalid = 3;

struct RunConfig {
    std::string snapshot, settings, model, out = "out", instruments;
    std::uint64_t seed = 1;
    bool seed_set = false;
    std::size_t paths = 100'000;
    std::vector<double> strikes;
    int max_year = 0;
};

TableHeader header_for(const RunConfig& rc) {
    TableHeader h;
    if (!rc.snapshot.empty()) h.inputs.push_back({"snapshot", snapshot_digest(rc.snapshot)});
    if (!rc.settings.empty()) h.inputs.push_back({"settings", file_digest(rc.settings)});
    if (!rc.model.empty()) h.inputs.push_back({"model", file_digest(rc.model)});
    if (!rc.instruments.empty()) h.inputs.push_back({"instruments", file_digest(rc.instruments)});
    if (rc.seed_set) h.inputs.push_back({"seed", std::to_string(rc.seed)});
    return h;
}

void make_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (!fs::is_directory(dir)) throw IoError("cannot create output directory " + dir.string());
}

int cmd_calibrate(const RunConfig& rc) {
    MarketSnapshot snap = load_snapshot(rc.snapshot);
    CalibrationSettings st = rc.settings.empty() ? CalibrationSettings{} : load_settings(rc.settings);
    if (rc.seed_set) st.seed = rc.seed;
    make_dir(rc.out);
    RunConfig effective = rc;
    effective.seed = st.seed;
    effective.seed_set = true;
    const TableHeader h = header_for(effective);
    try {
        CalibrationReport rep = calibrate(snap, st);
        write_json_file(to_json(rep.config), fs::path(rc.out) / "model.json");
        write_json_file(to_json(rep), fs::path(rc.out) / "report.json");
        TableOptions opt;
        opt.contour = st.contour;
        emit_tables(rep, snap, rc.out, h, opt);
        std::cout << "calibrated " << rep.stages.size() << " stages; max curve error "
                  << rep.max_relative_curve_error();
        if (rep.inflation_calibrated) std::cout << ", max ZCIIS error " << rep.max_zciis_error();
        std::cout << '\n';
        for (const auto& line : rep.log) std::cout << "  " << line << '\n';
        return kOk;
    } catch (const CalibrationStageError& e) {
        write_json_file(to_json(e.partial()), fs::path(rc.out) / "report.json");
        std::cerr << "calibration failed at stage " << e.stage() << ": " << e.what() << '\n';
        return kStage;
    }
}

int cmd_price(const RunConfig& rc) {
    const ModelConfig cfg = load_model(rc.model);
    const auto table = detail::read_csv(rc.instruments);
    const fs::path out = fs::path(rc.out).extension() == ".csv" ? fs::path(rc.out) : fs::path(rc.out) / "prices.csv";
    make_dir(out.parent_path().empty() ? fs::path(".") : out.parent_path());
    CsvWriter w(out, header_for(rc), "prices",
                {"kind", "k", "j", "strike", "price", "implied_vol", "damping", "upper", "evaluations",
                 "error_estimate", "error"});
    const bool has_j = std::find(table.header.begin(), table.header.end(), "j") != table.header.end();
    const StateVector s0 = cfg.initial_state();
    int failures = 0;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const OptionKind kind = option_kind_from_string(table.text(r, "kind"));
        const int k = static_cast<int>(table.number(r, "k"));
        int j = kind == OptionKind::CpiCall || kind == OptionKind::CpiPut ? 0
                : kind == OptionKind::IrCaplet || kind == OptionKind::IrFloorlet ? 1 : 2;
        if (has_j && !table.text(r, "j").empty()) j = static_cast<int>(table.number(r, "j"));
        const double K = table.number(r, "strike");
        w.cell(std::string(to_string(kind))).cell(k).cell(j).cell(K);
        try {
            if (k < 1 || k > cfg.N() || j < 0 || k - j < 0) throw ValidationError("index outside the tenor");
            double one[1] = {K};
            PricedStrip ps = price_strip(cfg, kind, k, j, one, s0);
            const double vol = option_implied_vol(cfg, kind, k, j, K, ps.prices[0]);
            w.cell(ps.prices[0]).cell(vol).cell(ps.info.damping).cell(ps.info.upper);
            w.cell(static_cast<int>(ps.info.evaluations)).cell(ps.info.error_estimate).cell(std::string());
        } catch (const Error& e) {
            ++failures;
            for (int c = 0; c < 6; ++c) w.cell(std::nan(""));
            w.cell(std::string(e.what()));
        }
        w.end_row();
    }
    std::cout << "priced " << table.rows.size() - failures << " of " << table.rows.size() << " rows into "
              << out.string() << '\n';
    return failures ? kInvalid : kOk;
}

int cmd_surface(const RunConfig& rc) {
    const ModelConfig cfg = load_model(rc.model);
    std::optional<MarketSnapshot> snap;
    if (!rc.snapshot.empty()) snap = load_snapshot(rc.snapshot);
    make_dir(rc.out);
    const TableHeader h = header_for(rc);
    TableOptions opt;
    if (!rc.strikes.empty()) opt.surface_strikes = rc.strikes;
    opt.max_year = rc.max_year;
    const MarketSnapshot* sp = snap ? &*snap : nullptr;
    write_caplet_surface(cfg, sp, fs::path(rc.out) / "caplet_vol_surface.csv", h, opt);
    if (cfg.has_inflation()) {
        write_inflation_grid(cfg, sp, fs::path(rc.out) / "inflation_options.csv", h, opt);
        write_forward_inflation(cfg, fs::path(rc.out) / "forward_inflation.csv", h, opt);
    }
    std::cout << "wrote surface tables to " << rc.out << '\n';
    return kOk;
}

int cmd_validate(const RunConfig& rc) {
    const ModelConfig cfg = load_model(rc.model);
    ValidationOptions opt;
    opt.plan.paths = rc.paths;
    opt.plan.seed = rc.seed;
    ValidationReport rep = validate_model(cfg, opt);
    make_dir(rc.out);
    CsvWriter w(fs::path(rc.out) / "validation.csv", header_for(rc), "validation",
                {"check", "status", "measured", "tolerance", "detail"});
    for (const auto& c : rep.checks) {
        w.cell(c.name).cell(std::string(to_string(c.status))).cell(c.measured).cell(c.tolerance).cell(c.detail);
        w.end_row();
        std::cout << to_string(c.status) << "  " << c.name;
        if (!c.detail.empty()) std::cout << "  (" << c.detail << ')';
        std::cout << '\n';
    }
    return rep.passed() ? kOk : kInvalid;
}

int cmd_synthesize(const RunConfig& rc) {
    SyntheticMarket mkt;
    ModelConfig cfg = reference_config(mkt);
    MarketSnapshot snap = snapshot_from_model(cfg, mkt);
    write_snapshot(snap, rc.out);
    write_json_file(to_json(cfg), fs::path(rc.out) / "reference_model.json");
    std::cout << "wrote synthetic snapshot (" << snap.discounts.size() << " pillars, " << snap.caplet_vols.size()
              << " caplet vols, " << snap.infl_options.size() << " inflation options) to " << rc.out << '\n';
    return kOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Affine inflation market model: calibration, pricing and validation"};
    app.require_subcommand(1);
    RunConfig rc;

    auto* cal = app.add_subcommand("calibrate", "Calibrate a market snapshot");
    cal->add_option("--snapshot", rc.snapshot, "Snapshot manifest (JSON)")->required()->check(CLI::ExistingFile);
    cal->add_option("--settings", rc.settings, "Calibration settings (JSON)")->check(CLI::ExistingFile);
    cal->add_option("--out", rc.out, "Output directory");
    auto* cal_seed = cal->add_option("--seed", rc.seed, "Seed for optimizer restarts (overrides settings)");

    auto* price = app.add_subcommand("price", "Price an instrument list with a fitted model");
    price->add_option("--model", rc.model, "Model config (JSON)")->required()->check(CLI::ExistingFile);
    price->add_option("--instruments", rc.instruments, "CSV with kind,k[,j],strike")->required()->check(CLI::ExistingFile);
    price->add_option("--out", rc.out, "Output directory or .csv file");

    auto* surf = app.add_subcommand("surface", "Vol surfaces and forward inflation tables");
    surf->add_option("--model", rc.model, "Model config (JSON)")->required()->check(CLI::ExistingFile);
    surf->add_option("--snapshot", rc.snapshot, "Snapshot for market columns")->check(CLI::ExistingFile);
    surf->add_option("--out", rc.out, "Output directory");
    surf->add_option("--strikes", rc.strikes, "Model caplet strikes")->delimiter(',');
    surf->add_option("--max-year", rc.max_year, "Keep rows up to this year");

    auto* val = app.add_subcommand("validate", "Invariant and Monte Carlo cross-checks");
    val->add_option("--model", rc.model, "Model config (JSON)")->required()->check(CLI::ExistingFile);
    val->add_option("--seed", rc.seed, "Simulation seed")->required();
    val->add_option("--paths", rc.paths, "Monte Carlo paths");
    val->add_option("--out", rc.out, "Output directory");

    auto* syn = app.add_subcommand("synthesize", "Write the synthetic snapshot and its reference model");
    syn->add_option("--out", rc.out, "Output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? kOk : kIo;
    }

    rc.seed_set = cal_seed->count() > 0 || val->count() > 0;
    try {
        if (*cal) return cmd_calibrate(rc);
        if (*price) return cmd_price(rc);
        if (*surf) return cmd_surface(rc);
        if (*val) return cmd_validate(rc);
        if (*syn) return cmd_synthesize(rc);
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kIo;
    } catch (const SchemaError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kIo;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kInvalid;
    }
    return kOk;
}
