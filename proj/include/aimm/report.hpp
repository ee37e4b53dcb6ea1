#ifndef AIMM_REPORT_HPP
#define AIMM_REPORT_HPP

// Plot-ready CSV tables: caplet vol surface, inflation option grid, forward
// inflation against the CPI-ratio approximation, and fit residuals. Every
// file starts with '#' lines naming the table and digesting its inputs.

#include <aimm/calibrator.hpp>
#include <aimm/fourier.hpp>
#include <aimm/market_data.hpp>
#include <aimm/market_model.hpp>

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

namespace aimm {

/// 64-bit FNV-1a.
inline std::uint64_t fnv1a(std::string_view bytes, std::uint64_t h = 0xcbf29ce484222325ULL) {
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

/// Digest of a file's bytes; missing files digest as "absent".
inline std::string file_digest(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) return "absent";
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return hex64(fnv1a(bytes));
}

/// Digest of a snapshot: the manifest plus every file it references.
inline std::string snapshot_digest(const std::filesystem::path& manifest) {
    std::uint64_t h = fnv1a(file_digest(manifest));
    for (const char* f : {"discounts.csv", "caplet_vols.csv", "zciis.csv", "infl_options.csv"})
        h = fnv1a(file_digest(manifest.parent_path() / f), h);
    return hex64(h);
}

/// Header lines written at the top of every table: name=digest pairs plus the seed.
struct TableHeader {
    std::vector<std::pair<std::string, std::string>> inputs;

    std::string lines(const std::string& table) const {
        std::string s = "# aimm " + table + "\n# inputs:";
        for (const auto& [k, v] : inputs) s += " " + k + "=" + v;
        return s + "\n";
    }
};

class CsvWriter {
public:
    CsvWriter(const std::filesystem::path& path, const TableHeader& header, const std::string& table,
              const std::vector<std::string>& columns)
        : out_(path), path_(path) {
        if (!out_) throw IoError("cannot write " + path.string());
        out_ << header.lines(table);
        for (std::size_t i = 0; i < columns.size(); ++i) out_ << (i ? "," : "") << columns[i];
        out_ << '\n';
    }

    CsvWriter& cell(double v) { return raw(std::isnan(v) ? std::string() : detail::format_double(v)); }
    CsvWriter& cell(int v) { return raw(std::to_string(v)); }
    CsvWriter& cell(const std::string& v) { return raw(v); }
    void end_row() {
        out_ << '\n';
        first_ = true;
        if (!out_) throw IoError("write failed for " + path_.string());
    }

private:
    CsvWriter& raw(const std::string& s) {
        if (!first_) out_ << ',';
        // Quote free text containing separators.
        if (s.find_first_of(",\"\n") != std::string::npos) {
            out_ << '"';
            for (char c : s) out_ << (c == '"' ? "\"\"" : std::string(1, c));
            out_ << '"';
        } else {
            out_ << s;
        }
        first_ = false;
        return *this;
    }

    std::ofstream out_;
    std::filesystem::path path_;
    bool first_ = true;
};

// ---------------------------------------------------------------------------
// Model-side quantities behind the tables

/// Time value per unit discount below which a price is quadrature noise.
inline constexpr double kMinTimeValue = 1e-12;

inline bool time_value_resolved(const UnderlyingSetup& u, bool call, double strike, double price) {
    const double d = u.forward - u.effective_strike(strike);
    return price - u.discount * std::max(call ? d : -d, 0.0) >= kMinTimeValue * u.discount;
}

/// Quoting vol of an option price: Black on F^k for IR caplets/floorlets,
/// shifted Black on F_I for inflation caplets/floorlets, Black on the forward
/// CPI for CPI options. NaN when the time value is unresolved or the price is
/// outside the no-arbitrage band.
inline double option_implied_vol(const ModelConfig& cfg, OptionKind kind, int k, int j, double strike, double price) {
    const StateVector s0 = cfg.initial_state();
    const UnderlyingSetup u = underlying(cfg, kind, k, j, s0);
    const bool call = is_call(kind);
    if (!time_value_resolved(u, call, strike, price)) return std::nan("");
    try {
        switch (kind) {
        case OptionKind::IrCaplet:
        case OptionKind::IrFloorlet:
            return implied_vol_black((u.forward - 1.0) / u.accrual, strike, u.expiry, price, u.discount * u.accrual, call);
        case OptionKind::InflCaplet:
        case OptionKind::InflFloorlet:
            return implied_vol_shifted_black((u.forward - 1.0) / u.accrual, strike, u.expiry, price,
                                             u.discount * u.accrual, 1.0 / u.accrual, call);
        case OptionKind::CpiCall:
        case OptionKind::CpiPut: return implied_vol_black(u.forward, strike, u.expiry, price, u.discount, call);
        }
    } catch (const NoSolution&) {
    }
    return std::nan("");
}

/// Shifted-Black vol of an annual inflation caplet/floorlet quoted in bp.
inline double inflation_implied_vol(const ModelConfig& cfg, int year, double strike, bool caplet, double price_bp) {
    return option_implied_vol(cfg, caplet ? OptionKind::InflCaplet : OptionKind::InflFloorlet, 2 * year, 2, strike,
                              price_bp / 1e4);
}

struct ForwardInflationRow {
    int year = 0;
    double start = 0.0, end = 0.0;
    double forward = 0.0;      // F_I(0, T_{2y-2}, T_{2y})
    double approximation = 0.0; // ℐ(0,T_{2y}) / ℐ(0,T_{2y-2}) - 1
    double diff_bp() const { return 1e4 * (forward - approximation); }
};

inline std::vector<ForwardInflationRow> forward_inflation_table(const ModelConfig& cfg) {
    std::vector<ForwardInflationRow> rows;
    const StateVector s0 = cfg.initial_state();
    for (int y = 1; y <= cfg.M(); ++y) {
        const int k = 2 * y;
        ForwardInflationRow r;
        r.year = y;
        r.start = cfg.date(k - 2);
        r.end = cfg.date(k);
        const double acc = r.end - r.start;
        r.forward = forward_inflation(cfg, k, 2, s0);
        r.approximation = (forward_cpi(cfg, k, s0) / forward_cpi(cfg, k - 2, s0) - 1.0) / acc;
        rows.push_back(r);
    }
    return rows;
}

// ---------------------------------------------------------------------------
// Tables

struct TableOptions {
    /// Extra strikes for the model vol surface beyond the quoted grid.
    std::vector<double> surface_strikes{0.005, 0.01, 0.015, 0.02, 0.025, 0.03, 0.035, 0.04, 0.045, 0.05, 0.055, 0.06};
    ContourSpec contour{};
    /// Rows up to this year; 0 keeps all.
    int max_year = 0;

    int last_year(const ModelConfig& cfg) const { return max_year > 0 ? std::min(max_year, cfg.M()) : cfg.M(); }
};

/// expiry, strike, market and model Black vols on the union of quoted and extra strikes.
inline void write_caplet_surface(const ModelConfig& cfg, const MarketSnapshot* snap, const std::filesystem::path& path,
                                 const TableHeader& h, const TableOptions& opt) {
    CsvWriter w(path, h, "caplet_vol_surface",
                {"year", "expiry_yr", "strike", "market_vol", "model_vol", "vol_error", "error"});
    for (int l = 1; l <= opt.last_year(cfg); ++l) {
        std::map<double, double> market;
        if (snap)
            for (const auto& q : caplet_quotes_for_year(*snap, l)) market[q.strike] = q.vol;
        std::map<double, double> grid;
        for (double K : opt.surface_strikes) grid[K] = std::nan("");
        for (const auto& [K, v] : market) grid[K] = v;
        std::vector<double> strikes;
        for (const auto& [K, _] : grid) strikes.push_back(K);
        const StateVector s0 = cfg.initial_state();
        const UnderlyingSetup u = underlying(cfg, OptionKind::IrCaplet, 2 * l, 1, s0);
        for (double K : strikes) {
            // Per strike, so that one unresolvable vol does not blank the year.
            double vol = std::nan("");
            std::string err;
            try {
                double one[1] = {K};
                const double price = price_strip(cfg, OptionKind::IrCaplet, 2 * l, 1, one, s0, opt.contour).prices[0];
                if (!time_value_resolved(u, true, K, price))
                    err = "time value below pricing accuracy";
                else
                    vol = option_implied_vol(cfg, OptionKind::IrCaplet, 2 * l, 1, K, price);
                if (err.empty() && std::isnan(vol)) err = "price outside the no-arbitrage band";
            } catch (const Error& e) {
                err = e.what();
            }
            const double mkt = grid[K];
            w.cell(l).cell(cfg.date(2 * l - 1)).cell(K).cell(mkt).cell(vol).cell(vol - mkt).cell(err);
            w.end_row();
        }
    }
}

/// Annual inflation caplets and floorlets: market and model prices in bp and shifted-Black vols.
inline void write_inflation_grid(const ModelConfig& cfg, const MarketSnapshot* snap, const std::filesystem::path& path,
                                 const TableHeader& h, const TableOptions& opt) {
    CsvWriter w(path, h, "inflation_options",
                {"year", "strike", "kind", "market_bp", "model_bp", "error_bp", "market_vol", "model_vol", "error"});
    for (int l = 1; l <= opt.last_year(cfg); ++l) {
        std::vector<InflationOptionQuote> q;
        if (snap) q = inflation_quotes_for_year(*snap, l);
        if (q.empty()) {
            for (double K : {-0.02, -0.01, 0.0, 0.01}) q.push_back({double(l), K, false, std::nan("")});
            for (double K : {0.02, 0.03, 0.04, 0.05, 0.06}) q.push_back({double(l), K, true, std::nan("")});
        }
        std::vector<double> bp(q.size(), std::nan(""));
        std::string err;
        try {
            bp = model_inflation_prices_bp(cfg, l, q, opt.contour);
        } catch (const Error& e) {
            err = e.what();
        }
        for (std::size_t i = 0; i < q.size(); ++i) {
            const double mv = std::isnan(q[i].price_bp) ? std::nan("")
                                                        : inflation_implied_vol(cfg, l, q[i].strike, q[i].caplet, q[i].price_bp);
            const double v = std::isnan(bp[i]) ? std::nan("") : inflation_implied_vol(cfg, l, q[i].strike, q[i].caplet, bp[i]);
            w.cell(l).cell(q[i].strike).cell(std::string(q[i].caplet ? "caplet" : "floorlet"));
            w.cell(q[i].price_bp).cell(bp[i]).cell(bp[i] - q[i].price_bp).cell(mv).cell(v).cell(err);
            w.end_row();
        }
    }
}

inline void write_forward_inflation(const ModelConfig& cfg, const std::filesystem::path& path, const TableHeader& h,
                                    const TableOptions& opt = {}) {
    CsvWriter w(path, h, "forward_inflation",
                {"year", "start_yr", "end_yr", "forward_inflation", "cpi_ratio_approximation", "diff_bp"});
    for (const auto& r : forward_inflation_table(cfg)) {
        if (r.year > opt.last_year(cfg)) break;
        w.cell(r.year).cell(r.start).cell(r.end).cell(r.forward).cell(r.approximation).cell(r.diff_bp());
        w.end_row();
    }
}

inline void write_residuals(const CalibrationReport& rep, const std::filesystem::path& path, const TableHeader& h) {
    CsvWriter w(path, h, "residuals", {"instrument", "maturity_yr", "strike", "market", "model", "error", "unit"});
    for (const auto& r : rep.residuals) {
        w.cell(r.instrument).cell(r.maturity).cell(r.strike).cell(r.market).cell(r.model).cell(r.error()).cell(r.unit);
        w.end_row();
    }
}

inline void write_stages(const CalibrationReport& rep, const std::filesystem::path& path, const TableHeader& h) {
    CsvWriter w(path, h, "stages",
                {"stage", "year", "component", "objective", "evaluations", "converged", "rank_deficient", "quotes",
                 "parameters"});
    for (const auto& s : rep.stages) {
        std::string params;
        for (std::size_t i = 0; i < s.names.size(); ++i)
            params += (i ? ";" : "") + s.names[i] + "=" + detail::format_double(s.values[i]);
        w.cell(s.stage).cell(s.year).cell(s.component).cell(s.objective).cell(s.evaluations);
        w.cell(s.converged ? 1 : 0).cell(s.rank_deficient ? 1 : 0).cell(s.quotes).cell(params);
        w.end_row();
    }
}

/// Writes the report's tables; inflation tables only when the report has inflation.
/// Returns the file names written, in a fixed order.
inline std::vector<std::string> emit_tables(const CalibrationReport& rep, const MarketSnapshot& snap,
                                            const std::filesystem::path& dir, const TableHeader& h,
                                            const TableOptions& opt = {}) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (!std::filesystem::is_directory(dir)) throw IoError("cannot create output directory " + dir.string());
    std::vector<std::string> files;
    write_residuals(rep, dir / "residuals.csv", h);
    files.push_back("residuals.csv");
    write_stages(rep, dir / "stages.csv", h);
    files.push_back("stages.csv");
    write_caplet_surface(rep.config, &snap, dir / "caplet_vol_surface.csv", h, opt);
    files.push_back("caplet_vol_surface.csv");
    if (rep.inflation_calibrated && rep.config.has_inflation()) {
        write_inflation_grid(rep.config, &snap, dir / "inflation_options.csv", h, opt);
        files.push_back("inflation_options.csv");
        write_forward_inflation(rep.config, dir / "forward_inflation.csv", h, opt);
        files.push_back("forward_inflation.csv");
    }
    return files;
}

} // namespace aimm

#endif // AIMM_REPORT_HPP
