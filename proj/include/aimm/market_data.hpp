#ifndef AIMM_MARKET_DATA_HPP
#define AIMM_MARKET_DATA_HPP

// Market snapshots: discount curve, caplet vol grid, ZCIIS curve and
// inflation option grid, read from CSV files listed in a JSON manifest.

#include <aimm/errors.hpp>
#include <aimm/market_model.hpp>

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

namespace aimm {

struct DiscountPillar {
    double maturity = 0.0;
    double df = 1.0;
    bool operator==(const DiscountPillar&) const = default;
};

/// Black vol of the caplet on F^{2k}; `expiry` is its fixing date T_{2k-1}.
struct CapletVolQuote {
    double expiry = 0.0;
    double strike = 0.0;
    double vol = 0.0;
    bool operator==(const CapletVolQuote&) const = default;
};

struct ZciisQuote {
    int years = 1;
    double rate = 0.0;
    bool operator==(const ZciisQuote&) const = default;
};

/// Annual inflation caplet/floorlet on F_I(T_{2y}, T_{2y-2}, T_{2y}), price in bp of notional.
struct InflationOptionQuote {
    double maturity = 1.0;
    double strike = 0.0;
    bool caplet = true;
    double price_bp = 0.0;
    bool operator==(const InflationOptionQuote&) const = default;
};

struct MarketSnapshot {
    std::string as_of;
    std::vector<DiscountPillar> discounts;
    std::vector<CapletVolQuote> caplet_vols;
    std::vector<ZciisQuote> zciis;
    std::vector<InflationOptionQuote> infl_options;

    bool nominal_only() const noexcept { return zciis.empty() && infl_options.empty(); }

    /// Tenor implied by the discount pillars T_1..T_N.
    TenorStructure tenor() const {
        if (discounts.size() < 2) throw ValidationError("snapshot needs at least two discount pillars");
        TenorStructure t{discounts.front().maturity, static_cast<int>(discounts.size())};
        return t;
    }

    double df(int k) const { return k == 0 ? 1.0 : discounts.at(k - 1).df; }

    bool operator==(const MarketSnapshot&) const = default;
};

namespace detail {

inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::string trim(const std::string& s) {
    const char* ws = " \t\r\n";
    auto a = s.find_first_not_of(ws);
    if (a == std::string::npos) return {};
    return s.substr(a, s.find_last_not_of(ws) - a + 1);
}

inline std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) out.push_back(trim(cell));
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

/// Rows of a CSV file keyed by column name. Lines starting with '#' and blank lines are skipped.
struct CsvTable {
    std::string path;
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    std::vector<int> line_numbers;

    std::size_t column(const std::string& name) const {
        auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end()) throw SchemaError(path + ": missing column '" + name + "'");
        return static_cast<std::size_t>(it - header.begin());
    }

    std::string where(std::size_t row) const {
        return path + ":" + std::to_string(line_numbers[row]);
    }

    double number(std::size_t row, const std::string& name) const {
        const std::string& cell = rows[row].at(column(name));
        char* end = nullptr;
        double v = std::strtod(cell.c_str(), &end);
        if (cell.empty() || *end != '\0' || !std::isfinite(v))
            throw SchemaError(where(row) + ": column '" + name + "' is not a number: '" + cell + "'");
        return v;
    }

    std::string text(std::size_t row, const std::string& name) const { return rows[row].at(column(name)); }
};

inline CsvTable read_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    CsvTable t;
    t.path = path.string();
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string s = trim(line);
        if (s.empty() || s[0] == '#') continue;
        auto cells = split_csv(s);
        if (t.header.empty()) {
            t.header = cells;
            continue;
        }
        if (cells.size() != t.header.size())
            throw SchemaError(t.path + ":" + std::to_string(lineno) + ": expected " +
                              std::to_string(t.header.size()) + " fields, got " +
                              std::to_string(cells.size()));
        t.rows.push_back(std::move(cells));
        t.line_numbers.push_back(lineno);
    }
    if (t.header.empty()) throw SchemaError(t.path + ": empty file");
    return t;
}

inline bool on_grid(double t, double delta) {
    double k = std::round(t / delta);
    return k >= 1 && std::abs(t - k * delta) <= 1e-9 * std::max(1.0, t);
}

} // namespace detail

/// Invariant violations of a snapshot, empty when valid.
inline std::vector<std::string> snapshot_issues(const MarketSnapshot& s) {
    std::vector<std::string> out;
    if (s.discounts.size() < 2) {
        out.push_back("discounts: need at least two pillars");
        return out;
    }
    const double delta = s.discounts.front().maturity;
    if (!(delta > 0)) out.push_back("discounts: first maturity must be > 0");
    for (std::size_t i = 0; i < s.discounts.size(); ++i) {
        const auto& p = s.discounts[i];
        const std::string at = "discount pillar " + std::to_string(i + 1) + " (T=" +
                               detail::format_double(p.maturity) + ")";
        if (std::abs(p.maturity - (i + 1) * delta) > 1e-9 * std::max(1.0, p.maturity))
            out.push_back(at + ": maturity is not tenor date " + std::to_string(i + 1));
        if (!(p.df > 0 && p.df <= 1)) out.push_back(at + ": df outside (0,1]");
        if (i > 0 && !(p.df < s.discounts[i - 1].df))
            out.push_back(at + ": discount factors must be strictly decreasing (negative forward rate)");
    }
    if (s.discounts.size() % 2 != 0) out.push_back("discounts: need an even number of semiannual pillars");
    const double T = s.discounts.back().maturity;
    const int years = static_cast<int>(s.discounts.size()) / 2;

    std::map<double, double> last_strike;
    for (std::size_t i = 0; i < s.caplet_vols.size(); ++i) {
        const auto& q = s.caplet_vols[i];
        const std::string at = "caplet vol row " + std::to_string(i + 1);
        double kk = std::round((q.expiry / delta + 1.0) / 2.0);
        if (!(kk >= 1 && kk <= years) || std::abs(q.expiry - (2 * kk - 1) * delta) > 1e-9)
            out.push_back(at + ": expiry must be a fixing date T_{2k-1} inside the tenor");
        if (!(q.vol > 0)) out.push_back(at + ": vol must be > 0");
        if (!(q.strike > -1.0 / delta)) out.push_back(at + ": strike must exceed -1/delta");
        auto it = last_strike.find(q.expiry);
        if (it != last_strike.end() && !(q.strike > it->second))
            out.push_back(at + ": strikes must be strictly increasing per expiry");
        last_strike[q.expiry] = q.strike;
    }
    for (std::size_t i = 0; i < s.zciis.size(); ++i) {
        const auto& z = s.zciis[i];
        const std::string at = "zciis row " + std::to_string(i + 1);
        if (z.years != static_cast<int>(i) + 1) out.push_back(at + ": years must run 1, 2, ... consecutively");
        if (z.years > years) out.push_back(at + ": maturity beyond the discount curve");
        if (!(z.rate > -1)) out.push_back(at + ": rate must exceed -1");
    }
    std::map<double, double> last_infl;
    for (std::size_t i = 0; i < s.infl_options.size(); ++i) {
        const auto& q = s.infl_options[i];
        const std::string at = "inflation option row " + std::to_string(i + 1);
        if (std::abs(q.maturity - std::round(q.maturity)) > 1e-9 || q.maturity < 1 || q.maturity > T + 1e-9)
            out.push_back(at + ": maturity must be a whole year inside the tenor");
        if (!(q.price_bp >= 0)) out.push_back(at + ": price must be >= 0");
        if (!(q.strike > -1.0)) out.push_back(at + ": strike must exceed -1");
        auto it = last_infl.find(q.maturity);
        if (it != last_infl.end() && !(q.strike >= it->second))
            out.push_back(at + ": strikes must be sorted per maturity");
        last_infl[q.maturity] = q.strike;
        if (static_cast<int>(std::round(q.maturity)) > static_cast<int>(s.zciis.size()))
            out.push_back(at + ": no ZCIIS pillar for this maturity");
    }
    return out;
}

inline void validate_snapshot(const MarketSnapshot& s) {
    auto issues = snapshot_issues(s);
    if (!issues.empty()) throw ValidationError(issues.front());
}

/// Loads and validates the snapshot described by a manifest
///   {"asOf": "...", "discounts": "discounts.csv", "caplet_vols": "...",
///    "zciis": "...", "infl_options": "..."}
/// Paths are relative to the manifest. The inflation entries are optional.
inline MarketSnapshot load_snapshot(const std::filesystem::path& manifest_path) {
    namespace fs = std::filesystem;
    std::ifstream in(manifest_path);
    if (!in) throw IoError("cannot open " + manifest_path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(manifest_path.string() + ": " + e.what());
    }
    const fs::path dir = manifest_path.parent_path();
    auto path_of = [&](const char* key) -> std::optional<fs::path> {
        if (!j.contains(key) || j[key].is_null()) return std::nullopt;
        if (!j[key].is_string()) throw SchemaError(std::string("manifest field '") + key + "' must be a string");
        return dir / j[key].get<std::string>();
    };

    MarketSnapshot s;
    if (!j.contains("asOf") || !j["asOf"].is_string()) throw SchemaError("manifest needs string field 'asOf'");
    s.as_of = j["asOf"].get<std::string>();

    auto disc = path_of("discounts");
    if (!disc) throw SchemaError("manifest needs field 'discounts'");
    auto t = detail::read_csv(*disc);
    for (std::size_t r = 0; r < t.rows.size(); ++r)
        s.discounts.push_back({t.number(r, "maturity_yr"), t.number(r, "df")});

    if (auto p = path_of("caplet_vols")) {
        auto c = detail::read_csv(*p);
        for (std::size_t r = 0; r < c.rows.size(); ++r)
            s.caplet_vols.push_back({c.number(r, "expiry_yr"), c.number(r, "strike"), c.number(r, "vol")});
    }
    if (auto p = path_of("zciis"); p && fs::exists(*p)) {
        auto z = detail::read_csv(*p);
        for (std::size_t r = 0; r < z.rows.size(); ++r) {
            double y = z.number(r, "years");
            if (y != std::round(y)) throw SchemaError(z.where(r) + ": years must be an integer");
            s.zciis.push_back({static_cast<int>(y), z.number(r, "rate")});
        }
    }
    if (auto p = path_of("infl_options"); p && fs::exists(*p)) {
        auto o = detail::read_csv(*p);
        for (std::size_t r = 0; r < o.rows.size(); ++r) {
            std::string kind = o.text(r, "kind");
            std::transform(kind.begin(), kind.end(), kind.begin(), ::tolower);
            if (kind != "caplet" && kind != "floorlet")
                throw SchemaError(o.where(r) + ": kind must be caplet or floorlet");
            s.infl_options.push_back(
                {o.number(r, "maturity_yr"), o.number(r, "strike"), kind == "caplet", o.number(r, "price_bp")});
        }
    }
    validate_snapshot(s);
    return s;
}

/// Writes the manifest and CSV files with 17 significant digits.
inline void write_snapshot(const MarketSnapshot& s, const std::filesystem::path& dir) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(dir, ec);
    auto open = [&](const char* name) {
        std::ofstream f(dir / name);
        if (!f) throw IoError("cannot write " + (dir / name).string());
        return f;
    };
    using detail::format_double;
    {
        auto f = open("discounts.csv");
        f << "maturity_yr,df\n";
        for (const auto& p : s.discounts) f << format_double(p.maturity) << ',' << format_double(p.df) << '\n';
    }
    {
        auto f = open("caplet_vols.csv");
        f << "expiry_yr,strike,vol\n";
        for (const auto& q : s.caplet_vols)
            f << format_double(q.expiry) << ',' << format_double(q.strike) << ',' << format_double(q.vol) << '\n';
    }
    nlohmann::ordered_json j;
    j["asOf"] = s.as_of;
    j["discounts"] = "discounts.csv";
    j["caplet_vols"] = "caplet_vols.csv";
    if (!s.nominal_only()) {
        auto z = open("zciis.csv");
        z << "years,rate\n";
        for (const auto& q : s.zciis) z << q.years << ',' << format_double(q.rate) << '\n';
        auto o = open("infl_options.csv");
        o << "maturity_yr,strike,kind,price_bp\n";
        for (const auto& q : s.infl_options)
            o << format_double(q.maturity) << ',' << format_double(q.strike) << ','
              << (q.caplet ? "caplet" : "floorlet") << ',' << format_double(q.price_bp) << '\n';
        j["zciis"] = "zciis.csv";
        j["infl_options"] = "infl_options.csv";
    }
    auto m = open("snapshot.json");
    m << j.dump(2) << '\n';
}

struct IlbPillar {
    double maturity = 0.0;
    double forward_cpi = 1.0;  // ℐ(0,T_k)
    double ratio = 1.0;        // P_ILB(0,T_k)/P(0,T)
};

/// Forward CPI and normalized ILB prices on every tenor date: annual pillars
/// (1 + K_y)^y from the ZCIIS curve, odd dates by log-linear interpolation
/// with ℐ(0,T_0) = 1.
inline std::vector<IlbPillar> ilb_curve(const MarketSnapshot& s) {
    const TenorStructure tenor = s.tenor();
    if (static_cast<int>(s.zciis.size()) < tenor.years())
        throw ValidationError("ILB curve needs ZCIIS pillars for every year 1.." + std::to_string(tenor.years()));
    std::vector<double> log_cpi(tenor.N + 1, 0.0);
    for (int y = 1; y <= tenor.years(); ++y) log_cpi[2 * y] = y * std::log1p(s.zciis[y - 1].rate);
    for (int y = 1; y <= tenor.years(); ++y) log_cpi[2 * y - 1] = 0.5 * (log_cpi[2 * y - 2] + log_cpi[2 * y]);
    const double PT = s.df(tenor.N);
    std::vector<IlbPillar> out;
    for (int k = 1; k <= tenor.N; ++k) {
        double I = std::exp(log_cpi[k]);
        out.push_back({tenor.date(k), I, I * s.df(k) / PT});
    }
    return out;
}

} // namespace aimm

#endif // AIMM_MARKET_DATA_HPP
