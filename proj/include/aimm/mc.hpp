#ifndef AIMM_MC_HPP
#define AIMM_MC_HPP

// Monte Carlo simulation of the driving process under Q^T, with exact
// reweighting to the T_k-forward measures. Used as an independent check of
// the transform formulas and the Fourier prices.
//
// CIR kinds: full-truncation Euler on a uniform grid. OU kinds: exact
// transition between consecutive observation dates. Compound Poisson jumps:
// Poisson count per step, uniform arrival times, exponential marks.

#include <aimm/affine.hpp>
#include <aimm/fourier.hpp>
#include <aimm/market_model.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <functional>
#include <random>
#include <set>
#include <span>
#include <thread>
#include <vector>

namespace aimm {

struct SimulationPlan {
    std::size_t paths = 100'000;
    int steps_per_year = 64;
    std::uint64_t seed = 1;
    std::size_t block_size = 8192;
    bool antithetic = false;
};

/// splitmix64 finalizer, used to derive independent per-block seeds.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

/// Worker threads: AIMM_THREADS if set, else hardware concurrency.
inline unsigned worker_threads() {
    unsigned n = std::max(1u, std::thread::hardware_concurrency());
    if (const char* env = std::getenv("AIMM_THREADS")) {
        long v = std::strtol(env, nullptr, 10);
        if (v >= 1) n = std::min<unsigned>(n, static_cast<unsigned>(v));
    }
    return n;
}

/// States of a block of paths at the observation times, laid out
/// [path][time][component].
struct PathBlock {
    std::size_t paths = 0, times = 0, dim = 0;
    std::vector<double> data;

    std::span<const double> state(std::size_t p, std::size_t t) const {
        return {data.data() + (p * times + t) * dim, dim};
    }
    double& at(std::size_t p, std::size_t t, std::size_t i) { return data[(p * times + t) * dim + i]; }
};

namespace detail {

class ComponentStepper {
public:
    ComponentStepper(const AffineComponent& c, std::mt19937_64& rng) : c_(c), rng_(rng) {}

    /// Advances x (the internal state, possibly negative under full truncation) by dt.
    double step(double x, double dt, double z) {
        if (c_.kind == ProcessKind::OuJump) {
            const double e = std::exp(-c_.lambda * dt);
            const double sd = c_.sigma * std::sqrt(-std::expm1(-2.0 * c_.lambda * dt) / (2.0 * c_.lambda));
            double y = c_.theta + (x - c_.theta) * e + sd * z;
            y += jumps(c_.lambda * c_.beta_plus * dt, c_.alpha_plus, dt);
            y -= jumps(c_.lambda * c_.beta_minus * dt, c_.alpha_minus, dt);
            return y;
        }
        const double xp = std::max(x, 0.0);
        double y = x - c_.lambda * (xp - c_.theta) * dt + 2.0 * c_.eta * std::sqrt(xp * dt) * z;
        if (c_.kind == ProcessKind::CirJump) y += jumps(c_.lambda * c_.beta * dt, c_.alpha, dt);
        return y;
    }

    double observe(double x) const { return c_.nonnegative() ? std::max(x, 0.0) : x; }

private:
    // Sum of jump sizes arriving in a step, each decayed from its arrival time to the step end.
    double jumps(double mean_count, double alpha, double dt) {
        if (mean_count <= 0.0) return 0.0;
        std::poisson_distribution<int> count(mean_count);
        int n = count(rng_);
        double total = 0.0;
        for (int i = 0; i < n; ++i) {
            double tau = dt * unif_(rng_);
            double size = exp_(rng_) / alpha;
            total += size * std::exp(-c_.lambda * (dt - tau));
        }
        return total;
    }

    const AffineComponent& c_;
    std::mt19937_64& rng_;
    std::uniform_real_distribution<double> unif_{0.0, 1.0};
    std::exponential_distribution<double> exp_{1.0};
};

inline void simulate_block(const ProductProcess& p, const SimulationPlan& plan, std::span<const double> times,
                           std::size_t block_index, std::size_t n, PathBlock& out) {
    const std::size_t d = p.dim(), nt = times.size();
    out.paths = n;
    out.times = nt;
    out.dim = d;
    out.data.assign(n * nt * d, 0.0);
    std::mt19937_64 rng(splitmix64(plan.seed ^ splitmix64(block_index)));
    std::normal_distribution<double> normal(0.0, 1.0);
    for (std::size_t i = 0; i < d; ++i) {
        const AffineComponent& c = p[i];
        ComponentStepper stepper(c, rng);
        // Step sizes between observation dates.
        std::vector<std::vector<double>> steps(nt);
        double prev = 0.0;
        for (std::size_t t = 0; t < nt; ++t) {
            const double span = times[t] - prev;
            int m = 1;
            if (c.nonnegative() && span > 0) m = std::max(1, static_cast<int>(std::ceil(span * plan.steps_per_year - 1e-9)));
            if (span > 0) steps[t].assign(m, span / m);
            prev = times[t];
        }
        const bool anti = plan.antithetic;
        for (std::size_t path = 0; path < n; path += anti ? 2 : 1) {
            double x = c.x0, xa = c.x0;
            for (std::size_t t = 0; t < nt; ++t) {
                for (double dt : steps[t]) {
                    double z = normal(rng);
                    x = stepper.step(x, dt, z);
                    if (anti) xa = stepper.step(xa, dt, -z);
                }
                out.at(path, t, i) = stepper.observe(x);
                if (anti && path + 1 < n) out.at(path + 1, t, i) = stepper.observe(xa);
            }
        }
    }
}

} // namespace detail

/// Simulates `plan.paths` paths observed at the sorted `times` and calls
/// `visit(block_index, block)` for each block. Blocks run on worker threads;
/// visits are made in block order from the calling thread.
inline void simulate_blocks(const ProductProcess& p, const SimulationPlan& plan, std::span<const double> times,
                            const std::function<void(std::size_t, const PathBlock&)>& visit) {
    if (!std::is_sorted(times.begin(), times.end()) || (!times.empty() && times.front() < 0))
        throw ValidationError("observation times must be sorted and nonnegative");
    const std::size_t bs = std::max<std::size_t>(2, plan.block_size & ~std::size_t(1));
    const std::size_t nblocks = (plan.paths + bs - 1) / bs;
    const unsigned nthreads = std::min<unsigned>(worker_threads(), static_cast<unsigned>(std::max<std::size_t>(1, nblocks)));
    auto block_paths = [&](std::size_t b) { return std::min(bs, plan.paths - b * bs); };
    if (nthreads <= 1) {
        PathBlock blk;
        for (std::size_t b = 0; b < nblocks; ++b) {
            detail::simulate_block(p, plan, times, b, block_paths(b), blk);
            visit(b, blk);
        }
        return;
    }
    for (std::size_t b0 = 0; b0 < nblocks; b0 += nthreads) {
        std::size_t nb = std::min<std::size_t>(nthreads, nblocks - b0);
        std::vector<PathBlock> blks(nb);
        std::vector<std::thread> pool;
        for (std::size_t t = 0; t < nb; ++t)
            pool.emplace_back([&, t] { detail::simulate_block(p, plan, times, b0 + t, block_paths(b0 + t), blks[t]); });
        for (auto& th : pool) th.join();
        for (std::size_t t = 0; t < nb; ++t) visit(b0 + t, blks[t]);
    }
}

/// All paths in memory; for moderate path counts.
struct PathEnsemble {
    std::vector<double> times;
    PathBlock states;

    std::size_t paths() const noexcept { return states.paths; }
    std::span<const double> state(std::size_t p, std::size_t t) const { return states.state(p, t); }
};

inline PathEnsemble simulate(const ProductProcess& p, const SimulationPlan& plan, std::span<const double> times) {
    PathEnsemble ens;
    ens.times.assign(times.begin(), times.end());
    ens.states.times = times.size();
    ens.states.dim = p.dim();
    simulate_blocks(p, plan, times, [&](std::size_t, const PathBlock& b) {
        ens.states.data.insert(ens.states.data.end(), b.data.begin(), b.data.end());
        ens.states.paths += b.paths;
    });
    return ens;
}

/// Density dQ^{T_k}/dQ^T restricted to F_{T_k} evaluated on states at T_k.
class ForwardMeasureWeight {
public:
    ForwardMeasureWeight(const ModelConfig& cfg, int k) {
        const std::size_t d = cfg.dim();
        CVec psi(d);
        phi_ = cfg.process().apply(cfg.horizon() - cfg.date(k), cfg.uc(k), psi, "forward-measure weight").real();
        for (const auto& z : psi) psi_.push_back(z.real());
        log_m0_ = std::log(martingale(cfg, cfg.uc(k), cfg.initial_state()).real());
    }

    double operator()(std::span<const double> x_Tk) const {
        double s = phi_ - log_m0_;
        for (std::size_t i = 0; i < psi_.size(); ++i) s += psi_[i] * x_Tk[i];
        return std::exp(s);
    }

private:
    double phi_ = 0.0, log_m0_ = 0.0;
    std::vector<double> psi_;
};

/// Weights w_p = M_{T_k}^{u_k}(X_p) / M_0^{u_k} for the states at observation index `t_index` (= T_k).
inline std::vector<double> reweight_to_forward_measure(const PathEnsemble& ens, const ModelConfig& cfg, int k,
                                                       std::size_t t_index) {
    if (std::abs(ens.times.at(t_index) - cfg.date(k)) > 1e-12)
        throw ValidationError("reweighting needs the states at T_k");
    ForwardMeasureWeight w(cfg, k);
    std::vector<double> out(ens.paths());
    for (std::size_t p = 0; p < ens.paths(); ++p) out[p] = w(ens.state(p, t_index));
    return out;
}

struct McEstimate {
    double value = 0.0;
    double stderr_ = 0.0;
};

/// Running mean and standard error.
class MeanAccumulator {
public:
    void add(double v) {
        ++n_;
        double d = v - mean_;
        mean_ += d / n_;
        m2_ += d * (v - mean_);
    }
    std::size_t count() const noexcept { return n_; }
    McEstimate estimate(double scale = 1.0) const {
        double var = n_ > 1 ? m2_ / (n_ - 1) : 0.0;
        return {scale * mean_, std::abs(scale) * std::sqrt(var / std::max<std::size_t>(n_, 1))};
    }

private:
    std::size_t n_ = 0;
    double mean_ = 0.0, m2_ = 0.0;
};

/// discount * mean(weights * payoffs) with its standard error.
inline McEstimate mc_price(std::span<const double> payoffs, std::span<const double> weights, double discount) {
    MeanAccumulator acc;
    for (std::size_t i = 0; i < payoffs.size(); ++i) acc.add(payoffs[i] * (weights.empty() ? 1.0 : weights[i]));
    return acc.estimate(discount);
}

/// Option strip for the MC pricer: kind, payment index k, lag j, strikes.
struct McInstrument {
    OptionKind kind = OptionKind::CpiCall;
    int k = 2;
    int j = 2;
    std::vector<double> strikes;
};

/// Components an instrument's payoff and forward-measure density load.
inline std::vector<std::size_t> loaded_components(const ModelConfig& cfg, const McInstrument& ins) {
    std::set<std::size_t> idx;
    auto add_nonzero = [&](const CVec& b) {
        for (std::size_t i = 0; i < b.size(); ++i)
            if (b[i] != cplx(0.0)) idx.insert(i);
    };
    switch (ins.kind) {
    case OptionKind::CpiCall:
    case OptionKind::CpiPut: add_nonzero(log_cpi_loading(cfg, ins.k).B); break;
    case OptionKind::InflCaplet:
    case OptionKind::InflFloorlet:
        add_nonzero(log_cpi_loading(cfg, ins.k).B);
        add_nonzero(log_cpi_loading(cfg, ins.k - ins.j).B);
        break;
    case OptionKind::IrCaplet:
    case OptionKind::IrFloorlet: add_nonzero(ab_pair(cfg, cfg.date(ins.k - 1), cfg.uc(ins.k - 1), cfg.uc(ins.k)).B); break;
    }
    // The product process needs a nonnegative component; X0 always qualifies.
    idx.insert(0);
    return {idx.begin(), idx.end()};
}

/// Monte Carlo prices of option strips. Each strip is simulated on the
/// components it loads (exact in law by independence), reweighted to
/// Q^{T_k}, and discounted with the full model's P(0,T_k).
inline std::vector<std::vector<McEstimate>> mc_price_options(const ModelConfig& cfg,
                                                             std::span<const McInstrument> instruments,
                                                             const SimulationPlan& plan) {
    std::vector<std::vector<McEstimate>> out;
    const StateVector s0 = cfg.initial_state();
    for (std::size_t n = 0; n < instruments.size(); ++n) {
        const McInstrument& ins = instruments[n];
        const auto comps = loaded_components(cfg, ins);
        const ModelConfig sub = cfg.restrict(comps);
        const int k = ins.k;
        const bool rate = ins.kind == OptionKind::IrCaplet || ins.kind == OptionKind::IrFloorlet;
        const bool yoy = ins.kind == OptionKind::InflCaplet || ins.kind == OptionKind::InflFloorlet;
        // Underlying log Y = A + B . X_{t_fix} (- B' . X_{t_start} for year-on-year).
        AffinePair main, start{0.0, CVec(sub.dim(), 0.0)};
        double t_fix = cfg.date(k), t_start = 0.0, accrual = 1.0;
        if (rate) {
            t_fix = cfg.date(k - 1);
            main = ab_pair(sub, t_fix, sub.uc(k - 1), sub.uc(k));
            accrual = cfg.date(k) - cfg.date(k - 1);
        } else {
            main = log_cpi_loading(sub, k);
            if (yoy) {
                start = log_cpi_loading(sub, k - ins.j);
                t_start = cfg.date(k - ins.j);
                accrual = cfg.date(k) - t_start;
            }
        }
        std::vector<double> times{t_start, t_fix, cfg.date(k)};
        std::sort(times.begin(), times.end());
        times.erase(std::unique(times.begin(), times.end()), times.end());
        auto index_of = [&](double t) {
            return static_cast<std::size_t>(std::find(times.begin(), times.end(), t) - times.begin());
        };
        const std::size_t i_start = index_of(t_start), i_fix = index_of(t_fix), i_pay = index_of(cfg.date(k));
        std::vector<double> eff;
        for (double K : ins.strikes) eff.push_back((rate || yoy) ? 1.0 + accrual * K : K);
        const bool call = is_call(ins.kind);
        ForwardMeasureWeight weight(sub, k);
        std::vector<MeanAccumulator> acc(eff.size());
        simulate_blocks(sub.process(), plan, times, [&](std::size_t, const PathBlock& b) {
            for (std::size_t p = 0; p < b.paths; ++p) {
                double logy = (main.A - start.A).real();
                auto xf = b.state(p, i_fix);
                auto xs = b.state(p, i_start);
                for (std::size_t i = 0; i < sub.dim(); ++i) logy += main.B[i].real() * xf[i] - start.B[i].real() * xs[i];
                const double y = std::exp(logy), w = weight(b.state(p, i_pay));
                for (std::size_t s = 0; s < eff.size(); ++s)
                    acc[s].add(w * (call ? std::max(y - eff[s], 0.0) : std::max(eff[s] - y, 0.0)));
            }
        });
        const double P = bond_price(cfg, k, s0);
        std::vector<McEstimate> row;
        for (auto& a : acc) row.push_back(a.estimate(P));
        out.push_back(std::move(row));
    }
    return out;
}

/// NPV (per unit notional, receiver of floating) of an annual YYIIS paying
/// F_I(T_{2y}, T_{2y-2}, T_{2y}) against `fixed_rate`, by simulation.
inline McEstimate mc_yyiis_npv(const ModelConfig& cfg, int years, double fixed_rate, const SimulationPlan& plan) {
    // Each leg is priced under its own payment measure; the combined estimator
    // sums per-path contributions so that the standard error accounts for correlation.
    std::vector<double> times;
    for (int y = 0; y <= years; ++y) times.push_back(cfg.date(2 * y));
    std::vector<ForwardMeasureWeight> weights;
    std::vector<AffinePair> loads;
    std::vector<double> P;
    const StateVector s0 = cfg.initial_state();
    for (int y = 1; y <= years; ++y) {
        weights.emplace_back(cfg, 2 * y);
        P.push_back(bond_price(cfg, 2 * y, s0));
    }
    for (int y = 0; y <= years; ++y) loads.push_back(log_cpi_loading(cfg, 2 * y));
    MeanAccumulator acc;
    simulate_blocks(cfg.process(), plan, times, [&](std::size_t, const PathBlock& b) {
        for (std::size_t p = 0; p < b.paths; ++p) {
            std::vector<double> logI(years + 1);
            for (int y = 0; y <= years; ++y) {
                double s = loads[y].A.real();
                auto x = b.state(p, y);
                for (std::size_t i = 0; i < cfg.dim(); ++i) s += loads[y].B[i].real() * x[i];
                logI[y] = s;
            }
            double v = 0.0;
            for (int y = 1; y <= years; ++y) {
                double fl = std::exp(logI[y] - logI[y - 1]) - 1.0;
                v += P[y - 1] * weights[y - 1](b.state(p, y)) * (fl - fixed_rate);
            }
            acc.add(v);
        }
    });
    return acc.estimate();
}

} // namespace aimm

#endif // AIMM_MC_HPP
