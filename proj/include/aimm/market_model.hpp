#ifndef AIMM_MARKET_MODEL_HPP
#define AIMM_MARKET_MODEL_HPP

// Affine inflation market model on a semiannual tenor structure.
//
// Normalized bond prices are exponential-affine martingales under the
// terminal measure Q^T:
//
//     P(t,T_k)/P(t,T)     = M_t^{u_k}
//     P_ILB(t,T_k)/P(t,T) = M_t^{v_k}
//     M_t^w               = exp(phi_{T-t}(w) + psi_{T-t}(w) . X_t)
//
// Everything else (forward rates, forward CPI, forward inflation, swap rates,
// moment generating functions under the T_k-forward measures) is derived
// from the pair of parameter sequences (u_k), (v_k).

#include <aimm/affine.hpp>

#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace aimm {

using CVec = std::vector<cplx>;

struct TenorStructure {
    double delta = 0.5;
    int N = 20;

    double date(int k) const noexcept { return k * delta; }
    double horizon() const noexcept { return date(N); }
    int years() const noexcept { return N / 2; }

    std::string check() const {
        if (!(delta > 0)) return "tenor accrual must be > 0";
        if (N < 2) return "tenor needs N >= 2";
        if (N % 2 != 0) return "tenor needs an even number of dates";
        return {};
    }

    bool operator==(const TenorStructure&) const = default;
};

/// The 4N scalars behind the structured u_k / v_k layout: a common-factor
/// loading and an individual loading for each of the nominal and inflation
/// sequences. Index k-1 holds the value for tenor date T_k.
struct ParameterGenerators {
    std::vector<double> utilde, ubar, vtilde, vbar;

    bool operator==(const ParameterGenerators&) const = default;
};

/// Model state at time t. `numeraire` is P(t,T) when known (t = 0), otherwise
/// 1 so that prices come out in units of the numeraire bond.
struct StateVector {
    double t = 0.0;
    std::vector<double> x;
    double numeraire = 1.0;
};

namespace detail {

inline int ceil_half(int k) { return (k + 1) / 2; }

inline cplx dot(std::span<const cplx> a, std::span<const double> x) {
    cplx s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        if (a[i] != cplx(0.0)) s += a[i] * x[i];
    return s;
}

inline CVec sub(std::span<const cplx> a, std::span<const cplx> b) {
    CVec r(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[i] - b[i];
    return r;
}

inline CVec add(std::span<const cplx> a, std::span<const cplx> b) {
    CVec r(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[i] + b[i];
    return r;
}

inline CVec scale(cplx s, std::span<const cplx> a) {
    CVec r(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) r[i] = s * a[i];
    return r;
}

} // namespace detail

/// Driving process, tenor, and the parameter vectors u_1..u_N, v_1..v_N.
///
/// With generators the vectors follow the block layout
///
///     u_k = ut_k e0 + ub_k e_{ceil(k/2)} + sum_{l > ceil(k/2)} ub_{2l-1} e_l
///     v_k = vt_k e0 + (nominal part of u_k) + vb_k e_{M + ceil(k/2)}
///
/// over components (X0 | X1..XM nominal | X(M+1)..X(2M) inflation).
class ModelConfig {
public:
    ModelConfig() = default;

    /// Explicit u/v vectors (any process layout).
    ModelConfig(ProductProcess process, TenorStructure tenor, std::vector<std::vector<double>> u,
                std::vector<std::vector<double>> v, double numeraire_discount = 1.0)
        : process_(std::move(process)), tenor_(tenor), u_(std::move(u)), v_(std::move(v)),
          numeraire_discount_(numeraire_discount) {
        std::string why = tenor_.check();
        if (!why.empty()) throw ValidationError(why);
        if (static_cast<int>(u_.size()) != tenor_.N || static_cast<int>(v_.size()) != tenor_.N)
            throw ValidationError("need exactly N parameter vectors u_k and v_k");
        for (const auto& w : u_)
            if (w.size() != process_.dim()) throw ValidationError("u_k has wrong dimension");
        for (const auto& w : v_)
            if (w.size() != process_.dim()) throw ValidationError("v_k has wrong dimension");
        if (std::abs(process_.horizon() - tenor_.horizon()) > 1e-12)
            throw ValidationError("process horizon differs from tenor horizon");
    }

    /// Block-structured layout; the process has 1+M (nominal only) or 1+2M components.
    static ModelConfig from_generators(ProductProcess process, TenorStructure tenor,
                                       ParameterGenerators gen, double numeraire_discount = 1.0) {
        const int N = tenor.N, M = tenor.years();
        const std::size_t d = process.dim();
        if (d != static_cast<std::size_t>(1 + M) && d != static_cast<std::size_t>(1 + 2 * M))
            throw ValidationError("structured model needs 1+M or 1+2M components, got " +
                                  std::to_string(d));
        for (auto* g : {&gen.utilde, &gen.ubar, &gen.vtilde, &gen.vbar})
            if (g->empty()) g->assign(N, 0.0);
        for (auto* g : {&gen.utilde, &gen.ubar, &gen.vtilde, &gen.vbar})
            if (static_cast<int>(g->size()) != N)
                throw ValidationError("generator sequences need N entries");
        const bool inflation = d == static_cast<std::size_t>(1 + 2 * M);
        std::vector<std::vector<double>> u(N, std::vector<double>(d, 0.0)), v = u;
        for (int k = 1; k <= N; ++k) {
            auto& uk = u[k - 1];
            auto& vk = v[k - 1];
            const int c = detail::ceil_half(k);
            uk[0] = gen.utilde[k - 1];
            uk[c] = gen.ubar[k - 1];
            for (int l = c + 1; l <= M; ++l) uk[l] = gen.ubar[2 * l - 2];
            vk = uk;
            if (inflation) {
                vk[0] = gen.vtilde[k - 1];
                vk[M + c] = gen.vbar[k - 1];
            }
        }
        ModelConfig cfg(std::move(process), tenor, std::move(u), std::move(v), numeraire_discount);
        cfg.generators_ = std::move(gen);
        return cfg;
    }

    const ProductProcess& process() const noexcept { return process_; }
    const TenorStructure& tenor() const noexcept { return tenor_; }
    const std::optional<ParameterGenerators>& generators() const noexcept { return generators_; }
    double numeraire_discount() const noexcept { return numeraire_discount_; }
    double horizon() const noexcept { return tenor_.horizon(); }
    int N() const noexcept { return tenor_.N; }
    int M() const noexcept { return tenor_.years(); }
    std::size_t dim() const noexcept { return process_.dim(); }
    bool has_inflation() const noexcept {
        return !generators_ || process_.dim() == static_cast<std::size_t>(1 + 2 * M());
    }

    /// u_k, v_k for k = 1..N; u_0 is not a model vector.
    const std::vector<double>& u(int k) const { return u_.at(k - 1); }
    const std::vector<double>& v(int k) const { return v_.at(k - 1); }
    CVec uc(int k) const { return to_complex(u(k)); }
    CVec vc(int k) const { return to_complex(v(k)); }
    double date(int k) const noexcept { return tenor_.date(k); }

    StateVector initial_state() const {
        return StateVector{0.0, process_.initial_state(), numeraire_discount_};
    }

    /// Invariant violations, empty when the configuration is admissible.
    std::vector<std::string> issues() const {
        std::vector<std::string> out;
        const std::size_t d = dim();
        DomainBound dom = process_.domain_bound(horizon());
        auto name = [](const char* s, int k) { return std::string(s) + "_" + std::to_string(k); };
        for (int k = 1; k <= N(); ++k) {
            const auto& uk = u(k);
            for (std::size_t i = 0; i < d; ++i) {
                if (!std::isfinite(uk[i]) || !std::isfinite(v(k)[i])) {
                    out.push_back(name("u/v", k) + " has non-finite entries");
                    break;
                }
                if (process_[i].nonnegative() && uk[i] < 0)
                    out.push_back(name("u", k) + " is negative at component " + std::to_string(i));
                if (!process_[i].nonnegative() && uk[i] != 0)
                    out.push_back(name("u", k) + " loads real-valued component " + std::to_string(i));
                if (k > 1 && uk[i] > u(k - 1)[i])
                    out.push_back(name("u", k) + " exceeds u_" + std::to_string(k - 1) +
                                  " at component " + std::to_string(i) + " (negative forward rate)");
            }
            if (!dom.contains(uc(k))) out.push_back(name("u", k) + " outside the admissible domain");
            if (!dom.contains(vc(k))) out.push_back(name("v", k) + " outside the admissible domain");
            if (generators_ && has_inflation()) {
                for (int i = 1; i <= M(); ++i)
                    if (v(k)[i] != uk[i])
                        out.push_back(name("v", k) + " differs from u_k on nominal component " +
                                      std::to_string(i));
            }
        }
        if (!(numeraire_discount_ > 0) || numeraire_discount_ > 1.0)
            out.push_back("numeraire discount P(0,T) must lie in (0,1]");
        return out;
    }

    void validate() const {
        auto problems = issues();
        if (!problems.empty()) throw ValidationError("invalid model config: " + problems.front());
    }

    /// Restriction to a subset of components. Exact in law for any quantity
    /// whose loadings vanish (or cancel) outside the subset, since the
    /// components are independent.
    ModelConfig restrict(std::span<const std::size_t> indices) const {
        auto pick = [&](const std::vector<std::vector<double>>& src) {
            std::vector<std::vector<double>> out;
            for (const auto& w : src) {
                std::vector<double> r;
                for (std::size_t i : indices) r.push_back(w.at(i));
                out.push_back(std::move(r));
            }
            return out;
        };
        return ModelConfig(process_.subset(indices), tenor_, pick(u_), pick(v_), numeraire_discount_);
    }

    ModelConfig with_process(ProductProcess p) const {
        ModelConfig c = *this;
        c.process_ = std::move(p);
        return c;
    }

private:
    ProductProcess process_;
    TenorStructure tenor_;
    std::vector<std::vector<double>> u_, v_;
    std::optional<ParameterGenerators> generators_;
    double numeraire_discount_ = 1.0;
};

inline ModelConfig make_model_config(ProductProcess process, TenorStructure tenor,
                                     ParameterGenerators gen, double numeraire_discount = 1.0) {
    ModelConfig cfg = ModelConfig::from_generators(std::move(process), tenor, std::move(gen),
                                                   numeraire_discount);
    cfg.validate();
    return cfg;
}

// ---------------------------------------------------------------------------
// Basic martingales

/// M_t^w = exp(phi_{T-t}(w) + psi_{T-t}(w) . x).
inline cplx martingale(const ModelConfig& cfg, std::span<const cplx> w, const StateVector& s) {
    const double tau = cfg.horizon() - s.t;
    CVec psi(cfg.dim());
    cplx phi = cfg.process().apply(tau, w, psi, "martingale");
    return std::exp(phi + detail::dot(psi, s.x));
}

inline cplx martingale(const ModelConfig& cfg, std::span<const double> w, const StateVector& s) {
    return martingale(cfg, to_complex(w), s);
}

struct AffinePair {
    cplx A;
    CVec B;
};

/// A(t,w1,w2) = phi_{T-t}(w1) - phi_{T-t}(w2), B = psi_{T-t}(w1) - psi_{T-t}(w2).
inline AffinePair ab_pair(const ModelConfig& cfg, double t, std::span<const cplx> w1,
                          std::span<const cplx> w2) {
    const double tau = cfg.horizon() - t;
    CVec p1(cfg.dim()), p2(cfg.dim());
    cplx f1 = cfg.process().apply(tau, w1, p1, "ab_pair");
    cplx f2 = cfg.process().apply(tau, w2, p2, "ab_pair");
    return {f1 - f2, detail::sub(p1, p2)};
}

/// A_I^k, B_I^k: log I(T_k) = A_I^k + B_I^k . X_{T_k}. Index 0 is the
/// deterministic I(T_0) = I(0) = 1.
inline AffinePair log_cpi_loading(const ModelConfig& cfg, int k) {
    if (k == 0) return {0.0, CVec(cfg.dim(), 0.0)};
    return ab_pair(cfg, cfg.date(k), cfg.vc(k), cfg.uc(k));
}

inline double bond_price(const ModelConfig& cfg, int k, const StateVector& s) {
    return s.numeraire * martingale(cfg, cfg.uc(k), s).real();
}

/// Simply compounded forward rate F^k(t) for T_{k-1}..T_k. F^1 is only
/// available at t = 0, where P(0,T_0) = 1.
inline double forward_rate(const ModelConfig& cfg, int k, const StateVector& s) {
    if (k < 1 || k > cfg.N()) throw ValidationError("forward rate index out of range");
    const double delta = cfg.date(k) - cfg.date(k - 1);
    if (k == 1) {
        if (s.t != 0.0) throw ValidationError("F^1 is only defined at t = 0");
        return (1.0 / bond_price(cfg, 1, s) - 1.0) / delta;
    }
    if (s.t > cfg.date(k - 1)) throw ValidationError("forward rate F^k requires t <= T_{k-1}");
    AffinePair ab = ab_pair(cfg, s.t, cfg.uc(k - 1), cfg.uc(k));
    return (std::exp(ab.A + detail::dot(ab.B, s.x)).real() - 1.0) / delta;
}

/// Forward CPI ℐ(t,T_k) = M^{v_k}/M^{u_k}.
inline double forward_cpi(const ModelConfig& cfg, int k, const StateVector& s) {
    if (k == 0) return 1.0;
    if (s.t > cfg.date(k)) throw ValidationError("forward CPI requires t <= T_k");
    AffinePair ab = ab_pair(cfg, s.t, cfg.vc(k), cfg.uc(k));
    return std::exp(ab.A + detail::dot(ab.B, s.x)).real();
}

/// Real zero-coupon bond P_R(0,T_k) = ℐ(0,T_k) P(0,T_k) with I(0) = 1.
inline double real_bond(const ModelConfig& cfg, int k) {
    StateVector s0 = cfg.initial_state();
    return forward_cpi(cfg, k, s0) * bond_price(cfg, k, s0);
}

// ---------------------------------------------------------------------------
// Moment generating functions under the T_k-forward measure

/// E^{Q^{T_k}}[exp(w . X_r) | F_s] for s <= r <= T_k (measure-change formula).
inline cplx mgf_forward_measure(const ModelConfig& cfg, int k, std::span<const cplx> w, double r,
                                const StateVector& s) {
    const double T = cfg.horizon();
    if (!(s.t <= r && r <= cfg.date(k) + 1e-14))
        throw ValidationError("forward-measure MGF requires s <= r <= T_k");
    const auto& P = cfg.process();
    CVec a(cfg.dim());
    P.apply(T - r, cfg.uc(k), a, "psi_{T-r}(u_k)");
    CVec aw = detail::add(a, w);
    CVec p1(cfg.dim()), p0(cfg.dim());
    cplx f1 = P.apply(r - s.t, aw, p1, "psi_{T-r}(u_k) + w");
    cplx f0 = P.apply(r - s.t, a, p0, "psi_{T-r}(u_k)");
    return std::exp(f1 - f0 + detail::dot(detail::sub(p1, p0), s.x));
}

/// E^{Q^{T_k}}[I(T_k)^z | F_s] in the closed form
///   exp(z phi(v_k) + (1-z) phi(u_k)) exp(phi_{T_k-s}(c)) exp(psi_{T_k-s}(c) . X_s) / M_s^{u_k}
/// with c = z psi_{T-T_k}(v_k) + (1-z) psi_{T-T_k}(u_k), all phi/psi(v_k), (u_k) at T-T_k.
inline cplx mgf_log_cpi(const ModelConfig& cfg, int k, cplx z, const StateVector& s) {
    const double T = cfg.horizon(), Tk = cfg.date(k);
    if (s.t > Tk) throw ValidationError("mgf_log_cpi requires s <= T_k");
    const auto& P = cfg.process();
    const std::size_t d = cfg.dim();
    CVec pv(d), pu(d);
    cplx fv = P.apply(T - Tk, cfg.vc(k), pv, "psi_{T-T_k}(v_k)");
    cplx fu = P.apply(T - Tk, cfg.uc(k), pu, "psi_{T-T_k}(u_k)");
    CVec c(d);
    for (std::size_t i = 0; i < d; ++i) c[i] = z * pv[i] + (1.0 - z) * pu[i];
    CVec pc(d);
    cplx fc = P.apply(Tk - s.t, c, pc, "z psi(v_k) + (1-z) psi(u_k)");
    cplx log_m = z * fv + (1.0 - z) * fu + fc + detail::dot(pc, s.x);
    CVec pm(d);
    cplx fm = P.apply(T - s.t, cfg.uc(k), pm, "M_s^{u_k}");
    return std::exp(log_m - fm - detail::dot(pm, s.x));
}

/// E^{Q^{T_k}}[exp(u . X_r + w . X_t) | F_s] for s <= r <= t <= T_k, in the
/// two-time closed form.
inline cplx mgf_two_time(const ModelConfig& cfg, int k, std::span<const cplx> u,
                         std::span<const cplx> w, double r, double t, const StateVector& s) {
    const double T = cfg.horizon();
    if (!(s.t <= r && r <= t && t <= cfg.date(k) + 1e-14))
        throw ValidationError("mgf_two_time requires s <= r <= t <= T_k");
    const auto& P = cfg.process();
    const std::size_t d = cfg.dim();
    CVec a(d);
    P.apply(T - t, cfg.uc(k), a, "psi_{T-t}(u_k)");
    CVec first = detail::add(a, w);  // psi_{T-t}(u_k) + w
    CVec p_first(d);
    cplx f_first = P.apply(t - r, first, p_first, "psi_{T-t}(u_k) + w");
    CVec second = detail::add(p_first, u);
    CVec p_second(d);
    cplx f_second = P.apply(r - s.t, second, p_second, "psi_{t-r}(psi_{T-t}(u_k)+w) + u");
    CVec p_norm(d);
    cplx f_norm = P.apply(t - s.t, a, p_norm, "psi_{T-t}(u_k)");
    CVec p_total(d);
    P.apply(T - s.t, cfg.uc(k), p_total, "psi_{T-s}(u_k)");
    return std::exp(f_first + f_second - f_norm + detail::dot(detail::sub(p_second, p_total), s.x));
}

/// MGF of Y = log(I(T_k)/I(T_{k-j})) under Q^{T_k} given F_s, s <= T_{k-j}.
inline cplx mgf_yoy(const ModelConfig& cfg, int k, int j, cplx z, const StateVector& s) {
    if (j < 1 || k - j < 0 || k > cfg.N()) throw ValidationError("mgf_yoy index out of range");
    const double T = cfg.horizon(), Tk = cfg.date(k), Tkj = cfg.date(k - j);
    if (s.t > Tkj) throw ValidationError("mgf_yoy requires s <= T_{k-j}");
    const auto& P = cfg.process();
    const std::size_t d = cfg.dim();
    AffinePair Ik = log_cpi_loading(cfg, k);
    AffinePair Ikj = log_cpi_loading(cfg, k - j);
    CVec a(d);
    P.apply(T - Tk, cfg.uc(k), a, "psi_{T-T_k}(u_k)");
    CVec first(d);
    for (std::size_t i = 0; i < d; ++i) first[i] = a[i] + z * Ik.B[i];
    CVec p_first(d);
    cplx f_first = P.apply(Tk - Tkj, first, p_first, "psi_{T-T_k}(u_k) + z B_I^k");
    CVec second(d);
    for (std::size_t i = 0; i < d; ++i) second[i] = p_first[i] - z * Ikj.B[i];
    CVec p_second(d);
    cplx f_second = P.apply(Tkj - s.t, second, p_second, "psi(...) - z B_I^{k-j}");
    CVec p_norm(d);
    cplx f_norm = P.apply(Tk - s.t, a, p_norm, "psi_{T-T_k}(u_k)");
    CVec p_total(d);
    P.apply(T - s.t, cfg.uc(k), p_total, "psi_{T-s}(u_k)");
    cplx log_m = z * (Ik.A - Ikj.A) + f_first + f_second - f_norm +
                 detail::dot(detail::sub(p_second, p_total), s.x);
    return std::exp(log_m);
}

/// Annualized forward inflation F_I(t, T_{k-j}, T_k) in closed form:
///   1 + (T_k - T_{k-j}) F_I = exp(phi_{T-T_{k-j}}(v_k) - A_I^{k-j} + phi_{T_{k-j}-t}(c)
///                                 - phi_{T-t}(u_k) + (psi_{T_{k-j}-t}(c) - psi_{T-t}(u_k)) . X_t)
/// with c = psi_{T-T_{k-j}}(v_k) - B_I^{k-j}.
inline double forward_inflation(const ModelConfig& cfg, int k, int j, const StateVector& s) {
    if (j < 1 || k - j < 0 || k > cfg.N()) throw ValidationError("forward inflation index out of range");
    const double T = cfg.horizon(), Tkj = cfg.date(k - j);
    if (s.t > Tkj) throw ValidationError("forward inflation requires t <= T_{k-j}");
    const auto& P = cfg.process();
    const std::size_t d = cfg.dim();
    AffinePair Ikj = log_cpi_loading(cfg, k - j);
    CVec pv(d);
    cplx fv = P.apply(T - Tkj, cfg.vc(k), pv, "psi_{T-T_{k-j}}(v_k)");
    CVec c = detail::sub(pv, Ikj.B);
    CVec pc(d);
    cplx fc = P.apply(Tkj - s.t, c, pc, "psi_{T-T_{k-j}}(v_k) - B_I^{k-j}");
    CVec pu(d);
    cplx fu = P.apply(T - s.t, cfg.uc(k), pu, "psi_{T-t}(u_k)");
    cplx log_ratio = fv - Ikj.A + fc - fu + detail::dot(detail::sub(pc, pu), s.x);
    return (std::exp(log_ratio).real() - 1.0) / (cfg.date(k) - Tkj);
}

// ---------------------------------------------------------------------------
// Swap rates at t = 0

/// ZCIIS rate for a full-year maturity: ℐ(0, T_{2y})^{1/y} - 1 (I(0) = 1).
inline double zciis_rate(const ModelConfig& cfg, int years) {
    if (years < 1 || 2 * years > cfg.N()) throw ValidationError("ZCIIS maturity outside the tenor");
    double fwd = forward_cpi(cfg, 2 * years, cfg.initial_state());
    return std::pow(fwd, 1.0 / years) - 1.0;
}

/// YYIIS rate with annual payments: discount-weighted average of annual forward inflation.
inline double yyiis_rate(const ModelConfig& cfg, int years) {
    if (years < 1 || 2 * years > cfg.N()) throw ValidationError("YYIIS maturity outside the tenor");
    StateVector s0 = cfg.initial_state();
    double num = 0.0, den = 0.0;
    for (int y = 1; y <= years; ++y) {
        double df = bond_price(cfg, 2 * y, s0);
        num += df * forward_inflation(cfg, 2 * y, 2, s0);
        den += df;
    }
    return num / den;
}

// ---------------------------------------------------------------------------
// Correlation of log-affine quantities

enum class QuantityKind { ForwardRate, ForwardCpi, ForwardInflation };

/// Selects log(1 + Δ_k F^k), log ℐ(·,T_k), or log(1 + (T_k - T_{k-j}) F_I).
struct QuantitySelector {
    QuantityKind kind = QuantityKind::ForwardRate;
    int k = 2;
    int j = 2;

    static QuantitySelector forward_rate(int k) { return {QuantityKind::ForwardRate, k, 0}; }
    static QuantitySelector forward_cpi(int k) { return {QuantityKind::ForwardCpi, k, 0}; }
    static QuantitySelector forward_inflation(int k, int j) {
        return {QuantityKind::ForwardInflation, k, j};
    }
    bool operator==(const QuantitySelector&) const = default;
};

/// State loading of the selected quantity at time t.
inline CVec loading(const ModelConfig& cfg, const QuantitySelector& q, double t) {
    switch (q.kind) {
    case QuantityKind::ForwardRate:
        if (q.k < 2) throw ValidationError("correlation needs forward rates with k >= 2");
        return ab_pair(cfg, t, cfg.uc(q.k - 1), cfg.uc(q.k)).B;
    case QuantityKind::ForwardCpi: return ab_pair(cfg, t, cfg.vc(q.k), cfg.uc(q.k)).B;
    case QuantityKind::ForwardInflation: {
        const double T = cfg.horizon(), Tkj = cfg.date(q.k - q.j);
        if (t > Tkj) throw ValidationError("forward inflation loading requires t <= T_{k-j}");
        const auto& P = cfg.process();
        AffinePair Ikj = log_cpi_loading(cfg, q.k - q.j);
        CVec pv(cfg.dim());
        P.apply(T - Tkj, cfg.vc(q.k), pv);
        CVec c = detail::sub(pv, Ikj.B), pc(cfg.dim()), pu(cfg.dim());
        P.apply(Tkj - t, c, pc);
        P.apply(T - t, cfg.uc(q.k), pu);
        return detail::sub(pc, pu);
    }
    }
    return {};
}

/// Correlation of two selected quantities at time t under Q^T, using the
/// independence of the components and Var[X_t^i] from the initial state.
inline double correlation(const ModelConfig& cfg, const QuantitySelector& qa,
                          const QuantitySelector& qb, double t) {
    if (!(t > 0)) throw ValidationError("correlation requires t > 0");
    CVec ba = loading(cfg, qa, t), bb = loading(cfg, qb, t);
    double cov = 0.0, va = 0.0, vb = 0.0;
    for (std::size_t i = 0; i < cfg.dim(); ++i) {
        if (ba[i] == cplx(0.0) && bb[i] == cplx(0.0)) continue;
        const auto& c = cfg.process()[i];
        double var = component_variance(c, t, c.x0);
        cov += ba[i].real() * bb[i].real() * var;
        va += ba[i].real() * ba[i].real() * var;
        vb += bb[i].real() * bb[i].real() * var;
    }
    if (va == 0.0 || vb == 0.0) return 0.0;
    if (qa == qb) return 1.0;
    return std::clamp(cov / (std::sqrt(va) * std::sqrt(vb)), -1.0, 1.0);
}

// ---------------------------------------------------------------------------
// Prepared transforms for pricing

/// z -> E^{Q^{T_k}}[exp(z (A + U . X_r + W . X_t)) | F_s], s <= r <= t <= T_k.
///
/// Evaluated componentwise: components not loaded by U or W cancel between
/// numerator and measure normalization, so only the loaded ones are touched.
class LogAffineTransform {
public:
    LogAffineTransform(const ModelConfig& cfg, int k, const StateVector& s, cplx A,
                       std::span<const cplx> U, double r, std::span<const cplx> W, double t)
        : A_(A), t_minus_r_(t - r), r_minus_s_(r - s.t) {
        if (!(s.t <= r && r <= t && t <= cfg.date(k) + 1e-14))
            throw ValidationError("prepared transform requires s <= r <= t <= T_k");
        const double T = cfg.horizon();
        CVec uk = cfg.uc(k);
        for (std::size_t i = 0; i < cfg.dim(); ++i) {
            if (U[i] == cplx(0.0) && W[i] == cplx(0.0)) continue;
            Loaded c;
            c.component = &cfg.process()[i];
            c.index = static_cast<int>(i);
            c.U = U[i];
            c.W = W[i];
            c.x = s.x[i];
            try {
                c.a = transform(*c.component, T - t, uk[i]).psi;
                Transform norm = transform(*c.component, t - s.t, c.a);
                c.log_norm = norm.phi + norm.psi * c.x;
            } catch (const DomainViolation& dv) {
                throw dv.at_component(c.index, "measure normalization");
            }
            loaded_.push_back(c);
        }
    }

    cplx log(cplx z) const {
        cplx total = z * A_;
        for (const Loaded& c : loaded_) {
            try {
                Transform first = transform(*c.component, t_minus_r_, c.a + z * c.W);
                Transform second = transform(*c.component, r_minus_s_, first.psi + z * c.U);
                total += first.phi + second.phi + second.psi * c.x - c.log_norm;
            } catch (const DomainViolation& dv) {
                throw dv.at_component(c.index, "forward-measure transform");
            }
        }
        return total;
    }

    cplx operator()(cplx z) const { return std::exp(log(z)); }

    /// True when the transform is defined at real z.
    bool admissible(double z) const {
        try {
            (void)log(cplx(z, 0.0));
            return true;
        } catch (const DomainViolation&) {
            return false;
        }
    }

    std::size_t loaded_components() const noexcept { return loaded_.size(); }

private:
    struct Loaded {
        const AffineComponent* component = nullptr;
        int index = 0;
        cplx a, U, W, log_norm;
        double x = 0.0;
    };

    cplx A_;
    double t_minus_r_, r_minus_s_;
    std::vector<Loaded> loaded_;
};

/// Transform of log I(T_k) under Q^{T_k} given F_s.
inline LogAffineTransform log_cpi_transform(const ModelConfig& cfg, int k, const StateVector& s) {
    if (s.t > cfg.date(k)) throw ValidationError("CPI transform requires s <= T_k");
    AffinePair I = log_cpi_loading(cfg, k);
    CVec zero(cfg.dim(), 0.0);
    return LogAffineTransform(cfg, k, s, I.A, zero, cfg.date(k), I.B, cfg.date(k));
}

/// Transform of log(I(T_k)/I(T_{k-j})) under Q^{T_k} given F_s, s <= T_{k-j}.
inline LogAffineTransform yoy_transform(const ModelConfig& cfg, int k, int j, const StateVector& s) {
    if (j < 1 || k - j < 0 || k > cfg.N()) throw ValidationError("year-on-year index out of range");
    if (s.t > cfg.date(k - j)) throw ValidationError("year-on-year transform requires s <= T_{k-j}");
    AffinePair Ik = log_cpi_loading(cfg, k), Ikj = log_cpi_loading(cfg, k - j);
    CVec U = detail::scale(-1.0, Ikj.B);
    return LogAffineTransform(cfg, k, s, Ik.A - Ikj.A, U, cfg.date(k - j), Ik.B, cfg.date(k));
}

/// Transform of log(1 + Δ_k F^k(T_{k-1})) under Q^{T_k} given F_s, s <= T_{k-1}.
inline LogAffineTransform forward_rate_transform(const ModelConfig& cfg, int k, const StateVector& s) {
    if (k < 2 || k > cfg.N()) throw ValidationError("forward-rate transform needs 2 <= k <= N");
    const double fix = cfg.date(k - 1);
    if (s.t > fix) throw ValidationError("forward-rate transform requires s <= T_{k-1}");
    AffinePair ab = ab_pair(cfg, fix, cfg.uc(k - 1), cfg.uc(k));
    CVec zero(cfg.dim(), 0.0);
    return LogAffineTransform(cfg, k, s, ab.A, zero, fix, ab.B, fix);
}

} // namespace aimm

#endif // AIMM_MARKET_MODEL_HPP
