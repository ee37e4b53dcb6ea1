#include <aimm/affine.hpp>

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace aimm;

namespace {

std::vector<AffineComponent> sample_components() {
    return {cir(0.026, 0.65, 0.5, 3.45), cir_jump(0.5, 1.0, 0.3, 1.0, 5.0, 0.5),
            ou_jump(0.8, 0.02, 0.05, 0.01, 20.0, 0.3, 25.0, 0.2)};
}

double rel(cplx a, cplx b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); }

} // namespace

TEST(Affine, SemiflowHoldsOnRandomArguments) {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    for (const auto& c : sample_components()) {
        for (int i = 0; i < 50; ++i) {
            double s = 0.1 + 9.9 * U(rng), t = 0.1 + 9.9 * U(rng);
            Interval dom = component_domain(c, s + t).shrunk(0.9);
            double lo = std::max(dom.lower, -20.0), hi = std::min(dom.upper, 20.0);
            cplx u(lo + (hi - lo) * U(rng), -5.0 + 10.0 * U(rng));
            Transform ts = transform(c, t + s, u);
            Transform a = transform(c, t, u);
            Transform b = transform(c, s, a.psi);
            EXPECT_LT(rel(ts.phi, a.phi + b.phi), 1e-10) << to_string(c.kind);
            EXPECT_LT(rel(ts.psi, b.psi), 1e-10) << to_string(c.kind);
        }
    }
}

TEST(Affine, ClosedFormsSolveRiccatiEquations) {
    for (const auto& c : sample_components()) {
        for (double t : {0.3, 2.0, 7.5}) {
            Interval dom = component_domain(c, t).shrunk(0.5);
            for (cplx u : {cplx(0.3 * dom.upper, 0.0), cplx(0.2, 3.0), cplx(-1.0, -2.0)}) {
                if (!std::isfinite(dom.upper)) u = cplx(u.real() == 0 ? 0.5 : u.real(), u.imag());
                if (!dom.contains(u.real())) continue;
                Transform cf = transform(c, t, u);
                Transform ode = oracle::riccati_rk4(c, t, u);
                EXPECT_LT(rel(cf.phi, ode.phi), 1e-9) << to_string(c.kind) << " t=" << t;
                EXPECT_LT(rel(cf.psi, ode.psi), 1e-9) << to_string(c.kind) << " t=" << t;
            }
        }
    }
}

TEST(Affine, TrivialArguments) {
    for (const auto& c : sample_components()) {
        Transform z = transform(c, 3.0, 0.0);
        EXPECT_EQ(z.phi, cplx(0.0));
        EXPECT_EQ(z.psi, cplx(0.0));
        Transform id = transform(c, 0.0, cplx(0.7, 1.0));
        EXPECT_EQ(id.phi, cplx(0.0));
        EXPECT_EQ(id.psi, cplx(0.7, 1.0));
    }
}

TEST(Affine, CirJumpRemovableSingularity) {
    // lambda = 2 eta^2 alpha: compare with neighbouring parameter values.
    AffineComponent c = cir_jump(0.5, 1.0, 0.25, 1.0, 4.0, 0.7);
    ASSERT_NEAR(c.lambda, 2 * c.eta * c.eta * c.alpha, 1e-15);
    AffineComponent up = c, dn = c;
    up.alpha *= 1 + 1e-7;
    dn.alpha *= 1 - 1e-7;
    cplx u(0.4, 1.3);
    cplx mid = transform(c, 2.0, u).phi;
    cplx avg = 0.5 * (transform(up, 2.0, u).phi + transform(dn, 2.0, u).phi);
    EXPECT_LT(std::abs(mid - avg), 1e-9);
    EXPECT_LT(rel(mid, oracle::riccati_rk4(c, 2.0, u).phi), 1e-9);
}

TEST(Affine, DomainViolationReportsComponent) {
    ProductProcess p(sample_components(), 10.0);
    std::vector<cplx> u = {0.1, 0.2, cplx(30.0, 0.0)};
    try {
        p.phi(1.0, u);
        FAIL() << "expected DomainViolation";
    } catch (const DomainViolation& dv) {
        EXPECT_EQ(dv.component(), 2);
        EXPECT_DOUBLE_EQ(dv.upper(), 20.0);
    }
    std::vector<cplx> cir_bad = {cplx(1e3, 0.0), 0.0, 0.0};
    EXPECT_THROW(p.phi(5.0, cir_bad), DomainViolation);
}

TEST(Affine, ProductIsSumOfComponents) {
    auto comps = sample_components();
    ProductProcess p(comps, 10.0);
    std::vector<cplx> u = {cplx(0.05, 1.0), cplx(0.3, -0.5), cplx(-2.0, 4.0)};
    std::vector<cplx> psi(3);
    cplx phi = p.apply(4.0, u, psi);
    cplx sum = 0.0;
    for (int i = 0; i < 3; ++i) {
        Transform tr = transform(comps[i], 4.0, u[i]);
        sum += tr.phi;
        EXPECT_EQ(psi[i], tr.psi);
    }
    EXPECT_LT(std::abs(phi - sum), 1e-14);
}

TEST(Affine, RejectsBadParametersAndOrdering) {
    EXPECT_THROW(ProductProcess({cir(-1.0, 0.5, 0.2, 1.0)}, 1.0), ValidationError);
    EXPECT_THROW(ProductProcess({ou_jump(1, 0, 0.1, 0, 1, 0, 1, 0), cir(1, 1, 0.2, 1)}, 1.0),
                 ValidationError);
    EXPECT_EQ(process_kind_from_string("OUJump"), ProcessKind::OuJump);
    EXPECT_THROW(process_kind_from_string("Heston"), SchemaError);
}

TEST(Affine, VarianceMatchesClosedForm) {
    // CIR variance with diffusion 2 eta sqrt(X): x e (1-e) 4eta^2/lambda + theta 2eta^2 (1-e)^2/lambda.
    AffineComponent c = cir(0.4, 0.8, 0.3, 1.2);
    double t = 3.0, e = std::exp(-c.lambda * t), s2 = 4 * c.eta * c.eta;
    double exact = c.x0 * s2 / c.lambda * (e - e * e) + c.theta * s2 / (2 * c.lambda) * (1 - e) * (1 - e);
    EXPECT_NEAR(component_variance(c, t, c.x0), exact, 1e-6 * exact);
}

TEST(Affine, VarianceMatchesTransformCurvature) {
    for (const auto& c : sample_components()) {
        double t = 2.5, h = 1e-3;
        auto k = [&](double u) {
            Transform tr = transform(c, t, u);
            return tr.phi.real() + tr.psi.real() * c.x0;
        };
        double fd = (-k(2 * h) + 16 * k(h) - 30 * k(0) + 16 * k(-h) - k(-2 * h)) / (12 * h * h);
        EXPECT_NEAR(component_variance(c, t, c.x0), fd, 1e-6 * fd) << to_string(c.kind);
    }
}
