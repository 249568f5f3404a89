#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <numbers>

#include "refscale/errors.hpp"
#include "refscale/pdo.hpp"
#include "refscale/standard_systems.hpp"

using namespace refscale;

namespace {
const Complex I{0, 1};
const ManifoldSpec T1{1};
const ManifoldSpec T2{2};

FourierField e(ManifoldSpec spec, int a, int b = 0) { return FourierField::exponential(spec, {a, b}); }

bool same(const FourierField& u, const FourierField& v, double tol = 1e-14) { return max_abs_difference(u, v) <= tol; }

Eigen::MatrixXcd dense(const SparseMatrixC& M) { return Eigen::MatrixXcd(M); }
}  // namespace

TEST_CASE("apply on basis vectors") {
    auto d = systems::partial(1, 0);
    CHECK(same(apply(d, e(T1, 2)), 2.0 * I * e(T1, 2)));
    CHECK(apply(d, e(T1, 2)).band() == 2);

    auto mod = systems::multiplication(1, 1.0, {1, 0});
    CHECK(same(apply(mod, e(T1, 2)), e(T1, 3)));
    CHECK(apply(mod, e(T1, 2)).band() == 3);

    auto t = systems::shift_toeplitz();
    CHECK(same(apply(t, e(T1, -3)), e(T1, -3)));
    CHECK(same(apply(t, e(T1, 2)), e(T1, 3)));
    CHECK(same(apply(t, e(T1, 0)), e(T1, 1)));

    auto lap = systems::minus_laplacian(2);
    CHECK(same(apply(lap, e(T2, 3, 4)), 25.0 * e(T2, 3, 4), 1e-12));
    CHECK(same(apply(lap, e(T2, 0, 0)), FourierField(T2, 0)));
    CHECK(same(apply(systems::one_minus_laplacian(2), e(T2, 0, 0)), e(T2, 0, 0)));

    // d/dx_2 on the 2-torus through the angular trigonometric polynomial
    CHECK(same(apply(systems::partial(2, 1), e(T2, 3, -4)), -4.0 * I * e(T2, 3, -4), 1e-13));
    CHECK(same(apply(systems::partial(2, 0), e(T2, 0, 5)), FourierField(T2, 0), 1e-15));

    CHECK_THROWS_AS(apply(d, e(T2, 1, 1)), SpecMismatch);
}

TEST_CASE("apply_system") {
    PdoSystem A(1, 2);
    A.set(0, 0, systems::one_minus_laplacian(1));
    A.set(1, 1, systems::one_minus_laplacian(1));
    auto f = apply_system(A, {e(T1, 1), FourierField(T1, 1)});
    CHECK(same(f[0], 2.0 * e(T1, 1)));
    CHECK(same(f[1], FourierField(T1, 1)));

    auto cr = apply_system(systems::cauchy_riemann(), {e(T2, 1, 0), FourierField(T2, 1)});
    CHECK(same(cr[0], I * e(T2, 1, 0), 1e-15));
    CHECK(same(cr[1], FourierField(T2, 1), 1e-15));

    CHECK(same(apply_system(PdoSystem::scalar(systems::shift_toeplitz()), {e(T1, 0)})[0], e(T1, 1)));
    CHECK_THROWS_AS(apply_system(A, {e(T1, 1)}), SpecMismatch);
}

TEST_CASE("orders and principal symbols") {
    auto D = systems::degenerate_mixed();
    CHECK(D.column_orders() == std::vector<double>{2.0, 1.0});
    const double th = 0.7;
    const Point w{std::cos(th), std::sin(th)};
    auto P = principal_symbol(D, {0.3, 1.1}, w);
    CHECK(std::abs(P(0, 0) - 1.0) < 1e-14);
    CHECK(std::abs(P(0, 1) - I * w[0]) < 1e-14);
    CHECK(P(1, 0) == Complex{});
    CHECK(P(1, 1) == Complex{});

    auto L = PdoSystem::scalar(systems::one_minus_laplacian(1));
    CHECK(std::abs(principal_symbol(L, {2.0, 0}, {-1, 0})(0, 0) - 1.0) < 1e-15);

    auto C = principal_symbol(systems::cauchy_riemann(), {0, 0}, w);
    CHECK(std::abs(C(0, 0) - I * w[0]) < 1e-14);
    CHECK(std::abs(C(0, 1) + I * w[1]) < 1e-14);
    CHECK(std::abs(C(1, 0) - I * w[1]) < 1e-14);
    CHECK(std::abs(C(1, 1) - I * w[0]) < 1e-14);

    CHECK_THROWS_AS(principal_symbol(D, {0, 0}, {1, 1}), DomainError);
    PdoSystem Z(1, 2);
    Z.set(0, 0, systems::partial(1, 0));
    CHECK(Z.order(1, 1) == -INFINITY);
    CHECK(Z.column_order(1) == 0.0);
}

TEST_CASE("principal part is the limit of the scaled full symbol") {
    const Point x{0.4, 2.0};
    const Point w{std::cos(1.3), std::sin(1.3)};
    // single-term entry: exact
    auto d = systems::partial(2, 0);
    for (double t : {10.0, 100.0, 1000.0}) {
        const Complex v = d.value(x, {t * w[0], t * w[1]}) / t;
        CHECK(std::abs(v - d.principal(x, w)) <= 1e-12);
    }
    // multi-term: relative error decreasing in t
    auto h = systems::perturbed_helmholtz(0.1).entry(0, 0).value();
    double prev = INFINITY;
    for (double t : {10.0, 100.0, 1000.0}) {
        const Complex v = h.value(x, {t * w[0], t * w[1]}) / (t * t);
        const double err = std::abs(v - h.principal(x, w)) / std::abs(h.principal(x, w));
        CHECK(err < prev);
        prev = err;
    }
    CHECK(prev < 1e-3);
}

TEST_CASE("symbol invariants") {
    HomogeneousTerm zero;
    zero.degree = 1;
    zero.parts.push_back({{{Mode{0, 0}, 0.0}}, AngularProfile::circle(1, 1)});
    CHECK_THROWS_AS(ClassicalSymbol(1, {zero}), InvalidSymbol);

    // equal degrees merge into one homogeneous term
    HomogeneousTerm a;
    a.degree = 2;
    a.parts.push_back({{{Mode{0, 0}, 1.0}}, AngularProfile::constant(1)});
    ClassicalSymbol s(1, {a, a});
    CHECK(s.terms().size() == 1);
    CHECK(same(apply(s, e(T1, 3)), 18.0 * e(T1, 3)));

    // trigonometric angular profile is rejected on the circle
    HomogeneousTerm bad;
    bad.degree = 1;
    bad.parts.push_back({{{Mode{0, 0}, 1.0}}, AngularProfile::trigonometric({{1, 1.0}, {-1, 1.0}})});
    CHECK_THROWS_AS(ClassicalSymbol(1, {bad}), InvalidSymbol);
}

TEST_CASE("Petrovskii ellipticity") {
    auto L = petrovskii_check(PdoSystem::scalar(systems::one_minus_laplacian(1)));
    CHECK(L.elliptic);
    CHECK(L.min_abs_det == doctest::Approx(1.0));

    auto C = petrovskii_check(systems::cauchy_riemann());
    CHECK(C.elliptic);
    CHECK(C.min_abs_det == doctest::Approx(1.0));

    auto D = petrovskii_check(systems::degenerate_mixed());
    CHECK_FALSE(D.elliptic);
    CHECK(D.min_abs_det == 0.0);

    CHECK_FALSE(petrovskii_check(PdoSystem::scalar(systems::partial(2, 0))).elliptic);
    CHECK(petrovskii_check(systems::perturbed_helmholtz()).elliptic);
}

TEST_CASE("ellipticity verdict is stable under row scaling") {
    for (const auto& A : {systems::cauchy_riemann(), systems::degenerate_mixed(), systems::perturbed_helmholtz()}) {
        const double delta = 1e-8;
        const auto base = petrovskii_check(A, delta);
        for (int j = 0; j < A.size(); ++j) {
            const auto scaled = petrovskii_check(A.with_scaled_row(j, 2.0), delta * 2.0);
            CHECK(scaled.elliptic == base.elliptic);
            CHECK(scaled.min_abs_det == doctest::Approx(2.0 * base.min_abs_det));
        }
    }
}

TEST_CASE("Galerkin matrices") {
    auto L = dense(galerkin_matrix(PdoSystem::scalar(systems::one_minus_laplacian(1)), 2));
    Eigen::VectorXcd diag(5);
    diag << 5, 2, 1, 2, 5;
    CHECK((L - Eigen::MatrixXcd(diag.asDiagonal())).norm() == 0.0);

    auto S = dense(galerkin_matrix(PdoSystem::scalar(systems::multiplication(1, 1.0, {1, 0})), 2));
    Eigen::MatrixXcd sub = Eigen::MatrixXcd::Zero(5, 5);
    for (int i = 0; i < 4; ++i) sub(i + 1, i) = 1;
    CHECK((S - sub).norm() == 0.0);

    auto T = dense(galerkin_matrix(PdoSystem::scalar(systems::shift_toeplitz()), 2));
    Eigen::MatrixXcd t = Eigen::MatrixXcd::Zero(5, 5);
    t(0, 0) = t(1, 1) = 1;  // xi = -2, -1 fixed
    t(3, 2) = t(4, 3) = 1;  // 0 -> 1, 1 -> 2; column xi = 2 leaves the band
    CHECK((T - t).norm() == 0.0);
}

TEST_CASE("formal adjoint") {
    auto L = galerkin_matrix(PdoSystem::scalar(systems::one_minus_laplacian(1)), 3);
    CHECK((dense(formal_adjoint_galerkin(L)) - dense(L)).norm() == 0.0);
    auto S = galerkin_matrix(PdoSystem::scalar(systems::multiplication(1, 1.0, {1, 0})), 3);
    auto Sa = dense(formal_adjoint_galerkin(S));
    for (int i = 0; i < 6; ++i) CHECK(Sa(i, i + 1) == Complex(1, 0));
    auto C = galerkin_matrix(systems::cauchy_riemann(), 3);
    CHECK((dense(formal_adjoint_galerkin(formal_adjoint_galerkin(C))) - dense(C)).norm() == 0.0);
}

TEST_CASE("Galerkin matrix agrees with apply_system on band-limited data") {
    for (const auto& A : {systems::cauchy_riemann(), systems::perturbed_helmholtz(), systems::degenerate_mixed()}) {
        const int Ku = 5;
        const int K = Ku + A.bandwidth();
        std::vector<FourierField> u;
        for (int k = 0; k < A.size(); ++k) u.push_back(random_field(T2, Ku, 100 + k));
        const Eigen::VectorXcd lhs = flatten(apply_system(A, u), K);
        std::vector<FourierField> uK;
        for (auto& f : u) uK.push_back(f.with_band(K));
        const Eigen::VectorXcd rhs = galerkin_matrix(A, K) * flatten(uK, K);
        CHECK((lhs - rhs).norm() <= 1e-12 * lhs.norm());
    }
    auto T = PdoSystem::scalar(systems::shift_toeplitz());
    auto u = random_field(T1, 6, 5);
    const Eigen::VectorXcd lhs = flatten(apply_system(T, {u}), 7);
    CHECK((lhs - galerkin_matrix(T, 7) * flatten({u.with_band(7)}, 7)).norm() <= 1e-13);
}

TEST_CASE("apply is linear and homogeneous") {
    auto h = systems::perturbed_helmholtz().entry(0, 0).value();
    auto u = random_field(T2, 4, 1);
    auto v = random_field(T2, 4, 2);
    const Complex lam{0.3, -1.7};
    CHECK(same(apply(h, u + v), apply(h, u) + apply(h, v), 1e-12));
    CHECK(same(apply(h, lam * u), lam * apply(h, u), 1e-12));
}

TEST_CASE("flatten and unflatten") {
    auto u = random_field(T2, 3, 9);
    auto v = random_field(T2, 3, 10);
    auto back = unflatten(flatten({u, v}, 3), T2, 2, 3);
    CHECK(same(back[0], u, 0));
    CHECK(same(back[1], v, 0));
    CHECK_THROWS_AS(flatten({u}, 2), SpecMismatch);
}
