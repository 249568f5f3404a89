#include <doctest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "refscale/errors.hpp"
#include "refscale/refined_spaces.hpp"
#include "refscale/slowly_varying.hpp"

using namespace refscale;

namespace {
const double E = std::numbers::e;
}

TEST_CASE("standard phi evaluation") {
    CHECK(eval_phi(make_standard_phi({}), 1e6) == 1.0);
    CHECK(make_standard_phi({}).is_constant_one());

    const auto p1 = make_standard_phi({1.0});
    CHECK(eval_phi(p1, 1.0) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(eval_phi(p1, 1e6) == doctest::Approx(13.8155122762446).epsilon(1e-13));

    const auto p2 = make_standard_phi({0.5, 0.7});
    CHECK(p2(2 * E - 1) == doctest::Approx(1.58728511139283).epsilon(1e-13));
    CHECK(p2(1.0) == doctest::Approx(1.0).epsilon(1e-15));

    CHECK_THROWS_AS((void)p1(0.5), DomainError);
    CHECK(iterated_log(1, 1.0) == doctest::Approx(1.0));
    CHECK(iterated_log(3, 1.0) == doctest::Approx(1.0));
}

TEST_CASE("phi is positive and bounded with bounded reciprocal on compacts") {
    for (const auto& ex : std::vector<std::vector<double>>{{-3}, {3}, {0.5, -2}, {-1, 1, 3}}) {
        const auto phi = make_standard_phi(ex);
        double lo = 1e300, hi = 0;
        for (double t = 1; t <= 1e4; t *= 1.05) {
            const double v = phi(t);
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        CHECK(lo > 0);
        CHECK(std::isfinite(hi));
        CHECK(std::isfinite(1 / lo));
    }
}

TEST_CASE("parse phi and text form") {
    auto p = parse_phi("[0.5, 0.7]");
    REQUIRE(p.exponents().size() == 2);
    CHECK(p.exponents()[1] == doctest::Approx(0.7));
    CHECK(parse_phi("[]").is_constant_one());
    CHECK(parse_phi("1").exponents()[0] == 1.0);
    CHECK(parse_phi(p.to_string()).exponents()[0] == 0.5);
    CHECK_THROWS(parse_phi("[0.5, x]"));
}

TEST_CASE("scaled kind") {
    const auto base = make_standard_phi({1.0});
    const auto sq = SlowlyVaryingFunction::scaled(base, 2.0);
    CHECK(sq(100.0) == doctest::Approx(std::pow(base(100.0), 2.0)));
    REQUIRE(sq.exponents().size() == 1);
    CHECK(sq.exponents()[0] == 2.0);
    CHECK(embedding_criterion(sq) == EmbeddingVerdict::undecidable);
}

TEST_CASE("slow variation examples") {
    const std::vector<double> two{2.0};
    const auto grid = default_slow_variation_grid();
    REQUIRE(grid.back() == 1e6);

    auto one = check_slow_variation(make_standard_phi({}), two, grid);
    CHECK(one.pass);
    CHECK(one.per_lambda[0].deviation_at_top == 0.0);

    auto r = check_slow_variation(make_standard_phi({1.0}), two, grid);
    CHECK(r.pass);
    CHECK(r.per_lambda[0].deviation_at_top == doctest::Approx(0.0501715975173779).epsilon(1e-10));
    CHECK(r.per_lambda[0].decreasing);

    auto pw = check_slow_variation([](double t) { return std::pow(t, 0.1); }, two, grid);
    CHECK_FALSE(pw.pass);
    CHECK(pw.per_lambda[0].deviation_at_top == doctest::Approx(std::pow(2.0, 0.1) - 1));

    const std::vector<double> empty;
    CHECK_THROWS_AS(check_slow_variation(make_standard_phi({1.0}), two, empty), DomainError);
}

TEST_CASE("slow variation property over the standard family") {
    const std::vector<double> lambdas{0.5, 2.0, 10.0};
    // |r_j| = 3 needs t near 1e64 before lambda = 10 drops below tol
    const auto grid = geometric_grid(1.0, 1e64);
    for (double a : {-3.0, -1.5, -0.5, 0.5, 1.0, 2.0, 3.0}) {
        for (double b : {-3.0, 0.0, 3.0}) {
            auto rep = check_slow_variation(make_standard_phi({a, b}), lambdas, grid);
            CHECK_MESSAGE(rep.pass, "exponents " << a << ", " << b);
        }
    }
    for (double alpha : {-1.0, -0.1, 0.1, 1.0}) {
        auto rep = check_slow_variation([alpha](double t) { return std::pow(t, alpha); }, lambdas, grid);
        CHECK_FALSE(rep.pass);
    }
}

TEST_CASE("phi_s") {
    const auto one = make_standard_phi({});
    CHECK(phi_s(one, 2.0)(5.0) == doctest::Approx(5.0));
    CHECK(phi_s(make_standard_phi({1.0}), 1.0)(4.0) == doctest::Approx(2.62652337503645).epsilon(1e-13));
    CHECK(phi_s(make_standard_phi({0.5, 0.7}), 3.0)(0.5) == 1.0);
    CHECK_THROWS_AS((void)phi_s(one, 1.0)(0.0), DomainError);
}

TEST_CASE("phi_s at 1 + |xi|^2 reproduces the weight") {
    for (const auto& ex : std::vector<std::vector<double>>{{}, {1}, {0.5, 0.7}, {-2, 3}}) {
        const auto phi = make_standard_phi(ex);
        for (double s : {-2.0, 0.0, 1.5}) {
            const auto f = phi_s(phi, s);
            const RefinedIndex idx{s, phi};
            for (int a = 0; a <= 10000; a = a < 10 ? a + 1 : a * 3) {
                for (int b : {0, 7, a}) {
                    const Mode xi{a, b};
                    const double t = 1.0 + double(a) * a + double(b) * b;
                    CHECK(f(t) == doctest::Approx(weight(xi, idx)).epsilon(1e-13));
                }
            }
        }
    }
}

TEST_CASE("embedding criterion lexicographic rule") {
    CHECK(embedding_criterion(make_standard_phi({0.6})) == EmbeddingVerdict::converges);
    CHECK(embedding_criterion(make_standard_phi({0.5})) == EmbeddingVerdict::diverges);
    CHECK(embedding_criterion(make_standard_phi({0.5, 0.7})) == EmbeddingVerdict::converges);
    CHECK(embedding_criterion(make_standard_phi({0.5, 0.5})) == EmbeddingVerdict::diverges);
    CHECK(embedding_criterion(make_standard_phi({})) == EmbeddingVerdict::diverges);
    CHECK(embedding_criterion(make_standard_phi({1.0, -5.0})) == EmbeddingVerdict::converges);
    CHECK(embedding_criterion(make_standard_phi({0.4, 9.0})) == EmbeddingVerdict::diverges);
}

TEST_CASE("embedding integral partial sums") {
    const auto r = embedding_integral_numeric(make_standard_phi({}), std::exp(10.0));
    CHECK(r.partial.back() == doctest::Approx(10.0).epsilon(1e-12));
    for (std::size_t i = 1; i < r.partial.size(); ++i) CHECK(r.partial[i] >= r.partial[i - 1]);

    const auto c = embedding_integral_numeric(make_standard_phi({0.6}), 1e8);
    for (std::size_t i = 2; i + 1 < c.increments.size(); ++i) CHECK(c.increments[i] < c.increments[i - 1]);

    // for r = 0.5 the integrand is 1/(t L1(t)); over [T1, T2] the integral approaches ln L1(T2) - ln L1(T1)
    const auto h = embedding_integral_numeric(make_standard_phi({0.5}), 1e8);
    const double T1 = h.T[h.T.size() - 10];
    const double T2 = h.T.back();
    const double tail = h.partial.back() - h.partial[h.partial.size() - 10];
    const double closed = std::log(iterated_log(1, T2)) - std::log(iterated_log(1, T1));
    CHECK(tail == doctest::Approx(closed).epsilon(1e-3));
    CHECK(numeric_embedding_verdict(make_standard_phi({0.5})).verdict == EmbeddingVerdict::diverges);
}

TEST_CASE("numeric octave-ratio verdict agrees with the analytic rule") {
    for (const auto& ex : std::vector<std::vector<double>>{{0}, {0.4}, {0.5}, {0.6}, {1}, {0.5, 0.5}, {0.5, 0.7}}) {
        const auto phi = make_standard_phi(ex);
        const auto num = numeric_embedding_verdict(phi);
        CHECK_MESSAGE(num.verdict == embedding_criterion(phi), phi.to_string());
    }
}
