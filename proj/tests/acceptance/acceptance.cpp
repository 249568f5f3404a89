// One line per acceptance criterion; exit status is the number of failures.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "refscale/fredholm.hpp"
#include "refscale/refined_spaces.hpp"
#include "refscale/regularity.hpp"
#include "refscale/slowly_varying.hpp"
#include "refscale/standard_systems.hpp"

using namespace refscale;

namespace {

const ManifoldSpec T1{1};
const ManifoldSpec T2{2};
const SlowlyVaryingFunction ONE{};

struct Outcome {
    bool pass = true;
    std::ostringstream detail;

    void require(bool ok, const std::string& what) {
        if (!ok) {
            pass = false;
            detail << " [failed: " << what << "]";
        }
    }
};

PdoSystem scalar(ClassicalSymbol a) { return PdoSystem::scalar(std::move(a)); }

PdoSystem diagonal_helmholtz() {
    PdoSystem A(1, 2);
    A.set(0, 0, systems::one_minus_laplacian(1));
    A.set(1, 1, systems::one_minus_laplacian(1));
    return A;
}

// 1. index of the shift-Toeplitz operator
void index_correctness(Outcome& o) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto A = scalar(systems::shift_toeplitz());
    for (int K : {32, 64, 128}) {
        const auto rep = fredholm_report(truncate(A, K, 0, ONE));
        o.detail << " K=" << K << ":(" << rep.dim_kernel << "," << rep.dim_cokernel << "," << rep.index
                 << ",gap=" << rep.sigma_gap << ")";
        o.require(rep.index == -1 && rep.dim_kernel == 0 && rep.dim_cokernel == 1, "dims at K=" + std::to_string(K));
        o.require(rep.sigma_gap >= 1e3, "sigma_gap at K=" + std::to_string(K));
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    o.detail << " time=" << secs << "s";
    o.require(secs < 5.0, "runtime");
}

// 2. index independent of (s, phi)
void index_invariance(Outcome& o) {
    const std::vector<RefinedIndex> idx{
        {0, ONE}, {2, ONE}, {-1, make_standard_phi({1})}, {0.5, make_standard_phi({0.6})}};
    const std::vector<std::pair<std::string, PdoSystem>> cases{
        {"toeplitz", scalar(systems::shift_toeplitz())},
        {"1-lap", scalar(systems::one_minus_laplacian(1))},
        {"-lap", scalar(systems::minus_laplacian(1))},
        {"CR", systems::cauchy_riemann()},
    };
    for (const auto& [name, A] : cases) {
        const auto t = index_invariance_experiment(A, idx, {8, 16});
        o.detail << " " << name << "=" << t.rows.front().index;
        o.require(t.indices_agree && !t.any_ambiguous, name);
    }
}

// 3. scalar operators on the 2-torus have index 0
void scalar_index_2d(Outcome& o) {
    for (const auto& [name, A] : std::vector<std::pair<std::string, PdoSystem>>{
             {"1-lap", scalar(systems::one_minus_laplacian(2))}, {"perturbed", systems::perturbed_helmholtz(0.1)}}) {
        for (int K : {8, 16}) {
            const auto rep = fredholm_report(truncate(A, K, 0, ONE));
            o.detail << " " << name << "@" << K << "=" << rep.index;
            o.require(rep.index == 0 && !rep.ambiguous, name + " K=" + std::to_string(K));
        }
    }
}

// 4. range: orthogonality to the cokernel
void range_characterization(Outcome& o) {
    const int K = 16;
    const auto G = truncate(scalar(systems::minus_laplacian(1)), K, 0, ONE);
    const auto rep = fredholm_report(G);
    const auto e1 = solve(G, rep, {FourierField::exponential(T1, {1, 0}, K)});
    o.detail << " e1: residual=" << e1.residual;
    o.require(e1.solvable && e1.residual <= 1e-10, "e1 solvable");
    const auto one = solvability_test({FourierField::exponential(T1, {0, 0}, K)}, rep);
    const double defect = one.defect.empty() ? 0.0 : std::abs(one.defect.front());
    o.detail << " 1: defect=" << defect;
    o.require(!one.solvable && std::abs(defect - 2 * std::numbers::pi) <= 1e-10, "constant rejected with 2 pi");

    const auto T = truncate(scalar(systems::shift_toeplitz()), 32, 0, ONE);
    const auto e0 = solvability_test({FourierField::exponential(T1, {0, 0}, 32)}, fredholm_report(T));
    o.detail << " toeplitz e0 solvable=" << e0.solvable;
    o.require(!e0.solvable, "toeplitz e0 rejected");
}

// 5. multiplier description of the norm
void multiplier_identity(Outcome& o) {
    double worst = 0.0;
    const std::vector<SlowlyVaryingFunction> phis{ONE, make_standard_phi({1}), make_standard_phi({0.5, 0.7})};
    for (int i = 0; i < 100; ++i) {
        const auto u = random_field(T1, 32, 20240531u + std::uint64_t(i));
        for (double s : {-2.0, -0.5, 0.0, 1.0, 3.0}) {
            for (const auto& phi : phis) {
                const RefinedIndex idx{s, phi};
                const double a = norm(u, idx);
                worst = std::max(worst, std::abs(multiplier_norm(u, idx) - a) / a);
            }
        }
    }
    o.detail << " max_rel_err=" << worst;
    o.require(worst <= 1e-12, "relative error");
}

// 6. embedding criterion
void embedding(Outcome& o) {
    const std::vector<std::vector<double>> tuples{{0.4}, {0.5}, {0.6}, {1}, {0.5, 0.4}, {0.5, 0.7}, {0.5, 0.5, 1}};
    int agree = 0;
    for (const auto& r : tuples) {
        const auto phi = make_standard_phi(r);
        agree += embedding_criterion(phi) == numeric_embedding_verdict(phi).verdict;
    }
    o.detail << " verdicts agree " << agree << "/7";
    o.require(agree == 7, "criterion vs numeric verdict");

    const std::vector<int> Ks{4096, 8192, 16384, 32768};
    auto growth = [&](double r) {
        const auto rows = embedding_ratio_experiment(0, make_standard_phi({r}), Ks, T1);
        std::vector<double> g;
        for (std::size_t j = 1; j < rows.size(); ++j) g.push_back(rows[j].ratio / rows[j - 1].ratio - 1.0);
        return g;
    };
    const auto g6 = growth(0.6);
    const auto g4 = growth(0.4);
    o.detail << " growth/octave 0.6:";
    for (double g : g6) o.detail << " " << g;
    o.detail << " 0.4:";
    for (double g : g4) o.detail << " " << g;
    for (double g : g6) o.require(g < 0.02, "standard(0.6) growth < 2%");
    bool big = true;
    for (double g : g4) big = big && g >= 0.05;
    o.require(big, "standard(0.4) growth >= 5%");
}

// 7. a priori constants
void apriori(Outcome& o) {
    const auto H = scalar(systems::one_minus_laplacian(1));
    for (int K : {8, 16, 32}) {
        const double b = std::sqrt(1.0 + double(K) * K);
        const double closed = std::sqrt(std::pow(b, 4) / (std::pow(b, 4) + std::pow(b, -2)));
        const double c = apriori_constant(H, 0, ONE, 1, K);
        o.require(std::abs(c - closed) <= 1e-10, "1 - lap closed form at K=" + std::to_string(K));
    }
    const auto cr = apriori_report(systems::cauchy_riemann(), 0, ONE, 1, {16, 32, 64});
    const double lo = *std::min_element(cr.c_quad.begin(), cr.c_quad.end());
    const double hi = *std::max_element(cr.c_quad.begin(), cr.c_quad.end());
    o.detail << " CR variation=" << hi / lo - 1.0;
    o.require(hi / lo - 1.0 <= 0.1, "CR bounded");
    const auto d1 = apriori_report(scalar(systems::partial(2, 0)), 0, ONE, 1, {4, 8, 16});
    o.detail << " d1 growth:";
    for (double g : d1.growth) {
        o.detail << " " << g;
        o.require(g >= 2.0, "d1 growth per doubling");
    }
}

// 8. projectors and restricted solves
void projector_contracts(Outcome& o) {
    const std::vector<std::pair<std::string, std::pair<PdoSystem, int>>> cases{
        {"-lap", {scalar(systems::minus_laplacian(1)), 16}},
        {"toeplitz", {scalar(systems::shift_toeplitz()), 16}},
        {"1-lap", {scalar(systems::one_minus_laplacian(1)), 16}},
        {"CR", {systems::cauchy_riemann(), 6}},
        {"1-lap 2d", {scalar(systems::one_minus_laplacian(2)), 6}},
        {"perturbed", {systems::perturbed_helmholtz(0.1), 6}},
    };
    double idem = 0.0, resid = 0.0;
    for (const auto& [name, c] : cases) {
        const auto& [A, K] = c;
        const auto G = truncate(A, K, 0, ONE);
        const auto rep = fredholm_report(G);
        const auto pp = projectors(G, rep);
        const auto P = pp.P();
        const auto Pp = pp.P_plus();
        idem = std::max({idem, (P * P - P).cwiseAbs().maxCoeff(), (Pp * Pp - Pp).cwiseAbs().maxCoeff()});

        // data in the range: f = A u0 for a band-limited u0, normalized
        std::vector<FourierField> u0;
        for (int k = 0; k < A.size(); ++k) u0.push_back(random_field(ManifoldSpec(A.dim()), K, 7 + k));
        auto f = apply_system(A, u0);
        double fn = 0.0;
        for (const auto& fk : f) fn = std::hypot(fn, gamma_norm(fk));
        for (auto& fk : f) fk *= 1.0 / fn;
        const auto out = solve(G, rep, f);
        o.require(out.solvable, name + " data in the range");
        resid = std::max(resid, out.residual);

        if (name == "-lap") {
            const Eigen::Index N = P.rows();
            Eigen::MatrixXcd M = Eigen::MatrixXcd::Identity(N, N);
            const auto z = Eigen::Index(band_index(1, K, {0, 0}));
            M(z, z) = 0.0;
            const double d = std::max((P - M).cwiseAbs().maxCoeff(), (Pp - M).cwiseAbs().maxCoeff());
            o.detail << " mean_projector_dist=" << d;
            o.require(d <= 1e-10, "-lap mean projector");
        }
    }
    o.detail << " idempotence=" << idem << " max_residual=" << resid;
    o.require(idem <= 1e-10, "idempotence");
    o.require(resid <= 1e-10, "restricted solve residual");
}

// 9. smoothness lifting
void regularity_lifting(Outcome& o) {
    {
        const int K = 4096;
        std::vector<FourierField> f{power_decay_field(T1, K, 2.0), power_decay_field(T1, K, 1.5)};
        const auto rep = lifting_experiment(diagonal_helmholtz(), f, 0, ONE, K, CutoffFunction::bump(T1, 3));
        o.require(rep.solvable, "diagonal solvable");
        // each component lifts its own data by m_k = 2
        for (int k = 0; k < 2; ++k) {
            const double gap = rep.estimate_u[k].s_star - rep.estimate_f[k].s_star;
            const double loc = rep.localized_u[k].s_star - rep.localized_f[k].s_star;
            o.detail << " diag" << k << ": gap=" << gap << " localized=" << loc;
            o.require(std::abs(gap - 2.0) <= 0.05, "diagonal gap");
            o.require(std::abs(loc - gap) <= 0.05, "diagonal localized");
        }
    }
    {
        const int K = 128;
        std::vector<FourierField> f{power_decay_field(T2, K, 3.0, 0.0, true), FourierField(T2, K)};
        const auto rep = lifting_experiment(systems::cauchy_riemann(), f, 0, ONE, K, CutoffFunction::bump(T2, 1));
        o.require(rep.solvable, "CR solvable");
        for (std::size_t k = 0; k < rep.gaps.size(); ++k) {
            o.detail << " CR" << k << ": gap=" << rep.gaps[k] << " localized=" << rep.localized_gaps[k];
            o.require(std::abs(rep.gaps[k] - 1.0) <= 0.05, "CR gap");
            o.require(std::abs(rep.localized_gaps[k] - rep.gaps[k]) <= 0.05, "CR localized");
        }
    }
}

// 10. continuity certificate
void continuity(Outcome& o) {
    const int K = 4096;
    const auto phi = make_standard_phi({0.6});
    const auto good = continuity_check(power_decay_field(T1, K, 1.0, -1.5), 0, phi);
    const auto bad = continuity_check(power_decay_field(T1, K, 1.0, -0.5), 0, phi);
    o.detail << " r=-1.5: " << good.verdict << "; r=-0.5: " << bad.verdict;
    o.require(good.certified, "r = -1.5 certified");
    o.require(!bad.certified && !bad.membership_ok, "r = -0.5 rejected by membership");

    // phi = 1: ratio^2 grows like the harmonic sum, by a fixed amount per octave
    const std::vector<int> Ks{256, 1024, 4096, 16384, 65536};
    const auto rows = embedding_ratio_experiment(0, ONE, Ks, T1);
    std::vector<double> inc;
    for (std::size_t j = 1; j < rows.size(); ++j) inc.push_back(rows[j].ratio * rows[j].ratio - rows[j - 1].ratio * rows[j - 1].ratio);
    const double lo = *std::min_element(inc.begin(), inc.end());
    const double hi = *std::max_element(inc.begin(), inc.end());
    o.detail << " phi=1 ratio " << rows.front().ratio << " -> " << rows.back().ratio;
    o.require(lo > 0 && lo >= 0.9 * hi, "phi = 1 ratio unbounded");
}

// 11. slow variation
void slow_variation(Outcome& o) {
    const auto grid = geometric_grid(1.0, 1e32);
    const std::vector<double> lambdas{0.5, 2.0, 10.0};
    for (const auto& r : std::vector<std::vector<double>>{{0.5}, {-0.5}, {1}, {-1}, {0.5, 0.7}}) {
        const auto phi = make_standard_phi(r);
        o.require(check_slow_variation(phi, lambdas, grid).pass, "standard" + phi.to_string() + " passes");
    }
    for (double a : {0.1, -0.1}) {
        const auto rep = check_slow_variation([a](double t) { return std::pow(t, a); }, lambdas, grid);
        o.require(!rep.pass, "t^" + std::to_string(a) + " fails");
    }
    o.detail << " 5 standard pass, t^0.1 and t^-0.1 fail";
}

}  // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<void(Outcome&)>>> criteria{
        {"index of the shift-Toeplitz operator", index_correctness},
        {"index independent of (s, phi)", index_invariance},
        {"scalar index 0 on the 2-torus", scalar_index_2d},
        {"range characterization", range_characterization},
        {"multiplier norm identity", multiplier_identity},
        {"embedding criterion and ratios", embedding},
        {"a priori constants", apriori},
        {"projector contracts", projector_contracts},
        {"regularity lifting", regularity_lifting},
        {"continuity certificate", continuity},
        {"slow variation", slow_variation},
    };
    int failures = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Outcome o;
        try {
            criteria[i].second(o);
        } catch (const std::exception& ex) {
            o.pass = false;
            o.detail << " [exception: " << ex.what() << "]";
        }
        failures += !o.pass;
        std::printf("[%s] %2zu %s:%s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(), o.detail.str().c_str());
        std::fflush(stdout);
    }
    std::printf("%d of %zu criteria failed\n", failures, criteria.size());
    return failures;
}
