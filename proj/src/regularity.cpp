#include "refscale/regularity.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "refscale/errors.hpp"

namespace refscale {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double binomial(int n, int k) {
    double out = 1.0;
    for (int i = 1; i <= k; ++i) out = out * (n - k + i) / i;
    return out;
}

// One shell of the lattice grouped by |xi|^2: (ln <xi>, ln L1(<xi>), count).
struct ShellPoints {
    std::vector<double> log_b;
    std::vector<double> log_l;
    std::vector<double> count;
};

struct ModelEval {
    double log_sum = 0.0;
    double d_s = 0.0;
    double d_r = 0.0;
};

ModelEval model(const ShellPoints& sh, double s, double r, int n) {
    // log sum_i c_i exp((-2s - n) lb_i + 2 r ll_i) and its derivatives
    double top = -kInf;
    std::vector<double> e(sh.log_b.size());
    for (std::size_t i = 0; i < e.size(); ++i) {
        e[i] = (-2.0 * s - n) * sh.log_b[i] + 2.0 * r * sh.log_l[i] + std::log(sh.count[i]);
        top = std::max(top, e[i]);
    }
    double z = 0.0, zb = 0.0, zl = 0.0;
    for (std::size_t i = 0; i < e.size(); ++i) {
        const double w = std::exp(e[i] - top);
        z += w;
        zb += w * sh.log_b[i];
        zl += w * sh.log_l[i];
    }
    return {top + std::log(z), -2.0 * zb / z, 2.0 * zl / z};
}

struct FitResult {
    double log_c = 0.0;
    double s = 0.0;
    double r = 0.0;
    double rms = kInf;
};

FitResult gauss_newton(const std::vector<ShellPoints>& shells, const std::vector<double>& y, int n, double s0,
                       double r0, bool with_log) {
    const int m = static_cast<int>(y.size());
    const int k = with_log ? 3 : 2;
    auto evaluate = [&](const Eigen::Vector3d& p, Eigen::VectorXd& res, Eigen::MatrixXd* J) {
        res.resize(m);
        if (J) J->resize(m, k);
        for (int i = 0; i < m; ++i) {
            const ModelEval me = model(shells[static_cast<std::size_t>(i)], p(1), p(2), n);
            res(i) = y[static_cast<std::size_t>(i)] - p(0) - me.log_sum;
            if (J) {
                (*J)(i, 0) = 1.0;
                (*J)(i, 1) = me.d_s;
                if (with_log) (*J)(i, 2) = me.d_r;
            }
        }
        return res.squaredNorm();
    };
    Eigen::Vector3d p(0.0, s0, with_log ? r0 : 0.0);
    Eigen::VectorXd res;
    Eigen::MatrixXd J;
    {
        // closed-form constant for the starting point
        evaluate(p, res, nullptr);
        p(0) = res.mean();
    }
    double cost = evaluate(p, res, &J);
    for (int it = 0; it < 200; ++it) {
        const Eigen::VectorXd d = J.colPivHouseholderQr().solve(res);
        Eigen::Vector3d step = Eigen::Vector3d::Zero();
        step.head(k) = d;
        double t = 1.0;
        Eigen::VectorXd trial_res;
        double trial = kInf;
        for (int h = 0; h < 40; ++h) {
            trial = evaluate(p + t * step, trial_res, nullptr);
            if (std::isfinite(trial) && trial <= cost) break;
            t *= 0.5;
        }
        if (!(std::isfinite(trial) && trial <= cost)) break;
        p += t * step;
        const bool done = (t * step).cwiseAbs().maxCoeff() < 1e-13 || cost - trial <= 1e-15 * (1.0 + cost);
        cost = evaluate(p, res, &J);
        if (done) break;
    }
    return {p(0), p(1), p(2), std::sqrt(cost / m)};
}

}  // namespace

// ---------------------------------------------------------------------------

CutoffFunction::CutoffFunction(FourierField chi) : chi_(std::move(chi)) {
    chi_.mark_real_valued(1e-12);
    const int N = 8 * (2 * chi_.band() + 1);
    const auto g = synthesize(chi_, N);
    for (const auto& v : g.values) {
        if (v.real() < -1e-12) throw SpecMismatch("cutoff function takes negative values");
    }
}

CutoffFunction CutoffFunction::bump(ManifoldSpec spec, int band) {
    if (band < 0) throw DomainError("cutoff band must be nonnegative");
    std::vector<double> c(static_cast<std::size_t>(2 * band + 1));
    const double scale = std::pow(4.0, -band);
    for (int j = -band; j <= band; ++j) c[static_cast<std::size_t>(j + band)] = binomial(2 * band, band + j) * scale;
    FourierField chi(spec, band);
    for (int a = -band; a <= band; ++a) {
        if (spec.n == 1) {
            chi[{a, 0}] = c[static_cast<std::size_t>(a + band)];
        } else {
            for (int b = -band; b <= band; ++b) {
                chi[{a, b}] = c[static_cast<std::size_t>(a + band)] * c[static_cast<std::size_t>(b + band)];
            }
        }
    }
    return CutoffFunction(std::move(chi));
}

CutoffFunction CutoffFunction::constant_one(ManifoldSpec spec) { return CutoffFunction(FourierField::exponential(spec, {0, 0})); }

FourierField localize(const FourierField& u, const CutoffFunction& chi) {
    const FourierField& c = chi.field();
    if (c.dim() != u.dim()) throw SpecMismatch("cutoff and field live on different manifolds");
    FourierField out(u.spec(), u.band() + c.band());
    const auto uc = u.coefficients();
    const auto cc = c.coefficients();
    for (std::size_t j = 0; j < cc.size(); ++j) {
        if (cc[j] == Complex{}) continue;
        const Mode eta = c.mode_at(j);
        for (std::size_t i = 0; i < uc.size(); ++i) {
            if (uc[i] == Complex{}) continue;
            const Mode xi = u.mode_at(i);
            out[{xi[0] + eta[0], xi[1] + eta[1]}] += cc[j] * uc[i];
        }
    }
    return out;
}

// ---------------------------------------------------------------------------

SmoothnessEstimate smoothness_fit(const FourierField& u, const SmoothnessFitOptions& options) {
    const int n = u.dim();
    const int K = options.K_reference > 0 ? options.K_reference : u.band();
    SmoothnessEstimate est;

    // shells R = 2^j, R < <xi> <= 2R, grouped by |xi|^2
    std::vector<double> radii;
    for (double R = 1.0; 2.0 * R <= u.band(); R *= 2.0) radii.push_back(R);
    std::vector<std::map<long long, double>> groups(radii.size());
    std::vector<double> sums(radii.size(), 0.0);
    const auto coeffs = u.coefficients();
    double total = 0.0;
    for (std::size_t i = 0; i < coeffs.size(); ++i) {
        const Mode xi = u.mode_at(i);
        const long long q = static_cast<long long>(xi[0]) * xi[0] + static_cast<long long>(xi[1]) * xi[1];
        const double b = std::sqrt(1.0 + static_cast<double>(q));
        const double m = std::norm(coeffs[i]);
        total += m;
        if (b <= 1.0) continue;
        int j = static_cast<int>(std::floor(std::log2(b)));  // 2^j < b <= 2^{j+1}
        if (std::ldexp(1.0, j) >= b) --j;
        if (std::ldexp(1.0, j + 1) < b) ++j;
        if (j < 0 || j >= static_cast<int>(radii.size())) continue;
        const auto jj = static_cast<std::size_t>(j);
        sums[jj] += m;
        groups[jj][q] += 1.0;
    }

    std::vector<ShellPoints> window;
    std::vector<double> y;
    bool flat = false;
    for (std::size_t j = 0; j < radii.size(); ++j) {
        const bool in = radii[j] >= options.r_min && 4.0 * radii[j] <= K;
        est.shells.push_back({radii[j], sums[j], in});
        if (!in) continue;
        if (!(sums[j] > 1e-24 * total)) flat = true;
        ShellPoints sp;
        for (const auto& [q, cnt] : groups[j]) {
            const double b = std::sqrt(1.0 + static_cast<double>(q));
            sp.log_b.push_back(std::log(b));
            sp.log_l.push_back(std::log(iterated_log(1, b)));
            sp.count.push_back(cnt);
        }
        window.push_back(std::move(sp));
        y.push_back(sums[j] > 0.0 ? std::log(sums[j]) : -kInf);
    }
    if (window.size() < 3) throw DomainError("insufficient dyadic shells in the fit window");
    if (total == 0.0 || flat) {
        est.s_star = kInf;
        est.model = "flat";
        est.valid = true;
        return est;
    }

    // starting slope from a straight line through the end shells
    const double slope = (y.back() - y.front()) / (std::log(2.0) * static_cast<double>(window.size() - 1));
    const double s0 = -slope / 2.0;
    const FitResult pw = gauss_newton(window, y, n, s0, 0.0, false);
    FitResult lg;
    for (double r0 : {0.0, -2.0, -1.0, 1.0, 2.0}) {
        const FitResult t = gauss_newton(window, y, n, pw.s, r0, true);
        if (t.rms < lg.rms) lg = t;
    }
    est.s_power = pw.s;
    est.residual_power = pw.rms;
    est.s_log = lg.s;
    est.r_log = lg.r;
    est.residual_log = lg.rms;
    // three shells interpolate the refined model exactly; it needs a spare
    // shell, and a power fit at rounding level leaves nothing to explain
    const bool log_eligible = window.size() >= 4 && pw.rms > 1e-10;
    if (log_eligible && lg.rms * options.log_model_gain <= pw.rms) {
        est.model = "log";
        est.s_star = lg.s;
        est.r_star = lg.r;
        est.residual = lg.rms;
    } else {
        est.model = "power";
        est.s_star = pw.s;
        est.r_star = 0.0;
        est.residual = pw.rms;
    }
    est.valid = est.residual <= options.max_residual;
    return est;
}

FourierField power_decay_field(ManifoldSpec spec, int K, double a, double r, bool zero_mean) {
    FourierField u(spec, K);
    auto c = u.coefficients();
    for (std::size_t i = 0; i < c.size(); ++i) {
        const Mode xi = u.mode_at(i);
        const double b = bracket(xi);
        c[i] = std::pow(b, -a) * std::pow(iterated_log(1, b), r);
    }
    if (zero_mean) u[{0, 0}] = 0.0;
    u.mark_real_valued();
    return u;
}

// ---------------------------------------------------------------------------

LiftingReport lifting_experiment(const PdoSystem& A, const std::vector<FourierField>& f, double s,
                                 const SlowlyVaryingFunction& phi, int K, const std::optional<CutoffFunction>& chi,
                                 double rank_tol) {
    LiftingReport rep;
    const GalerkinOperator G = truncate(A, K, s, phi);
    const FredholmReport fr = fredholm_report(G, rank_tol);
    std::vector<FourierField> fK;
    for (const auto& fj : f) fK.push_back(fj.with_band(K));
    const SolveOutcome sol = solve(G, fr, fK);
    rep.solvable = sol.solvable;
    rep.column_orders = A.column_orders();
    if (!sol.solvable) return rep;
    rep.residual = sol.residual;

    auto least = [](const std::vector<SmoothnessEstimate>& e) {
        double m = kInf;
        for (const auto& x : e) m = std::min(m, x.s_star);
        return m;
    };

    for (const auto& fj : fK) rep.estimate_f.push_back(smoothness_fit(fj));
    for (const auto& uk : sol.u) rep.estimate_u.push_back(smoothness_fit(uk));
    rep.s_star_f = least(rep.estimate_f);
    for (const auto& e : rep.estimate_u) rep.gaps.push_back(e.s_star - rep.s_star_f);

    if (chi) {
        SmoothnessFitOptions opt;
        opt.r_min = std::max(4.0, 8.0 * chi->band());
        opt.K_reference = K;
        for (const auto& fj : fK) rep.localized_f.push_back(smoothness_fit(localize(fj, *chi), opt));
        for (const auto& uk : sol.u) rep.localized_u.push_back(smoothness_fit(localize(uk, *chi), opt));
        const double sf = least(rep.localized_f);
        for (const auto& e : rep.localized_u) rep.localized_gaps.push_back(e.s_star - sf);
    }
    return rep;
}

// ---------------------------------------------------------------------------

ContinuityReport continuity_check(const FourierField& u, int rho, const SlowlyVaryingFunction& phi) {
    if (rho < 0) throw DomainError("rho must be nonnegative");
    ContinuityReport rep;
    const int n = u.dim();
    const int K = u.band();
    const RefinedIndex idx{rho + n / 2.0, phi};

    rep.criterion = embedding_criterion(phi);
    if (rep.criterion == EmbeddingVerdict::undecidable) rep.criterion = numeric_embedding_verdict(phi).verdict;
    rep.criterion_holds = rep.criterion == EmbeddingVerdict::converges;

    for (int k : {K / 4, K / 2, K}) rep.norms.push_back(norm(u.with_band(k), idx));

    // dyadic increments of the rho-th derivative along the first axis
    for (int top = 1, prev = 0; prev < K; prev = top, top = std::min(2 * top, K)) {
        FourierField band(u.spec(), top);
        bool any = false;
        const auto c = u.coefficients();
        for (std::size_t i = 0; i < c.size(); ++i) {
            const Mode xi = u.mode_at(i);
            const int inf_norm = std::max(std::abs(xi[0]), std::abs(xi[1]));
            if (inf_norm <= prev || inf_norm > top || c[i] == Complex{}) continue;
            band[xi] = std::pow(Complex(0.0, xi[0]), rho) * c[i];
            any = true;
        }
        double sup = 0.0;
        if (any) {
            const auto g = synthesize(band, 4 * (2 * top + 1));
            for (const auto& v : g.values) sup = std::max(sup, std::abs(v));
        }
        rep.sup_increments.push_back(sup);
    }

    bool polynomial = false;
    try {
        rep.estimate = smoothness_fit(u);
        polynomial = rep.estimate.model == "flat";
    } catch (const DomainError&) {
        polynomial = true;
    }

    // trailing zeros mean the partial sums have stopped changing
    const auto& inc = rep.sup_increments;
    std::size_t last = inc.size();
    while (last > 0 && inc[last - 1] == 0.0) --last;
    if (last < inc.size() || inc.empty()) {
        rep.increments_decay = true;
        rep.increment_slope = -kInf;
    } else {
        const std::size_t first = last > 6 ? last - 6 : 0;
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        int m = 0;
        for (std::size_t j = first; j < last; ++j) {
            if (inc[j] <= 0.0) continue;
            const double x = std::log(static_cast<double>(j + 1));
            const double yv = std::log(inc[j]);
            sx += x;
            sy += yv;
            sxx += x * x;
            sxy += x * yv;
            ++m;
        }
        rep.increment_slope = m >= 2 ? (m * sxy - sx * sy) / (m * sxx - sx * sx) : 0.0;
        rep.increments_decay = rep.increment_slope < -1.0;
    }

    if (polynomial) {
        rep.membership_ok = true;
        rep.certified = true;
        rep.verdict = "continuous (trigonometric polynomial)";
        return rep;
    }

    const double sigma = rho + n / 2.0;
    const double r1 = phi.exponents().empty() ? 0.0 : phi.exponents()[0];
    if (std::abs(rep.estimate.s_star - sigma) < 0.05) {
        rep.membership_ok = rep.estimate.r_star + r1 < -0.5;
    } else {
        rep.membership_ok = rep.estimate.s_star > sigma;
    }

    rep.certified = rep.criterion_holds && rep.membership_ok && rep.increments_decay;
    if (rep.certified) {
        rep.verdict = "continuous (certified numerically)";
    } else if (!rep.criterion_holds) {
        rep.verdict = "not certified: embedding criterion fails";
    } else if (!rep.membership_ok) {
        rep.verdict = "not certified: membership fails";
    } else {
        rep.verdict = "not certified: increments do not decay";
    }
    return rep;
}

}  // namespace refscale
