#include "refscale/slowly_varying.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "quadrature.hpp"
#include "refscale/errors.hpp"

namespace refscale {

namespace {

constexpr double kShift = std::numbers::e - 1.0;
constexpr double kInf = std::numeric_limits<double>::infinity();

void require_domain(double t) {
    if (!(t >= 1.0)) {
        std::ostringstream os;
        os << "slowly varying function evaluated at t = " << t << " < 1";
        throw DomainError(os.str());
    }
}

}  // namespace

double iterated_log(int level, double t) {
    require_domain(t);
    double v = t;
    for (int j = 0; j < level; ++j) v = std::log(kShift + v);
    return v;
}

SlowlyVaryingFunction::SlowlyVaryingFunction() = default;

SlowlyVaryingFunction SlowlyVaryingFunction::constant_one() { return {}; }

SlowlyVaryingFunction SlowlyVaryingFunction::standard(std::vector<double> exponents) {
    for (double r : exponents) {
        if (!std::isfinite(r)) throw DomainError("phi exponents must be finite");
    }
    SlowlyVaryingFunction phi;
    if (exponents.empty()) return phi;
    phi.kind_ = Kind::standard;
    phi.exponents_ = std::move(exponents);
    return phi;
}

SlowlyVaryingFunction SlowlyVaryingFunction::scaled(const SlowlyVaryingFunction& base, double power) {
    if (!std::isfinite(power)) throw DomainError("phi power must be finite");
    SlowlyVaryingFunction phi;
    phi.kind_ = Kind::scaled;
    phi.base_ = std::make_shared<const SlowlyVaryingFunction>(base);
    phi.power_ = power;
    phi.exponents_.reserve(base.exponents_.size());
    for (double r : base.exponents_) phi.exponents_.push_back(r * power);
    return phi;
}

double SlowlyVaryingFunction::log_value(double t) const {
    require_domain(t);
    double acc = 0.0;
    double l = t;
    for (double r : exponents_) {
        l = std::log(kShift + l);
        acc += r * std::log(l);
    }
    return acc;
}

double SlowlyVaryingFunction::operator()(double t) const {
    if (exponents_.empty()) {
        require_domain(t);
        return 1.0;
    }
    return std::exp(log_value(t));
}

bool SlowlyVaryingFunction::is_constant_one() const noexcept {
    return std::all_of(exponents_.begin(), exponents_.end(), [](double r) { return r == 0.0; });
}

std::string SlowlyVaryingFunction::to_string() const {
    std::ostringstream os;
    os.precision(17);
    os << '[';
    for (std::size_t i = 0; i < exponents_.size(); ++i) {
        if (i) os << ", ";
        os << exponents_[i];
    }
    os << ']';
    return os.str();
}

SlowlyVaryingFunction make_standard_phi(std::vector<double> exponents) {
    return SlowlyVaryingFunction::standard(std::move(exponents));
}

double eval_phi(const SlowlyVaryingFunction& phi, double t) { return phi(t); }

SlowlyVaryingFunction parse_phi(const std::string& text) {
    std::string body;
    for (char c : text) {
        if (c != '[' && c != ']') body.push_back(c);
    }
    std::vector<double> exps;
    std::stringstream ss(body);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const auto first = item.find_first_not_of(" \t");
        if (first == std::string::npos) continue;
        std::size_t used = 0;
        double r = 0.0;
        try {
            r = std::stod(item.substr(first), &used);
        } catch (const std::exception&) {
            throw ParseError("invalid phi exponent '" + item + "'");
        }
        if (item.find_first_not_of(" \t", first + used) != std::string::npos) {
            throw ParseError("invalid phi exponent '" + item + "'");
        }
        exps.push_back(r);
    }
    return make_standard_phi(std::move(exps));
}

// ---------------------------------------------------------------------------

std::vector<double> geometric_grid(double t0, double t_max, double factor) {
    if (!(t0 >= 1.0) || !(t_max >= t0) || !(factor > 1.0)) {
        throw DomainError("geometric grid needs 1 <= t0 <= t_max and factor > 1");
    }
    std::vector<double> grid;
    for (double t = t0; t <= t_max * (1.0 + 1e-12); t *= factor) grid.push_back(t);
    if (grid.back() < t_max * (1.0 - 1e-12)) grid.push_back(t_max);
    return grid;
}

std::vector<double> default_slow_variation_grid() { return geometric_grid(1.0, 1e6); }

SlowVariationReport check_slow_variation(const std::function<double(double)>& phi,
                                         std::span<const double> lambdas,
                                         std::span<const double> t_grid, double tol) {
    if (t_grid.empty()) throw DomainError("slow-variation check needs a nonempty grid");
    if (!std::is_sorted(t_grid.begin(), t_grid.end()) || t_grid.front() < 1.0) {
        throw DomainError("slow-variation grid must be increasing and >= 1");
    }
    const double t_top = t_grid.back();
    SlowVariationReport report;
    report.pass = true;
    for (double lambda : lambdas) {
        if (!(lambda > 0.0)) throw DomainError("lambda must be positive");
        SlowVariationReport::PerLambda entry;
        entry.lambda = lambda;
        std::vector<double> tail;
        for (double t : t_grid) {
            if (lambda * t < 1.0) continue;
            const double d = std::abs(phi(lambda * t) / phi(t) - 1.0);
            entry.deviations.push_back(d);
            if (t >= t_top / 8.0 * (1.0 - 1e-12)) tail.push_back(d);
        }
        if (tail.empty()) throw DomainError("grid has no admissible points for lambda");
        entry.deviation_at_top = tail.back();
        entry.max_deviation_tail = *std::max_element(tail.begin(), tail.end());
        const bool all_zero =
            std::all_of(tail.begin(), tail.end(), [](double d) { return d <= 1e-14; });
        bool decreasing = tail.size() >= 2;
        for (std::size_t i = 1; i < tail.size(); ++i) {
            if (!(tail[i] < tail[i - 1] * (1.0 - 1e-9))) decreasing = false;
        }
        entry.decreasing = all_zero || decreasing;
        entry.pass = entry.deviation_at_top < tol && entry.decreasing;
        report.pass = report.pass && entry.pass;
        report.per_lambda.push_back(std::move(entry));
    }
    return report;
}

SlowVariationReport check_slow_variation(const SlowlyVaryingFunction& phi,
                                         std::span<const double> lambdas,
                                         std::span<const double> t_grid, double tol) {
    return check_slow_variation([&phi](double t) { return phi(t); }, lambdas, t_grid, tol);
}

// ---------------------------------------------------------------------------

double PhiS::operator()(double t) const {
    if (!(t > 0.0)) throw DomainError("phi_s evaluated at t <= 0");
    if (t < 1.0) return phi_(1.0);
    return std::pow(t, s_ / 2.0) * phi_(std::sqrt(t));
}

PhiS phi_s(const SlowlyVaryingFunction& phi, double s) { return PhiS(phi, s); }

// ---------------------------------------------------------------------------

const char* to_string(EmbeddingVerdict v) {
    switch (v) {
        case EmbeddingVerdict::converges: return "converges";
        case EmbeddingVerdict::diverges: return "diverges";
        case EmbeddingVerdict::undecidable: return "undecidable";
    }
    return "undecidable";
}

EmbeddingVerdict embedding_criterion(const SlowlyVaryingFunction& phi) {
    if (phi.kind() == SlowlyVaryingFunction::Kind::scaled) return EmbeddingVerdict::undecidable;
    for (double r : phi.exponents()) {
        const double twice = 2.0 * r;
        if (std::abs(twice - 1.0) <= 1e-12) continue;
        return twice > 1.0 ? EmbeddingVerdict::converges : EmbeddingVerdict::diverges;
    }
    // Every exponent equals 1/2 (or there are none): the next missing exponent is 0.
    return EmbeddingVerdict::diverges;
}

EmbeddingIntegral embedding_integral_numeric(const SlowlyVaryingFunction& phi, double t_max) {
    if (!(t_max > 1.0)) throw DomainError("embedding integral needs t_max > 1");
    const auto& rule = detail::gauss_legendre(32);
    EmbeddingIntegral out;
    out.T = geometric_grid(2.0, std::max(2.0, t_max));
    if (t_max < 2.0) out.T = {t_max};
    double acc = 0.0;
    double y_lo = 0.0;
    for (double T : out.T) {
        // int dt/(t phi^2) = int dy / phi(e^y)^2 over y in [ln T_prev, ln T].
        const double y_hi = std::log(T);
        const double half = 0.5 * (y_hi - y_lo);
        const double mid = 0.5 * (y_hi + y_lo);
        double seg = 0.0;
        for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
            const double y = mid + half * rule.nodes[i];
            seg += rule.weights[i] * std::exp(-2.0 * phi.log_value(std::exp(y)));
        }
        seg *= half;
        if (!std::isfinite(seg)) {
            throw QuadratureFailure(std::exp(y_lo), T, "non-finite quadrature in embedding integral");
        }
        acc += seg;
        out.partial.push_back(acc);
        out.increments.push_back(seg);
        y_lo = y_hi;
    }
    return out;
}

namespace {

// log of the integrand of int dt/(t phi^2) rewritten in v = L_level(t).
double level_log_integrand(int level, double v, std::span<const double> r) {
    auto exponent = [&](int j) { return j <= static_cast<int>(r.size()) ? r[j - 1] : 0.0; };
    auto log1p_shift = [](double L) { return std::log1p(-kShift * std::exp(-L)); };

    // L_j for j = level, level-1, ..., 1 (downward; may overflow to +inf).
    std::vector<double> down(level + 1, 0.0);
    down[level] = v;
    for (int j = level - 1; j >= 1; --j) {
        down[j] = std::isinf(down[j + 1]) ? kInf : std::exp(down[j + 1]) - kShift;
    }

    double g = 0.0;
    // Jacobian of t -> L_level combined with the phi factors of lower levels:
    // sum_{j=2}^{level} [(1 - 2 r_{j-1}) L_j - 2 r_{j-1} log1p(-(e-1) e^{-L_j})].
    for (int j = 2; j <= level; ++j) {
        const double rj = exponent(j - 1);
        const double coeff = 1.0 - 2.0 * rj;
        if (coeff != 0.0) g += coeff * down[j];
        g -= 2.0 * rj * log1p_shift(down[j]);
    }
    // e^{L_1} / t.
    g -= log1p_shift(down[1]);
    // Factors of phi at this level and above.
    double L = v;
    for (int j = level; j <= static_cast<int>(r.size()); ++j) {
        if (j > level) L = std::log(kShift + L);
        g -= 2.0 * exponent(j) * std::log(L);
    }
    return g;
}

double log_sum_exp(const std::vector<double>& xs) {
    double m = -kInf;
    for (double x : xs) m = std::max(m, x);
    if (std::isinf(m)) return m;
    double acc = 0.0;
    for (double x : xs) acc += std::exp(x - m);
    return m + std::log(acc);
}

}  // namespace

NumericEmbeddingVerdict numeric_embedding_verdict(const SlowlyVaryingFunction& phi,
                                                  const OctaveRatioOptions& options) {
    const auto exps = phi.exponents();
    const auto& rule = detail::gauss_legendre(24);
    const int max_level = static_cast<int>(exps.size()) + 1;
    const double margin = options.log2_margin * std::numbers::ln2;

    NumericEmbeddingVerdict out;
    for (int level = 1; level <= max_level; ++level) {
        OctaveRatioTrace trace;
        trace.level = level;
        for (int m = 0; m < options.top_octave; ++m) {
            // Integrate over v in [2^m, 2^{m+1}] in the variable s = ln v.
            const double s_lo = m * std::numbers::ln2;
            const double s_hi = (m + 1) * std::numbers::ln2;
            const double half = 0.5 * (s_hi - s_lo);
            const double mid = 0.5 * (s_hi + s_lo);
            std::vector<double> terms;
            terms.reserve(rule.nodes.size());
            for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
                const double s = mid + half * rule.nodes[i];
                const double g = level_log_integrand(level, std::exp(s), exps);
                if (std::isnan(g)) {
                    throw QuadratureFailure(std::exp(s_lo), std::exp(s_hi),
                                            "NaN integrand at iterated-log level " +
                                                std::to_string(level));
                }
                terms.push_back(g + s + std::log(rule.weights[i] * half));
            }
            trace.log2_v.push_back(m);
            trace.log_increments.push_back(log_sum_exp(terms));
        }
        const auto& li = trace.log_increments;
        const int n = static_cast<int>(li.size());
        for (int m = 0; m + 1 < n; ++m) {
            const double d = li[m + 1] - li[m];
            trace.ratios.push_back(std::isnan(d) ? std::numeric_limits<double>::quiet_NaN()
                                                 : std::exp(d));
        }

        // Decide on the trailing window.
        const int w = std::min(options.window, n - 1);
        bool all_below = true;
        bool all_above = true;
        bool all_inside = true;
        for (int m = n - 1 - w; m < n - 1; ++m) {
            const double a = li[m];
            const double b = li[m + 1];
            double d = 0.0;
            if (std::isinf(a) && std::isinf(b) && a == b) {
                d = a > 0 ? kInf : -kInf;  // the whole tail is +inf or identically zero
            } else {
                d = b - a;
            }
            if (!(d < -margin)) all_below = false;
            if (!(d > margin)) all_above = false;
            if (!(std::abs(d) <= margin)) all_inside = false;
        }
        if (all_below) {
            trace.verdict = EmbeddingVerdict::converges;
        } else if (all_above) {
            trace.verdict = EmbeddingVerdict::diverges;
        }
        out.levels.push_back(trace);
        if (trace.verdict != EmbeddingVerdict::undecidable) {
            out.verdict = trace.verdict;
            out.decisive_level = level;
            return out;
        }
        if (!all_inside) {
            out.decisive_level = level;
            return out;  // mixed behaviour: inconclusive
        }
    }
    return out;
}

}  // namespace refscale
