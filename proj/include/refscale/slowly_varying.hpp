#pragma once

// Functional parameters of the refined scale: positive functions on [1, inf)
// that vary slowly at infinity, built from shifted iterated logarithms
//
//   L_1(t) = ln(e - 1 + t),  L_{j+1}(t) = ln(e - 1 + L_j(t)),
//   phi(t) = prod_j L_j(t)^{r_j}.
//
// The shift keeps L_j(1) = 1, so phi(1) = 1 and phi, 1/phi stay bounded on
// compact intervals while the behaviour at infinity matches the unshifted
// iterated logs.

#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace refscale {

class SlowlyVaryingFunction {
public:
    enum class Kind { constant_one, standard, scaled };

    SlowlyVaryingFunction();  // constant one

    static SlowlyVaryingFunction constant_one();
    /// Empty exponent list yields the constant one.
    static SlowlyVaryingFunction standard(std::vector<double> exponents);
    /// base(t)^power.
    static SlowlyVaryingFunction scaled(const SlowlyVaryingFunction& base, double power);

    [[nodiscard]] Kind kind() const noexcept { return kind_; }

    /// Exponents r_1..r_q of the equivalent iterated-log product (scaled kinds
    /// carry their base exponents multiplied by the power).
    [[nodiscard]] std::span<const double> exponents() const noexcept { return exponents_; }

    /// Throws DomainError for t < 1.
    [[nodiscard]] double operator()(double t) const;

    /// ln phi(t), same domain.
    [[nodiscard]] double log_value(double t) const;

    [[nodiscard]] bool is_constant_one() const noexcept;

    /// Text form used in configs, e.g. "[0.5, 0.7]".
    [[nodiscard]] std::string to_string() const;

    [[nodiscard]] const SlowlyVaryingFunction* base() const noexcept { return base_.get(); }
    [[nodiscard]] double power() const noexcept { return power_; }

private:
    Kind kind_ = Kind::constant_one;
    std::vector<double> exponents_;
    std::shared_ptr<const SlowlyVaryingFunction> base_;
    double power_ = 1.0;
};

/// Shifted iterated logarithm L_level(t), level >= 1, t >= 1.
double iterated_log(int level, double t);

SlowlyVaryingFunction make_standard_phi(std::vector<double> exponents);
double eval_phi(const SlowlyVaryingFunction& phi, double t);

/// Parses "[0.5, 0.7]" (brackets optional, empty list allowed).
SlowlyVaryingFunction parse_phi(const std::string& text);

// ---------------------------------------------------------------------------
// Slow variation

struct SlowVariationReport {
    struct PerLambda {
        double lambda = 0.0;
        std::vector<double> deviations;  // |phi(lambda t)/phi(t) - 1| along the grid
        double deviation_at_top = 0.0;
        double max_deviation_tail = 0.0;  // over the last three octaves
        bool decreasing = false;
        bool pass = false;
    };
    std::vector<PerLambda> per_lambda;
    bool pass = false;
};

/// Geometric grid t0, t0*factor, ... up to and including t_max (t_max is
/// appended when it is not hit exactly).
std::vector<double> geometric_grid(double t0, double t_max, double factor = 2.0);

/// Default grid for slow-variation checks: 2^k up to 1e6.
std::vector<double> default_slow_variation_grid();

/// Pass rule per lambda: deviation at the largest grid point below tol, and
/// the deviation decreasing over the last three grid octaves (identically zero
/// deviations count as decreasing).
SlowVariationReport check_slow_variation(const std::function<double(double)>& phi,
                                         std::span<const double> lambdas,
                                         std::span<const double> t_grid, double tol = 0.1);

SlowVariationReport check_slow_variation(const SlowlyVaryingFunction& phi,
                                         std::span<const double> lambdas,
                                         std::span<const double> t_grid, double tol = 0.1);

// ---------------------------------------------------------------------------
// phi_s(t) = t^{s/2} phi(t^{1/2}) for t >= 1 and phi(1) for 0 < t < 1.

class PhiS {
public:
    PhiS(SlowlyVaryingFunction phi, double s) : phi_(std::move(phi)), s_(s) {}
    /// Throws DomainError for t <= 0.
    [[nodiscard]] double operator()(double t) const;
    [[nodiscard]] double s() const noexcept { return s_; }

private:
    SlowlyVaryingFunction phi_;
    double s_;
};

PhiS phi_s(const SlowlyVaryingFunction& phi, double s);

// ---------------------------------------------------------------------------
// Integral criterion  int_1^inf dt / (t phi(t)^2) < inf

enum class EmbeddingVerdict { converges, diverges, undecidable };

const char* to_string(EmbeddingVerdict v);

/// Lexicographic rule on the exponents of a standard phi: converges iff the
/// first exponent with 2 r_j != 1 has 2 r_j > 1. Scaled kinds are reported as
/// undecidable (callers fall back to the numeric verdict).
EmbeddingVerdict embedding_criterion(const SlowlyVaryingFunction& phi);

struct EmbeddingIntegral {
    std::vector<double> T;           // geometric grid 2, 4, ..., t_max
    std::vector<double> partial;     // int_1^T dt/(t phi^2)
    std::vector<double> increments;  // partial[i] - partial[i-1] (first entry: partial[0])
};

/// Partial integrals on the grid 2^k (plus t_max). Throws QuadratureFailure.
EmbeddingIntegral embedding_integral_numeric(const SlowlyVaryingFunction& phi, double t_max);

struct OctaveRatioTrace {
    int level = 0;                 // variable v = L_level(t)
    std::vector<double> log2_v;    // left ends of the octaves
    std::vector<double> log_increments;
    std::vector<double> ratios;    // increment[m+1] / increment[m]
    EmbeddingVerdict verdict = EmbeddingVerdict::undecidable;  // undecidable = borderline at this level
};

struct NumericEmbeddingVerdict {
    EmbeddingVerdict verdict = EmbeddingVerdict::undecidable;
    int decisive_level = 0;
    std::vector<OctaveRatioTrace> levels;
};

struct OctaveRatioOptions {
    int top_octave = 60;     // octaves [2^m, 2^{m+1}] for m < top_octave
    int window = 4;          // number of trailing ratios inspected
    double log2_margin = 0.1;
};

/// Octave-ratio heuristic applied in iterated-log variables: at level k the
/// integral is rewritten in v = L_k(t) and integrated per octave of v. All
/// trailing ratios below 2^-margin => converges, above 2^margin => diverges,
/// all within the band => borderline, move to level k + 1.
NumericEmbeddingVerdict numeric_embedding_verdict(const SlowlyVaryingFunction& phi,
                                                  const OctaveRatioOptions& options = {});

}  // namespace refscale
