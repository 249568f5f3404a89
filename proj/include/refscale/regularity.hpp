#pragma once

// Smoothness read off coefficient decay, cutoff localization, smoothness
// lifting by elliptic solves, and a numerical continuity certificate.

#include <optional>
#include <string>
#include <vector>

#include "refscale/fredholm.hpp"
#include "refscale/refined_spaces.hpp"
#include "refscale/slowly_varying.hpp"

namespace refscale {

/// Real, nonnegative multiplier with a finite band.
class CutoffFunction {
public:
    /// Throws SpecMismatch unless the coefficients are conjugate-symmetric and
    /// the grid samples are >= -1e-12.
    explicit CutoffFunction(FourierField chi);

    /// prod_axes ((1 + cos x_i) / 2)^band, peaked at x = 0.
    static CutoffFunction bump(ManifoldSpec spec, int band);
    static CutoffFunction constant_one(ManifoldSpec spec);

    [[nodiscard]] const FourierField& field() const noexcept { return chi_; }
    [[nodiscard]] int band() const noexcept { return chi_.band(); }

private:
    FourierField chi_;
};

/// Coefficient convolution chi^ * u^ (direct summation), band K + B_chi.
FourierField localize(const FourierField& u, const CutoffFunction& chi);

// ---------------------------------------------------------------------------

struct ShellSum {
    double R = 0.0;    // shell R < <xi> <= 2R
    double sum = 0.0;  // sum |u^(xi)|^2
    bool in_window = false;
};

struct SmoothnessEstimate {
    double s_star = 0.0;  // +inf for flat data
    double r_star = 0.0;  // first-log exponent at the boundary
    double residual = 0.0;
    double residual_power = 0.0;
    double residual_log = 0.0;
    double s_power = 0.0;
    double s_log = 0.0;
    double r_log = 0.0;
    std::string model;  // "power", "log" or "flat"
    bool valid = false;  // residual <= 0.05
    std::vector<ShellSum> shells;
};

struct SmoothnessFitOptions {
    double r_min = 4.0;     // lowest shell radius used by the fit
    int K_reference = -1;   // band whose top octave is excluded (default: band of u)
    double log_model_gain = 10.0;
    double max_residual = 0.05;
};

/// Fits log S(R) with the lattice shell sums of C <xi>^{-2 s - n} L1(<xi>)^{2 r}
/// over R in [r_min, K/4]. The refined model is kept only when at least four
/// shells are fitted and it lowers the RMS residual by log_model_gain;
/// otherwise r_star = 0. sum <xi>^{2s}|u^|^2
/// converges iff s < s_star. Throws DomainError with fewer than 3 window shells.
SmoothnessEstimate smoothness_fit(const FourierField& u, const SmoothnessFitOptions& options = {});

/// u^(xi) = <xi>^{-a} L1(<xi>)^{r}; zero_mean drops the zero mode.
FourierField power_decay_field(ManifoldSpec spec, int K, double a, double r = 0.0, bool zero_mean = false);

// ---------------------------------------------------------------------------

struct LiftingReport {
    bool solvable = false;
    double residual = 0.0;
    std::vector<SmoothnessEstimate> estimate_f;
    std::vector<SmoothnessEstimate> estimate_u;
    double s_star_f = 0.0;             // least smooth data component
    std::vector<double> gaps;          // s_star(u_k) - s_star_f
    std::vector<double> column_orders;
    std::vector<double> localized_gaps;  // with the cutoff, when supplied
    std::vector<SmoothnessEstimate> localized_f;
    std::vector<SmoothnessEstimate> localized_u;
};

/// Solves A u = f at band K in the refined pair (s, phi) and compares smoothness.
/// Throws AmbiguousRank; an unsolvable f is reported with solvable = false.
LiftingReport lifting_experiment(const PdoSystem& A, const std::vector<FourierField>& f, double s,
                                 const SlowlyVaryingFunction& phi, int K,
                                 const std::optional<CutoffFunction>& chi = std::nullopt, double rank_tol = 1e-8);

// ---------------------------------------------------------------------------

struct ContinuityReport {
    EmbeddingVerdict criterion = EmbeddingVerdict::undecidable;
    bool criterion_holds = false;
    bool membership_ok = false;
    SmoothnessEstimate estimate;
    std::vector<double> norms;           // norm(u_{K/4}), norm(u_{K/2}), norm(u_K) in H^{rho + n/2, phi}
    std::vector<double> sup_increments;  // sup |d_1^rho (S_{2^j} u - S_{2^{j-1}} u)|, j = 1, 2, ...
    double increment_slope = 0.0;        // log-log slope against j over the trailing octaves
    bool increments_decay = false;
    bool certified = false;
    std::string verdict;
};

/// Certified iff the embedding criterion holds for phi, u lies in
/// H^{rho + n/2, phi} by the fitted decay, and the dyadic sup increments are
/// summable (slope below -1 or exact zeros). Trigonometric polynomials are
/// certified outright.
ContinuityReport continuity_check(const FourierField& u, int rho, const SlowlyVaryingFunction& phi);

}  // namespace refscale
