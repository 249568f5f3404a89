#pragma once

// Finite sections of a system A : prod_k H^{s+m_k,phi} -> (H^{s,phi})^p in
// weighted coordinates, their numerical kernel, cokernel and index, the range
// test, the projectors P and P+, the restricted solve, and the a priori
// constant.
//
// Weighted coordinates: y = W u with W the diagonal of refined weights, so the
// refined norms become Euclidean and the section reads G = W_t M W_s^{-1}.
//
// Three sections are kept. `matrix` is the square truncated one (band K to
// band K). The kernel is read from `tall` (band K to band K + B, nothing is
// discarded) and the cokernel from `wide` (band K + B to band K, so every
// target mode in band K sees all of its preimages). B is the coefficient
// bandwidth of the system.

#include <Eigen/Dense>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "refscale/pdo.hpp"
#include "refscale/refined_spaces.hpp"

namespace refscale {

namespace detail {
struct BlockSvd;
}

struct GalerkinOperator {
    PdoSystem system;
    int K = 0;
    int B = 0;
    RefinedIndex target;
    std::vector<RefinedIndex> sources;

    SparseMatrixC matrix;  // square, band K -> band K
    SparseMatrixC tall;    // band K -> band K + B
    SparseMatrixC wide;    // band K + B -> band K

    Eigen::VectorXd source_weights;      // band K, p blocks
    Eigen::VectorXd target_weights;      // band K
    Eigen::VectorXd source_weights_ext;  // band K + B
    Eigen::VectorXd target_weights_ext;  // band K + B

    [[nodiscard]] int size() const noexcept { return system.size(); }
    [[nodiscard]] ManifoldSpec spec() const { return ManifoldSpec{system.dim()}; }
};

GalerkinOperator truncate(const PdoSystem& A, int K, double s, const SlowlyVaryingFunction& phi);

/// Largest singular value of the band-expanded weighted section.
double operator_norm(const GalerkinOperator& G);

struct FredholmReport {
    int K = 0;
    RefinedIndex target;
    std::vector<RefinedIndex> sources;
    double rank_tol = 1e-8;
    double threshold = 0.0;  // rank_tol * max(1, sigma_max)

    int dim_kernel = 0;
    int dim_cokernel = 0;
    int index = 0;

    double sigma_max = 0.0;
    double sigma_min_retained = 0.0;   // of the tall section
    double sigma_gap = 0.0;            // min retained / max discarded over both sections (inf if none discarded)
    bool ambiguous = false;            // sigma_gap < 1e3

    /// Columns are L2-orthonormal coefficient vectors (p blocks of band K).
    Eigen::MatrixXcd kernel;
    Eigen::MatrixXcd cokernel;

    std::vector<std::vector<FourierField>> kernel_basis;
    std::vector<std::vector<FourierField>> cokernel_basis;

    /// Singular values of the tall section, descending.
    std::vector<double> singular_values;

    std::shared_ptr<const detail::BlockSvd> tall_svd;
};

inline constexpr double kRankGapThreshold = 1e3;

FredholmReport fredholm_report(const GalerkinOperator& G, double rank_tol = 1e-8);

// ---------------------------------------------------------------------------

struct InvarianceRow {
    double s = 0.0;
    SlowlyVaryingFunction phi;
    int K = 0;
    int dim_kernel = 0;
    int dim_cokernel = 0;
    int index = 0;
    double sigma_gap = 0.0;
    bool ambiguous = false;
};

struct InvarianceTable {
    std::vector<InvarianceRow> rows;
    bool indices_agree = false;  // across every (s, phi, K)
    bool dims_stable = false;    // dim N and dim N+ independent of K for each (s, phi)
    bool any_ambiguous = false;
    std::vector<std::string> flags;
};

InvarianceTable index_invariance_experiment(const PdoSystem& A, const std::vector<RefinedIndex>& idx_list,
                                            const std::vector<int>& K_list, double rank_tol = 1e-8);

// ---------------------------------------------------------------------------

struct SolvabilityResult {
    bool solvable = true;
    std::vector<Complex> defect;  // (f, v)_Gamma summed over components, per cokernel vector
    double data_norm = 0.0;       // Gamma norm of f
};

/// f may extend to band K + B.
SolvabilityResult solvability_test(const std::vector<FourierField>& f, const FredholmReport& rep, double tol = 1e-10);

/// P = I - Q_N Q_N^H on the source, P+ = I - Q_{N+} Q_{N+}^H on the target, both
/// in L2 coefficient coordinates (band K). They are orthogonal for the
/// Gamma-pairing and oblique in the refined geometry.
class ProjectorPair {
public:
    ProjectorPair(Eigen::MatrixXcd kernel, Eigen::MatrixXcd cokernel, Eigen::Index source_dim, Eigen::Index target_dim);

    [[nodiscard]] Eigen::VectorXcd apply_P(const Eigen::VectorXcd& u) const;
    [[nodiscard]] Eigen::VectorXcd apply_P_plus(const Eigen::VectorXcd& f) const;
    [[nodiscard]] Eigen::MatrixXcd P() const;
    [[nodiscard]] Eigen::MatrixXcd P_plus() const;

    [[nodiscard]] const Eigen::MatrixXcd& kernel() const noexcept { return kernel_; }
    [[nodiscard]] const Eigen::MatrixXcd& cokernel() const noexcept { return cokernel_; }

    /// Angles (refined geometry) between N and range P, and between N+ and range P+.
    double angle_kernel = 1.0;
    double angle_cokernel = 1.0;
    bool ill_conditioned = false;  // an angle below 1e-6

private:
    Eigen::MatrixXcd kernel_;
    Eigen::MatrixXcd cokernel_;
    Eigen::Index source_dim_;
    Eigen::Index target_dim_;
};

inline constexpr double kMinProjectorAngle = 1e-6;

/// Throws AmbiguousRank for an ambiguous report.
ProjectorPair projectors(const GalerkinOperator& G, const FredholmReport& rep);

struct SolveOutcome {
    bool solvable = false;
    std::vector<Complex> defect;
    std::vector<FourierField> u;  // band K, P u = u
    double residual = 0.0;        // || G W_s u - W_t P+ f || in refined coordinates
    double relative_residual = 0.0;
    double condition_number = 0.0;
};

/// Restricted inverse of A between range P and range P+. Throws AmbiguousRank.
SolveOutcome solve(const GalerkinOperator& G, const FredholmReport& rep, const std::vector<FourierField>& f,
                   double tol = 1e-10);

// ---------------------------------------------------------------------------

enum class AprioriVerdict { bounded, growing, inconclusive };
const char* to_string(AprioriVerdict v);

struct AprioriReport {
    double s = 0.0;
    SlowlyVaryingFunction phi;
    double sigma = 0.0;
    std::vector<int> K;
    std::vector<double> c_quad;
    std::vector<double> growth;  // c_quad[i] / c_quad[i - 1]
    AprioriVerdict verdict = AprioriVerdict::inconclusive;
};

/// sup over band-K coefficient vectors of (sum_k ||u_k||^2_{s+m_k,phi})^{1/2}
/// / (sum_j ||(A u)_j||^2_{s,phi} + sum_k ||u_k||^2_{s-sigma})^{1/2}.
double apriori_constant(const PdoSystem& A, double s, const SlowlyVaryingFunction& phi, double sigma, int K);

/// Verdict from consecutive K: bounded if every ratio of consecutive constants
/// lies within 10% of 1 (per doubling), growing if every ratio is >= 2 per doubling.
AprioriReport apriori_report(const PdoSystem& A, double s, const SlowlyVaryingFunction& phi, double sigma,
                             const std::vector<int>& K_list);

}  // namespace refscale
