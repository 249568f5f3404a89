#pragma once

// Classical polyhomogeneous pseudodifferential symbols and square systems on
// the flat torus, with the toroidal quantization
//
//   (A u)(x) = sum_xi e^{i x.xi} a(x, xi) u^(xi).
//
// x-dependence is a trigonometric polynomial, so A maps e_xi to a finite
// combination of e_{xi + eta}, |eta|_inf <= B (the coefficient bandwidth).

#include <Eigen/SparseCore>
#include <array>
#include <complex>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "refscale/refined_spaces.hpp"

namespace refscale {

using Point = std::array<double, 2>;  // point of the torus or a cotangent direction
using SparseMatrixC = Eigen::SparseMatrix<Complex, Eigen::ColMajor, std::ptrdiff_t>;

/// Dependence of a homogeneous term on the direction omega = xi/|xi|.
/// On the circle it is the pair (sigma(+1), sigma(-1)); on the 2-torus a
/// trigonometric polynomial sum_m a_m e^{i m theta}.
class AngularProfile {
public:
    AngularProfile() = default;
    static AngularProfile circle(Complex plus, Complex minus);
    static AngularProfile trigonometric(std::map<int, Complex> modes);
    /// sigma == constant on every direction (valid for n = 1 and n = 2).
    static AngularProfile constant(Complex value);

    [[nodiscard]] Complex at_direction(const Point& omega, int n) const;
    /// sigma(xi / |xi|) for a nonzero lattice point.
    [[nodiscard]] Complex at_lattice(const Mode& xi, int n) const;
    [[nodiscard]] bool is_zero() const;

    [[nodiscard]] bool is_circle() const noexcept { return circle_; }
    [[nodiscard]] Complex plus() const noexcept { return plus_; }
    [[nodiscard]] Complex minus() const noexcept { return minus_; }
    [[nodiscard]] const std::map<int, Complex>& modes() const noexcept { return modes_; }

private:
    bool circle_ = false;
    bool constant_ = false;
    Complex plus_{};
    Complex minus_{};
    std::map<int, Complex> modes_;
};

/// c(x) sigma(omega) with c a trigonometric polynomial given by its modes.
struct SeparablePart {
    std::map<Mode, Complex> coeff;
    AngularProfile angular;
};

/// sum_i c_i(x) sigma_i(xi/|xi|) |xi|^degree chi_cut(|xi|)
struct HomogeneousTerm {
    double degree = 0.0;
    std::vector<SeparablePart> parts;
    double cutoff_radius = 1.0;

    [[nodiscard]] int bandwidth() const;
    /// Smooth radial cutoff: 0 for r <= R0/2, 1 for r >= R0.
    [[nodiscard]] double cutoff(double r) const;
};

/// Action on the zero frequency, where homogeneous terms are undefined.
struct ZeroModeRule {
    enum class Kind {
        principal_direction,  // degree-0 terms at omega = (1, 0, ...); other degrees give 0
        vanish,
        explicit_modes,
    };
    Kind kind = Kind::principal_direction;
    std::map<Mode, Complex> modes;  // explicit_modes: output coefficients per x-mode

    static ZeroModeRule from_name(const std::string& name);
    [[nodiscard]] std::string name() const;
};

class ClassicalSymbol {
public:
    /// Terms of equal degree are merged; degrees end up strictly decreasing.
    /// Throws InvalidSymbol if the principal term vanishes identically.
    ClassicalSymbol(int n, std::vector<HomogeneousTerm> terms, ZeroModeRule zero = {});

    [[nodiscard]] int dim() const noexcept { return n_; }
    [[nodiscard]] double order() const noexcept { return terms_.front().degree; }
    [[nodiscard]] int bandwidth() const noexcept { return bandwidth_; }
    [[nodiscard]] const std::vector<HomogeneousTerm>& terms() const noexcept { return terms_; }
    [[nodiscard]] const ZeroModeRule& zero_mode() const noexcept { return zero_; }

    /// A e_xi = sum over returned (eta, value) of value * e_{xi + eta}.
    void column(const Mode& xi, std::vector<std::pair<Mode, Complex>>& out) const;

    /// Full symbol a(x, xi) for xi != 0 (continuous xi allowed).
    [[nodiscard]] Complex value(const Point& x, const Point& xi) const;

    /// Top homogeneous term at (x, omega), |omega| = 1.
    [[nodiscard]] Complex principal(const Point& x, const Point& omega) const;

    [[nodiscard]] ClassicalSymbol scaled(Complex c) const;
    [[nodiscard]] static ClassicalSymbol sum(const ClassicalSymbol& a, const ClassicalSymbol& b);

private:
    int n_;
    std::vector<HomogeneousTerm> terms_;
    ZeroModeRule zero_;
    int bandwidth_ = 0;
};

/// p x p matrix of classical symbols (absent entries are the zero operator).
class PdoSystem {
public:
    PdoSystem(int n, int p);

    [[nodiscard]] int dim() const noexcept { return n_; }
    [[nodiscard]] int size() const noexcept { return p_; }

    void set(int j, int k, ClassicalSymbol symbol);
    [[nodiscard]] const std::optional<ClassicalSymbol>& entry(int j, int k) const;

    /// ord A_{j,k}; -inf for the zero entry.
    [[nodiscard]] double order(int j, int k) const;
    /// m_k = max_j ord A_{j,k} (0 for an all-zero column).
    [[nodiscard]] double column_order(int k) const;
    [[nodiscard]] std::vector<double> column_orders() const;
    [[nodiscard]] int bandwidth() const;

    [[nodiscard]] PdoSystem with_scaled_row(int j, Complex c) const;

    static PdoSystem scalar(ClassicalSymbol symbol);

private:
    int n_;
    int p_;
    std::vector<std::optional<ClassicalSymbol>> entries_;
};

// ---------------------------------------------------------------------------

/// Output band K + B; throws SpecMismatch on dimension mismatch.
FourierField apply(const ClassicalSymbol& a, const FourierField& u);

/// f_j = sum_k A_{j,k} u_k; all outputs share the band max_k K_k + B.
std::vector<FourierField> apply_system(const PdoSystem& A, const std::vector<FourierField>& u);

/// Principal matrix with the column-order zero convention. Throws DomainError
/// for a non-unit direction.
Eigen::MatrixXcd principal_symbol(const PdoSystem& A, const Point& x, const Point& omega);

struct EllipticityReport {
    double min_abs_det = 0.0;
    bool elliptic = false;
    Point argmin_x{};
    Point argmin_omega{};
    double delta = 0.0;
};

std::vector<Point> default_x_grid(int n, int per_axis = 16);
/// n = 1: {+1, -1}; n = 2: uniform angles.
std::vector<Point> default_omega_grid(int n, int angles = 256);

EllipticityReport petrovskii_check(const PdoSystem& A, const std::vector<Point>& x_grid,
                                   const std::vector<Point>& omega_grid, double delta = 1e-8);
EllipticityReport petrovskii_check(const PdoSystem& A, double delta = 1e-8);

// ---------------------------------------------------------------------------
// Galerkin sections. Block layout: row (j, xi') -> j * N_target + index(xi'),
// column (k, xi) -> k * N_source + index(xi), index as in FourierField.

/// Rows over the band K_target, columns over the band K_source; contributions
/// landing outside K_target are dropped.
SparseMatrixC galerkin_section(const PdoSystem& A, int K_source, int K_target);

/// Square finite section at band K (output modes beyond K discarded).
SparseMatrixC galerkin_matrix(const PdoSystem& A, int K);

/// Conjugate transpose in the L2-orthonormal coefficient coordinates.
SparseMatrixC formal_adjoint_galerkin(const SparseMatrixC& M);

/// Stack p fields of band K into one coefficient vector (and back).
Eigen::VectorXcd flatten(const std::vector<FourierField>& u, int K);
std::vector<FourierField> unflatten(const Eigen::VectorXcd& v, ManifoldSpec spec, int p, int K);

}  // namespace refscale
