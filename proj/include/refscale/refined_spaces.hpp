#pragma once

// Refined Sobolev spaces H^{s,phi} on the flat torus [0, 2pi)^n, n in {1, 2}.
//
// Fields are band-limited: Fourier coefficients
//   u^(xi) = (2pi)^{-n} int u(x) e^{-i xi.x} dx
// stored densely on the cube |xi|_inf <= K. The refined norm is
//   ||u||_{s,phi}^2 = sum_xi <xi>^{2s} phi(<xi>)^2 |u^(xi)|^2,  <xi> = (1 + |xi|^2)^{1/2}.

#include <array>
#include <complex>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "refscale/slowly_varying.hpp"

namespace refscale {

using Complex = std::complex<double>;

/// Lattice frequency; the second component is zero on the circle.
using Mode = std::array<int, 2>;

struct ManifoldSpec {
    int n = 1;

    explicit ManifoldSpec(int dim = 1);

    /// (2pi)^n; turns coefficient sums into the L2(dx) pairing.
    [[nodiscard]] double pairing_factor() const;

    friend bool operator==(const ManifoldSpec&, const ManifoldSpec&) = default;
};

struct RefinedIndex {
    double s = 0.0;
    SlowlyVaryingFunction phi;

    /// "s: <real>, phi: [<exponents>]"
    [[nodiscard]] std::string to_string() const;
};

RefinedIndex parse_refined_index(const std::string& text);

/// <xi> = (1 + |xi|^2)^{1/2}
double bracket(const Mode& xi);

/// Number of lattice points of the band K cube in dimension n.
std::size_t band_size(int n, int K);

/// Linear position of xi in the band K cube (same layout as FourierField).
std::size_t band_index(int n, int K, const Mode& xi);
Mode band_mode(int n, int K, std::size_t index);
bool in_band(int n, int K, const Mode& xi);

class FourierField {
public:
    FourierField() = default;
    FourierField(ManifoldSpec spec, int K);

    [[nodiscard]] const ManifoldSpec& spec() const noexcept { return spec_; }
    [[nodiscard]] int dim() const noexcept { return spec_.n; }
    [[nodiscard]] int band() const noexcept { return K_; }
    [[nodiscard]] std::size_t size() const noexcept { return coeffs_.size(); }

    [[nodiscard]] bool contains(const Mode& xi) const noexcept;
    [[nodiscard]] std::size_t index_of(const Mode& xi) const;
    [[nodiscard]] Mode mode_at(std::size_t index) const;

    /// Coefficient at xi; zero outside the band.
    [[nodiscard]] Complex at(const Mode& xi) const;
    /// Writable coefficient; throws SpecMismatch outside the band.
    Complex& operator[](const Mode& xi);

    [[nodiscard]] std::span<const Complex> coefficients() const noexcept { return coeffs_; }
    [[nodiscard]] std::span<Complex> coefficients() noexcept { return coeffs_; }

    /// Same coefficients embedded in a band K2 >= K, or truncated to K2 < K.
    [[nodiscard]] FourierField with_band(int K2) const;

    /// Declares the field real-valued; throws InvalidSymbol-free SpecMismatch
    /// when the coefficients are not conjugate-symmetric within tol.
    void mark_real_valued(double tol = 1e-12);
    [[nodiscard]] bool real_valued() const noexcept { return real_valued_; }
    [[nodiscard]] bool is_conjugate_symmetric(double tol = 1e-12) const;

    FourierField& operator+=(const FourierField& other);
    FourierField& operator-=(const FourierField& other);
    FourierField& operator*=(Complex a);

    static FourierField exponential(ManifoldSpec spec, const Mode& xi, int K = -1);

private:
    ManifoldSpec spec_{1};
    int K_ = 0;
    std::vector<Complex> coeffs_;
    bool real_valued_ = false;
};

FourierField operator+(FourierField a, const FourierField& b);
FourierField operator-(FourierField a, const FourierField& b);
FourierField operator*(Complex a, FourierField u);

/// Largest |u^(xi) - v^(xi)| over the union of bands.
double max_abs_difference(const FourierField& u, const FourierField& v);

// ---------------------------------------------------------------------------

/// <xi>^s phi(<xi>)
double weight(const Mode& xi, const RefinedIndex& idx);

double norm(const FourierField& u, const RefinedIndex& idx);

/// sum_xi weight^2 u^(xi) conj(v^(xi)); throws SpecMismatch on different manifolds.
Complex inner_product(const FourierField& u, const FourierField& v, const RefinedIndex& idx);

/// (u, v)_Gamma = (2pi)^n sum_xi u^(xi) conj(v^(xi))
Complex gamma_pairing(const FourierField& u, const FourierField& v);

/// ||u||_{L2(dx)} = (u, u)_Gamma^{1/2}
double gamma_norm(const FourierField& u);

/// || phi_s(1 - Laplacian) u ||, coefficient l2 norm after the diagonal
/// multiplier phi_s(1 + |xi|^2).
double multiplier_norm(const FourierField& u, const RefinedIndex& idx);

struct EmbeddingRatio {
    int K = 0;
    double sup_derivative = 0.0;  // sup |d_1^rho u_K|
    double norm = 0.0;            // ||u_K||_{rho + n/2, phi}
    double ratio = 0.0;
};

/// Extremal fields u_K^(xi) = conj((i xi_1)^rho) / weight(xi, (rho + n/2, phi))^2
/// on the band; ratio = sup|d_1^rho u_K| / ||u_K||. The supremum is attained at x = 0
/// where every term of the derivative series is nonnegative.
std::vector<EmbeddingRatio> embedding_ratio_experiment(int rho, const SlowlyVaryingFunction& phi,
                                                       std::span<const int> K_list,
                                                       ManifoldSpec spec = ManifoldSpec{1});

// ---------------------------------------------------------------------------
// Uniform grid x_j = 2 pi j / N per axis (row-major, first axis slowest).

struct GridSamples {
    ManifoldSpec spec{1};
    int grid_size = 0;
    std::vector<Complex> values;
};

/// Throws AliasingError when grid_size < 2K + 1.
GridSamples synthesize(const FourierField& u, int grid_size);

/// Inverse of synthesize for band K (default (N - 1) / 2).
FourierField analyze(const GridSamples& samples, int K = -1);

/// ((2pi/N)^n sum_j |u(x_j)|^2)^{1/2}, the L2(dx) norm by the rectangle rule
double grid_quadrature_l2(const GridSamples& samples);

// ---------------------------------------------------------------------------

/// CSV with header "xi_1[,xi_2],re,im"; zero coefficients are skipped on write.
void write_csv(std::ostream& os, const FourierField& u);
FourierField read_csv(std::istream& is, ManifoldSpec spec);

/// Field with i.i.d. normal real and imaginary parts, deterministic in seed.
FourierField random_field(ManifoldSpec spec, int K, std::uint64_t seed);

}  // namespace refscale
