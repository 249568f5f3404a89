#include "refscale/refined_spaces.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <istream>
#include <mutex>
#include <numbers>
#include <ostream>
#include <random>
#include <sstream>

#include "refscale/errors.hpp"

namespace refscale {

namespace {

std::mutex& fftw_plan_mutex() {
    static std::mutex m;
    return m;
}

void require_same_spec(const FourierField& u, const FourierField& v) {
    if (!(u.spec() == v.spec())) throw SpecMismatch("fields live on different manifolds");
}

}  // namespace

ManifoldSpec::ManifoldSpec(int dim) : n(dim) {
    if (dim != 1 && dim != 2) throw SpecMismatch("torus dimension must be 1 or 2");
}

double ManifoldSpec::pairing_factor() const { return std::pow(2.0 * std::numbers::pi, n); }

std::string RefinedIndex::to_string() const {
    std::ostringstream os;
    os.precision(17);
    os << "s: " << s << ", phi: " << phi.to_string();
    return os.str();
}

RefinedIndex parse_refined_index(const std::string& text) {
    const auto s_pos = text.find("s:");
    const auto phi_pos = text.find("phi:");
    if (s_pos == std::string::npos) throw ParseError("refined index missing 's:' in '" + text + "'");
    RefinedIndex idx;
    const auto s_end = phi_pos == std::string::npos ? text.size() : phi_pos;
    std::string s_text = text.substr(s_pos + 2, s_end - s_pos - 2);
    s_text.erase(std::remove(s_text.begin(), s_text.end(), ','), s_text.end());
    try {
        idx.s = std::stod(s_text);
    } catch (const std::exception&) {
        throw ParseError("invalid s in refined index '" + text + "'");
    }
    if (phi_pos != std::string::npos) idx.phi = parse_phi(text.substr(phi_pos + 4));
    return idx;
}

double bracket(const Mode& xi) {
    return std::sqrt(1.0 + double(xi[0]) * xi[0] + double(xi[1]) * xi[1]);
}

std::size_t band_size(int n, int K) {
    const std::size_t side = 2 * static_cast<std::size_t>(K) + 1;
    return n == 1 ? side : side * side;
}

std::size_t band_index(int n, int K, const Mode& xi) {
    const std::size_t side = 2 * static_cast<std::size_t>(K) + 1;
    if (n == 1) return static_cast<std::size_t>(xi[0] + K);
    return static_cast<std::size_t>(xi[0] + K) * side + static_cast<std::size_t>(xi[1] + K);
}

Mode band_mode(int n, int K, std::size_t index) {
    const int side = 2 * K + 1;
    if (n == 1) return {static_cast<int>(index) - K, 0};
    return {static_cast<int>(index / side) - K, static_cast<int>(index % side) - K};
}

bool in_band(int n, int K, const Mode& xi) {
    return std::abs(xi[0]) <= K && (n == 1 ? xi[1] == 0 : std::abs(xi[1]) <= K);
}

// ---------------------------------------------------------------------------

FourierField::FourierField(ManifoldSpec spec, int K) : spec_(spec), K_(K) {
    if (K < 0) throw SpecMismatch("band limit must be nonnegative");
    coeffs_.assign(band_size(spec.n, K), Complex{});
}

bool FourierField::contains(const Mode& xi) const noexcept {
    if (std::abs(xi[0]) > K_) return false;
    if (spec_.n == 1) return xi[1] == 0;
    return std::abs(xi[1]) <= K_;
}

std::size_t FourierField::index_of(const Mode& xi) const {
    if (!contains(xi)) throw SpecMismatch("mode outside the band");
    const std::size_t side = 2 * static_cast<std::size_t>(K_) + 1;
    if (spec_.n == 1) return static_cast<std::size_t>(xi[0] + K_);
    return static_cast<std::size_t>(xi[0] + K_) * side + static_cast<std::size_t>(xi[1] + K_);
}

Mode FourierField::mode_at(std::size_t index) const {
    const int side = 2 * K_ + 1;
    if (spec_.n == 1) return {static_cast<int>(index) - K_, 0};
    return {static_cast<int>(index / side) - K_, static_cast<int>(index % side) - K_};
}

Complex FourierField::at(const Mode& xi) const {
    return contains(xi) ? coeffs_[index_of(xi)] : Complex{};
}

Complex& FourierField::operator[](const Mode& xi) { return coeffs_[index_of(xi)]; }

FourierField FourierField::with_band(int K2) const {
    FourierField out(spec_, K2);
    out.real_valued_ = real_valued_;
    for (std::size_t i = 0; i < coeffs_.size(); ++i) {
        const Mode xi = mode_at(i);
        if (out.contains(xi)) out[xi] = coeffs_[i];
    }
    return out;
}

bool FourierField::is_conjugate_symmetric(double tol) const {
    for (std::size_t i = 0; i < coeffs_.size(); ++i) {
        const Mode xi = mode_at(i);
        const Mode neg{-xi[0], -xi[1]};
        if (std::abs(coeffs_[i] - std::conj(at(neg))) > tol) return false;
    }
    return true;
}

void FourierField::mark_real_valued(double tol) {
    if (!is_conjugate_symmetric(tol)) {
        throw SpecMismatch("coefficients are not conjugate-symmetric; field is not real-valued");
    }
    real_valued_ = true;
}

FourierField& FourierField::operator+=(const FourierField& other) {
    require_same_spec(*this, other);
    if (other.K_ > K_) *this = with_band(other.K_);
    for (std::size_t i = 0; i < other.coeffs_.size(); ++i) (*this)[other.mode_at(i)] += other.coeffs_[i];
    real_valued_ = real_valued_ && other.real_valued_;
    return *this;
}

FourierField& FourierField::operator-=(const FourierField& other) {
    require_same_spec(*this, other);
    if (other.K_ > K_) *this = with_band(other.K_);
    for (std::size_t i = 0; i < other.coeffs_.size(); ++i) (*this)[other.mode_at(i)] -= other.coeffs_[i];
    real_valued_ = real_valued_ && other.real_valued_;
    return *this;
}

FourierField& FourierField::operator*=(Complex a) {
    for (auto& c : coeffs_) c *= a;
    if (a.imag() != 0.0) real_valued_ = false;
    return *this;
}

FourierField FourierField::exponential(ManifoldSpec spec, const Mode& xi, int K) {
    const int needed = std::max(std::abs(xi[0]), std::abs(xi[1]));
    FourierField u(spec, K < 0 ? needed : K);
    u[xi] = 1.0;
    return u;
}

FourierField operator+(FourierField a, const FourierField& b) { return a += b; }
FourierField operator-(FourierField a, const FourierField& b) { return a -= b; }
FourierField operator*(Complex a, FourierField u) { return u *= a; }

double max_abs_difference(const FourierField& u, const FourierField& v) {
    require_same_spec(u, v);
    const int K = std::max(u.band(), v.band());
    const FourierField a = u.with_band(K);
    const FourierField b = v.with_band(K);
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        m = std::max(m, std::abs(a.coefficients()[i] - b.coefficients()[i]));
    }
    return m;
}

// ---------------------------------------------------------------------------

double weight(const Mode& xi, const RefinedIndex& idx) {
    const double b = bracket(xi);
    return std::pow(b, idx.s) * idx.phi(b);
}

double norm(const FourierField& u, const RefinedIndex& idx) {
    double acc = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        const double a = std::abs(u.coefficients()[i]);
        if (a == 0.0) continue;
        const double w = weight(u.mode_at(i), idx);
        acc += w * w * a * a;
    }
    return std::sqrt(acc);
}

Complex inner_product(const FourierField& u, const FourierField& v, const RefinedIndex& idx) {
    require_same_spec(u, v);
    Complex acc{};
    for (std::size_t i = 0; i < u.size(); ++i) {
        const Mode xi = u.mode_at(i);
        const Complex b = v.at(xi);
        if (b == Complex{}) continue;
        const double w = weight(xi, idx);
        acc += w * w * u.coefficients()[i] * std::conj(b);
    }
    return acc;
}

Complex gamma_pairing(const FourierField& u, const FourierField& v) {
    require_same_spec(u, v);
    Complex acc{};
    for (std::size_t i = 0; i < u.size(); ++i) acc += u.coefficients()[i] * std::conj(v.at(u.mode_at(i)));
    return u.spec().pairing_factor() * acc;
}

double gamma_norm(const FourierField& u) { return std::sqrt(gamma_pairing(u, u).real()); }

double multiplier_norm(const FourierField& u, const RefinedIndex& idx) {
    const PhiS mult = phi_s(idx.phi, idx.s);
    double acc = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        const Mode xi = u.mode_at(i);
        const double t = 1.0 + double(xi[0]) * xi[0] + double(xi[1]) * xi[1];
        acc += std::norm(mult(t) * u.coefficients()[i]);
    }
    return std::sqrt(acc);
}

std::vector<EmbeddingRatio> embedding_ratio_experiment(int rho, const SlowlyVaryingFunction& phi,
                                                       std::span<const int> K_list,
                                                       ManifoldSpec spec) {
    if (rho < 0) throw DomainError("derivative order must be nonnegative");
    const RefinedIndex idx{rho + spec.n / 2.0, phi};
    std::vector<EmbeddingRatio> out;
    for (int K : K_list) {
        // With u^ = conj((i xi_1)^rho)/w^2 both the derivative at 0 and the
        // squared norm equal sum |xi_1|^{2 rho} / w^2.
        FourierField u(spec, K);
        double sup = 0.0;
        double norm2 = 0.0;
        for (std::size_t i = 0; i < u.size(); ++i) {
            const Mode xi = u.mode_at(i);
            const double w = weight(xi, idx);
            const Complex deriv = std::pow(Complex(0.0, double(xi[0])), rho);
            u.coefficients()[i] = std::conj(deriv) / (w * w);
            sup += (deriv * u.coefficients()[i]).real();
        }
        norm2 = norm(u, idx);
        out.push_back({K, sup, norm2, sup / norm2});
    }
    return out;
}

// ---------------------------------------------------------------------------

GridSamples synthesize(const FourierField& u, int grid_size) {
    const int K = u.band();
    if (grid_size < 2 * K + 1) {
        throw AliasingError("grid of size " + std::to_string(grid_size) +
                            " aliases band " + std::to_string(K) + " (needs >= 2K+1)");
    }
    const int n = u.dim();
    const std::size_t N = grid_size;
    const std::size_t total = n == 1 ? N : N * N;
    std::vector<Complex> buf(total, Complex{});
    auto wrap = [&](int k) { return static_cast<std::size_t>(k < 0 ? k + grid_size : k); };
    for (std::size_t i = 0; i < u.size(); ++i) {
        const Mode xi = u.mode_at(i);
        const std::size_t pos = n == 1 ? wrap(xi[0]) : wrap(xi[0]) * N + wrap(xi[1]);
        buf[pos] = u.coefficients()[i];
    }
    fftw_plan plan;
    auto* data = reinterpret_cast<fftw_complex*>(buf.data());
    {
        std::lock_guard lock(fftw_plan_mutex());
        plan = n == 1 ? fftw_plan_dft_1d(grid_size, data, data, FFTW_BACKWARD, FFTW_ESTIMATE)
                      : fftw_plan_dft_2d(grid_size, grid_size, data, data, FFTW_BACKWARD, FFTW_ESTIMATE);
    }
    fftw_execute(plan);
    {
        std::lock_guard lock(fftw_plan_mutex());
        fftw_destroy_plan(plan);
    }
    return {u.spec(), grid_size, std::move(buf)};
}

FourierField analyze(const GridSamples& samples, int K) {
    const int N = samples.grid_size;
    if (K < 0) K = (N - 1) / 2;
    if (N < 2 * K + 1) {
        throw AliasingError("grid of size " + std::to_string(N) + " cannot resolve band " +
                            std::to_string(K));
    }
    const int n = samples.spec.n;
    std::vector<Complex> buf = samples.values;
    auto* data = reinterpret_cast<fftw_complex*>(buf.data());
    fftw_plan plan;
    {
        std::lock_guard lock(fftw_plan_mutex());
        plan = n == 1 ? fftw_plan_dft_1d(N, data, data, FFTW_FORWARD, FFTW_ESTIMATE)
                      : fftw_plan_dft_2d(N, N, data, data, FFTW_FORWARD, FFTW_ESTIMATE);
    }
    fftw_execute(plan);
    {
        std::lock_guard lock(fftw_plan_mutex());
        fftw_destroy_plan(plan);
    }
    const double scale = 1.0 / std::pow(double(N), n);
    FourierField u(samples.spec, K);
    auto wrap = [&](int k) { return static_cast<std::size_t>(k < 0 ? k + N : k); };
    for (std::size_t i = 0; i < u.size(); ++i) {
        const Mode xi = u.mode_at(i);
        const std::size_t pos = n == 1 ? wrap(xi[0]) : wrap(xi[0]) * N + wrap(xi[1]);
        u.coefficients()[i] = buf[pos] * scale;
    }
    return u;
}

double grid_quadrature_l2(const GridSamples& samples) {
    double acc = 0.0;
    for (const auto& v : samples.values) acc += std::norm(v);
    const double h = 2.0 * std::numbers::pi / samples.grid_size;
    return std::sqrt(acc * std::pow(h, samples.spec.n));
}

// ---------------------------------------------------------------------------

void write_csv(std::ostream& os, const FourierField& u) {
    const auto old_precision = os.precision(17);
    os << (u.dim() == 1 ? "xi_1,re,im\n" : "xi_1,xi_2,re,im\n");
    for (std::size_t i = 0; i < u.size(); ++i) {
        const Complex c = u.coefficients()[i];
        if (c == Complex{}) continue;
        const Mode xi = u.mode_at(i);
        os << xi[0] << ',';
        if (u.dim() == 2) os << xi[1] << ',';
        os << c.real() << ',' << c.imag() << '\n';
    }
    os.precision(old_precision);
}

FourierField read_csv(std::istream& is, ManifoldSpec spec) {
    std::string line;
    std::vector<std::pair<Mode, Complex>> entries;
    int K = 0;
    int line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        if (line.empty() || line.rfind("xi", 0) == 0) continue;
        std::stringstream ss(line);
        std::string cell;
        std::vector<double> cells;
        while (std::getline(ss, cell, ',')) {
            try {
                cells.push_back(std::stod(cell));
            } catch (const std::exception&) {
                throw ParseError("csv line " + std::to_string(line_no) + ": bad number '" + cell + "'");
            }
        }
        if (cells.size() != static_cast<std::size_t>(spec.n + 2)) {
            throw ParseError("csv line " + std::to_string(line_no) + ": expected " +
                             std::to_string(spec.n + 2) + " columns");
        }
        Mode xi{static_cast<int>(cells[0]), spec.n == 2 ? static_cast<int>(cells[1]) : 0};
        K = std::max({K, std::abs(xi[0]), std::abs(xi[1])});
        entries.push_back({xi, Complex(cells[spec.n], cells[spec.n + 1])});
    }
    FourierField u(spec, K);
    for (const auto& [xi, c] : entries) u[xi] += c;
    return u;
}

FourierField random_field(ManifoldSpec spec, int K, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    FourierField u(spec, K);
    for (auto& c : u.coefficients()) {
        const double re = gauss(rng);
        const double im = gauss(rng);
        c = Complex(re, im);
    }
    return u;
}

}  // namespace refscale
