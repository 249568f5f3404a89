#include "refscale/pdo.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "refscale/errors.hpp"

namespace refscale {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

Complex unit_power(Complex z, int m) {
    if (m < 0) {
        z = std::conj(z);
        m = -m;
    }
    Complex out{1.0, 0.0};
    for (int i = 0; i < m; ++i) out *= z;
    return out;
}

Complex trig_poly(const std::map<Mode, Complex>& coeff, const Point& x, int n) {
    Complex out{};
    for (const auto& [eta, c] : coeff) {
        const double phase = eta[0] * x[0] + (n == 2 ? eta[1] * x[1] : 0.0);
        out += c * std::polar(1.0, phase);
    }
    return out;
}

void accumulate(std::vector<std::pair<Mode, Complex>>& out, const Mode& eta, Complex v) {
    for (auto& [m, c] : out) {
        if (m == eta) {
            c += v;
            return;
        }
    }
    out.emplace_back(eta, v);
}

// exp(-1/t) based smooth step, 0 at t <= 0 and 1 at t >= 1
double smooth_step(double t) {
    if (t <= 0.0) return 0.0;
    if (t >= 1.0) return 1.0;
    const double a = std::exp(-1.0 / t);
    const double b = std::exp(-1.0 / (1.0 - t));
    return a / (a + b);
}

}  // namespace

// ---------------------------------------------------------------------------

AngularProfile AngularProfile::circle(Complex plus, Complex minus) {
    AngularProfile p;
    p.circle_ = true;
    p.plus_ = plus;
    p.minus_ = minus;
    return p;
}

AngularProfile AngularProfile::trigonometric(std::map<int, Complex> modes) {
    AngularProfile p;
    p.modes_ = std::move(modes);
    return p;
}

AngularProfile AngularProfile::constant(Complex value) {
    AngularProfile p;
    p.constant_ = true;
    p.plus_ = value;
    p.minus_ = value;
    p.modes_ = {{0, value}};
    return p;
}

Complex AngularProfile::at_direction(const Point& omega, int n) const {
    if (constant_) return plus_;
    if (n == 1) {
        if (!circle_) throw InvalidSymbol("angular profile on the circle needs (sigma(+1), sigma(-1))");
        return omega[0] > 0.0 ? plus_ : minus_;
    }
    if (circle_) throw InvalidSymbol("angular profile on the 2-torus needs angle modes");
    const Complex z{omega[0], omega[1]};
    Complex out{};
    for (const auto& [m, a] : modes_) out += a * unit_power(z, m);
    return out;
}

Complex AngularProfile::at_lattice(const Mode& xi, int n) const {
    if (n == 1) return at_direction({xi[0] > 0 ? 1.0 : -1.0, 0.0}, 1);
    if (constant_) return plus_;
    const double r = std::hypot(static_cast<double>(xi[0]), static_cast<double>(xi[1]));
    return at_direction({xi[0] / r, xi[1] / r}, 2);
}

bool AngularProfile::is_zero() const {
    if (circle_ || constant_) return plus_ == Complex{} && minus_ == Complex{};
    return std::all_of(modes_.begin(), modes_.end(), [](const auto& kv) { return kv.second == Complex{}; });
}

// ---------------------------------------------------------------------------

int HomogeneousTerm::bandwidth() const {
    int b = 0;
    for (const auto& part : parts) {
        for (const auto& [eta, c] : part.coeff) {
            if (c != Complex{}) b = std::max({b, std::abs(eta[0]), std::abs(eta[1])});
        }
    }
    return b;
}

double HomogeneousTerm::cutoff(double r) const {
    return smooth_step((r - 0.5 * cutoff_radius) / (0.5 * cutoff_radius));
}

ZeroModeRule ZeroModeRule::from_name(const std::string& name) {
    ZeroModeRule rule;
    if (name == "principal_direction" || name == "default") {
        rule.kind = Kind::principal_direction;
    } else if (name == "vanish") {
        rule.kind = Kind::vanish;
    } else if (name == "explicit") {
        rule.kind = Kind::explicit_modes;
    } else {
        throw InvalidSymbol("unknown zero_mode rule '" + name + "'");
    }
    return rule;
}

std::string ZeroModeRule::name() const {
    switch (kind) {
        case Kind::principal_direction: return "principal_direction";
        case Kind::vanish: return "vanish";
        case Kind::explicit_modes: return "explicit";
    }
    return "";
}

// ---------------------------------------------------------------------------

ClassicalSymbol::ClassicalSymbol(int n, std::vector<HomogeneousTerm> terms, ZeroModeRule zero)
    : n_(n), zero_(std::move(zero)) {
    if (n != 1 && n != 2) throw InvalidSymbol("symbols are defined for n in {1, 2}");
    if (terms.empty()) throw InvalidSymbol("a classical symbol needs at least one term");
    std::stable_sort(terms.begin(), terms.end(),
                     [](const HomogeneousTerm& a, const HomogeneousTerm& b) { return a.degree > b.degree; });
    for (auto& t : terms) {
        if (!std::isfinite(t.degree)) throw InvalidSymbol("term degree must be finite");
        if (!(t.cutoff_radius > 0.0)) throw InvalidSymbol("cutoff radius must be positive");
        for (const auto& part : t.parts) {
            for (const auto& [eta, c] : part.coeff) {
                if (n == 1 && eta[1] != 0) throw InvalidSymbol("coefficient mode has a second component on the circle");
            }
            if (n == 1 && !part.angular.is_circle() && part.angular.modes().size() != 1) {
                throw InvalidSymbol("angular profile on the circle needs (sigma(+1), sigma(-1))");
            }
            if (n == 2 && part.angular.is_circle() && part.angular.plus() != part.angular.minus()) {
                throw InvalidSymbol("angular profile on the 2-torus needs angle modes");
            }
        }
        if (!terms_.empty() && terms_.back().degree == t.degree) {
            if (terms_.back().cutoff_radius != t.cutoff_radius) {
                throw InvalidSymbol("terms of equal degree must share the cutoff radius");
            }
            auto& parts = terms_.back().parts;
            parts.insert(parts.end(), t.parts.begin(), t.parts.end());
        } else {
            terms_.push_back(std::move(t));
        }
    }
    for (const auto& t : terms_) bandwidth_ = std::max(bandwidth_, t.bandwidth());
    for (const auto& [eta, c] : zero_.modes) {
        bandwidth_ = std::max({bandwidth_, std::abs(eta[0]), std::abs(eta[1])});
    }

    // the top term must not vanish identically; sample x and omega densely
    // relative to the coefficient and angular bandwidths
    int angular_band = 0;
    for (const auto& part : terms_.front().parts) {
        for (const auto& [m, a] : part.angular.modes()) angular_band = std::max(angular_band, std::abs(m));
    }
    const int nx = 2 * bandwidth_ + 2;
    const int nw = n == 1 ? 2 : 2 * angular_band + 2;
    double peak = 0.0;
    for (int i = 0; i < nx && peak == 0.0; ++i) {
        for (int i2 = 0; i2 < (n == 2 ? nx : 1) && peak == 0.0; ++i2) {
            const Point x{kTwoPi * i / nx, kTwoPi * i2 / nx};
            for (int w = 0; w < nw; ++w) {
                const Point omega = n == 1 ? Point{w == 0 ? 1.0 : -1.0, 0.0}
                                           : Point{std::cos(kTwoPi * w / nw), std::sin(kTwoPi * w / nw)};
                peak = std::max(peak, std::abs(principal(x, omega)));
            }
        }
    }
    if (peak == 0.0) throw InvalidSymbol("the principal term vanishes identically");
}

void ClassicalSymbol::column(const Mode& xi, std::vector<std::pair<Mode, Complex>>& out) const {
    out.clear();
    if (xi[0] == 0 && xi[1] == 0) {
        switch (zero_.kind) {
            case ZeroModeRule::Kind::vanish: return;
            case ZeroModeRule::Kind::explicit_modes:
                for (const auto& [eta, v] : zero_.modes) accumulate(out, eta, v);
                return;
            case ZeroModeRule::Kind::principal_direction: {
                const Point omega0{1.0, 0.0};
                for (const auto& t : terms_) {
                    if (t.degree != 0.0) continue;
                    for (const auto& part : t.parts) {
                        const Complex sig = part.angular.at_direction(omega0, n_);
                        if (sig == Complex{}) continue;
                        for (const auto& [eta, c] : part.coeff) accumulate(out, eta, c * sig);
                    }
                }
                return;
            }
        }
    }
    const double r = std::hypot(static_cast<double>(xi[0]), static_cast<double>(xi[1]));
    for (const auto& t : terms_) {
        const double radial = std::pow(r, t.degree) * t.cutoff(r);
        if (radial == 0.0) continue;
        for (const auto& part : t.parts) {
            const Complex sig = part.angular.at_lattice(xi, n_);
            if (sig == Complex{}) continue;
            for (const auto& [eta, c] : part.coeff) accumulate(out, eta, c * sig * radial);
        }
    }
}

Complex ClassicalSymbol::value(const Point& x, const Point& xi) const {
    const double r = n_ == 1 ? std::abs(xi[0]) : std::hypot(xi[0], xi[1]);
    if (r == 0.0) throw DomainError("the symbol value is undefined at xi = 0");
    const Point omega{xi[0] / r, n_ == 1 ? 0.0 : xi[1] / r};
    Complex out{};
    for (const auto& t : terms_) {
        const double radial = std::pow(r, t.degree) * t.cutoff(r);
        for (const auto& part : t.parts) out += trig_poly(part.coeff, x, n_) * part.angular.at_direction(omega, n_) * radial;
    }
    return out;
}

Complex ClassicalSymbol::principal(const Point& x, const Point& omega) const {
    Complex out{};
    for (const auto& part : terms_.front().parts) {
        out += trig_poly(part.coeff, x, n_) * part.angular.at_direction(omega, n_);
    }
    return out;
}

ClassicalSymbol ClassicalSymbol::scaled(Complex c) const {
    std::vector<HomogeneousTerm> terms = terms_;
    for (auto& t : terms) {
        for (auto& part : t.parts) {
            for (auto& [eta, v] : part.coeff) v *= c;
        }
    }
    ZeroModeRule zero = zero_;
    for (auto& [eta, v] : zero.modes) v *= c;
    return ClassicalSymbol(n_, std::move(terms), std::move(zero));
}

ClassicalSymbol ClassicalSymbol::sum(const ClassicalSymbol& a, const ClassicalSymbol& b) {
    if (a.n_ != b.n_) throw SpecMismatch("symbols on different manifolds");
    std::vector<HomogeneousTerm> terms = a.terms_;
    terms.insert(terms.end(), b.terms_.begin(), b.terms_.end());
    ZeroModeRule zero;
    if (a.zero_.kind != ZeroModeRule::Kind::principal_direction ||
        b.zero_.kind != ZeroModeRule::Kind::principal_direction) {
        // both actions on e_0 are linear; keep the sum explicit
        zero.kind = ZeroModeRule::Kind::explicit_modes;
        std::vector<std::pair<Mode, Complex>> col;
        for (const ClassicalSymbol* s : {&a, &b}) {
            s->column({0, 0}, col);
            for (const auto& [eta, v] : col) zero.modes[eta] += v;
        }
    }
    return ClassicalSymbol(a.n_, std::move(terms), std::move(zero));
}

// ---------------------------------------------------------------------------

PdoSystem::PdoSystem(int n, int p) : n_(n), p_(p), entries_(static_cast<std::size_t>(p) * p) {
    if (n != 1 && n != 2) throw InvalidSymbol("systems are defined for n in {1, 2}");
    if (p < 1) throw InvalidSymbol("system size must be positive");
}

void PdoSystem::set(int j, int k, ClassicalSymbol symbol) {
    if (j < 0 || j >= p_ || k < 0 || k >= p_) throw SpecMismatch("system entry index out of range");
    if (symbol.dim() != n_) throw SpecMismatch("symbol dimension differs from the system");
    entries_[static_cast<std::size_t>(j) * p_ + k] = std::move(symbol);
}

const std::optional<ClassicalSymbol>& PdoSystem::entry(int j, int k) const {
    if (j < 0 || j >= p_ || k < 0 || k >= p_) throw SpecMismatch("system entry index out of range");
    return entries_[static_cast<std::size_t>(j) * p_ + k];
}

double PdoSystem::order(int j, int k) const {
    const auto& e = entry(j, k);
    return e ? e->order() : -std::numeric_limits<double>::infinity();
}

double PdoSystem::column_order(int k) const {
    double m = -std::numeric_limits<double>::infinity();
    for (int j = 0; j < p_; ++j) m = std::max(m, order(j, k));
    return std::isfinite(m) ? m : 0.0;
}

std::vector<double> PdoSystem::column_orders() const {
    std::vector<double> out(p_);
    for (int k = 0; k < p_; ++k) out[k] = column_order(k);
    return out;
}

int PdoSystem::bandwidth() const {
    int b = 0;
    for (const auto& e : entries_) {
        if (e) b = std::max(b, e->bandwidth());
    }
    return b;
}

PdoSystem PdoSystem::with_scaled_row(int j, Complex c) const {
    PdoSystem out = *this;
    for (int k = 0; k < p_; ++k) {
        const auto& e = entry(j, k);
        if (e) out.set(j, k, e->scaled(c));
    }
    return out;
}

PdoSystem PdoSystem::scalar(ClassicalSymbol symbol) {
    PdoSystem out(symbol.dim(), 1);
    out.set(0, 0, std::move(symbol));
    return out;
}

// ---------------------------------------------------------------------------

FourierField apply(const ClassicalSymbol& a, const FourierField& u) {
    if (a.dim() != u.dim()) throw SpecMismatch("symbol and field live on different manifolds");
    FourierField out(u.spec(), u.band() + a.bandwidth());
    std::vector<std::pair<Mode, Complex>> col;
    const auto coeffs = u.coefficients();
    for (std::size_t i = 0; i < coeffs.size(); ++i) {
        if (coeffs[i] == Complex{}) continue;
        const Mode xi = u.mode_at(i);
        a.column(xi, col);
        for (const auto& [eta, v] : col) out[{xi[0] + eta[0], xi[1] + eta[1]}] += v * coeffs[i];
    }
    return out;
}

std::vector<FourierField> apply_system(const PdoSystem& A, const std::vector<FourierField>& u) {
    if (static_cast<int>(u.size()) != A.size()) throw SpecMismatch("number of fields differs from the system size");
    int K = 0;
    for (const auto& f : u) {
        if (f.dim() != A.dim()) throw SpecMismatch("field and system live on different manifolds");
        K = std::max(K, f.band());
    }
    const int Kout = K + A.bandwidth();
    std::vector<FourierField> out;
    for (int j = 0; j < A.size(); ++j) {
        FourierField f(ManifoldSpec{A.dim()}, Kout);
        for (int k = 0; k < A.size(); ++k) {
            const auto& e = A.entry(j, k);
            if (e) f += apply(*e, u[k]);
        }
        out.push_back(std::move(f));
    }
    return out;
}

Eigen::MatrixXcd principal_symbol(const PdoSystem& A, const Point& x, const Point& omega) {
    const double len = A.dim() == 1 ? std::abs(omega[0]) : std::hypot(omega[0], omega[1]);
    if (std::abs(len - 1.0) > 1e-12 || (A.dim() == 1 && omega[1] != 0.0)) {
        throw DomainError("principal symbol needs a unit direction");
    }
    const int p = A.size();
    Eigen::MatrixXcd M = Eigen::MatrixXcd::Zero(p, p);
    for (int k = 0; k < p; ++k) {
        const double mk = A.column_order(k);
        for (int j = 0; j < p; ++j) {
            const auto& e = A.entry(j, k);
            if (e && e->order() == mk) M(j, k) = e->principal(x, omega);
        }
    }
    return M;
}

std::vector<Point> default_x_grid(int n, int per_axis) {
    if (per_axis < 1) throw DomainError("grid needs at least one point per axis");
    std::vector<Point> out;
    for (int i = 0; i < per_axis; ++i) {
        for (int i2 = 0; i2 < (n == 2 ? per_axis : 1); ++i2) {
            out.push_back({kTwoPi * i / per_axis, n == 2 ? kTwoPi * i2 / per_axis : 0.0});
        }
    }
    return out;
}

std::vector<Point> default_omega_grid(int n, int angles) {
    if (n == 1) return {{1.0, 0.0}, {-1.0, 0.0}};
    if (angles < 1) throw DomainError("grid needs at least one direction");
    std::vector<Point> out;
    for (int a = 0; a < angles; ++a) {
        const double th = kTwoPi * a / angles;
        out.push_back({std::cos(th), std::sin(th)});
    }
    return out;
}

EllipticityReport petrovskii_check(const PdoSystem& A, const std::vector<Point>& x_grid,
                                   const std::vector<Point>& omega_grid, double delta) {
    if (x_grid.empty() || omega_grid.empty()) throw DomainError("ellipticity grids must be nonempty");
    EllipticityReport rep;
    rep.delta = delta;
    rep.min_abs_det = std::numeric_limits<double>::infinity();
    for (const auto& x : x_grid) {
        for (const auto& w : omega_grid) {
            const double d = std::abs(principal_symbol(A, x, w).determinant());
            if (d < rep.min_abs_det) {
                rep.min_abs_det = d;
                rep.argmin_x = x;
                rep.argmin_omega = w;
            }
        }
    }
    rep.elliptic = rep.min_abs_det >= delta;
    return rep;
}

EllipticityReport petrovskii_check(const PdoSystem& A, double delta) {
    return petrovskii_check(A, default_x_grid(A.dim()), default_omega_grid(A.dim()), delta);
}

// ---------------------------------------------------------------------------

SparseMatrixC galerkin_section(const PdoSystem& A, int K_source, int K_target) {
    if (K_source < 0 || K_target < 0) throw DomainError("band limits must be nonnegative");
    const int n = A.dim();
    const int p = A.size();
    const auto Ns = static_cast<std::ptrdiff_t>(band_size(n, K_source));
    const auto Nt = static_cast<std::ptrdiff_t>(band_size(n, K_target));
    std::vector<Eigen::Triplet<Complex, std::ptrdiff_t>> trips;
    std::vector<std::pair<Mode, Complex>> col;
    for (int k = 0; k < p; ++k) {
        for (int j = 0; j < p; ++j) {
            const auto& e = A.entry(j, k);
            if (!e) continue;
            for (std::ptrdiff_t c = 0; c < Ns; ++c) {
                const Mode xi = band_mode(n, K_source, static_cast<std::size_t>(c));
                e->column(xi, col);
                for (const auto& [eta, v] : col) {
                    const Mode out{xi[0] + eta[0], xi[1] + eta[1]};
                    if (v == Complex{} || !in_band(n, K_target, out)) continue;
                    trips.emplace_back(j * Nt + static_cast<std::ptrdiff_t>(band_index(n, K_target, out)),
                                       k * Ns + c, v);
                }
            }
        }
    }
    SparseMatrixC M(p * Nt, p * Ns);
    M.setFromTriplets(trips.begin(), trips.end());
    M.makeCompressed();
    return M;
}

SparseMatrixC galerkin_matrix(const PdoSystem& A, int K) { return galerkin_section(A, K, K); }

SparseMatrixC formal_adjoint_galerkin(const SparseMatrixC& M) {
    SparseMatrixC out = M.adjoint();
    out.makeCompressed();
    return out;
}

Eigen::VectorXcd flatten(const std::vector<FourierField>& u, int K) {
    if (u.empty()) return {};
    const int n = u.front().dim();
    const auto N = static_cast<Eigen::Index>(band_size(n, K));
    Eigen::VectorXcd v = Eigen::VectorXcd::Zero(N * static_cast<Eigen::Index>(u.size()));
    for (std::size_t k = 0; k < u.size(); ++k) {
        if (u[k].dim() != n) throw SpecMismatch("fields live on different manifolds");
        const auto coeffs = u[k].coefficients();
        for (std::size_t i = 0; i < coeffs.size(); ++i) {
            if (coeffs[i] == Complex{}) continue;
            const Mode xi = u[k].mode_at(i);
            if (!in_band(n, K, xi)) throw SpecMismatch("field has modes beyond the band");
            v(static_cast<Eigen::Index>(k) * N + static_cast<Eigen::Index>(band_index(n, K, xi))) = coeffs[i];
        }
    }
    return v;
}

std::vector<FourierField> unflatten(const Eigen::VectorXcd& v, ManifoldSpec spec, int p, int K) {
    const auto N = static_cast<Eigen::Index>(band_size(spec.n, K));
    if (v.size() != N * p) throw SpecMismatch("vector length differs from p times the band size");
    std::vector<FourierField> out;
    for (int k = 0; k < p; ++k) {
        FourierField f(spec, K);
        auto coeffs = f.coefficients();
        for (Eigen::Index i = 0; i < N; ++i) coeffs[static_cast<std::size_t>(i)] = v(k * N + i);
        out.push_back(std::move(f));
    }
    return out;
}

}  // namespace refscale
