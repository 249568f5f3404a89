#include "refscale/fredholm.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "block_svd.hpp"
#include "refscale/errors.hpp"

namespace refscale {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

Eigen::VectorXd block_weights(int n, int K, const std::vector<RefinedIndex>& idx) {
    const auto N = static_cast<Eigen::Index>(band_size(n, K));
    Eigen::VectorXd w(N * static_cast<Eigen::Index>(idx.size()));
    for (std::size_t k = 0; k < idx.size(); ++k) {
        for (Eigen::Index i = 0; i < N; ++i) {
            w(static_cast<Eigen::Index>(k) * N + i) = weight(band_mode(n, K, static_cast<std::size_t>(i)), idx[k]);
        }
    }
    return w;
}

SparseMatrixC weighted(const SparseMatrixC& M, const Eigen::VectorXd& wt, const Eigen::VectorXd& ws) {
    SparseMatrixC G = M;
    for (Eigen::Index c = 0; c < G.outerSize(); ++c) {
        for (SparseMatrixC::InnerIterator it(G, c); it; ++it) it.valueRef() *= wt(it.row()) / ws(c);
    }
    return G;
}

/// Positions of the band-K entries (p blocks) inside the band-K2 layout.
std::vector<Eigen::Index> embedding_map(int n, int p, int K, int K2) {
    const auto N = static_cast<Eigen::Index>(band_size(n, K));
    const auto N2 = static_cast<Eigen::Index>(band_size(n, K2));
    std::vector<Eigen::Index> out(static_cast<std::size_t>(N * p));
    for (int k = 0; k < p; ++k) {
        for (Eigen::Index i = 0; i < N; ++i) {
            const Mode xi = band_mode(n, K, static_cast<std::size_t>(i));
            out[static_cast<std::size_t>(k * N + i)] = k * N2 + static_cast<Eigen::Index>(band_index(n, K2, xi));
        }
    }
    return out;
}

/// Orthonormal basis (L2 coefficient coordinates) of the null vectors of one
/// block, scattered into global columns.
void append_null_basis(const Eigen::MatrixXcd& local, const std::vector<Eigen::Index>& ids,
                       std::vector<Eigen::VectorXcd>& out, Eigen::Index dim) {
    if (local.cols() == 0) return;
    Eigen::HouseholderQR<Eigen::MatrixXcd> qr(local);
    const Eigen::MatrixXcd Q = qr.householderQ() * Eigen::MatrixXcd::Identity(local.rows(), local.cols());
    for (Eigen::Index j = 0; j < Q.cols(); ++j) {
        Eigen::VectorXcd v = Eigen::VectorXcd::Zero(dim);
        for (std::size_t i = 0; i < ids.size(); ++i) v(ids[i]) = Q(static_cast<Eigen::Index>(i), j);
        out.push_back(std::move(v));
    }
}

Eigen::MatrixXcd as_matrix(const std::vector<Eigen::VectorXcd>& cols, Eigen::Index dim) {
    Eigen::MatrixXcd M(dim, static_cast<Eigen::Index>(cols.size()));
    for (std::size_t j = 0; j < cols.size(); ++j) M.col(static_cast<Eigen::Index>(j)) = cols[j];
    return M;
}

// sine of the smallest angle between span(Q) and its L2-orthogonal complement,
// measured in the inner product <W x, W y>
double weighted_angle(const Eigen::MatrixXcd& Q, const Eigen::VectorXd& w) {
    if (Q.cols() == 0) return 1.0;
    const Eigen::MatrixXcd A = w.asDiagonal() * Q;
    const Eigen::MatrixXcd B = w.cwiseInverse().asDiagonal() * Q;
    const Eigen::Index d = Q.cols();
    Eigen::HouseholderQR<Eigen::MatrixXcd> qa(A), qb(B);
    const Eigen::MatrixXcd Ra = qa.matrixQR().topRows(d).triangularView<Eigen::Upper>();
    const Eigen::MatrixXcd Rb = qb.matrixQR().topRows(d).triangularView<Eigen::Upper>();
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(Ra * Rb.adjoint());
    return std::min(1.0, 1.0 / svd.singularValues()(0));
}

Eigen::VectorXcd flatten_into(const std::vector<FourierField>& f, int K, int p, int n) {
    if (static_cast<int>(f.size()) != p) throw SpecMismatch("number of fields differs from the system size");
    for (const auto& fj : f) {
        if (fj.dim() != n) throw SpecMismatch("field and system live on different manifolds");
    }
    return flatten(f, K);
}

}  // namespace

// ---------------------------------------------------------------------------

GalerkinOperator truncate(const PdoSystem& A, int K, double s, const SlowlyVaryingFunction& phi) {
    if (K < 0) throw DomainError("band limit must be nonnegative");
    GalerkinOperator G{A, K, A.bandwidth(), RefinedIndex{s, phi}, {}, {}, {}, {}, {}, {}, {}, {}};
    const int n = A.dim();
    for (double m : A.column_orders()) G.sources.push_back(RefinedIndex{s + m, phi});
    const std::vector<RefinedIndex> targets(static_cast<std::size_t>(A.size()), G.target);

    G.source_weights = block_weights(n, K, G.sources);
    G.target_weights = block_weights(n, K, targets);
    G.source_weights_ext = block_weights(n, K + G.B, G.sources);
    G.target_weights_ext = block_weights(n, K + G.B, targets);

    G.matrix = weighted(galerkin_section(A, K, K), G.target_weights, G.source_weights);
    G.tall = weighted(galerkin_section(A, K, K + G.B), G.target_weights_ext, G.source_weights);
    G.wide = weighted(galerkin_section(A, K + G.B, K), G.target_weights, G.source_weights_ext);
    return G;
}

double operator_norm(const GalerkinOperator& G) { return detail::block_svd(G.tall).sigma_max; }

FredholmReport fredholm_report(const GalerkinOperator& G, double rank_tol) {
    if (!(rank_tol > 0.0 && rank_tol < 1.0)) throw DomainError("rank_tol must lie in (0, 1)");
    FredholmReport rep;
    rep.K = G.K;
    rep.target = G.target;
    rep.sources = G.sources;
    rep.rank_tol = rank_tol;

    auto tall = std::make_shared<detail::BlockSvd>(detail::block_svd(G.tall));
    const detail::BlockSvd wide = detail::block_svd(G.wide);
    rep.sigma_max = std::max(tall->sigma_max, wide.sigma_max);
    rep.threshold = rank_tol * std::max(1.0, rep.sigma_max);
    const double thr = rep.threshold;

    double min_retained = kInf;
    double max_discarded = 0.0;
    bool discarded_any = false;
    double tall_min_retained = kInf;
    for (const detail::BlockSvd* svd : {static_cast<const detail::BlockSvd*>(tall.get()), &wide}) {
        for (const auto& b : svd->blocks) {
            for (Eigen::Index i = 0; i < b.sigma.size(); ++i) {
                if (b.sigma(i) >= thr) {
                    min_retained = std::min(min_retained, b.sigma(i));
                    if (svd == tall.get()) tall_min_retained = std::min(tall_min_retained, b.sigma(i));
                } else {
                    max_discarded = std::max(max_discarded, b.sigma(i));
                    discarded_any = true;
                }
            }
        }
    }
    rep.sigma_gap = !discarded_any || max_discarded == 0.0 ? kInf : min_retained / max_discarded;
    if (!std::isfinite(min_retained) && discarded_any) rep.sigma_gap = max_discarded == 0.0 ? kInf : 0.0;
    rep.ambiguous = rep.sigma_gap < kRankGapThreshold;
    rep.sigma_min_retained = std::isfinite(tall_min_retained) ? tall_min_retained : 0.0;

    const int p = G.size();
    const int n = G.system.dim();
    const Eigen::Index src_dim = G.tall.cols();
    const Eigen::Index tgt_dim = G.wide.rows();

    std::vector<Eigen::VectorXcd> ker;
    for (const auto& b : tall->blocks) {
        const auto c = static_cast<Eigen::Index>(b.cols.size());
        std::vector<Eigen::Index> null_cols;
        for (Eigen::Index j = 0; j < c; ++j) {
            if (j >= b.sigma.size() || b.sigma(j) < thr) null_cols.push_back(j);
        }
        Eigen::MatrixXcd local(c, static_cast<Eigen::Index>(null_cols.size()));
        for (std::size_t q = 0; q < null_cols.size(); ++q) {
            for (Eigen::Index i = 0; i < c; ++i) {
                local(i, static_cast<Eigen::Index>(q)) = b.V(i, null_cols[q]) / G.source_weights(b.cols[i]);
            }
        }
        append_null_basis(local, b.cols, ker, src_dim);
    }

    std::vector<Eigen::VectorXcd> coker;
    for (const auto& b : wide.blocks) {
        const auto r = static_cast<Eigen::Index>(b.rows.size());
        std::vector<Eigen::Index> null_rows;
        for (Eigen::Index j = 0; j < r; ++j) {
            if (j >= b.sigma.size() || b.sigma(j) < thr) null_rows.push_back(j);
        }
        Eigen::MatrixXcd local(r, static_cast<Eigen::Index>(null_rows.size()));
        for (std::size_t q = 0; q < null_rows.size(); ++q) {
            for (Eigen::Index i = 0; i < r; ++i) {
                local(i, static_cast<Eigen::Index>(q)) = b.U(i, null_rows[q]) * G.target_weights(b.rows[i]);
            }
        }
        append_null_basis(local, b.rows, coker, tgt_dim);
    }

    rep.kernel = as_matrix(ker, src_dim);
    rep.cokernel = as_matrix(coker, tgt_dim);
    rep.dim_kernel = static_cast<int>(ker.size());
    rep.dim_cokernel = static_cast<int>(coker.size());
    rep.index = rep.dim_kernel - rep.dim_cokernel;

    const ManifoldSpec spec{n};
    for (const auto& v : ker) rep.kernel_basis.push_back(unflatten(v, spec, p, G.K));
    for (const auto& v : coker) rep.cokernel_basis.push_back(unflatten(v, spec, p, G.K));

    rep.singular_values = detail::all_singular_values(*tall);
    rep.tall_svd = std::move(tall);
    return rep;
}

// ---------------------------------------------------------------------------

InvarianceTable index_invariance_experiment(const PdoSystem& A, const std::vector<RefinedIndex>& idx_list,
                                            const std::vector<int>& K_list, double rank_tol) {
    if (idx_list.empty() || K_list.empty()) throw DomainError("index invariance needs nonempty lists");
    InvarianceTable table;
    table.indices_agree = true;
    table.dims_stable = true;
    for (const auto& idx : idx_list) {
        std::optional<std::pair<int, int>> dims;
        for (int K : K_list) {
            const auto rep = fredholm_report(truncate(A, K, idx.s, idx.phi), rank_tol);
            InvarianceRow row{idx.s, idx.phi, K, rep.dim_kernel, rep.dim_cokernel, rep.index, rep.sigma_gap, rep.ambiguous};
            std::ostringstream where;
            where << "s = " << idx.s << ", phi = " << idx.phi.to_string() << ", K = " << K;
            if (rep.ambiguous) {
                table.any_ambiguous = true;
                table.flags.push_back("ambiguous rank at " + where.str());
            }
            if (!table.rows.empty() && row.index != table.rows.front().index) {
                table.indices_agree = false;
                table.flags.push_back("index disagreement at " + where.str());
            }
            if (dims && *dims != std::make_pair(row.dim_kernel, row.dim_cokernel)) {
                table.dims_stable = false;
                table.flags.push_back("dimensions drift with K at " + where.str());
            }
            dims = std::make_pair(row.dim_kernel, row.dim_cokernel);
            table.rows.push_back(row);
        }
    }
    if (table.any_ambiguous) table.indices_agree = false;
    return table;
}

// ---------------------------------------------------------------------------

SolvabilityResult solvability_test(const std::vector<FourierField>& f, const FredholmReport& rep, double tol) {
    SolvabilityResult out;
    const int p = static_cast<int>(rep.sources.size());
    if (static_cast<int>(f.size()) != p) throw SpecMismatch("number of fields differs from the system size");
    const double factor = f.front().spec().pairing_factor();
    double mass = 0.0;
    for (const auto& fj : f) mass += std::pow(gamma_norm(fj), 2);
    out.data_norm = std::sqrt(mass);
    if (rep.cokernel.cols() == 0) return out;
    const int n = f.front().dim();
    std::vector<FourierField> fK;
    for (const auto& fj : f) fK.push_back(fj.with_band(rep.K));
    const Eigen::VectorXcd b = flatten_into(fK, rep.K, p, n);
    for (Eigen::Index j = 0; j < rep.cokernel.cols(); ++j) {
        const Complex pairing = factor * rep.cokernel.col(j).dot(b);  // sum f conj(v)
        out.defect.push_back(pairing);
        if (std::abs(pairing) > tol * out.data_norm) out.solvable = false;
    }
    return out;
}

ProjectorPair::ProjectorPair(Eigen::MatrixXcd kernel, Eigen::MatrixXcd cokernel, Eigen::Index source_dim,
                             Eigen::Index target_dim)
    : kernel_(std::move(kernel)), cokernel_(std::move(cokernel)), source_dim_(source_dim), target_dim_(target_dim) {}

Eigen::VectorXcd ProjectorPair::apply_P(const Eigen::VectorXcd& u) const {
    if (kernel_.cols() == 0) return u;
    return u - kernel_ * (kernel_.adjoint() * u);
}

Eigen::VectorXcd ProjectorPair::apply_P_plus(const Eigen::VectorXcd& f) const {
    if (cokernel_.cols() == 0) return f;
    return f - cokernel_ * (cokernel_.adjoint() * f);
}

Eigen::MatrixXcd ProjectorPair::P() const {
    Eigen::MatrixXcd M = Eigen::MatrixXcd::Identity(source_dim_, source_dim_);
    if (kernel_.cols() > 0) M -= kernel_ * kernel_.adjoint();
    return M;
}

Eigen::MatrixXcd ProjectorPair::P_plus() const {
    Eigen::MatrixXcd M = Eigen::MatrixXcd::Identity(target_dim_, target_dim_);
    if (cokernel_.cols() > 0) M -= cokernel_ * cokernel_.adjoint();
    return M;
}

ProjectorPair projectors(const GalerkinOperator& G, const FredholmReport& rep) {
    if (rep.ambiguous) throw AmbiguousRank("projectors need an unambiguous numerical rank");
    ProjectorPair out(rep.kernel, rep.cokernel, G.tall.cols(), G.wide.rows());
    out.angle_kernel = std::asin(weighted_angle(rep.kernel, G.source_weights));
    out.angle_cokernel = std::asin(weighted_angle(rep.cokernel, G.target_weights));
    out.ill_conditioned = std::min(out.angle_kernel, out.angle_cokernel) < kMinProjectorAngle;
    return out;
}

SolveOutcome solve(const GalerkinOperator& G, const FredholmReport& rep, const std::vector<FourierField>& f,
                   double tol) {
    if (rep.ambiguous) throw AmbiguousRank("solve needs an unambiguous numerical rank");
    const int p = G.size();
    const int n = G.system.dim();
    const int Kx = G.K + G.B;
    for (const auto& fj : f) {
        if (fj.band() > Kx) {
            bool beyond = false;
            const auto c = fj.coefficients();
            for (std::size_t i = 0; i < c.size(); ++i) {
                if (c[i] != Complex{} && !in_band(n, Kx, fj.mode_at(i))) beyond = true;
            }
            if (beyond) throw SpecMismatch("right-hand side has modes beyond band K + B");
        }
    }

    SolveOutcome out;
    const auto test = solvability_test(f, rep, tol);
    out.defect = test.defect;
    out.solvable = test.solvable;
    if (!out.solvable) return out;

    std::vector<FourierField> fx;
    for (const auto& fj : f) fx.push_back(fj.with_band(Kx));
    Eigen::VectorXcd b = flatten_into(fx, Kx, p, n);
    if (rep.cokernel.cols() > 0) {
        const auto map = embedding_map(n, p, G.K, Kx);
        Eigen::VectorXcd bK(static_cast<Eigen::Index>(map.size()));
        for (std::size_t i = 0; i < map.size(); ++i) bK(static_cast<Eigen::Index>(i)) = b(map[i]);
        const Eigen::VectorXcd proj = rep.cokernel * (rep.cokernel.adjoint() * bK);
        for (std::size_t i = 0; i < map.size(); ++i) b(map[i]) -= proj(static_cast<Eigen::Index>(i));
    }
    const Eigen::VectorXcd bw = G.target_weights_ext.cwiseProduct(b);

    Eigen::VectorXcd y = Eigen::VectorXcd::Zero(G.tall.cols());
    for (const auto& blk : rep.tall_svd->blocks) {
        if (blk.sigma.size() == 0) continue;
        Eigen::VectorXcd beta(static_cast<Eigen::Index>(blk.rows.size()));
        for (std::size_t i = 0; i < blk.rows.size(); ++i) beta(static_cast<Eigen::Index>(i)) = bw(blk.rows[i]);
        Eigen::VectorXcd loc = Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(blk.cols.size()));
        for (Eigen::Index j = 0; j < blk.sigma.size(); ++j) {
            if (blk.sigma(j) < rep.threshold) continue;
            loc += blk.V.col(j) * (blk.U.col(j).dot(beta) / blk.sigma(j));
        }
        for (std::size_t i = 0; i < blk.cols.size(); ++i) y(blk.cols[i]) = loc(static_cast<Eigen::Index>(i));
    }
    Eigen::VectorXcd u = G.source_weights.cwiseInverse().cwiseProduct(y);
    if (rep.kernel.cols() > 0) u -= rep.kernel * (rep.kernel.adjoint() * u);

    const Eigen::VectorXcd r = G.tall * G.source_weights.cwiseProduct(u) - bw;
    out.residual = r.norm();
    out.relative_residual = bw.norm() > 0.0 ? out.residual / bw.norm() : out.residual;
    out.condition_number = rep.sigma_min_retained > 0.0 ? rep.tall_svd->sigma_max / rep.sigma_min_retained : kInf;
    out.u = unflatten(u, ManifoldSpec{n}, p, G.K);
    return out;
}

// ---------------------------------------------------------------------------

const char* to_string(AprioriVerdict v) {
    switch (v) {
        case AprioriVerdict::bounded: return "bounded";
        case AprioriVerdict::growing: return "growing";
        case AprioriVerdict::inconclusive: return "inconclusive";
    }
    return "";
}

double apriori_constant(const PdoSystem& A, double s, const SlowlyVaryingFunction& phi, double sigma, int K) {
    if (!(sigma > 0.0)) throw DomainError("sigma must be positive");
    const GalerkinOperator G = truncate(A, K, s, phi);
    const int n = A.dim();
    const std::vector<RefinedIndex> lower(static_cast<std::size_t>(A.size()), RefinedIndex{s - sigma, {}});
    const Eigen::VectorXd D = block_weights(n, K, lower).cwiseQuotient(G.source_weights).cwiseAbs2();

    double lam_min = kInf;
    for (const auto& comp : detail::components(G.tall)) {
        if (comp.cols.empty()) continue;
        const Eigen::MatrixXcd Gb = detail::gather(G.tall, comp);
        Eigen::MatrixXcd H = Gb.adjoint() * Gb;
        for (std::size_t i = 0; i < comp.cols.size(); ++i) {
            H(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) += D(comp.cols[i]);
        }
        if (H.rows() == 1) {
            lam_min = std::min(lam_min, H(0, 0).real());
        } else {
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(H, Eigen::EigenvaluesOnly);
            lam_min = std::min(lam_min, es.eigenvalues()(0));
        }
    }
    return 1.0 / std::sqrt(lam_min);
}

AprioriReport apriori_report(const PdoSystem& A, double s, const SlowlyVaryingFunction& phi, double sigma,
                             const std::vector<int>& K_list) {
    if (K_list.empty()) throw DomainError("apriori needs a nonempty K list");
    AprioriReport rep;
    rep.s = s;
    rep.phi = phi;
    rep.sigma = sigma;
    rep.K = K_list;
    for (int K : K_list) rep.c_quad.push_back(apriori_constant(A, s, phi, sigma, K));
    bool bounded = true;
    bool growing = true;
    for (std::size_t i = 1; i < K_list.size(); ++i) {
        const double doublings = std::log2(static_cast<double>(K_list[i]) / K_list[i - 1]);
        const double g = std::pow(rep.c_quad[i] / rep.c_quad[i - 1], 1.0 / doublings);
        rep.growth.push_back(g);
        bounded = bounded && std::abs(g - 1.0) <= 0.1;
        growing = growing && g >= 2.0;
    }
    if (K_list.size() < 2) {
        rep.verdict = AprioriVerdict::inconclusive;
    } else if (bounded) {
        rep.verdict = AprioriVerdict::bounded;
    } else if (growing) {
        rep.verdict = AprioriVerdict::growing;
    } else {
        rep.verdict = AprioriVerdict::inconclusive;
    }
    return rep;
}

}  // namespace refscale
