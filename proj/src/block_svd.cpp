#include "block_svd.hpp"

#include <Eigen/SVD>
#include <algorithm>
#include <functional>
#include <numeric>
#include <unordered_map>

namespace refscale::detail {

namespace {

struct UnionFind {
    std::vector<Eigen::Index> parent;
    explicit UnionFind(Eigen::Index n) : parent(static_cast<std::size_t>(n)) {
        std::iota(parent.begin(), parent.end(), Eigen::Index{0});
    }
    Eigen::Index find(Eigen::Index a) {
        while (parent[a] != a) {
            parent[a] = parent[parent[a]];
            a = parent[a];
        }
        return a;
    }
    void unite(Eigen::Index a, Eigen::Index b) {
        a = find(a);
        b = find(b);
        if (a != b) parent[std::max(a, b)] = std::min(a, b);
    }
};

}  // namespace

std::vector<Component> components(const SparseMatrixC& M) {
    const Eigen::Index R = M.rows();
    const Eigen::Index C = M.cols();
    UnionFind uf(R + C);
    for (Eigen::Index c = 0; c < C; ++c) {
        for (SparseMatrixC::InnerIterator it(M, c); it; ++it) {
            if (it.value() != Complex{}) uf.unite(it.row(), R + c);
        }
    }
    std::unordered_map<Eigen::Index, std::size_t> slot;
    std::vector<Component> out;
    auto get = [&](Eigen::Index node) -> Component& {
        const Eigen::Index root = uf.find(node);
        auto [pos, fresh] = slot.try_emplace(root, out.size());
        if (fresh) out.emplace_back();
        return out[pos->second];
    };
    for (Eigen::Index r = 0; r < R; ++r) get(r).rows.push_back(r);
    for (Eigen::Index c = 0; c < C; ++c) get(R + c).cols.push_back(c);
    return out;
}

Eigen::MatrixXcd gather(const SparseMatrixC& M, const Component& comp) {
    Eigen::MatrixXcd D = Eigen::MatrixXcd::Zero(static_cast<Eigen::Index>(comp.rows.size()),
                                                static_cast<Eigen::Index>(comp.cols.size()));
    std::unordered_map<Eigen::Index, Eigen::Index> local_row;
    for (std::size_t i = 0; i < comp.rows.size(); ++i) local_row[comp.rows[i]] = static_cast<Eigen::Index>(i);
    for (std::size_t j = 0; j < comp.cols.size(); ++j) {
        for (SparseMatrixC::InnerIterator it(M, comp.cols[j]); it; ++it) {
            D(local_row.at(it.row()), static_cast<Eigen::Index>(j)) += it.value();
        }
    }
    return D;
}

BlockSvd block_svd(const SparseMatrixC& M) {
    BlockSvd out;
    out.nrows = M.rows();
    out.ncols = M.cols();
    for (auto& comp : components(M)) {
        SvdBlock b;
        const auto r = static_cast<Eigen::Index>(comp.rows.size());
        const auto c = static_cast<Eigen::Index>(comp.cols.size());
        if (r > 0 && c > 0) {
            const Eigen::MatrixXcd D = gather(M, comp);
            if (std::min(r, c) <= 16) {
                Eigen::JacobiSVD<Eigen::MatrixXcd> svd(D, Eigen::ComputeFullU | Eigen::ComputeFullV);
                b.sigma = svd.singularValues();
                b.U = svd.matrixU();
                b.V = svd.matrixV();
            } else {
                Eigen::BDCSVD<Eigen::MatrixXcd> svd(D, Eigen::ComputeFullU | Eigen::ComputeFullV);
                b.sigma = svd.singularValues();
                b.U = svd.matrixU();
                b.V = svd.matrixV();
            }
            if (b.sigma.size() > 0) out.sigma_max = std::max(out.sigma_max, b.sigma(0));
        } else {
            b.U = Eigen::MatrixXcd::Identity(r, r);
            b.V = Eigen::MatrixXcd::Identity(c, c);
        }
        b.rows = std::move(comp.rows);
        b.cols = std::move(comp.cols);
        out.blocks.push_back(std::move(b));
    }
    return out;
}

std::vector<double> all_singular_values(const BlockSvd& svd) {
    std::vector<double> out;
    for (const auto& b : svd.blocks) {
        for (Eigen::Index i = 0; i < b.sigma.size(); ++i) out.push_back(b.sigma(i));
    }
    std::sort(out.begin(), out.end(), std::greater<>());
    return out;
}

}  // namespace refscale::detail
