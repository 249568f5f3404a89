#pragma once

// Singular value decomposition of a sparse matrix that splits into
// independent blocks: connected components of the bipartite graph of rows and
// columns joined by nonzero entries. Constant-coefficient systems decouple
// into one p x p block per frequency.

#include <Eigen/Dense>
#include <vector>

#include "refscale/pdo.hpp"

namespace refscale::detail {

struct SvdBlock {
    std::vector<Eigen::Index> rows;
    std::vector<Eigen::Index> cols;
    Eigen::VectorXd sigma;  // min(rows, cols) values, descending
    Eigen::MatrixXcd U;     // rows x rows
    Eigen::MatrixXcd V;     // cols x cols
};

struct BlockSvd {
    Eigen::Index nrows = 0;
    Eigen::Index ncols = 0;
    std::vector<SvdBlock> blocks;
    double sigma_max = 0.0;
};

/// Components of the nonzero pattern: each entry lists the row and column ids
/// of one block. Rows or columns without entries form blocks of their own.
struct Component {
    std::vector<Eigen::Index> rows;
    std::vector<Eigen::Index> cols;
};
std::vector<Component> components(const SparseMatrixC& M);

/// Dense submatrix M[rows, cols].
Eigen::MatrixXcd gather(const SparseMatrixC& M, const Component& c);

BlockSvd block_svd(const SparseMatrixC& M);

/// All singular values, descending (structural zeros excluded).
std::vector<double> all_singular_values(const BlockSvd& svd);

}  // namespace refscale::detail
