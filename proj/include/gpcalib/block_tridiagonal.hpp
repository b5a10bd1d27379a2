#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "gpcalib/errors.hpp"

namespace gpcalib {

/// Symmetric positive-definite block-tridiagonal system with fixed-size
/// square blocks. Only the diagonal and the strictly-lower blocks are stored:
/// `lower[k]` is block (k+1, k).
///
/// `solve()` runs a block Cholesky factorization followed by forward and
/// backward substitution, O(n) in the number of blocks.
template <int B, typename Scalar = double>
class BlockTridiagonalSystem {
 public:
  using Block = Eigen::Matrix<Scalar, B, B>;
  using Vector = Eigen::Matrix<Scalar, B, 1>;

  explicit BlockTridiagonalSystem(std::size_t n_blocks)
      : diag(n_blocks, Block::Zero()),
        lower(n_blocks > 0 ? n_blocks - 1 : 0, Block::Zero()),
        rhs(n_blocks, Vector::Zero()) {}

  std::size_t size() const { return diag.size(); }

  std::vector<Vector> solve() const {
    const std::size_t n = diag.size();
    std::vector<Eigen::LLT<Block>> chol;
    chol.reserve(n);
    // coupling[k] = lower[k-1] * L_{k-1}^{-T}
    std::vector<Block> coupling(n, Block::Zero());

    for (std::size_t k = 0; k < n; ++k) {
      Block pivot = diag[k];
      if (k > 0) {
        coupling[k] = chol[k - 1]
                          .matrixL()
                          .solve(lower[k - 1].transpose())
                          .transpose();
        pivot.noalias() -= coupling[k] * coupling[k].transpose();
      }
      chol.emplace_back(pivot);
      if (chol.back().info() != Eigen::Success) {
        throw NumericalFailure(
            "block-tridiagonal factorization failed: pivot block " +
                std::to_string(k) + " is not positive definite",
            k);
      }
    }

    std::vector<Vector> z(n);
    for (std::size_t k = 0; k < n; ++k) {
      Vector r = rhs[k];
      if (k > 0) r.noalias() -= coupling[k] * z[k - 1];
      z[k] = chol[k].matrixL().solve(r);
    }

    std::vector<Vector> x(n);
    for (std::size_t k = n; k-- > 0;) {
      Vector r = z[k];
      if (k + 1 < n) r.noalias() -= coupling[k + 1].transpose() * x[k + 1];
      x[k] = chol[k].matrixU().solve(r);
    }
    return x;
  }

  std::vector<Block> diag;
  std::vector<Block> lower;
  std::vector<Vector> rhs;
};

}  // namespace gpcalib
