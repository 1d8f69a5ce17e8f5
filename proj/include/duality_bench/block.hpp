#ifndef DUALITY_BENCH_BLOCK_HPP
#define DUALITY_BENCH_BLOCK_HPP

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace duality_bench {

/// Flat parameter vector. Blocks are contiguous index ranges of it; matrix
/// valued blocks are flattened row-major by the caller.
using ParamVector = Eigen::VectorXd;

/// Partition of a D-dimensional parameter vector into K >= 2 ordered,
/// contiguous blocks. Block indices are 0-based throughout the library.
class BlockDecomposition {
 public:
  explicit BlockDecomposition(std::vector<std::size_t> block_dims)
      : dims_(std::move(block_dims)) {
    if (dims_.size() < 2) {
      throw std::invalid_argument("K must exceed 1");
    }
    offsets_.reserve(dims_.size());
    std::size_t offset = 0;
    for (std::size_t i = 0; i < dims_.size(); ++i) {
      if (dims_[i] == 0) {
        throw std::invalid_argument("block " + std::to_string(i + 1) +
                                    " has zero dimension");
      }
      offsets_.push_back(offset);
      offset += dims_[i];
    }
    total_dim_ = offset;
  }

  std::size_t num_blocks() const { return dims_.size(); }
  std::size_t total_dim() const { return total_dim_; }
  std::size_t block_dim(std::size_t i) const { return dims_.at(i); }
  std::size_t block_offset(std::size_t i) const { return offsets_.at(i); }
  std::size_t complement_dim(std::size_t i) const {
    return total_dim_ - block_dim(i);
  }
  const std::vector<std::size_t>& block_dims() const { return dims_; }
  const std::vector<std::size_t>& block_offsets() const { return offsets_; }

  bool all_scalar_blocks() const {
    for (auto d : dims_) {
      if (d != 1) return false;
    }
    return true;
  }

  /// Flat indices belonging to block i, in order.
  std::vector<int> block_indices(std::size_t i) const {
    check_index(i);
    std::vector<int> idx(dims_[i]);
    std::iota(idx.begin(), idx.end(), static_cast<int>(offsets_[i]));
    return idx;
  }

  /// Flat indices of every block except i, in block order.
  std::vector<int> complement_indices(std::size_t i) const {
    check_index(i);
    std::vector<int> idx;
    idx.reserve(complement_dim(i));
    for (std::size_t d = 0; d < total_dim_; ++d) {
      if (d < offsets_[i] || d >= offsets_[i] + dims_[i]) {
        idx.push_back(static_cast<int>(d));
      }
    }
    return idx;
  }

  void check_index(std::size_t i) const {
    if (i >= dims_.size()) {
      throw std::out_of_range("block index " + std::to_string(i) +
                              " out of range for K=" +
                              std::to_string(dims_.size()));
    }
  }

  void check_vector(const ParamVector& theta) const {
    if (static_cast<std::size_t>(theta.size()) != total_dim_) {
      throw std::invalid_argument(
          "parameter vector has length " + std::to_string(theta.size()) +
          ", decomposition expects " + std::to_string(total_dim_));
    }
    if (!theta.allFinite()) {
      throw std::invalid_argument("parameter vector has non-finite entries");
    }
  }

  friend bool operator==(const BlockDecomposition& a,
                         const BlockDecomposition& b) {
    return a.dims_ == b.dims_;
  }

 private:
  std::vector<std::size_t> dims_;
  std::vector<std::size_t> offsets_;
  std::size_t total_dim_ = 0;
};

inline BlockDecomposition make_decomposition(
    const std::vector<long long>& block_dims) {
  std::vector<std::size_t> dims;
  dims.reserve(block_dims.size());
  for (std::size_t i = 0; i < block_dims.size(); ++i) {
    if (block_dims[i] < 1) {
      throw std::invalid_argument("block " + std::to_string(i + 1) +
                                  " must have positive dimension");
    }
    dims.push_back(static_cast<std::size_t>(block_dims[i]));
  }
  return BlockDecomposition(std::move(dims));
}

/// Block i of a parameter vector together with its complement θ₋ᵢ.
struct BlockView {
  std::size_t block_index = 0;
  Eigen::VectorXd values;
  Eigen::VectorXd complement_values;
};

inline BlockView split(const BlockDecomposition& dec, const ParamVector& theta,
                       std::size_t i) {
  dec.check_index(i);
  dec.check_vector(theta);
  BlockView view;
  view.block_index = i;
  view.values = theta.segment(static_cast<Eigen::Index>(dec.block_offset(i)),
                              static_cast<Eigen::Index>(dec.block_dim(i)));
  view.complement_values = theta(dec.complement_indices(i));
  return view;
}

inline ParamVector reassemble(const BlockDecomposition& dec,
                              const BlockView& view) {
  const std::size_t i = view.block_index;
  dec.check_index(i);
  if (static_cast<std::size_t>(view.values.size()) != dec.block_dim(i) ||
      static_cast<std::size_t>(view.complement_values.size()) !=
          dec.complement_dim(i)) {
    throw std::invalid_argument("block view does not match decomposition");
  }
  ParamVector theta(static_cast<Eigen::Index>(dec.total_dim()));
  theta(dec.complement_indices(i)) = view.complement_values;
  theta.segment(static_cast<Eigen::Index>(dec.block_offset(i)),
                static_cast<Eigen::Index>(dec.block_dim(i))) = view.values;
  return theta;
}

/// Rebuild a full vector from block i's value and a complement vector.
inline ParamVector join(const BlockDecomposition& dec, std::size_t i,
                        const Eigen::VectorXd& block,
                        const Eigen::VectorXd& complement) {
  return reassemble(dec, BlockView{i, block, complement});
}

inline ParamVector substitute(const BlockDecomposition& dec,
                              const ParamVector& theta, std::size_t i,
                              const Eigen::VectorXd& new_block) {
  dec.check_index(i);
  dec.check_vector(theta);
  if (static_cast<std::size_t>(new_block.size()) != dec.block_dim(i)) {
    throw std::invalid_argument(
        "replacement for block " + std::to_string(i + 1) + " has length " +
        std::to_string(new_block.size()) + ", expected " +
        std::to_string(dec.block_dim(i)));
  }
  ParamVector out = theta;
  out.segment(static_cast<Eigen::Index>(dec.block_offset(i)),
              static_cast<Eigen::Index>(dec.block_dim(i))) = new_block;
  return out;
}

}  // namespace duality_bench

#endif  // DUALITY_BENCH_BLOCK_HPP
