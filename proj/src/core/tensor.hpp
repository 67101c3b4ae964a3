#ifndef SENTIFUSE_CORE_TENSOR_HPP
#define SENTIFUSE_CORE_TENSOR_HPP

#include <cstddef>
#include <string>
#include <vector>

#include "core/rng.hpp"

namespace sentifuse {

// Dense row-major tensor of doubles. Tensors are plain immutable-by-
// convention values: nothing here is shared, so copies are safe to hand
// across threads.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<size_t> shape);  // zero-filled
  Tensor(std::vector<size_t> shape, std::vector<double> values);

  static Tensor zeros(std::vector<size_t> shape);
  static Tensor ones(std::vector<size_t> shape);
  static Tensor full(std::vector<size_t> shape, double value);
  static Tensor vec(std::vector<double> values);  // rank-1
  static Tensor matrix(size_t rows, size_t cols, std::vector<double> values);
  static Tensor identity(size_t n);
  static Tensor uniform(std::vector<size_t> shape, double lo, double hi,
                        Rng& rng);

  const std::vector<size_t>& shape() const { return shape_; }
  size_t rank() const { return shape_.size(); }
  size_t size() const { return values_.size(); }
  bool empty() const { return values_.empty(); }

  // Rank-2 accessors; throw on other ranks.
  size_t rows() const;
  size_t cols() const;
  double at(size_t r, size_t c) const;
  double& at(size_t r, size_t c);

  double operator[](size_t i) const { return values_[i]; }
  double& operator[](size_t i) { return values_[i]; }
  const double* data() const { return values_.data(); }
  double* data() { return values_.data(); }
  const std::vector<double>& values() const { return values_; }

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
  bool all_finite() const;
  double dot(const Tensor& other) const;  // over flattened values
  double norm() const;

  std::string shape_str() const;  // e.g. "[3x4]"

  // Exact comparison (shape and bit-level values); used by persistence and
  // determinism checks.
  bool operator==(const Tensor& other) const {
    return shape_ == other.shape_ && values_ == other.values_;
  }
  bool operator!=(const Tensor& other) const { return !(*this == other); }

 private:
  std::vector<size_t> shape_;
  std::vector<double> values_;
};

// Cosine similarity clamped to [-1, 1]. Throws a degenerate-vector error if
// either input has zero norm.
double cosine_similarity(const Tensor& u, const Tensor& v);

std::string shape_to_string(const std::vector<size_t>& shape);

}  // namespace sentifuse

#endif
