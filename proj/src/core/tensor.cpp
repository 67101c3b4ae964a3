#include "core/tensor.hpp"

#include <algorithm>
#include <cmath>

#include "core/error.hpp"

namespace sentifuse {

namespace {

size_t shape_product(const std::vector<size_t>& shape) {
  size_t n = 1;
  for (size_t d : shape) n *= d;
  return n;
}

}  // namespace

Tensor::Tensor(std::vector<size_t> shape)
    : shape_(std::move(shape)), values_(shape_product(shape_), 0.0) {}

Tensor::Tensor(std::vector<size_t> shape, std::vector<double> values)
    : shape_(std::move(shape)), values_(std::move(values)) {
  if (values_.size() != shape_product(shape_)) {
    throw Error(ErrCode::Dimension,
                "tensor: " + std::to_string(values_.size()) +
                    " values do not fill shape " + shape_to_string(shape_));
  }
}

Tensor Tensor::zeros(std::vector<size_t> shape) {
  return Tensor(std::move(shape));
}

Tensor Tensor::ones(std::vector<size_t> shape) {
  return full(std::move(shape), 1.0);
}

Tensor Tensor::full(std::vector<size_t> shape, double value) {
  Tensor t(std::move(shape));
  std::fill(t.values_.begin(), t.values_.end(), value);
  return t;
}

Tensor Tensor::vec(std::vector<double> values) {
  const size_t n = values.size();
  return Tensor({n}, std::move(values));
}

Tensor Tensor::matrix(size_t rows, size_t cols, std::vector<double> values) {
  return Tensor({rows, cols}, std::move(values));
}

Tensor Tensor::identity(size_t n) {
  Tensor t({n, n});
  for (size_t i = 0; i < n; ++i) t.values_[i * n + i] = 1.0;
  return t;
}

Tensor Tensor::uniform(std::vector<size_t> shape, double lo, double hi,
                       Rng& rng) {
  Tensor t(std::move(shape));
  for (double& v : t.values_) v = rng.uniform(lo, hi);
  return t;
}

size_t Tensor::rows() const {
  if (rank() != 2) {
    throw Error(ErrCode::Dimension,
                "tensor: rows() on rank-" + std::to_string(rank()) +
                    " tensor " + shape_str());
  }
  return shape_[0];
}

size_t Tensor::cols() const {
  if (rank() != 2) {
    throw Error(ErrCode::Dimension,
                "tensor: cols() on rank-" + std::to_string(rank()) +
                    " tensor " + shape_str());
  }
  return shape_[1];
}

double Tensor::at(size_t r, size_t c) const {
  if (r >= rows() || c >= cols()) {
    throw Error(ErrCode::OutOfRange,
                "tensor: index (" + std::to_string(r) + "," +
                    std::to_string(c) + ") outside " + shape_str());
  }
  return values_[r * shape_[1] + c];
}

double& Tensor::at(size_t r, size_t c) {
  if (r >= rows() || c >= cols()) {
    throw Error(ErrCode::OutOfRange,
                "tensor: index (" + std::to_string(r) + "," +
                    std::to_string(c) + ") outside " + shape_str());
  }
  return values_[r * shape_[1] + c];
}

bool Tensor::all_finite() const {
  for (double v : values_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

double Tensor::dot(const Tensor& other) const {
  if (size() != other.size()) {
    throw Error(ErrCode::Dimension, "tensor: dot of " + shape_str() + " with " +
                                        other.shape_str());
  }
  double s = 0.0;
  for (size_t i = 0; i < values_.size(); ++i) s += values_[i] * other[i];
  return s;
}

double Tensor::norm() const { return std::sqrt(dot(*this)); }

std::string Tensor::shape_str() const { return shape_to_string(shape_); }

std::string shape_to_string(const std::vector<size_t>& shape) {
  std::string s = "[";
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) s += "x";
    s += std::to_string(shape[i]);
  }
  s += "]";
  return s;
}

double cosine_similarity(const Tensor& u, const Tensor& v) {
  if (u.size() != v.size()) {
    throw Error(ErrCode::Dimension, "cosine_similarity: " + u.shape_str() +
                                        " vs " + v.shape_str());
  }
  const double uu = u.dot(u);
  const double vv = v.dot(v);
  if (uu == 0.0 || vv == 0.0) {
    throw Error(ErrCode::Degenerate,
                "cosine_similarity: zero-norm input vector");
  }
  // One sqrt over the product keeps parallel integer vectors exact:
  // sqrt(uu * vv) is an exact integer whenever uu * vv is a perfect square,
  // while sqrt(uu) * sqrt(vv) rounds twice and can land a ulp off.
  const double c = u.dot(v) / std::sqrt(uu * vv);
  return std::clamp(c, -1.0, 1.0);
}

}  // namespace sentifuse
