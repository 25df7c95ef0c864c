#pragma once

#include <Eigen/Core>

#include <complex>
#include <stdexcept>
#include <vector>

namespace marc {

using Index = Eigen::Index;
using Shape = std::vector<Index>;

/// Dense row-major tensor of arbitrary rank. Math on top of it goes through
/// Eigen maps (vec()/matrix()) so expressions stay allocation-free.
template <typename Scalar>
class Tensor {
 public:
  using VectorType = Eigen::Vector<Scalar, Eigen::Dynamic>;
  using MatrixType =
      Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

  Tensor() = default;

  explicit Tensor(Shape shape, Scalar fill = Scalar{})
      : shape_(std::move(shape)), data_(checked_size(shape_), fill) {}

  const Shape& shape() const { return shape_; }
  Index rank() const { return static_cast<Index>(shape_.size()); }
  Index dim(Index axis) const { return shape_.at(static_cast<size_t>(axis)); }
  Index size() const { return static_cast<Index>(data_.size()); }

  Scalar* data() { return data_.data(); }
  const Scalar* data() const { return data_.data(); }

  Scalar& operator[](Index i) { return data_[static_cast<size_t>(i)]; }
  const Scalar& operator[](Index i) const { return data_[static_cast<size_t>(i)]; }

  Scalar& operator()(Index i) { return data_[static_cast<size_t>(i)]; }
  const Scalar& operator()(Index i) const { return data_[static_cast<size_t>(i)]; }

  Scalar& operator()(Index i, Index j) { return data_[static_cast<size_t>(i * shape_[1] + j)]; }
  const Scalar& operator()(Index i, Index j) const {
    return data_[static_cast<size_t>(i * shape_[1] + j)];
  }

  Scalar& operator()(Index i, Index j, Index k) {
    return data_[static_cast<size_t>((i * shape_[1] + j) * shape_[2] + k)];
  }
  const Scalar& operator()(Index i, Index j, Index k) const {
    return data_[static_cast<size_t>((i * shape_[1] + j) * shape_[2] + k)];
  }

  Scalar& operator()(Index i, Index j, Index k, Index l) {
    return data_[static_cast<size_t>(((i * shape_[1] + j) * shape_[2] + k) * shape_[3] + l)];
  }
  const Scalar& operator()(Index i, Index j, Index k, Index l) const {
    return data_[static_cast<size_t>(((i * shape_[1] + j) * shape_[2] + k) * shape_[3] + l)];
  }

  Eigen::Map<VectorType> vec() { return {data_.data(), size()}; }
  Eigen::Map<const VectorType> vec() const { return {data_.data(), size()}; }

  /// 2-D view (rank must be 2).
  Eigen::Map<MatrixType> matrix() {
    require_rank(2);
    return {data_.data(), shape_[0], shape_[1]};
  }
  Eigen::Map<const MatrixType> matrix() const {
    require_rank(2);
    return {data_.data(), shape_[0], shape_[1]};
  }

  void require_rank(Index r) const {
    if (rank() != r) throw std::invalid_argument("tensor: rank mismatch");
  }

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.shape_ == b.shape_ && a.data_ == b.data_;
  }

  static Index checked_size(const Shape& s) {
    if (s.empty()) throw std::invalid_argument("tensor: empty shape");
    Index n = 1;
    for (Index d : s) {
      if (d <= 0) throw std::invalid_argument("tensor: non-positive dimension");
      n *= d;
    }
    return n;
  }

 private:
  Shape shape_;
  std::vector<Scalar> data_;
};

template <typename Scalar>
using ComplexTensor = Tensor<std::complex<Scalar>>;

using TensorF = Tensor<float>;
using TensorD = Tensor<double>;
using CTensorF = ComplexTensor<float>;
using CTensorD = ComplexTensor<double>;

template <typename Scalar>
Scalar max_abs_diff(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  if (!a.same_shape(b)) throw std::invalid_argument("max_abs_diff: shape mismatch");
  return (a.vec() - b.vec()).cwiseAbs().maxCoeff();
}

template <typename Scalar>
Scalar max_abs_diff(const ComplexTensor<Scalar>& a, const ComplexTensor<Scalar>& b) {
  if (!a.same_shape(b)) throw std::invalid_argument("max_abs_diff: shape mismatch");
  Scalar m = 0;
  for (Index i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace marc
