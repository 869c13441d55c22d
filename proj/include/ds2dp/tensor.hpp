#pragma once

#include <Eigen/Core>

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "ds2dp/error.hpp"

namespace ds2dp {

using Index = Eigen::Index;

template <typename Scalar>
using MapMatrixT = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Scalar> using SignatureT = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// I x J abundance map of one endmember, row-major so that (i, j) matches a cube slab.
using AbundanceMap = MapMatrixT<double>;
/// K-length spectral signature of one endmember.
using Signature = SignatureT<double>;

/// Dense I x J x K hyperspectral cube.
///
/// Storage is band-major: band k occupies a contiguous row-major I x J slab, so the flat
/// index of (i, j, k) is k*I*J + i*J + j.
template <typename Scalar> class CubeT {
public:
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using BandMap = Eigen::Map<MapMatrixT<Scalar>>;
  using ConstBandMap = Eigen::Map<const MapMatrixT<Scalar>>;

  CubeT() = default;
  CubeT(Index rows, Index cols, Index bands) : rows_(rows), cols_(cols), bands_(bands) {
    if (rows < 0 || cols < 0 || bands < 0) throw ShapeError("cube dimensions must be non-negative");
    data_ = Vector::Zero(rows * cols * bands);
  }
  CubeT(Index rows, Index cols, Index bands, Vector data)
      : rows_(rows), cols_(cols), bands_(bands), data_(std::move(data)) {
    if (data_.size() != rows * cols * bands)
      throw ShapeError("cube payload length " + std::to_string(data_.size()) + " != I*J*K");
  }

  static CubeT Constant(Index rows, Index cols, Index bands, Scalar value) {
    return CubeT(rows, cols, bands, Vector::Constant(rows * cols * bands, value));
  }

  Index rows() const { return rows_; }
  Index cols() const { return cols_; }
  Index bands() const { return bands_; }
  Index pixels() const { return rows_ * cols_; }
  Index size() const { return data_.size(); }

  Scalar &operator()(Index i, Index j, Index k) { return data_[(k * rows_ + i) * cols_ + j]; }
  Scalar operator()(Index i, Index j, Index k) const { return data_[(k * rows_ + i) * cols_ + j]; }

  BandMap band(Index k) { return BandMap(data_.data() + k * pixels(), rows_, cols_); }
  ConstBandMap band(Index k) const { return ConstBandMap(data_.data() + k * pixels(), rows_, cols_); }

  // Spectrum of pixel (i, j), strided across bands.
  auto spectrum(Index i, Index j) const {
    return Eigen::Map<const Vector, 0, Eigen::InnerStride<>>(data_.data() + i * cols_ + j, bands_,
                                                             Eigen::InnerStride<>(pixels()));
  }
  auto spectrum(Index i, Index j) {
    return Eigen::Map<Vector, 0, Eigen::InnerStride<>>(data_.data() + i * cols_ + j, bands_,
                                                       Eigen::InnerStride<>(pixels()));
  }

  const Vector &data() const { return data_; }
  Vector &data() { return data_; }

  bool same_shape(const CubeT &other) const {
    return rows_ == other.rows_ && cols_ == other.cols_ && bands_ == other.bands_;
  }

  template <typename Other> CubeT<Other> cast() const {
    return CubeT<Other>(rows_, cols_, bands_, data_.template cast<Other>());
  }

  bool operator==(const CubeT &other) const { return same_shape(other) && data_ == other.data_; }

private:
  Index rows_ = 0;
  Index cols_ = 0;
  Index bands_ = 0;
  Vector data_;
};

using Cube = CubeT<double>;

inline std::string shape_string(Index i, Index j, Index k) {
  return std::to_string(i) + "x" + std::to_string(j) + "x" + std::to_string(k);
}

template <typename Scalar>
void require_same_shape(const CubeT<Scalar> &a, const CubeT<Scalar> &b, const char *what) {
  if (!a.same_shape(b))
    throw ShapeError(std::string(what) + ": shape " + shape_string(a.rows(), a.cols(), a.bands()) +
                     " vs " + shape_string(b.rows(), b.cols(), b.bands()));
}

/// Linear mixture: out(i, j, k) = sum_r maps[r](i, j) * sigs[r](k).
///
/// The band-major layout makes the result a single GEMM, out = C * A^T with C the K x R
/// signature matrix and A the (I*J) x R matrix of row-major-flattened maps. An empty list
/// yields a zero cube, so the dimensions must be supplied.
template <typename Scalar>
CubeT<Scalar> outer_accumulate(std::span<const MapMatrixT<Scalar>> maps,
                               std::span<const SignatureT<Scalar>> sigs, Index rows, Index cols,
                               Index bands) {
  if (maps.size() != sigs.size())
    throw ShapeError("outer_accumulate: " + std::to_string(maps.size()) + " maps vs " +
                     std::to_string(sigs.size()) + " signatures");
  const Index endmembers = static_cast<Index>(maps.size());
  using Dense = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  Dense spectra(bands, endmembers);
  Dense abundances(rows * cols, endmembers);
  for (Index r = 0; r < endmembers; ++r) {
    const auto &map = maps[static_cast<std::size_t>(r)];
    const auto &sig = sigs[static_cast<std::size_t>(r)];
    if (map.rows() != rows || map.cols() != cols)
      throw ShapeError("outer_accumulate: abundance map " + std::to_string(r) + " is " +
                       std::to_string(map.rows()) + "x" + std::to_string(map.cols()));
    if (sig.size() != bands)
      throw ShapeError("outer_accumulate: signature " + std::to_string(r) + " has length " +
                       std::to_string(sig.size()));
    spectra.col(r) = sig;
    abundances.col(r) = Eigen::Map<const SignatureT<Scalar>>(map.data(), rows * cols);
  }
  CubeT<Scalar> out(rows, cols, bands);
  if (endmembers == 0) return out;
  // Column-major K x (I*J) view: column p holds band values of flat pixel p, i.e. the
  // transpose of the band-major storage.
  Eigen::Map<Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> unfolded(
      out.data().data(), bands, rows * cols);
  unfolded.noalias() = spectra * abundances.transpose();
  return out;
}

template <typename Scalar>
CubeT<Scalar> outer_accumulate(const std::vector<MapMatrixT<Scalar>> &maps,
                               const std::vector<SignatureT<Scalar>> &sigs) {
  if (maps.empty() || sigs.empty())
    throw ShapeError("outer_accumulate: cannot infer dimensions from empty factor lists");
  return outer_accumulate<Scalar>(std::span(maps), std::span(sigs), maps.front().rows(),
                                  maps.front().cols(), sigs.front().size());
}

/// Mode-3 unfolding: K x (I*J) matrix with entry (k, j*I + i) = c(i, j, k).
///
/// The column order follows vec() of a column-major I x J slab, which is the transpose
/// of the storage order inside a band. Keep this in mind before mapping memory directly.
template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> mode3_unfold(const CubeT<Scalar> &c) {
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> out(c.bands(), c.pixels());
  for (Index k = 0; k < c.bands(); ++k)
    for (Index j = 0; j < c.cols(); ++j)
      for (Index i = 0; i < c.rows(); ++i) out(k, j * c.rows() + i) = c(i, j, k);
  return out;
}

template <typename Scalar, typename Derived>
CubeT<Scalar> mode3_fold(const Eigen::MatrixBase<Derived> &m, Index rows, Index cols) {
  if (m.cols() != rows * cols)
    throw ShapeError("mode3_fold: " + std::to_string(m.cols()) + " columns for a " +
                     std::to_string(rows) + "x" + std::to_string(cols) + " slab");
  CubeT<Scalar> out(rows, cols, m.rows());
  for (Index k = 0; k < m.rows(); ++k)
    for (Index j = 0; j < cols; ++j)
      for (Index i = 0; i < rows; ++i) out(i, j, k) = m(k, j * rows + i);
  return out;
}

// Reductions run sequentially in storage order so results are reproducible bit for bit.

template <typename Scalar> Scalar squared_norm(const CubeT<Scalar> &c) {
  Scalar acc = 0;
  for (Index n = 0; n < c.size(); ++n) acc += c.data()[n] * c.data()[n];
  return acc;
}

template <typename Scalar> Scalar frobenius_norm(const CubeT<Scalar> &c) {
  return std::sqrt(squared_norm(c));
}

template <typename Scalar> Scalar l1_norm(const CubeT<Scalar> &c) {
  Scalar acc = 0;
  for (Index n = 0; n < c.size(); ++n) acc += std::abs(c.data()[n]);
  return acc;
}

template <typename Scalar> CubeT<Scalar> add(const CubeT<Scalar> &a, const CubeT<Scalar> &b) {
  require_same_shape(a, b, "add");
  return CubeT<Scalar>(a.rows(), a.cols(), a.bands(), a.data() + b.data());
}

template <typename Scalar> CubeT<Scalar> sub(const CubeT<Scalar> &a, const CubeT<Scalar> &b) {
  require_same_shape(a, b, "sub");
  return CubeT<Scalar>(a.rows(), a.cols(), a.bands(), a.data() - b.data());
}

template <typename Scalar> CubeT<Scalar> scale(const CubeT<Scalar> &a, Scalar factor) {
  return CubeT<Scalar>(a.rows(), a.cols(), a.bands(), a.data() * factor);
}

} // namespace ds2dp
