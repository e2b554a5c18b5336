#pragma once

#include <Eigen/Core>
#include <complex>

namespace qcfd {

template <typename Scalar>
using Vec = Eigen::Vector<Scalar, Eigen::Dynamic>;
template <typename Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

using VecX = Vec<double>;
using MatX = Mat<double>;
using CVecX = Vec<std::complex<double>>;
using CMatX = Mat<std::complex<double>>;
using VecI = Vec<int>;

// Half-open index range [lo, hi) into a sample vector.
struct IndexWindow {
  int lo = 0;
  int hi = 0;
  int size() const { return hi - lo; }
  bool empty() const { return hi <= lo; }
  bool contains(int i) const { return i >= lo && i < hi; }
};

}  // namespace qcfd
