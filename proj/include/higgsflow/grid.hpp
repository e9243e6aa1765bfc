// Discretization domain: a flat real 2n-torus with N sites per axis and
// per-axis periods.  Complex coordinates pair the real axes as
// z^j = x^{2j} + i x^{2j+1} (0-based axis numbering).
#pragma once

#include <array>
#include <cstddef>
#include <vector>

#include "higgsflow/core.hpp"

namespace higgsflow {

class Grid {
 public:
  // n: complex dimension (1 or 2).  N: sites per real axis, even, >= 8.
  // periods: edge lengths of the 2n real axes (defaults to 1 each).
  Grid(int n, int N, std::array<double, 4> periods = {1.0, 1.0, 1.0, 1.0})
      : n_(n), N_(N), periods_(periods) {
    require(n == 1 || n == 2, "Grid: complex dimension must be 1 or 2");
    require(N >= 8, "Grid: N must be >= 8");
    require(N % 2 == 0, "Grid: N must be even");
    for (int a = 0; a < dims(); ++a)
      require(periods_[a] > 0.0, "Grid: periods must be positive");
    sites_ = 1;
    for (int a = 0; a < dims(); ++a) sites_ *= static_cast<std::size_t>(N_);
    cell_ = 1.0;
    for (int a = 0; a < dims(); ++a) cell_ *= periods_[a] / N_;
  }

  int n() const { return n_; }
  int N() const { return N_; }
  int dims() const { return 2 * n_; }
  std::size_t sites() const { return sites_; }
  double period(int axis) const { return periods_[axis]; }
  // Real-space measure of one lattice cell (d^{2n}x per site).
  double cell_measure() const { return cell_; }

  // Row-major site indexing, axis 0 slowest (matches the FFT layout).
  std::size_t index(const std::array<int, 4>& c) const {
    std::size_t idx = 0;
    for (int a = 0; a < dims(); ++a)
      idx = idx * N_ + static_cast<std::size_t>(wrap(c[a]));
    return idx;
  }

  std::array<int, 4> coords(std::size_t idx) const {
    std::array<int, 4> c{0, 0, 0, 0};
    for (int a = dims() - 1; a >= 0; --a) {
      c[a] = static_cast<int>(idx % N_);
      idx /= N_;
    }
    return c;
  }

  // Physical coordinate of a site along an axis.
  double x(int axis, int coord) const {
    return periods_[axis] * static_cast<double>(coord) / N_;
  }

  int wrap(int c) const {
    int m = c % N_;
    return m < 0 ? m + N_ : m;
  }

  // Signed integer frequency for FFT bin m along one axis: values in
  // (-N/2, N/2]; the Nyquist bin maps to +N/2 (derivative symbols zero it
  // separately).
  int signed_freq(int m) const { return m <= N_ / 2 ? m : m - N_; }

  // Band limit used by field constructors: modes with any |freq| above
  // N/4 are outside the guaranteed-resolution band.
  int band_limit() const { return N_ / 4; }

  bool operator==(const Grid& o) const {
    if (n_ != o.n_ || N_ != o.N_) return false;
    for (int a = 0; a < dims(); ++a)
      if (periods_[a] != o.periods_[a]) return false;
    return true;
  }

 private:
  int n_;
  int N_;
  std::array<double, 4> periods_;
  std::size_t sites_;
  double cell_;
};

}  // namespace higgsflow
