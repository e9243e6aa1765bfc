// Lattice fields: complex scalars and r x r complex matrices per site.
// Matrix storage is site-major, row-major within each block, which maps
// directly onto Eigen::Map without copies.
#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <random>
#include <vector>

#include "higgsflow/core.hpp"
#include "higgsflow/grid.hpp"

namespace higgsflow {

using Mat = Eigen::Matrix<cd, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<Mat>;
using ConstMatMap = Eigen::Map<const Mat>;

class ScalarField {
 public:
  ScalarField() : grid_(nullptr) {}
  explicit ScalarField(const Grid& g, cd fill = cd{0.0, 0.0})
      : grid_(&g), v_(g.sites(), fill) {}

  const Grid& grid() const { return *grid_; }
  cd& operator[](std::size_t i) { return v_[i]; }
  const cd& operator[](std::size_t i) const { return v_[i]; }
  std::size_t size() const { return v_.size(); }
  std::vector<cd>& data() { return v_; }
  const std::vector<cd>& data() const { return v_; }

  ScalarField& operator+=(const ScalarField& o) {
    for (std::size_t i = 0; i < v_.size(); ++i) v_[i] += o.v_[i];
    return *this;
  }
  ScalarField& operator-=(const ScalarField& o) {
    for (std::size_t i = 0; i < v_.size(); ++i) v_[i] -= o.v_[i];
    return *this;
  }
  ScalarField& operator*=(cd a) {
    for (auto& x : v_) x *= a;
    return *this;
  }

  double max_abs() const {
    double m = 0.0;
    for (const auto& x : v_) m = std::max(m, std::abs(x));
    return m;
  }
  double max_abs_imag() const {
    double m = 0.0;
    for (const auto& x : v_) m = std::max(m, std::abs(x.imag()));
    return m;
  }

 private:
  const Grid* grid_;
  std::vector<cd> v_;
};

class MatrixField {
 public:
  MatrixField() : grid_(nullptr), r_(0) {}
  MatrixField(const Grid& g, int r, bool identity = false)
      : grid_(&g), r_(r), v_(g.sites() * r * r, cd{0.0, 0.0}) {
    require(r >= 1, "MatrixField: rank must be >= 1");
    if (identity)
      for (std::size_t s = 0; s < g.sites(); ++s)
        for (int i = 0; i < r; ++i) v_[s * r * r + i * r + i] = cd{1.0, 0.0};
  }

  const Grid& grid() const { return *grid_; }
  int rank() const { return r_; }
  std::size_t sites() const { return grid_->sites(); }

  MatMap at(std::size_t s) { return MatMap(v_.data() + s * r_ * r_, r_, r_); }
  ConstMatMap at(std::size_t s) const {
    return ConstMatMap(v_.data() + s * r_ * r_, r_, r_);
  }

  cd& entry(std::size_t s, int i, int j) { return v_[s * r_ * r_ + i * r_ + j]; }
  const cd& entry(std::size_t s, int i, int j) const {
    return v_[s * r_ * r_ + i * r_ + j];
  }

  std::vector<cd>& data() { return v_; }
  const std::vector<cd>& data() const { return v_; }

  MatrixField& operator+=(const MatrixField& o) {
    for (std::size_t i = 0; i < v_.size(); ++i) v_[i] += o.v_[i];
    return *this;
  }
  MatrixField& operator-=(const MatrixField& o) {
    for (std::size_t i = 0; i < v_.size(); ++i) v_[i] -= o.v_[i];
    return *this;
  }
  MatrixField& operator*=(cd a) {
    for (auto& x : v_) x *= a;
    return *this;
  }

  // Pointwise Frobenius-norm maximum over sites.
  double max_frobenius() const {
    double m = 0.0;
    for (std::size_t s = 0; s < sites(); ++s) m = std::max(m, at(s).norm());
    return m;
  }

  // Largest deviation from Hermitian symmetry over all sites.
  double hermiticity_defect() const {
    double m = 0.0;
    for (std::size_t s = 0; s < sites(); ++s) {
      Mat d = at(s) - at(s).adjoint().eval();
      m = std::max(m, d.cwiseAbs().maxCoeff());
    }
    return m;
  }

  // Replace each block by its Hermitian part (A + A^dagger)/2.
  void hermitize() {
    for (std::size_t s = 0; s < sites(); ++s) {
      Mat h = 0.5 * (at(s) + at(s).adjoint().eval());
      at(s) = h;
    }
  }

 private:
  const Grid* grid_;
  int r_;
  std::vector<cd> v_;
};

// --- pointwise algebra helpers -------------------------------------------

inline MatrixField commutator(const MatrixField& a, const MatrixField& b) {
  MatrixField out(a.grid(), a.rank());
  for (std::size_t s = 0; s < a.sites(); ++s)
    out.at(s) = a.at(s) * b.at(s) - b.at(s) * a.at(s);
  return out;
}

inline MatrixField product(const MatrixField& a, const MatrixField& b) {
  MatrixField out(a.grid(), a.rank());
  for (std::size_t s = 0; s < a.sites(); ++s) out.at(s) = a.at(s) * b.at(s);
  return out;
}

inline ScalarField trace_field(const MatrixField& a) {
  ScalarField out(a.grid());
  for (std::size_t s = 0; s < a.sites(); ++s) out[s] = a.at(s).trace();
  return out;
}

// --- deterministic band-limited random fields ----------------------------

// Real band-limited scalar: sum of cosine modes with |freq| <= grid band
// limit per axis, drawn from the given generator.  Used by tests to build
// generic smooth data whose spectral derivatives are exact on the lattice.
inline ScalarField random_bandlimited_scalar(const Grid& g, std::mt19937_64& rng,
                                             double amplitude, int max_mode = 0) {
  if (max_mode == 0) max_mode = g.band_limit();
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  const int d = g.dims();
  struct Term {
    std::array<int, 4> m;
    double c, s;
  };
  std::vector<Term> terms;
  const int n_terms = 4;
  for (int t = 0; t < n_terms; ++t) {
    Term term{};
    bool nonzero = false;
    for (int a = 0; a < d; ++a) {
      term.m[a] = static_cast<int>(std::floor(unif(rng) * (max_mode + 0.999)));
      if (term.m[a] != 0) nonzero = true;
    }
    if (!nonzero) term.m[0] = 1;
    term.c = unif(rng);
    term.s = unif(rng);
    terms.push_back(term);
  }
  ScalarField f(g);
  for (std::size_t s = 0; s < g.sites(); ++s) {
    auto c = g.coords(s);
    double val = 0.0;
    for (const auto& t : terms) {
      double phase = 0.0;
      for (int a = 0; a < d; ++a)
        phase += 2.0 * kPi * t.m[a] * c[a] / static_cast<double>(g.N());
      val += t.c * std::cos(phase) + t.s * std::sin(phase);
    }
    f[s] = cd{amplitude * val, 0.0};
  }
  return f;
}

// Hermitian band-limited matrix field.
inline MatrixField random_bandlimited_hermitian(const Grid& g, int r,
                                                std::mt19937_64& rng,
                                                double amplitude) {
  MatrixField out(g, r);
  for (int i = 0; i < r; ++i)
    for (int j = i; j < r; ++j) {
      ScalarField re = random_bandlimited_scalar(g, rng, amplitude);
      ScalarField im = random_bandlimited_scalar(g, rng, amplitude);
      for (std::size_t s = 0; s < g.sites(); ++s) {
        if (i == j) {
          out.entry(s, i, i) = cd{re[s].real(), 0.0};
        } else {
          cd v{re[s].real(), im[s].real()};
          out.entry(s, i, j) = v;
          out.entry(s, j, i) = std::conj(v);
        }
      }
    }
  return out;
}

}  // namespace higgsflow
