// Spectral (Fourier) calculus on the grid: exact derivatives of
// band-limited fields, complex Wirtinger derivatives, dealiasing, and
// quadrature (the lattice sum, which is exact for trigonometric
// polynomials below the Nyquist band).
//
// Complex coordinates: z^j = x^{2j} + i x^{2j+1}, so
//   d/dz^j    = (d/dx^{2j} - i d/dx^{2j+1}) / 2
//   d/dzbar^j = (d/dx^{2j} + i d/dx^{2j+1}) / 2
#pragma once

#include <array>
#include <functional>
#include <vector>

#include "higgsflow/core.hpp"
#include "higgsflow/fft.hpp"
#include "higgsflow/field.hpp"
#include "higgsflow/grid.hpp"

namespace higgsflow {

class Spectral {
 public:
  explicit Spectral(const Grid& g) : grid_(&g), fft_(g) {
    // Per-axis angular wavenumber tables; the Nyquist bin is zeroed so that
    // derivatives of real fields stay real.
    for (int a = 0; a < g.dims(); ++a) {
      k_[a].resize(g.N());
      for (int m = 0; m < g.N(); ++m) {
        int f = g.signed_freq(m);
        if (m == g.N() / 2) f = 0;
        k_[a][m] = 2.0 * kPi * f / g.period(a);
      }
    }
  }

  const Grid& grid() const { return *grid_; }

  // Multiply the Fourier coefficients of f by symbol(freq bins) and
  // transform back.  The symbol receives raw bin indices (0..N-1 per axis).
  ScalarField apply_symbol(const ScalarField& f,
                           const std::function<cd(const std::array<int, 4>&)>&
                               symbol) const {
    ScalarField out = f;
    fft_.forward(out.data());
    const Grid& g = *grid_;
    for (std::size_t s = 0; s < g.sites(); ++s) {
      out[s] *= symbol(g.coords(s));
    }
    fft_.backward(out.data());
    return out;
  }

  // d/dx^axis.
  ScalarField partial_real(const ScalarField& f, int axis) const {
    return apply_symbol(f, [this, axis](const std::array<int, 4>& m) {
      return cd{0.0, k_[axis][m[axis]]};
    });
  }

  // d/dz^j  (j in [0, n)).
  ScalarField partial_z(const ScalarField& f, int j) const {
    return apply_symbol(f, [this, j](const std::array<int, 4>& m) {
      const double kx = k_[2 * j][m[2 * j]];
      const double ky = k_[2 * j + 1][m[2 * j + 1]];
      return 0.5 * cd{ky, kx};
    });
  }

  // d/dzbar^j.
  ScalarField partial_zbar(const ScalarField& f, int j) const {
    return apply_symbol(f, [this, j](const std::array<int, 4>& m) {
      const double kx = k_[2 * j][m[2 * j]];
      const double ky = k_[2 * j + 1][m[2 * j + 1]];
      return 0.5 * cd{-ky, kx};
    });
  }

  MatrixField partial_z(const MatrixField& f, int j) const {
    return map_entries(f, [this, j](const ScalarField& e) {
      return partial_z(e, j);
    });
  }

  MatrixField partial_zbar(const MatrixField& f, int j) const {
    return map_entries(f, [this, j](const ScalarField& e) {
      return partial_zbar(e, j);
    });
  }

  // Zero all modes with any |signed frequency| above 2N/6 (2/3 rule).
  ScalarField dealias(const ScalarField& f) const {
    const int cut = grid_->N() / 3;
    return apply_symbol(f, [this, cut](const std::array<int, 4>& m) {
      for (int a = 0; a < grid_->dims(); ++a) {
        int fr = grid_->signed_freq(m[a]);
        if (fr > cut || fr < -cut) return cd{0.0, 0.0};
      }
      return cd{1.0, 0.0};
    });
  }

  // Mean value over the grid (k = 0 mode).
  cd mean(const ScalarField& f) const {
    cd acc{0.0, 0.0};
    for (std::size_t s = 0; s < f.size(); ++s) acc += f[s];
    return acc / static_cast<double>(grid_->sites());
  }

  // Lattice quadrature of f d^{2n}x.
  cd integrate(const ScalarField& f) const {
    cd acc{0.0, 0.0};
    for (std::size_t s = 0; s < f.size(); ++s) acc += f[s];
    return acc * grid_->cell_measure();
  }

  // Lattice quadrature of f * w d^{2n}x (w is typically a volume density).
  cd integrate(const ScalarField& f, const ScalarField& w) const {
    cd acc{0.0, 0.0};
    for (std::size_t s = 0; s < f.size(); ++s) acc += f[s] * w[s];
    return acc * grid_->cell_measure();
  }

 private:
  MatrixField map_entries(const MatrixField& f,
                          const std::function<ScalarField(const ScalarField&)>&
                              op) const {
    MatrixField out(f.grid(), f.rank());
    const int r = f.rank();
    ScalarField e(*grid_);
    for (int i = 0; i < r; ++i)
      for (int j = 0; j < r; ++j) {
        for (std::size_t s = 0; s < f.sites(); ++s) e[s] = f.entry(s, i, j);
        ScalarField de = op(e);
        for (std::size_t s = 0; s < f.sites(); ++s) out.entry(s, i, j) = de[s];
      }
    return out;
  }

  const Grid* grid_;
  Fourier fft_;
  std::array<std::vector<double>, 4> k_;
};

}  // namespace higgsflow
