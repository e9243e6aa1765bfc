// Thin RAII wrapper over FFTW3 complex-to-complex transforms on a Grid.
// Plans are created once per transformer with FFTW_ESTIMATE so that results
// are independent of planner timing (bit-for-bit deterministic reruns).
#pragma once

#include <fftw3.h>

#include <cstring>
#include <vector>

#include "higgsflow/core.hpp"
#include "higgsflow/grid.hpp"

namespace higgsflow {

class Fourier {
 public:
  explicit Fourier(const Grid& g) : grid_(&g) {
    const int d = g.dims();
    std::vector<int> dims(d, g.N());
    buf_ = fftw_alloc_complex(g.sites());
    require(buf_ != nullptr, "Fourier: allocation failed");
    fwd_ = fftw_plan_dft(d, dims.data(), buf_, buf_, FFTW_FORWARD, FFTW_ESTIMATE);
    bwd_ = fftw_plan_dft(d, dims.data(), buf_, buf_, FFTW_BACKWARD, FFTW_ESTIMATE);
    require(fwd_ != nullptr && bwd_ != nullptr, "Fourier: planning failed");
  }

  Fourier(const Fourier&) = delete;
  Fourier& operator=(const Fourier&) = delete;

  ~Fourier() {
    fftw_destroy_plan(fwd_);
    fftw_destroy_plan(bwd_);
    fftw_free(buf_);
  }

  const Grid& grid() const { return *grid_; }

  // data -> unnormalized Fourier coefficients (FFTW forward convention
  // e^{-2 pi i m x/N}).
  void forward(std::vector<cd>& data) const {
    load(data);
    fftw_execute(fwd_);
    store(data);
  }

  // Inverse transform with 1/sites normalization: backward(forward(x)) == x
  // up to roundoff.
  void backward(std::vector<cd>& data) const {
    load(data);
    fftw_execute(bwd_);
    store(data);
    const double scale = 1.0 / static_cast<double>(grid_->sites());
    for (auto& x : data) x *= scale;
  }

 private:
  void load(const std::vector<cd>& data) const {
    require(data.size() == grid_->sites(), "Fourier: size mismatch");
    std::memcpy(buf_, data.data(), sizeof(cd) * data.size());
  }
  void store(std::vector<cd>& data) const {
    std::memcpy(data.data(), buf_, sizeof(cd) * data.size());
  }

  const Grid* grid_;
  fftw_complex* buf_;
  fftw_plan fwd_, bwd_;
};

}  // namespace higgsflow
