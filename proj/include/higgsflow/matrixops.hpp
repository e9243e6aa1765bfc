// Pointwise Hermitian matrix functions (sqrt, log, exp, real powers) and
// their Frechet derivatives, built on Eigen's self-adjoint eigensolver.
// Also: matrix functions computed relative to a background inner product
// H0, used to express the flow metric H = H0 exp(s) with s self-adjoint
// with respect to H0.
#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <functional>

#include "higgsflow/core.hpp"
#include "higgsflow/field.hpp"

namespace higgsflow {

struct HermEig {
  Eigen::VectorXd lambda;  // ascending
  Mat U;                   // unitary, columns are eigenvectors
};

inline HermEig herm_eig(const ConstMatMap& a) {
  if (a.rows() == 1) {
    HermEig e;
    e.lambda = Eigen::VectorXd::Constant(1, a(0, 0).real());
    e.U = Mat::Identity(1, 1);
    return e;
  }
  Eigen::SelfAdjointEigenSolver<Mat> es;
  if (a.rows() <= 3) {
    es.computeDirect(a);
    // computeDirect can lose precision on near-degenerate spectra; fall
    // back to the iterative path when the reconstruction error is large.
    Mat rec = es.eigenvectors() *
              es.eigenvalues().cast<cd>().asDiagonal() *
              es.eigenvectors().adjoint();
    if ((rec - a).cwiseAbs().maxCoeff() > 1e-11 * (1.0 + a.cwiseAbs().maxCoeff()))
      es.compute(a);
  } else {
    es.compute(a);
  }
  require(es.info() == Eigen::Success, "herm_eig: eigensolver failed");
  return {es.eigenvalues(), es.eigenvectors()};
}

inline HermEig herm_eig(const Mat& a) {
  return herm_eig(ConstMatMap(a.data(), a.rows(), a.cols()));
}

// f applied to a Hermitian matrix via its spectral decomposition.
inline Mat herm_function(const Mat& a, const std::function<double(double)>& f) {
  HermEig e = herm_eig(a);
  Eigen::VectorXcd fl(e.lambda.size());
  for (int i = 0; i < e.lambda.size(); ++i) fl(i) = cd{f(e.lambda(i)), 0.0};
  return e.U * fl.asDiagonal() * e.U.adjoint();
}

inline Mat herm_exp(const Mat& a) {
  return herm_function(a, [](double x) { return std::exp(x); });
}

inline Mat herm_log(const Mat& a) {
  HermEig e = herm_eig(a);
  require(e.lambda(0) > 0.0, "herm_log: matrix not positive definite");
  Eigen::VectorXcd fl(e.lambda.size());
  for (int i = 0; i < e.lambda.size(); ++i)
    fl(i) = cd{std::log(e.lambda(i)), 0.0};
  return e.U * fl.asDiagonal() * e.U.adjoint();
}

inline Mat herm_sqrt(const Mat& a) {
  HermEig e = herm_eig(a);
  require(e.lambda(0) >= 0.0, "herm_sqrt: matrix not positive semidefinite");
  Eigen::VectorXcd fl(e.lambda.size());
  for (int i = 0; i < e.lambda.size(); ++i)
    fl(i) = cd{std::sqrt(std::max(0.0, e.lambda(i))), 0.0};
  return e.U * fl.asDiagonal() * e.U.adjoint();
}

inline Mat herm_pow(const Mat& a, double p) {
  HermEig e = herm_eig(a);
  require(e.lambda(0) > -1e-14, "herm_pow: matrix not positive semidefinite");
  Eigen::VectorXcd fl(e.lambda.size());
  for (int i = 0; i < e.lambda.size(); ++i)
    fl(i) = cd{std::pow(std::max(0.0, e.lambda(i)), p), 0.0};
  return e.U * fl.asDiagonal() * e.U.adjoint();
}

// Frechet derivative of a matrix function f at Hermitian a applied to
// direction v: Df(a)[v] = U (E .* (U^* v U)) U^* with the divided
// difference table E_ij = (f(l_i) - f(l_j)) / (l_i - l_j), degenerating to
// f'(l) on (near-)coincident eigenvalues.
inline Mat herm_frechet(const Mat& a, const Mat& v,
                        const std::function<double(double)>& f,
                        const std::function<double(double)>& df) {
  HermEig e = herm_eig(a);
  const int r = static_cast<int>(e.lambda.size());
  Mat w = e.U.adjoint() * v * e.U;
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < r; ++j) {
      const double li = e.lambda(i), lj = e.lambda(j);
      double fac;
      if (std::abs(li - lj) < 1e-12 * (1.0 + std::abs(li) + std::abs(lj)))
        fac = df(0.5 * (li + lj));
      else
        fac = (f(li) - f(lj)) / (li - lj);
      w(i, j) *= fac;
    }
  return e.U * w * e.U.adjoint();
}

inline Mat herm_frechet_exp(const Mat& a, const Mat& v) {
  return herm_frechet(
      a, v, [](double x) { return std::exp(x); },
      [](double x) { return std::exp(x); });
}

inline Mat herm_frechet_log(const Mat& a, const Mat& v) {
  return herm_frechet(
      a, v, [](double x) { return std::log(x); },
      [](double x) { return 1.0 / x; });
}

// --- field-level wrappers -------------------------------------------------

inline MatrixField field_herm_sqrt(const MatrixField& a) {
  MatrixField out(a.grid(), a.rank());
  for (std::size_t s = 0; s < a.sites(); ++s) out.at(s) = herm_sqrt(Mat(a.at(s)));
  return out;
}

inline MatrixField field_herm_inverse(const MatrixField& a) {
  MatrixField out(a.grid(), a.rank());
  for (std::size_t s = 0; s < a.sites(); ++s)
    out.at(s) = Mat(a.at(s)).inverse();
  return out;
}

// Smallest and largest eigenvalues over all sites of a Hermitian field.
struct EigRange {
  double min;
  double max;
};

inline EigRange field_eig_range(const MatrixField& a) {
  EigRange r{1e300, -1e300};
  for (std::size_t s = 0; s < a.sites(); ++s) {
    HermEig e = herm_eig(Mat(a.at(s)));
    r.min = std::min(r.min, e.lambda(0));
    r.max = std::max(r.max, e.lambda(e.lambda.size() - 1));
  }
  return r;
}

// --- background-metric (H0) matrix calculus ------------------------------

// Cache of H0^{1/2} and H0^{-1/2} per site, used to conjugate H0-self-
// adjoint endomorphisms into honestly Hermitian matrices.
struct BackgroundRoots {
  MatrixField w;     // H0^{1/2}
  MatrixField winv;  // H0^{-1/2}
};

inline BackgroundRoots background_roots(const MatrixField& h0) {
  BackgroundRoots b{MatrixField(h0.grid(), h0.rank()),
                    MatrixField(h0.grid(), h0.rank())};
  for (std::size_t s = 0; s < h0.sites(); ++s) {
    Mat w = herm_sqrt(Mat(h0.at(s)));
    b.w.at(s) = w;
    b.winv.at(s) = w.inverse();
  }
  return b;
}

// s = log(H0^{-1} H) computed as W^{-1} log(W^{-1} H W^{-1}) W with
// W = H0^{1/2}; s is self-adjoint with respect to H0 and satisfies
// H = H0 exp(s) exactly.
inline MatrixField log_relative(const MatrixField& h, const BackgroundRoots& b) {
  MatrixField out(h.grid(), h.rank());
  for (std::size_t s = 0; s < h.sites(); ++s) {
    Mat m = Mat(b.winv.at(s)) * Mat(h.at(s)) * Mat(b.winv.at(s));
    m = 0.5 * (m + m.adjoint().eval());
    out.at(s) = Mat(b.winv.at(s)) * herm_log(m) * Mat(b.w.at(s));
  }
  return out;
}

// H_u = H0 exp(u s) = W (W^{-1} H W^{-1})^u W, the geodesic from H0 to H.
inline MatrixField geodesic_point(const MatrixField& h, const BackgroundRoots& b,
                                  double u) {
  MatrixField out(h.grid(), h.rank());
  for (std::size_t s = 0; s < h.sites(); ++s) {
    Mat m = Mat(b.winv.at(s)) * Mat(h.at(s)) * Mat(b.winv.at(s));
    m = 0.5 * (m + m.adjoint().eval());
    out.at(s) = Mat(b.w.at(s)) * herm_pow(m, u) * Mat(b.w.at(s));
  }
  return out;
}

}  // namespace higgsflow
