#pragma once

// Dense complex-matrix kernel. Small dimensions only (tens, not thousands).

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "esr/error.hpp"

namespace esr {

using Complex = std::complex<double>;
using ComplexMatrix = Eigen::MatrixXcd;
using ComplexVector = Eigen::VectorXcd;

namespace numerics {

inline double frobenius(const ComplexMatrix& m) { return m.norm(); }

inline double frobenius_distance(const ComplexMatrix& a, const ComplexMatrix& b) {
  return (a - b).norm();
}

inline bool all_finite(const ComplexMatrix& m) {
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    const Complex z = m.data()[i];
    if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) return false;
  }
  return true;
}

inline void require_finite(const ComplexMatrix& m) {
  if (!all_finite(m)) throw Error(ErrorCode::NonFinite, "matrix has NaN or infinite entries");
}

inline void require_square(const ComplexMatrix& m) {
  if (m.rows() != m.cols() || m.rows() == 0) {
    throw Error(ErrorCode::NotSquare, "expected a nonempty square matrix, got " +
                                          std::to_string(m.rows()) + "x" + std::to_string(m.cols()));
  }
}

/// Acceptance bound for ||m - m^dagger||_F.
inline double hermiticity_tolerance(const ComplexMatrix& m) { return 1e-9 * (1.0 + m.norm()); }

inline double hermiticity_defect(const ComplexMatrix& m) { return (m - m.adjoint()).norm(); }

inline void require_hermitian(const ComplexMatrix& m) {
  require_square(m);
  require_finite(m);
  const double defect = hermiticity_defect(m);
  if (defect > hermiticity_tolerance(m)) {
    throw Error(ErrorCode::NotHermitian,
                "||m - m^dagger||_F = " + std::to_string(defect) + " exceeds tolerance");
  }
}

inline ComplexMatrix symmetrized(const ComplexMatrix& m) { return 0.5 * (m + m.adjoint()); }

inline ComplexMatrix outer(const ComplexVector& ket, const ComplexVector& bra) {
  return ket * bra.adjoint();
}

inline ComplexMatrix commutator(const ComplexMatrix& a, const ComplexMatrix& b) {
  return a * b - b * a;
}

inline Complex trace(const ComplexMatrix& m) { return m.trace(); }

/// Eigenvalues grouped into distinct levels, each with its orthogonal projector.
struct SpectralDecomposition {
  std::vector<double> eigenvalues;  // strictly increasing
  std::vector<ComplexMatrix> projectors;

  std::size_t size() const noexcept { return eigenvalues.size(); }
  Eigen::Index dim() const noexcept { return projectors.empty() ? 0 : projectors.front().rows(); }

  ComplexMatrix reconstruct() const {
    ComplexMatrix m = ComplexMatrix::Zero(dim(), dim());
    for (std::size_t k = 0; k < size(); ++k) m += eigenvalues[k] * projectors[k];
    return m;
  }

  std::size_t rank(std::size_t k) const {
    return static_cast<std::size_t>(std::lround(projectors.at(k).trace().real()));
  }
};

/// Worst-case violation of the spectral-decomposition invariants, measured
/// in Frobenius norm (idempotence, hermiticity, mutual orthogonality,
/// resolution of the identity). Reconstruction is checked by the caller
/// since it needs the source matrix.
inline double spectral_defect(const SpectralDecomposition& sd) {
  if (sd.projectors.empty()) return 0.0;
  const Eigen::Index n = sd.dim();
  double worst = 0.0;
  ComplexMatrix sum = ComplexMatrix::Zero(n, n);
  for (std::size_t i = 0; i < sd.size(); ++i) {
    const ComplexMatrix& p = sd.projectors[i];
    worst = std::max(worst, (p - p.adjoint()).norm());
    worst = std::max(worst, (p * p - p).norm());
    for (std::size_t j = i + 1; j < sd.size(); ++j) {
      worst = std::max(worst, (p * sd.projectors[j]).norm());
    }
    sum += p;
  }
  worst = std::max(worst, (sum - ComplexMatrix::Identity(n, n)).norm());
  return worst;
}

inline double spectral_range(const Eigen::VectorXd& values) {
  if (values.size() == 0) return 0.0;
  return values.maxCoeff() - values.minCoeff();
}

/// Default merge distance: 1e-8 times the spectral range, floored at unit scale.
inline double default_cluster_tolerance(const ComplexMatrix& m) {
  Eigen::SelfAdjointEigenSolver<ComplexMatrix> solver(symmetrized(m), Eigen::EigenvaluesOnly);
  return 1e-8 * std::max(1.0, spectral_range(solver.eigenvalues()));
}

inline SpectralDecomposition hermitian_eigendecompose(const ComplexMatrix& m, double cluster_tol) {
  if (!(cluster_tol >= 0.0)) throw Error(ErrorCode::InvalidArgument, "cluster tolerance must be >= 0");
  require_hermitian(m);
  const ComplexMatrix h = symmetrized(m);
  Eigen::SelfAdjointEigenSolver<ComplexMatrix> solver(h);
  if (solver.info() != Eigen::Success) {
    throw Error(ErrorCode::InvalidArgument, "eigensolver did not converge");
  }
  const Eigen::VectorXd& values = solver.eigenvalues();  // ascending
  const ComplexMatrix& vectors = solver.eigenvectors();
  const Eigen::Index n = h.rows();

  SpectralDecomposition sd;
  Eigen::Index start = 0;
  while (start < n) {
    // Single-linkage run over the sorted spectrum.
    Eigen::Index stop = start + 1;
    while (stop < n && values[stop] - values[stop - 1] <= cluster_tol) ++stop;
    double mean = 0.0;
    ComplexMatrix projector = ComplexMatrix::Zero(n, n);
    for (Eigen::Index i = start; i < stop; ++i) {
      mean += values[i];
      projector += outer(vectors.col(i), vectors.col(i));
    }
    sd.eigenvalues.push_back(mean / static_cast<double>(stop - start));
    sd.projectors.push_back(symmetrized(projector));
    start = stop;
  }
  return sd;
}

inline SpectralDecomposition hermitian_eigendecompose(const ComplexMatrix& m) {
  require_hermitian(m);
  return hermitian_eigendecompose(m, default_cluster_tolerance(m));
}

inline ComplexMatrix tensor_product(const ComplexMatrix& a, const ComplexMatrix& b) {
  ComplexMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    }
  }
  return out;
}

inline ComplexVector tensor_product(const ComplexVector& a, const ComplexVector& b) {
  ComplexVector out(a.size() * b.size());
  for (Eigen::Index i = 0; i < a.size(); ++i) out.segment(i * b.size(), b.size()) = a[i] * b;
  return out;
}

/// Traces out the second tensor factor of an operator on C^dim_first (x) C^dim_second.
inline ComplexMatrix partial_trace_second(const ComplexMatrix& m, Eigen::Index dim_first,
                                          Eigen::Index dim_second) {
  if (dim_first <= 0 || dim_second <= 0 || m.rows() != m.cols() ||
      m.rows() != dim_first * dim_second) {
    throw Error(ErrorCode::DimensionMismatch,
                "partial trace of " + std::to_string(m.rows()) + "x" + std::to_string(m.cols()) +
                    " over factors " + std::to_string(dim_first) + " x " +
                    std::to_string(dim_second));
  }
  ComplexMatrix out = ComplexMatrix::Zero(dim_first, dim_first);
  for (Eigen::Index i = 0; i < dim_first; ++i) {
    for (Eigen::Index j = 0; j < dim_first; ++j) {
      Complex acc{0.0, 0.0};
      for (Eigen::Index k = 0; k < dim_second; ++k) {
        acc += m(i * dim_second + k, j * dim_second + k);
      }
      out(i, j) = acc;
    }
  }
  return out;
}

inline double min_eigenvalue(const ComplexMatrix& m) {
  require_hermitian(m);
  Eigen::SelfAdjointEigenSolver<ComplexMatrix> solver(symmetrized(m), Eigen::EigenvaluesOnly);
  return solver.eigenvalues().minCoeff();
}

inline double max_eigenvalue(const ComplexMatrix& m) {
  require_hermitian(m);
  Eigen::SelfAdjointEigenSolver<ComplexMatrix> solver(symmetrized(m), Eigen::EigenvaluesOnly);
  return solver.eigenvalues().maxCoeff();
}

inline bool is_positive_semidefinite(const ComplexMatrix& m, double tol) {
  return min_eigenvalue(m) >= -tol;
}

}  // namespace numerics
}  // namespace esr
