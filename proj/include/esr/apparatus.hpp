#pragma once

// Object (x) pointer compound system. The pointer has one basis state per
// eigenvalue plus |0>, which means both "ready" and "not detected".
// Compound amplitudes are indexed object-major: index = i * dim_pointer + j.

#include <cmath>
#include <string>

#include "esr/gpp.hpp"

namespace esr {

struct ApparatusModel {
  Eigen::Index dim_pointer = 0;
  double theta = 0.0;  // phase of the detected branch
  double phi = 0.0;    // phase of the undetected branch

  static ApparatusModel for_observable(const GeneralizedObservable& gobs, double theta = 0.0,
                                       double phi = 0.0) {
    if (!std::isfinite(theta) || !std::isfinite(phi)) {
      throw Error(ErrorCode::InvalidArgument, "apparatus phases must be finite");
    }
    return ApparatusModel{static_cast<Eigen::Index>(gobs.base().levels()) + 1, theta, phi};
  }

  /// alpha = sqrt(p) e^{i theta}, beta = sqrt(1 - p) e^{i phi}.
  Complex alpha(double p_detect) const { return std::polar(std::sqrt(p_detect), theta); }
  Complex beta(double p_detect) const { return std::polar(std::sqrt(1.0 - p_detect), phi); }
};

struct CompoundState {
  ComplexVector amplitudes;
  Eigen::Index dim_object = 0;
  Eigen::Index dim_pointer = 0;

  double norm() const { return amplitudes.norm(); }

  Complex amplitude(Eigen::Index object_index, Eigen::Index pointer_index) const {
    return amplitudes[object_index * dim_pointer + pointer_index];
  }
};

/// |psi>|0>  ->  alpha sum_k c_k |a_k>|k> + beta |psi>|0>
/// The map depends on psi through alpha and beta, so it is nonlinear.
inline CompoundState couple_and_evolve(const GeneralizedObservable& gobs, const PureState& psi,
                                       const ApparatusModel& app) {
  gobs.require_dim(psi);
  if (!gobs.base().is_nondegenerate()) {
    throw Error(ErrorCode::DegenerateSpectrum,
                "the object-apparatus coupling is defined only for nondegenerate observables");
  }
  const Eigen::Index pointer = static_cast<Eigen::Index>(gobs.base().levels()) + 1;
  if (app.dim_pointer != pointer) {
    throw Error(ErrorCode::DimensionMismatch, "pointer dimension " + std::to_string(app.dim_pointer) +
                                                  " should be " + std::to_string(pointer));
  }
  const double p = detection_probability(gobs, psi);
  const Complex alpha = app.alpha(p);
  const Complex beta = app.beta(p);

  CompoundState out{ComplexVector::Zero(gobs.dim() * pointer), gobs.dim(), pointer};
  ComplexVector pointer_state = ComplexVector::Zero(pointer);
  pointer_state[0] = 1.0;
  out.amplitudes += beta * numerics::tensor_product(psi.amplitudes(), pointer_state);
  for (std::size_t k = 0; k < gobs.base().levels(); ++k) {
    // c_k |a_k> = P_k |psi>
    pointer_state.setZero();
    pointer_state[static_cast<Eigen::Index>(k) + 1] = 1.0;
    const ComplexVector branch = gobs.base().projector(k) * psi.amplitudes();
    out.amplitudes += alpha * numerics::tensor_product(branch, pointer_state);
  }
  return out;
}

inline DensityOperator compound_density(const CompoundState& cs) {
  const double norm = cs.norm();
  if (std::abs(norm - 1.0) > kNormTolerance) {
    throw Error(ErrorCode::NotNormalized, "compound state norm is " + std::to_string(norm));
  }
  return DensityOperator::from_matrix(numerics::outer(cs.amplitudes, cs.amplitudes));
}

/// Tr_M W_C
inline DensityOperator reduced_object_state(const CompoundState& cs, Eigen::Index dim_object) {
  if (dim_object <= 0 || cs.amplitudes.size() % dim_object != 0) {
    throw Error(ErrorCode::DimensionMismatch, "compound dimension " + std::to_string(cs.amplitudes.size()) +
                                                  " does not factor by " + std::to_string(dim_object));
  }
  const Eigen::Index dim_pointer = cs.amplitudes.size() / dim_object;
  const DensityOperator wc = compound_density(cs);
  return DensityOperator::from_matrix(numerics::partial_trace_second(wc.matrix(), dim_object, dim_pointer));
}

}  // namespace esr
