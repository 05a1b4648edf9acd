#pragma once

// Post-measurement state updates: the generalized projection postulate,
// the discrete measurement-operator family, and nonselective mixtures.

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "esr/core.hpp"

namespace esr {

inline constexpr double kZeroBranchNorm = 1e-12;

/// Rotates the global phase so the largest-magnitude amplitude is real and
/// nonnegative. Near-ties resolve to the lowest index.
inline ComplexVector fix_global_phase(ComplexVector v) {
  if (v.size() == 0) return v;
  double largest = 0.0;
  for (Eigen::Index i = 0; i < v.size(); ++i) largest = std::max(largest, std::abs(v[i]));
  if (largest == 0.0) return v;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (std::abs(v[i]) >= largest * (1.0 - 1e-9)) {
      v *= std::conj(v[i]) / std::abs(v[i]);
      v[i] = Complex(std::abs(v[i]), 0.0);
      break;
    }
  }
  return v;
}

inline PureState with_fixed_phase(const PureState& psi) {
  return PureState::normalized(fix_global_phase(psi.amplitudes()));
}

/// 1 - |<a|b>|, zero iff the states agree up to a global phase.
inline double phase_insensitive_distance(const PureState& a, const PureState& b) {
  return std::max(0.0, 1.0 - std::abs(a.amplitudes().dot(b.amplitudes())));
}

/// State after the yes outcome for the event: T(X)|psi> normalized.
inline PureState post_measurement_state_yes(const GeneralizedObservable& gobs, const PureState& psi,
                                            const OutcomeEvent& event) {
  const Effect t = effect(gobs, psi, event);
  const ComplexVector v = t.op * psi.amplitudes();
  const double norm = v.norm();
  if (norm < kZeroBranchNorm) {
    throw Error(ErrorCode::ZeroProbabilityBranch,
                "||T(X) psi|| = " + std::to_string(norm) + ", the conditioning event cannot occur");
  }
  return PureState::normalized(fix_global_phase(v / norm));
}

/// State after the no outcome: the yes update for the complement within Xi_0.
inline PureState post_measurement_state_no(const GeneralizedObservable& gobs, const PureState& psi,
                                           const OutcomeEvent& event) {
  return post_measurement_state_yes(gobs, psi, gobs.complement(event));
}

/// T W T^dagger / Tr[W T^dagger T].
inline DensityOperator post_measurement_density(const GeneralizedObservable& gobs, const PureState& psi,
                                                const OutcomeEvent& event) {
  const Effect t = effect(gobs, psi, event);
  const ComplexMatrix w = numerics::outer(psi.amplitudes(), psi.amplitudes());
  const double denominator = (w * t.op.adjoint() * t.op).trace().real();
  if (std::sqrt(std::max(denominator, 0.0)) < kZeroBranchNorm) {
    throw Error(ErrorCode::ZeroProbabilityBranch, "Tr[W T^dagger T] vanishes");
  }
  return DensityOperator::from_matrix(t.op * w * t.op.adjoint() / denominator);
}

/// Normalization term of the yes update, <psi|T^dagger T|psi>. Differs in
/// general from the outcome probability <psi|T|psi> when a0 is in the event.
inline double gpp_denominator(const GeneralizedObservable& gobs, const PureState& psi,
                              const OutcomeEvent& event) {
  const Effect t = effect(gobs, psi, event);
  return psi.expectation(t.op.adjoint() * t.op);
}

/// M_0 = sqrt(1 - p_d) I, M_k = sqrt(p_d) P_k, aligned with gobs.outcomes().
struct MeasurementOperatorFamily {
  GeneralizedObservable gobs;
  PureState psi;
  double detection = 0.0;
  std::vector<ComplexMatrix> operators;

  std::size_t size() const noexcept { return operators.size(); }
  double outcome(std::size_t k) const { return gobs.outcome(k); }

  /// ||sum_k M_k^dagger M_k - I||_F
  double completeness_defect() const {
    const Eigen::Index n = gobs.dim();
    ComplexMatrix sum = ComplexMatrix::Zero(n, n);
    for (const auto& m : operators) sum += m.adjoint() * m;
    return (sum - ComplexMatrix::Identity(n, n)).norm();
  }

  double commutation_defect() const {
    double worst = 0.0;
    for (std::size_t k = 0; k < size(); ++k) {
      for (std::size_t l = k + 1; l < size(); ++l) {
        worst = std::max(worst, numerics::commutator(operators[k], operators[l]).norm());
      }
    }
    return worst;
  }

  /// Largest deviation from M = M^dagger and M >= 0 across the family.
  double positivity_defect() const {
    double worst = 0.0;
    for (const auto& m : operators) {
      worst = std::max(worst, numerics::hermiticity_defect(m));
      worst = std::max(worst, -numerics::min_eigenvalue(numerics::symmetrized(m)));
    }
    return worst;
  }
};

struct MeasurementOutcomeRecord {
  double outcome = 0.0;
  bool detected = false;
  PureState pre_state;
  PureState post_state;
  double probability = 0.0;
};

inline MeasurementOperatorFamily measurement_operators(const GeneralizedObservable& gobs,
                                                       const PureState& psi) {
  const double p = detection_probability(gobs, psi);
  const Eigen::Index n = gobs.dim();
  std::vector<ComplexMatrix> ops;
  ops.reserve(gobs.outcome_count());
  ops.push_back(std::sqrt(1.0 - p) * ComplexMatrix::Identity(n, n));
  for (std::size_t k = 0; k < gobs.base().levels(); ++k) {
    ops.push_back(std::sqrt(p) * gobs.base().projector(k));
  }
  return MeasurementOperatorFamily{gobs, psi, p, std::move(ops)};
}

namespace detail {
inline const ComplexMatrix& family_operator(const MeasurementOperatorFamily& family, std::size_t k) {
  if (k >= family.size()) {
    throw Error(ErrorCode::IndexOutOfRange, "outcome index " + std::to_string(k) + " of " +
                                                std::to_string(family.size()));
  }
  return family.operators[k];
}
}  // namespace detail

/// <psi|M_k^dagger M_k|psi>
inline double outcome_probability(const MeasurementOperatorFamily& family, std::size_t k) {
  const ComplexMatrix& m = detail::family_operator(family, k);
  return clamp_probability(family.psi.expectation(m.adjoint() * m));
}

/// Tr[W_psi M_k^dagger M_k]
inline double outcome_probability_density(const MeasurementOperatorFamily& family, std::size_t k) {
  const ComplexMatrix& m = detail::family_operator(family, k);
  const ComplexMatrix w = numerics::outer(family.psi.amplitudes(), family.psi.amplitudes());
  return clamp_probability((w * m.adjoint() * m).trace().real());
}

inline PureState state_after_outcome(const MeasurementOperatorFamily& family, std::size_t k) {
  const ComplexMatrix& m = detail::family_operator(family, k);
  const double p = outcome_probability(family, k);
  if (p <= kZeroBranchNorm) {
    throw Error(ErrorCode::ZeroProbabilityBranch,
                "outcome " + std::to_string(family.outcome(k)) + " has probability " + std::to_string(p));
  }
  return PureState::normalized(fix_global_phase(m * family.psi.amplitudes() / std::sqrt(p)));
}

/// M_k W_psi M_k^dagger / Tr[W_psi M_k^dagger M_k]
inline DensityOperator density_after_outcome(const MeasurementOperatorFamily& family, std::size_t k) {
  const ComplexMatrix& m = detail::family_operator(family, k);
  const double p = outcome_probability_density(family, k);
  if (p <= kZeroBranchNorm) {
    throw Error(ErrorCode::ZeroProbabilityBranch,
                "outcome " + std::to_string(family.outcome(k)) + " has probability " + std::to_string(p));
  }
  const ComplexMatrix w = numerics::outer(family.psi.amplitudes(), family.psi.amplitudes());
  return DensityOperator::from_matrix(m * w * m.adjoint() / p);
}

/// sum_k M_k W_psi M_k^dagger
inline DensityOperator nonselective_state(const MeasurementOperatorFamily& family) {
  const Eigen::Index n = family.gobs.dim();
  const ComplexMatrix w = numerics::outer(family.psi.amplitudes(), family.psi.amplitudes());
  ComplexMatrix out = ComplexMatrix::Zero(n, n);
  for (const auto& m : family.operators) out += m * w * m.adjoint();
  return DensityOperator::from_matrix(std::move(out));
}

/// sum_k p_k W_k, skipping branches that cannot occur.
inline DensityOperator nonselective_state_weighted(const MeasurementOperatorFamily& family) {
  const Eigen::Index n = family.gobs.dim();
  ComplexMatrix out = ComplexMatrix::Zero(n, n);
  for (std::size_t k = 0; k < family.size(); ++k) {
    const double p = outcome_probability_density(family, k);
    if (p <= kZeroBranchNorm) continue;
    out += p * density_after_outcome(family, k).matrix();
  }
  return DensityOperator::from_matrix(std::move(out));
}

/// (1 - p_d)|psi><psi| + p_d sum_k |c_k|^2 |a_k><a_k| for a nondegenerate observable.
inline DensityOperator decohered_mixture(const GeneralizedObservable& gobs, const PureState& psi) {
  if (!gobs.base().is_nondegenerate()) {
    throw Error(ErrorCode::DegenerateSpectrum, "closed-form mixture needs rank-1 projectors");
  }
  const double p = detection_probability(gobs, psi);
  ComplexMatrix out = (1.0 - p) * numerics::outer(psi.amplitudes(), psi.amplitudes());
  for (std::size_t k = 0; k < gobs.base().levels(); ++k) {
    const ComplexMatrix& proj = gobs.base().projector(k);
    out += p * psi.expectation(proj) * proj;
  }
  return DensityOperator::from_matrix(std::move(out));
}

}  // namespace esr
