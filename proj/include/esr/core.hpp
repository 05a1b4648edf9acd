#pragma once

// States, observables with a no-registration outcome, detection models,
// events, effects, and the overall/conditional probability rules.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "esr/numerics.hpp"

namespace esr {

inline constexpr double kNormTolerance = 1e-10;
inline constexpr double kProbabilitySlack = 1e-9;

/// Clamps a computed probability into [0,1]. Values further than
/// kProbabilitySlack outside the interval indicate a logic error.
inline double clamp_probability(double p) {
  if (!std::isfinite(p) || p < -kProbabilitySlack || p > 1.0 + kProbabilitySlack) {
    throw Error(ErrorCode::ProbabilityOutOfRange, "computed probability " + std::to_string(p));
  }
  return std::clamp(p, 0.0, 1.0);
}

class PureState {
 public:
  /// Rejects vectors whose norm differs from 1 by more than 1e-10.
  static PureState from_amplitudes(ComplexVector amplitudes) {
    check_shape(amplitudes);
    const double norm = amplitudes.norm();
    if (std::abs(norm - 1.0) > kNormTolerance) {
      throw Error(ErrorCode::NotNormalized, "state norm is " + std::to_string(norm));
    }
    return PureState(std::move(amplitudes));
  }

  /// Rescales any nonzero vector to unit norm.
  static PureState normalized(ComplexVector amplitudes) {
    check_shape(amplitudes);
    const double norm = amplitudes.norm();
    if (norm < 1e-300) throw Error(ErrorCode::NotNormalized, "cannot normalize the zero vector");
    amplitudes /= norm;
    return PureState(std::move(amplitudes));
  }

  const ComplexVector& amplitudes() const noexcept { return amplitudes_; }
  Eigen::Index dim() const noexcept { return amplitudes_.size(); }

  /// <psi| m |psi>, real part.
  double expectation(const ComplexMatrix& m) const {
    return amplitudes_.dot(m * amplitudes_).real();
  }

 private:
  explicit PureState(ComplexVector amplitudes) : amplitudes_(std::move(amplitudes)) {}

  static void check_shape(const ComplexVector& amplitudes) {
    if (amplitudes.size() == 0) throw Error(ErrorCode::DimensionMismatch, "empty state vector");
    numerics::require_finite(amplitudes);
  }

  ComplexVector amplitudes_;
};

class DensityOperator {
 public:
  static DensityOperator from_matrix(ComplexMatrix m, double tol = kNormTolerance) {
    numerics::require_hermitian(m);
    m = numerics::symmetrized(m);
    const double tr = m.trace().real();
    if (std::abs(tr - 1.0) > tol) {
      throw Error(ErrorCode::NotNormalized, "density trace is " + std::to_string(tr));
    }
    if (!numerics::is_positive_semidefinite(m, tol)) {
      throw Error(ErrorCode::InvalidArgument, "density operator is not positive semidefinite");
    }
    return DensityOperator(std::move(m));
  }

  const ComplexMatrix& matrix() const noexcept { return matrix_; }
  Eigen::Index dim() const noexcept { return matrix_.rows(); }
  double trace() const { return matrix_.trace().real(); }
  double purity() const { return (matrix_ * matrix_).trace().real(); }

 private:
  explicit DensityOperator(ComplexMatrix m) : matrix_(std::move(m)) {}
  ComplexMatrix matrix_;
};

inline DensityOperator to_density(const PureState& psi) {
  return DensityOperator::from_matrix(numerics::outer(psi.amplitudes(), psi.amplitudes()));
}

class QuantumObservable {
 public:
  static QuantumObservable from_matrix(const ComplexMatrix& m) {
    numerics::require_hermitian(m);
    return from_matrix(m, numerics::default_cluster_tolerance(m));
  }

  static QuantumObservable from_matrix(const ComplexMatrix& m, double cluster_tol) {
    auto sd = numerics::hermitian_eigendecompose(m, cluster_tol);
    return QuantumObservable(std::move(sd), std::max(cluster_tol, 1e-12));
  }

  /// Builds from explicit spectral data; checks every invariant.
  static QuantumObservable from_spectral(numerics::SpectralDecomposition sd, double tol = 1e-10) {
    if (sd.eigenvalues.empty() || sd.eigenvalues.size() != sd.projectors.size()) {
      throw Error(ErrorCode::ValidationError, "spectral data must pair each eigenvalue with a projector");
    }
    const Eigen::Index n = sd.projectors.front().rows();
    for (const auto& p : sd.projectors) {
      if (p.rows() != n || p.cols() != n) {
        throw Error(ErrorCode::DimensionMismatch, "projectors differ in dimension");
      }
      numerics::require_finite(p);
    }
    for (std::size_t k = 0; k + 1 < sd.eigenvalues.size(); ++k) {
      if (!(sd.eigenvalues[k] < sd.eigenvalues[k + 1])) {
        throw Error(ErrorCode::ValidationError, "eigenvalues must be strictly increasing");
      }
    }
    const double defect = numerics::spectral_defect(sd);
    if (defect > tol) {
      throw Error(ErrorCode::ValidationError,
                  "projectors violate P=P^dagger=P^2, orthogonality or completeness (defect " +
                      std::to_string(defect) + ")");
    }
    const double range = sd.eigenvalues.back() - sd.eigenvalues.front();
    return QuantumObservable(std::move(sd), 1e-8 * std::max(1.0, range));
  }

  /// Builds from (eigenvalue, eigenvector) pairs. Equal eigenvalues are merged;
  /// eigenvectors must form an orthonormal basis.
  static QuantumObservable from_eigenpairs(std::vector<std::pair<double, ComplexVector>> pairs,
                                           double tol = 1e-10) {
    if (pairs.empty()) throw Error(ErrorCode::ValidationError, "no eigenpairs given");
    const Eigen::Index n = pairs.front().second.size();
    if (static_cast<Eigen::Index>(pairs.size()) != n) {
      throw Error(ErrorCode::ValidationError, "expected " + std::to_string(n) +
                                                  " eigenvectors, got " + std::to_string(pairs.size()));
    }
    ComplexMatrix basis(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
      if (pairs[i].second.size() != n) throw Error(ErrorCode::DimensionMismatch, "eigenvector length");
      basis.col(i) = pairs[i].second;
    }
    const double gram_defect = (basis.adjoint() * basis - ComplexMatrix::Identity(n, n)).norm();
    if (gram_defect > tol) {
      throw Error(ErrorCode::ValidationError,
                  "eigenvectors are not orthonormal (defect " + std::to_string(gram_defect) + ")");
    }
    std::stable_sort(pairs.begin(), pairs.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });
    numerics::SpectralDecomposition sd;
    for (const auto& [value, vec] : pairs) {
      if (sd.eigenvalues.empty() || value != sd.eigenvalues.back()) {
        sd.eigenvalues.push_back(value);
        sd.projectors.push_back(ComplexMatrix::Zero(n, n));
      }
      sd.projectors.back() += numerics::outer(vec, vec);
    }
    return from_spectral(std::move(sd), tol);
  }

  /// No validation. Exists so fault-injection tests can feed corrupted
  /// projector data into the checkers.
  static QuantumObservable from_unchecked(numerics::SpectralDecomposition sd, double match_tol) {
    return QuantumObservable(std::move(sd), match_tol);
  }

  const numerics::SpectralDecomposition& spectral() const noexcept { return spectral_; }
  const std::vector<double>& eigenvalues() const noexcept { return spectral_.eigenvalues; }
  const ComplexMatrix& projector(std::size_t k) const { return spectral_.projectors.at(k); }
  std::size_t levels() const noexcept { return spectral_.size(); }
  std::size_t rank_of(std::size_t k) const { return spectral_.rank(k); }
  Eigen::Index dim() const noexcept { return spectral_.dim(); }
  double match_tolerance() const noexcept { return match_tol_; }
  ComplexMatrix matrix() const { return spectral_.reconstruct(); }

  bool is_nondegenerate() const {
    return std::all_of(spectral_.projectors.begin(), spectral_.projectors.end(),
                       [](const ComplexMatrix& p) { return std::abs(p.trace().real() - 1.0) < 1e-6; });
  }

  std::optional<std::size_t> level_of(double value) const {
    for (std::size_t k = 0; k < levels(); ++k) {
      if (std::abs(spectral_.eigenvalues[k] - value) <= match_tol_) return k;
    }
    return std::nullopt;
  }

 private:
  QuantumObservable(numerics::SpectralDecomposition sd, double match_tol)
      : spectral_(std::move(sd)), match_tol_(match_tol) {}

  numerics::SpectralDecomposition spectral_;
  double match_tol_;
};

/// How likely an object in a given pure state is to be registered at all.
/// Never depends on the queried event.
class DetectionModel {
 public:
  struct Constant {
    double p;
  };
  struct ExpectationValued {
    ComplexMatrix b;
  };

  static DetectionModel constant(double p) {
    if (!(p >= 0.0 && p <= 1.0)) {
      throw Error(ErrorCode::InvalidArgument, "constant detection probability " + std::to_string(p) +
                                                  " is outside [0,1]");
    }
    return DetectionModel(Constant{p});
  }

  /// p = <psi|B|psi>; B must be Hermitian with spectrum inside [0,1].
  static DetectionModel expectation_valued(const ComplexMatrix& b) {
    numerics::require_hermitian(b);
    const ComplexMatrix h = numerics::symmetrized(b);
    const double lo = numerics::min_eigenvalue(h);
    const double hi = numerics::max_eigenvalue(h);
    if (lo < -kNormTolerance || hi > 1.0 + kNormTolerance) {
      throw Error(ErrorCode::InvalidArgument, "detection operator spectrum [" + std::to_string(lo) +
                                                  ", " + std::to_string(hi) + "] is not inside [0,1]");
    }
    return DetectionModel(ExpectationValued{h});
  }

  double evaluate(const PureState& psi) const {
    if (const auto* c = std::get_if<Constant>(&kind_)) return c->p;
    const auto& e = std::get<ExpectationValued>(kind_);
    if (e.b.rows() != psi.dim()) {
      throw Error(ErrorCode::DimensionMismatch, "detection operator and state differ in dimension");
    }
    return clamp_probability(psi.expectation(e.b));
  }

  bool is_constant() const noexcept { return std::holds_alternative<Constant>(kind_); }
  const std::variant<Constant, ExpectationValued>& kind() const noexcept { return kind_; }

  std::optional<Eigen::Index> dim() const {
    if (const auto* e = std::get_if<ExpectationValued>(&kind_)) return e->b.rows();
    return std::nullopt;
  }

 private:
  explicit DetectionModel(std::variant<Constant, ExpectationValued> kind) : kind_(std::move(kind)) {}
  std::variant<Constant, ExpectationValued> kind_;
};

/// A finite set of outcome values; canonical stand-in for a Borel set of reals.
/// Only its intersection with the outcome set of an observable matters.
class OutcomeEvent {
 public:
  OutcomeEvent() = default;
  OutcomeEvent(std::initializer_list<double> values) : OutcomeEvent(std::vector<double>(values)) {}
  explicit OutcomeEvent(std::vector<double> values) : values_(std::move(values)) {
    for (double v : values_) {
      if (!std::isfinite(v)) throw Error(ErrorCode::InvalidArgument, "event value is not finite");
    }
    std::sort(values_.begin(), values_.end());
    values_.erase(std::unique(values_.begin(), values_.end()), values_.end());
  }

  const std::vector<double>& values() const noexcept { return values_; }
  bool empty() const noexcept { return values_.empty(); }
  bool operator==(const OutcomeEvent&) const = default;

 private:
  std::vector<double> values_;
};

/// Which outcomes of an observable an event selects.
struct EventSelection {
  bool no_registration = false;
  std::vector<std::size_t> levels;  // indices into the eigenvalue list, ascending
};

class GeneralizedObservable {
 public:
  /// a0 defaults to min(eigenvalues) - 1.
  GeneralizedObservable(QuantumObservable base, DetectionModel detection,
                        std::optional<double> a0 = std::nullopt)
      : base_(std::move(base)), detection_(std::move(detection)) {
    a0_ = a0.value_or(base_.eigenvalues().front() - 1.0);
    if (!std::isfinite(a0_)) throw Error(ErrorCode::ValidationError, "a0 is not finite");
    if (auto k = base_.level_of(a0_)) {
      throw Error(ErrorCode::ValidationError,
                  "a0 = " + std::to_string(a0_) + " coincides with eigenvalue " +
                      std::to_string(base_.eigenvalues()[*k]));
    }
    if (auto d = detection_.dim(); d && *d != base_.dim()) {
      throw Error(ErrorCode::DimensionMismatch, "detection operator and observable differ in dimension");
    }
  }

  const QuantumObservable& base() const noexcept { return base_; }
  const DetectionModel& detection() const noexcept { return detection_; }
  double a0() const noexcept { return a0_; }
  Eigen::Index dim() const noexcept { return base_.dim(); }

  /// Number of outcomes including a0.
  std::size_t outcome_count() const noexcept { return base_.levels() + 1; }

  /// a0 first, then the eigenvalues in increasing order.
  std::vector<double> outcomes() const {
    std::vector<double> out{a0_};
    out.insert(out.end(), base_.eigenvalues().begin(), base_.eigenvalues().end());
    return out;
  }

  double outcome(std::size_t k) const { return k == 0 ? a0_ : base_.eigenvalues().at(k - 1); }

  bool is_no_registration(double value) const {
    return std::abs(value - a0_) <= base_.match_tolerance();
  }

  EventSelection select(const OutcomeEvent& event) const {
    EventSelection sel;
    for (double v : event.values()) {
      if (is_no_registration(v)) {
        sel.no_registration = true;
      } else if (auto k = base_.level_of(v)) {
        sel.levels.push_back(*k);
      }
    }
    std::sort(sel.levels.begin(), sel.levels.end());
    sel.levels.erase(std::unique(sel.levels.begin(), sel.levels.end()), sel.levels.end());
    return sel;
  }

  /// Event built from a bitmask over outcomes(): bit 0 is a0, bit k is the k-th eigenvalue.
  OutcomeEvent event_from_mask(std::uint64_t mask) const {
    std::vector<double> values;
    for (std::size_t k = 0; k < outcome_count(); ++k) {
      if (mask & (std::uint64_t{1} << k)) values.push_back(outcome(k));
    }
    return OutcomeEvent(std::move(values));
  }

  OutcomeEvent all_outcomes() const { return OutcomeEvent(outcomes()); }
  OutcomeEvent spectrum_event() const { return OutcomeEvent(base_.eigenvalues()); }

  /// Xi_0 minus the event.
  OutcomeEvent complement(const OutcomeEvent& event) const {
    const EventSelection sel = select(event);
    std::vector<double> values;
    if (!sel.no_registration) values.push_back(a0_);
    for (std::size_t k = 0; k < base_.levels(); ++k) {
      if (!std::binary_search(sel.levels.begin(), sel.levels.end(), k)) {
        values.push_back(base_.eigenvalues()[k]);
      }
    }
    return OutcomeEvent(std::move(values));
  }

  void require_dim(const PureState& psi) const {
    if (psi.dim() != dim()) {
      throw Error(ErrorCode::DimensionMismatch, "state has dimension " + std::to_string(psi.dim()) +
                                                    ", observable " + std::to_string(dim()));
    }
  }

 private:
  QuantumObservable base_;
  DetectionModel detection_;
  double a0_ = 0.0;
};

struct Effect {
  ComplexMatrix op;
};

/// Sum of the spectral projectors whose eigenvalue lies in the event.
inline ComplexMatrix pv_projector(const QuantumObservable& obs, const OutcomeEvent& event) {
  ComplexMatrix p = ComplexMatrix::Zero(obs.dim(), obs.dim());
  std::vector<bool> used(obs.levels(), false);
  for (double v : event.values()) {
    if (auto k = obs.level_of(v); k && !used[*k]) {
      p += obs.projector(*k);
      used[*k] = true;
    }
  }
  return p;
}

inline ComplexMatrix pv_projector(const QuantumObservable& obs, const EventSelection& sel) {
  ComplexMatrix p = ComplexMatrix::Zero(obs.dim(), obs.dim());
  for (std::size_t k : sel.levels) p += obs.projector(k);
  return p;
}

inline double detection_probability(const GeneralizedObservable& gobs, const PureState& psi) {
  gobs.require_dim(psi);
  return gobs.detection().evaluate(psi);
}

/// Born probability <psi|P(X)|psi>, conditional on detection. X must not contain a0.
inline double conditional_probability(const GeneralizedObservable& gobs, const PureState& psi,
                                      const OutcomeEvent& event) {
  gobs.require_dim(psi);
  const EventSelection sel = gobs.select(event);
  if (sel.no_registration) {
    throw Error(ErrorCode::EventContainsNoRegistration,
                "conditional probability is undefined for events containing a0");
  }
  return clamp_probability(psi.expectation(pv_projector(gobs.base(), sel)));
}

/// Effect operator for the event:
///   p_d P(X)                   if a0 not in X
///   (1 - p_d) I + p_d P(X)     if a0 in X
inline Effect effect_for_detection(const GeneralizedObservable& gobs, double p_detect,
                                   const OutcomeEvent& event) {
  const EventSelection sel = gobs.select(event);
  ComplexMatrix op = p_detect * pv_projector(gobs.base(), sel);
  if (sel.no_registration) op += (1.0 - p_detect) * ComplexMatrix::Identity(gobs.dim(), gobs.dim());
  return Effect{std::move(op)};
}

inline Effect effect(const GeneralizedObservable& gobs, const PureState& psi, const OutcomeEvent& event) {
  return effect_for_detection(gobs, detection_probability(gobs, psi), event);
}

inline double overall_probability(const GeneralizedObservable& gobs, const PureState& psi,
                                  const OutcomeEvent& event) {
  return clamp_probability(psi.expectation(effect(gobs, psi, event).op));
}

/// Same quantity evaluated as Tr[W_psi T(X)].
inline double overall_probability_density(const GeneralizedObservable& gobs, const PureState& psi,
                                          const OutcomeEvent& event) {
  const DensityOperator w = to_density(psi);
  return clamp_probability((w.matrix() * effect(gobs, psi, event).op).trace().real());
}

struct PovAxiomReport {
  double completeness = 0.0;   // ||T(Xi_0) - I||_F
  double positivity = 0.0;     // how far any T(X) leaves [0, I] in operator order
  double additivity = 0.0;     // ||T(U X_i) - sum T(X_i)||_F over sampled partitions
  double commutativity = 0.0;  // ||[T(X), T(Y)]||_F over sampled pairs
  std::size_t events_checked = 0;
  std::size_t partitions_checked = 0;
  std::size_t pairs_checked = 0;

  double max_deviation() const { return std::max({completeness, positivity, additivity, commutativity}); }
  bool passed(double tol) const { return max_deviation() <= tol; }
};

namespace detail {

inline double order_interval_violation(const ComplexMatrix& t) {
  const double defect = numerics::hermiticity_defect(t);
  const ComplexMatrix h = numerics::symmetrized(t);
  Eigen::SelfAdjointEigenSolver<ComplexMatrix> solver(h, Eigen::EigenvaluesOnly);
  const double lo = solver.eigenvalues().minCoeff();
  const double hi = solver.eigenvalues().maxCoeff();
  return std::max({defect, -lo, hi - 1.0, 0.0});
}

}  // namespace detail

/// Checks, for one state: T(Xi_0) = I; 0 <= T(X) <= I; finite additivity over
/// random disjoint partitions; and pairwise commutativity of effects.
/// Positivity is checked on every subset when there are at most 10 outcomes.
inline PovAxiomReport verify_pov_axioms(const GeneralizedObservable& gobs, const PureState& psi,
                                        std::size_t partition_trials, std::uint64_t seed = 0) {
  const double p_detect = detection_probability(gobs, psi);
  const std::size_t outcomes = gobs.outcome_count();
  const Eigen::Index n = gobs.dim();
  const auto T = [&](std::uint64_t mask) {
    return effect_for_detection(gobs, p_detect, gobs.event_from_mask(mask)).op;
  };
  const std::uint64_t full = outcomes >= 64 ? ~std::uint64_t{0} : (std::uint64_t{1} << outcomes) - 1;

  PovAxiomReport report;
  report.completeness = (T(full) - ComplexMatrix::Identity(n, n)).norm();

  std::mt19937_64 gen(seed);
  std::uniform_int_distribution<std::uint64_t> any_mask(0, full);

  if (outcomes <= 10) {
    for (std::uint64_t mask = 0; mask <= full; ++mask) {
      report.positivity = std::max(report.positivity, detail::order_interval_violation(T(mask)));
      ++report.events_checked;
    }
  } else {
    for (std::size_t t = 0; t < 4 * partition_trials; ++t) {
      report.positivity = std::max(report.positivity, detail::order_interval_violation(T(any_mask(gen))));
      ++report.events_checked;
    }
  }

  for (std::size_t t = 0; t < partition_trials; ++t) {
    // Random union, split into random disjoint blocks.
    const std::uint64_t union_mask = t == 0 ? full : any_mask(gen);
    std::uniform_int_distribution<std::size_t> block_count_dist(1, outcomes);
    const std::size_t blocks = block_count_dist(gen);
    std::uniform_int_distribution<std::size_t> pick_block(0, blocks - 1);
    std::vector<std::uint64_t> parts(blocks, 0);
    for (std::size_t k = 0; k < outcomes; ++k) {
      const std::uint64_t bit = std::uint64_t{1} << k;
      if (union_mask & bit) parts[pick_block(gen)] |= bit;
    }
    ComplexMatrix sum = ComplexMatrix::Zero(n, n);
    for (std::uint64_t part : parts) sum += T(part);
    report.additivity = std::max(report.additivity, (T(union_mask) - sum).norm());
    ++report.partitions_checked;

    const ComplexMatrix tx = T(any_mask(gen));
    const ComplexMatrix ty = T(any_mask(gen));
    report.commutativity = std::max(report.commutativity, numerics::commutator(tx, ty).norm());
    ++report.pairs_checked;
  }
  return report;
}

}  // namespace esr
