#include <gtest/gtest.h>

#include <cmath>

#include "support/generators.hpp"
#include "support/oracles.hpp"

namespace esr {
namespace {

using testing::diag;
using testing::Rng;
using testing::sigma_z_observable;
using testing::state;

const double kInvSqrt2 = 1.0 / std::sqrt(2.0);

template <typename F>
ErrorCode error_code_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no esr::Error thrown";
  return ErrorCode::InvalidArgument;
}

TEST(PureState, RejectsUnnormalizedAmplitudes) {
  EXPECT_EQ(error_code_of([] { state({1.0, 1.0}); }), ErrorCode::NotNormalized);
  EXPECT_EQ(error_code_of([] { PureState::normalized(ComplexVector::Zero(3)); }), ErrorCode::NotNormalized);
  EXPECT_NO_THROW(state({1.0, 1e-11}));
}

TEST(ToDensity, BasisAndSuperposition) {
  EXPECT_LT((to_density(state({1.0, 0.0})).matrix() - diag({1.0, 0.0})).norm(), 1e-15);
  ComplexMatrix half(2, 2);
  half << 0.5, 0.5, 0.5, 0.5;
  EXPECT_LT((to_density(state({kInvSqrt2, kInvSqrt2})).matrix() - half).norm(), 1e-15);
}

TEST(ToDensityProperty, UnitTraceAndIdempotent) {
  Rng gen(1);
  for (int trial = 0; trial < 100; ++trial) {
    const auto w = to_density(testing::random_state(1 + trial % 8, gen));
    EXPECT_NEAR(w.trace(), 1.0, 1e-12);
    EXPECT_LT((w.matrix() * w.matrix() - w.matrix()).norm(), 1e-10);
  }
}

TEST(DensityOperator, RejectsBadMatrices) {
  EXPECT_EQ(error_code_of([] { DensityOperator::from_matrix(diag({0.5, 0.6})); }), ErrorCode::NotNormalized);
  EXPECT_EQ(error_code_of([] { DensityOperator::from_matrix(diag({1.5, -0.5})); }), ErrorCode::InvalidArgument);
  ComplexMatrix m(2, 2);
  m << 0.5, 1, 0, 0.5;
  EXPECT_EQ(error_code_of([&] { DensityOperator::from_matrix(m); }), ErrorCode::NotHermitian);
}

TEST(ClampProbability, ToleratesRoundingOnly) {
  EXPECT_EQ(clamp_probability(-1e-12), 0.0);
  EXPECT_EQ(clamp_probability(1.0 + 1e-12), 1.0);
  EXPECT_EQ(clamp_probability(0.25), 0.25);
  EXPECT_EQ(error_code_of([] { clamp_probability(-1e-6); }), ErrorCode::ProbabilityOutOfRange);
  EXPECT_EQ(error_code_of([] { clamp_probability(1.01); }), ErrorCode::ProbabilityOutOfRange);
}

TEST(QuantumObservable, FromEigenpairsMergesEqualValuesAndChecksBasis) {
  ComplexVector e0 = ComplexVector::Unit(3, 0), e1 = ComplexVector::Unit(3, 1), e2 = ComplexVector::Unit(3, 2);
  const auto obs = QuantumObservable::from_eigenpairs({{2.0, e0}, {-1.0, e1}, {2.0, e2}});
  ASSERT_EQ(obs.levels(), 2u);
  EXPECT_EQ(obs.eigenvalues(), (std::vector<double>{-1.0, 2.0}));
  EXPECT_LT((obs.projector(1) - diag({1.0, 0.0, 1.0})).norm(), 1e-15);
  EXPECT_FALSE(obs.is_nondegenerate());

  ComplexVector skewed = (e0 + 0.1 * e1).normalized();
  EXPECT_EQ(error_code_of([&] { QuantumObservable::from_eigenpairs({{1.0, skewed}, {2.0, e1}, {3.0, e2}}); }),
            ErrorCode::ValidationError);
}

TEST(QuantumObservable, FromSpectralRejectsBrokenProjectors) {
  numerics::SpectralDecomposition sd{{-1.0, 1.0}, {diag({1.0, 0.0}), diag({0.0, 0.9})}};
  EXPECT_EQ(error_code_of([&] { QuantumObservable::from_spectral(sd); }), ErrorCode::ValidationError);
  numerics::SpectralDecomposition unsorted{{1.0, -1.0}, {diag({1.0, 0.0}), diag({0.0, 1.0})}};
  EXPECT_EQ(error_code_of([&] { QuantumObservable::from_spectral(unsorted); }), ErrorCode::ValidationError);
}

TEST(DetectionModel, ValidatesParameters) {
  EXPECT_EQ(error_code_of([] { DetectionModel::constant(1.2); }), ErrorCode::InvalidArgument);
  EXPECT_EQ(error_code_of([] { DetectionModel::constant(-0.1); }), ErrorCode::InvalidArgument);
  EXPECT_EQ(error_code_of([] { DetectionModel::expectation_valued(diag({0.5, 1.5})); }), ErrorCode::InvalidArgument);
  EXPECT_NO_THROW(DetectionModel::expectation_valued(diag({0.0, 1.0})));
}

TEST(GeneralizedObservable, DefaultsAndClash) {
  const GeneralizedObservable g(QuantumObservable::from_matrix(testing::sigma_z()), DetectionModel::constant(0.5));
  EXPECT_DOUBLE_EQ(g.a0(), -2.0);
  EXPECT_EQ(g.outcomes(), (std::vector<double>{-2.0, -1.0, 1.0}));
  EXPECT_EQ(error_code_of([] { sigma_z_observable(0.5, 1.0); }), ErrorCode::ValidationError);
  EXPECT_EQ(error_code_of([] { sigma_z_observable(0.5, 1.0 + 1e-12); }), ErrorCode::ValidationError);
  EXPECT_NO_THROW(sigma_z_observable(0.5, 1.0 + 1e-6));
  EXPECT_EQ(error_code_of([] {
              GeneralizedObservable(QuantumObservable::from_matrix(testing::sigma_z()),
                                    DetectionModel::expectation_valued(diag({0.1, 0.2, 0.3})));
            }),
            ErrorCode::DimensionMismatch);
}

TEST(GeneralizedObservable, ComplementWithinOutcomeSet) {
  const auto g = sigma_z_observable(0.5);
  EXPECT_EQ(g.complement(OutcomeEvent{0.0}), (OutcomeEvent{-1.0, 1.0}));
  EXPECT_EQ(g.complement(OutcomeEvent{-1.0, 1.0}), (OutcomeEvent{0.0}));
  EXPECT_EQ(g.complement(g.all_outcomes()), OutcomeEvent{});
  EXPECT_EQ(g.complement(OutcomeEvent{}), g.all_outcomes());
}

TEST(PvProjector, CompletenessEmptyAndEigenspace) {
  const auto obs = QuantumObservable::from_matrix(testing::sigma_z());
  EXPECT_LT((pv_projector(obs, OutcomeEvent{-1.0, 1.0}) - ComplexMatrix::Identity(2, 2)).norm(), 1e-15);
  EXPECT_LT(pv_projector(obs, OutcomeEvent{}).norm(), 1e-15);
  const ComplexMatrix p = pv_projector(obs, OutcomeEvent{1.0});
  EXPECT_LT((p * testing::sigma_z() - 1.0 * p).norm(), 1e-15);
  EXPECT_LT((p * p - p).norm(), 1e-15);
  // values outside the spectrum contribute nothing
  EXPECT_LT((pv_projector(obs, OutcomeEvent{1.0, 7.0}) - p).norm(), 1e-15);
}

TEST(DetectionProbability, Models) {
  Rng gen(2);
  EXPECT_DOUBLE_EQ(detection_probability(sigma_z_observable(0.8), testing::random_state(2, gen)), 0.8);
  const GeneralizedObservable g(QuantumObservable::from_matrix(testing::sigma_z()),
                                DetectionModel::expectation_valued(diag({0.2, 0.6})), 0.0);
  EXPECT_NEAR(detection_probability(g, state({1.0, 0.0})), 0.2, 1e-15);
  EXPECT_EQ(error_code_of([&] { detection_probability(g, state({1.0, 0.0, 0.0})); }), ErrorCode::DimensionMismatch);
}

TEST(DetectionProbabilityProperty, ExpectationStaysInsideSpectrum) {
  Rng gen(3);
  for (int trial = 0; trial < 200; ++trial) {
    const Eigen::Index n = 2 + trial % 7;
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<double> values;
    for (Eigen::Index i = 0; i < n; ++i) values.push_back(unit(gen));
    const ComplexMatrix b =
        numerics::symmetrized(testing::matrix_with_spectrum(values, testing::random_unitary(n, gen)));
    const GeneralizedObservable g(testing::random_observable(n, gen), DetectionModel::expectation_valued(b));
    const double p = detection_probability(g, testing::random_state(n, gen));
    EXPECT_GE(p, *std::min_element(values.begin(), values.end()) - 1e-12);
    EXPECT_LE(p, *std::max_element(values.begin(), values.end()) + 1e-12);
  }
}

TEST(ConditionalProbability, BornRule) {
  const auto g = sigma_z_observable(0.3);
  const auto psi = state({kInvSqrt2, kInvSqrt2});
  EXPECT_NEAR(conditional_probability(g, psi, g.spectrum_event()), 1.0, 1e-15);
  EXPECT_NEAR(conditional_probability(g, psi, OutcomeEvent{1.0}), 0.5, 1e-15);
  EXPECT_EQ(error_code_of([&] { conditional_probability(g, psi, OutcomeEvent{0.0, 1.0}); }),
            ErrorCode::EventContainsNoRegistration);
}

TEST(ConditionalProbabilityProperty, AdditiveOverDisjointEvents) {
  Rng gen(4);
  for (int trial = 0; trial < 200; ++trial) {
    const auto [g, psi] = testing::random_scenario(gen);
    // split the spectrum into two random disjoint parts
    std::vector<double> left, right;
    std::bernoulli_distribution coin(0.5);
    for (double a : g.base().eigenvalues()) (coin(gen) ? left : right).push_back(a);
    const double lhs = conditional_probability(g, psi, g.spectrum_event());
    const double rhs = conditional_probability(g, psi, OutcomeEvent(left)) +
                       conditional_probability(g, psi, OutcomeEvent(right));
    EXPECT_NEAR(lhs, rhs, 1e-12);
  }
}

TEST(Effect, SigmaZCases) {
  const auto g = sigma_z_observable(0.75);
  Rng gen(5);
  const auto psi = testing::random_state(2, gen);
  EXPECT_LT((effect(g, psi, g.all_outcomes()).op - ComplexMatrix::Identity(2, 2)).norm(), 1e-15);
  EXPECT_LT((effect(g, psi, OutcomeEvent{1.0}).op - 0.75 * diag({1.0, 0.0})).norm(), 1e-15);
  EXPECT_LT((effect(g, psi, OutcomeEvent{0.0}).op - 0.25 * ComplexMatrix::Identity(2, 2)).norm(), 1e-15);
}

TEST(EffectProperty, MatchesCaseSplitOracle) {
  Rng gen(6);
  for (int trial = 0; trial < 200; ++trial) {
    const auto [g, psi] = testing::random_scenario(gen);
    const auto event = testing::random_event(g, gen);
    const double p = detection_probability(g, psi);
    std::vector<bool> selected;
    for (double a : g.base().eigenvalues()) {
      selected.push_back(std::find(event.values().begin(), event.values().end(), a) != event.values().end());
    }
    const bool has_a0 = std::find(event.values().begin(), event.values().end(), g.a0()) != event.values().end();
    const ComplexMatrix expected = oracle::effect(g.base().spectral().projectors, selected, has_a0, p);
    EXPECT_LT((effect(g, psi, event).op - expected).norm(), 1e-12);
  }
}

TEST(OverallProbability, SigmaZValues) {
  const auto g = sigma_z_observable(0.8);
  const auto psi = state({kInvSqrt2, kInvSqrt2});
  EXPECT_NEAR(overall_probability(g, psi, OutcomeEvent{1.0}), 0.4, 1e-15);
  EXPECT_NEAR(overall_probability(g, psi, OutcomeEvent{0.0}), 0.2, 1e-15);
  EXPECT_NEAR(overall_probability(g, psi, g.all_outcomes()), 1.0, 1e-15);
  EXPECT_NEAR(overall_probability(g, psi, OutcomeEvent{0.0, -1.0}), 0.6, 1e-15);
}

TEST(OverallProbabilityDensity, EdgeCases) {
  const auto psi = state({0.6, Complex(0.0, 0.8)});
  EXPECT_EQ(overall_probability_density(sigma_z_observable(0.4), psi, OutcomeEvent{}), 0.0);
  EXPECT_NEAR(overall_probability_density(sigma_z_observable(1.0), psi, OutcomeEvent{0.0}), 0.0, 1e-15);
}

TEST(OverallProbabilityProperty, VectorAndTraceFormsAgree) {
  Rng gen(7);
  for (int trial = 0; trial < 200; ++trial) {
    const auto [g, psi] = testing::random_scenario(gen, 6);
    const auto event = testing::random_event(g, gen);
    EXPECT_NEAR(overall_probability(g, psi, event), overall_probability_density(g, psi, event), 1e-12);
  }
}

TEST(OverallProbabilityProperty, LawOfTheModel) {
  Rng gen(8);
  for (int trial = 0; trial < 200; ++trial) {
    const auto [g, psi] = testing::random_scenario(gen);
    const double pd = detection_probability(g, psi);
    const std::uint64_t full = (std::uint64_t{1} << g.outcome_count()) - 1;

    // random partition of Xi_0 sums to 1
    std::uniform_int_distribution<std::size_t> block(0, 3);
    std::uint64_t parts[4] = {0, 0, 0, 0};
    for (std::size_t k = 0; k < g.outcome_count(); ++k) parts[block(gen)] |= std::uint64_t{1} << k;
    double total = 0.0;
    for (auto m : parts) total += overall_probability(g, psi, g.event_from_mask(m));
    EXPECT_NEAR(total, 1.0, 1e-10);

    const auto x = testing::random_event(g, gen);
    const auto sel = g.select(x);
    // factorization for events without a0
    if (!sel.no_registration) {
      EXPECT_NEAR(overall_probability(g, psi, x), pd * conditional_probability(g, psi, x), 1e-12);
    }
    // monotonicity: X subset of X union Y
    std::uniform_int_distribution<std::uint64_t> any(0, full);
    std::uint64_t xmask = 0;
    for (std::size_t k = 0; k < g.outcome_count(); ++k) {
      if (std::find(x.values().begin(), x.values().end(), g.outcome(k)) != x.values().end()) {
        xmask |= std::uint64_t{1} << k;
      }
    }
    const auto y = g.event_from_mask(xmask | any(gen));
    EXPECT_LE(overall_probability(g, psi, x), overall_probability(g, psi, y) + 1e-12);

    // quantum limit
    const GeneralizedObservable sharp(g.base(), DetectionModel::constant(1.0), g.a0());
    const double born = psi.expectation(pv_projector(g.base(), sel));
    EXPECT_NEAR(overall_probability(sharp, psi, x), born, 1e-12);
  }
}

TEST(PovAxioms, RandomScenariosWithinTolerance) {
  Rng gen(9);
  for (int trial = 0; trial < 50; ++trial) {
    const auto [g, psi] = testing::random_scenario(gen);
    const auto report = verify_pov_axioms(g, psi, 32, trial);
    EXPECT_LE(report.max_deviation(), 1e-10) << "trial " << trial;
    EXPECT_EQ(report.partitions_checked, 32u);
    EXPECT_EQ(report.events_checked, std::size_t{1} << g.outcome_count());
  }
}

TEST(PovAxioms, SharpLimitIsExact) {
  Rng gen(10);
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::Index n = 2 + trial % 5;
    const GeneralizedObservable g(testing::random_observable(n, gen), DetectionModel::constant(1.0));
    const auto report = verify_pov_axioms(g, testing::random_state(n, gen), 32, trial);
    EXPECT_LE(report.max_deviation(), 1e-12);
  }
}

TEST(PovAxioms, NeverDetectLimit) {
  Rng gen(11);
  const GeneralizedObservable g(testing::random_observable(4, gen), DetectionModel::constant(0.0));
  const auto psi = testing::random_state(4, gen);
  for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << g.outcome_count()); ++mask) {
    const auto t = effect(g, psi, g.event_from_mask(mask)).op;
    const ComplexMatrix expected = (mask & 1) ? ComplexMatrix(ComplexMatrix::Identity(4, 4)) : ComplexMatrix(ComplexMatrix::Zero(4, 4));
    EXPECT_LT((t - expected).norm(), 1e-15);
  }
  EXPECT_LE(verify_pov_axioms(g, psi, 16).max_deviation(), 1e-12);
}

TEST(PovAxioms, CorruptedProjectorIsDetected) {
  numerics::SpectralDecomposition broken{{-1.0, 1.0}, {diag({1.0, 0.0}), diag({0.0, 0.8})}};
  const GeneralizedObservable g(QuantumObservable::from_unchecked(broken, 1e-8), DetectionModel::constant(0.9), 0.0);
  const auto report = verify_pov_axioms(g, state({0.6, 0.8}), 16);
  EXPECT_GT(report.completeness, 0.1);
  EXPECT_FALSE(report.passed(1e-10));
}

}  // namespace
}  // namespace esr
