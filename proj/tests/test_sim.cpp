#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "support/generators.hpp"

namespace esr {
namespace {

using testing::Rng;
using testing::sigma_z_observable;
using testing::state;

const double kInvSqrt2 = 1.0 / std::sqrt(2.0);

TEST(TrialRng, SplitMixFinalizerKnownAnswer) {
  // First output of the reference SplitMix64 generator seeded with 0.
  EXPECT_EQ(sim::TrialRng::mix64(0x9E3779B97F4A7C15ULL), 0xE220A8397B1DCDAFULL);
}

TEST(TrialRng, DeterministicAndStreamSeparated) {
  sim::TrialRng a({42, 0}, 7), b({42, 0}, 7), c({42, 1}, 7), d({42, 0}, 8);
  std::set<std::uint64_t> firsts;
  for (int i = 0; i < 100; ++i) {
    const auto x = a.next();
    EXPECT_EQ(x, b.next());
    if (i == 0) {
      firsts.insert(x);
      firsts.insert(c.next());
      firsts.insert(d.next());
    }
  }
  EXPECT_EQ(firsts.size(), 3u);
  sim::TrialRng u({1, 2}, 3);
  for (int i = 0; i < 10000; ++i) {
    const double x = u.uniform();
    ASSERT_GE(x, 0.0);
    ASSERT_LT(x, 1.0);
  }
}

TEST(SampleMeasurement, NeverDetect) {
  const auto g = sigma_z_observable(0.0);
  const auto psi = state({0.6, Complex(0.0, 0.8)});
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const auto r = sim::sample_measurement(g, psi, sim::RngSpec{seed, 0});
    EXPECT_EQ(r.outcome, 0.0);
    EXPECT_FALSE(r.detected);
    EXPECT_EQ(r.post_state.amplitudes(), psi.amplitudes());
    EXPECT_DOUBLE_EQ(r.probability, 1.0);
  }
}

TEST(SampleMeasurement, CertainDetectionOfEigenstate) {
  const auto g = sigma_z_observable(1.0);
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const auto r = sim::sample_measurement(g, state({0.0, 1.0}), sim::RngSpec{seed, 3});
    EXPECT_EQ(r.outcome, -1.0);
    EXPECT_TRUE(r.detected);
    EXPECT_NEAR(r.probability, 1.0, 1e-15);
  }
}

TEST(SampleMeasurement, RecordFieldsAreConsistent) {
  Rng gen(31);
  for (int trial = 0; trial < 100; ++trial) {
    const auto [g, psi] = testing::random_scenario(gen);
    const auto r = sim::sample_measurement(g, psi, sim::RngSpec{static_cast<std::uint64_t>(trial), 0});
    EXPECT_EQ(r.detected, !g.is_no_registration(r.outcome));
    EXPECT_GT(r.probability, 0.0);
    EXPECT_LE(r.probability, 1.0);
    EXPECT_NEAR(r.post_state.amplitudes().norm(), 1.0, 1e-12);
    if (r.detected) {
      const auto family = measurement_operators(g, psi);
      std::size_t k = 1;
      while (g.outcome(k) != r.outcome) ++k;
      EXPECT_LT((r.post_state.amplitudes() - state_after_outcome(family, k).amplitudes()).norm(), 1e-12);
    }
  }
}

TEST(RunExperiment, SigmaZFrequenciesMatchPredictions) {
  const auto g = sigma_z_observable(0.8);
  const auto psi = state({kInvSqrt2, kInvSqrt2});
  const auto report = sim::run_experiment(g, psi, 100000, sim::RngSpec{2024, 0});
  ASSERT_EQ(report.outcomes, (std::vector<double>{0.0, -1.0, 1.0}));
  EXPECT_NEAR(report.predicted[0], 0.2, 1e-15);
  EXPECT_NEAR(report.predicted[1], 0.4, 1e-15);
  EXPECT_NEAR(report.predicted[2], 0.4, 1e-15);
  for (std::size_t k = 0; k < 3; ++k) {
    const double se = std::sqrt(report.predicted[k] * (1 - report.predicted[k]) / 1e5);
    EXPECT_NEAR(report.std_errors[k], se, 1e-15);
    EXPECT_LE(std::abs(report.frequencies[k] - report.predicted[k]), 4.0 * se);
  }
  EXPECT_TRUE(report.within(4.0));
}

TEST(RunExperiment, ReportInvariants) {
  Rng gen(32);
  for (int trial = 0; trial < 20; ++trial) {
    const auto [g, psi] = testing::random_scenario(gen);
    const std::uint64_t n = 1 + static_cast<std::uint64_t>(trial) * 97;
    const auto report = sim::run_experiment(g, psi, n, sim::RngSpec{static_cast<std::uint64_t>(trial), 0});
    std::uint64_t total = 0;
    double freq = 0.0;
    for (std::size_t k = 0; k < report.counts.size(); ++k) {
      total += report.counts[k];
      freq += report.frequencies[k];
    }
    EXPECT_EQ(total, n);
    EXPECT_NEAR(freq, 1.0, 1e-12);
  }
}

TEST(RunExperiment, SingleTrial) {
  const auto report = sim::run_experiment(sigma_z_observable(0.5), state({0.6, 0.8}), 1, sim::RngSpec{9, 0});
  std::uint64_t total = 0;
  for (auto c : report.counts) total += c;
  EXPECT_EQ(total, 1u);
  EXPECT_THROW(sim::run_experiment(sigma_z_observable(0.5), state({0.6, 0.8}), 0, sim::RngSpec{}), Error);
}

TEST(RunExperiment, DeterministicAcrossRepeatsAndThreadCounts) {
  Rng gen(33);
  const auto [g, psi] = testing::random_scenario(gen);
  const sim::RngSpec rng{77, 5};
  const auto a = sim::run_experiment(g, psi, 20001, rng, 1);
  const auto b = sim::run_experiment(g, psi, 20001, rng, 1);
  const auto c = sim::run_experiment(g, psi, 20001, rng, 4);
  const auto d = sim::run_experiment(g, psi, 20001, rng, 7);
  EXPECT_EQ(a.counts, b.counts);
  EXPECT_EQ(a.counts, c.counts);
  EXPECT_EQ(a.counts, d.counts);
  EXPECT_EQ(a.frequencies, d.frequencies);
  const auto other = sim::run_experiment(g, psi, 20001, sim::RngSpec{78, 5}, 1);
  EXPECT_NE(a.counts, other.counts);
}

TEST(SampleSequence, LengthOneIsSingleMeasurement) {
  Rng gen(34);
  const auto [g, psi] = testing::random_scenario(gen);
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto seq = sim::sample_sequence(g, psi, 1, sim::RngSpec{seed, 0});
    const auto single = sim::sample_measurement(g, psi, sim::RngSpec{seed, 0});
    ASSERT_EQ(seq.size(), 1u);
    EXPECT_EQ(seq[0].outcome, single.outcome);
    EXPECT_EQ(seq[0].post_state.amplitudes(), single.post_state.amplitudes());
  }
  EXPECT_THROW(sim::sample_sequence(g, psi, 0, sim::RngSpec{}), Error);
}

TEST(SampleSequence, SharpMeasurementRepeatsItsOutcome) {
  Rng gen(35);
  for (int trial = 0; trial < 100; ++trial) {
    const Eigen::Index n = 2 + trial % 6;
    const GeneralizedObservable g(testing::random_observable(n, gen), DetectionModel::constant(1.0));
    const auto seq = sim::sample_sequence(g, testing::random_state(n, gen), 6, sim::RngSpec{static_cast<std::uint64_t>(trial), 0});
    for (const auto& r : seq) {
      EXPECT_TRUE(r.detected);
      EXPECT_EQ(r.outcome, seq.front().outcome);
    }
  }
}

TEST(SampleSequence, PartialDetectionNeverMixesDetectedOutcomes) {
  Rng gen(36);
  std::uint64_t interleaved = 0;
  for (int trial = 0; trial < 5; ++trial) {
    const auto [g, psi] = testing::random_scenario(gen, 6, false);
    const auto report = sim::run_sequences(g, psi, 2000, 5, sim::RngSpec{static_cast<std::uint64_t>(trial), 0}, 2);
    EXPECT_EQ(report.violations, 0u);
    EXPECT_EQ(report.detected_records + report.undetected_records, 2000u * 5u);
    interleaved += report.undetected_records;
  }
  EXPECT_GT(interleaved, 0u);
}

TEST(HasDistinctDetections, Scan) {
  const auto psi = state({1.0, 0.0});
  using R = MeasurementOutcomeRecord;
  std::vector<R> ok{{0.0, false, psi, psi, 0.5}, {1.0, true, psi, psi, 0.5}, {0.0, false, psi, psi, 0.5},
                    {1.0, true, psi, psi, 0.5}};
  EXPECT_FALSE(sim::has_distinct_detections(ok));
  ok.push_back({-1.0, true, psi, psi, 0.1});
  EXPECT_TRUE(sim::has_distinct_detections(ok));
}

}  // namespace
}  // namespace esr
