#pragma once

// Seeded Monte Carlo sampling of measurements of a generalized observable.
//
// Random numbers come from a keyed SplitMix64 stream (identifier
// kRngAlgorithm). Every trial owns an independent stream derived from
// (seed, stream_id, trial index):
//
//   key   = mix64(seed + G * (stream_id + 1))
//   state = mix64(key ^ (G2 * (trial + 1)))
//   next  : state += G; return mix64(state)
//   unit  : (next >> 11) * 2^-53
//
// with G = 0x9E3779B97F4A7C15, G2 = 0xD1B54A32D192ED03 and mix64 the
// SplitMix64 finalizer. Results therefore do not depend on how trials are
// split across threads.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string_view>
#include <thread>
#include <vector>

#include "esr/gpp.hpp"

namespace esr::sim {

inline constexpr std::string_view kRngAlgorithm = "splitmix64-keyed-v1";

struct RngSpec {
  std::uint64_t seed = 0;
  std::uint64_t stream_id = 0;
};

class TrialRng {
 public:
  static constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;
  static constexpr std::uint64_t kKeyMul = 0xD1B54A32D192ED03ULL;

  static constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  TrialRng(RngSpec spec, std::uint64_t trial) noexcept {
    const std::uint64_t key = mix64(spec.seed + kGolden * (spec.stream_id + 1));
    state_ = mix64(key ^ (kKeyMul * (trial + 1)));
  }

  std::uint64_t next() noexcept {
    state_ += kGolden;
    return mix64(state_);
  }

  /// Uniform in [0, 1).
  double uniform() noexcept { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

 private:
  std::uint64_t state_;
};

/// Two-stage sampler for a fixed state: a detection draw, then a Born draw
/// over the eigenvalues conditional on detection.
class MeasurementSampler {
 public:
  MeasurementSampler(const GeneralizedObservable& gobs, const PureState& psi)
      : detection_(detection_probability(gobs, psi)) {
    const std::size_t levels = gobs.base().levels();
    cumulative_.reserve(levels);
    double total = 0.0;
    for (std::size_t k = 0; k < levels; ++k) {
      total += std::max(0.0, psi.expectation(gobs.base().projector(k)));
      cumulative_.push_back(total);
    }
    for (double& c : cumulative_) c /= total;
    cumulative_.back() = 1.0;
  }

  double detection() const noexcept { return detection_; }

  /// Outcome index: 0 for a0, k >= 1 for the k-th eigenvalue.
  std::size_t draw(TrialRng& rng) const {
    if (!(rng.uniform() < detection_)) return 0;
    const double u = rng.uniform();
    const auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
    const auto k = static_cast<std::size_t>(std::min<std::ptrdiff_t>(
        it - cumulative_.begin(), static_cast<std::ptrdiff_t>(cumulative_.size()) - 1));
    return k + 1;
  }

 private:
  double detection_;
  std::vector<double> cumulative_;
};

inline MeasurementOutcomeRecord sample_measurement(const GeneralizedObservable& gobs, const PureState& psi,
                                                   TrialRng& rng) {
  const MeasurementSampler sampler(gobs, psi);
  const std::size_t k = sampler.draw(rng);
  const MeasurementOperatorFamily family = measurement_operators(gobs, psi);
  const double probability = outcome_probability(family, k);
  if (k == 0) return {gobs.a0(), false, psi, psi, probability};
  return {gobs.outcome(k), true, psi, state_after_outcome(family, k), probability};
}

inline MeasurementOutcomeRecord sample_measurement(const GeneralizedObservable& gobs, const PureState& psi,
                                                   RngSpec rng) {
  TrialRng stream(rng, 0);
  return sample_measurement(gobs, psi, stream);
}

/// Repeated measurement on the same object, carrying the state forward.
inline std::vector<MeasurementOutcomeRecord> sample_sequence(const GeneralizedObservable& gobs,
                                                             const PureState& psi, std::size_t length,
                                                             TrialRng& rng) {
  if (length == 0) throw Error(ErrorCode::InvalidArgument, "sequence length must be >= 1");
  std::vector<MeasurementOutcomeRecord> out;
  out.reserve(length);
  PureState current = psi;
  for (std::size_t i = 0; i < length; ++i) {
    out.push_back(sample_measurement(gobs, current, rng));
    current = out.back().post_state;
  }
  return out;
}

inline std::vector<MeasurementOutcomeRecord> sample_sequence(const GeneralizedObservable& gobs,
                                                             const PureState& psi, std::size_t length,
                                                             RngSpec rng) {
  TrialRng stream(rng, 0);
  return sample_sequence(gobs, psi, length, stream);
}

/// True when the sequence holds two different detected outcomes.
inline bool has_distinct_detections(const std::vector<MeasurementOutcomeRecord>& sequence) {
  const MeasurementOutcomeRecord* first = nullptr;
  for (const auto& r : sequence) {
    if (!r.detected) continue;
    if (first == nullptr) {
      first = &r;
    } else if (r.outcome != first->outcome) {
      return true;
    }
  }
  return false;
}

struct RunReport {
  std::vector<double> outcomes;  // a0 first, then eigenvalues
  std::vector<std::uint64_t> counts;
  std::vector<double> frequencies;
  std::vector<double> predicted;
  std::vector<double> std_errors;  // sqrt(p (1 - p) / N)
  std::vector<double> sigma_deviations;
  double max_sigma_deviation = 0.0;
  std::uint64_t trials = 0;
  RngSpec rng;

  bool within(double sigma) const { return max_sigma_deviation <= sigma; }
};

namespace detail {

/// Runs body(begin, end, slot) over contiguous chunks of [0, count).
template <typename Body>
void for_chunks(std::uint64_t count, unsigned threads, Body&& body) {
  threads = std::max(1U, std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::uint64_t>(count, 1))));
  if (threads == 1) {
    body(std::uint64_t{0}, count, 0U);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(threads);
  const std::uint64_t chunk = (count + threads - 1) / threads;
  for (unsigned t = 0; t < threads; ++t) {
    const std::uint64_t begin = std::min(count, t * chunk);
    const std::uint64_t end = std::min(count, begin + chunk);
    pool.emplace_back([&body, begin, end, t] { body(begin, end, t); });
  }
  for (auto& th : pool) th.join();
}

}  // namespace detail

inline RunReport run_experiment(const GeneralizedObservable& gobs, const PureState& psi, std::uint64_t trials,
                                RngSpec rng, unsigned threads = 1) {
  if (trials == 0) throw Error(ErrorCode::InvalidArgument, "trials must be >= 1");
  const MeasurementSampler sampler(gobs, psi);
  const MeasurementOperatorFamily family = measurement_operators(gobs, psi);
  const std::size_t outcomes = gobs.outcome_count();

  std::vector<std::vector<std::uint64_t>> partial(std::max(1U, threads), std::vector<std::uint64_t>(outcomes, 0));
  detail::for_chunks(trials, threads, [&](std::uint64_t begin, std::uint64_t end, unsigned slot) {
    auto& counts = partial[slot];
    for (std::uint64_t i = begin; i < end; ++i) {
      TrialRng stream(rng, i);
      ++counts[sampler.draw(stream)];
    }
  });

  RunReport report;
  report.outcomes = gobs.outcomes();
  report.counts.assign(outcomes, 0);
  for (const auto& counts : partial) {
    for (std::size_t k = 0; k < outcomes; ++k) report.counts[k] += counts[k];
  }
  report.trials = trials;
  report.rng = rng;
  const double n = static_cast<double>(trials);
  for (std::size_t k = 0; k < outcomes; ++k) {
    const double f = static_cast<double>(report.counts[k]) / n;
    const double p = outcome_probability(family, k);
    const double se = std::sqrt(p * (1.0 - p) / n);
    double dev = 0.0;
    if (se > 0.0) {
      dev = std::abs(f - p) / se;
    } else if (std::abs(f - p) > 1e-12) {
      dev = std::numeric_limits<double>::infinity();
    }
    report.frequencies.push_back(f);
    report.predicted.push_back(p);
    report.std_errors.push_back(se);
    report.sigma_deviations.push_back(dev);
    report.max_sigma_deviation = std::max(report.max_sigma_deviation, dev);
  }
  return report;
}

struct SequenceReport {
  std::uint64_t sequences = 0;
  std::size_t length = 0;
  std::uint64_t violations = 0;  // sequences with two distinct detected outcomes
  std::uint64_t detected_records = 0;
  std::uint64_t undetected_records = 0;
  RngSpec rng;
};

/// Samples many independent repeated-measurement sequences; sequence i uses trial stream i.
inline SequenceReport run_sequences(const GeneralizedObservable& gobs, const PureState& psi,
                                    std::uint64_t sequences, std::size_t length, RngSpec rng,
                                    unsigned threads = 1) {
  if (sequences == 0) throw Error(ErrorCode::InvalidArgument, "sequence count must be >= 1");
  struct Tally {
    std::uint64_t violations = 0, detected = 0, undetected = 0;
  };
  std::vector<Tally> partial(std::max(1U, threads));
  detail::for_chunks(sequences, threads, [&](std::uint64_t begin, std::uint64_t end, unsigned slot) {
    Tally& tally = partial[slot];
    for (std::uint64_t i = begin; i < end; ++i) {
      TrialRng stream(rng, i);
      const auto seq = sample_sequence(gobs, psi, length, stream);
      if (has_distinct_detections(seq)) ++tally.violations;
      for (const auto& r : seq) ++(r.detected ? tally.detected : tally.undetected);
    }
  });
  SequenceReport report;
  report.sequences = sequences;
  report.length = length;
  report.rng = rng;
  for (const auto& t : partial) {
    report.violations += t.violations;
    report.detected_records += t.detected;
    report.undetected_records += t.undetected;
  }
  return report;
}

}  // namespace esr::sim
