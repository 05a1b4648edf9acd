#pragma once

// The verify / sample / evolve drivers behind the command-line tool. Each
// returns a ResultRecord: a list of named checks plus a self-describing JSON
// record suitable for line-delimited output.

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "esr/apparatus.hpp"
#include "esr/scenario.hpp"
#include "esr/sim.hpp"

namespace esr::commands {

inline constexpr std::string_view kToolName = "esr-sim";
inline constexpr std::string_view kToolVersion = "1.0.0";

struct CommandOptions {
  double tol = 1e-10;
  double sigma = 4.0;
  std::optional<std::uint64_t> trials;
  std::optional<std::uint64_t> seed;
  unsigned threads = 1;
};

struct CheckResult {
  std::string name;
  std::string relation;  // the identity being checked
  double deviation = 0.0;
  double tolerance = 0.0;
  bool passed = false;
  std::string detail;
};

struct ResultRecord {
  std::vector<CheckResult> checks;
  nlohmann::ordered_json json;

  bool passed() const {
    for (const auto& c : checks) {
      if (!c.passed) return false;
    }
    return true;
  }

  std::vector<std::string> failed_checks() const {
    std::vector<std::string> out;
    for (const auto& c : checks) {
      if (!c.passed) out.push_back(c.name);
    }
    return out;
  }

  /// Fixed-width human-readable summary of the checks.
  std::string table() const {
    std::ostringstream out;
    char line[256];
    std::snprintf(line, sizeof line, "%-34s %-12s %-10s %s\n", "check", "deviation", "tolerance", "result");
    out << line;
    for (const auto& c : checks) {
      std::snprintf(line, sizeof line, "%-34s %-12.3e %-10.1e %s", c.name.c_str(), c.deviation, c.tolerance,
                    c.passed ? "pass" : "FAIL");
      out << line;
      if (!c.passed) out << "  [" << c.relation << "]" << (c.detail.empty() ? "" : " " + c.detail);
      out << "\n";
    }
    out << (passed() ? "all checks passed\n" : "some checks FAILED\n");
    return out.str();
  }

  std::string json_line() const { return json.dump(); }
};

namespace detail {

class CheckRunner {
 public:
  /// Evaluates a deviation; library errors become failures carrying the message.
  void run(const std::string& name, const std::string& relation, double tolerance,
           const std::function<double()>& deviation) {
    CheckResult c{name, relation, 0.0, tolerance, false, {}};
    try {
      c.deviation = deviation();
      c.passed = c.deviation <= tolerance;
    } catch (const Error& e) {
      c.deviation = std::numeric_limits<double>::infinity();
      c.detail = e.what();
    }
    checks_.push_back(std::move(c));
  }

  void record(CheckResult c) { checks_.push_back(std::move(c)); }

  std::vector<CheckResult> take() { return std::move(checks_); }

 private:
  std::vector<CheckResult> checks_;
};

inline nlohmann::ordered_json checks_json(const std::vector<CheckResult>& checks) {
  auto arr = nlohmann::ordered_json::array();
  for (const auto& c : checks) {
    nlohmann::ordered_json j;
    j["name"] = c.name;
    j["relation"] = c.relation;
    j["deviation"] = std::isfinite(c.deviation) ? nlohmann::ordered_json(c.deviation) : nlohmann::ordered_json("inf");
    j["tolerance"] = c.tolerance;
    j["pass"] = c.passed;
    if (!c.detail.empty()) j["detail"] = c.detail;
    arr.push_back(std::move(j));
  }
  return arr;
}

inline nlohmann::ordered_json amplitudes_json(const ComplexVector& v) {
  auto arr = nlohmann::ordered_json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back({v[i].real(), v[i].imag()});
  return arr;
}

inline nlohmann::ordered_json matrix_json(const ComplexMatrix& m) {
  auto rows = nlohmann::ordered_json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) rows.push_back(amplitudes_json(m.row(i).transpose()));
  return rows;
}

inline nlohmann::ordered_json record_header(std::string_view mode, const std::string& digest) {
  nlohmann::ordered_json j;
  j["tool"] = kToolName;
  j["version"] = kToolVersion;
  j["rng"] = sim::kRngAlgorithm;
  j["mode"] = mode;
  j["scenario_digest"] = digest;
  return j;
}

inline ResultRecord finish(nlohmann::ordered_json json, std::vector<CheckResult> checks) {
  ResultRecord r;
  r.checks = std::move(checks);
  json["checks"] = checks_json(r.checks);
  json["passed"] = r.passed();
  r.json = std::move(json);
  return r;
}

/// Every subset of the outcome set when small, otherwise singletons plus extras.
inline std::vector<OutcomeEvent> probe_events(const GeneralizedObservable& gobs,
                                              const std::vector<OutcomeEvent>& extra) {
  std::vector<OutcomeEvent> events;
  const std::size_t n = gobs.outcome_count();
  if (n <= 10) {
    for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << n); ++mask) events.push_back(gobs.event_from_mask(mask));
  } else {
    events.push_back(OutcomeEvent{});
    events.push_back(gobs.all_outcomes());
    for (std::size_t k = 0; k < n; ++k) events.push_back(OutcomeEvent{gobs.outcome(k)});
  }
  events.insert(events.end(), extra.begin(), extra.end());
  return events;
}

}  // namespace detail

/// Full invariant suite for one observable and state.
inline ResultRecord verify(const GeneralizedObservable& gobs, const PureState& psi,
                           const std::vector<OutcomeEvent>& scenario_events, const CommandOptions& opts,
                           const std::string& digest = "unspecified") {
  const double tol = opts.tol;
  detail::CheckRunner checks;
  const auto events = detail::probe_events(gobs, scenario_events);
  const Eigen::Index n = gobs.dim();

  PovAxiomReport pov;
  checks.run("pov.completeness", "T(Xi_0) = I", tol, [&] {
    pov = verify_pov_axioms(gobs, psi, 64, 0);
    return pov.completeness;
  });
  checks.run("pov.positivity", "0 <= T(X) <= I", tol, [&] { return pov.positivity; });
  checks.run("pov.additivity", "T(U X_i) = sum_i T(X_i)", tol, [&] { return pov.additivity; });
  checks.run("pov.commutativity", "T(X) T(Y) = T(Y) T(X)", tol, [&] { return pov.commutativity; });

  checks.run("probability.total", "sum_k p_t({a_k}) = 1", tol, [&] {
    double total = 0.0;
    for (std::size_t k = 0; k < gobs.outcome_count(); ++k) {
      total += overall_probability(gobs, psi, OutcomeEvent{gobs.outcome(k)});
    }
    return std::abs(total - 1.0);
  });
  checks.run("probability.trace_form", "<psi|T(X)|psi> = Tr[W_psi T(X)]", tol, [&] {
    double worst = 0.0;
    for (const auto& e : events) {
      worst = std::max(worst, std::abs(overall_probability(gobs, psi, e) - overall_probability_density(gobs, psi, e)));
    }
    return worst;
  });
  checks.run("probability.factorization", "p_t(X) = p_d p(X) for a0 not in X", tol, [&] {
    const double pd = detection_probability(gobs, psi);
    double worst = 0.0;
    for (const auto& e : events) {
      if (gobs.select(e).no_registration) continue;
      worst = std::max(worst, std::abs(overall_probability(gobs, psi, e) - pd * conditional_probability(gobs, psi, e)));
    }
    return worst;
  });
  checks.run("probability.no_registration", "p_t({a0}) = 1 - p_d", tol, [&] {
    return std::abs(overall_probability(gobs, psi, OutcomeEvent{gobs.a0()}) - (1.0 - detection_probability(gobs, psi)));
  });
  checks.run("probability.monotonicity", "X subset Y => p_t(X) <= p_t(Y)", tol, [&] {
    double worst = 0.0;
    const std::size_t count = gobs.outcome_count();
    if (count > 10) return 0.0;
    for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << count); ++mask) {
      const double py = overall_probability(gobs, psi, gobs.event_from_mask(mask));
      for (std::size_t k = 0; k < count; ++k) {
        const std::uint64_t bit = std::uint64_t{1} << k;
        if (!(mask & bit)) continue;
        const double px = overall_probability(gobs, psi, gobs.event_from_mask(mask & ~bit));
        worst = std::max(worst, px - py);
      }
    }
    return worst;
  });
  checks.run("probability.qm_recovery", "p_d = 1 => p_t(X) = <psi|P(X \\ {a0})|psi>", tol, [&] {
    const GeneralizedObservable sharp(gobs.base(), DetectionModel::constant(1.0), gobs.a0());
    double worst = 0.0;
    for (const auto& e : events) {
      const EventSelection sel = sharp.select(e);
      const double born = psi.expectation(pv_projector(sharp.base(), sel));
      worst = std::max(worst, std::abs(overall_probability(sharp, psi, e) - born));
    }
    return worst;
  });

  const double pd = detection_probability(gobs, psi);
  const ComplexMatrix w = numerics::outer(psi.amplitudes(), psi.amplitudes());
  const ComplexVector psi_fixed = fix_global_phase(psi.amplitudes());

  checks.run("gpp.no_registration", "X = {a0}: psi_F = psi", tol, [&] {
    if (1.0 - pd < kZeroBranchNorm) return 0.0;
    return (post_measurement_state_yes(gobs, psi, OutcomeEvent{gobs.a0()}).amplitudes() - psi_fixed).norm();
  });
  checks.run("gpp.lueders", "a0 not in X: psi_F = P(X) psi / ||P(X) psi||", tol, [&] {
    double worst = 0.0;
    for (const auto& e : events) {
      const EventSelection sel = gobs.select(e);
      if (sel.no_registration) continue;
      const ComplexVector v = pv_projector(gobs.base(), sel) * psi.amplitudes();
      if (pd * v.norm() < kZeroBranchNorm) continue;
      const ComplexVector expected = fix_global_phase(v / v.norm());
      worst = std::max(worst, (post_measurement_state_yes(gobs, psi, e).amplitudes() - expected).norm());
    }
    return worst;
  });
  checks.run("gpp.mixed", "a0 in X: psi_F ~ (1 - p_d) psi + p_d P(X) psi", tol, [&] {
    double worst = 0.0;
    for (const auto& e : events) {
      const EventSelection sel = gobs.select(e);
      if (!sel.no_registration) continue;
      const ComplexVector v = (1.0 - pd) * psi.amplitudes() + pd * (pv_projector(gobs.base(), sel) * psi.amplitudes());
      if (v.norm() < kZeroBranchNorm) continue;
      const ComplexVector expected = fix_global_phase(v / v.norm());
      worst = std::max(worst, (post_measurement_state_yes(gobs, psi, e).amplitudes() - expected).norm());
    }
    return worst;
  });
  checks.run("gpp.density_form", "W_F = T W T^dagger / Tr[W T^dagger T]", tol, [&] {
    double worst = 0.0;
    for (const auto& e : events) {
      if ((effect(gobs, psi, e).op * psi.amplitudes()).norm() < kZeroBranchNorm) continue;
      const DensityOperator wf = post_measurement_density(gobs, psi, e);
      worst = std::max(worst, (wf.matrix() - to_density(post_measurement_state_yes(gobs, psi, e)).matrix()).norm());
    }
    return worst;
  });
  checks.run("gpp.complement", "no outcome on X = yes outcome on Xi_0 \\ X", tol, [&] {
    double worst = 0.0;
    for (const auto& e : events) {
      const OutcomeEvent c = gobs.complement(e);
      if ((effect(gobs, psi, c).op * psi.amplitudes()).norm() < kZeroBranchNorm) continue;
      worst = std::max(worst, (post_measurement_state_no(gobs, psi, e).amplitudes() -
                               post_measurement_state_yes(gobs, psi, c).amplitudes())
                                  .norm());
    }
    return worst;
  });

  std::optional<MeasurementOperatorFamily> family;
  checks.run("family.completeness", "sum_k M_k^dagger M_k = I", tol, [&] {
    family = measurement_operators(gobs, psi);
    return family->completeness_defect();
  });
  checks.run("family.commutation", "[M_k, M_l] = 0", tol, [&] { return family.value().commutation_defect(); });
  checks.run("family.positivity", "M_k = M_k^dagger >= 0", tol, [&] { return family.value().positivity_defect(); });
  checks.run("family.probability", "<psi|M_k^dagger M_k|psi> = <psi|T({a_k})|psi>", tol, [&] {
    double worst = 0.0;
    for (std::size_t k = 0; k < family.value().size(); ++k) {
      const double via_family = outcome_probability(*family, k);
      const double via_effect = overall_probability(gobs, psi, OutcomeEvent{gobs.outcome(k)});
      worst = std::max({worst, std::abs(via_family - via_effect),
                        std::abs(outcome_probability_density(*family, k) - via_effect)});
    }
    return worst;
  });
  checks.run("family.state_update", "psi_k = M_k psi / sqrt(p_k) = GPP yes state on {a_k}", tol, [&] {
    double worst = 0.0;
    for (std::size_t k = 0; k < family.value().size(); ++k) {
      if (outcome_probability(*family, k) <= kZeroBranchNorm) continue;
      const ComplexVector via_family = state_after_outcome(*family, k).amplitudes();
      const ComplexVector via_gpp = post_measurement_state_yes(gobs, psi, OutcomeEvent{gobs.outcome(k)}).amplitudes();
      worst = std::max(worst, (via_family - via_gpp).norm());
      worst = std::max(worst, std::abs((family->operators[k] * psi.amplitudes()).squaredNorm() -
                                       outcome_probability(*family, k)));
    }
    return worst;
  });
  checks.run("nonselective.two_forms", "sum_k p_k W_k = sum_k M_k W M_k^dagger", tol, [&] {
    return (nonselective_state_weighted(family.value()).matrix() - nonselective_state(*family).matrix()).norm();
  });
  checks.run("nonselective.density", "Tr W = 1, W >= 0", tol, [&] {
    const DensityOperator ns = nonselective_state(family.value());
    return std::max(std::abs(ns.trace() - 1.0), std::max(0.0, -numerics::min_eigenvalue(ns.matrix())));
  });

  const bool nondegenerate = gobs.base().is_nondegenerate();
  if (nondegenerate) {
    checks.run("nonselective.closed_form", "W = (1-p_d) W_psi + p_d sum |c_k|^2 |a_k><a_k|", tol, [&] {
      return (nonselective_state(family.value()).matrix() - decohered_mixture(gobs, psi).matrix()).norm();
    });
    checks.run("repeatability", "after a_n, P(a_m) = 0 for 0 != m != n; after a0, psi unchanged", tol, [&] {
      double worst = 0.0;
      for (std::size_t k = 0; k < family.value().size(); ++k) {
        if (outcome_probability(*family, k) <= kZeroBranchNorm) continue;
        const PureState after = state_after_outcome(*family, k);
        if (k == 0) {
          worst = std::max(worst, (after.amplitudes() - psi_fixed).norm());
          continue;
        }
        const MeasurementOperatorFamily again = measurement_operators(gobs, after);
        for (std::size_t m = 1; m < again.size(); ++m) {
          if (m != k) worst = std::max(worst, outcome_probability(again, m));
        }
      }
      return worst;
    });
    checks.run("apparatus.reduced_state", "Tr_M W_C = sum_k M_k W M_k^dagger", tol, [&] {
      const ApparatusModel app = ApparatusModel::for_observable(gobs);
      const CompoundState cs = couple_and_evolve(gobs, psi, app);
      return (reduced_object_state(cs, n).matrix() - nonselective_state(family.value()).matrix()).norm();
    });
  }

  auto json = detail::record_header("verify", digest);
  json["dimension"] = n;
  json["a0"] = gobs.a0();
  json["detection_probability"] = pd;
  json["nondegenerate"] = nondegenerate;
  auto per_event = nlohmann::ordered_json::array();
  for (const auto& e : scenario_events) {
    nlohmann::ordered_json j;
    j["event"] = e.values();
    try {
      j["probability"] = overall_probability(gobs, psi, e);
      j["probability_no"] = overall_probability(gobs, psi, gobs.complement(e));
      if ((effect(gobs, psi, e).op * psi.amplitudes()).norm() >= kZeroBranchNorm) {
        j["post_state_yes"] = detail::amplitudes_json(post_measurement_state_yes(gobs, psi, e).amplitudes());
      }
      if ((effect(gobs, psi, gobs.complement(e)).op * psi.amplitudes()).norm() >= kZeroBranchNorm) {
        j["post_state_no"] = detail::amplitudes_json(post_measurement_state_no(gobs, psi, e).amplitudes());
      }
    } catch (const Error& err) {
      j["error"] = err.what();
    }
    per_event.push_back(std::move(j));
  }
  json["events"] = std::move(per_event);
  return detail::finish(std::move(json), checks.take());
}

inline ResultRecord cmd_verify(const scenario::Scenario& s, const CommandOptions& opts) {
  return verify(s.generalized_observable(), s.initial_state(), s.experiment.events, opts, scenario::scenario_digest(s));
}

inline ResultRecord cmd_sample(const scenario::Scenario& s, const CommandOptions& opts) {
  const GeneralizedObservable gobs = s.generalized_observable();
  const PureState psi = s.initial_state();
  const sim::RngSpec rng{opts.seed.value_or(s.experiment.seed), s.experiment.stream};
  const std::uint64_t trials = opts.trials.value_or(s.experiment.trials);
  if (trials == 0) throw Error(ErrorCode::InvalidArgument, "trials must be >= 1");

  const sim::RunReport report = sim::run_experiment(gobs, psi, trials, rng, opts.threads);
  detail::CheckRunner checks;
  for (std::size_t k = 0; k < report.outcomes.size(); ++k) {
    checks.record({"frequency[" + scenario::detail::format_real(report.outcomes[k]) + "]",
                   "|freq - <psi|M_k^dagger M_k|psi>| <= sigma * se", report.sigma_deviations[k], opts.sigma,
                   report.sigma_deviations[k] <= opts.sigma, {}});
  }

  auto json = detail::record_header("sample", scenario::scenario_digest(s));
  json["seed"] = rng.seed;
  json["stream"] = rng.stream_id;
  json["trials"] = trials;
  json["outcomes"] = report.outcomes;
  json["counts"] = report.counts;
  json["frequencies"] = report.frequencies;
  json["predicted"] = report.predicted;
  json["std_errors"] = report.std_errors;
  json["max_sigma_deviation"] = report.max_sigma_deviation;

  if (s.experiment.sequences > 0 && gobs.base().is_nondegenerate()) {
    // Sequences use their own stream so they never reuse the single-shot draws.
    const sim::RngSpec seq_rng{rng.seed, rng.stream_id + 1};
    const sim::SequenceReport seq = sim::run_sequences(gobs, psi, s.experiment.sequences,
                                                       static_cast<std::size_t>(s.experiment.length), seq_rng,
                                                       opts.threads);
    checks.record({"repeatability.sequences", "no sequence holds two distinct detected outcomes",
                   static_cast<double>(seq.violations), 0.0, seq.violations == 0, {}});
    nlohmann::ordered_json j;
    j["count"] = seq.sequences;
    j["length"] = seq.length;
    j["stream"] = seq_rng.stream_id;
    j["violations"] = seq.violations;
    j["detected_records"] = seq.detected_records;
    j["undetected_records"] = seq.undetected_records;
    json["sequences"] = std::move(j);
  }
  return detail::finish(std::move(json), checks.take());
}

inline ResultRecord cmd_evolve(const scenario::Scenario& s, const CommandOptions& opts) {
  const GeneralizedObservable gobs = s.generalized_observable();
  const PureState psi = s.initial_state();
  if (!gobs.base().is_nondegenerate()) {
    throw Error(ErrorCode::DegenerateSpectrum,
                "evolve needs a nondegenerate observable: the object-apparatus coupling assigns one pointer "
                "state per eigenvector");
  }
  const Eigen::Index n = gobs.dim();
  const ApparatusModel app = ApparatusModel::for_observable(gobs, s.theta, s.phi);
  const CompoundState cs = couple_and_evolve(gobs, psi, app);
  const DensityOperator wc = compound_density(cs);
  const DensityOperator reduced = reduced_object_state(cs, n);
  const DensityOperator nonselective = nonselective_state(measurement_operators(gobs, psi));
  const DensityOperator closed_form = decohered_mixture(gobs, psi);

  detail::CheckRunner checks;
  checks.run("evolve.norm", "|| evolved compound state || = 1", 1e-12, [&] { return std::abs(cs.norm() - 1.0); });
  checks.run("evolve.purity", "Tr W_C^2 = 1", opts.tol, [&] { return std::abs(wc.purity() - 1.0); });
  checks.run("evolve.reduced_vs_nonselective", "Tr_M W_C = sum_k M_k W M_k^dagger", opts.tol,
             [&] { return (reduced.matrix() - nonselective.matrix()).norm(); });
  checks.run("evolve.reduced_vs_closed_form", "Tr_M W_C = (1-p_d) W_psi + p_d sum |c_k|^2 |a_k><a_k|", opts.tol,
             [&] { return (reduced.matrix() - closed_form.matrix()).norm(); });
  checks.run("evolve.phase_independence", "Tr_M W_C independent of theta, phi", opts.tol, [&] {
    const double phases[] = {0.0, std::numbers::pi / 3.0, std::numbers::pi, 1.7};
    double worst = 0.0;
    for (double theta : phases) {
      for (double phi : phases) {
        const CompoundState other = couple_and_evolve(gobs, psi, ApparatusModel::for_observable(gobs, theta, phi));
        worst = std::max(worst, (reduced_object_state(other, n).matrix() - reduced.matrix()).norm());
      }
    }
    return worst;
  });

  auto json = detail::record_header("evolve", scenario::scenario_digest(s));
  json["theta"] = s.theta;
  json["phi"] = s.phi;
  json["detection_probability"] = detection_probability(gobs, psi);
  json["dim_object"] = n;
  json["dim_pointer"] = app.dim_pointer;
  json["compound_amplitudes"] = detail::amplitudes_json(cs.amplitudes);
  json["reduced_density"] = detail::matrix_json(reduced.matrix());
  json["deviation_from_closed_form"] = (reduced.matrix() - closed_form.matrix()).norm();
  return detail::finish(std::move(json), checks.take());
}

inline ResultRecord run(const scenario::Scenario& s, const CommandOptions& opts) {
  switch (s.experiment.mode) {
    case scenario::Mode::Verify: return cmd_verify(s, opts);
    case scenario::Mode::Sample: return cmd_sample(s, opts);
    case scenario::Mode::Evolve: return cmd_evolve(s, opts);
  }
  return cmd_verify(s, opts);
}

}  // namespace esr::commands
