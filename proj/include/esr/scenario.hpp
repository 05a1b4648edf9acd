#pragma once

// Scenario files: a versioned, line-oriented text format.
//
//   esr-scenario 1
//   dimension 2
//
//   [observable]
//   matrix 1,0 0,0            # one row per line, entries as re,im
//   matrix 0,0 -1,0
//   a0 0                      # optional, defaults to min(eigenvalue) - 1
//
//   [detection]
//   constant 0.8              # or: expectation <row>  (one line per row)
//
//   [state]
//   amplitudes 0.6,0 0,0.8
//
//   [apparatus]               # optional section
//   theta 0
//   phi 0
//
//   [experiment]
//   mode verify               # verify | sample | evolve
//   trials 100000
//   seed 42
//   stream 0
//   sequences 10000
//   length 5
//   event 1                   # repeatable; "event" alone is the empty event
//   event 0 1
//
// Instead of matrix rows the observable may list eigenpairs:
//   eigen <value> <amplitudes...>     # one line per basis vector
//
// '#' starts a comment. Unknown sections or keys are rejected.

#include <cstdint>
#include <cstdio>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "esr/core.hpp"

namespace esr::scenario {

inline constexpr int kFormatVersion = 1;

enum class Mode { Verify, Sample, Evolve };

inline std::string_view to_string(Mode mode) {
  switch (mode) {
    case Mode::Verify: return "verify";
    case Mode::Sample: return "sample";
    case Mode::Evolve: return "evolve";
  }
  return "verify";
}

struct ObservableSpec {
  enum class Kind { Matrix, Eigenpairs };
  Kind kind = Kind::Matrix;
  ComplexMatrix matrix;                                   // Kind::Matrix
  std::vector<std::pair<double, ComplexVector>> eigenpairs;  // Kind::Eigenpairs
  std::optional<double> a0;
};

struct DetectionSpec {
  enum class Kind { Constant, Expectation };
  Kind kind = Kind::Constant;
  double p = 1.0;
  ComplexMatrix b;
};

struct ExperimentSpec {
  Mode mode = Mode::Verify;
  std::uint64_t trials = 100000;
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;
  std::uint64_t sequences = 10000;
  std::uint64_t length = 5;
  std::vector<OutcomeEvent> events;
};

struct Scenario {
  Eigen::Index dimension = 0;
  ObservableSpec observable;
  DetectionSpec detection;
  ComplexVector state;
  double theta = 0.0;
  double phi = 0.0;
  ExperimentSpec experiment;

  GeneralizedObservable generalized_observable() const {
    QuantumObservable base = observable.kind == ObservableSpec::Kind::Matrix
                                 ? QuantumObservable::from_matrix(observable.matrix)
                                 : QuantumObservable::from_eigenpairs(observable.eigenpairs);
    DetectionModel model = detection.kind == DetectionSpec::Kind::Constant
                               ? DetectionModel::constant(detection.p)
                               : DetectionModel::expectation_valued(detection.b);
    return GeneralizedObservable(std::move(base), std::move(model), observable.a0);
  }

  PureState initial_state() const { return PureState::from_amplitudes(state); }
};

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

inline std::vector<std::string> split_ws(const std::string& s) {
  std::istringstream in(s);
  std::vector<std::string> out;
  for (std::string tok; in >> tok;) out.push_back(tok);
  return out;
}

[[noreturn]] inline void parse_fail(std::size_t line, const std::string& message) {
  throw Error(ErrorCode::ParseError, "line " + std::to_string(line) + ": " + message);
}

[[noreturn]] inline void validation_fail(const std::string& field, const std::string& message) {
  throw Error(ErrorCode::ValidationError, "field '" + field + "': " + message);
}

inline double parse_real(const std::string& tok, std::size_t line) {
  try {
    std::size_t used = 0;
    const double v = std::stod(tok, &used);
    if (used != tok.size()) parse_fail(line, "malformed number '" + tok + "'");
    if (!std::isfinite(v)) parse_fail(line, "non-finite number '" + tok + "'");
    return v;
  } catch (const std::invalid_argument&) {
    parse_fail(line, "malformed number '" + tok + "'");
  } catch (const std::out_of_range&) {
    parse_fail(line, "number out of range '" + tok + "'");
  }
}

inline std::uint64_t parse_count(const std::string& tok, std::size_t line) {
  if (tok.empty() || tok.find_first_not_of("0123456789") != std::string::npos) {
    parse_fail(line, "expected a nonnegative integer, got '" + tok + "'");
  }
  try {
    return std::stoull(tok);
  } catch (const std::out_of_range&) {
    parse_fail(line, "integer out of range '" + tok + "'");
  }
}

/// "re,im" or a bare real.
inline Complex parse_complex(const std::string& tok, std::size_t line) {
  const auto comma = tok.find(',');
  if (comma == std::string::npos) return {parse_real(tok, line), 0.0};
  return {parse_real(tok.substr(0, comma), line), parse_real(tok.substr(comma + 1), line)};
}

inline ComplexVector parse_complex_row(const std::vector<std::string>& toks, std::size_t first,
                                       Eigen::Index expected, std::size_t line) {
  if (expected <= 0) parse_fail(line, "'dimension' must be given before any vector or matrix data");
  if (static_cast<Eigen::Index>(toks.size() - first) != expected) {
    parse_fail(line, "expected " + std::to_string(expected) + " complex entries, got " +
                         std::to_string(toks.size() - first));
  }
  ComplexVector row(expected);
  for (Eigen::Index i = 0; i < expected; ++i) row[i] = parse_complex(toks[first + i], line);
  return row;
}

inline std::string format_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string format_complex(Complex z) { return format_real(z.real()) + "," + format_real(z.imag()); }

inline std::string format_row(const ComplexVector& row) {
  std::string out;
  for (Eigen::Index i = 0; i < row.size(); ++i) {
    if (i) out += ' ';
    out += format_complex(row[i]);
  }
  return out;
}

}  // namespace detail

/// Structural comparison of two scenarios, exact on every number.
inline bool operator==(const Scenario& a, const Scenario& b) {
  const auto same_matrix = [](const ComplexMatrix& x, const ComplexMatrix& y) {
    return x.rows() == y.rows() && x.cols() == y.cols() && x == y;
  };
  if (a.dimension != b.dimension || a.observable.kind != b.observable.kind || a.observable.a0 != b.observable.a0 ||
      !same_matrix(a.observable.matrix, b.observable.matrix) ||
      a.observable.eigenpairs.size() != b.observable.eigenpairs.size()) {
    return false;
  }
  for (std::size_t i = 0; i < a.observable.eigenpairs.size(); ++i) {
    if (a.observable.eigenpairs[i].first != b.observable.eigenpairs[i].first ||
        !same_matrix(a.observable.eigenpairs[i].second, b.observable.eigenpairs[i].second)) {
      return false;
    }
  }
  const auto& ea = a.experiment;
  const auto& eb = b.experiment;
  return a.detection.kind == b.detection.kind && a.detection.p == b.detection.p &&
         same_matrix(a.detection.b, b.detection.b) && same_matrix(a.state, b.state) && a.theta == b.theta &&
         a.phi == b.phi && ea.mode == eb.mode && ea.trials == eb.trials && ea.seed == eb.seed &&
         ea.stream == eb.stream && ea.sequences == eb.sequences && ea.length == eb.length &&
         ea.events == eb.events;
}

/// Checks every domain invariant by building the observable and the state.
/// Rethrows failures as ValidationError naming the offending field.
inline void validate(Scenario& s) {
  if (s.dimension <= 0) detail::validation_fail("dimension", "missing or nonpositive");
  if (s.state.size() == 0) detail::validation_fail("state", "missing [state] amplitudes");
  if (s.observable.kind == ObservableSpec::Kind::Matrix && s.observable.matrix.rows() != s.dimension) {
    detail::validation_fail("observable", "expected " + std::to_string(s.dimension) + " matrix rows, got " +
                                              std::to_string(s.observable.matrix.rows()));
  }
  if (s.detection.kind == DetectionSpec::Kind::Expectation && s.detection.b.rows() != s.dimension) {
    detail::validation_fail("detection", "expected " + std::to_string(s.dimension) + " expectation rows, got " +
                                             std::to_string(s.detection.b.rows()));
  }
  if (s.experiment.trials == 0) detail::validation_fail("experiment.trials", "must be >= 1");
  if (s.experiment.length == 0) detail::validation_fail("experiment.length", "must be >= 1");

  std::optional<QuantumObservable> base;
  try {
    base = s.observable.kind == ObservableSpec::Kind::Matrix
               ? QuantumObservable::from_matrix(s.observable.matrix)
               : QuantumObservable::from_eigenpairs(s.observable.eigenpairs);
  } catch (const Error& e) {
    detail::validation_fail("observable", e.what());
  }
  std::optional<DetectionModel> model;
  try {
    model = s.detection.kind == DetectionSpec::Kind::Constant ? DetectionModel::constant(s.detection.p)
                                                              : DetectionModel::expectation_valued(s.detection.b);
  } catch (const Error& e) {
    detail::validation_fail("detection", e.what());
  }
  std::optional<GeneralizedObservable> gobs;
  try {
    gobs.emplace(*base, *model, s.observable.a0);
  } catch (const Error& e) {
    detail::validation_fail("a0", e.what());
  }
  s.observable.a0 = gobs->a0();
  try {
    gobs->require_dim(PureState::from_amplitudes(s.state));
  } catch (const Error& e) {
    detail::validation_fail("state", e.what());
  }
  for (const auto& event : s.experiment.events) {
    for (double v : event.values()) {
      if (!gobs->is_no_registration(v) && !gobs->base().level_of(v)) {
        detail::validation_fail("experiment.event", "value " + detail::format_real(v) +
                                                        " is neither a0 nor an eigenvalue");
      }
    }
  }
}

inline Scenario parse_scenario(std::string_view text) {
  Scenario s;
  enum class Section { Top, Observable, Detection, State, Apparatus, Experiment };
  Section section = Section::Top;
  bool header_seen = false;
  bool have_observable_kind = false, have_detection = false;
  std::vector<ComplexVector> matrix_rows, detection_rows;

  std::istringstream in{std::string(text)};
  std::size_t line_no = 0;
  for (std::string raw; std::getline(in, raw);) {
    ++line_no;
    if (const auto hash = raw.find('#'); hash != std::string::npos) raw.erase(hash);
    const std::string line = detail::trim(raw);
    if (line.empty()) continue;

    if (!header_seen) {
      const auto toks = detail::split_ws(line);
      if (toks.size() != 2 || toks[0] != "esr-scenario") {
        detail::parse_fail(line_no, "expected header 'esr-scenario " + std::to_string(kFormatVersion) + "'");
      }
      if (toks[1] != std::to_string(kFormatVersion)) {
        detail::parse_fail(line_no, "unsupported format version '" + toks[1] + "'");
      }
      header_seen = true;
      continue;
    }

    if (line.front() == '[') {
      if (line.back() != ']') detail::parse_fail(line_no, "unterminated section header");
      const std::string name = detail::trim(std::string_view(line).substr(1, line.size() - 2));
      if (name == "observable") section = Section::Observable;
      else if (name == "detection") section = Section::Detection;
      else if (name == "state") section = Section::State;
      else if (name == "apparatus") section = Section::Apparatus;
      else if (name == "experiment") section = Section::Experiment;
      else detail::parse_fail(line_no, "unknown section [" + name + "]");
      continue;
    }

    const auto toks = detail::split_ws(line);
    const std::string& key = toks[0];
    const auto want_args = [&](std::size_t n) {
      if (toks.size() != n + 1) {
        detail::parse_fail(line_no, "'" + key + "' takes " + std::to_string(n) + " value(s)");
      }
    };

    switch (section) {
      case Section::Top:
        if (key == "dimension") {
          want_args(1);
          const auto n = detail::parse_count(toks[1], line_no);
          if (n == 0 || n > 64) detail::parse_fail(line_no, "dimension must be in 1..64");
          s.dimension = static_cast<Eigen::Index>(n);
        } else {
          detail::parse_fail(line_no, "unknown key '" + key + "' outside any section");
        }
        break;
      case Section::Observable:
        if (key == "matrix") {
          if (have_observable_kind && s.observable.kind != ObservableSpec::Kind::Matrix) {
            detail::parse_fail(line_no, "cannot mix 'matrix' and 'eigen' lines");
          }
          have_observable_kind = true;
          s.observable.kind = ObservableSpec::Kind::Matrix;
          matrix_rows.push_back(detail::parse_complex_row(toks, 1, s.dimension, line_no));
        } else if (key == "eigen") {
          if (have_observable_kind && s.observable.kind != ObservableSpec::Kind::Eigenpairs) {
            detail::parse_fail(line_no, "cannot mix 'matrix' and 'eigen' lines");
          }
          if (toks.size() < 2) detail::parse_fail(line_no, "'eigen' needs a value and a vector");
          have_observable_kind = true;
          s.observable.kind = ObservableSpec::Kind::Eigenpairs;
          s.observable.eigenpairs.emplace_back(detail::parse_real(toks[1], line_no),
                                               detail::parse_complex_row(toks, 2, s.dimension, line_no));
        } else if (key == "a0") {
          want_args(1);
          s.observable.a0 = detail::parse_real(toks[1], line_no);
        } else {
          detail::parse_fail(line_no, "unknown key '" + key + "' in [observable]");
        }
        break;
      case Section::Detection:
        if (key == "constant") {
          want_args(1);
          if (have_detection) detail::parse_fail(line_no, "detection model given twice");
          have_detection = true;
          s.detection.kind = DetectionSpec::Kind::Constant;
          s.detection.p = detail::parse_real(toks[1], line_no);
        } else if (key == "expectation") {
          if (have_detection && s.detection.kind != DetectionSpec::Kind::Expectation) {
            detail::parse_fail(line_no, "detection model given twice");
          }
          have_detection = true;
          s.detection.kind = DetectionSpec::Kind::Expectation;
          detection_rows.push_back(detail::parse_complex_row(toks, 1, s.dimension, line_no));
        } else {
          detail::parse_fail(line_no, "unknown key '" + key + "' in [detection]");
        }
        break;
      case Section::State:
        if (key == "amplitudes") {
          if (s.state.size() != 0) detail::parse_fail(line_no, "amplitudes given twice");
          s.state = detail::parse_complex_row(toks, 1, s.dimension, line_no);
        } else {
          detail::parse_fail(line_no, "unknown key '" + key + "' in [state]");
        }
        break;
      case Section::Apparatus:
        if (key == "theta") {
          want_args(1);
          s.theta = detail::parse_real(toks[1], line_no);
        } else if (key == "phi") {
          want_args(1);
          s.phi = detail::parse_real(toks[1], line_no);
        } else {
          detail::parse_fail(line_no, "unknown key '" + key + "' in [apparatus]");
        }
        break;
      case Section::Experiment: {
        auto& e = s.experiment;
        if (key == "mode") {
          want_args(1);
          if (toks[1] == "verify") e.mode = Mode::Verify;
          else if (toks[1] == "sample") e.mode = Mode::Sample;
          else if (toks[1] == "evolve") e.mode = Mode::Evolve;
          else detail::parse_fail(line_no, "unknown mode '" + toks[1] + "'");
        } else if (key == "trials") {
          want_args(1);
          e.trials = detail::parse_count(toks[1], line_no);
        } else if (key == "seed") {
          want_args(1);
          e.seed = detail::parse_count(toks[1], line_no);
        } else if (key == "stream") {
          want_args(1);
          e.stream = detail::parse_count(toks[1], line_no);
        } else if (key == "sequences") {
          want_args(1);
          e.sequences = detail::parse_count(toks[1], line_no);
        } else if (key == "length") {
          want_args(1);
          e.length = detail::parse_count(toks[1], line_no);
        } else if (key == "event") {
          std::vector<double> values;
          for (std::size_t i = 1; i < toks.size(); ++i) values.push_back(detail::parse_real(toks[i], line_no));
          e.events.emplace_back(std::move(values));
        } else {
          detail::parse_fail(line_no, "unknown key '" + key + "' in [experiment]");
        }
        break;
      }
    }
  }
  if (!header_seen) detail::parse_fail(line_no, "empty scenario, missing header");
  if (!have_observable_kind) detail::validation_fail("observable", "missing [observable] data");
  if (!have_detection) detail::validation_fail("detection", "missing [detection] model");

  const auto stack = [](const std::vector<ComplexVector>& rows) {
    ComplexMatrix m(static_cast<Eigen::Index>(rows.size()), rows.empty() ? 0 : rows.front().size());
    for (std::size_t i = 0; i < rows.size(); ++i) m.row(static_cast<Eigen::Index>(i)) = rows[i].transpose();
    return m;
  };
  s.observable.matrix = stack(matrix_rows);
  s.detection.b = stack(detection_rows);
  validate(s);
  return s;
}

/// Canonical text form: every default written out, numbers at full precision.
inline std::string serialize_scenario(const Scenario& s) {
  std::ostringstream out;
  out << "esr-scenario " << kFormatVersion << "\n";
  out << "dimension " << s.dimension << "\n\n[observable]\n";
  if (s.observable.kind == ObservableSpec::Kind::Matrix) {
    for (Eigen::Index i = 0; i < s.observable.matrix.rows(); ++i) {
      out << "matrix " << detail::format_row(s.observable.matrix.row(i).transpose()) << "\n";
    }
  } else {
    for (const auto& [value, vec] : s.observable.eigenpairs) {
      out << "eigen " << detail::format_real(value) << " " << detail::format_row(vec) << "\n";
    }
  }
  if (s.observable.a0) out << "a0 " << detail::format_real(*s.observable.a0) << "\n";
  out << "\n[detection]\n";
  if (s.detection.kind == DetectionSpec::Kind::Constant) {
    out << "constant " << detail::format_real(s.detection.p) << "\n";
  } else {
    for (Eigen::Index i = 0; i < s.detection.b.rows(); ++i) {
      out << "expectation " << detail::format_row(s.detection.b.row(i).transpose()) << "\n";
    }
  }
  out << "\n[state]\namplitudes " << detail::format_row(s.state) << "\n";
  out << "\n[apparatus]\ntheta " << detail::format_real(s.theta) << "\nphi " << detail::format_real(s.phi) << "\n";
  const auto& e = s.experiment;
  out << "\n[experiment]\nmode " << to_string(e.mode) << "\ntrials " << e.trials << "\nseed " << e.seed
      << "\nstream " << e.stream << "\nsequences " << e.sequences << "\nlength " << e.length << "\n";
  for (const auto& event : e.events) {
    out << "event";
    for (double v : event.values()) out << " " << detail::format_real(v);
    out << "\n";
  }
  return out.str();
}

/// FNV-1a over the canonical form, as 16 hex digits.
inline std::string scenario_digest(const Scenario& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : serialize_scenario(s)) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace esr::scenario
