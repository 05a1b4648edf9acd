// esr-sim: command-line front end.
//
//   esr-sim verify <file>  [--tol T] [--out PATH]
//   esr-sim sample <file>  [--trials N] [--seed S] [--threads K] [--sigma Z] [--out PATH]
//   esr-sim evolve <file>  [--tol T] [--out PATH]
//   esr-sim run    <file>  (mode taken from the scenario's [experiment] block)
//
// The human table goes to stdout. The machine record (one JSON object per
// line) is appended to --out, else to $ESR_OUTPUT_DIR/<stem>.<mode>.jsonl,
// else printed to stdout after the table.
//
// Exit status: 0 all checks passed, 1 a check failed, 2 usage, parse or
// validation error.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "CLI11.hpp"

#include "esr/esr.hpp"

namespace {

constexpr int kExitPass = 0;
constexpr int kExitCheckFailure = 1;
constexpr int kExitUsage = 2;

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw esr::Error(esr::ErrorCode::ParseError, "cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::filesystem::path record_path(const std::string& out, const std::string& scenario_path, std::string_view mode) {
  if (!out.empty()) return out;
  if (const char* dir = std::getenv("ESR_OUTPUT_DIR"); dir != nullptr && *dir != '\0') {
    const std::string stem = std::filesystem::path(scenario_path).stem().string();
    return std::filesystem::path(dir) / (stem + "." + std::string(mode) + ".jsonl");
  }
  return {};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Simulator and checker for generalized observables with a no-registration outcome"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(esr::commands::kToolVersion));

  esr::commands::CommandOptions opts;
  std::string file;
  std::string out;
  std::uint64_t trials = 0;
  std::uint64_t seed = 0;

  const auto add_common = [&](CLI::App* sub) {
    sub->add_option("file", file, "Scenario file")->required()->check(CLI::ExistingFile);
    sub->add_option("--tol", opts.tol, "Tolerance for algebraic checks")->capture_default_str();
    sub->add_option("--sigma", opts.sigma, "Tolerance for statistical checks, in standard errors")
        ->capture_default_str();
    sub->add_option("--out", out, "Append the machine-readable record to this file");
  };

  auto* verify = app.add_subcommand("verify", "Run the invariant suite on a scenario");
  auto* sample = app.add_subcommand("sample", "Sample measurements and compare frequencies with predictions");
  auto* evolve = app.add_subcommand("evolve", "Couple to the apparatus and compare the reduced state");
  auto* run = app.add_subcommand("run", "Run the mode named in the scenario");
  for (auto* sub : {verify, sample, evolve, run}) add_common(sub);
  for (auto* sub : {sample, run}) {
    sub->add_option("--trials", trials, "Number of trials (overrides the scenario)");
    sub->add_option("--seed", seed, "RNG seed (overrides the scenario)");
    sub->add_option("--threads", opts.threads, "Worker threads; results do not depend on this")
        ->check(CLI::Range(1U, 256U));
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }
  for (auto* sub : {sample, run}) {
    if (sub->parsed() && sub->count("--trials")) opts.trials = trials;
    if (sub->parsed() && sub->count("--seed")) opts.seed = seed;
  }
  if (!(opts.tol >= 0.0) || !(opts.sigma >= 0.0)) {
    std::cerr << "error: --tol and --sigma must be nonnegative\n";
    return kExitUsage;
  }

  esr::commands::ResultRecord record;
  try {
    const esr::scenario::Scenario scenario = esr::scenario::parse_scenario(read_file(file));
    if (verify->parsed()) {
      record = esr::commands::cmd_verify(scenario, opts);
    } else if (sample->parsed()) {
      record = esr::commands::cmd_sample(scenario, opts);
    } else if (evolve->parsed()) {
      record = esr::commands::cmd_evolve(scenario, opts);
    } else {
      record = esr::commands::run(scenario, opts);
    }
  } catch (const esr::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }

  std::cout << record.table();
  const std::string mode = record.json.value("mode", std::string("verify"));
  const std::filesystem::path path = record_path(out, file, mode);
  if (path.empty()) {
    std::cout << record.json_line() << "\n";
  } else {
    std::ofstream sink(path, std::ios::app);
    if (!sink) {
      std::cerr << "error: cannot write record to '" << path.string() << "'\n";
      return kExitUsage;
    }
    sink << record.json_line() << "\n";
  }
  return record.passed() ? kExitPass : kExitCheckFailure;
}
