// SPDX-License-Identifier: Apache-2.0
//
// Experiment orchestration: run configuration, artifact writers, algorithm
// comparison and the bundled corpus.

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "mdop/decomposition.hpp"

namespace mdop {

enum class Algorithm { Mpc, Rh, Monolithic, Relaxation, GaussSeidel };

const char* to_string(Algorithm a);
/// Throws std::invalid_argument for unknown names.
Algorithm parse_algorithm(const std::string& name);

/// Named synthetic profile: `slow` (strong diurnal swing, little noise),
/// `fast` (weak swing, strong step-to-step noise), or an explicit
/// `daily=<a>,noise=<b>` pair.
struct SynthPreset {
  std::string name;
  double daily_amplitude = 0.0;
  double noise_amplitude = 0.0;
};

SynthPreset parse_synth(const std::string& text);

struct RunConfig {
  std::filesystem::path instance;
  std::filesystem::path loads;  // CSV; empty selects the synthetic profile
  std::string synth = "slow";
  std::optional<int> horizon_days;  // with a loads file, truncates it; defaults to 1 for synth
  std::optional<int> dt_minutes;  // defaults to the instance step
  Algorithm algorithm = Algorithm::Mpc;
  int stages = 6;
  int iterations = 3;
  DualMode dual_mode = DualMode::DualInit;
  double gap_tol = 1e-4;
  double time_limit = 600.0;  // per stage MIP
  std::uint64_t seed = 1;
  int gs_max_sweeps = 200;
  double gs_tol = 1e-5;
  std::filesystem::path out;  // empty writes nothing
};

/// Throws std::invalid_argument for inconsistent settings.
void validate_config(const RunConfig& cfg);

struct EfficiencyTightness {
  int active = 0;  // battery steps with |raw| > 1e-6
  int tight = 0;   // of those, on the charging or discharging curve within 1e-6
  double worst = 0.0;
  double fraction() const { return active == 0 ? 1.0 : static_cast<double>(tight) / active; }
};

/// Checks that each active battery step sits on its efficiency curve.
EfficiencyTightness efficiency_tightness(const NetworkInstance& inst, const PlanSolution& plan, double tol = 1e-6);

struct RunReport {
  RunConfig config;
  NetworkInstance instance;
  LoadProfile loads;
  std::optional<PlanSolution> plan;  // absent for the relaxation and Gauss-Seidel modes
  double lower_bound = std::numeric_limits<double>::quiet_NaN();
  double objective = std::numeric_limits<double>::quiet_NaN();
  double relative_gap = std::numeric_limits<double>::quiet_NaN();
  double init_seconds = 0.0;
  std::vector<double> iteration_seconds;
  double total_seconds = 0.0;
  std::optional<GaussSeidelResult> gauss_seidel;
  FeasibilityReport feasibility;
  EfficiencyTightness tightness;
  std::vector<std::string> warnings;
};

/// Failure classes mapped to distinct CLI exit codes.
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
class SolveError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
class InfeasibleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Loads the instance and profile named by the config.
void load_inputs(const RunConfig& cfg, NetworkInstance& inst, LoadProfile& loads);

/// Executes the configured algorithm and writes artifacts when cfg.out is set.
RunReport run(const RunConfig& cfg);

/// summary.json, dispatch.csv, soc.csv, stage_costs.csv, soc_total.csv,
/// duals.csv and report.txt.
void write_artifacts(const RunReport& report, const std::filesystem::path& dir);
std::string render_report(const RunReport& report);
std::string summary_json(const RunReport& report);

struct CompareRow {
  std::string label;
  double objective = 0.0;
  double relative_gap = 0.0;
  double shed_mw = 0.0;
  std::vector<double> stage_costs;
};

/// "LS (0.35)" when shed exceeds 1e-6 MW, otherwise the gap in percent.
std::string gap_cell(const CompareRow& row);

/// Runs every config and tabulates them. All configs must share the
/// instance and load source; throws std::invalid_argument otherwise.
std::vector<CompareRow> compare(const std::vector<RunConfig>& configs);
std::vector<CompareRow> compare_reports(const std::vector<RunReport>& reports);
std::string compare_csv(const std::vector<CompareRow>& rows);
std::string compare_text(const std::vector<CompareRow>& rows);

// Bundled corpus.
NetworkInstance micro2_instance();
LoadProfile micro2_loads(const NetworkInstance& inst, int steps);
inline constexpr int kMicro2Steps[] = {4, 5, 6};
NetworkInstance ieee13_instance();

/// Writes micro2/ (network.json plus one loads file per variant) and
/// ieee13/ (network.json plus 1-day and 7-day slow and fast profiles).
void gen_corpus(const std::filesystem::path& out_dir, std::uint64_t seed);

}  // namespace mdop
