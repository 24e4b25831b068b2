// SPDX-License-Identifier: Apache-2.0
//
// MDOP as a structured MIQCQP over a window of time steps.
//
// A window model owns the operation variables of steps [start, end), the
// build variables, and a block of "initial state" columns pinned by one
// equality row each (the coupling rows). Prices on the terminal state enter
// the objective linearly.

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "mdop/convex.hpp"
#include "mdop/instance.hpp"

namespace mdop {

enum class VarKind : std::uint8_t {
  BuildBattery,    // z_b
  BatteryRating,   // s_b
  BuildGenerator,  // z_d
  Commit,          // x_d
  Start,           // y_d
  Stop,            // w_d
  GenP,            // p_d, delivered
  GenQ,            // q_d
  GenRaw,          // p_hat_d
  BatP,            // p_b
  BatQ,            // q_b
  BatRaw,          // p_hat_b
  Soc,             // sc_b
  Voltage,         // v_i, squared magnitude
  LineP,
  LineQ,
  ShedP,
  ShedQ,
  GridP,
  GridQ,
  InitSoc,     // boundary copies; time holds the lag for history slots
  InitCommit,
  InitPower,
  InitStart,
  InitStop,
};

const char* to_string(VarKind k);
bool is_binary_kind(VarKind k);

struct VarRef {
  VarKind kind;
  int owner = -1;  // battery, generator, bus or line index
  int time = -1;   // absolute step; -1 for builds
  int col = -1;

  bool operator==(const VarRef&) const = default;
};

enum class RowFamily : std::uint8_t {
  BalanceP,
  BalanceQ,
  VoltageDrop,
  Thermal,  // ball
  BatterySite,
  GeneratorSite,
  RatingLimit,
  CommitBuilt,
  StartStop,
  StartOrStop,
  GenPLow,
  GenPHigh,
  GenQLow,
  GenQHigh,
  GenEfficiency,
  RampDown,
  RampUp,
  UpTime,
  DownTime,
  BatteryApparent,  // ball
  SocBalance,
  SocCapacity,
  Discharge,
  Charge,
  Coupling,
};

const char* to_string(RowFamily f);

struct RowTag {
  RowFamily family;
  int owner = -1;
  int time = -1;
};

/// One position of the canonical boundary state vector.
enum class StateKind : std::uint8_t { Soc, Commit, Power, StartHist, StopHist, BuildBattery, BatteryRating, BuildGenerator };

struct StateSlot {
  StateKind kind;
  int owner = -1;
  int lag = 0;  // history slots: 0 = the step just before the window start

  bool operator==(const StateSlot&) const = default;
};

const char* to_string(StateKind k);

struct BuildDecision {
  std::vector<double> battery;     // z_b
  std::vector<double> rating;      // s_b, MVA
  std::vector<double> generator;   // z_d

  bool operator==(const BuildDecision&) const = default;
};

/// State at a window boundary. History vectors hold start/stop indicators of
/// the generator's `history_depth()` preceding steps, most recent first.
struct BoundaryState {
  std::vector<double> soc;
  std::vector<double> commit;
  std::vector<double> power;
  std::vector<std::vector<double>> start_hist;
  std::vector<std::vector<double>> stop_hist;
  std::optional<BuildDecision> builds;

  /// Conditions before the first step of the horizon.
  static BoundaryState initial(const NetworkInstance& inst);
  double value(const StateSlot& slot) const;

  bool operator==(const BoundaryState&) const = default;
};

/// Canonical state slots: SoC per battery, commitment and delivered power
/// per generator, start/stop history per generator, then (optionally) the
/// build variables z_b, s_b per battery and z_d per generator.
std::vector<StateSlot> state_slots(const NetworkInstance& inst, bool with_builds);

struct Window {
  int start = 0;
  int end = 0;
  bool owns_builds = true;  // build columns are free and carry their cost
  bool last = true;         // no price term allowed

  int length() const { return end - start; }
};

/// If `trigger` is at 0 then every column in `cols` must be at most 0.
struct Implication {
  int trigger = -1;
  std::vector<int> cols;
};

struct MdopModel {
  ConvexProgram program;
  std::vector<VarRef> vars;  // indexed by column
  std::vector<RowTag> rows;  // indexed by row
  std::vector<RowTag> balls;
  std::vector<int> binaries;
  std::vector<Implication> implications;
  Window window;

  // Coupling metadata.
  std::vector<StateSlot> in_slots;  // one per coupling row
  std::vector<int> in_rows;
  std::vector<int> in_cols;
  std::vector<StateSlot> out_slots;  // terminal state, always with builds
  std::vector<int> out_cols;

  int col(VarKind kind, int owner, int time) const;  // -1 when absent
  int num_binaries() const { return static_cast<int>(binaries.size()); }
  /// Objective of the program minus the price term.
  double cost_without_prices(std::span<const double> x) const;
  std::vector<double> prices;  // applied terminal prices (empty when none)

  std::map<std::tuple<int, int, int>, int> index;
};

struct ObjectiveTerms {
  double build = 0.0;
  double generation = 0.0;
  double shed = 0.0;
  double total() const { return build + generation + shed; }
};

/// Splits the objective of `x` (price term excluded) into its parts.
ObjectiveTerms objective_terms(const NetworkInstance& inst, const MdopModel& model, std::span<const double> x);

/// Builds the window model. `prices` (length = out_slots) adds
/// prices . terminal_state to the objective; it is rejected for last windows.
MdopModel assemble(const NetworkInstance& inst, const LoadProfile& loads, const Window& window,
                   const BoundaryState& boundary, const std::vector<double>* prices = nullptr);

/// Full-horizon model from the instance initial conditions.
MdopModel assemble_monolith(const NetworkInstance& inst, const LoadProfile& loads);

/// Stage models laid side by side; the coupling rows of stage s >= 2 equate
/// its initial-state columns with stage s-1's terminal columns.
struct CoupledModel {
  MdopModel model;  // window covers the full horizon
  std::vector<int> col_offset;  // per stage
  std::vector<int> row_offset;
  std::vector<int> ball_offset;
  std::vector<MdopModel> stages;  // stand-alone stage models used for the blocks
  std::vector<std::vector<int>> coupling_rows;  // per stage, in its in_slots order
};

CoupledModel assemble_coupled(const NetworkInstance& inst, const LoadProfile& loads, const std::vector<Window>& windows);

MdopModel relax_integrality(const MdopModel& model);
/// Fixes every binary to `values[k]` (indexed like model.binaries).
MdopModel fix_binaries(const MdopModel& model, const std::vector<double>& values);

/// Terminal state of a window solution.
BoundaryState terminal_state(const NetworkInstance& inst, const MdopModel& model, std::span<const double> x);
std::vector<double> state_vector(const BoundaryState& b, const std::vector<StateSlot>& slots);

/// Sparse text dump: one `var` line per column with bounds and objective
/// coefficients, one `row` line per linear row and one `ball` line per norm
/// ball. See the README for the grammar.
void write_model(const MdopModel& model, std::ostream& out);

// Closed-form sizes of a window model, for cross-checking the builders.
struct ModelCounts {
  int columns = 0;
  int rows = 0;
  int balls = 0;
  int binaries = 0;
};
ModelCounts expected_counts(const NetworkInstance& inst, const Window& window);

}  // namespace mdop
