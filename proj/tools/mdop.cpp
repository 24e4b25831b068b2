// SPDX-License-Identifier: Apache-2.0
//
// mdop: planning runs, comparisons, corpus generation and model dumps.
// Exit codes: 0 ok, 1 usage, 2 parse, 3 solve, 4 infeasible.

#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "mdop/harness.hpp"

namespace {

enum Exit { kOk = 0, kUsage = 1, kParse = 2, kSolve = 3, kInfeasible = 4 };

struct Common {
  std::string instance, loads, synth = "slow", out, dual_mode = "dual-init";
  int horizon_days = 0, dt_minutes = 0;
  int stages = 6, iterations = 3;
  double gap_tol = 1e-4, time_limit = 600;
  std::uint64_t seed = 1;
  int gs_max_sweeps = 200;
  double gs_tol = 1e-5;
};

void add_inputs(CLI::App* app, Common& c) {
  app->add_option("--instance", c.instance, "Instance directory holding network.json")->required();
  auto* loads = app->add_option("--loads", c.loads, "Load profile CSV (step,bus,p_mw,q_mvar)");
  auto* synth = app->add_option("--synth", c.synth, "Synthetic profile: slow, fast or daily=<a>,noise=<b>");
  loads->excludes(synth);
  app->add_option("--horizon-days", c.horizon_days, "Horizon in days (truncates a loads file)");
  app->add_option("--dt-minutes", c.dt_minutes, "Step length in minutes (default: the instance step)");
  app->add_option("--seed", c.seed, "Seed of the synthetic profile");
}

void add_solver(CLI::App* app, Common& c) {
  app->add_option("--stages", c.stages, "Stage count S");
  app->add_option("--iterations", c.iterations, "MPC sweep count N");
  app->add_option("--dual-mode", c.dual_mode, "MPC price seeding")->check(CLI::IsMember({"dual-init", "zero-init"}));
  app->add_option("--gap-tol", c.gap_tol, "Relative MIP gap per solve");
  app->add_option("--time-limit", c.time_limit, "Seconds per MIP solve");
  app->add_option("--gs-max-sweeps", c.gs_max_sweeps, "Gauss-Seidel sweep limit");
  app->add_option("--gs-tol", c.gs_tol, "Gauss-Seidel KKT residual tolerance");
}

mdop::RunConfig make_config(const Common& c, mdop::Algorithm alg) {
  mdop::RunConfig cfg;
  cfg.instance = c.instance;
  cfg.loads = c.loads;
  cfg.synth = c.synth;
  if (c.horizon_days > 0) cfg.horizon_days = c.horizon_days;
  if (c.dt_minutes != 0) cfg.dt_minutes = c.dt_minutes;
  cfg.algorithm = alg;
  cfg.stages = c.stages;
  cfg.iterations = c.iterations;
  cfg.dual_mode = c.dual_mode == "zero-init" ? mdop::DualMode::ZeroInit : mdop::DualMode::DualInit;
  cfg.gap_tol = c.gap_tol;
  cfg.time_limit = c.time_limit;
  cfg.seed = c.seed;
  cfg.gs_max_sweeps = c.gs_max_sweeps;
  cfg.gs_tol = c.gs_tol;
  cfg.out = c.out;
  return cfg;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path);
  f << text;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Microgrid design and operation planning"};
  app.require_subcommand(1);

  Common run_opts;
  std::string algorithm = "mpc";
  auto* run_cmd = app.add_subcommand("run", "Solve one configuration and write its artifacts");
  add_inputs(run_cmd, run_opts);
  add_solver(run_cmd, run_opts);
  run_cmd->add_option("--algorithm", algorithm, "mpc, rh, monolithic, relaxation or gauss-seidel");
  run_cmd->add_option("--out", run_opts.out, "Artifact directory");

  Common cmp_opts;
  std::vector<std::string> algorithms{"mpc", "rh"};
  auto* cmp_cmd = app.add_subcommand("compare", "Run several algorithms on one case and tabulate them");
  add_inputs(cmp_cmd, cmp_opts);
  add_solver(cmp_cmd, cmp_opts);
  cmp_cmd->add_option("--algorithms", algorithms, "Algorithms to compare")->delimiter(',');
  cmp_cmd->add_option("--out", cmp_opts.out, "Directory for compare.csv and compare.txt");

  std::string corpus_out = "data";
  std::uint64_t corpus_seed = 1;
  auto* gen_cmd = app.add_subcommand("gen-corpus", "Write the bundled instances and profiles");
  gen_cmd->add_option("--out", corpus_out, "Output directory");
  gen_cmd->add_option("--seed", corpus_seed, "Seed of the synthetic profiles");

  std::string val_instance, val_loads;
  auto* val_cmd = app.add_subcommand("validate", "Check an instance and, optionally, a load profile");
  val_cmd->add_option("--instance", val_instance, "Instance directory")->required();
  val_cmd->add_option("--loads", val_loads, "Load profile CSV");

  Common dump_opts;
  bool dump_relaxed = false;
  std::string dump_file;
  auto* dump_cmd = app.add_subcommand("dump-model", "Print the full-horizon model in the sparse text format");
  add_inputs(dump_cmd, dump_opts);
  dump_cmd->add_flag("--relaxed", dump_relaxed, "Relax integrality first");
  dump_cmd->add_option("--file", dump_file, "Write to a file instead of stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*run_cmd) {
      mdop::RunConfig cfg;
      try {
        cfg = make_config(run_opts, mdop::parse_algorithm(algorithm));
      } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kUsage;
      }
      mdop::RunReport rep = mdop::run(cfg);
      std::cout << mdop::render_report(rep);
    } else if (*cmp_cmd) {
      std::vector<mdop::RunConfig> cfgs;
      try {
        for (const std::string& a : algorithms) {
          mdop::RunConfig c = make_config(cmp_opts, mdop::parse_algorithm(a));
          c.out.clear();
          cfgs.push_back(c);
        }
      } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kUsage;
      }
      std::vector<mdop::CompareRow> rows = mdop::compare(cfgs);
      std::string text = mdop::compare_text(rows);
      std::cout << text;
      if (!cmp_opts.out.empty()) {
        std::filesystem::create_directories(cmp_opts.out);
        write_text(cmp_opts.out + "/compare.csv", mdop::compare_csv(rows));
        write_text(cmp_opts.out + "/compare.txt", text);
      }
    } else if (*gen_cmd) {
      mdop::gen_corpus(corpus_out, corpus_seed);
      std::cout << "wrote corpus to " << corpus_out << "\n";
    } else if (*val_cmd) {
      mdop::NetworkInstance inst;
      try {
        inst = mdop::parse_instance(val_instance);
        if (!val_loads.empty()) {
          mdop::LoadProfile lp = mdop::parse_loads(val_loads, inst, inst.dt_hours);
          for (const std::string& w : lp.warnings) std::cout << "warning: " << w << "\n";
          std::cout << val_loads << ": " << lp.horizon << " steps\n";
        }
      } catch (const mdop::InstanceError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kParse;
      }
      std::cout << val_instance << ": " << inst.buses.size() << " buses, " << inst.lines.size() << " lines, "
                << inst.batteries.size() << " battery and " << inst.generators.size()
                << " generator candidates; radial\n";
    } else if (*dump_cmd) {
      mdop::RunConfig cfg = make_config(dump_opts, mdop::Algorithm::Relaxation);
      mdop::NetworkInstance inst;
      mdop::LoadProfile loads;
      mdop::load_inputs(cfg, inst, loads);
      mdop::MdopModel m = mdop::assemble_monolith(inst, loads);
      if (dump_relaxed) m = mdop::relax_integrality(m);
      if (dump_file.empty()) {
        mdop::write_model(m, std::cout);
      } else {
        std::ofstream f(dump_file);
        if (!f) throw std::runtime_error("cannot write " + dump_file);
        mdop::write_model(m, f);
      }
    }
  } catch (const mdop::ParseError& e) {
    std::cerr << "parse error: " << e.what() << "\n";
    return kParse;
  } catch (const mdop::InstanceError& e) {
    std::cerr << "parse error: " << e.what() << "\n";
    return kParse;
  } catch (const mdop::InfeasibleError& e) {
    std::cerr << "infeasible: " << e.what() << "\n";
    return kInfeasible;
  } catch (const mdop::SolveError& e) {
    std::cerr << "solve error: " << e.what() << "\n";
    return kSolve;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kSolve;
  }
  return kOk;
}
