// slsmeso: synthesize, simulate and analyze localized controllers.
//
// Exit codes: 0 success, 1 usage or input error, 2 infeasible synthesis.

#include "slsmeso/slsmeso.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

namespace fs = std::filesystem;
using namespace slsmeso;
using nlohmann::json;

namespace {

constexpr int kOk = 0;
constexpr int kUsage = 1;
constexpr int kInfeasible = 2;

struct Args {
  std::string config;
  std::string mode;
  std::string out;
  std::string impulse;
  int horizon = 0;
  bool distributed = false;
};

// Thrown for missing inputs and other conditions reported as usage errors.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

RunConfig resolve(const Args& a) {
  RunConfig cfg = load_config(a.config);
  if (!a.mode.empty()) cfg.mode = method_from_string(a.mode);
  if (a.horizon != 0) {
    if (a.horizon < 1) throw UsageError("--horizon must be positive");
    cfg.horizon = a.horizon;
  }
  if (!a.out.empty()) cfg.output_dir = a.out;
  if (!a.impulse.empty()) {
    const auto parts = io::split(a.impulse);
    if (parts.size() > 2) throw UsageError("--impulse expects NODE[,T]");
    try {
      cfg.scenario.kind = "impulse";
      cfg.scenario.node = static_cast<int>(io::parse_int(parts[0]));
      cfg.scenario.time = parts.size() == 2 ? static_cast<int>(io::parse_int(parts[1])) : 0;
    } catch (const io::FormatError&) {
      throw UsageError("--impulse expects NODE[,T], got '" + a.impulse + "'");
    }
    if (cfg.scenario.time >= cfg.scenario.steps) cfg.scenario.steps = cfg.scenario.time + 1;
  }
  return cfg;
}

fs::path method_dir(const RunConfig& cfg, Method m) { return fs::path(cfg.output_dir) / to_string(m); }

void write_json(const fs::path& p, const json& j) { io::write_file_atomic(p, j.dump(2) + "\n"); }

json read_json(const fs::path& p) {
  if (!fs::exists(p)) throw UsageError("missing input " + p.string() + " (run synthesize first)");
  try {
    return json::parse(io::read_file(p));
  } catch (const json::exception& e) {
    throw UsageError(p.string() + ": " + e.what());
  }
}

struct Baseline {
  double objective = 0.0;
  double state_only = 0.0;
};

std::optional<Baseline> lqr_baseline(const LinearSystem& sys, const CostSpec& cost) {
  if (!(cost.eps() > 0.0)) return std::nullopt;
  try {
    const LqrSolution sol = solve_dare(sys, cost);
    const Matrix acl = sys.A() + sys.B() * sol.K;
    return Baseline{lqr_cost(sys, sol.K, cost), solve_discrete_lyapunov(acl, cost.Q()).trace()};
  } catch (const SolverError&) {
    return std::nullopt;
  }
}

void write_pair(const fs::path& dir, const FIRPair& pair) {
  io::write_file_atomic(dir / "R.csv", io::spectral_csv(pair, 'R'));
  io::write_file_atomic(dir / "M.csv", io::spectral_csv(pair, 'M'));
  write_json(dir / "spectral.json", io::spectral_to_json(pair));
}

int cmd_synthesize(const RunConfig& cfg) {
  const LinearSystem sys = build_system(cfg);
  const CostSpec cost = build_cost(cfg, sys.states());
  const fs::path dir = method_dir(cfg, cfg.mode);
  fs::create_directories(dir);
  json status;
  status["mode"] = to_string(cfg.mode);
  status["horizon"] = cfg.horizon;
  status["eps"] = cost.eps();

  if (cfg.mode == Method::lqr) {
    LqrSolution sol;
    try {
      sol = solve_dare(sys, cost);
    } catch (const SolverError& e) {
      status["feasible"] = false;
      status["error"] = e.what();
      write_json(dir / "status.json", status);
      std::cerr << "synthesize: " << e.what() << "\n";
      return kInfeasible;
    }
    const ClosedLoopFir fir = closed_loop_fir(sys, sol.K, cfg.horizon);
    const double objective = lqr_cost(sys, sol.K, cost);
    const double state_only = solve_discrete_lyapunov(sys.A() + sys.B() * sol.K, cost.Q()).trace();
    io::write_file_atomic(dir / "K.csv", io::matrix_csv(sol.K));
    io::write_file_atomic(dir / "P.csv", io::matrix_csv(sol.P));
    write_pair(dir, fir.pair);
    status["feasible"] = true;
    status["objective"] = objective;
    status["state_only"] = state_only;
    status["normalized_cost"] = 1.0;
    status["normalized_state_only"] = 1.0;
    status["lqr_baseline"] = objective;
    status["dare_iterations"] = sol.iterations;
    status["dare_residual"] = sol.residual;
    status["closed_loop_spectral_radius"] = fir.spectral_radius;
    status["truncation_tail"] = fir.tail;
    status["fir_objective"] = h2_cost(fir.pair, cost).total;
    write_json(dir / "status.json", status);
    write_json(dir / "config.json", config_to_json(cfg));
    std::cout << "lqr: cost " << io::format_double(objective) << ", DARE residual " << sol.residual << "\n";
    return kOk;
  }

  const SynthesisProblem prob = build_problem(cfg, sys, cfg.mode);
  const SynthesisResult res = synthesize(prob);
  const auto base = lqr_baseline(sys, cost);
  write_pair(dir, res.pair);
  io::write_file_atomic(dir / "masks.csv", io::mask_csv(prob.support));

  status["feasible"] = res.ok();
  status["objective"] = res.objective;
  status["state_only"] = res.state_only;
  if (base) {
    status["lqr_baseline"] = base->objective;
    status["normalized_cost"] = normalized_cost(res.objective, base->objective);
    status["normalized_state_only"] = normalized_cost(res.state_only, base->state_only);
  } else {
    status["lqr_baseline"] = nullptr;
    status["normalized_cost"] = nullptr;
    status["normalized_state_only"] = nullptr;
  }
  status["fir_closure"] = prob.options.fir_closure;
  status["feasibility_residual"] = res.feasibility_residual;
  status["truncation_tail"] = res.truncation_tail;
  status["solver"] = {{"max_stationarity", res.stats.max_stationarity},
                      {"max_constraint_residual", res.stats.max_constraint_residual},
                      {"variables", res.stats.total_variables},
                      {"constraints", res.stats.total_constraints}};
  json cols = json::array();
  for (std::size_t j = 0; j < res.columns.size(); ++j) {
    const ColumnStatus& c = res.columns[j];
    json e = {{"column", j + 1}, {"status", to_string(c.status)}, {"residual", c.residual}, {"objective", c.objective}};
    if (!c.message.empty()) e["message"] = c.message;
    cols.push_back(std::move(e));
  }
  status["columns"] = std::move(cols);
  write_json(dir / "status.json", status);
  write_json(dir / "config.json", config_to_json(cfg));

  if (!res.ok()) {
    std::cerr << to_string(cfg.mode) << ": infeasible columns:";
    for (Index j : res.infeasible_columns()) std::cerr << ' ' << j + 1;
    std::cerr << "\n";
    for (Index j : res.infeasible_columns())
      std::cerr << "  column " << j + 1 << ": " << res.columns[static_cast<std::size_t>(j)].message << "\n";
    return kInfeasible;
  }
  std::cout << to_string(cfg.mode) << ": objective " << io::format_double(res.objective);
  if (base) std::cout << ", normalized " << io::format_double(res.objective / base->objective);
  std::cout << ", tail " << res.truncation_tail << "\n";
  return kOk;
}

FIRPair load_pair(const fs::path& dir) {
  try {
    return io::spectral_from_json(read_json(dir / "spectral.json"));
  } catch (const io::FormatError& e) {
    throw UsageError(e.what());
  }
}

int cmd_simulate(const RunConfig& cfg, bool distributed, const fs::path& config_dir) {
  const LinearSystem sys = build_system(cfg);
  const fs::path dir = method_dir(cfg, cfg.mode);
  if (distributed && cfg.mode != Method::sls) throw UsageError("--distributed requires --mode sls");
  const std::vector<Vector> w = build_disturbance(cfg, sys.states(), config_dir);
  const int steps = cfg.scenario.steps;

  Trajectory traj;
  std::optional<MessageLog> log;
  if (cfg.mode == Method::lqr) {
    const fs::path kp = dir / "K.csv";
    if (!fs::exists(kp)) throw UsageError("missing input " + kp.string() + " (run synthesize first)");
    Matrix k;
    try {
      k = io::matrix_from_csv(io::read_file(kp), "K.csv");
    } catch (const io::FormatError& e) {
      throw UsageError(e.what());
    }
    traj = simulate_static(sys, k, w, steps);
  } else {
    const FIRPair pair = load_pair(dir);
    if (pair.states() != sys.states() || pair.inputs() != sys.inputs())
      throw UsageError("spectral.json does not match the configured plant");
    if (cfg.mode == Method::mdesign) {
      traj = simulate_mdesign(sys, pair, w, steps);
    } else {
      const FIRPair realized = prune(pair, kRealizationTol);
      if (distributed) {
        if (pair.horizon() != cfg.horizon) throw UsageError("spectral.json horizon differs from the config");
        const Mesocircuit mc = build_mesocircuit(sys, realized, build_support(cfg, sys, Method::sls));
        DistributedRun run = simulate_distributed(mc, sys, w, steps);
        traj = std::move(run.traj);
        log = std::move(run.log);
      } else {
        traj = simulate_sls(sys, realized, w, steps);
      }
    }
  }
  io::write_file_atomic(dir / "trajectory.csv", io::trajectory_csv(traj, sys));
  if (log) io::write_file_atomic(dir / "messages.csv", io::messages_csv(*log));

  json summary = {{"mode", to_string(cfg.mode)},
                  {"steps", steps},
                  {"scenario", cfg.scenario.kind},
                  {"distributed", distributed},
                  {"dynamics_residual", dynamics_residual(traj, sys)}};
  if (cfg.scenario.kind == "impulse") {
    const LocalizationReport rep = localization_radius(traj, cfg.scenario.node - 1, sys, cfg.zero_tol);
    auto labels = [](const std::vector<Index>& v) {
      json a = json::array();
      for (Index i : v) a.push_back(i + 1);
      return a;
    };
    summary["localization"] = {{"tol", cfg.zero_tol},
                               {"radius", rep.radius},
                               {"active", labels(rep.active)},
                               {"state_active", labels(rep.state_active)},
                               {"actuator_active", labels(rep.actuator_active)}};
  }
  if (log) summary["messages"] = log->size();
  write_json(dir / (distributed ? "simulation_distributed.json" : "simulation.json"), summary);
  std::cout << "simulate: wrote " << (dir / "trajectory.csv").string() << "\n";
  return kOk;
}

int cmd_analyze(const RunConfig& cfg) {
  const LinearSystem sys = build_system(cfg);
  const fs::path root(cfg.output_dir);
  const fs::path out = root / "analysis";
  const Method methods[] = {Method::lqr, Method::mdesign, Method::sls};

  std::vector<json> status;
  std::vector<FIRPair> pairs;
  for (Method m : methods) {
    status.push_back(read_json(method_dir(cfg, m) / "status.json"));
    pairs.push_back(load_pair(method_dir(cfg, m)));
  }
  fs::create_directories(out);

  const FIRPair& sls_pair = pairs[2];
  if (sls_pair.horizon() != cfg.horizon) throw UsageError("sls/spectral.json horizon differs from the config");
  const Mesocircuit mc = build_mesocircuit(sys, sls_pair, build_support(cfg, sys, Method::sls));
  const MesoReport cen = census(mc);
  write_json(out / "census.json", io::census_to_json(cen));
  write_json(out / "memory.json", io::memory_to_json(memory_report(mc)));

  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const std::string name = to_string(methods[i]);
    const FIRPair& p = pairs[i];
    const std::string m1 = name + " M(1)";
    const std::string r2 = name + " R(2)";
    io::write_file_atomic(out / ("sparsity_" + name + "_M1.txt"), render::sparsity_text(p.M(1), cfg.zero_tol, m1, sys.actuated()));
    io::write_file_atomic(out / ("sparsity_" + name + "_M1.svg"), render::sparsity_svg(p.M(1), cfg.zero_tol, m1, sys.actuated()));
    io::write_file_atomic(out / ("sparsity_" + name + "_R2.txt"), render::sparsity_text(p.R(2), cfg.zero_tol, r2));
    io::write_file_atomic(out / ("sparsity_" + name + "_R2.svg"), render::sparsity_svg(p.R(2), cfg.zero_tol, r2));
  }

  const double base = status[0].at("objective").get<double>();
  const double base_state = status[0].at("state_only").get<double>();
  std::string costs = "method,objective,state_only,normalized_cost,normalized_state_only\n";
  for (std::size_t i = 0; i < status.size(); ++i) {
    const double obj = status[i].at("objective").get<double>();
    const double st = status[i].at("state_only").get<double>();
    costs += to_string(methods[i]) + ',' + io::format_double(obj) + ',' + io::format_double(st) + ',' +
             io::format_double(normalized_cost(obj, base)) + ',' + io::format_double(normalized_cost(st, base_state)) +
             '\n';
  }
  io::write_file_atomic(out / "costs.csv", costs);

  std::cout << "census: forward " << cen.forward_paths << ", predictive " << cen.predictive_ifps
            << ", communicative " << cen.communicative_ifps << ", ratio " << cen.ratio_text() << "\n"
            << costs;
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Localized controller synthesis, simulation and mesocircuit analysis"};
  app.require_subcommand(1);
  Args args;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", args.config, "Run configuration (JSON)")->required()->check(CLI::ExistingFile);
    sub->add_option("--mode", args.mode, "lqr | mdesign | sls")->check(CLI::IsMember({"lqr", "mdesign", "sls"}));
    sub->add_option("--out", args.out, "Run root directory (overrides output_dir)");
    sub->add_option("--horizon", args.horizon, "FIR horizon T");
  };
  CLI::App* syn = app.add_subcommand("synthesize", "Solve for the controller of the configured mode");
  add_common(syn);
  CLI::App* sim = app.add_subcommand("simulate", "Simulate a synthesized controller");
  add_common(sim);
  sim->add_flag("--distributed", args.distributed, "Run the node-level message-passing realization");
  sim->add_option("--impulse", args.impulse, "Unit impulse NODE[,T] (1-based node)");
  CLI::App* ana = app.add_subcommand("analyze", "Census, memory report, sparsity renderings and cost table");
  add_common(ana);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    const RunConfig cfg = resolve(args);
    if (syn->parsed()) return cmd_synthesize(cfg);
    if (sim->parsed()) return cmd_simulate(cfg, args.distributed, fs::path(args.config).parent_path());
    if (ana->parsed()) return cmd_analyze(cfg);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const InvalidArgument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const io::FormatError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const SolverError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInfeasible;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  }
  return kUsage;
}
