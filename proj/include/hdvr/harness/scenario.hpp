#pragma once

// Scenario configuration, presets and the end-to-end driver.

#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "hdvr/central_solver.hpp"
#include "hdvr/harness/feeder_io.hpp"
#include "hdvr/harness/generator.hpp"
#include "hdvr/harness/trace_io.hpp"
#include "hdvr/hierarchy.hpp"

namespace hdvr {

enum class SolverChoice { Central, Hierarchical, Both };

inline std::string_view to_string(SolverChoice s) {
  switch (s) {
    case SolverChoice::Central: return "central";
    case SolverChoice::Hierarchical: return "hierarchical";
    case SolverChoice::Both: return "both";
  }
  return "?";
}

inline SolverChoice parse_solver_choice(std::string_view text) {
  if (text == "central") return SolverChoice::Central;
  if (text == "hierarchical") return SolverChoice::Hierarchical;
  if (text == "both") return SolverChoice::Both;
  throw ValidationError("unknown solver '" + std::string(text) + "'");
}

struct ScenarioConfig {
  std::string name = "custom";

  // Feeder: a file, or the generator.
  std::optional<std::string> feeder_file;
  FeederSpec generator;
  std::uint64_t seed = 1;

  // Partition: a file, explicit roots, or auto_partition with ag_count.
  std::optional<std::string> partition_file;
  std::vector<NodeId> roots;
  std::size_t ag_count = 4;

  // Algorithm. No step means 0.9 of the certified bound (step_fraction).
  std::optional<double> step;
  double step_fraction = 0.9;
  double phi = 1e-3;
  double tolerance = 1e-8;
  std::size_t max_iter = 10000;
  StopRule stop = StopRule::Residual;
  double alpha = 0.0005;
  double p0_fraction = 0.8;  // P0 target as a fraction of the initial P0
  double v_min = 0.95;       // used for generated feeders
  double v_max = 1.05;
  VoltageSource voltage_source = VoltageSource::Linear;
  SolverChoice solver = SolverChoice::Both;
  bool parallel_regions = false;

  std::string output_dir = "out";

  ValidationReport validate() const {
    ValidationReport report;
    if (!feeder_file) {
      for (auto& v : generator.validate().violations) report.add("generator: " + v);
    }
    if (step && !(*step > 0.0)) report.add("step must be positive");
    if (!(step_fraction > 0.0 && step_fraction < 1.0)) report.add("step fraction must lie in (0, 1)");
    if (!(phi > 0.0)) report.add("phi must be positive");
    if (!(tolerance > 0.0)) report.add("tolerance must be positive");
    if (max_iter == 0) report.add("max_iter must be positive");
    if (!(alpha >= 0.0)) report.add("alpha must be nonnegative");
    if (!(v_min < v_max)) report.add("v_min must be below v_max");
    if (!partition_file && roots.empty() && ag_count == 0) report.add("ag_count must be positive");
    return report;
  }
};

// Named configurations.
//   undervoltage-chain-20  20-node chain loaded to 0.92 p.u., DER at every node
//   equivalence-60x3       60-node random feeder, 3 AGs, 200 iterations of both solvers
//   desk-scale-undervoltage  eps 1e-3, alpha 5e-4, P0 stop at 1e-6 on a 40-node feeder
inline std::vector<std::string> preset_names() {
  return {"undervoltage-chain-20", "equivalence-60x3", "desk-scale-undervoltage"};
}

inline ScenarioConfig preset(const std::string& name) {
  ScenarioConfig c;
  c.name = name;
  if (name == "undervoltage-chain-20") {
    c.generator.nodes = 20;
    c.generator.max_branching = 1;
    c.generator.target_v_min = 0.92;
    c.generator.device_fraction = 1.0;
    c.generator.capacity_p = {0.02, 0.05};
    c.generator.capacity_q = {0.02, 0.05};
    c.seed = 20;
    c.ag_count = 1;
    c.roots = {6};
    c.phi = 1e-3;
    c.step = 0.05;
    c.tolerance = 1e-9;
    c.max_iter = 400000;
    c.solver = SolverChoice::Hierarchical;
  } else if (name == "equivalence-60x3") {
    c.generator.nodes = 60;
    c.generator.target_v_min = 0.93;
    c.seed = 60;
    c.ag_count = 3;
    c.phi = 0.05;
    c.tolerance = 1e-300;  // run all iterations
    c.max_iter = 200;
    c.solver = SolverChoice::Both;
  } else if (name == "desk-scale-undervoltage") {
    c.generator.nodes = 40;
    c.generator.target_v_min = 0.93;
    c.generator.device_fraction = 0.6;
    c.seed = 40;
    c.ag_count = 4;
    c.step = 1e-3;
    c.alpha = 0.0005;
    c.p0_fraction = 0.8;
    c.stop = StopRule::HeadPower;
    c.tolerance = 1e-6;
    c.max_iter = 100000;
    c.solver = SolverChoice::Both;
  } else {
    throw ValidationError("unknown preset '" + name + "'");
  }
  return c;
}

// JSON keys mirror the struct fields; "step" may be a number or "auto";
// "generator" holds the FeederSpec fields with ranges as [lo, hi].
inline ScenarioConfig config_from_json(const nlohmann::json& j, ScenarioConfig c = {}) {
  try {
    for (auto it = j.begin(); it != j.end(); ++it) {
      const auto& key = it.key();
      const auto& v = it.value();
      if (key == "preset") continue;
      if (key == "name") c.name = v.get<std::string>();
      else if (key == "feeder_file") c.feeder_file = v.get<std::string>();
      else if (key == "seed") c.seed = v.get<std::uint64_t>();
      else if (key == "partition_file") c.partition_file = v.get<std::string>();
      else if (key == "roots") c.roots = v.get<std::vector<NodeId>>();
      else if (key == "ag_count") c.ag_count = v.get<std::size_t>();
      else if (key == "step") {
        if (v.is_string() && v.get<std::string>() == "auto") c.step.reset();
        else c.step = v.get<double>();
      }
      else if (key == "step_fraction") c.step_fraction = v.get<double>();
      else if (key == "phi") c.phi = v.get<double>();
      else if (key == "tolerance") c.tolerance = v.get<double>();
      else if (key == "max_iter") c.max_iter = v.get<std::size_t>();
      else if (key == "stop") c.stop = parse_stop_rule(v.get<std::string>());
      else if (key == "alpha") c.alpha = v.get<double>();
      else if (key == "p0_fraction") c.p0_fraction = v.get<double>();
      else if (key == "v_min") c.v_min = v.get<double>();
      else if (key == "v_max") c.v_max = v.get<double>();
      else if (key == "voltage_source") c.voltage_source = parse_voltage_source(v.get<std::string>());
      else if (key == "solver") c.solver = parse_solver_choice(v.get<std::string>());
      else if (key == "parallel_regions") c.parallel_regions = v.get<bool>();
      else if (key == "output_dir") c.output_dir = v.get<std::string>();
      else if (key == "generator") {
        auto& g = c.generator;
        auto range = [](const nlohmann::json& r) { return Range{r.at(0).get<double>(), r.at(1).get<double>()}; };
        for (auto gi = v.begin(); gi != v.end(); ++gi) {
          const auto& gk = gi.key();
          const auto& gv = gi.value();
          if (gk == "nodes") g.nodes = gv.get<std::size_t>();
          else if (gk == "max_branching") g.max_branching = gv.get<std::size_t>();
          else if (gk == "chain_bias") g.chain_bias = gv.get<double>();
          else if (gk == "r") g.r = range(gv);
          else if (gk == "x") g.x = range(gv);
          else if (gk == "load_p") g.load_p = range(gv);
          else if (gk == "load_q") g.load_q = range(gv);
          else if (gk == "v0") g.v0 = gv.get<double>();
          else if (gk == "target_v_min") g.target_v_min = gv.get<double>();
          else if (gk == "device_fraction") g.device_fraction = gv.get<double>();
          else if (gk == "capacity_p") g.capacity_p = range(gv);
          else if (gk == "capacity_q") g.capacity_q = range(gv);
          else if (gk == "cost") g.cost = range(gv);
          else throw ValidationError("unknown generator key '" + gk + "'");
        }
      } else {
        throw ValidationError("unknown config key '" + key + "'");
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("config: ") + e.what());
  }
  return c;
}

// A "preset" key in the file replaces `base` as the starting point.
inline ScenarioConfig read_config(const std::string& path, const ScenarioConfig& base = {}) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config file '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(path + ": " + e.what());
  }
  if (j.contains("preset")) {
    if (!j["preset"].is_string()) throw ValidationError(path + ": preset must be a string");
    return config_from_json(j, preset(j["preset"].get<std::string>()));
  }
  return config_from_json(j, base);
}

// P_I is the net injection of the inelastic loads (sum of nominal injections,
// negative under load), so P0 = -P_I - sum p is the power imported at the head.
inline OpfProblem build_problem(const FeederFile& feeder, double alpha, double p0_fraction, double phi) {
  OpfProblem prob;
  prob.devices = feeder.devices;
  prob.v_min = feeder.v_min;
  prob.v_max = feeder.v_max;
  prob.alpha = alpha;
  prob.phi = phi;
  prob.inelastic_load = feeder.model.p_nominal.sum();
  prob.p0_target = p0_fraction * initial_dispatch(prob).p0;
  prob.require_valid();
  return prob;
}

struct Scenario {
  ScenarioConfig config;
  FeederFile feeder;
  Partition partition;
  OpfProblem problem;
};

inline Scenario build_scenario(const ScenarioConfig& config) {
  if (auto r = config.validate(); !r.ok()) throw ValidationError("invalid config: " + r.str());
  Scenario s{config, {}, {}, {}};
  s.feeder = config.feeder_file ? read_feeder(*config.feeder_file)
                                : generate_feeder_file(config.generator, config.seed, config.v_min, config.v_max);
  if (config.partition_file) {
    s.partition = read_partition(*config.partition_file, s.feeder.model);
  } else if (!config.roots.empty()) {
    s.partition = Partition::from_roots(s.feeder.model, config.roots);
    require_valid_partition(s.feeder.model, s.partition);
  } else {
    s.partition = auto_partition(s.feeder.model, config.ag_count);
  }
  s.problem = build_problem(s.feeder, config.alpha, config.p0_fraction, config.phi);
  return s;
}

// max_t ||z_a(t) - z_b(t)||_inf / max(1, ||z_b(t)||_inf)
struct IterateComparison {
  double max_relative_deviation = 0.0;
  std::size_t iterations_compared = 0;
};

struct ScenarioResult {
  int exit_code = 0;
  std::string diagnostic;
  std::optional<RunResult> central;
  std::optional<HierarchicalResult> hierarchical;
  std::optional<IterateComparison> comparison;
  std::optional<ConvergenceCertificate> certificate;
  double step = 0.0;
  nlohmann::json report;
};

namespace detail {

inline nlohmann::json run_summary(const OpfProblem& prob, const IterateState& s, const RunTrace& t) {
  nlohmann::json j;
  j["converged"] = t.converged;
  j["iterations"] = t.iterations;
  j["v_min"] = s.v.minCoeff();
  j["v_max"] = s.v.maxCoeff();
  j["objective"] = objective(prob, s.p, s.q);
  j["P0"] = s.p0;
  j["coupling_flops_per_iteration"] = t.records.empty() ? 0 : t.records.back().coupling_flops;
  j["message_scalars_per_iteration"] = t.records.empty() ? 0 : t.records.back().messages;
  double wall = 0.0;
  for (const auto& r : t.records) wall += r.wall_seconds;
  j["wall_seconds"] = wall;
  return j;
}

}  // namespace detail

inline int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const DivergenceError*>(&e) || dynamic_cast<const ConvergenceError*>(&e) ||
      dynamic_cast<const VoltageCollapseError*>(&e)) {
    return 3;
  }
  return 2;
}

// Runs the configured solver(s) and writes, under config.output_dir:
// trace_central.csv, trace_hierarchical.csv, messages.csv, profile.csv,
// report.json. Never throws for model errors; they become the exit code.
inline ScenarioResult run_scenario(const ScenarioConfig& config, bool write_files = true) {
  ScenarioResult out;
  try {
    const Scenario sc = build_scenario(config);
    const auto& prob = sc.problem;
    const auto& model = sc.feeder.model;
    const SensitivityPair sens = build_sensitivity(model);
    out.certificate = certify_stepsize(prob, sens);
    out.step = config.step ? *config.step : out.certificate->step(config.step_fraction);

    SolverOptions opts;
    opts.step = out.step;
    opts.tolerance = config.tolerance;
    opts.max_iter = config.max_iter;
    opts.stop = config.stop;

    const Vector v_initial = Plant::make(config.voltage_source, model, sens)
                                 .measure(initial_dispatch(prob).p, initial_dispatch(prob).q);

    std::vector<Vector> central_iterates;
    if (config.solver != SolverChoice::Hierarchical) {
      SolverOptions co = opts;
      if (config.solver == SolverChoice::Both) {
        co.on_iterate = [&](const IterateState& s) { central_iterates.push_back(s.stacked()); };
      }
      out.central = run_central(prob, sens, Plant::make(config.voltage_source, model, sens), co);
      out.central->trace.certificate = out.certificate;
    }
    if (config.solver != SolverChoice::Central) {
      const AgentViews views = make_agent_views(model, sc.partition);
      SolverOptions ho = opts;
      IterateComparison cmp;
      if (config.solver == SolverChoice::Both) {
        ho.on_iterate = [&](const IterateState& s) {
          if (s.t == 0 || s.t > central_iterates.size()) return;
          const Vector& ref = central_iterates[s.t - 1];
          const double dev = (s.stacked() - ref).lpNorm<Eigen::Infinity>() /
                             std::max(1.0, ref.lpNorm<Eigen::Infinity>());
          cmp.max_relative_deviation = std::max(cmp.max_relative_deviation, dev);
          cmp.iterations_compared = s.t;
        };
      }
      HierarchyOptions hopts;
      hopts.parallel_regions = config.parallel_regions;
      out.hierarchical = run_hierarchical(prob, views, sc.partition, Plant::make(config.voltage_source, model), ho, hopts);
      out.hierarchical->trace.certificate = out.certificate;
      if (config.solver == SolverChoice::Both) out.comparison = cmp;
    }

    auto& rep = out.report;
    rep["scenario"] = config.name;
    rep["nodes"] = model.node_count;
    rep["ag_count"] = sc.partition.K();
    rep["unclustered"] = sc.partition.U();
    rep["voltage_source"] = std::string(to_string(config.voltage_source));
    rep["stop"] = std::string(to_string(config.stop));
    rep["tolerance"] = config.tolerance;
    rep["step"] = out.step;
    rep["phi"] = prob.phi;
    rep["alpha"] = prob.alpha;
    rep["P0_target"] = prob.p0_target;
    rep["initial_v_min"] = v_initial.minCoeff();
    rep["certificate"] = {{"M", out.certificate->M},
                          {"L", out.certificate->L},
                          {"step_bound", out.certificate->step_bound},
                          {"certified", out.certificate->certifies(out.step)}};
    if (out.central) rep["central"] = detail::run_summary(prob, out.central->state, out.central->trace);
    if (out.hierarchical) {
      rep["hierarchical"] = detail::run_summary(prob, out.hierarchical->state, out.hierarchical->trace);
    }
    if (out.comparison) {
      rep["comparison"] = {{"max_relative_deviation", out.comparison->max_relative_deviation},
                           {"iterations_compared", out.comparison->iterations_compared},
                           {"coupling_flop_ratio", static_cast<double>(hierarchical_coupling_flops(sc.partition)) /
                                                       static_cast<double>(central_coupling_flops(model.node_count))}};
    }

    if (write_files) {
      namespace fs = std::filesystem;
      const fs::path dir(config.output_dir);
      std::error_code ec;
      fs::create_directories(dir, ec);
      if (ec) throw ValidationError("cannot create output directory '" + config.output_dir + "'");
      const IterateState* final_state = nullptr;
      if (out.central) {
        write_trace((dir / "trace_central.csv").string(), out.central->trace);
        final_state = &out.central->state;
      }
      if (out.hierarchical) {
        write_trace((dir / "trace_hierarchical.csv").string(), out.hierarchical->trace);
        write_message_log((dir / "messages.csv").string(), out.hierarchical->log);
        final_state = &out.hierarchical->state;
      }
      write_profile((dir / "profile.csv").string(), v_initial, final_state->v, prob.v_min, prob.v_max);
      std::ofstream rep_out(dir / "report.json");
      rep_out << rep.dump(2) << '\n';
    }
  } catch (const std::exception& e) {
    out.exit_code = exit_code_for(e);
    out.diagnostic = e.what();
  }
  return out;
}

}  // namespace hdvr
