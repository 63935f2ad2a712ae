// hdvr: command-line driver.
//
//   hdvr generate  --nodes 60 --seed 7 -o feeder.txt
//   hdvr partition --feeder feeder.txt --ag-count 3 -o partition.txt
//   hdvr run       --preset undervoltage-chain-20 -o out/
//   hdvr compare   --feeder feeder.txt --partition partition.txt --max-iter 200
//   hdvr certify   --feeder feeder.txt --phi 0.05
//
// Exit codes: 0 ok, 1 usage, 2 validation, 3 divergence (or solver mismatch
// in compare).

#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "hdvr/hdvr.hpp"

namespace {

struct ScenarioFlags {
  std::string config;
  std::string preset;
  std::string feeder;
  std::string partition;
  std::vector<int> roots;
  std::string step;
  std::string stop;
  std::string voltage_source;
  std::string solver;
  std::string output;
  bool parallel = false;

  // Flag targets; only flags actually given override the preset/config.
  hdvr::ScenarioConfig values;
  CLI::App* app = nullptr;
};

void add_generator_flags(CLI::App& app, hdvr::FeederSpec& g) {
  app.add_option("--nodes", g.nodes, "Non-slack node count");
  app.add_option("--max-branching", g.max_branching, "Maximum children per node");
  app.add_option("--chain-bias", g.chain_bias, "Chance a new node extends the previous one");
  app.add_option("--target-v-min", g.target_v_min, "Scale loads so the lowest linear voltage equals this (0: off)");
  app.add_option("--device-fraction", g.device_fraction, "Chance a node carries a DER");
}

void add_scenario_flags(CLI::App& app, ScenarioFlags& f) {
  f.app = &app;
  auto& v = f.values;
  app.add_option("--config", f.config, "JSON scenario file");
  app.add_option("--preset", f.preset, "Named scenario")->check(CLI::IsMember(hdvr::preset_names()));
  app.add_option("--feeder", f.feeder, "Feeder file (default: generate)");
  app.add_option("--partition", f.partition, "Partition file");
  app.add_option("--roots", f.roots, "AG roots")->delimiter(',');
  app.add_option("--ag-count", v.ag_count, "AG count for auto partitioning");
  app.add_option("--seed", v.seed, "Generator seed");
  add_generator_flags(app, v.generator);
  app.add_option("--step", f.step, "Step size, or 'auto' for 0.9 of the certified bound");
  app.add_option("--step-fraction", v.step_fraction, "Fraction of the certified bound used by 'auto'");
  app.add_option("--phi", v.phi, "Dual regularization");
  app.add_option("--tolerance", v.tolerance, "Stopping tolerance");
  app.add_option("--max-iter", v.max_iter, "Iteration cap");
  app.add_option("--stop", f.stop, "Stop rule: residual or p0")->check(CLI::IsMember({"residual", "p0"}));
  app.add_option("--alpha", v.alpha, "Head cost weight");
  app.add_option("--p0-fraction", v.p0_fraction, "P0 target as a fraction of the initial P0");
  app.add_option("--v-min", v.v_min, "Lower voltage bound for generated feeders");
  app.add_option("--v-max", v.v_max, "Upper voltage bound for generated feeders");
  app.add_option("--voltage-source", f.voltage_source, "linear or nonlinear")
      ->check(CLI::IsMember({"linear", "nonlinear"}));
  app.add_flag("--parallel", f.parallel, "Run regional coordinators on worker threads");
  app.add_option("-o,--output", f.output, "Output directory");
}

// Precedence: defaults < preset < config file < explicit flags.
hdvr::ScenarioConfig resolve(const ScenarioFlags& f) {
  hdvr::ScenarioConfig c;
  if (!f.preset.empty()) c = hdvr::preset(f.preset);
  if (!f.config.empty()) c = hdvr::read_config(f.config, c);
  auto given = [&](const char* name) { return f.app->count(name) > 0; };
  const auto& v = f.values;
  if (given("--feeder")) c.feeder_file = f.feeder;
  if (given("--partition")) c.partition_file = f.partition;
  if (given("--roots")) c.roots.assign(f.roots.begin(), f.roots.end());
  if (given("--ag-count")) {
    c.ag_count = v.ag_count;
    c.roots.clear();
  }
  if (given("--seed")) c.seed = v.seed;
  if (given("--nodes")) c.generator.nodes = v.generator.nodes;
  if (given("--max-branching")) c.generator.max_branching = v.generator.max_branching;
  if (given("--chain-bias")) c.generator.chain_bias = v.generator.chain_bias;
  if (given("--target-v-min")) c.generator.target_v_min = v.generator.target_v_min;
  if (given("--device-fraction")) c.generator.device_fraction = v.generator.device_fraction;
  if (given("--step")) {
    if (f.step == "auto") {
      c.step.reset();
    } else {
      try {
        c.step = std::stod(f.step);
      } catch (const std::exception&) {
        throw hdvr::ValidationError("--step must be a number or 'auto'");
      }
    }
  }
  if (given("--step-fraction")) c.step_fraction = v.step_fraction;
  if (given("--phi")) c.phi = v.phi;
  if (given("--tolerance")) c.tolerance = v.tolerance;
  if (given("--max-iter")) c.max_iter = v.max_iter;
  if (given("--stop")) c.stop = hdvr::parse_stop_rule(f.stop);
  if (given("--alpha")) c.alpha = v.alpha;
  if (given("--p0-fraction")) c.p0_fraction = v.p0_fraction;
  if (given("--v-min")) c.v_min = v.v_min;
  if (given("--v-max")) c.v_max = v.v_max;
  if (given("--voltage-source")) c.voltage_source = hdvr::parse_voltage_source(f.voltage_source);
  if (given("--parallel")) c.parallel_regions = f.parallel;
  if (given("--output")) c.output_dir = f.output;
  return c;
}

int report_error(const std::exception& e) {
  std::cerr << "error: " << e.what() << '\n';
  return hdvr::exit_code_for(e);
}

int cmd_generate(const hdvr::FeederSpec& spec, std::uint64_t seed, double v_min, double v_max,
                 const std::string& output) {
  const auto file = hdvr::generate_feeder_file(spec, seed, v_min, v_max);
  if (output.empty() || output == "-") {
    hdvr::write_feeder(std::cout, file);
  } else {
    hdvr::write_feeder(output, file);
    std::cerr << "wrote " << output << " (" << file.model.node_count << " nodes)\n";
  }
  return 0;
}

int cmd_partition(const std::string& feeder, std::size_t k, const std::vector<int>& roots,
                  const std::string& output) {
  const auto file = hdvr::read_feeder(feeder);
  const auto part = roots.empty() ? hdvr::auto_partition(file.model, k)
                                  : hdvr::Partition::from_roots(file.model, {roots.begin(), roots.end()});
  hdvr::require_valid_partition(file.model, part);
  if (output.empty() || output == "-") {
    hdvr::write_partition(std::cout, part);
  } else {
    hdvr::write_partition(output, part);
    std::cerr << "wrote " << output << " (" << part.K() << " AGs, " << part.U() << " unclustered)\n";
  }
  return 0;
}

int cmd_run(hdvr::ScenarioConfig c, bool compare, double max_deviation) {
  if (compare) c.solver = hdvr::SolverChoice::Both;
  const auto result = hdvr::run_scenario(c);
  if (result.exit_code != 0) {
    std::cerr << "error: " << result.diagnostic << '\n';
    return result.exit_code;
  }
  std::cout << result.report.dump(2) << '\n';
  std::cerr << "artifacts in " << c.output_dir << '\n';
  if (compare && result.comparison && !(result.comparison->max_relative_deviation <= max_deviation)) {
    std::cerr << "solvers disagree: max relative deviation " << result.comparison->max_relative_deviation << " > "
              << max_deviation << '\n';
    return 3;
  }
  return 0;
}

int cmd_certify(const hdvr::ScenarioConfig& c, double fraction) {
  const auto sc = hdvr::build_scenario(c);
  const auto sens = hdvr::build_sensitivity(sc.feeder.model);
  const auto cert = hdvr::certify_stepsize(sc.problem, sens);
  nlohmann::json j = {{"nodes", sc.feeder.model.node_count},
                      {"phi", sc.problem.phi},
                      {"M", cert.M},
                      {"L", cert.L},
                      {"step_bound", cert.step_bound},
                      {"suggested_step", cert.step(fraction)},
                      {"power_iterations", cert.power_iterations}};
  if (c.step) {
    j["step"] = *c.step;
    j["certified"] = cert.certifies(*c.step);
    j["contraction"] = cert.contraction(*c.step);
  }
  std::cout << j.dump(2) << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hierarchical distributed voltage regulation"};
  app.require_subcommand(1);

  auto* gen = app.add_subcommand("generate", "Write a random feeder file");
  hdvr::FeederSpec spec;
  std::uint64_t seed = 0;
  double gen_v_min = 0.95, gen_v_max = 1.05;
  std::string gen_out;
  gen->add_option("--seed", seed, "Generator seed")->required();
  add_generator_flags(*gen, spec);
  gen->add_option("--v-min", gen_v_min, "Lower voltage bound");
  gen->add_option("--v-max", gen_v_max, "Upper voltage bound");
  gen->add_option("-o,--output", gen_out, "Output file (default: stdout)");

  auto* part = app.add_subcommand("partition", "Write a partition file for a feeder");
  std::string part_feeder, part_out;
  std::size_t part_k = 4;
  std::vector<int> part_roots;
  part->add_option("--feeder", part_feeder, "Feeder file")->required();
  part->add_option("--ag-count", part_k, "AG count for auto partitioning");
  part->add_option("--roots", part_roots, "Explicit AG roots")->delimiter(',');
  part->add_option("-o,--output", part_out, "Output file (default: stdout)");

  auto* run = app.add_subcommand("run", "Run a scenario and write traces and a report");
  ScenarioFlags run_flags;
  add_scenario_flags(*run, run_flags);
  run->add_option("--solver", run_flags.solver, "central, hierarchical or both")
      ->check(CLI::IsMember({"central", "hierarchical", "both"}));

  auto* cmp = app.add_subcommand("compare", "Run both solvers and compare their iterates");
  ScenarioFlags cmp_flags;
  double max_deviation = 1e-9;
  add_scenario_flags(*cmp, cmp_flags);
  cmp->add_option("--max-deviation", max_deviation, "Largest acceptable relative iterate deviation");

  auto* cert = app.add_subcommand("certify", "Print the step-size certificate for a scenario");
  ScenarioFlags cert_flags;
  double fraction = 0.9;
  add_scenario_flags(*cert, cert_flags);
  cert->add_option("--fraction", fraction, "Fraction of the bound to suggest");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (*gen) return cmd_generate(spec, seed, gen_v_min, gen_v_max, gen_out);
    if (*part) return cmd_partition(part_feeder, part_k, part_roots, part_out);
    if (*run) {
      auto c = resolve(run_flags);
      if (run->count("--solver")) c.solver = hdvr::parse_solver_choice(run_flags.solver);
      return cmd_run(c, false, 0.0);
    }
    if (*cmp) return cmd_run(resolve(cmp_flags), true, max_deviation);
    if (*cert) return cmd_certify(resolve(cert_flags), fraction);
  } catch (const std::exception& e) {
    return report_error(e);
  }
  return 1;
}
