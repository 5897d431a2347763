#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "phs/phs.hpp"

namespace fs = std::filesystem;
using namespace phs;

namespace {

constexpr int exit_ok = 0;
constexpr int exit_error = 1;
constexpr int exit_negative = 2;      // not a generator, or a property failed
constexpr int exit_audit_failed = 3;  // simulation ran but the energy audit or certificate failed

/// A path to a config file, or the name of a built-in fixture.
SystemConfig resolve(const std::string& arg) {
  if (fs::exists(arg)) return load_config(arg);
  if (find_fixture(arg)) return load_fixture(arg);
  throw ConfigError("no such file or fixture", arg);
}

void write_json(const nlohmann::json& j, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

GenerationReport generation_report(const SystemConfig& cfg) {
  GenerationOptions opt;
  opt.probe_radius = std::max(cfg.grid->right(), 1.0);
  return check_generation(cfg.system, opt);
}

void print_generation(const SystemConfig& cfg, const GenerationReport& r) {
  const auto& a = r.assumptions;
  std::cout << "system: " << (cfg.name.empty() ? "<unnamed>" : cfg.name) << "\n"
            << "inertia: n_plus = " << r.n_plus << ", n_minus = " << r.n_minus << "\n"
            << "sigma_min(U2) = " << r.sigma_min_U2 << ", rank W_B H(0) Z^-(0) = " << r.rank_cross << "\n"
            << "criteria agree: " << (r.criterion_agree ? "yes" : "NO") << "\n"
            << "assumptions: sup|Delta| = " << a.delta_sup << ", S pencil in [" << a.pencil_min << ", "
            << a.pencil_max << "], K1 = " << a.K1 << ", K2 = " << a.K2 << ", rank W_B = " << a.rank_W_B << "\n"
            << "verdict: " << (r.generator ? "generator" : "not a generator") << "\n";
}

int cmd_check(const std::string& config, const std::string& out, bool json_only) {
  const auto cfg = resolve(config);
  const auto r = generation_report(cfg);
  nlohmann::json j = {{"command", "check"}, {"system", cfg.name}, {"generation", to_json(r)}};
  if (json_only) {
    std::cout << j.dump(2) << '\n';
  } else {
    print_generation(cfg, r);
  }
  if (!out.empty()) {
    fs::create_directories(out);
    write_json(j, fs::path(out) / "report.json");
  }
  return r.generator ? exit_ok : exit_negative;
}

struct SimulateArgs {
  std::string config;
  std::string out = "phs-output";
  std::optional<double> T, dt;
  std::optional<int> snapshot_every;
  bool certificate = false;
};

void write_timeseries(const SimulationResult& r, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << "t";
  for (Eigen::Index j = 0; j < r.y.rows(); ++j) out << ",re_y_" << j << ",im_y_" << j;
  out << ",energy_x,energy_g,audit_residual\n" << std::setprecision(17);
  for (std::size_t k = 0; k < r.times.size(); ++k) {
    out << r.times[k];
    for (Eigen::Index j = 0; j < r.y.rows(); ++j) out << ',' << r.y(j, k).real() << ',' << r.y(j, k).imag();
    out << ',' << r.energy_x[k] << ',' << r.energy_g[k] << ',' << r.audit.residual[k] << '\n';
  }
}

int cmd_simulate(const SimulateArgs& args) {
  const auto cfg = resolve(args.config);
  if (!cfg.simulation) throw ConfigError("simulate needs a [simulation] table", "field simulation");
  auto opt = cfg.simulation_options();
  if (args.T) opt.T = *args.T;
  if (args.dt) opt.dt = *args.dt;
  if (args.snapshot_every) opt.snapshot_every = *args.snapshot_every;
  if (opt.dt > opt.T) throw DomainError("time step dt = " + std::to_string(opt.dt) + " exceeds the horizon T = " + std::to_string(opt.T));
  const fs::path out(args.out);
  fs::create_directories(out);

  const auto bcs = cfg.control();
  std::optional<Simulator> sim;
  try {
    sim.emplace(bcs, opt);
  } catch (const ClassificationError& e) {
    const auto r = generation_report(cfg);
    write_json({{"command", "simulate"}, {"system", cfg.name}, {"refused", e.what()}, {"generation", to_json(r)}},
               out / "report.json");
    print_generation(cfg, r);
    std::cerr << "phs: simulation refused: " << e.what() << '\n';
    return exit_negative;
  }
  const auto result = sim->run(cfg.initial_state(), cfg.input(sim->dt()));

  nlohmann::json snaps = nlohmann::json::array();
  for (std::size_t k = 0; k < result.snapshots.size(); ++k) {
    char name[32];
    std::snprintf(name, sizeof name, "snapshot_%04zu.csv", k);
    write_csv(result.snapshots[k], (out / name).string());
    snaps.push_back({{"file", name}, {"t", result.snapshot_times[k]}});
  }
  write_timeseries(result, out / "timeseries.csv");

  nlohmann::json j = {{"command", "simulate"},
                      {"system", cfg.name},
                      {"status", result.status},
                      {"T", opt.T},
                      {"dt", result.dt},
                      {"h", result.h},
                      {"steps", sim->steps()},
                      {"multiplier_bound", sim->multiplier_bound()},
                      {"audit", to_json(result.audit)},
                      {"energy_x", {{"initial", result.energy_x.front()}, {"final", result.energy_x.back()}}},
                      {"energy_g", {{"initial", result.energy_g.front()}, {"final", result.energy_g.back()}}},
                      {"snapshots", snaps},
                      {"generation", to_json(sim->generation())}};
  bool passed = result.audit.passed;
  std::cout << "system: " << cfg.name << "\n"
            << "steps: " << sim->steps() << " of dt = " << result.dt << " on " << opt.grid->size() << " nodes\n"
            << "status: " << result.status << "\n"
            << "energy audit: max residual " << result.audit.max_residual << " (bound " << result.audit.bound << ") "
            << (result.audit.passed ? "pass" : "FAIL") << "\n";
  if (args.certificate) {
    const CertificateSpec spec = cfg.certificate.value_or(CertificateSpec{});
    const auto c = well_posedness_certificate(bcs, opt, spec.tau, spec.trials, cfg.seed);
    j["certificate"] = to_json(c);
    passed = passed && c.passed;
    std::cout << "certificate: m_tau = " << c.m_tau << ", refined " << c.m_tau_refined << ", drift " << c.drift << " "
              << (c.passed ? "pass" : "FAIL") << "\n";
  }
  j["passed"] = passed;
  write_json(j, out / "report.json");
  std::cout << "outputs: " << out.string() << "\n";
  return passed ? exit_ok : exit_audit_failed;
}

int cmd_properties(const std::string& config, const std::string& suite, std::optional<unsigned> seed,
                   const std::string& out, bool json_only) {
  const auto cfg = resolve(config);
  const unsigned k = seed.value_or(cfg.seed);
  const auto reports = run_properties(suite, cfg, k);
  nlohmann::json j = {{"command", "properties"}, {"system", cfg.name}, {"suite", suite}, {"seed", k}};
  bool passed = true;
  for (const auto& r : reports) {
    j["suites"].push_back(to_json(r));
    passed = passed && r.passed();
  }
  j["passed"] = passed;
  if (json_only) {
    std::cout << j.dump(2) << '\n';
  } else {
    for (const auto& r : reports)
      for (const auto& p : r.properties)
        std::cout << (p.passed ? "PASS " : "FAIL ") << r.suite << " / " << p.name << ": residual " << p.max_residual
                  << " (tol " << p.tolerance << ")\n";
    std::cout << (passed ? "all properties pass" : "some properties FAIL") << "\n";
  }
  if (!out.empty()) {
    fs::create_directories(out);
    write_json(j, fs::path(out) / "report.json");
  }
  return passed ? exit_ok : exit_negative;
}

int cmd_fixtures_list() {
  for (const auto& f : fixtures()) std::cout << f.name << "\t" << load_fixture(f.name).description << "\n";
  return exit_ok;
}

int cmd_fixtures_show(const std::string& name) {
  const Fixture* f = find_fixture(name);
  if (!f) throw ConfigError("unknown fixture", name);
  std::cout << f->text;
  return exit_ok;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"port-Hamiltonian systems on the half-line: generation checks, simulation, property suites"};
  app.require_subcommand(1);

  std::string check_config, check_out;
  bool check_json = false;
  auto* check = app.add_subcommand("check", "decide whether the boundary conditions give a generator");
  check->add_option("config", check_config, "config file or fixture name")->required();
  check->add_option("--out", check_out, "directory for report.json");
  check->add_flag("--json", check_json, "print the JSON report instead of the summary");

  SimulateArgs sim_args;
  auto* simulate = app.add_subcommand("simulate", "simulate the boundary control system and audit its energy");
  simulate->add_option("config", sim_args.config, "config file or fixture name")->required();
  simulate->add_option("--out", sim_args.out, "output directory")->capture_default_str();
  simulate->add_option("--T", sim_args.T, "override the horizon");
  simulate->add_option("--dt", sim_args.dt, "override the time step");
  simulate->add_option("--snapshot-every", sim_args.snapshot_every, "store a snapshot every k steps");
  simulate->add_flag("--certificate", sim_args.certificate, "also run the well-posedness certificate");

  std::string prop_config, prop_suite = "all", prop_out;
  std::optional<unsigned> prop_seed;
  bool prop_json = false;
  auto* props = app.add_subcommand("properties", "run seeded numerical property suites");
  props->add_option("config", prop_config, "config file or fixture name")->required();
  props->add_option("--suite", prop_suite, "lemma1, semigroup, resolvent, transfer, criterion or all")
      ->check(CLI::IsMember({"lemma1", "semigroup", "resolvent", "transfer", "criterion", "all"}))
      ->capture_default_str();
  props->add_option("--seed", prop_seed, "random seed (default: [seeds] properties)");
  props->add_option("--out", prop_out, "directory for report.json");
  props->add_flag("--json", prop_json, "print the JSON report instead of the summary");

  auto* fix = app.add_subcommand("fixtures", "built-in example systems");
  fix->require_subcommand(1);
  auto* fix_list = fix->add_subcommand("list", "list fixture names");
  std::string show_name;
  auto* fix_show = fix->add_subcommand("show", "print a fixture's config text");
  fix_show->add_option("name", show_name)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? exit_ok : exit_error;
  }

  try {
    if (check->parsed()) return cmd_check(check_config, check_out, check_json);
    if (simulate->parsed()) return cmd_simulate(sim_args);
    if (props->parsed()) return cmd_properties(prop_config, prop_suite, prop_seed, prop_out, prop_json);
    if (fix_list->parsed()) return cmd_fixtures_list();
    if (fix_show->parsed()) return cmd_fixtures_show(show_name);
  } catch (const std::exception& e) {
    std::cerr << "phs: error: " << e.what() << '\n';
    return exit_error;
  }
  return exit_error;
}
