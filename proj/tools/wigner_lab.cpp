#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "wigner/beable.hpp"
#include "wigner/dsl.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitDiagnostics = 1;
constexpr int kExitExpectMismatch = 2;
constexpr int kExitInternal = 3;

struct Globals {
  double tolerance = 1e-9;
  bool exact = false;
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw wigner::error("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Loads a scenario file; prints diagnostics and returns nullopt on error.
std::optional<wigner::ResolvedScenario> load_file(const std::string& path) {
  wigner::ResolvedScenario rs = wigner::load_scenario(
      read_file(path), std::filesystem::path(path).stem().string());
  for (const auto& d : rs.diagnostics) std::cerr << d.str() << "\n";
  if (!rs.ok()) return std::nullopt;
  return rs;
}

void print_joint_table(const wigner::JointDistribution& joint, bool exact) {
  for (const auto& v : joint.variables) std::cout << v << "  ";
  std::cout << "p\n";
  for (const auto& [key, e] : joint.table) {
    for (const auto& l : key) std::cout << l << "  ";
    std::cout << wigner::format_double(e.p);
    if (exact && e.p_exact) std::cout << "  [" << e.p_exact->str() << "]";
    std::cout << "\n";
  }
}

int cmd_run(const Globals& g, const std::string& file, bool json, bool table,
            bool dump) {
  auto rs = load_file(file);
  if (!rs) return kExitDiagnostics;
  wigner::RunResult rr = wigner::run(rs->scenario);
  if (json && !table) {
    nlohmann::json j;
    j["scenario"] = rs->scenario.name;
    j["normalization"] = rr.normalization;
    j["joint"] = rr.joint.to_json();
    if (!rs->scenario.statements.empty()) {
      j["statements"] = nlohmann::json::array();
      for (const auto& s : rs->scenario.statements) {
        auto res = wigner::evaluate_statement_in_run(rr, s, g.tolerance);
        j["statements"].push_back({{"id", res.id},
                                   {"verdict", verdict_name(res.verdict)},
                                   {"p", res.probability}});
      }
    }
    if (dump && rr.final_state)
      j["state"] = wigner::dump_state(*rr.final_state);
    std::cout << j.dump(2) << "\n";
  } else {
    std::cout << "scenario: " << rs->scenario.name << "\n";
    if (rr.normalization < 1.0 - 1e-12)
      std::cout << "normalization: "
                << wigner::format_double(rr.normalization) << "\n";
    print_joint_table(rr.joint, g.exact);
    for (const auto& s : rs->scenario.statements) {
      auto res = wigner::evaluate_statement_in_run(rr, s, g.tolerance);
      std::cout << res.id << ": " << verdict_name(res.verdict) << " (p="
                << wigner::format_double(res.probability) << ")\n";
    }
    if (dump) {
      if (rr.final_state)
        std::cout << "final state:\n"
                  << wigner::dump_state(*rr.final_state);
      else
        std::cout << "final state: mixed (unselected collapse)\n";
    }
  }
  return kExitOk;
}

// Verdicts vs the file's expect annotations; exit 2 on any mismatch.
int check_one(const Globals& g, const std::string& file, int& checked) {
  auto rs = load_file(file);
  if (!rs) return kExitDiagnostics;
  wigner::RunResult rr = wigner::run(rs->scenario);
  int rc = kExitOk;
  for (const auto& s : rs->scenario.statements) {
    auto res = wigner::evaluate_statement_in_run(rr, s, g.tolerance);
    std::string got = verdict_name(res.verdict);
    if (!s.expect) {
      std::cout << rs->scenario.name << " " << s.id << ": " << got
                << " (no expectation)\n";
      continue;
    }
    ++checked;
    bool ok = got == *s.expect;
    std::cout << rs->scenario.name << " " << s.id << ": " << got
              << (ok ? " as expected" : " but expected " + *s.expect) << "\n";
    if (!ok) rc = kExitExpectMismatch;
  }
  return rc;
}

int cmd_check(const Globals& g, const std::string& file) {
  int checked = 0;
  return check_one(g, file, checked);
}

int cmd_check_all(const Globals& g, const std::string& dir) {
  std::vector<std::string> files;
  for (const auto& e : std::filesystem::directory_iterator(dir))
    if (e.path().extension() == ".scn") files.push_back(e.path().string());
  std::sort(files.begin(), files.end());
  if (files.empty()) {
    std::cerr << "no .scn files in '" << dir << "'\n";
    return kExitDiagnostics;
  }
  int rc = kExitOk;
  int checked = 0;
  for (const auto& f : files) {
    int one = check_one(g, f, checked);
    rc = std::max(rc, one);
  }
  std::cout << files.size() << " files, " << checked
            << " expectations checked\n";
  return rc;
}

int cmd_matrix(const Globals& g, const std::string& suite, bool mixed,
               bool json) {
  if (suite != "fr") {
    std::cerr << "unknown suite '" << suite << "' (available: fr)\n";
    return kExitDiagnostics;
  }
  wigner::MatrixReport rep = wigner::statement_matrix(
      wigner::fr_suite(), wigner::table_ii_statements(), g.tolerance);
  if (mixed) rep.rows.push_back(wigner::mixed_mode_row());
  if (json)
    std::cout << rep.to_json().dump(2) << "\n";
  else
    std::cout << rep.to_text();
  return kExitOk;
}

int cmd_sample(const Globals&, const std::string& file, std::size_t n,
               std::optional<std::uint64_t> seed_flag,
               std::optional<std::string> kernel_flag) {
  auto rs = load_file(file);
  if (!rs) return kExitDiagnostics;

  // precedence: CLI flag, then the file's option, then WIGNER_LAB_SEED, 0
  std::uint64_t seed = 0;
  if (const char* env = std::getenv("WIGNER_LAB_SEED"))
    seed = std::strtoull(env, nullptr, 10);
  if (auto it = rs->options.find("seed"); it != rs->options.end())
    seed = std::strtoull(it->second.c_str(), nullptr, 10);
  if (seed_flag) seed = *seed_flag;

  std::string kernel = "independent";
  if (auto it = rs->options.find("kernel"); it != rs->options.end())
    kernel = it->second;
  if (kernel_flag) kernel = *kernel_flag;
  wigner::KernelKind kind;
  if (kernel == "independent") {
    kind = wigner::KernelKind::kIndependentResample;
  } else if (kernel == "minimal") {
    kind = wigner::KernelKind::kMinimalTransport;
  } else {
    std::cerr << "unknown kernel '" << kernel
              << "' (available: independent, minimal)\n";
    return kExitDiagnostics;
  }

  wigner::SampleReport rep =
      wigner::sample_trajectories(rs->scenario, kind, n, seed);
  std::cout << rep.trajectories_jsonl();
  std::cout << rep.summary_json().dump(2) << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"multi-agent quantum measurement scenario lab"};
  app.require_subcommand(1);
  // let --tolerance/--exact appear after the subcommand too
  app.fallthrough();
  Globals g;
  app.add_option("--tolerance", g.tolerance,
                 "certainty threshold for statement verdicts")
      ->capture_default_str();
  app.add_flag("--exact", g.exact, "also print exact rationals");

  std::string run_file;
  bool run_json = false, run_table = false, run_dump = false;
  auto* run = app.add_subcommand("run", "run a scenario file");
  run->add_option("file", run_file)->required();
  run->add_flag("--json", run_json);
  run->add_flag("--table", run_table);
  run->add_flag("--dump-state", run_dump);

  std::string check_file;
  auto* check = app.add_subcommand(
      "check", "evaluate a scenario's expect annotations");
  check->add_option("file", check_file)->required();

  std::string check_dir;
  auto* check_all = app.add_subcommand(
      "check-all", "check every .scn file in a directory");
  check_all->add_option("dir", check_dir)->required();

  std::string suite = "fr";
  bool mixed = false, matrix_json = false;
  auto* matrix = app.add_subcommand(
      "matrix", "configuration x statement verdict table");
  matrix->add_option("--suite", suite)->capture_default_str();
  matrix->add_flag("--mixed", mixed,
                   "append the non-physical mixed-configuration row");
  matrix->add_flag("--json", matrix_json);

  std::string sample_file;
  std::size_t sample_n = 1000;
  std::optional<std::uint64_t> sample_seed;
  std::optional<std::string> sample_kernel;
  auto* sample = app.add_subcommand(
      "sample", "sample pointer-configuration trajectories");
  sample->add_option("file", sample_file)->required();
  sample->add_option("--n", sample_n)->capture_default_str();
  sample->add_option("--seed", sample_seed,
                     "defaults to WIGNER_LAB_SEED, then 0");
  sample->add_option("--kernel", sample_kernel)
      ->check(CLI::IsMember({"independent", "minimal"}));

  for (auto* s : {run, check, check_all, matrix, sample}) s->fallthrough();
  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return cmd_run(g, run_file, run_json, run_table,
                                      run_dump);
    if (check->parsed()) return cmd_check(g, check_file);
    if (check_all->parsed()) return cmd_check_all(g, check_dir);
    if (matrix->parsed()) return cmd_matrix(g, suite, mixed, matrix_json);
    if (sample->parsed())
      return cmd_sample(g, sample_file, sample_n, sample_seed, sample_kernel);
  } catch (const wigner::error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitDiagnostics;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kExitInternal;
  }
  return kExitOk;
}
