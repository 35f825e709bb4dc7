#include <CLI11.hpp>

#include <cstdint>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "halfcalc/cli.hpp"

namespace {

constexpr int exit_ok = 0;
constexpr int exit_usage = 2;
constexpr int exit_numeric = 3;

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw halfcalc::usage_error("cannot read '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int check_only(const std::string& command, const halfcalc::cli::json& doc) {
  if (doc.value("command", std::string()) != command)
    throw halfcalc::usage_error("report was produced by '" + doc.value("command", std::string("?")) +
                                "', not '" + command + "'");
  const auto c = halfcalc::cli::check_report(doc);
  for (const auto& p : c.problems) std::cerr << "check: " << p << "\n";
  std::cout << "check: " << c.verdicts << " verdicts, " << (c.ok() ? "consistent" : "INCONSISTENT") << "\n";
  return c.ok() ? exit_ok : exit_numeric;
}

int run(int argc, char** argv) {
  CLI::App app{"halfcalc: H-infinity functional calculus for semigroup generators"};
  std::string command, config_path, out_path;
  std::uint64_t seed = 0;
  bool check = false;
  app.add_option("command", command, "apply | laws | observability | example | toeplitz-demo")
      ->required()
      ->check(CLI::IsMember(halfcalc::cli::command_names()));
  app.add_option("--config", config_path, "JSON job configuration (or a report, with --check)")->required();
  app.add_option("--out", out_path, "write the report here instead of stdout");
  auto* seed_opt = app.add_option("--seed", seed, "seed for randomized searches");
  app.add_flag("--check", check, "re-parse the report and re-validate every verdict");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? exit_ok : exit_usage;
  }

  const auto config = halfcalc::cli::parse_text(read_file(config_path), config_path);
  if (check && config.is_object() && config.value("schema", std::string()) == halfcalc::cli::report_schema)
    return check_only(command, config);

  halfcalc::cli::CommandInput in{config, 0};
  if (seed_opt->count() > 0) {
    in.seed = seed;
  } else if (config.is_object() && config.contains("seed")) {
    if (!config["seed"].is_number_unsigned()) throw halfcalc::usage_error("seed: expected a nonnegative integer");
    in.seed = config["seed"].get<std::uint64_t>();
  }

  const auto report = halfcalc::cli::run_command(command, in);
  const std::string text = halfcalc::cli::to_text(report);
  if (out_path.empty()) {
    std::cout << text;
  } else {
    std::ofstream out(out_path, std::ios::binary);
    if (!out) throw halfcalc::usage_error("cannot write '" + out_path + "'");
    out << text;
  }
  if (check) {
    const auto c = halfcalc::cli::check_report(halfcalc::cli::parse_text(text, "report"));
    for (const auto& p : c.problems) std::cerr << "check: " << p << "\n";
    if (!c.ok()) return exit_numeric;
  }
  return exit_ok;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const halfcalc::usage_error& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return exit_usage;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return exit_usage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_numeric;
  }
}
