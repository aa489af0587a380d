// dirtytx: run transmitter-impairment experiments from JSON configs.
//
//   dirtytx run <config.json> [--out PATH] [--format csv|json] [--seed N] [--threads N]
//   dirtytx list-experiments
//
// Exit codes: 0 success, 2 config error, 3 numerical failure, 1 anything else.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "dirtytx/experiments.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;

int run(const std::string& config_path, const std::string& out, const std::string& format,
        std::optional<std::uint64_t> seed, int threads) {
  using namespace dirtytx;
  if (threads > 0) set_thread_count(threads);
  ExperimentConfig cfg = load_config(config_path, seed);
  if (!format.empty()) cfg.format = parse_format(format);
  const std::string path = out.empty() ? cfg.output_path : out;

  const ResultTable table = run_experiment(cfg);
  const std::string text = emit(table, cfg.format);
  if (path.empty() || path == "-") {
    std::cout << text;
    return 0;
  }
  std::ofstream f(path, std::ios::binary);
  f << text;
  f.close();
  if (!f) {
    std::cerr << "dirtytx: cannot write " << path << "\n";
    return 1;
  }
  std::cerr << "dirtytx: " << table.rows.size() << " rows -> " << path << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Backward-crosstalk MIMO transmitter experiments"};
  app.require_subcommand(1);

  auto* run_cmd = app.add_subcommand("run", "run an experiment config");
  std::string config, out, format;
  std::uint64_t seed = 0;
  int threads = 0;
  run_cmd->add_option("config", config, "experiment config (JSON)")->required();
  run_cmd->add_option("--out", out, "output path ('-' for stdout)");
  auto* fmt = run_cmd->add_option("--format", format, "csv or json");
  fmt->check(CLI::IsMember({"csv", "json"}));
  auto* seed_opt = run_cmd->add_option("--seed", seed, "override the config seed");
  run_cmd->add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);

  app.add_subcommand("list-experiments", "list experiment kinds");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitConfig;
  }

  if (app.got_subcommand("list-experiments")) {
    for (const auto& k : dirtytx::experiment_kinds())
      std::cout << k.kind << "\t" << k.description << "\n";
    return 0;
  }

  try {
    return run(config, out, format,
               seed_opt->count() ? std::optional<std::uint64_t>(seed) : std::nullopt, threads);
  } catch (const dirtytx::ConfigError& e) {
    std::cerr << "dirtytx: config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const dirtytx::DomainError& e) {
    std::cerr << "dirtytx: invalid parameters: " << e.what() << "\n";
    return kExitConfig;
  } catch (const dirtytx::NumericalError& e) {
    std::cerr << "dirtytx: numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "dirtytx: " << e.what() << "\n";
    return 1;
  }
}
