#include <cstdlib>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "pgglmc/harness.hpp"

namespace {

unsigned default_threads() {
  if (const char* env = std::getenv("PGGLMC_THREADS")) {
    try {
      const long v = std::stol(env);
      if (v >= 1) return static_cast<unsigned>(v);
    } catch (const std::exception&) {
    }
    std::cerr << "warning: ignoring invalid PGGLMC_THREADS='" << env << "'\n";
  }
  return 1;
}

void add_common(CLI::App* cmd, pgglmc::CommandOptions& opt, std::uint64_t& seed, bool config_required) {
  auto* c = cmd->add_option("--config", opt.config_path, "Experiment configuration (JSON)");
  if (config_required) c->required();
  cmd->add_option("--out", opt.out_dir, "Output directory");
  cmd->add_option("--seed", seed, "Master seed (overrides lmc.seed)");
  cmd->add_option("--threads", opt.threads, "Worker threads (default $PGGLMC_THREADS or 1)")
      ->check(CLI::PositiveNumber);
  cmd->add_flag("--quiet", opt.quiet, "Suppress progress output");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Black-box Langevin Monte Carlo with p-generalized Gaussian smoothing"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(pgglmc::kSoftwareVersion));

  pgglmc::CommandOptions opt;
  opt.threads = default_threads();
  std::uint64_t seed = 0;
  std::string suite;

  auto* sample = app.add_subcommand("sample", "Run chains and write final states (CSV) and a report (JSON)");
  add_common(sample, opt, seed, true);
  auto* verify = app.add_subcommand("verify", "Run a property suite and print a pass/fail table");
  verify->add_option("suite", suite, "moments, lemma1, lemma2, mixing, transport or all")->required();
  add_common(verify, opt, seed, false);
  auto* bounds = app.add_subcommand("bounds", "Print the itemized theoretical bounds for a configuration");
  add_common(bounds, opt, seed, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : pgglmc::kExitConfig;
  }

  for (auto* cmd : {sample, verify, bounds})
    if (cmd->parsed() && cmd->count("--seed")) opt.seed = seed;

  if (sample->parsed()) return pgglmc::cmd_sample(opt, std::cout, std::cerr);
  if (verify->parsed()) return pgglmc::cmd_verify(suite, opt, std::cout, std::cerr);
  return pgglmc::cmd_bounds(opt, std::cout, std::cerr);
}
