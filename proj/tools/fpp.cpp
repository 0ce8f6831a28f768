#include "fpp/cli.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
  CLI::App app{"Maximal streams in first passage percolation: max flow, mixing, distances and Monte Carlo rates"};
  app.set_version_flag("--version", fpp::version_string() + " (" + fpp::git_revision() + ")");
  app.require_subcommand(1);

  struct Options {
    std::string config;
    std::string out = "out";
    int threads = 0;
    std::vector<std::string> overrides;
  };
  std::vector<std::pair<CLI::App*, Options>> subs;
  subs.reserve(fpp::subcommands().size());
  for (const std::string& name : fpp::subcommands()) {
    subs.emplace_back(app.add_subcommand(name, "run the " + name + " experiment"), Options{});
    auto& [sub, opt] = subs.back();
    sub->add_option("-c,--config", opt.config, "config file (key = value lines)")->check(CLI::ExistingFile);
    sub->add_option("-o,--out", opt.out, "output directory")->capture_default_str();
    sub->add_option("-t,--threads", opt.threads, "worker threads; overrides the config and FPP_THREADS")
        ->check(CLI::PositiveNumber);
    sub->add_option("--set", opt.overrides, "override a config key, key=value (repeatable)");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : fpp::kExitConfig;
  }

  for (auto& [sub, opt] : subs) {
    if (sub->parsed()) {
      return fpp::run_command(sub->get_name(), opt.config, opt.overrides, opt.out, opt.threads, std::cerr);
    }
  }
  return fpp::kExitConfig;
}
