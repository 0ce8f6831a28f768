#pragma once

#include "fpp/environment.hpp"
#include "fpp/lattice.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace fpp {

// Exit codes of `run`.
constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitInvariant = 3;

// Schema violation; `key` is the offending field, `line` its line in the config file (0 for overrides).
class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& key, int line, const std::string& message);
  const std::string& key() const { return key_; }
  int line() const { return line_; }

 private:
  std::string key_;
  int line_;
};

// A computed artifact failed one of its own checks (duality gap, node law, reconstruction, ...).
class InvariantViolation : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Grammar, one assignment per line:
//   line    := blank | '#' comment | key '=' value [ '#' comment ]
//   key     := [A-Za-z_][A-Za-z0-9_]*
//   value   := list of items separated by ',' outside brackets; boxes use [lo,hi] and {a}, joined by 'x',
//              several boxes separated by ';'; numbers are integers, decimals or p/q.
// Later assignments of the same key win.
class Config {
 public:
  struct Entry {
    std::string value;
    int line = 0;
  };

  static Config parse(std::istream& is);
  static Config parse_file(const std::filesystem::path& path);

  // "key=value" from the command line.
  void set(const std::string& assignment);
  void set(const std::string& key, const std::string& value, int line = 0);

  bool has(const std::string& key) const { return entries_.count(key) > 0; }
  const std::map<std::string, Entry>& entries() const { return entries_; }
  const std::filesystem::path& base_dir() const { return base_dir_; }

  std::string str(const std::string& key) const;
  std::string str(const std::string& key, const std::string& fallback) const;
  int64_t integer(const std::string& key) const;
  int64_t integer(const std::string& key, int64_t fallback) const;
  uint64_t seed(const std::string& key, uint64_t fallback) const;
  double real(const std::string& key, double fallback) const;
  Rational rational(const std::string& key) const;
  Rational rational(const std::string& key, const Rational& fallback) const;
  bool flag(const std::string& key, bool fallback) const;
  std::vector<std::string> list(const std::string& key) const;
  std::vector<int64_t> integers(const std::string& key) const;
  std::vector<double> reals(const std::string& key) const;
  std::vector<Rational> rationals(const std::string& key) const;
  std::vector<RBox> boxes(const std::string& key) const;
  CapacityDistribution distribution(const std::string& key) const;
  // Relative paths are taken from the directory of the config file.
  std::filesystem::path path(const std::string& key) const;

  // ConfigError for the first key outside `allowed`.
  void require_known(const std::set<std::string>& allowed, const std::string& command) const;
  [[noreturn]] void fail(const std::string& key, const std::string& message) const;

 private:
  std::map<std::string, Entry> entries_;
  std::filesystem::path base_dir_ = ".";
};

std::vector<std::string> split_top_level(const std::string& text, char sep);

struct ExperimentConfig {
  std::string command;
  DomainSpec domain;
  CapacityDistribution dist;
  std::vector<int64_t> n_list;
  std::vector<double> eps;
  uint64_t trials = 0;
  uint64_t seed = 1;
  int threads = 1;
  std::filesystem::path out_dir = "out";
  Config raw;  // command-specific keys
};

const std::vector<std::string>& subcommands();

// Validates `raw` against the schema of `command`. Thread count: `threads_flag` when > 0, else the `threads`
// key, else FPP_THREADS, else 1.
ExperimentConfig make_experiment(const std::string& command, const Config& raw, const std::filesystem::path& out_dir,
                                 int threads_flag);

// Writes the artifacts and manifest.json into out_dir. Returns an exit code; messages go to `log`.
int run(const ExperimentConfig& cfg, std::ostream& log);

// Builds the experiment and runs it, mapping exceptions to exit codes.
int run_command(const std::string& command, const std::filesystem::path& config_path,
                const std::vector<std::string>& overrides, const std::filesystem::path& out_dir, int threads_flag,
                std::ostream& log);

std::string version_string();
std::string git_revision();

}  // namespace fpp
