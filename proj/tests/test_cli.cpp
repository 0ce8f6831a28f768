#include "fpp/cli.hpp"
#include "fpp/io.hpp"

#include <doctest.h>

#include <fstream>
#include <sstream>

using namespace fpp;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("fpp_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write(const fs::path& p, const std::string& body) {
  std::ofstream out(p, std::ios::binary);
  out << body;
}

int run_in(const fs::path& dir, const std::string& command, const std::string& config, const std::string& out,
           int threads = 1, const std::vector<std::string>& overrides = {}) {
  write(dir / "run.cfg", config);
  std::ostringstream log;
  return run_command(command, dir / "run.cfg", overrides, dir / out, threads, log);
}

}  // namespace

TEST_CASE("config grammar") {
  std::istringstream in(
      "# experiment\n"
      "n = 3, 4 ,5   # sizes\n"
      "\n"
      "region = [0,1]x[0,1/2]; [1,2]x{0}\n"
      "distribution = bernoulli(0,1,1/2)\n"
      "n = 6\n");
  Config c = Config::parse(in);
  CHECK(c.integers("n") == std::vector<int64_t>{6});
  CHECK(c.entries().at("n").line == 6);
  auto boxes = c.boxes("region");
  REQUIRE(boxes.size() == 2);
  CHECK(boxes[0].hi[1] == Rational(1, 2));
  CHECK(boxes[1].lo[1] == boxes[1].hi[1]);
  CHECK(c.distribution("distribution").describe() == CapacityDistribution::parse("bernoulli(0,1,1/2)").describe());
  c.set("eps=0.1,1/4");
  CHECK(c.reals("eps") == std::vector<double>{0.1, 0.25});
}

TEST_CASE("config errors carry the key and line") {
  std::istringstream bad("n = 3\nthis line is wrong\n");
  try {
    Config::parse(bad);
    FAIL("expected a ConfigError");
  } catch (const ConfigError& e) {
    CHECK(e.line() == 2);
  }
  std::istringstream in("n = 3\nbogus = 1\n");
  Config c = Config::parse(in);
  try {
    make_experiment("maxflow", c, "unused", 1);
    FAIL("expected a ConfigError");
  } catch (const ConfigError& e) {
    CHECK(e.key() == "bogus");
    CHECK(e.line() == 2);
  }
  std::istringstream nonnum("n = three\n");
  CHECK_THROWS_AS(make_experiment("maxflow", Config::parse(nonnum), "unused", 1), ConfigError);
  CHECK_THROWS_AS(make_experiment("nope", Config{}, "unused", 1), ConfigError);
}

TEST_CASE("thread precedence: flag over config") {
  std::istringstream in("threads = 3\n");
  Config c = Config::parse(in);
  CHECK(make_experiment("tail", c, "unused", 5).threads == 5);
  CHECK(make_experiment("tail", c, "unused", 0).threads == 3);
}

TEST_CASE("box text round trip") {
  RBox b = parse_box("[ -1/2 , 1/2 ] x {0} x [0,3]");
  CHECK(b.dim() == 3);
  CHECK(format_box(b) == "[-1/2,1/2]x{0}x[0,3]");
  CHECK(format_box(parse_box(format_box(b))) == format_box(b));
  CHECK_THROWS(parse_box("[1,0]"));
  CHECK_THROWS(parse_box("[0,1]y[0,1]"));
  CHECK_THROWS(parse_box("[0,1"));
}

TEST_CASE("measure and field JSON round trip") {
  VectorMeasure m = density_measure(unit_cube_box(2), {0.5, -0.25});
  m.atoms.push_back(Atom{{Rational(1, 3), Rational(-1, 7)}, {0.125, 2.0}});
  VectorMeasure back = measure_from_json(nlohmann::json::parse(measure_to_json(m).dump()));
  REQUIRE(back.atoms.size() == 1);
  CHECK(back.atoms[0].point == m.atoms[0].point);
  CHECK(back.atoms[0].weight == m.atoms[0].weight);
  REQUIRE(back.densities.size() == 1);
  CHECK(back.densities[0].box.lo == m.densities[0].box.lo);
  CHECK(back.densities[0].value == m.densities[0].value);

  ContinuousField f = constant_field(unit_cube_box(2), {Rational(1, 3), Rational(0)}, Rational(2));
  ContinuousField g = field_from_json(nlohmann::json::parse(field_to_json(f).dump()));
  CHECK(g.M == 2);
  REQUIRE(g.cells.size() == 1);
  CHECK(g.cells[0].value == f.cells[0].value);
}

TEST_CASE("rate with s = 0 writes phat = 1") {
  fs::path dir = scratch("rate0");
  int code = run_in(dir, "rate", "n = 2\ns = 0\ntrials = 5\ndistribution = bernoulli(0,1,1/2)\n", "out");
  CHECK(code == kExitOk);
  std::string csv = slurp(dir / "out" / "rate.csv");
  CHECK(csv == "s,vx,vy,eps,n,trials,successes,phat,lo,hi,Ihat\n0,1,0,0.3,2,5,5,1,0.5655175352168251,1,0\n");
  auto manifest = nlohmann::json::parse(slurp(dir / "out" / "manifest.json"));
  CHECK(manifest["command"] == "rate");
  CHECK(manifest["seed"] == 1);
  CHECK(manifest["config"]["s"] == "0");
  CHECK(manifest.contains("git"));
}

TEST_CASE("flow-constant with constant(1) writes ratio 1") {
  fs::path dir = scratch("nu");
  int code = run_in(dir, "flow-constant", "n = 4, 8\ntrials = 2\ndistribution = constant(1)\n", "out");
  CHECK(code == kExitOk);
  std::istringstream csv(slurp(dir / "out" / "nu.csv"));
  std::string line;
  std::getline(csv, line);
  CHECK(line == "n,h,trials,mean,sd,half_width,min,max");
  int rows = 0;
  while (std::getline(csv, line)) {
    CHECK(line.find(",1,0,0,1,1") != std::string::npos);
    ++rows;
  }
  CHECK(rows == 2);
}

TEST_CASE("identical configs give byte-identical outputs across runs and thread counts") {
  fs::path dir = scratch("det");
  const std::string cfg = "n = 3\nlambda = 0.2, 0.5\ntrials = 100\ndistribution = bernoulli(0,1,1/2)\nseed = 4\n";
  REQUIRE(run_in(dir, "tail", cfg, "a", 1) == kExitOk);
  REQUIRE(run_in(dir, "tail", cfg, "b", 1) == kExitOk);
  REQUIRE(run_in(dir, "tail", cfg, "c", 8) == kExitOk);
  CHECK(slurp(dir / "a" / "tail.csv") == slurp(dir / "b" / "tail.csv"));
  CHECK(slurp(dir / "a" / "tail.csv") == slurp(dir / "c" / "tail.csv"));
  CHECK(slurp(dir / "a" / "manifest.json") == slurp(dir / "b" / "manifest.json"));
}

TEST_CASE("maxflow outputs re-parse") {
  fs::path dir = scratch("mf");
  REQUIRE(run_in(dir, "maxflow", "n = 3\ndistribution = uniform(0,2)\nseed = 3\n", "out") == kExitOk);
  auto j = nlohmann::json::parse(slurp(dir / "out" / "maxflow.json"));
  CHECK(j["duality_ok"] == true);
  CHECK(j["value"] == j["cut_capacity"]);
  std::ifstream caps(dir / "out" / "capacities.txt");
  CHECK_NOTHROW(read_capacities<Rational>(caps, 2));
  // Decompose the written stream through the CLI.
  write(dir / "dec.cfg", "n = 3\nstream = out/stream.txt\n");
  std::ostringstream log;
  CHECK(run_command("decompose", dir / "dec.cfg", {}, dir / "dec", 1, log) == kExitOk);
  auto d = nlohmann::json::parse(slurp(dir / "dec" / "decompose.json"));
  CHECK(d["reconstruction_exact"] == true);
  CHECK(d["total_weight"] == j["value"]);
}

TEST_CASE("invariant violations exit with 3") {
  fs::path dir = scratch("bad");
  write(dir / "broken.txt", "2 3\n1 1 1 1\n");
  int code = run_in(dir, "decompose", "n = 3\nstream = broken.txt\n", "out");
  CHECK(code == kExitInvariant);
  auto m = nlohmann::json::parse(slurp(dir / "out" / "manifest.json"));
  CHECK(m["exit_status"] == kExitInvariant);
}

TEST_CASE("config errors exit with 2") {
  fs::path dir = scratch("cfg");
  CHECK(run_in(dir, "rate", "n = 2\nunknown_key = 1\n", "out") == kExitConfig);
  CHECK(run_in(dir, "mix-demo", "routine = mix2d\nd = 3\n", "out2") == kExitConfig);
  CHECK(run_in(dir, "distance", "mu = missing.json\nnu = missing.json\n", "out3") == kExitConfig);
}

TEST_CASE("distance and mix-demo subcommands") {
  fs::path dir = scratch("dist");
  write(dir / "mu.json", measure_to_json(density_measure(unit_cube_box(2), {1.0, 0.0})).dump());
  VectorMeasure zero;
  zero.d = 2;
  write(dir / "nu.json", measure_to_json(zero).dump());
  REQUIRE(run_in(dir, "distance", "mu = mu.json\nnu = nu.json\nrel_gap = 0.05\n", "out") == kExitOk);
  auto j = nlohmann::json::parse(slurp(dir / "out" / "distance.json"));
  CHECK(j["lower"].get<double>() <= j["upper"].get<double>());
  for (const char* routine : {"mix2d", "mix", "mix_sparse", "mix_precise"}) {
    std::string cfg = std::string("routine = ") + routine + "\nn = 6\nseed = 2\n";
    CHECK(run_in(dir, "mix-demo", cfg, std::string("mix_") + routine) == kExitOk);
  }
  CHECK(run_in(dir, "mix-demo", "routine = mix\nn = 2\ninputs = 1, 0\noutputs = 0, 1\nm = 4\n", "mix_io") == kExitOk);
}
