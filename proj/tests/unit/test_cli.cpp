#include <doctest.h>

#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "advloss/csv.hpp"
#include "advloss/error.hpp"
#include "cli/commands.hpp"
#include "cli/run_config.hpp"

using namespace advloss;
using namespace advloss::cli;
namespace fs = std::filesystem;

namespace {

struct Run {
  int status = 0;
  std::string out;
  std::string err;
};

Run run(std::vector<std::string> args) {
  args.insert(args.begin(), "advloss");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  Run r;
  r.status = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("advloss_cli_test_" + std::to_string(::getpid()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string operator/(const std::string& name) const { return (path / name).string(); }
};

std::string read_all(const std::string& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), {}};
}

void write_all(const std::string& p, const std::string& s) { std::ofstream(p) << s; }

// gen-data + train once for the commands that need a model.
const TempDir& workspace() {
  static const TempDir dir = [] {
    TempDir d;
    REQUIRE(run({"gen-data", "--n", "300", "--spread", "0.1", "--seed", "3", "--out",
                 d / "data.bin"})
                .status == 0);
    REQUIRE(run({"train", "--data", d / "data.bin", "--epochs", "10", "--seed", "1", "--out",
                 d / "model.bin"})
                .status == 0);
    return d;
  }();
  return dir;
}

}  // namespace

TEST_CASE("precedence is cli over file over default") {
  RunConfig c(command_keys("eval"));
  const std::string def = c.get("steps");
  CHECK(c.source_of("steps") == ValueSource::Default);
  c.apply_text("steps = 20\n# comment\n\neps = 0.2\n", "inline");
  CHECK(c.get_int("steps") == 20);
  CHECK(c.source_of("steps") == ValueSource::File);
  c.set("steps", "30", ValueSource::Cli);
  CHECK(c.get_int("steps") == 30);
  CHECK(c.get_double("eps") == 0.2);
  CHECK(def != "20");
}

TEST_CASE("unknown keys and bad values are config errors") {
  RunConfig c(command_keys("eval"));
  auto code_of = [](auto&& f) {
    try {
      f();
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::io;
  };
  CHECK(code_of([&] { c.apply_text("bogus = 1\n", "x"); }) == ErrorCode::config);
  CHECK(code_of([&] { c.apply_text("steps 1\n", "x"); }) == ErrorCode::config);
  CHECK(code_of([&] { c.set("generations", "3", ValueSource::Cli); }) == ErrorCode::config);
  c.set("steps", "abc", ValueSource::Cli);
  CHECK(code_of([&] { c.get_int("steps"); }) == ErrorCode::config);
}

TEST_CASE("every command accepts the shared keys") {
  for (const auto& name : command_names()) {
    RunConfig c(command_keys(name));
    for (const char* k : {"seed", "workers", "out"}) CHECK(c.has_key(k));
  }
  CHECK(RunConfig(command_keys("eval")).has_key("random_start"));
  CHECK_FALSE(RunConfig(command_keys("simplify")).has_key("eps"));
}

TEST_CASE("config dump round trips") {
  RunConfig a(command_keys("search"));
  a.set("eps", "0.0375", ValueSource::Cli);
  RunConfig b(command_keys("search"));
  b.apply_text(a.dump(), "dump");
  for (const auto& k : a.keys()) CHECK(a.get(k.key) == b.get(k.key));
  CHECK(std::stod(round_trip(0.1)) == 0.1);
  CHECK(std::stod(round_trip(1.0 / 3.0)) == 1.0 / 3.0);
}

TEST_CASE("csv round trip") {
  CsvTable t;
  t.comments = {" a=1,b=2"};
  t.header = {"x", "y,z", "w"};
  t.rows = {{"1", "a \"q\"", ""}, {"2", "line\nbreak", "3"}};
  CHECK(parse_csv_string(to_csv_string(t)) == t);
  CHECK(format_fixed(1.0 / 3.0) == "0.333333");
  CHECK(format_fixed(-2.0) == "-2.000000");
  CHECK_THROWS_AS(parse_csv_string("a,b\n1\n"), Error);
}

TEST_CASE("gen-data is deterministic and validates classes") {
  TempDir d;
  const Run a = run({"gen-data", "--n", "50", "--seed", "9", "--out", d / "a.bin"});
  const Run b = run({"gen-data", "--n", "50", "--seed", "9", "--out", d / "b.bin"});
  REQUIRE(a.status == 0);
  CHECK(a.out.rfind("n_samples=50 input_dim=2 num_classes=3", 0) == 0);
  CHECK(read_all(d / "a.bin") == read_all(d / "b.bin"));
  CHECK(read_all(d / "a.bin").substr(0, 4) == "ALDS");
  run({"gen-data", "--n", "50", "--seed", "10", "--out", d / "c.bin"});
  CHECK(read_all(d / "a.bin") != read_all(d / "c.bin"));

  const Run bad = run({"gen-data", "--classes", "1", "--out", d / "x.bin"});
  CHECK(bad.status != 0);
  CHECK(bad.err.rfind("error code=invalid_argument message=\"", 0) == 0);
}

TEST_CASE("eval with zero budget equals clean accuracy") {
  const TempDir& w = workspace();
  const Run r = run({"eval", "--model", w / "model.bin", "--data", w / "data.bin", "--eps", "0",
                     "--loss", "cw"});
  REQUIRE(r.status == 0);
  const CsvTable t = parse_csv_string(r.out);
  REQUIRE(t.rows.size() == 1);
  auto col = [&](const std::string& name) {
    for (std::size_t i = 0; i < t.header.size(); ++i)
      if (t.header[i] == name) return t.rows[0][i];
    FAIL("missing column " << name);
    return std::string();
  };
  CHECK(col("adversarial_accuracy") == col("clean_accuracy"));
  CHECK(col("loss") == "cw");
  CHECK(col("clean_accuracy").size() == std::string("0.000000").size());
}

TEST_CASE("eval accepts file and expression losses and stays finite") {
  const TempDir& w = workspace();
  write_all(w / "cfg.txt", "eps = 0.05\nsteps = 3\n");
  write_all(w / "loss.expr", "# custom\n(neg (sum (mul q (softmax p))))\n");
  for (const std::string& loss : {std::string("bs5"), w / "loss.expr"}) {
    const Run r = run({"eval", "--config", w / "cfg.txt", "--model", w / "model.bin", "--data",
                       w / "data.bin", "--loss", loss, "--no-random-start", "--workers", "2"});
    REQUIRE(r.status == 0);
    CHECK(r.out.find("nan") == std::string::npos);
    CHECK(r.out.find(",inf") == std::string::npos);
    CHECK(r.out.find("eps=0.050000") != std::string::npos);
  }
  const Run missing = run({"eval", "--model", w / "model.bin", "--data", w / "data.bin",
                           "--loss", "no_such_loss"});
  CHECK(missing.status == 1);
  CHECK(missing.err.rfind("error code=not_found", 0) == 0);
}

TEST_CASE("search writes a log with the configuration header") {
  const TempDir& w = workspace();
  const Run r = run({"search", "--model", w / "model.bin", "--data", w / "data.bin",
                     "--generations", "1", "--population-size", "6", "--fitness-samples", "40",
                     "--steps", "3", "--seed", "4", "--out", w / "log.csv"});
  REQUIRE(r.status == 0);
  const CsvTable t = load_csv(w / "log.csv");
  REQUIRE(t.comments.size() == 1);
  CHECK(t.comments[0].find("generations=1,") != std::string::npos);
  CHECK(t.comments[0].find("tournament_size=3") != std::string::npos);
  CHECK(t.rows.size() == 2);
  const ExprTree best = read_expression_file(w / "log.csv.expr");
  CHECK(r.out.find(print(best)) != std::string::npos);

  const Run s = run({"simplify", "--in", w / "log.csv.expr"});
  CHECK(s.status == 0);
  CHECK(parse(s.out).size() <= best.size());
}

TEST_CASE("landscape writes one grid per loss") {
  const TempDir& w = workspace();
  const Run r = run({"landscape", "--model", w / "model.bin", "--data", w / "data.bin",
                     "--losses", "ce,cw", "--resolution", "5", "--eps", "0.1", "--out",
                     w / "land"});
  REQUIRE(r.status == 0);
  const CsvTable t = load_csv(w / "land/landscape_ce.csv");
  CHECK(t.rows.size() == 5);
  CHECK(fs::exists(w / "land/landscape_cw.csv"));
}

TEST_CASE("gradcheck passes and prints a table") {
  const Run r = run({"gradcheck", "--op-trials", "20", "--trees", "20", "--model-points", "5"});
  CHECK(r.status == 0);
  CHECK(r.out.rfind("check,cases,resampled,max_rel_err,pass", 0) == 0);
}

TEST_CASE("usage errors exit with status 2") {
  CHECK(run({}).status == 2);
  const Run unknown = run({"eval", "--frobnicate", "1"});
  CHECK(unknown.status == 2);
  CHECK(unknown.err.rfind("error code=invalid_argument", 0) == 0);
  TempDir d;
  write_all(d / "bad.cfg", "not_a_key = 3\n");
  const Run cfg = run({"eval", "--config", d / "bad.cfg"});
  CHECK(cfg.status == 2);
  CHECK(cfg.err.rfind("error code=config message=\"", 0) == 0);
  const Run io = run({"eval", "--model", d / "missing.bin", "--data", d / "missing.bin"});
  CHECK(io.status == 1);
  CHECK(io.err.rfind("error code=io", 0) == 0);
}
