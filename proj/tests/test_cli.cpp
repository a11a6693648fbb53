#include "fedgia/data.hpp"
#include "support.hpp"

#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

using namespace fedgia;
using namespace fedgia::testing;
namespace fs = std::filesystem;

namespace {

struct CliResult {
  int code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

CliResult cli(const std::string& args, const fs::path& work) {
  const auto out = work / "stdout.txt";
  const auto err = work / "stderr.txt";
  const std::string cmd = std::string("\"") + FEDGIA_CLI_PATH + "\" " + args + " >\"" + out.string() +
                          "\" 2>\"" + err.string() + "\"";
  const int status = std::system(cmd.c_str());
  CliResult r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = slurp(out);
  r.err = slurp(err);
  return r;
}

std::size_t line_count(const std::string& s) {
  return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n'));
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream(p, std::ios::binary) << text;
}

const char* kSmallProblem =
    "loss = ls\n"
    "synthetic.m = 16\n"
    "synthetic.n = 20\n"
    "synthetic.dmin = 20\n"
    "synthetic.dmax = 40\n"
    "alpha = 1\n"
    "trials = 1\n";

}  // namespace

TEST_CASE("gen-data writes one CSV per client") {
  const auto dir = scratch_dir("cli_gen");
  const auto r = cli("gen-data --m 2 --n 4 --dmin 2 --dmax 2 --seed 1 --out \"" + (dir / "d").string() + "\"", dir);
  REQUIRE(r.code == 0);
  for (const char* name : {"client_000.csv", "client_001.csv"}) {
    const auto data = load_dataset(dir / "d" / name, DataFormat::Csv);
    CHECK(data.features.rows() == 2);
    CHECK(data.features.cols() == 4);
  }
  CHECK(slurp(dir / "d" / "manifest.csv") ==
        "client,file,rows,features\n0,client_000.csv,2,4\n1,client_001.csv,2,4\n");

  const auto again = cli("gen-data --m 2 --n 4 --dmin 2 --dmax 2 --seed 1 --out \"" + (dir / "e").string() + "\"", dir);
  REQUIRE(again.code == 0);
  CHECK(slurp(dir / "d" / "client_001.csv") == slurp(dir / "e" / "client_001.csv"));
}

TEST_CASE("gen-data usage errors") {
  const auto dir = scratch_dir("cli_gen_errors");
  CHECK(cli("gen-data --m 2 --n 4 --dmin 5 --dmax 4 --out \"" + (dir / "d").string() + "\"", dir).code == 2);
  write_file(dir / "plain", "x");
  CHECK(cli("gen-data --m 1 --n 2 --dmin 1 --dmax 1 --out \"" + (dir / "plain" / "sub").string() + "\"", dir).code == 2);
  CHECK(cli("gen-data", dir).code == 2);
  CHECK(cli("gen-data --m 1 --bogus 1 --out x", dir).code == 2);
}

TEST_CASE("run trains and writes a trace") {
  const auto dir = scratch_dir("cli_run");
  const auto r = cli("run --algo fedgia --loss ls --k0 1 --alpha 1.0 --synthetic m=1 n=2 dmin=3 dmax=3 --out \"" +
                         (dir / "trace.csv").string() + "\"",
                     dir);
  CHECK(r.code == 0);
  CHECK(r.out.find("status=converged") != std::string::npos);
  const auto trace = slurp(dir / "trace.csv");
  CHECK(trace.rfind("k,tau,cr,objective,error,lagrangian,elapsed_s\n", 0) == 0);
  CHECK(line_count(trace) >= 2);

  CHECK(cli("run --algo sgd --synthetic m=1 n=2 dmin=3 dmax=3", dir).code == 2);
  CHECK(cli("run --algo fedavg --variant diag --synthetic m=1 n=2 dmin=3 dmax=3", dir).code == 2);
  CHECK(cli("run --algo fedavg --max-iter 3 --synthetic m=2 n=3 dmin=5 dmax=5", dir).code == 3);
}

TEST_CASE("run reads a gen-data directory") {
  const auto dir = scratch_dir("cli_run_dir");
  REQUIRE(cli("gen-data --m 3 --n 4 --dmin 10 --dmax 12 --seed 5 --out \"" + (dir / "d").string() + "\"", dir).code == 0);
  const auto r = cli("run --algo fedgia-d --data \"" + (dir / "d").string() + "\"", dir);
  CHECK(r.code == 0);
  CHECK(cli("run --data \"" + (dir / "missing").string() + "\"", dir).code == 2);
}

TEST_CASE("compare runs every trainer") {
  const auto dir = scratch_dir("cli_compare");
  write_file(dir / "c.cfg", std::string(kSmallProblem) + "algorithms = fedavg\n");
  const auto r = cli("compare --config \"" + (dir / "c.cfg").string() + "\" --out \"" + (dir / "o").string() + "\"", dir);
  CHECK(r.code == 0);
  CHECK(line_count(r.out) == 6);
  CHECK(r.out == slurp(dir / "o" / "summary.csv"));
  for (const char* algo : {"fedavg", "fedprox", "fedpd", "fedgia-d", "fedgia-g"})
    CHECK(r.out.find(std::string("\n") + algo + ",1,1,1,") != std::string::npos);
}

TEST_CASE("sweep covers the k0 grid") {
  const auto dir = scratch_dir("cli_sweep");
  write_file(dir / "s.cfg", std::string(kSmallProblem) + "algorithms = fedavg, fedgia-g\nk0 = 1, 5, 10\n");
  const auto r = cli("sweep --config \"" + (dir / "s.cfg").string() + "\"", dir);
  CHECK(r.code == 0);
  REQUIRE(line_count(r.out) == 7);
  for (const char* algo : {"fedavg", "fedgia-g"})
    for (const char* k0 : {"1", "5", "10"})
      CHECK(r.out.find(std::string("\n") + algo + "," + k0 + ",") != std::string::npos);
}

TEST_CASE("config errors exit with a usage error naming the key") {
  const auto dir = scratch_dir("cli_bad_config");
  write_file(dir / "bad.cfg", std::string(kSmallProblem) + "trails = 3\n");
  const auto r = cli("sweep --config \"" + (dir / "bad.cfg").string() + "\"", dir);
  CHECK(r.code == 2);
  CHECK(r.err.find("trails") != std::string::npos);

  write_file(dir / "bad2.cfg", "k0 = five\n");
  const auto r2 = cli("compare --config \"" + (dir / "bad2.cfg").string() + "\"", dir);
  CHECK(r2.code == 2);
  CHECK(r2.err.find("k0") != std::string::npos);
  CHECK(cli("compare --config \"" + (dir / "none.cfg").string() + "\"", dir).code == 2);
}

TEST_CASE("help exits cleanly") {
  const auto dir = scratch_dir("cli_help");
  const auto r = cli("--help", dir);
  CHECK(r.code == 0);
  CHECK(r.out.find("gen-data") != std::string::npos);
  CHECK(cli("", dir).code == 2);
}
