#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>
#include <gtest/gtest.h>

#include "absim/io.hpp"

using namespace absim;
namespace fs = std::filesystem;

namespace {

const std::string kCli = ABSIM_CLI_PATH;
const fs::path kSource = ABSIM_SOURCE_DIR;

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("absim_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  int run(const std::string& args) const {
    const std::string cmd = kCli + " " + args + " > " + (dir_ / "stdout.txt").string() + " 2> " +
                            (dir_ / "stderr.txt").string();
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }
  std::string scenario(const std::string& name) const {
    return (kSource / "scenarios" / (name + ".json")).string();
  }

  fs::path dir_;
};

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

// The file without its timestamped metadata line.
std::string payload(const std::string& file) {
  std::string out;
  for (const auto& l : lines(io::read_file(file))) {
    if (l.rfind("# absim ", 0) == 0) continue;
    out += l + "\n";
  }
  return out;
}

std::vector<std::vector<std::string>> csv_rows(const std::string& file) {
  std::vector<std::vector<std::string>> rows;
  for (const auto& l : lines(io::read_file(file))) {
    if (l.empty() || l[0] == '#') continue;
    std::vector<std::string> cells;
    std::istringstream in(l);
    for (std::string c; std::getline(in, c, ',');) cells.push_back(c);
    rows.push_back(cells);
  }
  return rows;
}

}  // namespace

TEST_F(Cli, RatesReportCrossoverAndAreDeterministic) {
  ASSERT_EQ(run("rates --scenario " + scenario("state_of_the_art") + " --out " + path("a.csv")), 0);
  ASSERT_EQ(run("rates --scenario " + scenario("state_of_the_art") + " --workers 4 --out " +
                path("b.csv")),
            0);
  EXPECT_EQ(payload(path("a.csv")), payload(path("b.csv")));

  const auto all = lines(io::read_file(path("a.csv")));
  EXPECT_EQ(all[0].rfind("# absim rates", 0), 0u);
  EXPECT_EQ(all[1], "N,r_atomic,r_photonic,r_classical");
  int crossover = -1;
  for (const auto& l : all) {
    if (l.rfind("# crossover_N=", 0) == 0) crossover = std::stoi(l.substr(14));
  }
  EXPECT_GE(crossover, 33);
  EXPECT_LE(crossover, 41);
}

TEST_F(Cli, LosslessRatesEqualIdealRates) {
  ASSERT_EQ(run("rates --scenario " + scenario("lossless") + " --out " + path("r.csv")), 0);
  const auto rows = csv_rows(path("r.csv"));
  ASSERT_GT(rows.size(), 10u);
  const LossScenario s = presets::lossless();
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const int n = std::stoi(rows[i][0]);
    EXPECT_EQ(rows[i][1], io::format_double(r_ideal(s, n))) << "N=" << n;
  }
}

TEST_F(Cli, SampleFrequenciesMatchExactDistribution) {
  ASSERT_EQ(run("sample --n 2 --m 4 --shots 10000 --seed 21 --out " + path("s.csv")), 0);
  const ModeUnitary u =
      io::unitary_from_json(io::json::parse(io::read_file(path("s.csv") + ".unitary.json")));
  const auto rows = csv_rows(path("s.csv"));
  ASSERT_EQ(rows.size(), 10001u);
  EXPECT_EQ(rows[0], (std::vector<std::string>{"m0", "m1", "m2", "m3"}));

  std::map<std::vector<int>, int> counts;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    std::vector<int> occ;
    for (const auto& c : rows[i]) occ.push_back(std::stoi(c));
    ++counts[occ];
  }
  const FockState input{1, 0, 1, 0};
  const auto dist = output_distribution(u, input, false);
  // Pool outcomes with fewer than 5 expected counts into one bin.
  double chi2 = 0, pooled_expected = 0, pooled_observed = 0;
  int bins = 0;
  for (const auto& o : dist.outcomes) {
    const double expected = 10000 * o.probability;
    const double observed = counts[o.state.occupations()];
    if (expected < 5) {
      pooled_expected += expected;
      pooled_observed += observed;
      continue;
    }
    chi2 += (observed - expected) * (observed - expected) / expected;
    ++bins;
  }
  if (pooled_expected > 0) {
    chi2 += (pooled_observed - pooled_expected) * (pooled_observed - pooled_expected) / pooled_expected;
    ++bins;
  }
  ASSERT_GE(bins, 2);
  const boost::math::chi_squared chi(bins - 1);
  EXPECT_GT(boost::math::cdf(boost::math::complement(chi, chi2)), 0.01) << "chi2=" << chi2;
}

TEST_F(Cli, SampleCollisionFreeAndEmpty) {
  ASSERT_EQ(run("sample --n 3 --m 6 --shots 2000 --collision-free --out " + path("cf.csv")), 0);
  const auto rows = csv_rows(path("cf.csv"));
  ASSERT_EQ(rows.size(), 2001u);
  for (std::size_t i = 1; i < rows.size(); ++i) {
    int total = 0;
    for (const auto& c : rows[i]) {
      EXPECT_LE(std::stoi(c), 1);
      total += std::stoi(c);
    }
    EXPECT_EQ(total, 3);
  }

  ASSERT_EQ(run("sample --n 2 --m 4 --shots 0 --out " + path("empty.csv")), 0);
  EXPECT_EQ(payload(path("empty.csv")), "m0,m1,m2,m3\n");
}

TEST_F(Cli, SampleIsReproducible) {
  ASSERT_EQ(run("sample --n 3 --m 8 --shots 500 --seed 5 --out " + path("a.csv")), 0);
  ASSERT_EQ(run("sample --n 3 --m 8 --shots 500 --seed 5 --workers 3 --out " + path("b.csv")), 0);
  ASSERT_EQ(run("sample --n 3 --m 8 --shots 500 --seed 6 --out " + path("c.csv")), 0);
  EXPECT_EQ(payload(path("a.csv")), payload(path("b.csv")));
  EXPECT_EQ(io::read_file(path("a.csv") + ".unitary.json"), io::read_file(path("b.csv") + ".unitary.json"));
  EXPECT_NE(payload(path("a.csv")), payload(path("c.csv")));
}

TEST_F(Cli, DecomposeIdentity) {
  io::write_file_atomic(path("id.json"), io::to_json(ModeUnitary::identity(6)).dump());
  ASSERT_EQ(run("decompose --data " + path("id.json") + " --out " + path("plan.json")), 0);
  const CircuitPlan plan = io::plan_from_json(io::json::parse(io::read_file(path("plan.json"))));
  EXPECT_EQ(plan.m, 6);
  EXPECT_EQ(plan.coupling_count(), 15u);
  for (const auto& layer : plan.layers)
    for (const auto& c : layer) EXPECT_EQ(c.theta, 0.0);
}

TEST_F(Cli, DecomposeRandomRoundTrips) {
  ASSERT_EQ(run("decompose --m 7 --seed 8 --out " + path("plan.json")), 0);
  const CircuitPlan plan = io::plan_from_json(io::json::parse(io::read_file(path("plan.json"))));
  const ModeUnitary u = haar_random_unitary(7, derive_seed(8, 0));
  EXPECT_LT((reconstruct(plan).matrix() - u.matrix()).norm(), 1e-10);
}

TEST_F(Cli, ExactsimReproducesBenchmark) {
  ASSERT_EQ(run("exactsim --n 4 --m 16 --tau-tb 1 --realizations 30 --seed 3 --workers 4 --out " +
                path("b.csv")),
            0);
  BenchmarkConfig cfg;
  cfg.seed = 3;
  const auto want = benchmark_vs_model(cfg);
  const auto rows = csv_rows(path("b.csv"));
  ASSERT_EQ(rows.size(), 1u + 30 * 16);
  EXPECT_EQ(rows[0], (std::vector<std::string>{"realization", "step", "p_j"}));
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const int r = std::stoi(rows[i][0]);
    const int j = std::stoi(rows[i][1]);
    EXPECT_EQ(std::stod(rows[i][2]), want.traces[r].p_j[j - 1]);
  }
  const auto summary = io::json::parse(io::read_file(path("b.csv") + ".summary.json"));
  EXPECT_EQ(summary.at("mean_p_total").get<double>(), want.mean_p_total);
  EXPECT_EQ(summary.at("model_p_step").get<double>(), want.model_p_step);
  EXPECT_EQ(summary.at("model_p_step_pow_M").get<double>(), want.model_p_step_pow_m);
}

TEST_F(Cli, HomSimAndFit) {
  ASSERT_EQ(run("hom-sim --scenario " + scenario("state_of_the_art") +
                " --trials 200000 --seed 4 --out " + path("a.json")),
            0);
  ASSERT_EQ(run("hom-sim --scenario " + scenario("state_of_the_art") +
                " --trials 200000 --seed 4 --workers 4 --out " + path("b.json")),
            0);
  EXPECT_EQ(io::read_file(path("a.json")), io::read_file(path("b.json")));
  const auto sim = io::json::parse(io::read_file(path("a.json")));
  EXPECT_NEAR(sim.at("p2").get<double>(), sim.at("analytic").at("p2").get<double>(), 0.005);

  ASSERT_EQ(run("hom-fit --data " + (kSource / "data" / "hom_measured.json").string() +
                " --seed 1 --out " + path("fit.json")),
            0);
  const auto fit = io::json::parse(io::read_file(path("fit.json")));
  EXPECT_NEAR(fit.at("p_bunch").get<double>(), 0.73, 0.02);
  EXPECT_GT(fit.at("sigma").get<double>(), 0.0);
  EXPECT_EQ(fit.at("trials_kept").get<int>(), 170);

  // Simulated counts are valid fit input.
  ASSERT_EQ(run("hom-fit --data " + path("a.json") + " --trials 0 --out " + path("refit.json")), 0);
  const auto refit = io::json::parse(io::read_file(path("refit.json")));
  EXPECT_NEAR(refit.at("p_bunch").get<double>(), 0.731, 0.01);
}

TEST_F(Cli, ExitCodesAndNoPartialOutput) {
  std::string bad = io::read_file(scenario("state_of_the_art"));
  bad.replace(bad.find("\"t_step\": 3.3e-05"), 17, "\"t_step\": -1");
  io::write_file_atomic(path("bad.json"), bad);
  EXPECT_EQ(run("rates --scenario " + path("bad.json") + " --out " + path("x.csv")), 2);
  EXPECT_FALSE(fs::exists(path("x.csv")));
  EXPECT_NE(io::read_file(path("stderr.txt")).find("atomic.t_step"), std::string::npos);

  EXPECT_EQ(run("rates --scenario " + path("missing.json") + " --out " + path("x.csv")), 4);
  EXPECT_EQ(run("rates --scenario " + scenario("lossless") + " --out " + path("no/dir/x.csv")), 4);
  EXPECT_EQ(run("sample --n 12 --m 144 --shots 1 --out " + path("x.csv")), 3);
  EXPECT_NE(io::read_file(path("stderr.txt")).find("cap"), std::string::npos);
  EXPECT_FALSE(fs::exists(path("x.csv")));
  EXPECT_EQ(run("sample --n 0 --m 4 --out " + path("x.csv")), 2);
  EXPECT_EQ(run("hom-sim --trials 10 --reconstruction bogus --out " + path("x.json")), 2);
  EXPECT_EQ(run("nonsense"), 2);
  EXPECT_EQ(run("rates"), 2);
  for (const auto& e : fs::directory_iterator(dir_)) {
    EXPECT_EQ(e.path().extension() == ".tmp", false) << e.path();
  }
}
