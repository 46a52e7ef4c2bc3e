#include <gtest/gtest.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "ste/cli.hpp"

#ifndef STE_CLI_PATH
#error "STE_CLI_PATH must name the ste executable"
#endif

namespace fs = std::filesystem;

namespace {

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() /
           ("ste_cli_" + std::to_string(::getpid()) + "_" + info->test_suite_name() + "_" + info->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  // Runs the tool and returns its exit status; stderr goes to err.txt.
  int run(const std::string& args) const {
    const std::string cmd = std::string(STE_CLI_PATH) + " " + args + " >" + path("out.txt") + " 2>" + path("err.txt");
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }

  std::string slurp(const std::string& name) const {
    std::ifstream in(path(name), std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  }

  void write(const std::string& name, const std::string& text) const {
    std::ofstream out(path(name), std::ios::binary);
    out << text;
  }

  // Small cubic dataset and a quick fit used by several tests.
  void fit_small(const std::string& extra = "", const std::string& model = "model.json",
                 const std::string& input = "train.csv") {
    if (!fs::exists(path("train.csv")))
      ASSERT_EQ(run("gen --function cubic --k 60 --seed 4 --out " + path("train.csv")), 0) << slurp("err.txt");
    ASSERT_EQ(run("fit --input " + path(input) + " --m-max 2 --starts 3 --max-iters 100 --seed 7 --delta-frac 0.05 " +
                  extra + " --out " + path(model)),
              0)
        << slurp("err.txt");
  }

  fs::path dir_;
};

}  // namespace

TEST(CliParsing, Grid) {
  const auto axes = ste::cli::parse_grid("0:1:3,2:4:5");
  ASSERT_EQ(axes.size(), 2u);
  EXPECT_EQ(axes[1].n, 5u);
  const auto pts = ste::cli::grid_points(axes);
  ASSERT_EQ(pts.size(), 15u);
  EXPECT_EQ(pts[0], (std::vector<double>{0.0, 2.0}));
  EXPECT_EQ(pts[1], (std::vector<double>{0.0, 2.5}));
  EXPECT_EQ(pts[14], (std::vector<double>{1.0, 4.0}));
  EXPECT_THROW(ste::cli::parse_grid("0:1"), ste::cli::UsageError);
  EXPECT_THROW(ste::cli::parse_grid("1:0:5"), ste::cli::UsageError);
  EXPECT_THROW(ste::cli::parse_grid("0:1:1"), ste::cli::UsageError);
  EXPECT_THROW(ste::cli::parse_grid("0:x:4"), ste::cli::UsageError);
}

TEST(CliParsing, List) {
  EXPECT_EQ(ste::cli::parse_list("1,2.5,-3", "x0"), (std::vector<double>{1.0, 2.5, -3.0}));
  EXPECT_THROW(ste::cli::parse_list("1,,2", "x0"), ste::cli::UsageError);
}

TEST_F(CliTest, FitThenPredictReproducesEvaluateBitExactly) {
  fit_small();
  ASSERT_TRUE(fs::exists(path("model_per_m.csv")));
  ASSERT_EQ(run("predict --model " + path("model.json") + " --points " + path("train.csv") + " --out " + path("pred.csv")),
            0)
      << slurp("err.txt");
  const auto model = ste::load_model(path("model.json"));
  const auto train = ste::read_csv(path("train.csv"));
  const auto pred = ste::read_csv(path("pred.csv"));
  ASSERT_EQ(pred.rows.size(), train.rows.size());
  EXPECT_EQ(pred.header, (std::vector<std::string>{"x1", "f"}));
  for (std::size_t k = 0; k < train.rows.size(); ++k) {
    const std::vector<double> x{train.rows[k][0]};
    EXPECT_EQ(pred.rows[k][0], x[0]);
    EXPECT_EQ(pred.rows[k][1], ste::evaluate(model, x));
  }
}

TEST_F(CliTest, UnitOffsetCollapsesToCoefficientSum) {
  fit_small("--rescale 2");
  const auto model = ste::load_model(path("model.json"));
  double sum = 0.0;
  for (const auto& c : model.components) sum += c.mu_a;
  // x0 + 1 in model units is 2 * (x0 + 1) in original units
  const double x = 2.0 * (model.x0[0] + 1.0);
  write("at.csv", "x\n" + ste::format_double(x) + "\n");
  ASSERT_EQ(run("predict --model " + path("model.json") + " --points " + path("at.csv") + " --out " + path("p.csv")), 0)
      << slurp("err.txt");
  const auto p = ste::read_csv(path("p.csv"));
  EXPECT_NEAR(p.rows[0][1], 2.0 * sum, 1e-12 * std::max(1.0, std::abs(2.0 * sum)));
}

TEST_F(CliTest, RescalingIsCoherent) {
  const double c = 8.0;
  ASSERT_EQ(run("gen --function cubic --k 60 --seed 4 --out " + path("train.csv")), 0);
  const auto raw = ste::read_csv(path("train.csv"));
  std::vector<std::vector<double>> scaled;
  for (const auto& r : raw.rows) scaled.push_back({r[0] / c, r[1] / c});
  write("scaled.csv", ste::to_csv(raw.header, scaled));

  fit_small("--rescale " + ste::format_double(c), "rescaled.json", "train.csv");
  fit_small("", "plain.json", "scaled.csv");
  ASSERT_EQ(run("predict --model " + path("rescaled.json") + " --grid 0.5:4:15 --out " + path("a.csv")), 0);
  ASSERT_EQ(run("predict --model " + path("plain.json") + " --grid 0.0625:0.5:15 --out " + path("b.csv")), 0);
  const auto a = ste::read_csv(path("a.csv"));
  const auto b = ste::read_csv(path("b.csv"));
  ASSERT_EQ(a.rows.size(), b.rows.size());
  for (std::size_t i = 0; i < a.rows.size(); ++i) {
    const double want = c * b.rows[i][1];
    EXPECT_NEAR(a.rows[i][1], want, 1e-10 * std::max(1.0, std::abs(want))) << "row " << i;
  }
}

TEST_F(CliTest, ExitCodes) {
  EXPECT_EQ(run("fit --input " + path("train.csv")), 1);
  EXPECT_EQ(run("frobnicate"), 1);
  EXPECT_EQ(run("fit --input " + path("missing.csv") + " --m-max 1 --out " + path("m.json")), 2);
  EXPECT_NE(slurp("err.txt").find("\"error\""), std::string::npos);

  std::string bad = "x,y\n";
  for (int i = 1; i <= 6; ++i) bad += std::to_string(i) + ",1\n";
  bad += "7,oops\n";
  write("bad.csv", bad);
  EXPECT_EQ(run("fit --input " + path("bad.csv") + " --m-max 1 --out " + path("m.json")), 2);
  EXPECT_NE(slurp("err.txt").find("row 7"), std::string::npos) << slurp("err.txt");

  write("huge.json", R"({"version":1,"d":1,"x0":[0],"sigma2":0,"rescale":[1,1],)"
                     R"("components":[{"mu_a":1,"sigma_a":0,"mu_n":[300],"sigma_n":[0],"rho":[0]}]})");
  EXPECT_EQ(run("predict --model " + path("huge.json") + " --grid 1:1e4:3 --out " + path("h.csv")), 3);
  EXPECT_EQ(run("predict --model " + path("huge.json") + " --grid -1:1:3 --out " + path("h.csv")), 2);
  EXPECT_EQ(run("predict --model " + path("huge.json") + " --grid 1:2:3 --points " + path("bad.csv") + " --out " +
                path("h.csv")),
            1);
}

TEST_F(CliTest, DistanceMatchesLibrary) {
  write("model.json", R"({"version":1,"d":1,"x0":[0],"sigma2":0,"rescale":[1,1],)"
                      R"("components":[{"mu_a":1,"sigma_a":0,"mu_n":[2],"sigma_n":[0],"rho":[0]}]})");
  ASSERT_EQ(run("predict --model " + path("model.json") + " --grid 0.5:2:31 --out " + path("p.csv")), 0);
  std::vector<std::vector<double>> truth;
  for (const auto& r : ste::read_csv(path("p.csv")).rows) truth.push_back({r[0], r[0]});
  write("t.csv", ste::to_csv({"x1", "f"}, truth));
  ASSERT_EQ(run("distance --pred " + path("p.csv") + " --truth " + path("t.csv") + " --grid 0.5:2:31"), 0)
      << slurp("err.txt");
  const auto j = nlohmann::json::parse(slurp("out.txt"));
  // integral of g = (x^2 - x)^2 over [0.5, 2] plus the Euler-Maclaurin
  // trapezoid error h^2/12 (g'(b) - g'(a)) - h^4/720 (g'''(b) - g'''(a))
  const auto F = [](double x) { return std::pow(x, 5) / 5 - std::pow(x, 4) / 2 + std::pow(x, 3) / 3; };
  const auto g1 = [](double x) { return 2.0 * (x * x - x) * (2.0 * x - 1.0); };
  const auto g3 = [](double x) { return 24.0 * x - 12.0; };
  const double h = 0.05;
  const double want =
      F(2.0) - F(0.5) + h * h / 12.0 * (g1(2.0) - g1(0.5)) - std::pow(h, 4) / 720.0 * (g3(2.0) - g3(0.5));
  EXPECT_NEAR(j["D_sq"].get<double>(), want, 1e-12);
  EXPECT_GT(j["D_l1"].get<double>(), 0.0);
}

TEST_F(CliTest, EnvelopeAndSimulateOutputs) {
  write("model.json", R"({"version":1,"d":1,"x0":[0],"sigma2":0,"rescale":[1,1],)"
                      R"("components":[{"mu_a":1,"sigma_a":0.3,"mu_n":[1],"sigma_n":[0.1],"rho":[0.2]}]})");
  ASSERT_EQ(run("envelope --model " + path("model.json") + " --grid 0.5:3:6 --n-real 500 --seed 3 --out " +
                path("env.csv")),
            0)
      << slurp("err.txt");
  const auto env = ste::read_csv(path("env.csv"));
  EXPECT_EQ(env.header, (std::vector<std::string>{"x1", "lower", "mean", "upper", "estimate"}));
  for (const auto& r : env.rows) {
    EXPECT_LE(r[1], r[3]);
    EXPECT_LE(r[1], r[2]);
    EXPECT_LE(r[2], r[3]);
  }
  ASSERT_EQ(run("simulate --model " + path("model.json") + " --n 4 --seed 3 --out " + path("sim.csv")), 0)
      << slurp("err.txt");
  const auto sim = ste::read_csv(path("sim.csv"));
  EXPECT_EQ(sim.header, (std::vector<std::string>{"realization", "a", "n1"}));
  for (const auto& r : sim.rows) {
    EXPECT_GE(r[0], 1.0);
    EXPECT_LE(r[0], 4.0);
  }
}

TEST_F(CliTest, SameSeedSameBytes) {
  fit_small("", "m1.json");
  fit_small("", "m2.json");
  EXPECT_EQ(slurp("m1.json"), slurp("m2.json"));
  EXPECT_EQ(slurp("m1_per_m.csv"), slurp("m2_per_m.csv"));
  for (int i = 1; i <= 2; ++i) {
    const std::string s = std::to_string(i);
    ASSERT_EQ(run("envelope --model " + path("m1.json") + " --grid 0.5:4:9 --n-real 200 --seed 5 --out " +
                  path("e" + s + ".csv")),
              0);
    ASSERT_EQ(run("simulate --model " + path("m1.json") + " --n 10 --seed 5 --out " + path("s" + s + ".csv")), 0);
  }
  EXPECT_EQ(slurp("e1.csv"), slurp("e2.csv"));
  EXPECT_EQ(slurp("s1.csv"), slurp("s2.csv"));
}
