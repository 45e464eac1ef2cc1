#include <gtest/gtest.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace fs = std::filesystem;

namespace {

struct Result {
  int code = -1;
  std::string out;
};

Result run(const std::string& args) {
  const std::string cmd = std::string(NTKLAB_CLI_PATH) + " " + args + " 2>/dev/null";
  Result r;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return r;
  char buf[4096];
  std::size_t n;
  while ((n = fread(buf, 1, sizeof buf, pipe)) > 0) r.out.append(buf, n);
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("ntklab_cli_" + std::to_string(getpid()) + "_" +
                                        ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string write(const std::string& name, const std::string& text) {
    const fs::path p = dir_ / name;
    std::ofstream(p) << text;
    return p.string();
  }

  static std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
  }

  fs::path dir_;
};

const char* kSmall[][2] = {
    {"scaling", R"({"sweep": {"d": [4, 6], "N": [4]}})"},
    {"phase", R"({"sweep": {"d": [2], "N": [8], "T": 20}})"},
    {"concentration", R"({"sweep": {"d": [8], "M": 200}})"},
    {"centering", R"({"sweep": {"d": [4], "N": [6], "M": 200}})"},
    {"training", R"({"sweep": {"d": [8], "widths": [[8, 4]], "N": [4], "T": 20}})"},
    {"memorize", R"({"sweep": {"d": [6], "N": [4]}})"},
    {"jacobian-check", R"({"trials": 2})"},
};

}  // namespace

TEST_F(Cli, EverySubcommandIsReproducible) {
  for (const auto& [name, json] : kSmall) {
    const std::string cfg = write(std::string(name) + ".json", json);
    const std::string args = std::string(name) + " --config " + cfg + " --trials 2 --reproducible";
    const Result a = run(args);
    const Result b = run(args);
    ASSERT_EQ(a.code, 0) << name;
    EXPECT_EQ(a.out, b.out) << name;
    EXPECT_EQ(a.out.rfind("# ntklab: ", 0), 0u) << name;
    EXPECT_EQ(a.out.find("# generated: "), std::string::npos) << name;
  }
}

TEST_F(Cli, TimestampWithoutReproducibleFlag) {
  const std::string cfg = write("s.json", kSmall[0][1]);
  const Result r = run("scaling --config " + cfg + " --trials 1");
  ASSERT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("# generated: "), std::string::npos);
}

TEST_F(Cli, SeedOverrideChangesOutput) {
  const std::string cfg = write("s.json", kSmall[0][1]);
  const Result a = run("scaling --config " + cfg + " --trials 1 --reproducible --seed 1");
  const Result b = run("scaling --config " + cfg + " --trials 1 --reproducible --seed 2");
  ASSERT_EQ(a.code, 0);
  ASSERT_EQ(b.code, 0);
  EXPECT_NE(a.out, b.out);
}

TEST_F(Cli, OutFileMatchesStdout) {
  const std::string cfg = write("s.json", kSmall[0][1]);
  const fs::path out = dir_ / "table.csv";
  const Result a = run("scaling --config " + cfg + " --trials 1 --reproducible --out " + out.string());
  ASSERT_EQ(a.code, 0);
  EXPECT_TRUE(a.out.empty());
  const Result b = run("scaling --config " + cfg + " --trials 1 --reproducible");
  EXPECT_EQ(slurp(out), b.out);
}

TEST_F(Cli, ConfigErrorsExitTwo) {
  EXPECT_EQ(run("scaling --config " + write("bad.json", "{not json")).code, 2);
  EXPECT_EQ(run("scaling --config " + write("k.json", R"({"sweep": {"widht": 3}})")).code, 2);
  EXPECT_EQ(run("scaling --config " + write("a.json", R"({"sweep": {"activation": "relu"}})")).code, 2);
  EXPECT_EQ(run("scaling --config " + (dir_ / "missing.json").string()).code, 2);
  EXPECT_EQ(run("scaling --trials 0").code, 2);
  EXPECT_EQ(run("nonsense").code, 2);
  EXPECT_EQ(run("").code, 2);
}

TEST_F(Cli, AllowNonsmoothFlag) {
  const std::string cfg = write("r.json", R"({"sweep": {"d": [4], "N": [4], "activation": "relu"}})");
  EXPECT_EQ(run("scaling --config " + cfg + " --trials 1").code, 2);
  EXPECT_EQ(run("scaling --config " + cfg + " --trials 1 --allow-nonsmooth").code, 0);
}

TEST_F(Cli, DivergenceExitsThree) {
  const std::string cfg = write("div.json", R"({"trials": 1, "sweep": {"eta": 1000, "T": 50}})");
  EXPECT_EQ(run("training --config " + cfg).code, 3);
}
