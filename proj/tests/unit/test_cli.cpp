/*
   Copyright 2026 The sbmi Authors

   Licensed under the Apache License, Version 2.0 (the "License");
   you may not use this file except in compliance with the License.
   You may obtain a copy of the License at

       http://www.apache.org/licenses/LICENSE-2.0

   Unless required by applicable law or agreed to in writing, software
   distributed under the License is distributed on an "AS IS" BASIS,
   WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
   See the License for the specific language governing permissions and
   limitations under the License.
*/

#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <regex>
#include <sstream>
#include <string>
#include <sys/wait.h>

namespace fs = std::filesystem;

class CliTest : public ::testing::Test {
protected:
    fs::path dir;

    void SetUp() override {
        dir = fs::temp_directory_path() / ("sbmi_cli_" + std::to_string(::getpid()) + "_" +
                                           ::testing::UnitTest::GetInstance()->current_test_info()->name());
        fs::remove_all(dir);
        fs::create_directories(dir);
    }
    void TearDown() override { fs::remove_all(dir); }

    int run(const std::string &args) const {
        const std::string cmd = std::string(SBMI_CLI_PATH) + " " + args + " > " + (dir / "stdout.txt").string() + " 2>&1";
        const int status = std::system(cmd.c_str());
        return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    }
    std::string read(const fs::path &p) const {
        std::ifstream is(p);
        std::stringstream ss;
        ss << is.rdbuf();
        return ss.str();
    }
    std::string digest(const fs::path &report) const {
        std::smatch m;
        const std::string text = read(report);
        return std::regex_search(text, m, std::regex("\"digest\": \"([0-9a-f]+)\"")) ? m[1].str() : "";
    }
};

TEST_F(CliTest, SimulateIsDeterministic) {
    const auto a = dir / "a", b = dir / "b";
    ASSERT_EQ(run("simulate --seed 5 --set lattice.horizon=0.05 --out " + a.string()), 0);
    ASSERT_EQ(run("simulate --seed 5 --set lattice.horizon=0.05 --out " + b.string()), 0);
    const std::string da = digest(a / "report.json");
    ASSERT_FALSE(da.empty());
    EXPECT_EQ(da, digest(b / "report.json"));
    EXPECT_TRUE(fs::exists(a / "summary.csv"));
    EXPECT_TRUE(fs::exists(a / "plot.gp"));
}

TEST_F(CliTest, SeedChangesDigest) {
    ASSERT_EQ(run("simulate --seed 5 --set lattice.horizon=0.05 --out " + (dir / "a").string()), 0);
    ASSERT_EQ(run("simulate --seed 6 --set lattice.horizon=0.05 --out " + (dir / "b").string()), 0);
    EXPECT_NE(digest(dir / "a" / "report.json"), digest(dir / "b" / "report.json"));
}

TEST_F(CliTest, ValidateSubset) {
    EXPECT_EQ(run("validate --only mathkernel --out " + (dir / "v").string()), 0);
    const std::string report = read(dir / "v" / "report.json");
    EXPECT_NE(report.find("\"module\": \"mathkernel\""), std::string::npos);
    EXPECT_EQ(report.find("\"module\": \"diffusion1d\""), std::string::npos);
}

TEST_F(CliTest, InvalidParamsNameConstraint) {
    EXPECT_NE(run("validate --only params --set params.beta=0.45 --set params.beta_prime=0.45 --out " +
                  (dir / "v").string()),
              0);
    EXPECT_NE(read(dir / "stdout.txt").find("(b)"), std::string::npos);
}

TEST_F(CliTest, UsageErrors) {
    EXPECT_EQ(run("validate --set bogus.key=1 --out " + (dir / "v").string()), 2);
    EXPECT_NE(read(dir / "stdout.txt").find("bogus.key"), std::string::npos);
    EXPECT_EQ(run("validate --only nosuchmodule --out " + (dir / "v").string()), 2);
    EXPECT_EQ(run("separation --out " + (dir / "s").string()), 2);
    EXPECT_EQ(run("nosuchcommand"), 2);
}

TEST_F(CliTest, SeparationRowsPerEps) {
    ASSERT_EQ(run("separation --set separation.r=r0 --set separation.eps_list=0.04,0.02 --set "
                  "separation.replicas=100 --out " + (dir / "s").string()),
              0);
    const std::string text = read(dir / "s" / "report.json");
    EXPECT_NE(text.find("\"eps\": 0.04"), std::string::npos);
    EXPECT_NE(text.find("\"eps\": 0.02"), std::string::npos);
}
