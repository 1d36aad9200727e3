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

#include <sstream>

#include "sbmi/config.hpp"
#include "sbmi/errors.hpp"
#include "sbmi/report.hpp"

using namespace sbmi;

class ConfigTest : public ::testing::Test {
protected:
    static Config parse(const std::string &text) {
        std::istringstream is(text);
        return Config::parse(is, "test");
    }
};

TEST_F(ConfigTest, SectionsCommentsAndOverrides) {
    const Config c = parse("# comment\n[lattice]\neps = 0.04  # trailing\nnoise = false\n[run]\nseed = 7\nseed = 9\n");
    EXPECT_DOUBLE_EQ(c.get_double("lattice.eps", 0.0), 0.04);
    EXPECT_FALSE(c.get_bool("lattice.noise", true));
    EXPECT_EQ(c.get_u64("run.seed", 0), 9u);
    EXPECT_EQ(c.get_int("run.replicas", 5), 5);
}

TEST_F(ConfigTest, MalformedLineRejected) { EXPECT_THROW(parse("[lattice]\nthis has no equals\n"), ConfigError); }

TEST_F(ConfigTest, BadValueNamesKey) {
    const Config c = parse("lattice.eps = abc\n");
    try {
        c.get_double("lattice.eps", 0.0);
        FAIL() << "expected ConfigError";
    } catch (const ConfigError &e) {
        EXPECT_NE(std::string(e.what()).find("lattice.eps"), std::string::npos);
    }
}

TEST_F(ConfigTest, UnknownKeyRejected) {
    Config c = parse("lattice.eps = 0.04\n");
    EXPECT_NO_THROW(c.check_known(known_config_keys()));
    c.set("lattice.bogus", "1");
    EXPECT_THROW(c.check_known(known_config_keys()), ConfigError);
}

TEST_F(ConfigTest, DigestIgnoresOrder) {
    EXPECT_EQ(parse("a.x = 1\nb.y = 2\n").digest(), parse("b.y = 2\na.x = 1\n").digest());
    EXPECT_NE(parse("a.x = 1\n").digest(), parse("a.x = 2\n").digest());
}

TEST_F(ConfigTest, ListsAndTypedViews) {
    const Config c = parse("separation.eps_list = 0.04, 0.02\nparams.beta = 0.4\nlattice.bump = smooth\n");
    EXPECT_EQ(c.get_list("separation.eps_list", {}), (std::vector<double>{0.04, 0.02}));
    EXPECT_DOUBLE_EQ(params_from(c).beta, 0.4);
    EXPECT_EQ(sim_from(c).bump, BumpShape::smooth);
    EXPECT_THROW(sim_from(parse("lattice.bump = square\n")), ConfigError);
}

TEST_F(ConfigTest, ReportDigestIgnoresRuntime) {
    const ArtifactHeader h{"simulate", 0x1234, 7};
    const Json body{{"value", 1.5}};
    EXPECT_EQ(report_digest(make_report(h, body, 1.0)), report_digest(make_report(h, body, 99.0)));
    EXPECT_NE(report_digest(make_report(h, body, 1.0)), report_digest(make_report(h, Json{{"value", 2.5}}, 1.0)));
    EXPECT_EQ(hex64(0xabcULL), "0000000000000abc");
}
