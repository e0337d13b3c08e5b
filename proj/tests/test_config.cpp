#include "eitsfm/config.hpp"

#include <gtest/gtest.h>

#include <fstream>
#include <set>
#include <sstream>

using namespace eitsfm;

namespace {

std::string written(const ExperimentConfig& c) {
    std::ostringstream out;
    write_config(out, c);
    return out.str();
}

}  // namespace

TEST(Config, EmptyInputGivesDefaults) {
    const ExperimentConfig c = parse_config_string("");
    const ExperimentConfig d;
    EXPECT_EQ(written(c), written(d));
    EXPECT_EQ(c.cases.size(), 8u);
    EXPECT_EQ(c.t0, 64);
    EXPECT_FALSE(c.beta.has_value());
    EXPECT_EQ(c.t2_rule, T2Rule::UpperThird);
}

TEST(Config, ParsesAllSections) {
    const ExperimentConfig c = parse_config_string(R"(
[domain]
deformation = 0.2
disc_elements = 500
electrodes = 8
[phantom]
cases = a, e, blob
[noise]
levels = 0, 0.02
seed = 99
[method]
alpha = 0.5
beta = 3
t0 = 40
t2_rule = as_printed
methods = S,A
[run]
jobs = 3
output = out
[case.blob]
domain = deformed
anomalies = disc 0.1 0.2 0.15 -0.5; polygon 1 0 0 0 0.2 0.2 0
)");
    EXPECT_DOUBLE_EQ(c.deformation, 0.2);
    EXPECT_EQ(c.disc_elements, 500);
    EXPECT_EQ(c.electrodes, 8);
    EXPECT_EQ(c.cases, (std::vector<std::string>{"a", "e", "blob"}));
    EXPECT_EQ(c.noise_levels, (std::vector<double>{0.0, 0.02}));
    EXPECT_EQ(c.seed, 99u);
    EXPECT_DOUBLE_EQ(c.alpha, 0.5);
    EXPECT_DOUBLE_EQ(*c.beta, 3.0);
    EXPECT_EQ(c.t0, 40);
    EXPECT_EQ(c.t2_rule, T2Rule::AsPrinted);
    EXPECT_TRUE(c.wants("A"));
    EXPECT_FALSE(c.wants("W1"));
    EXPECT_EQ(c.jobs, 3);
    EXPECT_EQ(c.output_dir, "out");
    const auto cases = c.selected_cases();
    ASSERT_EQ(cases.size(), 3u);
    EXPECT_EQ(cases[1].domain, Domain::Deformed);
    const CaseSpec& blob = cases[2];
    EXPECT_EQ(blob.domain, Domain::Deformed);
    ASSERT_EQ(blob.anomalies.size(), 2u);
    EXPECT_DOUBLE_EQ(blob.anomalies[0].contrast, -0.5);
    // Clockwise input is reoriented.
    const auto& poly = std::get<PolygonShape>(blob.anomalies[1].shape).vertices;
    EXPECT_GT(signed_area(poly), 0.0);
}

TEST(Config, RoundTrip) {
    ExperimentConfig c;
    c.beta = 0.125;
    c.noise_levels = {0.0, 0.003};
    c.t2_rule = T2Rule::AsPrinted;
    c.custom_cases.push_back({"ring", Domain::Disc, {disc_anomaly(0.3, 0.1, 0.2, 1.0 / 3.0)}});
    c.cases = {"ring", "b"};
    c.output_dir = "results";
    const std::string text = written(c);
    const ExperimentConfig back = parse_config_string(text);
    EXPECT_EQ(written(back), text);
    EXPECT_EQ(*back.beta, 0.125);
    EXPECT_EQ(back.noise_levels[1], 0.003);
    EXPECT_EQ(std::get<DiscShape>(back.custom_cases[0].anomalies[0].shape).radius, 0.2);
    EXPECT_EQ(back.custom_cases[0].anomalies[0].contrast, 1.0 / 3.0);
}

TEST(Config, SuiteIsComplete) {
    const auto suite = default_suite();
    std::set<std::string> ids;
    int disc = 0;
    for (const auto& s : suite) {
        ids.insert(s.id);
        if (s.id != "empty") disc += s.domain == Domain::Disc;
    }
    EXPECT_EQ(ids, (std::set<std::string>{"a", "b", "c", "d", "e", "f", "g", "h", "empty"}));
    EXPECT_EQ(disc, 4);
    for (const auto& s : suite) EXPECT_EQ(s.anomalies.empty(), s.id == "empty");
}

TEST(Config, SuitePhantomsFitTheirDomains) {
    const TriMesh disc = build_disc_mesh(1.0, 600);
    const TriMesh deformed = build_deformed_mesh(default_deformation(), 600);
    for (const auto& s : default_suite()) {
        Phantom ph;
        ph.id = s.id;
        ph.anomalies = s.anomalies;
        EXPECT_NO_THROW(validate_phantom(ph, s.domain == Domain::Disc ? disc : deformed)) << s.id;
    }
}

TEST(Config, Rejections) {
    const auto bad = [](const std::string& text) {
        try {
            parse_config_string(text);
        } catch (const std::invalid_argument& e) {
            return std::string(e.what()).rfind("config", 0) == 0 || std::string(e.what()).find("unknown") != std::string::npos;
        }
        return false;
    };
    EXPECT_TRUE(bad("[bogus]\nx = 1\n"));
    EXPECT_TRUE(bad("[method]\nalpha = -1\n"));
    EXPECT_TRUE(bad("[method]\nalpha = abc\n"));
    EXPECT_TRUE(bad("[method]\nt2_rule = middle\n"));
    EXPECT_TRUE(bad("[method]\nmethods = S,Q\n"));
    EXPECT_TRUE(bad("[noise]\nlevels = 0,-0.1\n"));
    EXPECT_TRUE(bad("[phantom]\ncases = z\n"));
    EXPECT_TRUE(bad("[domain]\nelectrodes = 2\n"));
    EXPECT_TRUE(bad("[run]\njobs = 0\n"));
    EXPECT_TRUE(bad("[case.x]\nanomalies = square 1 2 3\n"));
    EXPECT_TRUE(bad("[case.x]\nanomalies = polygon 1 0 0 1 1\n"));
    EXPECT_TRUE(bad("[case.x]\ndomain = cube\n"));
    EXPECT_THROW(parse_domain("torus"), std::invalid_argument);
}

TEST(Config, SampleConfigParses) {
    std::ifstream in(EITSFM_SAMPLES_DIR "/experiment.ini");
    ASSERT_TRUE(in);
    const ExperimentConfig c = parse_config(in);
    EXPECT_NO_THROW(c.validate());
    EXPECT_FALSE(c.custom_cases.empty());
}
