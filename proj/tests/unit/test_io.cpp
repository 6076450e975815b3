#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "dispfock/experiment.hpp"
#include "dispfock/io.hpp"

using namespace dispfock;
namespace fs = std::filesystem;

namespace {

json minimal_single_shot() {
    return json::parse(R"({
      "schema_version": 1, "name": "tiny", "protocol": "single_shot", "seed": 3,
      "trap": {"modes": [{"frequency_hz": 940000.0, "eta": 0.1}]},
      "engine": "ideal", "shots": 40,
      "single_shot": {"n_max": 2},
      "detection": {"lambda_bright": 5.0, "lambda_dark": 0.05}
    })");
}

std::string schema_message(const json& j) {
    try {
        parse_config(j);
    } catch (const SchemaError& e) {
        return e.what();
    }
    return "";
}

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

} // namespace

TEST(Csv, RoundTrip) {
    RamseyDataset a, b;
    a.times = {0.0, 1e-4, 2e-4};
    a.p_up = {0.0, 0.25, 1.0 / 3.0};
    a.shots = {300, 300, 300};
    a.ratio_label = 0.5;
    b.times = {0.0, 3e-4};
    b.p_up = {0.1, 0.9};
    b.shots = {100, 100};
    b.ratio_label = 2.0;
    std::stringstream ss;
    write_dataset_csv(ss, {a, b});
    const auto back = read_dataset_csv(ss);
    ASSERT_EQ(back.size(), 2u);
    EXPECT_EQ(back[0].times, a.times);
    EXPECT_EQ(back[0].p_up, a.p_up);
    EXPECT_EQ(back[1].shots, b.shots);
    EXPECT_EQ(back[1].ratio_label, 2.0);

    RamseyDataset single;
    single.times = {0.0, 1.0};
    single.p_up = {0.5, 0.5};
    std::stringstream s2;
    write_dataset_csv(s2, {single});
    EXPECT_TRUE(std::isnan(read_dataset_csv(s2)[0].ratio_label));
}

TEST(Csv, SchemaErrors) {
    std::stringstream bad_header("t,p\n0,0\n");
    EXPECT_THROW(read_dataset_csv(bad_header), SchemaError);
    std::stringstream bad_row("time_s,p_up,shots,ratio_label\n0,abc,3,\n");
    EXPECT_THROW(read_dataset_csv(bad_row), SchemaError);
    std::stringstream bad_p("time_s,p_up,shots,ratio_label\n0,1.5,3,\n");
    EXPECT_THROW(read_dataset_csv(bad_p), SchemaError);
    std::stringstream empty("time_s,p_up,shots,ratio_label\n");
    EXPECT_THROW(read_dataset_csv(empty), SchemaError);
}

TEST(Csv, BundledDataParses) {
    const auto sets = read_dataset_csv(std::string(DISPFOCK_SOURCE_DIR) + "/data/ecs_even_alpha1_synthetic.csv");
    ASSERT_EQ(sets.size(), 3u);
    EXPECT_EQ(sets[0].ratio_label, 0.5);
    EXPECT_EQ(sets[2].ratio_label, 2.0);
}

TEST(OccupationKeys, RoundTrip) {
    EXPECT_EQ(occupation_key({3, 0}), "3,0");
    EXPECT_EQ(parse_occupation_key("3,0"), (Occupation{3, 0}));
    EXPECT_THROW(parse_occupation_key("3,x"), SchemaError);
}

TEST(Config, ValidMinimal) {
    const auto c = parse_config(minimal_single_shot());
    EXPECT_EQ(c.protocol, "single_shot");
    EXPECT_EQ(c.n_max, 2);
    EXPECT_NEAR(c.modes[0].omega, two_pi * 940e3, 1e-6);
    EXPECT_EQ(c.detection.lambda_dark, 0.05);
}

TEST(Config, ErrorsCarryPaths) {
    auto j = minimal_single_shot();
    j["colour"] = "red";
    EXPECT_EQ(schema_message(j), "/colour: unknown key");

    j = minimal_single_shot();
    j.erase("schema_version");
    EXPECT_EQ(schema_message(j), "/schema_version: required key missing");

    j = minimal_single_shot();
    j["schema_version"] = 2;
    EXPECT_NE(schema_message(j).find("/schema_version"), std::string::npos);

    j = minimal_single_shot();
    j["trap"]["modes"][0]["eta"] = "big";
    EXPECT_EQ(schema_message(j), "/trap/modes/0/eta: wrong type");

    j = minimal_single_shot();
    j["drives"] = json::array({json{{"rabi_hz", -1.0}, {"ratio_target", 1.0}}});
    EXPECT_EQ(schema_message(j), "/drives/0/rabi_hz: must be positive");

    j = minimal_single_shot();
    j["engine"] = "magic";
    EXPECT_NE(schema_message(j).find("/engine"), std::string::npos);

    j = minimal_single_shot();
    j["protocol"] = "ramsey";
    EXPECT_NE(schema_message(j).find("/drives"), std::string::npos);

    j = minimal_single_shot();
    j["state"] = json{{"kind", "cat"}, {"alpha", 1.0}, {"parity", "even"}, {"mode", 2}};
    EXPECT_NE(schema_message(j).find("/state/mode"), std::string::npos);
}

TEST(Config, BundledPresetsParse) {
    for (const auto& e : fs::directory_iterator(fs::path(DISPFOCK_SOURCE_DIR) / "configs")) {
        if (e.path().extension() != ".json") continue;
        EXPECT_NO_THROW(load_config(e.path().string())) << e.path();
    }
}

TEST(Experiment, DeterministicArtifacts) {
    const auto c = parse_config(minimal_single_shot());
    const auto base = fs::temp_directory_path() / "dispfock_unit_determinism";
    fs::remove_all(base);
    run_experiment(c, (base / "a").string(), 1);
    run_experiment(c, (base / "b").string(), 3);
    const auto a = slurp(base / "a" / "tiny_result.json");
    EXPECT_FALSE(a.empty());
    EXPECT_EQ(a, slurp(base / "b" / "tiny_result.json"));
    const auto j = json::parse(a);
    EXPECT_EQ(j.at("schema_version"), result_schema_version);
    EXPECT_EQ(j.at("protocol"), "single_shot");
    fs::remove_all(base);
}

TEST(Experiment, RamseyPresetProducesArtifacts) {
    auto c = load_config(std::string(DISPFOCK_SOURCE_DIR) + "/configs/fig2_even_cat.json");
    c.truncation = {12};
    c.points = 31;
    c.fit_n_max = 5;
    const auto dir = fs::temp_directory_path() / "dispfock_unit_ramsey";
    fs::remove_all(dir);
    const auto bundle = run_experiment(c, dir.string());
    bool svg = false;
    for (const auto& f : bundle.files) svg = svg || f.ends_with(".svg");
    EXPECT_TRUE(svg);
    EXPECT_TRUE(fs::exists(dir / (c.name + "_result.json")));
    fs::remove_all(dir);
}
