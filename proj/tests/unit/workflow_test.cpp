#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>

#include "helpers.hpp"
#include "json.hpp"
#include "tiltrisk/config.hpp"
#include "tiltrisk/curve.hpp"
#include "tiltrisk/error.hpp"
#include "tiltrisk/io.hpp"
#include "tiltrisk/pipeline.hpp"
#include "tiltrisk/schema.hpp"
#include "tiltrisk/simgen.hpp"

using namespace tiltrisk;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

class Workspace : public ::testing::Test {
protected:
    fs::path dir;

    void SetUp() override {
        const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
        dir = fs::temp_directory_path() / "tiltrisk_workflow" / (std::string(info->test_suite_name()) + "_" + info->name());
        fs::remove_all(dir);
        fs::create_directories(dir);
    }
    void TearDown() override { fs::remove_all(dir); }

    void write_data(const DgpSpec& spec, std::uint64_t seed, const std::string& name = "data.csv") {
        write_text_file(dir / name, table_csv(generate(spec, seed).table));
    }

    json base_config(StudyDesign design = StudyDesign::non_nested) const {
        return {
            {"format_version", 1},
            {"data", "data.csv"},
            {"design", to_string(design)},
            {"covariates", {"x1", "x2", "x3"}},
            {"model", {{"covariates", {"x1", "x2"}}, {"coefficients", {-0.9, 1.0, -0.6}}}},
            {"eta", {{"grid", {-0.5, 0.0, 0.5}}}},
            {"estimator", "aug"},
            {"resample", {{"method", "bootstrap"}, {"replicates", 50}}},
            {"seed", 11},
            {"outputs", {{"curve", "out/curve.csv"}, {"report", "out/report.json"}}},
        };
    }
};

json shipped_schema() { return json::parse(read_text_file(fs::path(TILTRISK_SOURCE_DIR) / "schema" / "report.schema.json")); }

}  // namespace

TEST(Config, ParsesDefaultsAndResolvesPaths) {
    const json j = {
        {"data", "d.csv"},
        {"covariates", {"a", "b"}},
        {"model", {{"coefficients", {0.1, 0.2, 0.3}}}},
        {"eta", {{"grid", {{"lo", -0.2}, {"hi", 0.2}, {"step", 0.1}}}}},
        {"resample", {{"method", "none"}}},
    };
    const AnalysisConfig c = config_from_json(j, "/base");
    EXPECT_EQ(c.design, StudyDesign::non_nested);
    EXPECT_EQ(c.loss, LossKind::brier);
    EXPECT_EQ(c.model.covariates, c.covariates);
    EXPECT_EQ(c.eta.values.size(), 5u);
    EXPECT_EQ(c.estimator, EstimatorKind::aug);
    EXPECT_FALSE(c.seed);
    EXPECT_EQ(c.resolve("d.csv"), fs::path("/base/d.csv"));
    EXPECT_EQ(c.resolve("/abs/d.csv"), fs::path("/abs/d.csv"));
    const AnalysisConfig again = config_from_json(config_to_json(c), "/base");
    EXPECT_EQ(config_to_json(again), config_to_json(c));
}

TEST(Config, Rejections) {
    const json ok = {
        {"covariates", {"a", "b"}},
        {"model", {{"covariates", {"a"}}, {"coefficients", {0.1, 0.2}}}},
        {"eta", {{"grid", {0.0}}}},
        {"resample", {{"method", "none"}}},
    };
    EXPECT_NO_THROW(config_from_json(ok));
    auto broken = [&](auto edit) {
        json j = ok;
        edit(j);
        return j;
    };
    EXPECT_THROW(config_from_json(broken([](json& j) { j["colour"] = 1; })), ConfigError);
    EXPECT_THROW(config_from_json(broken([](json& j) { j["model"]["covariates"] = {"z"}; })), ConfigError);
    EXPECT_THROW(config_from_json(broken([](json& j) { j["model"]["fit_split"] = 0.5; })), ConfigError);
    EXPECT_THROW(config_from_json(broken([](json& j) { j["model"]["coefficients"] = {0.1}; })), ConfigError);
    EXPECT_THROW(config_from_json(broken([](json& j) { j["eta"]["anchor"] = json::object(); })), ConfigError);
    EXPECT_THROW(config_from_json(broken([](json& j) { j["eta"]["grid"] = {0.5, 0.1}; })), ConfigError);
    EXPECT_THROW(config_from_json(broken([](json& j) { j["resample"]["method"] = "bootstrap"; })), ConfigError);
    EXPECT_NO_THROW(config_from_json(broken([](json& j) {
        j["resample"]["method"] = "bootstrap";
        j["seed"] = 3;
    })));
    EXPECT_THROW(config_from_json(broken([](json& j) { j["estimator"] = "tmle"; })), ConfigError);
    EXPECT_THROW(config_from_json(broken([](json& j) {
        j["design"] = "nested";
        j["estimator"] = "aug-alt";
    })), ConfigError);
    EXPECT_THROW(config_from_json(broken([](json& j) { j["covariates"] = {"a", "a"}; })), ConfigError);
    EXPECT_THROW(config_from_json(broken([](json& j) { j["nuisance"] = {{"outcome", "gam"}}; })), ConfigError);
    EXPECT_THROW(config_from_json(broken([](json& j) { j["format_version"] = 2; })), ConfigError);
}

TEST(Config, ResampleDefaultsFollowDesign) {
    const json j = {{"design", "nested"}, {"covariates", {"a"}}, {"eta", {{"grid", {0.0}}}}, {"seed", 1},
                    {"model", {{"coefficients", {0.1, 0.2}}}}};
    const AnalysisConfig c = config_from_json(j);
    EXPECT_EQ(c.resample.method, ResampleMethod::bootstrap);
    EXPECT_FALSE(c.resample.stratified);
    EXPECT_EQ(c.resample.replicates, 1000);
}

TEST_F(Workspace, GridZeroClMatchesPhiCl) {
    write_data(standard_binary_dgp(StudyDesign::non_nested, 300), 2);
    json j = base_config();
    j["eta"] = {{"grid", {0.0}}};
    j["estimator"] = "cl";
    j["resample"] = {{"method", "none"}};
    const AnalysisConfig c = config_from_json(j, dir);
    const AnalysisOutput out = run_analysis(c);
    ASSERT_EQ(out.curve.points.size(), 1u);

    const FittedNuisance f = FittedNuisance::fit(out.data.loaded.table, recipe_from_config(c));
    const double expected = phi_cl(out.data.loaded.table, f.at(0.0), Tilt(0.0)).estimate;
    EXPECT_EQ(out.curve.points[0].result.estimate, expected);
    write_outputs(c, out);
    const auto rows = parse_curve_csv(read_text_file(dir / "out" / "curve.csv"));
    ASSERT_EQ(rows.size(), 1u);
    EXPECT_EQ(rows[0].estimate, expected);
    EXPECT_FALSE(rows[0].se);
}

TEST_F(Workspace, MonotoneClCurve) {
    // h <= 0.5 everywhere, so L(1,h) >= L(0,h) on every row.
    DgpSpec spec = standard_binary_dgp(StudyDesign::non_nested, 600);
    spec.model.coefficients = Eigen::Vector3d(-1.2, 0.5, -0.3);
    write_data(spec, 3);
    json j = base_config();
    j["model"]["coefficients"] = {-1.2, 0.5, -0.3};
    j["eta"] = {{"grid", {{"lo", -3.0}, {"hi", 3.0}, {"step", 0.25}}}};
    j["estimator"] = "cl";
    j["resample"] = {{"method", "none"}};
    const AnalysisOutput out = run_analysis(config_from_json(j, dir));
    for (const auto i : out.data.loaded.table.target_rows()) ASSERT_LE(out.data.loaded.table.pred(i), 0.5);
    for (std::size_t k = 1; k < out.curve.points.size(); ++k) {
        EXPECT_GE(out.curve.points[k].result.estimate, out.curve.points[k - 1].result.estimate);
    }
}

TEST_F(Workspace, FailedPointsAreMarkedAndSweepContinues) {
    const SimulatedData sim = generate(standard_binary_dgp(StudyDesign::non_nested, 300), 4);
    CurveConfig cc;
    cc.estimator = EstimatorKind::aug;
    cc.resample.method = ResampleMethod::none;
    const SensitivityCurve curve = sensitivity_curve(sim.table, dgp_recipe(standard_binary_dgp()), {0.0, 800.0}, cc);
    EXPECT_EQ(curve.points[0].status, PointStatus::ok);
    EXPECT_EQ(curve.points[1].status, PointStatus::failed);
    EXPECT_FALSE(curve.points[1].message.empty());
    EXPECT_EQ(curve.failed_points(), 1);
    EXPECT_THROW(sensitivity_curve(sim.table, dgp_recipe(standard_binary_dgp()), {0.5, 0.0}, cc), ConfigError);
    EXPECT_THROW(sensitivity_curve(sim.table, dgp_recipe(standard_binary_dgp()), {}, cc), ConfigError);
}

TEST_F(Workspace, ByteIdenticalOutputs) {
    write_data(standard_binary_dgp(StudyDesign::non_nested, 400), 5);
    json j = base_config();
    j["resample"]["threads"] = 3;
    j["stability"] = {{"jackknife", true}, {"spline", {{"basis", "spline"}, {"spline_columns", {"x1", "x3"}}}}};
    const AnalysisConfig c = config_from_json(j, dir);
    write_outputs(c, run_analysis(c));
    const std::string curve1 = read_text_file(dir / "out" / "curve.csv");
    const std::string report1 = read_text_file(dir / "out" / "report.json");
    const std::string jk1 = read_text_file(dir / "out" / "curve_jackknife.csv");
    fs::remove_all(dir / "out");
    json single = j;
    single["resample"]["threads"] = 1;
    const AnalysisConfig c1 = config_from_json(single, dir);
    write_outputs(c1, run_analysis(c1));
    EXPECT_EQ(read_text_file(dir / "out" / "curve.csv"), curve1);
    EXPECT_EQ(read_text_file(dir / "out" / "curve_jackknife.csv"), jk1);
    // The report echoes the thread count, so compare it for a rerun of the same config.
    write_outputs(c, run_analysis(c));
    EXPECT_EQ(read_text_file(dir / "out" / "report.json"), report1);
    EXPECT_TRUE(fs::exists(dir / "out" / "curve_spline.csv"));
}

TEST_F(Workspace, ReportValidatesAgainstShippedSchema) {
    write_data(standard_binary_dgp(StudyDesign::nested, 400), 6);
    json j = base_config(StudyDesign::nested);
    j["eta"] = {{"anchor", {{"prevalence", "source"}, {"multipliers", {0.8, 1.25}}, {"step", 0.05}}}};
    j["stability"] = {{"jackknife", true}};
    const AnalysisOutput out = run_analysis(config_from_json(j, dir));
    const json schema = shipped_schema();
    const auto errors = schema_errors(out.report, schema);
    EXPECT_TRUE(errors.empty()) << (errors.empty() ? "" : errors.front());
    EXPECT_EQ(out.report["eta"]["mode"], "anchor");
    EXPECT_EQ(out.report["format_version"], 1);
    EXPECT_TRUE(out.report["eta"]["anchor"]["prevalence_from_source"].get<bool>());

    json bad = out.report;
    bad.erase("curve");
    EXPECT_FALSE(schema_errors(bad, schema).empty());
    bad = out.report;
    bad["curve"]["points"][0]["status"] = "weird";
    EXPECT_FALSE(schema_errors(bad, schema).empty());
    bad = out.report;
    bad["extra"] = 1;
    EXPECT_FALSE(schema_errors(bad, schema).empty());
}

TEST_F(Workspace, FitSplitDropsFittingRows) {
    write_data(standard_binary_dgp(StudyDesign::non_nested, 800), 7);
    json j = base_config();
    j["model"] = {{"covariates", {"x1", "x2"}}, {"fit_split", 0.5}};
    j["resample"] = {{"method", "none"}};
    const AnalysisOutput out = run_analysis(config_from_json(j, dir));
    const SimulatedData sim = generate(standard_binary_dgp(StudyDesign::non_nested, 800), 7);
    EXPECT_EQ(out.data.fit_rows, std::llround(0.5 * sim.table.n_source()));
    EXPECT_EQ(out.data.loaded.table.n_source(), sim.table.n_source() - out.data.fit_rows);
    EXPECT_EQ(out.data.loaded.table.n_target(), sim.table.n_target());
    EXPECT_TRUE(out.data.model_fitted);
    EXPECT_EQ(out.data.model.coefficients.size(), 3);
    EXPECT_TRUE(out.report["model"]["fitted"].get<bool>());
    // Same seed, same split.
    const AnalysisOutput again = run_analysis(config_from_json(j, dir));
    EXPECT_EQ(again.data.model.coefficients, out.data.model.coefficients);
}

TEST_F(Workspace, FortyFivePointAnchoredGrid) {
    // Constant g = 0.2 on the target rows: choose the anchor so the eta
    // range is known in closed form.
    const double g = 0.2;
    const Eigen::Index n = 400;
    Eigen::VectorXi s(n);
    Eigen::MatrixXd x(n, 1);
    Eigen::VectorXd y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        s(i) = i % 2;
        x(i, 0) = static_cast<double>(i % 7);
        y(i) = s(i) == 1 ? (i % 10 == 1 ? 1.0 : 0.0) : std::nan("");
    }
    ObservationTable t = make_table(StudyDesign::non_nested, s, x, y, {"x"});
    PredictionModel m;
    m.coefficients = Eigen::VectorXd::Constant(1, -1.0);
    attach_model(t, m, LossFunction::brier());
    (void)g;
    NuisanceRecipe recipe;
    recipe.outcome_design = DesignSpec::intercept_only();
    recipe.membership_design = DesignSpec::intercept_only();
    AnchorConfig anchor;
    anchor.prevalence = 0.14;
    const AnchoredGrid grid = anchored_grid(t, recipe, anchor);
    // g-hat = 0.2 exactly (source mean); lo = 0.07, hi = 0.28
    EXPECT_NEAR(grid.range.eta_lo, testutil::logit(0.07) - testutil::logit(0.2), 1e-8);
    EXPECT_NEAR(grid.range.eta_hi, testutil::logit(0.28) - testutil::logit(0.2), 1e-8);
    const auto lattice = eta_lattice(-0.95, 1.25, 0.05);
    EXPECT_EQ(lattice.size(), 45u);
    CurveConfig cc;
    cc.estimator = EstimatorKind::cl;
    cc.resample.method = ResampleMethod::none;
    EXPECT_EQ(sensitivity_curve(t, recipe, lattice, cc).points.size(), 45u);
}
