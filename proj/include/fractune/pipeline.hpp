#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

#include "fractune/gp.hpp"
#include "fractune/lti.hpp"
#include "fractune/reduction.hpp"
#include "fractune/robustness.hpp"
#include "fractune/rules.hpp"
#include "fractune/simulation.hpp"

namespace fractune {

enum class Stage { reduce, tune, gp, evaluate, robustness };
std::string to_string(Stage s);
Stage stage_from_string(const std::string& s);
const std::vector<Stage>& stage_order();  // reduce → tune → gp → evaluate → robustness

// the four plants used for the closed-loop comparison
std::vector<TestBenchSpec> representative_plants();

struct ReduceStageConfig {
    std::vector<TestBenchSpec> plants = test_bench();
    std::vector<Template> templates{Template::FOPTD, Template::SOPTD};
    std::vector<ObjectiveKind> objectives{ObjectiveKind::Nyquist, ObjectiveKind::H2};
    int pop_size = 50;
    int generations = 100;
};

struct TuneStageConfig {
    std::vector<TestBenchSpec> plants = test_bench();
    std::vector<ControllerKind> controllers{ControllerKind::PID, ControllerKind::FOPID};
    double dt = 0.01;
    int pop_size = 20;
    int generations = 100;
};

struct GPStageConfig {
    std::string training = "computed";  // computed: reduce/tune outputs; fixtures: Tables 2–4
    int pop_size = 500;
    int generations = 100;
    int max_genes = 8;
    int ki_comparison_seeds = 5;  // single- vs multi-gene K_i runs (0 disables)
};

struct EvaluateStageConfig {
    std::vector<TestBenchSpec> plants = representative_plants();
    std::string ga_source = "fixtures";  // fixtures: Table-5 GA rows; tune: this run's tune stage
    double dt = 0.01;
    bool disturbance = true;  // trajectories carry a load step (J is taken without it)
};

struct RobustnessStageConfig {
    std::vector<TestBenchSpec> plants{TestBenchSpec{Family::P2, 0.6}};
    std::string rule = "mg-fopid";
    std::string params = "table5";  // table5: printed Table-5 values; rule: evaluate the rule
    double dt = 0.01;
};

struct RunManifest {
    std::uint64_t seed = 1;
    std::vector<Stage> stages = stage_order();
    std::string output_dir = "out";
    std::string fixture_dir;
    ReduceStageConfig reduce;
    TuneStageConfig tune;
    GPStageConfig gp;
    EvaluateStageConfig evaluate;
    RobustnessStageConfig robustness;

    void validate() const;
    static RunManifest from_json(const nlohmann::json& j);
    static RunManifest load(const std::string& path);
    nlohmann::json to_json() const;
    nlohmann::json stage_json(Stage s) const;  // the part of the manifest a stage depends on
};

enum class Source { GA, sg_rule, mg_rule, sg_evolved, mg_evolved };
std::string to_string(Source s);

struct TuningRecord {
    TestBenchSpec spec;
    ControllerKind controller = ControllerKind::PID;
    Source source = Source::GA;
    FOPIDParams params;
    double J = 0;
};

struct StageReport {
    Stage stage = Stage::reduce;
    bool skipped = false;  // stamp matched, outputs reused
    bool gate_ok = true;
    std::vector<std::string> notes;
    std::vector<std::string> outputs;  // paths relative to the output directory
};

// each stage reads its inputs from the output directory (falling back to fixtures where
// documented) and writes CSV/JSON there
StageReport run_reduce_stage(const RunManifest& m);
StageReport run_tune_stage(const RunManifest& m);
StageReport run_gp_stage(const RunManifest& m);
StageReport run_evaluate_stage(const RunManifest& m);
StageReport run_robustness_stage(const RunManifest& m);

struct PipelineOptions {
    bool force = false;  // ignore stamps
};

// runs the requested stages in dependency order; a stage whose stamp (manifest part,
// seed, fixture checksums, upstream stamps, output hashes) matches is skipped.
// A throwing stage leaves <stage>.partial in the output directory and rethrows.
std::vector<StageReport> run_pipeline(const RunManifest& m, const std::vector<Stage>& stages,
                                      const PipelineOptions& opt = {});

// GP training data: Nyquist SOPTD parameters (rows) and controller-parameter targets
struct TrainingSet {
    std::vector<TestBenchSpec> plants;
    Eigen::MatrixXd X;  // kFeatures columns
    std::vector<std::string> targets;  // PID_Kp ... FOPID_mu
    std::vector<Eigen::VectorXd> y;  // per target; NaN where a plant has no value
};
TrainingSet training_from_fixtures(const std::string& fixture_dir);
TrainingSet training_from_outputs(const std::string& output_dir);
// drop rows with a NaN target
void target_rows(const TrainingSet& t, std::size_t target, Eigen::MatrixXd& X, Eigen::VectorXd& y);

nlohmann::json model_to_json(const gp::MultiGeneModel& m);
gp::MultiGeneModel model_from_json(const nlohmann::json& j);

// Table-5 printed values for (plant, controller, source); false when absent
bool table5_params(const std::string& fixture_dir, const TestBenchSpec& s, ControllerKind c, Source src,
                   FOPIDParams& out);
// published rule with the allowlisted cells replaced by the printed Table-5 values
FOPIDParams published_rule_params(const std::string& fixture_dir, const TestBenchSpec& s, const RuleKind& rule,
                                  const SOPTDParams& p, bool substitute_allowlisted);
// Nyquist SOPTD parameters of a plant from Table 2
SOPTDParams table2_soptd(const std::string& fixture_dir, const TestBenchSpec& s);

std::string default_fixture_dir();

}  // namespace fractune
