// fractune command-line front end. Stage commands run through the pipeline (stamps,
// partial markers); apply-rule, simulate and rule-surface are one-shot helpers.
#include <cmath>
#include <cstdio>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "json.hpp"

#include "fractune/error.hpp"
#include "fractune/pipeline.hpp"

using namespace fractune;
using nlohmann::json;

namespace {

struct StageArgs {
    std::string manifest;
    std::optional<std::uint64_t> seed;
    std::string out;
    bool force = false;
};

void stage_options(CLI::App* c, StageArgs& a)
{
    c->add_option("--manifest", a.manifest, "JSON run manifest (defaults apply when omitted)");
    c->add_option("--seed", a.seed, "override the manifest seed");
    c->add_option("--out", a.out, "override the manifest output_dir");
    c->add_flag("--force", a.force, "ignore stage stamps and rerun");
}

RunManifest resolve(const StageArgs& a)
{
    RunManifest m = a.manifest.empty() ? RunManifest::from_json(json::object()) : RunManifest::load(a.manifest);
    if (a.seed)
        m.seed = *a.seed;
    if (!a.out.empty())
        m.output_dir = a.out;
    m.validate();
    return m;
}

// 0 when every gate held, 2 otherwise
int run_stages(const StageArgs& a, const std::vector<Stage>& stages)
{
    auto m = resolve(a);
    auto reports = run_pipeline(m, stages, PipelineOptions{a.force});
    bool ok = true;
    for (const auto& r : reports) {
        std::cerr << "[" << to_string(r.stage) << "] " << (r.skipped ? "up to date" : "done")
                  << (r.gate_ok ? "" : " -- acceptance diff FAILED") << "\n";
        for (const auto& n : r.notes)
            std::cerr << "  " << n << "\n";
        ok = ok && r.gate_ok;
    }
    return ok ? 0 : 2;
}

json params_json(const FOPIDParams& c)
{
    return {{"Kp", c.Kp}, {"Ki", c.Ki}, {"Kd", c.Kd}, {"lambda", c.lambda}, {"mu", c.mu}};
}

json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"fractune: plant reduction, (FO)PID tuning and GP tuning rules"};
    app.require_subcommand(1);

    StageArgs sa;
    std::vector<std::pair<CLI::App*, Stage>> stage_cmds;
    for (auto [name, st, help] : {std::tuple{"reduce", Stage::reduce, "reduce the test bench to FOPTD/SOPTD"},
                                  std::tuple{"tune", Stage::tune, "GA-tune PID/FOPID controllers"},
                                  std::tuple{"evolve-rules", Stage::gp, "evolve single/multi-gene GP tuning rules"},
                                  std::tuple{"evaluate", Stage::evaluate, "closed-loop comparison GA vs rules"},
                                  std::tuple{"robustness", Stage::robustness, "perturbation corners for a rule"}}) {
        auto* c = app.add_subcommand(name, help);
        stage_options(c, sa);
        stage_cmds.push_back({c, st});
    }
    auto* pipe = app.add_subcommand("pipeline", "run the manifest's stages in dependency order");
    stage_options(pipe, sa);

    // apply-rule
    std::string rule_name;
    SOPTDParams sp{1, 1, 1, 0};
    auto* apply = app.add_subcommand("apply-rule", "evaluate a published tuning rule, JSON to stdout");
    apply->add_option("--rule", rule_name, "sg-pid | mg-pid | sg-fopid | mg-fopid")->required();
    apply->add_option("--K", sp.K)->required();
    apply->add_option("--tau-max", sp.tau_max)->required();
    apply->add_option("--tau-min", sp.tau_min)->required();
    apply->add_option("--L", sp.L)->required();

    // simulate
    std::string plant_key, traj_out;
    FOPIDParams sim_c{0, 0, 0};
    double sim_dt = 0.01, sim_horizon = 100;
    bool sim_dist = false;
    auto* sim = app.add_subcommand("simulate", "closed-loop unit step of a test-bench plant");
    sim->add_option("--plant", plant_key, "test-bench key, e.g. P2:0.6")->required();
    sim->add_option("--Kp", sim_c.Kp);
    sim->add_option("--Ki", sim_c.Ki);
    sim->add_option("--Kd", sim_c.Kd);
    sim->add_option("--lambda", sim_c.lambda);
    sim->add_option("--mu", sim_c.mu);
    sim->add_option("--dt", sim_dt);
    sim->add_option("--horizon", sim_horizon);
    sim->add_flag("--disturbance", sim_dist, "load step of 0.2 at t = 50");
    sim->add_option("--out", traj_out, "trajectory CSV (t,y,u,e)");

    // rule-surface
    std::string surf_rule, xs = "tau_max", ys = "L", surf_out = "surface.csv";
    std::vector<double> xr{0.1, 10, 25}, yr{0.01, 10, 25};
    SOPTDParams base{1, 10, 1, 1};
    auto* surf = app.add_subcommand("rule-surface", "CSV grid of a rule over two inputs (for plotting)");
    surf->add_option("--rule", surf_rule)->required();
    surf->add_option("--x", xs, "tau_max | tau_min | L");
    surf->add_option("--y", ys, "tau_max | tau_min | L");
    surf->add_option("--x-range", xr, "lo hi count")->expected(3);
    surf->add_option("--y-range", yr, "lo hi count")->expected(3);
    surf->add_option("--K", base.K);
    surf->add_option("--tau-max", base.tau_max, "fixed value when not an axis");
    surf->add_option("--tau-min", base.tau_min, "fixed value when not an axis");
    surf->add_option("--L", base.L, "fixed value when not an axis");
    surf->add_option("--out", surf_out);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    }

    try {
        for (auto& [c, st] : stage_cmds)
            if (c->parsed())
                return run_stages(sa, {st});
        if (pipe->parsed())
            return run_stages(sa, resolve(sa).stages);

        if (apply->parsed()) {
            auto rule = RuleKind::parse(rule_name);
            auto c = apply_rule(rule, sp);
            json j = params_json(c);
            j["rule"] = rule.name();
            j["input"] = {{"K", sp.K}, {"tau_max", sp.tau_max}, {"tau_min", sp.tau_min}, {"L", sp.L}};
            std::cout << j.dump(2) << "\n";
            return 0;
        }

        if (sim->parsed()) {
            auto spec = TestBenchSpec::parse(plant_key);
            SimConfig scfg;
            scfg.dt = sim_dt;
            scfg.horizon = sim_horizon;
            if (sim_dist)
                scfg.disturbance = Disturbance{};
            scfg.validate();
            auto tr = closed_loop_step(make_testbench(spec), sim_c, {}, scfg);
            auto mtr = step_metrics(tr, scfg);
            if (!traj_out.empty())
                write_trajectory_csv(traj_out, tr);
            json j{{"plant", spec.key()},
                   {"params", params_json(sim_c)},
                   {"J", finite_or_null(mtr.J)},
                   {"overshoot", finite_or_null(mtr.overshoot)},
                   {"settling_time", finite_or_null(mtr.settling_time)},
                   {"settled", mtr.settled},
                   {"diverged", tr.diverged}};
            std::cout << j.dump(2) << "\n";
            return 0;
        }

        if (surf->parsed()) {
            auto axis = [](const std::string& v, const std::vector<double>& r) {
                return SurfaceAxis{surface_var_from_string(v), r[0], r[1], static_cast<int>(std::lround(r[2]))};
            };
            auto g = rule_surface_grid(RuleKind::parse(surf_rule), axis(xs, xr), axis(ys, yr), base);
            write_surface_csv(surf_out, g);
            std::cerr << "wrote " << g.size() << " points to " << surf_out << "\n";
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "fractune: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
