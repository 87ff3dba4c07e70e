// Acceptance gates. One PASS/FAIL line per criterion, details indented below it.
// Tolerances are fixed here; nothing is read from the environment.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include <fmt/format.h>

#include "fractune/error.hpp"
#include "fractune/ga.hpp"
#include "fractune/gp.hpp"
#include "fractune/io.hpp"
#include "fractune/lti.hpp"
#include "fractune/pipeline.hpp"
#include "fractune/reduction.hpp"
#include "fractune/rules.hpp"
#include "fractune/simulation.hpp"

using namespace fractune;

namespace {

const std::string kDir = FRACTUNE_FIXTURE_DIR;

struct Outcome {
    bool pass = true;
    std::vector<std::string> details;

    void expect(bool ok, const std::string& what)
    {
        if (!ok) {
            pass = false;
            details.push_back("FAILED: " + what);
        }
    }
    void note(const std::string& s) { details.push_back(s); }
};

double seconds_since(std::chrono::steady_clock::time_point t0)
{
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

double param_of(const FOPIDParams& c, const std::string& name)
{
    if (name == "Kp")
        return c.Kp;
    if (name == "Ki")
        return c.Ki;
    if (name == "Kd")
        return c.Kd;
    if (name == "lambda")
        return c.lambda;
    return c.mu;
}

double table_J(const std::string& file, const TestBenchSpec& s)
{
    auto t = read_csv(kDir + "/" + file);
    for (std::size_t i = 0; i < t.rows.size(); ++i)
        if (t.at(i, "family") == family_name(s.family) && std::abs(t.number(i, "param") - s.param) < 1e-9)
            return t.number(i, "J_min");
    throw ParameterError(file + " has no row for " + s.label());
}

double nyquist_table_J(const TestBenchSpec& s, Template tmpl)
{
    auto t = read_csv(kDir + "/table2_nyquist.csv");
    for (std::size_t i = 0; i < t.rows.size(); ++i)
        if (t.at(i, "template") == to_string(tmpl) && t.at(i, "family") == family_name(s.family) &&
            std::abs(t.number(i, "param") - s.param) < 1e-9)
            return t.number(i, "J_min");
    throw ParameterError("Table 2 has no row for " + s.label());
}

double rms_gap(const std::vector<double>& a, const std::vector<double>& b)
{
    if (a.size() != b.size())
        return INFINITY;
    double s = 0;
    for (std::size_t i = 0; i < a.size(); ++i)
        s += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(s / static_cast<double>(a.size()));
}

// ---- 1: rule regression ----
Outcome c1_rules()
{
    Outcome o;
    const auto t0 = std::chrono::steady_clock::now();
    auto table = read_csv(kDir + "/table5_rules.csv");
    auto allow = read_csv(kDir + "/rules_allowlist.csv");
    std::set<std::tuple<std::string, double, std::string, std::string>> allowed;
    for (std::size_t i = 0; i < allow.rows.size(); ++i)
        allowed.insert({allow.at(i, "family"), allow.number(i, "param"), allow.at(i, "rule"), allow.at(i, "parameter")});
    int ok_cells = 0, listed = 0;
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
        const auto src = table.at(i, "source");
        if (src == "GA")
            continue;
        TestBenchSpec s{family_from_name(table.at(i, "family")), table.number(i, "param")};
        RuleKind rule{controller_from_string(table.at(i, "controller")),
                      src == "sg_rule" ? RuleGene::single : RuleGene::multi};
        auto got = apply_rule(rule, table2_soptd(kDir, s));
        for (const auto& name : rule_parameter_names(rule)) {
            const double want = table.number(i, name), v = param_of(got, name);
            const bool orders = name == "lambda" || name == "mu";
            const bool ok = orders ? std::abs(v - want) <= 0.02 : std::abs(v - want) <= 0.05 * std::abs(want);
            const bool al = allowed.count({family_name(s.family), s.param, rule.name(), name}) > 0;
            if (al) {
                ++listed;
                o.expect(!ok, fmt::format("stale allowlist entry {} {} {}", s.label(), rule.name(), name));
            } else {
                ok_cells += ok;
                o.expect(ok, fmt::format("{} {} {}: {:.5g} vs printed {:.5g}", s.label(), rule.name(), name, v, want));
            }
        }
    }
    const double dt = seconds_since(t0);
    o.expect(ok_cells + listed == 64, "expected 64 rule cells");
    o.expect(dt < 1.0, "runtime >= 1 s");
    o.note(fmt::format("{} cells within 5% (orders 0.02), {} allowlisted, {:.3f} s", ok_cells, listed, dt));
    return o;
}

// ---- 2: model-reduction quality ----
Outcome c2_reduction()
{
    Outcome o;
    const auto t0 = std::chrono::steady_clock::now();
    ReductionObjectiveConfig cfg;
    cfg.kind = ObjectiveKind::Nyquist;
    double worst = 0;
    int n = 0;
    for (const auto& s : test_bench()) {
        auto P = make_testbench(s);
        auto g = reduction_ga_defaults(1);
        const double jf = reduce(P, Template::FOPTD, cfg, g).J_min;
        const double js = reduce(P, Template::SOPTD, cfg, g).J_min;
        const double ratio = js / nyquist_table_J(s, Template::SOPTD);
        worst = std::max(worst, ratio);
        o.expect(ratio <= 2.0, fmt::format("{}: SOPTD J {:.4g} is {:.2f}x Table 2", s.label(), js, ratio));
        o.expect(js <= jf, fmt::format("{}: SOPTD J {:.4g} > FOPTD J {:.4g}", s.label(), js, jf));
        ++n;
    }
    o.expect(n == 38, "expected 38 plants");
    o.note(fmt::format("{} plants, seed 1, pop 50 x 100 gen; worst SOPTD/Table-2 ratio {:.3f}; {:.1f} s", n, worst,
                       seconds_since(t0)));
    return o;
}

// ---- 3: closed-loop cost, fast gate ----
Outcome c3_tuning_fast()
{
    Outcome o;
    const auto t0 = std::chrono::steady_clock::now();
    const std::vector<TestBenchSpec> plants{{Family::P1, 4}, {Family::P1, 8}, {Family::P2, 0.3}, {Family::P2, 0.6},
                                            {Family::P3, 2}, {Family::P3, 5}, {Family::P4, 0.4}, {Family::P4, 0.8}};
    SimConfig scfg;
    scfg.dt = 0.05;
    for (auto kind : {ControllerKind::PID, ControllerKind::FOPID}) {
        int within = 0;
        for (const auto& s : plants) {
            auto r = tune_controller(make_testbench(s), kind, tuning_ga_defaults(kind, 1), {}, scfg);
            const double jt = table_J(kind == ControllerKind::PID ? "table3_pid.csv" : "table4_fopid.csv", s);
            const bool ok = std::abs(r.J - jt) <= 0.10 * jt;
            within += ok;
            if (!ok)
                o.note(fmt::format("outlier {} {}: J {:.4f} vs table {:.4f}", s.label(), to_string(kind), r.J, jt));
        }
        // 30 of 38 on the full bench; the same fraction of 8 rounds up to 7
        o.expect(38 * within >= 30 * static_cast<int>(plants.size()),
                 fmt::format("{}: only {} of 8 within 10%", to_string(kind), within));
        o.note(fmt::format("{} within 10% of its table: {} of 8", to_string(kind), within));
    }
    const double dt = seconds_since(t0);
    o.expect(dt < 600, "fast gate took 10 min or more");
    o.note(fmt::format("dt 0.05, seed 1, pop 20 x 100 gen, 8 plants; {:.1f} s", dt));
    return o;
}

// ---- 4: rule-vs-GA closeness ----
Outcome c4_rule_vs_ga()
{
    Outcome o;
    SimConfig scfg;
    for (const auto& s : representative_plants()) {
        auto P = make_testbench(s);
        auto sp = table2_soptd(kDir, s);
        for (auto kind : {ControllerKind::PID, ControllerKind::FOPID}) {
            FOPIDParams ga;
            if (!table5_params(kDir, s, kind, Source::GA, ga)) {
                o.expect(false, "no GA row for " + s.label());
                continue;
            }
            const double jg = step_metrics(closed_loop_step(P, ga, {}, scfg), scfg).J;
            RuleKind rk{kind, RuleGene::multi};
            auto c = published_rule_params(kDir, s, rk, sp, true);
            const double jm = step_metrics(closed_loop_step(P, c, {}, scfg), scfg).J;
            const double rel = jm / jg - 1;
            o.expect(std::abs(rel) <= 0.05, fmt::format("{} {}: {:+.2f}%", s.label(), to_string(kind), 100 * rel));
            std::string pure;
            try {
                double jp = step_metrics(closed_loop_step(P, apply_rule(rk, sp), {}, scfg), scfg).J;
                pure = fmt::format("{:+.2f}%", 100 * (jp / jg - 1));
            } catch (const ParameterError& e) {
                pure = std::string("not realizable (") + e.what() + ")";
            }
            o.note(fmt::format("{} {}: mg rule J {:.4f} vs GA J {:.4f} ({:+.2f}%); evaluator alone {}", s.label(),
                               to_string(kind), jm, jg, 100 * rel, pure));
        }
    }
    o.note("allowlisted rule cells take the printed Table-5 values");
    return o;
}

// ---- 5: property suites ----
Outcome c5_properties()
{
    Outcome o;
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> lg(-3, 3);

    // Padé all-pass
    double pade_worst = 0;
    for (int i = 0; i < 200; ++i) {
        double L = std::pow(10.0, lg(rng)), w = std::pow(10.0, lg(rng));
        pade_worst = std::max(pade_worst, std::abs(std::abs(pade3_delay(L)(cplx{0, w})) - 1.0));
    }
    o.expect(pade_worst < 1e-9, fmt::format("Pade |G(jw)| deviates from 1 by {:.2e}", pade_worst));

    // H2: gramian vs quadrature on 20 random stable systems of order <= 6
    std::uniform_real_distribution<double> U(0.1, 3.0), C(-2, 2);
    std::uniform_int_distribution<int> ord(1, 6);
    double h2_worst = 0;
    for (int trial = 0; trial < 20; ++trial) {
        int n = ord(rng), k = 0;
        Poly den{1};
        while (k < n) {
            if (n - k >= 2 && U(rng) > 1.5) {
                double re = U(rng), im = U(rng);
                den = poly::mul(den, {1, 2 * re, re * re + im * im});
                k += 2;
            } else {
                den = poly::mul(den, {1, U(rng)});
                k += 1;
            }
        }
        Poly num(static_cast<std::size_t>(n));
        for (auto& c : num)
            c = C(rng);
        RationalTF g(num, den);
        const double a = h2_norm(g), b = h2_norm_quadrature(g);
        h2_worst = std::max(h2_worst, std::abs(a - b) / b);
    }
    o.expect(h2_worst <= 1e-6, fmt::format("H2 gramian vs quadrature relative gap {:.2e}", h2_worst));

    // FOPID at integer orders vs the classical PID, and a closed-form PI loop
    double deg_worst = 0;
    for (auto s : {TestBenchSpec{Family::P1, 5}, TestBenchSpec{Family::P4, 0.7}}) {
        auto P = make_testbench(s);
        SimConfig cfg;
        auto pid = closed_loop_step(P, FOPIDParams::pid(1.1, 0.4, 0.8), {}, cfg);
        auto fo = closed_loop_step(P, FOPIDParams{1.1, 0.4, 0.8, 1.0, 1.0}, {}, cfg);
        deg_worst = std::max({deg_worst, rms_gap(pid.y, fo.y), rms_gap(pid.u, fo.u)});
    }
    {
        DelayedTF P(RationalTF({1}, {1, 1}), 0);
        SimConfig cfg;
        cfg.horizon = 10;
        auto tr = closed_loop_step(P, FOPIDParams{2, 1.25, 0, 1, 1}, {}, cfg);
        std::vector<double> want;
        for (double t : tr.t)
            want.push_back(1 - 0.25 * std::exp(-0.5 * t) - 0.75 * std::exp(-2.5 * t));
        deg_worst = std::max(deg_worst, rms_gap(tr.y, want));
    }
    o.expect(deg_worst < 1e-6, fmt::format("FOPID lambda=mu=1 vs classical PID RMS {:.2e}", deg_worst));

    // GP totality on random trees and extreme inputs
    gp::GPConfig gcfg;
    int nonfinite = 0;
    const std::vector<gp::FeatureVector> extremes{
        {1, 1, 1, 0}, {1e-9, 1e6, 1e-9, 1e6}, {-1e6, 1e-9, 1e-9, 0}, {1, 1e12, 1e-12, 1e12}};
    for (int i = 0; i < 2000; ++i) {
        auto t = gp::random_tree(gcfg.max_depth, i % 2 == 0, gcfg, rng);
        for (const auto& f : extremes) {
            double v = gp::eval_tree(t, f);
            nonfinite += !(std::isfinite(v) && std::abs(v) <= 1e12);
        }
    }
    o.expect(nonfinite == 0, fmt::format("{} non-finite GP evaluations", nonfinite));

    // Pareto non-domination and GP elitism on a small run
    Eigen::MatrixXd X;
    Eigen::VectorXd y;
    target_rows(training_from_fixtures(kDir), 1, X, y);  // PID_Ki
    gp::GPConfig small;
    small.pop_size = 100;
    small.generations = 20;
    small.seed = 3;
    auto res = gp::run_gp(X, y, small, gp::Mode::multi_gene);
    bool front_ok = !res.pareto.empty();
    for (std::size_t i = 1; i < res.pareto.size(); ++i)
        front_ok = front_ok && res.pareto[i].node_count > res.pareto[i - 1].node_count &&
                   res.pareto[i].mae < res.pareto[i - 1].mae;
    o.expect(front_ok, "Pareto front is dominated or unsorted");
    bool gp_mono = true;
    for (std::size_t i = 1; i < res.history.size(); ++i)
        gp_mono = gp_mono && res.history[i] <= res.history[i - 1];
    o.expect(gp_mono, "GP best MAE got worse between generations");

    // GA elitism: best objective never increases
    ga::GAConfig acfg;
    acfg.pop_size = 30;
    acfg.bounds.assign(4, {-5.0, 5.0});
    acfg.max_generations = 60;
    acfg.seed = 11;
    auto gr = ga::run_ga([](const ga::Genes& x) {
        double s = 0;
        for (std::size_t i = 0; i < x.size(); ++i)
            s += (x[i] - static_cast<double>(i)) * (x[i] - static_cast<double>(i));
        return s;
    }, acfg);
    bool ga_mono = true;
    for (std::size_t i = 1; i < gr.history.size(); ++i)
        ga_mono = ga_mono && gr.history[i].best <= gr.history[i - 1].best;
    o.expect(ga_mono, "GA best objective increased between generations");

    // rule K-homogeneity and parser agreement
    std::uniform_real_distribution<double> u(0.05, 10);
    double homog = 0, parse_gap = 0;
    for (auto k : all_rules()) {
        std::vector<gp::ExprTree> trees;
        for (const auto& t : rule_texts(k))
            trees.push_back(gp::parse_expr(t));
        const auto names = rule_parameter_names(k);
        for (int n = 0; n < 200; ++n) {
            double a = u(rng), b = u(rng);
            SOPTDParams p{1, std::max(a, b), std::min(a, b), 0.5 * u(rng)};
            auto c = apply_rule(k, p);
            auto q = p;
            q.K = 0.1 * u(rng);
            auto ck = apply_rule(k, q);
            for (double g : {c.Kp - q.K * ck.Kp, c.Ki - q.K * ck.Ki, c.Kd - q.K * ck.Kd})
                homog = std::max(homog, std::abs(g) / std::max(1.0, std::abs(c.Kp) + std::abs(c.Ki) + std::abs(c.Kd)));
            homog = std::max({homog, std::abs(c.lambda - ck.lambda), std::abs(c.mu - ck.mu)});
            gp::FeatureVector f{p.K, p.tau_max, p.tau_min, p.L};
            for (std::size_t j = 0; j < trees.size(); ++j) {
                const double want = param_of(c, names[j]);
                parse_gap = std::max(parse_gap, std::abs(gp::eval_tree(trees[j], f) - want) / std::max(1.0, std::abs(want)));
            }
        }
    }
    o.expect(homog <= 1e-12, fmt::format("rule K-homogeneity gap {:.2e}", homog));
    o.expect(parse_gap <= 1e-12, fmt::format("parsed rule text vs hand-coded rule gap {:.2e}", parse_gap));

    o.note(fmt::format("Pade {:.1e}, H2 {:.1e}, degeneracy RMS {:.1e}, GP non-finite {}, Pareto {} entries, "
                       "K-homogeneity {:.1e}, parser {:.1e}",
                       pade_worst, h2_worst, deg_worst, nonfinite, res.pareto.size(), homog, parse_gap));
    o.note("the unit-test suites (ctest) cover the remaining properties");
    return o;
}

// ---- 6: GP capability ----
Outcome c6_gp()
{
    Outcome o;
    const auto t0 = std::chrono::steady_clock::now();
    auto t = training_from_fixtures(kDir);

    {
        // K is 1 on every Table-2 row, so x1 would be a constant there: draw K as well
        std::mt19937_64 rng(6);
        std::uniform_real_distribution<double> u(0.2, 5);
        Eigen::MatrixXd F(40, gp::kFeatures);
        for (Eigen::Index i = 0; i < F.rows(); ++i) {
            double a = u(rng), b = u(rng);
            auto v = gp::FeatureVector{u(rng), std::max(a, b), std::min(a, b), 0.5 * u(rng)}.values();
            for (int j = 0; j < gp::kFeatures; ++j)
                F(i, j) = v[static_cast<std::size_t>(j)];
        }
        Eigen::VectorXd y = F.col(0) + F.col(1);
        gp::GPConfig cfg;
        cfg.seed = 1;
        cfg.target_mae = 1e-9;
        auto r = gp::run_gp(F, y, cfg, gp::Mode::single_gene);
        o.expect(r.mae < 1e-6, fmt::format("x1 + x2 recovered only to MAE {:.3e}", r.mae));
        o.note(fmt::format("x1 + x2 single-gene MAE {:.2e}: {}", r.mae, r.best.to_text()));
    }

    Eigen::MatrixXd X;
    Eigen::VectorXd y;
    target_rows(t, 4, X, y);  // FOPID K·Ki, Table-4 rows on Table-2 features
    int wins = 0;
    for (std::uint64_t s = 1; s <= 5; ++s) {
        gp::GPConfig cfg;  // pop 500, 100 generations, up to 8 genes
        cfg.seed = s;
        const double a = gp::run_gp(X, y, cfg, gp::Mode::single_gene).mae;
        const double b = gp::run_gp(X, y, cfg, gp::Mode::multi_gene).mae;
        wins += b < a;
        o.note(fmt::format("seed {}: K_i MAE single {:.4g}, multi {:.4g}", s, a, b));
    }
    o.expect(wins >= 3, fmt::format("multi-gene better on only {} of 5 seeds", wins));
    const double dt = seconds_since(t0);
    o.expect(dt < 900, "GP runs took 15 min or more");
    o.note(fmt::format("multi-gene better on {} of 5 seeds ({} rows); {:.1f} s", wins, y.size(), dt));
    return o;
}

}  // namespace

int main()
{
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"1 rule regression (Table 5, allowlist)", c1_rules},
        {"2 model-reduction quality (38 plants)", c2_reduction},
        {"3 closed-loop cost, fast gate (dt 0.05, 8 plants)", c3_tuning_fast},
        {"4 multi-gene rule J within 5% of GA J", c4_rule_vs_ga},
        {"5 property suites", c5_properties},
        {"6 GP capability", c6_gp},
    };
    int failed = 0;
    for (const auto& [name, fn] : criteria) {
        Outcome o;
        try {
            o = fn();
        } catch (const std::exception& e) {
            o.pass = false;
            o.details.push_back(std::string("exception: ") + e.what());
        }
        std::printf("%s criterion %s\n", o.pass ? "PASS" : "FAIL", name.c_str());
        for (const auto& d : o.details)
            std::printf("    %s\n", d.c_str());
        std::fflush(stdout);
        failed += !o.pass;
    }
    std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
    return failed == 0 ? 0 : 1;
}
