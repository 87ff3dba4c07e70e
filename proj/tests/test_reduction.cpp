#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "fractune/error.hpp"
#include "fractune/io.hpp"
#include "fractune/reduction.hpp"

using namespace fractune;

namespace {
const std::string kDir = FRACTUNE_FIXTURE_DIR;

ReductionRecord fixture_row(const std::string& file, const std::string& fam, double param, Template tmpl)
{
    auto t = read_csv(kDir + "/" + file);
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        if (t.at(i, "family") != fam || std::abs(t.number(i, "param") - param) > 1e-9 ||
            t.at(i, "template") != to_string(tmpl))
            continue;
        ReductionRecord r;
        r.tmpl = tmpl;
        r.J_min = t.number(i, "J_min");
        r.tau_max = t.number(i, "tau_max");
        r.tau_min = tmpl == Template::SOPTD ? t.number(i, "tau_min") : 0.0;
        r.L = t.number(i, "L");
        return r;
    }
    throw ParameterError("fixture row missing");
}

DelayedTF first_order() { return DelayedTF(RationalTF({1}, {1, 1}), 0.0); }
}  // namespace

TEST_CASE("frequency grid")
{
    auto g = FrequencyGrid::log_spaced(1e-4, 1e4, 500);
    REQUIRE(g.points.size() == 500);
    CHECK(g.points.front() == doctest::Approx(1e-4));
    CHECK(g.points.back() == doctest::Approx(1e4));
    const double r = g.points[1] / g.points[0];
    for (std::size_t i = 1; i < g.points.size(); ++i)
        CHECK(g.points[i] / g.points[i - 1] == doctest::Approx(r));
    auto hz = FrequencyGrid::log_spaced(1, 10, 3, true);
    CHECK(hz.points.front() == doctest::Approx(2 * M_PI));
    CHECK_THROWS_AS(FrequencyGrid::log_spaced(0, 1, 10), ParameterError);
    CHECK_THROWS_AS(FrequencyGrid::log_spaced(2, 1, 10), ParameterError);
    CHECK_THROWS_AS(FrequencyGrid::log_spaced(1, 2, 1), ParameterError);
}

TEST_CASE("h2 objective")
{
    auto P = make_testbench(TestBenchSpec{Family::P1, 3});
    CHECK(j_h2(P, P) == doctest::Approx(0).epsilon(1e-12));
    DelayedTF zero(RationalTF({0}, {1}), 0);
    CHECK(j_h2(first_order(), zero) == doctest::Approx(1 / std::sqrt(2.0)).epsilon(1e-9));
    DelayedTF unstable(RationalTF({1}, {1, -1}), 0);
    CHECK_THROWS_AS(j_h2(unstable, first_order()), DomainError);
}

TEST_CASE("h2 objective against the printed Table-1 optimum" * doctest::may_fail())
{
    // the printed Table-1 J values are not reproducible (see README); kept as a tracked failure
    auto P = make_testbench(TestBenchSpec{Family::P1, 3});
    auto r = fixture_row("table1_h2.csv", "P1", 3, Template::SOPTD);
    r.K = 1;
    CHECK(j_h2(P, r.model()) <= 10 * r.J_min);
}

TEST_CASE("nyquist objective reproduces Table 2")
{
    ReductionObjectiveConfig cfg;
    auto P = make_testbench(TestBenchSpec{Family::P1, 3});
    CHECK(j_nyquist(P, P, cfg) == 0.0);

    auto r = fixture_row("table2_nyquist.csv", "P1", 3, Template::SOPTD);
    CHECK(j_nyquist(P, r.model(), cfg) == doctest::Approx(r.J_min).epsilon(0.2));
    CHECK(r.J_min == doctest::Approx(0.35763));

    auto P2 = make_testbench(TestBenchSpec{Family::P2, 0.1});
    auto f = fixture_row("table2_nyquist.csv", "P2", 0.1, Template::FOPTD);
    CHECK(j_nyquist(P2, f.model(), cfg) == doctest::Approx(0.344204).epsilon(0.2));

    // every printed Table-2 row, under our conventions
    auto t = read_csv(kDir + "/table2_nyquist.csv");
    int close = 0;
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        auto spec = TestBenchSpec{family_from_name(t.at(i, "family")), t.number(i, "param")};
        auto tmpl = template_from_string(t.at(i, "template"));
        auto row = fixture_row("table2_nyquist.csv", t.at(i, "family"), spec.param, tmpl);
        double j = j_nyquist(make_testbench(spec), row.model(), cfg);
        close += std::abs(j - row.J_min) <= 0.2 * row.J_min;
    }
    CHECK(close >= 70);
}

TEST_CASE("nyquist objective properties")
{
    ReductionObjectiveConfig cfg;
    auto P = make_testbench(TestBenchSpec{Family::P4, 0.5});
    // the same SOPTD with its factors multiplied in either order
    auto a = make_soptd(1, 1.7, 0.6, 0.4);
    DelayedTF b(RationalTF({1}, poly::mul({0.6, 1}, {1.7, 1})), 0.4);
    CHECK(j_nyquist(P, a, cfg) == doctest::Approx(j_nyquist(P, b, cfg)).epsilon(1e-12));
    CHECK(j_h2(P, a) == doctest::Approx(j_h2(P, b)).epsilon(1e-9));

    auto c2 = cfg;
    c2.w1 = c2.w2 = 2;
    CHECK(j_nyquist(P, a, c2) == doctest::Approx(2 * j_nyquist(P, a, cfg)).epsilon(1e-12));

    NyquistObjective cached(P, cfg);
    CHECK(cached(a) == j_nyquist(P, a, cfg));

    auto bad = cfg;
    bad.w1 = bad.w2 = 0;
    CHECK_THROWS_AS(bad.validate(), ParameterError);
    bad.w1 = -1;
    CHECK_THROWS_AS(bad.validate(), ParameterError);
}

TEST_CASE("reduction recovers a model inside the template")
{
    ReductionObjectiveConfig cfg;
    auto r = reduce(first_order(), Template::FOPTD, cfg, reduction_ga_defaults(1));
    CHECK(r.tau_max == doctest::Approx(1).epsilon(1e-3));
    CHECK(r.L < 1e-3);
    CHECK(r.J_min < 1e-6);
    CHECK(r.K == 1);
}

TEST_CASE("reduction quality on test-bench plants")
{
    ReductionObjectiveConfig cfg;
    auto p2 = make_testbench(TestBenchSpec{Family::P2, 0.1});
    auto s = reduce(p2, Template::SOPTD, cfg, reduction_ga_defaults(1));
    CHECK(s.J_min <= 0.01);
    CHECK(s.tau_max >= s.tau_min);

    auto p1 = make_testbench(TestBenchSpec{Family::P1, 8});
    auto so = reduce(p1, Template::SOPTD, cfg, reduction_ga_defaults(1));
    auto fo = reduce(p1, Template::FOPTD, cfg, reduction_ga_defaults(1));
    CHECK(so.J_min <= 1.7);
    CHECK(so.J_min <= fo.J_min);
    CHECK(so.J_min >= 0);

    // deterministic per seed
    auto again = reduce(p1, Template::SOPTD, cfg, reduction_ga_defaults(1));
    CHECK(again.J_min == so.J_min);
    CHECK(again.tau_max == so.tau_max);
}

TEST_CASE("reduction rejects bad input")
{
    ReductionObjectiveConfig cfg;
    DelayedTF integrator(RationalTF({1}, {1, 0}), 0);
    CHECK_THROWS(reduce(integrator, Template::FOPTD, cfg, reduction_ga_defaults(1)));
    DelayedTF unstable(RationalTF({1}, {1, -1}), 0);
    ReductionObjectiveConfig h2 = cfg;
    h2.kind = ObjectiveKind::H2;
    CHECK_THROWS_AS(reduce(unstable, Template::FOPTD, h2, reduction_ga_defaults(1)), DomainError);
    ReductionSearch box;
    box.lo = 5;
    box.hi = 1;
    CHECK_THROWS_AS(reduce(first_order(), Template::FOPTD, cfg, reduction_ga_defaults(1), box), ParameterError);
}

TEST_CASE("csv row")
{
    ReductionRecord r;
    r.spec = TestBenchSpec{Family::P1, 3};
    auto h = reduction_csv_header();
    auto row = to_csv_row(r);
    CHECK(std::count(h.begin(), h.end(), ',') == std::count(row.begin(), row.end(), ','));
    CHECK(objective_from_string(to_string(ObjectiveKind::H2)) == ObjectiveKind::H2);
    CHECK(template_from_string(to_string(Template::SOPTD)) == Template::SOPTD);
    CHECK_THROWS_AS(template_from_string("TOPTD"), ParameterError);
}
