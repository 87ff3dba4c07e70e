#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "fractune/error.hpp"
#include "fractune/ga.hpp"

using namespace fractune;
using namespace fractune::ga;

TEST_CASE("rank scaling")
{
    std::vector<double> raw{5, 1, 3};
    auto f = rank_scale(raw);
    double a = 1 / std::sqrt(3.0), b = 1.0, c = 1 / std::sqrt(2.0), s = a + b + c;
    CHECK(f[0] == doctest::Approx(a / s));
    CHECK(f[1] == doctest::Approx(b / s));
    CHECK(f[2] == doctest::Approx(c / s));

    std::vector<double> same{2, 2, 2, 2};
    auto g = rank_scale(same);
    for (double v : g)
        CHECK(v == doctest::Approx(0.25));

    // permutation equivariance
    std::vector<double> x{0.3, -1, 7, 2.5, 0.1};
    auto fx = rank_scale(x);
    std::vector<int> perm{3, 0, 4, 1, 2};
    std::vector<double> y;
    for (int i : perm)
        y.push_back(x[i]);
    auto fy = rank_scale(y);
    for (size_t k = 0; k < perm.size(); ++k)
        CHECK(fy[k] == doctest::Approx(fx[perm[k]]));

    // NaN sorts worst
    std::vector<double> n{NAN, 1, 2};
    auto fn = rank_scale(n);
    CHECK(fn[0] < fn[2]);
    CHECK(fn[2] < fn[1]);
}

TEST_CASE("stochastic uniform selection")
{
    auto rng = make_stream(1, 0, 0);
    std::vector<double> one{1, 0, 0};
    for (int t = 0; t < 20; ++t) {
        auto s = select_stochastic_uniform(one, 4, rng);
        CHECK(s == std::vector<std::size_t>{0, 0, 0, 0});
    }
    std::vector<double> two{1, 1};
    for (int t = 0; t < 100; ++t) {
        auto s = select_stochastic_uniform(two, 2, rng);
        std::sort(s.begin(), s.end());
        CHECK(s == std::vector<std::size_t>{0, 1});
    }
    std::vector<double> p{0.5, 0.3, 0.2};
    std::vector<int> cnt(3, 0);
    int draws = 0;
    for (int t = 0; t < 100000; ++t) {
        auto s = select_stochastic_uniform(p, 1, rng);
        cnt[s[0]]++;
        ++draws;
    }
    for (int i = 0; i < 3; ++i)
        CHECK(std::abs(double(cnt[i]) / draws - p[i]) < 0.02 * p[i]);

    std::vector<double> zero{0, 0};
    CHECK_THROWS_AS(select_stochastic_uniform(zero, 2, rng), SelectionError);
}

TEST_CASE("scattered crossover")
{
    auto rng = make_stream(2, 0, 0);
    Genes g{1, 2, 3};
    CHECK(scattered_crossover(g, g, rng) == g);
    Genes a{1, 2, 3, 4}, b{5, 6, 7, 8};
    CHECK(scattered_crossover(a, b, std::vector<bool>(4, true)) == a);
    for (int t = 0; t < 1000; ++t) {
        auto c = scattered_crossover(a, b, rng);
        for (int i = 0; i < 4; ++i)
            CHECK((c[i] == a[i] || c[i] == b[i]));
    }
    CHECK_THROWS_AS(scattered_crossover(a, Genes{1, 2}, rng), ParameterError);
}

TEST_CASE("gaussian mutation")
{
    auto rng = make_stream(3, 0, 0);
    Bounds bd{{0, 1}, {0, 1}};
    Genes g{0.3, 0.7};
    CHECK(gaussian_mutate(g, 0.0, bd, rng) == g);

    Genes top{1.0, 1.0};
    for (int t = 0; t < 1000; ++t) {
        auto m = gaussian_mutate(top, 0.5, bd, rng);
        CHECK(m[0] <= 1.0);
        CHECK(m[0] >= 0.0);
    }
    // gene at hi with a positive draw stays at hi: some draws hit exactly 1
    int at_hi = 0;
    for (int t = 0; t < 1000; ++t)
        at_hi += gaussian_mutate(top, 0.5, bd, rng)[0] == 1.0;
    CHECK(at_hi > 300);

    Bounds wide{{-100, 100}};
    double sum = 0;
    for (int t = 0; t < 10000; ++t)
        sum += gaussian_mutate(Genes{0.0}, 0.01, wide, rng)[0];
    // σ = 2, standard error of the mean = 0.02
    CHECK(std::abs(sum / 10000) < 0.08);
}

TEST_CASE("run_ga")
{
    SUBCASE("sphere")
    {
        GAConfig cfg;
        cfg.pop_size = 40;
        cfg.elite_count = 2;
        cfg.bounds.assign(5, {-5.0, 5.0});
        cfg.max_generations = 200;
        cfg.stall_generations = 200;
        cfg.seed = 5;
        auto r = run_ga([](const Genes& x) {
            double s = 0;
            for (double v : x)
                s += v * v;
            return s;
        }, cfg);
        CHECK(r.best_objective < 1e-3);
        for (size_t i = 1; i < r.history.size(); ++i)
            CHECK(r.history[i].best <= r.history[i - 1].best);
    }
    SUBCASE("constant objective")
    {
        GAConfig cfg;
        cfg.bounds.assign(2, {0.0, 1.0});
        cfg.seed = 9;
        auto r = run_ga([](const Genes&) { return 4.0; }, cfg);
        CHECK(r.best_objective == 4.0);
        for (auto& h : r.history) {
            CHECK(h.best == 4.0);
            CHECK(h.median == 4.0);
        }
        CHECK(r.stop_reason == "stall");
    }
    SUBCASE("elites survive unchanged and bounds hold")
    {
        GAConfig cfg;
        cfg.bounds = {{0, 100}, {0, 100}, {0, 2}};
        cfg.init_bounds = {{0, 1}, {0, 1}, {0, 1}};
        cfg.max_generations = 30;
        cfg.seed = 17;
        std::vector<std::vector<Individual>> gens;
        auto obj = [](const Genes& x) { return std::abs(x[0] - 3) + std::abs(x[1] - 0.2) + std::abs(x[2] - 1.7); };
        run_ga(obj, cfg, [&](int, const std::vector<Individual>& p) { gens.push_back(p); });
        REQUIRE(gens.size() > 2);
        for (size_t g = 0; g + 1 < gens.size(); ++g) {
            auto cur = gens[g];
            std::sort(cur.begin(), cur.end(), [](auto& a, auto& b) { return a.raw_objective < b.raw_objective; });
            for (int e = 0; e < cfg.elite_count; ++e) {
                bool found = std::any_of(gens[g + 1].begin(), gens[g + 1].end(),
                                         [&](const Individual& d) { return d.genes == cur[e].genes; });
                CHECK(found);
            }
            for (auto& d : gens[g])
                for (size_t j = 0; j < 3; ++j) {
                    CHECK(d.genes[j] >= cfg.bounds[j].first);
                    CHECK(d.genes[j] <= cfg.bounds[j].second);
                }
        }
    }
    SUBCASE("determinism across runs and thread counts")
    {
        GAConfig cfg;
        cfg.bounds.assign(3, {-2.0, 2.0});
        cfg.seed = 123;
        cfg.max_generations = 40;
        auto obj = [](const Genes& x) { return std::pow(x[0] - 1, 2) + std::sin(3 * x[1]) + x[2] * x[2]; };
        auto a = run_ga(obj, cfg);
        auto b = run_ga(obj, cfg);
        cfg.threads = 3;
        auto c = run_ga(obj, cfg);
        REQUIRE(a.history.size() == b.history.size());
        REQUIRE(a.history.size() == c.history.size());
        for (size_t i = 0; i < a.history.size(); ++i) {
            CHECK(std::memcmp(&a.history[i].best, &b.history[i].best, sizeof(double)) == 0);
            CHECK(std::memcmp(&a.history[i].best, &c.history[i].best, sizeof(double)) == 0);
            CHECK(std::memcmp(&a.history[i].median, &c.history[i].median, sizeof(double)) == 0);
        }
        CHECK(a.best_genes == c.best_genes);
    }
    SUBCASE("infinite initial population")
    {
        GAConfig cfg;
        cfg.bounds.assign(1, {0.0, 1.0});
        CHECK_THROWS_AS(run_ga([](const Genes&) { return INFINITY; }, cfg), OptimizationError);
    }
    SUBCASE("config validation")
    {
        GAConfig cfg;
        cfg.bounds.assign(1, {0.0, 1.0});
        cfg.elite_count = 0;
        CHECK_THROWS_AS(cfg.validate(), ParameterError);
        cfg.elite_count = 20;
        CHECK_THROWS_AS(cfg.validate(), ParameterError);
        cfg.elite_count = 2;
        cfg.bounds = {{1.0, 1.0}};
        CHECK_THROWS_AS(cfg.validate(), ParameterError);
    }
}
