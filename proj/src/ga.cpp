#include "fractune/ga.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <thread>

#include "fractune/error.hpp"

namespace fractune {

namespace {
std::uint64_t splitmix(std::uint64_t& x)
{
    std::uint64_t z = (x += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}
}  // namespace

std::mt19937_64 make_stream(std::uint64_t seed, std::uint64_t generation, std::uint64_t slot)
{
    std::uint64_t s = seed;
    std::uint64_t h = splitmix(s);
    h ^= generation * 0xd1342543de82ef95ULL;
    s = h;
    h = splitmix(s);
    h ^= slot * 0xa0761d6478bd642fULL;
    s = h;
    std::seed_seq seq{static_cast<std::uint32_t>(splitmix(s)), static_cast<std::uint32_t>(splitmix(s)),
                      static_cast<std::uint32_t>(splitmix(s)), static_cast<std::uint32_t>(splitmix(s))};
    return std::mt19937_64(seq);
}

namespace ga {

void GAConfig::validate() const
{
    if (pop_size < 2)
        throw ParameterError("GA: population must be >= 2");
    if (!(elite_count > 0 && elite_count < pop_size))
        throw ParameterError("GA: need 0 < elite_count < pop_size");
    if (!(crossover_fraction >= 0.0 && crossover_fraction <= 1.0))
        throw ParameterError("GA: crossover_fraction must lie in [0,1]");
    if (bounds.empty())
        throw ParameterError("GA: no variables");
    for (auto [lo, hi] : bounds)
        if (!(lo < hi) || !std::isfinite(lo) || !std::isfinite(hi))
            throw ParameterError("GA: each bound needs lo < hi");
    if (!init_bounds.empty()) {
        if (init_bounds.size() != bounds.size())
            throw ParameterError("GA: init_bounds size mismatch");
        for (auto [lo, hi] : init_bounds)
            if (!(lo < hi))
                throw ParameterError("GA: each init bound needs lo < hi");
    }
    if (max_generations < 0 || stall_generations < 1)
        throw ParameterError("GA: bad generation limits");
    if (threads < 1)
        throw ParameterError("GA: threads must be >= 1");
}

static double key(double v)
{
    return std::isnan(v) ? std::numeric_limits<double>::infinity() : v;
}

static std::vector<std::size_t> sort_order(std::span<const double> raw)
{
    std::vector<std::size_t> idx(raw.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        double ka = key(raw[a]), kb = key(raw[b]);
        if (ka != kb)
            return ka < kb;
        return std::isnan(raw[b]) && !std::isnan(raw[a]);
    });
    return idx;
}

std::vector<double> rank_scale(std::span<const double> raw)
{
    const auto n = raw.size();
    std::vector<double> out(n, 0.0);
    if (n == 0)
        return out;
    auto idx = sort_order(raw);
    double total = 0;
    for (std::size_t i = 0; i < n;) {
        // tie group shares the mean weight of its rank positions
        std::size_t j = i;
        while (j + 1 < n && key(raw[idx[j + 1]]) == key(raw[idx[i]]) &&
               std::isnan(raw[idx[j + 1]]) == std::isnan(raw[idx[i]]))
            ++j;
        double w = 0;
        for (std::size_t r = i; r <= j; ++r)
            w += 1.0 / std::sqrt(double(r + 1));
        w /= double(j - i + 1);
        for (std::size_t r = i; r <= j; ++r)
            out[idx[r]] = w;
        total += w * double(j - i + 1);
        i = j + 1;
    }
    for (auto& v : out)
        v /= total;
    return out;
}

std::vector<std::size_t> select_stochastic_uniform(std::span<const double> fitness, std::size_t n,
                                                   std::mt19937_64& rng)
{
    double total = 0;
    for (double f : fitness) {
        if (!(f >= 0.0) || !std::isfinite(f))
            throw SelectionError("selection: fitness must be finite and >= 0");
        total += f;
    }
    if (!(total > 0.0))
        throw SelectionError("selection: zero total fitness");
    std::vector<std::size_t> out;
    out.reserve(n);
    if (n == 0)
        return out;
    const double step = total / double(n);
    std::uniform_real_distribution<double> U(0.0, step);
    double pos = U(rng);
    std::size_t k = 0;
    double cum = fitness[0];
    for (std::size_t i = 0; i < n; ++i) {
        while (pos >= cum && k + 1 < fitness.size()) {
            ++k;
            cum += fitness[k];
        }
        // rounding at the very end of the line: fall back to the last nonzero segment
        std::size_t pick = k;
        while (fitness[pick] == 0.0 && pick > 0)
            --pick;
        out.push_back(pick);
        pos += step;
    }
    return out;
}

Genes scattered_crossover(const Genes& p1, const Genes& p2, const std::vector<bool>& mask)
{
    if (p1.size() != p2.size() || mask.size() != p1.size())
        throw ParameterError("crossover: parent length mismatch");
    Genes c(p1.size());
    for (std::size_t i = 0; i < c.size(); ++i)
        c[i] = mask[i] ? p1[i] : p2[i];
    return c;
}

Genes scattered_crossover(const Genes& p1, const Genes& p2, std::mt19937_64& rng)
{
    if (p1.size() != p2.size())
        throw ParameterError("crossover: parent length mismatch");
    std::bernoulli_distribution coin(0.5);
    std::vector<bool> mask(p1.size());
    for (std::size_t i = 0; i < mask.size(); ++i)
        mask[i] = coin(rng);
    return scattered_crossover(p1, p2, mask);
}

Genes gaussian_mutate(const Genes& p, double scale, const Bounds& bounds, std::mt19937_64& rng,
                      const Bounds& span_bounds)
{
    if (bounds.size() != p.size())
        throw ParameterError("mutation: bounds size mismatch");
    const Bounds& sb = span_bounds.empty() ? bounds : span_bounds;
    Genes c = p;
    if (scale == 0.0)
        return c;
    std::normal_distribution<double> N(0.0, 1.0);
    for (std::size_t i = 0; i < c.size(); ++i) {
        double sigma = scale * (sb[i].second - sb[i].first);
        c[i] = std::clamp(c[i] + sigma * N(rng), bounds[i].first, bounds[i].second);
    }
    return c;
}

double mutation_scale(const GAConfig& cfg, int generation)
{
    double f = cfg.max_generations > 0 ? std::min(1.0, double(generation) / cfg.max_generations) : 1.0;
    return cfg.mutation_scale_start + (cfg.mutation_scale_end - cfg.mutation_scale_start) * f;
}

namespace {

void evaluate(const Objective& obj, std::vector<Individual>& pop, std::size_t from, int threads)
{
    const std::size_t n = pop.size();
    auto work = [&](std::size_t i) {
        double v = obj(pop[i].genes);
        pop[i].raw_objective = std::isnan(v) ? std::numeric_limits<double>::infinity() : v;
    };
    if (threads <= 1 || n - from < 2) {
        for (std::size_t i = from; i < n; ++i)
            work(i);
        return;
    }
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t)
        pool.emplace_back([&, t] {
            for (std::size_t i = from + t; i < n; i += threads)
                work(i);
        });
    for (auto& th : pool)
        th.join();
}

}  // namespace

GAResult run_ga(const Objective& objective, const GAConfig& cfg, const GenerationObserver& observe)
{
    cfg.validate();
    const std::size_t nv = cfg.bounds.size();
    const Bounds& init = cfg.init_bounds.empty() ? cfg.bounds : cfg.init_bounds;
    const int P = cfg.pop_size, E = cfg.elite_count;
    const int n_x = static_cast<int>(std::lround(cfg.crossover_fraction * (P - E)));
    const int n_m = P - E - n_x;

    std::vector<Individual> pop(P);
    for (int i = 0; i < P; ++i) {
        auto rng = make_stream(cfg.seed, 0, i);
        pop[i].genes.resize(nv);
        for (std::size_t j = 0; j < nv; ++j) {
            std::uniform_real_distribution<double> U(init[j].first, init[j].second);
            pop[i].genes[j] = std::clamp(U(rng), cfg.bounds[j].first, cfg.bounds[j].second);
        }
        if (static_cast<std::size_t>(i) < cfg.initial_population.size()) {
            const Genes& s = cfg.initial_population[i];
            if (s.size() != nv)
                throw ParameterError("GA: seeded individual has the wrong length");
            for (std::size_t j = 0; j < nv; ++j)
                pop[i].genes[j] = std::clamp(s[j], cfg.bounds[j].first, cfg.bounds[j].second);
        }
    }
    evaluate(objective, pop, 0, cfg.threads);
    if (std::none_of(pop.begin(), pop.end(), [](const Individual& d) { return std::isfinite(d.raw_objective); }))
        throw OptimizationError("GA: no finite objective in the initial population");

    GAResult res;
    res.best_objective = std::numeric_limits<double>::infinity();
    double stall_ref = std::numeric_limits<double>::infinity();
    int stall = 0;

    for (int gen = 0;; ++gen) {
        std::vector<double> raw(P);
        for (int i = 0; i < P; ++i)
            raw[i] = pop[i].raw_objective;
        auto order = sort_order(raw);
        auto scaled = rank_scale(raw);
        for (int i = 0; i < P; ++i)
            pop[i].scaled_fitness = scaled[i];
        if (observe)
            observe(gen, pop);

        double best = raw[order[0]];
        double med = P % 2 ? raw[order[P / 2]] : 0.5 * (raw[order[P / 2 - 1]] + raw[order[P / 2]]);
        res.history.push_back({gen, best, med});
        if (best < res.best_objective || res.best_genes.empty()) {
            res.best_objective = best;
            res.best_genes = pop[order[0]].genes;
        }
        if (!std::isfinite(stall_ref) || best < stall_ref - cfg.objective_tolerance * (1 + std::abs(stall_ref))) {
            stall_ref = best;
            stall = 0;
        } else {
            ++stall;
        }

        if (best <= cfg.fitness_limit) {
            res.stop_reason = "fitness_limit";
            break;
        }
        if (gen >= cfg.max_generations) {
            res.stop_reason = "max_generations";
            break;
        }
        if (stall >= cfg.stall_generations) {
            res.stop_reason = "stall";
            break;
        }

        auto sel = make_stream(cfg.seed, gen + 1, 0);
        auto parents = select_stochastic_uniform(scaled, 2 * n_x + n_m, sel);
        std::shuffle(parents.begin(), parents.end(), sel);

        std::vector<Individual> next;
        next.reserve(P);
        for (int e = 0; e < E; ++e)
            next.push_back(pop[order[e]]);
        for (int k = 0; k < n_x; ++k) {
            auto rng = make_stream(cfg.seed, gen + 1, 1 + k);
            Individual c;
            c.genes = scattered_crossover(pop[parents[2 * k]].genes, pop[parents[2 * k + 1]].genes, rng);
            next.push_back(std::move(c));
        }
        const double sc = mutation_scale(cfg, gen + 1);
        for (int k = 0; k < n_m; ++k) {
            auto rng = make_stream(cfg.seed, gen + 1, 1 + n_x + k);
            Individual c;
            c.genes = gaussian_mutate(pop[parents[2 * n_x + k]].genes, sc, cfg.bounds, rng, init);
            next.push_back(std::move(c));
        }
        pop = std::move(next);
        evaluate(objective, pop, E, cfg.threads);  // elites keep their score
    }
    res.final_population = std::move(pop);
    return res;
}

void write_history_csv(const std::string& path, const std::vector<GenerationStats>& h)
{
    std::ofstream os(path);
    if (!os)
        throw ParameterError("cannot write " + path);
    os.precision(17);
    os << "generation,best,median\n";
    for (const auto& s : h)
        os << s.generation << ',' << s.best << ',' << s.median << '\n';
}

}  // namespace ga
}  // namespace fractune
