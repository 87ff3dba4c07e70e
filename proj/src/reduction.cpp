#include "fractune/reduction.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>

#include <fmt/format.h>
#include <gsl/gsl_multimin.h>

#include "fractune/error.hpp"

namespace fractune {

FrequencyGrid FrequencyGrid::log_spaced(double lo, double hi, int count, bool hz)
{
    if (!(lo > 0.0) || !(lo < hi) || count < 2)
        throw ParameterError("frequency grid needs 0 < lo < hi and count >= 2");
    const double k = hz ? 2 * M_PI : 1.0;
    FrequencyGrid g;
    g.omega_lo = lo * k;
    g.omega_hi = hi * k;
    g.count = count;
    g.points.resize(count);
    const double a = std::log10(g.omega_lo), b = std::log10(g.omega_hi);
    for (int i = 0; i < count; ++i)
        g.points[i] = std::pow(10.0, a + (b - a) * i / (count - 1));
    g.points.front() = g.omega_lo;
    g.points.back() = g.omega_hi;
    return g;
}

std::string to_string(ObjectiveKind k)
{
    return k == ObjectiveKind::H2 ? "H2" : "Nyquist";
}

std::string to_string(Template t)
{
    return t == Template::FOPTD ? "FOPTD" : "SOPTD";
}

ObjectiveKind objective_from_string(const std::string& s)
{
    if (s == "H2" || s == "h2")
        return ObjectiveKind::H2;
    if (s == "Nyquist" || s == "nyquist")
        return ObjectiveKind::Nyquist;
    throw ParameterError("unknown objective '" + s + "'");
}

Template template_from_string(const std::string& s)
{
    if (s == "FOPTD" || s == "foptd")
        return Template::FOPTD;
    if (s == "SOPTD" || s == "soptd")
        return Template::SOPTD;
    throw ParameterError("unknown template '" + s + "'");
}

void ReductionObjectiveConfig::validate() const
{
    if (!(w1 >= 0 && w2 >= 0) || (w1 == 0 && w2 == 0))
        throw ParameterError("Nyquist weights must be >= 0 and not both zero");
    if (grid.points.size() < 2 || !(grid.omega_lo > 0))
        throw ParameterError("frequency grid is not initialised");
}

DelayedTF ReductionRecord::model() const
{
    if (tmpl == Template::FOPTD)
        return make_foptd(K, tau_max, L);
    return make_soptd(K, tau_max, tau_min, L);
}

double j_h2(const DelayedTF& P, const DelayedTF& Pred)
{
    return h2_norm_difference(with_pade(P), with_pade(Pred));
}

NyquistObjective::NyquistObjective(const DelayedTF& plant, const ReductionObjectiveConfig& cfg) : cfg_(cfg)
{
    cfg_.validate();
    plant_.reserve(cfg_.grid.points.size());
    for (double w : cfg_.grid.points)
        plant_.push_back(freq_point(plant, w, cfg_.delay_mode));
}

double NyquistObjective::operator()(const DelayedTF& pred) const
{
    double sre = 0, sim = 0;
    const auto& w = cfg_.grid.points;
    for (std::size_t i = 0; i < w.size(); ++i) {
        cplx d = plant_[i] - freq_point(pred, w[i], cfg_.delay_mode);
        sre += d.real() * d.real();
        sim += d.imag() * d.imag();
    }
    return cfg_.w1 * std::sqrt(sre) + cfg_.w2 * std::sqrt(sim);
}

double j_nyquist(const DelayedTF& P, const DelayedTF& Pred, const ReductionObjectiveConfig& cfg)
{
    return NyquistObjective(P, cfg)(Pred);
}

ga::GAConfig reduction_ga_defaults(std::uint64_t seed)
{
    ga::GAConfig g;
    g.pop_size = 50;
    g.elite_count = 2;
    g.max_generations = 100;
    g.stall_generations = 30;
    g.seed = seed;
    return g;
}

namespace {

ReductionRecord decode(const ga::Genes& g, Template tmpl, double K)
{
    auto v = [&](int i) { return std::pow(10.0, g[i]); };
    ReductionRecord r;
    r.tmpl = tmpl;
    r.K = K;
    if (tmpl == Template::FOPTD) {
        r.tau_max = v(0);
        r.tau_min = 0.0;
        r.L = v(1);
    } else {
        double a = v(0), b = v(1);
        r.tau_max = std::max(a, b);
        r.tau_min = std::min(a, b);
        r.L = v(2);
    }
    return r;
}

struct PolishCtx {
    const std::function<double(const ga::Genes&)>* f;
    double lo, hi;
};

double polish_eval(const gsl_vector* v, void* params)
{
    auto* c = static_cast<PolishCtx*>(params);
    ga::Genes x(v->size);
    for (std::size_t i = 0; i < x.size(); ++i)
        x[i] = std::clamp(gsl_vector_get(v, i), c->lo, c->hi);
    double r = (*c->f)(x);
    return std::isfinite(r) ? r : 1e300;
}

// bounded (by clipping) Nelder–Mead from x0; returns the improved point
std::pair<ga::Genes, double> polish(const std::function<double(const ga::Genes&)>& f, ga::Genes x0,
                                    double f0, double lo, double hi, int iters)
{
    const std::size_t n = x0.size();
    PolishCtx ctx{&f, lo, hi};
    gsl_multimin_function fn{&polish_eval, n, &ctx};
    gsl_vector* x = gsl_vector_alloc(n);
    gsl_vector* step = gsl_vector_alloc(n);
    for (std::size_t i = 0; i < n; ++i) {
        gsl_vector_set(x, i, x0[i]);
        gsl_vector_set(step, i, 0.05);
    }
    gsl_multimin_fminimizer* m = gsl_multimin_fminimizer_alloc(gsl_multimin_fminimizer_nmsimplex2, n);
    gsl_multimin_fminimizer_set(m, &fn, x, step);
    for (int it = 0; it < iters; ++it) {
        if (gsl_multimin_fminimizer_iterate(m) != GSL_SUCCESS)
            break;
        if (gsl_multimin_test_size(gsl_multimin_fminimizer_size(m), 1e-9) == GSL_SUCCESS)
            break;
    }
    ga::Genes best(n);
    for (std::size_t i = 0; i < n; ++i)
        best[i] = std::clamp(gsl_vector_get(m->x, i), lo, hi);
    double fb = f(best);
    gsl_multimin_fminimizer_free(m);
    gsl_vector_free(step);
    gsl_vector_free(x);
    if (!(fb < f0))
        return {std::move(x0), f0};
    return {std::move(best), fb};
}

}  // namespace

ReductionRecord reduce(const DelayedTF& P, Template tmpl, const ReductionObjectiveConfig& cfg,
                       const ga::GAConfig& gcfg, const ReductionSearch& search)
{
    cfg.validate();
    if (!(search.lo > 0 && search.lo < search.hi))
        throw ParameterError("reduce: bad search box");
    const double K = P.tf().dc_gain();
    if (!std::isfinite(K) || K == 0.0)
        throw DomainError("reduce: plant needs a finite nonzero dc gain");

    const std::size_t nv = tmpl == Template::FOPTD ? 2 : 3;
    const double lo = std::log10(search.lo), hi = std::log10(search.hi);
    ga::GAConfig g = gcfg;
    g.bounds.assign(nv, {lo, hi});
    g.init_bounds.clear();

    std::function<double(const DelayedTF&)> J;
    if (cfg.kind == ObjectiveKind::Nyquist) {
        auto ny = std::make_shared<NyquistObjective>(P, cfg);
        J = [ny](const DelayedTF& m) { return (*ny)(m); };
    } else {
        if (!is_hurwitz(P.tf().den()))
            throw DomainError("reduce: plant is not stable");
        J = [&P](const DelayedTF& m) { return j_h2(P, m); };
    }
    std::function<double(const ga::Genes&)> objective = [&](const ga::Genes& x) {
        try {
            return J(decode(x, tmpl, K).model());
        } catch (const std::exception&) {
            return std::numeric_limits<double>::infinity();
        }
    };
    std::vector<ga::Individual> first_gen;
    auto res = ga::run_ga(objective, g, [&](int gen, const std::vector<ga::Individual>& pop) {
        if (gen == 0)
            first_gen = pop;
    });
    ga::Genes best = res.best_genes;
    double fbest = res.best_objective;
    if (!std::isfinite(fbest))
        throw OptimizationError("reduce: no finite objective found");

    if (search.polish_starts > 0) {
        // spread the starts: each must sit at least half a decade (in some coordinate)
        // away from the ones already taken; the first generation supplies diversity
        auto cand = res.final_population;
        cand.insert(cand.end(), first_gen.begin(), first_gen.end());
        std::stable_sort(cand.begin(), cand.end(),
                         [](const auto& a, const auto& b) { return a.raw_objective < b.raw_objective; });
        std::vector<ga::Genes> starts;
        for (const auto& d : cand) {
            if (static_cast<int>(starts.size()) >= search.polish_starts)
                break;
            if (!std::isfinite(d.raw_objective))
                continue;
            bool far = std::all_of(starts.begin(), starts.end(), [&](const ga::Genes& s0) {
                double dmax = 0;
                for (std::size_t i = 0; i < nv; ++i)
                    dmax = std::max(dmax, std::abs(s0[i] - d.genes[i]));
                return dmax > 0.5;
            });
            if (far)
                starts.push_back(d.genes);
        }
        for (const auto& s0 : starts) {
            auto [x, fx] = polish(objective, s0, objective(s0), lo, hi, search.polish_iterations);
            if (fx < fbest) {
                fbest = fx;
                best = x;
            }
        }
    }
    // the log-coded box cannot reach L = 0; try the delay-free boundary from the best time constants
    bool zero_delay = false;
    if (search.polish_starts > 0) {
        std::function<double(const ga::Genes&)> no_delay = [&](const ga::Genes& x) {
            ga::Genes full = x;
            full.push_back(lo);
            auto m = decode(full, tmpl, K);
            m.L = 0.0;
            try {
                return J(m.model());
            } catch (const std::exception&) {
                return std::numeric_limits<double>::infinity();
            }
        };
        ga::Genes t0(best.begin(), best.end() - 1);
        auto [x, fx] = polish(no_delay, t0, no_delay(t0), lo, hi, search.polish_iterations);
        if (fx < fbest) {
            fbest = fx;
            best = x;
            best.push_back(lo);
            zero_delay = true;
        }
    }
    ReductionRecord r = decode(best, tmpl, K);
    if (zero_delay)
        r.L = 0.0;
    r.objective = cfg.kind;
    r.J_min = fbest;
    return r;
}

std::string reduction_csv_header()
{
    return "family,param,template,objective,J_min,K,tau_max,tau_min,L";
}

std::string to_csv_row(const ReductionRecord& r)
{
    std::string fam = r.spec ? family_name(r.spec->family) : "";
    std::string par = r.spec ? fmt::format("{}", r.spec->param) : "";
    std::string tmin = r.tmpl == Template::SOPTD ? fmt::format("{}", r.tau_min) : "";
    return fmt::format("{},{},{},{},{},{},{},{},{}", fam, par, to_string(r.tmpl), to_string(r.objective),
                       r.J_min, r.K, r.tau_max, tmin, r.L);
}

}  // namespace fractune
