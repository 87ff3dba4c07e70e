#pragma once

#include <optional>
#include <string>
#include <vector>

#include "fractune/ga.hpp"
#include "fractune/lti.hpp"

namespace fractune {

struct FrequencyGrid {
    double omega_lo = 1e-4;
    double omega_hi = 1e4;
    int count = 500;
    std::vector<double> points;

    // hz=true treats lo/hi as Hz and stores rad/s
    static FrequencyGrid log_spaced(double lo, double hi, int count, bool hz = false);
};

enum class ObjectiveKind { H2, Nyquist };
enum class Template { FOPTD, SOPTD };

std::string to_string(ObjectiveKind k);
std::string to_string(Template t);
ObjectiveKind objective_from_string(const std::string& s);
Template template_from_string(const std::string& s);

struct ReductionObjectiveConfig {
    ObjectiveKind kind = ObjectiveKind::Nyquist;
    double w1 = 1.0;
    double w2 = 1.0;
    FrequencyGrid grid = FrequencyGrid::log_spaced(1e-4, 1e4, 500);
    DelayMode delay_mode = DelayMode::pade3;

    void validate() const;
};

struct ReductionRecord {
    std::optional<TestBenchSpec> spec;
    Template tmpl = Template::SOPTD;
    ObjectiveKind objective = ObjectiveKind::Nyquist;
    double J_min = 0;
    double K = 1;
    double tau_max = 1;  // FOPTD: τ
    double tau_min = 0;  // FOPTD: unused (0)
    double L = 0;

    DelayedTF model() const;
};

double j_h2(const DelayedTF& P, const DelayedTF& Pred);
double j_nyquist(const DelayedTF& P, const DelayedTF& Pred, const ReductionObjectiveConfig& cfg);

// caches the plant response on the grid
class NyquistObjective {
public:
    NyquistObjective(const DelayedTF& plant, const ReductionObjectiveConfig& cfg);
    double operator()(const DelayedTF& pred) const;

private:
    ReductionObjectiveConfig cfg_;
    std::vector<cplx> plant_;
};

// box for τ, τ_max, τ_min, L; the initial population is drawn log-uniformly
// GA genes are log10 of each parameter; a few well-separated good individuals (final and
// first generation) are then polished with a bounded Nelder–Mead simplex (polish_starts = 0 disables)
struct ReductionSearch {
    double lo = 1e-3;
    double hi = 10.0;
    int polish_starts = 4;
    int polish_iterations = 400;
};

ga::GAConfig reduction_ga_defaults(std::uint64_t seed);
ReductionRecord reduce(const DelayedTF& P, Template tmpl, const ReductionObjectiveConfig& cfg,
                       const ga::GAConfig& ga, const ReductionSearch& search = {});

std::string reduction_csv_header();
std::string to_csv_row(const ReductionRecord& r);

}  // namespace fractune
