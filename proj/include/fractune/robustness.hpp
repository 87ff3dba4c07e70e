#pragma once

#include <string>
#include <vector>

#include "fractune/lti.hpp"
#include "fractune/simulation.hpp"

namespace fractune {

// relative changes in percent
struct PerturbationSpec {
    double dK_pct = 0;
    double dTau_pct = 0;
    double dL_pct = 0;

    void validate() const;  // |·| ≤ 90
    // the change that undoes this one: factor 1/(1 + d) for each quantity
    PerturbationSpec inverse() const;
    bool operator==(const PerturbationSpec&) const = default;
};

// indices into FactoredPlant::taus that count as the dominant time constant:
// P1 all factors, P2 the unit one, P3 the two T factors, P4 the unit ones
std::vector<std::size_t> dominant_taus(const TestBenchSpec& spec);
// generic choice: every factor equal to the largest
std::vector<std::size_t> dominant_taus(const FactoredPlant& p);

// K·(1+dK), dominant τ·(1+dτ), L·(1+dL); throws ParameterError if a factor would be ≤ 0
FactoredPlant perturb_plant(const FactoredPlant& p, const PerturbationSpec& spec,
                            const std::vector<std::size_t>& dominant);

// nominal first, then the 8 sign combinations of (±10% K, ±20% τ, ±50% L)
std::vector<PerturbationSpec> default_corners();

struct RobustnessRow {
    PerturbationSpec spec;
    StepMetrics metrics;
    Trajectory trajectory;
};

// corners are simulated independently; a diverged corner gives J = inf, settled = false
std::vector<RobustnessRow> robustness_sweep(const FactoredPlant& plant, const std::vector<std::size_t>& dominant,
                                            const FOPIDParams& ctrl, const std::vector<PerturbationSpec>& corners,
                                            const SimConfig& scfg, const OustaloupConfig& ocfg = {});

std::string robustness_csv_header();  // dK,dTau,dL,J,overshoot,settled
std::string to_csv_row(const RobustnessRow& r);

}  // namespace fractune
