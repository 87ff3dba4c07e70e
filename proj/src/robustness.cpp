#include "fractune/robustness.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "fractune/error.hpp"

namespace fractune {

void PerturbationSpec::validate() const
{
    for (double d : {dK_pct, dTau_pct, dL_pct})
        if (!std::isfinite(d) || std::abs(d) > 90)
            throw ParameterError("perturbation percentages must lie in [-90, 90]");
}

PerturbationSpec PerturbationSpec::inverse() const
{
    auto inv = [](double pct) { return (1.0 / (1.0 + pct / 100.0) - 1.0) * 100.0; };
    return {inv(dK_pct), inv(dTau_pct), inv(dL_pct)};
}

std::vector<std::size_t> dominant_taus(const TestBenchSpec& spec)
{
    auto p = make_testbench_factored(spec);
    switch (spec.family) {
    case Family::P1: {
        std::vector<std::size_t> all(p.taus.size());
        for (std::size_t i = 0; i < all.size(); ++i)
            all[i] = i;
        return all;
    }
    case Family::P2: return {0};
    case Family::P3: return {1, 2};
    case Family::P4: return {0, 1, 2};
    }
    return {};
}

std::vector<std::size_t> dominant_taus(const FactoredPlant& p)
{
    if (p.taus.empty())
        return {};
    double m = *std::max_element(p.taus.begin(), p.taus.end());
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < p.taus.size(); ++i)
        if (p.taus[i] == m)
            out.push_back(i);
    return out;
}

FactoredPlant perturb_plant(const FactoredPlant& p, const PerturbationSpec& spec,
                            const std::vector<std::size_t>& dominant)
{
    const double fk = 1 + spec.dK_pct / 100, ft = 1 + spec.dTau_pct / 100, fl = 1 + spec.dL_pct / 100;
    if (!(fk > 0) || !(ft > 0) || !(fl > 0))
        throw ParameterError("perturbation would make a gain, time constant or delay nonpositive");
    FactoredPlant q = p;
    q.gain *= fk;
    q.delay *= fl;
    for (std::size_t i : dominant) {
        if (i >= q.taus.size())
            throw ParameterError("dominant time-constant index out of range");
        q.taus[i] *= ft;
        if (!(q.taus[i] > 0))
            throw ParameterError("perturbed time constant is nonpositive");
    }
    return q;
}

std::vector<PerturbationSpec> default_corners()
{
    std::vector<PerturbationSpec> c{{0, 0, 0}};
    for (double k : {-10.0, 10.0})
        for (double t : {-20.0, 20.0})
            for (double l : {-50.0, 50.0})
                c.push_back({k, t, l});
    return c;
}

std::vector<RobustnessRow> robustness_sweep(const FactoredPlant& plant, const std::vector<std::size_t>& dominant,
                                            const FOPIDParams& ctrl, const std::vector<PerturbationSpec>& corners,
                                            const SimConfig& scfg, const OustaloupConfig& ocfg)
{
    scfg.validate();
    std::vector<RobustnessRow> rows;
    rows.reserve(corners.size());
    for (const auto& c : corners) {
        c.validate();
        RobustnessRow r;
        r.spec = c;
        r.trajectory = closed_loop_step(perturb_plant(plant, c, dominant).expand(), ctrl, ocfg, scfg);
        r.metrics = step_metrics(r.trajectory, scfg);
        rows.push_back(std::move(r));
    }
    return rows;
}

std::string robustness_csv_header() { return "dK,dTau,dL,J,overshoot,settled"; }

std::string to_csv_row(const RobustnessRow& r)
{
    return fmt::format("{},{},{},{},{},{}", r.spec.dK_pct, r.spec.dTau_pct, r.spec.dL_pct, r.metrics.J,
                       r.metrics.overshoot, r.metrics.settled ? 1 : 0);
}

}  // namespace fractune
