#pragma once

#include <string>
#include <vector>

#include "fractune/simulation.hpp"

namespace fractune {

struct SOPTDParams {
    double K = 1;
    double tau_max = 1;
    double tau_min = 1;
    double L = 0;

    void validate() const;
};

enum class RuleGene { single, multi };

struct RuleKind {
    ControllerKind controller = ControllerKind::PID;
    RuleGene gene = RuleGene::single;

    std::string name() const;  // sg-pid, mg-pid, sg-fopid, mg-fopid
    static RuleKind parse(const std::string& s);
    bool operator==(const RuleKind&) const = default;
};

std::vector<RuleKind> all_rules();

// hand-coded published rules; gains carry the 1/K prefactor, PID rules return λ = μ = 1
FOPIDParams apply_rule(const RuleKind& kind, const SOPTDParams& p);

// the same rules as expression text for gp::parse_expr, one per controller parameter
// (Kp, Ki, Kd[, lambda, mu]); gain texts give K·gain, variables K, tmax, tmin, L
std::vector<std::string> rule_texts(const RuleKind& kind);
std::vector<std::string> rule_parameter_names(const RuleKind& kind);

enum class SurfaceVar { tau_max, tau_min, L };
SurfaceVar surface_var_from_string(const std::string& s);
std::string to_string(SurfaceVar v);

struct SurfaceAxis {
    SurfaceVar var = SurfaceVar::tau_max;
    double lo = 0.1;
    double hi = 10;
    int count = 20;

    std::vector<double> points() const;  // linear, inclusive
};

struct SurfacePoint {
    SOPTDParams at;
    bool valid = false;  // false when the point breaks τ_max ≥ τ_min > 0, L ≥ 0
    FOPIDParams params;
};

// the two axes vary, everything else is taken from base
std::vector<SurfacePoint> rule_surface_grid(const RuleKind& kind, const SurfaceAxis& x, const SurfaceAxis& y,
                                            const SOPTDParams& base);
void write_surface_csv(const std::string& path, const std::vector<SurfacePoint>& grid);

}  // namespace fractune
