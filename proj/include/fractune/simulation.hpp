#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fractune/ga.hpp"
#include "fractune/lti.hpp"
#include "fractune/state_space.hpp"

namespace fractune {

struct FOPIDParams {
    double Kp = 0;
    double Ki = 0;
    double Kd = 0;
    double lambda = 1;
    double mu = 1;

    static FOPIDParams pid(double kp, double ki, double kd) { return {kp, ki, kd, 1.0, 1.0}; }
    bool is_pid() const { return lambda == 1.0 && mu == 1.0; }
};

struct OustaloupConfig {
    int n_poles = 5;
    double omega_b = 1e-2;
    double omega_h = 1e2;
    // corner of the first-order roll-off on integer derivative stages
    double derivative_rolloff = 1e4;

    void validate() const;
};

// s^frac for frac in (0,1): gain·Π (s + z_k)/(s + p_k)
struct OustaloupSections {
    double gain = 1;
    std::vector<double> zeros;
    std::vector<double> poles;
};
OustaloupSections oustaloup_sections(double frac, const OustaloupConfig& cfg);

// s^alpha, alpha in (−2, 2): s^floor(alpha) times the Oustaloup filter of the remainder
RationalTF oustaloup_approx(double alpha, const OustaloupConfig& cfg);

struct Disturbance {
    double time = 50.0;
    double magnitude = 0.2;
};

struct SimConfig {
    double horizon = 100.0;
    double dt = 0.01;
    double w1 = 1.0;
    double w2 = 1.0;
    double setpoint_time = 0.0;
    std::optional<Disturbance> disturbance;

    void validate() const;
    int steps() const;
};

struct Trajectory {
    std::vector<double> t, y, u, e;
    bool diverged = false;
};

// controller as a state-space block from e to u, with the state it starts in
// for a unit step of the error at t = 0
struct ControllerRealization {
    StateSpace ss;
    Eigen::VectorXd x0_per_unit_error;
};
ControllerRealization realize_controller(const FOPIDParams& c, const OustaloupConfig& cfg);

Trajectory closed_loop_step(const DelayedTF& plant, const FOPIDParams& ctrl, const OustaloupConfig& ocfg,
                            const SimConfig& scfg);

double cost_J(const Trajectory& tr, double w1, double w2);

enum class ControllerKind { PID, FOPID };
std::string to_string(ControllerKind k);
ControllerKind controller_from_string(const std::string& s);

struct TuningResult {
    FOPIDParams params;
    double J;
    std::vector<ga::GenerationStats> history;
};

// GA defaults for tuning: pop 20, elite 2, crossover 0.8, bounds [0,100]³ (+[0,2]²)
// and an initial population drawn from [0,1] per gene
ga::GAConfig tuning_ga_defaults(ControllerKind kind, std::uint64_t seed);

TuningResult tune_controller(const DelayedTF& plant, ControllerKind kind, const ga::GAConfig& ga,
                             const OustaloupConfig& ocfg, const SimConfig& scfg);

struct StepMetrics {
    double J;
    double overshoot;  // (max y − r)/r, ≥ 0
    double settling_time;  // last exit from the 2% band, NaN if never settles
    bool settled;  // |e| < 2% over the final 10 s
};
StepMetrics step_metrics(const Trajectory& tr, const SimConfig& scfg);

void write_trajectory_csv(const std::string& path, const Trajectory& tr);

}  // namespace fractune
