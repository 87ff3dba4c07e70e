#include "fractune/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include "fractune/error.hpp"

namespace fractune {

using Eigen::MatrixXd;
using Eigen::RowVectorXd;
using Eigen::VectorXd;

void OustaloupConfig::validate() const
{
    if (n_poles < 1)
        throw ParameterError("Oustaloup: need at least one pole/zero pair");
    if (!(omega_b > 0 && omega_b < omega_h))
        throw ParameterError("Oustaloup: need 0 < omega_b < omega_h");
    if (!(derivative_rolloff > 0))
        throw ParameterError("Oustaloup: derivative roll-off must be > 0");
}

OustaloupSections oustaloup_sections(double a, const OustaloupConfig& cfg)
{
    cfg.validate();
    if (!(a > -1.0 && a < 1.0))
        throw ParameterError("Oustaloup section order must lie in (-1, 1)");
    OustaloupSections s;
    const int n = cfg.n_poles;
    const double r = cfg.omega_h / cfg.omega_b;
    s.gain = std::pow(cfg.omega_h, a);
    for (int k = 1; k <= n; ++k) {
        s.zeros.push_back(cfg.omega_b * std::pow(r, (2.0 * k - 1 - a) / (2.0 * n)));
        s.poles.push_back(cfg.omega_b * std::pow(r, (2.0 * k - 1 + a) / (2.0 * n)));
    }
    return s;
}

namespace {

// split alpha into integer part and a remainder in [0, 1)
std::pair<int, double> split_order(double alpha)
{
    double m = std::floor(alpha);
    double f = alpha - m;
    if (f < 1e-12) {
        f = 0;
    } else if (f > 1 - 1e-12) {
        m += 1;
        f = 0;
    }
    return {static_cast<int>(m), f};
}

}  // namespace

RationalTF oustaloup_approx(double alpha, const OustaloupConfig& cfg)
{
    cfg.validate();
    if (!(alpha > -2.0 && alpha < 2.0))
        throw ParameterError("oustaloup_approx: alpha must lie in (-2, 2)");
    auto [m, f] = split_order(alpha);
    Poly num{1.0}, den{1.0};
    if (f > 0) {
        auto s = oustaloup_sections(f, cfg);
        num = {s.gain};
        for (std::size_t k = 0; k < s.zeros.size(); ++k) {
            num = poly::mul(num, {1.0, s.zeros[k]});
            den = poly::mul(den, {1.0, s.poles[k]});
        }
    }
    if (m > 0)
        num = poly::mul(num, poly::pow({1.0, 0.0}, m));
    else if (m < 0)
        den = poly::mul(den, poly::pow({1.0, 0.0}, -m));
    return {num, den};
}

void SimConfig::validate() const
{
    if (!(dt > 0) || !(horizon > 0))
        throw ParameterError("SimConfig: dt and horizon must be > 0");
    double n = horizon / dt;
    if (std::abs(n - std::round(n)) > 1e-6 * n)
        throw ParameterError("SimConfig: horizon/dt must be an integer");
    if (!(w1 >= 0 && w2 >= 0))
        throw ParameterError("SimConfig: weights must be >= 0");
    if (!(setpoint_time >= 0))
        throw ParameterError("SimConfig: setpoint_time must be >= 0");
}

int SimConfig::steps() const
{
    return static_cast<int>(std::lround(horizon / dt));
}

namespace {

// cascade of first-order blocks from e to the path output, tracking the t=0 state
struct PathBuilder {
    StateSpace ss;  // starts as the unity static gain
    VectorXd x0;
    double v0 = 1.0;  // block input at t = 0 per unit error

    PathBuilder()
    {
        ss.A.resize(0, 0);
        ss.B.resize(0);
        ss.C.resize(0);
        ss.D = 1.0;
        x0.resize(0);
    }

    void append(const StateSpace& blk, double x_init, double y_init)
    {
        ss = series(ss, blk);
        VectorXd nx(x0.size() + 1);
        nx << x0, x_init;
        x0 = nx;
        v0 = y_init;
    }

    static StateSpace first_order(double a, double b, double c, double d)
    {
        StateSpace s;
        s.A = MatrixXd::Constant(1, 1, a);
        s.B = VectorXd::Constant(1, b);
        s.C = RowVectorXd::Constant(1, c);
        s.D = d;
        return s;
    }

    // (s + z)/(s + p), from rest
    void section(double z, double p) { append(first_order(-p, 1.0, z - p, 1.0), 0.0, v0); }
    // 1/s, from rest
    void integrator() { append(first_order(0.0, 1.0, 1.0, 0.0), 0.0, 0.0); }
    // w·s/(s + w), state at equilibrium with its input
    void derivative(double w) { append(first_order(-w, w, -w, w), v0, 0.0); }
    void gain(double k)
    {
        ss.C *= k;
        ss.D *= k;
        v0 *= k;
    }
};

ControllerRealization fractional_path(double gain, double alpha, const OustaloupConfig& cfg)
{
    PathBuilder b;
    auto [m, f] = split_order(alpha);
    if (f > 0) {
        auto s = oustaloup_sections(f, cfg);
        for (std::size_t k = 0; k < s.zeros.size(); ++k)
            b.section(s.zeros[k], s.poles[k]);
        b.gain(s.gain);
    }
    for (int i = 0; i < -m; ++i)
        b.integrator();
    for (int i = 0; i < m; ++i)
        b.derivative(cfg.derivative_rolloff);
    b.gain(gain);
    return {b.ss, b.x0};
}

ControllerRealization combine(const ControllerRealization& a, const ControllerRealization& b)
{
    ControllerRealization r;
    r.ss = parallel(a.ss, b.ss);
    r.x0_per_unit_error.resize(a.x0_per_unit_error.size() + b.x0_per_unit_error.size());
    r.x0_per_unit_error << a.x0_per_unit_error, b.x0_per_unit_error;
    return r;
}

}  // namespace

ControllerRealization realize_controller(const FOPIDParams& c, const OustaloupConfig& cfg)
{
    cfg.validate();
    for (double v : {c.Kp, c.Ki, c.Kd, c.lambda, c.mu})
        if (!std::isfinite(v))
            throw ParameterError("controller parameters must be finite");
    if (!(c.lambda >= 0 && c.lambda < 2) || !(c.mu >= 0 && c.mu < 2))
        throw ParameterError("controller orders must lie in [0, 2)");
    ControllerRealization r;
    r.ss.A.resize(0, 0);
    r.ss.B.resize(0);
    r.ss.C.resize(0);
    r.ss.D = c.Kp;
    r.x0_per_unit_error.resize(0);
    if (c.Ki != 0)
        r = combine(r, fractional_path(c.Ki, -c.lambda, cfg));
    if (c.Kd != 0)
        r = combine(r, fractional_path(c.Kd, c.mu, cfg));
    return r;
}

namespace {

constexpr double kOverflow = 1e6;

struct Inputs {
    int k_sp;
    int k_dist;
    double dist;
    double r(int k) const { return k >= k_sp ? 1.0 : 0.0; }
    double d(int k) const { return k >= k_dist ? dist : 0.0; }
};

Inputs make_inputs(const SimConfig& s, int sub)
{
    Inputs in;
    in.k_sp = static_cast<int>(std::lround(s.setpoint_time / s.dt)) * sub;
    in.k_dist = std::numeric_limits<int>::max();
    in.dist = 0;
    if (s.disturbance) {
        in.k_dist = static_cast<int>(std::lround(s.disturbance->time / s.dt)) * sub;
        in.dist = s.disturbance->magnitude;
    }
    return in;
}

void push(Trajectory& tr, double t, double y, double u, double e)
{
    tr.t.push_back(t);
    tr.y.push_back(y);
    tr.u.push_back(u);
    tr.e.push_back(e);
}

// delay-free loop: one exact ZOH step of the combined state
Trajectory simulate_combined(const StateSpace& P, const ControllerRealization& K, const SimConfig& s)
{
    const auto np = P.order(), nc = K.ss.order(), n = np + nc;
    const double q = 1.0 + P.D * K.ss.D;
    if (std::abs(q) < 1e-12)
        throw EvaluationError("closed loop is ill-posed (1 + D_plant·D_ctrl = 0)");

    // y = Yx x + Yw w, w = [r, d]
    RowVectorXd Yx(n);
    Yx << P.C, P.D * K.ss.C;
    Yx /= q;
    Eigen::RowVector2d Yw(P.D * K.ss.D / q, P.D / q);
    RowVectorXd Ex = -Yx;
    Eigen::RowVector2d Ew = Eigen::RowVector2d(1, 0) - Yw;
    RowVectorXd Ux = K.ss.D * Ex;
    Ux.tail(nc) += K.ss.C;
    Eigen::RowVector2d Uw = K.ss.D * Ew;

    MatrixXd A = MatrixXd::Zero(n, n);
    MatrixXd B = MatrixXd::Zero(n, 2);
    A.topLeftCorner(np, np) = P.A;
    A.topRows(np) += P.B * Ux;
    B.topRows(np) = P.B * (Uw + Eigen::RowVector2d(0, 1));
    A.bottomRightCorner(nc, nc) = K.ss.A;
    A.bottomRows(nc) += K.ss.B * Ex;
    B.bottomRows(nc) = K.ss.B * Ew;

    auto dz = zoh(A, B, s.dt);
    const Inputs in = make_inputs(s, 1);
    const int N = s.steps();

    VectorXd x = VectorXd::Zero(n);
    Eigen::Vector2d w(in.r(0), in.d(0));
    double e0 = (Ex * x + Ew * w)(0);
    x.tail(nc) = K.x0_per_unit_error * e0;

    Trajectory tr;
    tr.t.reserve(N + 1);
    tr.y.reserve(N + 1);
    tr.u.reserve(N + 1);
    tr.e.reserve(N + 1);
    for (int k = 0;; ++k) {
        w << in.r(k), in.d(k);
        double y = Yx.dot(x) + Yw.dot(w);
        double e = w(0) - y;
        double u = Ux.dot(x) + Uw.dot(w);
        push(tr, k * s.dt, y, u, e);
        if (!std::isfinite(y) || std::abs(y) > kOverflow || !std::isfinite(u)) {
            tr.diverged = true;
            break;
        }
        if (k == N)
            break;
        x = dz.Phi * x + dz.Gamma * w;
    }
    return tr;
}

// delayed plant input: plant and controller advanced separately with first-order hold,
// u(t − L) read back from the history with linear interpolation
Trajectory simulate_delayed(const StateSpace& P, double L, const ControllerRealization& K, const SimConfig& s)
{
    const int sub = L < s.dt ? static_cast<int>(std::ceil(s.dt / L - 1e-9)) : 1;
    const double h = s.dt / sub;
    const int N = s.steps() * sub;
    const Inputs in = make_inputs(s, sub);
    const auto np = P.order(), nc = K.ss.order();

    FohDiscrete fp, fc;
    if (np > 0)
        fp = foh(P.A, P.B, h);
    if (nc > 0)
        fc = foh(K.ss.A, K.ss.B, h);

    std::vector<double> um(N + 1, 0.0), up(N + 1, 0.0);  // left/right limits of u at t_j
    auto delayed = [&](double tau, bool right) {
        if (tau < 0)
            return 0.0;
        double qf = tau / h;
        long i = static_cast<long>(std::floor(qf + 1e-9));
        double f = qf - i;
        if (std::abs(f) < 1e-9) {
            if (i == 0 && !right)
                return 0.0;
            return right ? up[i] : um[i];
        }
        return up[i] + f * (um[i + 1] - up[i]);
    };

    VectorXd xp = VectorXd::Zero(np), xc = VectorXd::Zero(nc);
    auto output = [&](const VectorXd& x, double v) { return (np ? P.C.dot(x) : 0.0) + P.D * v; };

    // t = 0⁺
    double v = delayed(-L, true) + in.d(0);
    double y = output(xp, v);
    double e = in.r(0) - y;
    xc = K.x0_per_unit_error * e;
    double u = (nc ? K.ss.C.dot(xc) : 0.0) + K.ss.D * e;
    up[0] = u;

    Trajectory tr;
    push(tr, 0.0, y, u, e);
    for (int j = 0; j < N; ++j) {
        double t1 = (j + 1) * h;
        double v0 = delayed(j * h - L, true) + in.d(j);
        double v1 = delayed(t1 - L, false) + in.d(j);
        if (np)
            xp = fp.Phi * xp + fp.Gamma0 * v0 + fp.Gamma1 * (v1 - v0);
        double y1m = output(xp, v1);
        double e1m = in.r(j) - y1m;
        if (nc)
            xc = fc.Phi * xc + fc.Gamma0 * e + fc.Gamma1 * (e1m - e);
        um[j + 1] = (nc ? K.ss.C.dot(xc) : 0.0) + K.ss.D * e1m;

        double v1p = delayed(t1 - L, true) + in.d(j + 1);
        y = output(xp, v1p);
        e = in.r(j + 1) - y;
        u = (nc ? K.ss.C.dot(xc) : 0.0) + K.ss.D * e;
        up[j + 1] = u;
        if ((j + 1) % sub == 0)
            push(tr, (j + 1) / sub * s.dt, y, u, e);
        if (!std::isfinite(y) || std::abs(y) > kOverflow || !std::isfinite(u)) {
            if ((j + 1) % sub != 0)
                push(tr, t1, y, u, e);
            tr.diverged = true;
            break;
        }
    }
    return tr;
}

}  // namespace

Trajectory closed_loop_step(const DelayedTF& plant, const FOPIDParams& ctrl, const OustaloupConfig& ocfg,
                            const SimConfig& scfg)
{
    scfg.validate();
    if (!plant.tf().proper())
        throw DomainError("closed_loop_step: plant must be proper");
    StateSpace P = realize(plant.tf());
    auto K = realize_controller(ctrl, ocfg);
    const double L = plant.delay();
    if (L < scfg.dt * 1e-3)
        return simulate_combined(P, K, scfg);
    return simulate_delayed(P, L, K, scfg);
}

double cost_J(const Trajectory& tr, double w1, double w2)
{
    if (tr.diverged)
        return std::numeric_limits<double>::infinity();
    double J = 0;
    for (std::size_t k = 1; k < tr.t.size(); ++k) {
        double h = tr.t[k] - tr.t[k - 1];
        double f0 = w1 * tr.t[k - 1] * std::abs(tr.e[k - 1]) + w2 * tr.u[k - 1] * tr.u[k - 1];
        double f1 = w1 * tr.t[k] * std::abs(tr.e[k]) + w2 * tr.u[k] * tr.u[k];
        J += 0.5 * h * (f0 + f1);
    }
    return std::isfinite(J) ? J : std::numeric_limits<double>::infinity();
}

std::string to_string(ControllerKind k)
{
    return k == ControllerKind::PID ? "PID" : "FOPID";
}

ControllerKind controller_from_string(const std::string& s)
{
    if (s == "PID" || s == "pid")
        return ControllerKind::PID;
    if (s == "FOPID" || s == "fopid")
        return ControllerKind::FOPID;
    throw ParameterError("unknown controller kind '" + s + "'");
}

ga::GAConfig tuning_ga_defaults(ControllerKind kind, std::uint64_t seed)
{
    ga::GAConfig g;
    g.pop_size = 20;
    g.elite_count = 2;
    g.crossover_fraction = 0.8;
    g.mutation_fraction = 0.2;
    g.bounds = {{0, 100}, {0, 100}, {0, 100}};
    if (kind == ControllerKind::FOPID) {
        g.bounds.push_back({0, 2});
        g.bounds.push_back({0, 2});
    }
    g.init_bounds.assign(g.bounds.size(), {0.0, 1.0});
    g.max_generations = 100;
    g.stall_generations = 20;
    g.seed = seed;
    return g;
}

namespace {
FOPIDParams decode(const ga::Genes& x, ControllerKind kind)
{
    if (kind == ControllerKind::PID)
        return FOPIDParams::pid(x[0], x[1], x[2]);
    return {x[0], x[1], x[2], x[3], x[4]};
}
}  // namespace

TuningResult tune_controller(const DelayedTF& plant, ControllerKind kind, const ga::GAConfig& gcfg,
                             const OustaloupConfig& ocfg, const SimConfig& scfg)
{
    scfg.validate();
    ocfg.validate();
    const std::size_t nv = kind == ControllerKind::PID ? 3 : 5;
    if (gcfg.bounds.size() != nv)
        throw ParameterError("tune_controller: GA bounds must have " + std::to_string(nv) + " entries");
    auto obj = [&](const ga::Genes& x) {
        try {
            // orders at the very top of [0, 2] fold back to just below 2
            ga::Genes y = x;
            if (nv == 5) {
                y[3] = std::min(y[3], std::nextafter(2.0, 0.0));
                y[4] = std::min(y[4], std::nextafter(2.0, 0.0));
            }
            return cost_J(closed_loop_step(plant, decode(y, kind), ocfg, scfg), scfg.w1, scfg.w2);
        } catch (const EvaluationError&) {
            return std::numeric_limits<double>::infinity();
        }
    };
    auto r = ga::run_ga(obj, gcfg);
    TuningResult out;
    out.params = decode(r.best_genes, kind);
    if (nv == 5) {
        out.params.lambda = std::min(out.params.lambda, std::nextafter(2.0, 0.0));
        out.params.mu = std::min(out.params.mu, std::nextafter(2.0, 0.0));
    }
    out.J = r.best_objective;
    out.history = std::move(r.history);
    return out;
}

StepMetrics step_metrics(const Trajectory& tr, const SimConfig& s)
{
    StepMetrics m;
    m.J = cost_J(tr, s.w1, s.w2);
    m.overshoot = 0;
    m.settling_time = std::numeric_limits<double>::quiet_NaN();
    m.settled = false;
    if (tr.diverged || tr.t.empty())
        return m;
    double ymax = *std::max_element(tr.y.begin(), tr.y.end());
    m.overshoot = std::max(0.0, ymax - 1.0);
    const double band = 0.02;
    const double tend = tr.t.back();
    bool ok = true;
    int last_out = -1;
    for (std::size_t k = 0; k < tr.t.size(); ++k) {
        bool inside = std::abs(tr.e[k]) < band && tr.t[k] >= s.setpoint_time;
        if (!inside)
            last_out = static_cast<int>(k);
        if (tr.t[k] >= tend - 10.0 - 1e-9 && !inside)
            ok = false;
    }
    m.settled = ok;
    if (last_out + 1 < static_cast<int>(tr.t.size()))
        m.settling_time = last_out < 0 ? 0.0 : tr.t[last_out + 1];
    return m;
}

void write_trajectory_csv(const std::string& path, const Trajectory& tr)
{
    std::ofstream os(path);
    if (!os)
        throw ParameterError("cannot write " + path);
    os.precision(12);
    os << "t,y,u,e\n";
    for (std::size_t k = 0; k < tr.t.size(); ++k)
        os << tr.t[k] << ',' << tr.y[k] << ',' << tr.u[k] << ',' << tr.e[k] << '\n';
}

}  // namespace fractune
