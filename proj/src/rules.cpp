#include "fractune/rules.hpp"

#include <cmath>
#include <fstream>

#include <fmt/format.h>

#include "fractune/error.hpp"
#include "fractune/gp.hpp"

namespace fractune {

void SOPTDParams::validate() const
{
    if (!std::isfinite(K) || K == 0.0)
        throw ParameterError("SOPTD: K must be finite and nonzero");
    if (!(tau_min > 0) || !(tau_max >= tau_min) || !std::isfinite(tau_max))
        throw ParameterError("SOPTD: need tau_max >= tau_min > 0");
    if (!(L >= 0) || !std::isfinite(L))
        throw ParameterError("SOPTD: need L >= 0");
}

std::string RuleKind::name() const
{
    return std::string(gene == RuleGene::single ? "sg-" : "mg-") +
           (controller == ControllerKind::PID ? "pid" : "fopid");
}

RuleKind RuleKind::parse(const std::string& s)
{
    for (const auto& k : all_rules())
        if (k.name() == s)
            return k;
    throw ParameterError("unknown rule '" + s + "' (sg-pid, mg-pid, sg-fopid, mg-fopid)");
}

std::vector<RuleKind> all_rules()
{
    return {{ControllerKind::PID, RuleGene::single},
            {ControllerKind::PID, RuleGene::multi},
            {ControllerKind::FOPID, RuleGene::single},
            {ControllerKind::FOPID, RuleGene::multi}};
}

namespace {

// protected number: every operation is clamped exactly like a GP node
struct P {
    double v;
    P(double x) : v(gp::clamp_value(x)) {}  // NOLINT: literals convert implicitly
};

P operator+(P a, P b) { return gp::apply_op(gp::Op::Add, a.v, b.v); }
P operator-(P a, P b) { return gp::apply_op(gp::Op::Sub, a.v, b.v); }
P operator*(P a, P b) { return gp::apply_op(gp::Op::Mul, a.v, b.v); }
P operator-(P a) { return gp::apply_op(gp::Op::Neg, a.v); }
P pdiv(P a, P b) { return gp::apply_op(gp::Op::Div, a.v, b.v); }
P psqrt(P a) { return gp::apply_op(gp::Op::Sqrt, a.v); }
P q4(P a) { return psqrt(psqrt(a)); }  // fourth root on |·|
P plog(P a) { return gp::apply_op(gp::Op::Log, a.v); }
P sin(P a) { return gp::apply_op(gp::Op::Sin, a.v); }
P cos(P a) { return gp::apply_op(gp::Op::Cos, a.v); }
P tanh(P a) { return gp::apply_op(gp::Op::Tanh, a.v); }
P exp(P a) { return gp::apply_op(gp::Op::Exp, a.v); }
P sq(P a) { return gp::apply_op(gp::Op::Square, a.v); }
// hyperbolics through exp, as the GP function set has no sinh/cosh
P sinh(P a) { return (exp(a) - exp(-a)) * 0.5; }
P cosh(P a) { return (exp(a) + exp(-a)) * 0.5; }

struct In {
    P K, tM, tm, L;
};

// single-gene PID. The whole tail after 0.09685 sits inside the bracket (only this
// grouping reproduces the printed Kp values).
std::vector<P> sg_pid(const In& x)
{
    const P tM = x.tM, tm = x.tm, L = x.L;
    P kp = 1.4 + 0.09685 * (psqrt(pdiv(tM, cos(tm))) + tanh(-sq(tM) + pdiv(tm, tM)) + cos(pdiv(L * tM, tm)) +
                            q4(tM) - pdiv(L * tM, tm) -
                            sin(1.6e-6 * sq(tM) * (1250 * L + 2117) * (500 * (psqrt(pdiv(L, tM)) - pdiv(L, tm)) + 1877)) +
                            tanh(-L + tm) - sin(tM) - pdiv(6.483756, tM));
    P ki = 1.003 - 0.2452 * psqrt(4 * plog(tM + L) + 2 * tanh(tm) + 3 * tanh(L) + tanh(tM) - 0.8913);
    // ln(cos τ_min) needs the |·| log for cos τ_min < 0; 541/500 = 1.082; τ_max^{5/2} = τ_max²·√τ_max
    P kd = -1.024 + 0.539 * (psqrt(-(pdiv(L, tm) + sq(tm) - 1.082) * plog(cos(tm)) * (-1.031 + cos(tm))) +
                             psqrt(pdiv(sq(L), sq(tM) * psqrt(tM)) + cos(L) + tM) +
                             plog(tanh(pdiv(2.8546 * tm, L)) + cos(L) + pdiv(L, tM)));
    return {kp, ki, kd};
}

// multi-gene PID
std::vector<P> mg_pid(const In& x)
{
    const P tM = x.tM, tm = x.tm, L = x.L;
    // the 0.1138 gene has no printed sign; "+" reproduces the table
    P kp = 1.468 + 0.3362 * (sin(pdiv(L, tM)) - pdiv(L, tm) - psqrt(cos(pdiv(pdiv(L, tm), cos(L) - pdiv(L, tM))))) +
           0.1138 * (2 * plog(tM) - L - pdiv(L, tm) - psqrt(cos(pdiv(sq(tM), cos(tM)))) -
                     psqrt(cos(pdiv(1, tm * cos(L))))) +
           0.4052 * (psqrt(cos(pdiv(cos(tm), sin(pdiv(L, tm)) - pdiv(L, tm)))) + cos(cos(sin(L)))) -
           0.4627 * (psqrt(cos(pdiv(tanh(pdiv(L, tm)), L))) + cos(2 * plog(tM))) + 0.232 * psqrt(plog(cos(tM))) +
           0.414 * q4(cos(pdiv(pdiv(L, tM) - cos(pdiv(L, tm)), sin(pdiv(L, tm)) - pdiv(L, tm)))) -
           0.3325 * q4(cos(pdiv(cos(L) - pdiv(L, tM), cos(L))));
    P ki = 1.426 - 0.1283 * pdiv(L, tm * plog(tm + pdiv(tM, tm))) -
           0.0872 * tanh(sin(plog(tm) + 51.86 + pdiv(cos(tm), L + pdiv(L, tm)))) -
           0.0446 * tanh(sin(pdiv(tM, tm) + tM + 51.86 + pdiv(cos(plog(tm)), 5.806 * tanh(tM)))) -
           0.1572 * plog(tm) - 1.268 * tanh(tanh(tM)) - 0.0437 * plog(sin(tM)) -
           0.003763 * (pdiv(tM, tm) + tM + pdiv(L, tm * cos(tm))) +
           0.0052 * (tanh(tm + pdiv(L, tm * cos(tm))) + pdiv(L, tm * cos(tm)) + plog(cos(pdiv(L, tm))));
    // the 0.9524 gene has unbalanced brackets in print; read as 0.9524·(ln(·)·√(·) + L/τ_max).
    // No grouping reproduces the printed Kd (allowlisted).
    P kd = 0.9524 * (plog(pdiv(tM, tm) * tanh(L - 7.535)) * psqrt(pdiv(tanh(pdiv(tM, tm)), pdiv(L, tM) - 7.432)) +
                     pdiv(L, tM)) +
           6.177 + pdiv(psqrt(L), pdiv(L, tm) - 7.566) + pdiv(0.1826, tM - 7.5439) - tm -
           tanh(pdiv(tM, tm) * exp(pdiv(tM, tm))) -
           0.2212 * (plog(plog(pdiv(tM, tm)) - 4.001 - L) + tanh(cos(0.1247 * pdiv(tM, tm)))) -
           sin(sin(psqrt(plog(L)))) - 0.8712 * (psqrt(L) + cos(psqrt(cos(plog(plog(tm)))))) -
           0.6186 * exp(psqrt(cos(plog(plog(tm))))) -
           0.104216 * pdiv(psqrt(-tanh(tm - pdiv(L, tM))), plog(pdiv(2.391, tm) + 0.8314 - tM)) +
           2.124 * plog(psqrt(exp(tm + plog(tm)) - psqrt(cos(tm)))) -
           0.163 * plog(0.008 * pdiv(tM, tm) * (-946 + 125 * pdiv(L, tM)) * cos(plog(tm)) *
                        psqrt(pdiv(tM - 7.432, L - 7.7285))) +
           pdiv(L, tM) + pdiv(psqrt(tM), pdiv(L, tM) - 8.36327) + psqrt(tM) - tm;
    return {kp, ki, kd};
}

// single-gene FOPID
std::vector<P> sg_fopid(const In& x)
{
    const P tM = x.tM, tm = x.tm, L = x.L;
    // Kp: the fraction term is inside the 0.2775 bracket
    P kp = 1.188 - 0.2775 * (pdiv(L, tm) + tanh(sq(L) + pdiv(L, tm * tM) + pdiv(cos(pdiv(tM, tm)), exp(tM))) +
                             pdiv(psqrt(tanh(pdiv(L, tm)) - tm), (pdiv(plog(pdiv(L, tm)), tM) + 2 * tM) *
                                                                     (2 * sq(plog(tM)) + 2 * pdiv(L, tm * (tM * sq(tM))))));
    // Ki: read as 0.314 − 0.08·(X − Y²)
    P ki = 0.314 - 0.08 * (pdiv(sq(sq(pdiv(tM, tm))), cos(L) * plog(tM) + tanh(tm) + tM) *
                               sq(pdiv(tanh(plog(tM)), 0.254)) -
                           sq(pdiv(plog(0.1851 * sin(tm)), tM)));
    P kd = 0.04877 + 0.2898 * cos(pdiv(tM, tm)) +
           0.1449 * (sq(tm - 1.972) * sq(sin(sin(tM))) + psqrt(sin(pdiv(4.86129, L))) - sin(tM) +
                     psqrt(sin(pdiv(tM, tm))) + psqrt(sin(pdiv(-9.56649, tm))) + plog(sin(pdiv(tM, tm))) +
                     psqrt(plog(pdiv(tM, tm))) + psqrt(sin(pdiv(-9.61668, tm))) - cos(pdiv(L, tM)) +
                     cos(4.735 * pdiv(tM, tm)));
    // the radical covers τ_max·L
    P lam = 0.9974 - 0.002605 * psqrt(tM * L) * (tM - tanh(tm));
    P mu = 2.0205 + 1.708 * (tanh(tanh(tanh(L))) - cos(tanh(pdiv(tM, tm))) - cos(cos(tanh(pdiv(L * tM, tm)))) -
                             cos(tanh(L + pdiv(L, tM) + pdiv(sq(tM), sq(tm)))) +
                             cos(cos(pdiv(L * tm, sq(tM) * exp(tm)))));
    return {kp, ki, kd, lam, mu};
}

// multi-gene FOPID
std::vector<P> mg_fopid(const In& x)
{
    const P tM = x.tM, tm = x.tm, L = x.L;
    P kp = -5.94177 * tanh(q4(plog(7.964 + pdiv(L, tm) - pdiv(tM, tm)))) -
           1.146 * psqrt(sin(sin(sin(sin(sq(pdiv(tM, tm))))))) +
           0.04561 * (cos((-8049 - 1000 * pdiv(L, tm) + 1000 * sq(pdiv(tM, tm))) *
                          (0.001 * pdiv(L * sq(tM), tm * sq(tm)))) +
                      cos(8.757 * pdiv(L * sq(tM), tm * sq(tm))) +
                      psqrt(pdiv(sq(pdiv(tM, tm)) * tanh(pdiv(L, tM)), tanh(pdiv(tM, tm))))) +
           6.5488 - 0.2383 * cos(plog(tanh(pdiv(L, tm) * tanh(L) + sin(tm + pdiv(tM, tm))))) +
           0.24655 * cos(plog(tanh(pdiv(L, tM) + plog(pdiv(sq(L), tM * tm))))) -
           0.1022 * psqrt(pdiv(plog(2 * pdiv(tM, tm)) * pdiv(L * tM, sq(tm)) * sin(pdiv(sq(L), tM * tm)),
                               plog(pdiv(sq(L), tM * tm))) +
                          cos(0.284 + pdiv(sq(tM), L) - psqrt(tm))) +
           0.2571 * (cos(plog(L)) - sin(cos(cos(exp(7.646 * pdiv(L, tM))))));
    // the printed Ki block is garbled ("K_i = 1/K" detached from its body); read with the
    // leading 0.01641 covering the first two genes only. Does not reproduce the table (allowlisted).
    P ki = 1.6428 -
           0.01641 * (plog(plog(L) + pdiv(tM, tm) + plog(tm)) + cos(sq(pdiv(tM, tm)) + pdiv(tM, tm) + pdiv(exp(tM), plog(L))) +
                      plog(tm) + pdiv(tM, tm) + tanh(sq(pdiv(tM, tm))) + plog(pdiv(sq(L), sq(tM)))) -
           0.02497 * exp(tanh(tM) + tanh(exp(tm)) + tanh(3 * tM) + tanh(1.989 + pdiv(exp(L), sq(tm)))) -
           0.00019 * sq(tM) -
           0.00009464 * (sq(pdiv(L, tM * tm)) +
                         pdiv(sq(tM) * sinh(plog(pdiv(L, tm))) + pdiv(tM, tm) + pdiv(exp(pdiv(L, tM)), plog(L)),
                              cosh(plog(pdiv(L, tm))) * cos(plog(tm)))) -
           0.0008462 * pdiv(sq(sq(L)), sq(sq(tM))) + 0.059 * pdiv(tM, tm) +
           0.0295 * (sq(pdiv(tM, tm)) + plog(plog(tm)) + plog(cos(exp(2 * tm)))) +
           0.02669 * plog(tanh(L + pdiv(L, tm * plog(L)))) * (cos(tm) + cos(exp(2 * pdiv(tM, tm))) + plog(tm)) -
           0.03 * (plog(tanh(L + pdiv(L, sq(tM)))) + sq(pdiv(tM, tm)) +
                   9.464e-5 * (pdiv(exp(L), sq(tM)) - sq(tm + pdiv(tM, tm)))) -
           0.03295 * (sq(cos(plog(plog(tm)))) + tanh(pdiv(L, plog(L) + sq(sq(pdiv(tM, tm))))) +
                      cos(plog(pdiv(L, tm)) + pdiv(tM, tm))) -
           sin(-pdiv(sq(L), sq(tM)) + 0.7031 + L) + tm;
    // five nested cosines as printed
    P kd = 3.453 - 4.196 * cos(cos(cos(cos(cos(tm + pdiv(tM, tm)))))) -
           0.3846 * (sin(sin(psqrt(pdiv(tM, tm)))) - tM) +
           0.1009 * plog(pdiv(psqrt(cos(tM)), tM + L - exp(tm))) +
           0.008964 * pdiv(sin(psqrt(pdiv(tM, tm))) + pdiv(L, tM) - cos(tm - tanh(pdiv(L, tm))) + tm,
                           tanh(tanh(tm - pdiv(sq(L), sq(tm))))) -
           0.131 * cos(exp(2 * tm) * (plog(pdiv(L, tM)) - pdiv(L, tm) + L) + cos(-2.021 + pdiv(tM, tm) - sq(pdiv(tM, tm)))) +
           0.08997 * cos(exp(2 * (tm + pdiv(tM, tm))) * (-tm - 2 * pdiv(tM, tm) + tM) +
                         exp(2 * tm) * (-plog(pdiv(L, tM)) + pdiv(L, tm) - L)) +
           0.1828 * cos(exp(2 * tm) * (2 * tm - pdiv(L, tm) + L) + cos(tm));
    P lam = -0.0001 * pdiv(tM, L) + 0.261 * sq(plog(cos(tanh(tM + 6.405)))) + 0.01138 * pdiv(L, tm) +
            0.00264 * plog(pdiv(tM - L, tm)) -
            0.0001788 * (exp(tanh(tm)) * sq(L + tM) + sq(cos(pdiv(sq(L), sq(tm))))) +
            0.004568 * psqrt(exp(tanh(pdiv(L, tm)))) + 0.88968;
    // the e^{e^{0.8896/(2 ln(τ_max/τ_min))}} term explodes for τ_max ≈ τ_min (clamped; allowlisted)
    P mu = 0.876643 * tanh(tanh(L)) +
           0.0055 * pdiv(pdiv(pdiv(tM, tm), tanh(pdiv(L, tm))) + pdiv(cos(exp(pdiv(L, tm))), cos(L - pdiv(L, tm))),
                         plog(pdiv(L, tm))) -
           0.06738 * plog(plog(pdiv(L, tm)) + cos(pdiv(tM, tm))) - 0.2712 * cos(pdiv(tM - L, tm)) +
           0.01116 * exp(exp(pdiv(0.8896, 2 * plog(pdiv(tM, tm))))) +
           0.04845 * plog(sin(sin(pdiv(pdiv(L, tM) + pdiv(L, tm), plog(cos(L)))))) -
           0.0505 * plog(sin(sin(pdiv(pdiv(tM, tm), tanh(pdiv(L, tm)))))) + 0.06646;
    return {kp, ki, kd, lam, mu};
}

}  // namespace

FOPIDParams apply_rule(const RuleKind& kind, const SOPTDParams& p)
{
    p.validate();
    In in{p.K, p.tau_max, p.tau_min, p.L};
    std::vector<P> v;
    if (kind.controller == ControllerKind::PID)
        v = kind.gene == RuleGene::single ? sg_pid(in) : mg_pid(in);
    else
        v = kind.gene == RuleGene::single ? sg_fopid(in) : mg_fopid(in);
    FOPIDParams c;
    c.Kp = v[0].v / p.K;
    c.Ki = v[1].v / p.K;
    c.Kd = v[2].v / p.K;
    if (v.size() == 5) {
        c.lambda = v[3].v;
        c.mu = v[4].v;
    }
    return c;
}

std::vector<std::string> rule_parameter_names(const RuleKind& kind)
{
    if (kind.controller == ControllerKind::PID)
        return {"Kp", "Ki", "Kd"};
    return {"Kp", "Ki", "Kd", "lambda", "mu"};
}

std::vector<std::string> rule_texts(const RuleKind& kind)
{
    if (kind == RuleKind{ControllerKind::PID, RuleGene::single})
        return {
            "1.4 + 0.09685 * (psqrt(tmax / cos(tmin)) + tanh(-tmax^2 + tmin / tmax) + cos(L * tmax / tmin)"
            " + psqrt(psqrt(tmax)) - L * tmax / tmin"
            " - sin(1.6e-6 * tmax^2 * (1250 * L + 2117) * (500 * (psqrt(L / tmax) - L / tmin) + 1877))"
            " + tanh(-L + tmin) - sin(tmax) - 6.483756 / tmax)",
            "1.003 - 0.2452 * psqrt(4 * plog(tmax + L) + 2 * tanh(tmin) + 3 * tanh(L) + tanh(tmax) - 0.8913)",
            "-1.024 + 0.539 * (psqrt(-(L / tmin + tmin^2 - 1.082) * plog(cos(tmin)) * (-1.031 + cos(tmin)))"
            " + psqrt(L^2 / (tmax^2 * psqrt(tmax)) + cos(L) + tmax)"
            " + plog(tanh(2.8546 * tmin / L) + cos(L) + L / tmax))",
        };
    if (kind == RuleKind{ControllerKind::PID, RuleGene::multi})
        return {
            "1.468 + 0.3362 * (sin(L / tmax) - L / tmin - psqrt(cos((L / tmin) / (cos(L) - L / tmax))))"
            " + 0.1138 * (2 * plog(tmax) - L - L / tmin - psqrt(cos(tmax^2 / cos(tmax))) - psqrt(cos(1 / (tmin * cos(L)))))"
            " + 0.4052 * (psqrt(cos(cos(tmin) / (sin(L / tmin) - L / tmin))) + cos(cos(sin(L))))"
            " - 0.4627 * (psqrt(cos(tanh(L / tmin) / L)) + cos(2 * plog(tmax))) + 0.232 * psqrt(plog(cos(tmax)))"
            " + 0.414 * psqrt(psqrt(cos((L / tmax - cos(L / tmin)) / (sin(L / tmin) - L / tmin))))"
            " - 0.3325 * psqrt(psqrt(cos((cos(L) - L / tmax) / cos(L))))",
            "1.426 - 0.1283 * (L / (tmin * plog(tmin + tmax / tmin)))"
            " - 0.0872 * tanh(sin(plog(tmin) + 51.86 + cos(tmin) / (L + L / tmin)))"
            " - 0.0446 * tanh(sin(tmax / tmin + tmax + 51.86 + cos(plog(tmin)) / (5.806 * tanh(tmax))))"
            " - 0.1572 * plog(tmin) - 1.268 * tanh(tanh(tmax)) - 0.0437 * plog(sin(tmax))"
            " - 0.003763 * (tmax / tmin + tmax + L / (tmin * cos(tmin)))"
            " + 0.0052 * (tanh(tmin + L / (tmin * cos(tmin))) + L / (tmin * cos(tmin)) + plog(cos(L / tmin)))",
            "0.9524 * (plog(tmax / tmin * tanh(L - 7.535)) * psqrt(tanh(tmax / tmin) / (L / tmax - 7.432)) + L / tmax)"
            " + 6.177 + psqrt(L) / (L / tmin - 7.566) + 0.1826 / (tmax - 7.5439) - tmin"
            " - tanh(tmax / tmin * exp(tmax / tmin))"
            " - 0.2212 * (plog(plog(tmax / tmin) - 4.001 - L) + tanh(cos(0.1247 * (tmax / tmin))))"
            " - sin(sin(psqrt(plog(L)))) - 0.8712 * (psqrt(L) + cos(psqrt(cos(plog(plog(tmin))))))"
            " - 0.6186 * exp(psqrt(cos(plog(plog(tmin)))))"
            " - 0.104216 * (psqrt(-tanh(tmin - L / tmax)) / plog(2.391 / tmin + 0.8314 - tmax))"
            " + 2.124 * plog(psqrt(exp(tmin + plog(tmin)) - psqrt(cos(tmin))))"
            " - 0.163 * plog(0.008 * (tmax / tmin) * (-946 + 125 * (L / tmax)) * cos(plog(tmin))"
            " * psqrt((tmax - 7.432) / (L - 7.7285)))"
            " + L / tmax + psqrt(tmax) / (L / tmax - 8.36327) + psqrt(tmax) - tmin",
        };
    if (kind == RuleKind{ControllerKind::FOPID, RuleGene::single})
        return {
            "1.188 - 0.2775 * (L / tmin + tanh(L^2 + L / (tmin * tmax) + cos(tmax / tmin) / exp(tmax))"
            " + psqrt(tanh(L / tmin) - tmin) / ((plog(L / tmin) / tmax + 2 * tmax)"
            " * (2 * plog(tmax)^2 + 2 * (L / (tmin * tmax^3)))))",
            "0.314 - 0.08 * ((tmax / tmin)^4 / (cos(L) * plog(tmax) + tanh(tmin) + tmax) * (tanh(plog(tmax)) / 0.254)^2"
            " - (plog(0.1851 * sin(tmin)) / tmax)^2)",
            "0.04877 + 0.2898 * cos(tmax / tmin) + 0.1449 * ((tmin - 1.972)^2 * sin(sin(tmax))^2"
            " + psqrt(sin(4.86129 / L)) - sin(tmax) + psqrt(sin(tmax / tmin)) + psqrt(sin(-9.56649 / tmin))"
            " + plog(sin(tmax / tmin)) + psqrt(plog(tmax / tmin)) + psqrt(sin(-9.61668 / tmin)) - cos(L / tmax)"
            " + cos(4.735 * (tmax / tmin)))",
            "0.9974 - 0.002605 * psqrt(tmax * L) * (tmax - tanh(tmin))",
            "2.0205 + 1.708 * (tanh(tanh(tanh(L))) - cos(tanh(tmax / tmin)) - cos(cos(tanh(L * tmax / tmin)))"
            " - cos(tanh(L + L / tmax + tmax^2 / tmin^2)) + cos(cos(L * tmin / (tmax^2 * exp(tmin)))))",
        };
    return {
        "-5.94177 * tanh(psqrt(psqrt(plog(7.964 + L / tmin - tmax / tmin))))"
        " - 1.146 * psqrt(sin(sin(sin(sin((tmax / tmin)^2)))))"
        " + 0.04561 * (cos((-8049 - 1000 * (L / tmin) + 1000 * (tmax / tmin)^2) * (0.001 * (L * tmax^2 / tmin^3)))"
        " + cos(8.757 * (L * tmax^2 / tmin^3)) + psqrt((tmax / tmin)^2 * tanh(L / tmax) / tanh(tmax / tmin)))"
        " + 6.5488 - 0.2383 * cos(plog(tanh(L / tmin * tanh(L) + sin(tmin + tmax / tmin))))"
        " + 0.24655 * cos(plog(tanh(L / tmax + plog(L^2 / (tmax * tmin)))))"
        " - 0.1022 * psqrt(plog(2 * (tmax / tmin)) * (L * tmax / tmin^2) * sin(L^2 / (tmax * tmin)) / plog(L^2 / (tmax * tmin))"
        " + cos(0.284 + tmax^2 / L - psqrt(tmin)))"
        " + 0.2571 * (cos(plog(L)) - sin(cos(cos(exp(7.646 * (L / tmax))))))",
        "1.6428 - 0.01641 * (plog(plog(L) + tmax / tmin + plog(tmin)) + cos((tmax / tmin)^2 + tmax / tmin + exp(tmax) / plog(L))"
        " + plog(tmin) + tmax / tmin + tanh((tmax / tmin)^2) + plog(L^2 / tmax^2))"
        " - 0.02497 * exp(tanh(tmax) + tanh(exp(tmin)) + tanh(3 * tmax) + tanh(1.989 + exp(L) / tmin^2))"
        " - 0.00019 * tmax^2"
        " - 0.00009464 * ((L / (tmax * tmin))^2 + (tmax^2 * ((exp(plog(L / tmin)) - exp(-plog(L / tmin))) * 0.5)"
        " + tmax / tmin + exp(L / tmax) / plog(L))"
        " / (((exp(plog(L / tmin)) + exp(-plog(L / tmin))) * 0.5) * cos(plog(tmin))))"
        " - 0.0008462 * (L^4 / tmax^4) + 0.059 * (tmax / tmin)"
        " + 0.0295 * ((tmax / tmin)^2 + plog(plog(tmin)) + plog(cos(exp(2 * tmin))))"
        " + 0.02669 * plog(tanh(L + L / (tmin * plog(L)))) * (cos(tmin) + cos(exp(2 * (tmax / tmin))) + plog(tmin))"
        " - 0.03 * (plog(tanh(L + L / tmax^2)) + (tmax / tmin)^2 + 9.464e-5 * (exp(L) / tmax^2 - (tmin + tmax / tmin)^2))"
        " - 0.03295 * (cos(plog(plog(tmin)))^2 + tanh(L / (plog(L) + (tmax / tmin)^4)) + cos(plog(L / tmin) + tmax / tmin))"
        " - sin(-(L^2 / tmax^2) + 0.7031 + L) + tmin",
        "3.453 - 4.196 * cos(cos(cos(cos(cos(tmin + tmax / tmin)))))"
        " - 0.3846 * (sin(sin(psqrt(tmax / tmin))) - tmax)"
        " + 0.1009 * plog(psqrt(cos(tmax)) / (tmax + L - exp(tmin)))"
        " + 0.008964 * ((sin(psqrt(tmax / tmin)) + L / tmax - cos(tmin - tanh(L / tmin)) + tmin)"
        " / tanh(tanh(tmin - L^2 / tmin^2)))"
        " - 0.131 * cos(exp(2 * tmin) * (plog(L / tmax) - L / tmin + L) + cos(-2.021 + tmax / tmin - (tmax / tmin)^2))"
        " + 0.08997 * cos(exp(2 * (tmin + tmax / tmin)) * (-tmin - 2 * (tmax / tmin) + tmax)"
        " + exp(2 * tmin) * (-plog(L / tmax) + L / tmin - L))"
        " + 0.1828 * cos(exp(2 * tmin) * (2 * tmin - L / tmin + L) + cos(tmin))",
        "-0.0001 * (tmax / L) + 0.261 * plog(cos(tanh(tmax + 6.405)))^2 + 0.01138 * (L / tmin)"
        " + 0.00264 * plog((tmax - L) / tmin)"
        " - 0.0001788 * (exp(tanh(tmin)) * (L + tmax)^2 + cos(L^2 / tmin^2)^2)"
        " + 0.004568 * psqrt(exp(tanh(L / tmin))) + 0.88968",
        "0.876643 * tanh(tanh(L))"
        " + 0.0055 * ((tmax / tmin / tanh(L / tmin) + cos(exp(L / tmin)) / cos(L - L / tmin)) / plog(L / tmin))"
        " - 0.06738 * plog(plog(L / tmin) + cos(tmax / tmin)) - 0.2712 * cos((tmax - L) / tmin)"
        " + 0.01116 * exp(exp(0.8896 / (2 * plog(tmax / tmin))))"
        " + 0.04845 * plog(sin(sin((L / tmax + L / tmin) / plog(cos(L)))))"
        " - 0.0505 * plog(sin(sin(tmax / tmin / tanh(L / tmin)))) + 0.06646",
    };
}

// ---- surfaces ----

SurfaceVar surface_var_from_string(const std::string& s)
{
    if (s == "tau_max")
        return SurfaceVar::tau_max;
    if (s == "tau_min")
        return SurfaceVar::tau_min;
    if (s == "L")
        return SurfaceVar::L;
    throw ParameterError("surface axis must be tau_max, tau_min or L");
}

std::string to_string(SurfaceVar v)
{
    switch (v) {
    case SurfaceVar::tau_max: return "tau_max";
    case SurfaceVar::tau_min: return "tau_min";
    default: return "L";
    }
}

std::vector<double> SurfaceAxis::points() const
{
    if (count < 1 || !(lo <= hi))
        throw ParameterError("surface axis needs count >= 1 and lo <= hi");
    if (count == 1)
        return {lo};
    std::vector<double> p(count);
    for (int i = 0; i < count; ++i)
        p[i] = lo + (hi - lo) * i / (count - 1);
    return p;
}

namespace {
void set_var(SOPTDParams& p, SurfaceVar v, double x)
{
    switch (v) {
    case SurfaceVar::tau_max: p.tau_max = x; break;
    case SurfaceVar::tau_min: p.tau_min = x; break;
    case SurfaceVar::L: p.L = x; break;
    }
}
}  // namespace

std::vector<SurfacePoint> rule_surface_grid(const RuleKind& kind, const SurfaceAxis& x, const SurfaceAxis& y,
                                            const SOPTDParams& base)
{
    if (x.var == y.var)
        throw ParameterError("surface axes must differ");
    std::vector<SurfacePoint> out;
    for (double yv : y.points()) {
        for (double xv : x.points()) {
            SurfacePoint sp;
            sp.at = base;
            set_var(sp.at, x.var, xv);
            set_var(sp.at, y.var, yv);
            try {
                sp.params = apply_rule(kind, sp.at);
                sp.valid = true;
            } catch (const ParameterError&) {
                sp.valid = false;
            }
            out.push_back(sp);
        }
    }
    return out;
}

void write_surface_csv(const std::string& path, const std::vector<SurfacePoint>& grid)
{
    std::ofstream os(path);
    if (!os)
        throw ParameterError("cannot write " + path);
    os << "K,tau_max,tau_min,L,valid,Kp,Ki,Kd,lambda,mu\n";
    for (const auto& p : grid) {
        os << fmt::format("{},{},{},{},{}", p.at.K, p.at.tau_max, p.at.tau_min, p.at.L, p.valid ? 1 : 0);
        if (p.valid)
            os << fmt::format(",{},{},{},{},{}\n", p.params.Kp, p.params.Ki, p.params.Kd, p.params.lambda,
                              p.params.mu);
        else
            os << ",,,,,\n";
    }
}

}  // namespace fractune
