#include "fractune/lti.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "fractune/error.hpp"
#include "fractune/state_space.hpp"

namespace fractune {

namespace poly {

Poly trim(Poly p)
{
    auto it = std::find_if(p.begin(), p.end(), [](double c) { return c != 0.0; });
    if (it == p.end())
        return Poly{0.0};
    p.erase(p.begin(), it);
    return p;
}

Poly mul(const Poly& a, const Poly& b)
{
    if (a.empty() || b.empty())
        return Poly{0.0};
    Poly r(a.size() + b.size() - 1, 0.0);
    for (size_t i = 0; i < a.size(); ++i)
        for (size_t j = 0; j < b.size(); ++j)
            r[i + j] += a[i] * b[j];
    return r;
}

Poly add(const Poly& a, const Poly& b)
{
    // align on the constant term
    size_t n = std::max(a.size(), b.size());
    Poly r(n, 0.0);
    for (size_t i = 0; i < a.size(); ++i)
        r[n - a.size() + i] += a[i];
    for (size_t i = 0; i < b.size(); ++i)
        r[n - b.size() + i] += b[i];
    return r;
}

Poly scale(const Poly& a, double c)
{
    Poly r = a;
    for (auto& x : r)
        x *= c;
    return r;
}

Poly pow(const Poly& a, int n)
{
    Poly r{1.0};
    for (int i = 0; i < n; ++i)
        r = mul(r, a);
    return r;
}

cplx eval(const Poly& p, cplx s)
{
    cplx acc = 0.0;
    for (double c : p)
        acc = acc * s + c;
    return acc;
}

double eval(const Poly& p, double x)
{
    double acc = 0.0;
    for (double c : p)
        acc = acc * x + c;
    return acc;
}

int degree(const Poly& p)
{
    Poly t = trim(p);
    return static_cast<int>(t.size()) - 1;
}

bool is_zero(const Poly& p)
{
    return std::all_of(p.begin(), p.end(), [](double c) { return c == 0.0; });
}

}  // namespace poly

RationalTF::RationalTF() : num_{1.0}, den_{1.0} {}

RationalTF::RationalTF(Poly num, Poly den)
{
    if (den.empty() || poly::is_zero(den))
        throw ParameterError("transfer function denominator is empty or zero");
    for (double c : num)
        if (!std::isfinite(c))
            throw ParameterError("non-finite numerator coefficient");
    for (double c : den)
        if (!std::isfinite(c))
            throw ParameterError("non-finite denominator coefficient");
    num_ = num.empty() ? Poly{0.0} : poly::trim(std::move(num));
    den_ = poly::trim(std::move(den));
}

cplx RationalTF::operator()(cplx s) const
{
    cplx d = poly::eval(den_, s);
    if (d == 0.0)
        throw EvaluationError("evaluation at a pole");
    return poly::eval(num_, s) / d;
}

double RationalTF::dc_gain() const
{
    double d = den_.back();
    if (d == 0.0)
        throw EvaluationError("dc gain undefined: pole at the origin");
    return num_.back() / d;
}

RationalTF RationalTF::operator*(const RationalTF& o) const
{
    return {poly::mul(num_, o.num_), poly::mul(den_, o.den_)};
}

RationalTF RationalTF::operator+(const RationalTF& o) const
{
    if (den_ == o.den_)
        return {poly::add(num_, o.num_), den_};
    return {poly::add(poly::mul(num_, o.den_), poly::mul(o.num_, den_)), poly::mul(den_, o.den_)};
}

RationalTF RationalTF::operator-(const RationalTF& o) const
{
    return *this + o.scaled(-1.0);
}

RationalTF RationalTF::scaled(double c) const
{
    return {poly::scale(num_, c), den_};
}

DelayedTF::DelayedTF(RationalTF tf, double delay) : tf_(std::move(tf)), delay_(delay)
{
    if (!(delay >= 0.0) || !std::isfinite(delay))
        throw ParameterError("delay must be finite and >= 0");
}

RationalTF pade3_delay(double L)
{
    if (!(L >= 0.0) || !std::isfinite(L))
        throw ParameterError("pade3_delay: L must be >= 0");
    if (L == 0.0)
        return {{120.0}, {120.0}};
    double L2 = L * L, L3 = L2 * L;
    return {{-L3, 12 * L2, -60 * L, 120}, {L3, 12 * L2, 60 * L, 120}};
}

cplx freq_point(const DelayedTF& p, double omega, DelayMode mode)
{
    if (!(omega > 0.0))
        throw ParameterError("frequency must be > 0");
    cplx jw{0.0, omega};
    cplx g = p.tf()(jw);
    double L = p.delay();
    if (L == 0.0)
        return g;
    if (mode == DelayMode::exact)
        return g * std::polar(1.0, -omega * L);
    return g * pade3_delay(L)(jw);
}

std::vector<FreqSample> freq_response(const DelayedTF& p, std::span<const double> omegas,
                                      DelayMode mode)
{
    std::vector<FreqSample> out;
    out.reserve(omegas.size());
    for (double w : omegas) {
        cplx v = freq_point(p, w, mode);
        out.push_back({w, v.real(), v.imag()});
    }
    return out;
}

RationalTF with_pade(const DelayedTF& p)
{
    if (p.delay() == 0.0)
        return p.tf();
    return p.tf() * pade3_delay(p.delay());
}

bool is_hurwitz(const Poly& den_in)
{
    Poly d = poly::trim(den_in);
    if (poly::is_zero(d))
        return false;
    if (d.front() < 0)
        d = poly::scale(d, -1.0);
    const size_t n = d.size() - 1;
    if (n == 0)
        return true;
    // necessary: all coefficients strictly positive
    for (double c : d)
        if (!(c > 0.0))
            return false;
    // Routh array; a zero (or sign change) in the first column means not strictly stable
    std::vector<double> r0, r1;
    for (size_t i = 0; i <= n; i += 2)
        r0.push_back(d[i]);
    for (size_t i = 1; i <= n; i += 2)
        r1.push_back(d[i]);
    for (size_t row = 1; row <= n; ++row) {
        if (r1.empty() || !(r1[0] > 0.0))
            return false;
        std::vector<double> next;
        for (size_t k = 0; k + 1 < r0.size(); ++k) {
            double b = (k + 1 < r1.size()) ? r1[k + 1] : 0.0;
            next.push_back((r1[0] * r0[k + 1] - r0[0] * b) / r1[0]);
        }
        r0 = std::move(r1);
        r1 = std::move(next);
    }
    return true;
}

namespace {

void check_h2_domain(const RationalTF& p)
{
    if (!p.strictly_proper())
        throw DomainError("h2_norm: transfer function is not strictly proper");
    if (!is_hurwitz(p.den()))
        throw DomainError("h2_norm: transfer function is not Hurwitz stable");
}

double gramian_norm(const StateSpace& ss)
{
    if (ss.order() == 0)
        return 0.0;
    Eigen::MatrixXd Q = ss.B * ss.B.transpose();
    Eigen::MatrixXd P = lyapunov(ss.A, Q);
    double v = (ss.C * P * ss.C.transpose())(0, 0);
    return std::sqrt(std::max(0.0, v));
}

}  // namespace

double h2_norm(const RationalTF& p)
{
    if (poly::is_zero(p.num()))
        return 0.0;
    check_h2_domain(p);
    return gramian_norm(realize(p));
}

double h2_norm_quadrature(const RationalTF& p)
{
    if (poly::is_zero(p.num()))
        return 0.0;
    check_h2_domain(p);
    // ‖G‖² = (1/π) ∫₀^∞ |G(jω)|² dω, ω = tan θ
    auto f = [&](double th) {
        if (th >= M_PI / 2)
            return 0.0;
        double w = std::tan(th);
        double c = std::cos(th);
        return std::norm(p(cplx{0.0, w})) / (c * c);
    };
    double err = 0;
    double v = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, 0.0, M_PI / 2, 25,
                                                                             1e-13, &err);
    return std::sqrt(v / M_PI);
}

double h2_norm_difference(const RationalTF& a, const RationalTF& b)
{
    bool za = poly::is_zero(a.num()), zb = poly::is_zero(b.num());
    if (za && zb)
        return 0.0;
    if (za)
        return h2_norm(b);
    if (zb)
        return h2_norm(a);
    for (const auto* t : {&a, &b}) {
        if (!t->proper())
            throw DomainError("h2 difference: improper operand");
        if (!is_hurwitz(t->den()))
            throw DomainError("h2 difference: operand is not Hurwitz stable");
    }
    StateSpace sa = realize(a), sb = realize(b);
    // feedthroughs must cancel, otherwise the difference has infinite H2 norm
    if (std::abs(sa.D - sb.D) > 1e-12 * std::max({1.0, std::abs(sa.D), std::abs(sb.D)}))
        throw DomainError("h2 difference: difference is not strictly proper");
    sb.C = -sb.C;
    sb.D = -sb.D;
    return gramian_norm(parallel(sa, sb));
}

DelayedTF make_foptd(double K, double tau, double L)
{
    if (!(tau > 0.0))
        throw ParameterError("FOPTD time constant must be > 0");
    if (!(L >= 0.0))
        throw ParameterError("FOPTD delay must be >= 0");
    return {RationalTF({K}, {tau, 1.0}), L};
}

DelayedTF make_soptd(double K, double tau_max, double tau_min, double L)
{
    if (!(tau_min > 0.0) || !(tau_max >= tau_min))
        throw ParameterError("SOPTD requires tau_max >= tau_min > 0");
    if (!(L >= 0.0))
        throw ParameterError("SOPTD delay must be >= 0");
    return {RationalTF({K}, {tau_max * tau_min, tau_max + tau_min, 1.0}), L};
}

std::string family_name(Family f)
{
    switch (f) {
    case Family::P1: return "P1";
    case Family::P2: return "P2";
    case Family::P3: return "P3";
    case Family::P4: return "P4";
    }
    return "?";
}

Family family_from_name(const std::string& s)
{
    if (s == "P1") return Family::P1;
    if (s == "P2") return Family::P2;
    if (s == "P3") return Family::P3;
    if (s == "P4") return Family::P4;
    throw ParameterError("unknown plant family '" + s + "'");
}

void TestBenchSpec::validate() const
{
    if (!std::isfinite(param))
        throw ParameterError("test-bench parameter must be finite");
    if (family == Family::P1) {
        if (param < 1 || param != std::floor(param))
            throw ParameterError("P1 requires an integer order n >= 1");
        if (param > 60)
            throw ParameterError("P1 order too large");
    } else if (!(param > 0.0)) {
        throw ParameterError(family_name(family) + " requires a parameter > 0");
    }
}

static std::string short_num(double v)
{
    std::ostringstream os;
    os << v;
    return os.str();
}

std::string TestBenchSpec::label() const
{
    const char* sym = family == Family::P1 ? "n" : family == Family::P3 ? "T" : "a";
    return family_name(family) + " " + sym + "=" + short_num(param);
}

std::string TestBenchSpec::key() const
{
    return family_name(family) + ":" + short_num(param);
}

TestBenchSpec TestBenchSpec::parse(const std::string& key)
{
    auto pos = key.find_first_of(":= ");
    if (pos == std::string::npos)
        throw ParameterError("plant key must look like P1:3, got '" + key + "'");
    TestBenchSpec s;
    s.family = family_from_name(key.substr(0, pos));
    try {
        s.param = std::stod(key.substr(pos + 1));
    } catch (const std::exception&) {
        throw ParameterError("bad plant parameter in '" + key + "'");
    }
    s.validate();
    return s;
}

DelayedTF FactoredPlant::expand() const
{
    Poly den{1.0};
    for (double t : taus) {
        if (!(t > 0.0))
            throw ParameterError("plant time constants must be > 0");
        den = poly::mul(den, {t, 1.0});
    }
    Poly num = zero == 0.0 ? Poly{gain} : Poly{gain * zero, gain};
    return {RationalTF(num, den), delay};
}

FactoredPlant make_testbench_factored(const TestBenchSpec& spec)
{
    spec.validate();
    FactoredPlant p;
    const double a = spec.param;
    switch (spec.family) {
    case Family::P1:
        p.taus.assign(static_cast<size_t>(a), 1.0);
        break;
    case Family::P2:
        p.taus = {1.0, a, a * a, a * a * a};
        break;
    case Family::P3:
        p.taus = {1.0, a, a};
        break;
    case Family::P4:
        p.taus = {1.0, 1.0, 1.0};
        p.zero = -a;  // (1 - αs)
        break;
    }
    return p;
}

DelayedTF make_testbench(const TestBenchSpec& spec)
{
    return make_testbench_factored(spec).expand();
}

std::vector<TestBenchSpec> test_bench()
{
    std::vector<TestBenchSpec> out;
    for (double n : {3, 4, 5, 6, 7, 8, 10, 20})
        out.push_back({Family::P1, n});
    for (double a : {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9})
        out.push_back({Family::P2, a});
    for (double t : {0.005, 0.01, 0.02, 0.05, 0.1, 0.2, 0.5, 2.0, 5.0, 10.0})
        out.push_back({Family::P3, t});
    for (double a : {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0, 1.1})
        out.push_back({Family::P4, a});
    return out;
}

}  // namespace fractune
