#pragma once

#include <complex>
#include <span>
#include <string>
#include <vector>

namespace fractune {

using cplx = std::complex<double>;
using Poly = std::vector<double>;  // highest power first

namespace poly {
Poly trim(Poly p);  // drop leading zeros, keeps at least one coefficient
Poly mul(const Poly& a, const Poly& b);
Poly add(const Poly& a, const Poly& b);
Poly scale(const Poly& a, double c);
Poly pow(const Poly& a, int n);
cplx eval(const Poly& p, cplx s);
double eval(const Poly& p, double x);
int degree(const Poly& p);  // of the trimmed polynomial; zero poly -> 0
bool is_zero(const Poly& p);
}  // namespace poly

class RationalTF {
public:
    RationalTF();  // unity
    RationalTF(Poly num, Poly den);

    const Poly& num() const { return num_; }
    const Poly& den() const { return den_; }
    int num_degree() const { return poly::degree(num_); }
    int den_degree() const { return poly::degree(den_); }
    bool proper() const { return num_degree() <= den_degree() || poly::is_zero(num_); }
    bool strictly_proper() const { return num_degree() < den_degree() || poly::is_zero(num_); }

    cplx operator()(cplx s) const;
    double dc_gain() const;

    RationalTF operator*(const RationalTF& o) const;
    RationalTF operator+(const RationalTF& o) const;
    RationalTF operator-(const RationalTF& o) const;
    RationalTF scaled(double c) const;

private:
    Poly num_;
    Poly den_;
};

class DelayedTF {
public:
    DelayedTF() = default;
    DelayedTF(RationalTF tf, double delay);

    const RationalTF& tf() const { return tf_; }
    double delay() const { return delay_; }

private:
    RationalTF tf_;
    double delay_ = 0.0;
};

struct FreqSample {
    double omega;
    double re;
    double im;
};

enum class DelayMode { exact, pade3 };

RationalTF pade3_delay(double L);

// tf(jω)·delay(jω)
cplx freq_point(const DelayedTF& p, double omega, DelayMode mode);
std::vector<FreqSample> freq_response(const DelayedTF& p, std::span<const double> omegas,
                                      DelayMode mode);

// rational part times pade3 of the delay
RationalTF with_pade(const DelayedTF& p);

bool is_hurwitz(const Poly& den);  // Routh–Hurwitz, strict (open LHP)

double h2_norm(const RationalTF& p);             // gramian route
double h2_norm_quadrature(const RationalTF& p);  // ∫|G(jω)|² numerically
// ‖a − b‖₂ built from a block-diagonal realization, no polynomial subtraction
double h2_norm_difference(const RationalTF& a, const RationalTF& b);

DelayedTF make_foptd(double K, double tau, double L);
DelayedTF make_soptd(double K, double tau_max, double tau_min, double L);

enum class Family { P1, P2, P3, P4 };

struct TestBenchSpec {
    Family family = Family::P1;
    double param = 3;

    void validate() const;
    std::string label() const;  // "P1 n=3", "P2 a=0.5" ...
    std::string key() const;    // "P1:3"
    static TestBenchSpec parse(const std::string& key);
    bool operator==(const TestBenchSpec&) const = default;
};

std::string family_name(Family f);
Family family_from_name(const std::string& s);

// gain·(1 + zero·s)·e^{-Ls} / Π(τ_i s + 1)
struct FactoredPlant {
    double gain = 1.0;
    std::vector<double> taus;
    double zero = 0.0;
    double delay = 0.0;

    DelayedTF expand() const;
};

FactoredPlant make_testbench_factored(const TestBenchSpec& spec);
DelayedTF make_testbench(const TestBenchSpec& spec);

// the 38 plants, in table order
std::vector<TestBenchSpec> test_bench();

}  // namespace fractune
