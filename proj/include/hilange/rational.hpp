#pragma once

#include <boost/multiprecision/cpp_int.hpp>
#include <complex>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>

namespace hilange {

using Int = boost::multiprecision::cpp_int;
using Rat = boost::multiprecision::cpp_rational;

inline double to_double(const Rat& r) { return r.template convert_to<double>(); }

// Doubles are dyadic rationals, so this conversion is exact.
inline Rat rat_from_double(double x) {
    if (!std::isfinite(x)) throw std::invalid_argument("rat_from_double: non-finite input");
    return Rat(x);
}

// Exact square root of a nonnegative rational, if it is a perfect square.
inline std::optional<Rat> exact_sqrt(const Rat& r) {
    if (r < 0) return std::nullopt;
    Int num = boost::multiprecision::numerator(r);
    Int den = boost::multiprecision::denominator(r);
    Int sn = boost::multiprecision::sqrt(num);
    Int sd = boost::multiprecision::sqrt(den);
    if (sn * sn != num || sd * sd != den) return std::nullopt;
    return Rat(sn, sd);
}

// Complex number with exact rational parts. Closed under +,-,*,/.
struct Coeff {
    Rat re{0};
    Rat im{0};

    Coeff() = default;
    Coeff(Rat r) : re(std::move(r)) {}
    Coeff(Rat r, Rat i) : re(std::move(r)), im(std::move(i)) {}
    Coeff(int n) : re(n) {}
    Coeff(long n) : re(n) {}

    bool is_zero() const { return re == 0 && im == 0; }
    bool is_real() const { return im == 0; }

    Coeff conj() const { return {re, -im}; }
    Rat norm2() const { return re * re + im * im; }

    Coeff operator-() const { return {-re, -im}; }
    Coeff& operator+=(const Coeff& o) { re += o.re; im += o.im; return *this; }
    Coeff& operator-=(const Coeff& o) { re -= o.re; im -= o.im; return *this; }
    Coeff& operator*=(const Coeff& o) {
        Rat r = re * o.re - im * o.im;
        im = re * o.im + im * o.re;
        re = std::move(r);
        return *this;
    }
    Coeff& operator/=(const Coeff& o) {
        Rat n2 = o.norm2();
        if (n2 == 0) throw std::domain_error("Coeff: division by zero");
        Rat r = (re * o.re + im * o.im) / n2;
        im = (im * o.re - re * o.im) / n2;
        re = std::move(r);
        return *this;
    }

    friend Coeff operator+(Coeff a, const Coeff& b) { return a += b; }
    friend Coeff operator-(Coeff a, const Coeff& b) { return a -= b; }
    friend Coeff operator*(Coeff a, const Coeff& b) { return a *= b; }
    friend Coeff operator/(Coeff a, const Coeff& b) { return a /= b; }
    friend bool operator==(const Coeff& a, const Coeff& b) { return a.re == b.re && a.im == b.im; }
    friend bool operator!=(const Coeff& a, const Coeff& b) { return !(a == b); }
};

inline Coeff imag_unit() { return Coeff(Rat(0), Rat(1)); }

inline std::complex<double> to_complex(const Coeff& c) { return {to_double(c.re), to_double(c.im)}; }

inline std::string to_string(const Rat& r) {
    std::ostringstream os;
    os << r;
    return os.str();
}

inline std::string to_string(const Coeff& c) {
    if (c.im == 0) return to_string(c.re);
    std::ostringstream os;
    os << "(" << c.re << (c.im < 0 ? "-" : "+") << boost::multiprecision::abs(c.im) << "i)";
    return os.str();
}

}  // namespace hilange
