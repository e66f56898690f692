#pragma once

#include <cctype>
#include <stdexcept>
#include <string>
#include <string_view>

#include "ops.hpp"

namespace hilange {

// Text form of operator expressions.
//   atom     := rational | "i" | mode-op | "(" expr ")"
//   mode-op  := letter "d"?          letters a..z except d (dagger marker) and i
//   factor   := atom ("^" integer)?
//   term     := factor+              juxtaposition or "*" multiplies
//   expr     := ["-"] term (("+"|"-") term)*
// "ad" is the raising operator on mode a; "3/2 i ad^2 a" parses as (3i/2) ad ad a.
namespace detail {

class Parser {
   public:
    explicit Parser(std::string_view text) : m_text(text) {}

    OperatorExpr parse() {
        OperatorExpr e = parse_expr();
        skip_space();
        if (m_pos != m_text.size()) fail("trailing input");
        return e;
    }

   private:
    std::string_view m_text;
    size_t m_pos = 0;

    [[noreturn]] void fail(const std::string& what) const {
        throw std::invalid_argument("operator text, position " + std::to_string(m_pos) + ": " + what);
    }
    void skip_space() {
        while (m_pos < m_text.size() && std::isspace((unsigned char)m_text[m_pos])) ++m_pos;
    }
    char peek() const { return m_pos < m_text.size() ? m_text[m_pos] : '\0'; }
    bool starts_atom() {
        skip_space();
        char c = peek();
        return std::isdigit((unsigned char)c) || c == '(' || c == 'i' || (std::islower((unsigned char)c) && c != 'd');
    }

    Int parse_int() {
        skip_space();
        if (!std::isdigit((unsigned char)peek())) fail("expected integer");
        Int v = 0;
        while (std::isdigit((unsigned char)peek())) {
            v = v * 10 + (m_text[m_pos] - '0');
            ++m_pos;
        }
        return v;
    }

    OperatorExpr parse_atom() {
        skip_space();
        char c = peek();
        if (c == '(') {
            ++m_pos;
            OperatorExpr e = parse_expr();
            skip_space();
            if (peek() != ')') fail("expected )");
            ++m_pos;
            return e;
        }
        if (std::isdigit((unsigned char)c)) {
            Int num = parse_int();
            Int den = 1;
            skip_space();
            if (peek() == '/') {
                ++m_pos;
                den = parse_int();
                if (den == 0) fail("zero denominator");
            }
            return OperatorExpr(Coeff(Rat(num, den)));
        }
        if (c == 'i') {
            ++m_pos;
            return OperatorExpr(imag_unit());
        }
        if (std::islower((unsigned char)c) && c != 'd') {
            Mode mode = c;
            ++m_pos;
            bool dagger = peek() == 'd';
            if (dagger) ++m_pos;
            return dagger ? create(mode) : annihilate(mode);
        }
        fail("expected atom");
    }

    OperatorExpr parse_factor() {
        OperatorExpr base = parse_atom();
        skip_space();
        if (peek() == '^') {
            ++m_pos;
            skip_space();
            bool neg = peek() == '-';
            if (neg) fail("negative exponent");
            Int e = parse_int();
            if (e > 64) fail("exponent too large");
            OperatorExpr out = identity();
            for (Int k = 0; k < e; ++k) out = out * base;
            return out;
        }
        return base;
    }

    OperatorExpr parse_term() {
        OperatorExpr out = parse_factor();
        while (true) {
            skip_space();
            if (peek() == '*') {
                ++m_pos;
                out = out * parse_factor();
            } else if (starts_atom()) {
                out = out * parse_factor();
            } else {
                return out;
            }
        }
    }

    OperatorExpr parse_expr() {
        skip_space();
        bool neg = peek() == '-';
        if (neg) ++m_pos;
        OperatorExpr out = parse_term();
        if (neg) out = -out;
        while (true) {
            skip_space();
            char c = peek();
            if (c != '+' && c != '-') return out;
            ++m_pos;
            OperatorExpr t = parse_term();
            out = c == '+' ? out + t : out - t;
        }
    }
};

}  // namespace detail

inline OperatorExpr parse_operator(std::string_view text) { return detail::Parser(text).parse(); }

// Emits the grammar above, so parse_operator(text_form(e)) == e.
namespace detail {

// Magnitude of a real or pure-imaginary coefficient as a factor; empty for 1.
inline std::string coeff_magnitude(const Coeff& c) {
    if (c.is_real()) return c.re == 1 ? "" : to_string(c.re);
    if (c.im == 1) return "i";
    return to_string(c.im) + " i";
}

}  // namespace detail

inline std::string text_form(const OperatorExpr& e) {
    if (e.is_zero()) return "0";
    std::string out;
    for (const auto& [mono, coeff] : e.terms()) {
        std::string body;
        for (const auto& [mode, p] : mono.factors) {
            if (p.raise > 0) {
                body += std::string(1, mode) + "d";
                if (p.raise > 1) body += "^" + std::to_string(p.raise);
                body += " ";
            }
            if (p.lower > 0) {
                body += std::string(1, mode);
                if (p.lower > 1) body += "^" + std::to_string(p.lower);
                body += " ";
            }
        }
        if (!body.empty()) body.pop_back();

        // Pull the sign out of real or pure-imaginary coefficients so every
        // emitted factor stays inside the grammar; mixed ones get parentheses.
        bool negative = false;
        std::string head;
        if (coeff.is_real() || coeff.re == 0) {
            Coeff mag = coeff;
            if ((coeff.is_real() && coeff.re < 0) || (!coeff.is_real() && coeff.im < 0)) {
                negative = true;
                mag = -coeff;
            }
            head = detail::coeff_magnitude(mag);
        } else {
            std::string re = coeff.re < 0 ? "- " + to_string(-coeff.re) : to_string(coeff.re);
            std::string im = coeff.im < 0 ? " - " : " + ";
            Rat imag = coeff.im < 0 ? Rat(-coeff.im) : coeff.im;
            im += (imag == 1 ? "i" : to_string(imag) + " i");
            head = "(" + re + im + ")";
        }

        std::string piece = head;
        if (!body.empty()) piece += (piece.empty() ? "" : " ") + body;
        if (piece.empty()) piece = "1";
        if (out.empty())
            out = negative ? "- " + piece : piece;
        else
            out += (negative ? " - " : " + ") + piece;
    }
    return out;
}

}  // namespace hilange
