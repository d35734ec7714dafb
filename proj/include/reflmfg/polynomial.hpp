#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "errors.hpp"

namespace reflmfg {

/**
 * Sparse polynomial in the variables t, x, u and the moment symbols m1, m2,
 * ...; the workhorse behind textual coefficient tables.  Supported syntax:
 *
 *     16*x^2 - 40*x*m1 + 25*m1^2
 *     -0.5*t*u + 3
 *
 * Terms are joined by + or -, factors inside a term by *, and a factor is a
 * number or a variable with an optional integer power.  No implicit
 * multiplication and no parentheses; the family shapes that need products of
 * sums are assembled structurally, not textually.
 */
class Polynomial {
  public:
    struct Term {
        double coef = 0.0;
        int pt = 0, px = 0, pu = 0;
        std::vector<int> pm; // pm[j] is the power of m(j+1)

        bool same_monomial(const Term& o) const {
            return pt == o.pt && px == o.px && pu == o.pu && pm == o.pm;
        }
    };

    Polynomial() = default;

    static Polynomial constant(double c) {
        Polynomial p;
        if (c != 0.0) p.terms_.push_back(Term{c, 0, 0, 0, {}});
        return p;
    }

    static Polynomial parse(std::string_view text);

    double eval(double t, double x, double u, std::span<const double> m = {}) const {
        double total = 0.0;
        for (const auto& term : terms_) {
            double v = term.coef;
            for (int k = 0; k < term.pt; ++k) v *= t;
            for (int k = 0; k < term.px; ++k) v *= x;
            for (int k = 0; k < term.pu; ++k) v *= u;
            for (size_t j = 0; j < term.pm.size(); ++j) {
                if (term.pm[j] == 0) continue;
                if (j >= m.size())
                    throw SpecError("polynomial references m" + std::to_string(j + 1) +
                                    " but only " + std::to_string(m.size()) +
                                    " moments were supplied");
                for (int k = 0; k < term.pm[j]; ++k) v *= m[j];
            }
            total += v;
        }
        return total;
    }

    /// d/du, for convexity checks of control penalties.
    Polynomial derivative_u() const {
        Polynomial out;
        for (auto term : terms_) {
            if (term.pu == 0) continue;
            term.coef *= term.pu;
            term.pu -= 1;
            out.terms_.push_back(std::move(term));
        }
        out.normalize();
        return out;
    }

    bool is_zero() const {
        for (const auto& t : terms_)
            if (t.coef != 0.0) return false;
        return true;
    }

    bool uses_t() const { return uses([](const Term& t) { return t.pt > 0; }); }
    bool uses_x() const { return uses([](const Term& t) { return t.px > 0; }); }
    bool uses_u() const { return uses([](const Term& t) { return t.pu > 0; }); }

    /// Highest moment index referenced (1-based); 0 when none.
    int max_moment() const {
        int mx = 0;
        for (const auto& term : terms_)
            for (size_t j = 0; j < term.pm.size(); ++j)
                if (term.pm[j] > 0) mx = std::max(mx, static_cast<int>(j) + 1);
        return mx;
    }

    void normalize() {
        for (auto& term : terms_)
            while (!term.pm.empty() && term.pm.back() == 0) term.pm.pop_back();
        std::vector<Term> merged;
        for (const auto& term : terms_) {
            if (term.coef == 0.0) continue;
            auto hit = std::find_if(merged.begin(), merged.end(),
                                    [&](const Term& o) { return o.same_monomial(term); });
            if (hit != merged.end())
                hit->coef += term.coef;
            else
                merged.push_back(term);
        }
        merged.erase(std::remove_if(merged.begin(), merged.end(),
                                    [](const Term& t) { return t.coef == 0.0; }),
                     merged.end());
        std::sort(merged.begin(), merged.end(), [](const Term& a, const Term& b) {
            if (a.pt != b.pt) return a.pt > b.pt;
            if (a.px != b.px) return a.px > b.px;
            if (a.pu != b.pu) return a.pu > b.pu;
            return a.pm > b.pm;
        });
        terms_ = std::move(merged);
    }

    bool operator==(const Polynomial& o) const {
        Polynomial a = *this, b = o;
        a.normalize();
        b.normalize();
        if (a.terms_.size() != b.terms_.size()) return false;
        for (size_t i = 0; i < a.terms_.size(); ++i)
            if (!a.terms_[i].same_monomial(b.terms_[i]) ||
                a.terms_[i].coef != b.terms_[i].coef)
                return false;
        return true;
    }

    /// Canonical text form; parse(str()) reproduces the polynomial exactly.
    std::string str() const {
        Polynomial p = *this;
        p.normalize();
        if (p.terms_.empty()) return "0";
        std::string out;
        for (size_t i = 0; i < p.terms_.size(); ++i) {
            const auto& term = p.terms_[i];
            double c = term.coef;
            if (i == 0) {
                if (c < 0) {
                    out += "-";
                    c = -c;
                }
            } else {
                out += (c < 0) ? " - " : " + ";
                c = std::abs(c);
            }
            std::vector<std::string> factors;
            const bool has_vars =
                term.pt > 0 || term.px > 0 || term.pu > 0 || !term.pm.empty();
            if (c != 1.0 || !has_vars) factors.push_back(format_number(c));
            append_power(factors, "t", term.pt);
            append_power(factors, "x", term.px);
            append_power(factors, "u", term.pu);
            for (size_t j = 0; j < term.pm.size(); ++j)
                append_power(factors, "m" + std::to_string(j + 1), term.pm[j]);
            for (size_t k = 0; k < factors.size(); ++k) {
                if (k > 0) out += "*";
                out += factors[k];
            }
        }
        return out;
    }

    const std::vector<Term>& terms() const { return terms_; }

  private:
    std::vector<Term> terms_;

    template <class Pred> bool uses(Pred pred) const {
        for (const auto& t : terms_)
            if (t.coef != 0.0 && pred(t)) return true;
        return false;
    }

    static void append_power(std::vector<std::string>& out, const std::string& name, int p) {
        if (p <= 0) return;
        out.push_back(p == 1 ? name : name + "^" + std::to_string(p));
    }

    static std::string format_number(double v) {
        char buf[40];
        std::snprintf(buf, sizeof buf, "%.17g", v);
        return buf;
    }
};

inline Polynomial Polynomial::parse(std::string_view text) {
    Polynomial out;
    size_t pos = 0;
    auto skip_ws = [&] {
        while (pos < text.size() && std::isspace(static_cast<unsigned char>(text[pos]))) ++pos;
    };
    auto fail = [&](const std::string& why) -> SpecError {
        return SpecError("polynomial \"" + std::string(text) + "\": " + why + " at offset " +
                         std::to_string(pos));
    };

    skip_ws();
    if (pos == text.size()) throw fail("empty expression");

    bool first = true;
    while (pos < text.size()) {
        skip_ws();
        double sign = 1.0;
        if (text[pos] == '+' || text[pos] == '-') {
            if (text[pos] == '-') sign = -1.0;
            ++pos;
        } else if (!first) {
            throw fail("expected '+' or '-' between terms");
        }
        skip_ws();
        if (pos == text.size()) throw fail("dangling sign");

        Term term;
        term.coef = sign;
        bool any_factor = false;
        while (true) {
            skip_ws();
            if (pos >= text.size()) break;
            const char c = text[pos];
            if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
                char* end = nullptr;
                const std::string tail(text.substr(pos));
                const double v = std::strtod(tail.c_str(), &end);
                if (end == tail.c_str()) throw fail("bad number");
                pos += static_cast<size_t>(end - tail.c_str());
                term.coef *= v;
            } else if (c == 't' || c == 'x' || c == 'u' || c == 'm') {
                int midx = -1;
                ++pos;
                if (c == 'm') {
                    size_t start = pos;
                    while (pos < text.size() &&
                           std::isdigit(static_cast<unsigned char>(text[pos])))
                        ++pos;
                    if (pos == start) throw fail("moment symbol needs an index, e.g. m1");
                    midx = std::stoi(std::string(text.substr(start, pos - start)));
                    if (midx < 1) throw fail("moment indices start at 1");
                }
                int power = 1;
                skip_ws();
                if (pos < text.size() && text[pos] == '^') {
                    ++pos;
                    skip_ws();
                    size_t start = pos;
                    while (pos < text.size() &&
                           std::isdigit(static_cast<unsigned char>(text[pos])))
                        ++pos;
                    if (pos == start) throw fail("'^' needs a nonnegative integer power");
                    power = std::stoi(std::string(text.substr(start, pos - start)));
                }
                if (c == 't') term.pt += power;
                else if (c == 'x') term.px += power;
                else if (c == 'u') term.pu += power;
                else {
                    if (static_cast<size_t>(midx) > term.pm.size())
                        term.pm.resize(static_cast<size_t>(midx), 0);
                    term.pm[static_cast<size_t>(midx) - 1] += power;
                }
            } else {
                throw fail(std::string("unexpected character '") + c + "'");
            }
            any_factor = true;
            skip_ws();
            if (pos < text.size() && text[pos] == '*') {
                ++pos;
                continue;
            }
            break;
        }
        if (!any_factor) throw fail("empty term");
        out.terms_.push_back(std::move(term));
        first = false;
        skip_ws();
    }
    out.normalize();
    return out;
}

} // namespace reflmfg
