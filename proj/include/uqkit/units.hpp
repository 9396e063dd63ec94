#pragma once

#include <cctype>
#include <cmath>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "uqkit/errors.hpp"
#include "uqkit/rational.hpp"
#include "uqkit/variability.hpp"

namespace uqkit::units {

// Two quantities were combined in a way their dimensions forbid.
class UnitError : public InputError {
public:
    explicit UnitError(const std::string& what) : InputError(what) {}
};

// Product of named base dimensions raised to rational exponents. Base names
// are open-ended: any identifier introduces a dimension. There are no
// conversions; equality is exact equality of the exponent maps.
class Dimension {
public:
    Dimension() = default;

    static Dimension dimensionless() { return Dimension(); }

    static Dimension base(const std::string& name, const Rational& exp = Rational(1)) {
        validate_name(name);
        Dimension d;
        if (!exp.is_zero()) d.exps_[name] = exp;
        return d;
    }

    bool is_dimensionless() const { return exps_.empty(); }
    const std::map<std::string, Rational>& exponents() const { return exps_; }

    Dimension operator*(const Dimension& o) const {
        Dimension out = *this;
        for (const auto& [name, e] : o.exps_) out.add_exponent(name, e);
        return out;
    }

    Dimension operator/(const Dimension& o) const {
        Dimension out = *this;
        for (const auto& [name, e] : o.exps_) out.add_exponent(name, -e);
        return out;
    }

    Dimension pow(const Rational& r) const {
        Dimension out;
        if (r.is_zero()) return out;
        for (const auto& [name, e] : exps_) out.exps_[name] = e * r;
        return out;
    }

    Dimension inverse() const { return pow(Rational(-1)); }

    bool operator==(const Dimension& o) const { return exps_ == o.exps_; }
    bool operator!=(const Dimension& o) const { return !(*this == o); }

    // Canonical form: positive-exponent terms sorted by name and joined with
    // '*', then one '/term' per negative exponent, also sorted; "1" when
    // dimensionless. Exponent 1 is left implicit; fractional exponents are
    // parenthesized. The output re-parses to the same dimension.
    std::string str() const {
        if (exps_.empty()) return "1";
        std::string numer, denom;
        for (const auto& [name, e] : exps_) {
            if (e.num() > 0) {
                if (!numer.empty()) numer += "*";
                numer += term(name, e);
            } else {
                denom += "/" + term(name, -e);
            }
        }
        if (numer.empty()) numer = "1";
        return numer + denom;
    }

    // Parses the grammar  term (('*'|'/') term)*  with
    // term := '1' | name ['^' exponent], exponent := int | '(' int '/' int ')'.
    static Dimension parse(const std::string& text);

private:
    static void validate_name(const std::string& name) {
        if (name.empty())
            throw InputError("Dimension: empty base name");
        if (!(std::isalpha(static_cast<unsigned char>(name[0])) || name[0] == '_'))
            throw InputError("Dimension: base name '" + name + "' must start with a letter");
        for (char c : name)
            if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_'))
                throw InputError("Dimension: base name '" + name + "' has an invalid character");
    }

    static std::string term(const std::string& name, const Rational& e) {
        if (e == Rational(1)) return name;
        if (e.is_integer()) return name + "^" + e.str();
        return name + "^(" + e.str() + ")";
    }

    void add_exponent(const std::string& name, const Rational& e) {
        auto it = exps_.find(name);
        if (it == exps_.end()) {
            if (!e.is_zero()) exps_[name] = e;
            return;
        }
        const Rational sum = it->second + e;
        if (sum.is_zero())
            exps_.erase(it);
        else
            it->second = sum;
    }

    std::map<std::string, Rational> exps_;
};

namespace detail {

class DimParser {
public:
    explicit DimParser(const std::string& text) : text_(text) {}

    Dimension parse() {
        Dimension d = parse_term();
        skip_ws();
        while (pos_ < text_.size()) {
            const char op = text_[pos_];
            if (op != '*' && op != '/')
                throw InputError("Dimension: unexpected character '" + std::string(1, op) +
                                 "' in '" + text_ + "'");
            ++pos_;
            const Dimension t = parse_term();
            d = (op == '*') ? d * t : d / t;
            skip_ws();
        }
        if (d.is_dimensionless() && !saw_one_ && !saw_name_)
            throw InputError("Dimension: empty unit string");
        return d;
    }

private:
    void skip_ws() {
        while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_])))
            ++pos_;
    }

    Dimension parse_term() {
        skip_ws();
        if (pos_ >= text_.size())
            throw InputError("Dimension: expected a unit term in '" + text_ + "'");
        if (text_[pos_] == '1') {
            ++pos_;
            saw_one_ = true;
            return Dimension::dimensionless();
        }
        std::string name;
        while (pos_ < text_.size() &&
               (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_')) {
            name += text_[pos_];
            ++pos_;
        }
        if (name.empty())
            throw InputError("Dimension: expected a unit name at position " +
                             std::to_string(pos_) + " in '" + text_ + "'");
        saw_name_ = true;
        Rational exp(1);
        skip_ws();
        if (pos_ < text_.size() && text_[pos_] == '^') {
            ++pos_;
            exp = parse_exponent();
        }
        return Dimension::base(name, exp);
    }

    Rational parse_exponent() {
        skip_ws();
        if (pos_ < text_.size() && text_[pos_] == '(') {
            ++pos_;
            const long long num = parse_int();
            skip_ws();
            if (pos_ >= text_.size() || text_[pos_] != '/')
                throw InputError("Dimension: expected '/' in fractional exponent");
            ++pos_;
            const long long den = parse_int();
            skip_ws();
            if (pos_ >= text_.size() || text_[pos_] != ')')
                throw InputError("Dimension: expected ')' after fractional exponent");
            ++pos_;
            return Rational(num, den);
        }
        return Rational(parse_int());
    }

    long long parse_int() {
        skip_ws();
        bool neg = false;
        if (pos_ < text_.size() && (text_[pos_] == '-' || text_[pos_] == '+')) {
            neg = text_[pos_] == '-';
            ++pos_;
        }
        if (pos_ >= text_.size() || !std::isdigit(static_cast<unsigned char>(text_[pos_])))
            throw InputError("Dimension: expected an integer at position " +
                             std::to_string(pos_) + " in '" + text_ + "'");
        long long v = 0;
        while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) {
            v = v * 10 + (text_[pos_] - '0');
            ++pos_;
        }
        return neg ? -v : v;
    }

    const std::string& text_;
    std::size_t pos_ = 0;
    bool saw_one_ = false;
    bool saw_name_ = false;
};

} // namespace detail

inline Dimension Dimension::parse(const std::string& text) {
    return detail::DimParser(text).parse();
}

// A value carrying its dimension.
class Quantity {
public:
    explicit Quantity(double value, Dimension dim = Dimension::dimensionless())
        : value_(value), dim_(std::move(dim)) {}

    double value() const { return value_; }
    const Dimension& dim() const { return dim_; }

    std::string str() const {
        std::string s = std::to_string(value_);
        if (!dim_.is_dimensionless()) s += " " + dim_.str();
        return s;
    }

private:
    double value_;
    Dimension dim_;
};

// Addition and subtraction require identical dimensions; the error names
// both sides.
inline Quantity add(const Quantity& a, const Quantity& b) {
    if (a.dim() != b.dim())
        throw UnitError("cannot add '" + a.dim().str() + "' and '" + b.dim().str() + "'");
    return Quantity(a.value() + b.value(), a.dim());
}

inline Quantity sub(const Quantity& a, const Quantity& b) {
    if (a.dim() != b.dim())
        throw UnitError("cannot subtract '" + b.dim().str() + "' from '" + a.dim().str() + "'");
    return Quantity(a.value() - b.value(), a.dim());
}

inline Quantity mul(const Quantity& a, const Quantity& b) {
    return Quantity(a.value() * b.value(), a.dim() * b.dim());
}

inline Quantity div(const Quantity& a, const Quantity& b) {
    if (b.value() == 0.0)
        throw NumericalError("division by a zero-valued quantity");
    return Quantity(a.value() / b.value(), a.dim() / b.dim());
}

inline Quantity pow(const Quantity& q, const Rational& r) {
    double v;
    if (r.is_integer()) {
        v = std::pow(q.value(), static_cast<double>(r.num()));
    } else {
        if (q.value() < 0.0)
            throw NumericalError("fractional power of a negative value");
        v = std::pow(q.value(), r.value());
    }
    return Quantity(v, q.dim().pow(r));
}

inline Quantity sqrt(const Quantity& q) { return pow(q, Rational(1, 2)); }

inline Quantity operator+(const Quantity& a, const Quantity& b) { return add(a, b); }
inline Quantity operator-(const Quantity& a, const Quantity& b) { return sub(a, b); }
inline Quantity operator*(const Quantity& a, const Quantity& b) { return mul(a, b); }
inline Quantity operator/(const Quantity& a, const Quantity& b) { return div(a, b); }

enum class Transcendental { log, exp, box_cox };

// Transcendental functions accept dimensionless arguments only: their power
// series mix different powers of the argument, which no single dimension can
// satisfy. The result is dimensionless as well.
inline Quantity transcendental(Transcendental f, const Quantity& x, double lambda = 0.0) {
    if (!x.dim().is_dimensionless())
        throw UnitError("transcendental function of a quantity with dimension '" +
                        x.dim().str() + "'; only dimensionless arguments are defined");
    switch (f) {
        case Transcendental::log:
            if (!(x.value() > 0.0))
                throw NumericalError("log of a non-positive value");
            return Quantity(std::log(x.value()));
        case Transcendental::exp:
            return Quantity(std::exp(x.value()));
        case Transcendental::box_cox:
            return Quantity(variability::box_cox(x.value(), lambda));
    }
    throw InputError("transcendental: unknown function");
}

inline Quantity log(const Quantity& x) { return transcendental(Transcendental::log, x); }
inline Quantity exp(const Quantity& x) { return transcendental(Transcendental::exp, x); }
inline Quantity box_cox(const Quantity& x, double lambda) {
    return transcendental(Transcendental::box_cox, x, lambda);
}

// Dimension of each coefficient in a linear model: response dimension
// divided by the covariate's dimension, so every term lands back on the
// response scale. The intercept (dimensionless covariate) keeps the
// response dimension.
inline std::vector<Dimension> regression_units(const Dimension& response,
                                               const std::vector<Dimension>& covariates) {
    std::vector<Dimension> out;
    out.reserve(covariates.size());
    for (const Dimension& c : covariates) out.push_back(response / c);
    return out;
}

// Dimension of a probability density over a variable: the inverse of the
// variable's dimension, so that density times measure is a pure number.
inline Dimension density_units(const Dimension& variable) { return variable.inverse(); }

} // namespace uqkit::units
