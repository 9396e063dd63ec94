#pragma once

#include <cctype>
#include <cstdlib>
#include <string>

#include "uqkit/errors.hpp"
#include "uqkit/units.hpp"

namespace uqkit::units {

// Evaluator for quantity expressions such as "5 Pg/yr + 3 Pg/yr" or
// "log(10 Pg / 1 Pg)".
//
// Grammar:
//   expr    := term (('+'|'-') term)*
//   term    := factor (('*'|'/') factor)*
//   factor  := '-' factor | power
//   power   := atom ['^' rexp]
//   atom    := number [units] | name [units'] | func '(' expr [',' number] ')'
//              | '(' expr ')'
//   units   := name ['^' rexp] (('*'|'/') name ['^' rexp])*
//   rexp    := ['-'] integer | '(' integer '/' integer ')'
//
// A bare name is a unit with value 1. A unit chain after a number or name
// binds tighter than arithmetic and extends across '*' and '/' only while
// the next operand is itself a plain name, so "5 Pg/yr * 3" is 15 Pg/yr.
// Functions: log, exp, sqrt, boxcox(x, lambda). Exponents of quantities are
// rational literals.
class ExpressionEvaluator {
public:
    explicit ExpressionEvaluator(std::string text) : text_(std::move(text)) {}

    Quantity evaluate() {
        const Quantity q = parse_expr();
        skip_ws();
        if (pos_ < text_.size())
            throw InputError("expression: unexpected trailing input at position " +
                             std::to_string(pos_) + " in '" + text_ + "'");
        return q;
    }

private:
    void skip_ws() {
        while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_])))
            ++pos_;
    }

    bool at_name_start() {
        skip_ws();
        return pos_ < text_.size() &&
               (std::isalpha(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_');
    }

    std::string read_name() {
        skip_ws();
        std::string name;
        while (pos_ < text_.size() &&
               (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_')) {
            name += text_[pos_];
            ++pos_;
        }
        if (name.empty())
            throw InputError("expression: expected a name at position " +
                             std::to_string(pos_) + " in '" + text_ + "'");
        return name;
    }

    bool consume(char c) {
        skip_ws();
        if (pos_ < text_.size() && text_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }

    char peek() {
        skip_ws();
        return pos_ < text_.size() ? text_[pos_] : '\0';
    }

    static bool is_function(const std::string& name) {
        return name == "log" || name == "exp" || name == "sqrt" || name == "boxcox";
    }

    Quantity parse_expr() {
        Quantity q = parse_term();
        for (;;) {
            if (consume('+'))
                q = add(q, parse_term());
            else if (consume('-'))
                q = sub(q, parse_term());
            else
                return q;
        }
    }

    Quantity parse_term() {
        Quantity q = parse_factor();
        for (;;) {
            if (consume('*'))
                q = mul(q, parse_factor());
            else if (consume('/'))
                q = div(q, parse_factor());
            else
                return q;
        }
    }

    Quantity parse_factor() {
        if (consume('-')) {
            const Quantity q = parse_factor();
            return Quantity(-q.value(), q.dim());
        }
        return parse_power();
    }

    Quantity parse_power() {
        Quantity q = parse_atom();
        if (consume('^')) return pow(q, parse_rational());
        return q;
    }

    Quantity parse_atom() {
        skip_ws();
        if (pos_ >= text_.size())
            throw InputError("expression: unexpected end of input in '" + text_ + "'");
        const char c = text_[pos_];
        if (c == '(') {
            ++pos_;
            const Quantity q = parse_expr();
            if (!consume(')'))
                throw InputError("expression: missing ')' in '" + text_ + "'");
            return q;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
            const double v = parse_number();
            if (at_name_start()) return Quantity(v, parse_unit_chain());
            return Quantity(v);
        }
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            const std::size_t save = pos_;
            const std::string name = read_name();
            if (is_function(name) && peek() == '(') return parse_call(name);
            pos_ = save;
            return Quantity(1.0, parse_unit_chain());
        }
        throw InputError("expression: unexpected character '" + std::string(1, c) +
                         "' at position " + std::to_string(pos_) + " in '" + text_ + "'");
    }

    Quantity parse_call(const std::string& name) {
        if (!consume('('))
            throw InputError("expression: expected '(' after '" + name + "'");
        const Quantity arg = parse_expr();
        double lambda = 0.0;
        bool have_lambda = false;
        if (consume(',')) {
            lambda = parse_signed_number();
            have_lambda = true;
        }
        if (!consume(')'))
            throw InputError("expression: missing ')' after arguments of '" + name + "'");
        if (name == "boxcox") {
            if (!have_lambda)
                throw InputError("expression: boxcox needs a second argument, "
                                 "boxcox(x, lambda)");
            return box_cox(arg, lambda);
        }
        if (have_lambda)
            throw InputError("expression: '" + name + "' takes one argument");
        if (name == "log") return log(arg);
        if (name == "exp") return exp(arg);
        return sqrt(arg);
    }

    double parse_number() {
        skip_ws();
        const char* start = text_.c_str() + pos_;
        char* end = nullptr;
        const double v = std::strtod(start, &end);
        if (end == start)
            throw InputError("expression: expected a number at position " +
                             std::to_string(pos_) + " in '" + text_ + "'");
        pos_ += static_cast<std::size_t>(end - start);
        return v;
    }

    double parse_signed_number() {
        skip_ws();
        const bool neg = consume('-');
        const double v = parse_number();
        return neg ? -v : v;
    }

    // Units extend across '*' and '/' only when the next operand is a plain
    // name (not a function call and not a number), so the chain stops where
    // arithmetic on values resumes.
    Dimension parse_unit_chain() {
        Dimension d = parse_unit_term();
        for (;;) {
            skip_ws();
            const std::size_t save = pos_;
            char op = '\0';
            if (consume('*'))
                op = '*';
            else if (consume('/'))
                op = '/';
            else
                return d;
            if (!at_name_start()) {
                pos_ = save;
                return d;
            }
            const std::size_t name_pos = pos_;
            const std::string name = read_name();
            if (is_function(name) && peek() == '(') {
                pos_ = save;
                return d;
            }
            pos_ = name_pos;
            const Dimension t = parse_unit_term();
            d = (op == '*') ? d * t : d / t;
        }
    }

    Dimension parse_unit_term() {
        const std::string name = read_name();
        Rational exp(1);
        if (consume('^')) exp = parse_rational();
        return Dimension::base(name, exp);
    }

    Rational parse_rational() {
        skip_ws();
        if (consume('(')) {
            const long long num = parse_int();
            if (!consume('/'))
                throw InputError("expression: expected '/' in fractional exponent");
            const long long den = parse_int();
            if (!consume(')'))
                throw InputError("expression: expected ')' after fractional exponent");
            return Rational(num, den);
        }
        return Rational(parse_int());
    }

    long long parse_int() {
        skip_ws();
        const bool neg = consume('-');
        if (pos_ >= text_.size() || !std::isdigit(static_cast<unsigned char>(text_[pos_])))
            throw InputError("expression: expected an integer exponent at position " +
                             std::to_string(pos_) + " in '" + text_ + "'");
        long long v = 0;
        while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) {
            v = v * 10 + (text_[pos_] - '0');
            ++pos_;
        }
        return neg ? -v : v;
    }

    std::string text_;
    std::size_t pos_ = 0;
};

inline Quantity evaluate_expression(const std::string& text) {
    return ExpressionEvaluator(text).evaluate();
}

} // namespace uqkit::units
