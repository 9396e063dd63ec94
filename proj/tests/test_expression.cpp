#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "uqkit/expression.hpp"

using namespace uqkit;
using units::Dimension;
using units::Quantity;
using units::Rational;
using units::evaluate_expression;

TEST_CASE("quantity expressions with unit chains") {
    const Quantity a = evaluate_expression("2 Pg/yr * 3 yr");
    REQUIRE(a.value() == 6.0);
    REQUIRE(a.dim() == Dimension::base("Pg"));

    const Quantity b = evaluate_expression("5 Pg + 3 Pg");
    REQUIRE(b.value() == 8.0);
    REQUIRE(b.dim().str() == "Pg");

    // The unit chain stops where arithmetic on values resumes.
    const Quantity c = evaluate_expression("5 Pg/yr * 3");
    REQUIRE(c.value() == 15.0);
    REQUIRE(c.dim().str() == "Pg/yr");

    const Quantity d = evaluate_expression("10 Pg / 2 Pg");
    REQUIRE(d.value() == 5.0);
    REQUIRE(d.dim().is_dimensionless());
}

TEST_CASE("bare names are unit-valued ones") {
    const Quantity q = evaluate_expression("Pg/yr");
    REQUIRE(q.value() == 1.0);
    REQUIRE(q.dim().str() == "Pg/yr");
    const Quantity r = evaluate_expression("3 * Pg");
    REQUIRE(r.value() == 3.0);
    REQUIRE(r.dim().str() == "Pg");
}

TEST_CASE("mismatched additions are rejected with both dimensions named") {
    REQUIRE_THROWS_AS(evaluate_expression("5 Pg + 3 yr"), units::UnitError);
    REQUIRE_THROWS_WITH(evaluate_expression("5 Pg + 3 yr"),
                        Catch::Matchers::ContainsSubstring("Pg") &&
                            Catch::Matchers::ContainsSubstring("yr"));
    REQUIRE_THROWS_AS(evaluate_expression("2390 bird + 862 ft"), units::UnitError);
}

TEST_CASE("transcendental calls demand dimensionless arguments") {
    REQUIRE_THROWS_AS(evaluate_expression("log(5 Pg)"), units::UnitError);
    REQUIRE_THAT(evaluate_expression("log(5)").value(),
                 Catch::Matchers::WithinAbs(std::log(5.0), 1e-14));
    REQUIRE_THAT(evaluate_expression("log(10 Pg / 1 Pg)").value(),
                 Catch::Matchers::WithinAbs(std::log(10.0), 1e-14));
    REQUIRE_THAT(evaluate_expression("exp(1)").value(),
                 Catch::Matchers::WithinAbs(2.718281828459045, 1e-14));
    REQUIRE_THROWS_AS(evaluate_expression("log(-1)"), NumericalError);
}

TEST_CASE("boxcox takes a lambda argument") {
    REQUIRE_THAT(evaluate_expression("boxcox(3, 1)").value(),
                 Catch::Matchers::WithinAbs(2.0, 1e-14));
    REQUIRE_THAT(evaluate_expression("boxcox(5, 0)").value(),
                 Catch::Matchers::WithinAbs(std::log(5.0), 1e-14));
    REQUIRE_THAT(evaluate_expression("boxcox(2, -0.5)").value(),
                 Catch::Matchers::WithinAbs((std::pow(2.0, -0.5) - 1.0) / -0.5, 1e-14));
    REQUIRE_THROWS_AS(evaluate_expression("boxcox(3)"), InputError);
    REQUIRE_THROWS_AS(evaluate_expression("log(3, 1)"), InputError);
    REQUIRE_THROWS_AS(evaluate_expression("boxcox(3 Pg, 1)"), units::UnitError);
}

TEST_CASE("powers, roots, and precedence") {
    const Quantity side = evaluate_expression("(4 m^2)^(1/2)");
    REQUIRE(side.value() == 2.0);
    REQUIRE(side.dim() == Dimension::base("m"));
    REQUIRE(evaluate_expression("sqrt(4 m^2)").dim() == Dimension::base("m"));
    REQUIRE(evaluate_expression("2 + 3 * 4").value() == 14.0);
    REQUIRE(evaluate_expression("(2 + 3) * 4").value() == 20.0);
    REQUIRE(evaluate_expression("2 m^3").dim() == Dimension::base("m", Rational(3)));
    REQUIRE(evaluate_expression("8 / 2 / 2").value() == 2.0);
    REQUIRE(evaluate_expression("-3 + 5").value() == 2.0);
    REQUIRE(evaluate_expression("-(2 Pg)").value() == -2.0);
    REQUIRE(evaluate_expression("2^-1").value() == 0.5);
}

TEST_CASE("malformed expressions are rejected") {
    REQUIRE_THROWS_AS(evaluate_expression(""), InputError);
    REQUIRE_THROWS_AS(evaluate_expression("5 Pg )"), InputError);
    REQUIRE_THROWS_AS(evaluate_expression("(5 Pg"), InputError);
    REQUIRE_THROWS_AS(evaluate_expression("5 +"), InputError);
    REQUIRE_THROWS_AS(evaluate_expression("log 5"), InputError);
    REQUIRE_THROWS_AS(evaluate_expression("3 ^ x"), InputError);
    REQUIRE_THROWS_AS(evaluate_expression("1 / 0"), NumericalError);
}

TEST_CASE("division by a zero quantity is a numerical error") {
    REQUIRE_THROWS_AS(evaluate_expression("5 Pg / (0 yr)"), NumericalError);
    REQUIRE(evaluate_expression("0 Pg / 2").value() == 0.0);
}
