#include <doctest.h>

#include <array>
#include <cmath>
#include <random>

#include "testutil.hpp"
#include "tsvar/expr.hpp"

using namespace tsvar;
using tsvar::testing::close_rel;

namespace {

double ev(const Expression& e, std::initializer_list<double> xs) {
    std::vector<double> v(xs);
    return e.eval(v);
}

} // namespace

TEST_CASE("parsing and precedence") {
    auto e = Expression::parse("v^2 + t*y", {"t", "y", "v"});
    CHECK(ev(e, {2.0, 3.0, 4.0}) == 22.0);

    // ^ is right-associative: 2^3^2 = 2^9
    auto r = Expression::parse("2^3^2", {});
    CHECK(ev(r, {}) == 512.0);

    // unary minus binds looser than ^: -x^2 = -(x^2)
    auto u = Expression::parse("-x^2", {"x"});
    CHECK(ev(u, {3.0}) == -9.0);
    auto u2 = Expression::parse("2^-2", {});
    CHECK(ev(u2, {}) == 0.25);

    auto paren = Expression::parse("(v)^2 + t", {"t", "y", "v"});
    CHECK(ev(paren, {1.0, 0.0, 0.0}) == 1.0);

    auto mul = Expression::parse("t*v", {"t", "y", "v"});
    CHECK(ev(mul, {2.0, 0.0, 0.5}) == 1.0);

    CHECK(ev(Expression::parse("1 + 2*3", {}), {}) == 7.0);
    CHECK(ev(Expression::parse("(1 + 2)*3", {}), {}) == 9.0);
    CHECK(ev(Expression::parse("2 - 3 - 4", {}), {}) == -5.0);
    CHECK(ev(Expression::parse("12/3/2", {}), {}) == 2.0);
    CHECK(close_rel(ev(Expression::parse("sin(pi/2)", {}), {}), 1.0, 1e-15));
    CHECK(close_rel(ev(Expression::parse("log(e)", {}), {}), 1.0, 1e-15));
}

TEST_CASE("errors carry 1-based columns and offender names") {
    try {
        Expression::parse("v^2 + w", {"t", "y", "v"});
        FAIL("expected parse_error");
    } catch (const parse_error& e) {
        CHECK(e.column == 7);
        CHECK(std::string(e.what()).find("'w'") != std::string::npos);
    }
    try {
        Expression::parse("1 + ", {});
        FAIL("expected parse_error");
    } catch (const parse_error& e) {
        CHECK(e.column == 5);
    }
    CHECK_THROWS_AS(Expression::parse("", {}), parse_error);
    CHECK_THROWS_AS(Expression::parse("foo(1)", {}), parse_error);
    CHECK_THROWS_AS(Expression::parse("1 ) 2", {}), parse_error);
    CHECK_THROWS_AS(Expression::parse("x", {"pi"}), input_error);
}

TEST_CASE("domain faults are reported, not NaN") {
    auto lg = Expression::parse("log(x)", {"x"});
    CHECK_THROWS_AS(ev(lg, {-1.0}), eval_error);
    CHECK_THROWS_AS(ev(lg, {0.0}), eval_error);
    auto sq = Expression::parse("sqrt(x)", {"x"});
    CHECK_THROWS_AS(ev(sq, {-2.0}), eval_error);
    auto pw = Expression::parse("x^0.5", {"x"});
    CHECK_THROWS_AS(ev(pw, {-2.0}), eval_error);
    auto zn = Expression::parse("x^-1", {"x"});
    CHECK_THROWS_AS(ev(zn, {0.0}), eval_error);
    auto dv = Expression::parse("1/x", {"x"});
    CHECK_THROWS_AS(ev(dv, {0.0}), eval_error);
    try {
        ev(lg, {-1.0});
    } catch (const eval_error& e) {
        CHECK(std::string(e.what()).find("log(x)") != std::string::npos);
    }
}

TEST_CASE("integer exponents stay exact on negative bases") {
    auto cube = Expression::parse("x^3", {"x"});
    CHECK(ev(cube, {-2.0}) == -8.0);
    auto inv = Expression::parse("x^-2", {"x"});
    CHECK(ev(inv, {-2.0}) == 0.25);
    // derivative of x^3 at a negative point
    DiffValue d = cube.eval_with_partials(std::array<double, 1>{-2.0});
    CHECK(d.d("x") == 12.0);
    CHECK(d.d2("x", "x") == -12.0);
}

TEST_CASE("partials: closed forms") {
    auto e = Expression::parse("v^2", {"t", "y", "v"});
    DiffValue d = e.eval_with_partials(std::array<double, 3>{0.0, 0.0, 3.0});
    CHECK(d.value == 9.0);
    CHECK(d.d("v") == 6.0);
    CHECK(d.d2("v", "v") == 2.0);
    CHECK(d.d("y") == 0.0);

    auto tv = Expression::parse("t*v", {"t", "y", "v"});
    DiffValue d2 = tv.eval_with_partials(std::array<double, 3>{2.0, 0.0, 0.5});
    CHECK(d2.d("t") == 0.5);
    CHECK(d2.d("v") == 2.0);
    CHECK(d2.d2("t", "v") == 1.0);
    CHECK(d2.d2("v", "t") == 1.0);
}

TEST_CASE("partials agree with central differences on random expressions") {
    // A corpus of shapes covering every operator and call.
    const char* corpus[] = {
        "v^2 + t*y",
        "sin(t)*cos(y) + exp(v/4)",
        "(y + 2)^3 / (v^2 + 1)",
        "sqrt(t + 3) * log(y + 4)",
        "t*y*v - 2*y^2 + v",
        "abs(y)^2 + t",
        "exp(-(v^2)/2) + y*sin(t*v)",
        "1/(t + 5) + y/(v + 3)",
    };
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> pt(0.2, 1.8);
    std::vector<std::string> vars{"t", "y", "v"};
    for (const char* src : corpus) {
        Expression e = Expression::parse(src, vars);
        for (int rep = 0; rep < 20; ++rep) {
            std::array<double, 3> x{pt(rng), pt(rng), pt(rng)};
            DiffValue d = e.eval_with_partials(x);
            CHECK(d.value == e.eval(x)); // bitwise equal value path

            for (int i = 0; i < 3; ++i) {
                double step = 1e-6 * std::max(1.0, std::fabs(x[static_cast<size_t>(i)]));
                std::array<double, 3> xp = x, xm = x;
                xp[static_cast<size_t>(i)] += step;
                xm[static_cast<size_t>(i)] -= step;
                double fd = (e.eval(xp) - e.eval(xm)) / (2 * step);
                CHECK(close_rel(d.first[static_cast<size_t>(i)], fd, 1e-6));
                for (int j = 0; j <= i; ++j) {
                    std::array<double, 3> xpp = xp, xpm = xm;
                    double stepj = 1e-4 * std::max(1.0, std::fabs(x[static_cast<size_t>(j)]));
                    xpp[static_cast<size_t>(j)] += stepj;
                    xpm[static_cast<size_t>(j)] += stepj;
                    std::array<double, 3> xmp = xp, xmm = xm;
                    xmp[static_cast<size_t>(j)] -= stepj;
                    xmm[static_cast<size_t>(j)] -= stepj;
                    double fd2 = ((e.eval(xpp) - e.eval(xpm)) - (e.eval(xmp) - e.eval(xmm))) /
                                 (4 * step * stepj);
                    CHECK(close_rel(d.second[static_cast<size_t>(
                                        DiffValue::pack_index(j, i, 3))],
                                    fd2, 1e-4));
                }
            }
        }
    }
}

TEST_CASE("pretty print round-trips structurally") {
    const char* corpus[] = {
        "v^2 + t*y",
        "-x^2",
        "2^3^2",
        "(1 + 2)*3",
        "a - (b - c)",
        "a/(b*c)",
        "-(a + b)^2",
        "sin(cos(x))",
        "x^-2 + (-x)^3",
        "1/(t + 5) + y/(v + 3)",
    };
    for (const char* src : corpus) {
        std::vector<std::string> vars{"t", "y", "v", "x", "a", "b", "c"};
        Expression e = Expression::parse(src, vars);
        Expression e2 = Expression::parse(e.pretty(), vars);
        CHECK_MESSAGE(e.structurally_equal(e2), src, " -> ", e.pretty());
        // and the value agrees at a generic point
        std::vector<double> x{1.1, 0.7, 1.3, 0.9, 1.7, 0.6, 1.2};
        CHECK(e.eval(x) == e2.eval(x));
    }
}
