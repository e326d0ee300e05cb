#include <geonull/exprcalc.hpp>

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace geonull;

namespace {

const std::vector<std::string> kXU{"x", "u"};
const std::vector<std::string> kXUW{"x", "u", "w"};

oracle::Fn value_field(const ExprAst& e) {
    return [e](const std::vector<double>& x) { return eval(e, x); };
}

} // namespace

TEST(Parse, PowerBindsTighterThanPlus) {
    const ExprAst e = parse("2 + u^2", kXU);
    const ExprNode& r = e.root();
    ASSERT_EQ(r.kind, ExprNode::Kind::binary);
    EXPECT_EQ(r.op, '+');
    EXPECT_EQ(r.lhs->kind, ExprNode::Kind::constant);
    EXPECT_EQ(r.lhs->number, 2.0);
    ASSERT_EQ(r.rhs->kind, ExprNode::Kind::binary);
    EXPECT_EQ(r.rhs->op, '^');
    EXPECT_EQ(r.rhs->lhs->variable, 1);
    EXPECT_EQ(r.rhs->rhs->number, 2.0);
}

TEST(Parse, FunctionCalls) {
    const ExprAst e = parse("cos(u)*cos(w) + 3", kXUW);
    EXPECT_EQ(print(e), "((cos(u) * cos(w)) + 3)");
}

TEST(Parse, MissingOperandReportsOffset) {
    try {
        parse("u + * 2", {"u"});
        FAIL() << "expected a parse error";
    } catch (const ParseError& e) {
        EXPECT_EQ(e.offset(), 4u);
    }
}

TEST(Parse, Errors) {
    EXPECT_THROW(parse("", kXU), ParseError);
    EXPECT_THROW(parse("   ", kXU), ParseError);
    EXPECT_THROW(parse("(u + 1", kXU), ParseError);
    EXPECT_THROW(parse("u + 1)", kXU), ParseError);
    EXPECT_THROW(parse("sin u", kXU), ParseError);
    try {
        parse("u + y", kXU);
        FAIL();
    } catch (const ParseError& e) {
        EXPECT_EQ(e.offset(), 4u);
    }
    try {
        parse("abs(u)", kXU);
        FAIL();
    } catch (const ParseError& e) {
        EXPECT_EQ(e.offset(), 0u);
    }
    EXPECT_THROW(parse("u", {"u", "u"}), Error);
}

TEST(Parse, PowerIsRightAssociativeAndOutranksUnaryMinus) {
    const std::vector<double> p{0.0, 2.0};
    EXPECT_DOUBLE_EQ(eval(parse("-u^2", kXU), p), -4.0);
    EXPECT_DOUBLE_EQ(eval(parse("2^3^2", kXU), p), 512.0);
    EXPECT_DOUBLE_EQ(eval(parse("(-u)^2", kXU), p), 4.0);
    EXPECT_DOUBLE_EQ(eval(parse("u^-1", kXU), p), 0.5);
    EXPECT_DOUBLE_EQ(eval(parse("8 / 2 / 2", kXU), p), 2.0);
    EXPECT_DOUBLE_EQ(eval(parse("1 - 2 - 3", kXU), p), -4.0);
    EXPECT_NEAR(eval(parse("2*pi", kXU), p), 2 * M_PI, 1e-15);
    EXPECT_DOUBLE_EQ(eval(parse("1.5e2 + .5", kXU), p), 150.5);
}

TEST(Parse, VariablesBindPositionally) {
    const ExprAst e = parse("u - 10*x", kXU);
    EXPECT_DOUBLE_EQ(eval(e, std::vector<double>{1.0, 3.0}), -7.0);
}

TEST(Jet2, PolynomialValues) {
    const Jet2 j = eval_jet2(parse("2 + u^2", kXU), std::vector<double>{0.0, 1.0});
    EXPECT_DOUBLE_EQ(j.value(), 3.0);
    EXPECT_DOUBLE_EQ(j.d(1), 2.0);
    EXPECT_DOUBLE_EQ(j.dd(1, 1), 2.0);
    EXPECT_DOUBLE_EQ(j.d(0), 0.0);
    EXPECT_DOUBLE_EQ(j.dd(0, 1), 0.0);
}

TEST(Jet2, ConstantHasZeroDerivatives) {
    for (const char* src : {"3", "pi", "2^0.5", "exp(1) - sin(2)"}) {
        const Jet2 j = eval_jet2(parse(src, kXUW), std::vector<double>{0.3, -1.2, 4.0});
        EXPECT_TRUE(j.is_constant()) << src;
    }
}

TEST(Jet2, HessianMatchesRichardsonDifferences) {
    const ExprAst e = parse("cos(u)*cos(w)", kXUW);
    const std::vector<double> x{0.0, 0.3, 0.7};
    const Jet2 j = eval_jet2(e, x);
    // Oracle: Richardson-extrapolated differences of the exact gradient (closed form).
    const oracle::Fn du = [](const std::vector<double>& y) { return -std::sin(y[1]) * std::cos(y[2]); };
    const oracle::Fn dw = [](const std::vector<double>& y) { return -std::cos(y[1]) * std::sin(y[2]); };
    EXPECT_NEAR(j.dd(1, 1), oracle::d1_richardson(du, x, 1, 1e-3), 1e-6);
    EXPECT_NEAR(j.dd(1, 2), oracle::d1_richardson(du, x, 2, 1e-3), 1e-6);
    EXPECT_NEAR(j.dd(2, 2), oracle::d1_richardson(dw, x, 2, 1e-3), 1e-6);
    // And against second differences of the value field alone.
    const oracle::Fn f = value_field(e);
    EXPECT_NEAR(j.dd(1, 1), oracle::d2(f, x, 1, 1, 1e-3), 1e-6);
    EXPECT_NEAR(j.dd(1, 2), oracle::d2(f, x, 1, 2, 1e-3), 1e-6);
}

TEST(Jet2, HessianIsExactlySymmetric) {
    const Jet2 j = eval_jet2(parse("exp(x*u) * sin(w + u^2)", kXUW), std::vector<double>{0.4, 0.2, -0.9});
    for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b) EXPECT_EQ(j.dd(a, b), j.dd(b, a));
}

TEST(Jet2, DomainErrors) {
    const std::vector<double> p{0.0, -1.0};
    EXPECT_THROW(eval_jet2(parse("log(u)", kXU), p), DomainError);
    EXPECT_THROW(eval_jet2(parse("sqrt(u)", kXU), p), DomainError);
    EXPECT_THROW(eval_jet2(parse("1 / x", kXU), p), DomainError);
    EXPECT_THROW(eval_jet2(parse("u^0.5", kXU), p), DomainError);
    EXPECT_NO_THROW(eval_jet2(parse("u^3", kXU), p));
    try {
        eval(parse("2 + log(u - 1)", kXU), p);
        FAIL();
    } catch (const DomainError& e) {
        EXPECT_NE(std::string(e.what()).find("log"), std::string::npos);
    }
}

// For every catalog expression, jets agree with 4th-order differences of the value field.
TEST(Jet2, CatalogExpressionsAgainstFiniteDifferences) {
    struct Case {
        const char* src;
        std::vector<std::string> vars;
    };
    const std::vector<Case> cases{{"exp(u)", kXU},          {"2+u*u", kXU},           {"cos(u)+2", kXU},
                                  {"3 + cos(u) + cos(w)", kXUW}, {"4-u*u-w*w", kXUW}, {"exp(x/3)*(2+sin(u*w))", kXUW}};
    std::mt19937_64 rng(2024);
    for (const auto& c : cases) {
        const ExprAst e = parse(c.src, c.vars);
        const oracle::Fn f = value_field(e);
        const int n = static_cast<int>(c.vars.size());
        for (int k = 0; k < 100; ++k) {
            const auto x = oracle::uniform(rng, n, -1.5, 1.5);
            const Jet2 j = eval_jet2(e, x);
            EXPECT_NEAR(j.value(), f(x), 1e-14 * std::max(1.0, std::abs(f(x))));
            for (int a = 0; a < n; ++a) {
                const double ref = oracle::d1(f, x, a, 1e-3);
                EXPECT_LE(oracle::rel_err(j.d(a), ref), 1e-6) << c.src << " d" << a;
                for (int b = a; b < n; ++b) {
                    const double ref2 = oracle::d2(f, x, a, b, 1e-3);
                    EXPECT_LE(oracle::rel_err(j.dd(a, b), ref2), 1e-6) << c.src << " dd" << a << b;
                }
            }
        }
    }
}

TEST(Jet2, EmbeddedEvaluationComposesChainRule) {
    // p(u) = u^2 with u = 3 s: dp/ds = 18 s, d2p/ds2 = 18.
    const ExprAst e = parse("u^2", {"u"});
    Jet2 s = Jet2::variable(1, 0, 0.5);
    const std::vector<Jet2> arg{s * 3.0};
    const Jet2 j = eval_jet2(e, std::span<const Jet2>(arg));
    EXPECT_DOUBLE_EQ(j.value(), 2.25);
    EXPECT_DOUBLE_EQ(j.d(0), 9.0);
    EXPECT_DOUBLE_EQ(j.dd(0, 0), 18.0);
}

TEST(Print, RoundTripIsStructurallyIdentical) {
    for (const char* src : {"2 + u^2", "-u^2", "(-u)^2", "2^3^2", "cos(u)*cos(w) + 3", "3 + cos(u) + cos(w)",
                            "exp(-x/2) * sqrt(1 + u*u) - log(2 + w)", "u^-1.5", "1e-3 * w", "0.1 + 0.2"}) {
        const ExprAst a = parse(src, kXUW);
        const std::string printed = print(a);
        const ExprAst b = parse(printed, kXUW);
        EXPECT_TRUE(structurally_equal(a, b)) << src << " -> " << printed;
        EXPECT_EQ(print(b), printed);
    }
}

TEST(Print, RandomTreesRoundTrip) {
    std::mt19937_64 rng(99);
    std::uniform_int_distribution<int> pick(0, 9);
    std::function<std::string(int)> gen = [&](int depth) -> std::string {
        const int k = depth > 3 ? pick(rng) % 3 : pick(rng);
        switch (k) {
        case 0: return "x";
        case 1: return "w";
        case 2: return std::to_string(pick(rng) + 1) + ".25";
        case 3: return "(" + gen(depth + 1) + " + " + gen(depth + 1) + ")";
        case 4: return gen(depth + 1) + " * " + gen(depth + 1);
        case 5: return "-" + gen(depth + 1);
        case 6: return "sin(" + gen(depth + 1) + ")";
        case 7: return "(" + gen(depth + 1) + ")^2";
        case 8: return gen(depth + 1) + " / " + gen(depth + 1);
        default: return "exp(" + gen(depth + 1) + ") - u";
        }
    };
    for (int i = 0; i < 200; ++i) {
        const std::string src = gen(0);
        const ExprAst a = parse(src, kXUW);
        EXPECT_TRUE(structurally_equal(a, parse(print(a), kXUW))) << src;
    }
}
