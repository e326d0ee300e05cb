#pragma once

/**
 * @file exprcalc.hpp
 * @brief Scalar expressions over named chart coordinates, with exact 2-jets.
 *
 * Expressions are parsed once into an immutable tree and evaluated either as
 * plain doubles or as `Jet2` values, which carry the gradient and Hessian
 * alongside the value (second-order forward-mode differentiation).
 *
 * @code
 * auto p = geonull::parse("3 + cos(u) + cos(w)", {"x", "u", "w"});
 * auto j = geonull::eval_jet2(p, std::vector<double>{0.0, 0.3, 0.7});
 * // j.value(), j.d(1), j.dd(1, 1) ...
 * @endcode
 */

#include <geonull/error.hpp>

#include <array>
#include <cassert>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <memory>
#include <numbers>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace geonull {

// ---------------------------------------------------------------------------
// Jet2
// ---------------------------------------------------------------------------

/// Value, gradient and Hessian of a scalar function of up to kMaxVars
/// variables. Only the upper triangle of the Hessian is stored.
class Jet2 {
public:
    static constexpr int kMaxVars = 6;
    static constexpr int kTriangle = kMaxVars * (kMaxVars + 1) / 2;

    Jet2() = default;

    static Jet2 constant(int nvars, double value) {
        Jet2 j;
        j.n_ = nvars;
        j.value_ = value;
        return j;
    }

    /// The coordinate function x_index evaluated at `value`.
    static Jet2 variable(int nvars, int index, double value) {
        Jet2 j = constant(nvars, value);
        j.grad_[static_cast<std::size_t>(index)] = 1.0;
        return j;
    }

    int nvars() const noexcept { return n_; }
    double value() const noexcept { return value_; }
    double d(int i) const noexcept { return grad_[static_cast<std::size_t>(i)]; }
    double dd(int i, int j) const noexcept { return hess_[tri(i, j)]; }

    double& value_ref() noexcept { return value_; }
    double& d_ref(int i) noexcept { return grad_[static_cast<std::size_t>(i)]; }
    double& dd_ref(int i, int j) noexcept { return hess_[tri(i, j)]; }

    std::vector<double> gradient() const { return {grad_.begin(), grad_.begin() + n_}; }

    bool is_constant() const noexcept {
        for (int i = 0; i < n_; ++i)
            if (grad_[static_cast<std::size_t>(i)] != 0.0) return false;
        for (int k = 0; k < n_ * (n_ + 1) / 2; ++k)
            if (hess_[static_cast<std::size_t>(k)] != 0.0) return false;
        return true;
    }

    /// Composition f(*this) given f, f', f'' at value().
    Jet2 chain(double f0, double f1, double f2) const {
        Jet2 r;
        r.n_ = n_;
        r.value_ = f0;
        for (int i = 0; i < n_; ++i) r.grad_[ui(i)] = f1 * grad_[ui(i)];
        for (int i = 0; i < n_; ++i)
            for (int j = i; j < n_; ++j)
                r.hess_[tri(i, j)] = f1 * hess_[tri(i, j)] + f2 * grad_[ui(i)] * grad_[ui(j)];
        return r;
    }

    Jet2& operator+=(const Jet2& o) {
        value_ += o.value_;
        for (int i = 0; i < n_; ++i) grad_[ui(i)] += o.grad_[ui(i)];
        for (std::size_t k = 0; k < kTriangle; ++k) hess_[k] += o.hess_[k];
        return *this;
    }
    Jet2& operator-=(const Jet2& o) {
        value_ -= o.value_;
        for (int i = 0; i < n_; ++i) grad_[ui(i)] -= o.grad_[ui(i)];
        for (std::size_t k = 0; k < kTriangle; ++k) hess_[k] -= o.hess_[k];
        return *this;
    }
    Jet2& operator*=(double s) {
        value_ *= s;
        for (auto& g : grad_) g *= s;
        for (auto& h : hess_) h *= s;
        return *this;
    }

    friend Jet2 operator+(Jet2 a, const Jet2& b) { return a += b; }
    friend Jet2 operator-(Jet2 a, const Jet2& b) { return a -= b; }
    friend Jet2 operator-(Jet2 a) { return a *= -1.0; }
    friend Jet2 operator*(Jet2 a, double s) { return a *= s; }
    friend Jet2 operator*(double s, Jet2 a) { return a *= s; }
    friend Jet2 operator+(Jet2 a, double s) {
        a.value_ += s;
        return a;
    }
    friend Jet2 operator+(double s, Jet2 a) { return a + s; }
    friend Jet2 operator-(Jet2 a, double s) { return a + (-s); }
    friend Jet2 operator-(double s, const Jet2& a) { return (-a) + s; }

    friend Jet2 operator*(const Jet2& a, const Jet2& b) {
        Jet2 r;
        r.n_ = a.n_;
        r.value_ = a.value_ * b.value_;
        for (int i = 0; i < a.n_; ++i) r.grad_[ui(i)] = a.value_ * b.grad_[ui(i)] + b.value_ * a.grad_[ui(i)];
        for (int i = 0; i < a.n_; ++i)
            for (int j = i; j < a.n_; ++j)
                r.hess_[tri(i, j)] = a.value_ * b.hess_[tri(i, j)] + b.value_ * a.hess_[tri(i, j)] +
                                     a.grad_[ui(i)] * b.grad_[ui(j)] + a.grad_[ui(j)] * b.grad_[ui(i)];
        return r;
    }

    friend Jet2 operator/(const Jet2& a, const Jet2& b) {
        const double v = b.value_;
        return a * b.chain(1.0 / v, -1.0 / (v * v), 2.0 / (v * v * v));
    }
    friend Jet2 operator/(const Jet2& a, double s) { return a * (1.0 / s); }

private:
    static constexpr std::size_t ui(int i) { return static_cast<std::size_t>(i); }
    static constexpr std::size_t tri(int i, int j) {
        if (i > j) std::swap(i, j);
        // row-major upper triangle of a kMaxVars x kMaxVars matrix
        return static_cast<std::size_t>(i * kMaxVars - i * (i - 1) / 2 + (j - i));
    }

    int n_ = 0;
    double value_ = 0.0;
    std::array<double, kMaxVars> grad_{};
    std::array<double, kTriangle> hess_{};
};

inline Jet2 sin(const Jet2& a) {
    const double s = std::sin(a.value()), c = std::cos(a.value());
    return a.chain(s, c, -s);
}
inline Jet2 cos(const Jet2& a) {
    const double s = std::sin(a.value()), c = std::cos(a.value());
    return a.chain(c, -s, -c);
}
inline Jet2 exp(const Jet2& a) {
    const double e = std::exp(a.value());
    return a.chain(e, e, e);
}
inline Jet2 log(const Jet2& a) {
    const double v = a.value();
    return a.chain(std::log(v), 1.0 / v, -1.0 / (v * v));
}
inline Jet2 sqrt(const Jet2& a) {
    const double s = std::sqrt(a.value());
    return a.chain(s, 0.5 / s, -0.25 / (s * a.value()));
}
/// Real power with a constant exponent; the caller guarantees a.value() > 0
/// unless the exponent is a non-negative integer.
inline Jet2 pow(const Jet2& a, double c) {
    const double v = a.value();
    if (c == 0.0) return Jet2::constant(a.nvars(), 1.0);
    if (c == 1.0) return a;
    if (c == 2.0) return a * a;
    return a.chain(std::pow(v, c), c * std::pow(v, c - 1.0), c * (c - 1.0) * std::pow(v, c - 2.0));
}

// ---------------------------------------------------------------------------
// Abstract syntax tree
// ---------------------------------------------------------------------------

enum class Func { sin, cos, exp, log, sqrt };

inline const char* func_name(Func f) {
    switch (f) {
    case Func::sin: return "sin";
    case Func::cos: return "cos";
    case Func::exp: return "exp";
    case Func::log: return "log";
    case Func::sqrt: return "sqrt";
    }
    return "?";
}

struct ExprNode {
    enum class Kind { constant, variable, negate, binary, call };

    Kind kind = Kind::constant;
    double number = 0.0;       // constant
    int variable = -1;         // variable: position in the chart's variable list
    char op = 0;               // binary: one of + - * / ^
    Func func = Func::sin;     // call
    std::shared_ptr<const ExprNode> lhs, rhs;  // negate/call use lhs only
};

/// Immutable parsed expression, bound positionally to `variables()`.
class ExprAst {
public:
    ExprAst() = default;
    ExprAst(std::shared_ptr<const ExprNode> root, std::vector<std::string> variables, std::string source)
        : root_(std::move(root)), variables_(std::move(variables)), source_(std::move(source)) {}

    const ExprNode& root() const { return *root_; }
    const std::vector<std::string>& variables() const noexcept { return variables_; }
    const std::string& source() const noexcept { return source_; }
    int nvars() const noexcept { return static_cast<int>(variables_.size()); }
    bool empty() const noexcept { return root_ == nullptr; }

private:
    std::shared_ptr<const ExprNode> root_;
    std::vector<std::string> variables_;
    std::string source_;
};

namespace detail {

class ExprParser {
public:
    ExprParser(std::string_view src, const std::vector<std::string>& vars) : src_(src), vars_(vars) {}

    std::shared_ptr<const ExprNode> parse_all() {
        skip_ws();
        if (pos_ >= src_.size()) throw ParseError(pos_, "empty expression");
        auto e = parse_expr(0);
        skip_ws();
        if (pos_ < src_.size()) {
            if (src_[pos_] == ')') throw ParseError(pos_, "unbalanced ')'");
            throw ParseError(pos_, std::string("unexpected '") + src_[pos_] + "'");
        }
        return e;
    }

private:
    using NodePtr = std::shared_ptr<const ExprNode>;

    static constexpr int kUnaryBp = 25;

    static int infix_bp(char c) {
        switch (c) {
        case '+':
        case '-': return 10;
        case '*':
        case '/': return 20;
        case '^': return 30;
        default: return -1;
        }
    }

    void skip_ws() {
        while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) ++pos_;
    }

    NodePtr parse_expr(int min_bp) {
        auto lhs = parse_prefix();
        for (;;) {
            skip_ws();
            if (pos_ >= src_.size()) break;
            const char c = src_[pos_];
            const int bp = infix_bp(c);
            if (bp < 0 || bp <= min_bp) break;
            ++pos_;
            // '^' is right-associative: the right operand may contain another '^'.
            auto rhs = parse_expr(c == '^' ? bp - 1 : bp);
            auto n = std::make_shared<ExprNode>();
            n->kind = ExprNode::Kind::binary;
            n->op = c;
            n->lhs = std::move(lhs);
            n->rhs = std::move(rhs);
            lhs = std::move(n);
        }
        return lhs;
    }

    NodePtr parse_prefix() {
        skip_ws();
        if (pos_ >= src_.size()) throw ParseError(pos_, "missing operand");
        const char c = src_[pos_];
        if (c == '-' || c == '+') {
            ++pos_;
            auto operand = parse_expr(kUnaryBp);
            if (c == '+') return operand;
            auto n = std::make_shared<ExprNode>();
            n->kind = ExprNode::Kind::negate;
            n->lhs = std::move(operand);
            return n;
        }
        if (c == '(') {
            const std::size_t open = pos_;
            ++pos_;
            auto inner = parse_expr(0);
            skip_ws();
            if (pos_ >= src_.size() || src_[pos_] != ')') throw ParseError(open, "unbalanced '('");
            ++pos_;
            return inner;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return parse_number();
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return parse_identifier();
        if (c == ')') throw ParseError(pos_, "missing operand before ')'");
        throw ParseError(pos_, std::string("missing operand before '") + c + "'");
    }

    NodePtr parse_number() {
        const std::size_t start = pos_;
        const std::string rest(src_.substr(pos_));
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(rest, &used);
        } catch (const std::exception&) {
            throw ParseError(start, "malformed number");
        }
        pos_ += used;
        auto n = std::make_shared<ExprNode>();
        n->kind = ExprNode::Kind::constant;
        n->number = v;
        return n;
    }

    NodePtr parse_identifier() {
        const std::size_t start = pos_;
        while (pos_ < src_.size() &&
               (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_'))
            ++pos_;
        const std::string name(src_.substr(start, pos_ - start));

        for (std::size_t i = 0; i < vars_.size(); ++i) {
            if (vars_[i] == name) {
                auto n = std::make_shared<ExprNode>();
                n->kind = ExprNode::Kind::variable;
                n->variable = static_cast<int>(i);
                return n;
            }
        }
        if (name == "pi") {
            auto n = std::make_shared<ExprNode>();
            n->number = std::numbers::pi;
            return n;
        }
        static constexpr std::array<Func, 5> funcs{Func::sin, Func::cos, Func::exp, Func::log, Func::sqrt};
        for (Func f : funcs) {
            if (name != func_name(f)) continue;
            skip_ws();
            if (pos_ >= src_.size() || src_[pos_] != '(')
                throw ParseError(pos_, "expected '(' after function '" + name + "'");
            const std::size_t open = pos_;
            ++pos_;
            auto arg = parse_expr(0);
            skip_ws();
            if (pos_ >= src_.size() || src_[pos_] != ')') throw ParseError(open, "unbalanced '('");
            ++pos_;
            auto n = std::make_shared<ExprNode>();
            n->kind = ExprNode::Kind::call;
            n->func = f;
            n->lhs = std::move(arg);
            return n;
        }
        throw ParseError(start, "unknown identifier '" + name + "'");
    }

    std::string_view src_;
    const std::vector<std::string>& vars_;
    std::size_t pos_ = 0;
};

inline std::string format_number(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline void print_node(const ExprNode& n, const std::vector<std::string>& vars, std::string& out) {
    switch (n.kind) {
    case ExprNode::Kind::constant: out += format_number(n.number); break;
    case ExprNode::Kind::variable: out += vars[static_cast<std::size_t>(n.variable)]; break;
    case ExprNode::Kind::negate:
        out += "(-";
        print_node(*n.lhs, vars, out);
        out += ')';
        break;
    case ExprNode::Kind::binary:
        out += '(';
        print_node(*n.lhs, vars, out);
        out += ' ';
        out += n.op;
        out += ' ';
        print_node(*n.rhs, vars, out);
        out += ')';
        break;
    case ExprNode::Kind::call:
        out += func_name(n.func);
        out += '(';
        print_node(*n.lhs, vars, out);
        out += ')';
        break;
    }
}

inline double value_of(double v) { return v; }
inline double value_of(const Jet2& j) { return j.value(); }

inline bool is_integer(double c) { return std::isfinite(c) && c == std::nearbyint(c) && std::abs(c) < 1e6; }

template <class T>
T make_constant(double v, int nvars) {
    if constexpr (std::is_same_v<T, Jet2>) return Jet2::constant(nvars, v);
    else return v;
}

template <class T>
T integer_power(const T& base, long e, int nvars) {
    if (e < 0) return make_constant<T>(1.0, nvars) / integer_power(base, -e, nvars);
    T result = make_constant<T>(1.0, nvars);
    T b = base;
    while (e > 0) {
        if (e & 1) result = result * b;
        b = b * b;
        e >>= 1;
    }
    return result;
}

template <class T>
T eval_node(const ExprNode& n, std::span<const T> point, const std::vector<std::string>& vars, int nv) {
    using std::cos, std::exp, std::log, std::sin, std::sqrt;
    auto domain_error = [&](const std::string& why) {
        std::string s;
        print_node(n, vars, s);
        return DomainError(why + " in subexpression " + s);
    };

    switch (n.kind) {
    case ExprNode::Kind::constant: return make_constant<T>(n.number, nv);
    case ExprNode::Kind::variable: return point[static_cast<std::size_t>(n.variable)];
    case ExprNode::Kind::negate: return -eval_node<T>(*n.lhs, point, vars, nv);
    case ExprNode::Kind::call: {
        const T a = eval_node<T>(*n.lhs, point, vars, nv);
        switch (n.func) {
        case Func::sin: return sin(a);
        case Func::cos: return cos(a);
        case Func::exp: return exp(a);
        case Func::log:
            if (!(value_of(a) > 0.0)) throw domain_error("log of non-positive value");
            return log(a);
        case Func::sqrt:
            if (!(value_of(a) > 0.0)) throw domain_error("sqrt of non-positive value");
            return sqrt(a);
        }
        break;
    }
    case ExprNode::Kind::binary: {
        const T a = eval_node<T>(*n.lhs, point, vars, nv);
        const T b = eval_node<T>(*n.rhs, point, vars, nv);
        switch (n.op) {
        case '+': return a + b;
        case '-': return a - b;
        case '*': return a * b;
        case '/':
            if (value_of(b) == 0.0) throw domain_error("division by zero");
            return a / b;
        case '^': {
            bool const_exponent = true;
            if constexpr (std::is_same_v<T, Jet2>) const_exponent = b.is_constant();
            const double c = value_of(b);
            if (const_exponent && is_integer(c)) {
                if (c < 0 && value_of(a) == 0.0) throw domain_error("zero raised to a negative power");
                return integer_power(a, static_cast<long>(c), nv);
            }
            if (!(value_of(a) > 0.0)) throw domain_error("non-integer power of non-positive base");
            if (const_exponent) {
                if constexpr (std::is_same_v<T, Jet2>) return pow(a, c);
                else return std::pow(a, c);
            }
            return exp(b * log(a));
        }
        default: break;
        }
        break;
    }
    }
    throw Error("corrupt expression tree");
}

inline bool nodes_equal(const ExprNode& a, const ExprNode& b) {
    if (a.kind != b.kind) return false;
    switch (a.kind) {
    case ExprNode::Kind::constant: return a.number == b.number;
    case ExprNode::Kind::variable: return a.variable == b.variable;
    case ExprNode::Kind::negate: return nodes_equal(*a.lhs, *b.lhs);
    case ExprNode::Kind::call: return a.func == b.func && nodes_equal(*a.lhs, *b.lhs);
    case ExprNode::Kind::binary:
        return a.op == b.op && nodes_equal(*a.lhs, *b.lhs) && nodes_equal(*a.rhs, *b.rhs);
    }
    return false;
}

} // namespace detail

/// Parses `source` with variables bound by position in `variables`.
/// Grammar: precedence climbing over + - (lowest), * /, unary minus, ^ (right
/// associative, tighter than a unary minus applied to its base), calls to
/// sin cos exp log sqrt, the constant `pi`, and decimal numbers.
inline ExprAst parse(std::string_view source, std::vector<std::string> variables) {
    if (static_cast<int>(variables.size()) > Jet2::kMaxVars)
        throw Error("at most " + std::to_string(Jet2::kMaxVars) + " variables are supported");
    for (std::size_t i = 0; i < variables.size(); ++i)
        for (std::size_t j = i + 1; j < variables.size(); ++j)
            if (variables[i] == variables[j]) throw Error("duplicate variable '" + variables[i] + "'");
    detail::ExprParser parser(source, variables);
    auto root = parser.parse_all();
    return ExprAst(std::move(root), std::move(variables), std::string(source));
}

/// Fully parenthesised canonical text; parse(print(e)) is structurally equal to e.
inline std::string print(const ExprAst& e) {
    std::string out;
    detail::print_node(e.root(), e.variables(), out);
    return out;
}

inline bool structurally_equal(const ExprAst& a, const ExprAst& b) {
    return a.variables() == b.variables() && detail::nodes_equal(a.root(), b.root());
}

inline double eval(const ExprAst& e, std::span<const double> point) {
    if (static_cast<int>(point.size()) != e.nvars()) throw Error("point dimension does not match variable list");
    return detail::eval_node<double>(e.root(), point, e.variables(), 0);
}

inline Jet2 eval_jet2(const ExprAst& e, std::span<const double> point) {
    const int n = e.nvars();
    if (static_cast<int>(point.size()) != n) throw Error("point dimension does not match variable list");
    std::vector<Jet2> seeds;
    seeds.reserve(point.size());
    for (int i = 0; i < n; ++i) seeds.push_back(Jet2::variable(n, i, point[static_cast<std::size_t>(i)]));
    return detail::eval_node<Jet2>(e.root(), std::span<const Jet2>(seeds), e.variables(), n);
}

/// Evaluates with jet inputs supplied by the caller, e.g. to embed a function
/// of a subset of the chart coordinates into the full chart.
inline Jet2 eval_jet2(const ExprAst& e, std::span<const Jet2> point) {
    if (static_cast<int>(point.size()) != e.nvars()) throw Error("point dimension does not match variable list");
    const int nv = point.empty() ? 0 : point.front().nvars();
    return detail::eval_node<Jet2>(e.root(), point, e.variables(), nv);
}

} // namespace geonull
