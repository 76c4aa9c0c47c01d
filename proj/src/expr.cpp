#include "tsvar/expr.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <sstream>

namespace tsvar {

namespace {

constexpr int kMaxVars = 12;

// Second-order forward-mode number: value, gradient and packed Hessian over
// at most kMaxVars variables. Fixed-capacity storage keeps the solver inner
// loops free of allocation.
struct Jet {
    int n = 0;
    double v = 0;
    std::array<double, kMaxVars> g{};
    std::array<double, kMaxVars*(kMaxVars + 1) / 2> h{};

    static int pk(int i, int j) {
        if (i > j) std::swap(i, j);
        return j * (j + 1) / 2 + i;
    }
    int terms() const { return n * (n + 1) / 2; }
};

void jet_const(Jet& out, int n, double c) {
    out.n = n;
    out.v = c;
    out.g.fill(0);
    out.h.fill(0);
}

void jet_var(Jet& out, int n, int idx, double value) {
    jet_const(out, n, value);
    out.g[static_cast<size_t>(idx)] = 1.0;
}

void jet_add(Jet& a, const Jet& b) {
    a.v += b.v;
    for (int i = 0; i < a.n; ++i) a.g[i] += b.g[i];
    for (int k = 0; k < a.terms(); ++k) a.h[k] += b.h[k];
}

void jet_sub(Jet& a, const Jet& b) {
    a.v -= b.v;
    for (int i = 0; i < a.n; ++i) a.g[i] -= b.g[i];
    for (int k = 0; k < a.terms(); ++k) a.h[k] -= b.h[k];
}

void jet_neg(Jet& a) {
    a.v = -a.v;
    for (int i = 0; i < a.n; ++i) a.g[i] = -a.g[i];
    for (int k = 0; k < a.terms(); ++k) a.h[k] = -a.h[k];
}

void jet_mul(Jet& a, const Jet& b) {
    for (int j = 0; j < a.n; ++j)
        for (int i = 0; i <= j; ++i) {
            int k = Jet::pk(i, j);
            a.h[k] = a.h[k] * b.v + a.g[i] * b.g[j] + a.g[j] * b.g[i] + a.v * b.h[k];
        }
    for (int i = 0; i < a.n; ++i) a.g[i] = a.g[i] * b.v + a.v * b.g[i];
    a.v *= b.v;
}

// Chain rule through a scalar function f with f' = d1, f'' = d2 at a.v.
void jet_chain(Jet& a, double fv, double d1, double d2) {
    for (int j = 0; j < a.n; ++j)
        for (int i = 0; i <= j; ++i) {
            int k = Jet::pk(i, j);
            a.h[k] = d1 * a.h[k] + d2 * a.g[i] * a.g[j];
        }
    for (int i = 0; i < a.n; ++i) a.g[i] *= d1;
    a.v = fv;
}

// Two-argument chain rule f(a, b): value fv, first partials (fa, fb) and
// second partials (faa, fab, fbb). Writing the value separately keeps it
// bitwise identical to the plain evaluation path.
void jet_chain2(Jet& a, const Jet& b, double fv, double fa, double fb, double faa, double fab,
                double fbb) {
    for (int j = 0; j < a.n; ++j)
        for (int i = 0; i <= j; ++i) {
            int k = Jet::pk(i, j);
            a.h[k] = fa * a.h[k] + fb * b.h[k] + faa * a.g[i] * a.g[j] +
                     fab * (a.g[i] * b.g[j] + a.g[j] * b.g[i]) + fbb * b.g[i] * b.g[j];
        }
    for (int i = 0; i < a.n; ++i) a.g[i] = fa * a.g[i] + fb * b.g[i];
    a.v = fv;
}

enum class Op { num, var, add, sub, mul, div, pow, neg, call };
enum class Fn { sin, cos, exp, log, sqrt, abs };

const char* fn_name(Fn f) {
    switch (f) {
        case Fn::sin: return "sin";
        case Fn::cos: return "cos";
        case Fn::exp: return "exp";
        case Fn::log: return "log";
        case Fn::sqrt: return "sqrt";
        case Fn::abs: return "abs";
    }
    return "?";
}

} // namespace

struct Expression::Node {
    Op op;
    double num = 0;
    int var = -1;
    Fn fn = Fn::sin;
    std::shared_ptr<const Node> a, b;
};

namespace {

using NodePtr = std::shared_ptr<const Expression::Node>;

std::string pretty_node(const Expression::Node& n, const std::vector<std::string>& vars);

[[noreturn]] void fault(const Expression::Node& n, const std::vector<std::string>& vars,
                        const std::string& what) {
    throw eval_error("domain fault: " + what + " in subexpression '" + pretty_node(n, vars) + "'");
}

bool integral_exponent(double e, long long& out) {
    if (!std::isfinite(e) || std::fabs(e) > 1e15) return false;
    double r = std::round(e);
    if (r != e) return false;
    out = static_cast<long long>(r);
    return true;
}

double int_pow(double base, long long e) {
    if (e == 0) return 1.0;
    bool inv = e < 0;
    unsigned long long k = inv ? static_cast<unsigned long long>(-e)
                               : static_cast<unsigned long long>(e);
    double acc = 1.0, sq = base;
    while (k) {
        if (k & 1ULL) acc *= sq;
        sq *= sq;
        k >>= 1ULL;
    }
    return inv ? 1.0 / acc : acc;
}

// Evaluation over a generic scalar carrier. Scalar = double for plain eval,
// Jet for derivative propagation; only the leaf and chain steps differ.
double eval_node_d(const Expression::Node& n, std::span<const double> x,
                   const std::vector<std::string>& vars) {
    switch (n.op) {
        case Op::num: return n.num;
        case Op::var: return x[static_cast<size_t>(n.var)];
        case Op::add: return eval_node_d(*n.a, x, vars) + eval_node_d(*n.b, x, vars);
        case Op::sub: return eval_node_d(*n.a, x, vars) - eval_node_d(*n.b, x, vars);
        case Op::mul: return eval_node_d(*n.a, x, vars) * eval_node_d(*n.b, x, vars);
        case Op::div: {
            double da = eval_node_d(*n.a, x, vars);
            double db = eval_node_d(*n.b, x, vars);
            if (db == 0.0) fault(n, vars, "division by zero");
            return da / db;
        }
        case Op::neg: return -eval_node_d(*n.a, x, vars);
        case Op::pow: {
            double base = eval_node_d(*n.a, x, vars);
            double e = eval_node_d(*n.b, x, vars);
            long long k;
            if (integral_exponent(e, k)) {
                if (base == 0.0 && k < 0) fault(n, vars, "0 raised to a negative power");
                return int_pow(base, k);
            }
            if (base <= 0.0) fault(n, vars, "non-integer power of a non-positive base");
            return std::pow(base, e);
        }
        case Op::call: {
            double a = eval_node_d(*n.a, x, vars);
            switch (n.fn) {
                case Fn::sin: return std::sin(a);
                case Fn::cos: return std::cos(a);
                case Fn::exp: return std::exp(a);
                case Fn::log:
                    if (a <= 0.0) fault(n, vars, "log of a non-positive number");
                    return std::log(a);
                case Fn::sqrt:
                    if (a < 0.0) fault(n, vars, "sqrt of a negative number");
                    return std::sqrt(a);
                case Fn::abs: return std::fabs(a);
            }
        }
    }
    fault(n, vars, "unreachable");
}

void eval_node_jet(const Expression::Node& n, std::span<const double> x,
                   const std::vector<std::string>& vars, Jet& out) {
    int nv = static_cast<int>(vars.size());
    switch (n.op) {
        case Op::num: jet_const(out, nv, n.num); return;
        case Op::var: jet_var(out, nv, n.var, x[static_cast<size_t>(n.var)]); return;
        case Op::add: {
            Jet rhs;
            eval_node_jet(*n.a, x, vars, out);
            eval_node_jet(*n.b, x, vars, rhs);
            jet_add(out, rhs);
            return;
        }
        case Op::sub: {
            Jet rhs;
            eval_node_jet(*n.a, x, vars, out);
            eval_node_jet(*n.b, x, vars, rhs);
            jet_sub(out, rhs);
            return;
        }
        case Op::mul: {
            Jet rhs;
            eval_node_jet(*n.a, x, vars, out);
            eval_node_jet(*n.b, x, vars, rhs);
            jet_mul(out, rhs);
            return;
        }
        case Op::div: {
            Jet rhs;
            eval_node_jet(*n.a, x, vars, out);
            eval_node_jet(*n.b, x, vars, rhs);
            if (rhs.v == 0.0) fault(n, vars, "division by zero");
            double av = out.v, bv = rhs.v;
            jet_chain2(out, rhs, av / bv, 1.0 / bv, -av / (bv * bv), 0.0, -1.0 / (bv * bv),
                       2.0 * av / (bv * bv * bv));
            return;
        }
        case Op::neg:
            eval_node_jet(*n.a, x, vars, out);
            jet_neg(out);
            return;
        case Op::pow: {
            Jet e;
            eval_node_jet(*n.a, x, vars, out);
            eval_node_jet(*n.b, x, vars, e);
            long long k;
            bool e_const = true;
            for (int i = 0; i < e.n && e_const; ++i) e_const = e.g[i] == 0.0;
            for (int i = 0; i < e.terms() && e_const; ++i) e_const = e.h[i] == 0.0;
            if (e_const && integral_exponent(e.v, k)) {
                if (out.v == 0.0 && k < 0) fault(n, vars, "0 raised to a negative power");
                // d/dx x^k = k x^(k-1), exact for negative bases too
                double fv = int_pow(out.v, k);
                double d1 = (k == 0) ? 0.0 : static_cast<double>(k) * int_pow(out.v, k - 1);
                double d2 = (k == 0 || k == 1)
                                ? 0.0
                                : static_cast<double>(k) * static_cast<double>(k - 1) *
                                      int_pow(out.v, k - 2);
                if (out.v == 0.0 && k >= 0) {
                    d1 = (k == 1) ? 1.0 : 0.0;
                    d2 = (k == 2) ? 2.0 : 0.0;
                }
                jet_chain(out, fv, d1, d2);
                return;
            }
            if (out.v <= 0.0) fault(n, vars, "non-integer power of a non-positive base");
            // general base^exponent through the two-argument chain rule,
            // value taken straight from pow
            double bv = out.v, ev = e.v;
            double fv = std::pow(bv, ev);
            double lnb = std::log(bv);
            double fb = ev * std::pow(bv, ev - 1.0);
            double fe = fv * lnb;
            double fbb = ev * (ev - 1.0) * std::pow(bv, ev - 2.0);
            double fbe = std::pow(bv, ev - 1.0) * (1.0 + ev * lnb);
            double fee = fv * lnb * lnb;
            jet_chain2(out, e, fv, fb, fe, fbb, fbe, fee);
            return;
        }
        case Op::call: {
            eval_node_jet(*n.a, x, vars, out);
            double a = out.v;
            switch (n.fn) {
                case Fn::sin: jet_chain(out, std::sin(a), std::cos(a), -std::sin(a)); return;
                case Fn::cos: jet_chain(out, std::cos(a), -std::sin(a), -std::cos(a)); return;
                case Fn::exp: {
                    double ea = std::exp(a);
                    jet_chain(out, ea, ea, ea);
                    return;
                }
                case Fn::log:
                    if (a <= 0.0) fault(n, vars, "log of a non-positive number");
                    jet_chain(out, std::log(a), 1.0 / a, -1.0 / (a * a));
                    return;
                case Fn::sqrt: {
                    if (a < 0.0) fault(n, vars, "sqrt of a negative number");
                    if (a == 0.0) fault(n, vars, "derivative of sqrt at zero");
                    double s = std::sqrt(a);
                    jet_chain(out, s, 0.5 / s, -0.25 / (s * a));
                    return;
                }
                case Fn::abs:
                    // slope 0 at the kink keeps the propagation finite
                    jet_chain(out, std::fabs(a), a > 0 ? 1.0 : (a < 0 ? -1.0 : 0.0), 0.0);
                    return;
            }
        }
    }
    fault(n, vars, "unreachable");
}

// ---------------------------------------------------------------------------
// Lexer + recursive-descent parser
// ---------------------------------------------------------------------------

struct Token {
    enum class Kind { num, ident, op, lparen, rparen, comma, end } kind;
    double num = 0;
    std::string text;
    char op = 0;
    int column = 0; // 1-based
};

std::vector<Token> lex(const std::string& s) {
    std::vector<Token> out;
    size_t i = 0;
    while (i < s.size()) {
        char c = s[i];
        if (std::isspace(static_cast<unsigned char>(c))) {
            ++i;
            continue;
        }
        int col = static_cast<int>(i) + 1;
        if (std::isdigit(static_cast<unsigned char>(c)) ||
            (c == '.' && i + 1 < s.size() && std::isdigit(static_cast<unsigned char>(s[i + 1])))) {
            char* end = nullptr;
            double v = std::strtod(s.c_str() + i, &end);
            size_t len = static_cast<size_t>(end - (s.c_str() + i));
            if (len == 0) throw parse_error("bad number at column " + std::to_string(col), col);
            out.push_back({Token::Kind::num, v, s.substr(i, len), 0, col});
            i += len;
            continue;
        }
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            size_t j = i;
            while (j < s.size() &&
                   (std::isalnum(static_cast<unsigned char>(s[j])) || s[j] == '_'))
                ++j;
            out.push_back({Token::Kind::ident, 0, s.substr(i, j - i), 0, col});
            i = j;
            continue;
        }
        switch (c) {
            case '+': case '-': case '*': case '/': case '^':
                out.push_back({Token::Kind::op, 0, std::string(1, c), c, col});
                break;
            case '(': out.push_back({Token::Kind::lparen, 0, "(", 0, col}); break;
            case ')': out.push_back({Token::Kind::rparen, 0, ")", 0, col}); break;
            case ',': out.push_back({Token::Kind::comma, 0, ",", 0, col}); break;
            default:
                throw parse_error(std::string("unexpected character '") + c + "' at column " +
                                      std::to_string(col),
                                  col);
        }
        ++i;
    }
    out.push_back({Token::Kind::end, 0, "", 0, static_cast<int>(s.size()) + 1});
    return out;
}

struct Parser {
    const std::vector<Token>& toks;
    const std::vector<std::string>& vars;
    size_t pos = 0;

    const Token& peek() const { return toks[pos]; }
    const Token& take() { return toks[pos++]; }

    bool at_op(char c) const {
        return peek().kind == Token::Kind::op && peek().op == c;
    }

    NodePtr mk(Expression::Node n) {
        return std::make_shared<Expression::Node>(std::move(n));
    }

    NodePtr expression() {
        NodePtr left = term();
        while (at_op('+') || at_op('-')) {
            char op = take().op;
            NodePtr right = term();
            Expression::Node n;
            n.op = op == '+' ? Op::add : Op::sub;
            n.a = left;
            n.b = right;
            left = mk(std::move(n));
        }
        return left;
    }

    NodePtr term() {
        NodePtr left = factor();
        while (at_op('*') || at_op('/')) {
            char op = take().op;
            NodePtr right = factor();
            Expression::Node n;
            n.op = op == '*' ? Op::mul : Op::div;
            n.a = left;
            n.b = right;
            left = mk(std::move(n));
        }
        return left;
    }

    // factor handles unary minus, which binds looser than ^ (so -x^2 is
    // -(x^2)) but tighter than * and /.
    NodePtr factor() {
        if (at_op('-')) {
            take();
            Expression::Node n;
            n.op = Op::neg;
            n.a = factor();
            return mk(std::move(n));
        }
        return power();
    }

    NodePtr power() {
        NodePtr base = primary();
        if (at_op('^')) {
            take();
            // right-associative; the exponent may carry its own unary minus
            NodePtr e = factor();
            Expression::Node n;
            n.op = Op::pow;
            n.a = base;
            n.b = e;
            return mk(std::move(n));
        }
        return base;
    }

    NodePtr primary() {
        const Token& t = peek();
        if (t.kind == Token::Kind::num) {
            take();
            Expression::Node n;
            n.op = Op::num;
            n.num = t.num;
            return mk(std::move(n));
        }
        if (t.kind == Token::Kind::lparen) {
            take();
            NodePtr inner = expression();
            if (peek().kind != Token::Kind::rparen)
                throw parse_error("expected ')' at column " + std::to_string(peek().column),
                                  peek().column);
            take();
            return inner;
        }
        if (t.kind == Token::Kind::ident) {
            take();
            if (peek().kind == Token::Kind::lparen) {
                static const std::pair<const char*, Fn> fns[] = {
                    {"sin", Fn::sin}, {"cos", Fn::cos},   {"exp", Fn::exp},
                    {"log", Fn::log}, {"sqrt", Fn::sqrt}, {"abs", Fn::abs},
                };
                for (auto& [name, fn] : fns) {
                    if (t.text == name) {
                        take(); // (
                        NodePtr arg = expression();
                        if (peek().kind != Token::Kind::rparen)
                            throw parse_error("expected ')' at column " +
                                                  std::to_string(peek().column),
                                              peek().column);
                        take();
                        Expression::Node n;
                        n.op = Op::call;
                        n.fn = fn;
                        n.a = arg;
                        return mk(std::move(n));
                    }
                }
                throw parse_error("unknown function '" + t.text + "' at column " +
                                      std::to_string(t.column),
                                  t.column);
            }
            if (t.text == "pi") {
                Expression::Node n;
                n.op = Op::num;
                n.num = 3.14159265358979323846;
                return mk(std::move(n));
            }
            if (t.text == "e") {
                Expression::Node n;
                n.op = Op::num;
                n.num = 2.71828182845904523536;
                return mk(std::move(n));
            }
            auto it = std::find(vars.begin(), vars.end(), t.text);
            if (it == vars.end())
                throw parse_error("undeclared identifier '" + t.text + "' at column " +
                                      std::to_string(t.column),
                                  t.column);
            Expression::Node n;
            n.op = Op::var;
            n.var = static_cast<int>(it - vars.begin());
            return mk(std::move(n));
        }
        throw parse_error("expected a value at column " + std::to_string(t.column), t.column);
    }
};

int prec(Op op) {
    switch (op) {
        case Op::add: case Op::sub: return 1;
        case Op::mul: case Op::div: return 2;
        case Op::neg: return 3;
        case Op::pow: return 4;
        default: return 5;
    }
}

std::string pretty_node(const Expression::Node& n, const std::vector<std::string>& vars) {
    auto paren = [&](const Expression::Node& child, bool need) {
        std::string s = pretty_node(child, vars);
        return need ? "(" + s + ")" : s;
    };
    switch (n.op) {
        case Op::num: {
            std::ostringstream os;
            os.precision(17);
            os << n.num;
            return os.str();
        }
        case Op::var: return vars[static_cast<size_t>(n.var)];
        case Op::add:
            return paren(*n.a, prec(n.a->op) < 1) + " + " + paren(*n.b, prec(n.b->op) < 1);
        case Op::sub:
            return paren(*n.a, prec(n.a->op) < 1) + " - " + paren(*n.b, prec(n.b->op) <= 1);
        case Op::mul:
            return paren(*n.a, prec(n.a->op) < 2) + "*" + paren(*n.b, prec(n.b->op) < 2);
        case Op::div:
            return paren(*n.a, prec(n.a->op) < 2) + "/" + paren(*n.b, prec(n.b->op) <= 2);
        case Op::neg: return "-" + paren(*n.a, prec(n.a->op) < 3);
        case Op::pow:
            // right-associative: parens on the base when it is any compound
            return paren(*n.a, prec(n.a->op) <= 4 && n.a->op != Op::num && n.a->op != Op::var &&
                                   n.a->op != Op::call) +
                   "^" + paren(*n.b, prec(n.b->op) < 3);
        case Op::call: return std::string(fn_name(n.fn)) + "(" + pretty_node(*n.a, vars) + ")";
    }
    return "?";
}

bool nodes_equal(const Expression::Node& a, const Expression::Node& b) {
    if (a.op != b.op) return false;
    switch (a.op) {
        case Op::num: return a.num == b.num;
        case Op::var: return a.var == b.var;
        case Op::call:
            return a.fn == b.fn && nodes_equal(*a.a, *b.a);
        case Op::neg: return nodes_equal(*a.a, *b.a);
        default: return nodes_equal(*a.a, *b.a) && nodes_equal(*a.b, *b.b);
    }
}

} // namespace

Expression Expression::parse(const std::string& text, std::vector<std::string> vars) {
    if (text.empty()) throw parse_error("empty expression", 1);
    if (vars.size() > kMaxVars)
        throw input_error("too many variables (" + std::to_string(vars.size()) +
                          "); the evaluator supports up to " + std::to_string(kMaxVars));
    for (auto& v : vars)
        if (v == "pi" || v == "e")
            throw input_error("variable name '" + v + "' collides with a built-in constant");
    std::vector<Token> toks = lex(text);
    Parser p{toks, vars};
    NodePtr root = p.expression();
    if (p.peek().kind != Token::Kind::end)
        throw parse_error("unexpected input at column " + std::to_string(p.peek().column),
                          p.peek().column);
    Expression e;
    e.root_ = std::move(root);
    e.vars_ = std::move(vars);
    e.src_ = text;
    return e;
}

double Expression::eval(std::span<const double> values) const {
    if (!root_) throw input_error("evaluating an empty expression");
    if (values.size() != vars_.size())
        throw input_error("expression over " + std::to_string(vars_.size()) +
                          " variables evaluated with " + std::to_string(values.size()) +
                          " bindings");
    return eval_node_d(*root_, values, vars_);
}

double Expression::eval_d2(std::span<const double> values, std::span<double> grad,
                           std::span<double> hess_packed) const {
    if (!root_) throw input_error("evaluating an empty expression");
    if (values.size() != vars_.size())
        throw input_error("expression over " + std::to_string(vars_.size()) +
                          " variables evaluated with " + std::to_string(values.size()) +
                          " bindings");
    if (grad.empty() && hess_packed.empty()) return eval_node_d(*root_, values, vars_);
    Jet out;
    eval_node_jet(*root_, values, vars_, out);
    int n = static_cast<int>(vars_.size());
    if (!grad.empty())
        for (int i = 0; i < n; ++i) grad[static_cast<size_t>(i)] = out.g[static_cast<size_t>(i)];
    if (!hess_packed.empty())
        for (int k = 0; k < n * (n + 1) / 2; ++k) hess_packed[static_cast<size_t>(k)] = out.h[static_cast<size_t>(k)];
    return out.v;
}

DiffValue Expression::eval_with_partials(std::span<const double> values) const {
    int n = static_cast<int>(vars_.size());
    DiffValue d;
    d.vars = vars_;
    d.first.assign(static_cast<size_t>(n), 0.0);
    d.second.assign(static_cast<size_t>(n * (n + 1) / 2), 0.0);
    d.value = eval_d2(values, d.first, d.second);
    return d;
}

std::string Expression::pretty() const {
    if (!root_) return "";
    return pretty_node(*root_, vars_);
}

bool Expression::structurally_equal(const Expression& other) const {
    if (!root_ || !other.root_) return root_ == other.root_;
    return vars_ == other.vars_ && nodes_equal(*root_, *other.root_);
}

int DiffValue::pack_index(int i, int j, int n) {
    (void)n;
    if (i > j) std::swap(i, j);
    return j * (j + 1) / 2 + i;
}

double DiffValue::d(const std::string& var) const {
    auto it = std::find(vars.begin(), vars.end(), var);
    if (it == vars.end()) throw input_error("unknown variable '" + var + "' in DiffValue::d");
    return first[static_cast<size_t>(it - vars.begin())];
}

double DiffValue::d2(const std::string& va, const std::string& vb) const {
    auto ia = std::find(vars.begin(), vars.end(), va);
    auto ib = std::find(vars.begin(), vars.end(), vb);
    if (ia == vars.end() || ib == vars.end())
        throw input_error("unknown variable in DiffValue::d2");
    return second[static_cast<size_t>(pack_index(static_cast<int>(ia - vars.begin()),
                                                 static_cast<int>(ib - vars.begin()),
                                                 static_cast<int>(vars.size())))];
}

} // namespace tsvar
