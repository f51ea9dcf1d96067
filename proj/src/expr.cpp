#include "mckv/expr.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <limits>

#include "mckv/error.hpp"

namespace mckv {

namespace {

struct FunctionInfo {
    std::string_view name;
    ExprOp op;
    int arity;
};

constexpr FunctionInfo kFunctions[] = {
    {"exp", ExprOp::kExp, 1},   {"tanh", ExprOp::kTanh, 1}, {"sigmoid", ExprOp::kSigmoid, 1},
    {"sin", ExprOp::kSin, 1},   {"cos", ExprOp::kCos, 1},   {"sqrt", ExprOp::kSqrt, 1},
    {"abs", ExprOp::kAbs, 1},   {"min", ExprOp::kMin, 2},   {"max", ExprOp::kMax, 2},
};

const FunctionInfo* find_function(std::string_view name) {
    for (const auto& f : kFunctions) {
        if (f.name == name) return &f;
    }
    return nullptr;
}

std::string_view function_name(ExprOp op) {
    for (const auto& f : kFunctions) {
        if (f.op == op) return f.name;
    }
    return "?";
}

double sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

}  // namespace

class ExprParser {
public:
    ExprParser(std::string_view text, int dim) : text_(text), dim_(dim) {}

    CoeffExpr run() {
        out_.dim_ = dim_;
        skip_ws();
        const int root = parse_expr();
        skip_ws();
        if (pos_ != text_.size()) error("unexpected '" + std::string(1, text_[pos_]) + "'");
        out_.root_ = root;
        out_.finalize();
        return std::move(out_);
    }

private:
    [[noreturn]] void error(const std::string& msg) const { throw ParseError(pos_, msg); }

    void skip_ws() {
        while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    }

    bool accept(char c) {
        skip_ws();
        if (pos_ < text_.size() && text_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }

    void expect(char c) {
        if (!accept(c)) {
            if (pos_ >= text_.size()) error(std::string("expected '") + c + "' before end of input");
            error(std::string("expected '") + c + "'");
        }
    }

    int add(ExprNode node) {
        out_.nodes_.push_back(node);
        return static_cast<int>(out_.nodes_.size()) - 1;
    }

    int binary(ExprOp op, int lhs, int rhs) {
        ExprNode n;
        n.op = op;
        n.lhs = lhs;
        n.rhs = rhs;
        return add(n);
    }

    int parse_expr() {
        int lhs = parse_term();
        while (true) {
            if (accept('+')) {
                lhs = binary(ExprOp::kAdd, lhs, parse_term());
            } else if (accept('-')) {
                lhs = binary(ExprOp::kSub, lhs, parse_term());
            } else {
                return lhs;
            }
        }
    }

    int parse_term() {
        int lhs = parse_factor();
        while (true) {
            if (accept('*')) {
                lhs = binary(ExprOp::kMul, lhs, parse_factor());
            } else if (accept('/')) {
                lhs = binary(ExprOp::kDiv, lhs, parse_factor());
            } else {
                return lhs;
            }
        }
    }

    int parse_factor() {
        const int base = parse_atom();
        if (accept('^')) return binary(ExprOp::kPow, base, parse_atom());
        return base;
    }

    int parse_number() {
        const char* first = text_.data() + pos_;
        const char* last = text_.data() + text_.size();
        double v = 0.0;
        auto [ptr, ec] = std::from_chars(first, last, v, std::chars_format::general);
        if (ec == std::errc::result_out_of_range) error("numeric literal out of range");
        if (ec != std::errc()) error("malformed number");
        pos_ += static_cast<std::size_t>(ptr - first);
        ExprNode n;
        n.op = ExprOp::kNumber;
        n.value = v;
        return add(n);
    }

    int parse_index(std::string_view ident, std::size_t start) {
        std::string_view digits = ident.substr(1);
        int idx = 0;
        auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), idx);
        if (ec != std::errc() || ptr != digits.data() + digits.size()) {
            pos_ = start;
            error("unknown identifier '" + std::string(ident) + "'");
        }
        if (idx < 1 || idx > dim_) {
            pos_ = start;
            error("index out of range in '" + std::string(ident) + "' (dimension " + std::to_string(dim_) + ")");
        }
        return idx - 1;
    }

    int parse_atom() {
        skip_ws();
        if (pos_ >= text_.size()) error("unexpected end of input");
        const char c = text_[pos_];
        if (c == '(') {
            ++pos_;
            const int inner = parse_expr();
            expect(')');
            return inner;
        }
        if (c == '-') {
            ++pos_;
            ExprNode n;
            n.op = ExprOp::kNeg;
            n.lhs = parse_atom();
            return add(n);
        }
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return parse_number();
        if (!std::isalpha(static_cast<unsigned char>(c)) && c != '_') error(std::string("unexpected '") + c + "'");

        const std::size_t start = pos_;
        while (pos_ < text_.size() &&
               (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_')) {
            ++pos_;
        }
        const std::string_view ident = text_.substr(start, pos_ - start);

        if (ident == "t") {
            ExprNode n;
            n.op = ExprOp::kTime;
            return add(n);
        }
        if (ident == "avg") {
            if (in_avg_) {
                pos_ = start;
                error("nested avg");
            }
            expect('(');
            in_avg_ = true;
            const int body = parse_expr();
            in_avg_ = false;
            expect(')');
            ExprNode n;
            n.op = ExprOp::kAvg;
            n.lhs = body;
            return add(n);
        }
        if (const FunctionInfo* f = find_function(ident)) {
            expect('(');
            ExprNode n;
            n.op = f->op;
            n.lhs = parse_expr();
            if (f->arity == 2) {
                expect(',');
                n.rhs = parse_expr();
            }
            expect(')');
            return add(n);
        }
        if (ident.size() >= 2 && (ident[0] == 'x' || ident[0] == 'y') &&
            std::isdigit(static_cast<unsigned char>(ident[1]))) {
            ExprNode n;
            n.op = ident[0] == 'x' ? ExprOp::kX : ExprOp::kY;
            n.index = parse_index(ident, start);
            if (n.op == ExprOp::kY && !in_avg_) {
                pos_ = start;
                error("'" + std::string(ident) + "' outside avg");
            }
            return add(n);
        }
        pos_ = start;
        error("unknown identifier '" + std::string(ident) + "'");
    }

    std::string_view text_;
    int dim_;
    std::size_t pos_ = 0;
    bool in_avg_ = false;
    CoeffExpr out_;
};

CoeffExpr parse_expr(std::string_view text, int dim) {
    if (dim < 1) throw ConfigError("expression dimension must be positive");
    bool blank = true;
    for (char c : text) blank = blank && std::isspace(static_cast<unsigned char>(c));
    if (blank) throw ConfigError("empty expression");
    return ExprParser(text, dim).run();
}

CoeffExpr CoeffExpr::constant(double v, int dim) {
    CoeffExpr e;
    e.dim_ = dim;
    ExprNode n;
    n.value = v;
    e.nodes_.push_back(n);
    e.root_ = 0;
    e.finalize();
    return e;
}

CoeffExpr combine_average(const CoeffExpr& a, const CoeffExpr& b) {
    if (a.dim() != b.dim()) throw DimensionError("combine_average: dimension mismatch");
    CoeffExpr out;
    out.dim_ = a.dim_;
    out.nodes_ = a.nodes_;
    const int offset = static_cast<int>(out.nodes_.size());
    for (ExprNode n : b.nodes_) {
        if (n.lhs >= 0) n.lhs += offset;
        if (n.rhs >= 0) n.rhs += offset;
        out.nodes_.push_back(n);
    }
    ExprNode sum;
    sum.op = ExprOp::kAdd;
    sum.lhs = a.root_;
    sum.rhs = b.root_ + offset;
    out.nodes_.push_back(sum);
    ExprNode half;
    half.value = 0.5;
    out.nodes_.push_back(half);
    ExprNode prod;
    prod.op = ExprOp::kMul;
    prod.lhs = static_cast<int>(out.nodes_.size()) - 1;
    prod.rhs = static_cast<int>(out.nodes_.size()) - 2;
    out.nodes_.push_back(prod);
    out.root_ = static_cast<int>(out.nodes_.size()) - 1;
    out.finalize();
    return out;
}

void CoeffExpr::finalize() {
    avg_nodes_.clear();
    avg_uses_x_.clear();
    uses_t_ = false;
    uses_x_ = false;
    // Children always precede parents, so a forward pass sees bodies first.
    std::vector<bool> has_x(nodes_.size(), false);
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        ExprNode& n = nodes_[i];
        bool x = n.op == ExprOp::kX;
        if (n.lhs >= 0) x = x || has_x[static_cast<std::size_t>(n.lhs)];
        if (n.rhs >= 0) x = x || has_x[static_cast<std::size_t>(n.rhs)];
        has_x[i] = x;
        if (n.op == ExprOp::kTime) uses_t_ = true;
        if (n.op == ExprOp::kAvg) {
            n.index = static_cast<int>(avg_nodes_.size());
            avg_nodes_.push_back(static_cast<int>(i));
            avg_uses_x_.push_back(x);
        }
    }
    uses_x_ = root_ >= 0 && has_x[static_cast<std::size_t>(root_)];
}

void CoeffExpr::print_node(int id, std::string& out) const {
    const ExprNode& n = nodes_[static_cast<std::size_t>(id)];
    auto binop = [&](const char* sym) {
        out += '(';
        print_node(n.lhs, out);
        out += sym;
        print_node(n.rhs, out);
        out += ')';
    };
    switch (n.op) {
        case ExprOp::kNumber: {
            // Literals are printed as atoms so that '^' and unary minus re-parse.
            const std::string s = format_double(std::fabs(n.value));
            if (std::signbit(n.value)) {
                out += "(-" + s + ")";
            } else {
                out += s;
            }
            break;
        }
        case ExprOp::kTime: out += 't'; break;
        case ExprOp::kX: out += 'x' + std::to_string(n.index + 1); break;
        case ExprOp::kY: out += 'y' + std::to_string(n.index + 1); break;
        case ExprOp::kAdd: binop(" + "); break;
        case ExprOp::kSub: binop(" - "); break;
        case ExprOp::kMul: binop(" * "); break;
        case ExprOp::kDiv: binop(" / "); break;
        case ExprOp::kPow: binop(" ^ "); break;
        case ExprOp::kNeg:
            out += "(-";
            print_node(n.lhs, out);
            out += ')';
            break;
        case ExprOp::kAvg:
            out += "avg(";
            print_node(n.lhs, out);
            out += ')';
            break;
        case ExprOp::kMin:
        case ExprOp::kMax:
            out += function_name(n.op);
            out += '(';
            print_node(n.lhs, out);
            out += ", ";
            print_node(n.rhs, out);
            out += ')';
            break;
        default:
            out += function_name(n.op);
            out += '(';
            print_node(n.lhs, out);
            out += ')';
            break;
    }
}

std::string CoeffExpr::to_string() const {
    std::string out;
    if (root_ >= 0) print_node(root_, out);
    return out;
}

void CoeffExpr::fail(int id, const char* why) const {
    std::string sub;
    print_node(id, sub);
    throw EvalError(sub, why);
}

double CoeffExpr::eval_node(int id, double t, std::span<const double> x, std::span<const double> y,
                            const EmpiricalMeasure* mu, std::span<const double> avg_cache) const {
    const ExprNode& n = nodes_[static_cast<std::size_t>(id)];
    auto child = [&](int c) { return eval_node(c, t, x, y, mu, avg_cache); };
    double v = 0.0;
    switch (n.op) {
        case ExprOp::kNumber: return n.value;
        case ExprOp::kTime: return t;
        case ExprOp::kX: return x[static_cast<std::size_t>(n.index)];
        case ExprOp::kY: return y[static_cast<std::size_t>(n.index)];
        case ExprOp::kAdd: v = child(n.lhs) + child(n.rhs); break;
        case ExprOp::kSub: v = child(n.lhs) - child(n.rhs); break;
        case ExprOp::kMul: v = child(n.lhs) * child(n.rhs); break;
        case ExprOp::kDiv: v = child(n.lhs) / child(n.rhs); break;
        case ExprOp::kPow: v = std::pow(child(n.lhs), child(n.rhs)); break;
        case ExprOp::kNeg: v = -child(n.lhs); break;
        case ExprOp::kExp: v = std::exp(child(n.lhs)); break;
        case ExprOp::kTanh: v = std::tanh(child(n.lhs)); break;
        case ExprOp::kSigmoid: v = sigmoid(child(n.lhs)); break;
        case ExprOp::kSin: v = std::sin(child(n.lhs)); break;
        case ExprOp::kCos: v = std::cos(child(n.lhs)); break;
        case ExprOp::kSqrt: v = std::sqrt(child(n.lhs)); break;
        case ExprOp::kAbs: v = std::fabs(child(n.lhs)); break;
        case ExprOp::kMin: v = std::min(child(n.lhs), child(n.rhs)); break;
        case ExprOp::kMax: v = std::max(child(n.lhs), child(n.rhs)); break;
        case ExprOp::kAvg: {
            const auto k = static_cast<std::size_t>(n.index);
            if (k < avg_cache.size() && !std::isnan(avg_cache[k])) return avg_cache[k];
            if (mu == nullptr || mu->empty()) fail(id, "avg requires a non-empty measure");
            if (mu->dim() != dim_) throw DimensionError("measure dimension does not match expression dimension");
            double sum = 0.0;
            for (std::size_t p = 0; p < mu->size(); ++p) {
                sum += eval_node(n.lhs, t, x, mu->particle(p), mu, avg_cache);
            }
            v = sum / static_cast<double>(mu->size());
            break;
        }
    }
    if (!std::isfinite(v)) fail(id, "non-finite result");
    return v;
}

double CoeffExpr::eval(double t, std::span<const double> x, const EmpiricalMeasure* mu) const {
    return eval_bound(t, x, mu, {});
}

double CoeffExpr::eval_bound(double t, std::span<const double> x, const EmpiricalMeasure* mu,
                             std::span<const double> avg_cache) const {
    if (root_ < 0) throw ConfigError("evaluating an empty expression");
    if (x.size() != static_cast<std::size_t>(dim_)) {
        throw DimensionError("point has dimension " + std::to_string(x.size()) + ", expected " +
                             std::to_string(dim_));
    }
    return eval_node(root_, t, x, {}, mu, avg_cache);
}

std::vector<double> CoeffExpr::bind_averages(double t, const EmpiricalMeasure* mu) const {
    std::vector<double> cache(avg_nodes_.size(), std::numeric_limits<double>::quiet_NaN());
    if (avg_nodes_.empty()) return cache;
    const std::vector<double> zeros(static_cast<std::size_t>(dim_), 0.0);
    for (std::size_t k = 0; k < avg_nodes_.size(); ++k) {
        if (avg_uses_x_[k]) continue;
        cache[k] = eval_node(avg_nodes_[k], t, zeros, {}, mu, {});
    }
    return cache;
}

}  // namespace mckv
