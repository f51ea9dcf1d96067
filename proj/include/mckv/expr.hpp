#pragma once

// Scalar coefficient expressions over t, x1..xd and the measure functional
// avg(e) = integral of e(t, x, y) mu(dy).
//
// Grammar (whitespace insignificant):
//   expr   := term (('+'|'-') term)*
//   term   := factor (('*'|'/') factor)*
//   factor := atom ('^' atom)?
//   atom   := number | var | func '(' expr (',' expr)? ')'
//           | 'avg' '(' expr ')' | '(' expr ')' | '-' atom
//   var    := 't' | 'x'int | 'y'int
// Functions: exp tanh sigmoid sin cos sqrt abs (unary), min max (binary).
//
// y-variables are only legal inside avg, and avg does not nest. An avg whose
// body does not reference x costs O(N) once per (t, mu); one that does costs
// O(N) per evaluation, i.e. O(N^2) per mean-field time step.

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mckv/measure.hpp"

namespace mckv {

enum class ExprOp : std::uint8_t {
    kNumber,
    kTime,
    kX,
    kY,
    kAdd,
    kSub,
    kMul,
    kDiv,
    kPow,
    kNeg,
    kExp,
    kTanh,
    kSigmoid,
    kSin,
    kCos,
    kSqrt,
    kAbs,
    kMin,
    kMax,
    kAvg,
};

struct ExprNode {
    ExprOp op = ExprOp::kNumber;
    double value = 0.0;  // kNumber
    int index = 0;       // kX / kY (0-based coordinate); kAvg (ordinal among avg nodes)
    int lhs = -1;
    int rhs = -1;
};

class CoeffExpr {
public:
    CoeffExpr() = default;

    int dim() const noexcept { return dim_; }
    bool empty() const noexcept { return nodes_.empty(); }

    bool depends_on_t() const noexcept { return uses_t_; }
    // True when the value changes with x, including through avg bodies.
    bool depends_on_x() const noexcept { return uses_x_; }
    bool depends_on_measure() const noexcept { return !avg_nodes_.empty(); }
    std::size_t avg_count() const noexcept { return avg_nodes_.size(); }
    // avg ordinal k references x inside its body.
    bool avg_depends_on_x(std::size_t k) const { return avg_uses_x_[k]; }

    // Fully parenthesized form that re-parses to an expression applying the
    // same floating-point operations in the same order.
    std::string to_string() const;

    // Direct evaluation; each avg costs O(N). Throws DimensionError / EvalError.
    double eval(double t, std::span<const double> x, const EmpiricalMeasure* mu = nullptr) const;

    // Values of the avg nodes that do not reference x, for a fixed (t, mu).
    // Entries for x-dependent avgs are left as NaN.
    std::vector<double> bind_averages(double t, const EmpiricalMeasure* mu) const;
    // Evaluation with cached avg values from bind_averages.
    double eval_bound(double t, std::span<const double> x, const EmpiricalMeasure* mu,
                      std::span<const double> avg_cache) const;

    const std::vector<ExprNode>& nodes() const noexcept { return nodes_; }
    int root() const noexcept { return root_; }

    static CoeffExpr constant(double v, int dim);

private:
    friend class ExprParser;
    friend CoeffExpr parse_expr(std::string_view text, int dim);
    friend CoeffExpr combine_average(const CoeffExpr& a, const CoeffExpr& b);

    void finalize();
    double eval_node(int id, double t, std::span<const double> x, std::span<const double> y,
                     const EmpiricalMeasure* mu, std::span<const double> avg_cache) const;
    [[noreturn]] void fail(int id, const char* why) const;
    void print_node(int id, std::string& out) const;

    std::vector<ExprNode> nodes_;
    std::vector<int> avg_nodes_;
    std::vector<bool> avg_uses_x_;
    int root_ = -1;
    int dim_ = 0;
    bool uses_t_ = false;
    bool uses_x_ = false;
};

// Throws ParseError (syntax, unknown identifier, index out of range, y outside
// avg, nested avg) or ConfigError (empty text, non-positive dim).
CoeffExpr parse_expr(std::string_view text, int dim);

// 0.5 * (a + b); used to symmetrize diffusion entries given twice.
CoeffExpr combine_average(const CoeffExpr& a, const CoeffExpr& b);

inline double eval_expr(const CoeffExpr& e, double t, std::span<const double> x,
                        const EmpiricalMeasure* mu = nullptr) {
    return e.eval(t, x, mu);
}

}  // namespace mckv
