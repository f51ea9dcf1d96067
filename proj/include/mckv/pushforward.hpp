#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mckv/expr.hpp"
#include "mckv/measure.hpp"

namespace mckv {

// Componentwise nondecreasing maps used to build ordered pairs nu <= map#nu.
struct MonotoneMap {
    enum class Kind { kIdentity, kShift, kShiftTanh, kExpr };

    Kind kind = Kind::kIdentity;
    // kShift: y = x + offset. kShiftTanh: y_i = x_i + offset_i + slope_i (1 + tanh x_i).
    std::vector<double> offset;
    std::vector<double> slope;
    // kExpr: one expression per output coordinate, over t-free x variables.
    std::vector<CoeffExpr> components;

    static MonotoneMap identity();
    static MonotoneMap shift(std::vector<double> offset);
    static MonotoneMap shift_tanh(std::vector<double> offset, std::vector<double> slope);
    static MonotoneMap expressions(std::vector<CoeffExpr> components);

    void apply(std::span<const double> x, std::span<double> out) const;
    // True when map(x) >= x holds for every x by construction.
    bool dominates_identity_by_construction() const;
};

MonotoneMap::Kind parse_map_kind(const std::string& name);

// mu = map # nu. Validates monotonicity on 1000 sampled pairs (seeded) and,
// when `require_order` is set, map(x) >= x at every particle of nu.
EmpiricalMeasure increasing_pushforward(const EmpiricalMeasure& nu, const MonotoneMap& map,
                                        bool require_order = true, std::uint64_t seed = 0);

}  // namespace mckv
