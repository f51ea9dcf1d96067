#include "mckv/pushforward.hpp"

#include <cmath>

#include "mckv/error.hpp"
#include "mckv/rng.hpp"

namespace mckv {

MonotoneMap MonotoneMap::identity() { return {}; }

MonotoneMap MonotoneMap::shift(std::vector<double> offset) {
    MonotoneMap m;
    m.kind = Kind::kShift;
    m.offset = std::move(offset);
    return m;
}

MonotoneMap MonotoneMap::shift_tanh(std::vector<double> offset, std::vector<double> slope) {
    if (offset.size() != slope.size()) throw DimensionError("shift_tanh: offset/slope size mismatch");
    for (double s : slope) {
        if (s < 0.0) throw ConfigError("shift_tanh: slopes must be nonnegative");
    }
    MonotoneMap m;
    m.kind = Kind::kShiftTanh;
    m.offset = std::move(offset);
    m.slope = std::move(slope);
    return m;
}

MonotoneMap MonotoneMap::expressions(std::vector<CoeffExpr> components) {
    for (const auto& c : components) {
        if (c.depends_on_measure()) throw ConfigError("pushforward map components may not use avg");
        if (c.dim() != static_cast<int>(components.size())) {
            throw DimensionError("pushforward map: expression dimension differs from component count");
        }
    }
    MonotoneMap m;
    m.kind = Kind::kExpr;
    m.components = std::move(components);
    return m;
}

MonotoneMap::Kind parse_map_kind(const std::string& name) {
    if (name == "identity") return MonotoneMap::Kind::kIdentity;
    if (name == "shift") return MonotoneMap::Kind::kShift;
    if (name == "shift_tanh") return MonotoneMap::Kind::kShiftTanh;
    if (name == "expr") return MonotoneMap::Kind::kExpr;
    throw ConfigError("unknown map kind '" + name + "'");
}

void MonotoneMap::apply(std::span<const double> x, std::span<double> out) const {
    switch (kind) {
        case Kind::kIdentity:
            std::copy(x.begin(), x.end(), out.begin());
            return;
        case Kind::kShift:
            if (offset.size() != x.size()) throw DimensionError("shift map dimension mismatch");
            for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] + offset[i];
            return;
        case Kind::kShiftTanh:
            if (offset.size() != x.size()) throw DimensionError("shift_tanh map dimension mismatch");
            for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] + offset[i] + slope[i] * (1.0 + std::tanh(x[i]));
            return;
        case Kind::kExpr:
            if (components.size() != x.size()) throw DimensionError("expression map dimension mismatch");
            for (std::size_t i = 0; i < x.size(); ++i) out[i] = components[i].eval(0.0, x);
            return;
    }
}

bool MonotoneMap::dominates_identity_by_construction() const {
    switch (kind) {
        case Kind::kIdentity: return true;
        case Kind::kShift:
        case Kind::kShiftTanh:
            for (double o : offset) {
                if (o < 0.0) return false;
            }
            return true;
        case Kind::kExpr: return false;
    }
    return false;
}

EmpiricalMeasure increasing_pushforward(const EmpiricalMeasure& nu, const MonotoneMap& map, bool require_order,
                                        std::uint64_t seed) {
    if (nu.empty()) throw ConfigError("increasing_pushforward: empty measure");
    const auto d = static_cast<std::size_t>(nu.dim());

    // Monotonicity spot check on pairs x <= y around the cloud and the box.
    std::vector<double> x(d), y(d), fx(d), fy(d);
    for (std::uint32_t s = 0; s < 1000; ++s) {
        PhiloxStream rng(seed, StreamTag::kMapCheck, s);
        if (s % 2 == 0) {
            auto p = nu.particle(rng.below(static_cast<std::uint32_t>(nu.size())));
            std::copy(p.begin(), p.end(), x.begin());
        } else {
            for (auto& v : x) v = rng.uniform(-3.0, 3.0);
        }
        for (std::size_t i = 0; i < d; ++i) y[i] = x[i] + (rng.uniform() < 0.3 ? 0.0 : rng.uniform(0.0, 2.0));
        map.apply(x, fx);
        map.apply(y, fy);
        for (std::size_t i = 0; i < d; ++i) {
            if (fx[i] > fy[i]) {
                throw ConfigError("increasing_pushforward: map is not nondecreasing (component " +
                                  std::to_string(i + 1) + " decreases between sampled x <= y)");
            }
        }
    }

    std::vector<double> out(nu.values().size());
    for (std::size_t k = 0; k < nu.size(); ++k) {
        auto p = nu.particle(k);
        std::span<double> q(out.data() + k * d, d);
        map.apply(p, q);
        if (require_order) {
            for (std::size_t i = 0; i < d; ++i) {
                if (q[i] < p[i]) {
                    throw ConfigError("increasing_pushforward: map(x) < x at particle " + std::to_string(k) +
                                      ", coordinate " + std::to_string(i + 1));
                }
            }
        }
    }
    return from_samples(nu.dim(), std::move(out));
}

}  // namespace mckv
