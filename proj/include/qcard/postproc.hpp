#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "qcard/errors.hpp"

// Classical output heads: each maps the leading entries of a measurement
// probability vector to one scalar, with analytic partials for training.
namespace qcard::postproc {

enum class LayerKind {
    Linear,
    Rational,
    RationalLog,
    Threshold,
    ThresholdRatio,
    PlaceValue,
    PlaceValueNeg,
};

inline const char* kind_name(LayerKind kind) {
    switch (kind) {
        case LayerKind::Linear: return "linear";
        case LayerKind::Rational: return "rational";
        case LayerKind::RationalLog: return "rational_log";
        case LayerKind::Threshold: return "threshold";
        case LayerKind::ThresholdRatio: return "threshold_ratio";
        case LayerKind::PlaceValue: return "place_value";
        case LayerKind::PlaceValueNeg: return "place_value_neg";
    }
    throw ConfigError("unknown layer kind");
}

inline LayerKind parse_kind(std::string_view name) {
    for (LayerKind kind : {LayerKind::Linear, LayerKind::Rational,
                           LayerKind::RationalLog, LayerKind::Threshold,
                           LayerKind::ThresholdRatio, LayerKind::PlaceValue,
                           LayerKind::PlaceValueNeg}) {
        if (name == kind_name(kind)) return kind;
    }
    throw ConfigError("unknown output layer: " + std::string(name));
}

inline int default_width(LayerKind kind) {
    switch (kind) {
        case LayerKind::Linear: return 1;
        case LayerKind::Rational:
        case LayerKind::RationalLog: return 2;
        default: return 4;
    }
}

struct PostLayer {
    LayerKind kind = LayerKind::RationalLog;
    int width = 2;                 // probability entries consumed
    std::vector<double> scalars;   // trainable: s, (s1, s2), or base b
    double d = 0.1;                // threshold below which a term is inactive
    double epsilon = 1e-6;         // keeps ratios finite
    bool tie_scalars = false;      // ThresholdRatio: one s for both terms
};

inline std::size_t scalar_count(const PostLayer& layer) {
    switch (layer.kind) {
        case LayerKind::Linear: return 1;
        case LayerKind::Rational:
        case LayerKind::RationalLog: return 0;
        case LayerKind::Threshold: return 2;
        case LayerKind::ThresholdRatio: return layer.tie_scalars ? 1 : 2;
        case LayerKind::PlaceValue:
        case LayerKind::PlaceValueNeg: return 1;
    }
    throw ConfigError("unknown layer kind");
}

inline void validate(const PostLayer& layer) {
    const int w = layer.width;
    switch (layer.kind) {
        case LayerKind::Linear:
            if (w != 1) throw ConfigError("linear layer width must be 1");
            break;
        case LayerKind::Rational:
        case LayerKind::RationalLog:
            if (w != 2) throw ConfigError("rational layer width must be 2");
            break;
        case LayerKind::Threshold:
        case LayerKind::ThresholdRatio:
            if (w != 4) throw ConfigError("threshold layer width must be 4");
            break;
        case LayerKind::PlaceValue:
        case LayerKind::PlaceValueNeg:
            if (w % 2 != 0)
                throw ConfigError("place-value layer width must be even");
            if (w != 4 && w != 8)
                throw ConfigError("place-value layer width must be 4 or 8");
            break;
    }
    if (layer.scalars.size() != scalar_count(layer)) {
        throw ConfigError("layer has wrong scalar count");
    }
    if (layer.epsilon <= 0.0) throw ConfigError("epsilon must be positive");
    if (layer.d < 0.0 || layer.d > 1.0) throw ConfigError("d must lie in [0, 1]");
    if (layer.kind == LayerKind::PlaceValue ||
        layer.kind == LayerKind::PlaceValueNeg) {
        if (layer.scalars[0] <= 1.0) throw ConfigError("base must exceed 1");
    }
}

// width 0 picks the kind's default
inline PostLayer make_layer(LayerKind kind, int width = 0, bool tie_scalars = false) {
    PostLayer layer;
    layer.kind = kind;
    layer.width = width == 0 ? default_width(kind) : width;
    layer.tie_scalars = tie_scalars && kind == LayerKind::ThresholdRatio;
    switch (kind) {
        case LayerKind::PlaceValue:
        case LayerKind::PlaceValueNeg:
            layer.scalars.assign(1, 2.0);
            break;
        default:
            layer.scalars.assign(scalar_count(layer), 1.0);
            break;
    }
    validate(layer);
    return layer;
}

namespace detail {

inline double relu(double v) { return v > 0.0 ? v : 0.0; }

// Subgradient 0 at the kink, per the training convention.
inline double relu_slope(double v) { return v > 0.0 ? 1.0 : 0.0; }

inline void check_input(const PostLayer& layer, std::span<const double> probs) {
    validate(layer);
    if (probs.size() < static_cast<std::size_t>(layer.width)) {
        throw UsageError("probability vector shorter than layer width");
    }
}

} // namespace detail

struct LayerGrad {
    double value = 0.0;
    std::vector<double> dx;       // partials over the consumed entries
    std::vector<double> dscalars; // partials over the trainable scalars
};

inline double eval(const PostLayer& layer, std::span<const double> probs) {
    detail::check_input(layer, probs);
    const auto& s = layer.scalars;
    switch (layer.kind) {
        case LayerKind::Linear:
            return probs[0] * s[0];
        case LayerKind::Rational:
            return (probs[0] + layer.epsilon) / (probs[1] + layer.epsilon);
        case LayerKind::RationalLog:
            return std::log((probs[0] + layer.epsilon) / (probs[1] + layer.epsilon));
        case LayerKind::Threshold:
            return detail::relu(probs[0] - layer.d) * probs[1] * s[0] * s[0] -
                   detail::relu(probs[2] - layer.d) * probs[3] * s[1] * s[1];
        case LayerKind::ThresholdRatio: {
            const double s2 = layer.tie_scalars ? s[0] : s[1];
            const double num =
                1.0 + detail::relu(probs[0] - layer.d) * probs[1] * s[0] * s[0];
            const double den =
                1.0 + detail::relu(probs[2] - layer.d) * probs[3] * s2 * s2;
            return num / den;
        }
        case LayerKind::PlaceValue: {
            double v = 0.0;
            double power = 1.0;
            for (int i = 0; i < layer.width; ++i) {
                v += probs[i] * power;
                power *= s[0];
            }
            return v;
        }
        case LayerKind::PlaceValueNeg: {
            const int half = layer.width / 2;
            double v = 0.0;
            double power = 1.0;
            for (int i = 0; i < half; ++i) {
                v += (probs[i] - probs[half + i]) * power;
                power *= s[0];
            }
            return v;
        }
    }
    throw ConfigError("unknown layer kind");
}

inline LayerGrad grad(const PostLayer& layer, std::span<const double> probs) {
    detail::check_input(layer, probs);
    const auto& s = layer.scalars;
    LayerGrad out;
    out.value = eval(layer, probs);
    out.dx.assign(static_cast<std::size_t>(layer.width), 0.0);
    out.dscalars.assign(scalar_count(layer), 0.0);
    switch (layer.kind) {
        case LayerKind::Linear:
            out.dx[0] = s[0];
            out.dscalars[0] = probs[0];
            break;
        case LayerKind::Rational: {
            const double den = probs[1] + layer.epsilon;
            out.dx[0] = 1.0 / den;
            out.dx[1] = -(probs[0] + layer.epsilon) / (den * den);
            break;
        }
        case LayerKind::RationalLog:
            out.dx[0] = 1.0 / (probs[0] + layer.epsilon);
            out.dx[1] = -1.0 / (probs[1] + layer.epsilon);
            break;
        case LayerKind::Threshold: {
            const double r0 = detail::relu(probs[0] - layer.d);
            const double r2 = detail::relu(probs[2] - layer.d);
            out.dx[0] = detail::relu_slope(probs[0] - layer.d) * probs[1] * s[0] * s[0];
            out.dx[1] = r0 * s[0] * s[0];
            out.dx[2] = -detail::relu_slope(probs[2] - layer.d) * probs[3] * s[1] * s[1];
            out.dx[3] = -r2 * s[1] * s[1];
            out.dscalars[0] = 2.0 * r0 * probs[1] * s[0];
            out.dscalars[1] = -2.0 * r2 * probs[3] * s[1];
            break;
        }
        case LayerKind::ThresholdRatio: {
            const double s2 = layer.tie_scalars ? s[0] : s[1];
            const double r0 = detail::relu(probs[0] - layer.d);
            const double r2 = detail::relu(probs[2] - layer.d);
            const double num = 1.0 + r0 * probs[1] * s[0] * s[0];
            const double den = 1.0 + r2 * probs[3] * s2 * s2;
            const double den2 = den * den;
            out.dx[0] = detail::relu_slope(probs[0] - layer.d) * probs[1] * s[0] * s[0] / den;
            out.dx[1] = r0 * s[0] * s[0] / den;
            out.dx[2] = -num * detail::relu_slope(probs[2] - layer.d) * probs[3] * s2 * s2 / den2;
            out.dx[3] = -num * r2 * s2 * s2 / den2;
            const double dnum_ds1 = 2.0 * r0 * probs[1] * s[0];
            const double dden_ds2 = 2.0 * r2 * probs[3] * s2;
            if (layer.tie_scalars) {
                out.dscalars[0] = dnum_ds1 / den - num * dden_ds2 / den2;
            } else {
                out.dscalars[0] = dnum_ds1 / den;
                out.dscalars[1] = -num * dden_ds2 / den2;
            }
            break;
        }
        case LayerKind::PlaceValue: {
            double power = 1.0;       // b^i
            double dpower = 0.0;      // i * b^(i-1)
            for (int i = 0; i < layer.width; ++i) {
                out.dx[static_cast<std::size_t>(i)] = power;
                out.dscalars[0] += probs[i] * dpower;
                dpower = dpower * s[0] + power;
                power *= s[0];
            }
            break;
        }
        case LayerKind::PlaceValueNeg: {
            const int half = layer.width / 2;
            double power = 1.0;
            double dpower = 0.0;
            for (int i = 0; i < half; ++i) {
                out.dx[static_cast<std::size_t>(i)] = power;
                out.dx[static_cast<std::size_t>(half + i)] = -power;
                out.dscalars[0] += (probs[i] - probs[half + i]) * dpower;
                dpower = dpower * s[0] + power;
                power *= s[0];
            }
            break;
        }
    }
    return out;
}

} // namespace qcard::postproc
