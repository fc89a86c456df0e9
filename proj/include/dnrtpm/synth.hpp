#pragma once

// Synthetic shapes, amplitude/time distortion and noise-separated streams
// with ground-truth labels.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dnrtpm/error.hpp"
#include "dnrtpm/prefix_norm.hpp"

namespace dnrtpm {

enum class ShapeKind {
    stairs,
    triangle_wave,
    arc_blob,
    stairs_reflected,
    triangle_wave_reflected,
    arc_blob_reflected,
};

inline constexpr std::array<ShapeKind, 3> kBaseShapes = {ShapeKind::stairs, ShapeKind::triangle_wave,
                                                         ShapeKind::arc_blob};
inline constexpr std::array<ShapeKind, 6> kAllShapes = {
    ShapeKind::stairs,           ShapeKind::triangle_wave,           ShapeKind::arc_blob,
    ShapeKind::stairs_reflected, ShapeKind::triangle_wave_reflected, ShapeKind::arc_blob_reflected};

/// Uniform scaling factors swept by the recall-vs-lambda experiment.
inline constexpr std::array<double, 7> kLambdaSweep = {0.25, 0.5, 1.0, 2.0, 3.0, 5.0, 10.0};

inline std::string_view to_string(ShapeKind k) noexcept {
    switch (k) {
    case ShapeKind::stairs:
        return "stairs";
    case ShapeKind::triangle_wave:
        return "triangle_wave";
    case ShapeKind::arc_blob:
        return "arc_blob";
    case ShapeKind::stairs_reflected:
        return "stairs_reflected";
    case ShapeKind::triangle_wave_reflected:
        return "triangle_wave_reflected";
    case ShapeKind::arc_blob_reflected:
        return "arc_blob_reflected";
    }
    return "?";
}

inline ShapeKind parse_shape(std::string_view name) {
    for (ShapeKind k : kAllShapes) {
        if (to_string(k) == name)
            return k;
    }
    throw ConfigError("unknown shape '" + std::string(name) + "'");
}

inline bool is_reflected(ShapeKind k) noexcept {
    return k == ShapeKind::stairs_reflected || k == ShapeKind::triangle_wave_reflected ||
           k == ShapeKind::arc_blob_reflected;
}

/// Deterministic stand-in shapes of length m. Reflected kinds are the
/// elementwise negation of their base shape.
inline std::vector<double> make_shape(ShapeKind kind, std::size_t m) {
    if (m < 16)
        throw ConfigError("shape length must be >= 16");
    std::vector<double> out(m);
    const double last = static_cast<double>(m - 1);
    for (std::size_t i = 0; i < m; ++i) {
        const double x = static_cast<double>(i) / last;
        double v = 0.0;
        switch (kind) {
        case ShapeKind::stairs:
        case ShapeKind::stairs_reflected:
            v = static_cast<double>((4 * i) / m);
            break;
        case ShapeKind::triangle_wave:
        case ShapeKind::triangle_wave_reflected: {
            // two and a half periods, starting at the trough
            const double ph = 2.5 * x - std::floor(2.5 * x);
            v = ph < 0.5 ? 4.0 * ph - 1.0 : 3.0 - 4.0 * ph;
            break;
        }
        case ShapeKind::arc_blob:
        case ShapeKind::arc_blob_reflected:
            // a wide arc followed by a narrow, shallower dip
            v = std::exp(-std::pow((x - 0.3) / 0.12, 2.0)) - 0.6 * std::exp(-std::pow((x - 0.75) / 0.05, 2.0));
            break;
        }
        out[i] = is_reflected(kind) ? -v : v;
    }
    return out;
}

/// Uniformly rescales `seq` in time to round(m / lambda) samples by linear
/// interpolation at equally spaced fractional indices (endpoints kept), then
/// applies amp * x + shift.
inline std::vector<double> distort(std::span<const double> seq, double amp, double shift, double lambda) {
    if (!(lambda > 0.0) || !std::isfinite(lambda))
        throw ConfigError("lambda must be a positive finite number");
    if (!std::isfinite(amp) || !std::isfinite(shift))
        throw ConfigError("amplitude and shift must be finite");
    detail::require_finite(seq, "distort");
    const auto len = static_cast<std::size_t>(std::llround(static_cast<double>(seq.size()) / lambda));
    if (len < 2)
        throw ConfigError("distorted length " + std::to_string(len) + " is below 2");
    std::vector<double> out(len);
    const double span = static_cast<double>(seq.size() - 1);
    for (std::size_t i = 0; i < len; ++i) {
        const double pos = static_cast<double>(i) * span / static_cast<double>(len - 1);
        const auto lo = static_cast<std::size_t>(std::floor(pos));
        const double frac = pos - static_cast<double>(lo);
        double v = seq[lo];
        if (frac > 0.0 && lo + 1 < seq.size())
            v += frac * (seq[lo + 1] - seq[lo]);
        out[i] = amp * v + shift;
    }
    return out;
}

struct TruthInterval {
    Tick start = 0;
    Tick end = 0; // inclusive
    std::string label;

    friend bool operator==(const TruthInterval&, const TruthInterval&) = default;
};

struct LabeledStream {
    std::vector<double> samples;
    std::vector<TruthInterval> truth;
    std::uint64_t seed = 0;
};

struct StreamConfig {
    std::vector<ShapeKind> shapes{kAllShapes.begin(), kAllShapes.end()};
    std::size_t m = 120;
    std::size_t plants_per_shape = 30;
    double lambda = 1.0;
    /// Each plant uses lambda or 1/lambda with equal chance.
    bool random_inverse = false;
    /// Noise samples before, between and after plants; default round(2m / lambda).
    std::optional<std::size_t> gap;
    double amp_lo = 0.0, amp_hi = 10.0;
    double shift_lo = -5.0, shift_hi = 5.0;
    std::uint64_t seed = 1;
};

inline std::size_t default_gap(const StreamConfig& cfg) {
    return cfg.gap ? *cfg.gap
                   : static_cast<std::size_t>(std::llround(2.0 * static_cast<double>(cfg.m) / cfg.lambda));
}

/// Concatenates independently distorted plants in random order with
/// standard-normal noise around and between them.
inline LabeledStream build_stream(const StreamConfig& cfg) {
    if (cfg.shapes.empty())
        throw ConfigError("build_stream: no shapes");
    if (!(cfg.amp_lo <= cfg.amp_hi) || !(cfg.shift_lo <= cfg.shift_hi))
        throw ConfigError("build_stream: empty amplitude or shift range");
    const std::size_t gap = default_gap(cfg);
    if (gap < 1)
        throw ConfigError("build_stream: plants need at least one noise sample between them");

    std::mt19937_64 rng(cfg.seed);
    std::vector<ShapeKind> order;
    for (ShapeKind k : cfg.shapes)
        order.insert(order.end(), cfg.plants_per_shape, k);
    std::shuffle(order.begin(), order.end(), rng);

    std::normal_distribution<double> noise(0.0, 1.0);
    std::uniform_real_distribution<double> amp(cfg.amp_lo, cfg.amp_hi);
    std::uniform_real_distribution<double> shift(cfg.shift_lo, cfg.shift_hi);
    std::bernoulli_distribution invert(0.5);

    LabeledStream out;
    out.seed = cfg.seed;
    auto add_noise = [&] {
        for (std::size_t i = 0; i < gap; ++i)
            out.samples.push_back(noise(rng));
    };

    add_noise();
    for (ShapeKind k : order) {
        const auto base = make_shape(k, cfg.m);
        const double a = amp(rng);
        const double c = shift(rng);
        const double lam = cfg.random_inverse && invert(rng) ? 1.0 / cfg.lambda : cfg.lambda;
        const auto plant = distort(base, a, c, lam);
        const auto start = static_cast<Tick>(out.samples.size());
        out.samples.insert(out.samples.end(), plant.begin(), plant.end());
        out.truth.push_back({start, static_cast<Tick>(out.samples.size()) - 1, std::string(to_string(k))});
        add_noise();
    }
    return out;
}

} // namespace dnrtpm
