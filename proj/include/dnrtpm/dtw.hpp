#pragma once

// Reference (non-streaming) DTW, the fixed-start normalized DTW matrix and
// whole-sequence z-normalization. These back the tests and the retrieval
// quality metric; the streaming matcher never calls them.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "dnrtpm/error.hpp"
#include "dnrtpm/prefix_norm.hpp"

namespace dnrtpm {

enum class CostNorm { absolute, squared };

inline double point_cost(double diff, CostNorm norm) noexcept {
    return norm == CostNorm::absolute ? std::abs(diff) : diff * diff;
}

struct WarpingResult {
    double distance = kInf;
    std::vector<std::pair<std::size_t, std::size_t>> path;
};

namespace detail {

/// Row-major accumulated-cost matrix with path recovery. `cost(i, j)` may
/// return +inf for forbidden cells. With `first_col_stretch` false, column 0
/// is reachable only at the origin.
template <typename CostFn>
WarpingResult accumulate(std::size_t rows, std::size_t cols, CostFn&& cost, bool first_col_stretch = true) {
    std::vector<double> acc(rows * cols, kInf);
    auto at = [&](std::size_t i, std::size_t j) -> double& { return acc[i * cols + j]; };

    for (std::size_t i = 0; i < rows; ++i) {
        for (std::size_t j = 0; j < cols; ++j) {
            const double c = cost(i, j);
            double best;
            if (i == 0 && j == 0) {
                best = 0.0;
            } else {
                const double diag = (i > 0 && j > 0) ? at(i - 1, j - 1) : kInf;
                const double up = (i > 0 && (j > 0 || first_col_stretch)) ? at(i - 1, j) : kInf;
                const double left = j > 0 ? at(i, j - 1) : kInf;
                best = std::min({diag, up, left});
            }
            at(i, j) = c + best;
        }
    }

    WarpingResult r;
    r.distance = at(rows - 1, cols - 1);
    if (!std::isfinite(r.distance))
        return r;
    std::size_t i = rows - 1;
    std::size_t j = cols - 1;
    r.path.emplace_back(i, j);
    while (i > 0 || j > 0) {
        const double diag = (i > 0 && j > 0) ? at(i - 1, j - 1) : kInf;
        const double up = (i > 0 && (j > 0 || first_col_stretch)) ? at(i - 1, j) : kInf;
        const double left = j > 0 ? at(i, j - 1) : kInf;
        if (diag <= up && diag <= left) {
            --i;
            --j;
        } else if (up <= left) {
            --i;
        } else {
            --j;
        }
        r.path.emplace_back(i, j);
    }
    std::reverse(r.path.begin(), r.path.end());
    return r;
}

} // namespace detail

/// Classic DTW between X (rows) and Y (columns). With `band`, cells farther
/// than band * max(|X|, |Y|) from the rescaled diagonal are excluded
/// (Sakoe-Chiba).
inline WarpingResult dtw(std::span<const double> x, std::span<const double> y, CostNorm norm = CostNorm::absolute,
                         std::optional<double> band = std::nullopt) {
    detail::require_finite(x, "dtw");
    detail::require_finite(y, "dtw");
    if (band && !(*band >= 0.0))
        throw ConfigError("dtw: band must be non-negative");
    const double width = band ? *band * static_cast<double>(std::max(x.size(), y.size())) : kInf;
    const double slope = x.size() > 1 ? static_cast<double>(y.size() - 1) / static_cast<double>(x.size() - 1) : 0.0;
    return detail::accumulate(x.size(), y.size(), [&](std::size_t i, std::size_t j) {
        if (band && std::abs(static_cast<double>(j) - slope * static_cast<double>(i)) > width + 0.5)
            return kInf;
        return point_cost(x[i] - y[j], norm);
    });
}

/// Normalized DTW of a candidate S[t_b..t] (given as `slice`, beginning
/// fixed at its first element) against a prepared query. Each sample is
/// prefix-normalized from the fixed beginning and compared with the
/// prefix-normalized query, scaled by the query's amplification factor.
/// Query row 0 aligns only with the first sample of the slice, as a
/// candidate in the streaming matrix occupies row 0 only at its own
/// beginning tick. Rows with a flat query prefix cost 0; a flat stream
/// prefix against a non-flat query row is forbidden.
inline WarpingResult dnorm_fixed_start(std::span<const double> slice, const PreparedQuery& q,
                                       CostNorm norm = CostNorm::absolute) {
    detail::require_finite(slice, "dnorm_fixed_start");
    const PrefixStats st = prefix_stats(slice);
    const auto qn = q.pnorm();
    const auto eta = q.eta();
    return detail::accumulate(
        slice.size(), q.size(),
        [&](std::size_t i, std::size_t k) {
            if (std::isinf(eta[k]))
                return 0.0;
            if (st.stddevs[i] < kSigmaFloor)
                return kInf;
            const double s = (slice[i] - st.means[i]) / st.stddevs[i];
            return point_cost((s - qn[k]) / eta[k], norm);
        },
        /*first_col_stretch=*/false);
}

/// Whole-sequence z-normalization.
inline std::vector<double> znorm(std::span<const double> seq) {
    detail::require_finite(seq, "znorm");
    const double n = static_cast<double>(seq.size());
    double mean = 0.0;
    for (double v : seq)
        mean += v;
    mean /= n;
    double var = 0.0;
    for (double v : seq)
        var += (v - mean) * (v - mean);
    const double sigma = std::sqrt(var / n);
    if (sigma < kSigmaFloor)
        throw DegenerateInput("znorm: constant sequence");
    std::vector<double> out(seq.size());
    for (std::size_t i = 0; i < seq.size(); ++i)
        out[i] = (seq[i] - mean) / sigma;
    return out;
}

inline double znorm_dtw_distance(std::span<const double> a, std::span<const double> b,
                                 CostNorm norm = CostNorm::absolute, std::optional<double> band = std::nullopt) {
    if (a.size() < 2 || b.size() < 2)
        throw InvalidInput("znorm_dtw_distance: need at least two samples per sequence");
    const auto za = znorm(a);
    const auto zb = znorm(b);
    return dtw(za, zb, norm, band).distance;
}

} // namespace dnrtpm
