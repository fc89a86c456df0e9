#pragma once

// Fixed-length sliding-window z-normalization feeding a plain subsequence
// warping matcher. This is the comparison baseline: every sample is
// normalized with the statistics of the trailing `window` samples, and the
// query is z-normalized once as a whole.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "dnrtpm/dtw.hpp"
#include "dnrtpm/error.hpp"
#include "dnrtpm/prefix_norm.hpp"
#include "dnrtpm/reporting.hpp"

namespace dnrtpm {

/// out[t] = (s_t - mu) / sigma over S[max(0, t-w+1) .. t]; 0 on a flat window.
inline std::vector<double> fixed_window_znorm(std::span<const double> stream, std::size_t w) {
    if (w < 2)
        throw ConfigError("window length must be >= 2");
    detail::require_finite(stream, "fixed_window_znorm");
    RollingPrefixSums sums;
    std::vector<double> out(stream.size());
    for (std::size_t i = 0; i < stream.size(); ++i) {
        sums.append(stream[i]);
        const auto t = static_cast<Tick>(i);
        const Tick b = std::max<Tick>(0, t - static_cast<Tick>(w) + 1);
        const WindowStats ws = sums.window_stats(b, t);
        out[i] = normalize_with(stream[i], ws.mu, ws.sigma);
        sums.trim(std::max<Tick>(0, t - static_cast<Tick>(w) + 2));
    }
    return out;
}

/// Z-normalization of the whole window S[end-w+1 .. end], i.e. the window
/// the baseline holds at tick `end`, applied to every sample in it.
inline std::vector<double> window_znorm_at(std::span<const double> stream, std::size_t end, std::size_t w) {
    if (w < 2 || w > end + 1 || end >= stream.size())
        throw RangeError("window_znorm_at: window does not fit in the stream");
    return znorm(stream.subspan(end + 1 - w, w));
}

class FixedWindowMatcher {
  public:
    struct Config {
        Mode mode = Mode::disjoint;
        double epsilon = kInf;
        std::size_t k = 1;
        std::size_t window = 0; // 0: query length
        CostNorm cost = CostNorm::absolute;
    };

    FixedWindowMatcher(std::span<const double> query, Config cfg)
        : qz_(znorm(query)), cfg_(cfg), reporter_(cfg.mode, cfg.epsilon, cfg.k), prev_(query.size()),
          cur_(query.size()) {
        if (query.size() < 2)
            throw InvalidInput("query needs at least two samples");
        if (cfg_.window == 0)
            cfg_.window = query.size();
        if (cfg_.window < 2)
            throw ConfigError("window length must be >= 2");
    }

    std::vector<MatchEvent> step(double s) {
        if (!std::isfinite(s))
            throw InvalidInput("non-finite sample at tick " + std::to_string(tick_));
        const Tick t = tick_;
        const auto w = static_cast<Tick>(cfg_.window);
        sums_.append(s);
        const WindowStats ws = sums_.window_stats(std::max<Tick>(0, t - w + 1), t);
        last_z_ = normalize_with(s, ws.mu, ws.sigma);

        const std::size_t m = qz_.size();
        cur_[0] = {point_cost(last_z_ - qz_[0], cfg_.cost), t};
        for (std::size_t k = 1; k < m; ++k) {
            const StwmCell cand[3] = {prev_[k - 1], prev_[k], cur_[k - 1]};
            int win = 0;
            for (int c = 1; c < 3; ++c) {
                if (cand[c].d < cand[win].d)
                    win = c;
            }
            const double c = point_cost(last_z_ - qz_[k], cfg_.cost);
            cur_[k] = {cand[win].d + c, std::isfinite(cand[win].d) ? cand[win].b : t};
        }

        std::vector<MatchEvent> events;
        reporter_.on_column(cur_, t, events);
        sums_.trim(std::max<Tick>(0, t - w + 2));
        std::swap(prev_, cur_);
        ++tick_;
        return events;
    }

    std::vector<MatchEvent> finalize() {
        std::vector<MatchEvent> events;
        reporter_.finalize(tick_ - 1, events);
        return events;
    }

    /// Normalized value of the most recent sample.
    double last_normalized() const noexcept { return last_z_; }
    std::span<const StwmCell> column() const noexcept { return prev_; }
    const EventReporter& reporter() const noexcept { return reporter_; }
    std::size_t window() const noexcept { return cfg_.window; }
    Tick tick() const noexcept { return tick_; }

  private:
    std::vector<double> qz_;
    Config cfg_;
    EventReporter reporter_;
    std::vector<StwmCell> prev_;
    std::vector<StwmCell> cur_;
    RollingPrefixSums sums_;
    double last_z_ = 0.0;
    Tick tick_ = 0;
};

} // namespace dnrtpm
