#pragma once

// Streaming subsequence matcher with dynamic z-normalization embedded in the
// warping recurrence. Per tick it appends one column to the subsequence
// warping matrix, keeping only the previous and current columns plus the
// prefix sums reaching back to the oldest live candidate beginning.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "dnrtpm/dtw.hpp"
#include "dnrtpm/error.hpp"
#include "dnrtpm/prefix_norm.hpp"
#include "dnrtpm/reporting.hpp"

namespace dnrtpm {

struct MatcherConfig {
    Mode mode = Mode::disjoint;
    double epsilon = kInf; // ignored in topk mode
    std::size_t k = 1;     // topk only
    CostNorm cost = CostNorm::absolute;
    /// When set, the last `trace_window` columns of winning-predecessor tags
    /// and samples are kept so matches can be reconstructed.
    std::optional<std::size_t> trace_window;
};

/// Which predecessor a cell copied its beginning from.
enum class Step : std::uint8_t { fresh, diagonal, horizontal, vertical };

class Matcher {
  public:
    Matcher(PreparedQuery query, MatcherConfig cfg)
        : query_(std::move(query)), cfg_(cfg), reporter_(cfg.mode, cfg.epsilon, cfg.k),
          prev_(query_.size()), cur_(query_.size()) {
        if (cfg_.trace_window && *cfg_.trace_window == 0)
            throw ConfigError("trace_window must be >= 1");
    }

    std::vector<MatchEvent> step(double s) {
        if (!std::isfinite(s))
            throw InvalidInput("non-finite sample at tick " + std::to_string(tick_));
        const Tick t = tick_;
        sums_.append(s);

        const std::size_t m = query_.size();
        std::vector<Step>* tags = nullptr;
        if (cfg_.trace_window) {
            trace_.emplace_back(m);
            trace_samples_.push_back(s);
            tags = &trace_.back();
        }

        // Row 0: the query's first point has a flat prefix, so the cell is free
        // and always opens a new candidate at t.
        cur_[0] = {0.0, t};
        if (tags)
            (*tags)[0] = Step::fresh;

        const auto eta = query_.eta();
        for (std::size_t k = 1; k < m; ++k) {
            const StwmCell cand[3] = {prev_[k - 1], prev_[k], cur_[k - 1]};
            double best = kInf;
            int win = 0;
            if (std::isinf(eta[k])) {
                // Flat query prefix: every live candidate extends for free, so the
                // only evidence left is flatness; keep the flattest stream window.
                double flattest = kInf;
                for (int c = 0; c < 3; ++c) {
                    if (!std::isfinite(cand[c].d))
                        continue;
                    const double sigma = sums_.window_stats(cand[c].b, t).sigma;
                    if (cand[c].d < best || (cand[c].d == best && sigma < flattest)) {
                        best = cand[c].d;
                        flattest = sigma;
                        win = c;
                    }
                }
            } else {
                for (int c = 0; c < 3; ++c) {
                    const double dp = extend(cand[c], s, t, k);
                    if (dp < best) {
                        best = dp;
                        win = c;
                    }
                }
            }
            cur_[k] = {best, std::isfinite(best) ? cand[win].b : t};
            if (tags)
                (*tags)[k] = static_cast<Step>(win + 1);
        }

        std::vector<MatchEvent> events;
        reporter_.on_column(cur_, t, events);

        sums_.trim(min_live_begin_of(cur_));
        std::swap(prev_, cur_);
        ++tick_;

        if (cfg_.trace_window) {
            while (trace_.size() > *cfg_.trace_window) {
                trace_.pop_front();
                trace_samples_.pop_front();
            }
        }
        return events;
    }

    std::vector<MatchEvent> finalize() {
        std::vector<MatchEvent> events;
        reporter_.finalize(tick_ - 1, events);
        return events;
    }

    /// Warping path of a reported match as (tick, query row) pairs from
    /// (start, 0) to (end, m-1), recovered from the trace.
    std::vector<std::pair<Tick, std::size_t>> warping_path(const MatchEvent& ev) const {
        if (!cfg_.trace_window)
            throw ConfigError("warping_path needs a matcher built with trace_window");
        const Tick oldest = tick_ - static_cast<Tick>(trace_.size());
        if (ev.start < oldest || ev.end >= tick_ || ev.start > ev.end)
            throw TraceExhausted("match [" + std::to_string(ev.start) + ", " + std::to_string(ev.end) +
                                 "] is outside the retained trace [" + std::to_string(oldest) + ", " +
                                 std::to_string(tick_ - 1) + "]");
        std::vector<std::pair<Tick, std::size_t>> path;
        Tick t = ev.end;
        std::size_t k = query_.size() - 1;
        for (;;) {
            path.emplace_back(t, k);
            const Step st = trace_[static_cast<std::size_t>(t - oldest)][k];
            if (st == Step::fresh)
                break;
            if (st != Step::vertical)
                --t;
            if (st != Step::horizontal)
                --k;
            if (t < ev.start)
                throw ConsistencyError("warping path leaves the reported match interval");
        }
        if (t != ev.start)
            throw ConsistencyError("warping path does not begin at the reported start");
        std::reverse(path.begin(), path.end());
        return path;
    }

    /// Dynamically normalized values of the matched samples: every sample is
    /// prefix-normalized from the match start and corrected by the scale
    /// factors of the query row(s) it aligns with, averaged over rows.
    std::vector<double> reconstruct_normalized(const MatchEvent& ev) const {
        const auto path = warping_path(ev);
        const Tick oldest = tick_ - static_cast<Tick>(trace_.size());
        const auto len = static_cast<std::size_t>(ev.end - ev.start + 1);
        std::vector<double> slice(len);
        for (std::size_t i = 0; i < len; ++i)
            slice[i] = trace_samples_[static_cast<std::size_t>(ev.start - oldest) + i];
        const std::vector<double> sp = prefix_normalize(slice);

        std::vector<double> sum(len, 0.0);
        std::vector<int> count(len, 0);
        for (auto [t, k] : path) {
            const auto i = static_cast<std::size_t>(t - ev.start);
            sum[i] += dyn_norm_value(sp[i], query_.eta()[k], query_.delta()[k]);
            ++count[i];
        }
        for (std::size_t i = 0; i < len; ++i)
            sum[i] /= count[i];
        return sum;
    }

    const PreparedQuery& query() const noexcept { return query_; }
    const MatcherConfig& config() const noexcept { return cfg_; }
    /// Column of the most recently processed tick.
    std::span<const StwmCell> column() const noexcept { return prev_; }
    const RollingPrefixSums& sums() const noexcept { return sums_; }
    const EventReporter& reporter() const noexcept { return reporter_; }
    /// Number of samples consumed so far (the next tick index).
    Tick tick() const noexcept { return tick_; }
    Tick min_live_begin() const { return min_live_begin_of(prev_); }
    /// Doubles held by the matcher's streaming state (columns + prefix sums).
    std::size_t state_footprint() const noexcept { return 2 * 3 * query_.size() + 2 * sums_.size(); }

  private:
    // D' of moving from `from` into row k at tick t: the sample is normalized
    // over the predecessor's own candidate window S[from.b .. t].
    double extend(const StwmCell& from, double s, Tick t, std::size_t k) const {
        if (!std::isfinite(from.d))
            return kInf;
        const double eta = query_.eta()[k];
        const WindowStats w = sums_.window_stats(from.b, t);
        if (w.sigma < kSigmaFloor)
            return kInf;
        const double sn = (s - w.mu) / w.sigma;
        return from.d + point_cost((sn - query_.pnorm()[k]) / eta, cfg_.cost);
    }

    static Tick min_live_begin_of(std::span<const StwmCell> col) {
        Tick lo = col[0].b;
        for (const auto& c : col) {
            if (std::isfinite(c.d))
                lo = std::min(lo, c.b);
        }
        return lo;
    }

    PreparedQuery query_;
    MatcherConfig cfg_;
    EventReporter reporter_;
    std::vector<StwmCell> prev_;
    std::vector<StwmCell> cur_;
    RollingPrefixSums sums_;
    Tick tick_ = 0;
    std::deque<std::vector<Step>> trace_;
    std::deque<double> trace_samples_;
};

inline Matcher new_matcher(PreparedQuery q, Mode mode, double epsilon, std::size_t k = 1) {
    MatcherConfig cfg;
    cfg.mode = mode;
    cfg.epsilon = epsilon;
    cfg.k = k;
    return Matcher(std::move(q), cfg);
}

} // namespace dnrtpm
