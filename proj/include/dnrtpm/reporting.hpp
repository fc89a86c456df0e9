#pragma once

// Event machinery shared by every streaming matcher: given a freshly
// computed warping-matrix column it decides what to report under the
// monitor, disjoint and top-k query semantics.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dnrtpm/error.hpp"
#include "dnrtpm/prefix_norm.hpp"

namespace dnrtpm {

enum class Mode { monitor, disjoint, topk };
enum class MatchKind { instant, disjoint, topk };

inline std::string_view to_string(MatchKind k) noexcept {
    switch (k) {
    case MatchKind::instant:
        return "instant";
    case MatchKind::disjoint:
        return "disjoint";
    case MatchKind::topk:
        return "topk";
    }
    return "?";
}

inline std::string_view to_string(Mode m) noexcept {
    switch (m) {
    case Mode::monitor:
        return "monitor";
    case Mode::disjoint:
        return "disjoint";
    case Mode::topk:
        return "topk";
    }
    return "?";
}

/// One cell of the subsequence warping matrix: accumulated distance and the
/// beginning tick of the candidate whose path runs through it.
struct StwmCell {
    double d = kInf;
    Tick b = 0;
};

struct MatchEvent {
    Tick start = 0;
    Tick end = 0;
    double distance = 0.0;
    Tick emitted_at = 0;
    MatchKind kind = MatchKind::instant;

    friend bool operator==(const MatchEvent&, const MatchEvent&) = default;
};

class EventReporter {
  public:
    EventReporter(Mode mode, double epsilon, std::size_t k) : mode_(mode), k_(k) {
        switch (mode) {
        case Mode::monitor:
        case Mode::disjoint:
            if (!(epsilon > 0.0))
                throw ConfigError("epsilon must be > 0 for " + std::string(to_string(mode)) + " mode");
            epsilon_ = epsilon;
            break;
        case Mode::topk:
            if (k == 0)
                throw ConfigError("k must be >= 1 for topk mode");
            epsilon_ = kInf;
            break;
        }
    }

    Mode mode() const noexcept { return mode_; }
    /// Current threshold; in top-k mode it tightens to the k-th best distance.
    double epsilon() const noexcept { return epsilon_; }
    double held_distance() const noexcept { return d_min_; }
    Tick held_start() const noexcept { return t_s_; }
    Tick held_end() const noexcept { return t_e_; }

    /// Consumes column t. In disjoint/top-k mode cells overlapping a reported
    /// optimum are disabled (d set to +inf) in place.
    void on_column(std::span<StwmCell> col, Tick t, std::vector<MatchEvent>& out) {
        const StwmCell last = col.back();
        if (mode_ == Mode::monitor) {
            if (std::isfinite(last.d) && last.d <= epsilon_)
                out.push_back({last.b, t, last.d, t, MatchKind::instant});
            return;
        }

        // top-k: a held candidate that no longer beats the k-th best can never be admitted
        if (d_min_ > epsilon_)
            d_min_ = kInf;

        if (std::isfinite(d_min_)) {
            const bool confirmed = std::all_of(col.begin(), col.end(),
                                               [&](const StwmCell& c) { return c.d >= d_min_ || c.b > t_e_; });
            if (confirmed) {
                emit({t_s_, t_e_, d_min_, t, MatchKind::disjoint}, out);
                d_min_ = kInf;
                for (auto& c : col) {
                    if (c.b <= t_e_)
                        c.d = kInf;
                }
            }
        }

        const StwmCell cur = col.back();
        if (std::isfinite(cur.d) && cur.d <= epsilon_ && cur.d < d_min_) {
            d_min_ = cur.d;
            t_s_ = cur.b;
            t_e_ = t;
        }
    }

    /// End-of-stream flush of the held optimum. Top-k mode returns its best
    /// list here, ordered by distance. Idempotent.
    void finalize(Tick last_tick, std::vector<MatchEvent>& out) {
        if (finalized_)
            return;
        finalized_ = true;
        if (mode_ == Mode::monitor)
            return;
        if (std::isfinite(d_min_) && d_min_ <= epsilon_)
            emit({t_s_, t_e_, d_min_, std::max(last_tick, t_e_), MatchKind::disjoint}, out);
        d_min_ = kInf;
        if (mode_ == Mode::topk)
            out.insert(out.end(), best_.begin(), best_.end());
    }

    bool finalized() const noexcept { return finalized_; }

    /// Snapshot of the top-k list so far, best first.
    const std::vector<MatchEvent>& best() const noexcept { return best_; }

  private:
    void emit(MatchEvent ev, std::vector<MatchEvent>& out) {
        if (mode_ == Mode::disjoint) {
            out.push_back(ev);
            return;
        }
        ev.kind = MatchKind::topk;
        if (best_.size() == k_) {
            if (!(ev.distance < best_.back().distance))
                return;
            best_.pop_back();
        }
        const auto pos = std::upper_bound(best_.begin(), best_.end(), ev,
                                          [](const MatchEvent& a, const MatchEvent& b) { return a.distance < b.distance; });
        best_.insert(pos, ev);
        if (best_.size() == k_)
            epsilon_ = best_.back().distance;
    }

    Mode mode_;
    std::size_t k_;
    double epsilon_ = kInf;
    double d_min_ = kInf;
    Tick t_s_ = 0;
    Tick t_e_ = -1;
    bool finalized_ = false;
    std::vector<MatchEvent> best_;
};

} // namespace dnrtpm
