#pragma once

// Scoring of reported matches against ground truth, per-tick latency
// measurement and the analytic processing-delay model.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "dnrtpm/dtw.hpp"
#include "dnrtpm/error.hpp"
#include "dnrtpm/reporting.hpp"
#include "dnrtpm/synth.hpp"

namespace dnrtpm {

struct Interval {
    Tick start = 0;
    Tick end = 0; // inclusive
};

/// Intersection over union of two inclusive tick intervals.
inline double overlap(Interval a, Interval b) {
    if (a.start > a.end || b.start > b.end)
        throw InvalidInput("overlap: interval with start > end");
    const Tick lo = std::max(a.start, b.start);
    const Tick hi = std::min(a.end, b.end);
    if (hi < lo)
        return 0.0;
    return static_cast<double>(hi - lo + 1) / static_cast<double>(std::max(a.end, b.end) - std::min(a.start, b.start) + 1);
}

struct EventScore {
    MatchEvent event;
    double alpha = 0.0;        // overlap with the assigned truth, else best overlap seen
    std::optional<std::size_t> truth_index;
    std::string label;         // label of the assigned truth interval
};

struct ScoreResult {
    double recall = 0.0;
    double precision = 0.0;
    double f1 = 0.0;
    std::size_t retrieved = 0;
    std::size_t total_truth = 0;
    std::vector<EventScore> per_event;
};

/// A truth interval counts as retrieved when some event overlaps it by at
/// least alpha_min. Events and truths are paired one-to-one, greedily by
/// descending overlap. With `label`, only truths of that class are scored.
inline ScoreResult score(std::span<const MatchEvent> events, std::span<const TruthInterval> truth,
                         double alpha_min = 0.5, std::optional<std::string> label = std::nullopt) {
    std::vector<std::size_t> cls;
    for (std::size_t j = 0; j < truth.size(); ++j) {
        if (!label || truth[j].label == *label)
            cls.push_back(j);
    }

    ScoreResult r;
    r.total_truth = cls.size();
    r.per_event.resize(events.size());
    std::vector<std::tuple<double, std::size_t, std::size_t>> pairs;
    for (std::size_t i = 0; i < events.size(); ++i) {
        r.per_event[i].event = events[i];
        for (std::size_t j : cls) {
            const double a = overlap({events[i].start, events[i].end}, {truth[j].start, truth[j].end});
            r.per_event[i].alpha = std::max(r.per_event[i].alpha, a);
            if (a >= alpha_min && a > 0.0)
                pairs.emplace_back(a, i, j);
        }
    }
    std::stable_sort(pairs.begin(), pairs.end(),
                     [](const auto& x, const auto& y) { return std::get<0>(x) > std::get<0>(y); });

    std::vector<bool> truth_used(truth.size(), false);
    for (const auto& [a, i, j] : pairs) {
        if (r.per_event[i].truth_index || truth_used[j])
            continue;
        truth_used[j] = true;
        r.per_event[i].truth_index = j;
        r.per_event[i].alpha = a;
        r.per_event[i].label = truth[j].label;
        ++r.retrieved;
    }
    if (r.total_truth > 0)
        r.recall = static_cast<double>(r.retrieved) / static_cast<double>(r.total_truth);
    if (!events.empty())
        r.precision = static_cast<double>(r.retrieved) / static_cast<double>(events.size());
    if (r.recall + r.precision > 0.0)
        r.f1 = 2.0 * r.recall * r.precision / (r.recall + r.precision);
    return r;
}

struct LatencySummary {
    double mean_ns = 0.0;
    double p99_ns = 0.0;
};

/// Everything one evaluation run reports; optional parts are filled only
/// when their inputs were supplied.
struct EvalReport {
    ScoreResult score;
    double alpha_min = 0.5;
    std::optional<double> mean_znorm_dtw;
    std::optional<LatencySummary> per_tick_ns;
    std::optional<double> modeled_delay_s;
};

/// Mean DTW distance between each z-normalized retrieved interval and the
/// z-normalized query. Flat retrieved intervals are skipped.
inline std::optional<double> mean_znorm_dtw(std::span<const MatchEvent> events, std::span<const double> stream,
                                            std::span<const double> query, CostNorm norm = CostNorm::absolute,
                                            std::optional<double> band = std::nullopt) {
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& ev : events) {
        if (ev.start < 0 || ev.end >= static_cast<Tick>(stream.size()) || ev.end - ev.start < 1)
            continue;
        const auto part = stream.subspan(static_cast<std::size_t>(ev.start), static_cast<std::size_t>(ev.end - ev.start + 1));
        try {
            sum += znorm_dtw_distance(part, query, norm, band);
            ++n;
        } catch (const DegenerateInput&) {
        }
    }
    if (n == 0)
        return std::nullopt;
    return sum / static_cast<double>(n);
}

enum class DelayMethod {
    dnrtpm_like, // a sample is processed as soon as it arrives
    buffered,    // a sample waits for the m samples that follow it
};

/// Average delay between a sample's arrival and the end of its processing,
/// given per-sample processing time dt_p and sampling interval dt_s over a
/// stream of n samples. Once processing is slower than sampling the backlog
/// grows linearly and the average delay with it.
inline double delay_model(double dt_p, double dt_s, std::int64_t n, std::int64_t m, DelayMethod method) {
    if (!(dt_p > 0.0) || !(dt_s > 0.0) || n <= 0 || m <= 0)
        throw InvalidInput("delay_model: all arguments must be positive");
    const double backlog = static_cast<double>(n) * (dt_p - dt_s) / 2.0;
    if (method == DelayMethod::dnrtpm_like)
        return dt_p < dt_s ? dt_p : backlog + dt_s;
    return dt_p < dt_s ? static_cast<double>(m) * dt_s + dt_p : backlog + static_cast<double>(m + 1) * dt_s;
}

struct BenchStats {
    std::size_t ticks = 0;
    double mean_ns = 0.0;
    double p99_ns = 0.0;
    std::size_t window = 0;            // ticks averaged per regression point
    std::vector<double> window_mean_ns;
    double slope_ns_per_tick = 0.0;    // OLS slope of window means vs. tick index
    double slope_ci_low = -kInf;       // 95% confidence interval of the slope
    double slope_ci_high = kInf;
    std::vector<double> per_tick_ns;   // raw samples, kept when requested
};

namespace detail {

/// Two-sided 95% Student-t quantile (Cornish-Fisher expansion around 1.96).
inline double t95(double df) {
    const double z = 1.959963984540054;
    const double z3 = z * z * z;
    const double z5 = z3 * z * z;
    return z + (z3 + z) / (4.0 * df) + (5.0 * z5 + 16.0 * z3 + 3.0 * z) / (96.0 * df * df);
}

} // namespace detail

/// Least-squares slope of ys against xs with a 95% confidence interval. The
/// standard error is Newey-West (Bartlett kernel, lag 4(n/100)^(2/9)), so
/// slowly drifting machine load does not read as a trend.
inline std::tuple<double, double, double> regress_slope(std::span<const double> xs, std::span<const double> ys) {
    const std::size_t n = xs.size();
    if (n < 2)
        return {0.0, -kInf, kInf};
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += xs[i];
        my += ys[i];
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += (xs[i] - mx) * (xs[i] - mx);
        sxy += (xs[i] - mx) * (ys[i] - my);
    }
    if (sxx == 0.0)
        return {0.0, -kInf, kInf};
    const double slope = sxy / sxx;
    if (n < 3)
        return {slope, -kInf, kInf};
    std::vector<double> u(n);
    for (std::size_t i = 0; i < n; ++i)
        u[i] = (xs[i] - mx) * (ys[i] - my - slope * (xs[i] - mx));
    const auto lag = static_cast<std::size_t>(std::floor(4.0 * std::pow(static_cast<double>(n) / 100.0, 2.0 / 9.0)));
    double s = 0.0;
    for (double v : u)
        s += v * v;
    for (std::size_t l = 1; l <= lag && l < n; ++l) {
        double c = 0.0;
        for (std::size_t i = l; i < n; ++i)
            c += u[i] * u[i - l];
        s += 2.0 * (1.0 - static_cast<double>(l) / static_cast<double>(lag + 1)) * c;
    }
    const double df = static_cast<double>(n - 2);
    const double se = std::sqrt(std::max(s, 0.0) * static_cast<double>(n) / df) / sxx;
    const double h = detail::t95(df) * se;
    return {slope, slope - h, slope + h};
}

/// Times every call of `step` over `stream` with a monotonic clock.
template <typename StepFn>
BenchStats bench(StepFn&& step, std::span<const double> stream, std::size_t window = 10000, bool keep_samples = false) {
    BenchStats st;
    st.ticks = stream.size();
    if (stream.empty())
        return st;
    std::vector<double> ns(stream.size());
    using clock = std::chrono::steady_clock;
    for (std::size_t i = 0; i < stream.size(); ++i) {
        const auto t0 = clock::now();
        step(stream[i]);
        const auto t1 = clock::now();
        ns[i] = static_cast<double>(std::chrono::duration_cast<std::chrono::nanoseconds>(t1 - t0).count());
    }

    double sum = 0.0;
    for (double v : ns)
        sum += v;
    st.mean_ns = sum / static_cast<double>(ns.size());
    {
        std::vector<double> sorted = ns;
        const auto idx = static_cast<std::size_t>(std::ceil(0.99 * static_cast<double>(sorted.size()))) - 1;
        std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(idx), sorted.end());
        st.p99_ns = sorted[idx];
    }

    st.window = std::clamp<std::size_t>(window, 1, std::max<std::size_t>(1, ns.size() / 3));
    std::vector<double> xs;
    for (std::size_t lo = 0; lo + st.window <= ns.size(); lo += st.window) {
        double w = 0.0;
        for (std::size_t i = lo; i < lo + st.window; ++i)
            w += ns[i];
        st.window_mean_ns.push_back(w / static_cast<double>(st.window));
        xs.push_back(static_cast<double>(lo) + 0.5 * static_cast<double>(st.window - 1));
    }
    std::tie(st.slope_ns_per_tick, st.slope_ci_low, st.slope_ci_high) = regress_slope(xs, st.window_mean_ns);
    if (keep_samples)
        st.per_tick_ns = std::move(ns);
    return st;
}

} // namespace dnrtpm
