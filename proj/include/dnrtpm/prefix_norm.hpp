#pragma once

// Expanding-window ("prefix") statistics and the rolling prefix-sum buffers
// used by the streaming matcher.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dnrtpm/error.hpp"

namespace dnrtpm {

using Tick = std::int64_t;

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Standard deviations below this are treated as zero: the normalized value
/// becomes 0 and the amplification factor becomes the +inf sentinel.
inline constexpr double kSigmaFloor = 1e-12;

namespace detail {

inline void require_finite(std::span<const double> seq, const char* what) {
    if (seq.empty())
        throw InvalidInput(std::string(what) + ": empty sequence");
    for (std::size_t i = 0; i < seq.size(); ++i) {
        if (!std::isfinite(seq[i]))
            throw InvalidInput(std::string(what) + ": non-finite value at index " + std::to_string(i));
    }
}

} // namespace detail

struct PrefixStats {
    std::vector<double> means;
    std::vector<double> stddevs; // population (divide by n)
};

/// Mean and population standard deviation of every prefix seq[0..k].
/// Welford's update keeps small-prefix variances accurate even when the
/// values carry a large offset.
inline PrefixStats prefix_stats(std::span<const double> seq) {
    detail::require_finite(seq, "prefix_stats");
    PrefixStats out;
    out.means.resize(seq.size());
    out.stddevs.resize(seq.size());
    double mean = 0.0;
    double m2 = 0.0;
    for (std::size_t k = 0; k < seq.size(); ++k) {
        const double n = static_cast<double>(k + 1);
        const double d = seq[k] - mean;
        mean += d / n;
        m2 += d * (seq[k] - mean);
        out.means[k] = mean;
        out.stddevs[k] = std::sqrt(std::max(m2, 0.0) / n);
    }
    return out;
}

inline double normalize_with(double value, double mu, double sigma) {
    return sigma < kSigmaFloor ? 0.0 : (value - mu) / sigma;
}

/// out[k] = (seq[k] - mean(seq[0..k])) / std(seq[0..k]); 0 where the prefix is flat.
inline std::vector<double> prefix_normalize(std::span<const double> seq) {
    const PrefixStats st = prefix_stats(seq);
    std::vector<double> out(seq.size());
    for (std::size_t k = 0; k < seq.size(); ++k)
        out[k] = normalize_with(seq[k], st.means[k], st.stddevs[k]);
    return out;
}

struct ScaleFactors {
    std::vector<double> eta;   // amplification: sigma_full / sigma_prefix(k), +inf when the prefix is flat
    std::vector<double> delta; // shift: (mu_prefix(k) - mu_full) / sigma_full
};

inline ScaleFactors scale_factors_from(const PrefixStats& st) {
    const std::size_t n = st.means.size();
    const double mu_full = st.means.back();
    const double sigma_full = st.stddevs.back();
    if (sigma_full < kSigmaFloor)
        throw DegenerateInput("sequence is constant; it cannot be z-normalized");
    ScaleFactors f;
    f.eta.resize(n);
    f.delta.resize(n);
    for (std::size_t k = 0; k < n; ++k) {
        f.eta[k] = st.stddevs[k] < kSigmaFloor ? kInf : sigma_full / st.stddevs[k];
        f.delta[k] = (st.means[k] - mu_full) / sigma_full;
    }
    return f;
}

inline ScaleFactors scale_factors(std::span<const double> seq) {
    if (seq.size() < 2)
        throw InvalidInput("scale_factors: need at least two values");
    return scale_factors_from(prefix_stats(seq));
}

/// s'' = s' / eta_k + delta_k; a flat query prefix (eta = +inf) maps to delta_k.
inline double dyn_norm_value(double s_prefix_norm, double eta_k, double delta_k) {
    if (std::isinf(eta_k))
        return delta_k;
    return s_prefix_norm / eta_k + delta_k;
}

/// Query with its prefix-normalized values and scale factors, computed once.
class PreparedQuery {
  public:
    explicit PreparedQuery(std::span<const double> raw) {
        if (raw.size() < 2)
            throw InvalidInput("query needs at least two samples");
        detail::require_finite(raw, "query");
        raw_.assign(raw.begin(), raw.end());
        const PrefixStats st = prefix_stats(raw);
        ScaleFactors f = scale_factors_from(st);
        pnorm_.resize(raw.size());
        for (std::size_t k = 0; k < raw.size(); ++k)
            pnorm_[k] = normalize_with(raw[k], st.means[k], st.stddevs[k]);
        eta_ = std::move(f.eta);
        delta_ = std::move(f.delta);
    }

    std::size_t size() const noexcept { return raw_.size(); }
    std::span<const double> raw() const noexcept { return raw_; }
    std::span<const double> pnorm() const noexcept { return pnorm_; }
    std::span<const double> eta() const noexcept { return eta_; }
    std::span<const double> delta() const noexcept { return delta_; }

  private:
    std::vector<double> raw_;
    std::vector<double> pnorm_;
    std::vector<double> eta_;
    std::vector<double> delta_;
};

inline PreparedQuery prepare_query(std::span<const double> raw) { return PreparedQuery(raw); }

struct WindowStats {
    double mu;
    double sigma;
};

/// Prefix sums ps_i and prefix sums of squares pss_i for ticks
/// [first_index, last_index]. The entry for tick -1 (both zero) is present
/// until trimmed, so a window may begin at tick 0.
class RollingPrefixSums {
  public:
    static constexpr double kCancellationUlps = 8.0;

    RollingPrefixSums() : ps_{0.0}, pss_{0.0} {}

    void append(double s) {
        if (!std::isfinite(s))
            throw InvalidInput("non-finite sample");
        ps_.push_back(ps_.back() + s);
        pss_.push_back(pss_.back() + s * s);
    }

    /// Drops every entry older than new_min_begin - 1.
    void trim(Tick new_min_begin) {
        const Tick keep_from = new_min_begin - 1;
        if (keep_from < first_index_)
            throw ConsistencyError("trim: beginning " + std::to_string(new_min_begin) +
                                   " needs an entry that was already dropped");
        if (keep_from > last_index())
            throw ConsistencyError("trim: beginning " + std::to_string(new_min_begin) +
                                   " is past the newest sample");
        while (first_index_ < keep_from) {
            ps_.pop_front();
            pss_.pop_front();
            ++first_index_;
        }
    }

    /// Mean and population standard deviation of S[b..t].
    WindowStats window_stats(Tick b, Tick t) const {
        if (b > t || b - 1 < first_index_ || t > last_index())
            throw RangeError("window_stats: [" + std::to_string(b) + ", " + std::to_string(t) +
                             "] not covered by retained range [" + std::to_string(first_index_ + 1) + ", " +
                             std::to_string(last_index()) + "]");
        const auto lo = static_cast<std::size_t>(b - 1 - first_index_);
        const auto hi = static_cast<std::size_t>(t - first_index_);
        const double n = static_cast<double>(t - b + 1);
        const double mu = (ps_[hi] - ps_[lo]) / n;
        const double var = (pss_[hi] - pss_[lo]) / n - mu * mu;
        // Differencing two sums of magnitude pss_t leaves an absolute error of a
        // few ulps of pss_t; a variance under that floor is indistinguishable
        // from zero (a single-sample window lands here).
        const double noise = kCancellationUlps * std::numeric_limits<double>::epsilon() * pss_[hi] / n;
        return {mu, var <= noise ? 0.0 : std::sqrt(var)};
    }

    /// Sample value s_t recovered from the prefix sums.
    double sample(Tick t) const { return at_ps(t) - at_ps(t - 1); }

    double back_ps() const noexcept { return ps_.back(); }
    double back_pss() const noexcept { return pss_.back(); }
    double at_ps(Tick i) const { return ps_.at(static_cast<std::size_t>(i - first_index_)); }
    double at_pss(Tick i) const { return pss_.at(static_cast<std::size_t>(i - first_index_)); }

    Tick first_index() const noexcept { return first_index_; }
    Tick last_index() const noexcept { return first_index_ + static_cast<Tick>(ps_.size()) - 1; }
    std::size_t size() const noexcept { return ps_.size(); }

  private:
    std::deque<double> ps_;
    std::deque<double> pss_;
    Tick first_index_ = -1;
};

} // namespace dnrtpm
