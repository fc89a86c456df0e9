#pragma once

// Test-only oracles. Nothing here calls into the code paths it checks.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <span>
#include <utility>
#include <vector>

namespace oracle {

inline constexpr double inf = std::numeric_limits<double>::infinity();

struct MeanStd {
    double mean;
    double std;
};

/// Two-pass mean and population standard deviation.
inline MeanStd two_pass(std::span<const double> v) {
    double m = 0.0;
    for (double x : v)
        m += x;
    m /= static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v)
        ss += (x - m) * (x - m);
    return {m, std::sqrt(ss / static_cast<double>(v.size()))};
}

/// Minimum over every monotone, contiguous warping path by exhaustive
/// recursion (exponential; keep inputs tiny).
inline double brute_force_dtw(std::span<const double> x, std::span<const double> y) {
    double best = inf;
    std::function<void(std::size_t, std::size_t, double)> walk = [&](std::size_t i, std::size_t j, double acc) {
        acc += std::abs(x[i] - y[j]);
        if (acc >= best)
            return;
        if (i + 1 == x.size() && j + 1 == y.size()) {
            best = acc;
            return;
        }
        if (i + 1 < x.size() && j + 1 < y.size())
            walk(i + 1, j + 1, acc);
        if (i + 1 < x.size())
            walk(i + 1, j, acc);
        if (j + 1 < y.size())
            walk(i, j + 1, acc);
    };
    walk(0, 0, 0.0);
    return best;
}

/// Query prefix quantities by two-pass recomputation per prefix.
struct QueryOracle {
    std::vector<double> pnorm, eta, delta;
    explicit QueryOracle(std::span<const double> q) {
        const auto full = two_pass(q);
        for (std::size_t k = 0; k < q.size(); ++k) {
            const auto p = two_pass(q.first(k + 1));
            const bool flat = p.std < 1e-12;
            pnorm.push_back(flat ? 0.0 : (q[k] - p.mean) / p.std);
            eta.push_back(flat ? inf : full.std / p.std);
            delta.push_back((p.mean - full.mean) / full.std);
        }
    }
};

/// Keeps the entire subsequence warping matrix (every column) and untrimmed
/// prefix sums, applying the streaming recurrences cell by cell. Window
/// statistics use the same prefix-sum arithmetic as the streaming matcher so
/// results can be compared bit for bit.
class FullMatrixReference {
  public:
    struct Cell {
        double d = inf;
        long long b = 0;
    };

    FullMatrixReference(std::vector<double> pnorm, std::vector<double> eta)
        : pnorm_(std::move(pnorm)), eta_(std::move(eta)), ps_{0.0}, pss_{0.0} {}

    void push(double s) {
        ps_.push_back(ps_.back() + s);
        pss_.push_back(pss_.back() + s * s);
        const long long t = static_cast<long long>(cols_.size());
        const std::size_t m = pnorm_.size();
        std::vector<Cell> col(m);
        col[0] = {0.0, t};
        for (std::size_t k = 1; k < m; ++k) {
            const Cell none{};
            const Cell& diag = t > 0 ? cols_.back()[k - 1] : none;
            const Cell& horiz = t > 0 ? cols_.back()[k] : none;
            const Cell& vert = col[k - 1];
            const Cell* order[3] = {&diag, &horiz, &vert};
            double best = inf;
            double flattest = inf;
            const Cell* win = order[0];
            for (const Cell* c : order) {
                if (std::isinf(eta_[k])) {
                    // free extension; ties go to the flattest window
                    if (!std::isfinite(c->d))
                        continue;
                    const double sg = sigma(c->b, t);
                    if (c->d < best || (c->d == best && sg < flattest)) {
                        best = c->d;
                        flattest = sg;
                        win = c;
                    }
                    continue;
                }
                const double v = extend(*c, s, t, k);
                if (v < best) {
                    best = v;
                    win = c;
                }
            }
            col[k] = {best, std::isfinite(best) ? win->b : t};
        }
        cols_.push_back(std::move(col));
    }

    const std::vector<Cell>& column(std::size_t t) const { return cols_[t]; }
    std::size_t ticks() const { return cols_.size(); }

  private:
    double mean(long long b, long long t) const {
        return (ps_[static_cast<std::size_t>(t + 1)] - ps_[static_cast<std::size_t>(b)]) /
               static_cast<double>(t - b + 1);
    }

    double sigma(long long b, long long t) const {
        const auto lo = static_cast<std::size_t>(b);     // entry for tick b-1
        const auto hi = static_cast<std::size_t>(t + 1); // entry for tick t
        const double n = static_cast<double>(t - b + 1);
        const double mu = mean(b, t);
        const double var = (pss_[hi] - pss_[lo]) / n - mu * mu;
        const double noise = 8.0 * std::numeric_limits<double>::epsilon() * pss_[hi] / n;
        return var <= noise ? 0.0 : std::sqrt(var);
    }

    double extend(const Cell& c, double s, long long t, std::size_t k) const {
        if (!std::isfinite(c.d))
            return inf;
        const double sg = sigma(c.b, t);
        if (sg < 1e-12)
            return inf;
        return c.d + std::abs(((s - mean(c.b, t)) / sg - pnorm_[k]) / eta_[k]);
    }

    std::vector<double> pnorm_, eta_;
    std::vector<double> ps_, pss_;
    std::vector<std::vector<Cell>> cols_;
};

/// Direct evaluation of the fixed-start normalized warping cost of one
/// explicit path [(slice index, query row)...] using two-pass statistics.
inline double path_cost(std::span<const double> slice, const QueryOracle& q,
                        const std::vector<std::pair<std::size_t, std::size_t>>& path) {
    double acc = 0.0;
    for (auto [i, k] : path) {
        if (std::isinf(q.eta[k]))
            continue;
        const auto st = two_pass(slice.first(i + 1));
        if (st.std < 1e-12)
            return inf;
        acc += std::abs(((slice[i] - st.mean) / st.std - q.pnorm[k]) / q.eta[k]);
    }
    return acc;
}

/// First-order bound on how far path_cost may drift from a computation that
/// takes window statistics from running sums starting at stream tick 0.
/// `sq_before` and `abs_before` are the sums of s^2 and |s| over the stream
/// up to the tick before the slice.
inline double running_sum_error_bound(std::span<const double> slice, const QueryOracle& q,
                                      const std::vector<std::pair<std::size_t, std::size_t>>& path,
                                      double sq_before, double abs_before) {
    constexpr double c = 16.0 * std::numeric_limits<double>::epsilon();
    std::vector<double> sq(slice.size()), ab(slice.size());
    for (std::size_t i = 0; i < slice.size(); ++i) {
        sq[i] = (i ? sq[i - 1] : sq_before) + slice[i] * slice[i];
        ab[i] = (i ? ab[i - 1] : abs_before) + std::abs(slice[i]);
    }
    double bound = 0.0;
    for (auto [i, k] : path) {
        if (std::isinf(q.eta[k]))
            continue;
        const auto st = two_pass(slice.first(i + 1));
        const double n = static_cast<double>(i + 1);
        const double z = std::abs((slice[i] - st.mean) / st.std);
        const double rel_var = c * sq[i] / (n * st.std * st.std);
        const double mean_err = c * ab[i] / (n * st.std);
        bound += (z * rel_var + mean_err) / q.eta[k];
    }
    return bound;
}

} // namespace oracle
