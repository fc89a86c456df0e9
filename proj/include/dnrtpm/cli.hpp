#pragma once

// Command implementations behind the dnrtpm executable. Everything here
// works on iostreams so the commands can be driven in-process.

#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <string_view>
#include <type_traits>
#include <utility>
#include <variant>
#include <vector>

#include "dnrtpm/baseline.hpp"
#include "dnrtpm/engine.hpp"
#include "dnrtpm/eval.hpp"
#include "dnrtpm/io.hpp"
#include "dnrtpm/synth.hpp"

namespace dnrtpm::cli {

enum ExitCode : int {
    exit_ok = 0,
    exit_failure = 1,
    exit_parse = 2,
    exit_config = 3,
    exit_io = 4,
};

enum class Buffering { line, block };

/// DNRTPM_OUTPUT_BUFFERING=line|block; line when unset.
inline Buffering buffering_from_env() {
    const char* v = std::getenv("DNRTPM_OUTPUT_BUFFERING");
    if (v == nullptr || std::string_view(v).empty() || std::string_view(v) == "line")
        return Buffering::line;
    if (std::string_view(v) == "block")
        return Buffering::block;
    throw ConfigError("DNRTPM_OUTPUT_BUFFERING: expected 'line' or 'block', got '" + std::string(v) + "'");
}

struct RunConfig {
    Mode mode = Mode::disjoint;
    std::optional<double> epsilon;
    std::optional<std::size_t> k;
    CostNorm cost = CostNorm::absolute;
    std::optional<double> band;
    std::optional<std::size_t> trace_window; // default 8 * query length when normalized output is on
    bool emit_normalized = false;
    bool baseline = false;                   // fixed-window matcher instead of the dynamic one
    std::optional<std::size_t> window;       // baseline window length
};

inline void validate(const RunConfig& c) {
    if (c.mode == Mode::topk) {
        if (c.epsilon)
            throw ConfigError("epsilon: not used in topk mode");
        if (c.k && *c.k == 0)
            throw ConfigError("k: must be >= 1");
    } else {
        if (!c.epsilon)
            throw ConfigError("epsilon: required in " + std::string(to_string(c.mode)) + " mode");
        if (!(*c.epsilon > 0.0))
            throw ConfigError("epsilon: must be > 0");
        if (c.k)
            throw ConfigError("k: only valid in topk mode");
    }
    if (c.band && !(*c.band >= 0.0 && *c.band <= 1.0))
        throw ConfigError("band: must lie in [0, 1]");
    if (c.trace_window && *c.trace_window == 0)
        throw ConfigError("trace_window: must be >= 1");
    if (c.trace_window && !c.emit_normalized)
        throw ConfigError("trace_window: only used with normalized output");
    if (c.baseline && c.emit_normalized)
        throw ConfigError("emit_normalized: not available for the fixed-window baseline");
    if (c.window && !c.baseline)
        throw ConfigError("window: only used by the fixed-window baseline");
    if (c.window && *c.window < 2)
        throw ConfigError("window: must be >= 2");
}

inline Mode parse_mode(std::string_view s) {
    if (s == "monitor")
        return Mode::monitor;
    if (s == "disjoint")
        return Mode::disjoint;
    if (s == "topk")
        return Mode::topk;
    throw ConfigError("mode: expected monitor, disjoint or topk, got '" + std::string(s) + "'");
}

inline CostNorm parse_cost(std::string_view s) {
    if (s == "abs")
        return CostNorm::absolute;
    if (s == "squared")
        return CostNorm::squared;
    throw ConfigError("cost: expected abs or squared, got '" + std::string(s) + "'");
}

struct NamedQuery {
    std::string name;
    std::vector<double> values;
};

inline std::ifstream open_in(const std::filesystem::path& p) {
    std::ifstream f(p);
    if (!f)
        throw IoError("cannot open '" + p.string() + "' for reading");
    return f;
}

inline std::ofstream open_out(const std::filesystem::path& p) {
    std::ofstream f(p, std::ios::binary);
    if (!f)
        throw IoError("cannot open '" + p.string() + "' for writing");
    return f;
}

inline NamedQuery load_query(const std::filesystem::path& p) {
    auto f = open_in(p);
    try {
        return {p.stem().string(), read_samples(f)};
    } catch (const ParseError& e) {
        throw ParseError(p.string() + ": " + e.what(), e.line());
    }
}

struct MatchSummary {
    Tick ticks = 0;
    std::vector<std::size_t> events; // per query
};

namespace detail {

class AnyMatcher {
  public:
    AnyMatcher(const RunConfig& rc, const NamedQuery& q) {
        if (rc.baseline) {
            FixedWindowMatcher::Config c;
            c.mode = rc.mode;
            c.epsilon = rc.epsilon.value_or(kInf);
            c.k = rc.k.value_or(1);
            c.window = rc.window.value_or(0);
            c.cost = rc.cost;
            impl_.emplace<FixedWindowMatcher>(q.values, c);
            return;
        }
        MatcherConfig c;
        c.mode = rc.mode;
        c.epsilon = rc.epsilon.value_or(kInf);
        c.k = rc.k.value_or(1);
        c.cost = rc.cost;
        if (rc.emit_normalized)
            c.trace_window = rc.trace_window.value_or(8 * q.values.size());
        impl_.emplace<Matcher>(PreparedQuery(q.values), c);
    }

    std::vector<MatchEvent> step(double s) {
        return std::visit(
            [&](auto& m) -> std::vector<MatchEvent> {
                if constexpr (std::is_same_v<std::decay_t<decltype(m)>, std::monostate>)
                    return {};
                else
                    return m.step(s);
            },
            impl_);
    }
    std::vector<MatchEvent> finalize() {
        return std::visit(
            [](auto& m) -> std::vector<MatchEvent> {
                if constexpr (std::is_same_v<std::decay_t<decltype(m)>, std::monostate>)
                    return {};
                else
                    return m.finalize();
            },
            impl_);
    }
    const Matcher* dynamic() const { return std::get_if<Matcher>(&impl_); }

  private:
    std::variant<std::monostate, Matcher, FixedWindowMatcher> impl_;
};

} // namespace detail

/// Reads samples line by line, steps one matcher per query and writes each
/// event as a JSON line the moment it is produced. A summary goes to `log`.
inline MatchSummary cmd_match(const RunConfig& rc, std::istream& samples, const std::vector<NamedQuery>& queries,
                              std::ostream& out, std::ostream& log, Buffering buffering = Buffering::line) {
    validate(rc);
    if (queries.empty())
        throw ConfigError("query: at least one query is required");

    std::vector<detail::AnyMatcher> matchers;
    for (const auto& q : queries) {
        try {
            matchers.emplace_back(rc, q);
        } catch (const InvalidInput& e) {
            throw ConfigError("query '" + q.name + "': " + e.what());
        } catch (const DegenerateInput& e) {
            throw ConfigError("query '" + q.name + "': " + e.what());
        }
    }

    MatchSummary sum;
    sum.events.assign(queries.size(), 0);
    const bool tag = queries.size() > 1;

    auto write = [&](std::size_t qi, const std::vector<MatchEvent>& evs) {
        for (const auto& ev : evs) {
            ojson j = to_json(ev);
            if (tag)
                j["query"] = queries[qi].name;
            if (const Matcher* m = matchers[qi].dynamic(); m && rc.emit_normalized) {
                try {
                    j["normalized"] = m->reconstruct_normalized(ev);
                } catch (const TraceExhausted& e) {
                    j["normalized"] = nullptr;
                    log << "warning: " << e.what() << '\n';
                }
            }
            out << j.dump() << '\n';
            ++sum.events[qi];
        }
        if (!evs.empty() && buffering == Buffering::line)
            out.flush();
        if (!out)
            throw IoError("write to event output failed");
    };

    SampleReader reader(samples);
    while (const auto s = reader.next()) {
        for (std::size_t qi = 0; qi < matchers.size(); ++qi)
            write(qi, matchers[qi].step(*s));
        ++sum.ticks;
    }
    for (std::size_t qi = 0; qi < matchers.size(); ++qi)
        write(qi, matchers[qi].finalize());
    out.flush();

    ojson j;
    j["ticks"] = sum.ticks;
    ojson per = ojson::object();
    for (std::size_t qi = 0; qi < queries.size(); ++qi)
        per[queries[qi].name] = sum.events[qi];
    j["events"] = std::move(per);
    log << "summary: " << j.dump() << '\n';
    return sum;
}

/// Seed to use for a run; unseeded runs draw one and print it.
inline std::uint64_t resolve_seed(std::optional<std::uint64_t> seed, std::ostream& log) {
    if (seed)
        return *seed;
    std::random_device rd;
    const std::uint64_t s = (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
    log << "seed: " << s << '\n';
    return s;
}

inline void generate_to(const StreamConfig& cfg, std::ostream& stream_out, std::ostream& truth_out) {
    const LabeledStream ls = build_stream(cfg);
    write_stream_csv(stream_out, ls.samples);
    write_truth_csv(truth_out, ls.truth);
    if (!stream_out || !truth_out)
        throw IoError("write of generated stream failed");
}

inline std::string lambda_tag(double lambda) {
    std::ostringstream s;
    s << lambda;
    return s.str();
}

/// Writes PREFIX.csv and PREFIX.truth.csv, or with `sweep` one pair
/// PREFIX_lambda<L>.csv / PREFIX_lambda<L>.truth.csv per sweep value.
/// Returns the stream files written.
inline std::vector<std::filesystem::path> cmd_generate(StreamConfig cfg, std::optional<std::uint64_t> seed,
                                                       const std::string& prefix, bool sweep, std::ostream& log) {
    cfg.seed = resolve_seed(seed, log);
    std::vector<std::filesystem::path> written;
    auto one = [&](const std::string& base) {
        auto s = open_out(base + ".csv");
        auto t = open_out(base + ".truth.csv");
        generate_to(cfg, s, t);
        written.emplace_back(base + ".csv");
    };
    if (!sweep) {
        one(prefix);
        return written;
    }
    for (double lam : kLambdaSweep) {
        cfg.lambda = lam;
        one(prefix + "_lambda" + lambda_tag(lam));
    }
    return written;
}

struct EvalOptions {
    double alpha_min = 0.5;
    std::optional<std::string> label;
    std::optional<std::string> query_name; // only events tagged with this query
    CostNorm cost = CostNorm::absolute;
    std::optional<double> band;
    std::optional<std::vector<double>> stream; // for retrieval quality and timing
    std::optional<std::vector<double>> query;
    bool time = false;                         // bench the matcher over the stream
    std::optional<double> sampling_interval_s; // for the modeled delay
};

inline EvalReport cmd_eval(const EvalOptions& opt, std::istream& events_in, std::istream& truth_in) {
    if (!(opt.alpha_min > 0.0 && opt.alpha_min <= 1.0))
        throw ConfigError("alpha_min: must lie in (0, 1]");
    if (opt.band && !(*opt.band >= 0.0 && *opt.band <= 1.0))
        throw ConfigError("band: must lie in [0, 1]");
    if ((opt.time || opt.sampling_interval_s) && !(opt.stream && opt.query))
        throw ConfigError("time: needs both a stream and a query");
    if (opt.sampling_interval_s && !(*opt.sampling_interval_s > 0.0))
        throw ConfigError("sampling_interval: must be > 0");

    std::vector<MatchEvent> events;
    for (auto& ne : read_events_jsonl(events_in)) {
        if (!opt.query_name || (ne.query && *ne.query == *opt.query_name))
            events.push_back(ne.event);
    }
    const auto truth = read_truth_csv(truth_in);

    EvalReport r;
    r.alpha_min = opt.alpha_min;
    r.score = score(events, truth, opt.alpha_min, opt.label);
    if (opt.stream && opt.query) {
        try {
            r.mean_znorm_dtw = mean_znorm_dtw(events, *opt.stream, *opt.query, opt.cost, opt.band);
        } catch (const DegenerateInput& e) {
            throw ConfigError(std::string("query: ") + e.what());
        }
    }
    if (opt.time || opt.sampling_interval_s) {
        MatcherConfig c;
        c.mode = Mode::topk;
        c.cost = opt.cost;
        Matcher m(PreparedQuery(*opt.query), c);
        const BenchStats b = bench([&](double s) { m.step(s); }, *opt.stream);
        r.per_tick_ns = LatencySummary{b.mean_ns, b.p99_ns};
        if (opt.sampling_interval_s && b.ticks > 0)
            r.modeled_delay_s = delay_model(std::max(b.mean_ns, 1.0) * 1e-9, *opt.sampling_interval_s,
                                            static_cast<std::int64_t>(b.ticks),
                                            static_cast<std::int64_t>(opt.query->size()), DelayMethod::dnrtpm_like);
    }
    return r;
}

struct SweepOptions {
    StreamConfig base;          // shapes, m, plants_per_shape, seed
    std::vector<double> lambdas{kLambdaSweep.begin(), kLambdaSweep.end()};
    double alpha_min = 0.5;
    bool with_baseline = true;
};

struct SweepRow {
    double lambda;
    std::string shape;
    std::string method;
    ScoreResult score;
};

/// Recall vs. uniform scaling: for each lambda one stream, one top-k query
/// per shape (k = plants per shape), for each method.
inline std::vector<SweepRow> recall_sweep(const SweepOptions& opt) {
    std::vector<SweepRow> rows;
    for (double lam : opt.lambdas) {
        StreamConfig cfg = opt.base;
        cfg.lambda = lam;
        const LabeledStream ls = build_stream(cfg);
        for (ShapeKind sh : cfg.shapes) {
            const auto q = make_shape(sh, cfg.m);
            const std::string label(to_string(sh));
            MatcherConfig mc;
            mc.mode = Mode::topk;
            mc.k = cfg.plants_per_shape;
            Matcher m(PreparedQuery(q), mc);
            for (double s : ls.samples)
                m.step(s);
            rows.push_back({lam, label, "dnrtpm", score(m.finalize(), ls.truth, opt.alpha_min, label)});
            if (!opt.with_baseline)
                continue;
            FixedWindowMatcher::Config bc;
            bc.mode = Mode::topk;
            bc.k = cfg.plants_per_shape;
            FixedWindowMatcher b(q, bc);
            for (double s : ls.samples)
                b.step(s);
            rows.push_back({lam, label, "fixed_window", score(b.finalize(), ls.truth, opt.alpha_min, label)});
        }
    }
    return rows;
}

inline void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows) {
    out << "lambda,shape,method,recall,precision,f1\n";
    for (const auto& r : rows)
        out << format_double(r.lambda) << ',' << r.shape << ',' << r.method << ',' << format_double(r.score.recall)
            << ',' << format_double(r.score.precision) << ',' << format_double(r.score.f1) << '\n';
}

struct BenchOptions {
    std::size_t m = 100;
    std::size_t ticks = 100000;
    std::size_t window = 10000;
    std::optional<std::uint64_t> seed;
    bool baseline = false;
};

/// Times every step of a matcher over a standard-normal stream with a
/// random-walk query; returns the stats and the state footprint at the end.
inline std::pair<BenchStats, std::size_t> run_bench(const BenchOptions& opt, std::ostream& log, bool keep_samples) {
    if (opt.m < 2)
        throw ConfigError("m: must be >= 2");
    if (opt.window == 0)
        throw ConfigError("window: must be >= 1");
    std::mt19937_64 rng(resolve_seed(opt.seed, log));
    std::normal_distribution<double> nd;
    std::vector<double> q(opt.m);
    double acc = 0.0;
    for (auto& v : q)
        v = acc += nd(rng);
    std::vector<double> stream(opt.ticks);
    for (auto& v : stream)
        v = nd(rng);

    MatcherConfig c;
    c.mode = Mode::topk;
    c.k = 1;
    if (opt.baseline) {
        FixedWindowMatcher::Config bc;
        bc.mode = Mode::topk;
        FixedWindowMatcher b(q, bc);
        auto st = bench([&](double s) { b.step(s); }, stream, opt.window, keep_samples);
        return {std::move(st), 0};
    }
    Matcher mt(PreparedQuery(q), c);
    auto st = bench([&](double s) { mt.step(s); }, stream, opt.window, keep_samples);
    return {std::move(st), mt.state_footprint()};
}

inline ojson to_json(const BenchStats& b, std::size_t m, std::size_t footprint) {
    ojson j;
    j["m"] = m;
    j["ticks"] = b.ticks;
    j["mean_ns"] = b.mean_ns;
    j["p99_ns"] = b.p99_ns;
    j["window"] = b.window;
    j["slope_ns_per_tick"] = b.slope_ns_per_tick;
    j["slope_ci95"] = {std::isfinite(b.slope_ci_low) ? ojson(b.slope_ci_low) : ojson(nullptr),
                       std::isfinite(b.slope_ci_high) ? ojson(b.slope_ci_high) : ojson(nullptr)};
    j["state_doubles"] = footprint;
    return j;
}

/// Maps library exceptions to exit codes, printing the diagnostic to `err`.
template <typename F>
int run_guarded(F&& body, std::ostream& err) {
    try {
        body();
        return exit_ok;
    } catch (const ParseError& e) {
        err << "parse error: " << e.what() << '\n';
        return exit_parse;
    } catch (const ConfigError& e) {
        err << "configuration error: " << e.what() << '\n';
        return exit_config;
    } catch (const DegenerateInput& e) {
        err << "configuration error: " << e.what() << '\n';
        return exit_config;
    } catch (const InvalidInput& e) {
        err << "configuration error: " << e.what() << '\n';
        return exit_config;
    } catch (const IoError& e) {
        err << "i/o error: " << e.what() << '\n';
        return exit_io;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return exit_failure;
    }
}

} // namespace dnrtpm::cli
