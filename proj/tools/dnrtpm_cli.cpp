// dnrtpm: streaming subsequence matching from the command line.
//
//   dnrtpm match    --query q.txt [--query q2.txt] --mode disjoint --epsilon 5 < stream.txt
//   dnrtpm generate --out data/stream --seed 7 [--sweep]
//   dnrtpm eval     --events ev.jsonl --truth stream.truth.csv [--sweep-csv out.csv]
//   dnrtpm bench    --m 100 --ticks 100000

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#ifdef __linux__
#include <sched.h>
#endif

#include <CLI11.hpp>

#include "dnrtpm/cli.hpp"

namespace {

using namespace dnrtpm;
using namespace dnrtpm::cli;

void pin_to_cpu(int cpu) {
#ifdef __linux__
    cpu_set_t set;
    CPU_ZERO(&set);
    CPU_SET(cpu, &set);
    if (sched_setaffinity(0, sizeof set, &set) != 0)
        std::cerr << "warning: could not pin to cpu " << cpu << '\n';
#else
    std::cerr << "warning: cpu pinning is not supported on this platform\n";
#endif
}

std::vector<ShapeKind> parse_shapes(const std::vector<std::string>& names, bool base_default) {
    std::vector<ShapeKind> out;
    for (const auto& n : names)
        out.push_back(parse_shape(n));
    if (out.empty()) {
        if (base_default)
            out.assign(kBaseShapes.begin(), kBaseShapes.end());
        else
            out.assign(kAllShapes.begin(), kAllShapes.end());
    }
    return out;
}

} // namespace

int main(int argc, char** argv) {
    std::ios::sync_with_stdio(false);
    CLI::App app{"Streaming subsequence matching with dynamic z-normalization"};
    app.require_subcommand(1);

    // match
    auto* match = app.add_subcommand("match", "Match queries against a sample stream");
    std::vector<std::string> query_paths;
    std::string stream_path = "-";
    std::string events_path = "-";
    std::string mode = "disjoint";
    std::string cost = "abs";
    std::optional<double> epsilon;
    std::optional<std::size_t> k;
    std::optional<double> band;
    std::optional<std::size_t> trace_window;
    std::optional<std::size_t> window;
    bool normalized = false;
    bool use_baseline = false;
    match->add_option("-q,--query", query_paths, "Query file (repeat for several queries)")->required();
    match->add_option("-i,--input", stream_path, "Sample stream, '-' for stdin");
    match->add_option("-o,--output", events_path, "Event JSON lines, '-' for stdout");
    match->add_option("--mode", mode, "monitor, disjoint or topk");
    match->add_option("--epsilon", epsilon, "Distance threshold (monitor, disjoint)");
    match->add_option("-k,--k", k, "Number of best matches (topk)");
    match->add_option("--cost", cost, "Point cost: abs or squared");
    match->add_option("--band", band, "Warping band for quality metrics, fraction of length");
    match->add_flag("--normalized", normalized, "Attach the dynamically normalized match values");
    match->add_option("--trace-window", trace_window, "Ticks retained for --normalized (default 8 x query length)");
    match->add_flag("--baseline", use_baseline, "Use the fixed-window z-normalization matcher");
    match->add_option("--window", window, "Baseline window length (default query length)");

    // generate
    auto* gen = app.add_subcommand("generate", "Write a synthetic labeled stream");
    StreamConfig sc;
    std::optional<std::uint64_t> seed;
    std::string prefix = "stream";
    std::vector<std::string> shape_names;
    std::optional<std::size_t> gap;
    bool sweep = false;
    gen->add_option("--out", prefix, "Output prefix: PREFIX.csv and PREFIX.truth.csv");
    gen->add_option("--seed", seed, "Random seed (drawn and printed when absent)");
    gen->add_option("--shape", shape_names, "Shape kinds (default: all six)");
    gen->add_option("--m", sc.m, "Base shape length");
    gen->add_option("--plants", sc.plants_per_shape, "Plants per shape");
    gen->add_option("--lambda", sc.lambda, "Uniform time scaling factor");
    gen->add_flag("--random-inverse", sc.random_inverse, "Use lambda or 1/lambda per plant with equal chance");
    gen->add_option("--gap", gap, "Noise samples between plants (default 2m/lambda)");
    gen->add_option("--amp-min", sc.amp_lo);
    gen->add_option("--amp-max", sc.amp_hi);
    gen->add_option("--shift-min", sc.shift_lo);
    gen->add_option("--shift-max", sc.shift_hi);
    gen->add_flag("--sweep", sweep, "One stream per lambda in the standard sweep");

    // eval
    auto* ev = app.add_subcommand("eval", "Score events against ground truth, or run the recall sweep");
    std::string ev_events, ev_truth, ev_stream, ev_query, ev_out = "-", sweep_csv;
    EvalOptions eo;
    std::optional<std::string> label, query_name;
    std::string ev_cost = "abs";
    std::optional<double> dt_s;
    std::optional<std::uint64_t> sweep_seed;
    std::size_t sweep_m = 120, sweep_plants = 30;
    bool no_baseline = false;
    ev->add_option("--events", ev_events, "Event JSON lines");
    ev->add_option("--truth", ev_truth, "Truth CSV");
    ev->add_option("--alpha-min", eo.alpha_min, "Minimum overlap for a retrieval");
    ev->add_option("--label", label, "Score only truths with this label");
    ev->add_option("--query-name", query_name, "Score only events tagged with this query");
    ev->add_option("--stream", ev_stream, "Stream file, for retrieval quality and timing");
    ev->add_option("--query", ev_query, "Query file, for retrieval quality and timing");
    ev->add_option("--cost", ev_cost, "Point cost: abs or squared");
    ev->add_option("--band", eo.band, "Warping band for the quality metric");
    ev->add_flag("--time", eo.time, "Time the matcher over the stream");
    ev->add_option("--sampling-interval", dt_s, "Seconds between samples, for the modeled delay");
    ev->add_option("-o,--output", ev_out, "Report JSON, '-' for stdout");
    ev->add_option("--sweep-csv", sweep_csv, "Run the recall-vs-lambda sweep and write CSV here");
    ev->add_option("--seed", sweep_seed, "Sweep seed");
    ev->add_option("--m", sweep_m, "Sweep shape length");
    ev->add_option("--plants", sweep_plants, "Sweep plants per shape");
    ev->add_option("--shape", shape_names, "Sweep shape kinds (default: the three base shapes)");
    ev->add_flag("--no-baseline", no_baseline, "Sweep without the fixed-window matcher");

    // bench
    auto* bn = app.add_subcommand("bench", "Per-tick latency over a noise stream");
    BenchOptions bo;
    std::string samples_csv;
    std::optional<int> pin;
    bn->add_option("--m", bo.m, "Query length");
    bn->add_option("--ticks", bo.ticks, "Stream length");
    bn->add_option("--window", bo.window, "Ticks per regression point");
    bn->add_option("--seed", bo.seed, "Random seed");
    bn->add_flag("--baseline", bo.baseline, "Time the fixed-window matcher");
    bn->add_option("--samples-csv", samples_csv, "Write per-tick nanoseconds here");
    bn->add_option("--pin-cpu", pin, "Pin the process to this CPU before timing");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return exit_config;
    }

    return run_guarded(
        [&] {
            if (*match) {
                RunConfig rc;
                rc.mode = parse_mode(mode);
                rc.cost = parse_cost(cost);
                rc.epsilon = epsilon;
                rc.k = k;
                rc.band = band;
                rc.trace_window = trace_window;
                rc.emit_normalized = normalized;
                rc.baseline = use_baseline;
                rc.window = window;
                validate(rc);
                const Buffering buffering = buffering_from_env();
                std::vector<NamedQuery> queries;
                for (const auto& p : query_paths)
                    queries.push_back(load_query(p));

                std::ifstream in_file;
                std::istream* in = &std::cin;
                if (stream_path != "-") {
                    in_file = open_in(stream_path);
                    in = &in_file;
                }
                std::ofstream out_file;
                std::ostream* out = &std::cout;
                if (events_path != "-") {
                    out_file = open_out(events_path);
                    out = &out_file;
                }
                cmd_match(rc, *in, queries, *out, std::cerr, buffering);
            } else if (*gen) {
                sc.shapes = parse_shapes(shape_names, false);
                sc.gap = gap;
                cmd_generate(sc, seed, prefix, sweep, std::cerr);
            } else if (*ev) {
                eo.cost = parse_cost(ev_cost);
                if (!sweep_csv.empty()) {
                    SweepOptions so;
                    so.base.shapes = parse_shapes(shape_names, true);
                    so.base.m = sweep_m;
                    so.base.plants_per_shape = sweep_plants;
                    so.base.seed = resolve_seed(sweep_seed, std::cerr);
                    so.alpha_min = eo.alpha_min;
                    so.with_baseline = !no_baseline;
                    auto f = open_out(sweep_csv);
                    write_sweep_csv(f, recall_sweep(so));
                    if (!f)
                        throw IoError("write to '" + sweep_csv + "' failed");
                    return;
                }
                if (ev_events.empty() || ev_truth.empty())
                    throw ConfigError("events/truth: both are required unless --sweep-csv is given");
                eo.label = label;
                eo.query_name = query_name;
                eo.sampling_interval_s = dt_s;
                if (!ev_stream.empty()) {
                    auto f = open_in(ev_stream);
                    eo.stream = read_samples(f);
                }
                if (!ev_query.empty())
                    eo.query = load_query(ev_query).values;
                auto evf = open_in(ev_events);
                auto trf = open_in(ev_truth);
                const EvalReport r = cmd_eval(eo, evf, trf);
                const std::string text = to_json(r).dump(2) + "\n";
                if (ev_out == "-") {
                    std::cout << text;
                } else {
                    auto f = open_out(ev_out);
                    f << text;
                    if (!f)
                        throw IoError("write to '" + ev_out + "' failed");
                }
            } else if (*bn) {
                if (pin)
                    pin_to_cpu(*pin);
                const auto [stats, footprint] = run_bench(bo, std::cerr, !samples_csv.empty());
                std::cout << to_json(stats, bo.m, footprint).dump(2) << '\n';
                if (!samples_csv.empty()) {
                    auto f = open_out(samples_csv);
                    f << "tick,ns\n";
                    for (std::size_t i = 0; i < stats.per_tick_ns.size(); ++i)
                        f << i << ',' << format_double(stats.per_tick_ns[i]) << '\n';
                    if (!f)
                        throw IoError("write to '" + samples_csv + "' failed");
                }
            }
        },
        std::cerr);
}
