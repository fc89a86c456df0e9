#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <streambuf>
#include <string>
#include <vector>

#include <sys/wait.h>

#include <gtest/gtest.h>

#include "dnrtpm/cli.hpp"

using namespace dnrtpm;
using namespace dnrtpm::cli;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() / ("dnrtpm_cli_" + std::to_string(std::random_device{}()));
        fs::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path, ec);
    }
};

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::ostringstream s;
    s << f.rdbuf();
    return s.str();
}

std::string lines(const std::vector<double>& v) {
    std::string out;
    for (double x : v)
        out += format_double(x) + '\n';
    return out;
}

std::vector<double> noise(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd;
    std::vector<double> v(n);
    for (auto& x : v)
        x = nd(rng);
    return v;
}

RunConfig disjoint(double eps) {
    RunConfig rc;
    rc.mode = Mode::disjoint;
    rc.epsilon = eps;
    return rc;
}

int run_binary(const std::string& args, const fs::path& dir) {
    const std::string cmd = std::string(DNRTPM_CLI_PATH) + " " + args + " >" + (dir / "out.txt").string() + " 2>" +
                            (dir / "err.txt").string();
    const int rc = std::system(cmd.c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

// Hands out one line per underflow and records how much event output existed
// at the moment each line was requested.
class LockStepBuf : public std::streambuf {
  public:
    LockStepBuf(std::vector<std::string> lines, const std::ostringstream& out) : lines_(std::move(lines)), out_(out) {}

    std::vector<std::size_t> out_size_at_request;

  protected:
    int_type underflow() override {
        if (next_ >= lines_.size())
            return traits_type::eof();
        out_size_at_request.push_back(out_.str().size());
        cur_ = lines_[next_++] + '\n';
        setg(cur_.data(), cur_.data(), cur_.data() + cur_.size());
        return traits_type::to_int_type(cur_[0]);
    }

  private:
    std::vector<std::string> lines_;
    const std::ostringstream& out_;
    std::string cur_;
    std::size_t next_ = 0;
};

} // namespace

TEST(Validate, DiagnosticsNameTheField) {
    auto expect_field = [](const RunConfig& c, const std::string& field) {
        try {
            validate(c);
            FAIL() << "expected a configuration error for " << field;
        } catch (const ConfigError& e) {
            EXPECT_EQ(std::string(e.what()).rfind(field, 0), 0u) << e.what();
        }
    };
    RunConfig c;
    c.mode = Mode::monitor;
    expect_field(c, "epsilon");
    c.epsilon = -1.0;
    expect_field(c, "epsilon");
    c.epsilon = 1.0;
    c.k = 2;
    expect_field(c, "k");
    c = RunConfig{};
    c.mode = Mode::topk;
    c.epsilon = 1.0;
    expect_field(c, "epsilon");
    c.epsilon.reset();
    c.k = 0;
    expect_field(c, "k");
    c.k = 1;
    c.band = 1.5;
    expect_field(c, "band");
    c.band.reset();
    c.trace_window = 10;
    expect_field(c, "trace_window");
    c.trace_window.reset();
    c.window = 10;
    expect_field(c, "window");
    c.baseline = true;
    c.window = 1;
    expect_field(c, "window");
    c.window.reset();
    c.emit_normalized = true;
    expect_field(c, "emit_normalized");
    EXPECT_THROW(parse_mode("fast"), ConfigError);
    EXPECT_THROW(parse_cost("l3"), ConfigError);
}

TEST(CmdMatch, GeneratedFixtureYieldsEventsOverTruth) {
    StreamConfig sc;
    sc.shapes = {ShapeKind::arc_blob};
    sc.plants_per_shape = 3;
    sc.m = 60;
    sc.seed = 5;
    std::ostringstream stream_csv, truth_csv;
    generate_to(sc, stream_csv, truth_csv);

    RunConfig rc;
    rc.mode = Mode::topk;
    rc.k = 3;
    std::istringstream in(stream_csv.str());
    std::ostringstream out, log;
    const auto sum = cmd_match(rc, in, {{"arc", make_shape(ShapeKind::arc_blob, 60)}}, out, log);
    EXPECT_EQ(sum.events[0], 3u);

    std::istringstream ev_in(out.str()), truth_in(truth_csv.str());
    const auto report = cmd_eval(EvalOptions{}, ev_in, truth_in);
    EXPECT_EQ(report.score.recall, 1.0);
    EXPECT_NE(log.str().find("summary: {\"ticks\":"), std::string::npos);
}

TEST(CmdMatch, EmptyStreamNoEvents) {
    std::istringstream in("");
    std::ostringstream out, log;
    const auto sum = cmd_match(disjoint(1.0), in, {{"q", make_shape(ShapeKind::stairs, 20)}}, out, log);
    EXPECT_EQ(sum.ticks, 0);
    EXPECT_TRUE(out.str().empty());
}

TEST(CmdMatch, RejectsDegenerateQuery) {
    std::istringstream in("1\n2\n");
    std::ostringstream out, log;
    EXPECT_THROW(cmd_match(disjoint(1.0), in, {{"flat", std::vector<double>(10, 2.0)}}, out, log), ConfigError);
    EXPECT_THROW(cmd_match(disjoint(1.0), in, {{"one", {1.0}}}, out, log), ConfigError);
}

TEST(CmdMatch, MultipleQueriesAreTagged) {
    const auto a = make_shape(ShapeKind::stairs, 30);
    const auto b = make_shape(ShapeKind::triangle_wave, 30);
    auto s = noise(100, 1);
    s.insert(s.end(), a.begin(), a.end());
    const auto mid = noise(100, 2);
    s.insert(s.end(), mid.begin(), mid.end());
    s.insert(s.end(), b.begin(), b.end());
    const auto tail = noise(100, 3);
    s.insert(s.end(), tail.begin(), tail.end());

    RunConfig rc;
    rc.mode = Mode::topk;
    rc.k = 1;
    std::istringstream in(lines(s));
    std::ostringstream out, log;
    cmd_match(rc, in, {{"a", a}, {"b", b}}, out, log);
    std::istringstream ev_in(out.str());
    const auto ev = read_events_jsonl(ev_in);
    ASSERT_EQ(ev.size(), 2u);
    for (const auto& e : ev) {
        ASSERT_TRUE(e.query.has_value());
        if (*e.query == "a")
            EXPECT_EQ(e.event.start, 100);
        else
            EXPECT_EQ(e.event.start, 230);
    }
}

TEST(CmdMatch, NormalizedValuesAttached) {
    const auto q = make_shape(ShapeKind::arc_blob, 40);
    auto s = noise(80, 4);
    for (double v : q)
        s.push_back(3.0 * v + 1.0);
    const auto tail = noise(80, 5);
    s.insert(s.end(), tail.begin(), tail.end());
    RunConfig rc;
    rc.mode = Mode::topk;
    rc.emit_normalized = true;
    std::istringstream in(lines(s));
    std::ostringstream out, log;
    cmd_match(rc, in, {{"q", q}}, out, log);
    const auto j = ojson::parse(out.str().substr(0, out.str().find('\n')));
    ASSERT_TRUE(j["normalized"].is_array());
    EXPECT_EQ(j["normalized"].size(), q.size());
}

TEST(CmdMatch, BufferingFromEnvironment) {
    ::unsetenv("DNRTPM_OUTPUT_BUFFERING");
    EXPECT_EQ(buffering_from_env(), Buffering::line);
    ::setenv("DNRTPM_OUTPUT_BUFFERING", "block", 1);
    EXPECT_EQ(buffering_from_env(), Buffering::block);
    ::setenv("DNRTPM_OUTPUT_BUFFERING", "sometimes", 1);
    EXPECT_THROW(buffering_from_env(), ConfigError);
    ::unsetenv("DNRTPM_OUTPUT_BUFFERING");
}

TEST(CmdMatch, MonitorEventWrittenBeforeNextSampleIsRead) {
    const auto q = make_shape(ShapeKind::triangle_wave, 32);
    auto s = noise(200, 6);
    const Tick end = 200 + 31;
    for (double v : q)
        s.push_back(2.0 * v - 1.0);
    const auto tail = noise(50, 7);
    s.insert(s.end(), tail.begin(), tail.end());

    std::vector<std::string> ls;
    for (double v : s)
        ls.push_back(format_double(v));
    std::ostringstream out, log;
    LockStepBuf buf(ls, out);
    std::istream in(&buf);
    RunConfig rc;
    rc.mode = Mode::monitor;
    rc.epsilon = 0.01;
    cmd_match(rc, in, {{"q", q}}, out, log);

    ASSERT_FALSE(out.str().empty());
    const auto first = ojson::parse(out.str().substr(0, out.str().find('\n')));
    EXPECT_EQ(first["end"], end);
    EXPECT_EQ(first["emitted_at"], end);
    ASSERT_GT(buf.out_size_at_request.size(), static_cast<std::size_t>(end + 1));
    EXPECT_EQ(buf.out_size_at_request[static_cast<std::size_t>(end)], 0u);
    EXPECT_GT(buf.out_size_at_request[static_cast<std::size_t>(end + 1)], 0u);
}

TEST(CmdGenerate, DefaultWritesAllPlantsDeterministically) {
    TempDir d;
    std::ostringstream log;
    const auto a = cmd_generate(StreamConfig{}, 17, (d.path / "a").string(), false, log);
    const auto b = cmd_generate(StreamConfig{}, 17, (d.path / "b").string(), false, log);
    ASSERT_EQ(a.size(), 1u);
    EXPECT_EQ(slurp(a[0]), slurp(b[0]));
    EXPECT_EQ(slurp(d.path / "a.truth.csv"), slurp(d.path / "b.truth.csv"));
    std::ifstream t(d.path / "a.truth.csv");
    EXPECT_EQ(read_truth_csv(t).size(), 180u);
    EXPECT_TRUE(log.str().empty());
}

TEST(CmdGenerate, SweepAndUnseeded) {
    TempDir d;
    std::ostringstream log;
    StreamConfig c;
    c.plants_per_shape = 1;
    const auto files = cmd_generate(c, std::nullopt, (d.path / "s").string(), true, log);
    EXPECT_EQ(files.size(), kLambdaSweep.size());
    EXPECT_TRUE(fs::exists(d.path / "s_lambda0.25.csv"));
    EXPECT_TRUE(fs::exists(d.path / "s_lambda10.truth.csv"));
    EXPECT_EQ(log.str().rfind("seed: ", 0), 0u);
    EXPECT_THROW(cmd_generate(c, 1, (d.path / "missing" / "x").string(), false, log), IoError);
}

TEST(CmdEval, PerfectAndEmpty) {
    std::istringstream truth1("start,end,label\n10,19,a\n40,49,a\n");
    std::istringstream ev1(R"({"start":10,"end":19}
{"start":40,"end":49}
)");
    const auto r = cmd_eval(EvalOptions{}, ev1, truth1);
    EXPECT_EQ(r.score.recall, 1.0);
    EXPECT_EQ(r.score.f1, 1.0);
    std::istringstream truth2("start,end,label\n10,19,a\n");
    std::istringstream ev2("");
    EXPECT_EQ(cmd_eval(EvalOptions{}, ev2, truth2).score.recall, 0.0);
    EvalOptions bad;
    bad.alpha_min = 0.0;
    EXPECT_THROW(cmd_eval(bad, ev2, truth2), ConfigError);
}

TEST(CmdEval, QualityAndTiming) {
    const auto q = make_shape(ShapeKind::stairs, 20);
    auto s = noise(60, 8);
    for (double v : q)
        s.push_back(v * 2.0);
    EvalOptions o;
    o.stream = s;
    o.query = q;
    o.time = true;
    o.sampling_interval_s = 1.0;
    std::istringstream ev(R"({"start":60,"end":79})");
    std::istringstream truth("start,end,label\n60,79,stairs\n");
    const auto r = cmd_eval(o, ev, truth);
    ASSERT_TRUE(r.mean_znorm_dtw.has_value());
    EXPECT_NEAR(*r.mean_znorm_dtw, 0.0, 1e-9);
    ASSERT_TRUE(r.per_tick_ns.has_value());
    ASSERT_TRUE(r.modeled_delay_s.has_value());
    EXPECT_LT(*r.modeled_delay_s, 1.0);
}

TEST(Sweep, CsvHasOneRowPerLambdaShapeMethod) {
    SweepOptions o;
    o.base.shapes = {ShapeKind::stairs};
    o.base.m = 40;
    o.base.plants_per_shape = 3;
    o.lambdas = {1.0, 2.0};
    const auto rows = recall_sweep(o);
    ASSERT_EQ(rows.size(), 4u);
    std::ostringstream csv;
    write_sweep_csv(csv, rows);
    std::istringstream in(csv.str());
    std::string line;
    std::getline(in, line);
    EXPECT_EQ(line, "lambda,shape,method,recall,precision,f1");
    std::getline(in, line);
    EXPECT_EQ(line.rfind("1,stairs,dnrtpm,", 0), 0u);
}

TEST(Binary, ExitCodes) {
    TempDir d;
    const auto q = d.path / "q.txt";
    std::ofstream(q) << lines(make_shape(ShapeKind::stairs, 20));
    const auto good = d.path / "good.txt";
    std::ofstream(good) << lines(noise(100, 9));
    const auto bad = d.path / "bad.txt";
    std::ofstream(bad) << "1\n2\nabc\n";

    const std::string base = "match -q " + q.string() + " --mode disjoint --epsilon 1 -i ";
    EXPECT_EQ(run_binary(base + good.string(), d.path), 0);
    EXPECT_EQ(run_binary(base + bad.string(), d.path), 2);
    EXPECT_NE(slurp(d.path / "err.txt").find("line 3"), std::string::npos);
    EXPECT_EQ(run_binary("match -q " + q.string() + " --mode monitor -i " + good.string(), d.path), 3);
    EXPECT_NE(slurp(d.path / "err.txt").find("epsilon"), std::string::npos);
    EXPECT_EQ(run_binary(base + (d.path / "nope.txt").string(), d.path), 4);
    EXPECT_EQ(run_binary("match -q " + q.string() + " --bogus", d.path), 3);
    EXPECT_EQ(run_binary("generate --seed 3 --plants 1 --out " + (d.path / "g").string(), d.path), 0);
    EXPECT_TRUE(fs::exists(d.path / "g.truth.csv"));
}
