#pragma once

// Text formats: sample streams (one value per line, or tick,value CSV),
// truth CSV, events as JSON lines.

#include <charconv>
#include <cmath>
#include <cstddef>
#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include <json.hpp>

#include "dnrtpm/error.hpp"
#include "dnrtpm/eval.hpp"
#include "dnrtpm/reporting.hpp"
#include "dnrtpm/synth.hpp"

namespace dnrtpm {

namespace detail {

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t'))
        s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
        s.remove_suffix(1);
    return s;
}

inline std::vector<std::string_view> split_commas(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t pos = 0;
    for (;;) {
        const std::size_t c = line.find(',', pos);
        out.push_back(trim(line.substr(pos, c == std::string_view::npos ? std::string_view::npos : c - pos)));
        if (c == std::string_view::npos)
            return out;
        pos = c + 1;
    }
}

template <typename T>
std::optional<T> parse_number(std::string_view s) {
    if (!s.empty() && s.front() == '+')
        s.remove_prefix(1);
    T v{};
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || p != s.data() + s.size() || s.empty())
        return std::nullopt;
    return v;
}

} // namespace detail

/// Pulls samples one line at a time, so a caller can act on each sample
/// before the next line is requested. The layout is fixed by the first data
/// line: a single value, or "tick,value" (a leading non-numeric line with a
/// comma is taken as a header and skipped). Blank lines are ignored.
class SampleReader {
  public:
    explicit SampleReader(std::istream& in) : in_(in) {}

    std::optional<double> next() {
        std::string line;
        while (std::getline(in_, line)) {
            ++line_no_;
            const std::string_view text = detail::trim(line);
            if (text.empty())
                continue;
            const auto fields = detail::split_commas(text);
            if (!columns_) {
                if (fields.size() > 2)
                    throw ParseError("expected one value or tick,value; got " + std::to_string(fields.size()) +
                                         " fields",
                                     line_no_);
                if (fields.size() == 2 && !detail::parse_number<double>(fields[0]) &&
                    !detail::parse_number<double>(fields[1])) {
                    columns_ = 2;
                    continue;
                }
                columns_ = fields.size();
            }
            if (fields.size() != *columns_)
                throw ParseError("expected " + std::to_string(*columns_) + " field(s), got " +
                                     std::to_string(fields.size()),
                                 line_no_);
            if (*columns_ == 2 && !detail::parse_number<long long>(fields[0]))
                throw ParseError("bad tick '" + std::string(fields[0]) + "'", line_no_);
            const auto v = detail::parse_number<double>(fields.back());
            if (!v)
                throw ParseError("bad sample '" + std::string(fields.back()) + "'", line_no_);
            if (!std::isfinite(*v))
                throw ParseError("non-finite sample '" + std::string(fields.back()) + "'", line_no_);
            return *v;
        }
        if (in_.bad())
            throw IoError("read failed after line " + std::to_string(line_no_));
        return std::nullopt;
    }

    std::size_t line() const noexcept { return line_no_; }

  private:
    std::istream& in_;
    std::size_t line_no_ = 0;
    std::optional<std::size_t> columns_;
};

inline std::vector<double> read_samples(std::istream& in) {
    SampleReader r(in);
    std::vector<double> out;
    while (auto v = r.next())
        out.push_back(*v);
    return out;
}

/// Shortest decimal text that reads back to the same double.
inline std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

inline void write_stream_csv(std::ostream& out, std::span<const double> samples) {
    out << "tick,value\n";
    for (std::size_t i = 0; i < samples.size(); ++i)
        out << i << ',' << format_double(samples[i]) << '\n';
}

inline void write_truth_csv(std::ostream& out, std::span<const TruthInterval> truth) {
    out << "start,end,label\n";
    for (const auto& t : truth)
        out << t.start << ',' << t.end << ',' << t.label << '\n';
}

inline std::vector<TruthInterval> read_truth_csv(std::istream& in) {
    std::vector<TruthInterval> out;
    std::string line;
    std::size_t no = 0;
    bool first = true;
    while (std::getline(in, line)) {
        ++no;
        const std::string_view text = detail::trim(line);
        if (text.empty())
            continue;
        const auto f = detail::split_commas(text);
        if (first) {
            first = false;
            if (f.size() >= 2 && !detail::parse_number<long long>(f[0]))
                continue;
        }
        if (f.size() < 2 || f.size() > 3)
            throw ParseError("expected start,end[,label]", no);
        const auto s = detail::parse_number<long long>(f[0]);
        const auto e = detail::parse_number<long long>(f[1]);
        if (!s || !e)
            throw ParseError("bad interval bounds", no);
        if (*s > *e)
            throw ParseError("interval start after end", no);
        out.push_back({*s, *e, f.size() == 3 ? std::string(f[2]) : std::string()});
    }
    if (in.bad())
        throw IoError("read failed after line " + std::to_string(no));
    return out;
}

using ojson = nlohmann::ordered_json;

inline ojson to_json(const MatchEvent& ev) {
    ojson j;
    j["start"] = ev.start;
    j["end"] = ev.end;
    j["distance"] = ev.distance;
    j["emitted_at"] = ev.emitted_at;
    j["kind"] = std::string(to_string(ev.kind));
    return j;
}

inline MatchKind parse_match_kind(std::string_view s) {
    if (s == "instant")
        return MatchKind::instant;
    if (s == "disjoint")
        return MatchKind::disjoint;
    if (s == "topk")
        return MatchKind::topk;
    throw InvalidInput("unknown event kind '" + std::string(s) + "'");
}

struct NamedEvent {
    MatchEvent event;
    std::optional<std::string> query;
};

/// Reads JSON-lines events; keys start and end are required.
inline std::vector<NamedEvent> read_events_jsonl(std::istream& in) {
    std::vector<NamedEvent> out;
    std::string line;
    std::size_t no = 0;
    while (std::getline(in, line)) {
        ++no;
        if (detail::trim(line).empty())
            continue;
        try {
            const auto j = ojson::parse(line);
            NamedEvent ne;
            ne.event.start = j.at("start").get<Tick>();
            ne.event.end = j.at("end").get<Tick>();
            ne.event.distance = j.value("distance", 0.0);
            ne.event.emitted_at = j.value("emitted_at", ne.event.end);
            if (j.contains("kind"))
                ne.event.kind = parse_match_kind(j["kind"].get<std::string>());
            if (j.contains("query"))
                ne.query = j["query"].get<std::string>();
            if (ne.event.start > ne.event.end)
                throw InvalidInput("start after end");
            out.push_back(std::move(ne));
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(e.what(), no);
        } catch (const InvalidInput& e) {
            throw ParseError(e.what(), no);
        }
    }
    if (in.bad())
        throw IoError("read failed after line " + std::to_string(no));
    return out;
}

inline ojson to_json(const EvalReport& r) {
    ojson j;
    j["recall"] = r.score.recall;
    j["precision"] = r.score.precision;
    j["f1"] = r.score.f1;
    j["retrieved"] = r.score.retrieved;
    j["total_truth"] = r.score.total_truth;
    j["alpha_min"] = r.alpha_min;
    j["mean_znorm_dtw"] = r.mean_znorm_dtw ? ojson(*r.mean_znorm_dtw) : ojson(nullptr);
    if (r.per_tick_ns)
        j["per_tick_ns"] = {{"mean", r.per_tick_ns->mean_ns}, {"p99", r.per_tick_ns->p99_ns}};
    else
        j["per_tick_ns"] = nullptr;
    j["modeled_delay_s"] = r.modeled_delay_s ? ojson(*r.modeled_delay_s) : ojson(nullptr);
    ojson events = ojson::array();
    for (const auto& e : r.score.per_event) {
        ojson x = to_json(e.event);
        x["alpha"] = e.alpha;
        x["label"] = e.truth_index ? ojson(e.label) : ojson(nullptr);
        events.push_back(std::move(x));
    }
    j["per_event"] = std::move(events);
    return j;
}

} // namespace dnrtpm
