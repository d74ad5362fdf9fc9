#pragma once

// Comparison tables and sensitivity tables.
//
// Display values (text tables and the JSON `display` block) use two
// decimals; CSV and the JSON record keep full precision.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <string>
#include <vector>

#include "archeval/campaign.hpp"
#include "archeval/error.hpp"
#include "archeval/json_io.hpp"
#include "archeval/metrics.hpp"

namespace archeval {

enum class ReportFormat { text, csv, json };

inline ReportFormat report_format_from_string(const std::string& s) {
    if (s == "text") return ReportFormat::text;
    if (s == "csv") return ReportFormat::csv;
    if (s == "json") return ReportFormat::json;
    throw InvalidArgument("unknown report format '" + s + "' (expected text, csv or json)");
}

enum class ReportRow { nrmt, hsx, hsx_t, hsx_e, hsx_c, asl, rtm, sc, pc };

inline constexpr ReportRow kReportRows[] = {ReportRow::nrmt,  ReportRow::hsx, ReportRow::hsx_t,
                                            ReportRow::hsx_e, ReportRow::hsx_c, ReportRow::asl,
                                            ReportRow::rtm,   ReportRow::sc,  ReportRow::pc};

inline std::string to_string(ReportRow r) {
    switch (r) {
        case ReportRow::nrmt: return "NRMT";
        case ReportRow::hsx: return "HSX";
        case ReportRow::hsx_t: return "HSX_t";
        case ReportRow::hsx_e: return "HSX_e";
        case ReportRow::hsx_c: return "HSX_c";
        case ReportRow::asl: return "ASL";
        case ReportRow::rtm: return "RTM";
        case ReportRow::sc: return "SC";
        case ReportRow::pc: return "PC";
    }
    return "?";
}

inline double row_value(const MetricSet& m, ReportRow r) {
    switch (r) {
        case ReportRow::nrmt: return static_cast<double>(m.nrmt);
        case ReportRow::hsx: return m.hsx;
        case ReportRow::hsx_t: return m.hsx_inputs.time_minutes;
        case ReportRow::hsx_e: return m.hsx_inputs.ease;
        case ReportRow::hsx_c: return m.hsx_inputs.cost_keur_month;
        case ReportRow::asl: return m.asl;
        case ReportRow::rtm: return m.rtm_ms;
        case ReportRow::sc: return m.sc;
        case ReportRow::pc: return m.pc;
    }
    return 0;
}

/// Shortest decimal form that parses back to the same double.
inline std::string full_precision(double v) {
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, r.ptr);
}

inline std::string two_decimals(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return buf;
}

/// Display form of one table cell. Counts print as integers; HSX is cut
/// (not rounded) to two decimals; everything else is rounded to two.
inline std::string display_value(ReportRow r, double v) {
    switch (r) {
        case ReportRow::nrmt:
        case ReportRow::hsx_e:
            return std::to_string(static_cast<long long>(std::llround(v)));
        case ReportRow::hsx:
            return two_decimals(std::floor(v * 100.0 + 1e-9) / 100.0);
        case ReportRow::hsx_t:
        case ReportRow::rtm:
            if (v == std::floor(v) && std::fabs(v) < 1e15)
                return std::to_string(static_cast<long long>(v));
            return two_decimals(v);
        default:
            return two_decimals(v);
    }
}

struct ComparisonRow {
    ReportRow metric;
    std::vector<double> values;
    std::vector<std::string> display;
    std::vector<std::string> markers;  // "", "↑" or "↓"; always "" for the baseline
};

struct ComparisonTable {
    std::vector<std::string> systems;  // baseline first
    std::vector<ComparisonRow> rows;
    std::vector<std::string> notes;
};

inline ComparisonTable build_comparison(const CampaignRecord& rec) {
    if (rec.baseline.failed()) throw InvalidArgument("record has no baseline metrics");
    std::vector<const SystemOutcome*> cols{&rec.baseline};
    for (const auto& c : rec.candidates)
        if (!c.failed()) cols.push_back(&c);

    ComparisonTable t;
    for (const auto* s : cols) t.systems.push_back(s->profile.name);
    for (ReportRow r : kReportRows) {
        ComparisonRow row{r, {}, {}, {}};
        const double base = row_value(*rec.baseline.metrics, r);
        for (std::size_t i = 0; i < cols.size(); ++i) {
            const double v = row_value(*cols[i]->metrics, r);
            row.values.push_back(v);
            row.display.push_back(display_value(r, v));
            row.markers.push_back(i == 0 || v == base ? "" : (v > base ? "↑" : "↓"));
        }
        t.rows.push_back(std::move(row));
    }

    t.notes.push_back("N_r = " + std::to_string(rec.baseline.metrics->n_r) + " for every system");
    for (const auto* s : cols) {
        if (s->nrmt)
            t.notes.push_back(s->profile.name + ": NRMT resolved to ramp step " +
                              std::to_string(s->nrmt->ramp_step) +
                              (s->nrmt->saturated ? "" : " (no knee within the ramp; lower bound)"));
        if (s->profile.probe.agent_urls.size() > 1)
            t.notes.push_back(s->profile.name + ": ASL is the mean across " +
                              std::to_string(s->profile.probe.agent_urls.size()) + " hosts");
    }
    for (const auto& c : rec.candidates) {
        if (c.failed()) {
            t.notes.push_back(c.profile.name + ": measurement failed at stage '" + c.failed_stage +
                              "': " + c.error);
        } else if (c.delta) {
            t.notes.push_back(c.profile.name + ": dS " + two_decimals(c.delta->delta_s) + ", dP " +
                              two_decimals(c.delta->delta_p) + ", " +
                              (c.delta->accepted ? "accepted" : "rejected"));
        }
    }
    std::string list;
    for (const auto& n : rec.result_list) list += (list.empty() ? "" : ", ") + n;
    t.notes.push_back("result list: " + (list.empty() ? std::string("(empty)") : list));
    return t;
}

namespace detail {

inline std::size_t display_width(const std::string& s) {
    std::size_t n = 0;
    for (unsigned char c : s) n += (c & 0xC0) != 0x80;
    return n;
}

inline std::string pad(const std::string& s, std::size_t w) {
    return s + std::string(w > display_width(s) ? w - display_width(s) : 0, ' ');
}

inline std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
    std::string q = "\"";
    for (char c : s) q += c == '"' ? std::string("\"\"") : std::string(1, c);
    return q + "\"";
}

}  // namespace detail

inline std::string render_text(const ComparisonTable& t) {
    std::vector<std::vector<std::string>> grid;
    grid.push_back({"Metric"});
    for (const auto& s : t.systems) grid.back().push_back(s);
    for (const auto& r : t.rows) {
        grid.push_back({to_string(r.metric)});
        for (std::size_t i = 0; i < r.display.size(); ++i)
            grid.back().push_back(r.display[i] + (r.markers[i].empty() ? "" : " " + r.markers[i]));
    }
    std::vector<std::size_t> width(grid.front().size(), 0);
    for (const auto& line : grid)
        for (std::size_t i = 0; i < line.size(); ++i)
            width[i] = std::max(width[i], detail::display_width(line[i]));

    std::ostringstream out;
    for (const auto& line : grid) {
        std::string s;
        for (std::size_t i = 0; i < line.size(); ++i)
            s += i + 1 < line.size() ? detail::pad(line[i], width[i] + 2) : line[i];
        out << s << '\n';
    }
    if (!t.notes.empty()) out << '\n';
    for (const auto& n : t.notes) out << n << '\n';
    return out.str();
}

inline std::string render_csv(const ComparisonTable& t) {
    std::ostringstream out;
    out << "metric";
    for (const auto& s : t.systems) out << ',' << detail::csv_field(s);
    out << '\n';
    for (const auto& r : t.rows) {
        out << to_string(r.metric);
        for (double v : r.values) out << ',' << full_precision(v);
        out << '\n';
    }
    return out.str();
}

inline json display_block(const ComparisonTable& t) {
    json rows = json::array();
    for (const auto& r : t.rows)
        rows.push_back({{"metric", to_string(r.metric)}, {"values", r.display}, {"markers", r.markers}});
    return {{"systems", t.systems}, {"rows", rows}, {"notes", t.notes}};
}

inline std::string emit_comparison(const CampaignRecord& rec, ReportFormat format) {
    const auto table = build_comparison(rec);
    switch (format) {
        case ReportFormat::text: return render_text(table);
        case ReportFormat::csv: return render_csv(table);
        case ReportFormat::json: {
            json j = rec;
            j["display"] = display_block(table);
            return j.dump(2) + "\n";
        }
    }
    return {};
}

/// Points ordered by metric (NRMT, HSX, ASL, RTM) then relative change.
inline std::vector<SensitivityPoint> sorted_points(std::vector<SensitivityPoint> points) {
    std::stable_sort(points.begin(), points.end(), [](const auto& a, const auto& b) {
        if (a.varied_metric != b.varied_metric) return a.varied_metric < b.varied_metric;
        return a.relative_change < b.relative_change;
    });
    return points;
}

inline std::string emit_sensitivity(const std::vector<SensitivityPoint>& points, ReportFormat format) {
    const auto sorted = sorted_points(points);
    switch (format) {
        case ReportFormat::csv: {
            std::ostringstream out;
            out << "metric,relative_change,sc,pc\n";
            for (const auto& p : sorted)
                out << to_string(p.varied_metric) << ',' << full_precision(p.relative_change) << ','
                    << full_precision(p.sc) << ',' << full_precision(p.pc) << '\n';
            return out.str();
        }
        case ReportFormat::json:
            return json(sorted).dump(2) + "\n";
        case ReportFormat::text:
            break;
    }
    throw InvalidArgument("sensitivity output supports csv and json");
}

/// Metrics of one system in a record, by name.
inline const MetricSet& system_metrics(const CampaignRecord& rec, const std::string& name) {
    if (rec.baseline.profile.name == name && rec.baseline.metrics) return *rec.baseline.metrics;
    for (const auto& c : rec.candidates)
        if (c.profile.name == name) {
            if (!c.metrics) throw InvalidArgument("system '" + name + "' has no metrics (failed)");
            return *c.metrics;
        }
    throw InvalidArgument("no system named '" + name + "' in the record");
}

}  // namespace archeval
