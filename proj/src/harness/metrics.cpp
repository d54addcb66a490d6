#include "fetosim/harness/metrics.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace fetosim {

MetricsRow MetricsRow::from(const FrameTelemetry& t)
{
    MetricsRow r;
    r.frame = t.frame;
    r.time = t.time;
    r.volume_ratio = t.volume_ratio;
    r.elastic_residual = t.elastic_residual;
    r.kinetic_energy = t.kinetic_energy;
    r.contact_count = t.contact_count;
    r.removed_mass = t.removed_mass;
    r.mean_substep_us = t.mean_substep_seconds * 1e6;
    r.position_hash = t.position_hash;
    return r;
}

double MetricsReport::mass_error() const
{
    if (initial_mass <= 0.0) {
        return 0.0;
    }
    return std::abs(initial_mass - (alive_mass + removed_mass)) / initial_mass;
}

namespace {

std::string real(double v)
{
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

std::string hex(std::uint64_t v)
{
    char buf[17];
    for (int i = 15; i >= 0; --i) {
        buf[i] = "0123456789abcdef"[v & 0xF];
        v >>= 4;
    }
    buf[16] = '\0';
    return buf;
}

std::vector<std::string> split(const std::string& line)
{
    std::vector<std::string> out;
    std::string field;
    std::istringstream in(line);
    while (std::getline(in, field, ',')) {
        out.push_back(field);
    }
    if (!line.empty() && line.back() == ',') {
        out.emplace_back();
    }
    return out;
}

template <typename T>
T parse_field(const std::string& s, int line, const char* column, int base = 10)
{
    T v{};
    const char* end = s.data() + s.size();
    std::from_chars_result res;
    if constexpr (std::is_floating_point_v<T>) {
        res = std::from_chars(s.data(), end, v);
    } else {
        res = std::from_chars(s.data(), end, v, base);
    }
    if (res.ec != std::errc{} || res.ptr != end) {
        throw ParseError(line, std::string("invalid value '") + s + "' in column " + column);
    }
    return v;
}

}  // namespace

void write_metrics_csv(std::ostream& out, const MetricsReport& report)
{
    for (std::size_t c = 0; c < kMetricsColumns.size(); ++c) {
        out << (c ? "," : "") << kMetricsColumns[c];
    }
    out << '\n';
    for (const auto& r : report.rows) {
        out << r.frame << ',' << real(r.time) << ',' << real(r.volume_ratio) << ',' << real(r.elastic_residual) << ','
            << real(r.kinetic_energy) << ',' << r.contact_count << ',' << real(r.removed_mass) << ','
            << real(r.mean_substep_us) << ',' << hex(r.position_hash) << '\n';
    }
    if (report.failure) {
        out << "# failure frame=" << report.failure->frame << " vertex=" << report.failure->vertex << " "
            << report.failure->message << '\n';
    }
}

void write_metrics_csv(const std::filesystem::path& path, const MetricsReport& report)
{
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path());
    }
    std::ofstream out(path);
    if (!out) {
        throw Error("cannot write metrics to " + path.string());
    }
    write_metrics_csv(out, report);
}

MetricsReport read_metrics_csv(std::istream& in)
{
    MetricsReport report;
    std::string line;
    int number = 0;
    bool header = true;
    while (std::getline(in, line)) {
        ++number;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (line.empty()) {
            continue;
        }
        if (line[0] == '#') {
            const std::string tag = "# failure frame=";
            if (line.rfind(tag, 0) == 0) {
                FailureRecord f;
                std::istringstream s(line.substr(tag.size()));
                std::string vertex;
                s >> f.frame >> vertex;
                if (vertex.rfind("vertex=", 0) == 0) {
                    f.vertex = std::stoi(vertex.substr(7));
                }
                std::getline(s >> std::ws, f.message);
                report.failure = f;
            }
            continue;
        }
        const auto fields = split(line);
        if (header) {
            header = false;
            bool same = fields.size() == kMetricsColumns.size();
            for (std::size_t c = 0; same && c < fields.size(); ++c) {
                same = fields[c] == kMetricsColumns[c];
            }
            if (!same) {
                throw ParseError(number, "metrics header does not match the expected column set");
            }
            continue;
        }
        if (fields.size() != kMetricsColumns.size()) {
            throw ParseError(number, "expected " + std::to_string(kMetricsColumns.size()) + " fields, got " +
                                         std::to_string(fields.size()));
        }
        MetricsRow r;
        r.frame = parse_field<std::int64_t>(fields[0], number, "frame");
        r.time = parse_field<double>(fields[1], number, "time");
        r.volume_ratio = parse_field<double>(fields[2], number, "volume_ratio");
        r.elastic_residual = parse_field<double>(fields[3], number, "elastic_residual");
        r.kinetic_energy = parse_field<double>(fields[4], number, "kinetic_energy");
        r.contact_count = parse_field<int>(fields[5], number, "contact_count");
        r.removed_mass = parse_field<double>(fields[6], number, "removed_mass");
        r.mean_substep_us = parse_field<double>(fields[7], number, "mean_substep_us");
        r.position_hash = parse_field<std::uint64_t>(fields[8], number, "position_hash", 16);
        report.rows.push_back(r);
    }
    if (header) {
        throw ParseError(number, "metrics file has no header");
    }
    return report;
}

MetricsReport read_metrics_csv(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) {
        throw Error("cannot open metrics file " + path.string());
    }
    return read_metrics_csv(in);
}

GoldenTolerances GoldenTolerances::defaults(bool deterministic)
{
    GoldenTolerances t;
    t.columns["frame"] = std::pair{0.0, 0.0};
    t.columns["time"] = std::pair{1e-9, 0.0};
    t.columns["volume_ratio"] = std::pair{1e-9, 1e-6};
    t.columns["elastic_residual"] = std::pair{1e-12, 1e-6};
    t.columns["kinetic_energy"] = std::pair{1e-12, 1e-6};
    t.columns["contact_count"] = std::pair{0.0, 0.0};
    t.columns["removed_mass"] = std::pair{1e-12, 1e-6};
    t.columns["mean_substep_us"] = std::nullopt;
    t.exact_hash = deterministic;
    return t;
}

GoldenDiff compare_golden(const MetricsReport& report, const MetricsReport& golden, const GoldenTolerances& tol)
{
    GoldenDiff diff;
    std::vector<bool> diverged(kMetricsColumns.size(), false);

    auto within = [&](const char* column, double a, double b) {
        auto it = tol.columns.find(column);
        if (it == tol.columns.end()) {
            return a == b;
        }
        if (!it->second) {
            return true;
        }
        const auto [abs_tol, rel_tol] = *it->second;
        return std::abs(a - b) <= abs_tol + rel_tol * std::abs(b);
    };

    const std::size_t n = std::min(report.rows.size(), golden.rows.size());
    for (std::size_t i = 0; i < n; ++i) {
        const MetricsRow& a = report.rows[i];
        const MetricsRow& b = golden.rows[i];
        const std::array<std::pair<double, double>, 8> values{{
            {static_cast<double>(a.frame), static_cast<double>(b.frame)},
            {a.time, b.time},
            {a.volume_ratio, b.volume_ratio},
            {a.elastic_residual, b.elastic_residual},
            {a.kinetic_energy, b.kinetic_energy},
            {static_cast<double>(a.contact_count), static_cast<double>(b.contact_count)},
            {a.removed_mass, b.removed_mass},
            {a.mean_substep_us, b.mean_substep_us},
        }};
        bool row_ok = true;
        for (std::size_t c = 0; c < values.size(); ++c) {
            if (!within(kMetricsColumns[c], values[c].first, values[c].second)) {
                diverged[c] = true;
                row_ok = false;
            }
        }
        if (tol.exact_hash && a.position_hash != b.position_hash) {
            diverged[8] = true;
            row_ok = false;
        }
        if (!row_ok && diff.first_frame < 0) {
            diff.first_frame = a.frame;
        }
    }

    for (std::size_t c = 0; c < diverged.size(); ++c) {
        if (diverged[c]) {
            diff.diverging_columns.emplace_back(kMetricsColumns[c]);
        }
    }
    std::ostringstream msg;
    if (report.rows.size() != golden.rows.size()) {
        diff.pass = false;
        msg << "row count " << report.rows.size() << " differs from golden " << golden.rows.size() << "; ";
    }
    if (report.failure.has_value() != golden.failure.has_value()) {
        diff.pass = false;
        msg << (report.failure ? "run aborted: " + report.failure->message : std::string("golden run aborted"))
            << "; ";
    }
    if (!diff.diverging_columns.empty()) {
        diff.pass = false;
        msg << "diverging column " << diff.diverging_columns.front();
        for (std::size_t c = 1; c < diff.diverging_columns.size(); ++c) {
            msg << ", " << diff.diverging_columns[c];
        }
        msg << " from frame " << diff.first_frame;
    }
    diff.message = diff.pass ? "match" : msg.str();
    return diff;
}

GoldenDiff compare_golden(const MetricsReport& report, const std::filesystem::path& golden,
                          const GoldenTolerances& tol)
{
    if (!std::filesystem::exists(golden)) {
        throw Error("golden file not found: " + golden.string());
    }
    return compare_golden(report, read_metrics_csv(golden), tol);
}

}  // namespace fetosim
