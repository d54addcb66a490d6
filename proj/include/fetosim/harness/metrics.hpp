#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fetosim/simulation.hpp"

namespace fetosim {

/// Column set and order of the metrics file. Changing it breaks goldens.
inline constexpr std::array<const char*, 9> kMetricsColumns{
    "frame",          "time",         "volume_ratio",    "elastic_residual", "kinetic_energy",
    "contact_count",  "removed_mass", "mean_substep_us", "position_hash",
};

struct MetricsRow {
    std::int64_t frame = 0;
    double time = 0.0;
    double volume_ratio = 1.0;
    double elastic_residual = 0.0;
    double kinetic_energy = 0.0;
    int contact_count = 0;
    double removed_mass = 0.0;
    double mean_substep_us = 0.0;
    std::uint64_t position_hash = 0;

    static MetricsRow from(const FrameTelemetry& t);
};

struct FailureRecord {
    std::int64_t frame = 0;
    int vertex = -1;
    std::string message;
};

struct MetricsReport {
    std::string scenario;
    bool deterministic = true;
    std::vector<MetricsRow> rows;
    std::optional<FailureRecord> failure;

    // Summary of the final state.
    int components = 0;
    std::uint32_t topology_version = 0;
    double initial_mass = 0.0;
    double alive_mass = 0.0;
    double removed_mass = 0.0;
    int cuts = 0;
    int rejected_cuts = 0;

    bool ok() const { return !failure.has_value(); }
    /// |initial - (alive + removed)| / initial.
    double mass_error() const;
};

/// Header row, one row per frame, then `# failure ...` when aborted.
/// Hashes are 16 hex digits; reals use round-trip precision.
void write_metrics_csv(std::ostream& out, const MetricsReport& report);
void write_metrics_csv(const std::filesystem::path& path, const MetricsReport& report);
/// Throws ParseError on a wrong header or malformed row.
MetricsReport read_metrics_csv(std::istream& in);
MetricsReport read_metrics_csv(const std::filesystem::path& path);

/// Per-column tolerance |a - b| <= abs + rel * |b|. Columns mapped to
/// nullopt are ignored. The hash column compares exactly when
/// `exact_hash` is set.
struct GoldenTolerances {
    std::map<std::string, std::optional<std::pair<double, double>>> columns;
    bool exact_hash = true;

    static GoldenTolerances defaults(bool deterministic);
};

struct GoldenDiff {
    bool pass = true;
    std::vector<std::string> diverging_columns;  // in column order
    std::int64_t first_frame = -1;               // first row with any mismatch
    std::string message;
};

/// Compares a report against a golden file. Row count mismatches and
/// failures count as divergence; schema mismatches throw ParseError.
GoldenDiff compare_golden(const MetricsReport& report, const MetricsReport& golden, const GoldenTolerances& tol);
GoldenDiff compare_golden(const MetricsReport& report, const std::filesystem::path& golden,
                          const GoldenTolerances& tol);

}  // namespace fetosim
