#pragma once
// MetricReport serialization: JSON (versioned, stable field order) and CSV.

#include <filesystem>
#include <stdexcept>
#include <string>

#include "json.hpp"

#include "sirst/evaluate.hpp"

namespace sirst {

enum class ReportFormat { kJson, kCsv };

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

nlohmann::ordered_json report_to_json(const MetricReport& report);

// Reads a report back to the [0,1] scale. Unknown fields are ignored;
// missing or mistyped required fields throw InvalidArgument.
MetricReport report_from_json(const nlohmann::json& j);

// One header line, one summary row, then one row per threshold.
std::string report_to_csv(const MetricReport& report);

std::string render_report(const MetricReport& report, ReportFormat format);

// Throws IoError naming the path on failure.
void emit_report(const MetricReport& report, ReportFormat format, const std::filesystem::path& path);

// Shortest round-trip decimal form.
std::string format_number(double v);

}  // namespace sirst
