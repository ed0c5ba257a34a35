#pragma once

// report.json (stable key order; non-finite numbers as the strings "NaN",
// "Infinity", "-Infinity") and one CSV per series with round-trip decimals.

#include <string>
#include <vector>

#include "json.hpp"
#include "nullfold/verification.hpp"

namespace nullfold {

nlohmann::ordered_json report_json(const CheckReport& report);
std::string report_text(const CheckReport& report);

// Shortest form that round-trips through strtod ("%.17g" when needed); NaN as "NaN".
std::string format_number(double v);
std::string series_csv(const Series& series);

struct EmitOptions {
  bool reproducible = false;  // omit the timestamp sidecar
  int threads = 0;
};

// Writes report.json, every series CSV and, unless reproducible,
// report.meta.json with the wall-clock timestamp. Returns the paths written.
// Throws Error(Io) with the offending path.
std::vector<std::string> emit_report(const CheckReport& report, const std::string& out_dir,
                                     const EmitOptions& options = {});

}  // namespace nullfold
