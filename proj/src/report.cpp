#include "nullfold/report.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>

#include "nullfold/error.hpp"

namespace nullfold {

namespace {

nlohmann::ordered_json number(double v) {
  if (std::isnan(v)) return "NaN";
  if (std::isinf(v)) return v > 0 ? "Infinity" : "-Infinity";
  return v;
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::Io, path.string() + ": cannot open for writing");
  out << text;
  out.flush();
  if (!out) throw Error(ErrorKind::Io, path.string() + ": write failed");
}

}  // namespace

nlohmann::ordered_json report_json(const CheckReport& report) {
  nlohmann::ordered_json j;
  j["scenario"] = report.scenario;
  j["environment"] = report.environment.is_null() ? nlohmann::ordered_json::object() : report.environment;
  int pass = 0, fail = 0, skipped = 0;
  nlohmann::ordered_json entries = nlohmann::ordered_json::array();
  for (const auto& e : report.entries) {
    nlohmann::ordered_json x;
    x["check"] = e.check;
    x["fixture"] = e.fixture;
    x["stage"] = stage_name(e.stage);
    x["residual"] = number(e.residual);
    x["tolerance"] = number(e.tolerance);
    x["comparison"] = e.comparison == Comparison::AtMost ? "max" : "min";
    x["status"] = status_name(e.status);
    x["series"] = e.series;
    x["note"] = e.note;
    entries.push_back(std::move(x));
    (e.status == Status::Pass ? pass : e.status == Status::Fail ? fail : skipped) += 1;
  }
  j["entries"] = std::move(entries);
  j["summary"] = {{"pass", pass}, {"fail", fail}, {"skipped", skipped}};
  j["numerical_failure"] = report.numerical_failure;
  return j;
}

std::string report_text(const CheckReport& report) { return report_json(report).dump(2) + "\n"; }

std::string format_number(double v) {
  if (std::isnan(v)) return "NaN";
  if (std::isinf(v)) return v > 0 ? "Infinity" : "-Infinity";
  char buf[40];
  for (int prec = 15; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

std::string series_csv(const Series& s) {
  std::string out;
  for (std::size_t k = 0; k < s.columns.size(); ++k) out += (k ? "," : "") + s.columns[k];
  out += "\n";
  for (const auto& row : s.rows) {
    for (std::size_t k = 0; k < row.size(); ++k) {
      if (k) out += ",";
      out += format_number(row[k]);
    }
    out += "\n";
  }
  return out;
}

std::vector<std::string> emit_report(const CheckReport& report, const std::string& out_dir,
                                     const EmitOptions& options) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw Error(ErrorKind::Io, out_dir + ": cannot create output directory: " + ec.message());
  std::vector<std::string> written;
  const fs::path dir(out_dir);
  write_file(dir / "report.json", report_text(report));
  written.push_back((dir / "report.json").string());
  for (const auto& s : report.series) {
    write_file(dir / s.file(), series_csv(s));
    written.push_back((dir / s.file()).string());
  }
  if (!options.reproducible) {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char stamp[32];
    std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", &tm);
    nlohmann::ordered_json meta;
    meta["timestamp"] = stamp;
    meta["threads"] = options.threads;
    write_file(dir / "report.meta.json", meta.dump(2) + "\n");
    written.push_back((dir / "report.meta.json").string());
  }
  return written;
}

}  // namespace nullfold
