#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fuselens/fuse.hpp"
#include "fuselens/losses.hpp"
#include "fuselens/metrics.hpp"

namespace fuselens {

/// Exact CSV header of metric reports.
inline constexpr const char* kCsvHeader = "id,q_mi,q_abf,ssim_ct,ssim_mr,sl";

/// Significant digits used for every serialized metric and loss value.
inline constexpr int kReportDigits = 10;

/// Rounds to kReportDigits significant digits (what the reports contain).
double round_significant(double v);
std::string format_number(double v);

struct MetricRecord {
  std::string id;
  MetricReport metrics;
};

enum class ReportFormat { kCsv, kJson };
ReportFormat parse_report_format(const std::string& name);

std::string to_csv(const std::vector<MetricRecord>& records);
nlohmann::json to_json(const MetricRecord& record);
nlohmann::json to_json(const LossReport& report);

/// Parses a report written by to_csv.
std::vector<MetricRecord> parse_csv(const std::string& text);
MetricRecord metric_record_from_json(const nlohmann::json& j);

struct ManifestEntry {
  std::string id;
  std::filesystem::path ct_path;
  std::filesystem::path mr_path;
  /// Output name for the fused image, relative to the output directory.
  std::optional<std::filesystem::path> fused_path;
};

/// JSON manifest: {"root": ".", "entries": [{"id", "ct", "mr", "fused"?}]}.
/// Relative paths resolve against root, itself relative to the manifest's
/// directory.
struct Manifest {
  std::filesystem::path root;
  std::vector<ManifestEntry> entries;

  /// Throws InputError on malformed JSON, duplicate ids or missing files.
  static Manifest load(const std::filesystem::path& path);
  nlohmann::json to_json() const;
};

/// Loss trace document written next to a fused image.
nlohmann::json trace_to_json(const std::string& method, const FusionResult& result, const OptimConfig& cfg,
                             const MetricReport& metrics);

/// Writes text, throwing OutputError on failure.
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace fuselens
