#include "fuselens/report.hpp"

#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "fuselens/errors.hpp"

namespace fuselens {

namespace {

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> parts;
  std::string part;
  std::istringstream in(line);
  while (std::getline(in, part, sep)) parts.push_back(part);
  if (!line.empty() && line.back() == sep) parts.emplace_back();
  return parts;
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::filesystem::path& p) {
  return p.is_absolute() ? p : base / p;
}

}  // namespace

std::string format_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.*g", kReportDigits, v);
  return buf;
}

double round_significant(double v) { return std::stod(format_number(v)); }

ReportFormat parse_report_format(const std::string& name) {
  if (name == "csv") return ReportFormat::kCsv;
  if (name == "json") return ReportFormat::kJson;
  throw InputError("unknown report format '" + name + "' (expected csv or json)");
}

std::string to_csv(const std::vector<MetricRecord>& records) {
  std::string out = std::string(kCsvHeader) + "\n";
  for (const MetricRecord& r : records) {
    out += r.id + "," + format_number(r.metrics.q_mi) + "," + format_number(r.metrics.q_abf) + "," +
           format_number(r.metrics.ssim_ct) + "," + format_number(r.metrics.ssim_mr) + "," +
           format_number(r.metrics.sl) + "\n";
  }
  return out;
}

nlohmann::json to_json(const MetricRecord& record) {
  return nlohmann::json{{"id", record.id},
                        {"q_mi", round_significant(record.metrics.q_mi)},
                        {"q_abf", round_significant(record.metrics.q_abf)},
                        {"ssim_ct", round_significant(record.metrics.ssim_ct)},
                        {"ssim_mr", round_significant(record.metrics.ssim_mr)},
                        {"sl", round_significant(record.metrics.sl)}};
}

nlohmann::json to_json(const LossReport& report) {
  nlohmann::json j{{"sl", round_significant(report.sl)},
                   {"mef_ssim", round_significant(report.mef_ssim)},
                   {"composite", round_significant(report.composite)},
                   {"alpha", report.weights.alpha},
                   {"beta", report.weights.beta}};
  if (report.reconstruct) j["reconstruct"] = round_significant(*report.reconstruct);
  return j;
}

std::vector<MetricRecord> parse_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != kCsvHeader) throw InputError("report CSV header mismatch");
  std::vector<MetricRecord> records;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto fields = split(line, ',');
    if (fields.size() != 6) throw InputError("malformed report row: " + line);
    MetricRecord r;
    r.id = fields[0];
    r.metrics.q_mi = std::stod(fields[1]);
    r.metrics.q_abf = std::stod(fields[2]);
    r.metrics.ssim_ct = std::stod(fields[3]);
    r.metrics.ssim_mr = std::stod(fields[4]);
    r.metrics.sl = std::stod(fields[5]);
    records.push_back(std::move(r));
  }
  return records;
}

MetricRecord metric_record_from_json(const nlohmann::json& j) {
  MetricRecord r;
  r.id = j.value("id", "");
  r.metrics.q_mi = j.at("q_mi").get<double>();
  r.metrics.q_abf = j.at("q_abf").get<double>();
  r.metrics.ssim_ct = j.at("ssim_ct").get<double>();
  r.metrics.ssim_mr = j.at("ssim_mr").get<double>();
  r.metrics.sl = j.at("sl").get<double>();
  return r;
}

Manifest Manifest::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError(path.string() + ": cannot open manifest");
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw InputError(path.string() + ": invalid manifest JSON: " + e.what());
  }
  if (!doc.is_object() || !doc.contains("entries") || !doc["entries"].is_array()) {
    throw InputError(path.string() + ": manifest needs an \"entries\" array");
  }

  Manifest manifest;
  manifest.root = resolve(path.parent_path(), doc.value("root", std::string(".")));
  std::set<std::string> ids;
  for (const auto& e : doc["entries"]) {
    ManifestEntry entry;
    try {
      entry.id = e.at("id").get<std::string>();
      entry.ct_path = resolve(manifest.root, e.at("ct").get<std::string>());
      entry.mr_path = resolve(manifest.root, e.at("mr").get<std::string>());
      if (e.contains("fused")) entry.fused_path = e["fused"].get<std::string>();
    } catch (const nlohmann::json::exception& ex) {
      throw InputError(path.string() + ": malformed manifest entry: " + ex.what());
    }
    if (entry.id.empty()) throw InputError(path.string() + ": manifest entry with empty id");
    if (!ids.insert(entry.id).second) throw InputError(path.string() + ": duplicate manifest id '" + entry.id + "'");
    for (const auto& p : {entry.ct_path, entry.mr_path}) {
      if (!std::filesystem::exists(p)) throw InputError(path.string() + ": missing file " + p.string());
    }
    manifest.entries.push_back(std::move(entry));
  }
  return manifest;
}

nlohmann::json Manifest::to_json() const {
  nlohmann::json entries = nlohmann::json::array();
  for (const ManifestEntry& e : this->entries) {
    nlohmann::json j{{"id", e.id}, {"ct", e.ct_path.generic_string()}, {"mr", e.mr_path.generic_string()}};
    if (e.fused_path) j["fused"] = e.fused_path->generic_string();
    entries.push_back(std::move(j));
  }
  return {{"root", root.generic_string()}, {"entries", std::move(entries)}};
}

nlohmann::json trace_to_json(const std::string& method, const FusionResult& result, const OptimConfig& cfg,
                             const MetricReport& metrics) {
  nlohmann::json trace = nlohmann::json::array();
  for (size_t i = 0; i < result.loss_trace.size(); ++i) {
    nlohmann::json j = to_json(result.loss_trace[i]);
    j["iteration"] = i + 1;
    trace.push_back(std::move(j));
  }
  nlohmann::json config{{"alpha", cfg.weights.alpha},
                        {"beta", cfg.weights.beta},
                        {"learning_rate", cfg.learning_rate},
                        {"max_iters", cfg.max_iters},
                        {"tol", cfg.tol},
                        {"sl_patch", cfg.sl_spec.size},
                        {"sl_stride", cfg.sl_spec.stride},
                        {"mef_patch", cfg.mef_spec.size},
                        {"mef_stride", cfg.mef_spec.stride},
                        {"bg_threshold", cfg.sl_spec.background_threshold},
                        {"init", to_string(cfg.init)},
                        {"seed", cfg.seed}};
  nlohmann::json metric_json = to_json(MetricRecord{"", metrics});
  metric_json.erase("id");
  return {{"method", method},
          {"config", std::move(config)},
          {"iterations_run", result.iterations_run},
          {"converged", result.converged},
          {"initial", to_json(result.initial)},
          {"trace", std::move(trace)},
          {"metrics", std::move(metric_json)}};
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw OutputError(path.string() + ": cannot open for writing");
  out << text;
  if (!out) throw OutputError(path.string() + ": write failed");
}

}  // namespace fuselens
