#include "fuselens/cli.hpp"

#include <CLI11.hpp>

#include <atomic>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <thread>

#include "fuselens/errors.hpp"
#include "fuselens/fuse.hpp"
#include "fuselens/metrics.hpp"
#include "fuselens/phantom.hpp"
#include "fuselens/report.hpp"

namespace fuselens::cli {

namespace fs = std::filesystem;

namespace {

constexpr const char* kConstantsFooter =
    "Fixed constants: MEF-SSIM stabilizer C = 9e-4; Adam beta1 = 0.9, beta2 = 0.999, eps = 1e-8.";

struct FuseSettings {
  std::string method = "variational";
  OptimConfig optim;
  std::string init = "ct";
  int levels = 4;
  std::string ext = "pgm";
};

void add_fuse_options(CLI::App& cmd, FuseSettings& s) {
  cmd.add_option("--method", s.method, "Fusion method")
      ->check(CLI::IsMember({"variational", "average", "laplacian"}))
      ->capture_default_str();
  cmd.add_option("--alpha", s.optim.weights.alpha, "Weight of the semantic loss")->capture_default_str();
  cmd.add_option("--beta", s.optim.weights.beta, "Weight of the MEF-SSIM loss")->capture_default_str();
  cmd.add_option("--lr", s.optim.learning_rate, "Adam learning rate")->capture_default_str();
  cmd.add_option("--iters", s.optim.max_iters, "Maximum optimizer iterations")->capture_default_str();
  cmd.add_option("--tol", s.optim.tol, "Stop when the composite loss changes by less than this")
      ->capture_default_str();
  cmd.add_option("--sl-patch", s.optim.sl_spec.size, "Semantic loss patch size")->capture_default_str();
  cmd.add_option("--sl-stride", s.optim.sl_spec.stride, "Semantic loss patch stride")->capture_default_str();
  cmd.add_option("--mef-patch", s.optim.mef_spec.size, "MEF-SSIM patch size")->capture_default_str();
  cmd.add_option("--mef-stride", s.optim.mef_spec.stride, "MEF-SSIM patch stride")->capture_default_str();
  cmd.add_option("--bg-threshold", s.optim.sl_spec.background_threshold,
                 "Patches darker than this in both sources are background")
      ->capture_default_str();
  cmd.add_option("--init", s.init, "Optimizer initialization")
      ->check(CLI::IsMember({"average", "ct", "mr"}))
      ->capture_default_str();
  cmd.add_option("--seed", s.optim.seed, "Seed recorded with the run")->capture_default_str();
  cmd.add_option("--levels", s.levels, "Pyramid levels for the laplacian method")->capture_default_str();
  cmd.add_option("--ext", s.ext, "Fused image format")->check(CLI::IsMember({"pgm", "png"}))->capture_default_str();
  cmd.footer(kConstantsFooter);
}

GrayImage run_method(const FuseSettings& s, const RegisteredPair& pair, FusionResult* result) {
  if (s.method == "average") return fuse_average(pair);
  if (s.method == "laplacian") return fuse_laplacian(pair, s.levels);
  *result = fuse_variational(pair, s.optim);
  return result->fused;
}

// Trace for baselines: a single report of the output image, no iterations.
FusionResult baseline_result(const RegisteredPair& pair, const GrayImage& fused, const OptimConfig& cfg) {
  FusionResult r;
  r.fused = fused;
  r.initial = composite_loss(pair, fused, cfg.weights, cfg.sl_spec, cfg.mef_spec);
  r.loss_trace.push_back(r.initial);
  r.iterations_run = 0;
  r.converged = true;
  return r;
}

RegisteredPair load_pair(const fs::path& ct, const fs::path& mr) { return RegisteredPair(load_image(ct), load_image(mr)); }

void ensure_directory(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw OutputError(dir.string() + ": cannot create output directory");
}

int exit_code_for(const std::exception_ptr& error, std::ostream& err) {
  try {
    std::rethrow_exception(error);
  } catch (const DivergenceError& e) {
    err << "error: " << e.what() << "\n";
    return kDiverged;
  } catch (const InputError& e) {
    err << "error: " << e.what() << "\n";
    return kInputError;
  } catch (const OutputError& e) {
    err << "error: " << e.what() << "\n";
    return kIoError;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kIoError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kInputError;
  }
}

FuseSettings finalize(FuseSettings s) {
  s.optim.init = parse_init_mode(s.init);
  s.optim.mef_spec.background_threshold = 0.0;
  s.optim.validate();
  return s;
}

int cmd_fuse(const fs::path& ct, const fs::path& mr, const fs::path& out_dir, const std::string& name,
             FuseSettings settings, std::ostream& out) {
  settings = finalize(std::move(settings));
  const RegisteredPair pair = load_pair(ct, mr);
  FusionResult result;
  const GrayImage fused = run_method(settings, pair, &result);
  if (settings.method != "variational") result = baseline_result(pair, fused, settings.optim);

  ensure_directory(out_dir);
  const fs::path image_path = out_dir / (name + "." + settings.ext);
  const fs::path trace_path = out_dir / (name + "_trace.json");
  save_image(fused, image_path);
  const MetricReport metrics = evaluate_all(pair, fused);
  write_text(trace_path, trace_to_json(settings.method, result, settings.optim, metrics).dump(2) + "\n");
  out << image_path.string() << "\n" << trace_path.string() << "\n";
  return kOk;
}

int cmd_eval(const fs::path& ct, const fs::path& mr, const fs::path& fused_path, const std::string& format,
             std::string id, const std::string& out_file, std::ostream& out) {
  const ReportFormat fmt = parse_report_format(format);
  const RegisteredPair pair = load_pair(ct, mr);
  const GrayImage fused = load_image(fused_path);
  if (!fused.same_shape(pair.ct)) throw DimensionError("fused image shape differs from sources");
  if (id.empty()) id = fused_path.stem().string();
  const MetricRecord record{id, evaluate_all(pair, fused)};
  const std::string text = fmt == ReportFormat::kCsv ? to_csv({record}) : to_json(record).dump(2) + "\n";
  if (out_file.empty()) {
    out << text;
  } else {
    write_text(out_file, text);
  }
  return kOk;
}

struct EntryOutcome {
  bool ok = false;
  MetricRecord record;
  int code = kOk;
  std::string message;
};

int cmd_batch(const fs::path& manifest_path, const fs::path& out_dir, int jobs, const std::string& format,
              FuseSettings settings, std::ostream& out, std::ostream& err) {
  const ReportFormat fmt = parse_report_format(format);
  settings = finalize(std::move(settings));
  if (jobs < 1) throw InputError("--jobs must be >= 1");
  const Manifest manifest = Manifest::load(manifest_path);
  if (manifest.entries.empty()) throw InputError("empty manifest");
  ensure_directory(out_dir);

  std::vector<EntryOutcome> outcomes(manifest.entries.size());
  std::atomic<size_t> next{0};
  auto worker = [&] {
    for (size_t i = next++; i < outcomes.size(); i = next++) {
      const ManifestEntry& entry = manifest.entries[i];
      EntryOutcome& outcome = outcomes[i];
      try {
        const RegisteredPair pair = load_pair(entry.ct_path, entry.mr_path);
        FusionResult unused;
        const GrayImage fused = run_method(settings, pair, &unused);
        const fs::path target = out_dir / entry.fused_path.value_or(entry.id + "_fused." + settings.ext);
        save_image(fused, target);
        outcome.record = {entry.id, evaluate_all(pair, fused)};
        outcome.ok = true;
      } catch (...) {
        std::ostringstream msg;
        outcome.code = exit_code_for(std::current_exception(), msg);
        outcome.message = entry.id + ": " + msg.str();
      }
    }
  };
  {
    std::vector<std::jthread> pool;
    const int threads = std::min<int>(jobs, static_cast<int>(outcomes.size()));
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
  }

  std::vector<MetricRecord> records;
  int code = kOk;
  for (const EntryOutcome& o : outcomes) {
    if (o.ok) {
      records.push_back(o.record);
    } else {
      err << o.message;
      code = std::max(code, o.code);
    }
  }

  MetricRecord aggregate{"mean", {}};
  if (!records.empty()) {
    const double n = static_cast<double>(records.size());
    for (const MetricRecord& r : records) {
      aggregate.metrics.q_mi += r.metrics.q_mi;
      aggregate.metrics.q_abf += r.metrics.q_abf;
      aggregate.metrics.ssim_ct += r.metrics.ssim_ct;
      aggregate.metrics.ssim_mr += r.metrics.ssim_mr;
      aggregate.metrics.sl += r.metrics.sl;
    }
    aggregate.metrics.q_mi /= n;
    aggregate.metrics.q_abf /= n;
    aggregate.metrics.ssim_ct /= n;
    aggregate.metrics.ssim_mr /= n;
    aggregate.metrics.sl /= n;
  }

  fs::path report_path;
  if (fmt == ReportFormat::kCsv) {
    std::vector<MetricRecord> rows = records;
    rows.push_back(aggregate);
    report_path = out_dir / "report.csv";
    write_text(report_path, to_csv(rows));
  } else {
    nlohmann::json doc{{"records", nlohmann::json::array()}, {"aggregate", to_json(aggregate)}};
    for (const MetricRecord& r : records) doc["records"].push_back(to_json(r));
    report_path = out_dir / "report.json";
    write_text(report_path, doc.dump(2) + "\n");
  }
  out << report_path.string() << "\n";
  return code;
}

int cmd_phantom(const fs::path& out_dir, int count, uint64_t seed, int size, const std::string& ext,
                std::ostream& out) {
  if (count < 1) throw InputError("--count must be >= 1");
  if (size < 32) throw InputError("--size must be >= 32");
  ensure_directory(out_dir);
  Manifest manifest;
  manifest.root = ".";
  for (int k = 0; k < count; ++k) {
    char id[32];
    std::snprintf(id, sizeof(id), "phantom_%03d", k);
    const Phantom phantom = generate_phantom(size, seed + static_cast<uint64_t>(k));
    const std::string ct_name = std::string(id) + "_ct." + ext;
    const std::string mr_name = std::string(id) + "_mr." + ext;
    save_image(phantom.pair.ct, out_dir / ct_name);
    save_image(phantom.pair.mr, out_dir / mr_name);
    manifest.entries.push_back({id, ct_name, mr_name, std::nullopt});
  }
  const fs::path manifest_path = out_dir / "manifest.json";
  write_text(manifest_path, manifest.to_json().dump(2) + "\n");
  out << manifest_path.string() << "\n";
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Multimodal medical image fusion with semantic and MEF-SSIM losses", "fuselens"};
  app.require_subcommand(1);

  FuseSettings fuse_settings;
  std::string ct, mr, fused, out_dir, name = "fused", format = "csv", id, eval_out, manifest;
  int jobs = 1, count = 13, size = 256;
  uint64_t phantom_seed = 0;
  std::string phantom_ext = "pgm";

  auto* fuse_cmd = app.add_subcommand("fuse", "Fuse one registered CT/MR pair");
  fuse_cmd->add_option("--ct", ct, "CT-like source image")->required();
  fuse_cmd->add_option("--mr", mr, "MR-like source image")->required();
  fuse_cmd->add_option("--out", out_dir, "Output directory")->required();
  fuse_cmd->add_option("--name", name, "Base name of the output files")->capture_default_str();
  add_fuse_options(*fuse_cmd, fuse_settings);

  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a fused image against its sources");
  eval_cmd->add_option("--ct", ct, "CT-like source image")->required();
  eval_cmd->add_option("--mr", mr, "MR-like source image")->required();
  eval_cmd->add_option("--fused", fused, "Fused image")->required();
  eval_cmd->add_option("--format", format, "Report format")
      ->check(CLI::IsMember({"csv", "json"}))
      ->capture_default_str();
  eval_cmd->add_option("--id", id, "Record id (defaults to the fused file stem)");
  eval_cmd->add_option("--out", eval_out, "Write the report here instead of stdout");

  auto* batch_cmd = app.add_subcommand("batch", "Fuse and evaluate every entry of a manifest");
  batch_cmd->add_option("--manifest", manifest, "Manifest JSON")->required();
  batch_cmd->add_option("--out", out_dir, "Output directory")->required();
  batch_cmd->add_option("--jobs", jobs, "Entries processed in parallel")->capture_default_str();
  batch_cmd->add_option("--format", format, "Report format")
      ->check(CLI::IsMember({"csv", "json"}))
      ->capture_default_str();
  add_fuse_options(*batch_cmd, fuse_settings);

  auto* phantom_cmd = app.add_subcommand("phantom", "Generate synthetic registered pairs and a manifest");
  phantom_cmd->add_option("--out", out_dir, "Output directory")->required();
  phantom_cmd->add_option("--count", count, "Number of pairs")->capture_default_str();
  phantom_cmd->add_option("--seed", phantom_seed, "Generator seed")->capture_default_str();
  phantom_cmd->add_option("--size", size, "Image side in pixels")->capture_default_str();
  phantom_cmd->add_option("--ext", phantom_ext, "Image format")
      ->check(CLI::IsMember({"pgm", "png"}))
      ->capture_default_str();

  std::vector<const char*> argv;
  for (const std::string& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kInputError;
  }

  try {
    if (fuse_cmd->parsed()) return cmd_fuse(ct, mr, out_dir, name, fuse_settings, out);
    if (eval_cmd->parsed()) return cmd_eval(ct, mr, fused, format, id, eval_out, out);
    if (batch_cmd->parsed()) return cmd_batch(manifest, out_dir, jobs, format, fuse_settings, out, err);
    if (phantom_cmd->parsed()) return cmd_phantom(out_dir, count, phantom_seed, size, phantom_ext, out);
  } catch (...) {
    return exit_code_for(std::current_exception(), err);
  }
  return kInputError;
}

}  // namespace fuselens::cli
