// Command-line front end: run a scenario, benchmark the per-pixel stages,
// generate calibration samples and fit depth correction models.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "rgbdtrack/config.hpp"
#include "rgbdtrack/harness.hpp"

namespace {

using namespace rgbdtrack;

void print_rms_line(const std::string& label, const RmsResult& r) {
  std::printf("  %-22s x %.4f  y %.4f  z %.4f  overall %.4f  (%zu frames, %zu excluded)\n", label.c_str(), r.axis.x(),
              r.axis.y(), r.axis.z(), r.overall, r.frames, r.excluded);
}

int run_command(const std::string& config_path, const std::string& out_dir, const std::string& mode, bool no_correction,
                const std::string& filter) {
  ScenarioConfig cfg = load_scenario(config_path);
  if (!mode.empty()) cfg.fusion.mode = parse_weighting_mode(mode);
  if (!filter.empty()) cfg.fusion.filter = parse_track_source(filter);
  if (no_correction) cfg.correction.enabled = false;
  if (!out_dir.empty()) cfg.output_dir = out_dir;
  // Command-line overrides are recorded in the echoed config.
  cfg.source["fusion"]["mode"] = mode_name(cfg.fusion.mode);
  cfg.source["fusion"]["filter"] = to_string(cfg.fusion.filter);
  cfg.source["correction"]["enabled"] = cfg.correction.enabled;
  cfg.source["output_dir"] = cfg.output_dir;

  const ScenarioResult res = run_scenario(cfg);
  write_outputs(res, cfg.output_dir);

  const RunReport& rep = res.report;
  std::printf("%lld frames, %zu cameras, %.1f s (%.2f frames/s)\n", static_cast<long long>(cfg.frames),
              cfg.cameras.size(), rep.seconds, rep.fps);
  for (const auto& c : rep.cameras) {
    std::printf("%s (sensor rms %.4f m, %zu frames with all markers)\n", c.name.c_str(), c.sensor_rms,
                c.frames_with_all_markers);
    if (c.frames_with_all_markers == 0) continue;
    print_rms_line("raw", c.rms[0]);
    print_rms_line("kf", c.rms[1]);
    print_rms_line("rf", c.rms[2]);
  }
  std::printf("fused (%s)\n", to_string(cfg.fusion.filter));
  for (const auto& f : rep.fused) {
    if (f.filter == cfg.fusion.filter && f.rms.frames > 0) print_rms_line(f.mode, f.rms);
  }
  std::printf("overall (%s, %s): %.4f m\n", rep.primary_mode.c_str(), to_string(rep.primary_filter), rep.overall.overall);
  std::printf("outputs written to %s\n", cfg.output_dir.c_str());
  return 0;
}

std::vector<int> parse_threads(const std::string& list) {
  std::vector<int> out;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      const int n = std::stoi(item, &used);
      if (used != item.size() || n < 1) throw std::invalid_argument(item);
      out.push_back(n);
    } catch (const std::exception&) {
      throw Error(ErrorCode::kConfig, "threads: '" + item + "' is not a positive integer");
    }
  }
  if (out.empty()) throw Error(ErrorCode::kConfig, "threads: empty list");
  return out;
}

int bench_command(const std::string& config_path, const std::string& threads, int frames, int runs) {
  const ScenarioConfig cfg = load_scenario(config_path);
  const auto counts = parse_threads(threads);
  const BenchmarkResult b = benchmark(cfg, counts, frames, runs);
  print_benchmark(std::cout, b);
  std::printf("hardware threads: %u\n", hardware_threads());
  return 0;
}

int samples_command(const std::string& config_path, int camera, std::size_t count, const std::string& out) {
  const ScenarioConfig cfg = load_scenario(config_path);
  if (camera < 0 || camera >= static_cast<int>(cfg.cameras.size())) {
    throw Error(ErrorCode::kConfig, "camera: index out of range");
  }
  const auto idx = static_cast<std::size_t>(camera);
  const auto samples = simulate_calibration_samples(cfg.cameras[idx].profile, count, stream_seed(cfg.seed, idx));
  std::ofstream f(out);
  if (!f) throw Error(ErrorCode::kInvalidInput, "cannot write " + out);
  write_samples_csv(f, samples);
  std::printf("%zu samples written to %s\n", samples.size(), out.c_str());
  return 0;
}

int fit_command(const std::string& samples_path, const std::string& out, int degree) {
  std::ifstream in(samples_path);
  if (!in) throw Error(ErrorCode::kInvalidInput, "cannot open " + samples_path);
  const auto samples = read_samples_csv(in);
  const CorrectionModel model = fit_correction(samples, DepthLevels{}, degree);
  std::ofstream f(out);
  if (!f) throw Error(ErrorCode::kInvalidInput, "cannot write " + out);
  f << correction_to_json(model).dump(2) << '\n';
  double pre = 0.0;
  for (const auto& s : samples) pre += square(s.z_sh - s.z_cor);
  pre = std::sqrt(pre / static_cast<double>(samples.size()));
  std::printf("%zu samples, rms before %.4f m, after %.4f m; model written to %s\n", samples.size(), pre,
              model.fit_rms(), out.c_str());
  return 0;
}

int exit_code(ErrorCode code) {
  switch (code) {
    case ErrorCode::kConfig: return 2;
    case ErrorCode::kInfeasibleTheta:
    case ErrorCode::kInfeasibleAlpha: return 3;
    default: return 1;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-camera RGBD tracking simulator and pipeline"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  std::string mode;
  std::string filter;
  bool no_correction = false;
  auto* run = app.add_subcommand("run", "Run a scenario and write CSV/JSON outputs");
  run->add_option("--config", config_path, "Scenario JSON")->required()->check(CLI::ExistingFile);
  run->add_option("--out", out_dir, "Output directory (overrides the config)");
  run->add_option("--mode", mode, "Fusion weighting")->check(CLI::IsMember({"fast", "adaptive", "naive"}));
  run->add_flag("--no-correction", no_correction, "Skip the depth correction stage");
  run->add_option("--filter", filter, "Per-camera track fed to the reported fusion")
      ->check(CLI::IsMember({"kf", "rf", "raw"}));

  std::string threads = "1,2,4,8";
  int bench_frames = 4;
  int bench_runs = 5;
  auto* bench = app.add_subcommand("bench", "Time the per-pixel stages for several thread counts");
  bench->add_option("--config", config_path, "Scenario JSON")->required()->check(CLI::ExistingFile);
  bench->add_option("--threads", threads, "Comma-separated thread counts");
  bench->add_option("--frames", bench_frames, "Frames per timed run")->check(CLI::PositiveNumber);
  bench->add_option("--runs", bench_runs, "Timed runs per thread count (median reported)")->check(CLI::Range(5, 1000));

  int camera = 0;
  std::size_t count = 4000;
  std::string samples_out;
  auto* samples = app.add_subcommand("samples", "Write simulated calibration samples for one camera");
  samples->add_option("--config", config_path, "Scenario JSON")->required()->check(CLI::ExistingFile);
  samples->add_option("--camera", camera, "Camera index");
  samples->add_option("--count", count, "Number of target depths");
  samples->add_option("--out", samples_out, "CSV path (z_sh,z_cor)")->required();

  std::string samples_path;
  std::string model_out;
  int degree = 8;
  auto* fit = app.add_subcommand("fit-correction", "Fit a depth correction polynomial to samples");
  fit->add_option("--samples", samples_path, "CSV with z_sh,z_cor columns")->required()->check(CLI::ExistingFile);
  fit->add_option("--out", model_out, "Model JSON path")->required();
  fit->add_option("--degree", degree, "Polynomial degree");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) return run_command(config_path, out_dir, mode, no_correction, filter);
    if (*bench) return bench_command(config_path, threads, bench_frames, bench_runs);
    if (*samples) return samples_command(config_path, camera, count, samples_out);
    if (*fit) return fit_command(samples_path, model_out, degree);
  } catch (const Error& e) {
    std::fprintf(stderr, "error (%s): %s\n", std::string(to_string(e.code())).c_str(), e.what());
    return exit_code(e.code());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
