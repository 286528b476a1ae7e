#include "flowlab/experiment.hpp"
#include "flowlab/parallel.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;

namespace {

constexpr int kConfigError = 3;
constexpr const char* kVersion = "0.1.0";

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw flowlab::Error(flowlab::ErrorCode::Io, "cannot open " + path.string());
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void spill(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  out << content;
  if (!out) throw flowlab::Error(flowlab::ErrorCode::Io, "cannot write " + path.string());
}

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"flowlab: numerical checks for stochastic flows of SDEs"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  std::optional<std::uint64_t> seed;
  std::optional<double> dt;
  std::optional<std::size_t> paths;
  unsigned threads = 0;
  std::string out_dir;
  std::string config_path;
  std::string report_path;

  auto* run = app.add_subcommand("run", "run an experiment config and write report.json");
  run->add_option("config", config_path, "experiment config (JSON)")->required()->check(CLI::ExistingFile);
  run->add_option("--seed", seed, "override simulation.seed");
  run->add_option("--threads", threads, "worker threads (default: FLOWLAB_THREADS, then all cores)");
  run->add_option("--out-dir", out_dir, "output directory (default: output.dir, then the config name)");
  run->add_option("--dt-override", dt, "override simulation.dt")->check(CLI::PositiveNumber);
  run->add_option("--paths-override", paths, "override simulation.paths")->check(CLI::PositiveNumber);

  auto* list = app.add_subcommand("list-presets", "list preset problems with their growth metadata");

  auto* plot = app.add_subcommand("plot", "render the plots stored in a report.json as SVG");
  plot->add_option("report", report_path, "report.json")->required()->check(CLI::ExistingFile);
  plot->add_option("--out-dir", out_dir, "output directory (default: next to the report)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kConfigError;
  }

  try {
    if (*list) {
      std::cout << flowlab::preset_table();
      return 0;
    }
    if (*plot) {
      const fs::path report(report_path);
      const fs::path dir = out_dir.empty() ? report.parent_path() : fs::path(out_dir);
      if (!dir.empty()) fs::create_directories(dir);
      const auto svgs = flowlab::plots_from_report(slurp(report));
      for (const auto& [file, svg] : svgs) {
        spill(dir / file, svg);
        std::cout << (dir / file).string() << "\n";
      }
      return 0;
    }

    flowlab::parallel::set_worker_count(threads);
    flowlab::RunOverrides ov;
    ov.seed = seed;
    ov.dt = dt;
    ov.paths = paths;
    const std::string text = slurp(config_path);
    const auto started = std::chrono::steady_clock::now();
    const auto result = flowlab::run_experiment(text, ov);
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();

    fs::path dir = out_dir;
    if (dir.empty()) dir = result.out_dir.empty() ? fs::path("flowlab-out") / fs::path(config_path).stem() : fs::path(result.out_dir);
    fs::create_directories(dir);
    spill(dir / "report.json", result.report_json);
    for (const auto& [file, content] : result.files) spill(dir / file, content);
    const nlohmann::json provenance = {{"flowlab_version", kVersion},
                                       {"config", fs::absolute(config_path).string()},
                                       {"started_utc", utc_now()},
                                       {"wall_seconds", seconds},
                                       {"threads", flowlab::parallel::worker_count()}};
    spill(dir / "provenance.json", provenance.dump(2) + "\n");

    for (const auto& line : result.summary) std::cout << line << "\n";
    std::cout << "verdict: " << flowlab::to_string(result.verdict) << "  (" << (dir / "report.json").string() << ")\n";
    return flowlab::exit_code(result.verdict);
  } catch (const flowlab::Error& e) {
    std::cerr << "flowlab: " << flowlab::to_string(e.code()) << ": " << e.what() << "\n";
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "flowlab: " << e.what() << "\n";
    return kConfigError;
  }
}
