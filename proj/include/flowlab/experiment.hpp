#pragma once

#include "flowlab/types.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace flowlab {

/// Command-line overrides applied on top of the "simulation" block.
struct RunOverrides {
  std::optional<std::uint64_t> seed;
  std::optional<double> dt;
  std::optional<std::size_t> paths;
};

struct ExperimentOutput {
  std::string kind;
  /// Output directory named in the config ("output.dir"); empty when absent.
  std::string out_dir;
  bool plots = true;
  /// Deterministic: identical config, overrides and code give identical bytes.
  std::string report_json;
  /// Extra artifacts by file name (CSV tables, SVG plots, binary dumps).
  std::map<std::string, std::string> files;
  Verdict verdict = Verdict::Inconclusive;
  /// One human-readable line per check.
  std::vector<std::string> summary;
};

/// Parses and runs one experiment config (JSON). Config problems raise
/// Error{InvalidConfig} (or Parse / PresetNotFound) naming the line or field.
ExperimentOutput run_experiment(std::string_view config_text, const RunOverrides& overrides = {});

/// Fail dominates; any non-pass verdict otherwise makes the result inconclusive.
Verdict combine(Verdict a, Verdict b);

/// 0 pass, 1 fail, 2 inconclusive.
int exit_code(Verdict v);

/// Re-renders the plot series stored in a report; returns file name -> SVG.
std::map<std::string, std::string> plots_from_report(std::string_view report_json);

/// Fixed-width listing of the preset catalog with growth metadata.
std::string preset_table();

}  // namespace flowlab
