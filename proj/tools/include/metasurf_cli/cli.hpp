// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include <metasurf/channel.hpp>
#include <metasurf/deploy.hpp>

namespace metasurf::cli {

enum class Format { Csv, Json };

/// Parses "csv" or "json"; throws ConfigError naming `where`.
Format parse_format(const std::string& text, const std::string& where);

/// One optimization run: a scene (or a channel file), the budgets to sweep
/// and the solver configuration.
struct RunConfig {
  /// Exactly one of `scene` and `channel_file` is set.
  std::optional<SceneConfig> scene;
  std::filesystem::path channel_file;
  /// Seed of channel synthesis (phase jitter only).
  std::uint64_t channel_seed = 1;
  std::vector<std::size_t> budgets{0};
  DeployConfig deploy;
  std::filesystem::path out_dir;
  std::vector<Format> formats{Format::Csv, Format::Json};
  /// Write measured wallclock times; false writes zeros for reproducible files.
  bool timing = true;
};

/// Parses the config document. Relative paths resolve against `base_dir`.
/// Throws ConfigError naming the offending field.
RunConfig parse_run_config(const nlohmann::json& j, const std::filesystem::path& base_dir);
RunConfig load_run_config(const std::filesystem::path& path);

/// Synthesizes or loads the channels and checks budgets against the scene.
ChannelSet prepare_channels(const RunConfig& cfg);

struct EmitOptions {
  bool timing = true;
  std::uint64_t seed = 0;
};

/// Writes sweep.csv and/or report.json into `dir` (created if needed) and
/// returns the written paths. Throws ConfigError on an empty report list and
/// on I/O failures, naming the path.
std::vector<std::filesystem::path> emit_reports(const std::vector<SolveReport>& reports, const ChannelSet& channels,
                                                const std::filesystem::path& dir, const std::vector<Format>& formats,
                                                const EmitOptions& options = {});

/// report.json content, numbers rounded to 12 significant digits.
nlohmann::json report_json(const std::vector<SolveReport>& reports, const ChannelSet& channels,
                           const EmitOptions& options = {});
/// sweep.csv content: one row per (budget, start).
std::string sweep_csv(const std::vector<SolveReport>& reports, const EmitOptions& options = {});

/// Exit codes of `run`.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitSolver = 3;

/// Full command-line entry point.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace metasurf::cli
