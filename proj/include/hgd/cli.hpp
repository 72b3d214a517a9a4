#pragma once

// Command-line front end: gen-data, pretrain, train, transfer, eval, detect.

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "hgd/pipeline.hpp"
#include "hgd/transfer.hpp"

namespace hgd {

/// Exit codes shared by every subcommand.
enum ExitCode : int { kExitOk = 0, kExitFailure = 1, kExitUsage = 2 };

struct RunPaths {
  std::string data;
  std::string out;
  std::string checkpoint;
  std::string log;
  std::string frames;
  std::string image;
};

/// Everything a run can be configured with. Training extras beyond
/// TrainConfig: a validation fraction (0 trains on everything) and the
/// number of leading parameterised layers frozen during transfer.
struct RunConfig {
  std::uint64_t seed = 0;
  TrainConfig train;
  double val_fraction = 0.0;
  std::size_t freeze = 0;
  PipelineConfig pipeline;
  RunPaths paths;
};

/// Parses a JSON config document over the defaults. Unknown keys and
/// wrongly typed values throw ArgumentError.
RunConfig parse_run_config(std::string_view json_text);

/// Fully resolved config as compact JSON, in the same layout
/// `parse_run_config` accepts.
std::string to_json(const RunConfig& cfg);

/// Runs one command line (without the program name). Never throws.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace hgd
