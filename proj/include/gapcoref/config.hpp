#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "gapcoref/encoder.hpp"
#include "gapcoref/trainer.hpp"

namespace gapcoref {

// Ordered key/value pairs; later entries override earlier ones.
using ConfigValues = std::vector<std::pair<std::string, std::string>>;

// "key = value" lines; '#' starts a comment; blank lines ignored.
// Throws BadConfig naming the offending line.
ConfigValues parse_config_text(std::string_view text);
ConfigValues read_config_file(const std::filesystem::path& path);

struct RunConfig {
  ModelKind kind = ModelKind::QA;
  TrainerConfig trainer = TrainerConfig::defaults_for(ModelKind::QA);
  EncoderConfig encoder;
  int folds = 5;

  std::filesystem::path data;
  std::filesystem::path eval_data;
  std::filesystem::path vocab;
  std::filesystem::path embeddings;
  std::filesystem::path output_dir = "run";

  void validate() const;  // throws BadConfig
};

// Starts from the chosen model kind's defaults (the "model" key is read
// first), then applies every other key in order. Unknown keys and unparsable
// values throw BadConfig.
RunConfig resolve_run_config(const ConfigValues& values);

// Every effective value as "key = value" lines, loadable by
// parse_config_text, followed by the derived seeds as comments.
std::string echo_config(const RunConfig& config);

// Keys resolve_run_config accepts.
const std::vector<std::string>& config_keys();

}  // namespace gapcoref
