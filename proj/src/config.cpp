#include "gapcoref/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "gapcoref/error.hpp"
#include "gapcoref/rng.hpp"

namespace gapcoref {

namespace {

std::string_view trim(std::string_view s) {
  const auto is_space = [](char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n'; };
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const char* expected) {
  throw Error(ErrorCode::BadConfig, "config key '" + key + "': '" + value + "' is not " + expected);
}

template <typename T>
T parse_number(const std::string& key, const std::string& value, const char* expected) {
  T out{};
  const char* end = value.data() + value.size();
  const auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc{} || ptr != end) bad_value(key, value, expected);
  if constexpr (std::is_floating_point_v<T>) {
    if (!std::isfinite(out)) bad_value(key, value, expected);
  }
  return out;
}

int parse_int(const std::string& key, const std::string& value) { return parse_number<int>(key, value, "an integer"); }

double parse_double(const std::string& key, const std::string& value) {
  return parse_number<double>(key, value, "a number");
}

// "none", "3", "1-12" or "1,3,5".
std::set<int> parse_layer_set(const std::string& key, const std::string& value) {
  std::set<int> out;
  if (value == "none" || value.empty()) return out;
  std::stringstream ss(value);
  std::string part;
  while (std::getline(ss, part, ',')) {
    const std::string p(trim(part));
    const std::size_t dash = p.find('-');
    if (dash == std::string::npos) {
      out.insert(parse_int(key, p));
      continue;
    }
    const int lo = parse_int(key, p.substr(0, dash));
    const int hi = parse_int(key, p.substr(dash + 1));
    if (lo > hi) bad_value(key, value, "a layer range");
    for (int l = lo; l <= hi; ++l) out.insert(l);
  }
  return out;
}

std::string format_layer_set(const std::set<int>& layers) {
  if (layers.empty()) return "none";
  std::string out;
  for (int l : layers) out += (out.empty() ? "" : ",") + std::to_string(l);
  return out;
}

std::string fmt(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

}  // namespace

ConfigValues parse_config_text(std::string_view text) {
  ConfigValues out;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const std::size_t nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (const std::size_t hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw Error(ErrorCode::BadConfig, "config line " + std::to_string(line_no) + ": expected 'key = value'");
    }
    const std::string_view key = trim(line.substr(0, eq));
    if (key.empty()) throw Error(ErrorCode::BadConfig, "config line " + std::to_string(line_no) + ": empty key");
    out.emplace_back(std::string(key), std::string(trim(line.substr(eq + 1))));
  }
  return out;
}

ConfigValues read_config_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot read config " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str());
}

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = {
      "model",        "data",           "eval_data",       "vocab",          "embeddings",
      "output_dir",   "folds",          "learning_rate",   "beta1",          "beta2",
      "adam_epsilon", "weight_decay",   "warmup_fraction", "batch_size",     "epochs",
      "schedule",     "triangular_steps_per_cycle",        "grad_clip",      "seed",
      "window",       "max_seq_len",    "max_answer_len",  "lr_C",           "lr_fit",
      "seq_hidden",   "seq_dropout",    "num_layers",      "hidden_dim",     "num_heads",
      "ffn_dim",      "max_positions",  "frozen_layers",   "output_layer"};
  return keys;
}

RunConfig resolve_run_config(const ConfigValues& values) {
  RunConfig c;
  for (const auto& [key, value] : values) {
    if (key == "model") c.kind = parse_model_kind(value);
  }
  c.trainer = TrainerConfig::defaults_for(c.kind);

  bool ffn_set = false;
  bool positions_set = false;
  TrainerConfig& t = c.trainer;
  EncoderConfig& e = c.encoder;
  for (const auto& [key, value] : values) {
    if (key == "model") continue;
    else if (key == "data") c.data = value;
    else if (key == "eval_data") c.eval_data = value;
    else if (key == "vocab") c.vocab = value;
    else if (key == "embeddings") c.embeddings = value;
    else if (key == "output_dir") c.output_dir = value;
    else if (key == "folds") c.folds = parse_int(key, value);
    else if (key == "learning_rate") t.learning_rate = parse_double(key, value);
    else if (key == "beta1") t.adam.beta1 = parse_double(key, value);
    else if (key == "beta2") t.adam.beta2 = parse_double(key, value);
    else if (key == "adam_epsilon") t.adam.epsilon = parse_double(key, value);
    else if (key == "weight_decay") t.adam.weight_decay = parse_double(key, value);
    else if (key == "warmup_fraction") t.warmup_fraction = parse_double(key, value);
    else if (key == "batch_size") t.batch_size = parse_int(key, value);
    else if (key == "epochs") t.epochs = parse_int(key, value);
    else if (key == "schedule") t.schedule = parse_schedule(value);
    else if (key == "triangular_steps_per_cycle") t.triangular_steps_per_cycle = parse_number<std::int64_t>(key, value, "an integer");
    else if (key == "grad_clip") t.grad_clip = parse_double(key, value);
    else if (key == "seed") t.seed = parse_number<std::uint64_t>(key, value, "an unsigned integer");
    else if (key == "window") t.window = parse_int(key, value);
    else if (key == "max_seq_len") t.max_seq_len = parse_int(key, value);
    else if (key == "max_answer_len") t.max_answer_len = parse_int(key, value);
    else if (key == "lr_C") t.lr_C = parse_double(key, value);
    else if (key == "lr_fit") {
      if (value == "per_fold") t.lr_fit = LrFitMode::PerFold;
      else if (value == "out_of_fold") t.lr_fit = LrFitMode::OutOfFold;
      else bad_value(key, value, "per_fold or out_of_fold");
    } else if (key == "seq_hidden") t.seq_hidden = parse_int(key, value);
    else if (key == "seq_dropout") t.seq_dropout = parse_double(key, value);
    else if (key == "num_layers") e.num_layers = parse_int(key, value);
    else if (key == "hidden_dim") e.hidden_dim = parse_int(key, value);
    else if (key == "num_heads") e.num_heads = parse_int(key, value);
    else if (key == "ffn_dim") {
      e.ffn_dim = parse_int(key, value);
      ffn_set = true;
    } else if (key == "max_positions") {
      e.max_positions = parse_int(key, value);
      positions_set = true;
    } else if (key == "frozen_layers") e.frozen_layers = parse_layer_set(key, value);
    else if (key == "output_layer") e.output_layer = parse_int(key, value);
    else throw Error(ErrorCode::BadConfig, "unknown config key '" + key + "'");
  }
  if (!ffn_set) e.ffn_dim = 4 * e.hidden_dim;
  if (!positions_set) e.max_positions = std::max(e.max_positions, t.max_seq_len);
  return c;
}

void RunConfig::validate() const {
  trainer.validate();
  if (folds < 1) throw Error(ErrorCode::BadConfig, "folds must be positive");
  if (embeddings.empty()) {
    EncoderConfig probe = encoder;
    probe.vocab_size = std::max(probe.vocab_size, 1);
    probe.validate();
    if (encoder.max_positions < trainer.max_seq_len) {
      throw Error(ErrorCode::BadConfig, "max_positions must be at least max_seq_len");
    }
  }
}

std::string echo_config(const RunConfig& c) {
  const TrainerConfig& t = c.trainer;
  const EncoderConfig& e = c.encoder;
  std::ostringstream out;
  auto line = [&](const char* key, const std::string& value) { out << key << " = " << value << '\n'; };
  line("model", to_string(c.kind));
  line("data", c.data.string());
  line("eval_data", c.eval_data.string());
  line("vocab", c.vocab.string());
  line("embeddings", c.embeddings.string());
  line("output_dir", c.output_dir.string());
  line("folds", std::to_string(c.folds));
  line("learning_rate", fmt(t.learning_rate));
  line("beta1", fmt(t.adam.beta1));
  line("beta2", fmt(t.adam.beta2));
  line("adam_epsilon", fmt(t.adam.epsilon));
  line("weight_decay", fmt(t.adam.weight_decay));
  line("warmup_fraction", fmt(t.warmup_fraction));
  line("batch_size", std::to_string(t.batch_size));
  line("epochs", std::to_string(t.epochs));
  line("schedule", to_string(t.schedule));
  line("triangular_steps_per_cycle", std::to_string(t.triangular_steps_per_cycle));
  line("grad_clip", fmt(t.grad_clip));
  line("seed", std::to_string(t.seed));
  line("window", std::to_string(t.window));
  line("max_seq_len", std::to_string(t.max_seq_len));
  line("max_answer_len", std::to_string(t.max_answer_len));
  line("lr_C", fmt(t.lr_C));
  line("lr_fit", t.lr_fit == LrFitMode::PerFold ? "per_fold" : "out_of_fold");
  line("seq_hidden", std::to_string(t.seq_hidden));
  line("seq_dropout", fmt(t.seq_dropout));
  line("num_layers", std::to_string(e.num_layers));
  line("hidden_dim", std::to_string(e.hidden_dim));
  line("num_heads", std::to_string(e.num_heads));
  line("ffn_dim", std::to_string(e.ffn_dim));
  line("max_positions", std::to_string(e.max_positions));
  line("frozen_layers", format_layer_set(e.frozen_layers));
  line("output_layer", std::to_string(e.output_layer));
  out << "# seed fan-out: folds/male=" << derive_seed(t.seed, "folds/male")
      << " folds/female=" << derive_seed(t.seed, "folds/female") << " encoder/fold0=" << derive_seed(t.seed, "encoder/fold0")
      << " head/fold0=" << derive_seed(t.seed, "head/fold0") << " shuffle/fold0/epoch0="
      << derive_seed(t.seed, "shuffle/fold0/epoch0") << " dropout/fold0=" << derive_seed(t.seed, "dropout/fold0") << '\n';
  return out.str();
}

}  // namespace gapcoref
