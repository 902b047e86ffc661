#include "redr/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>
#include <vector>

#include "redr/error.hpp"

namespace redr {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

template <typename T>
T parse_number(std::string_view key, std::string_view text) {
  T value{};
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end) {
    throw ConfigError("config: invalid value '" + std::string(text) + "' for " + std::string(key));
  }
  return value;
}

bool parse_bool(std::string_view key, std::string_view text) {
  if (text == "true" || text == "1") return true;
  if (text == "false" || text == "0") return false;
  throw ConfigError("config: invalid boolean '" + std::string(text) + "' for " + std::string(key));
}

std::string format_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

struct Field {
  const char* name;
  std::function<void(TrainConfig&, std::string_view)> set;
  std::function<std::string(const TrainConfig&)> get;
};

#define REDR_INT_FIELD(f)                                                                                    \
  Field {                                                                                                    \
    #f, [](TrainConfig& c, std::string_view v) { c.f = parse_number<decltype(c.f)>(#f, v); },               \
        [](const TrainConfig& c) { return std::to_string(c.f); }                                             \
  }
#define REDR_REAL_FIELD(f)                                                                                   \
  Field {                                                                                                    \
    #f, [](TrainConfig& c, std::string_view v) { c.f = parse_number<double>(#f, v); },                      \
        [](const TrainConfig& c) { return format_double(c.f); }                                              \
  }
#define REDR_BOOL_FIELD(f)                                                                                   \
  Field {                                                                                                    \
    #f, [](TrainConfig& c, std::string_view v) { c.f = parse_bool(#f, v); },                                \
        [](const TrainConfig& c) { return std::string(c.f ? "true" : "false"); }                             \
  }

const std::vector<Field>& fields() {
  static const std::vector<Field> kFields = {
      REDR_INT_FIELD(hidden_size),         REDR_INT_FIELD(embedding_dim),      REDR_INT_FIELD(lstm_layers),
      REDR_INT_FIELD(reasoning_layers),    REDR_BOOL_FIELD(decision_maker),    REDR_REAL_FIELD(dropout),
      REDR_REAL_FIELD(init_scale),         REDR_BOOL_FIELD(finetune_embeddings), REDR_REAL_FIELD(learning_rate),
      REDR_REAL_FIELD(lr_decay),           REDR_INT_FIELD(lr_decay_every),     REDR_INT_FIELD(lr_decay_start),
      REDR_INT_FIELD(batch_size),          REDR_INT_FIELD(max_epochs),         REDR_REAL_FIELD(grad_clip),
      REDR_INT_FIELD(seed),                REDR_INT_FIELD(beam_size),          REDR_INT_FIELD(max_question_length),
      REDR_INT_FIELD(min_freq),            REDR_INT_FIELD(history_max_tokens), REDR_INT_FIELD(history_max_turns),
      REDR_REAL_FIELD(rl_learning_rate),   REDR_BOOL_FIELD(rl_baseline),       REDR_INT_FIELD(rl_max_updates),
      REDR_INT_FIELD(rl_eval_every),       REDR_INT_FIELD(rl_patience),
  };
  return kFields;
}

#undef REDR_INT_FIELD
#undef REDR_REAL_FIELD
#undef REDR_BOOL_FIELD

}  // namespace

void TrainConfig::validate() const {
  auto positive = [](bool ok, const char* name) {
    if (!ok) throw ConfigError(std::string("config: ") + name + " must be positive");
  };
  positive(hidden_size > 0, "hidden_size");
  if (hidden_size % 2 != 0) throw ConfigError("config: hidden_size must be even (split across two directions)");
  positive(embedding_dim > 0, "embedding_dim");
  positive(lstm_layers > 0, "lstm_layers");
  if (reasoning_layers < 1) throw ConfigError("config: reasoning_layers must be >= 1");
  if (dropout < 0 || dropout >= 1) throw ConfigError("config: dropout must lie in [0, 1)");
  positive(init_scale > 0, "init_scale");
  positive(learning_rate > 0, "learning_rate");
  positive(lr_decay > 0, "lr_decay");
  positive(lr_decay_every > 0, "lr_decay_every");
  if (lr_decay_start < 0) throw ConfigError("config: lr_decay_start must be >= 0");
  positive(batch_size > 0, "batch_size");
  if (max_epochs < 0) throw ConfigError("config: max_epochs must be >= 0");
  if (grad_clip < 0) throw ConfigError("config: grad_clip must be >= 0");
  positive(beam_size > 0, "beam_size");
  positive(max_question_length > 0, "max_question_length");
  positive(min_freq > 0, "min_freq");
  positive(history_max_tokens > 0, "history_max_tokens");
  positive(history_max_turns > 0, "history_max_turns");
  positive(rl_learning_rate > 0, "rl_learning_rate");
  if (rl_max_updates < 0) throw ConfigError("config: rl_max_updates must be >= 0");
  positive(rl_eval_every > 0, "rl_eval_every");
  positive(rl_patience > 0, "rl_patience");
}

TrainConfig parse_config(std::string_view text) {
  TrainConfig config;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const std::size_t nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view() : text.substr(nl + 1);
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("config line " + std::to_string(line_no) + ": expected 'key = value'");
    }
    const std::string_view key = trim(line.substr(0, eq));
    const std::string_view value = trim(line.substr(eq + 1));
    bool found = false;
    for (const Field& f : fields()) {
      if (key == f.name) {
        f.set(config, value);
        found = true;
        break;
      }
    }
    if (!found) throw ConfigError("config line " + std::to_string(line_no) + ": unknown key '" + std::string(key) + "'");
  }
  config.validate();
  return config;
}

TrainConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string format_config(const TrainConfig& config) {
  std::string out;
  for (const Field& f : fields()) out += std::string(f.name) + " = " + f.get(config) + "\n";
  return out;
}

}  // namespace redr
