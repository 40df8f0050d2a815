#pragma once

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "hyfair/contrastive.hpp"
#include "hyfair/error.hpp"
#include "hyfair/hypergraph.hpp"

namespace hyfair {

/// One documented configuration key.
struct ConfigKey {
  const char* name;
  const char* default_value;
  const char* doc;
};

// Every key RunConfig understands, in file order.
inline const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys{
      {"sessions", "", "dialogue sessions, JSON lines"},
      {"dbpedia", "", "entity KG triples (h<TAB>rel<TAB>t); node table at <path>.nodes; empty disables"},
      {"conceptnet", "", "word KG triples; node table at <path>.nodes; empty disables"},
      {"reviews", "", "item reviews, JSON lines {item_id, tokens|text}; empty disables"},
      {"lexicon_pos", "", "positive sentiment words, one per line"},
      {"lexicon_neg", "", "negative sentiment words, one per line"},
      {"preferences", "", "planted latent preferences (simulation only)"},
      {"k_hop", "2", "KG neighbourhood radius, 0..4"},
      {"dim", "64", "embedding dimension d, 2..1024, divisible by heads"},
      {"heads", "4", "attention heads"},
      {"hg_layers", "1", "hypergraph convolution layers L, 1..8"},
      {"line_layers", "1", "line-graph convolution layers, 1..8"},
      {"line_activation", "relu", "line-graph activation: relu, tanh, identity"},
      {"tau", "0.07", "InfoNCE temperature, > 0"},
      {"alpha", "0.1", "contrastive weight in the recommendation objective, >= 0"},
      {"beta", "0.1", "contrastive weight in the conversation objective, >= 0"},
      {"gamma", "0.5", "decoder history gate, 0..1"},
      {"symmetrize", "true", "average both InfoNCE directions per view pair"},
      {"mean_levels", "false", "halve the hypergraph + line-graph contrastive sum"},
      {"lr", "0.001", "Adam learning rate, > 0"},
      {"epochs", "100", "training epochs, 0..100000"},
      {"batch_size", "32", "mini-batch size, >= 1"},
      {"conv_task", "true", "interleave conversation epochs with recommendation epochs"},
      {"max_len", "32", "response truncation length in tokens, >= 1"},
      {"ks", "5,10,15,20", "cutoffs for ranking and fairness metrics"},
      {"seed", "", "random seed; required by train and simulate-loop"},
      {"active_views", "entity,item,word,review", "views to build"},
      {"disabled_interests", "", "interest representations to drop, e.g. h:e,l:r"},
      {"threads", "1", "line-graph induction threads, 1..256"},
      {"eval_every", "5", "every n-th session (index % n == n-1) is held out; 0 holds out none"},
      {"exclude_seen", "true", "model ranker skips items already mentioned in the observed context"},
      {"turns", "10", "simulated feedback-loop turns, >= 1"},
      {"user_model", "always-accept-top1", "always-accept-top1 or preference-threshold"},
      {"accept_threshold", "0", "preference-threshold: minimum latent dot product to accept"},
      {"ranker", "model", "simulation ranker: model or popularity"},
      {"full_rebuild", "false", "rebuild all views from scratch each simulated turn"},
  };
  return keys;
}

struct RunConfig {
  std::string sessions, dbpedia, conceptnet, reviews, lexicon_pos, lexicon_neg, preferences;
  int k_hop = 2;
  std::size_t dim = 64;
  std::size_t heads = 4;
  std::size_t hg_layers = 1;
  std::size_t line_layers = 1;
  Activation line_activation = Activation::Relu;
  double tau = 0.07;
  double alpha = 0.1;
  double beta = 0.1;
  double gamma = 0.5;
  bool symmetrize = true;
  bool mean_levels = false;
  double lr = 1e-3;
  std::size_t epochs = 100;
  std::size_t batch_size = 32;
  bool conv_task = true;
  std::size_t max_len = 32;
  std::vector<std::size_t> ks{5, 10, 15, 20};
  std::optional<std::uint64_t> seed;
  std::set<View> active_views{kAllViews.begin(), kAllViews.end()};
  std::set<InterestKey> disabled_interests;
  unsigned threads = 1;
  std::size_t eval_every = 5;
  bool exclude_seen = true;
  std::size_t turns = 10;
  std::string user_model = "always-accept-top1";
  double accept_threshold = 0.0;
  std::string ranker = "model";
  bool full_rebuild = false;

  /// Active interest representations: two per active view, minus disabled ones.
  std::set<InterestKey> active_interests() const {
    std::set<InterestKey> out;
    for (View v : active_views)
      for (Level l : kAllLevels)
        if (!disabled_interests.count({v, l})) out.insert({v, l});
    return out;
  }

  ContrastiveOptions contrastive() const { return {tau, symmetrize, mean_levels}; }

  std::uint64_t require_seed() const {
    if (!seed) fail(ErrorCode::ConfigError, "seed is required");
    return *seed;
  }
};

namespace config_detail {

inline std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream is(s);
  while (std::getline(is, item, ','))
    if (auto t = trim(item); !t.empty()) out.push_back(t);
  return out;
}

template <class T>
T parse_number(const std::string& key, const std::string& value) {
  T out{};
  const char* end = value.data() + value.size();
  auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc{} || ptr != end) fail(ErrorCode::ConfigError, key + ": '" + value + "' is not a valid number");
  return out;
}

inline bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  fail(ErrorCode::ConfigError, key + ": expected true/false, got '" + value + "'");
}

inline void require(bool ok, const std::string& key, const std::string& what) {
  if (!ok) fail(ErrorCode::ConfigError, key + " " + what);
}

}  // namespace config_detail

/// Applies one key=value setting. Unknown keys and out-of-range values are config errors.
inline void apply_setting(RunConfig& c, const std::string& key, const std::string& value) {
  using namespace config_detail;
  auto sz = [&] { return parse_number<std::size_t>(key, value); };
  auto real = [&] { return parse_number<double>(key, value); };
  if (key == "sessions") c.sessions = value;
  else if (key == "dbpedia") c.dbpedia = value;
  else if (key == "conceptnet") c.conceptnet = value;
  else if (key == "reviews") c.reviews = value;
  else if (key == "lexicon_pos") c.lexicon_pos = value;
  else if (key == "lexicon_neg") c.lexicon_neg = value;
  else if (key == "preferences") c.preferences = value;
  else if (key == "k_hop") c.k_hop = parse_number<int>(key, value);
  else if (key == "dim") c.dim = sz();
  else if (key == "heads") c.heads = sz();
  else if (key == "hg_layers") c.hg_layers = sz();
  else if (key == "line_layers") c.line_layers = sz();
  else if (key == "line_activation") {
    auto a = parse_activation(value);
    require(a.has_value(), key, "must be relu, tanh or identity");
    c.line_activation = *a;
  } else if (key == "tau") c.tau = real();
  else if (key == "alpha") c.alpha = real();
  else if (key == "beta") c.beta = real();
  else if (key == "gamma") c.gamma = real();
  else if (key == "symmetrize") c.symmetrize = parse_bool(key, value);
  else if (key == "mean_levels") c.mean_levels = parse_bool(key, value);
  else if (key == "lr") c.lr = real();
  else if (key == "epochs") c.epochs = sz();
  else if (key == "batch_size") c.batch_size = sz();
  else if (key == "conv_task") c.conv_task = parse_bool(key, value);
  else if (key == "max_len") c.max_len = sz();
  else if (key == "ks") {
    c.ks.clear();
    for (const auto& k : split_list(value)) c.ks.push_back(parse_number<std::size_t>(key, k));
  } else if (key == "seed") {
    if (value.empty()) c.seed.reset();
    else c.seed = parse_number<std::uint64_t>(key, value);
  } else if (key == "active_views") {
    c.active_views.clear();
    for (const auto& v : split_list(value)) {
      auto view = parse_view(v);
      require(view.has_value(), key, "has unknown view '" + v + "'");
      c.active_views.insert(*view);
    }
  } else if (key == "disabled_interests") {
    c.disabled_interests.clear();
    for (const auto& v : split_list(value)) {
      auto k = parse_interest(v);
      require(k.has_value(), key, "has unknown interest '" + v + "' (expected h:<view> or l:<view>)");
      c.disabled_interests.insert(*k);
    }
  } else if (key == "threads") c.threads = parse_number<unsigned>(key, value);
  else if (key == "eval_every") c.eval_every = sz();
  else if (key == "exclude_seen") c.exclude_seen = parse_bool(key, value);
  else if (key == "turns") c.turns = sz();
  else if (key == "user_model") c.user_model = value;
  else if (key == "accept_threshold") c.accept_threshold = real();
  else if (key == "ranker") c.ranker = value;
  else if (key == "full_rebuild") c.full_rebuild = parse_bool(key, value);
  else fail(ErrorCode::ConfigError, "unknown config key '" + key + "'");
}

/// Range checks over the whole config.
inline void validate_config(const RunConfig& c) {
  using config_detail::require;
  require(c.k_hop >= 0 && c.k_hop <= 4, "k_hop", "must lie in 0..4");
  require(c.dim >= 2 && c.dim <= 1024, "dim", "must lie in 2..1024");
  require(c.heads >= 1 && c.dim % c.heads == 0, "heads", "must divide dim");
  require(c.hg_layers >= 1 && c.hg_layers <= 8, "hg_layers", "must lie in 1..8");
  require(c.line_layers >= 1 && c.line_layers <= 8, "line_layers", "must lie in 1..8");
  require(c.tau > 0.0, "tau", "must be positive");
  require(c.alpha >= 0.0, "alpha", "must be non-negative");
  require(c.beta >= 0.0, "beta", "must be non-negative");
  require(c.gamma >= 0.0 && c.gamma <= 1.0, "gamma", "must lie in [0,1]");
  require(c.lr > 0.0, "lr", "must be positive");
  require(c.epochs <= 100000, "epochs", "must be at most 100000");
  require(c.batch_size >= 1, "batch_size", "must be at least 1");
  require(c.max_len >= 1, "max_len", "must be at least 1");
  require(!c.ks.empty(), "ks", "must list at least one cutoff");
  for (std::size_t k : c.ks) require(k >= 1, "ks", "entries must be positive");
  require(!c.active_views.empty(), "active_views", "must name at least one view");
  require(c.threads >= 1 && c.threads <= 256, "threads", "must lie in 1..256");
  require(c.eval_every != 1, "eval_every", "of 1 would hold out every session");
  require(c.turns >= 1, "turns", "must be at least 1");
  require(c.user_model == "always-accept-top1" || c.user_model == "preference-threshold", "user_model",
          "must be always-accept-top1 or preference-threshold");
  require(c.ranker == "model" || c.ranker == "popularity", "ranker", "must be model or popularity");
  require(!c.active_interests().empty(), "disabled_interests", "disables every interest representation");
}

/// Parses `key = value` lines; `#` starts a comment. Relative data paths resolve against `base_dir`.
inline RunConfig parse_config(std::istream& is, const std::filesystem::path& base_dir = {}) {
  RunConfig c;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = config_detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) fail(ErrorCode::ConfigError, "config line " + std::to_string(lineno) + ": expected key = value");
    const auto key = config_detail::trim(line.substr(0, eq));
    auto value = config_detail::trim(line.substr(eq + 1));
    apply_setting(c, key, value);
  }
  if (!base_dir.empty()) {
    for (std::string* p : {&c.sessions, &c.dbpedia, &c.conceptnet, &c.reviews, &c.lexicon_pos, &c.lexicon_neg, &c.preferences})
      if (!p->empty() && std::filesystem::path(*p).is_relative()) *p = (base_dir / *p).lexically_normal().string();
  }
  return c;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) fail(ErrorCode::ConfigError, "cannot read config " + path);
  return parse_config(is, std::filesystem::path(path).parent_path());
}

namespace config_detail {
inline std::string join_sizes(const std::vector<std::size_t>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}
inline std::string format_double(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}
}  // namespace config_detail

/// Serializes every key in documented order; parse_config reads it back unchanged.
inline std::string config_to_text(const RunConfig& c) {
  using namespace config_detail;
  auto b = [](bool v) { return std::string(v ? "true" : "false"); };
  std::map<std::string, std::string> v{
      {"sessions", c.sessions}, {"dbpedia", c.dbpedia}, {"conceptnet", c.conceptnet}, {"reviews", c.reviews},
      {"lexicon_pos", c.lexicon_pos}, {"lexicon_neg", c.lexicon_neg}, {"preferences", c.preferences},
      {"k_hop", std::to_string(c.k_hop)}, {"dim", std::to_string(c.dim)}, {"heads", std::to_string(c.heads)},
      {"hg_layers", std::to_string(c.hg_layers)}, {"line_layers", std::to_string(c.line_layers)},
      {"line_activation", c.line_activation == Activation::Relu ? "relu" : c.line_activation == Activation::Tanh ? "tanh" : "identity"},
      {"tau", format_double(c.tau)}, {"alpha", format_double(c.alpha)}, {"beta", format_double(c.beta)},
      {"gamma", format_double(c.gamma)}, {"symmetrize", b(c.symmetrize)}, {"mean_levels", b(c.mean_levels)},
      {"lr", format_double(c.lr)}, {"epochs", std::to_string(c.epochs)}, {"batch_size", std::to_string(c.batch_size)},
      {"conv_task", b(c.conv_task)}, {"max_len", std::to_string(c.max_len)}, {"ks", join_sizes(c.ks)},
      {"seed", c.seed ? std::to_string(*c.seed) : ""}, {"threads", std::to_string(c.threads)},
      {"eval_every", std::to_string(c.eval_every)}, {"exclude_seen", b(c.exclude_seen)}, {"turns", std::to_string(c.turns)},
      {"user_model", c.user_model}, {"accept_threshold", format_double(c.accept_threshold)}, {"ranker", c.ranker},
      {"full_rebuild", b(c.full_rebuild)}};
  std::string views, disabled;
  for (View view : c.active_views) views += (views.empty() ? "" : ",") + std::string(view_name(view));
  for (const auto& k : c.disabled_interests) disabled += (disabled.empty() ? "" : ",") + interest_name(k);
  v["active_views"] = views;
  v["disabled_interests"] = disabled;
  std::string out;
  for (const auto& key : config_keys()) out += std::string(key.name) + " = " + v.at(key.name) + "\n";
  return out;
}

}  // namespace hyfair
