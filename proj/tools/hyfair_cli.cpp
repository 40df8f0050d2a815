// hyfair: command-line driver for graph building, training, evaluation, fairness reporting and
// feedback-loop simulation.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include "hyfair/pipeline.hpp"

using namespace hyfair;

namespace {

/// Opens `path` for writing, "-" meaning stdout.
class Output {
 public:
  explicit Output(const std::string& path) {
    if (path == "-" || path.empty()) return;
    file_ = std::make_unique<std::ofstream>(path, std::ios::binary);
    if (!*file_) fail(ErrorCode::IoError, "cannot write " + path);
  }
  std::ostream& stream() { return file_ ? *file_ : std::cout; }

 private:
  std::unique_ptr<std::ofstream> file_;
};

std::vector<std::size_t> parse_ks(const std::string& s) {
  std::vector<std::size_t> ks;
  for (const auto& part : config_detail::split_list(s)) ks.push_back(config_detail::parse_number<std::size_t>("k", part));
  if (ks.empty()) fail(ErrorCode::ConfigError, "k list is empty");
  return ks;
}

/// Config file (optional), then --set overrides, then dedicated flags.
struct ConfigSource {
  std::string path;
  std::vector<std::string> overrides;

  void attach(CLI::App* cmd, bool required) {
    auto* opt = cmd->add_option("--config", path, "key=value config file");
    if (required) opt->required();
    cmd->add_option("--set", overrides, "override one config key, key=value (repeatable)");
  }

  RunConfig load() const {
    RunConfig cfg = path.empty() ? RunConfig{} : load_config(path);
    for (const auto& o : overrides) {
      const auto eq = o.find('=');
      if (eq == std::string::npos) fail(ErrorCode::ConfigError, "--set expects key=value, got '" + o + "'");
      apply_setting(cfg, config_detail::trim(o.substr(0, eq)), config_detail::trim(o.substr(eq + 1)));
    }
    return cfg;
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"hyfair: multi-view hypergraph conversational recommender and fairness harness"};
  app.require_subcommand(1);

  // make-synthetic
  auto* synth = app.add_subcommand("make-synthetic", "write a planted-preference dataset and config");
  std::string synth_out;
  SyntheticSpec spec;
  synth->add_option("--out", synth_out, "output directory")->required();
  synth->add_option("--seed", spec.seed, "generator seed");
  synth->add_option("--sessions", spec.sessions, "number of sessions");
  synth->add_option("--items", spec.items, "number of items");
  synth->add_option("--clusters", spec.clusters, "latent clusters");

  // build-graphs
  auto* build = app.add_subcommand("build-graphs", "build view hypergraphs, line graphs and the popularity table");
  ConfigSource build_cfg;
  std::string build_out;
  unsigned build_threads = 0;
  build_cfg.attach(build, true);
  build->add_option("--out", build_out, "output directory")->required();
  build->add_option("--threads", build_threads, "line-graph induction threads");

  // train
  auto* train = app.add_subcommand("train", "train and write a checkpoint");
  ConfigSource train_cfg;
  std::string train_out, train_log;
  std::uint64_t train_seed = 0;
  unsigned train_threads = 0;
  std::size_t train_epochs = 0;
  train_cfg.attach(train, true);
  train->add_option("--seed", train_seed, "random seed")->required();
  train->add_option("--out", train_out, "checkpoint path")->required();
  train->add_option("--log", train_log, "per-epoch loss log (JSON lines), '-' for stdout");
  train->add_option("--threads", train_threads, "line-graph induction threads");
  auto* epochs_opt = train->add_option("--epochs", train_epochs, "training epochs");

  // recommend
  auto* rec = app.add_subcommand("recommend", "write top-K lists for sessions with a ground truth");
  std::string rec_ckpt, rec_sessions, rec_out = "-", rec_split = "all";
  std::size_t rec_k = 10;
  unsigned rec_threads = 0;
  rec->add_option("--checkpoint", rec_ckpt, "checkpoint")->required();
  rec->add_option("--sessions", rec_sessions, "sessions file (defaults to the training sessions)");
  rec->add_option("--k", rec_k, "list length");
  rec->add_option("--split", rec_split, "all, train or eval");
  rec->add_option("--out", rec_out, "lists, JSON lines");
  rec->add_option("--threads", rec_threads, "line-graph induction threads");

  // evaluate
  auto* eval = app.add_subcommand("evaluate", "R@K, MRR@K and NDCG@K of recommendation lists");
  std::string eval_lists, eval_truth, eval_out = "-", eval_k = "10,50";
  eval->add_option("--lists", eval_lists, "lists, JSON lines")->required();
  eval->add_option("--truth", eval_truth, "sessions file; the last ground truth of each session is the target")->required();
  eval->add_option("--k", eval_k, "cutoffs, comma separated");
  eval->add_option("--out", eval_out, "metrics JSON");

  // fairness
  auto* fair = app.add_subcommand("fairness", "A@K, G@K, L@K and D@K of recommendation lists");
  std::string fair_lists, fair_pop, fair_out = "-", fair_k = "5,10,15,20";
  std::size_t fair_m = 0;
  fair->add_option("--lists", fair_lists, "lists, JSON lines")->required();
  fair->add_option("--pop", fair_pop, "popularity table (item<TAB>popularity)")->required();
  fair->add_option("--catalog-size", fair_m, "catalog size m")->required();
  fair->add_option("--k", fair_k, "cutoffs, comma separated");
  fair->add_option("--out", fair_out, "report JSON");

  // respond
  auto* resp = app.add_subcommand("respond", "greedy responses with per-step distribution entropy");
  std::string resp_ckpt, resp_sessions, resp_id, resp_out = "-";
  std::size_t resp_len = 32;
  resp->add_option("--checkpoint", resp_ckpt, "checkpoint")->required();
  resp->add_option("--session", resp_sessions, "sessions file")->required();
  resp->add_option("--session-id", resp_id, "only this session");
  resp->add_option("--max-len", resp_len, "tokens to generate");
  resp->add_option("--out", resp_out, "responses, JSON lines");

  // simulate-loop
  auto* sim = app.add_subcommand("simulate-loop", "feedback-loop simulation with per-turn fairness and ranking metrics");
  ConfigSource sim_cfg;
  std::string sim_ckpt, sim_out = "-", sim_user, sim_ranker;
  std::uint64_t sim_seed = 0;
  std::size_t sim_turns = 0;
  sim_cfg.attach(sim, true);
  sim->add_option("--seed", sim_seed, "random seed")->required();
  sim->add_option("--checkpoint", sim_ckpt, "checkpoint for the model ranker");
  auto* turns_opt = sim->add_option("--turns", sim_turns, "simulated turns");
  sim->add_option("--user-model", sim_user, "always-accept-top1 or preference-threshold");
  sim->add_option("--ranker", sim_ranker, "model or popularity");
  sim->add_option("--out", sim_out, "trace JSON");

  // report
  auto* rep = app.add_subcommand("report", "render a metrics, fairness or trace report");
  std::string rep_in, rep_out = "-", rep_format = "table";
  rep->add_option("--in", rep_in, "report JSON")->required();
  rep->add_option("--format", rep_format, "table or json");
  rep->add_option("--out", rep_out, "output path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*synth) {
      write_synthetic(synth_out, make_synthetic(spec), spec.seed);
    } else if (*build) {
      RunConfig cfg = build_cfg.load();
      if (build_threads) cfg.threads = build_threads;
      validate_config(cfg);
      build_graphs(cfg, build_out);
    } else if (*train) {
      RunConfig cfg = train_cfg.load();
      cfg.seed = train_seed;
      if (train_threads) cfg.threads = train_threads;
      if (*epochs_opt) cfg.epochs = train_epochs;
      std::unique_ptr<Output> log;
      if (!train_log.empty()) log = std::make_unique<Output>(train_log);
      TrainedModel tm = train_pipeline(cfg, log ? &log->stream() : nullptr);
      save_checkpoint(train_out, tm.store, checkpoint_metadata(tm));
    } else if (*rec) {
      TrainedModel tm = load_trained(rec_ckpt, rec_sessions, rec_threads);
      Output out(rec_out);
      write_lists(out.stream(), recommend_pipeline(tm, rec_k, rec_split));
    } else if (*eval) {
      const auto lists = load_lists(eval_lists);
      const auto truth = truth_from_sessions(load_sessions(eval_truth));
      Output out(eval_out);
      out.stream() << report_text(evaluate_lists(lists, truth, parse_ks(eval_k)));
    } else if (*fair) {
      const auto lists = load_lists(fair_lists);
      const auto report = fairness_report(lists, load_popularity(fair_pop), fair_m, parse_ks(fair_k));
      Output out(fair_out);
      out.stream() << report_text(fairness_to_json(report));
    } else if (*resp) {
      TrainedModel tm = load_trained(resp_ckpt, resp_sessions);
      Output out(resp_out);
      bool found = resp_id.empty();
      for (std::size_t i = 0; i < tm.model.sessions().size(); ++i) {
        const auto& sid = tm.model.sessions()[i].session_id;
        if (!resp_id.empty() && sid != resp_id) continue;
        found = true;
        const auto r = tm.model.respond(tm.store, i, resp_len);
        nlohmann::ordered_json j;
        j["session_id"] = sid;
        j["token_ids"] = r.token_ids;
        j["tokens"] = r.tokens;
        j["entropy"] = r.entropy;
        out.stream() << j.dump() << '\n';
      }
      if (!found) fail(ErrorCode::ConfigError, "no session '" + resp_id + "'");
    } else if (*sim) {
      RunConfig cfg = sim_cfg.load();
      cfg.seed = sim_seed;
      if (*turns_opt) cfg.turns = sim_turns;
      if (!sim_user.empty()) cfg.user_model = sim_user;
      if (!sim_ranker.empty()) cfg.ranker = sim_ranker;
      std::optional<TrainedModel> tm;
      if (cfg.ranker == "model") {
        if (sim_ckpt.empty()) fail(ErrorCode::ConfigError, "--checkpoint is required for the model ranker");
        tm.emplace(load_trained(sim_ckpt, cfg.sessions, cfg.threads));
      }
      const LoopTrace trace = simulate_pipeline(cfg, tm ? &*tm : nullptr);
      Output out(sim_out);
      out.stream() << report_text(trace_to_json(trace));
    } else if (*rep) {
      if (rep_format != "table" && rep_format != "json") fail(ErrorCode::ConfigError, "format must be table or json");
      const auto j = load_report(rep_in);
      Output out(rep_out);
      out.stream() << (rep_format == "table" ? render_table(j) : report_text(j));
    }
  } catch (const Error& e) {
    std::cerr << "hyfair: " << to_string(e.code()) << ": " << e.what() << '\n';
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "hyfair: " << e.what() << '\n';
    return 3;
  }
  return 0;
}
