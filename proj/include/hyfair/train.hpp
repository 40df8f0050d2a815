#pragma once

#include <cmath>
#include <cstdint>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "hyfair/model.hpp"
#include "hyfair/params.hpp"

namespace hyfair {

/// Held-out split: session i is evaluation data when i % every == every - 1.
inline bool is_eval_session(std::size_t index, std::size_t every) { return every != 0 && index % every == every - 1; }

inline std::vector<std::size_t> split_indices(std::size_t count, std::size_t every, bool eval) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < count; ++i)
    if (is_eval_session(i, every) == eval) out.push_back(i);
  return out;
}

/// Fisher-Yates driven by unit_uniform, so the order is the same on every standard library.
inline void shuffle_indices(std::vector<std::size_t>& v, std::mt19937_64& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(unit_uniform(rng) * static_cast<double>(i));
    std::swap(v[i - 1], v[std::min(j, i - 1)]);
  }
}

/// Per-epoch sums of batch objectives. Conversation fields stay zero when that task is off.
struct EpochLog {
  std::size_t epoch = 0;
  double rec_total = 0.0;     // sum of alpha * J_CL + J_R
  double rec_task = 0.0;      // sum of J_R
  double conv_total = 0.0;    // sum of beta * J_CL + J_C
  double conv_task = 0.0;     // sum of J_C
  double contrastive = 0.0;   // sum of J_CL over recommendation batches
};

inline std::string epoch_log_line(const EpochLog& e) {
  nlohmann::ordered_json j;
  j["epoch"] = e.epoch;
  j["J_CL_R"] = e.rec_total;
  j["J_R"] = e.rec_task;
  j["J_CL"] = e.contrastive;
  j["J_CL_C"] = e.conv_total;
  j["J_C"] = e.conv_task;
  return j.dump();
}

namespace train_detail {

inline std::vector<std::vector<std::size_t>> batches(const std::vector<std::size_t>& order, std::size_t size) {
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t i = 0; i < order.size(); i += size)
    out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(i), order.begin() + static_cast<std::ptrdiff_t>(std::min(order.size(), i + size)));
  return out;
}

inline void check_finite(double v, const char* what, std::size_t epoch, std::size_t batch) {
  if (!std::isfinite(v))
    fail(ErrorCode::NonFiniteLoss, std::string(what) + " is " + std::to_string(v) + " at epoch " + std::to_string(epoch) + ", batch " + std::to_string(batch));
}

}  // namespace train_detail

/// Alternates one recommendation epoch and one conversation epoch, each over shuffled
/// mini-batches of `train_sessions`, with an Adam step per batch. One log line per epoch.
inline std::vector<EpochLog> train_model(const Model& model, ParameterStore& store, const std::vector<std::size_t>& train_sessions,
                                         std::ostream* log = nullptr) {
  const RunConfig& cfg = model.config();
  const AdamConfig adam{cfg.lr};
  std::mt19937_64 rng(cfg.require_seed() ^ 0x9e3779b97f4a7c15ULL);
  std::vector<std::size_t> rec_pool, conv_pool;
  for (std::size_t i : train_sessions) {
    if (model.features().at(i).label) rec_pool.push_back(i);
    if (!model.features().at(i).response.empty()) conv_pool.push_back(i);
  }
  std::vector<EpochLog> history;
  store.zero_grad();
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    EpochLog e;
    e.epoch = epoch;
    shuffle_indices(rec_pool, rng);
    std::size_t b = 0;
    for (const auto& batch : train_detail::batches(rec_pool, cfg.batch_size)) {
      ad::Tape t;
      auto o = model.recommendation_objective(t, store, batch);
      const double total = t.scalar(o.total);
      train_detail::check_finite(total, "J_CL_R", epoch, b++);
      t.backward(o.total);
      adam_step(store, adam);
      e.rec_total += total;
      e.rec_task += t.scalar(o.task);
      if (o.contrastive) e.contrastive += t.scalar(*o.contrastive);
    }
    if (cfg.conv_task && !conv_pool.empty()) {
      shuffle_indices(conv_pool, rng);
      b = 0;
      for (const auto& batch : train_detail::batches(conv_pool, cfg.batch_size)) {
        ad::Tape t;
        auto o = model.conversation_objective(t, store, batch);
        const double total = t.scalar(o.total);
        train_detail::check_finite(total, "J_CL_C", epoch, b++);
        t.backward(o.total);
        adam_step(store, adam);
        e.conv_total += total;
        e.conv_task += t.scalar(o.task);
      }
    }
    if (log) *log << epoch_log_line(e) << '\n';
    history.push_back(e);
  }
  return history;
}

}  // namespace hyfair
