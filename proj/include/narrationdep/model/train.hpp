#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "narrationdep/core/adam.hpp"
#include "narrationdep/eval/metrics.hpp"
#include "narrationdep/model/model.hpp"

namespace narrationdep {

struct TrainConfig {
  double lr = 0.001;
  double dropout = 0.5;
  std::size_t epochs = 30;
  std::size_t batch_size = 16;
  std::uint64_t seed = 0;
  std::size_t d_h = 8;
  std::size_t d_a = 0;  // 0 -> d_h
  std::size_t d_p = 0;  // 0 -> 2 d_h
  std::size_t e_max = kDefaultEMax;
  bool share_word = true;
  Branches branches = Branches::Joint;
  std::size_t early_stopping_patience = 0;  // 0 disables; needs validation data

  void validate() const {
    if (!(lr >= 0)) throw ConfigError("lr must be non-negative");
    if (dropout < 0 || dropout >= 1) throw ConfigError("dropout must lie in [0, 1)");
    if (batch_size == 0) throw ConfigError("batch_size must be positive");
    if (d_h == 0) throw ConfigError("d_h must be positive");
    if (e_max == 0) throw ConfigError("e_max must be positive");
  }

  ModelDims dims(std::size_t d_w) const { return {d_w, d_h, d_a, d_p, share_word}; }
};

struct LabelledSet {
  const std::vector<UserRecord>* users = nullptr;
  const std::vector<ClusterAssignment>* assignments = nullptr;
};

struct TrainResult {
  ModelParams params;
  std::vector<double> epoch_loss;  // mean per-user training loss of each epoch
  std::size_t best_epoch = 0;      // meaningful with early stopping
};

inline double f1_on(const LabelledSet& set, const ModelParams& m, Branches branches) {
  std::vector<int> labels;
  for (const auto& u : *set.users) labels.push_back(to_int(u.label));
  return prf1_accuracy(confusion(threshold(predict(*set.users, *set.assignments, m, branches)), labels)).f1;
}

/// Mini-batch Adam on mean batch BCE, users visited in a seeded shuffled
/// order each epoch. Single-threaded; bit-identical for identical inputs.
inline TrainResult train(const std::vector<UserRecord>& users, const std::vector<ClusterAssignment>& assignments,
                         const TrainConfig& cfg, std::size_t d_w, const LabelledSet* validation = nullptr,
                         const ModelParams* init = nullptr) {
  cfg.validate();
  if (users.empty()) throw PreconditionError("train: empty training set");
  if (assignments.size() != users.size()) throw ConsistencyError("train: one cluster assignment per user required");

  TrainResult res;
  res.params = init ? *init : ModelParams::init(cfg.dims(d_w), derive_seed(cfg.seed, "init"), cfg.branches);
  ModelParams& m = res.params;
  ModelParams grads = zeros_like(m);
  const ParamRefs p_refs = param_refs(m);
  const ParamRefs g_refs = param_refs(grads);
  AdamState adam;
  adam.lr = cfg.lr;

  const bool early = cfg.early_stopping_patience > 0 && validation && validation->users &&
                     !validation->users->empty();
  ModelParams best = m;
  double best_f1 = -1;
  std::size_t since_best = 0;

  std::vector<std::size_t> order(users.size());
  std::iota(order.begin(), order.end(), 0);
  Rng shuffle_rng(derive_seed(cfg.seed, "shuffle"));
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    double epoch_total = 0;
    for (std::size_t start = 0, batch = 0; start < order.size(); start += cfg.batch_size, ++batch) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      for (auto& r : g_refs) r.tensor->fill(Real(0));
      double batch_loss = 0;
      const double inv = 1.0 / static_cast<double>(end - start);
      for (std::size_t k = start; k < end; ++k) {
        const std::size_t i = order[k];
        ForwardOptions opt;
        opt.mode = Mode::Train;
        opt.dropout = cfg.dropout;
        opt.branches = cfg.branches;
        opt.seed = derive_seed(cfg.seed, "dropout", epoch * users.size() + i);
        const auto fr = forward_user(users[i], assignments[i], m, opt, true);
        const int y = to_int(users[i].label);
        batch_loss += bce_loss(fr.y_hat, y);
        backward_user(fr, m, bce_grad_logit(fr.y_hat, y) * inv, grads, cfg.branches);
      }
      if (!std::isfinite(batch_loss)) {
        throw NumericalError("train: non-finite loss in epoch " + std::to_string(epoch) + " batch " +
                             std::to_string(batch));
      }
      for (const auto& r : g_refs) {
        if (!all_finite(r.tensor->data())) {
          throw NumericalError("train: non-finite gradient for '" + r.name + "' in epoch " +
                               std::to_string(epoch) + " batch " + std::to_string(batch));
        }
      }
      adam_step(p_refs, g_refs, adam);
      epoch_total += batch_loss;
    }
    res.epoch_loss.push_back(epoch_total / static_cast<double>(users.size()));

    if (early) {
      const double f1 = f1_on(*validation, m, cfg.branches);
      if (f1 > best_f1) {
        best_f1 = f1;
        best = m;
        res.best_epoch = epoch;
        since_best = 0;
      } else if (++since_best >= cfg.early_stopping_patience) {
        break;
      }
    }
  }
  if (early) m = std::move(best);
  else res.best_epoch = res.epoch_loss.empty() ? 0 : res.epoch_loss.size() - 1;
  return res;
}

}  // namespace narrationdep
