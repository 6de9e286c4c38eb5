// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdio>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

#include "corpg/diversity.hpp"
#include "corpg/log.hpp"
#include "corpg/model/checkpoint.hpp"
#include "corpg/optimizer.hpp"
#include "corpg/random.hpp"

namespace corpg {

struct TrainConfig {
  AdamConfig adam{};
  std::size_t batch_size = 8;  // documents
  long max_steps = 1000;
  long log_every = 50;
  long checkpoint_every = 0;  // 0: only the final checkpoint
  std::uint64_t seed = 1;
  std::string out_dir;  // empty: nothing written
  double stop_at_token_acc = 0.0;  // > 0: stop at a logged step once teacher-forced accuracy on data reaches it

  void validate() const {
    adam.validate();
    if (!(adam.clip > 0.0)) throw ContractError("train: clip must be positive");
    if (batch_size == 0) throw ContractError("train: batch_size must be >= 1");
    if (max_steps < 1) throw ContractError("train: max_steps must be >= 1");
    if (log_every < 1) throw ContractError("train: log_every must be >= 1");
    if (checkpoint_every < 0) throw ContractError("train: checkpoint_every must be >= 0");
    if (!(stop_at_token_acc >= 0.0 && stop_at_token_acc <= 1.0)) {
      throw ContractError("train: stop_at_token_acc must lie in [0, 1]");
    }
  }
};

struct TrainLogRow {
  long step = 0;
  double loss = 0.0;
  double token_acc = 0.0;
  double lr = 0.0;
};

struct TrainResult {
  std::vector<TrainLogRow> log;
  long steps = 0;
};

/// Fraction of steps whose argmax (smallest id on ties) equals the target.
inline double token_accuracy(const Tensor& probs, const std::vector<int>& target) {
  std::size_t hit = 0;
  for (std::size_t t = 0; t < target.size(); ++t) {
    std::size_t best = 0;
    for (std::size_t v = 1; v < probs.cols(); ++v) {
      if (probs.at(t, v) > probs.at(t, best)) best = v;
    }
    if (static_cast<int>(best) == target[t]) ++hit;
  }
  return target.empty() ? 0.0 : static_cast<double>(hit) / static_cast<double>(target.size());
}

struct TeacherForcedScore {
  double loss = 0.0;       // unweighted mean NLL over documents
  double token_acc = 0.0;  // pooled over all steps
};

/// Eval-mode teacher-forced loss and token accuracy.
inline TeacherForcedScore evaluate_teacher_forced(const CorpgModel& model, const std::vector<TrainingExample>& data) {
  Tape::Pause pause;
  TeacherForcedScore s;
  std::size_t hit = 0, total = 0;
  for (const auto& ex : data) {
    ForwardContext ctx;
    Tensor probs = model.forward_teacher_forced(ex, ctx).probs;
    std::vector<double> ones(ex.target.size(), 1.0);
    s.loss += weighted_nll(probs, ex.target, ones).item();
    const double acc = token_accuracy(probs, ex.target);
    hit += static_cast<std::size_t>(std::lround(acc * static_cast<double>(ex.target.size())));
    total += ex.target.size();
  }
  if (!data.empty()) s.loss /= static_cast<double>(data.size());
  s.token_acc = total == 0 ? 0.0 : static_cast<double>(hit) / static_cast<double>(total);
  return s;
}

/// Mean over the batch of each document's weighted mean NLL, recorded on the
/// active tape.
inline Tensor batch_loss(const CorpgModel& model, const std::vector<const TrainingExample*>& batch,
                         const std::vector<std::vector<double>>& weights, ForwardContext& ctx,
                         double* token_acc = nullptr) {
  Tensor total;
  std::size_t hit = 0, steps = 0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    Tensor probs = model.forward_teacher_forced(*batch[i], ctx).probs;
    Tensor l = weighted_nll(probs, batch[i]->target, weights[i]);
    total = i == 0 ? l : add(total, l);
    if (token_acc) {
      hit += static_cast<std::size_t>(
          std::lround(token_accuracy(probs, batch[i]->target) * static_cast<double>(batch[i]->target.size())));
      steps += batch[i]->target.size();
    }
  }
  if (token_acc) *token_acc = steps == 0 ? 0.0 : static_cast<double>(hit) / static_cast<double>(steps);
  return scale(total, 1.0 / static_cast<double>(batch.size()));
}

inline std::string format_log_row(const TrainLogRow& r) {
  char buf[128];
  std::snprintf(buf, sizeof buf, "%ld,%.17g,%.17g,%.17g\n", r.step, r.loss, r.token_acc, r.lr);
  return buf;
}

/// Teacher-forced training with per-epoch reshuffling. Files (when out_dir is
/// set): metrics.csv, checkpoint-<step>.bin at the cadence, model.bin at the end.
inline TrainResult train(CorpgModel& model, const std::vector<TrainingExample>& data, const TrainConfig& tcfg,
                         const DiversityConfig& dcfg,
                         const std::function<void(const TrainLogRow&)>& on_log = nullptr) {
  tcfg.validate();
  dcfg.validate();
  if (data.empty()) throw DataError("train: empty corpus");

  std::vector<std::vector<double>> weights;
  weights.reserve(data.size());
  for (const auto& ex : data) weights.push_back(step_weights(ex, dcfg));

  Rng shuffle_rng(tcfg.seed + seed_offset::shuffle);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  std::size_t cursor = order.size();

  AdamState state;
  TrainResult result;
  std::string csv = "step,loss,token_acc,lr\n";
  const auto dir = tcfg.out_dir.empty() ? std::string() : tcfg.out_dir + "/";
  const double rate = model.config().dropout;

  for (long step = 1; step <= tcfg.max_steps; ++step) {
    std::vector<const TrainingExample*> batch;
    std::vector<std::vector<double>> batch_w;
    while (batch.size() < std::min(tcfg.batch_size, data.size())) {
      if (cursor == order.size()) {
        shuffle_in_place(order, shuffle_rng);
        cursor = 0;
      }
      batch.push_back(&data[order[cursor]]);
      batch_w.push_back(weights[order[cursor]]);
      ++cursor;
    }

    Tape tape;
    double acc = 0.0;
    double loss_value = 0.0;
    {
      Tape::Scope scope(tape);
      ForwardContext ctx(true, rate, tcfg.seed + seed_offset::dropout + static_cast<std::uint64_t>(step) * 7919);
      Tensor loss = batch_loss(model, batch, batch_w, ctx, &acc);
      loss_value = loss.item();
      if (!std::isfinite(loss_value)) throw NumericError("train: non-finite loss at step " + std::to_string(step));
      tape.backward(loss);
    }
    AdamStepInfo info = adam_step(model.params(), state, tcfg.adam);
    tape.clear();

    if (step % tcfg.log_every == 0 || step == tcfg.max_steps || step == 1) {
      TrainLogRow row{step, loss_value, acc, info.lr};
      result.log.push_back(row);
      csv += format_log_row(row);
      log().info("step {} loss {:.5f} acc {:.4f} lr {:.3e}", step, loss_value, acc, info.lr);
      if (on_log) on_log(row);
    }
    if (!dir.empty() && tcfg.checkpoint_every > 0 && step % tcfg.checkpoint_every == 0) {
      save_checkpoint(dir + "checkpoint-" + std::to_string(step) + ".bin", model);
    }
    result.steps = step;
    if (tcfg.stop_at_token_acc > 0.0 && !result.log.empty() && result.log.back().step == step &&
        evaluate_teacher_forced(model, data).token_acc >= tcfg.stop_at_token_acc) {
      break;
    }
  }
  if (!dir.empty()) {
    write_text_file_atomic(dir + "metrics.csv", csv);
    save_checkpoint(dir + "model.bin", model);
  }
  return result;
}

}  // namespace corpg
