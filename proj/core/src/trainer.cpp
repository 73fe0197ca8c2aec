#include "kws/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <set>
#include <stdexcept>

#include "kws/util.hpp"

namespace kws {

namespace {

using Clock = std::chrono::steady_clock;

std::vector<std::size_t> shuffled_order(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  Rng rng(seed);
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const std::size_t j =
        i + rng.next_below(static_cast<std::uint32_t>(n - i));
    std::swap(idx[i], idx[j]);
  }
  return idx;
}

std::uint64_t order_seed(std::uint64_t base, int group_id, int epoch) {
  std::uint64_t h = base ^ kFnvOffset;
  h = fnv1a(h, &group_id, sizeof(group_id));
  h = fnv1a(h, &epoch, sizeof(epoch));
  return h;
}

int argmax_lowest(std::span<const float> logits) {
  int best = 0;
  for (int i = 1; i < static_cast<int>(logits.size()); ++i) {
    if (logits[i] > logits[best]) best = i;
  }
  return best;
}

float ramped_lr(const TrainConfig& cfg, std::int64_t step) {
  if (cfg.warmup_steps <= 0 || step >= cfg.warmup_steps) {
    return cfg.learning_rate;
  }
  return cfg.learning_rate * static_cast<float>(step + 1) /
         static_cast<float>(cfg.warmup_steps);
}

void check_labels(const HeadModel& head,
                  std::span<const AudioExample> data) {
  for (const auto& ex : data) {
    if (ex.label < 0 || ex.label >= head.num_classes) {
      throw std::runtime_error("example label " + std::to_string(ex.label) +
                               " outside head's " +
                               std::to_string(head.num_classes) + " classes");
    }
  }
}

}  // namespace

TrainReport train_multihead(EmbeddingModel& trunk,
                            std::vector<HeadGroup>& groups,
                            const TrainConfig& cfg) {
  if (groups.empty()) {
    throw std::invalid_argument("train_multihead: no head groups");
  }
  if (cfg.freeze_trunk) {
    throw std::invalid_argument("train_multihead: trunk must not be frozen");
  }
  std::set<std::string> seen;
  std::size_t max_group = 0;
  for (const auto& g : groups) {
    if (g.examples.empty()) {
      throw std::invalid_argument("train_multihead: group " +
                                  std::to_string(g.group_id) + " is empty");
    }
    check_labels(g.head, g.examples);
    for (const auto& label : g.target_labels) {
      if (!seen.insert(label).second) {
        throw std::invalid_argument(
            "train_multihead: label '" + label + "' appears in two groups");
      }
    }
    max_group = std::max(max_group, g.examples.size());
  }

  const auto t0 = Clock::now();
  std::vector<float> trunk_params;
  trunk.stack.get_params(trunk_params);
  AdamState trunk_opt(trunk_params.size(), cfg.learning_rate);

  std::vector<std::vector<float>> head_params(groups.size());
  std::vector<AdamState> head_opt;
  head_opt.reserve(groups.size());
  for (std::size_t gi = 0; gi < groups.size(); ++gi) {
    groups[gi].head.get_params(head_params[gi]);
    head_opt.emplace_back(head_params[gi].size(), cfg.learning_rate);
  }

  const int steps_per_epoch = static_cast<int>(
      (max_group + cfg.batch_size - 1) / cfg.batch_size);
  TrainReport report;
  std::vector<float> trunk_grad(trunk_params.size());
  std::vector<float> head_grad;
  std::vector<float> grad_logits;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::vector<std::vector<std::size_t>> orders(groups.size());
    for (std::size_t gi = 0; gi < groups.size(); ++gi) {
      orders[gi] = shuffled_order(groups[gi].examples.size(),
                                  order_seed(cfg.seed, groups[gi].group_id,
                                             epoch));
    }
    double loss_sum = 0.0;
    std::size_t loss_count = 0;
    for (int step = 0; step < steps_per_epoch; ++step) {
      std::fill(trunk_grad.begin(), trunk_grad.end(), 0.0f);
      for (std::size_t gi = 0; gi < groups.size(); ++gi) {
        HeadGroup& g = groups[gi];
        head_grad.assign(head_params[gi].size(), 0.0f);
        int in_batch = 0;
        for (int b = 0; b < cfg.batch_size; ++b) {
          const std::size_t pos =
              (static_cast<std::size_t>(step) * cfg.batch_size + b) %
              g.examples.size();
          const AudioExample& ex = g.examples[orders[gi][pos]];
          Tensor3 input = features_to_tensor(
              std::span<const std::uint8_t>(&ex.features.frames[0][0],
                                            kContextFrames * kNumMelBins),
              kContextFrames);
          StackTape trunk_tape;
          Tensor3 emb = forward_embedding(trunk, input, &trunk_tape);
          HeadTape head_tape;
          std::vector<float> logits = forward_head(g.head, emb, &head_tape);
          const float loss =
              softmax_xent<float>(logits, ex.label, grad_logits);
          loss_sum += loss;
          ++loss_count;
          ++in_batch;
          Tensor3 grad_emb =
              backward_head(g.head, head_tape, grad_logits, head_grad);
          stack_backward(trunk.stack, trunk_tape, std::move(grad_emb),
                         std::span<float>(trunk_grad));
        }
        const float scale = 1.0f / static_cast<float>(in_batch);
        for (auto& v : head_grad) v *= scale;
        head_opt[gi].lr = ramped_lr(cfg, report.steps);
        adam_step(head_params[gi], head_grad, head_opt[gi]);
        g.head.set_params(head_params[gi]);
      }
      const float scale = 1.0f / static_cast<float>(cfg.batch_size);
      for (auto& v : trunk_grad) v *= scale;
      trunk_opt.lr = ramped_lr(cfg, report.steps);
      adam_step(trunk_params, trunk_grad, trunk_opt);
      trunk.stack.set_params(trunk_params);
      ++report.steps;
    }
    report.epoch_loss.push_back(loss_sum / static_cast<double>(loss_count));
  }

  // training accuracy over all groups' own data
  std::size_t correct = 0, total = 0;
  for (const auto& g : groups) {
    for (const auto& ex : g.examples) {
      Tensor3 input = features_to_tensor(
          std::span<const std::uint8_t>(&ex.features.frames[0][0],
                                        kContextFrames * kNumMelBins),
          kContextFrames);
      const std::vector<float> logits =
          forward_head(g.head, forward_embedding(trunk, input));
      correct += (argmax_lowest(logits) == ex.label) ? 1 : 0;
      ++total;
    }
  }
  report.final_train_accuracy =
      total ? static_cast<double>(correct) / static_cast<double>(total) : 0.0;
  report.wall_seconds =
      std::chrono::duration<double>(Clock::now() - t0).count();
  return report;
}

TrainReport train_head(const EmbeddingModel& trunk, HeadModel& head,
                       std::span<const AudioExample> data,
                       const TrainConfig& cfg) {
  if (!cfg.freeze_trunk) {
    throw std::invalid_argument("train_head: freeze_trunk must be set");
  }
  if (data.empty()) throw std::invalid_argument("train_head: no data");
  check_labels(head, data);

  const auto t0 = Clock::now();
  // trunk is frozen, so embeddings are computed once and reused every epoch
  std::vector<Tensor3> cached;
  cached.reserve(data.size());
  for (const auto& ex : data) {
    Tensor3 input = features_to_tensor(
        std::span<const std::uint8_t>(&ex.features.frames[0][0],
                                      kContextFrames * kNumMelBins),
        kContextFrames);
    cached.push_back(forward_embedding(trunk, input));
  }

  std::vector<float> params;
  head.get_params(params);
  AdamState opt(params.size(), cfg.learning_rate);
  std::vector<float> grad(params.size());
  std::vector<float> grad_logits;

  TrainReport report;
  const int steps_per_epoch = static_cast<int>(
      (data.size() + cfg.batch_size - 1) / cfg.batch_size);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const std::vector<std::size_t> order =
        shuffled_order(data.size(), order_seed(cfg.seed, 0, epoch));
    double loss_sum = 0.0;
    std::size_t loss_count = 0;
    for (int step = 0; step < steps_per_epoch; ++step) {
      std::fill(grad.begin(), grad.end(), 0.0f);
      int in_batch = 0;
      for (int b = 0; b < cfg.batch_size; ++b) {
        const std::size_t pos =
            static_cast<std::size_t>(step) * cfg.batch_size + b;
        if (pos >= data.size()) break;
        const std::size_t i = order[pos];
        HeadTape tape;
        std::vector<float> logits = forward_head(head, cached[i], &tape);
        loss_sum += softmax_xent<float>(logits, data[i].label, grad_logits);
        ++loss_count;
        ++in_batch;
        backward_head(head, tape, grad_logits, grad);
      }
      if (in_batch == 0) continue;
      const float scale = 1.0f / static_cast<float>(in_batch);
      for (auto& v : grad) v *= scale;
      opt.lr = ramped_lr(cfg, report.steps);
      adam_step(params, grad, opt);
      head.set_params(params);
      ++report.steps;
    }
    report.epoch_loss.push_back(loss_sum / static_cast<double>(loss_count));
  }

  std::size_t correct = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const std::vector<float> logits = forward_head(head, cached[i]);
    correct += (argmax_lowest(logits) == data[i].label) ? 1 : 0;
  }
  report.final_train_accuracy =
      static_cast<double>(correct) / static_cast<double>(data.size());
  report.wall_seconds =
      std::chrono::duration<double>(Clock::now() - t0).count();
  return report;
}

double evaluate_accuracy(const EmbeddingModel& trunk, const HeadModel& head,
                         std::span<const AudioExample> dataset) {
  if (dataset.empty()) {
    throw std::invalid_argument("evaluate_accuracy: empty dataset");
  }
  check_labels(head, dataset);
  std::size_t correct = 0;
  for (const auto& ex : dataset) {
    Tensor3 input = features_to_tensor(
        std::span<const std::uint8_t>(&ex.features.frames[0][0],
                                      kContextFrames * kNumMelBins),
        kContextFrames);
    const std::vector<float> logits =
        forward_head(head, forward_embedding(trunk, input));
    correct += (argmax_lowest(logits) == ex.label) ? 1 : 0;
  }
  return static_cast<double>(correct) / static_cast<double>(dataset.size());
}

}  // namespace kws
