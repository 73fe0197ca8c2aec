#ifndef KWS_TRAINER_HPP
#define KWS_TRAINER_HPP

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "kws/data.hpp"
#include "kws/model.hpp"

namespace kws {

// One parallel training task: a head plus its slice of the data. Example
// label indices are local to target_labels (the optional non-target class is
// index target_labels.size()).
struct HeadGroup {
  int group_id = 0;
  std::vector<std::string> target_labels;
  HeadModel head;
  std::vector<AudioExample> examples;
};

struct TrainConfig {
  int batch_size = 16;
  int epochs = 5;
  float learning_rate = 1e-3f;
  int warmup_steps = 0;  // linear ramp to learning_rate over this many steps
  std::uint64_t seed = 1;
  bool freeze_trunk = false;
  bool non_target_class = false;
};

struct TrainReport {
  std::vector<double> epoch_loss;  // mean per-example loss
  double final_train_accuracy = 0.0;
  double wall_seconds = 0.0;
  std::int64_t steps = 0;
};

// Multi-head pretraining: every step takes one batch per group, sums the
// per-head trunk gradients and applies a single trunk update; each head only
// sees its own gradient. Heads are trained in place and may be discarded.
TrainReport train_multihead(EmbeddingModel& trunk,
                            std::vector<HeadGroup>& groups,
                            const TrainConfig& cfg);

// Frozen-trunk transfer: embeddings are computed once per example and cached;
// trunk parameters are bitwise unchanged.
TrainReport train_head(const EmbeddingModel& trunk, HeadModel& head,
                       std::span<const AudioExample> data,
                       const TrainConfig& cfg);

// Top-1 accuracy, ties broken toward the lowest class index.
double evaluate_accuracy(const EmbeddingModel& trunk, const HeadModel& head,
                         std::span<const AudioExample> dataset);

}  // namespace kws

#endif
