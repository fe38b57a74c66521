#pragma once

#include <optional>
#include <string>
#include <vector>

#include "disco/corpus.hpp"
#include "disco/features.hpp"
#include "disco/model.hpp"
#include "disco/objective.hpp"

namespace disco {

enum class SelectionMetric { soft, perspectivist, loss };

SelectionMetric selection_metric_from_string(const std::string& s);
const char* to_string(SelectionMetric m);

struct TrainConfig {
  std::size_t epochs = 100;
  std::size_t batch_size = 64;
  double lr = 1e-3;
  LossConfig loss;
  std::uint64_t shuffle_seed = 0;
  std::size_t eval_every = 1;  // dev evaluation every this many epochs
  SelectionMetric selection_metric = SelectionMetric::soft;
  std::size_t threads = 1;

  void validate() const;
};

struct EpochStats {
  std::size_t epoch = 0;
  double loss = 0.0;
  std::string objective;
  std::optional<double> dev_soft;
  std::optional<double> dev_pe;
  double seconds = 0.0;
};

struct TrainReport {
  std::vector<EpochStats> epochs;
  std::size_t best_epoch = 0;
  std::size_t optimizer_steps = 0;

  // CSV columns: epoch,loss,objective,dev_soft,dev_pe
  std::string to_csv() const;
  void save_csv(const std::string& path) const;
};

// Everything needed to continue a run exactly where it stopped.
struct Checkpoint {
  DiscoConfig config;
  DiscoParams params;  // parameters after the last completed epoch
  AdamState opt;
  std::size_t epochs_done = 0;
  bool has_best = false;
  DiscoParams best_params;
  double best_score = 0.0;
  std::size_t best_epoch = 0;
};

// Binary round-trips bit-identically.
void save_checkpoint(const Checkpoint& ck, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

struct TrainResult {
  DiscoParams params;  // selected parameters (best epoch per selection metric)
  TrainReport report;
  Checkpoint state;
};

// Mini-batch training over the observed train-split triples of `ds`.
// item_feats rows are indexed like ds.items, annot_feats like ds.annotators.
// Histograms are computed once from the train split and frozen.
TrainResult train(const AnnotationDataset& ds, const FeatureMatrix& item_feats,
                  const FeatureMatrix& annot_feats, const DiscoConfig& cfg,
                  const TrainConfig& tc);

// Continues training from a checkpoint up to tc.epochs. With matching seeds
// the result is identical to an uninterrupted run. Already-complete
// checkpoints are returned as-is.
TrainResult resume(const Checkpoint& ck, const AnnotationDataset& ds,
                   const FeatureMatrix& item_feats, const FeatureMatrix& annot_feats,
                   const TrainConfig& tc);
TrainResult resume(const std::string& checkpoint_path, const AnnotationDataset& ds,
                   const FeatureMatrix& item_feats, const FeatureMatrix& annot_feats,
                   const TrainConfig& tc);

}  // namespace disco
