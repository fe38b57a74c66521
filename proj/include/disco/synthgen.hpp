#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "disco/corpus.hpp"
#include "disco/features.hpp"
#include "disco/matrix.hpp"

namespace disco {

// Generative model with known ground truth: each item has a latent class,
// features cluster around per-class centroids, and each annotator labels
// through its own row-stochastic confusion matrix.
struct GeneratorSpec {
  std::size_t items = 0;                 // M
  std::size_t annotators = 0;            // N
  std::size_t classes = 0;               // C
  std::size_t annotations_per_item = 0;  // sampled without replacement
  std::vector<Matrix> reliability;       // per-annotator C x C confusion
  Vec class_prior;                       // simplex over C
  std::size_t feature_dim = 0;           // J
  double cluster_noise = 0.0;
  std::uint64_t seed = 0;
  bool ordinal = false;
  double train_fraction = 0.8;
  double dev_fraction = 0.1;  // remainder is test

  void validate() const;

  // diag on the diagonal, remaining mass uniform off-diagonal
  static Matrix diagonal_confusion(std::size_t classes, double diag);
};

struct SyntheticCorpus {
  AnnotationDataset dataset;
  FeatureMatrix item_features;       // rows aligned with dataset.items
  FeatureMatrix annotator_features;  // one-hot
  std::vector<Vec> true_posteriors;  // generator-exact per-item label marginal
};

SyntheticCorpus generate(const GeneratorSpec& spec);

GeneratorSpec generator_spec_from_json(const std::string& text);
GeneratorSpec load_generator_spec(const std::string& path);

// Writes dataset.json, item_features.tsv, annotator_features.tsv and
// true_posteriors.json into the directory.
void write_corpus_files(const SyntheticCorpus& corpus, const std::string& dir);

}  // namespace disco
