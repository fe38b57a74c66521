#pragma once

#include <map>
#include <string>

#include "disco/corpus.hpp"
#include "disco/features.hpp"
#include "disco/model.hpp"

namespace disco {

enum class Aggregation { expectation, majority_vote };

Aggregation aggregation_from_string(const std::string& s);
const char* to_string(Aggregation a);

// item_id -> annotator_id -> label index
using PairLabels = std::map<std::string, std::map<std::string, std::size_t>>;

struct PredictionSet {
  std::map<std::string, Vec> soft;  // item_id -> length-C simplex
  PairLabels perspectivist;
  Aggregation aggregation = Aggregation::expectation;
};

struct PairPrediction {
  Vec dist;
  std::size_t label;
};

// Label rule: argmax for categorical spaces; for ordinal spaces the label
// whose value is nearest to the expected label value, ties to the lower one.
std::size_t label_from_distribution(const Vec& dist, const LabelSpace& ls);

PairPrediction predict_pair(const DiscoParams& p, const DiscoConfig& cfg, const Vec& x,
                            const Vec& a, const LabelSpace& ls);

// Runs the decoder once per annotator row and aggregates into one item-level
// distribution: the mean of the per-annotator distributions (expectation) or
// the normalized histogram of their predicted labels (majority_vote).
Vec predict_item_tiled(const DiscoParams& p, const DiscoConfig& cfg, const Vec& x,
                       const FeatureMatrix& annot_feats, Aggregation agg,
                       const LabelSpace& ls, std::size_t threads = 1);

// Full inference over one dataset view. item_feats rows are indexed like
// view.items; annot_feats rows cover the shared annotator index space.
// annotator_seen, when given, marks annotators the model was trained on;
// pairs with an unseen annotator fall back to the tiled expectation
// distribution with the label rule applied to it.
PredictionSet predict_tasks(const AnnotationDataset& view, const FeatureMatrix& item_feats,
                            const FeatureMatrix& annot_feats, const DiscoParams& p,
                            const DiscoConfig& cfg, Aggregation agg,
                            const std::vector<bool>* annotator_seen = nullptr,
                            std::size_t threads = 1);

std::string predictions_to_json(const PredictionSet& preds, const LabelSpace& ls);
PredictionSet predictions_from_json(const std::string& text, const LabelSpace& ls);
void save_predictions(const PredictionSet& preds, const LabelSpace& ls,
                      const std::string& path);
PredictionSet load_predictions(const std::string& path, const LabelSpace& ls);

}  // namespace disco
