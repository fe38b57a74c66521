#include "disco/predict.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <json.hpp>

namespace disco {

using ojson = nlohmann::ordered_json;

Aggregation aggregation_from_string(const std::string& s) {
  if (s == "expectation") return Aggregation::expectation;
  if (s == "majority" || s == "majority_vote") return Aggregation::majority_vote;
  throw std::runtime_error("unknown aggregation: '" + s + "'");
}

const char* to_string(Aggregation a) {
  return a == Aggregation::expectation ? "expectation" : "majority_vote";
}

std::size_t label_from_distribution(const Vec& dist, const LabelSpace& ls) {
  if (dist.size() != ls.size())
    throw std::invalid_argument("label_from_distribution: distribution width mismatch");
  if (!ls.ordinal) {
    std::size_t best = 0;
    for (std::size_t k = 1; k < dist.size(); ++k) {
      if (dist[k] > dist[best]) best = k;
    }
    return best;
  }
  double expected = 0.0;
  for (std::size_t k = 0; k < dist.size(); ++k) expected += ls.values[k] * dist[k];
  std::size_t best = 0;
  double best_d = std::fabs(expected - ls.values[0]);
  for (std::size_t k = 1; k < dist.size(); ++k) {
    const double d = std::fabs(expected - ls.values[k]);
    if (d < best_d) {  // strict: ties stay on the lower label
      best = k;
      best_d = d;
    }
  }
  return best;
}

PairPrediction predict_pair(const DiscoParams& p, const DiscoConfig& cfg, const Vec& x,
                            const Vec& a, const LabelSpace& ls) {
  ForwardTrace t = forward(p, cfg, x, a);
  PairPrediction out;
  out.label = label_from_distribution(t.z_y, ls);
  out.dist = std::move(t.z_y);
  return out;
}

namespace {

// Chunked parallel loop with deterministic per-chunk outputs.
template <typename Fn>
void for_chunks(std::size_t n, std::size_t threads, Fn&& fn) {
  if (threads <= 1 || n <= 1) {
    fn(0, n, 0);
    return;
  }
  const std::size_t workers = std::min(threads, n);
  const std::size_t chunk = (n + workers - 1) / workers;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    const std::size_t lo = w * chunk;
    const std::size_t hi = std::min(n, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([&fn, lo, hi, w] { fn(lo, hi, w); });
  }
  for (auto& th : pool) th.join();
}

}  // namespace

Vec predict_item_tiled(const DiscoParams& p, const DiscoConfig& cfg, const Vec& x,
                       const FeatureMatrix& annot_feats, Aggregation agg,
                       const LabelSpace& ls, std::size_t threads) {
  const std::size_t n_annot = annot_feats.rows.size();
  if (n_annot == 0) throw std::runtime_error("predict_item_tiled: empty annotator set");
  const std::size_t c = cfg.num_classes;

  std::vector<Vec> partial_sum(std::max<std::size_t>(threads, 1), Vec(c, 0.0));
  std::vector<std::vector<std::size_t>> partial_votes(std::max<std::size_t>(threads, 1),
                                                      std::vector<std::size_t>(c, 0));
  for_chunks(n_annot, threads, [&](std::size_t lo, std::size_t hi, std::size_t w) {
    for (std::size_t n = lo; n < hi; ++n) {
      ForwardTrace t = forward(p, cfg, x, annot_feats.rows[n]);
      if (agg == Aggregation::expectation) {
        for (std::size_t k = 0; k < c; ++k) partial_sum[w][k] += t.z_y[k];
      } else {
        ++partial_votes[w][label_from_distribution(t.z_y, ls)];
      }
    }
  });

  Vec soft(c, 0.0);
  if (agg == Aggregation::expectation) {
    for (const auto& ps : partial_sum)
      for (std::size_t k = 0; k < c; ++k) soft[k] += ps[k];
    for (double& v : soft) v /= double(n_annot);
  } else {
    for (const auto& pv : partial_votes)
      for (std::size_t k = 0; k < c; ++k) soft[k] += double(pv[k]);
    for (double& v : soft) v /= double(n_annot);
  }
  return soft;
}

PredictionSet predict_tasks(const AnnotationDataset& view, const FeatureMatrix& item_feats,
                            const FeatureMatrix& annot_feats, const DiscoParams& p,
                            const DiscoConfig& cfg, Aggregation agg,
                            const std::vector<bool>* annotator_seen, std::size_t threads) {
  if (item_feats.rows.size() != view.num_items())
    throw std::runtime_error("predict_tasks: item features missing for some items");
  if (annot_feats.rows.size() != view.num_annotators())
    throw std::runtime_error("predict_tasks: annotator features missing for some annotators");

  PredictionSet out;
  out.aggregation = agg;
  const LabelSpace& ls = view.label_space;

  // Task A: tiled soft label per item.
  std::vector<Vec> expectation(view.num_items());
  for (std::size_t m = 0; m < view.num_items(); ++m) {
    Vec soft = predict_item_tiled(p, cfg, item_feats.rows[m], annot_feats, agg, ls, threads);
    if (agg == Aggregation::expectation) expectation[m] = soft;
    out.soft[view.items[m].item_id] = std::move(soft);
  }

  // Task B: one label per requested (item, annotator) pair. Pairs whose
  // annotator the model never saw fall back to the tiled expectation
  // distribution (computed on demand under majority aggregation).
  for (const auto& r : view.records) {
    const std::string& item_id = view.items[r.item].item_id;
    const std::string& annot_id = view.annotators[r.annotator].annotator_id;
    std::size_t label;
    if (annotator_seen && !(*annotator_seen)[r.annotator]) {
      if (expectation[r.item].empty()) {
        expectation[r.item] = predict_item_tiled(p, cfg, item_feats.rows[r.item], annot_feats,
                                                 Aggregation::expectation, ls, threads);
      }
      label = label_from_distribution(expectation[r.item], ls);
    } else {
      label = predict_pair(p, cfg, item_feats.rows[r.item], annot_feats.rows[r.annotator], ls)
                  .label;
    }
    out.perspectivist[item_id][annot_id] = label;
  }
  return out;
}

std::string predictions_to_json(const PredictionSet& preds, const LabelSpace& ls) {
  ojson root;
  ojson task_a = ojson::object();
  for (const auto& [item_id, dist] : preds.soft) task_a[item_id] = dist;
  root["task_a"] = std::move(task_a);
  ojson task_b = ojson::object();
  for (const auto& [item_id, by_annot] : preds.perspectivist) {
    ojson m = ojson::object();
    for (const auto& [annot_id, label] : by_annot) m[annot_id] = ls.labels.at(label);
    task_b[item_id] = std::move(m);
  }
  root["task_b"] = std::move(task_b);
  root["aggregation"] = to_string(preds.aggregation);
  root["label_space"] = ls.labels;
  return root.dump(2);
}

PredictionSet predictions_from_json(const std::string& text, const LabelSpace& ls) {
  ojson root;
  try {
    root = ojson::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw std::runtime_error(std::string("malformed predictions JSON: ") + e.what());
  }
  PredictionSet preds;
  if (root.contains("aggregation"))
    preds.aggregation = aggregation_from_string(root["aggregation"].get<std::string>());
  if (root.contains("label_space")) {
    const auto names = root["label_space"].get<std::vector<std::string>>();
    if (names != ls.labels)
      throw std::runtime_error("predictions label space does not match the dataset");
  }
  if (root.contains("task_a")) {
    for (const auto& [item_id, dist] : root["task_a"].items()) {
      Vec v = dist.get<Vec>();
      if (v.size() != ls.size())
        throw std::runtime_error("prediction for item '" + item_id + "' has wrong width");
      double sum = 0.0;
      for (double e : v) {
        if (!(e >= 0.0) || !std::isfinite(e))
          throw std::runtime_error("prediction for item '" + item_id +
                                   "' has a negative or non-finite entry");
        sum += e;
      }
      if (std::fabs(sum - 1.0) > 1e-6)
        throw std::runtime_error("prediction for item '" + item_id + "' does not sum to 1");
      preds.soft[item_id] = std::move(v);
    }
  }
  if (root.contains("task_b")) {
    for (const auto& [item_id, by_annot] : root["task_b"].items()) {
      for (const auto& [annot_id, label] : by_annot.items()) {
        preds.perspectivist[item_id][annot_id] = ls.index_of(label.get<std::string>());
      }
    }
  }
  return preds;
}

void save_predictions(const PredictionSet& preds, const LabelSpace& ls,
                      const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write predictions file: " + path);
  out << predictions_to_json(preds, ls) << "\n";
}

PredictionSet load_predictions(const std::string& path, const LabelSpace& ls) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open predictions file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return predictions_from_json(buf.str(), ls);
}

}  // namespace disco
