#include "disco/trainer.hpp"

#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "disco/logging.hpp"
#include "disco/metrics.hpp"
#include "disco/predict.hpp"
#include "disco/rng.hpp"

namespace disco {

SelectionMetric selection_metric_from_string(const std::string& s) {
  if (s == "soft") return SelectionMetric::soft;
  if (s == "perspectivist") return SelectionMetric::perspectivist;
  if (s == "loss") return SelectionMetric::loss;
  throw std::runtime_error("unknown selection metric: '" + s + "'");
}

const char* to_string(SelectionMetric m) {
  switch (m) {
    case SelectionMetric::soft: return "soft";
    case SelectionMetric::perspectivist: return "perspectivist";
    case SelectionMetric::loss: return "loss";
  }
  return "?";
}

void TrainConfig::validate() const {
  if (epochs < 1) throw std::runtime_error("train config: epochs must be >= 1");
  if (batch_size < 1) throw std::runtime_error("train config: batch_size must be >= 1");
  if (eval_every < 1) throw std::runtime_error("train config: eval_every must be >= 1");
  if (!(lr >= 0.0) || !std::isfinite(lr))
    throw std::runtime_error("train config: lr must be finite and >= 0");
  loss.validate();
}

std::string TrainReport::to_csv() const {
  std::ostringstream os;
  os << "epoch,loss,objective,dev_soft,dev_pe\n";
  os.precision(17);
  for (const auto& e : epochs) {
    os << e.epoch << ',' << e.loss << ',' << e.objective << ',';
    if (e.dev_soft) os << *e.dev_soft;
    os << ',';
    if (e.dev_pe) os << *e.dev_pe;
    os << '\n';
  }
  return os.str();
}

void TrainReport::save_csv(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write report file: " + path);
  out << to_csv();
}

// ---------------------------------------------------------------------------
// checkpoint binary format

namespace {

constexpr char kMagic[8] = {'D', 'I', 'S', 'C', 'O', 'C', 'K', '1'};
constexpr std::uint32_t kVersion = 1;

void put_u64(std::ostream& os, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 8);
}

void put_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 4);
}

void put_f64(std::ostream& os, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, 8);
  put_u64(os, bits);
}

std::uint64_t get_u64(std::istream& is) {
  unsigned char b[8];
  if (!is.read(reinterpret_cast<char*>(b), 8))
    throw std::runtime_error("checkpoint truncated");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= std::uint64_t(b[i]) << (8 * i);
  return v;
}

std::uint32_t get_u32(std::istream& is) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4))
    throw std::runtime_error("checkpoint truncated");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= std::uint32_t(b[i]) << (8 * i);
  return v;
}

double get_f64(std::istream& is) {
  const std::uint64_t bits = get_u64(is);
  double v;
  std::memcpy(&v, &bits, 8);
  return v;
}

void put_matrix(std::ostream& os, const Matrix& m) {
  put_u64(os, m.rows());
  put_u64(os, m.cols());
  for (std::size_t k = 0; k < m.size(); ++k) put_f64(os, m.at_flat(k));
}

Matrix get_matrix(std::istream& is) {
  const std::size_t rows = get_u64(is);
  const std::size_t cols = get_u64(is);
  if (rows > (1u << 24) || cols > (1u << 24))
    throw std::runtime_error("checkpoint matrix shape implausible");
  Matrix m(rows, cols);
  for (std::size_t k = 0; k < m.size(); ++k) m.at_flat(k) = get_f64(is);
  return m;
}

void put_params(std::ostream& os, const DiscoParams& p) {
  p.for_each([&](const char*, const Matrix& m) { put_matrix(os, m); });
}

DiscoParams get_params(std::istream& is) {
  DiscoParams p;
  p.for_each([&](const char*, Matrix& m) { m = get_matrix(is); });
  return p;
}

void put_gradset(std::ostream& os, const GradientSet& g) {
  g.for_each([&](const Matrix& m) { put_matrix(os, m); });
}

GradientSet get_gradset(std::istream& is) {
  GradientSet g;
  g.for_each([&](Matrix& m) { m = get_matrix(is); });
  return g;
}

void put_config(std::ostream& os, const DiscoConfig& cfg) {
  put_u64(os, cfg.item_input_dim);
  put_u64(os, cfg.annot_input_dim);
  put_u64(os, cfg.item_latent_dim);
  put_u64(os, cfg.annot_latent_dim);
  put_u64(os, cfg.hidden_dim);
  put_u64(os, cfg.num_classes);
  put_u32(os, static_cast<std::uint32_t>(cfg.activation));
  put_u32(os, static_cast<std::uint32_t>(cfg.fusion));
  put_u32(os, static_cast<std::uint32_t>(cfg.init));
  put_u32(os, cfg.init_scale ? 1 : 0);
  put_f64(os, cfg.init_scale ? *cfg.init_scale : 0.0);
  put_u64(os, cfg.seed);
}

DiscoConfig get_config(std::istream& is) {
  DiscoConfig cfg;
  cfg.item_input_dim = get_u64(is);
  cfg.annot_input_dim = get_u64(is);
  cfg.item_latent_dim = get_u64(is);
  cfg.annot_latent_dim = get_u64(is);
  cfg.hidden_dim = get_u64(is);
  cfg.num_classes = get_u64(is);
  cfg.activation = static_cast<Activation>(get_u32(is));
  cfg.fusion = static_cast<Fusion>(get_u32(is));
  cfg.init = static_cast<WeightInit>(get_u32(is));
  const bool has_scale = get_u32(is) != 0;
  const double scale = get_f64(is);
  if (has_scale) cfg.init_scale = scale;
  cfg.seed = get_u64(is);
  return cfg;
}

}  // namespace

void save_checkpoint(const Checkpoint& ck, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write checkpoint: " + path);
  os.write(kMagic, 8);
  put_u32(os, kVersion);
  put_config(os, ck.config);
  put_params(os, ck.params);
  put_u64(os, ck.opt.t);
  put_f64(os, ck.opt.lr);
  put_f64(os, ck.opt.beta1);
  put_f64(os, ck.opt.beta2);
  put_f64(os, ck.opt.eps);
  put_gradset(os, ck.opt.m);
  put_gradset(os, ck.opt.v);
  put_u64(os, ck.epochs_done);
  put_u32(os, ck.has_best ? 1 : 0);
  if (ck.has_best) {
    put_params(os, ck.best_params);
    put_f64(os, ck.best_score);
    put_u64(os, ck.best_epoch);
  }
  if (!os) throw std::runtime_error("failed writing checkpoint: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open checkpoint: " + path);
  char magic[8];
  if (!is.read(magic, 8) || std::memcmp(magic, kMagic, 8) != 0)
    throw std::runtime_error("checkpoint version error: bad magic in " + path);
  const std::uint32_t version = get_u32(is);
  if (version != kVersion)
    throw std::runtime_error("checkpoint version error: unsupported version " +
                             std::to_string(version));
  Checkpoint ck;
  ck.config = get_config(is);
  ck.config.validate();
  ck.params = get_params(is);
  ck.params.validate_shapes(ck.config);
  ck.opt.t = get_u64(is);
  ck.opt.lr = get_f64(is);
  ck.opt.beta1 = get_f64(is);
  ck.opt.beta2 = get_f64(is);
  ck.opt.eps = get_f64(is);
  ck.opt.m = get_gradset(is);
  ck.opt.v = get_gradset(is);
  ck.epochs_done = get_u64(is);
  ck.has_best = get_u32(is) != 0;
  if (ck.has_best) {
    ck.best_params = get_params(is);
    ck.best_params.validate_shapes(ck.config);
    ck.best_score = get_f64(is);
    ck.best_epoch = get_u64(is);
  }
  return ck;
}

// ---------------------------------------------------------------------------
// training loop

namespace {

struct DevContext {
  AnnotationDataset view;
  FeatureMatrix item_feats;
  EvalConfig eval_cfg;
};

TrainResult run_epochs(Checkpoint ck, const AnnotationDataset& ds,
                       const FeatureMatrix& item_feats, const FeatureMatrix& annot_feats,
                       const TrainConfig& tc) {
  const DiscoConfig& cfg = ck.config;
  const LabelSpace& ls = ds.label_space;

  // Frozen targets: histograms from the train split only.
  AnnotationDataset train = split_view(ds, Split::train);
  std::vector<std::size_t> train_item_source;
  {
    // map view item index -> full-ds index so features line up
    std::size_t cursor = 0;
    train_item_source.resize(train.num_items());
    for (std::size_t m = 0; m < ds.num_items(); ++m) {
      if (ds.items[m].split == Split::train) train_item_source[cursor++] = m;
    }
  }
  if (train.records.empty()) throw std::runtime_error("train: empty train split");

  const std::vector<Histogram> ihists = item_histograms(train);
  const std::vector<Histogram> ahists = annotator_histograms(train);

  struct Triple {
    std::size_t view_item, annotator, label;
  };
  std::vector<Triple> triples;
  triples.reserve(train.records.size());
  for (const auto& r : train.records) triples.push_back({r.item, r.annotator, r.label});

  // Dev split is optional; without it selection falls back to the last epoch
  // (or best train loss when selection_metric == loss).
  std::optional<DevContext> dev;
  {
    bool has_dev = false;
    for (const auto& it : ds.items)
      if (it.split == Split::dev) has_dev = true;
    if (has_dev) {
      DevContext d{split_view(ds, Split::dev), {}, EvalConfig::for_label_space(ls)};
      std::vector<std::size_t> src;
      for (std::size_t m = 0; m < ds.num_items(); ++m)
        if (ds.items[m].split == Split::dev) src.push_back(m);
      d.item_feats = select_rows(item_feats, src);
      if (!d.view.records.empty()) dev = std::move(d);
    }
  }

  TrainReport report;
  report.optimizer_steps = ck.opt.t;
  double best_score = ck.has_best ? ck.best_score : std::numeric_limits<double>::infinity();

  std::vector<BatchExample> batch;
  batch.reserve(tc.batch_size);

  for (std::size_t epoch = ck.epochs_done; epoch < tc.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    Rng shuffle_rng(mix_seed(tc.shuffle_seed, epoch));
    shuffle_rng.shuffle(triples);

    double epoch_loss = 0.0;
    std::size_t seen = 0;
    for (std::size_t start = 0; start < triples.size(); start += tc.batch_size) {
      const std::size_t end = std::min(triples.size(), start + tc.batch_size);
      batch.clear();
      for (std::size_t i = start; i < end; ++i) {
        const Triple& tr = triples[i];
        batch.push_back(BatchExample{&item_feats.rows[train_item_source[tr.view_item]],
                                     &annot_feats.rows[tr.annotator], tr.label,
                                     &ihists[tr.view_item], &ahists[tr.annotator]});
      }
      const auto [loss, grads] =
          batch_loss(ck.params, cfg, batch, tc.loss, ls, epoch, tc.threads);
      adam_step(ck.params, grads, ck.opt);
      epoch_loss += loss * double(batch.size());
      seen += batch.size();
    }
    epoch_loss /= double(seen);

    EpochStats stats;
    stats.epoch = epoch;
    stats.loss = epoch_loss;
    stats.objective = to_string(active_objective(tc.loss, epoch));

    if (dev && (epoch + 1) % tc.eval_every == 0) {
      const PredictionSet preds =
          predict_tasks(dev->view, dev->item_feats, annot_feats, ck.params, cfg,
                        Aggregation::expectation, nullptr, tc.threads);
      const ScoreReport score = evaluate(preds, dev->view, dev->eval_cfg);
      stats.dev_soft = score.task_a_mean;
      stats.dev_pe = score.task_b_mean;
    }

    std::optional<double> selection;
    switch (tc.selection_metric) {
      case SelectionMetric::soft: selection = stats.dev_soft; break;
      case SelectionMetric::perspectivist: selection = stats.dev_pe; break;
      case SelectionMetric::loss: selection = epoch_loss; break;
    }
    if (selection && *selection < best_score) {
      best_score = *selection;
      ck.has_best = true;
      ck.best_params = ck.params;
      ck.best_score = best_score;
      ck.best_epoch = epoch;
    }

    stats.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    report.epochs.push_back(stats);
    log_debug("epoch ", epoch, " loss=", epoch_loss, " objective=", stats.objective);
    ck.epochs_done = epoch + 1;
  }

  report.optimizer_steps = ck.opt.t;
  report.best_epoch = ck.has_best ? ck.best_epoch : (tc.epochs - 1);

  TrainResult result;
  result.params = ck.has_best ? ck.best_params : ck.params;
  result.report = std::move(report);
  result.state = std::move(ck);
  return result;
}

void check_features(const AnnotationDataset& ds, const FeatureMatrix& item_feats,
                    const FeatureMatrix& annot_feats, const DiscoConfig& cfg) {
  if (item_feats.rows.size() != ds.num_items())
    throw std::runtime_error("train: item features do not cover all items");
  if (annot_feats.rows.size() != ds.num_annotators())
    throw std::runtime_error("train: annotator features do not cover all annotators");
  if (item_feats.dim != cfg.item_input_dim)
    throw std::runtime_error("train: item feature dim does not match the model config");
  if (annot_feats.dim != cfg.annot_input_dim)
    throw std::runtime_error("train: annotator feature dim does not match the model config");
  if (cfg.num_classes != ds.num_classes())
    throw std::runtime_error("train: model num_classes does not match the dataset");
}

}  // namespace

TrainResult train(const AnnotationDataset& ds, const FeatureMatrix& item_feats,
                  const FeatureMatrix& annot_feats, const DiscoConfig& cfg,
                  const TrainConfig& tc) {
  cfg.validate();
  tc.validate();
  check_features(ds, item_feats, annot_feats, cfg);

  Checkpoint ck;
  ck.config = cfg;
  ck.params = init_params(cfg);
  ck.opt = AdamState::fresh(cfg, tc.lr);
  ck.epochs_done = 0;
  return run_epochs(std::move(ck), ds, item_feats, annot_feats, tc);
}

TrainResult resume(const Checkpoint& ck, const AnnotationDataset& ds,
                   const FeatureMatrix& item_feats, const FeatureMatrix& annot_feats,
                   const TrainConfig& tc) {
  tc.validate();
  ck.config.validate();
  ck.params.validate_shapes(ck.config);
  check_features(ds, item_feats, annot_feats, ck.config);

  if (ck.epochs_done >= tc.epochs) {
    TrainResult result;
    result.params = ck.has_best ? ck.best_params : ck.params;
    result.report.best_epoch = ck.has_best ? ck.best_epoch : (ck.epochs_done - 1);
    result.report.optimizer_steps = ck.opt.t;
    result.state = ck;
    return result;
  }
  return run_epochs(ck, ds, item_feats, annot_feats, tc);
}

TrainResult resume(const std::string& checkpoint_path, const AnnotationDataset& ds,
                   const FeatureMatrix& item_feats, const FeatureMatrix& annot_feats,
                   const TrainConfig& tc) {
  return resume(load_checkpoint(checkpoint_path), ds, item_feats, annot_feats, tc);
}

}  // namespace disco
