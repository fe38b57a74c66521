#include "disco/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "disco/rng.hpp"

namespace disco {

using ojson = nlohmann::ordered_json;

Matrix GeneratorSpec::diagonal_confusion(std::size_t classes, double diag) {
  if (classes < 2) throw std::invalid_argument("diagonal_confusion: need >= 2 classes");
  if (diag < 0.0 || diag > 1.0)
    throw std::invalid_argument("diagonal_confusion: diag must be in [0,1]");
  Matrix m(classes, classes, (1.0 - diag) / double(classes - 1));
  for (std::size_t k = 0; k < classes; ++k) m(k, k) = diag;
  return m;
}

void GeneratorSpec::validate() const {
  if (items < 1 || annotators < 1) throw std::runtime_error("generator: items/annotators >= 1");
  if (classes < 2) throw std::runtime_error("generator: classes must be >= 2");
  if (annotations_per_item < 1 || annotations_per_item > annotators)
    throw std::runtime_error("generator: annotations_per_item must be in [1, annotators]");
  if (feature_dim < 1) throw std::runtime_error("generator: feature_dim must be >= 1");
  if (cluster_noise < 0.0) throw std::runtime_error("generator: cluster_noise must be >= 0");
  if (train_fraction < 0.0 || dev_fraction < 0.0 || train_fraction + dev_fraction > 1.0)
    throw std::runtime_error("generator: invalid split fractions");
  if (class_prior.size() != classes)
    throw std::runtime_error("generator: class_prior length must equal classes");
  double sum = 0.0;
  for (double p : class_prior) {
    if (p < 0.0) throw std::runtime_error("generator: class_prior entries must be >= 0");
    sum += p;
  }
  if (std::fabs(sum - 1.0) > 1e-9)
    throw std::runtime_error("generator: class_prior must sum to 1");
  if (reliability.size() != annotators)
    throw std::runtime_error("generator: one confusion matrix per annotator required");
  for (const auto& conf : reliability) {
    if (conf.rows() != classes || conf.cols() != classes)
      throw std::runtime_error("generator: confusion matrices must be C x C");
    for (std::size_t i = 0; i < classes; ++i) {
      double row = 0.0;
      for (std::size_t j = 0; j < classes; ++j) {
        if (conf(i, j) < 0.0) throw std::runtime_error("generator: negative confusion entry");
        row += conf(i, j);
      }
      if (std::fabs(row - 1.0) > 1e-9)
        throw std::runtime_error("generator: confusion rows must sum to 1");
    }
  }
}

namespace {

const char* kGenders[] = {"female", "male", "nonbinary"};
const char* kNations[] = {"Brazil", "Germany", "India", "Japan", "Kenya", "Mexico"};
const char* kEducation[] = {"primary", "secondary", "bachelor", "master", "doctoral"};

std::vector<Vec> class_centroids(std::size_t classes, std::size_t dim, Rng& rng) {
  std::vector<Vec> cents(classes, Vec(dim, 0.0));
  for (auto& c : cents)
    for (double& v : c) v = rng.normal();
  // Gram-Schmidt when the space allows it; otherwise just normalize.
  for (std::size_t i = 0; i < classes; ++i) {
    if (dim >= classes) {
      for (std::size_t j = 0; j < i; ++j) {
        double dot = 0.0;
        for (std::size_t d = 0; d < dim; ++d) dot += cents[i][d] * cents[j][d];
        for (std::size_t d = 0; d < dim; ++d) cents[i][d] -= dot * cents[j][d];
      }
    }
    double norm = 0.0;
    for (double v : cents[i]) norm += v * v;
    norm = std::sqrt(norm);
    if (norm < 1e-9) throw std::runtime_error("generator: degenerate centroid draw");
    for (double& v : cents[i]) v /= norm;
  }
  return cents;
}

std::string synth_text(std::size_t true_class, Rng& rng) {
  std::ostringstream os;
  const std::size_t len = 3 + rng.uniform_index(6);
  os << "c" << true_class << "word";
  for (std::size_t i = 0; i < len; ++i) os << " w" << rng.uniform_index(50);
  return os.str();
}

std::string zero_pad(std::size_t v, std::size_t width) {
  std::string s = std::to_string(v);
  while (s.size() < width) s.insert(s.begin(), '0');
  return s;
}

}  // namespace

SyntheticCorpus generate(const GeneratorSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);

  SyntheticCorpus out;
  AnnotationDataset& ds = out.dataset;

  ds.label_space.ordinal = spec.ordinal;
  for (std::size_t k = 0; k < spec.classes; ++k) {
    ds.label_space.labels.push_back(std::to_string(k));
    ds.label_space.values.push_back(double(k));
  }

  for (std::size_t n = 0; n < spec.annotators; ++n) {
    Annotator a;
    a.annotator_id = "ann_" + zero_pad(n, 3);
    a.index = n;
    a.metadata["age"] = std::to_string(20 + (n * 7) % 40);
    a.metadata["gender"] = kGenders[n % 3];
    a.metadata["nationality"] = kNations[n % 6];
    a.metadata["education"] = kEducation[n % 5];
    ds.annotators.push_back(std::move(a));
  }

  const auto centroids = class_centroids(spec.classes, spec.feature_dim, rng);
  out.item_features.dim = spec.feature_dim;
  out.item_features.source = FeatureSource::embedding_file;
  out.annotator_features = one_hot_annotators(spec.annotators);
  out.true_posteriors.reserve(spec.items);

  const std::size_t n_train = static_cast<std::size_t>(std::ceil(spec.train_fraction * double(spec.items)));
  const std::size_t n_dev = static_cast<std::size_t>(std::ceil(spec.dev_fraction * double(spec.items)));

  std::vector<std::size_t> annot_order(spec.annotators);
  std::iota(annot_order.begin(), annot_order.end(), 0);

  for (std::size_t m = 0; m < spec.items; ++m) {
    const std::size_t z = rng.categorical(spec.class_prior);

    Item item;
    item.item_id = "item_" + zero_pad(m, 5);
    item.text_fields["text"] = synth_text(z, rng);
    item.split = m < n_train ? Split::train
                             : (m < n_train + n_dev ? Split::dev : Split::test);
    ds.items.push_back(std::move(item));

    Vec x = centroids[z];
    for (double& v : x) v += spec.cluster_noise * rng.normal();
    out.item_features.rows.push_back(std::move(x));

    // The marginal label distribution of a uniformly drawn annotator for this
    // item's true class; exact soft-label target for oracle evaluation.
    Vec posterior(spec.classes, 0.0);
    for (std::size_t n = 0; n < spec.annotators; ++n)
      for (std::size_t k = 0; k < spec.classes; ++k)
        posterior[k] += spec.reliability[n](z, k) / double(spec.annotators);
    out.true_posteriors.push_back(std::move(posterior));

    // sample annotators without replacement (partial Fisher-Yates)
    for (std::size_t i = 0; i < spec.annotations_per_item; ++i) {
      const std::size_t j = i + rng.uniform_index(spec.annotators - i);
      std::swap(annot_order[i], annot_order[j]);
    }
    for (std::size_t i = 0; i < spec.annotations_per_item; ++i) {
      const std::size_t n = annot_order[i];
      Vec row(spec.classes);
      for (std::size_t k = 0; k < spec.classes; ++k) row[k] = spec.reliability[n](z, k);
      ds.records.push_back(Record{m, n, rng.categorical(row)});
    }
  }

  ds.validate();
  out.item_features.validate();
  return out;
}

GeneratorSpec generator_spec_from_json(const std::string& text) {
  ojson j;
  try {
    j = ojson::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw std::runtime_error(std::string("malformed generator spec: ") + e.what());
  }
  GeneratorSpec spec;
  spec.items = j.at("items").get<std::size_t>();
  spec.annotators = j.at("annotators").get<std::size_t>();
  spec.classes = j.at("classes").get<std::size_t>();
  spec.annotations_per_item = j.at("annotations_per_item").get<std::size_t>();
  spec.feature_dim = j.at("feature_dim").get<std::size_t>();
  spec.cluster_noise = j.value("cluster_noise", 0.0);
  spec.seed = j.value("seed", 0ULL);
  spec.ordinal = j.value("ordinal", false);
  spec.train_fraction = j.value("train_fraction", 0.8);
  spec.dev_fraction = j.value("dev_fraction", 0.1);

  if (j.contains("class_prior")) {
    spec.class_prior = j["class_prior"].get<Vec>();
  } else {
    spec.class_prior.assign(spec.classes, 1.0 / double(spec.classes));
  }

  if (!j.contains("reliability"))
    throw std::runtime_error("generator spec: 'reliability' is required");
  const auto& rel = j["reliability"];
  if (rel.is_object() && rel.contains("diagonal")) {
    const double diag = rel["diagonal"].get<double>();
    spec.reliability.assign(spec.annotators,
                            GeneratorSpec::diagonal_confusion(spec.classes, diag));
  } else if (rel.is_object() && rel.contains("matrices")) {
    for (const auto& mj : rel["matrices"]) {
      Matrix m(spec.classes, spec.classes);
      std::size_t i = 0;
      for (const auto& row : mj) {
        std::size_t k = 0;
        for (const auto& v : row) m(i, k++) = v.get<double>();
        ++i;
      }
      spec.reliability.push_back(std::move(m));
    }
  } else {
    throw std::runtime_error(
        "generator spec: reliability must be {\"diagonal\": x} or {\"matrices\": [...]}");
  }
  spec.validate();
  return spec;
}

GeneratorSpec load_generator_spec(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open generator spec: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return generator_spec_from_json(buf.str());
}

void write_corpus_files(const SyntheticCorpus& corpus, const std::string& dir) {
  std::filesystem::create_directories(dir);
  const auto path = [&](const char* name) {
    return (std::filesystem::path(dir) / name).string();
  };
  save_dataset(corpus.dataset, path("dataset.json"));
  save_embeddings(corpus.item_features, corpus.dataset.item_ids(),
                  path("item_features.tsv"));
  save_embeddings(corpus.annotator_features, corpus.dataset.annotator_ids(),
                  path("annotator_features.tsv"));

  ojson post = ojson::object();
  for (std::size_t m = 0; m < corpus.dataset.num_items(); ++m)
    post[corpus.dataset.items[m].item_id] = corpus.true_posteriors[m];
  std::ofstream out(path("true_posteriors.json"), std::ios::binary);
  if (!out) throw std::runtime_error("cannot write true_posteriors.json");
  out << post.dump(2) << "\n";
}

}  // namespace disco
