#include "disco/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

#include "disco/logging.hpp"

namespace disco {

using ojson = nlohmann::ordered_json;

Split split_from_string(const std::string& s) {
  if (s == "train") return Split::train;
  if (s == "dev") return Split::dev;
  if (s == "test") return Split::test;
  throw std::runtime_error("unknown split name: '" + s + "'");
}

const char* to_string(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::dev: return "dev";
    case Split::test: return "test";
  }
  return "?";
}

std::size_t LabelSpace::index_of(const std::string& label) const {
  const auto idx = find(label);
  if (!idx) throw std::runtime_error("label '" + label + "' not in label space");
  return *idx;
}

std::optional<std::size_t> LabelSpace::find(const std::string& label) const {
  for (std::size_t k = 0; k < labels.size(); ++k) {
    if (labels[k] == label) return k;
  }
  return std::nullopt;
}

double LabelSpace::range() const {
  if (values.empty()) return 0.0;
  const auto [mn, mx] = std::minmax_element(values.begin(), values.end());
  return *mx - *mn;
}

void LabelSpace::validate() const {
  if (labels.size() < 2) throw std::runtime_error("label space needs at least 2 labels");
  if (values.size() != labels.size())
    throw std::runtime_error("label space: values/labels length mismatch");
  std::set<std::string> distinct(labels.begin(), labels.end());
  if (distinct.size() != labels.size())
    throw std::runtime_error("label space: duplicate label names");
  for (double v : values) {
    if (!std::isfinite(v)) throw std::runtime_error("label space: non-finite label value");
  }
  if (ordinal) {
    for (std::size_t k = 1; k < values.size(); ++k) {
      if (!(values[k] > values[k - 1]))
        throw std::runtime_error("ordinal label space: values must be strictly increasing");
    }
  }
}

std::size_t AnnotationDataset::item_index(const std::string& item_id) const {
  for (std::size_t m = 0; m < items.size(); ++m) {
    if (items[m].item_id == item_id) return m;
  }
  throw std::runtime_error("unknown item id: '" + item_id + "'");
}

std::size_t AnnotationDataset::annotator_index(const std::string& annotator_id) const {
  for (std::size_t n = 0; n < annotators.size(); ++n) {
    if (annotators[n].annotator_id == annotator_id) return n;
  }
  throw std::runtime_error("unknown annotator id: '" + annotator_id + "'");
}

std::vector<std::string> AnnotationDataset::item_ids() const {
  std::vector<std::string> ids;
  ids.reserve(items.size());
  for (const auto& it : items) ids.push_back(it.item_id);
  return ids;
}

std::vector<std::string> AnnotationDataset::annotator_ids() const {
  std::vector<std::string> ids;
  ids.reserve(annotators.size());
  for (const auto& a : annotators) ids.push_back(a.annotator_id);
  return ids;
}

void AnnotationDataset::validate() const {
  label_space.validate();
  if (items.empty() || records.empty()) throw std::runtime_error("empty dataset");

  std::unordered_set<std::string> item_ids_seen;
  for (const auto& it : items) {
    if (!item_ids_seen.insert(it.item_id).second)
      throw std::runtime_error("duplicate item id: '" + it.item_id + "'");
    bool any_text = false;
    for (const auto& [field, text] : it.text_fields) {
      (void)field;
      if (!text.empty()) any_text = true;
    }
    if (!any_text)
      throw std::runtime_error("item '" + it.item_id + "' has no non-empty text field");
  }

  std::unordered_set<std::string> annot_ids_seen;
  for (std::size_t n = 0; n < annotators.size(); ++n) {
    if (annotators[n].index != n)
      throw std::runtime_error("annotator index not dense at position " + std::to_string(n));
    if (!annot_ids_seen.insert(annotators[n].annotator_id).second)
      throw std::runtime_error("duplicate annotator id: '" + annotators[n].annotator_id + "'");
  }

  std::set<std::pair<std::size_t, std::size_t>> pairs;
  std::vector<bool> item_has_record(items.size(), false);
  for (const auto& r : records) {
    if (r.item >= items.size() || r.annotator >= annotators.size() ||
        r.label >= label_space.size())
      throw std::runtime_error("record index out of range");
    if (!pairs.insert({r.item, r.annotator}).second)
      throw std::runtime_error("duplicate record: item '" + items[r.item].item_id +
                               "', annotator '" + annotators[r.annotator].annotator_id + "'");
    item_has_record[r.item] = true;
  }
  for (std::size_t m = 0; m < items.size(); ++m) {
    if (items[m].split == Split::train && !item_has_record[m])
      throw std::runtime_error("train item '" + items[m].item_id + "' has no annotations");
  }
}

namespace {

// nlohmann keeps only the last value for duplicate object keys, so duplicates
// (e.g. one annotator labeling an item twice) are scanned for up front via the
// SAX callback.
void check_duplicate_keys(const std::string& text) {
  std::vector<std::set<std::string>> scopes;
  ojson::parser_callback_t cb = [&](int /*depth*/, ojson::parse_event_t ev, ojson& parsed) {
    switch (ev) {
      case ojson::parse_event_t::object_start:
        scopes.emplace_back();
        break;
      case ojson::parse_event_t::object_end:
        scopes.pop_back();
        break;
      case ojson::parse_event_t::key: {
        const auto key = parsed.get<std::string>();
        if (!scopes.back().insert(key).second)
          throw std::runtime_error("duplicate key '" + key + "' in the same JSON object");
        break;
      }
      default:
        break;
    }
    return true;
  };
  ojson::parse(text, cb);
}

std::string meta_value_to_string(const ojson& v, const std::string& annotator_id,
                                 const std::string& key) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_integer()) return std::to_string(v.get<long long>());
  if (v.is_number_float()) {
    std::ostringstream os;
    os << v.get<double>();
    return os.str();
  }
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  if (v.is_null()) return "";
  throw std::runtime_error("annotator '" + annotator_id + "' metadata key '" + key +
                           "' has a non-scalar value");
}

std::string label_to_string(const ojson& l) {
  if (l.is_string()) return l.get<std::string>();
  if (l.is_number_integer()) return std::to_string(l.get<long long>());
  throw std::runtime_error("annotation labels must be strings");
}

LabelSpace label_space_from_json(const ojson& j) {
  LabelSpace ls;
  if (!j.contains("labels") || !j["labels"].is_array())
    throw std::runtime_error("label_space.labels missing or not an array");
  for (const auto& l : j["labels"]) ls.labels.push_back(label_to_string(l));
  if (j.contains("values")) {
    for (const auto& v : j["values"]) ls.values.push_back(v.get<double>());
  } else {
    for (std::size_t k = 0; k < ls.labels.size(); ++k) ls.values.push_back(double(k));
  }
  ls.ordinal = j.value("ordinal", false);
  ls.validate();
  return ls;
}

LabelSpace infer_label_space(const ojson& items) {
  std::set<std::string> observed;
  for (const auto& [item_id, item] : items.items()) {
    (void)item_id;
    if (!item.is_object() || !item.contains("annotations")) continue;
    for (const auto& [aid, label] : item["annotations"].items()) {
      (void)aid;
      observed.insert(label_to_string(label));
    }
  }
  LabelSpace ls;
  for (const auto& l : observed) ls.labels.push_back(l);  // lexicographic, deterministic
  for (std::size_t k = 0; k < ls.labels.size(); ++k) ls.values.push_back(double(k));
  ls.ordinal = false;
  ls.validate();
  return ls;
}

}  // namespace

AnnotationDataset parse_dataset(const std::string& json_text, const LoadOptions& opts) {
  ojson root;
  try {
    check_duplicate_keys(json_text);
    root = ojson::parse(json_text);
  } catch (const nlohmann::json::parse_error& e) {
    throw std::runtime_error(std::string("malformed JSON: ") + e.what());
  }
  if (!root.is_object()) throw std::runtime_error("malformed JSON: top level must be an object");
  if (!root.contains("items") || !root["items"].is_object() || root["items"].empty())
    throw std::runtime_error("empty dataset: no items");

  AnnotationDataset ds;
  if (opts.label_space) {
    ds.label_space = *opts.label_space;
    ds.label_space.validate();
  } else if (root.contains("label_space")) {
    ds.label_space = label_space_from_json(root["label_space"]);
  } else {
    ds.label_space = infer_label_space(root["items"]);
  }

  // Annotator indices: first the declared annotators in file order, then any
  // id that only appears inside annotations, in first-appearance order.
  std::unordered_map<std::string, std::size_t> annot_index;
  auto intern_annotator = [&](const std::string& id) -> std::size_t {
    auto it = annot_index.find(id);
    if (it != annot_index.end()) return it->second;
    const std::size_t n = ds.annotators.size();
    ds.annotators.push_back(Annotator{id, n, {}});
    annot_index.emplace(id, n);
    return n;
  };

  if (root.contains("annotators")) {
    if (!root["annotators"].is_object())
      throw std::runtime_error("'annotators' must be an object");
    for (const auto& [aid, meta] : root["annotators"].items()) {
      const std::size_t n = intern_annotator(aid);
      if (!meta.is_object())
        throw std::runtime_error("annotator '" + aid + "' metadata must be an object");
      for (const auto& [key, val] : meta.items()) {
        ds.annotators[n].metadata[key] = meta_value_to_string(val, aid, key);
      }
    }
  }

  for (const auto& [item_id, item_json] : root["items"].items()) {
    Item item;
    item.item_id = item_id;
    if (!item_json.is_object())
      throw std::runtime_error("item '" + item_id + "' must be an object");
    if (!item_json.contains("text") || !item_json["text"].is_object())
      throw std::runtime_error("item '" + item_id + "' is missing the 'text' object");
    for (const auto& [field, text] : item_json["text"].items()) {
      if (!text.is_string())
        throw std::runtime_error("item '" + item_id + "' text field '" + field +
                                 "' must be a string");
      item.text_fields[field] = text.get<std::string>();
    }
    if (!item_json.contains("split"))
      throw std::runtime_error("item '" + item_id + "' is missing 'split'");
    item.split = split_from_string(item_json["split"].get<std::string>());

    const std::size_t m = ds.items.size();
    ds.items.push_back(std::move(item));

    if (!item_json.contains("annotations")) continue;
    if (!item_json["annotations"].is_object())
      throw std::runtime_error("item '" + item_id + "' annotations must be an object");
    for (const auto& [aid, label_json] : item_json["annotations"].items()) {
      const std::string label = label_to_string(label_json);
      const auto k = ds.label_space.find(label);
      if (!k)
        throw std::runtime_error("item '" + item_id + "': label '" + label +
                                 "' outside the declared label space");
      ds.records.push_back(Record{m, intern_annotator(aid), *k});
    }
  }

  ds.validate();
  log_debug("parsed dataset: M=", ds.num_items(), " N=", ds.num_annotators(),
            " C=", ds.num_classes(), " records=", ds.records.size());
  return ds;
}

AnnotationDataset load_dataset(const std::string& path, const LoadOptions& opts) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open dataset file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_dataset(buf.str(), opts);
}

std::string dataset_to_json(const AnnotationDataset& ds) {
  ojson root;
  ojson ls;
  ls["labels"] = ds.label_space.labels;
  ls["values"] = ds.label_space.values;
  ls["ordinal"] = ds.label_space.ordinal;
  root["label_space"] = std::move(ls);

  // Annotators are written in index order so a reload assigns the same
  // indices (load(serialize(load(f))) must equal load(f)).
  ojson annots = ojson::object();
  for (const auto& a : ds.annotators) {
    ojson meta = ojson::object();
    for (const auto& [k, v] : a.metadata) meta[k] = v;
    annots[a.annotator_id] = std::move(meta);
  }
  root["annotators"] = std::move(annots);

  // Group records by item, preserving record order within each item.
  std::vector<std::vector<const Record*>> by_item(ds.items.size());
  for (const auto& r : ds.records) by_item[r.item].push_back(&r);

  ojson items = ojson::object();
  for (std::size_t m = 0; m < ds.items.size(); ++m) {
    const Item& it = ds.items[m];
    ojson item;
    ojson text = ojson::object();
    for (const auto& [field, t] : it.text_fields) text[field] = t;
    item["text"] = std::move(text);
    item["split"] = to_string(it.split);
    ojson ann = ojson::object();
    for (const Record* r : by_item[m]) {
      ann[ds.annotators[r->annotator].annotator_id] = ds.label_space.labels[r->label];
    }
    item["annotations"] = std::move(ann);
    items[it.item_id] = std::move(item);
  }
  root["items"] = std::move(items);
  return root.dump(2);
}

void save_dataset(const AnnotationDataset& ds, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write dataset file: " + path);
  out << dataset_to_json(ds) << "\n";
}

namespace {

Histogram tally(const AnnotationDataset& ds, bool by_item, std::size_t index) {
  Histogram h;
  h.probs.assign(ds.num_classes(), 0.0);
  std::size_t total = 0;
  for (const auto& r : ds.records) {
    if ((by_item ? r.item : r.annotator) != index) continue;
    h.probs[r.label] += 1.0;
    ++total;
  }
  h.support_count = total;
  if (total > 0) {
    for (double& p : h.probs) p /= double(total);
  } else {
    h.probs.assign(ds.num_classes(), 0.0);
  }
  return h;
}

}  // namespace

Histogram item_histogram(const AnnotationDataset& ds, std::size_t m) {
  if (m >= ds.num_items()) throw std::out_of_range("item index out of range");
  return tally(ds, true, m);
}

Histogram annotator_histogram(const AnnotationDataset& ds, std::size_t n) {
  if (n >= ds.num_annotators()) throw std::out_of_range("annotator index out of range");
  return tally(ds, false, n);
}

std::vector<Histogram> item_histograms(const AnnotationDataset& ds) {
  std::vector<Histogram> hs(ds.num_items());
  for (auto& h : hs) h.probs.assign(ds.num_classes(), 0.0);
  for (const auto& r : ds.records) {
    hs[r.item].probs[r.label] += 1.0;
    ++hs[r.item].support_count;
  }
  for (auto& h : hs) {
    if (h.support_count > 0) {
      for (double& p : h.probs) p /= double(h.support_count);
    }
  }
  return hs;
}

std::vector<Histogram> annotator_histograms(const AnnotationDataset& ds) {
  std::vector<Histogram> hs(ds.num_annotators());
  for (auto& h : hs) h.probs.assign(ds.num_classes(), 0.0);
  for (const auto& r : ds.records) {
    hs[r.annotator].probs[r.label] += 1.0;
    ++hs[r.annotator].support_count;
  }
  for (auto& h : hs) {
    if (h.support_count > 0) {
      for (double& p : h.probs) p /= double(h.support_count);
    }
  }
  return hs;
}

AnnotationDataset split_view(const AnnotationDataset& ds, Split split) {
  bool present = false;
  for (const auto& it : ds.items) {
    if (it.split == split) present = true;
  }
  if (!present)
    throw std::runtime_error(std::string("split '") + to_string(split) +
                             "' not present in dataset");

  AnnotationDataset view;
  view.label_space = ds.label_space;
  view.annotators = ds.annotators;  // index space shared across splits
  std::vector<std::size_t> remap(ds.num_items(), SIZE_MAX);
  for (std::size_t m = 0; m < ds.num_items(); ++m) {
    if (ds.items[m].split != split) continue;
    remap[m] = view.items.size();
    view.items.push_back(ds.items[m]);
  }
  for (const auto& r : ds.records) {
    if (remap[r.item] == SIZE_MAX) continue;
    view.records.push_back(Record{remap[r.item], r.annotator, r.label});
  }
  return view;
}

}  // namespace disco
