#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "disco/matrix.hpp"

namespace disco {

enum class Split { train, dev, test };

Split split_from_string(const std::string& s);
const char* to_string(Split s);

// Ordered label set with a numeric value per label. For ordinal scales
// (Likert-style) the values must be declared explicitly and strictly
// increasing; unobserved extreme labels would otherwise shrink the scale.
struct LabelSpace {
  std::vector<std::string> labels;
  std::vector<double> values;
  bool ordinal = false;

  std::size_t size() const { return labels.size(); }
  std::size_t index_of(const std::string& label) const;
  std::optional<std::size_t> find(const std::string& label) const;
  double range() const;  // max value - min value
  void validate() const;

  bool operator==(const LabelSpace&) const = default;
};

struct Item {
  std::string item_id;
  std::map<std::string, std::string> text_fields;
  Split split = Split::train;

  bool operator==(const Item&) const = default;
};

struct Annotator {
  std::string annotator_id;
  std::size_t index = 0;
  std::map<std::string, std::string> metadata;

  bool operator==(const Annotator&) const = default;
};

// One observed annotation: annotator `annotator` gave item `item` label `label`.
struct Record {
  std::size_t item;
  std::size_t annotator;
  std::size_t label;

  bool operator==(const Record&) const = default;
};

// Empirical label distribution. support_count == 0 marks an entity with no
// annotations; probs are meaningless in that case and valid() is false.
struct Histogram {
  Vec probs;
  std::size_t support_count = 0;

  bool valid() const { return support_count > 0; }
};

// Immutable after load/validate; safe to share across threads read-only.
struct AnnotationDataset {
  LabelSpace label_space;
  std::vector<Item> items;
  std::vector<Annotator> annotators;
  std::vector<Record> records;

  std::size_t num_items() const { return items.size(); }
  std::size_t num_annotators() const { return annotators.size(); }
  std::size_t num_classes() const { return label_space.size(); }

  std::size_t item_index(const std::string& item_id) const;
  std::size_t annotator_index(const std::string& annotator_id) const;
  std::vector<std::string> item_ids() const;
  std::vector<std::string> annotator_ids() const;

  // Checks every invariant the loader guarantees; throws on violation.
  void validate() const;
};

struct LoadOptions {
  // Takes precedence over the label_space block in the file. When neither is
  // present the space is inferred from observed labels (non-ordinal only).
  std::optional<LabelSpace> label_space;
};

AnnotationDataset load_dataset(const std::string& path, const LoadOptions& opts = {});
AnnotationDataset parse_dataset(const std::string& json_text, const LoadOptions& opts = {});
std::string dataset_to_json(const AnnotationDataset& ds);
void save_dataset(const AnnotationDataset& ds, const std::string& path);

Histogram item_histogram(const AnnotationDataset& ds, std::size_t m);
Histogram annotator_histogram(const AnnotationDataset& ds, std::size_t n);

// One-pass variants; index in the returned vector = entity index.
std::vector<Histogram> item_histograms(const AnnotationDataset& ds);
std::vector<Histogram> annotator_histograms(const AnnotationDataset& ds);

// Read-only restriction to one split. Item indices are re-densified in
// original order; the annotator index space is shared with the parent.
AnnotationDataset split_view(const AnnotationDataset& ds, Split split);

}  // namespace disco
