#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <set>
#include <tuple>

#include "disco/corpus.hpp"
#include "disco/rng.hpp"
#include "disco/synthgen.hpp"

using namespace disco;

namespace {

const char* kMinimalCorpus = R"({
  "label_space": {"labels": ["0", "1"], "values": [0, 1], "ordinal": false},
  "annotators": {"a1": {}, "a2": {"age": "30"}},
  "items": {
    "it1": {"text": {"body": "hello there"}, "split": "train",
            "annotations": {"a1": "0", "a2": "1"}}
  }
})";

AnnotationDataset random_corpus(std::size_t items, std::size_t annotators,
                                std::size_t classes, std::uint64_t seed) {
  GeneratorSpec spec;
  spec.items = items;
  spec.annotators = annotators;
  spec.classes = classes;
  spec.annotations_per_item = std::max<std::size_t>(1, annotators / 2);
  spec.reliability.assign(annotators, GeneratorSpec::diagonal_confusion(classes, 0.5));
  spec.class_prior.assign(classes, 1.0 / double(classes));
  spec.feature_dim = 8;
  spec.cluster_noise = 0.2;
  spec.seed = seed;
  return generate(spec).dataset;
}

}  // namespace

TEST_CASE("minimal corpus loads with expected shape") {
  const auto ds = parse_dataset(kMinimalCorpus);
  CHECK(ds.num_items() == 1);
  CHECK(ds.num_annotators() == 2);
  CHECK(ds.num_classes() == 2);
  CHECK(ds.records.size() == 2);
  CHECK(ds.annotators[0].annotator_id == "a1");
  CHECK(ds.annotators[1].annotator_id == "a2");
  CHECK(ds.annotators[1].metadata.at("age") == "30");
  CHECK(ds.items[0].text_fields.at("body") == "hello there");
}

TEST_CASE("same annotator labeling one item twice is a duplicate-record error") {
  const char* text = R"({
    "label_space": {"labels": ["0", "1"], "ordinal": false},
    "items": {
      "it1": {"text": {"t": "x"}, "split": "train",
              "annotations": {"a1": "0", "a1": "1"}}
    }
  })";
  CHECK_THROWS_WITH_AS(parse_dataset(text), doctest::Contains("duplicate key 'a1'"),
                       std::runtime_error);
}

TEST_CASE("validation errors") {
  SUBCASE("malformed JSON") {
    CHECK_THROWS_WITH_AS(parse_dataset("{not json"), doctest::Contains("malformed JSON"),
                         std::runtime_error);
  }
  SUBCASE("label outside declared space") {
    const char* text = R"({
      "label_space": {"labels": ["0", "1"], "ordinal": false},
      "items": {"it1": {"text": {"t": "x"}, "split": "train",
                        "annotations": {"a1": "7"}}}
    })";
    CHECK_THROWS_WITH_AS(parse_dataset(text), doctest::Contains("outside the declared"),
                         std::runtime_error);
  }
  SUBCASE("empty dataset") {
    CHECK_THROWS_WITH_AS(parse_dataset(R"({"items": {}})"),
                         doctest::Contains("empty dataset"), std::runtime_error);
  }
  SUBCASE("train item without annotations") {
    const char* text = R"({
      "label_space": {"labels": ["0", "1"], "ordinal": false},
      "items": {
        "it1": {"text": {"t": "x"}, "split": "train", "annotations": {"a1": "0"}},
        "it2": {"text": {"t": "y"}, "split": "train", "annotations": {}}
      }
    })";
    CHECK_THROWS_WITH_AS(parse_dataset(text), doctest::Contains("no annotations"),
                         std::runtime_error);
  }
  SUBCASE("test item without annotations is fine") {
    const char* text = R"({
      "label_space": {"labels": ["0", "1"], "ordinal": false},
      "items": {
        "it1": {"text": {"t": "x"}, "split": "train", "annotations": {"a1": "0"}},
        "it2": {"text": {"t": "y"}, "split": "test"}
      }
    })";
    CHECK_NOTHROW(parse_dataset(text));
  }
  SUBCASE("unknown split") {
    const char* text = R"({
      "label_space": {"labels": ["0", "1"], "ordinal": false},
      "items": {"it1": {"text": {"t": "x"}, "split": "validation",
                        "annotations": {"a1": "0"}}}
    })";
    CHECK_THROWS_WITH_AS(parse_dataset(text), doctest::Contains("unknown split"),
                         std::runtime_error);
  }
  SUBCASE("ordinal values must increase") {
    LabelSpace ls;
    ls.labels = {"lo", "hi"};
    ls.values = {2.0, 1.0};
    ls.ordinal = true;
    CHECK_THROWS(ls.validate());
  }
}

TEST_CASE("label space inference when the file declares none") {
  const char* text = R"({
    "items": {
      "it1": {"text": {"t": "x"}, "split": "train",
              "annotations": {"a1": "zebra", "a2": "apple"}}
    }
  })";
  const auto ds = parse_dataset(text);
  CHECK(ds.label_space.ordinal == false);
  CHECK(ds.label_space.labels == std::vector<std::string>{"apple", "zebra"});

  LoadOptions opts;
  opts.label_space = LabelSpace{{"apple", "pear", "zebra"}, {0, 1, 2}, false};
  CHECK(parse_dataset(text, opts).num_classes() == 3);
}

TEST_CASE("item histogram counts labels") {
  const char* text = R"({
    "label_space": {"labels": ["0", "1"], "ordinal": false},
    "items": {
      "it1": {"text": {"t": "x"}, "split": "train",
              "annotations": {"a1": "1", "a2": "1", "a3": "0"}}
    }
  })";
  const auto ds = parse_dataset(text);
  const auto h = item_histogram(ds, 0);
  CHECK(h.support_count == 3);
  CHECK(h.probs[0] == doctest::Approx(1.0 / 3).epsilon(1e-12));
  CHECK(h.probs[1] == doctest::Approx(2.0 / 3).epsilon(1e-12));
}

TEST_CASE("consensus item histogram is one-hot") {
  const char* text = R"({
    "label_space": {"labels": ["0", "1", "2"], "ordinal": false},
    "items": {
      "it1": {"text": {"t": "x"}, "split": "train",
              "annotations": {"a1": "2", "a2": "2", "a3": "2"}}
    }
  })";
  const auto h = item_histogram(parse_dataset(text), 0);
  CHECK(h.probs == Vec{0.0, 0.0, 1.0});
}

TEST_CASE("annotator histogram mirrors item histogram semantics") {
  const char* text = R"({
    "label_space": {"labels": ["0", "1"], "ordinal": false},
    "items": {
      "it1": {"text": {"t": "x"}, "split": "train", "annotations": {"a1": "0", "a2": "1"}},
      "it2": {"text": {"t": "y"}, "split": "train", "annotations": {"a1": "0"}},
      "it3": {"text": {"t": "z"}, "split": "test"}
    }
  })";
  const auto ds = parse_dataset(text);
  const auto h1 = annotator_histogram(ds, 0);
  CHECK(h1.support_count == 2);
  CHECK(h1.probs == Vec{1.0, 0.0});

  const char* text2 = R"({
    "label_space": {"labels": ["0", "1"], "ordinal": false},
    "annotators": {"ghost": {}},
    "items": {
      "it1": {"text": {"t": "x"}, "split": "train", "annotations": {"a1": "0"}}
    }
  })";
  const auto ds2 = parse_dataset(text2);
  const auto ghost = annotator_histogram(ds2, 0);
  CHECK(ghost.support_count == 0);
  CHECK_FALSE(ghost.valid());
}

TEST_CASE("histograms match a brute-force recount on a random corpus") {
  const auto ds = random_corpus(25, 7, 6, 99);
  for (std::size_t m = 0; m < ds.num_items(); ++m) {
    Vec counts(ds.num_classes(), 0.0);
    std::size_t total = 0;
    for (const auto& r : ds.records) {
      if (r.item == m) {
        counts[r.label] += 1.0;
        ++total;
      }
    }
    const auto h = item_histogram(ds, m);
    CHECK(h.support_count == total);
    if (total > 0) {
      double sum = 0.0;
      for (std::size_t k = 0; k < counts.size(); ++k) {
        CHECK(h.probs[k] == doctest::Approx(counts[k] / double(total)).epsilon(1e-12));
        sum += h.probs[k];
      }
      CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
    }
  }
  for (std::size_t n = 0; n < ds.num_annotators(); ++n) {
    Vec counts(ds.num_classes(), 0.0);
    std::size_t total = 0;
    for (const auto& r : ds.records) {
      if (r.annotator == n) {
        counts[r.label] += 1.0;
        ++total;
      }
    }
    const auto h = annotator_histogram(ds, n);
    CHECK(h.support_count == total);
    for (std::size_t k = 0; total > 0 && k < counts.size(); ++k)
      CHECK(h.probs[k] == doctest::Approx(counts[k] / double(total)).epsilon(1e-12));
  }
}

TEST_CASE("support counts decompose the record count") {
  const auto ds = random_corpus(18, 5, 4, 3);
  std::size_t by_item = 0, by_annot = 0;
  for (std::size_t m = 0; m < ds.num_items(); ++m)
    by_item += item_histogram(ds, m).support_count;
  for (std::size_t n = 0; n < ds.num_annotators(); ++n)
    by_annot += annotator_histogram(ds, n).support_count;
  CHECK(by_item == ds.records.size());
  CHECK(by_annot == ds.records.size());
}

TEST_CASE("split views partition the items and share the annotator space") {
  const auto ds = random_corpus(20, 6, 3, 11);
  const auto train = split_view(ds, Split::train);
  const auto dev = split_view(ds, Split::dev);
  const auto test = split_view(ds, Split::test);

  for (const auto& it : train.items) CHECK(it.split == Split::train);
  CHECK(train.num_items() + dev.num_items() + test.num_items() == ds.num_items());
  CHECK(train.records.size() + dev.records.size() + test.records.size() ==
        ds.records.size());
  CHECK(train.num_annotators() == ds.num_annotators());
  CHECK(dev.num_annotators() == ds.num_annotators());

  std::set<std::string> ids;
  for (const auto& v : {train, dev, test})
    for (const auto& it : v.items) CHECK(ids.insert(it.item_id).second);
  CHECK(ids.size() == ds.num_items());

  CHECK_THROWS(split_view(train, Split::dev));
}

TEST_CASE("view histograms equal histograms of a filtered reload") {
  const auto ds = random_corpus(16, 5, 3, 21);
  const auto dev = split_view(ds, Split::dev);

  const auto ds2 = parse_dataset(dataset_to_json(ds));
  const auto dev2 = split_view(ds2, Split::dev);
  REQUIRE(dev.num_items() == dev2.num_items());
  for (std::size_t m = 0; m < dev.num_items(); ++m) {
    const auto h1 = item_histogram(dev, m);
    const auto h2 = item_histogram(dev2, m);
    CHECK(h1.support_count == h2.support_count);
    for (std::size_t k = 0; k < h1.probs.size(); ++k)
      CHECK(h1.probs[k] == doctest::Approx(h2.probs[k]).epsilon(1e-12));
  }
}

TEST_CASE("serialize -> parse round-trips field for field") {
  const auto ds = random_corpus(9, 4, 3, 7);
  const auto ds2 = parse_dataset(dataset_to_json(ds));
  CHECK(ds.label_space == ds2.label_space);
  CHECK(ds.items == ds2.items);
  CHECK(ds.annotators == ds2.annotators);
  REQUIRE(ds.records.size() == ds2.records.size());

  auto as_set = [](const AnnotationDataset& d) {
    std::set<std::tuple<std::size_t, std::size_t, std::size_t>> s;
    for (const auto& r : d.records) s.insert({r.item, r.annotator, r.label});
    return s;
  };
  CHECK(as_set(ds) == as_set(ds2));

  // serialized form is a fixed point
  CHECK(dataset_to_json(ds2) == dataset_to_json(ds));
}

TEST_CASE("annotator index assignment is deterministic per file") {
  const auto ds1 = parse_dataset(kMinimalCorpus);
  const auto ds2 = parse_dataset(kMinimalCorpus);
  for (std::size_t n = 0; n < ds1.num_annotators(); ++n) {
    CHECK(ds1.annotators[n].annotator_id == ds2.annotators[n].annotator_id);
    CHECK(ds1.annotators[n].index == n);
  }
}

TEST_CASE("annotators referenced only in annotations are registered in file order") {
  const char* text = R"({
    "label_space": {"labels": ["0", "1"], "ordinal": false},
    "annotators": {"declared": {"age": "40"}},
    "items": {
      "it1": {"text": {"t": "x"}, "split": "train",
              "annotations": {"zeta": "0", "alpha": "1", "declared": "0"}}
    }
  })";
  const auto ds = parse_dataset(text);
  REQUIRE(ds.num_annotators() == 3);
  CHECK(ds.annotators[0].annotator_id == "declared");
  CHECK(ds.annotators[1].annotator_id == "zeta");  // appearance order, not sorted
  CHECK(ds.annotators[2].annotator_id == "alpha");
}
