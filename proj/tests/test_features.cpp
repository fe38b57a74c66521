#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <set>

#include "disco/features.hpp"
#include "disco/rng.hpp"
#include "disco/synthgen.hpp"

using namespace disco;

namespace {

std::string temp_path(const char* name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

Item make_item(const std::string& id, const std::string& text) {
  Item it;
  it.item_id = id;
  it.text_fields["text"] = text;
  return it;
}

double cosine(const Vec& a, const Vec& b) {
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  return dot / std::sqrt(na * nb);
}

}  // namespace

TEST_CASE("embeddings TSV round trip") {
  FeatureMatrix fm;
  fm.dim = 3;
  fm.rows = {{1.0, -2.5, 0.125}, {0.0, 3.25, -7.5}};
  const auto path = temp_path("disco_feat_small.tsv");
  save_embeddings(fm, {"a", "b"}, path);
  const auto back = load_embeddings(path, {"a", "b"});
  CHECK(back.dim == 3);
  CHECK(back.rows == fm.rows);
  std::remove(path.c_str());
}

TEST_CASE("missing id is an error naming the id") {
  FeatureMatrix fm;
  fm.dim = 2;
  fm.rows = {{1.0, 2.0}};
  const auto path = temp_path("disco_feat_missing.tsv");
  save_embeddings(fm, {"present"}, path);
  CHECK_THROWS_WITH_AS(load_embeddings(path, {"present", "absent"}),
                       doctest::Contains("missing id 'absent'"), std::runtime_error);
  std::remove(path.c_str());
}

TEST_CASE("malformed embeddings files") {
  const auto path = temp_path("disco_feat_bad.tsv");
  {
    std::ofstream out(path);
    out << "#dim 3\n";
    out << "x\t1.0 2.0\n";  // wrong width
  }
  CHECK_THROWS_WITH_AS(load_embeddings(path, {"x"}), doctest::Contains("has 2 values"),
                       std::runtime_error);
  {
    // text parsing cannot produce NaN, so the finite guard is checked directly
    FeatureMatrix fm;
    fm.dim = 2;
    fm.rows = {{1.0, std::nan("")}};
    CHECK_THROWS_WITH_AS(fm.validate(), doctest::Contains("non-finite"),
                         std::runtime_error);
  }
  {
    std::ofstream out(path);
    out << "no header\n";
  }
  CHECK_THROWS(load_embeddings(path, {}));
  std::remove(path.c_str());
}

TEST_CASE("random 768-dim vectors survive the text round trip") {
  Rng rng(505);
  FeatureMatrix fm;
  fm.dim = 768;
  std::vector<std::string> ids;
  for (int i = 0; i < 5; ++i) {
    Vec v(768);
    for (double& x : v) x = 10.0 * rng.normal();
    fm.rows.push_back(std::move(v));
    ids.push_back("id" + std::to_string(i));
  }
  const auto path = temp_path("disco_feat_768.tsv");
  save_embeddings(fm, ids, path);
  const auto back = load_embeddings(path, ids);
  for (std::size_t i = 0; i < fm.rows.size(); ++i) {
    for (std::size_t j = 0; j < 768; ++j) {
      const double ref = fm.rows[i][j];
      const double got = back.rows[i][j];
      CHECK(std::fabs(got - ref) <= 1e-6 * std::max(1.0, std::fabs(ref)));
    }
  }
  std::remove(path.c_str());
}

TEST_CASE("metadata template rendering") {
  const auto tmpl = MetadataTemplate::default_template();
  Annotator a;
  a.annotator_id = "x";

  SUBCASE("partial metadata keeps only its clauses") {
    a.metadata = {{"age", "25"}, {"gender", "female"}};
    const auto s = render_metadata_text(a, tmpl);
    CHECK(s.find("25") != std::string::npos);
    CHECK(s.find("female") != std::string::npos);
    CHECK(s.find("nationality") == std::string::npos);
    CHECK(s.find("{") == std::string::npos);
    CHECK(s.back() == '.');
  }
  SUBCASE("empty metadata falls back") {
    CHECK(render_metadata_text(a, tmpl) == "No annotator metadata is available.");
  }
  SUBCASE("full metadata renders every value") {
    a.metadata = {{"age", "31"}, {"gender", "male"}, {"nationality", "Kenya"},
                  {"education", "master"}};
    const auto s = render_metadata_text(a, tmpl);
    for (const char* needle : {"31", "male", "Kenya", "master"})
      CHECK(s.find(needle) != std::string::npos);
  }
  SUBCASE("deterministic") {
    a.metadata = {{"age", "25"}};
    CHECK(render_metadata_text(a, tmpl) == render_metadata_text(a, tmpl));
  }
}

TEST_CASE("rendering is injective over distinct metadata maps of a synthetic corpus") {
  GeneratorSpec spec;
  spec.items = 4;
  spec.annotators = 30;
  spec.classes = 2;
  spec.annotations_per_item = 2;
  spec.reliability.assign(30, GeneratorSpec::diagonal_confusion(2, 0.9));
  spec.class_prior = {0.5, 0.5};
  spec.feature_dim = 4;
  spec.seed = 5;
  const auto corpus = generate(spec);
  const auto tmpl = MetadataTemplate::default_template();
  for (std::size_t i = 0; i < corpus.dataset.num_annotators(); ++i) {
    for (std::size_t j = i + 1; j < corpus.dataset.num_annotators(); ++j) {
      const auto& ai = corpus.dataset.annotators[i];
      const auto& aj = corpus.dataset.annotators[j];
      if (ai.metadata == aj.metadata) continue;
      CHECK(render_metadata_text(ai, tmpl) != render_metadata_text(aj, tmpl));
    }
  }
}

TEST_CASE("hashed bow determinism and shape") {
  const std::vector<Item> items = {make_item("a", "The quick brown fox!"),
                                   make_item("b", "the QUICK brown fox"),
                                   make_item("c", "")};
  const auto fm1 = hashed_bow(items, 64);
  const auto fm2 = hashed_bow(items, 64);
  CHECK(fm1.rows == fm2.rows);           // deterministic
  CHECK(fm1.rows[0] == fm1.rows[1]);     // case and punctuation insensitive
  CHECK(fm1.rows[2] == Vec(64, 0.0));    // empty text stays zero

  double norm = 0.0;
  for (double v : fm1.rows[0]) norm += v * v;
  CHECK(norm == doctest::Approx(1.0).epsilon(1e-12));

  CHECK_THROWS_AS(hashed_bow(items, 8), std::invalid_argument);
}

TEST_CASE("hashed bow is invariant to token order") {
  const auto fm = hashed_bow({make_item("a", "alpha beta gamma"),
                              make_item("b", "gamma alpha beta")},
                             128);
  CHECK(fm.rows[0] == fm.rows[1]);
}

TEST_CASE("field weights scale contributions") {
  Item two_fields;
  two_fields.item_id = "x";
  two_fields.text_fields["head"] = "alpha";
  two_fields.text_fields["tail"] = "beta";
  const auto zero_tail = hashed_bow({two_fields}, 64, {{"tail", 0.0}});
  const auto only_head = hashed_bow({make_item("x", "alpha")}, 64);
  CHECK(zero_tail.rows[0] == only_head.rows[0]);
}

TEST_CASE("disjoint token sets stay nearly orthogonal at dim 1024") {
  // 100 random pairs of disjoint 10-token texts; self-similarity is exactly 1,
  // cross-similarity stays small. The 0.2 bound was measured for this seed.
  Rng rng(2024);
  auto random_token = [&](const char* prefix, int salt) {
    std::string t = prefix;
    t += std::to_string(salt);
    for (int i = 0; i < 4; ++i) t += char('a' + rng.uniform_index(26));
    return t;
  };
  double max_abs_cos = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    std::string text_a, text_b;
    for (int i = 0; i < 10; ++i) {
      text_a += random_token("left", trial * 100 + i) + " ";
      text_b += random_token("right", trial * 100 + i) + " ";
    }
    const auto fm = hashed_bow({make_item("a", text_a), make_item("b", text_b)}, 1024);
    CHECK(cosine(fm.rows[0], fm.rows[0]) == doctest::Approx(1.0).epsilon(1e-12));
    max_abs_cos = std::max(max_abs_cos, std::fabs(cosine(fm.rows[0], fm.rows[1])));
  }
  CHECK(max_abs_cos <= 0.2);
}

TEST_CASE("one-hot annotator features are the identity") {
  const auto fm = one_hot_annotators(3);
  CHECK(fm.dim == 3);
  CHECK(fm.rows[0] == Vec{1.0, 0.0, 0.0});
  CHECK(fm.rows[1] == Vec{0.0, 1.0, 0.0});
  CHECK(fm.rows[2] == Vec{0.0, 0.0, 1.0});
  for (const auto& row : fm.rows) {
    double sum = 0.0;
    for (double v : row) sum += v;
    CHECK(sum == 1.0);
  }
  CHECK_THROWS_AS(one_hot_annotators(0), std::invalid_argument);
}

TEST_CASE("W_A e_n extracts column n of W_A") {
  Rng rng(77);
  const std::size_t rows = 6, cols = 4;
  Matrix w(rows, cols);
  for (std::size_t k = 0; k < w.size(); ++k) w.at_flat(k) = rng.normal();
  const auto one_hot = one_hot_annotators(cols);
  for (std::size_t n = 0; n < cols; ++n) {
    const Vec out = matvec(w, one_hot.rows[n]);
    for (std::size_t i = 0; i < rows; ++i) CHECK(out[i] == w(i, n));
  }
}

TEST_CASE("select_rows keeps order and validates indices") {
  FeatureMatrix fm;
  fm.dim = 2;
  fm.rows = {{0.0, 0.0}, {1.0, 1.0}, {2.0, 2.0}};
  const auto sel = select_rows(fm, {2, 0});
  CHECK(sel.rows == std::vector<Vec>{{2.0, 2.0}, {0.0, 0.0}});
  CHECK_THROWS_AS(select_rows(fm, {5}), std::out_of_range);
}

TEST_CASE("word tokenization") {
  CHECK(word_tokens("Hello, World! 42") ==
        std::vector<std::string>{"hello", "world", "42"});
  CHECK(word_tokens("") == std::vector<std::string>{});
  CHECK(whitespace_tokens("a  b\tc\n") == std::vector<std::string>{"a", "b", "c"});
}
