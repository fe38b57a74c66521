#pragma once

#include <map>
#include <string>
#include <vector>

#include "disco/corpus.hpp"
#include "disco/matrix.hpp"

namespace disco {

enum class FeatureSource { embedding_file, hashed_bow, one_hot, metadata_embedding };

// Per-entity feature vectors; row index is the entity index (item m or
// annotator n) in whatever id order the matrix was built for.
struct FeatureMatrix {
  std::size_t dim = 0;
  std::vector<Vec> rows;
  FeatureSource source = FeatureSource::embedding_file;

  std::size_t count() const { return rows.size(); }
  void validate() const;  // every row finite and exactly `dim` wide
};

// Embeddings TSV: first line "#dim <D>", then "<id>\t<v1> <v2> ... <vD>".
// Rows are returned in expected_ids order; a missing id is an error.
FeatureMatrix load_embeddings(const std::string& path,
                              const std::vector<std::string>& expected_ids);
void save_embeddings(const FeatureMatrix& fm, const std::vector<std::string>& ids,
                     const std::string& path);

struct MetadataTemplate {
  std::string text;

  static MetadataTemplate default_template();
};

// Renders annotator metadata as one sentence. Clauses whose placeholders have
// no metadata value are dropped; fully-absent metadata yields a fixed
// fallback sentence.
std::string render_metadata_text(const Annotator& a, const MetadataTemplate& t);

// Signed feature hashing over lowercased word tokens, L2-normalized unless the
// text produced no tokens at all. Fields missing from field_weights get 1.0.
FeatureMatrix hashed_bow(const std::vector<Item>& items, std::size_t dim,
                         const std::map<std::string, double>& field_weights = {});

FeatureMatrix one_hot_annotators(std::size_t n);

// Row subset in the given order (e.g. to restrict item features to one split).
FeatureMatrix select_rows(const FeatureMatrix& fm, const std::vector<std::size_t>& rows);

// Lowercased word tokens: runs of ASCII alphanumerics or non-ASCII bytes.
std::vector<std::string> word_tokens(const std::string& text);

// Plain whitespace split (used for token counts in diagnostics).
std::vector<std::string> whitespace_tokens(const std::string& text);

}  // namespace disco
