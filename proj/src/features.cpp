#include "disco/features.hpp"

#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

namespace disco {

void FeatureMatrix::validate() const {
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != dim)
      throw std::runtime_error("feature row " + std::to_string(i) + " has length " +
                               std::to_string(rows[i].size()) + ", expected " +
                               std::to_string(dim));
    for (double v : rows[i]) {
      if (!std::isfinite(v))
        throw std::runtime_error("non-finite feature value in row " + std::to_string(i));
    }
  }
}

FeatureMatrix load_embeddings(const std::string& path,
                              const std::vector<std::string>& expected_ids) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open embeddings file: " + path);

  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty embeddings file: " + path);
  std::size_t dim = 0;
  {
    std::istringstream hs(line);
    std::string tag;
    if (!(hs >> tag >> dim) || tag != "#dim" || dim == 0)
      throw std::runtime_error("embeddings file must start with '#dim <D>': " + path);
  }

  std::unordered_map<std::string, Vec> by_id;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos)
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": missing tab separator");
    const std::string id = line.substr(0, tab);
    Vec v;
    v.reserve(dim);
    std::istringstream vs(line.substr(tab + 1));
    double x;
    while (vs >> x) v.push_back(x);
    if (v.size() != dim)
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": vector for '" + id +
                               "' has " + std::to_string(v.size()) + " values, expected " +
                               std::to_string(dim));
    for (double e : v) {
      if (!std::isfinite(e))
        throw std::runtime_error(path + ":" + std::to_string(lineno) +
                                 ": non-finite value for '" + id + "'");
    }
    by_id[id] = std::move(v);
  }

  FeatureMatrix fm;
  fm.dim = dim;
  fm.source = FeatureSource::embedding_file;
  fm.rows.reserve(expected_ids.size());
  for (const auto& id : expected_ids) {
    auto it = by_id.find(id);
    if (it == by_id.end())
      throw std::runtime_error("embeddings file " + path + " is missing id '" + id + "'");
    fm.rows.push_back(it->second);
  }
  return fm;
}

void save_embeddings(const FeatureMatrix& fm, const std::vector<std::string>& ids,
                     const std::string& path) {
  if (ids.size() != fm.rows.size())
    throw std::invalid_argument("save_embeddings: id/row count mismatch");
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write embeddings file: " + path);
  out << "#dim " << fm.dim << "\n";
  char buf[32];
  for (std::size_t i = 0; i < ids.size(); ++i) {
    out << ids[i] << '\t';
    for (std::size_t j = 0; j < fm.rows[i].size(); ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", fm.rows[i][j]);
      if (j) out << ' ';
      out << buf;
    }
    out << '\n';
  }
}

MetadataTemplate MetadataTemplate::default_template() {
  return MetadataTemplate{
      "The annotator is {age} years old, identifies as {gender}, is from "
      "{nationality}, and has {education} education."};
}

namespace {

// Substitutes {key} placeholders; returns false if any referenced key is
// missing from the metadata map.
bool substitute_clause(const std::string& clause,
                       const std::map<std::string, std::string>& meta, std::string& out) {
  out.clear();
  std::size_t pos = 0;
  while (pos < clause.size()) {
    const auto open = clause.find('{', pos);
    if (open == std::string::npos) {
      out.append(clause, pos, std::string::npos);
      break;
    }
    const auto close = clause.find('}', open);
    if (close == std::string::npos) {
      out.append(clause, pos, std::string::npos);
      break;
    }
    out.append(clause, pos, open - pos);
    const std::string key = clause.substr(open + 1, close - open - 1);
    auto it = meta.find(key);
    if (it == meta.end() || it->second.empty()) return false;
    out.append(it->second);
    pos = close + 1;
  }
  return true;
}

std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

}  // namespace

std::string render_metadata_text(const Annotator& a, const MetadataTemplate& t) {
  // Clauses are the comma-separated segments of the template; a clause whose
  // placeholder has no value is dropped and the sentence re-joined.
  std::vector<std::string> clauses;
  std::string cur;
  std::istringstream ss(t.text);
  while (std::getline(ss, cur, ',')) {
    cur = trim(cur);
    if (cur.rfind("and ", 0) == 0) cur = cur.substr(4);
    if (!cur.empty() && cur.back() == '.') cur.pop_back();
    if (!cur.empty()) clauses.push_back(cur);
  }

  std::vector<std::string> rendered;
  std::string out;
  for (const auto& clause : clauses) {
    if (substitute_clause(clause, a.metadata, out)) rendered.push_back(out);
  }
  if (rendered.empty()) return "No annotator metadata is available.";

  std::string sentence;
  for (std::size_t i = 0; i < rendered.size(); ++i) {
    if (i > 0) sentence += ", ";
    if (i > 0 && i + 1 == rendered.size()) sentence += "and ";
    sentence += rendered[i];
  }
  sentence += ".";
  return sentence;
}

std::vector<std::string> word_tokens(const std::string& text) {
  std::vector<std::string> tokens;
  std::string cur;
  for (unsigned char c : text) {
    const bool word_char = (c >= 0x80) || std::isalnum(c);
    if (word_char) {
      cur.push_back(c < 0x80 ? static_cast<char>(std::tolower(c)) : static_cast<char>(c));
    } else if (!cur.empty()) {
      tokens.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) tokens.push_back(std::move(cur));
  return tokens;
}

std::vector<std::string> whitespace_tokens(const std::string& text) {
  std::vector<std::string> tokens;
  std::istringstream ss(text);
  std::string tok;
  while (ss >> tok) tokens.push_back(tok);
  return tokens;
}

namespace {

constexpr std::uint64_t kBucketSeed = 0x6f6e65686f746261ULL;
constexpr std::uint64_t kSignSeed = 0x7369676e68617368ULL;

std::uint64_t fnv1a64(const std::string& s, std::uint64_t seed) {
  std::uint64_t h = 1469598103934665603ULL ^ seed;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace

FeatureMatrix hashed_bow(const std::vector<Item>& items, std::size_t dim,
                         const std::map<std::string, double>& field_weights) {
  if (dim < 16) throw std::invalid_argument("hashed_bow: dim must be >= 16");
  FeatureMatrix fm;
  fm.dim = dim;
  fm.source = FeatureSource::hashed_bow;
  fm.rows.reserve(items.size());
  for (const auto& item : items) {
    Vec v(dim, 0.0);
    for (const auto& [field, text] : item.text_fields) {
      auto wit = field_weights.find(field);
      const double w = wit == field_weights.end() ? 1.0 : wit->second;
      if (w == 0.0) continue;
      for (const auto& tok : word_tokens(text)) {
        const std::size_t bucket = fnv1a64(tok, kBucketSeed) % dim;
        const double sign = (fnv1a64(tok, kSignSeed) & 1u) ? 1.0 : -1.0;
        v[bucket] += sign * w;
      }
    }
    double norm = 0.0;
    for (double e : v) norm += e * e;
    if (norm > 0.0) {
      norm = std::sqrt(norm);
      for (double& e : v) e /= norm;
    }
    fm.rows.push_back(std::move(v));
  }
  return fm;
}

FeatureMatrix one_hot_annotators(std::size_t n) {
  if (n < 1) throw std::invalid_argument("one_hot_annotators: need at least one annotator");
  FeatureMatrix fm;
  fm.dim = n;
  fm.source = FeatureSource::one_hot;
  fm.rows.assign(n, Vec(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) fm.rows[i][i] = 1.0;
  return fm;
}

FeatureMatrix select_rows(const FeatureMatrix& fm, const std::vector<std::size_t>& rows) {
  FeatureMatrix out;
  out.dim = fm.dim;
  out.source = fm.source;
  out.rows.reserve(rows.size());
  for (std::size_t r : rows) {
    if (r >= fm.rows.size()) throw std::out_of_range("select_rows: row index out of range");
    out.rows.push_back(fm.rows[r]);
  }
  return out;
}

}  // namespace disco
