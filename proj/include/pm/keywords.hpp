#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace pm {

/// A candidate keyword: 1..3 lowercase tokens joined by single spaces.
struct Term {
  std::string text;
  std::size_t n = 1;

  friend auto operator<=>(const Term&, const Term&) = default;
  friend bool operator==(const Term&, const Term&) = default;
};

Term make_term(std::string_view text);

struct TokenSpan {
  std::string token;
  std::size_t begin = 0;  // byte offsets into the source string
  std::size_t end = 0;
};

/// Lowercases ASCII and splits on every byte that is not an ASCII letter or
/// digit. Bytes >= 0x80 count as letters so UTF-8 sequences stay intact.
std::vector<std::string> tokenize(std::string_view prompt);
std::vector<TokenSpan> tokenize_with_offsets(std::string_view prompt);

using Stopwords = std::set<std::string, std::less<>>;

/// The list shipped in data/stopwords.txt, compiled in.
const Stopwords& default_stopwords();
Stopwords parse_stopwords(std::string_view text);

/// Every contiguous n-gram (n = 1..max_n) whose first and last tokens are
/// not stopwords. Repeated n-grams are reported once per occurrence.
std::vector<Term> extract_terms(std::span<const std::string> tokens, std::size_t max_n = 3,
                                const Stopwords& stopwords = default_stopwords());

/// Occurrence counts of every candidate term of one prompt.
std::map<std::string, std::size_t> count_terms(std::string_view prompt, std::size_t max_n = 3,
                                               const Stopwords& stopwords = default_stopwords());

enum class LogBase { base10, natural };

struct KeywordOptions {
  std::size_t max_n = 3;
  LogBase log_base = LogBase::base10;
  const Stopwords* stopwords = nullptr;  // null selects default_stopwords()
};

/// One eligible cluster and the prompts of its member images.
struct ClusterDocuments {
  int node_id = 0;
  std::size_t leaf_count = 0;
  std::vector<std::string> prompts;
};

struct KeywordScore {
  Term term;
  int cluster_id = 0;
  std::size_t count = 0;  // occurrences in the cluster
  double tf = 0.0;
  double idf = 0.0;
  double tfidf = 0.0;
  double normalized = 0.0;
  int best_cluster = 0;

  friend bool operator==(const KeywordScore&, const KeywordScore&) = default;
};

struct ClusterKeywords {
  int node_id = 0;
  std::size_t leaf_count = 0;
  std::size_t total_occurrences = 0;
  std::vector<KeywordScore> scores;  // sorted by term text

  const KeywordScore* find(std::string_view term) const;
  friend bool operator==(const ClusterKeywords&, const ClusterKeywords&) = default;
};

/// Cluster-level TF-IDF over a fixed document collection.
struct KeywordTable {
  std::size_t corpus_size = 0;
  LogBase log_base = LogBase::base10;
  std::map<std::string, std::size_t> document_frequency;
  std::vector<ClusterKeywords> clusters;  // input order

  const ClusterKeywords* find_cluster(int node_id) const;
  bool empty() const noexcept { return clusters.empty(); }
  friend bool operator==(const KeywordTable&, const KeywordTable&) = default;
};

/// tf = n_ix / sum_k n_kx, pooling every gram order of the cluster;
/// idf = log(|D| / df) with one prompt per document; tfidf = tf * idf,
/// normalised by the cluster maximum. Every cluster prompt must also be a
/// document of `corpus`.
KeywordTable compute_tfidf(std::span<const ClusterDocuments> clusters, std::span<const std::string> corpus,
                           const KeywordOptions& options = {});

/// Relative tolerance under which two scores are treated as tied.
inline constexpr double kScoreTieTolerance = 1e-10;
bool scores_tied(double a, double b) noexcept;

/// The k highest-tfidf terms of a cluster; ties prefer higher n, then the
/// lexicographically smaller term.
std::vector<KeywordScore> top_keywords(const KeywordTable& table, int cluster_id, std::size_t k = 5);

/// Cluster maximising normalized tfidf among those containing the term;
/// ties prefer higher raw tfidf, then fewer leaves, then lower node id.
int match_keyword(const Term& term, const KeywordTable& table);

/// Drops any term that is a contiguous token subsequence of a longer term
/// kept before it. Longer terms are considered first; output keeps input order.
std::vector<KeywordScore> dedup_subgrams(std::span<const KeywordScore> keywords);

/// True when `inner` occurs as a contiguous token run inside `outer`.
bool is_subgram(const Term& inner, const Term& outer);

inline constexpr int kSelectionClusterId = -1;

/// Scores the selected prompts as one cluster against `corpus` and returns
/// the top k after sub-gram removal.
std::vector<KeywordScore> selection_keywords(std::span<const std::string> selected_prompts,
                                             std::span<const std::string> corpus, std::size_t k,
                                             const KeywordOptions& options = {});

struct KeywordSpan {
  std::string term;
  std::size_t begin = 0;
  std::size_t end = 0;

  friend bool operator==(const KeywordSpan&, const KeywordSpan&) = default;
};

/// Byte ranges of `prompt` where a term's tokens appear consecutively
/// (case-insensitive, whole tokens only), ordered by position.
std::vector<KeywordSpan> keyword_spans(std::string_view prompt, std::span<const Term> terms);

}  // namespace pm
