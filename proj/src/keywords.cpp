#include "pm/keywords.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "pm/error.hpp"

namespace pm {

namespace detail {
extern const std::string_view kStopwordsText;
}

namespace {

bool is_token_byte(unsigned char c) noexcept {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c >= 0x80;
}

char lower(char c) noexcept { return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c; }

std::string join(std::span<const std::string> tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += ' ';
    out += tokens[i];
  }
  return out;
}

std::vector<std::string> split_spaces(std::string_view text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    const auto j = text.find(' ', i);
    if (j == std::string_view::npos) {
      out.emplace_back(text.substr(i));
      break;
    }
    if (j > i) out.emplace_back(text.substr(i, j - i));
    i = j + 1;
  }
  return out;
}

const Stopwords& resolve(const KeywordOptions& o) { return o.stopwords ? *o.stopwords : default_stopwords(); }

double apply_log(double x, LogBase base) { return base == LogBase::base10 ? std::log10(x) : std::log(x); }

// Sorts by `value` descending, then applies `tie_less` inside each run of
// values tied (relative tolerance) with the run's first element.
template <typename T, typename Value, typename TieLess>
void rank(std::vector<T>& items, Value value, TieLess tie_less) {
  std::stable_sort(items.begin(), items.end(), [&](const T& a, const T& b) { return value(a) > value(b); });
  std::size_t start = 0;
  while (start < items.size()) {
    std::size_t end = start + 1;
    while (end < items.size() && scores_tied(value(items[start]), value(items[end]))) ++end;
    std::stable_sort(items.begin() + static_cast<std::ptrdiff_t>(start),
                     items.begin() + static_cast<std::ptrdiff_t>(end), tie_less);
    start = end;
  }
}

bool keyword_tie_less(const KeywordScore& a, const KeywordScore& b) {
  if (a.term.n != b.term.n) return a.term.n > b.term.n;
  return a.term.text < b.term.text;
}

}  // namespace

Term make_term(std::string_view text) {
  const auto tokens = split_spaces(text);
  return Term{join(tokens), tokens.size()};
}

std::vector<TokenSpan> tokenize_with_offsets(std::string_view prompt) {
  std::vector<TokenSpan> out;
  std::size_t i = 0;
  while (i < prompt.size()) {
    while (i < prompt.size() && !is_token_byte(static_cast<unsigned char>(prompt[i]))) ++i;
    if (i == prompt.size()) break;
    TokenSpan span;
    span.begin = i;
    while (i < prompt.size() && is_token_byte(static_cast<unsigned char>(prompt[i]))) span.token += lower(prompt[i++]);
    span.end = i;
    out.push_back(std::move(span));
  }
  return out;
}

std::vector<std::string> tokenize(std::string_view prompt) {
  std::vector<std::string> out;
  for (auto& s : tokenize_with_offsets(prompt)) out.push_back(std::move(s.token));
  return out;
}

Stopwords parse_stopwords(std::string_view text) {
  Stopwords out;
  std::size_t i = 0;
  while (i <= text.size()) {
    auto j = text.find('\n', i);
    if (j == std::string_view::npos) j = text.size();
    std::string_view line = text.substr(i, j - i);
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.remove_suffix(1);
    while (!line.empty() && line.front() == ' ') line.remove_prefix(1);
    if (!line.empty()) out.emplace(line);
    i = j + 1;
  }
  return out;
}

const Stopwords& default_stopwords() {
  static const Stopwords list = parse_stopwords(detail::kStopwordsText);
  return list;
}

std::vector<Term> extract_terms(std::span<const std::string> tokens, std::size_t max_n, const Stopwords& stopwords) {
  std::vector<Term> out;
  if (max_n == 0) throw Error(ErrorCode::InvalidInput, "max_n must be >= 1");
  std::vector<bool> stop(tokens.size());
  for (std::size_t i = 0; i < tokens.size(); ++i) stop[i] = stopwords.contains(tokens[i]);
  for (std::size_t n = 1; n <= max_n; ++n) {
    for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
      if (stop[i] || stop[i + n - 1]) continue;
      out.push_back(Term{join(tokens.subspan(i, n)), n});
    }
  }
  return out;
}

std::map<std::string, std::size_t> count_terms(std::string_view prompt, std::size_t max_n, const Stopwords& stopwords) {
  std::map<std::string, std::size_t> counts;
  const auto tokens = tokenize(prompt);
  for (auto& t : extract_terms(tokens, max_n, stopwords)) ++counts[std::move(t.text)];
  return counts;
}

const KeywordScore* ClusterKeywords::find(std::string_view term) const {
  auto it = std::lower_bound(scores.begin(), scores.end(), term,
                             [](const KeywordScore& s, std::string_view t) { return s.term.text < t; });
  return (it != scores.end() && it->term.text == term) ? &*it : nullptr;
}

const ClusterKeywords* KeywordTable::find_cluster(int node_id) const {
  for (const auto& c : clusters) {
    if (c.node_id == node_id) return &c;
  }
  return nullptr;
}

bool scores_tied(double a, double b) noexcept {
  return std::abs(a - b) <= kScoreTieTolerance * std::max(std::abs(a), std::abs(b));
}

KeywordTable compute_tfidf(std::span<const ClusterDocuments> clusters, std::span<const std::string> corpus,
                           const KeywordOptions& options) {
  if (corpus.empty()) throw Error(ErrorCode::EmptyCorpus, "compute_tfidf");
  const Stopwords& stopwords = resolve(options);
  KeywordTable table;
  table.corpus_size = corpus.size();
  table.log_base = options.log_base;
  for (const auto& doc : corpus) {
    for (const auto& [term, count] : count_terms(doc, options.max_n, stopwords)) ++table.document_frequency[term];
  }
  const double d = static_cast<double>(corpus.size());

  for (const auto& cluster : clusters) {
    std::map<std::string, std::size_t> counts;
    for (const auto& prompt : cluster.prompts) {
      for (const auto& [term, count] : count_terms(prompt, options.max_n, stopwords)) counts[term] += count;
    }
    ClusterKeywords ck;
    ck.node_id = cluster.node_id;
    ck.leaf_count = cluster.leaf_count;
    for (const auto& [term, count] : counts) ck.total_occurrences += count;
    double max_tfidf = 0.0;
    for (const auto& [term, count] : counts) {
      auto df = table.document_frequency.find(term);
      if (df == table.document_frequency.end()) {
        throw Error(ErrorCode::InvalidInput, "cluster term '" + term + "' does not occur in the corpus");
      }
      KeywordScore s;
      s.term = Term{term, split_spaces(term).size()};
      s.cluster_id = cluster.node_id;
      s.count = count;
      s.tf = static_cast<double>(count) / static_cast<double>(ck.total_occurrences);
      s.idf = apply_log(d / static_cast<double>(df->second), options.log_base);
      s.tfidf = s.tf * s.idf;
      s.best_cluster = cluster.node_id;
      max_tfidf = std::max(max_tfidf, s.tfidf);
      ck.scores.push_back(std::move(s));
    }
    for (auto& s : ck.scores) s.normalized = max_tfidf > 0.0 ? s.tfidf / max_tfidf : 0.0;
    table.clusters.push_back(std::move(ck));
  }
  for (auto& ck : table.clusters) {
    for (auto& s : ck.scores) s.best_cluster = match_keyword(s.term, table);
  }
  return table;
}

std::vector<KeywordScore> top_keywords(const KeywordTable& table, int cluster_id, std::size_t k) {
  const auto* cluster = table.find_cluster(cluster_id);
  if (!cluster) throw Error(ErrorCode::UnknownCluster, std::to_string(cluster_id));
  std::vector<KeywordScore> ranked = cluster->scores;
  rank(ranked, [](const KeywordScore& s) { return s.tfidf; }, keyword_tie_less);
  if (ranked.size() > k) ranked.resize(k);
  return ranked;
}

int match_keyword(const Term& term, const KeywordTable& table) {
  const KeywordScore* best = nullptr;
  std::size_t best_leaves = 0;
  for (const auto& cluster : table.clusters) {
    const KeywordScore* s = cluster.find(term.text);
    if (!s) continue;
    bool better = false;
    if (!best) {
      better = true;
    } else if (!scores_tied(s->normalized, best->normalized)) {
      better = s->normalized > best->normalized;
    } else if (!scores_tied(s->tfidf, best->tfidf)) {
      better = s->tfidf > best->tfidf;
    } else if (cluster.leaf_count != best_leaves) {
      better = cluster.leaf_count < best_leaves;
    } else {
      better = s->cluster_id < best->cluster_id;
    }
    if (better) {
      best = s;
      best_leaves = cluster.leaf_count;
    }
  }
  if (!best) throw Error(ErrorCode::UnknownTerm, term.text);
  return best->cluster_id;
}

bool is_subgram(const Term& inner, const Term& outer) {
  const auto a = split_spaces(inner.text);
  const auto b = split_spaces(outer.text);
  if (a.empty() || a.size() > b.size()) return false;
  return std::search(b.begin(), b.end(), a.begin(), a.end()) != b.end();
}

std::vector<KeywordScore> dedup_subgrams(std::span<const KeywordScore> keywords) {
  std::vector<std::size_t> order(keywords.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return keywords[a].term.n > keywords[b].term.n; });
  std::vector<bool> keep(keywords.size(), false);
  std::vector<std::size_t> kept;
  for (std::size_t i : order) {
    const bool covered = std::any_of(kept.begin(), kept.end(),
                                     [&](std::size_t r) { return is_subgram(keywords[i].term, keywords[r].term); });
    if (covered) continue;
    keep[i] = true;
    kept.push_back(i);
  }
  std::vector<KeywordScore> out;
  for (std::size_t i = 0; i < keywords.size(); ++i) {
    if (keep[i]) out.push_back(keywords[i]);
  }
  return out;
}

std::vector<KeywordScore> selection_keywords(std::span<const std::string> selected_prompts,
                                             std::span<const std::string> corpus, std::size_t k,
                                             const KeywordOptions& options) {
  if (selected_prompts.empty()) throw Error(ErrorCode::EmptySelection, "selection_keywords");
  ClusterDocuments selection{kSelectionClusterId, selected_prompts.size(),
                             {selected_prompts.begin(), selected_prompts.end()}};
  const auto table = compute_tfidf({&selection, 1}, corpus, options);
  auto ranked = top_keywords(table, kSelectionClusterId, table.clusters.front().scores.size());
  auto deduped = dedup_subgrams(ranked);
  if (deduped.size() > k) deduped.resize(k);
  return deduped;
}

std::vector<KeywordSpan> keyword_spans(std::string_view prompt, std::span<const Term> terms) {
  const auto tokens = tokenize_with_offsets(prompt);
  std::vector<KeywordSpan> out;
  for (const auto& term : terms) {
    const auto parts = split_spaces(term.text);
    if (parts.empty()) continue;
    for (std::size_t i = 0; i + parts.size() <= tokens.size(); ++i) {
      bool match = true;
      for (std::size_t j = 0; j < parts.size() && match; ++j) match = tokens[i + j].token == parts[j];
      if (match) out.push_back({term.text, tokens[i].begin, tokens[i + parts.size() - 1].end});
    }
  }
  std::sort(out.begin(), out.end(), [](const KeywordSpan& a, const KeywordSpan& b) {
    if (a.begin != b.begin) return a.begin < b.begin;
    if (a.end != b.end) return a.end > b.end;
    return a.term < b.term;
  });
  return out;
}

}  // namespace pm
