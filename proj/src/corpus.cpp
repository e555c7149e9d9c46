#include "bspa/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <unordered_set>

namespace bspa {

std::vector<TermScore> tfidf_rank(const std::vector<TokenList>& docs) {
  std::map<std::string, std::size_t> count;
  std::map<std::string, std::size_t> df;
  std::size_t total = 0;
  for (const auto& doc : docs) {
    std::set<std::string_view> seen;
    for (const auto& t : doc) {
      ++count[t];
      if (seen.insert(t).second) ++df[t];
    }
    total += doc.size();
  }
  if (total == 0) throw ValidationError("empty corpus");

  const auto n_docs = static_cast<double>(docs.size());
  std::vector<TermScore> out;
  out.reserve(count.size());
  for (const auto& [token, c] : count) {
    const double tf = static_cast<double>(c) / static_cast<double>(total);
    const double idf = std::log(n_docs / static_cast<double>(df[token]));
    out.push_back({token, tf * idf});
  }
  // map iteration is already lexicographic, so a stable sort keeps the tie rule.
  std::stable_sort(out.begin(), out.end(),
                   [](const TermScore& a, const TermScore& b) { return a.score > b.score; });
  return out;
}

std::vector<Prompt> clean_prompts(const std::vector<Prompt>& prompts) {
  std::vector<Prompt> out;
  std::unordered_set<std::string> seen;
  for (const auto& p : prompts) {
    if (p.tokens().empty()) continue;
    if (!seen.insert(join_tokens(p.tokens())).second) continue;
    out.push_back(p);
  }
  return out;
}

InsufficientWordsError::InsufficientWordsError(std::size_t achievable, std::size_t requested)
    : ValidationError("only " + std::to_string(achievable) +
                      " distinct tokens survive the text filter, " + std::to_string(requested) +
                      " requested"),
      achievable_(achievable) {}

std::vector<SensitiveWord> build_sensitive_word_set(const std::vector<Prompt>& corpus,
                                                    const TextFilter& text_filter,
                                                    std::size_t size, double threshold) {
  if (size < 1) throw ValidationError("sensitive word set size must be >= 1");
  if (corpus.empty()) throw ValidationError("corpus is empty");

  std::vector<TokenList> survivors;
  for (const auto& p : clean_prompts(corpus)) {
    if (text_filter.score(p.text()) <= threshold) survivors.push_back(p.tokens());
  }
  if (survivors.empty()) throw InsufficientWordsError(0, size);

  const auto ranked = tfidf_rank(survivors);
  if (ranked.size() < size) throw InsufficientWordsError(ranked.size(), size);

  std::vector<SensitiveWord> words;
  words.reserve(size);
  for (std::size_t i = 0; i < size; ++i) {
    int df = 0;
    for (const auto& doc : survivors) {
      if (std::find(doc.begin(), doc.end(), ranked[i].token) != doc.end()) ++df;
    }
    words.push_back({static_cast<int>(i), ranked[i].token, df, ranked[i].score});
  }
  return words;
}

CorpusStats dataset_stats(const std::vector<Prompt>& prompts, const TextFilter& text_filter,
                          double threshold) {
  if (prompts.empty()) throw ValidationError("dataset_stats: no prompts");
  CorpusStats stats;
  stats.prompt_count = prompts.size();
  std::size_t total_tokens = 0;
  std::size_t toxic = 0;
  std::unordered_set<std::string> vocab;
  for (const auto& p : prompts) {
    total_tokens += p.tokens().size();
    vocab.insert(p.tokens().begin(), p.tokens().end());
    if (text_filter.score(p.text()) > threshold) ++toxic;
  }
  const auto n = static_cast<double>(prompts.size());
  stats.avg_length = static_cast<double>(total_tokens) / n;
  stats.token_count = vocab.size();
  stats.toxic_rate = static_cast<double>(toxic) / n;
  return stats;
}

std::string words_to_jsonl(const std::vector<SensitiveWord>& words) {
  std::string out;
  for (const auto& w : words) {
    nlohmann::json j = {{"id", w.id}, {"surface", w.surface}, {"df", w.df}, {"tfidf", w.tfidf}};
    out += j.dump();
    out.push_back('\n');
  }
  return out;
}

void write_words_jsonl(const std::string& path, const std::vector<SensitiveWord>& words) {
  write_text_file(path, words_to_jsonl(words));
}

void validate_word_set(const std::vector<SensitiveWord>& words) {
  std::unordered_set<std::string> surfaces;
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (words[i].id != static_cast<int>(i)) {
      throw ValidationError("sensitive word ids must be 0..n-1 in order; found id " +
                            std::to_string(words[i].id) + " at position " + std::to_string(i));
    }
    if (!surfaces.insert(words[i].surface).second) {
      throw ValidationError("duplicate sensitive word '" + words[i].surface + "'");
    }
  }
}

std::vector<SensitiveWord> read_words_jsonl(const std::string& path) {
  std::vector<SensitiveWord> words;
  for (const auto& j : read_jsonl(path)) {
    try {
      words.push_back({j.at("id").get<int>(), j.at("surface").get<std::string>(),
                       j.value("df", 0), j.value("tfidf", 0.0)});
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError(path + ": bad sensitive word record: " + e.what());
    }
  }
  validate_word_set(words);
  return words;
}

}  // namespace bspa
