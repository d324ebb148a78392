#pragma once

// Description-quality metrics: BLEU, ROUGE-L, embedding cosine and an
// LLM judge, all scoring a candidate text against a reference.

#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace fovea {

struct TokenizedText {
  std::vector<std::string> tokens;
  std::size_t char_len = 0;
};

// Lowercases ASCII and splits on runs of non-alphanumeric characters. Bytes of
// multi-byte UTF-8 sequences count as alphanumeric.
TokenizedText tokenize_text(std::string_view text);

// Number of Unicode code points in a UTF-8 string.
std::size_t utf8_length(std::string_view text);

enum class MetricKind { kBleu, kRougeL, kEmbedCos, kLlmJudge };

std::string_view metric_name(MetricKind kind);
MetricKind parse_metric(std::string_view name);  // accepts "rouge" for rouge_l, "embed", "judge"

struct MetricScore {
  MetricKind metric = MetricKind::kBleu;
  double value = 0.0;
  bool flagged = false;  // bleu: empty candidate
  double raw = 0.0;      // embed_cos: cosine before mapping to [0, 1]
};

MetricScore bleu(const TokenizedText& candidate, const TokenizedText& reference, int max_n = 4);

struct RougeL {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

std::size_t lcs_length(const std::vector<std::string>& a, const std::vector<std::string>& b);
RougeL rouge_l(const TokenizedText& candidate, const TokenizedText& reference);

// ---------------------------------------------------------------------------
// Embeddings

class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  // Returns an L2-normalised vector of fixed dimensionality.
  virtual std::vector<double> embed(std::string_view text) = 0;
};

// 256-bucket hashed bag of words (FNV-1a over each token), L2-normalised.
// Deterministic and offline; texts sharing no token bucket have cosine 0.
class HashedBowEmbedding : public EmbeddingProvider {
 public:
  explicit HashedBowEmbedding(std::size_t dims = 256) : dims_(dims) {}
  std::vector<double> embed(std::string_view text) override;
  std::size_t bucket(std::string_view token) const;

 private:
  std::size_t dims_;
};

// POST {"texts": [...]} to `url`, expects {"embeddings": [[...], ...]}.
class HttpEmbeddingProvider : public EmbeddingProvider {
 public:
  explicit HttpEmbeddingProvider(std::string url, int timeout_s = 30);
  std::vector<double> embed(std::string_view text) override;

 private:
  std::string url_;
  int timeout_s_;
};

MetricScore embed_similarity(std::string_view a, std::string_view b, EmbeddingProvider& provider);

// ---------------------------------------------------------------------------
// LLM judge

// A text-completion backend; every complete() call is a new conversation.
class JudgeClient {
 public:
  virtual ~JudgeClient() = default;
  virtual std::string complete(const std::string& prompt) = 0;
};

// Scores 100 * ROUGE-L recall of Text B over Text A, read back out of the
// filled judge prompt, and replies in the requested "** Score:N **" format.
class MockJudge : public JudgeClient {
 public:
  std::string complete(const std::string& prompt) override;
  int calls() const { return calls_; }

 private:
  int calls_ = 0;
};

// Throws Error(kScoreNotFound) when the reply has no "** Score:<int> **" line.
int parse_judge_score(std::string_view reply);

// text_a is the reference, text_b the candidate. Returns nullopt when no score
// could be parsed even after one retry.
std::optional<MetricScore> llm_judge(std::string_view text_a, std::string_view text_b,
                                     JudgeClient& client);

}  // namespace fovea
