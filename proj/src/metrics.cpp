#include "fovea/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <regex>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "fovea/error.hpp"
#include "fovea/gaze.hpp"
#include "fovea/prompts.hpp"
#include "http_util.hpp"

namespace fovea {

namespace {

bool is_token_byte(unsigned char c) { return std::isalnum(c) || c >= 0x80; }

}  // namespace

std::size_t utf8_length(std::string_view text) {
  std::size_t n = 0;
  for (unsigned char c : text)
    if ((c & 0xC0) != 0x80) ++n;
  return n;
}

TokenizedText tokenize_text(std::string_view text) {
  TokenizedText out;
  out.char_len = utf8_length(text);
  std::string cur;
  for (unsigned char c : text) {
    if (is_token_byte(c)) {
      cur.push_back(c < 0x80 ? static_cast<char>(std::tolower(c)) : static_cast<char>(c));
    } else if (!cur.empty()) {
      out.tokens.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.tokens.push_back(std::move(cur));
  return out;
}

std::string_view metric_name(MetricKind kind) {
  switch (kind) {
    case MetricKind::kBleu: return "bleu";
    case MetricKind::kRougeL: return "rouge_l";
    case MetricKind::kEmbedCos: return "embed_cos";
    case MetricKind::kLlmJudge: return "llm_judge";
  }
  return "bleu";
}

MetricKind parse_metric(std::string_view name) {
  if (name == "bleu") return MetricKind::kBleu;
  if (name == "rouge" || name == "rouge_l") return MetricKind::kRougeL;
  if (name == "embed" || name == "embed_cos") return MetricKind::kEmbedCos;
  if (name == "judge" || name == "llm_judge") return MetricKind::kLlmJudge;
  throw Error(ErrorCode::kInvalidArgument, "unknown metric '" + std::string(name) + "'");
}

// ---------------------------------------------------------------------------
// BLEU

MetricScore bleu(const TokenizedText& candidate, const TokenizedText& reference, int max_n) {
  if (max_n < 1) throw Error(ErrorCode::kInvalidArgument, "max_n must be >= 1");
  MetricScore s{MetricKind::kBleu, 0.0, false, 0.0};
  const auto& cand = candidate.tokens;
  const auto& ref = reference.tokens;
  if (cand.empty()) {
    s.flagged = true;
    return s;
  }

  // Orders longer than the candidate have no n-grams to measure and are skipped.
  const int orders = std::min<int>(max_n, static_cast<int>(cand.size()));
  double log_sum = 0.0;
  for (int n = 1; n <= orders; ++n) {
    std::map<std::vector<std::string>, int> ref_counts;
    for (std::size_t i = 0; i + n <= ref.size(); ++i)
      ++ref_counts[std::vector<std::string>(ref.begin() + i, ref.begin() + i + n)];
    std::map<std::vector<std::string>, int> cand_counts;
    for (std::size_t i = 0; i + n <= cand.size(); ++i)
      ++cand_counts[std::vector<std::string>(cand.begin() + i, cand.begin() + i + n)];
    long clipped = 0;
    for (const auto& [gram, count] : cand_counts) {
      const auto it = ref_counts.find(gram);
      if (it != ref_counts.end()) clipped += std::min(count, it->second);
    }
    if (clipped == 0) return s;
    const auto total = static_cast<double>(cand.size() - n + 1);
    log_sum += std::log(static_cast<double>(clipped) / total);
  }
  const double c = static_cast<double>(cand.size());
  const double r = static_cast<double>(ref.size());
  const double bp = c < r ? std::exp(1.0 - r / c) : 1.0;
  s.value = std::clamp(bp * std::exp(log_sum / orders), 0.0, 1.0);
  return s;
}

// ---------------------------------------------------------------------------
// ROUGE-L

std::size_t lcs_length(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j)
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

RougeL rouge_l(const TokenizedText& candidate, const TokenizedText& reference) {
  RougeL r;
  if (candidate.tokens.empty() || reference.tokens.empty()) return r;
  const auto l = static_cast<double>(lcs_length(candidate.tokens, reference.tokens));
  r.precision = l / static_cast<double>(candidate.tokens.size());
  r.recall = l / static_cast<double>(reference.tokens.size());
  if (l > 0) r.f1 = 2.0 * r.precision * r.recall / (r.precision + r.recall);
  return r;
}

// ---------------------------------------------------------------------------
// Embeddings

std::size_t HashedBowEmbedding::bucket(std::string_view token) const {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : token) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return static_cast<std::size_t>(h % dims_);
}

std::vector<double> HashedBowEmbedding::embed(std::string_view text) {
  std::vector<double> v(dims_, 0.0);
  for (const auto& tok : tokenize_text(text).tokens) v[bucket(tok)] += 1.0;
  double norm = 0.0;
  for (double x : v) norm += x * x;
  norm = std::sqrt(norm);
  if (norm > 0)
    for (double& x : v) x /= norm;
  return v;
}

HttpEmbeddingProvider::HttpEmbeddingProvider(std::string url, int timeout_s)
    : url_(std::move(url)), timeout_s_(timeout_s) {
  parse_http_url(url_);
}

std::vector<double> HttpEmbeddingProvider::embed(std::string_view text) {
  const auto url = parse_http_url(url_);
  httplib::Client cli(url.origin);
  cli.set_connection_timeout(timeout_s_);
  cli.set_read_timeout(timeout_s_);
  const nlohmann::json body = {{"texts", {std::string(text)}}};
  auto res = cli.Post(url.path, body.dump(), "application/json");
  if (!res) throw Error(ErrorCode::kProviderFailure, "embedding endpoint unreachable: " + url_);
  if (res->status != 200)
    throw Error(ErrorCode::kProviderFailure, "embedding endpoint returned " + std::to_string(res->status));
  try {
    const auto j = nlohmann::json::parse(res->body);
    auto v = j.at("embeddings").at(0).get<std::vector<double>>();
    double norm = 0.0;
    for (double x : v) norm += x * x;
    norm = std::sqrt(norm);
    if (v.empty() || norm == 0) throw Error(ErrorCode::kProviderFailure, "zero embedding");
    for (double& x : v) x /= norm;
    return v;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kProviderFailure, std::string("bad embedding payload: ") + e.what());
  }
}

MetricScore embed_similarity(std::string_view a, std::string_view b, EmbeddingProvider& provider) {
  const auto va = provider.embed(a);
  const auto vb = provider.embed(b);
  if (va.size() != vb.size() || va.empty())
    throw Error(ErrorCode::kProviderFailure, "embedding dimensionality mismatch");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < va.size(); ++i) {
    dot += va[i] * vb[i];
    na += va[i] * va[i];
    nb += vb[i] * vb[i];
  }
  double cos = (na > 0 && nb > 0) ? dot / std::sqrt(na * nb) : 0.0;
  cos = std::clamp(cos, -1.0, 1.0);
  return MetricScore{MetricKind::kEmbedCos, (cos + 1.0) / 2.0, false, cos};
}

// ---------------------------------------------------------------------------
// Judge

int parse_judge_score(std::string_view reply) {
  static const std::regex kPattern(R"(\*\*[ \t]*Score[ \t]*:[ \t]*([+-]?[0-9]+)[ \t]*\*\*)");
  std::match_results<std::string_view::const_iterator> m;
  if (!std::regex_search(reply.begin(), reply.end(), m, kPattern))
    throw Error(ErrorCode::kScoreNotFound, "no '** Score:<int> **' line in reply");
  const std::string digits = m[1].str();
  const bool negative = digits[0] == '-';
  long long v = 0;
  for (char c : digits) {
    if (c < '0' || c > '9') continue;
    v = v * 10 + (c - '0');
    if (v > 1000) break;  // saturates; clamped below
  }
  if (negative) v = -v;
  return static_cast<int>(std::clamp<long long>(v, 0, 100));
}

std::string MockJudge::complete(const std::string& prompt) {
  ++calls_;
  std::string_view p = prompt;
  const std::string_view head_a = "### Text A:\n";
  const std::string_view head_b = "\n\n### Text B:\n";
  const auto a = p.find(head_a);
  const auto b = p.rfind(head_b);
  if (a == std::string_view::npos || b == std::string_view::npos || b < a)
    return "I could not find the two texts to compare.";
  const std::string_view text_a = p.substr(a + head_a.size(), b - a - head_a.size());
  std::string_view text_b = p.substr(b + head_b.size());
  const std::string retry = "\n\n" + std::string(kJudgeRetrySuffix);
  if (text_b.size() >= retry.size() && text_b.substr(text_b.size() - retry.size()) == retry)
    text_b.remove_suffix(retry.size());

  const RougeL r = rouge_l(tokenize_text(text_b), tokenize_text(text_a));
  const auto score = round_half_up(100.0 * r.recall);
  return "** Score:" + std::to_string(score) +
         " **\nText B reproduces that share of Text A's content in order.";
}

std::optional<MetricScore> llm_judge(std::string_view text_a, std::string_view text_b,
                                     JudgeClient& client) {
  const std::string prompt = fill_judge_prompt(text_a, text_b);
  for (int attempt = 0; attempt < 2; ++attempt) {
    const std::string reply =
        client.complete(attempt == 0 ? prompt : prompt + "\n\n" + std::string(kJudgeRetrySuffix));
    try {
      return MetricScore{MetricKind::kLlmJudge, static_cast<double>(parse_judge_score(reply)),
                         false, 0.0};
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kScoreNotFound) throw;
    }
  }
  return std::nullopt;
}

}  // namespace fovea
