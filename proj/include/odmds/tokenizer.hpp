#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace odmds {

enum class TokenizerMode { whitespace, unicode_word };

// Pure-function tokenizer settings shared by indexing, budgeting and ROUGE.
// Budgets everywhere in this project count these tokens, not model subwords;
// swap in a subword-aligned config per model if exact model limits matter.
struct TokenizerConfig {
  TokenizerMode mode = TokenizerMode::whitespace;
  bool lowercase = true;
  bool strip_punctuation = true;

  std::string fingerprint() const;
  bool operator==(const TokenizerConfig&) const = default;
};

TokenizerConfig tokenizer_from_fingerprint(const std::string& fp);

// One normalized token plus the byte range of its core in the source text
// (punctuation stripped from the edges is outside the range).
struct TokenSpan {
  std::string text;
  std::size_t begin = 0;
  std::size_t end = 0;
};

std::vector<TokenSpan> tokenize_spans(const std::string& text, const TokenizerConfig& cfg);
std::vector<std::string> tokenize(const std::string& text, const TokenizerConfig& cfg);
std::int64_t count_tokens(const std::string& text, const TokenizerConfig& cfg);

// Prefix of `text` covering its first min(budget, token_count) tokens.
// Never splits a token; budget 0 yields "".
std::string truncate_to_budget(const std::string& text, std::int64_t budget,
                               const TokenizerConfig& cfg);

}  // namespace odmds
