#include "odmds/tokenizer.hpp"

#include <cctype>
#include <stdexcept>

#include "odmds/errors.hpp"

namespace odmds {

namespace {

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

bool is_ascii_punct(char c) {
  unsigned char u = static_cast<unsigned char>(c);
  return u < 0x80 && std::ispunct(u) != 0;
}

// Word constituents for unicode_word mode: ASCII alphanumerics plus every
// non-ASCII byte (multi-byte UTF-8 sequences stay inside one token; no
// UAX-29 segmentation).
bool is_word_char(char c) {
  unsigned char u = static_cast<unsigned char>(c);
  return u >= 0x80 || std::isalnum(u) != 0;
}

char lower_ascii(char c) {
  unsigned char u = static_cast<unsigned char>(c);
  if (u < 0x80) return static_cast<char>(std::tolower(u));
  return c;
}

}  // namespace

std::string TokenizerConfig::fingerprint() const {
  std::string s = mode == TokenizerMode::whitespace ? "whitespace" : "unicode-word";
  s += ";lowercase=";
  s += lowercase ? '1' : '0';
  s += ";strip_punctuation=";
  s += strip_punctuation ? '1' : '0';
  return s;
}

TokenizerConfig tokenizer_from_fingerprint(const std::string& fp) {
  TokenizerConfig cfg;
  if (fp.rfind("whitespace;", 0) == 0) {
    cfg.mode = TokenizerMode::whitespace;
  } else if (fp.rfind("unicode-word;", 0) == 0) {
    cfg.mode = TokenizerMode::unicode_word;
  } else {
    throw DataError("unrecognized tokenizer fingerprint: " + fp);
  }
  cfg.lowercase = fp.find(";lowercase=1") != std::string::npos;
  cfg.strip_punctuation = fp.find(";strip_punctuation=1") != std::string::npos;
  if (cfg.fingerprint() != fp) throw DataError("unrecognized tokenizer fingerprint: " + fp);
  return cfg;
}

std::vector<TokenSpan> tokenize_spans(const std::string& text, const TokenizerConfig& cfg) {
  std::vector<TokenSpan> out;
  const std::size_t n = text.size();
  std::size_t i = 0;
  while (i < n) {
    std::size_t run_begin, run_end;
    if (cfg.mode == TokenizerMode::whitespace) {
      while (i < n && is_space(text[i])) ++i;
      if (i >= n) break;
      run_begin = i;
      while (i < n && !is_space(text[i])) ++i;
      run_end = i;
    } else {
      while (i < n && !is_word_char(text[i])) ++i;
      if (i >= n) break;
      run_begin = i;
      while (i < n && is_word_char(text[i])) ++i;
      run_end = i;
    }

    std::size_t b = run_begin, e = run_end;
    if (cfg.mode == TokenizerMode::whitespace && cfg.strip_punctuation) {
      while (b < e && is_ascii_punct(text[b])) ++b;
      while (e > b && is_ascii_punct(text[e - 1])) --e;
    }
    if (b < e) {
      std::string tok = text.substr(b, e - b);
      if (cfg.lowercase) {
        for (char& c : tok) c = lower_ascii(c);
      }
      out.push_back(TokenSpan{std::move(tok), b, e});
    }
  }
  return out;
}

std::vector<std::string> tokenize(const std::string& text, const TokenizerConfig& cfg) {
  auto spans = tokenize_spans(text, cfg);
  std::vector<std::string> out;
  out.reserve(spans.size());
  for (auto& s : spans) out.push_back(std::move(s.text));
  return out;
}

std::int64_t count_tokens(const std::string& text, const TokenizerConfig& cfg) {
  return static_cast<std::int64_t>(tokenize_spans(text, cfg).size());
}

std::string truncate_to_budget(const std::string& text, std::int64_t budget,
                               const TokenizerConfig& cfg) {
  if (budget < 0) throw std::invalid_argument("truncate_to_budget: budget must be >= 0");
  if (budget == 0) return "";
  auto spans = tokenize_spans(text, cfg);
  if (static_cast<std::size_t>(budget) >= spans.size()) return text;
  return text.substr(0, spans[static_cast<std::size_t>(budget) - 1].end);
}

}  // namespace odmds
