#include "odmds/summ_eval.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "odmds/errors.hpp"

namespace odmds {

namespace {

double f1_of(double p, double r) { return p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0; }

double round2(double x) { return std::round(x * 100.0) / 100.0; }

std::string fmt2(double x) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", x);
  return buf;
}

std::size_t lcs_length(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  if (a.empty() || b.empty()) return 0;
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      if (a[i - 1] == b[j - 1]) {
        cur[j] = prev[j - 1] + 1;
      } else {
        cur[j] = std::max(prev[j], cur[j - 1]);
      }
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

RougeScore from_overlap(double overlap, double cand_total, double ref_total,
                        RougeVariant variant) {
  RougeScore s;
  s.variant = variant;
  s.precision = cand_total > 0.0 ? overlap / cand_total : 0.0;
  s.recall = ref_total > 0.0 ? overlap / ref_total : 0.0;
  s.f1 = f1_of(s.precision, s.recall);
  return s;
}

const char* dimension_template(GevalDimension d) {
  return d == GevalDimension::consistency ? "geval_consistency" : "geval_relevance";
}

}  // namespace

std::map<std::string, int> ngram_counts(const std::vector<std::string>& tokens, int n) {
  if (n < 1) throw std::invalid_argument("ngram_counts: n must be >= 1");
  std::map<std::string, int> counts;
  if (tokens.size() < static_cast<std::size_t>(n)) return counts;
  for (std::size_t i = 0; i + static_cast<std::size_t>(n) <= tokens.size(); ++i) {
    std::string key = tokens[i];
    for (std::size_t j = 1; j < static_cast<std::size_t>(n); ++j) {
      key += '\x1f';
      key += tokens[i + j];
    }
    ++counts[key];
  }
  return counts;
}

RougeScore rouge_n(const std::string& candidate, const std::string& reference, int n,
                   const TokenizerConfig& cfg) {
  auto cand = ngram_counts(tokenize(candidate, cfg), n);
  auto ref = ngram_counts(tokenize(reference, cfg), n);
  double overlap = 0.0, cand_total = 0.0, ref_total = 0.0;
  for (const auto& [gram, count] : cand) {
    cand_total += count;
    auto it = ref.find(gram);
    if (it != ref.end()) overlap += std::min(count, it->second);
  }
  for (const auto& [gram, count] : ref) ref_total += count;
  RougeVariant variant = n == 1 ? RougeVariant::rouge1 : RougeVariant::rouge2;
  return from_overlap(overlap, cand_total, ref_total, variant);
}

RougeScore rouge_l(const std::string& candidate, const std::string& reference,
                   const TokenizerConfig& cfg) {
  auto cand = tokenize(candidate, cfg);
  auto ref = tokenize(reference, cfg);
  double lcs = static_cast<double>(lcs_length(cand, ref));
  return from_overlap(lcs, static_cast<double>(cand.size()), static_cast<double>(ref.size()),
                      RougeVariant::rougeL);
}

RougeScore multi_ref_rouge(const std::string& candidate,
                           const std::vector<std::string>& references, RougeVariant variant,
                           const TokenizerConfig& cfg) {
  if (references.empty()) throw std::invalid_argument("multi_ref_rouge: references must be non-empty");
  RougeScore best;
  best.variant = variant;
  bool first = true;
  for (const auto& ref : references) {
    RougeScore s;
    switch (variant) {
      case RougeVariant::rouge1:
        s = rouge_n(candidate, ref, 1, cfg);
        break;
      case RougeVariant::rouge2:
        s = rouge_n(candidate, ref, 2, cfg);
        break;
      case RougeVariant::rougeL:
        s = rouge_l(candidate, ref, cfg);
        break;
    }
    if (first || s.f1 > best.f1) {
      best = s;
      first = false;
    }
  }
  return best;
}

std::optional<double> parse_geval_reply(const std::string& reply) {
  std::size_t i = 0;
  while (i < reply.size()) {
    if (std::isdigit(static_cast<unsigned char>(reply[i]))) {
      std::size_t j = i;
      while (j < reply.size() && std::isdigit(static_cast<unsigned char>(reply[j]))) ++j;
      if (j - i <= 2) {  // longer digit runs cannot be a 1..5 score
        int value = std::stoi(reply.substr(i, j - i));
        if (value >= 1 && value <= 5) return static_cast<double>(value);
      }
      i = j;
    } else {
      ++i;
    }
  }
  return std::nullopt;
}

GevalScore geval_score(const std::string& prediction, const std::string& reference,
                       GevalDimension dimension, LlmClient& llm, const TemplateSet& templates,
                       int max_output_tokens) {
  if (prediction.empty() || reference.empty()) {
    throw std::invalid_argument("geval_score: prediction and reference must be non-empty");
  }
  const PromptTemplate& tmpl = templates.get(dimension_template(dimension));
  PromptBindings bindings;
  bindings["reference"] = reference;
  bindings["prediction"] = prediction;
  LlmRequest req = render_prompt(tmpl, bindings, max_output_tokens, 0.0);

  GevalScore score;
  score.dimension = dimension;
  for (int attempt = 0; attempt < 2; ++attempt) {
    auto parsed = parse_geval_reply(llm.complete(req).text);
    if (parsed) {
      score.raw = parsed;
      return score;
    }
  }
  score.parse_failures = 1;
  return score;
}

SummEvalReport evaluate_summaries(const std::vector<SummaryRecord>& summaries,
                                  const std::vector<QueryInstance>& queries,
                                  const TokenizerConfig& cfg, LlmClient* judge,
                                  const TemplateSet* templates) {
  std::map<std::string, const QueryInstance*> by_id;
  for (const auto& q : queries) by_id[q.query_id] = &q;

  // (strategy, retriever) -> query_id -> record, in deterministic order
  std::map<std::pair<std::string, std::string>, std::map<std::string, const SummaryRecord*>> groups;
  for (const auto& record : summaries) {
    if (!by_id.count(record.query_id)) {
      throw DataError("summary references unknown query_id \"" + record.query_id + "\"");
    }
    groups[{record.strategy, record.retriever_tag}][record.query_id] = &record;
  }

  TemplateSet default_templates;
  if (judge && !templates) {
    default_templates = TemplateSet::defaults();
    templates = &default_templates;
  }

  SummEvalReport report;
  for (const auto& [key, records] : groups) {
    SummEvalRow row;
    row.strategy = key.first;
    row.retriever_tag = key.second;
    double r1_sum = 0.0, r2_sum = 0.0, rl_sum = 0.0;
    double cons_sum = 0.0, rel_sum = 0.0;
    int cons_n = 0, rel_n = 0;
    for (const auto& [query_id, record] : records) {
      const QueryInstance& q = *by_id.at(query_id);
      SummEvalQueryRow qrow;
      qrow.r1 = multi_ref_rouge(record->summary, q.references, RougeVariant::rouge1, cfg).f1;
      qrow.r2 = multi_ref_rouge(record->summary, q.references, RougeVariant::rouge2, cfg).f1;
      qrow.rl = multi_ref_rouge(record->summary, q.references, RougeVariant::rougeL, cfg).f1;
      r1_sum += qrow.r1;
      r2_sum += qrow.r2;
      rl_sum += qrow.rl;
      if (judge) {
        GevalScore c = geval_score(record->summary, q.references.front(),
                                   GevalDimension::consistency, *judge, *templates);
        GevalScore r = geval_score(record->summary, q.references.front(),
                                   GevalDimension::relevance, *judge, *templates);
        row.parse_failures += c.parse_failures + r.parse_failures;
        if (c.raw) {
          qrow.geval_consistency = c.raw;
          cons_sum += *c.raw;
          ++cons_n;
        }
        if (r.raw) {
          qrow.geval_relevance = r.raw;
          rel_sum += *r.raw;
          ++rel_n;
        }
      }
      row.per_query.emplace(query_id, qrow);
      ++row.n;
    }
    const double n = static_cast<double>(row.n);
    row.r1 = round2(100.0 * r1_sum / n);
    row.r2 = round2(100.0 * r2_sum / n);
    row.rl = round2(100.0 * rl_sum / n);
    if (judge) {
      if (cons_n > 0) row.geval_consistency = cons_sum / cons_n;
      if (rel_n > 0) row.geval_relevance = rel_sum / rel_n;
      if (row.geval_consistency && row.geval_relevance) {
        row.geval_combined = (*row.geval_consistency + *row.geval_relevance) / 2.0;
      } else if (row.geval_consistency) {
        row.geval_combined = row.geval_consistency;
      } else if (row.geval_relevance) {
        row.geval_combined = row.geval_relevance;
      }
    }
    report.rows.push_back(std::move(row));
  }
  return report;
}

nlohmann::json summ_report_to_json(const SummEvalReport& report) {
  nlohmann::json out;
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& row : report.rows) {
    nlohmann::json r;
    r["strategy"] = row.strategy;
    r["retriever"] = row.retriever_tag;
    r["r1"] = row.r1;
    r["r2"] = row.r2;
    r["rl"] = row.rl;
    r["bs"] = nullptr;  // reserved for an external BERTScore-style scorer
    r["geval_consistency"] =
        row.geval_consistency ? nlohmann::json(*row.geval_consistency) : nlohmann::json();
    r["geval_relevance"] =
        row.geval_relevance ? nlohmann::json(*row.geval_relevance) : nlohmann::json();
    r["geval_combined"] =
        row.geval_combined ? nlohmann::json(*row.geval_combined) : nlohmann::json();
    r["n"] = row.n;
    r["parse_failures"] = row.parse_failures;
    nlohmann::json per_query = nlohmann::json::array();
    for (const auto& [query_id, q] : row.per_query) {
      nlohmann::json pq;
      pq["query_id"] = query_id;
      pq["r1"] = q.r1;
      pq["r2"] = q.r2;
      pq["rl"] = q.rl;
      if (q.geval_consistency) pq["geval_consistency"] = *q.geval_consistency;
      if (q.geval_relevance) pq["geval_relevance"] = *q.geval_relevance;
      per_query.push_back(std::move(pq));
    }
    r["per_query"] = std::move(per_query);
    rows.push_back(std::move(r));
  }
  out["rows"] = std::move(rows);
  return out;
}

std::string render_summ_table(const SummEvalReport& report) {
  std::size_t strat_w = 8, retr_w = 9;
  for (const auto& row : report.rows) {
    strat_w = std::max(strat_w, row.strategy.size());
    retr_w = std::max(retr_w, row.retriever_tag.size());
  }
  auto pad = [](const std::string& s, std::size_t w) {
    return s + std::string(w > s.size() ? w - s.size() : 0, ' ');
  };
  auto num = [](const std::string& s) {
    return std::string(s.size() < 7 ? 7 - s.size() : 0, ' ') + s;
  };
  std::string out = pad("Strategy", strat_w) + "  " + pad("Retriever", retr_w) +
                    "      R-1     R-2     R-L  G-cons   G-rel  G-eval       n\n";
  out += std::string(out.size() - 1, '-') + "\n";
  for (const auto& row : report.rows) {
    auto opt = [&](const std::optional<double>& v) { return num(v ? fmt2(*v) : "-"); };
    out += pad(row.strategy, strat_w) + "  " + pad(row.retriever_tag, retr_w) + "  " +
           num(fmt2(row.r1)) + " " + num(fmt2(row.r2)) + " " + num(fmt2(row.rl)) + " " +
           opt(row.geval_consistency) + " " + opt(row.geval_relevance) + " " +
           opt(row.geval_combined) + " " + num(std::to_string(row.n)) + "\n";
  }
  return out;
}

}  // namespace odmds
