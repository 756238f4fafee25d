#include "odmds/prompts.hpp"

#include <cctype>
#include <stdexcept>

#include <json.hpp>

#include "odmds/errors.hpp"
#include "odmds/jsonl.hpp"

namespace odmds {

namespace {

bool is_slot_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) != 0 || c == '_';
}

PromptTemplate make(const char* name, const char* system_text, const char* user_text) {
  return PromptTemplate{name, system_text, user_text};
}

}  // namespace

std::string render_text(const std::string& text, const PromptBindings& bindings) {
  std::string out;
  out.reserve(text.size());
  std::size_t i = 0;
  while (i < text.size()) {
    if (text[i] != '{') {
      out += text[i++];
      continue;
    }
    std::size_t j = i + 1;
    while (j < text.size() && is_slot_char(text[j])) ++j;
    if (j == i + 1 || j >= text.size() || text[j] != '}') {
      out += text[i++];  // not a slot, keep literal brace
      continue;
    }
    std::string name = text.substr(i + 1, j - i - 1);
    auto it = bindings.find(name);
    if (it == bindings.end()) {
      throw std::invalid_argument("unresolved placeholder {" + name + "}");
    }
    out += it->second;
    i = j + 1;
  }
  return out;
}

LlmRequest render_prompt(const PromptTemplate& tmpl, const PromptBindings& bindings,
                         int max_output_tokens, double temperature) {
  LlmRequest req;
  req.system = render_text(tmpl.system_text, bindings);
  req.user = render_text(tmpl.user_text, bindings);
  req.max_output_tokens = max_output_tokens;
  req.temperature = temperature;
  req.tag = tmpl.name;
  return req;
}

LlmRequest render_prompt(const PromptTemplate& tmpl, const std::string& docs_text,
                         const std::string& query, int max_output_tokens, double temperature) {
  PromptBindings bindings;
  for (const char* slot : {"story", "meeting", "docs", "chunk"}) {
    if (tmpl.user_text.find(std::string("{") + slot + "}") != std::string::npos) {
      bindings[slot] = docs_text;
    }
  }
  bindings["query"] = query;
  return render_prompt(tmpl, bindings, max_output_tokens, temperature);
}

TemplateSet TemplateSet::defaults() {
  TemplateSet set;
  set.set(make(
      "story",
      "You are a helpful assistant that gives long answer to question based on a long story.",
      "Write an answer based on the following question and the story. STORY:{story} "
      "QUESTION:{query} SUMMARY:"));
  set.set(make(
      "meeting",
      "You are a helpful assistant that gives long answer to question based on a long meeting.",
      "Write an answer based on the following question and the given meeting. Try to answer "
      "thoroughly and do not leave out useful information. MEETING:{meeting} QUESTION:{query} "
      "SUMMARY:"));
  set.set(make(
      "map",
      "You are a helpful assistant that summarizes one part of a longer text so the parts can "
      "be combined later.",
      "Summarize the part of the documents below, keeping only information that helps answer "
      "the question. TEXT:{chunk} QUESTION:{query} PARTIAL SUMMARY:"));
  set.set(make(
      "reduce",
      "You are a helpful assistant that consolidates partial summaries into one final answer.",
      "Combine the partial summaries below into one coherent answer to the question. Do not add "
      "information that is not present in them. PARTIAL SUMMARIES:{docs} QUESTION:{query} "
      "SUMMARY:"));
  set.set(make(
      "refine_init",
      "You are a helpful assistant that gives long answer to question based on a document.",
      "Write an answer based on the following question and the document. DOCUMENT:{chunk} "
      "QUESTION:{query} SUMMARY:"));
  set.set(make(
      "refine_step",
      "You are a helpful assistant that refines an existing answer with new information.",
      "We have an existing answer: {existing_summary} Refine the existing answer using the "
      "additional document below, keeping it focused on the question and keeping correct "
      "information. DOCUMENT:{chunk} QUESTION:{query} REFINED SUMMARY:"));
  set.set(make(
      "merge_query",
      "You are a helpful assistant that merges related questions.",
      "Combine the following questions into a single fluent question that covers all of them "
      "without adding information. QUESTIONS:{docs} MERGED QUESTION:"));
  set.set(make(
      "merge_summary",
      "You are a helpful assistant that merges related summaries.",
      "Combine the following summaries into a single coherent summary that covers all of them "
      "without adding information. SUMMARIES:{docs} MERGED SUMMARY:"));
  set.set(make(
      "contextualize",
      "You are a helpful assistant that rewrites vague questions to be specific.",
      "Rewrite the question below so that it is specific to the story titled {title}. Keep the "
      "original intent, mention the title or its key entities, and return only the rewritten "
      "question. QUESTION:{query}{answer_section} REWRITTEN QUESTION:"));
  set.set(make(
      "geval_consistency",
      "You are a helpful assistant that evaluates the quality of summaries.",
      "You will be given a news article. You will then be given one summary written for this "
      "article. Your task is to rate the summary on one metric. Please make sure you read and "
      "understand these instructions carefully. Please keep this document open while reviewing, "
      "and refer to it as needed. Evaluation Criteria: Consistency (1-5) - the factual alignment "
      "between the summary and the summarized source. A factually consistent summary contains "
      "only statements that are entailed by the source document. Annotators were also asked to "
      "penalize summaries that contained hallucinated facts. Evaluation Steps: 1. Read the news "
      "article carefully and identify the main facts and details it presents. 2. Read the "
      "summary and compare it to the article. Check if the summary contains any factual errors "
      "that are not supported by the article. 3. Assign a score for consistency based on the "
      "Evaluation Criteria. ARTICLE:{reference} SUMMARY:{prediction} Consistency score (1-5):"));
  set.set(make(
      "geval_relevance",
      "You are a helpful assistant that evaluates the quality of summaries.",
      "You will be given one summary written for a news article. Your task is to rate the "
      "summary on one metric. Please make sure you read and understand these instructions "
      "carefully. Please keep this document open while reviewing, and refer to it as needed. "
      "Evaluation Criteria: Relevance (1-5) - selection of important content from the source. "
      "The summary should include only important information from the source document. "
      "Annotators were instructed to penalize summaries which contained redundancies and excess "
      "information. Evaluation Steps: 1. Read the summary and the source document carefully. 2. "
      "Compare the summary to the source document and identify the main points of the article. "
      "3. Assess how well the summary covers the main points of the article, and how much "
      "irrelevant or redundant information it contains. 4. Assign a relevance score from 1 to "
      "5. ARTICLE:{reference} SUMMARY:{prediction} Relevance score (1-5):"));
  return set;
}

const PromptTemplate& TemplateSet::get(const std::string& name) const {
  auto it = templates_.find(name);
  if (it == templates_.end()) throw UsageError("unknown prompt template \"" + name + "\"");
  return it->second;
}

void TemplateSet::set(PromptTemplate tmpl) { templates_[tmpl.name] = std::move(tmpl); }

void TemplateSet::merge_from_file(const std::string& path) {
  nlohmann::json obj = nlohmann::json::parse(read_file(path), nullptr, false);
  if (obj.is_discarded() || !obj.is_object()) {
    throw DataError(path + ": templates file must be a JSON object");
  }
  for (const auto& [name, body] : obj.items()) {
    if (!body.is_object()) throw DataError(path + ": template \"" + name + "\" must be an object");
    PromptTemplate tmpl;
    tmpl.name = name;
    auto it = templates_.find(name);
    if (it != templates_.end()) tmpl = it->second;
    if (body.contains("system")) tmpl.system_text = body["system"].get<std::string>();
    if (body.contains("user")) tmpl.user_text = body["user"].get<std::string>();
    set(std::move(tmpl));
  }
}

}  // namespace odmds
