#include "odmds/dataset_builder.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <regex>
#include <stdexcept>

#include "odmds/errors.hpp"
#include "odmds/jsonl.hpp"

namespace odmds {

namespace {

std::string query_id_for(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "q%04zu", index + 1);
  return buf;
}

std::regex delimiter_regex(const std::string& pattern) {
  std::string rx;
  for (char c : pattern) {
    if (c == '*') {
      rx += "[^>]*";
    } else if (std::string("\\^$.|?+()[]{}").find(c) != std::string::npos) {
      rx += '\\';
      rx += c;
    } else {
      rx += c;
    }
  }
  return std::regex(rx);
}

std::string strip_html(const std::string& html) {
  std::string out;
  out.reserve(html.size());
  std::size_t i = 0;
  while (i < html.size()) {
    if (html[i] == '<') {
      std::size_t close = html.find('>', i);
      if (close == std::string::npos) {
        out += html.substr(i);
        break;
      }
      i = close + 1;
      continue;
    }
    if (html[i] == '&') {
      static const std::pair<const char*, const char*> kEntities[] = {
          {"&amp;", "&"}, {"&lt;", "<"},   {"&gt;", ">"},    {"&quot;", "\""},
          {"&#39;", "'"}, {"&apos;", "'"}, {"&nbsp;", " "}};
      bool replaced = false;
      for (const auto& [entity, repl] : kEntities) {
        std::size_t len = std::string(entity).size();
        if (html.compare(i, len, entity) == 0) {
          out += repl;
          i += len;
          replaced = true;
          break;
        }
      }
      if (replaced) continue;
    }
    out += html[i++];
  }
  return out;
}

std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

std::string strip_surrounding_quotes(std::string s) {
  s = trim(s);
  while (s.size() >= 2 &&
         ((s.front() == '"' && s.back() == '"') || (s.front() == '\'' && s.back() == '\''))) {
    s = trim(s.substr(1, s.size() - 2));
  }
  return s;
}

// Leader scan shared by cluster_queries and the secondary splitting pass.
std::vector<QueryCluster> leader_scan(const std::vector<ClusterMember>& items, double theta,
                                      int first_id) {
  std::vector<QueryCluster> clusters;
  for (const auto& item : items) {
    bool placed = false;
    for (auto& cluster : clusters) {
      if (dot(item.embedding, cluster.members.front().embedding) > theta) {
        cluster.members.push_back(item);
        placed = true;
        break;
      }
    }
    if (!placed) {
      QueryCluster cluster;
      cluster.cluster_id = first_id + static_cast<int>(clusters.size());
      cluster.threshold_used = theta;
      cluster.members.push_back(item);
      clusters.push_back(std::move(cluster));
    }
  }
  return clusters;
}

void split_oversized(QueryCluster cluster, const ClusterBounds& bounds,
                     std::vector<QueryCluster>& out, std::vector<std::string>& flagged) {
  if (cluster.members.size() <= bounds.max_size) {
    out.push_back(std::move(cluster));
    return;
  }
  double theta2 = cluster.threshold_used + bounds.theta_step;
  if (bounds.theta_step > 0.0) theta2 = std::min(theta2, bounds.theta_cap);
  const bool at_cap = bounds.theta_step <= 0.0 || theta2 >= bounds.theta_cap;

  auto parts = leader_scan(cluster.members, theta2, cluster.cluster_id);
  if (parts.size() == 1) {
    if (at_cap) {
      flagged.push_back("cluster " + std::to_string(cluster.cluster_id) + " keeps " +
                        std::to_string(cluster.members.size()) +
                        " members: secondary threshold hit its cap without splitting");
      cluster.threshold_used = theta2;
      out.push_back(std::move(cluster));
      return;
    }
    cluster.threshold_used = theta2;
    split_oversized(std::move(cluster), bounds, out, flagged);
    return;
  }
  for (auto& part : parts) {
    if (part.members.size() > bounds.max_size && at_cap) {
      flagged.push_back("cluster " + std::to_string(cluster.cluster_id) + " keeps an oversized " +
                        std::to_string(part.members.size()) +
                        "-member part: secondary threshold hit its cap");
      out.push_back(std::move(part));
    } else {
      split_oversized(std::move(part), bounds, out, flagged);
    }
  }
}

std::string join_numbered(const std::vector<std::string>& texts) {
  std::string out;
  for (std::size_t i = 0; i < texts.size(); ++i) {
    if (!out.empty()) out += "\n";
    out += std::to_string(i + 1) + ". " + texts[i];
  }
  return out;
}

}  // namespace

std::pair<Corpus, std::vector<QueryInstance>> q2odmds_transform(
    const std::vector<QmdsInstance>& instances, const TokenizerConfig& tokenizer) {
  if (instances.empty()) throw std::invalid_argument("q2odmds_transform: no instances");
  std::vector<Document> docs;
  std::map<std::string, std::size_t> doc_index;
  std::vector<QueryInstance> queries;
  queries.reserve(instances.size());

  for (std::size_t i = 0; i < instances.size(); ++i) {
    const QmdsInstance& inst = instances[i];
    if (inst.docs.empty()) {
      throw DataError("qMDS instance " + std::to_string(i + 1) + " has no documents");
    }
    if (inst.summaries.empty()) {
      throw DataError("qMDS instance " + std::to_string(i + 1) + " has no summaries");
    }
    QueryInstance q;
    q.query_id = query_id_for(i);
    q.query = inst.query;
    q.references = inst.summaries;
    for (const Document& doc : inst.docs) {
      auto it = doc_index.find(doc.doc_id);
      if (it == doc_index.end()) {
        doc_index.emplace(doc.doc_id, docs.size());
        docs.push_back(doc);
      } else if (docs[it->second].text != doc.text) {
        throw DataError("doc_id \"" + doc.doc_id + "\" appears with conflicting texts");
      }
      if (std::find(q.gold_doc_ids.begin(), q.gold_doc_ids.end(), doc.doc_id) ==
          q.gold_doc_ids.end()) {
        q.gold_doc_ids.push_back(doc.doc_id);
      }
    }
    queries.push_back(std::move(q));
  }
  return {Corpus(std::move(docs), tokenizer), std::move(queries)};
}

std::vector<Document> split_story(const std::string& story_id, const std::string& html,
                                  const std::string& delimiter_pattern,
                                  std::vector<std::string>* warnings) {
  std::regex rx = delimiter_regex(delimiter_pattern);
  std::vector<std::pair<std::size_t, std::size_t>> cuts;  // [begin, end) of each delimiter
  for (auto it = std::sregex_iterator(html.begin(), html.end(), rx);
       it != std::sregex_iterator(); ++it) {
    cuts.emplace_back(static_cast<std::size_t>(it->position()),
                      static_cast<std::size_t>(it->position() + it->length()));
  }
  if (cuts.empty() && warnings) {
    warnings->push_back("story \"" + story_id +
                        "\": no delimiter matched; emitting a single chapter");
  }

  std::vector<std::string> segments;
  std::size_t pos = 0;
  for (const auto& [begin, end] : cuts) {
    segments.push_back(html.substr(pos, begin - pos));
    pos = end;
  }
  segments.push_back(html.substr(pos));

  std::vector<Document> chapters;
  for (const std::string& segment : segments) {
    std::string text = trim(strip_html(segment));
    if (text.empty()) continue;
    Document doc;
    doc.doc_id = story_id + "-c" + std::to_string(chapters.size());
    doc.title = story_id;
    doc.text = std::move(text);
    chapters.push_back(std::move(doc));
  }
  return chapters;
}

std::string contextualize_query(const std::string& query, const std::string& title,
                                const std::optional<std::string>& answer, LlmClient& llm,
                                const TemplateSet& templates, std::vector<std::string>* warnings,
                                int max_output_tokens) {
  if (query.empty()) throw std::invalid_argument("contextualize_query: query must be non-empty");
  PromptBindings bindings;
  bindings["query"] = query;
  bindings["title"] = title;
  bindings["answer_section"] = answer ? " ANSWER:" + *answer : "";
  LlmRequest req = render_prompt(templates.get("contextualize"), bindings, max_output_tokens);
  std::string rewritten = strip_surrounding_quotes(llm.complete(req).text);
  if (rewritten.empty()) {
    if (warnings) {
      warnings->push_back("contextualize returned empty output for query \"" + query +
                          "\"; keeping the original");
    }
    return query;
  }
  return rewritten;
}

Embedder make_embedder(const EmbeddingProviderConfig& provider, const TokenizerConfig& cfg) {
  return [provider, cfg](const std::string& text) {
    std::string input = text;
    if (static_cast<std::size_t>(count_tokens(input, cfg)) > provider.max_input_tokens) {
      input = truncate_to_budget(input, static_cast<std::int64_t>(provider.max_input_tokens), cfg);
    }
    return embed_text(input, provider, cfg);
  };
}

std::vector<QueryCluster> cluster_queries(
    const std::vector<std::pair<std::string, std::string>>& queries, const Embedder& embedder,
    double theta) {
  if (queries.empty()) throw std::invalid_argument("cluster_queries: no queries");
  std::vector<ClusterMember> items;
  items.reserve(queries.size());
  for (const auto& [query_id, text] : queries) {
    items.push_back(ClusterMember{query_id, embedder(text)});
  }
  return leader_scan(items, theta, 0);
}

ResizeResult resize_clusters(std::vector<QueryCluster> clusters, const ClusterBounds& bounds) {
  if (bounds.min_size < 1 || bounds.min_size > bounds.max_size) {
    throw UsageError("cluster bounds must satisfy 1 <= min_size <= max_size");
  }
  ResizeResult result;

  for (auto& cluster : clusters) {
    split_oversized(std::move(cluster), bounds, result.clusters, result.flagged);
  }

  auto& work = result.clusters;
  for (;;) {
    if (work.size() <= 1) break;
    std::size_t small = work.size();
    for (std::size_t i = 0; i < work.size(); ++i) {
      if (work[i].members.size() < bounds.min_size) {
        small = i;
        break;
      }
    }
    if (small == work.size()) break;

    const EmbeddingVector& leader = work[small].members.front().embedding;
    std::size_t best = work.size();
    double best_sim = 0.0;
    for (std::size_t j = 0; j < work.size(); ++j) {
      if (j == small) continue;
      double sim = dot(leader, work[j].members.front().embedding);
      if (best == work.size() || sim > best_sim ||
          (sim == best_sim && work[j].cluster_id < work[best].cluster_id)) {
        best = j;
        best_sim = sim;
      }
    }
    auto& target = work[best].members;
    target.insert(target.end(), work[small].members.begin(), work[small].members.end());
    if (target.size() > bounds.max_size) {
      result.flagged.push_back("cluster " + std::to_string(work[best].cluster_id) + " grew to " +
                               std::to_string(target.size()) +
                               " members while absorbing an undersized cluster");
    }
    work.erase(work.begin() + static_cast<std::ptrdiff_t>(small));
  }

  if (work.size() == 1 && work[0].members.size() < bounds.min_size) {
    result.flagged.push_back("only one cluster remains with " +
                             std::to_string(work[0].members.size()) +
                             " member(s), below min_size " + std::to_string(bounds.min_size));
  }
  for (std::size_t i = 0; i < work.size(); ++i) work[i].cluster_id = static_cast<int>(i);
  return result;
}

MergedPair merge_cluster(const QueryCluster& cluster,
                         const std::map<std::string, std::string>& query_texts,
                         const std::map<std::string, std::string>& summary_texts,
                         const std::map<std::string, std::vector<std::string>>& gold_map,
                         LlmClient* llm, const TemplateSet& templates, int max_output_tokens,
                         int* fallback_count, std::vector<std::string>* warnings) {
  if (cluster.members.empty()) throw std::invalid_argument("merge_cluster: empty cluster");
  MergedPair pair;
  std::vector<std::string> queries, summaries;
  for (const auto& member : cluster.members) {
    pair.source_query_ids.push_back(member.query_id);
    queries.push_back(query_texts.at(member.query_id));
    summaries.push_back(summary_texts.at(member.query_id));
    auto it = gold_map.find(member.query_id);
    if (it != gold_map.end()) {
      for (const auto& doc_id : it->second) {
        if (std::find(pair.source_doc_ids.begin(), pair.source_doc_ids.end(), doc_id) ==
            pair.source_doc_ids.end()) {
          pair.source_doc_ids.push_back(doc_id);
        }
      }
    }
  }

  auto concat_queries = [&] {
    std::string out;
    for (const auto& q : queries) {
      if (!out.empty()) out += " Also, ";
      out += q;
    }
    return out;
  };
  auto concat_summaries = [&] {
    std::string out;
    for (const auto& s : summaries) {
      if (!out.empty()) out += "\n\n";
      out += s;
    }
    return out;
  };

  if (cluster.members.size() == 1) {
    pair.merged_query = queries.front();
    pair.merged_summary = summaries.front();
    return pair;
  }

  bool fell_back = false;
  if (llm) {
    try {
      LlmRequest req = render_prompt(templates.get("merge_query"), join_numbered(queries), "",
                                     max_output_tokens);
      pair.merged_query = strip_surrounding_quotes(llm->complete(req).text);
    } catch (const ProviderError& e) {
      fell_back = true;
      if (warnings) {
        warnings->push_back("query merge fell back to concatenation: " + std::string(e.what()));
      }
    }
    if (!fell_back) {
      try {
        LlmRequest req = render_prompt(templates.get("merge_summary"), join_numbered(summaries),
                                       "", max_output_tokens);
        pair.merged_summary = strip_surrounding_quotes(llm->complete(req).text);
      } catch (const ProviderError& e) {
        fell_back = true;
        if (warnings) {
          warnings->push_back("summary merge fell back to concatenation: " +
                              std::string(e.what()));
        }
      }
    }
  }
  if (!llm || fell_back || pair.merged_query.empty() || pair.merged_summary.empty()) {
    if (llm && fallback_count && (fell_back || pair.merged_query.empty() ||
                                  pair.merged_summary.empty())) {
      ++*fallback_count;
    }
    pair.merged_query = concat_queries();
    pair.merged_summary = concat_summaries();
  }
  return pair;
}

std::vector<QmdsRecord> load_qmds(const std::string& path) {
  std::vector<QmdsRecord> out;
  for (const auto& [line_no, obj] : read_jsonl(path)) {
    const std::string where = path + ":" + std::to_string(line_no);
    if (!obj.is_object() || !obj.contains("query") || !obj.contains("doc_ids") ||
        !obj.contains("summaries")) {
      throw DataError(where + ": expected object with query, doc_ids, summaries");
    }
    QmdsRecord record;
    record.query = obj.at("query").get<std::string>();
    record.doc_ids = obj.at("doc_ids").get<std::vector<std::string>>();
    record.summaries = obj.at("summaries").get<std::vector<std::string>>();
    if (record.doc_ids.empty()) throw DataError(where + ": doc_ids is empty");
    if (record.summaries.empty()) throw DataError(where + ": summaries is empty");
    out.push_back(std::move(record));
  }
  if (out.empty()) throw DataError(path + ": no qMDS records");
  return out;
}

DatasetBuildResult build_story_dataset(
    const std::vector<std::pair<std::string, std::string>>& stories,
    const std::vector<QmdsRecord>& records, const DatasetBuildOptions& opts,
    const TokenizerConfig& tokenizer, LlmClient* llm, const TemplateSet& templates) {
  std::vector<std::string> warnings;
  std::map<std::string, std::vector<Document>> chapters_by_story;
  nlohmann::json chapter_counts = nlohmann::json::object();
  for (const auto& [story_id, html] : stories) {
    auto chapters = split_story(story_id, html, opts.delimiter_pattern, &warnings);
    if (chapters.empty()) {
      throw DataError("story \"" + story_id + "\" has no text content");
    }
    chapter_counts[story_id] = chapters.size();
    chapters_by_story.emplace(story_id, std::move(chapters));
  }

  const bool with_title = opts.contextualize == "title" || opts.contextualize == "title+answer";
  const bool with_answer = opts.contextualize == "title+answer";
  if (opts.contextualize != "none" && !with_title) {
    throw UsageError("unknown contextualize mode \"" + opts.contextualize +
                     "\" (expected none, title or title+answer)");
  }
  if (with_title && !llm) {
    throw UsageError("contextualize=" + opts.contextualize + " needs an LLM client");
  }

  std::vector<QmdsInstance> instances;
  instances.reserve(records.size());
  for (const QmdsRecord& record : records) {
    QmdsInstance inst;
    inst.summaries = record.summaries;
    for (const std::string& story_id : record.doc_ids) {
      auto it = chapters_by_story.find(story_id);
      if (it == chapters_by_story.end()) {
        throw DataError("qMDS record references unknown story \"" + story_id + "\"");
      }
      inst.docs.insert(inst.docs.end(), it->second.begin(), it->second.end());
    }
    inst.query = record.query;
    if (with_title) {
      std::optional<std::string> answer;
      if (with_answer) answer = record.summaries.front();
      inst.query = contextualize_query(record.query, record.doc_ids.front(), answer, *llm,
                                       templates, &warnings);
    }
    instances.push_back(std::move(inst));
  }

  auto [corpus, queries] = q2odmds_transform(instances, tokenizer);
  DatasetBuildResult result{std::move(corpus), std::move(queries), {}};
  result.report["mode"] = "story";
  result.report["stories"] = stories.size();
  result.report["chapters_per_story"] = std::move(chapter_counts);
  result.report["instances_in"] = records.size();
  result.report["instances_out"] = result.queries.size();
  result.report["contextualize"] = opts.contextualize;
  result.report["delimiter_pattern"] = opts.delimiter_pattern;
  result.report["warnings"] = warnings;
  return result;
}

DatasetBuildResult build_meeting_dataset(const std::vector<QmdsRecord>& records,
                                         const Corpus& source, const DatasetBuildOptions& opts,
                                         const Embedder& embedder, LlmClient* llm,
                                         const TemplateSet& templates) {
  std::vector<std::string> warnings;
  std::vector<std::pair<std::string, std::string>> query_items;
  std::map<std::string, std::string> query_texts, summary_texts;
  std::map<std::string, std::vector<std::string>> gold_map;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const QmdsRecord& record = records[i];
    std::string qid = query_id_for(i);
    query_items.emplace_back(qid, record.query);
    query_texts[qid] = record.query;
    std::string summary = record.summaries.front();
    for (std::size_t s = 1; s < record.summaries.size(); ++s) {
      summary += "\n\n" + record.summaries[s];
    }
    summary_texts[qid] = std::move(summary);
    for (const std::string& doc_id : record.doc_ids) {
      if (!source.find(doc_id)) {
        throw DataError("qMDS record " + std::to_string(i + 1) +
                        " references unknown doc_id \"" + doc_id + "\"");
      }
    }
    gold_map[qid] = record.doc_ids;
  }

  auto clusters = cluster_queries(query_items, embedder, opts.theta);
  nlohmann::json histogram_before = nlohmann::json::object();
  for (const auto& cluster : clusters) {
    histogram_before[std::to_string(cluster.members.size())] =
        histogram_before.value(std::to_string(cluster.members.size()), 0) + 1;
  }

  ResizeResult resized = resize_clusters(std::move(clusters), opts.bounds);

  int fallback_count = 0;
  std::vector<QmdsInstance> instances;
  instances.reserve(resized.clusters.size());
  nlohmann::json histogram_after = nlohmann::json::object();
  for (const auto& cluster : resized.clusters) {
    histogram_after[std::to_string(cluster.members.size())] =
        histogram_after.value(std::to_string(cluster.members.size()), 0) + 1;
    MergedPair merged =
        merge_cluster(cluster, query_texts, summary_texts, gold_map, llm, templates,
                      opts.merge_max_output_tokens, &fallback_count, &warnings);
    QmdsInstance inst;
    inst.query = merged.merged_query;
    inst.summaries.push_back(merged.merged_summary);
    for (const std::string& doc_id : merged.source_doc_ids) {
      inst.docs.push_back(source.at_id(doc_id));
    }
    instances.push_back(std::move(inst));
  }

  auto [corpus, queries] = q2odmds_transform(instances, source.tokenizer());
  DatasetBuildResult result{std::move(corpus), std::move(queries), {}};
  result.report["mode"] = "meeting";
  result.report["instances_in"] = records.size();
  result.report["instances_out"] = result.queries.size();
  result.report["theta"] = opts.theta;
  result.report["theta_step"] = opts.bounds.theta_step;
  result.report["theta_cap"] = opts.bounds.theta_cap;
  result.report["min_size"] = opts.bounds.min_size;
  result.report["max_size"] = opts.bounds.max_size;
  result.report["cluster_sizes_before_resize"] = std::move(histogram_before);
  result.report["cluster_sizes"] = std::move(histogram_after);
  result.report["fallback_merges"] = fallback_count;
  result.report["flagged"] = resized.flagged;
  result.report["warnings"] = warnings;
  return result;
}

}  // namespace odmds
