#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "odmds/corpus.hpp"
#include "odmds/embedding.hpp"
#include "odmds/llm.hpp"
#include "odmds/prompts.hpp"

namespace odmds {

// One query-focused MDS instance: a query, the documents it was answered
// from, and one or more reference summaries.
struct QmdsInstance {
  std::string query;
  std::vector<Document> docs;
  std::vector<std::string> summaries;
};

// Pools all documents (dedup by doc_id, conflicting texts are an error) and
// keeps one QueryInstance per input instance with gold links to its docs.
// Query ids are assigned q0001, q0002, ... in input order.
std::pair<Corpus, std::vector<QueryInstance>> q2odmds_transform(
    const std::vector<QmdsInstance>& instances, const TokenizerConfig& tokenizer);

// Splits scraped story HTML into chapter documents at horizontal-rule
// delimiters. `delimiter_pattern` is a literal pattern where '*' matches any
// run of characters inside the tag; the default matches any <hr class="..."/>.
// Tags are stripped from each segment; empty segments are dropped; chapter
// ids are <story_id>-c<ordinal> with 0-based ordinals. Zero delimiter matches
// yields a single chapter and a warning.
std::vector<Document> split_story(const std::string& story_id, const std::string& html,
                                  const std::string& delimiter_pattern,
                                  std::vector<std::string>* warnings = nullptr);

// Asks the LLM to rewrite a vague query using the story title and, when
// given, one reference answer. Empty completions fall back to the original
// query with a warning.
std::string contextualize_query(const std::string& query, const std::string& title,
                                const std::optional<std::string>& answer, LlmClient& llm,
                                const TemplateSet& templates,
                                std::vector<std::string>* warnings = nullptr,
                                int max_output_tokens = 128);

using Embedder = std::function<EmbeddingVector(const std::string&)>;

// Embeds with the provider, truncating inputs that exceed its token limit.
Embedder make_embedder(const EmbeddingProviderConfig& provider, const TokenizerConfig& cfg);

struct ClusterMember {
  std::string query_id;
  EmbeddingVector embedding;
};

struct QueryCluster {
  int cluster_id = 0;
  std::vector<ClusterMember> members;  // members.front() is the leader
  double threshold_used = 0.0;
};

// Deterministic leader clustering: queries are scanned in input order and
// join the first cluster whose leader similarity exceeds theta, else open a
// new cluster.
std::vector<QueryCluster> cluster_queries(
    const std::vector<std::pair<std::string, std::string>>& queries, const Embedder& embedder,
    double theta);

struct ClusterBounds {
  std::size_t min_size = 2;
  std::size_t max_size = 6;
  double theta_step = 0.05;  // added per split retry; the sign is the direction
  double theta_cap = 0.99;
};

struct ResizeResult {
  std::vector<QueryCluster> clusters;
  std::vector<std::string> flagged;  // leftovers that could not be resized
};

// Oversized clusters are re-clustered internally at a stepped threshold until
// every part fits or the threshold hits its cap; undersized clusters merge
// into the cluster with the most similar leader until all reach min_size or
// one cluster remains. Unresolvable leftovers are flagged, never dropped.
ResizeResult resize_clusters(std::vector<QueryCluster> clusters, const ClusterBounds& bounds);

struct MergedPair {
  std::string merged_query;
  std::string merged_summary;
  std::vector<std::string> source_query_ids;
  std::vector<std::string> source_doc_ids;  // union of members' golds, dedup
};

// Merges a cluster's queries and summaries, via two LLM calls when a client
// is given (falling back to plain concatenation on provider failure, which
// must not abort a build) or by concatenation when it is not.
MergedPair merge_cluster(const QueryCluster& cluster,
                         const std::map<std::string, std::string>& query_texts,
                         const std::map<std::string, std::string>& summary_texts,
                         const std::map<std::string, std::vector<std::string>>& gold_map,
                         LlmClient* llm, const TemplateSet& templates,
                         int max_output_tokens = 256, int* fallback_count = nullptr,
                         std::vector<std::string>* warnings = nullptr);

// On-disk qMDS record: {"query": ..., "doc_ids": [...], "summaries": [...]}.
struct QmdsRecord {
  std::string query;
  std::vector<std::string> doc_ids;
  std::vector<std::string> summaries;
};

std::vector<QmdsRecord> load_qmds(const std::string& path);

struct DatasetBuildOptions {
  std::string mode = "meeting";  // story | meeting
  double theta = 0.80;
  ClusterBounds bounds;
  std::string contextualize = "none";  // none | title | title+answer
  std::string delimiter_pattern = "<hr class=\"*\"/>";
  int merge_max_output_tokens = 256;
};

struct DatasetBuildResult {
  Corpus corpus;
  std::vector<QueryInstance> queries;
  nlohmann::json report;
};

// Story pipeline: split stories into chapters, optionally contextualize the
// queries, then pool chapters per the q2OD-MDS transform. `stories` maps
// story_id -> raw HTML; qMDS doc_ids reference story ids.
DatasetBuildResult build_story_dataset(
    const std::vector<std::pair<std::string, std::string>>& stories,
    const std::vector<QmdsRecord>& records, const DatasetBuildOptions& opts,
    const TokenizerConfig& tokenizer, LlmClient* llm, const TemplateSet& templates);

// Meeting pipeline: cluster queries by embedding similarity, resize, merge
// each cluster into one pair, then pool the referenced transcripts.
DatasetBuildResult build_meeting_dataset(const std::vector<QmdsRecord>& records,
                                         const Corpus& source, const DatasetBuildOptions& opts,
                                         const Embedder& embedder, LlmClient* llm,
                                         const TemplateSet& templates);

}  // namespace odmds
