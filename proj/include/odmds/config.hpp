#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "odmds/dataset_builder.hpp"
#include "odmds/embedding.hpp"
#include "odmds/llm.hpp"
#include "odmds/prompts.hpp"
#include "odmds/summarize.hpp"
#include "odmds/tokenizer.hpp"

namespace odmds {

// One experiment manifest: a single JSON file, env vars for secrets only,
// command-line flags override individual fields.
struct PipelineConfig {
  TokenizerConfig tokenizer;

  struct Bm25Params {
    double k1 = 1.2;
    double b = 0.75;
  } bm25;

  EmbeddingProviderConfig embedding;

  struct LlmSection {
    std::string kind = "remote";  // remote | scripted | extractive
    LlmClientConfig remote;
    std::vector<std::string> script;  // scripted replies, in order
    std::string script_path;          // or a JSONL file of replies
    int max_output_tokens = 256;
    double temperature = 0.0;
  } llm;

  StrategyConfig strategy;
  DatasetBuildOptions dataset;

  std::map<std::string, std::string> paths;  // default input/output locations
  std::string templates_path;
  std::uint64_t seed = 0;  // default hashing-embedder seed

  std::string path_or(const std::string& key, const std::string& fallback) const;
};

PipelineConfig load_pipeline_config(const std::string& path);

// Instantiates the configured client; scripted replies come from the inline
// script or from script_path (one JSON string per line).
std::unique_ptr<LlmClient> make_llm_client(const PipelineConfig::LlmSection& section,
                                           const TokenizerConfig& tokenizer);

TemplateSet load_templates(const PipelineConfig& config);

}  // namespace odmds
