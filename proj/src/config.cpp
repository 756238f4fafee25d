#include "odmds/config.hpp"

#include <json.hpp>

#include "odmds/errors.hpp"
#include "odmds/jsonl.hpp"

namespace odmds {

namespace {

TokenizerConfig tokenizer_from_json(const nlohmann::json& obj) {
  TokenizerConfig cfg;
  std::string mode = obj.value("mode", "whitespace");
  if (mode == "whitespace") {
    cfg.mode = TokenizerMode::whitespace;
  } else if (mode == "unicode-word") {
    cfg.mode = TokenizerMode::unicode_word;
  } else {
    throw UsageError("tokenizer.mode must be whitespace or unicode-word, got \"" + mode + "\"");
  }
  cfg.lowercase = obj.value("lowercase", true);
  cfg.strip_punctuation = obj.value("strip_punctuation", true);
  return cfg;
}

EmbeddingProviderConfig embedding_from_json(const nlohmann::json& obj, std::uint64_t seed) {
  EmbeddingProviderConfig cfg;
  std::string kind = obj.value("kind", "hashing");
  if (kind == "hashing") {
    cfg.kind = EmbeddingKind::hashing;
  } else if (kind == "remote") {
    cfg.kind = EmbeddingKind::remote;
  } else {
    throw UsageError("embedding.kind must be hashing or remote, got \"" + kind + "\"");
  }
  cfg.dimension = obj.value("dimension", cfg.dimension);
  cfg.seed = obj.value("seed", seed);
  cfg.endpoint = obj.value("endpoint", cfg.endpoint);
  cfg.model = obj.value("model", cfg.model);
  cfg.api_key_env = obj.value("api_key_env", cfg.api_key_env);
  cfg.max_input_tokens = obj.value("max_input_tokens", cfg.max_input_tokens);
  if (cfg.max_input_tokens < 1) throw UsageError("embedding.max_input_tokens must be >= 1");
  std::string strategy = obj.value("long_doc_strategy", "truncate");
  if (strategy == "truncate") {
    cfg.long_doc_strategy = LongDocStrategy::truncate;
  } else if (strategy == "weighted_average") {
    cfg.long_doc_strategy = LongDocStrategy::weighted_average;
  } else {
    throw UsageError("embedding.long_doc_strategy must be truncate or weighted_average");
  }
  cfg.max_concurrency = obj.value("max_concurrency", cfg.max_concurrency);
  cfg.max_retries = obj.value("max_retries", cfg.max_retries);
  cfg.retry_base_ms = obj.value("retry_base_ms", cfg.retry_base_ms);
  return cfg;
}

StrategyConfig strategy_from_json(const nlohmann::json& obj) {
  StrategyConfig cfg;
  if (obj.contains("name")) cfg.strategy = strategy_from_name(obj["name"].get<std::string>());
  cfg.context_budget = obj.value("context_budget", cfg.context_budget);
  cfg.chunk_budget = obj.value("chunk_budget", cfg.chunk_budget);
  cfg.overlap = obj.value("overlap", cfg.overlap);
  if (obj.contains("order")) cfg.order = refine_order_from_name(obj["order"].get<std::string>());
  cfg.max_output_tokens = obj.value("max_output_tokens", cfg.max_output_tokens);
  cfg.temperature = obj.value("temperature", cfg.temperature);
  cfg.flavor = obj.value("flavor", cfg.flavor);
  cfg.max_concurrency = obj.value("max_concurrency", cfg.max_concurrency);
  return cfg;
}

DatasetBuildOptions dataset_from_json(const nlohmann::json& obj) {
  DatasetBuildOptions opts;
  opts.mode = obj.value("mode", opts.mode);
  opts.theta = obj.value("theta", opts.theta);
  opts.bounds.theta_step = obj.value("theta_step", opts.bounds.theta_step);
  opts.bounds.theta_cap = obj.value("theta_cap", opts.bounds.theta_cap);
  opts.bounds.min_size = obj.value("min_size", opts.bounds.min_size);
  opts.bounds.max_size = obj.value("max_size", opts.bounds.max_size);
  opts.contextualize = obj.value("contextualize", opts.contextualize);
  opts.delimiter_pattern = obj.value("delimiter_pattern", opts.delimiter_pattern);
  opts.merge_max_output_tokens = obj.value("merge_max_output_tokens", opts.merge_max_output_tokens);
  return opts;
}

}  // namespace

std::string PipelineConfig::path_or(const std::string& key, const std::string& fallback) const {
  auto it = paths.find(key);
  return it == paths.end() ? fallback : it->second;
}

PipelineConfig load_pipeline_config(const std::string& path) {
  PipelineConfig config;
  nlohmann::json obj = nlohmann::json::parse(read_file(path), nullptr, false);
  if (obj.is_discarded() || !obj.is_object()) {
    throw UsageError(path + ": config must be a JSON object");
  }
  config.seed = obj.value("seed", config.seed);
  if (obj.contains("tokenizer")) config.tokenizer = tokenizer_from_json(obj["tokenizer"]);
  if (obj.contains("bm25")) {
    config.bm25.k1 = obj["bm25"].value("k1", config.bm25.k1);
    config.bm25.b = obj["bm25"].value("b", config.bm25.b);
  }
  if (obj.contains("embedding")) {
    config.embedding = embedding_from_json(obj["embedding"], config.seed);
  } else {
    config.embedding.seed = config.seed;
  }
  if (obj.contains("llm")) {
    const auto& llm = obj["llm"];
    config.llm.kind = llm.value("kind", config.llm.kind);
    config.llm.remote.base_url = llm.value("base_url", config.llm.remote.base_url);
    config.llm.remote.model = llm.value("model", config.llm.remote.model);
    config.llm.remote.api_key_env = llm.value("api_key_env", config.llm.remote.api_key_env);
    config.llm.remote.completions_path =
        llm.value("completions_path", config.llm.remote.completions_path);
    config.llm.remote.max_retries = llm.value("max_retries", config.llm.remote.max_retries);
    config.llm.remote.retry_base_ms = llm.value("retry_base_ms", config.llm.remote.retry_base_ms);
    config.llm.remote.timeout_s = llm.value("timeout_s", config.llm.remote.timeout_s);
    if (llm.contains("script")) config.llm.script = llm["script"].get<std::vector<std::string>>();
    config.llm.script_path = llm.value("script_path", config.llm.script_path);
    config.llm.max_output_tokens = llm.value("max_output_tokens", config.llm.max_output_tokens);
    config.llm.temperature = llm.value("temperature", config.llm.temperature);
  }
  if (obj.contains("strategy")) config.strategy = strategy_from_json(obj["strategy"]);
  if (obj.contains("dataset")) config.dataset = dataset_from_json(obj["dataset"]);
  if (obj.contains("paths")) {
    for (const auto& [key, value] : obj["paths"].items()) {
      config.paths[key] = value.get<std::string>();
    }
  }
  config.templates_path = obj.value("templates_path", config.templates_path);
  return config;
}

std::unique_ptr<LlmClient> make_llm_client(const PipelineConfig::LlmSection& section,
                                           const TokenizerConfig& tokenizer) {
  if (section.kind == "remote") {
    return std::make_unique<RemoteLlmClient>(section.remote);
  }
  if (section.kind == "extractive") {
    return std::make_unique<ExtractiveLlmClient>(tokenizer);
  }
  if (section.kind == "scripted") {
    std::vector<std::string> replies = section.script;
    if (!section.script_path.empty()) {
      for (const auto& [line_no, obj] : read_jsonl(section.script_path)) {
        if (!obj.is_string()) {
          throw DataError(section.script_path + ":" + std::to_string(line_no) +
                          ": scripted replies must be JSON strings");
        }
        replies.push_back(obj.get<std::string>());
      }
    }
    return std::make_unique<ScriptedLlmClient>(std::move(replies));
  }
  throw UsageError("llm.kind must be remote, scripted or extractive, got \"" + section.kind +
                   "\"");
}

TemplateSet load_templates(const PipelineConfig& config) {
  TemplateSet templates = TemplateSet::defaults();
  if (!config.templates_path.empty()) templates.merge_from_file(config.templates_path);
  return templates;
}

}  // namespace odmds
