#pragma once

#include <map>
#include <string>

#include "odmds/llm.hpp"

namespace odmds {

struct PromptTemplate {
  std::string name;
  std::string system_text;
  std::string user_text;  // with {placeholder} slots
};

using PromptBindings = std::map<std::string, std::string>;

// Substitutes every {name} slot in `text` from `bindings`. A slot without a
// binding is an error; extra bindings are ignored. Braces that do not form a
// well-formed slot are copied through untouched.
std::string render_text(const std::string& text, const PromptBindings& bindings);

LlmRequest render_prompt(const PromptTemplate& tmpl, const PromptBindings& bindings,
                         int max_output_tokens, double temperature = 0.0);

// Convenience for the document+query templates: binds whichever of
// {story}/{meeting}/{docs}/{chunk} the template uses to docs_text.
LlmRequest render_prompt(const PromptTemplate& tmpl, const std::string& docs_text,
                         const std::string& query, int max_output_tokens,
                         double temperature = 0.0);

// Named template collection. Defaults ship the story/meeting prompts plus the
// map/reduce/refine/merge/contextualize/judge prompts; a JSON config file can
// override any of them without a rebuild.
class TemplateSet {
 public:
  static TemplateSet defaults();

  const PromptTemplate& get(const std::string& name) const;
  void set(PromptTemplate tmpl);
  void merge_from_file(const std::string& path);
  const std::map<std::string, PromptTemplate>& all() const { return templates_; }

 private:
  std::map<std::string, PromptTemplate> templates_;
};

}  // namespace odmds
