#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "odmds/errors.hpp"
#include "odmds/llm.hpp"
#include "odmds/prompts.hpp"

using namespace odmds;

TEST_CASE("render_text substitutes placeholders exactly") {
  PromptBindings bindings{{"query", "Q?"}, {"story", "X"}};
  CHECK(render_text("STORY:{story} QUESTION:{query} SUMMARY:", bindings) ==
        "STORY:X QUESTION:Q? SUMMARY:");
  CHECK_THROWS_WITH_AS(render_text("needs {query}", {}), doctest::Contains("{query}"),
                       std::invalid_argument);
  // braces that are not well-formed slots pass through, and substituted
  // values are not re-scanned
  CHECK(render_text("a { b } c {}", {}) == "a { b } c {}");
  CHECK(render_text("{story}", {{"story", "keep {query} literal"}}) == "keep {query} literal");
}

TEST_CASE("story and meeting templates match the shipped wording") {
  TemplateSet templates = TemplateSet::defaults();

  LlmRequest story = render_prompt(templates.get("story"), "X", "Q?", 64);
  CHECK(story.user.find("STORY:X QUESTION:Q? SUMMARY:") != std::string::npos);
  CHECK(story.system ==
        "You are a helpful assistant that gives long answer to question based on a long story.");
  // the query sits after the document text
  CHECK(story.user.find("STORY:") < story.user.find("QUESTION:"));

  LlmRequest meeting = render_prompt(templates.get("meeting"), "M", "Q?", 64);
  CHECK(meeting.user.find("do not leave out useful information") != std::string::npos);
  CHECK(meeting.user.find("MEETING:M QUESTION:Q? SUMMARY:") != std::string::npos);
}

TEST_CASE("template overrides from a file") {
  TemplateSet templates = TemplateSet::defaults();
  auto path =
      (std::filesystem::temp_directory_path() / "odmds_templates_override.json").string();
  {
    std::ofstream out(path);
    out << R"({"story": {"user": "CUSTOM {story} {query}"}, "extra": {"system": "s", "user": "u"}})";
  }
  templates.merge_from_file(path);
  CHECK(templates.get("story").user_text == "CUSTOM {story} {query}");
  // system text is kept from the default when the override omits it
  CHECK(!templates.get("story").system_text.empty());
  CHECK(templates.get("extra").user_text == "u");
  CHECK_THROWS_AS(templates.get("missing"), UsageError);
}

TEST_CASE("scripted client returns replies in order and then fails") {
  ScriptedLlmClient client({"S1", "S2"});
  LlmRequest req;
  req.user = "u";
  CHECK(client.complete(req).text == "S1");
  CHECK(client.complete(req).text == "S2");
  CHECK_THROWS_AS(client.complete(req), ProviderError);
}

TEST_CASE("requests with empty user text are rejected") {
  ScriptedLlmClient client({"S1"});
  LlmRequest req;
  CHECK_THROWS_AS(client.complete(req), std::invalid_argument);
}

TEST_CASE("extractive client slices between the document marker and QUESTION:") {
  TokenizerConfig cfg;
  ExtractiveLlmClient client(cfg);
  LlmRequest req;
  req.user = "Write an answer. STORY:once upon a time there was a fox QUESTION:what? SUMMARY:";
  req.max_output_tokens = 4;
  CHECK(client.complete(req).text == "once upon a time");

  // no marker: falls back to the whole user text
  LlmRequest bare;
  bare.user = "just words here";
  bare.max_output_tokens = 2;
  CHECK(client.complete(bare).text == "just words");
}

TEST_CASE("recording client logs every request it forwards") {
  ScriptedLlmClient inner({"A", "B"});
  RecordingLlmClient recorder(inner);
  LlmRequest req;
  req.user = "first";
  recorder.complete(req);
  req.user = "second";
  recorder.complete(req);
  REQUIRE(recorder.requests().size() == 2);
  CHECK(recorder.requests()[0].user == "first");
  CHECK(recorder.requests()[1].user == "second");
}

TEST_CASE("remote client retry contract") {
  httplib::Server server;
  std::atomic<int> calls{0};
  server.Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
    int n = ++calls;
    auto body = nlohmann::json::parse(req.body);
    REQUIRE(body["messages"].is_array());
    if (n <= 2) {
      res.status = 500;
      return;
    }
    nlohmann::json payload = {
        {"model", "mock-chat"},
        {"choices", {{{"message", {{"role", "assistant"}, {"content", "hello"}}}}}},
    };
    res.set_content(payload.dump(), "application/json");
  });
  server.Post("/broken/chat/completions",
              [&](const httplib::Request&, httplib::Response& res) { res.status = 503; });
  std::atomic<int> rejected{0};
  server.Post("/reject/chat/completions", [&](const httplib::Request&, httplib::Response& res) {
    ++rejected;
    res.status = 400;
    res.set_content("bad request", "text/plain");
  });
  server.Post("/empty/chat/completions", [&](const httplib::Request&, httplib::Response& res) {
    nlohmann::json payload = {
        {"choices", {{{"message", {{"role", "assistant"}, {"content", ""}}}}}}};
    res.set_content(payload.dump(), "application/json");
  });
  int port = server.bind_to_any_port("127.0.0.1");
  REQUIRE(port > 0);
  std::thread server_thread([&] { server.listen_after_bind(); });
  while (!server.is_running()) std::this_thread::yield();

  LlmClientConfig config;
  config.base_url = "http://127.0.0.1:" + std::to_string(port) + "/v1";
  config.model = "mock-chat";
  config.retry_base_ms = 2;

  LlmRequest req;
  req.system = "sys";
  req.user = "user text";

  RemoteLlmClient client(config);
  auto res = client.complete(req);
  CHECK(res.text == "hello");
  CHECK(calls == 3);  // 500, 500, 200
  CHECK(res.input_token_estimate == 3);
  CHECK(res.provider_meta == "mock-chat");

  auto broken = config;
  broken.base_url = "http://127.0.0.1:" + std::to_string(port) + "/broken";
  RemoteLlmClient broken_client(broken);
  CHECK_THROWS_AS(broken_client.complete(req), ProviderError);  // 4 attempts, all 5xx

  auto reject = config;
  reject.base_url = "http://127.0.0.1:" + std::to_string(port) + "/reject";
  RemoteLlmClient reject_client(reject);
  CHECK_THROWS_AS(reject_client.complete(req), ProviderError);
  CHECK(rejected == 1);  // 4xx is not retried

  auto empty = config;
  empty.base_url = "http://127.0.0.1:" + std::to_string(port) + "/empty";
  RemoteLlmClient empty_client(empty);
  CHECK_THROWS_WITH_AS(empty_client.complete(req), doctest::Contains("empty"), ProviderError);

  server.stop();
  server_thread.join();
}
