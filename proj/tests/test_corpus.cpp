#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>

#include "advneg/corpus.hpp"
#include "support/fixtures.hpp"

using namespace advneg;
namespace fs = std::filesystem;

namespace {

fs::path tmp_dir() {
  fs::path dir = fs::path(ADVNEG_TEST_TMP) / "corpus";
  fs::create_directories(dir);
  return dir;
}

fs::path write_file(const std::string& name, const std::string& content) {
  fs::path path = tmp_dir() / name;
  std::ofstream out(path, std::ios::binary);
  out << content;
  return path;
}

const char* kValidThree =
    R"({"id":"c1","split":"train","utterances":[{"speaker":0,"text":"hello there"}]}
{"id":"c2","split":"train","utterances":[{"speaker":0,"text":"hi"},{"speaker":1,"text":"how are you"}]}
{"id":"c3","split":"test","persona":["i like dogs"],"utterances":[{"speaker":0,"text":"any pets ?"}]}
)";

}  // namespace

TEST_CASE("load_contexts accepts well-formed records", "[corpus]") {
  auto path = write_file("valid.jsonl", kValidThree);
  auto loaded = load_contexts(path.string());
  REQUIRE(loaded.contexts.size() == 3);
  CHECK(loaded.rejects.empty());
  CHECK(loaded.contexts[2].persona.size() == 1);
  CHECK(loaded.contexts[1].utterances[1].text == "how are you");
}

TEST_CASE("empty utterance lists are rejected, not dropped silently", "[corpus]") {
  auto path = write_file(
      "one_bad.jsonl",
      std::string(kValidThree) +
          R"({"id":"c4","split":"train","utterances":[]})" + "\n");
  auto loaded = load_contexts(path.string());
  CHECK(loaded.contexts.size() == 3);
  REQUIRE(loaded.rejects.size() == 1);
  CHECK(loaded.rejects[0].line == 4);
}

TEST_CASE("duplicate ids are reported", "[corpus]") {
  auto path = write_file(
      "dup.jsonl",
      R"({"id":"c1","split":"train","utterances":[{"speaker":0,"text":"a"}]}
{"id":"c1","split":"train","utterances":[{"speaker":0,"text":"b"}]}
)");
  auto loaded = load_contexts(path.string());
  CHECK(loaded.contexts.size() == 1);
  REQUIRE(loaded.rejects.size() == 1);
}

TEST_CASE("unreadable files throw", "[corpus]") {
  CHECK_THROWS_AS(load_contexts("/nonexistent/nope.jsonl"), DataError);
}

TEST_CASE("json array format is also accepted", "[corpus]") {
  auto path = write_file(
      "arr.json",
      R"([{"id":"c1","split":"train","utterances":[{"speaker":0,"text":"a"}]}])");
  auto loaded = load_contexts(path.string(), CorpusFormat::json_array);
  CHECK(loaded.contexts.size() == 1);
}

TEST_CASE("candidate grouping yields 5 positives and 10 negatives", "[corpus]") {
  // DailyDialog++-shaped: 5 positive, 5 random, 5 adversarial per context.
  std::ostringstream candidates;
  for (int i = 0; i < 5; ++i) {
    candidates << R"({"context_id":"c1","text":"pos )" << i
               << R"(","label":"positive","approach":"gold","source":"gold_response"})"
               << "\n";
    candidates << R"({"context_id":"c1","text":"rand )" << i
               << R"(","label":"random_negative","approach":"random","source":"corpus_sample"})"
               << "\n";
    candidates << R"({"context_id":"c1","text":"adv )" << i
               << R"(","label":"adversarial_negative","approach":"human","source":"generated","error_tags":["C-ent"]})"
               << "\n";
  }
  auto ctx_path = write_file("dd_ctx.jsonl",
                             R"({"id":"c1","split":"train","utterances":[{"speaker":0,"text":"hi"}]})"
                             "\n");
  auto cand_path = write_file("dd_cand.jsonl", candidates.str());
  auto ctx = load_contexts(ctx_path.string());
  auto cand = load_candidates(cand_path.string());
  REQUIRE(cand.rejects.empty());
  auto grouped = group_examples(ctx.contexts, cand.records);
  REQUIRE(grouped.examples.size() == 1);
  CHECK(grouped.examples[0].positives.size() == 5);
  CHECK(grouped.examples[0].negatives.size() == 10);
  CHECK(grouped.orphans.empty());
}

TEST_CASE("error tags on non-adversarial candidates are rejected", "[corpus]") {
  auto path = write_file(
      "bad_tags.jsonl",
      R"({"context_id":"c1","text":"x","label":"positive","approach":"gold","source":"gold_response","error_tags":["C-ent"]})"
      "\n");
  auto loaded = load_candidates(path.string());
  CHECK(loaded.records.empty());
  CHECK(loaded.rejects.size() == 1);
}

TEST_CASE("candidate round trip is byte identical", "[corpus]") {
  auto fixture = fixtures::make_corpus(4, 9);
  std::ostringstream first;
  write_candidates(first, fixture.gold_records);
  auto path = write_file("roundtrip.jsonl", first.str());
  auto loaded = load_candidates(path.string());
  REQUIRE(loaded.rejects.empty());
  std::ostringstream second;
  write_candidates(second, loaded.records);
  CHECK(first.str() == second.str());
}

TEST_CASE("context round trip is byte identical", "[corpus]") {
  auto fixture = fixtures::make_corpus(4, 10);
  fixture.contexts[1].persona = {"i love trains", "i collect maps"};
  std::ostringstream first;
  write_contexts(first, fixture.contexts);
  auto path = write_file("ctx_roundtrip.jsonl", first.str());
  auto loaded = load_contexts(path.string());
  REQUIRE(loaded.rejects.empty());
  std::ostringstream second;
  write_contexts(second, loaded.contexts);
  CHECK(first.str() == second.str());
}

TEST_CASE("persona expansion is idempotent and non-mutating", "[corpus]") {
  DialogueContext ctx;
  ctx.id = "p1";
  ctx.persona = {"i have two cats"};
  ctx.utterances = {{0, "hello"}, {1, "hi there"}};
  auto once = expanded_utterances(ctx);
  auto twice = expanded_utterances(ctx);
  REQUIRE(once.size() == 3);
  CHECK(once.size() == twice.size());
  CHECK(ctx.utterances.size() == 2);  // never mutated
  CHECK(once[0].text == "i have two cats");
}

TEST_CASE("sample_context_pairs picks distinct prefixes", "[corpus]") {
  DialogueContext dialogue;
  dialogue.id = "d1";
  for (int i = 0; i < 6; ++i) {
    dialogue.utterances.push_back({i % 2, "utterance " + std::to_string(i)});
  }
  Rng rng = derive_rng(42, "d1", "pairs");
  auto sampled = sample_context_pairs(dialogue, 2, rng);
  CHECK_FALSE(sampled.shortfall);
  REQUIRE(sampled.pairs.size() == 2);
  CHECK(sampled.pairs[0].context.id != sampled.pairs[1].context.id);
  std::set<std::size_t> lengths;
  for (const auto& pair : sampled.pairs) {
    lengths.insert(pair.context.utterances.size());
    // response is the utterance right after the prefix
    const std::size_t h = pair.context.utterances.size();
    CHECK(pair.gold.text == dialogue.utterances[h].text);
    CHECK(pair.context.utterances.front().text == dialogue.utterances[0].text);
  }
  CHECK(lengths.size() == 2);
}

TEST_CASE("short dialogues yield fewer pairs with a flag", "[corpus]") {
  DialogueContext dialogue;
  dialogue.id = "d2";
  dialogue.utterances = {{0, "hi"}, {1, "hello"}};
  Rng rng = derive_rng(42, "d2", "pairs");
  auto sampled = sample_context_pairs(dialogue, 2, rng);
  CHECK(sampled.shortfall);
  REQUIRE(sampled.pairs.size() == 1);
}

TEST_CASE("pair sampling is deterministic for a fixed seed", "[corpus]") {
  DialogueContext dialogue;
  dialogue.id = "d3";
  for (int i = 0; i < 9; ++i) {
    dialogue.utterances.push_back({i % 2, "turn " + std::to_string(i)});
  }
  Rng a = derive_rng(7, "d3", "pairs");
  Rng b = derive_rng(7, "d3", "pairs");
  auto first = sample_context_pairs(dialogue, 3, a);
  auto second = sample_context_pairs(dialogue, 3, b);
  REQUIRE(first.pairs.size() == second.pairs.size());
  for (std::size_t i = 0; i < first.pairs.size(); ++i) {
    CHECK(first.pairs[i].context.id == second.pairs[i].context.id);
    CHECK(first.pairs[i].gold.text == second.pairs[i].gold.text);
  }
}

TEST_CASE("pair_random_context never returns the input", "[corpus]") {
  auto fixture = fixtures::make_corpus(2, 3);
  Rng rng = derive_rng(1, "x", "crand");
  for (int i = 0; i < 10; ++i) {
    const auto& pick =
        pair_random_context(fixture.contexts[0], fixture.contexts, rng);
    CHECK(pick.id == fixture.contexts[1].id);
  }
  std::vector<DialogueContext> singleton = {fixture.contexts[0]};
  CHECK_THROWS_AS(pair_random_context(fixture.contexts[0], singleton, rng),
                  DataError);
}

TEST_CASE("pair_random_context draws uniformly", "[corpus]") {
  auto fixture = fixtures::make_corpus(10, 5);
  Rng rng = derive_rng(17, "chi", "crand");
  std::map<std::string, std::size_t> counts;
  const int trials = 900;
  for (int i = 0; i < trials; ++i) {
    counts[pair_random_context(fixture.contexts[0], fixture.contexts, rng).id]++;
  }
  REQUIRE(counts.size() == 9);
  // chi-squared against uniform over the 9 other contexts, df=8; the 0.01
  // critical value is 20.09.
  double chi = 0.0;
  const double expected = trials / 9.0;
  for (const auto& [id, c] : counts) {
    chi += (c - expected) * (c - expected) / expected;
  }
  CHECK(chi < 20.09);
}
