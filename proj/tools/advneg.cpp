// Command-line driver for the adversarial negative response toolkit.
//
// Subcommands mirror the pipeline stages so each one can be run and inspected
// in isolation: ingest, retrieve, synthesize, assemble, testset, score,
// evaluate, report, and the composite run.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "advneg/advneg.hpp"

namespace fs = std::filesystem;
using namespace advneg;

namespace {

struct CommonOpts {
  std::string config_path;
  std::string run_dir;
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::size_t workers = 0;
};

void add_common(CLI::App* cmd, CommonOpts& opts, bool config_required = true) {
  auto* c = cmd->add_option("--config", opts.config_path,
                            "pipeline config file (JSON)");
  if (config_required) c->required();
  cmd->add_option("--run-dir", opts.run_dir, "output directory override");
  cmd->add_option("--seed", opts.seed, "global seed override")
      ->each([&opts](const std::string&) { opts.seed_set = true; });
  cmd->add_option("--workers", opts.workers, "worker thread count override");
}

PipelineConfig resolve_config(const CommonOpts& opts) {
  PipelineConfig cfg =
      opts.config_path.empty() ? PipelineConfig{} : load_config(opts.config_path);
  if (!opts.run_dir.empty()) cfg.run_dir = opts.run_dir;
  if (opts.seed_set) cfg.seed = opts.seed;
  if (opts.workers > 0) cfg.workers = opts.workers;
  return cfg;
}

std::vector<CandidateRecord> load_candidate_file(const std::string& path) {
  auto loaded = load_candidates(path);
  if (!loaded.rejects.empty()) {
    throw DataError("candidate file " + path + " has " +
                    std::to_string(loaded.rejects.size()) + " bad records");
  }
  return loaded.records;
}

struct StageState {
  PipelineConfig cfg;
  Dataset dataset;
  StopwordSet stopwords;
};

StageState load_stage_state(const CommonOpts& opts) {
  PipelineConfig cfg = resolve_config(opts);
  cfg.validate();
  Dataset ds = load_dataset(cfg);
  StopwordSet sw = StopwordSet::load(cfg.stopwords_path);
  return {std::move(cfg), std::move(ds), std::move(sw)};
}

int cmd_ingest(const CommonOpts& opts) {
  auto state = load_stage_state(opts);
  fs::create_directories(state.cfg.run_dir);
  {
    std::ofstream out(fs::path(state.cfg.run_dir) / "contexts.jsonl",
                      std::ios::binary);
    write_contexts(out, state.dataset.contexts);
  }
  {
    std::vector<CandidateRecord> records;
    for (std::size_t i = 0; i < state.dataset.examples.size(); ++i) {
      for (const auto& c : state.dataset.examples[i].positives) {
        records.push_back({state.dataset.examples[i].context_id, c});
      }
      for (const auto& c : state.dataset.examples[i].negatives) {
        records.push_back({state.dataset.examples[i].context_id, c});
      }
    }
    std::ofstream out(fs::path(state.cfg.run_dir) / "candidates.jsonl",
                      std::ios::binary);
    write_candidates(out, records);
  }
  {
    std::ofstream out(fs::path(state.cfg.run_dir) / "ingest_report.json",
                      std::ios::binary);
    out << state.dataset.ingest_stats.dump(2) << '\n';
  }
  std::cout << state.dataset.ingest_stats.dump(2) << std::endl;
  return 0;
}

int cmd_retrieve(const CommonOpts& opts, const std::string& query,
                 std::size_t top) {
  auto state = load_stage_state(opts);
  std::vector<Bm25Doc> docs;
  for (const auto& entry : state.dataset.pool) {
    docs.push_back({entry.text, entry.context_id});
  }
  Bm25Index index =
      Bm25Index::build(std::move(docs), state.cfg.bm25_k1, state.cfg.bm25_b);
  fs::create_directories(state.cfg.run_dir);
  const auto path = fs::path(state.cfg.run_dir) / "bm25_index.jsonl";
  {
    std::ofstream out(path, std::ios::binary);
    index.save(out);
  }
  std::cout << "indexed " << index.num_docs() << " responses (avgdl "
            << index.avgdl() << ") -> " << path.string() << std::endl;
  if (!query.empty()) {
    auto tokens = content_words(tokenize(query).tokens, state.stopwords);
    auto result = index.top_k_terms(tokens, top, "", {});
    for (const auto& hit : result.hits) {
      std::cout << hit.score << "\t" << index.doc(hit.doc).text << std::endl;
    }
  }
  return 0;
}

int cmd_synthesize(const CommonOpts& opts, const std::string& approach_name) {
  auto approach = names::parse<CandidateApproach>(approach_name);
  if (!approach) throw ConfigError("unknown approach '" + approach_name + "'");
  auto state = load_stage_state(opts);
  PipelineConfig cfg = state.cfg;
  cfg.approaches = {*approach};
  cfg.validate();

  EmbeddingTable embeddings;
  if (!cfg.embeddings_path.empty()) {
    embeddings = EmbeddingTable::load(cfg.embeddings_path);
  }
  std::optional<Lexicons> lexicons;
  if (!cfg.lexicons_dir.empty()) lexicons = Lexicons::load(cfg.lexicons_dir);

  std::vector<Bm25Doc> docs;
  for (const auto& entry : state.dataset.pool) {
    docs.push_back({entry.text, entry.context_id});
  }
  Bm25Index index = Bm25Index::build(std::move(docs), cfg.bm25_k1, cfg.bm25_b);
  auto lm = std::make_shared<NGramLM>(train_pool_lm(state.dataset, cfg));
  auto backend = make_backend(cfg, lm);
  SynthesisEnv env{state.dataset.contexts, index, embeddings, state.stopwords,
                   *lm};

  auto result = synthesize_approach(*approach, state.dataset, env, *backend,
                                    lexicons ? &*lexicons : nullptr, cfg);
  fs::create_directories(fs::path(cfg.run_dir) / "candidates");
  const auto path = fs::path(cfg.run_dir) / "candidates" /
                    (approach_name + std::string(".jsonl"));
  {
    std::ofstream out(path, std::ios::binary);
    write_candidates(out, result.records);
  }
  {
    std::ofstream out(fs::path(cfg.run_dir) / "candidates" /
                          (approach_name + std::string(".provenance.jsonl")),
                      std::ios::binary);
    for (const auto& p : result.provenance) out << p.dump() << '\n';
  }
  std::cout << result.stats.dump(2) << std::endl;
  return 0;
}

int cmd_assemble(const CommonOpts& opts, const std::string& approach_name) {
  auto approach = names::parse<CandidateApproach>(approach_name);
  if (!approach) throw ConfigError("unknown approach '" + approach_name + "'");
  auto state = load_stage_state(opts);
  const auto cand_path = fs::path(state.cfg.run_dir) / "candidates" /
                         (approach_name + std::string(".jsonl"));
  if (!fs::exists(cand_path)) {
    throw DataError("no synthesized candidates at " + cand_path.string() +
                    "; run `advneg synthesize --approach " + approach_name +
                    "` first");
  }
  auto records = load_candidate_file(cand_path.string());
  std::unordered_map<std::string, std::vector<Candidate>> by_ctx;
  for (const auto& r : records) by_ctx[r.context_id].push_back(r.candidate);

  std::vector<std::string> lines;
  for (std::size_t i = 0; i < state.dataset.contexts.size(); ++i) {
    Rng rng = derive_rng(state.cfg.seed, state.dataset.contexts[i].id,
                         std::string("assemble:") + approach_name);
    auto it = by_ctx.find(state.dataset.contexts[i].id);
    const std::vector<Candidate> empty;
    NegativeSet set = assemble_train_set(
        state.dataset.examples[i], *approach,
        it == by_ctx.end() ? empty : it->second, state.dataset.pool, rng,
        state.cfg.per_side);
    check_train_set(set, state.cfg.per_side);
    lines.push_back(negative_set_to_json(set).dump());
  }
  const auto path = fs::path(state.cfg.run_dir) / "candidates" /
                    ("train_" + approach_name + ".jsonl");
  std::ofstream out(path, std::ios::binary);
  for (const auto& line : lines) out << line << '\n';
  std::cout << "wrote " << lines.size() << " train sets -> " << path.string()
            << std::endl;
  return 0;
}

int cmd_testset(const CommonOpts& opts, const std::string& protocol_name_str,
                const std::string& approach_name) {
  auto protocol = parse_protocol(protocol_name_str);
  if (!protocol) {
    throw ConfigError("unknown protocol '" + protocol_name_str + "'");
  }
  auto state = load_stage_state(opts);
  Rng rng = derive_rng(state.cfg.seed, "corpus", "testset");

  std::vector<ContextExamples> examples = state.dataset.examples;
  std::string stem = protocol_name_str;
  if (*protocol == RankingProtocol::dd_adversarial ||
      *protocol == RankingProtocol::dd_random) {
    if (!approach_name.empty()) {
      const auto cand_path = fs::path(state.cfg.run_dir) / "candidates" /
                             (approach_name + std::string(".jsonl"));
      if (!fs::exists(cand_path)) {
        throw DataError("no synthesized candidates at " + cand_path.string());
      }
      auto records = load_candidate_file(cand_path.string());
      std::unordered_map<std::string, std::vector<Candidate>> by_ctx;
      for (const auto& r : records) by_ctx[r.context_id].push_back(r.candidate);
      for (auto& ex : examples) {
        auto it = by_ctx.find(ex.context_id);
        ex.negatives = it == by_ctx.end() ? std::vector<Candidate>{} : it->second;
      }
      if (*protocol == RankingProtocol::dd_adversarial) {
        stem += "_" + approach_name;
      }
    }
  }
  auto built = build_ranking_instances(examples, state.dataset.by_id, *protocol,
                                       rng, state.dataset.pool,
                                       state.cfg.per_side);
  check_instances(built.instances, *protocol);
  fs::create_directories(fs::path(state.cfg.run_dir) / "instances");
  const auto path =
      fs::path(state.cfg.run_dir) / "instances" / (stem + ".jsonl");
  {
    std::ofstream out(path, std::ios::binary);
    write_instances(out, built.instances);
  }
  std::cout << "built " << built.instances.size() << " instances ("
            << built.report.skipped.size() << " skipped) -> " << path.string()
            << std::endl;
  return 0;
}

int cmd_score(const CommonOpts& opts, const std::string& instances_path,
              const std::string& scorer_name_str) {
  auto state = load_stage_state(opts);
  ScorerKind scorer = state.cfg.scorer;
  if (!scorer_name_str.empty()) {
    auto parsed = parse_scorer(scorer_name_str);
    if (!parsed) throw ConfigError("unknown scorer '" + scorer_name_str + "'");
    scorer = *parsed;
  }
  auto instances = load_instances(instances_path);
  std::shared_ptr<NGramLM> lm;
  if (scorer == ScorerKind::lm_fluency) {
    lm = std::make_shared<NGramLM>(train_pool_lm(state.dataset, state.cfg));
  }
  auto records = score_instances(instances, state.dataset.by_id, scorer,
                                 state.stopwords, lm.get());
  fs::create_directories(fs::path(state.cfg.run_dir) / "scores");
  const std::string stem = fs::path(instances_path).stem().string();
  const auto path = fs::path(state.cfg.run_dir) / "scores" /
                    (std::string(scorer_name(scorer)) + "__" + stem + ".jsonl");
  {
    std::ofstream out(path, std::ios::binary);
    write_scores(out, records);
  }
  std::cout << "scored " << instances.size() << " instances -> " << path.string()
            << std::endl;
  return 0;
}

int cmd_evaluate(const std::string& instances_path,
                 const std::string& scores_path, const std::string& ratings_path,
                 double threshold) {
  auto instances = load_instances(instances_path);
  auto scores = load_scores(scores_path);
  auto summary = evaluate_instances(instances, scores, threshold);
  nlohmann::json j;
  j["instances"] = summary.instances;
  j["accuracy"] = summary.accuracy;
  j["recall_at_1"] = summary.recall_at_1;
  j["recall_at_2"] = summary.recall_at_2;
  j["mrr"] = summary.mean_reciprocal_rank;
  if (!ratings_path.empty()) {
    auto ratings = build_ratings_matrix(load_ratings(ratings_path));
    auto corr = correlate_with_ratings(scores, ratings);
    j["correlation"] = {
        {"items", corr.items},
        {"pearson", corr.pearson_r ? nlohmann::json(*corr.pearson_r)
                                   : nlohmann::json()},
        {"spearman", corr.spearman_r ? nlohmann::json(*corr.spearman_r)
                                     : nlohmann::json()}};
    auto alpha = krippendorff_alpha(ratings.matrix);
    j["krippendorff_alpha"] = alpha.alpha;
  }
  std::cout << j.dump(2) << std::endl;
  return 0;
}

int cmd_report(const CommonOpts& opts) {
  auto state = load_stage_state(opts);
  const fs::path run_dir(state.cfg.run_dir);
  if (!fs::exists(run_dir / "instances")) {
    throw DataError("no instances under " + run_dir.string());
  }
  std::vector<std::string> stems;
  for (const auto& entry : fs::directory_iterator(run_dir / "instances")) {
    if (entry.path().extension() == ".jsonl") {
      stems.push_back(entry.path().stem().string());
    }
  }
  std::sort(stems.begin(), stems.end());
  std::vector<ReportRow> rows;
  std::vector<std::pair<std::string, CorrelationSummary>> correlations;
  std::optional<RatingsData> ratings;
  if (!state.cfg.ratings_path.empty()) {
    ratings = build_ratings_matrix(load_ratings(state.cfg.ratings_path));
  }
  for (const auto& stem : stems) {
    const auto inst_path = run_dir / "instances" / (stem + ".jsonl");
    const auto score_path =
        run_dir / "scores" /
        (std::string(scorer_name(state.cfg.scorer)) + "__" + stem + ".jsonl");
    if (!fs::exists(score_path)) {
      throw DataError("missing score file " + score_path.string() +
                      "; run `advneg score` first");
    }
    auto instances = load_instances(inst_path.string());
    if (instances.empty()) continue;
    auto scores = load_scores(score_path.string());
    ReportRow row;
    row.test_set = stem;
    row.adversarial = stem.find("random") == std::string::npos;
    row.approach = stem;
    const std::string adv_prefix = "dd_adversarial_";
    if (stem.rfind(adv_prefix, 0) == 0) row.approach = stem.substr(adv_prefix.size());
    row.summary =
        evaluate_instances(instances, scores, state.cfg.accuracy_threshold);
    rows.push_back(std::move(row));
    if (ratings) {
      correlations.emplace_back(stem, correlate_with_ratings(scores, *ratings));
    }
  }
  std::optional<AlphaResult> alpha;
  if (ratings) alpha = krippendorff_alpha(ratings->matrix);
  const std::string report =
      format_report(rows, correlations, alpha, std::nullopt);
  {
    std::ofstream out(run_dir / "report.txt", std::ios::binary);
    out << report;
  }
  std::cout << report;
  return 0;
}

int cmd_run(const CommonOpts& opts) {
  PipelineConfig cfg = resolve_config(opts);
  RunManifest manifest = run(cfg);
  std::cout << "run complete: " << cfg.run_dir << std::endl;
  for (const auto& stage : manifest.stages) {
    std::cout << "  " << stage.name << ": " << stage.outputs.size()
              << " outputs" << std::endl;
  }
  std::cout << "manifest: " << (fs::path(cfg.run_dir) / "manifest.json").string()
            << std::endl;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"adversarial negative dialogue response toolkit"};
  app.require_subcommand(1);

  CommonOpts opts;
  std::string approach, protocol, query, instances_path, scores_path,
      ratings_path, scorer;
  std::size_t top = 10;
  double threshold = 0.5;

  auto* ingest = app.add_subcommand("ingest", "validate and normalize a dataset");
  add_common(ingest, opts);

  auto* retrieve = app.add_subcommand("retrieve", "build the BM25 index");
  add_common(retrieve, opts);
  retrieve->add_option("--query", query, "print top hits for a query");
  retrieve->add_option("--top", top, "number of hits to print");

  auto* synthesize =
      app.add_subcommand("synthesize", "generate negative candidates");
  add_common(synthesize, opts);
  synthesize->add_option("--approach", approach, "approach to synthesize")
      ->required();

  auto* assemble = app.add_subcommand("assemble", "build 5+5 train sets");
  add_common(assemble, opts);
  assemble->add_option("--approach", approach, "approach to assemble")
      ->required();

  auto* testset = app.add_subcommand("testset", "build ranking instances");
  add_common(testset, opts);
  testset->add_option("--protocol", protocol, "ranking protocol")->required();
  testset->add_option("--approach", approach,
                      "candidate approach for dd protocols");

  auto* score = app.add_subcommand("score", "score ranking instances");
  add_common(score, opts);
  score->add_option("--instances", instances_path, "instance file")->required();
  score->add_option("--scorer", scorer, "scorer override");

  auto* evaluate = app.add_subcommand("evaluate", "metrics for scored instances");
  evaluate->add_option("--instances", instances_path, "instance file")
      ->required();
  evaluate->add_option("--scores", scores_path, "score file")->required();
  evaluate->add_option("--ratings", ratings_path, "human ratings file");
  evaluate->add_option("--threshold", threshold, "accuracy threshold");

  auto* report = app.add_subcommand("report", "write the evaluation report");
  add_common(report, opts);

  auto* run_cmd = app.add_subcommand("run", "full pipeline");
  add_common(run_cmd, opts);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (ingest->parsed()) return cmd_ingest(opts);
    if (retrieve->parsed()) return cmd_retrieve(opts, query, top);
    if (synthesize->parsed()) return cmd_synthesize(opts, approach);
    if (assemble->parsed()) return cmd_assemble(opts, approach);
    if (testset->parsed()) return cmd_testset(opts, protocol, approach);
    if (score->parsed()) return cmd_score(opts, instances_path, scorer);
    if (evaluate->parsed()) {
      return cmd_evaluate(instances_path, scores_path, ratings_path, threshold);
    }
    if (report->parsed()) return cmd_report(opts);
    if (run_cmd->parsed()) return cmd_run(opts);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << std::endl;
    return 1;
  } catch (const BackendError& e) {
    std::cerr << "backend error (" << BackendError::kind_name(e.kind())
              << "): " << e.what() << std::endl;
    return 3;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << std::endl;
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 2;
  }
  return 0;
}
