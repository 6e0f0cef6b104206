// Copyright 2026 The codematch Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <chrono>
#include <csignal>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "codematch/checkpoint.hpp"
#include "codematch/corpus.hpp"
#include "codematch/pipeline.hpp"
#include "codematch/search.hpp"
#include "codematch/train_eval.hpp"

namespace cm = codematch;

namespace {

void setup_logging() {
  auto logger = spdlog::stderr_color_mt("codematch");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("[%H:%M:%S] [%^%l%$] %v");
  spdlog::set_level(spdlog::level::info);
  if (const char* env = std::getenv("CODEMATCH_LOG")) {
    const auto level = spdlog::level::from_str(env);
    if (level != spdlog::level::off || std::string(env) == "off") spdlog::set_level(level);
  }
}

std::vector<cm::pipeline::PreparedSample> prepare_split(const std::string& path, cm::corpus::Split split,
                                                        const std::string& backend, const std::string& trees) {
  const auto samples = cm::corpus::load_split(path, split);
  const auto be = cm::pipeline::make_backend(backend, trees);
  auto prepared = cm::pipeline::prepare(samples, *be);
  const auto fallbacks = std::count_if(prepared.begin(), prepared.end(), [](const auto& s) { return s.ast_fallback; });
  spdlog::info("{}: {} samples ({} {}), {} AST fallbacks", path, prepared.size(), cm::corpus::split_name(split),
               backend, fallbacks);
  return prepared;
}

cm::corpus::Split parse_split(const std::string& s) {
  if (s == "train") return cm::corpus::Split::kTrain;
  if (s == "test") return cm::corpus::Split::kTest;
  throw cm::ValidationError("unknown split '" + s + "' (expected train | test)");
}

struct IngestArgs {
  std::string train, test, out;
};

int run_ingest(const IngestArgs& a) {
  cm::corpus::Corpus c{cm::corpus::load_corpus(a.train, cm::corpus::Split::kTrain),
                       cm::corpus::load_corpus(a.test, cm::corpus::Split::kTest)};
  std::filesystem::create_directories(a.out);
  const auto path = (std::filesystem::path(a.out) / "corpus.cmc").string();
  cm::corpus::save_corpus(c, path);
  spdlog::info("wrote {} ({} train, {} test)", path, c.train.size(), c.test.size());
  return 0;
}

struct TokenizerArgs {
  std::string in, out, channel = "code", backend = "embedded", trees;
  int vocab_size = 4000;
  std::uint64_t seed = 1;
};

int run_tokenizer(const TokenizerArgs& a) {
  const auto prepared = prepare_split(a.in, cm::corpus::Split::kTrain, a.backend, a.trees);
  const auto texts = cm::pipeline::vocab_texts(prepared, a.channel);
  const auto vocab = cm::tok::train_unigram(texts, a.vocab_size, a.seed);
  vocab.save(a.out);
  if (vocab.size() < a.vocab_size) {
    spdlog::warn("corpus offers only {} pieces; vocab is smaller than the requested {}", vocab.size(), a.vocab_size);
  }
  spdlog::info("wrote {} ({} pieces, hash {})", a.out, vocab.size(), cm::hex64(vocab.content_hash()));
  return 0;
}

struct SbtArgs {
  std::string in, out, backend = "embedded", trees, split = "train";
};

int run_sbt(const SbtArgs& a) {
  const auto prepared = prepare_split(a.in, parse_split(a.split), a.backend, a.trees);
  cm::write_file(a.out, cm::pipeline::sbt_to_json(prepared).dump(1) + "\n");
  spdlog::info("wrote {}", a.out);
  return 0;
}

struct TrainArgs {
  std::string config, out, model;
  int epochs = 0;
};

int run_train(const TrainArgs& a) {
  auto cfg = cm::train::load_config(a.config);
  if (!a.model.empty()) cfg.model = cm::match::parse_model_kind(a.model);
  if (a.epochs > 0) cfg.epochs = a.epochs;
  cfg.validate();
  if (cfg.data.corpus.empty() || cfg.data.code_vocab.empty() || cfg.data.text_vocab.empty()) {
    throw cm::ValidationError(a.config + ": [data] needs corpus, code_vocab and text_vocab");
  }
  const auto train_set = prepare_split(cfg.resolve(cfg.data.corpus), cm::corpus::Split::kTrain, cfg.data.ast_backend,
                                       cfg.resolve(cfg.data.trees_train));
  const cm::pipeline::Vocabs vocabs{cm::tok::SubwordVocab::load(cfg.resolve(cfg.data.code_vocab)),
                                    cm::tok::SubwordVocab::load(cfg.resolve(cfg.data.text_vocab))};
  spdlog::info("training {} for {} epochs on {} samples", cm::match::model_name(cfg.model), cfg.epochs, train_set.size());
  const auto t0 = std::chrono::steady_clock::now();
  auto result = cm::train::train(cfg, vocabs, train_set, [&](const cm::train::EpochStats& s) {
    spdlog::info("epoch {}/{} loss={:.6f} active={:.3f}", s.epoch, cfg.epochs, s.mean_loss, s.active_fraction);
  });
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const auto c = cm::train::make_checkpoint(cfg, vocabs, std::move(result.params));
  const auto bytes = cm::ckpt::serialize(c);
  cm::write_file(a.out, bytes);
  spdlog::info("wrote {} (hash {}) after {:.1f}s", a.out, cm::hex64(cm::fnv1a64(bytes)), secs);
  return 0;
}

struct EvalArgs {
  std::string ckpt, test, report, split = "test", backend, trees;
  bool omit_timing = false;
};

int run_eval(const EvalArgs& a) {
  const auto c = cm::ckpt::load(a.ckpt);
  const auto cfg = cm::train::config_from_json(c.config);
  const auto backend = a.backend.empty() ? cfg.data.ast_backend : a.backend;
  const auto test = prepare_split(a.test, parse_split(a.split), backend, a.trees);
  const cm::pipeline::Vocabs vocabs{c.code_vocab, c.text_vocab};
  const auto t0 = std::chrono::steady_clock::now();
  const auto m = cm::train::evaluate(cm::train::model_from_checkpoint(c), c.params, vocabs, test);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const auto report = cm::train::report_json(cm::match::model_name(cfg.model), m, c.config,
                                             a.omit_timing ? std::nullopt : std::optional<double>(secs));
  cm::write_file(a.report, report.dump(2) + "\n");
  spdlog::info("{}: MRR={:.4f} R@1={:.3f} R@5={:.3f} R@10={:.3f} over {} queries", cm::match::model_name(cfg.model),
               m.mrr, m.recall_at.at(1), m.recall_at.at(5), m.recall_at.at(10), m.ranks.size());
  return 0;
}

struct IndexArgs {
  std::string ckpt, corpus, out, split = "test", backend, trees;
};

int run_index(const IndexArgs& a) {
  const auto bytes = cm::read_file(a.ckpt);
  const auto c = cm::ckpt::deserialize(bytes, a.ckpt);
  const auto cfg = cm::train::config_from_json(c.config);
  const auto pool = prepare_split(a.corpus, parse_split(a.split), a.backend.empty() ? cfg.data.ast_backend : a.backend, a.trees);
  const auto idx = cm::search::build_index(c, cm::fnv1a64(bytes), a.ckpt, pool);
  cm::search::save_index(idx, a.out);
  spdlog::info("wrote {} ({} snippets, model {})", a.out, idx.entries.size(), idx.model);
  return 0;
}

struct SearchArgs {
  std::string index, query, ckpt;
  int k = cm::search::kDefaultK;
  bool json = false;
};

int run_search(const SearchArgs& a) {
  const auto engine = cm::search::SearchEngine::open(a.index, a.ckpt);
  const auto results = engine.search(a.query, a.k);
  if (a.json) {
    std::cout << cm::search::results_json(a.query, results).dump() << "\n";
    return 0;
  }
  for (const auto& r : results) {
    std::cout << "#" << r.rank << "  id=" << r.id << "  score=" << r.score << "\n";
    std::cout << "    " << r.code << "\n";
  }
  return 0;
}

struct ServeArgs {
  std::vector<std::string> indexes;
  std::string bind = "127.0.0.1:8080", port_file;
};

httplib::Server* g_server = nullptr;

void on_signal(int) {
  if (g_server) g_server->stop();
}

int run_serve(const ServeArgs& a) {
  std::vector<std::unique_ptr<cm::search::SearchEngine>> owned;
  std::map<std::string, const cm::search::SearchEngine*> engines;
  for (const auto& spec : a.indexes) {
    const auto eq = spec.find('=');
    const std::string path = eq == std::string::npos ? spec : spec.substr(eq + 1);
    const std::string id = eq == std::string::npos ? std::filesystem::path(path).stem().string() : spec.substr(0, eq);
    if (engines.count(id)) throw cm::ValidationError("duplicate model id '" + id + "'");
    owned.push_back(std::make_unique<cm::search::SearchEngine>(cm::search::SearchEngine::open(path)));
    engines[id] = owned.back().get();
    spdlog::info("model '{}' ({}, {} snippets)", id, owned.back()->model(), owned.back()->index().entries.size());
  }
  const auto colon = a.bind.rfind(':');
  if (colon == std::string::npos) throw cm::ValidationError("--bind expects host:port");
  const std::string host = a.bind.substr(0, colon);
  const int port = std::stoi(a.bind.substr(colon + 1));

  httplib::Server srv;
  cm::search::install_routes(srv, engines);
  srv.set_logger([](const httplib::Request& req, const httplib::Response& res) {
    spdlog::debug("{} {} -> {}", req.method, req.path, res.status);
  });
  const int bound = port == 0 ? srv.bind_to_any_port(host) : (srv.bind_to_port(host, port) ? port : -1);
  if (bound < 0) throw cm::Error("cannot bind " + a.bind);
  if (!a.port_file.empty()) cm::write_file(a.port_file, std::to_string(bound) + "\n");
  g_server = &srv;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  spdlog::info("listening on {}:{}", host, bound);
  srv.listen_after_bind();
  g_server = nullptr;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  setup_logging();
  CLI::App app{"codematch: neural code search over code/description pairs"};
  app.require_subcommand(1);

  IngestArgs ingest;
  auto* c_ingest = app.add_subcommand("ingest", "Normalize CoNaLa-format JSON into a CMC1 corpus");
  c_ingest->add_option("--train", ingest.train, "Training JSON array")->required();
  c_ingest->add_option("--test", ingest.test, "Test JSON array")->required();
  c_ingest->add_option("--out", ingest.out, "Output directory")->required();

  TokenizerArgs tk;
  auto* c_tok = app.add_subcommand("tokenizer-train", "Train a unigram subword vocabulary");
  c_tok->add_option("--in", tk.in, "Corpus (CMC1 or JSON); its training split is used")->required();
  c_tok->add_option("--vocab-size", tk.vocab_size, "Entries including specials")->required();
  c_tok->add_option("--out", tk.out, "Output vocab file")->required();
  c_tok->add_option("--channel", tk.channel, "code (code + SBT) | text")->capture_default_str();
  c_tok->add_option("--backend", tk.backend, "AST backend: embedded | file")->capture_default_str();
  c_tok->add_option("--trees", tk.trees, "Pre-parsed tree file for --backend file");
  c_tok->add_option("--seed", tk.seed, "Tie-break seed")->capture_default_str();

  SbtArgs sbt;
  auto* c_sbt = app.add_subcommand("sbt", "Write SBT strings of one split as JSON");
  c_sbt->add_option("--in", sbt.in, "Corpus (CMC1 or JSON)")->required();
  c_sbt->add_option("--out", sbt.out, "Output JSON")->required();
  c_sbt->add_option("--backend", sbt.backend, "embedded | file")->capture_default_str();
  c_sbt->add_option("--trees", sbt.trees, "Pre-parsed tree file for --backend file");
  c_sbt->add_option("--split", sbt.split, "train | test")->capture_default_str();

  TrainArgs tr;
  auto* c_train = app.add_subcommand("train", "Train a model from a TOML config");
  c_train->add_option("--config", tr.config, "TOML config")->required();
  c_train->add_option("--out", tr.out, "Output checkpoint")->required();
  c_train->add_option("--model", tr.model, "Override: ct | cat | mp | mp-cat");
  c_train->add_option("--epochs", tr.epochs, "Override the epoch count");

  EvalArgs ev;
  auto* c_eval = app.add_subcommand("eval", "Rank every test snippet for every test description");
  c_eval->add_option("--ckpt", ev.ckpt, "Checkpoint")->required();
  c_eval->add_option("--test", ev.test, "Corpus (CMC1 or JSON)")->required();
  c_eval->add_option("--report", ev.report, "Output report JSON")->required();
  c_eval->add_option("--split", ev.split, "Split of a CMC1 corpus")->capture_default_str();
  c_eval->add_option("--backend", ev.backend, "AST backend (default: the training backend)");
  c_eval->add_option("--trees", ev.trees, "Pre-parsed tree file for --backend file");
  c_eval->add_flag("--omit-timing", ev.omit_timing, "Write runtime_seconds as null");

  IndexArgs ix;
  auto* c_index = app.add_subcommand("index", "Build a snippet index");
  c_index->add_option("--ckpt", ix.ckpt, "Checkpoint")->required();
  c_index->add_option("--corpus", ix.corpus, "Corpus (CMC1 or JSON)")->required();
  c_index->add_option("--out", ix.out, "Output index")->required();
  c_index->add_option("--split", ix.split, "Split of a CMC1 corpus")->capture_default_str();
  c_index->add_option("--backend", ix.backend, "AST backend (default: the training backend)");
  c_index->add_option("--trees", ix.trees, "Pre-parsed tree file for --backend file");

  SearchArgs se;
  auto* c_search = app.add_subcommand("search", "Query an index");
  c_search->add_option("--index", se.index, "Snippet index")->required();
  c_search->add_option("-q,--query", se.query, "Natural-language query")->required();
  c_search->add_option("-k", se.k, "Number of results")->capture_default_str();
  c_search->add_option("--ckpt", se.ckpt, "Checkpoint (default: the path recorded in the index)");
  c_search->add_flag("--json", se.json, "Print the HTTP API's JSON");

  ServeArgs sv;
  auto* c_serve = app.add_subcommand("serve", "Serve the HTTP search API");
  c_serve->add_option("--index", sv.indexes, "Index, optionally as id=path (repeatable)")->required();
  c_serve->add_option("--bind", sv.bind, "host:port (port 0 picks a free one)")->capture_default_str();
  c_serve->add_option("--port-file", sv.port_file, "Write the bound port here");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*c_ingest) return run_ingest(ingest);
    if (*c_tok) return run_tokenizer(tk);
    if (*c_sbt) return run_sbt(sbt);
    if (*c_train) return run_train(tr);
    if (*c_eval) return run_eval(ev);
    if (*c_index) return run_index(ix);
    if (*c_search) return run_search(se);
    if (*c_serve) return run_serve(sv);
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 1;
  }
  return 0;
}
