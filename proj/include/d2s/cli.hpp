#pragma once

// Command-line front end. run_cli() is the whole program; tools/d2s.cpp is a
// thin main() around it so tests can drive the CLI in-process.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <iterator>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "d2s/data_filter.hpp"
#include "d2s/dense_ir.hpp"
#include "d2s/doc_model.hpp"
#include "d2s/embedder.hpp"
#include "d2s/error.hpp"
#include "d2s/eval_harness.hpp"
#include "d2s/figure_select.hpp"
#include "d2s/generation.hpp"
#include "d2s/keyword_tree.hpp"
#include "d2s/service.hpp"

namespace d2s {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot read " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out || !(out << content)) throw Error(ErrorCode::IoError, "cannot write " + path.string());
}

inline std::vector<PaperDoc> load_papers(const std::vector<std::string>& paths) {
  std::vector<PaperDoc> out;
  for (const auto& p : paths) out.push_back(ingest_paper(read_file(p)));
  return out;
}

inline std::vector<Deck> load_decks(const std::vector<std::string>& paths) {
  std::vector<Deck> out;
  for (const auto& p : paths) out.push_back(ingest_deck(read_file(p)));
  return out;
}

inline int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"d2s: slide content from scientific papers"};
  app.require_subcommand(1);

  PipelineConfig config;
  std::int64_t gen_timeout_ms = 30000;
  std::string embedder_path;
  app.add_option("--alpha", config.alpha, "weight of the text score in the mixed ranking")
      ->check(CLI::Range(0.0, 1.0));
  app.add_option("--embed-dim", config.embed_dim, "embedding dimension")->check(CLI::PositiveNumber);
  app.add_option("--seed", config.seed, "seed for hashing, sampling and training");
  app.add_option("--embedder", embedder_path, "trained embedder model (D2SE)")->check(CLI::ExistingFile);
  app.add_option("--gen-timeout-ms", gen_timeout_ms, "timeout for remote services")->check(CLI::PositiveNumber);

  std::string paper_path, deck_path, out_path, index_path, format = "md", generator = "extractive";
  std::string annotations_path, model_path, save_model_path, out_dir, report_dir, host = "0.0.0.0";
  std::vector<std::string> papers, decks, titles;
  std::string title;
  std::size_t k = kDefaultTopK, top = kDefaultFigureCount, min_tokens = kDefaultMinTokens,
              max_tokens = kDefaultMaxTokens, trees = 100;
  bool canonical = false;
  int port = 8080;
  ContrastiveConfig train;
  std::size_t negatives_per_pair = 8;

  auto* ingest = app.add_subcommand("ingest", "validate paper-JSON / deck-JSON");
  ingest->add_option("--paper", paper_path)->check(CLI::ExistingFile);
  ingest->add_option("--deck", deck_path)->check(CLI::ExistingFile);
  ingest->add_flag("--canonical", canonical, "print the cleaned document instead of a summary");

  auto* index = app.add_subcommand("index", "snippetize and embed a paper");
  index->add_option("--paper", paper_path)->required()->check(CLI::ExistingFile);
  index->add_option("--out", out_path, "index file (D2SI)")->required();

  auto* retrieve_cmd = app.add_subcommand("retrieve", "top-k snippets for a title");
  retrieve_cmd->add_option("--paper", paper_path)->required()->check(CLI::ExistingFile);
  retrieve_cmd->add_option("--index", index_path, "prebuilt index (D2SI)")->check(CLI::ExistingFile);
  retrieve_cmd->add_option("--title", title)->required();
  retrieve_cmd->add_option("--k", k)->check(CLI::PositiveNumber);

  auto* generate = app.add_subcommand("generate", "draft slides for one or more titles");
  generate->add_option("--paper", paper_path)->required()->check(CLI::ExistingFile);
  generate->add_option("--title", titles)->required();
  generate->add_option("--k", k)->check(CLI::PositiveNumber);
  generate->add_option("--format", format)->check(CLI::IsMember({"md", "json", "deck"}));
  generate->add_option("--generator", generator)->check(CLI::IsMember({"extractive", "remote"}));
  generate->add_option("--min-tokens", min_tokens);
  generate->add_option("--max-tokens", max_tokens)->check(CLI::PositiveNumber);

  auto* figures = app.add_subcommand("figures", "rank figures and tables for a title");
  figures->add_option("--paper", paper_path)->required()->check(CLI::ExistingFile);
  figures->add_option("--title", title)->required();
  figures->add_option("--top", top)->check(CLI::PositiveNumber);

  auto* filter = app.add_subcommand("filter", "drop underivable slide lines");
  filter->add_option("--paper", papers)->required()->check(CLI::ExistingFile);
  filter->add_option("--deck", decks)->required()->check(CLI::ExistingFile);
  auto* ann_opt = filter->add_option("--annotations", annotations_path, "CSV deck_id,slide_index,line_index,label")
                      ->check(CLI::ExistingFile);
  auto* model_opt = filter->add_option("--model", model_path, "fitted forest (D2SF)")->check(CLI::ExistingFile);
  ann_opt->excludes(model_opt);
  filter->add_option("--save-model", save_model_path);
  filter->add_option("--trees", trees)->check(CLI::PositiveNumber);
  filter->add_option("--out-dir", out_dir);

  auto* train_cmd = app.add_subcommand("train-embedder", "contrastive training on title/content pairs");
  train_cmd->add_option("--deck", decks)->required()->check(CLI::ExistingFile);
  train_cmd->add_option("--paper", papers, "papers whose sentences join the IDF corpus")->check(CLI::ExistingFile);
  train_cmd->add_option("--out", out_path)->required();
  train_cmd->add_option("--epochs", train.epochs)->check(CLI::PositiveNumber);
  train_cmd->add_option("--lr", train.lr)->check(CLI::PositiveNumber);
  train_cmd->add_option("--k-negatives", train.k_negatives)->check(CLI::PositiveNumber);
  train_cmd->add_option("--temperature", train.temperature)->check(CLI::PositiveNumber);

  auto* eval = app.add_subcommand("eval", "retrieval, generation, figure and novelty report");
  eval->add_option("--paper", papers)->required()->check(CLI::ExistingFile);
  eval->add_option("--deck", decks)->required()->check(CLI::ExistingFile);
  eval->add_option("--k", k)->check(CLI::PositiveNumber);
  eval->add_option("--generator", generator)->check(CLI::IsMember({"extractive", "copy"}));
  eval->add_option("--report-dir", report_dir);

  auto* stats = app.add_subcommand("stats", "deck token lengths and novel n-grams");
  stats->add_option("--deck", decks)->required()->check(CLI::ExistingFile);
  stats->add_option("--paper", papers, "paired papers, enables novel n-gram rates")->check(CLI::ExistingFile);

  auto* serve = app.add_subcommand("serve", "run the HTTP API");
  serve->add_option("--port", port)->check(CLI::Range(0, 65535));
  serve->add_option("--host", host);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kExitUsage;
  }

  try {
    config.http.timeout_ms = gen_timeout_ms;
    if (!embedder_path.empty()) config.embedder_path = embedder_path;
    apply_environment(config);
    const auto factory = [&] { return make_embedder_factory(config); };

    if (*ingest) {
      if (paper_path.empty() && deck_path.empty()) {
        err << "error: ingest needs --paper and/or --deck\n";
        return kExitUsage;
      }
      nlohmann::json summary;
      if (!paper_path.empty()) {
        const auto doc = ingest_paper(read_file(paper_path));
        if (canonical) {
          out << to_json(doc).dump(2) << "\n";
        } else {
          summary["paper"] = {{"paper_id", doc.paper_id},
                              {"sections", doc.sections.size()},
                              {"sentences", doc.sentence_count()},
                              {"figures", doc.figures.size()}};
        }
      }
      if (!deck_path.empty()) {
        const auto deck = ingest_deck(read_file(deck_path));
        if (canonical) {
          out << to_json(deck).dump(2) << "\n";
        } else {
          std::size_t lines = 0;
          for (const auto& s : deck.slides) lines += s.content_lines.size();
          summary["deck"] = {{"deck_id", deck.deck_id}, {"slides", deck.slides.size()}, {"lines", lines}};
        }
      }
      if (!canonical) out << summary.dump(2) << "\n";
      return kExitOk;
    }

    if (*index) {
      const auto ctx = prepare_paper(ingest_paper(read_file(paper_path)), factory(), config.alpha);
      ctx.index.save_file(out_path);
      out << nlohmann::json({{"snippets", ctx.index.size()}, {"dim", ctx.index.dim()}, {"alpha", ctx.index.alpha()}})
                 .dump(2)
          << "\n";
      return kExitOk;
    }

    if (*retrieve_cmd) {
      auto ctx = prepare_paper(ingest_paper(read_file(paper_path)), factory(), config.alpha);
      if (!index_path.empty()) ctx.index = SnippetIndex::load_file(index_path);
      const auto cands = retrieve(ctx.index, title, ctx.embedder, k);
      out << to_json(std::span<const ScoredCandidate>(cands), ctx.index).dump(2) << "\n";
      return kExitOk;
    }

    if (*generate) {
      const auto ctx = prepare_paper(ingest_paper(read_file(paper_path)), factory(), config.alpha);
      SlideOptions options;
      options.k = k;
      options.min_tokens = min_tokens;
      options.max_tokens = max_tokens;
      options.generator = parse_generator_kind(generator);
      const auto remote = make_remote_generator(config);
      const RemoteGenerator* remote_ptr = remote ? &*remote : nullptr;
      if (format == "json") {
        if (titles.size() == 1) {
          out << slide_draft_json(ctx, titles.front(), options, remote_ptr) << "\n";
        } else {
          nlohmann::json arr = nlohmann::json::array();
          for (const auto& t : titles) arr.push_back(nlohmann::json::parse(slide_draft_json(ctx, t, options, remote_ptr)));
          out << arr.dump(2) << "\n";
        }
        return kExitOk;
      }
      Deck deck{ctx.doc.paper_id, {}};
      for (const auto& t : titles) {
        const auto draft = build_slide(ctx.doc, ctx.tree, ctx.index, ctx.embedder, t, options, remote_ptr);
        deck.slides.push_back(to_slide_record(draft, deck.deck_id, deck.slides.size()));
      }
      out << (format == "deck" ? to_json(deck).dump(2) + "\n" : to_markdown(deck, &ctx.doc));
      return kExitOk;
    }

    if (*figures) {
      const auto ctx = prepare_paper(ingest_paper(read_file(paper_path)), factory(), config.alpha);
      const auto ranking = rank_figures(ctx.doc, title, match_title(ctx.tree, title), ctx.embedder);
      out << to_json(ranking, ctx.doc, top).dump(2) << "\n";
      return kExitOk;
    }

    if (*filter) {
      const auto docs = load_papers(papers);
      const auto all_decks = load_decks(decks);
      RandomForest forest;
      if (!model_path.empty()) {
        forest = RandomForest::load_file(model_path);
      } else if (!annotations_path.empty()) {
        const auto ann = parse_annotations(read_file(annotations_path));
        const auto samples = annotation_samples(ann, all_decks, docs);
        ForestConfig fc;
        fc.n_trees = trees;
        fc.seed = config.seed;
        forest = RandomForest::fit(samples, fc);
      } else {
        err << "error: filter needs --annotations or --model\n";
        return kExitUsage;
      }
      if (!save_model_path.empty()) forest.save_file(save_model_path);
      const auto result = filter_corpus(all_decks, docs, forest);
      if (!out_dir.empty()) {
        std::filesystem::create_directories(out_dir);
        for (const auto& d : result.decks) {
          write_file(std::filesystem::path(out_dir) / (d.deck_id + ".deck.json"), to_json(d).dump(2) + "\n");
        }
      }
      auto report = to_json(result.report);
      report["oob_accuracy"] = forest.oob_accuracy() ? nlohmann::json(*forest.oob_accuracy()) : nlohmann::json(nullptr);
      out << report.dump(2) << "\n";
      return kExitOk;
    }

    if (*train_cmd) {
      const auto all_decks = load_decks(decks);
      const auto slides = all_slides(all_decks);
      std::vector<std::string> corpus;
      for (const auto& s : slides) {
        corpus.push_back(s.title);
        corpus.push_back(slide_content(s));
      }
      for (const auto& doc : load_papers(papers)) {
        for (const auto& sec : doc.sections) corpus.insert(corpus.end(), sec.sentences.begin(), sec.sentences.end());
      }
      train.seed = config.seed;
      const auto pairs = make_training_pairs(std::span<const SlideRecord>(slides), negatives_per_pair, config.seed);
      const auto initial = HashedTfidfEmbedder::fit(corpus, config.embed_dim, config.seed);
      const auto result = train_contrastive(initial, pairs, train);
      result.embedder.save_file(out_path);
      out << nlohmann::json({{"pairs", pairs.size()}, {"loss_history", result.loss_history}}).dump(2) << "\n";
      return kExitOk;
    }

    if (*eval) {
      std::vector<PaperContext> ctxs;
      for (auto& doc : load_papers(papers)) ctxs.push_back(prepare_paper(std::move(doc), factory(), config.alpha));
      const auto all_decks = load_decks(decks);
      SlideOptions options;
      options.k = k;
      const auto gen = generator == "copy" ? copy_generator() : extractive_generator(options);
      const auto report = run_evaluation(ctxs, all_decks, gen, k, config.alpha);
      const auto text = to_text(report);
      if (!report_dir.empty()) {
        std::filesystem::create_directories(report_dir);
        write_file(std::filesystem::path(report_dir) / "eval.json", to_json(report).dump(2) + "\n");
        write_file(std::filesystem::path(report_dir) / "eval.txt", text);
      }
      out << text;
      return kExitOk;
    }

    if (*stats) {
      const auto all_decks = load_decks(decks);
      const auto slides = all_slides(all_decks);
      const auto s = deck_stats(std::span<const SlideRecord>(slides));
      nlohmann::json j = {{"slides", s.slides}, {"avg_title_len", s.avg_title_len}, {"avg_content_len", s.avg_content_len}};
      if (!papers.empty()) j["novel_ngrams"] = to_json(eval_abstractiveness(all_decks, load_papers(papers)));
      out << j.dump(2) << "\n";
      return kExitOk;
    }

    if (*serve) {
      Service service(config);
      err << "listening on " << host << ":" << port << "\n";
      service.listen(host, port);
      return kExitOk;
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}

}  // namespace d2s
