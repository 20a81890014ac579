#pragma once

// HTTP JSON API over the slide pipeline. Papers live in memory keyed by
// paper_id; each paper's index is built once, on first use.

#include <cstddef>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <utility>

#include <json.hpp>

#include "d2s/doc_model.hpp"
#include "d2s/embedder.hpp"
#include "d2s/error.hpp"
#include "d2s/eval_harness.hpp"
#include "d2s/figure_select.hpp"
#include "d2s/generation.hpp"
#include "d2s/http_client.hpp"
#include "d2s/keyword_tree.hpp"

namespace d2s {

struct PipelineConfig {
  double alpha = kDefaultAlpha;
  std::size_t embed_dim = kDefaultEmbedDim;
  std::uint64_t seed = 0;
  std::optional<std::string> embedder_path;  // trained D2SE model
  std::optional<std::string> embed_url;      // remote embedding service
  std::optional<std::string> gen_url;        // remote generator service
  HttpOptions http;
};

/// Reads D2S_EMBED_URL / D2S_GEN_URL into `config` unless already set.
inline void apply_environment(PipelineConfig& config) {
  if (const char* v = std::getenv("D2S_EMBED_URL"); v && *v && !config.embed_url) config.embed_url = v;
  if (const char* v = std::getenv("D2S_GEN_URL"); v && *v && !config.gen_url) config.gen_url = v;
}

inline EmbedderFactory make_embedder_factory(const PipelineConfig& config) {
  if (config.embed_url) {
    RemoteEmbedder remote(*config.embed_url, config.embed_dim, config.http);
    return [remote](std::span<const Snippet>) { return AnyEmbedder(remote); };
  }
  if (config.embedder_path) {
    auto model = HashedTfidfEmbedder::load_file(*config.embedder_path);
    return [model](std::span<const Snippet>) { return AnyEmbedder(model); };
  }
  return local_embedder_factory(config.embed_dim, config.seed);
}

inline std::optional<RemoteGenerator> make_remote_generator(const PipelineConfig& config) {
  if (!config.gen_url) return std::nullopt;
  return RemoteGenerator(*config.gen_url, config.http);
}

/// SlideDraft JSON for one title; the CLI and the API both render through here.
inline std::string slide_draft_json(const PaperContext& paper, std::string_view title, const SlideOptions& options,
                                    const RemoteGenerator* remote) {
  const auto draft = build_slide(paper.doc, paper.tree, paper.index, paper.embedder, title, options, remote);
  return to_json(draft, paper.index, paper.doc).dump(2);
}

inline int http_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::ServiceUnavailable: return 502;
    case ErrorCode::Timeout: return 504;
    case ErrorCode::ConfigError:
    case ErrorCode::IoError: return 500;
    default: return 400;
  }
}

class PaperStore {
 public:
  PaperStore(EmbedderFactory factory, double alpha) : factory_(std::move(factory)), alpha_(alpha) {}

  /// Adds or replaces a paper; a replaced paper's index is rebuilt lazily.
  void put(PaperDoc doc) {
    auto entry = std::make_shared<Entry>();
    const auto id = doc.paper_id;
    entry->doc = std::move(doc);
    std::lock_guard lock(mu_);
    entries_[id] = std::move(entry);
  }

  bool contains(const std::string& id) const {
    std::lock_guard lock(mu_);
    return entries_.contains(id);
  }

  /// Prepared paper, built at most once per stored version.
  std::shared_ptr<const PaperContext> get(const std::string& id) const {
    std::shared_ptr<Entry> entry;
    {
      std::lock_guard lock(mu_);
      auto it = entries_.find(id);
      if (it == entries_.end()) return nullptr;
      entry = it->second;
    }
    std::call_once(entry->once, [&] {
      try {
        entry->context = std::make_shared<const PaperContext>(prepare_paper(entry->doc, factory_, alpha_));
      } catch (...) {
        entry->failure = std::current_exception();
      }
    });
    if (entry->failure) std::rethrow_exception(entry->failure);
    return entry->context;
  }

  std::size_t builds_started() const {
    std::lock_guard lock(mu_);
    std::size_t n = 0;
    for (const auto& [id, e] : entries_) n += (e->context || e->failure) ? 1 : 0;
    return n;
  }

 private:
  struct Entry {
    PaperDoc doc;
    std::once_flag once;
    std::shared_ptr<const PaperContext> context;
    std::exception_ptr failure;
  };

  EmbedderFactory factory_;
  double alpha_;
  mutable std::mutex mu_;
  std::map<std::string, std::shared_ptr<Entry>> entries_;
};

class Service {
 public:
  explicit Service(PipelineConfig config)
      : config_(std::move(config)),
        store_(make_embedder_factory(config_), config_.alpha),
        remote_(make_remote_generator(config_)) {
    routes();
  }

  PaperStore& store() { return store_; }
  httplib::Server& server() { return server_; }

  /// Binds and serves until stop(); throws BindError if the port is taken.
  void listen(const std::string& host, int port) {
    if (!server_.bind_to_port(host, port)) {
      throw Error(ErrorCode::BindError, "cannot bind " + host + ":" + std::to_string(port));
    }
    server_.listen_after_bind();
  }

  /// Binds an ephemeral port and returns it; call run() afterwards.
  int bind_any(const std::string& host = "127.0.0.1") {
    const int port = server_.bind_to_any_port(host);
    if (port < 0) throw Error(ErrorCode::BindError, "cannot bind an ephemeral port");
    return port;
  }

  void run() { server_.listen_after_bind(); }
  void stop() { server_.stop(); }
  void wait_until_ready() const { server_.wait_until_ready(); }

 private:
  using Req = httplib::Request;
  using Res = httplib::Response;

  static void send_json(Res& res, int status, const nlohmann::json& body) {
    res.status = status;
    res.set_content(body.dump(2), "application/json");
  }

  static void send_error(Res& res, int status, std::string_view code, std::string_view message) {
    send_json(res, status, {{"error", code}, {"message", message}});
  }

  template <typename Fn>
  static void guarded(Res& res, Fn&& fn) {
    try {
      fn();
    } catch (const Error& e) {
      send_error(res, http_status(e.code()), to_string(e.code()), e.what());
    } catch (const nlohmann::json::exception& e) {
      send_error(res, 400, "SchemaError", e.what());
    } catch (const std::exception& e) {
      send_error(res, 500, "InternalError", e.what());
    }
  }

  std::shared_ptr<const PaperContext> paper_or_404(const Req& req, Res& res) {
    const auto id = req.path_params.at("id");
    auto ctx = store_.get(id);
    if (!ctx) send_error(res, 404, "NotFound", "no paper with id '" + id + "'");
    return ctx;
  }

  void routes() {
    server_.Get("/health", [](const Req&, Res& res) { send_json(res, 200, {{"status", "ok"}}); });

    server_.Post("/papers", [this](const Req& req, Res& res) {
      guarded(res, [&] {
        auto doc = ingest_paper(req.body);
        const auto id = doc.paper_id;
        store_.put(std::move(doc));
        send_json(res, 201, {{"paper_id", id}});
      });
    });

    server_.Get("/papers/:id/outline", [this](const Req& req, Res& res) {
      guarded(res, [&] {
        if (auto p = paper_or_404(req, res)) send_json(res, 200, to_json(p->tree));
      });
    });

    server_.Post("/papers/:id/slides", [this](const Req& req, Res& res) {
      guarded(res, [&] {
        auto p = paper_or_404(req, res);
        if (!p) return;
        const auto body = nlohmann::json::parse(req.body);
        if (!body.is_object() || !body.contains("title") || !body["title"].is_string()) {
          throw Error(ErrorCode::SchemaError, "body needs a string 'title'");
        }
        SlideOptions options;
        if (body.contains("k")) {
          const auto k = body["k"].get<long long>();
          if (k < 1) throw Error(ErrorCode::InvalidK, "k must be >= 1");
          options.k = static_cast<std::size_t>(k);
        }
        if (body.contains("generator")) options.generator = parse_generator_kind(body["generator"].get<std::string>());
        const auto title = body["title"].get<std::string>();
        res.status = 200;
        res.set_content(slide_draft_json(*p, title, options, remote_ ? &*remote_ : nullptr), "application/json");
      });
    });

    server_.Get("/papers/:id/figures", [this](const Req& req, Res& res) {
      guarded(res, [&] {
        auto p = paper_or_404(req, res);
        if (!p) return;
        const auto title = req.get_param_value("title");
        if (blank(title)) throw Error(ErrorCode::EmptyTitle, "query parameter 'title' is required");
        const auto ranking = rank_figures(p->doc, title, match_title(p->tree, title), p->embedder);
        send_json(res, 200, to_json(ranking, p->doc));
      });
    });

    server_.Post("/decks/export", [this](const Req& req, Res& res) {
      guarded(res, [&] {
        const auto deck = ingest_deck(req.body);
        const auto accept = req.get_header_value("Accept");
        if (accept.find("text/markdown") != std::string::npos) {
          std::shared_ptr<const PaperContext> paper;
          if (store_.contains(deck.deck_id)) paper = store_.get(deck.deck_id);
          res.status = 200;
          res.set_content(to_markdown(deck, paper ? &paper->doc : nullptr), "text/markdown");
        } else {
          send_json(res, 200, to_json(deck));
        }
      });
    });
  }

  PipelineConfig config_;
  PaperStore store_;
  std::optional<RemoteGenerator> remote_;
  httplib::Server server_;
};

}  // namespace d2s
