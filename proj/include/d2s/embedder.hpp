#pragma once

// Dense text embeddings: a seeded hashed TF-IDF embedder with a learned
// linear projection, its contrastive trainer, and a remote-service client.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <functional>
#include <istream>
#include <map>
#include <memory>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include <json.hpp>

#include "d2s/binary_io.hpp"
#include "d2s/doc_model.hpp"
#include "d2s/error.hpp"
#include "d2s/http_client.hpp"
#include "d2s/random.hpp"
#include "d2s/textkit.hpp"

namespace d2s {

inline constexpr std::size_t kDefaultEmbedDim = 128;

using EmbeddingVector = std::vector<double>;

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  const std::size_t n = std::min(a.size(), b.size());
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

inline double l2_norm(std::span<const double> v) { return std::sqrt(dot(v, v)); }

template <typename E>
concept TextEmbedder = requires(const E& e, std::string_view text) {
  { e.dim() } -> std::convertible_to<std::size_t>;
  { e.embed(text) } -> std::convertible_to<EmbeddingVector>;
};

/// Bucket of `token` among `dim` slots for a given seed.
inline std::size_t hash_bucket(std::string_view token, std::uint64_t seed, std::size_t dim) {
  std::uint64_t h = 0xCBF29CE484222325ULL;  // FNV-1a
  for (char c : token) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001B3ULL;
  }
  return static_cast<std::size_t>(mix64(h ^ mix64(seed)) % dim);
}

class HashedTfidfEmbedder {
 public:
  static constexpr std::uint16_t kFileVersion = 1;

  HashedTfidfEmbedder() = default;

  /// Identity projection over the given IDF table.
  HashedTfidfEmbedder(std::size_t dim, std::uint64_t seed, IdfTable idf)
      : dim_(dim), seed_(seed), idf_(std::move(idf)), projection_(dim * dim, 0.0) {
    if (dim == 0) throw Error(ErrorCode::DegenerateConfig, "embedding dimension must be positive");
    for (std::size_t i = 0; i < dim; ++i) projection_[i * dim + i] = 1.0;
  }

  /// IDF table from `corpus` (one document per text), identity projection.
  static HashedTfidfEmbedder fit(std::span<const std::string> corpus, std::size_t dim,
                                 std::uint64_t seed) {
    std::vector<TokenSeq> docs;
    docs.reserve(corpus.size());
    for (const auto& t : corpus) docs.push_back(tokenize(t));
    return HashedTfidfEmbedder(dim, seed, IdfTable(docs));
  }

  std::size_t dim() const { return dim_; }
  std::uint64_t seed() const { return seed_; }
  const IdfTable& idf() const { return idf_; }
  const std::vector<double>& projection() const { return projection_; }

  void set_projection(std::vector<double> projection) {
    if (projection.size() != dim_ * dim_) {
      throw Error(ErrorCode::DimensionMismatch, "projection must be dim x dim");
    }
    for (double v : projection) {
      if (!std::isfinite(v)) throw Error(ErrorCode::DegenerateConfig, "non-finite projection entry");
    }
    projection_ = std::move(projection);
  }

  /// IDF-weighted token counts, bucketed by the seeded hash.
  std::vector<double> base_vector(std::string_view text) const {
    std::vector<double> b(dim_, 0.0);
    for (const auto& tok : tokenize(text)) b[hash_bucket(tok, seed_, dim_)] += idf_(tok);
    return b;
  }

  std::vector<double> project(std::span<const double> base) const {
    std::vector<double> u(dim_, 0.0);
    for (std::size_t i = 0; i < dim_; ++i) {
      const double* row = projection_.data() + i * dim_;
      double s = 0.0;
      for (std::size_t j = 0; j < dim_; ++j) s += row[j] * base[j];
      u[i] = s;
    }
    return u;
  }

  /// Unit-norm projection of the base vector; empty or all-zero input gives
  /// the zero vector.
  EmbeddingVector embed(std::string_view text) const {
    auto u = project(base_vector(text));
    const double n = l2_norm(u);
    if (n > 0.0) {
      for (auto& x : u) x /= n;
    }
    return u;
  }

  void save(std::ostream& out) const {
    binary::put_magic(out, "D2SE", kFileVersion);
    binary::put<std::uint32_t>(out, static_cast<std::uint32_t>(dim_));
    binary::put<std::uint64_t>(out, seed_);
    for (double v : projection_) binary::put<double>(out, v);
    binary::put<std::uint64_t>(out, idf_.documents());
    binary::put<std::uint32_t>(out, static_cast<std::uint32_t>(idf_.weights().size()));
    for (const auto& [token, weight] : idf_.weights()) {
      binary::put_string(out, token);
      binary::put<double>(out, weight);
    }
  }

  static HashedTfidfEmbedder load(std::istream& in) {
    const auto version = binary::expect_magic(in, "D2SE");
    if (version != kFileVersion) {
      throw Error(ErrorCode::SchemaError, "unsupported embedder version " + std::to_string(version));
    }
    const auto dim = binary::get<std::uint32_t>(in);
    const auto seed = binary::get<std::uint64_t>(in);
    std::vector<double> projection(std::size_t(dim) * dim);
    for (auto& v : projection) v = binary::get<double>(in);
    const auto docs = binary::get<std::uint64_t>(in);
    const auto entries = binary::get<std::uint32_t>(in);
    std::map<std::string, double, std::less<>> weights;
    for (std::uint32_t i = 0; i < entries; ++i) {
      auto token = binary::get_string(in);
      weights.emplace(std::move(token), binary::get<double>(in));
    }
    HashedTfidfEmbedder e(dim, seed, IdfTable(docs, std::move(weights)));
    e.set_projection(std::move(projection));
    return e;
  }

  void save_file(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + path);
    save(out);
  }

  static HashedTfidfEmbedder load_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoError, "cannot read " + path);
    return load(in);
  }

  bool operator==(const HashedTfidfEmbedder&) const = default;

 private:
  std::size_t dim_ = 0;
  std::uint64_t seed_ = 0;
  IdfTable idf_;
  std::vector<double> projection_;
};

// ---------------------------------------------------------------------------
// Contrastive training

struct TrainingPair {
  std::string title;
  std::string positive_content;
  std::vector<std::string> negatives;
};

struct ContrastiveConfig {
  double lr = 2.0;
  int epochs = 30;
  std::size_t k_negatives = 4;
  std::uint64_t seed = 0;
  double temperature = 1.0;
};

/// Mean over pairs of -log softmax of the positive logit, where logits are
/// inner products of normalized embeddings divided by the temperature. The
/// base vectors do not depend on the projection, so they are computed once.
class ContrastiveObjective {
 public:
  ContrastiveObjective(const HashedTfidfEmbedder& embedder, std::span<const TrainingPair> pairs,
                       double temperature = 1.0)
      : dim_(embedder.dim()), temperature_(temperature) {
    std::unordered_map<std::string, std::size_t> ids;
    auto intern = [&](const std::string& text) {
      auto [it, inserted] = ids.emplace(text, bases_.size());
      if (inserted) bases_.push_back(embedder.base_vector(text));
      return it->second;
    };
    for (const auto& p : pairs) {
      Item item{intern(p.title), {intern(p.positive_content)}};
      for (const auto& n : p.negatives) item.candidates.push_back(intern(n));
      items_.push_back(std::move(item));
    }
  }

  std::size_t size() const { return items_.size(); }

  double loss(std::span<const double> projection) const { return evaluate(projection, nullptr); }

  /// Loss, with d(loss)/d(projection) written into `grad` (row-major).
  double loss_and_gradient(std::span<const double> projection, std::vector<double>& grad) const {
    grad.assign(dim_ * dim_, 0.0);
    return evaluate(projection, &grad);
  }

 private:
  struct Item {
    std::size_t title;
    std::vector<std::size_t> candidates;  // positive first
  };

  struct Projected {
    std::vector<double> unit;
    double norm = 0.0;
  };

  Projected project(std::span<const double> projection, std::size_t text) const {
    const auto& b = bases_[text];
    Projected p{std::vector<double>(dim_, 0.0), 0.0};
    for (std::size_t i = 0; i < dim_; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < dim_; ++j) s += projection[i * dim_ + j] * b[j];
      p.unit[i] = s;
    }
    p.norm = l2_norm(p.unit);
    if (p.norm > 0.0) {
      for (auto& x : p.unit) x /= p.norm;
    }
    return p;
  }

  // Backpropagates d(loss)/d(unit) through normalization and the projection.
  void accumulate(const Projected& p, std::span<const double> d_unit, std::size_t text,
                  std::vector<double>& grad) const {
    if (p.norm <= 0.0) return;
    const double along = dot(p.unit, d_unit);
    const auto& b = bases_[text];
    for (std::size_t i = 0; i < dim_; ++i) {
      const double du = (d_unit[i] - p.unit[i] * along) / p.norm;
      if (du == 0.0) continue;
      double* row = grad.data() + i * dim_;
      for (std::size_t j = 0; j < dim_; ++j) row[j] += du * b[j];
    }
  }

  // Each distinct text is projected once; d(loss)/d(unit) is summed per text
  // and pushed through normalization and the projection once at the end.
  double evaluate(std::span<const double> projection, std::vector<double>* grad) const {
    if (items_.empty()) return 0.0;
    const double scale = 1.0 / double(items_.size());
    std::vector<Projected> proj;
    proj.reserve(bases_.size());
    for (std::size_t t = 0; t < bases_.size(); ++t) proj.push_back(project(projection, t));
    std::vector<std::vector<double>> d_unit;
    if (grad) d_unit.assign(bases_.size(), std::vector<double>(dim_, 0.0));

    double total = 0.0;
    std::vector<double> logits;
    for (const auto& item : items_) {
      const auto& title = proj[item.title];
      logits.clear();
      for (auto c : item.candidates) logits.push_back(dot(title.unit, proj[c].unit) / temperature_);
      const double mx = *std::max_element(logits.begin(), logits.end());
      double z = 0.0;
      for (double l : logits) z += std::exp(l - mx);
      total += (mx + std::log(z)) - logits[0];
      if (!grad) continue;
      for (std::size_t j = 0; j < item.candidates.size(); ++j) {
        const double g = ((std::exp(logits[j] - mx) / z) - (j == 0 ? 1.0 : 0.0)) / temperature_ * scale;
        const auto& cand = proj[item.candidates[j]];
        auto& dt = d_unit[item.title];
        auto& dc = d_unit[item.candidates[j]];
        for (std::size_t i = 0; i < dim_; ++i) {
          dt[i] += g * cand.unit[i];
          dc[i] += g * title.unit[i];
        }
      }
    }
    if (grad) {
      for (std::size_t t = 0; t < bases_.size(); ++t) accumulate(proj[t], d_unit[t], t, *grad);
    }
    return total * scale;
  }

  std::size_t dim_;
  double temperature_;
  std::vector<std::vector<double>> bases_;
  std::vector<Item> items_;
};

struct TrainResult {
  HashedTfidfEmbedder embedder;
  std::vector<double> loss_history;  // loss before each epoch's update
};

/// Keeps at most k negatives per pair, chosen by a seeded shuffle.
inline std::vector<TrainingPair> sample_negatives(std::span<const TrainingPair> pairs, std::size_t k,
                                                  std::uint64_t seed) {
  Rng rng(mix64(seed ^ 0x6E6567ULL));
  std::vector<TrainingPair> out(pairs.begin(), pairs.end());
  for (auto& p : out) {
    if (p.negatives.size() > k) {
      shuffle(std::span(p.negatives), rng);
      p.negatives.resize(k);
    }
  }
  return out;
}

/// Full-batch gradient descent on the projection. Negatives are fixed per
/// pair before the first epoch, so the objective is stationary.
inline TrainResult train_contrastive(const HashedTfidfEmbedder& initial,
                                     std::span<const TrainingPair> pairs,
                                     const ContrastiveConfig& config) {
  if (config.lr <= 0.0 || config.epochs < 1 || config.k_negatives < 1 || config.temperature <= 0.0) {
    throw Error(ErrorCode::DegenerateConfig, "need lr > 0, epochs >= 1, k_negatives >= 1, temperature > 0");
  }
  if (pairs.empty()) throw Error(ErrorCode::EmptyTraining, "no training pairs");
  for (const auto& p : pairs) {
    if (p.negatives.empty()) {
      throw Error(ErrorCode::DegenerateConfig, "training pair '" + p.title + "' has no negatives");
    }
  }
  const auto chosen = sample_negatives(pairs, config.k_negatives, config.seed);
  const ContrastiveObjective objective(initial, chosen, config.temperature);

  TrainResult result{initial, {}};
  std::vector<double> projection = initial.projection();
  std::vector<double> grad;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    result.loss_history.push_back(objective.loss_and_gradient(projection, grad));
    for (std::size_t i = 0; i < projection.size(); ++i) projection[i] -= config.lr * grad[i];
  }
  result.embedder.set_projection(std::move(projection));
  return result;
}

/// One pair per slide with content; negatives are the contents of slides
/// whose titles differ (case-insensitively) from this slide's title.
inline std::vector<TrainingPair> make_training_pairs(std::span<const SlideRecord> slides,
                                                     std::size_t max_negatives, std::uint64_t seed) {
  const auto content = [](const SlideRecord& s) { return slide_content(s); };
  auto lower = [](std::string s) {
    for (auto& c : s) c = detail::ascii_lower(c);
    return s;
  };
  Rng rng(mix64(seed ^ 0x70616972ULL));
  std::vector<TrainingPair> out;
  for (std::size_t i = 0; i < slides.size(); ++i) {
    const auto body = content(slides[i]);
    if (body.empty() || slides[i].title.empty()) continue;
    std::vector<std::size_t> pool;
    for (std::size_t j = 0; j < slides.size(); ++j) {
      if (j != i && lower(slides[j].title) != lower(slides[i].title) && !content(slides[j]).empty()) {
        pool.push_back(j);
      }
    }
    if (pool.empty()) continue;
    shuffle(std::span(pool), rng);
    if (pool.size() > max_negatives) pool.resize(max_negatives);
    TrainingPair pair{slides[i].title, body, {}};
    for (auto j : pool) pair.negatives.push_back(content(slides[j]));
    out.push_back(std::move(pair));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Remote embedding service: POST /embed {"texts": [...]} -> {"vectors": [[...]]}

class RemoteEmbedder {
 public:
  RemoteEmbedder(std::string url, std::size_t dim, HttpOptions options = {})
      : client_(std::make_shared<JsonPostClient>(std::move(url), options)), dim_(dim) {}

  std::size_t dim() const { return dim_; }

  std::vector<EmbeddingVector> embed_batch(std::span<const std::string> texts) const {
    nlohmann::json request = {{"texts", nlohmann::json::array()}};
    for (const auto& t : texts) request["texts"].push_back(t);
    const auto response = client_->post("/embed", request);
    if (!response.is_object() || !response.contains("vectors") || !response["vectors"].is_array()) {
      throw Error(ErrorCode::SchemaError, "embedding response lacks 'vectors'");
    }
    const auto& vectors = response["vectors"];
    if (vectors.size() != texts.size()) {
      throw Error(ErrorCode::DimensionMismatch, "expected " + std::to_string(texts.size()) +
                                                    " vectors, got " + std::to_string(vectors.size()));
    }
    std::vector<EmbeddingVector> out;
    out.reserve(vectors.size());
    for (const auto& v : vectors) {
      if (!v.is_array() || v.size() != dim_) {
        throw Error(ErrorCode::DimensionMismatch,
                    "expected dimension " + std::to_string(dim_) + ", got " + std::to_string(v.size()));
      }
      EmbeddingVector vec;
      vec.reserve(dim_);
      for (const auto& x : v) {
        if (!x.is_number() || !std::isfinite(x.get<double>())) {
          throw Error(ErrorCode::SchemaError, "non-finite embedding value");
        }
        vec.push_back(x.get<double>());
      }
      out.push_back(std::move(vec));
    }
    return out;
  }

  EmbeddingVector embed(std::string_view text) const {
    const std::string t(text);
    return embed_batch(std::span(&t, 1)).front();
  }

 private:
  std::shared_ptr<const JsonPostClient> client_;
  std::size_t dim_;
};

inline std::vector<EmbeddingVector> remote_embed(const RemoteEmbedder& client,
                                                 std::span<const std::string> texts) {
  return client.embed_batch(texts);
}

/// Type-erased embedder for runtime selection between local and remote.
class AnyEmbedder {
 public:
  template <TextEmbedder E>
  explicit AnyEmbedder(E embedder)
      : dim_(embedder.dim()),
        embed_([e = std::make_shared<const E>(std::move(embedder))](std::string_view t) {
          return EmbeddingVector(e->embed(t));
        }) {}

  std::size_t dim() const { return dim_; }
  EmbeddingVector embed(std::string_view text) const { return embed_(text); }

 private:
  std::size_t dim_;
  std::function<EmbeddingVector(std::string_view)> embed_;
};

}  // namespace d2s
