#pragma once
// Embedding backends and the similarity kernel.

#include <algorithm>
#include <cmath>
#include <memory>
#include <span>
#include <string>

#include "lightmem/core.hpp"
#include "lightmem/http_client.hpp"
#include "lightmem/text.hpp"

namespace lightmem {

enum class EmbeddingBackend { deterministic_mock, http_endpoint };

struct EmbeddingConfig {
    std::size_t dimension = 384;
    EmbeddingBackend backend = EmbeddingBackend::deterministic_mock;
    std::uint64_t seed = 0x9e3779b97f4a7c15ULL;
    std::string endpoint_url;
    std::string model = "all-MiniLM-L6-v2";
    HttpOptions http;
};

inline double dot(std::span<const float> a, std::span<const float> b) {
    double s0 = 0, s1 = 0, s2 = 0, s3 = 0;
    std::size_t i = 0, n = a.size();
    for (; i + 4 <= n; i += 4) {
        s0 += double(a[i]) * double(b[i]);
        s1 += double(a[i + 1]) * double(b[i + 1]);
        s2 += double(a[i + 2]) * double(b[i + 2]);
        s3 += double(a[i + 3]) * double(b[i + 3]);
    }
    for (; i < n; ++i) s0 += double(a[i]) * double(b[i]);
    return (s0 + s1) + (s2 + s3);
}

inline double l2_norm(std::span<const float> a) { return std::sqrt(dot(a, a)); }

/// dot(a,b) / (|a| |b|). Zero-norm or mismatched inputs are errors, never NaN.
inline double cosine(std::span<const float> a, std::span<const float> b) {
    if (a.size() != b.size()) throw PreconditionError("cosine: length mismatch");
    double na = l2_norm(a), nb = l2_norm(b);
    if (na == 0.0 || nb == 0.0) throw PreconditionError("cosine: zero-norm input");
    double c = dot(a, b) / (na * nb);
    return std::clamp(c, -1.0, 1.0);
}

class Embedder {
public:
    virtual ~Embedder() = default;
    virtual std::size_t dimension() const = 0;
    virtual Embedding embed(std::string_view text) const = 0;
};

/// Feature-hashing embedder: word tokens plus boundary-padded character
/// trigrams, hashed with a seeded FNV-1a into signed buckets and L2-normalized.
/// A pure function of (text, dimension, seed).
class MockEmbedder final : public Embedder {
public:
    explicit MockEmbedder(std::size_t dimension = 384, std::uint64_t seed = EmbeddingConfig{}.seed)
        : dim_(dimension), seed_(text::fnv1a(std::to_string(seed))) {
        if (dim_ == 0) throw PreconditionError("embedding dimension must be positive");
    }

    std::size_t dimension() const override { return dim_; }

    Embedding embed(std::string_view input) const override {
        if (input.empty()) throw PreconditionError("embed: text must be non-empty");
        std::vector<double> acc(dim_, 0.0);
        auto add = [&](std::string_view feature, double w) {
            auto h = text::fnv1a(feature, seed_);
            double sign = (h >> 63) ? -1.0 : 1.0;
            acc[h % dim_] += sign * w;
        };
        for (const auto& tok : text::normalized_tokens(input)) {
            add("w:" + tok, kWordWeight);
            std::string padded = "^" + tok + "$";
            for (std::size_t i = 0; i + 3 <= padded.size(); ++i) add("c:" + padded.substr(i, 3), kGramWeight);
        }
        double norm = 0;
        for (double v : acc) norm += v * v;
        if (norm == 0.0) {
            // punctuation-only text: fall back to raw-byte trigrams
            std::string raw = "^" + std::string(input) + "$";
            for (std::size_t i = 0; i + 3 <= raw.size(); ++i) add("r:" + raw.substr(i, 3), 1.0);
            norm = 0;
            for (double v : acc) norm += v * v;
            if (norm == 0.0) {
                acc[text::fnv1a(input, seed_) % dim_] = 1.0;
                norm = 1.0;
            }
        }
        norm = std::sqrt(norm);
        Embedding out(dim_);
        for (std::size_t i = 0; i < dim_; ++i) out[i] = static_cast<float>(acc[i] / norm);
        return out;
    }

private:
    static constexpr double kWordWeight = 1.0;
    static constexpr double kGramWeight = 0.5;
    std::size_t dim_;
    std::uint64_t seed_;
};

/// Embeddings from an OpenAI-style endpoint: POST {model, input} and read
/// data[0].embedding.
class HttpEmbedder final : public Embedder {
public:
    explicit HttpEmbedder(EmbeddingConfig cfg) : cfg_(std::move(cfg)) {
        if (cfg_.endpoint_url.empty()) throw PreconditionError("http embedder requires endpoint_url");
    }

    std::size_t dimension() const override { return cfg_.dimension; }

    Embedding embed(std::string_view input) const override {
        if (input.empty()) throw PreconditionError("embed: text must be non-empty");
        nlohmann::json body = {{"model", cfg_.model}, {"input", std::string(input)}};
        auto res = post_json(cfg_.endpoint_url, body, cfg_.http);
        const nlohmann::json* vec = nullptr;
        if (res.contains("data") && res["data"].is_array() && !res["data"].empty())
            vec = &res["data"][0]["embedding"];
        else if (res.contains("embedding"))
            vec = &res["embedding"];
        if (!vec || !vec->is_array()) throw GatewayError(200, "embedding response missing vector");
        if (vec->size() != cfg_.dimension)
            throw GatewayError(200, "embedding dimension " + std::to_string(vec->size()) + " != configured " +
                                        std::to_string(cfg_.dimension));
        Embedding out;
        out.reserve(vec->size());
        for (const auto& v : *vec) out.push_back(v.get<float>());
        return out;
    }

private:
    EmbeddingConfig cfg_;
};

inline std::unique_ptr<Embedder> make_embedder(const EmbeddingConfig& cfg) {
    if (cfg.backend == EmbeddingBackend::http_endpoint) return std::make_unique<HttpEmbedder>(cfg);
    return std::make_unique<MockEmbedder>(cfg.dimension, cfg.seed);
}

}  // namespace lightmem
