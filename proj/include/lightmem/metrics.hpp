#pragma once
// Answer-quality metrics, latency percentiles and paired bootstrap.

#include <cmath>
#include <map>
#include <random>

#include "lightmem/embedding.hpp"
#include "lightmem/text.hpp"

namespace lightmem {

struct MetricSet {
    double f1 = 0;
    double bleu1 = 0;
    double rouge_l = 0;
    double embed_sim = 0;
};

inline std::vector<std::string> metric_tokens(std::string_view s) { return text::normalized_tokens(s); }

inline std::size_t multiset_overlap(const std::vector<std::string>& a, const std::vector<std::string>& b) {
    std::map<std::string, std::size_t> counts;
    for (const auto& t : b) ++counts[t];
    std::size_t hit = 0;
    for (const auto& t : a) {
        auto it = counts.find(t);
        if (it != counts.end() && it->second > 0) {
            --it->second;
            ++hit;
        }
    }
    return hit;
}

inline double token_f1(std::string_view pred, std::string_view ref) {
    auto p = metric_tokens(pred), r = metric_tokens(ref);
    if (p.empty() || r.empty()) return 0.0;
    auto hit = multiset_overlap(p, r);
    if (hit == 0) return 0.0;
    double prec = double(hit) / double(p.size()), rec = double(hit) / double(r.size());
    return 2 * prec * rec / (prec + rec);
}

/// Clipped unigram precision times the brevity penalty exp(min(0, 1 - r/c)).
inline double bleu1(std::string_view pred, std::string_view ref) {
    auto p = metric_tokens(pred), r = metric_tokens(ref);
    if (p.empty() || r.empty()) return 0.0;
    double prec = double(multiset_overlap(p, r)) / double(p.size());
    double bp = std::exp(std::min(0.0, 1.0 - double(r.size()) / double(p.size())));
    return prec * bp;
}

inline std::size_t lcs_length(const std::vector<std::string>& a, const std::vector<std::string>& b) {
    std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
    for (std::size_t i = 1; i <= a.size(); ++i) {
        for (std::size_t j = 1; j <= b.size(); ++j)
            cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

inline double rouge_l(std::string_view pred, std::string_view ref) {
    auto p = metric_tokens(pred), r = metric_tokens(ref);
    if (p.empty() || r.empty()) return 0.0;
    auto l = lcs_length(p, r);
    if (l == 0) return 0.0;
    double prec = double(l) / double(p.size()), rec = double(l) / double(r.size());
    return 2 * prec * rec / (prec + rec);
}

inline MetricSet score_answer(std::string_view pred, std::string_view ref, const Embedder* embedder = nullptr) {
    MetricSet m;
    m.f1 = token_f1(pred, ref);
    m.bleu1 = bleu1(pred, ref);
    m.rouge_l = rouge_l(pred, ref);
    if (embedder && !text::normalize_space(pred).empty() && !text::normalize_space(ref).empty())
        m.embed_sim = cosine(embedder->embed(pred), embedder->embed(ref));
    return m;
}

struct Percentiles {
    double p50 = 0;
    double p95 = 0;
};

/// Nearest rank: the value at 1-based position ceil(q*n) of the sorted sample.
inline double nearest_rank(std::vector<double> sorted_or_not, unsigned percent) {
    if (sorted_or_not.empty()) throw PreconditionError("percentile of an empty sample");
    if (percent == 0 || percent > 100) throw PreconditionError("percent outside (0,100]");
    std::sort(sorted_or_not.begin(), sorted_or_not.end());
    std::size_t n = sorted_or_not.size();
    std::size_t rank = (percent * n + 99) / 100;
    return sorted_or_not[std::max<std::size_t>(rank, 1) - 1];
}

inline Percentiles latency_percentiles(const std::vector<double>& samples) {
    if (samples.empty()) throw PreconditionError("latency_percentiles: empty sample");
    return {nearest_rank(samples, 50), nearest_rank(samples, 95)};
}

struct BootstrapResult {
    double delta = 0;
    double ci_low = 0;
    double ci_high = 0;
    double p_value = 1;
    std::size_t resamples = 0;
};

/// Paired bootstrap over instances: delta = mean(b - a); CI from the 2.5 and
/// 97.5 nearest-rank percentiles of resampled mean differences; two-sided p
/// from how often the resampled mean falls on either side of zero.
inline BootstrapResult paired_bootstrap(const std::vector<double>& a, const std::vector<double>& b,
                                        std::size_t resamples = 1000, std::uint64_t seed = 0) {
    if (a.size() != b.size()) throw PreconditionError("paired_bootstrap: length mismatch");
    if (a.size() < 2) throw PreconditionError("paired_bootstrap: need at least 2 pairs");
    if (resamples == 0) throw PreconditionError("paired_bootstrap: resamples must be positive");
    std::size_t n = a.size();
    std::vector<double> d(n);
    double sum = 0;
    for (std::size_t i = 0; i < n; ++i) {
        d[i] = b[i] - a[i];
        sum += d[i];
    }
    BootstrapResult r;
    r.resamples = resamples;
    r.delta = sum / double(n);
    std::mt19937_64 rng(seed);
    std::vector<double> means(resamples);
    std::size_t le = 0, ge = 0;
    for (std::size_t k = 0; k < resamples; ++k) {
        double s = 0;
        for (std::size_t i = 0; i < n; ++i) s += d[rng() % n];
        means[k] = s / double(n);
        le += means[k] <= 0.0;
        ge += means[k] >= 0.0;
    }
    std::sort(means.begin(), means.end());
    auto at = [&](double q) {
        auto rank = static_cast<std::size_t>(std::ceil(q * double(resamples) - 1e-9));
        return means[std::clamp<std::size_t>(rank, 1, resamples) - 1];
    };
    r.ci_low = at(0.025);
    r.ci_high = at(0.975);
    r.p_value = std::min(1.0, 2.0 * double(std::min(le, ge) + 1) / double(resamples + 1));
    return r;
}

}  // namespace lightmem
