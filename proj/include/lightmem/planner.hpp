#pragma once
// Retrieval planning: turns (x_t, STM window) into hypothetical queries with
// routes, quotas and metadata constraints under a fixed Top-K budget.

#include <fstream>
#include <sstream>

#include "lightmem/core.hpp"
#include "lightmem/embedding.hpp"
#include "lightmem/gateway.hpp"
#include "lightmem/vector_index.hpp"

namespace lightmem {

struct HypotheticalQuery {
    std::string text;
    StoreKind route = StoreKind::MTM;
    std::size_t quota = 1;
    Embedding embedding;
    bool operator==(const HypotheticalQuery&) const = default;
};

enum class Personalization { high, low };
enum class Horizon { recent, long_term, mixed };

struct Intent {
    Personalization personalization = Personalization::low;
    Horizon horizon = Horizon::mixed;
    bool operator==(const Intent&) const = default;
};

inline std::string_view to_string(Personalization p) { return p == Personalization::high ? "high" : "low"; }
inline std::string_view to_string(Horizon h) {
    return h == Horizon::recent ? "recent" : h == Horizon::long_term ? "long_term" : "mixed";
}

constexpr std::size_t kDefaultMaxHqs = 4;

struct RetrievalPlan {
    std::vector<HypotheticalQuery> hqs;
    MetadataFilter filter;
    std::size_t k = 5;
    Intent intent;

    void validate(std::size_t n_max = kDefaultMaxHqs) const {
        if (k == 0) throw PreconditionError("plan k must be positive");
        if (hqs.empty() || hqs.size() > n_max) throw PreconditionError("plan must carry 1..n_max HQs");
        filter.validate();
        std::size_t total = 0;
        for (const auto& h : hqs) {
            if (h.text.empty()) throw PreconditionError("HQ text must be non-empty");
            if (h.quota == 0) throw PreconditionError("HQ quota must be positive");
            total += h.quota;
        }
        if (total < 2 * k || total > 2 * k + hqs.size() - 1)
            throw PreconditionError("HQ quotas must sum to [2k, 2k + |hqs| - 1]");
    }

    bool operator==(const RetrievalPlan&) const = default;
};

/// Stage-1 quotas: every HQ gets ceil(2k / n); the union is later cut to 2k.
inline std::vector<std::size_t> allocate_budget(std::size_t n, std::size_t k) {
    if (n == 0 || k == 0) throw PreconditionError("allocate_budget: n and k must be positive");
    return std::vector<std::size_t>(n, (2 * k + n - 1) / n);
}

// ---------------------------------------------------------------------------
// Marker lexicon

using Phrase = std::vector<std::string>;

/// Marker lists for the rule-based planner. Plain-text format, one marker per
/// line under section headers: [pronouns] [time] [preference] [factual]
/// [recommend]. Lines starting with '#' are comments.
struct Lexicon {
    std::vector<Phrase> pronouns;
    std::vector<Phrase> time;
    std::vector<Phrase> preference;
    std::vector<Phrase> factual;
    std::vector<Phrase> recommend;

    static constexpr const char* kDefaultText = R"(# rule-based planner lexicon
[pronouns]
it
that
he
she
they
the project

[time]
recently
last time
before

[preference]
i
me
my
mine
myself
we
us
our
you
your
user
user's
prefer
prefers
preferred
preference
preferences
favorite
favourite
like
likes
love
loves
want
wants
decided
dietary
allergic
remind
told
mentioned
personal

[factual]
rated
highly rated
nearby
popular
famous
capital
population
located
official
currency
history
general
generally
typically
usually
common
public
fact
facts
definition
define
known
principles
restaurants
restaurant
options

[recommend]
recommend
suggest
recommendation
recommendations
advise
)";

    static Lexicon parse(std::string_view content) {
        Lexicon lx;
        std::vector<Phrase>* section = nullptr;
        std::istringstream in{std::string(content)};
        std::string line;
        std::size_t n = 0;
        while (std::getline(in, line)) {
            ++n;
            auto t = text::normalize_space(line);
            if (t.empty() || t[0] == '#') continue;
            if (t.front() == '[' && t.back() == ']') {
                auto name = t.substr(1, t.size() - 2);
                if (name == "pronouns") section = &lx.pronouns;
                else if (name == "time") section = &lx.time;
                else if (name == "preference") section = &lx.preference;
                else if (name == "factual") section = &lx.factual;
                else if (name == "recommend") section = &lx.recommend;
                else throw PreconditionError("lexicon line " + std::to_string(n) + ": unknown section " + t);
                continue;
            }
            if (!section) throw PreconditionError("lexicon line " + std::to_string(n) + ": marker outside a section");
            auto phrase = text::normalized_tokens(t);
            if (!phrase.empty()) section->push_back(std::move(phrase));
        }
        return lx;
    }

    static const Lexicon& builtin() {
        static const Lexicon lx = parse(kDefaultText);
        return lx;
    }
    static Lexicon defaults() { return builtin(); }

    static Lexicon from_file(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw PreconditionError("cannot open lexicon " + path);
        std::stringstream ss;
        ss << in.rdbuf();
        return parse(ss.str());
    }

    static bool fires(const std::vector<std::string>& tokens, const std::vector<Phrase>& markers) {
        for (const auto& p : markers)
            if (text::contains_phrase(tokens, p)) return true;
        return false;
    }
};

/// Routing decision for one HQ: MTM for personalized needs, LTM for general
/// knowledge, both when the markers are mixed or absent.
enum class Route { MTM, LTM, both };

inline Route route_hq(std::string_view hq_text, const Lexicon& lx) {
    if (text::normalize_space(hq_text).empty()) throw PreconditionError("route_hq: empty text");
    auto toks = text::normalized_tokens(hq_text);
    bool personal = Lexicon::fires(toks, lx.preference);
    bool factual = Lexicon::fires(toks, lx.factual);
    if (personal && !factual) return Route::MTM;
    if (factual && !personal) return Route::LTM;
    return Route::both;
}

// ---------------------------------------------------------------------------
// Plan construction

struct DraftHq {
    std::string text;
    Route route = Route::both;
};

/// Expands drafts into routed, budgeted HQs. A draft routed to both stores is
/// split into one MTM and one LTM query, each with half its quota (ceil).
/// Drafts beyond what fits in n_max entries are dropped.
inline std::vector<HypotheticalQuery> assign_quotas(std::vector<DraftHq> drafts, std::size_t k, std::size_t n_max,
                                                    const Embedder& embedder) {
    std::vector<DraftHq> kept;
    std::size_t entries = 0;
    for (auto& d : drafts) {
        std::size_t need = d.route == Route::both ? 2 : 1;
        if (entries + need > n_max) {
            if (kept.empty() && n_max >= 1) {
                d.route = Route::MTM;  // n_max == 1 cannot host a split
                kept.push_back(std::move(d));
            }
            break;
        }
        entries += need;
        kept.push_back(std::move(d));
    }
    if (kept.empty()) throw PreconditionError("plan has no HQs");
    auto quotas = allocate_budget(kept.size(), k);
    std::vector<HypotheticalQuery> out;
    for (std::size_t i = 0; i < kept.size(); ++i) {
        auto emb = embedder.embed(kept[i].text);
        if (kept[i].route == Route::both) {
            std::size_t half = (quotas[i] + 1) / 2;
            out.push_back({kept[i].text, StoreKind::MTM, half, emb});
            out.push_back({kept[i].text, StoreKind::LTM, half, std::move(emb)});
        } else {
            out.push_back({kept[i].text, kept[i].route == Route::MTM ? StoreKind::MTM : StoreKind::LTM, quotas[i],
                           std::move(emb)});
        }
    }
    return out;
}

/// Groups model-emitted (text, route) pairs: a text listed with both routes
/// becomes one both-routed draft.
inline std::vector<DraftHq> drafts_from_model(const std::vector<PlannerHq>& hqs) {
    std::vector<DraftHq> out;
    for (const auto& h : hqs) {
        auto text = text::normalize_space(h.text);
        Route r = h.route == StoreKind::MTM ? Route::MTM : Route::LTM;
        auto it = std::find_if(out.begin(), out.end(), [&](const DraftHq& d) { return d.text == text; });
        if (it == out.end())
            out.push_back({text, r});
        else if (it->route != r)
            it->route = Route::both;
    }
    return out;
}

inline TargetStore target_for(const std::vector<HypotheticalQuery>& hqs) {
    bool m = false, l = false;
    for (const auto& h : hqs) (h.route == StoreKind::MTM ? m : l) = true;
    return m && l ? TargetStore::both : m ? TargetStore::MTM : TargetStore::LTM;
}

struct RulePlan {
    std::vector<DraftHq> drafts;
    std::optional<TimeWindow> time_window;
    bool vague_time = false;
};

constexpr Timestamp kVagueTimeWindow = 30 * kMsPerDay;

/// The deterministic fallback planner. Steps: detect underspecified pronouns
/// and vague time cues, decompose recommendation requests into a
/// user-preference query and a general-knowledge query, route the rest.
/// `last_input` is the newest STM turn's input, empty when STM is empty.
inline RulePlan rule_based_drafts(std::string_view x_t, std::string_view last_input, const Lexicon& lx, Timestamp now) {
    RulePlan rp;
    auto input = text::normalize_space(x_t);
    auto toks = text::normalized_tokens(input);

    rp.vague_time = Lexicon::fires(toks, lx.time);
    if (rp.vague_time) rp.time_window = TimeWindow{now - kVagueTimeWindow, now};

    std::string resolved = input;
    if (Lexicon::fires(toks, lx.pronouns) && !text::normalize_space(last_input).empty())
        resolved += " regarding " + text::normalize_space(last_input);

    if (Lexicon::fires(toks, lx.recommend)) {
        static const std::set<std::string> kFiller = {"a",    "an",   "the",    "some", "me",   "us",    "please",
                                                      "can",  "could", "would", "you",  "for",  "good",  "nice"};
        std::vector<std::string> topic;
        for (const auto& t : toks) {
            bool trigger = false;
            for (const auto& p : lx.recommend) trigger = trigger || (p.size() == 1 && p[0] == t);
            if (!trigger && !kFiller.count(t)) topic.push_back(t);
        }
        if (!topic.empty()) {
            auto subject = text::join(topic);
            rp.drafts.push_back({"what are the user's preferences and dietary constraints for " + subject, Route::MTM});
            rp.drafts.push_back({"highly rated " + subject + " options", Route::LTM});
            return rp;
        }
    }
    rp.drafts.push_back({resolved, route_hq(resolved, lx)});
    return rp;
}

inline std::string last_input(const StmBuffer& context) {
    return context.empty() ? std::string{} : context.turns().back().input_text;
}

inline RulePlan rule_based_drafts(std::string_view x_t, const StmBuffer& context, const Lexicon& lx, Timestamp now) {
    return rule_based_drafts(x_t, last_input(context), lx, now);
}

inline json rule_plan_to_json(const RulePlan& rp) {
    json hqs = json::array();
    for (const auto& d : rp.drafts) {
        if (d.route != Route::LTM) hqs.push_back({{"text", d.text}, {"route", "MTM"}});
        if (d.route != Route::MTM) hqs.push_back({{"text", d.text}, {"route", "LTM"}});
    }
    json filters = json::object();
    if (rp.time_window) filters["time_window"] = {{"start", rp.time_window->start}, {"end", rp.time_window->end}};
    return {{"hqs", hqs}, {"filters", filters}};
}

enum class PlannerBackend { rule_based, model };

struct PlannerConfig {
    std::size_t k = 5;
    std::size_t n_max = kDefaultMaxHqs;
    Lexicon lexicon = Lexicon::defaults();
    PlannerBackend backend = PlannerBackend::rule_based;
};

inline json planner_payload(std::string_view x_t, const StmBuffer& context, std::size_t k, Timestamp now) {
    return {{"query", std::string(x_t)},
            {"context", context.window()},
            {"last_input", last_input(context)},
            {"user_id", context.user_id()},
            {"now_ms", now},
            {"k", k}};
}

inline Intent derive_intent(const std::vector<HypotheticalQuery>& hqs, bool recent) {
    Intent in;
    bool any_mtm = std::any_of(hqs.begin(), hqs.end(), [](const auto& h) { return h.route == StoreKind::MTM; });
    bool all_ltm = !any_mtm;
    in.personalization = any_mtm ? Personalization::high : Personalization::low;
    in.horizon = recent ? Horizon::recent : all_ltm ? Horizon::long_term : Horizon::mixed;
    return in;
}

/// Builds Q_t for the session user. The filter's user_id always comes from the
/// session, never from a model. Unparsable model output falls back to the
/// rule-based planner and is recorded as a degradation event.
inline RetrievalPlan build_plan(std::string_view x_t, const StmBuffer& context, const PlannerConfig& cfg,
                                const Embedder& embedder, Timestamp now, const Gateway* gateway = nullptr,
                                DegradationLog* log = nullptr) {
    if (text::normalize_space(x_t).empty()) throw PreconditionError("build_plan: x_t must be non-empty");
    if (cfg.k == 0) throw PreconditionError("build_plan: k must be positive");

    std::vector<DraftHq> drafts;
    std::optional<TimeWindow> window;
    std::set<std::string> tags;
    bool recent = false;
    bool planned = false;

    if (cfg.backend == PlannerBackend::model && gateway) {
        auto resp = gateway->complete(Role::planner, planner_payload(x_t, context, cfg.k, now));
        if (!resp.degraded && resp.parsed && !std::get<PlannerOutput>(*resp.parsed).hqs.empty()) {
            const auto& po = std::get<PlannerOutput>(*resp.parsed);
            drafts = drafts_from_model(po.hqs);
            window = po.time_window;
            tags = po.type_tags;
            recent = window.has_value();
            planned = true;
        } else if (log) {
            log->record("planner", resp.degraded ? resp.error : "model returned no HQs");
        }
    }
    if (!planned) {
        auto rp = rule_based_drafts(x_t, context, cfg.lexicon, now);
        drafts = std::move(rp.drafts);
        window = rp.time_window;
        recent = rp.vague_time;
    }

    RetrievalPlan plan;
    plan.k = cfg.k;
    plan.hqs = assign_quotas(std::move(drafts), cfg.k, cfg.n_max, embedder);
    plan.filter.user_id = context.user_id();
    plan.filter.time_window = window;
    plan.filter.type_tags = std::move(tags);
    plan.filter.target_store = target_for(plan.hqs);
    plan.intent = derive_intent(plan.hqs, recent);
    plan.validate(cfg.n_max);
    return plan;
}

}  // namespace lightmem
