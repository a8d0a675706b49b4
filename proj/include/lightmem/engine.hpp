#pragma once
// The online loop: plan -> retrieve -> prompt -> generate, with write-behind
// MTM updates and periodic LTM consolidation.

#include <condition_variable>
#include <thread>

#include "lightmem/config.hpp"
#include "lightmem/consolidator.hpp"
#include "lightmem/mock_models.hpp"
#include "lightmem/persistence.hpp"
#include "lightmem/retrieval.hpp"
#include "lightmem/writer.hpp"

namespace lightmem {

struct LatencyRecord {
    std::string query_id;
    std::string user_id;
    double retrieval_ms = 0;  // plan + stage 1 + stage 2 + prompt construction
    double end_to_end_ms = 0;  // retrieval plus generation
    Timestamp timestamp = 0;
};

/// Append-only record of query latencies.
class LatencyLog {
public:
    void append(LatencyRecord r) {
        std::lock_guard lock(mu_);
        records_.push_back(std::move(r));
    }
    std::vector<LatencyRecord> records() const {
        std::lock_guard lock(mu_);
        return records_;
    }
    std::size_t size() const {
        std::lock_guard lock(mu_);
        return records_.size();
    }

private:
    mutable std::mutex mu_;
    std::vector<LatencyRecord> records_;
};

struct QueryOptions {
    bool write_back = true;
    std::optional<Stage2Mode> stage2;
    std::optional<StoreKind> force_route;  // send every HQ to one store
    std::function<void(RetrievalPlan&)> plan_hook;  // plan perturbation (stress tests)
};

struct QueryResult {
    std::string query_id;
    std::string answer;
    RetrievalPlan plan;
    RetrievalResult retrieval;
    std::string prompt;
    LatencyRecord latency;
};

struct TurnWriteReport {
    std::vector<std::string> summaries;
    std::vector<WriteDelta> deltas;
    std::optional<CycleReport> consolidation;
};

inline std::string render_prompt(const std::string& stm_window, const std::vector<std::string>& memories,
                                 std::string_view query) {
    std::string p = "Recent dialogue:\n";
    p += stm_window.empty() ? "(none)" : stm_window;
    p += "\n\nRelevant memories:\n";
    if (memories.empty()) p += "(none)\n";
    for (const auto& m : memories) p += "- " + m + "\n";
    p += "\nUser: ";
    p += query;
    return p;
}

class Engine {
public:
    explicit Engine(EngineConfig cfg = {}, Clock clock = system_now_ms)
        : cfg_(std::move(cfg)),
          clock_(std::move(clock)),
          embedder_(make_embedder(cfg_.embedding)),
          mtm_(cfg_.embedding.dimension),
          ltm_(cfg_.embedding.dimension) {
        cfg_.validate();
        for (const auto& [_, rc] : cfg_.roles) gateway_.configure(rc);
        gateway_.set_mock(mock::default_responder());
        if (!cfg_.fixtures_path.empty())
            gateway_.set_fixtures(ScriptedFixtures::from_jsonl(cfg_.fixtures_path));
        if (cfg_.generator) generator_ = ResponseGenerator(*cfg_.generator);
        consolidator_ = std::make_unique<Consolidator>(mtm_, ltm_, *embedder_, gateway_, cfg_.consolidation, &degradations_);
        if (cfg_.write_behind) worker_ = std::thread([this] { work(); });
    }

    ~Engine() {
        {
            std::lock_guard lock(queue_mu_);
            stopping_ = true;
        }
        queue_cv_.notify_all();
        if (worker_.joinable()) worker_.join();
    }

    Engine(const Engine&) = delete;
    Engine& operator=(const Engine&) = delete;

    QueryResult handle_query(const std::string& user_id, const std::string& text, const QueryOptions& opts = {}) {
        if (user_id.empty()) throw PreconditionError("user_id is required");
        if (text::normalize_space(text).empty()) throw PreconditionError("query text must be non-empty");
        auto t0 = std::chrono::steady_clock::now();
        Timestamp now = clock_();
        QueryResult out;
        out.query_id = next_query_id();
        StmBuffer context = session_copy(user_id);

        out.plan = build_plan(text, context, cfg_.planner, *embedder_, now, &gateway_, &degradations_);
        if (opts.plan_hook) opts.plan_hook(out.plan);
        if (opts.force_route) {
            for (auto& h : out.plan.hqs) h.route = *opts.force_route;
            out.plan.filter.target_store = *opts.force_route == StoreKind::MTM ? TargetStore::MTM : TargetStore::LTM;
        }
        out.retrieval = retrieve(out.plan, Stores{mtm_, ltm_.snapshot()}, opts.stage2.value_or(cfg_.stage2), now,
                                 &gateway_, &degradations_);
        auto memories = out.retrieval.retrieved.summaries();
        out.prompt = render_prompt(context.window(), memories, text);
        auto t1 = std::chrono::steady_clock::now();
        out.answer = generator_.generate(out.prompt, memories);
        auto t2 = std::chrono::steady_clock::now();

        out.latency = {out.query_id, user_id, std::chrono::duration<double, std::milli>(t1 - t0).count(),
                       std::chrono::duration<double, std::milli>(t2 - t0).count(), now};
        latency_.append(out.latency);

        auto turn = append_turn(user_id, text, out.answer, now);
        if (opts.write_back) submit(std::move(turn.first), std::move(turn.second));
        return out;
    }

    /// Records a completed turn (input plus response) without a retrieval,
    /// e.g. when replaying a transcript. Runs the writer synchronously.
    TurnWriteReport observe_turn(const std::string& user_id, const std::string& input, const std::string& response) {
        if (user_id.empty()) throw PreconditionError("user_id is required");
        auto turn = append_turn(user_id, input, response, clock_());
        return write_turn(turn.first, turn.second);
    }

    /// Waits until every queued write-behind turn has been processed.
    void flush() {
        std::unique_lock lock(queue_mu_);
        idle_cv_.wait(lock, [&] { return queue_.empty() && !busy_; });
    }

    CycleReport consolidate() { return consolidator_->run_cycle_blocking(clock_()); }
    std::optional<CycleReport> try_consolidate() { return consolidator_->run_cycle(clock_()); }

    SnapshotText snapshot(const std::filesystem::path& dir) {
        flush();
        return save_snapshot(dir, mtm_, *ltm_.snapshot());
    }

    void load(const std::filesystem::path& dir) {
        flush();
        auto g = load_snapshot(dir, mtm_);
        ltm_.publish(std::make_shared<const LtmGraph>(std::move(g)));
        std::lock_guard lock(sessions_mu_);
        sessions_.clear();
    }

    MtmStore& mtm() { return mtm_; }
    LtmStore& ltm() { return ltm_; }
    Gateway& gateway() { return gateway_; }
    const Embedder& embedder() const { return *embedder_; }
    const EngineConfig& config() const { return cfg_; }
    const LatencyLog& latency_log() const { return latency_; }
    DegradationLog& degradations() { return degradations_; }
    std::uint64_t turns_written() const { return turns_written_.load(); }

    StmBuffer session_copy(const std::string& user_id) {
        std::lock_guard lock(sessions_mu_);
        return session_locked(user_id);
    }

private:
    StmBuffer& session_locked(const std::string& user_id) {
        auto it = sessions_.find(user_id);
        if (it == sessions_.end())
            it = sessions_.emplace(user_id, StmBuffer(user_id, cfg_.stm_max_turns, cfg_.stm_max_tokens)).first;
        return it->second;
    }

    std::pair<DialogueTurn, StmBuffer> append_turn(const std::string& user_id, const std::string& input,
                                                   const std::string& response, Timestamp now) {
        std::lock_guard lock(sessions_mu_);
        auto& s = session_locked(user_id);
        StmBuffer before = s;
        DialogueTurn t{user_id, s.empty() ? 1 : s.turns().back().turn_index + 1, input, response, now};
        s.append(t);
        return {std::move(t), std::move(before)};
    }

    std::string next_query_id() {
        auto n = ++query_counter_;
        std::string d = std::to_string(n);
        return "q" + std::string(d.size() < 8 ? 8 - d.size() : 0, '0') + d;
    }

    TurnWriteReport write_turn(const DialogueTurn& turn, const StmBuffer& context) {
        std::lock_guard lock(write_mu_);
        TurnWriteReport rep;
        Timestamp now = clock_();
        rep.summaries = summarize_turn(turn, context, gateway_, &degradations_);
        for (const auto& s : rep.summaries) {
            MemoryItem item;
            item.user_id = turn.user_id;
            item.summary = s;
            item.embedding = embedder_->embed(s);
            item.created_at = turn.timestamp;
            item.last_accessed = turn.timestamp;
            item.type_tags = infer_type_tags(s, cfg_.planner.lexicon);
            rep.deltas.push_back(write_mtm(mtm_, std::move(item), cfg_.mtm, now));
        }
        auto n = ++turns_written_;
        if (cfg_.consolidation.enabled &&
            (n % cfg_.consolidation.trigger_interval_turns == 0 || mtm_.pending_size() >= cfg_.mtm.eviction_batch))
            rep.consolidation = consolidator_->run_cycle_blocking(now);
        return rep;
    }

    void submit(DialogueTurn turn, StmBuffer context) {
        if (!cfg_.write_behind) {
            write_turn(turn, context);
            return;
        }
        {
            std::lock_guard lock(queue_mu_);
            queue_.emplace_back(std::move(turn), std::move(context));
        }
        queue_cv_.notify_one();
    }

    void work() {
        for (;;) {
            std::pair<DialogueTurn, StmBuffer> job{DialogueTurn{}, StmBuffer("-")};
            {
                std::unique_lock lock(queue_mu_);
                queue_cv_.wait(lock, [&] { return stopping_ || !queue_.empty(); });
                if (queue_.empty()) return;
                job = std::move(queue_.front());
                queue_.pop_front();
                busy_ = true;
            }
            try {
                write_turn(job.first, job.second);
            } catch (const std::exception& e) {
                degradations_.record("writer", e.what());
            }
            {
                std::lock_guard lock(queue_mu_);
                busy_ = false;
            }
            idle_cv_.notify_all();
        }
    }

    EngineConfig cfg_;
    Clock clock_;
    std::unique_ptr<Embedder> embedder_;
    MtmStore mtm_;
    LtmStore ltm_;
    Gateway gateway_;
    ResponseGenerator generator_;
    DegradationLog degradations_;
    std::unique_ptr<Consolidator> consolidator_;
    LatencyLog latency_;

    std::mutex sessions_mu_;
    std::map<std::string, StmBuffer> sessions_;
    std::atomic<std::uint64_t> query_counter_{0};
    std::atomic<std::uint64_t> turns_written_{0};
    std::mutex write_mu_;

    std::mutex queue_mu_;
    std::condition_variable queue_cv_, idle_cv_;
    std::deque<std::pair<DialogueTurn, StmBuffer>> queue_;
    bool busy_ = false;
    bool stopping_ = false;
    std::thread worker_;
};

}  // namespace lightmem
