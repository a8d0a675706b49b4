#pragma once
// key=value configuration file for the service and CLI.

#include <fstream>
#include <map>
#include <sstream>

#include "lightmem/consolidator.hpp"
#include "lightmem/embedding.hpp"
#include "lightmem/gateway.hpp"
#include "lightmem/planner.hpp"
#include "lightmem/retrieval.hpp"
#include "lightmem/writer.hpp"

namespace lightmem {

class ConfigError : public Error {
public:
    ConfigError(std::size_t line, const std::string& what)
        : Error("config", line ? "config line " + std::to_string(line) + ": " + what : what), line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

struct EngineConfig {
    PlannerConfig planner;
    Stage2Mode stage2 = Stage2Mode::model;
    MtmConfig mtm;
    ConsolidationConfig consolidation;
    EmbeddingConfig embedding;
    std::map<Role, RoleConfig> roles = {{Role::planner, RoleConfig::defaults(Role::planner)},
                                        {Role::selector, RoleConfig::defaults(Role::selector)},
                                        {Role::writer, RoleConfig::defaults(Role::writer)},
                                        {Role::consolidator, RoleConfig::defaults(Role::consolidator)}};
    std::string fixtures_path;
    std::size_t stm_max_turns = StmBuffer::kDefaultMaxTurns;
    std::size_t stm_max_tokens = StmBuffer::kDefaultMaxTokens;
    bool write_behind = true;
    std::string data_dir;
    std::optional<RoleConfig> generator;  // unset: mock echo generator

    void validate() const {
        if (planner.k == 0) throw ConfigError(0, "k must be positive");
        if (planner.n_max == 0) throw ConfigError(0, "n_max must be positive");
        mtm.validate();
        consolidation.validate();
        for (const auto& [_, rc] : roles) rc.validate();
        if (embedding.dimension == 0) throw ConfigError(0, "embedding.dimension must be positive");
        if (embedding.backend == EmbeddingBackend::http_endpoint && embedding.endpoint_url.empty())
            throw ConfigError(0, "embedding.backend=http requires embedding.url");
    }
};

namespace detail {

inline std::string trim(std::string_view s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

inline std::size_t to_size(const std::string& v, std::size_t line, const std::string& key) {
    try {
        std::size_t pos = 0;
        auto n = std::stoll(v, &pos);
        if (pos != v.size() || n < 0) throw std::invalid_argument(v);
        return static_cast<std::size_t>(n);
    } catch (const std::exception&) {
        throw ConfigError(line, key + ": expected a non-negative integer, got '" + v + "'");
    }
}

inline double to_real(const std::string& v, std::size_t line, const std::string& key) {
    try {
        std::size_t pos = 0;
        double d = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return d;
    } catch (const std::exception&) {
        throw ConfigError(line, key + ": expected a number, got '" + v + "'");
    }
}

inline bool to_bool(const std::string& v, std::size_t line, const std::string& key) {
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw ConfigError(line, key + ": expected true/false, got '" + v + "'");
}

}  // namespace detail

/// Applies one key. Role-scoped keys take the form <role>.<field>; the
/// model.* keys set the field on every role at once.
inline void apply_config_key(EngineConfig& c, const std::string& key, const std::string& v, std::size_t line = 0) {
    using namespace detail;
    auto role_field = [&](RoleConfig& rc, const std::string& field) {
        if (field == "backend") {
            try {
                rc.backend = backend_from_string(v);
            } catch (const Error& e) {
                throw ConfigError(line, e.what());
            }
        } else if (field == "endpoint") rc.endpoint_url = v;
        else if (field == "api_key_env") rc.api_key_ref = v;
        else if (field == "model") rc.model = v;
        else if (field == "timeout_ms") rc.timeout_ms = static_cast<int>(to_size(v, line, key));
        else if (field == "max_retries") rc.max_retries = static_cast<int>(to_size(v, line, key));
        else if (field == "backoff_base_ms") rc.backoff_base_ms = static_cast<int>(to_size(v, line, key));
        else if (field == "prompt_file") {
            std::ifstream in(v);
            if (!in) throw ConfigError(line, "cannot open prompt file " + v);
            std::stringstream ss;
            ss << in.rdbuf();
            rc.prompt_template = ss.str();
        } else throw ConfigError(line, "unknown key " + key);
    };

    auto dot = key.find('.');
    if (dot != std::string::npos) {
        auto scope = key.substr(0, dot), field = key.substr(dot + 1);
        if (scope == "model") {
            for (auto& [_, rc] : c.roles) role_field(rc, field);
            return;
        }
        if (scope == "planner" || scope == "selector" || scope == "writer" || scope == "consolidator") {
            if (scope == "planner" && field == "mode") {
                if (v == "rule_based") c.planner.backend = PlannerBackend::rule_based;
                else if (v == "model") c.planner.backend = PlannerBackend::model;
                else throw ConfigError(line, "planner.mode: expected rule_based or model");
                return;
            }
            role_field(c.roles.at(role_from_string(scope)), field);
            return;
        }
        if (scope == "generator") {
            if (!c.generator) c.generator = RoleConfig::defaults(Role::planner, BackendKind::http);
            if (field == "backend") {
                if (v == "mock") c.generator.reset();
                else if (v != "http") throw ConfigError(line, "generator.backend: expected mock or http");
                return;
            }
            role_field(*c.generator, field);
            return;
        }
        if (scope == "embedding") {
            if (field == "dimension") c.embedding.dimension = to_size(v, line, key);
            else if (field == "backend") {
                if (v == "mock") c.embedding.backend = EmbeddingBackend::deterministic_mock;
                else if (v == "http") c.embedding.backend = EmbeddingBackend::http_endpoint;
                else throw ConfigError(line, "embedding.backend: expected mock or http");
            } else if (field == "seed") c.embedding.seed = to_size(v, line, key);
            else if (field == "url") c.embedding.endpoint_url = v;
            else if (field == "model") c.embedding.model = v;
            else if (field == "timeout_ms") c.embedding.http.timeout_ms = static_cast<int>(to_size(v, line, key));
            else throw ConfigError(line, "unknown key " + key);
            return;
        }
        if (scope == "stm") {
            if (field == "max_turns") c.stm_max_turns = to_size(v, line, key);
            else if (field == "max_tokens") c.stm_max_tokens = to_size(v, line, key);
            else throw ConfigError(line, "unknown key " + key);
            return;
        }
        if (scope == "consolidation") {
            auto& cc = c.consolidation;
            if (field == "enabled") cc.enabled = to_bool(v, line, key);
            else if (field == "interval_turns") cc.trigger_interval_turns = to_size(v, line, key);
            else if (field == "anchor_k") cc.anchor_k = to_size(v, line, key);
            else if (field == "merge_threshold") cc.merge_threshold = to_real(v, line, key);
            else if (field == "decay_lambda") cc.decay_lambda = to_real(v, line, key);
            else if (field == "drop_floor") cc.drop_floor = to_real(v, line, key);
            else if (field == "link_threshold") cc.link_threshold = to_real(v, line, key);
            else throw ConfigError(line, "unknown key " + key);
            return;
        }
        throw ConfigError(line, "unknown key " + key);
    }
    if (key == "k") c.planner.k = to_size(v, line, key);
    else if (key == "n_max") c.planner.n_max = to_size(v, line, key);
    else if (key == "capacity_b") c.mtm.capacity_b = to_size(v, line, key);
    else if (key == "merge_threshold") c.mtm.merge_threshold = to_real(v, line, key);
    else if (key == "eviction_batch") c.mtm.eviction_batch = to_size(v, line, key);
    else if (key == "stage2") {
        try {
            c.stage2 = stage2_from_string(v);
        } catch (const Error& e) {
            throw ConfigError(line, e.what());
        }
    } else if (key == "fixtures") c.fixtures_path = v;
    else if (key == "lexicon") c.planner.lexicon = Lexicon::from_file(v);
    else if (key == "write_behind") c.write_behind = to_bool(v, line, key);
    else if (key == "data_dir") c.data_dir = v;
    else throw ConfigError(line, "unknown key " + key);
}

inline EngineConfig parse_config(std::string_view content, EngineConfig base = {}) {
    std::istringstream in{std::string(content)};
    std::string raw;
    std::size_t n = 0;
    while (std::getline(in, raw)) {
        ++n;
        auto line = detail::trim(raw);
        if (line.empty() || line[0] == '#') continue;
        auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError(n, "expected key=value");
        auto key = detail::trim(line.substr(0, eq));
        auto value = detail::trim(line.substr(eq + 1));
        if (key.empty()) throw ConfigError(n, "empty key");
        apply_config_key(base, key, value, n);
    }
    base.validate();
    return base;
}

inline EngineConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError(0, "cannot open config " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

}  // namespace lightmem
