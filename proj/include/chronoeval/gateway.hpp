#pragma once

/**
 * Gateway core: endpoint descriptions, decode parameters, the completion
 * record, the content-addressed response cache, and the Completer seam the
 * pipelines are written against.
 *
 * The cache is an append-only key-value store on disk, keyed by a SHA-256
 * digest of (api kind, model, prompt, decode parameters, salt). Entries are
 * immutable once written; a warm cache replays every pipeline offline with
 * byte-identical outputs. The HTTP implementation lives in http_client.hpp.
 */

#include <json.hpp>

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <mutex>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "chronoeval/errors.hpp"
#include "chronoeval/hash.hpp"
#include "chronoeval/io.hpp"

namespace chronoeval::gateway {

using json = nlohmann::json;

enum class ApiKind { Chat, Completions };

inline std::string to_string(ApiKind k) {
    return k == ApiKind::Chat ? "chat" : "completions";
}

inline ApiKind api_kind_from_string(const std::string& s) {
    if (s == "chat") return ApiKind::Chat;
    if (s == "completions") return ApiKind::Completions;
    throw ConfigError("unknown api kind: " + s);
}

struct ModelEndpoint {
    std::string base_url;
    std::string model_id;
    std::string api_key_env;
    double timeout_s = 60.0;
    ApiKind api = ApiKind::Chat;
    // Some servers reject an explicit temperature of 0; for those the field
    // is omitted and the server's greedy default is relied on.
    bool omit_zero_temperature = false;

    void validate() const {
        if (base_url.rfind("http://", 0) != 0 &&
            base_url.rfind("https://", 0) != 0) {
            throw ConfigError("endpoint base_url must be absolute: " +
                              base_url);
        }
        if (model_id.empty()) throw ConfigError("endpoint model_id is empty");
    }

    static ModelEndpoint from_json(const json& j) {
        ModelEndpoint e;
        e.base_url = j.at("base_url").get<std::string>();
        e.model_id = j.at("model_id").get<std::string>();
        e.api_key_env = j.value("api_key_env", "");
        e.timeout_s = j.value("timeout_s", 60.0);
        e.api = api_kind_from_string(j.value("api", "chat"));
        e.omit_zero_temperature = j.value("omit_zero_temperature", false);
        e.validate();
        return e;
    }
};

struct DecodeParams {
    double temperature = 0.0; // 0 = greedy decoding
    int max_tokens = 256;
    bool logprobs_requested = false;
    std::vector<std::string> stop_sequences;

    void validate() const {
        if (temperature < 0.0) throw Error("temperature must be >= 0");
        if (max_tokens < 1) throw Error("max_tokens must be positive");
    }
};

inline DecodeParams greedy_params(int max_tokens) {
    DecodeParams p;
    p.max_tokens = max_tokens;
    return p;
}

struct TokenLogprob {
    std::string token;
    double logprob = 0.0;
};

struct CompletionRecord {
    std::string request_hash;
    std::string text;
    std::optional<std::vector<TokenLogprob>> token_logprobs;
    std::string created_at; // ISO-8601 UTC, fixed at first fetch

    json to_json() const {
        json j{{"request_hash", request_hash},
               {"text", text},
               {"created_at", created_at}};
        if (token_logprobs) {
            json lps = json::array();
            for (const auto& t : *token_logprobs) {
                lps.push_back({{"token", t.token}, {"logprob", t.logprob}});
            }
            j["token_logprobs"] = lps;
        }
        return j;
    }

    static CompletionRecord from_json(const json& j) {
        CompletionRecord r;
        r.request_hash = j.at("request_hash").get<std::string>();
        r.text = j.at("text").get<std::string>();
        r.created_at = j.value("created_at", "");
        if (j.contains("token_logprobs")) {
            std::vector<TokenLogprob> lps;
            for (const auto& t : j.at("token_logprobs")) {
                lps.push_back({t.at("token").get<std::string>(),
                               t.at("logprob").get<double>()});
            }
            r.token_logprobs = std::move(lps);
        }
        return r;
    }
};

// The digest covers everything that can change the response. The salt is
// not sent over the wire; it exists so a deliberate re-query (e.g. after an
// unparseable judge verdict) gets its own cache slot and stays replayable.
inline std::string request_hash(const ModelEndpoint& endpoint,
                                const std::string& prompt,
                                const DecodeParams& params,
                                const std::string& salt = "") {
    json j{{"api", to_string(endpoint.api)},
           {"model", endpoint.model_id},
           {"prompt", prompt},
           {"temperature", params.temperature},
           {"max_tokens", params.max_tokens},
           {"logprobs", params.logprobs_requested},
           {"stop", params.stop_sequences},
           {"salt", salt}};
    return hash::sha256_hex(j.dump());
}

// One JSON file per entry, sharded by the first two hex digits. Writes go
// through a temp file + rename; an existing entry is never rewritten.
class CompletionCache {
public:
    explicit CompletionCache(std::filesystem::path dir)
        : dir_(std::move(dir)) {}

    const std::filesystem::path& dir() const { return dir_; }

    std::optional<CompletionRecord> get(const std::string& hash) const {
        const auto p = entry_path(hash);
        std::error_code ec;
        if (!std::filesystem::exists(p, ec)) return std::nullopt;
        return CompletionRecord::from_json(json::parse(io::read_file(p)));
    }

    void put(const CompletionRecord& rec) {
        std::lock_guard<std::mutex> lock(mu_);
        const auto p = entry_path(rec.request_hash);
        std::error_code ec;
        if (std::filesystem::exists(p, ec)) return; // immutable once written
        io::write_file_atomic(p, rec.to_json().dump(2) + "\n");
    }

private:
    std::filesystem::path entry_path(const std::string& hash) const {
        if (hash.size() < 3) throw Error("malformed request hash: " + hash);
        return dir_ / hash.substr(0, 2) / (hash + ".json");
    }

    std::filesystem::path dir_;
    mutable std::mutex mu_;
};

struct BatchItemError {
    std::size_t index = 0;
    std::string kind;
    std::string message;
};

struct BatchResult {
    std::vector<std::optional<CompletionRecord>> records; // aligned to prompts
    std::vector<BatchItemError> errors;

    bool complete() const { return errors.empty(); }
};

// Seam between the pipelines and whatever serves the completions: the HTTP
// client in production, scripted stubs in tests.
class Completer {
public:
    virtual ~Completer() = default;

    virtual CompletionRecord complete(const ModelEndpoint& endpoint,
                                      const std::string& prompt,
                                      const DecodeParams& params,
                                      const std::string& salt = "") = 0;

    // Output order matches prompt order regardless of completion order.
    virtual BatchResult complete_batch(const ModelEndpoint& endpoint,
                                       const std::vector<std::string>& prompts,
                                       const DecodeParams& params,
                                       int max_in_flight) = 0;
};

}  // namespace chronoeval::gateway
