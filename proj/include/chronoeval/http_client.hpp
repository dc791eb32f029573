#pragma once

/**
 * OpenAI-compatible HTTP client with deterministic decoding, bounded
 * exponential-backoff retry, and the on-disk response cache from
 * gateway.hpp in front of every call.
 *
 * Wire formats:
 *   POST {base_url}/v1/chat/completions   role=user message carrying the
 *                                         rendered prompt
 *   POST {base_url}/v1/completions        raw continuation (used by the
 *                                         knowledge-cutoff probes)
 *
 * Retries cover transport errors and HTTP 429/5xx. 401/403 surface as
 * AuthError immediately; other HTTP rejections are not retried.
 */

#include <httplib.h>

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <memory>
#include <thread>

#include "chronoeval/gateway.hpp"

namespace chronoeval::gateway {

struct RetryPolicy {
    int max_attempts = 5;
    double backoff_base_s = 1.0; // doubles after each failed attempt
};

struct GatewayOptions {
    std::filesystem::path cache_dir = ".chrono-cache";
    RetryPolicy retry;
    bool offline = false; // forbid network; fail on cache miss
};

class GatewayClient : public Completer {
public:
    explicit GatewayClient(GatewayOptions opts)
        : opts_(std::move(opts)), cache_(opts_.cache_dir) {}

    CompletionRecord complete(const ModelEndpoint& endpoint,
                              const std::string& prompt,
                              const DecodeParams& params,
                              const std::string& salt = "") override {
        if (prompt.empty()) throw std::invalid_argument("empty prompt");
        endpoint.validate();
        params.validate();

        const std::string hash = request_hash(endpoint, prompt, params, salt);
        if (auto cached = cache_.get(hash)) {
            hits_.fetch_add(1, std::memory_order_relaxed);
            return *cached;
        }
        if (opts_.offline) {
            throw NetworkError("offline mode: cache miss for request " + hash);
        }
        CompletionRecord rec = fetch(endpoint, prompt, params);
        rec.request_hash = hash;
        cache_.put(rec);
        misses_.fetch_add(1, std::memory_order_relaxed);
        return rec;
    }

    BatchResult complete_batch(const ModelEndpoint& endpoint,
                               const std::vector<std::string>& prompts,
                               const DecodeParams& params,
                               int max_in_flight) override {
        if (max_in_flight < 1) {
            throw std::invalid_argument("max_in_flight must be >= 1");
        }
        // Identical prompts collapse to one request.
        struct Job {
            std::string prompt;
            std::optional<CompletionRecord> record;
            std::optional<BatchItemError> error;
        };
        std::vector<Job> jobs;
        std::map<std::string, std::size_t> job_of_hash;
        std::vector<std::size_t> job_index(prompts.size());
        for (std::size_t i = 0; i < prompts.size(); ++i) {
            const std::string h = request_hash(endpoint, prompts[i], params);
            auto [it, fresh] = job_of_hash.emplace(h, jobs.size());
            if (fresh) jobs.push_back(Job{prompts[i], {}, {}});
            job_index[i] = it->second;
        }

        std::atomic<std::size_t> next{0};
        auto worker = [&]() {
            for (;;) {
                const std::size_t j = next.fetch_add(1);
                if (j >= jobs.size()) return;
                try {
                    jobs[j].record =
                        complete(endpoint, jobs[j].prompt, params);
                } catch (const NetworkError& e) {
                    jobs[j].error = BatchItemError{0, "NetworkError", e.what()};
                } catch (const AuthError& e) {
                    jobs[j].error = BatchItemError{0, "AuthError", e.what()};
                } catch (const MalformedResponse& e) {
                    jobs[j].error =
                        BatchItemError{0, "MalformedResponse", e.what()};
                } catch (const std::exception& e) {
                    jobs[j].error = BatchItemError{0, "Error", e.what()};
                }
            }
        };
        const std::size_t n_workers = std::min<std::size_t>(
            static_cast<std::size_t>(max_in_flight), jobs.size());
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w + 1 < n_workers; ++w) {
            pool.emplace_back(worker);
        }
        worker(); // run the caller's share inline
        for (auto& t : pool) t.join();

        BatchResult out;
        out.records.resize(prompts.size());
        for (std::size_t i = 0; i < prompts.size(); ++i) {
            const Job& j = jobs[job_index[i]];
            if (j.record) {
                out.records[i] = j.record;
            } else if (j.error) {
                BatchItemError e = *j.error;
                e.index = i;
                out.errors.push_back(std::move(e));
            }
        }
        return out;
    }

    CompletionCache& cache() { return cache_; }
    std::uint64_t cache_hits() const { return hits_.load(); }
    std::uint64_t cache_misses() const { return misses_.load(); }

private:
    static bool retryable_status(int status) {
        return status == 429 || (status >= 500 && status < 600);
    }

    static std::string now_utc() {
        const std::time_t t =
            std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
        std::tm tm{};
        gmtime_r(&t, &tm);
        char buf[32];
        std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
        return buf;
    }

    json build_body(const ModelEndpoint& endpoint, const std::string& prompt,
                    const DecodeParams& params) const {
        json body{{"model", endpoint.model_id},
                  {"max_tokens", params.max_tokens}};
        if (!(endpoint.omit_zero_temperature && params.temperature == 0.0)) {
            body["temperature"] = params.temperature;
        }
        if (!params.stop_sequences.empty()) {
            body["stop"] = params.stop_sequences;
        }
        if (endpoint.api == ApiKind::Chat) {
            body["messages"] =
                json::array({{{"role", "user"}, {"content", prompt}}});
            if (params.logprobs_requested) body["logprobs"] = true;
        } else {
            body["prompt"] = prompt;
            if (params.logprobs_requested) body["logprobs"] = 0;
        }
        return body;
    }

    static std::vector<TokenLogprob> parse_chat_logprobs(const json& choice) {
        std::vector<TokenLogprob> out;
        for (const auto& item : choice.at("logprobs").at("content")) {
            out.push_back({item.at("token").get<std::string>(),
                           item.at("logprob").get<double>()});
        }
        return out;
    }

    static std::vector<TokenLogprob>
    parse_completion_logprobs(const json& choice) {
        std::vector<TokenLogprob> out;
        const auto& lp = choice.at("logprobs");
        const auto& tokens = lp.at("tokens");
        const auto& values = lp.at("token_logprobs");
        for (std::size_t i = 0; i < tokens.size() && i < values.size(); ++i) {
            // Some servers emit null for the first prompt-echo token.
            if (values[i].is_null()) continue;
            out.push_back({tokens[i].get<std::string>(),
                           values[i].get<double>()});
        }
        return out;
    }

    CompletionRecord parse_response(const ModelEndpoint& endpoint,
                                    const DecodeParams& params,
                                    const std::string& body) const {
        json j;
        try {
            j = json::parse(body);
        } catch (const json::exception& e) {
            throw MalformedResponse(std::string("response is not JSON: ") +
                                    e.what());
        }
        try {
            const auto& choice = j.at("choices").at(0);
            CompletionRecord rec;
            rec.created_at = now_utc();
            if (endpoint.api == ApiKind::Chat) {
                rec.text = choice.at("message").at("content").get<std::string>();
                if (params.logprobs_requested) {
                    rec.token_logprobs = parse_chat_logprobs(choice);
                }
            } else {
                rec.text = choice.at("text").get<std::string>();
                if (params.logprobs_requested) {
                    rec.token_logprobs = parse_completion_logprobs(choice);
                }
            }
            if (rec.token_logprobs) {
                for (const auto& t : *rec.token_logprobs) {
                    if (t.logprob > 0.0) {
                        throw MalformedResponse("positive logprob for token '" +
                                                t.token + "'");
                    }
                }
            }
            return rec;
        } catch (const json::exception& e) {
            throw MalformedResponse(std::string("unexpected response shape: ") +
                                    e.what());
        }
    }

    CompletionRecord fetch(const ModelEndpoint& endpoint,
                           const std::string& prompt,
                           const DecodeParams& params) {
        const std::string path = endpoint.api == ApiKind::Chat
                                     ? "/v1/chat/completions"
                                     : "/v1/completions";
        std::string bearer;
        if (!endpoint.api_key_env.empty()) {
            const char* key = std::getenv(endpoint.api_key_env.c_str());
            if (key == nullptr || *key == '\0') {
                throw AuthError("credential env var not set: " +
                                endpoint.api_key_env);
            }
            bearer = key;
        }
        const std::string body = build_body(endpoint, prompt, params).dump();

        std::string last_error;
        for (int attempt = 1; attempt <= opts_.retry.max_attempts; ++attempt) {
            if (attempt > 1) {
                const double delay =
                    opts_.retry.backoff_base_s *
                    std::ldexp(1.0, attempt - 2); // 1x, 2x, 4x, ...
                std::this_thread::sleep_for(
                    std::chrono::duration<double>(delay));
            }
            httplib::Client cli(endpoint.base_url);
            cli.set_connection_timeout(std::chrono::duration<double>(
                endpoint.timeout_s));
            cli.set_read_timeout(
                std::chrono::duration<double>(endpoint.timeout_s));
            cli.set_write_timeout(
                std::chrono::duration<double>(endpoint.timeout_s));
            httplib::Headers headers;
            if (!bearer.empty()) {
                headers.emplace("Authorization", "Bearer " + bearer);
            }
            auto res = cli.Post(path, headers, body, "application/json");
            if (!res) {
                last_error = "transport error: " + httplib::to_string(res.error());
                continue;
            }
            if (res->status == 401 || res->status == 403) {
                throw AuthError("credential rejected (HTTP " +
                                std::to_string(res->status) + ")");
            }
            if (retryable_status(res->status)) {
                last_error = "HTTP " + std::to_string(res->status);
                continue;
            }
            if (res->status != 200) {
                throw NetworkError("HTTP " + std::to_string(res->status) +
                                   ": " + res->body.substr(0, 200));
            }
            return parse_response(endpoint, params, res->body);
        }
        throw NetworkError("request failed after " +
                           std::to_string(opts_.retry.max_attempts) +
                           " attempts; last error: " + last_error);
    }

    GatewayOptions opts_;
    CompletionCache cache_;
    std::atomic<std::uint64_t> hits_{0};
    std::atomic<std::uint64_t> misses_{0};
};

}  // namespace chronoeval::gateway
