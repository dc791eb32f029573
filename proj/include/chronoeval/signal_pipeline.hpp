#pragma once

/**
 * Trading-signal extraction from firm-day headline bundles.
 *
 * Each bundle is rendered into the headline-classification prompt, decoded
 * greedily, and the verdict is read off the first word of the response:
 * "favorable" longs (H), "unfavorable" shorts (L), anything else lands in
 * the unclear bucket (U). The first word is the first maximal run of
 * alphabetic characters, compared case-insensitively, so punctuation and
 * markup around the keyword do not matter.
 */

#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "chronoeval/dates.hpp"
#include "chronoeval/errors.hpp"
#include "chronoeval/gateway.hpp"

namespace chronoeval::signals {

using gateway::Completer;
using gateway::DecodeParams;
using gateway::ModelEndpoint;
using json = nlohmann::json;

enum class Signal { H, L, U };

inline std::string to_string(Signal s) {
    switch (s) {
        case Signal::H: return "H";
        case Signal::L: return "L";
        default: return "U";
    }
}

inline Signal signal_from_string(const std::string& s) {
    if (s == "H") return Signal::H;
    if (s == "L") return Signal::L;
    if (s == "U") return Signal::U;
    throw Error("unknown signal: " + s);
}

struct HeadlineBundle {
    std::string date; // YYYY-MM-DD
    std::string firm_id;
    std::string firm_name;
    std::vector<std::string> headlines;

    void validate() const {
        dates::require_iso_date(date);
        if (firm_id.empty()) throw Error("bundle with empty firm_id");
        if (headlines.empty()) {
            throw Error("bundle " + date + "/" + firm_id + " has no headlines");
        }
    }

    static HeadlineBundle from_json(const json& j) {
        HeadlineBundle b;
        b.date = j.at("date").get<std::string>();
        b.firm_id = j.at("firm_id").get<std::string>();
        b.firm_name = j.value("firm_name", b.firm_id);
        for (const auto& h : j.at("headlines")) {
            b.headlines.push_back(h.get<std::string>());
        }
        b.validate();
        return b;
    }
};

struct SignalRecord {
    std::string date;
    std::string firm_id;
    Signal signal = Signal::U;
    std::string first_word;
    std::string raw_response;
    std::string model_id;

    json to_json() const {
        return {{"date", date},
                {"firm_id", firm_id},
                {"signal", to_string(signal)},
                {"first_word", first_word},
                {"model_id", model_id}};
    }

    static SignalRecord from_json(const json& j) {
        SignalRecord r;
        r.date = j.at("date").get<std::string>();
        r.firm_id = j.at("firm_id").get<std::string>();
        r.signal = signal_from_string(j.at("signal").get<std::string>());
        r.first_word = j.value("first_word", "");
        r.model_id = j.value("model_id", "");
        dates::require_iso_date(r.date);
        return r;
    }
};

inline std::string render_trading_prompt(const HeadlineBundle& bundle) {
    std::string joined;
    for (std::size_t i = 0; i < bundle.headlines.size(); ++i) {
        if (i) joined += '\n';
        joined += bundle.headlines[i];
    }
    std::string prompt = "### Instruction:\n";
    prompt += "Classify this news headline as either FAVORABLE, or "
              "UNFAVORABLE, or UNCLEAR for the stock price of ";
    prompt += bundle.firm_name;
    prompt += ".\n### Input:\n";
    prompt += joined;
    prompt += "\n### Response:";
    return prompt;
}

// First maximal alphabetic run, case-insensitive. The total fallback is U;
// an empty response yields (U, "").
inline std::pair<Signal, std::string> parse_signal(const std::string& raw) {
    std::size_t begin = 0;
    while (begin < raw.size() &&
           !std::isalpha(static_cast<unsigned char>(raw[begin]))) {
        ++begin;
    }
    std::size_t end = begin;
    while (end < raw.size() &&
           std::isalpha(static_cast<unsigned char>(raw[end]))) {
        ++end;
    }
    const std::string word = raw.substr(begin, end - begin);
    std::string lower = word;
    std::transform(lower.begin(), lower.end(), lower.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    if (lower == "favorable") return {Signal::H, word};
    if (lower == "unfavorable") return {Signal::L, word};
    return {Signal::U, word};
}

// Only the first word matters, so the decode budget is tiny.
inline DecodeParams classify_params() { return gateway::greedy_params(8); }

struct QuarantinedBundle {
    HeadlineBundle bundle;
    std::string error;
};

struct ClassifyResult {
    std::vector<SignalRecord> records; // sorted by (date, firm_id)
    std::vector<QuarantinedBundle> quarantined;
};

inline ClassifyResult classify_panel(const std::vector<HeadlineBundle>& bundles,
                                     const ModelEndpoint& model,
                                     Completer& completer,
                                     int max_in_flight = 4) {
    std::set<std::pair<std::string, std::string>> seen;
    for (const auto& b : bundles) {
        b.validate();
        if (!seen.emplace(b.date, b.firm_id).second) {
            throw DuplicateKey("duplicate (date, firm) bundle: " + b.date +
                               "/" + b.firm_id);
        }
    }
    std::vector<std::string> prompts;
    prompts.reserve(bundles.size());
    for (const auto& b : bundles) prompts.push_back(render_trading_prompt(b));

    const auto batch = completer.complete_batch(model, prompts,
                                                classify_params(),
                                                max_in_flight);
    ClassifyResult out;
    std::vector<std::string> item_error(bundles.size());
    for (const auto& e : batch.errors) item_error[e.index] = e.message;
    for (std::size_t i = 0; i < bundles.size(); ++i) {
        if (!batch.records[i]) {
            out.quarantined.push_back({bundles[i], item_error[i]});
            continue;
        }
        SignalRecord r;
        r.date = bundles[i].date;
        r.firm_id = bundles[i].firm_id;
        r.raw_response = batch.records[i]->text;
        auto [sig, word] = parse_signal(r.raw_response);
        r.signal = sig;
        r.first_word = word;
        r.model_id = model.model_id;
        out.records.push_back(std::move(r));
    }
    std::sort(out.records.begin(), out.records.end(),
              [](const SignalRecord& a, const SignalRecord& b) {
                  return std::tie(a.date, a.firm_id) <
                         std::tie(b.date, b.firm_id);
              });
    return out;
}

}  // namespace chronoeval::signals
