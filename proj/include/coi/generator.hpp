#pragma once

// Text generation providers: OpenAI-compatible remote chat and scripted mocks, with an
// optional content-hash response cache in front.

#include <atomic>
#include <chrono>
#include <ctime>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "coi/call_cache.hpp"
#include "coi/clauses.hpp"
#include "coi/error.hpp"
#include "coi/hashing.hpp"
#include "coi/http_client.hpp"
#include "coi/templates.hpp"

namespace coi {

struct Decoding {
    double temperature = 0.5;
    double top_p = 0.0;

    friend bool operator==(const Decoding&, const Decoding&) = default;
};

/// One chat-completion request. The prompt travels as a single user message.
struct ChatRequest {
    std::string model_id;
    std::string prompt;
    Decoding decoding;

    nlohmann::json to_json() const {
        return {{"model", model_id},
                {"messages", nlohmann::json::array({{{"role", "user"}, {"content", prompt}}})},
                {"temperature", decoding.temperature},
                {"top_p", decoding.top_p}};
    }

    /// SHA-256 over the canonical request body.
    std::string hash() const { return sha256_hex(to_json().dump()); }
};

struct Completion {
    std::string text;
    std::string created_at;  // ISO-8601 UTC
};

inline std::string utc_now_iso8601() {
    auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

class GeneratorProvider {
public:
    virtual ~GeneratorProvider() = default;
    virtual Completion complete(const ChatRequest& request) = 0;
    /// Requests that actually left the process (cache hits excluded).
    virtual std::size_t requests() const = 0;
};

class RemoteChatGenerator final : public GeneratorProvider {
public:
    RemoteChatGenerator(HttpEndpoint endpoint, RetryPolicy retry = {})
        : endpoint_(std::move(endpoint)), retry_(retry) {}

    Completion complete(const ChatRequest& request) override {
        auto response = post_json(endpoint_, "/chat/completions", request.to_json(), retry_);
        ++requests_;
        try {
            const auto& content = response.at("choices").at(0).at("message").at("content");
            return {content.is_null() ? std::string() : content.get<std::string>(),
                    utc_now_iso8601()};
        } catch (const nlohmann::json::exception& e) {
            throw ProviderError(std::string("unexpected chat response: ") + e.what(), 1);
        }
    }

    std::size_t requests() const override { return requests_; }

private:
    HttpEndpoint endpoint_;
    RetryPolicy retry_;
    std::atomic<std::size_t> requests_{0};
};

/// Deterministic mock generator. Looks the request hash up in a response table and,
/// on a miss, applies the configured fallback.
class ScriptedGenerator final : public GeneratorProvider {
public:
    enum class Fallback {
        none,          // miss is an error
        fixed,         // return `fixed_text`
        echo_context,  // restate complete sentences from the prompt's text chunks
        qa_heuristic,  // answer Q&A extraction prompts from the paragraph's clauses
    };

    struct Options {
        std::map<std::string, std::string> table;  // request hash -> response
        Fallback fallback = Fallback::none;
        std::string fixed_text;
        std::size_t sentences_per_block = 2;
        std::vector<std::string> filler;  // sentences appended to every echo answer
        std::string timestamp = "1970-01-01T00:00:00Z";
    };

    explicit ScriptedGenerator(Options opts) : opts_(std::move(opts)) {}

    /// Loads a `{hash: response}` JSON object.
    static std::map<std::string, std::string> load_table(const std::string& path) {
        return nlohmann::json::parse(read_file(path)).get<std::map<std::string, std::string>>();
    }

    Completion complete(const ChatRequest& request) override {
        std::lock_guard lock(mutex_);
        ++requests_;
        if (auto it = opts_.table.find(request.hash()); it != opts_.table.end()) {
            return {it->second, opts_.timestamp};
        }
        switch (opts_.fallback) {
            case Fallback::fixed: return {opts_.fixed_text, opts_.timestamp};
            case Fallback::echo_context: return {echo_context(request.prompt), opts_.timestamp};
            case Fallback::qa_heuristic: return {qa_heuristic(request.prompt), opts_.timestamp};
            case Fallback::none: break;
        }
        throw ProviderError("scripted generator has no response for request " + request.hash(), 1);
    }

    std::size_t requests() const override { return requests_; }

    static Fallback fallback_from_string(const std::string& s) {
        if (s == "none") return Fallback::none;
        if (s == "fixed") return Fallback::fixed;
        if (s == "echo_context") return Fallback::echo_context;
        if (s == "qa_heuristic") return Fallback::qa_heuristic;
        throw InvalidArgument("unknown scripted fallback: " + s);
    }

private:
    static bool is_header(const std::string& line) {
        return line.rfind("Page ", 0) == 0 || line.rfind("Implicit question ", 0) == 0 ||
               line == "Context:";
    }

    std::string echo_context(const std::string& prompt) const {
        std::vector<std::string> parts;
        static constexpr std::string_view marker = "\nText chunks:\n";
        auto pos = prompt.find(marker);
        if (pos != std::string::npos) {
            // Blocks are runs of non-header lines; headers carry the page span.
            std::string page_ref;
            std::string block;
            auto flush = [&] {
                auto sentences = split_sentences(block);
                std::size_t taken = 0;
                // The first sentence of a window is usually cut off at its start.
                for (std::size_t i = 1; i < sentences.size() && taken < opts_.sentences_per_block;
                     ++i) {
                    if (!detail::ends_sentence(sentences[i].back())) continue;
                    std::string s = join(sentences[i], " ");
                    if (!page_ref.empty()) s.insert(s.size() - 1, " [p. " + page_ref + "]");
                    parts.push_back(std::move(s));
                    ++taken;
                }
                block.clear();
            };
            std::size_t i = pos + marker.size();
            while (i <= prompt.size()) {
                auto nl = prompt.find('\n', i);
                std::string line = prompt.substr(i, nl == std::string::npos ? nl : nl - i);
                if (is_header(line)) {
                    flush();
                    if (line.rfind("Page ", 0) == 0) {
                        page_ref = line.substr(5, line.size() - 6);
                    }
                } else {
                    block += line;
                    block += '\n';
                }
                if (nl == std::string::npos) break;
                i = nl + 1;
            }
            flush();
        }
        for (const auto& f : opts_.filler) parts.push_back(f);
        if (parts.empty()) return opts_.fixed_text;
        return join(parts, " ");
    }

    static std::string qa_heuristic(const std::string& prompt) {
        auto pos = prompt.find(templates::qa_paragraph_marker);
        if (pos == std::string::npos) return {};
        auto paragraph = prompt.substr(pos + templates::qa_paragraph_marker.size());
        std::string out;
        for (const auto& c : RuleBasedClauseExtractor{}.extract(paragraph)) {
            if (c.object.empty()) continue;
            auto subject = c.subject;
            for (std::string_view det : {"A ", "An ", "The "}) {
                if (subject.rfind(det, 0) == 0) subject[0] = static_cast<char>(subject[0] + ('a' - 'A'));
            }
            out += "- What " + c.predicate + " " + subject + "? " + c.object + ".\n";
        }
        return out;
    }

    Options opts_;
    std::mutex mutex_;
    std::size_t requests_ = 0;
};

/// Serves repeated requests from a CallCache. In offline mode a miss is an error and
/// the wrapped provider is never contacted.
class CachingGenerator final : public GeneratorProvider {
public:
    CachingGenerator(std::shared_ptr<GeneratorProvider> inner, std::shared_ptr<CallCache> cache,
                     bool offline = false)
        : inner_(std::move(inner)), cache_(std::move(cache)), offline_(offline) {}

    Completion complete(const ChatRequest& request) override {
        auto key = request.hash();
        if (auto hit = cache_->get(key)) {
            auto j = nlohmann::json::parse(*hit);
            return {j.at("text").get<std::string>(), j.at("created_at").get<std::string>()};
        }
        if (offline_) throw ProviderError("generation cache miss while offline", 0);
        auto c = inner_->complete(request);
        cache_->put(key, nlohmann::json{{"text", c.text}, {"created_at", c.created_at}}.dump());
        return c;
    }

    std::size_t requests() const override { return inner_ ? inner_->requests() : 0; }

private:
    std::shared_ptr<GeneratorProvider> inner_;
    std::shared_ptr<CallCache> cache_;
    bool offline_;
};

struct GeneratorProviderConfig {
    enum class Kind { remote, scripted };
    Kind kind = Kind::scripted;
    std::string model_id;
    HttpEndpoint endpoint;
    RetryPolicy retry;
    ScriptedGenerator::Options script;
};

inline std::shared_ptr<GeneratorProvider> make_generator(const GeneratorProviderConfig& cfg) {
    if (cfg.kind == GeneratorProviderConfig::Kind::remote) {
        return std::make_shared<RemoteChatGenerator>(cfg.endpoint, cfg.retry);
    }
    return std::make_shared<ScriptedGenerator>(cfg.script);
}

}  // namespace coi
