#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "histax/provider.hpp"

namespace histax {

// Serialized JSONL sink for the run audit log; appends are mutex-guarded.
class TranscriptWriter {
public:
    TranscriptWriter() = default;
    explicit TranscriptWriter(std::string path);
    ~TranscriptWriter();

    void append(const nlohmann::json& record);
    size_t records_written() const { return count_; }

private:
    std::string path_;
    std::mutex mu_;
    std::unique_ptr<std::ofstream> out_;
    std::atomic<size_t> count_{0};
};

struct GatewayOptions {
    int retry_max = 3;          // total attempts per request
    int retry_backoff_ms = 250; // multiplied by the attempt number
    double rate_limit_per_minute = 0.0; // 0 disables the token bucket
    int parallel_limit = 4;     // bound on concurrent in-flight requests
    std::string template_dir;   // directory of <template_id>.txt files
};

struct ChatResult {
    std::string text;
    int retries = 0; // attempts beyond the first
};

// Routes chat and embedding calls through one choke point: template
// rendering, bounded retries, rate limiting, an exact-text embedding cache,
// and the transcript log. Safe for concurrent callers.
class ProviderGateway {
public:
    ProviderGateway(std::shared_ptr<ChatProvider> chat,
                    std::shared_ptr<EmbedProvider> embed,
                    GatewayOptions options,
                    std::shared_ptr<TranscriptWriter> transcript = nullptr);

    ChatResult chat(const ProviderRequest& request);

    // chat + parse with one re-prompt on parse failure, then MalformedResponse.
    // The parser throws to signal a bad response.
    template <typename T>
    T chat_parsed(ProviderRequest request, const std::function<T(const std::string&)>& parser) {
        ChatResult first = chat(request);
        try {
            return parser(first.text);
        } catch (const std::exception&) {
        }
        request.variables["_retry"] = "1";
        ChatResult second = chat(request);
        try {
            return parser(second.text);
        } catch (const std::exception& e) {
            throw Error(ErrorCode::MalformedResponse,
                        "template '" + request.template_id + "' failed twice: " + e.what() +
                            "; last response: " + second.text.substr(0, 200));
        }
    }

    std::vector<EmbeddingVector> embed(const std::vector<std::string>& texts);
    EmbeddingVector embed_one(const std::string& text);

    // Wire-level embedding calls actually made (cache misses).
    size_t embed_wire_calls() const { return embed_wire_calls_.load(); }
    int embedding_dimension() const { return embedder_->dimension(); }

    // Renders <template_dir>/<template_id>.txt with {{var}} substitution.
    // Missing template file or unbound placeholder -> TemplateMissing.
    std::string render_template(const std::string& template_id,
                                const std::map<std::string, std::string>& variables) const;

private:
    void rate_acquire();

    std::shared_ptr<ChatProvider> chat_;
    std::shared_ptr<EmbedProvider> embedder_;
    GatewayOptions options_;
    std::shared_ptr<TranscriptWriter> transcript_;

    mutable std::mutex template_mu_;
    mutable std::map<std::string, std::string> template_cache_;

    std::mutex cache_mu_;
    std::map<std::string, std::vector<double>> embed_cache_;
    std::atomic<size_t> embed_wire_calls_{0};

    std::mutex rate_mu_;
    double rate_tokens_ = 0.0;
    std::chrono::steady_clock::time_point rate_last_;

    std::mutex flight_mu_;
    std::condition_variable flight_cv_;
    int in_flight_ = 0;

    std::atomic<uint64_t> seq_{0};
};

// Parses a chat reply that should be JSON; tolerates surrounding prose or a
// markdown code fence by extracting the outermost {...} or [...] span.
nlohmann::json parse_json_reply(const std::string& text);

} // namespace histax
