#include "histax/gateway.hpp"

#include <condition_variable>
#include <filesystem>
#include <fstream>
#include <thread>

#include "histax/jsonio.hpp"

namespace histax {

TranscriptWriter::TranscriptWriter(std::string path) : path_(std::move(path)) {
    std::filesystem::path p(path_);
    if (p.has_parent_path()) {
        std::error_code ec;
        std::filesystem::create_directories(p.parent_path(), ec);
    }
    out_ = std::make_unique<std::ofstream>(path_, std::ios::binary | std::ios::trunc);
    if (!*out_) throw Error(ErrorCode::IoFailure, "cannot open transcript '" + path_ + "'");
}

TranscriptWriter::~TranscriptWriter() = default;

void TranscriptWriter::append(const nlohmann::json& record) {
    std::lock_guard<std::mutex> lock(mu_);
    ++count_;
    if (out_) {
        *out_ << record.dump() << "\n";
        out_->flush();
    }
}

ProviderGateway::ProviderGateway(std::shared_ptr<ChatProvider> chat,
                                 std::shared_ptr<EmbedProvider> embed,
                                 GatewayOptions options,
                                 std::shared_ptr<TranscriptWriter> transcript)
    : chat_(std::move(chat)),
      embedder_(std::move(embed)),
      options_(std::move(options)),
      transcript_(std::move(transcript)),
      rate_last_(std::chrono::steady_clock::now()) {
    // bucket capacity is one second of traffic, so bursts stay bounded
    rate_tokens_ = std::max(1.0, options_.rate_limit_per_minute / 60.0);
}

std::string ProviderGateway::render_template(
    const std::string& template_id, const std::map<std::string, std::string>& variables) const {
    std::string body;
    {
        std::lock_guard<std::mutex> lock(template_mu_);
        auto it = template_cache_.find(template_id);
        if (it != template_cache_.end()) {
            body = it->second;
        } else {
            std::filesystem::path path =
                std::filesystem::path(options_.template_dir) / (template_id + ".txt");
            if (!file_exists(path.string())) {
                throw Error(ErrorCode::TemplateMissing,
                            "no template file '" + path.string() + "'");
            }
            body = read_file(path.string());
            template_cache_[template_id] = body;
        }
    }
    std::string out;
    out.reserve(body.size());
    size_t pos = 0;
    while (pos < body.size()) {
        size_t open = body.find("{{", pos);
        if (open == std::string::npos) {
            out.append(body, pos, std::string::npos);
            break;
        }
        out.append(body, pos, open - pos);
        size_t close = body.find("}}", open + 2);
        if (close == std::string::npos) {
            throw Error(ErrorCode::TemplateMissing,
                        "unterminated placeholder in template '" + template_id + "'");
        }
        std::string key = body.substr(open + 2, close - open - 2);
        auto it = variables.find(key);
        if (it == variables.end()) {
            throw Error(ErrorCode::TemplateMissing,
                        "unbound variable '" + key + "' in template '" + template_id + "'");
        }
        out.append(it->second);
        pos = close + 2;
    }
    if (variables.count("_retry")) {
        out += "\nThe previous reply could not be parsed. Respond with valid JSON only, "
               "exactly in the requested shape.";
    }
    return out;
}

void ProviderGateway::rate_acquire() {
    if (options_.rate_limit_per_minute <= 0.0) return;
    const double capacity = std::max(1.0, options_.rate_limit_per_minute / 60.0);
    std::unique_lock<std::mutex> lock(rate_mu_);
    while (true) {
        auto now = std::chrono::steady_clock::now();
        double elapsed = std::chrono::duration<double>(now - rate_last_).count();
        rate_last_ = now;
        rate_tokens_ = std::min(capacity,
                                rate_tokens_ + elapsed * options_.rate_limit_per_minute / 60.0);
        if (rate_tokens_ >= 1.0) {
            rate_tokens_ -= 1.0;
            return;
        }
        double wait_s = (1.0 - rate_tokens_) * 60.0 / options_.rate_limit_per_minute;
        lock.unlock();
        std::this_thread::sleep_for(std::chrono::duration<double>(wait_s));
        lock.lock();
    }
}

ChatResult ProviderGateway::chat(const ProviderRequest& request) {
    if (request.kind != RequestKind::Chat) {
        throw Error(ErrorCode::ConfigInvalid, "chat() called with a non-chat request");
    }
    std::string prompt = render_template(request.template_id, request.variables);

    {
        std::unique_lock<std::mutex> lock(flight_mu_);
        flight_cv_.wait(lock, [this] { return in_flight_ < options_.parallel_limit; });
        ++in_flight_;
    }
    struct FlightGuard {
        ProviderGateway* g;
        ~FlightGuard() {
            std::lock_guard<std::mutex> lock(g->flight_mu_);
            --g->in_flight_;
            g->flight_cv_.notify_one();
        }
    } guard{this};

    ChatReply reply;
    int attempts = 0;
    std::string last_error;
    while (attempts < options_.retry_max) {
        ++attempts;
        rate_acquire();
        try {
            reply = chat_->complete(request.role.model_id, request.role.temperature, prompt,
                                    request);
            break;
        } catch (const TransientProviderError& e) {
            last_error = e.what();
            if (attempts >= options_.retry_max) {
                throw Error(ErrorCode::ProviderUnavailable,
                            "request failed after " + std::to_string(attempts) +
                                " attempts: " + last_error);
            }
            if (options_.retry_backoff_ms > 0) {
                std::this_thread::sleep_for(
                    std::chrono::milliseconds(options_.retry_backoff_ms * attempts));
            }
        }
    }

    if (transcript_) {
        nlohmann::json vars(request.variables);
        transcript_->append({
            {"seq", seq_.fetch_add(1)},
            {"kind", "chat"},
            {"role", role_name(request.role.name)},
            {"model", request.role.model_id},
            {"temperature", request.role.temperature ? nlohmann::json(*request.role.temperature)
                                                     : nlohmann::json(nullptr)},
            {"template", request.template_id},
            {"variables", std::move(vars)},
            {"response", reply.text},
            {"retries", attempts - 1},
            {"latency_ms", reply.latency_ms},
        });
    }
    return {reply.text, attempts - 1};
}

std::vector<EmbeddingVector> ProviderGateway::embed(const std::vector<std::string>& texts) {
    if (texts.empty()) {
        throw Error(ErrorCode::EmptyInput, "embed() requires at least one text");
    }
    for (const auto& t : texts) {
        if (t.find_first_not_of(" \t\r\n") == std::string::npos) {
            throw Error(ErrorCode::EmptyInput, "embed() given an empty text");
        }
    }

    // Collect cache misses preserving first-appearance order.
    std::vector<std::string> misses;
    {
        std::lock_guard<std::mutex> lock(cache_mu_);
        for (const auto& t : texts) {
            if (!embed_cache_.count(t)) {
                if (std::find(misses.begin(), misses.end(), t) == misses.end()) {
                    misses.push_back(t);
                }
            }
        }
    }

    if (!misses.empty()) {
        int attempts = 0;
        std::vector<std::vector<double>> fresh;
        while (true) {
            ++attempts;
            rate_acquire();
            try {
                fresh = embedder_->embed("", misses);
                break;
            } catch (const TransientProviderError& e) {
                if (attempts >= options_.retry_max) {
                    throw Error(ErrorCode::ProviderUnavailable,
                                std::string("embedding failed after ") +
                                    std::to_string(attempts) + " attempts: " + e.what());
                }
                if (options_.retry_backoff_ms > 0) {
                    std::this_thread::sleep_for(
                        std::chrono::milliseconds(options_.retry_backoff_ms * attempts));
                }
            }
        }
        if (fresh.size() != misses.size()) {
            throw Error(ErrorCode::MalformedResponse, "embedding batch size mismatch");
        }
        int dim = embedder_->dimension();
        for (const auto& v : fresh) {
            if (dim > 0 && static_cast<int>(v.size()) != dim) {
                throw Error(ErrorCode::DimensionMismatch,
                            "provider returned vector of length " + std::to_string(v.size()));
            }
        }
        embed_wire_calls_.fetch_add(1);
        {
            std::lock_guard<std::mutex> lock(cache_mu_);
            for (size_t i = 0; i < misses.size(); ++i) {
                embed_cache_.emplace(misses[i], std::move(fresh[i]));
            }
        }
        if (transcript_) {
            transcript_->append({
                {"seq", seq_.fetch_add(1)},
                {"kind", "embed"},
                {"texts", misses},
                {"dimension", embedder_->dimension()},
            });
        }
    }

    std::vector<EmbeddingVector> out;
    out.reserve(texts.size());
    std::lock_guard<std::mutex> lock(cache_mu_);
    for (const auto& t : texts) {
        out.push_back({embed_cache_.at(t), t});
    }
    return out;
}

EmbeddingVector ProviderGateway::embed_one(const std::string& text) {
    return embed({text}).front();
}

nlohmann::json parse_json_reply(const std::string& text) {
    nlohmann::json doc = nlohmann::json::parse(text, nullptr, false);
    if (!doc.is_discarded()) return doc;
    // tolerate fenced or prose-wrapped JSON
    for (char open : {'{', '['}) {
        char close = open == '{' ? '}' : ']';
        size_t b = text.find(open);
        size_t e = text.rfind(close);
        if (b == std::string::npos || e == std::string::npos || e <= b) continue;
        doc = nlohmann::json::parse(text.substr(b, e - b + 1), nullptr, false);
        if (!doc.is_discarded()) return doc;
    }
    throw Error(ErrorCode::MalformedResponse, "reply is not JSON");
}

} // namespace histax
