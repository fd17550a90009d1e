#pragma once

// Adapter that turns a chat-completion style HTTP endpoint into an Agent.
//
// Wire protocol (docs/remote_protocol.md):
//   POST <endpoint path>   Content-Type: application/json
//   {"model": str, "messages": [{"role": str, "content": str}, ...],
//    "temperature": number, "seed": integer}
//   200 -> {"content": str}
// Any other status, a malformed body, a timeout or a connection failure is a
// transport failure. Transport failures are retried (default 2 retries) and
// then raised as AgentTransportError; they never count as decision errors.

#include <backtrade/agent.hpp>
#include <backtrade/decisions.hpp>
#include <backtrade/errors.hpp>
#include <backtrade/prompts.hpp>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include <chrono>
#include <condition_variable>
#include <memory>
#include <mutex>
#include <string>

namespace backtrade {

struct RemoteAgentConfig {
    std::string endpoint = "http://127.0.0.1:8080/v1/chat";
    std::string model;
    double temperature = 0.7;
    std::chrono::milliseconds timeout{120000};
    int max_context_tokens = 32768;
    int transport_retries = 2;
    int max_concurrent_requests = 4;
    PromptTemplates templates;
};

/// Splits "http://host:port/path" into the client base and the request path.
struct EndpointAddress {
    std::string base;
    std::string path;
};

inline EndpointAddress split_endpoint(const std::string& endpoint) {
    const auto scheme = endpoint.find("://");
    if (scheme == std::string::npos) {
        throw ConfigError("endpoint must include a scheme: " + endpoint);
    }
    const auto slash = endpoint.find('/', scheme + 3);
    if (slash == std::string::npos) {
        return {endpoint, "/"};
    }
    return {endpoint.substr(0, slash), endpoint.substr(slash)};
}

/// Rough token count used to enforce the context window (4 bytes per token).
inline std::size_t estimate_tokens(const nlohmann::json& messages) {
    std::size_t bytes = 0;
    for (const auto& m : messages) {
        bytes += m.at("content").get_ref<const std::string&>().size();
    }
    return (bytes + 3) / 4;
}

class RemoteAgent final : public Agent {
public:
    explicit RemoteAgent(RemoteAgentConfig config) : config_(std::move(config)), address_(split_endpoint(config_.endpoint)) {
        if (config_.timeout.count() <= 0) {
            throw ConfigError("remote agent timeout must be positive");
        }
        if (config_.model.empty()) {
            throw ConfigError("remote agent needs a model identifier");
        }
        if (config_.transport_retries < 0 || config_.max_concurrent_requests < 1 || config_.max_context_tokens < 1) {
            throw ConfigError("invalid remote agent limits");
        }
    }

    AgentIdentity identity() const override {
        return {"remote:" + config_.model, "prompts-" + config_.templates.version};
    }

    nlohmann::json selection_messages(const OverviewContext& overview) const {
        return nlohmann::json::array({message("system", config_.templates.system),
                                      message("user", render_step1(config_.templates, overview))});
    }

    nlohmann::json decision_messages(const DecisionRequest& request) const {
        auto messages = selection_messages(request.overview);
        nlohmann::json selected = nlohmann::json::array();
        for (const auto& f : request.analysis.fundamentals) {
            selected.push_back(f.ticker);
        }
        messages.push_back(message("assistant", selected.dump()));
        std::string user;
        if (!request.analysis.fundamentals.empty()) {
            user = render_step2(config_.templates, request.analysis) + "\n";
        }
        user += render_step3(config_.templates, request.feedback);
        messages.push_back(message("user", user));
        return messages;
    }

    std::string select(const SelectionRequest& request) const override {
        return complete(selection_messages(request.overview), request.seed);
    }

    std::string decide(const DecisionRequest& request) const override {
        return complete(decision_messages(request), request.seed);
    }

private:
    static nlohmann::json message(const char* role, const std::string& content) {
        return {{"role", role}, {"content", content}};
    }

    class Slot {
    public:
        explicit Slot(const RemoteAgent& owner) : owner_(owner) {
            std::unique_lock lock(owner_.mutex_);
            owner_.cv_.wait(lock, [&] { return owner_.in_flight_ < owner_.config_.max_concurrent_requests; });
            ++owner_.in_flight_;
        }
        ~Slot() {
            {
                std::lock_guard lock(owner_.mutex_);
                --owner_.in_flight_;
            }
            owner_.cv_.notify_one();
        }
        Slot(const Slot&) = delete;
        Slot& operator=(const Slot&) = delete;

    private:
        const RemoteAgent& owner_;
    };

    std::string complete(const nlohmann::json& messages, std::uint64_t seed) const {
        const auto tokens = estimate_tokens(messages);
        if (tokens > static_cast<std::size_t>(config_.max_context_tokens)) {
            throw AgentTransportError("prompt of ~" + std::to_string(tokens) + " tokens exceeds the " +
                                          std::to_string(config_.max_context_tokens) + "-token context window",
                                      0);
        }
        const nlohmann::json body{{"model", config_.model},
                                  {"messages", messages},
                                  {"temperature", config_.temperature},
                                  {"seed", seed}};
        const std::string payload = body.dump();
        const int attempts = config_.transport_retries + 1;
        std::string last_error;
        for (int attempt = 1; attempt <= attempts; ++attempt) {
            Slot slot(*this);
            httplib::Client client(address_.base);
            const auto secs = std::chrono::duration_cast<std::chrono::seconds>(config_.timeout);
            const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(config_.timeout - secs);
            client.set_connection_timeout(secs.count(), usecs.count());
            client.set_read_timeout(secs.count(), usecs.count());
            client.set_write_timeout(secs.count(), usecs.count());
            const auto res = client.Post(address_.path, payload, "application/json");
            if (!res) {
                last_error = "request failed: " + httplib::to_string(res.error());
                continue;
            }
            if (res->status != 200) {
                last_error = "endpoint returned HTTP " + std::to_string(res->status);
                continue;
            }
            try {
                const auto reply = nlohmann::json::parse(res->body);
                return reply.at("content").get<std::string>();
            } catch (const nlohmann::json::exception& e) {
                last_error = std::string("malformed response envelope: ") + e.what();
            }
        }
        throw AgentTransportError("remote agent " + config_.model + " failed after " + std::to_string(attempts) +
                                      " attempts: " + last_error,
                                  attempts);
    }

    RemoteAgentConfig config_;
    EndpointAddress address_;
    mutable std::mutex mutex_;
    mutable std::condition_variable cv_;
    mutable int in_flight_ = 0;
};

inline std::unique_ptr<Agent> remote_agent(RemoteAgentConfig config) {
    return std::make_unique<RemoteAgent>(std::move(config));
}

}  // namespace backtrade
