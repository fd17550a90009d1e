#pragma once

#include <backtrade/context.hpp>

#include <cstdint>
#include <optional>
#include <string>

namespace backtrade {

struct AgentIdentity {
    std::string name;
    std::string version;

    std::string label() const { return version.empty() ? name : name + "@" + version; }

    friend bool operator==(const AgentIdentity&, const AgentIdentity&) = default;
};

struct SelectionRequest {
    const OverviewContext& overview;
    std::uint64_t seed = 0;
};

struct DecisionRequest {
    const OverviewContext& overview;
    const AnalysisContext& analysis;
    /// Validation report or schema diagnosis from the previous attempt today.
    std::optional<std::string> feedback;
    int revision = 0;
    std::uint64_t seed = 0;
};

/// A trading agent. Both calls return raw text which the engine parses:
/// `select` a JSON list of tickers for Step 2, `decide` a decision payload.
///
/// The engine calls an agent sequentially within one episode, but the same
/// instance may serve several episodes concurrently, so implementations must
/// not keep per-episode mutable state.
class Agent {
public:
    virtual ~Agent() = default;

    virtual AgentIdentity identity() const = 0;
    virtual std::string select(const SelectionRequest& request) const = 0;
    virtual std::string decide(const DecisionRequest& request) const = 0;
};

}  // namespace backtrade
