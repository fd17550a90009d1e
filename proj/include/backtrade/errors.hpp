#pragma once

#include <stdexcept>
#include <string>

namespace backtrade {

/// Base of every error the library raises. Callers that only need a message
/// can catch this; the CLI maps subclasses onto exit codes.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Input / configuration problems (CLI exit code 2).
class ParseError : public Error {
public:
    using Error::Error;
};

class CompletenessError : public Error {
public:
    CompletenessError(std::string ticker, std::string date)
        : Error("missing quote for " + ticker + " on " + date),
          ticker_(std::move(ticker)),
          date_(std::move(date)) {}

    const std::string& ticker() const noexcept { return ticker_; }
    const std::string& date() const noexcept { return date_; }

private:
    std::string ticker_;
    std::string date_;
};

class UniverseMismatch : public Error {
public:
    using Error::Error;
};

class UnknownTicker : public Error {
public:
    explicit UnknownTicker(const std::string& ticker) : Error("unknown ticker: " + ticker) {}
};

class NonTradingDay : public Error {
public:
    explicit NonTradingDay(const std::string& date) : Error("not a trading day: " + date) {}
};

class NoSnapshotYet : public Error {
public:
    NoSnapshotYet(const std::string& ticker, const std::string& date)
        : Error("no fundamentals snapshot for " + ticker + " at or before " + date) {}
};

class MissingPrice : public Error {
public:
    explicit MissingPrice(const std::string& ticker) : Error("no price for held ticker " + ticker) {}
};

class NonPositivePrice : public Error {
public:
    using Error::Error;
};

class DuplicateTicker : public Error {
public:
    explicit DuplicateTicker(const std::string& ticker)
        : Error("more than one order for ticker " + ticker) {}
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class EmptyInput : public Error {
public:
    using Error::Error;
};

class TooFewRows : public Error {
public:
    using Error::Error;
};

class TooFewRuns : public Error {
public:
    using Error::Error;
};

/// Agent output that does not match the decision or selection schema. The
/// message is the diagnosis handed back to the agent on revision.
class SchemaError : public Error {
public:
    using Error::Error;
};

// Transport failures abort an episode (exit code 3).
class AgentTransportError : public Error {
public:
    AgentTransportError(const std::string& what, int attempts)
        : Error(what), attempts_(attempts) {}

    int attempts() const noexcept { return attempts_; }

private:
    int attempts_;
};

// Engine invariant violated (exit code 4). Never caused by agent output.
class InfeasibleExecution : public Error {
public:
    using Error::Error;
};

}  // namespace backtrade
