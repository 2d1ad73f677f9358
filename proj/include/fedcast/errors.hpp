#pragma once

#include <stdexcept>
#include <string>

namespace fedcast {

/// Malformed experiment configuration. Carries the offending key so the CLI
/// can point at it.
class ConfigError : public std::runtime_error {
public:
    ConfigError(std::string key, const std::string& what)
        : std::runtime_error(what), key_(std::move(key)) {}
    const std::string& key() const { return key_; }

private:
    std::string key_;
};

/// CSV ingestion failure; message names the file and line.
class IngestError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Non-finite (or absurdly large) loss during training.
class DivergenceError : public std::runtime_error {
public:
    DivergenceError(int client_id, long step, const std::string& what)
        : std::runtime_error(what), client_id_(client_id), step_(step) {}
    int client_id() const { return client_id_; }
    long step() const { return step_; }

private:
    int client_id_;
    long step_;
};

/// Client/server exchange violation (e.g. parameter layout mismatch).
class ProtocolError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Pool or site configuration cannot be partitioned as requested.
class PartitionError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace fedcast
