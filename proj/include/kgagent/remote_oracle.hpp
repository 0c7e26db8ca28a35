#pragma once

// Oracle client speaking JSON over HTTP. One endpoint per request kind:
//
//   POST <base>/invoke | /augment | /refine | /evaluate
//   request:  {"format_version": 1, "kind": "invoke", "payload": {...}}
//   response: {"format_version": 1, "kind": "invoke", "payload": {...}, "cost_units": 3}
//
// Payload schemas are the wire:: encoders in oracle.hpp. Timeouts, refused
// connections and 5xx answers are retried; once retries run out the call
// raises OracleUnavailable, which the engine treats as an empty response.
// Anything else wrong with an answer is a ProtocolError.

#include <chrono>
#include <cstdlib>
#include <memory>
#include <optional>
#include <string>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "errors.hpp"
#include "oracle.hpp"

namespace kgagent {

struct RemoteOracleConfig {
    /// e.g. "http://127.0.0.1:8080" or "http://host:8080/oracle"
    std::string url;
    std::chrono::milliseconds deadline{5000};
    /// Extra attempts after the first one.
    int max_retries = 2;
    std::chrono::milliseconds backoff{100};

    void validate() const {
        if (url.rfind("http://", 0) != 0 && url.rfind("https://", 0) != 0)
            throw ContractViolation("oracle url must start with http:// or https://, got '" + url + "'");
        if (deadline.count() <= 0) throw ContractViolation("oracle deadline must be positive");
        if (max_retries < 0) throw ContractViolation("oracle max_retries must be nonnegative");
        if (backoff.count() < 0) throw ContractViolation("oracle backoff must be nonnegative");
    }

    /// Overrides fields from KGAGENT_ORACLE_URL, KGAGENT_ORACLE_DEADLINE_MS
    /// and KGAGENT_ORACLE_RETRIES when they are set.
    RemoteOracleConfig with_environment() const {
        RemoteOracleConfig c = *this;
        if (const char* v = std::getenv("KGAGENT_ORACLE_URL"); v && *v) c.url = v;
        if (const char* v = std::getenv("KGAGENT_ORACLE_DEADLINE_MS"); v && *v) c.deadline = std::chrono::milliseconds(parse_int(v));
        if (const char* v = std::getenv("KGAGENT_ORACLE_RETRIES"); v && *v) c.max_retries = static_cast<int>(parse_int(v));
        return c;
    }

private:
    static long long parse_int(const char* v) {
        char* end = nullptr;
        const long long x = std::strtoll(v, &end, 10);
        if (end == v || *end != '\0') throw ContractViolation(std::string("not an integer: '") + v + "'");
        return x;
    }
};

class RemoteOracle : public Oracle {
public:
    explicit RemoteOracle(RemoteOracleConfig cfg) : cfg_(std::move(cfg)) {
        cfg_.validate();
        const auto scheme_end = cfg_.url.find("://") + 3;
        const auto path_start = cfg_.url.find('/', scheme_end);
        origin_ = cfg_.url.substr(0, path_start);
        if (path_start != std::string::npos) prefix_ = cfg_.url.substr(path_start);
        while (!prefix_.empty() && prefix_.back() == '/') prefix_.pop_back();
        client_ = std::make_unique<httplib::Client>(origin_);
        if (!client_->is_valid()) throw ContractViolation("cannot create an HTTP client for '" + origin_ + "'");
        const auto secs = static_cast<time_t>(cfg_.deadline.count() / 1000);
        const auto usecs = static_cast<time_t>((cfg_.deadline.count() % 1000) * 1000);
        client_->set_connection_timeout(secs, usecs);
        client_->set_read_timeout(secs, usecs);
        client_->set_write_timeout(secs, usecs);
    }

    const RemoteOracleConfig& config() const { return cfg_; }
    std::uint64_t cost_total() const override { return cost_; }
    /// HTTP requests sent, retries included.
    std::uint64_t requests_sent() const { return requests_; }

    InvokeResponse invoke(const InvokeRequest& req) override {
        auto r = wire::decode_invoke(round_trip(OracleKind::Invoke, wire::payload(req)));
        check_response(req, r);
        return r;
    }

    AugmentResponse augment(const AugmentRequest& req) override {
        if (req.objects.empty()) throw ContractViolation("augment: no objects offered");
        auto r = wire::decode_augment(round_trip(OracleKind::Augment, wire::payload(req)));
        check_response(req, r);
        return r;
    }

    RefineResponse refine(const RefineRequest& req) override {
        auto r = wire::decode_refine(round_trip(OracleKind::Refine, wire::payload(req)));
        check_response(req, r);
        return r;
    }

    EvaluateResponse evaluate(const EvaluateRequest& req) override {
        auto r = wire::decode_evaluate(round_trip(OracleKind::Evaluate, wire::payload(req)));
        check_response(req, r);
        return r;
    }

private:
    nlohmann::json round_trip(OracleKind kind, nlohmann::json payload) {
        const std::string path = prefix_ + "/" + to_string(kind);
        const std::string body = wire::envelope(kind, std::move(payload)).dump();
        std::string last_error;
        for (int attempt = 0; attempt <= cfg_.max_retries; ++attempt) {
            if (attempt > 0 && cfg_.backoff.count() > 0) std::this_thread::sleep_for(cfg_.backoff * attempt);
            ++requests_;
            auto res = client_->Post(path, body, "application/json");
            if (!res) {
                last_error = httplib::to_string(res.error());
                continue;
            }
            if (res->status >= 500) {
                last_error = "HTTP " + std::to_string(res->status);
                continue;
            }
            if (res->status != 200)
                throw ProtocolError(std::string(to_string(kind)) + ": HTTP " + std::to_string(res->status) + " from " + origin_ + path);
            auto j = nlohmann::json::parse(res->body, nullptr, false);
            if (j.is_discarded()) throw ProtocolError(std::string(to_string(kind)) + ": response is not valid JSON");
            auto [p, cost] = wire::open_envelope(j, kind, true);
            cost_ += cost;
            return p;
        }
        throw OracleUnavailable(std::string(to_string(kind)) + ": " + origin_ + path + " unavailable after " +
                                std::to_string(cfg_.max_retries + 1) + " attempts (" + last_error + ")");
    }

    RemoteOracleConfig cfg_;
    std::string origin_;
    std::string prefix_;
    std::unique_ptr<httplib::Client> client_;
    std::uint64_t cost_ = 0;
    std::uint64_t requests_ = 0;
};

} // namespace kgagent
