#pragma once

#include <memory>
#include <string>

#include <json.hpp>

#include "deid/annotate/engine.hpp"
#include "deid/gateway/config.hpp"
#include "deid/gateway/store.hpp"

namespace deid::gateway {

class PipelineRunner;

nlohmann::ordered_json coverage_to_json(const annotate::CoverageReport& report);

/// Session as served to clients: everything except the bulky detections,
/// which are summarized by count.
nlohmann::ordered_json session_view(const AnnotationSession& session);

/// HTTP+JSON API for the annotation client. Every mutating request carries
/// {"revision":R}; a stale R is answered with 409. Other error statuses:
/// 400 malformed request, 404 unknown session or resource, 422 a request the
/// current pass state or domain rules forbid, 500 anything else.
class ApiServer {
public:
    ApiServer(SessionStore& store, GatewayConfig config, PipelineRunner* runner = nullptr);
    ~ApiServer();

    ApiServer(const ApiServer&) = delete;
    ApiServer& operator=(const ApiServer&) = delete;

    /// Binds without serving; port 0 picks a free port. Returns the port.
    int bind(const std::string& host, int port);
    /// Serves until stop(). Requires bind().
    void serve();
    void stop();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace deid::gateway
