#pragma once

#include <memory>

#include "pktcam/service.hpp"

namespace httplib {
class Server;
}

namespace pktcam {

/**
 * REST/JSON binding of a Service.
 *
 *   POST /captures                  PCAP body, optional ?name=
 *   GET  /captures
 *   POST /captures/{id}/classify    {"model_id": ..., "batch_size": ...}
 *   GET  /jobs/{id}
 *   GET  /packets                   ?class&min_prob&protocol&ip&port&from&to&capture_id&page&page_size
 *   GET  /packets/{id}
 *   GET  /packets/{id}/cam          ?colormap=jet|bwr
 *   GET  /classes/{name}/pattern    ?min_prob&max_count&model_id
 *
 * Errors carry {"error": message} with 400 (unreadable input), 404, 409, 413 or 422 (bad parameter).
 */
class HttpServer {
public:
    explicit HttpServer(Service& service);
    ~HttpServer();
    HttpServer(const HttpServer&) = delete;
    HttpServer& operator=(const HttpServer&) = delete;

    /// Binds host:port and serves until stop(); false when binding fails.
    bool listen(const std::string& host, int port);
    /// Binds an ephemeral port and returns it, or -1; call listen_after_bind() next.
    int bind_any(const std::string& host);
    bool listen_after_bind();
    void wait_until_ready() const;
    void stop();

private:
    void routes();
    Service& service_;
    std::unique_ptr<httplib::Server> server_;
};

} // namespace pktcam
