#include "pktcam/http_server.hpp"

#include <charconv>

#include <httplib.h>

#include "pktcam/preprocess.hpp"

namespace pktcam {

namespace {

constexpr std::size_t kDefaultPageSize = 50;
constexpr std::size_t kMaxPageSize = 1000;

void send_json(httplib::Response& res, int status, const Json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& message) {
    send_json(res, status, {{"error", message}});
}

template <class T>
T parse_number(const std::string& text, const std::string& name) {
    T v{};
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (text.empty() || ec != std::errc{} || ptr != text.data() + text.size()) {
        throw ValidationError("invalid value for '" + name + "': '" + text + "'");
    }
    return v;
}

template <class T>
std::optional<T> param(const httplib::Request& req, const std::string& name) {
    if (!req.has_param(name)) return std::nullopt;
    const std::string v = req.get_param_value(name);
    if constexpr (std::is_same_v<T, std::string>) {
        return v;
    } else {
        return parse_number<T>(v, name);
    }
}

std::int64_t path_id(const httplib::Request& req) { return parse_number<std::int64_t>(req.matches[1], "id"); }

/// Maps library exceptions onto status codes.
template <class Fn>
void guarded(httplib::Response& res, Fn&& fn) {
    try {
        fn();
    } catch (const TooLargeError& e) {
        send_error(res, 413, e.what());
    } catch (const PcapError& e) {
        send_error(res, 400, e.what());
    } catch (const Json::exception& e) {
        send_error(res, 400, std::string("malformed JSON: ") + e.what());
    } catch (const NotFoundError& e) {
        send_error(res, 404, e.what());
    } catch (const EmptyPatternError& e) {
        send_error(res, 404, e.what());
    } catch (const ConflictError& e) {
        send_error(res, 409, e.what());
    } catch (const ValidationError& e) {
        send_error(res, 422, e.what());
    } catch (const std::exception& e) {
        send_error(res, 500, e.what());
    }
}

} // namespace

HttpServer::HttpServer(Service& service) : service_(service), server_(std::make_unique<httplib::Server>()) {
    // One byte of headroom so the service reports the limit itself.
    server_->set_payload_max_length(service_.config().upload_limit + 1);
    server_->set_error_handler([](const httplib::Request&, httplib::Response& res) {
        if (res.body.empty()) send_error(res, res.status, httplib::status_message(res.status));
    });
    routes();
}

HttpServer::~HttpServer() { stop(); }

void HttpServer::routes() {
    auto& s = *server_;
    Service& svc = service_;

    s.Post("/captures", [&svc](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] {
            const auto name = param<std::string>(req, "name").value_or("upload.pcap");
            const auto* data = reinterpret_cast<const std::uint8_t*>(req.body.data());
            const UploadResult r = svc.upload(ByteView(data, req.body.size()), name);
            send_json(res, 201,
                      {{"capture_id", r.capture_id},
                       {"packet_count", r.packet_count},
                       {"warning", r.warning ? Json(*r.warning) : Json(nullptr)}});
        });
    });

    s.Get("/captures", [&svc](const httplib::Request&, httplib::Response& res) {
        guarded(res, [&] {
            Json out = Json::array();
            for (const auto& c : svc.store().list_captures()) {
                out.push_back({{"capture_id", c.id},
                               {"name", c.name},
                               {"linktype", c.linktype},
                               {"packet_count", c.packet_count},
                               {"warning", c.warning ? Json(*c.warning) : Json(nullptr)}});
            }
            send_json(res, 200, out);
        });
    });

    s.Post(R"(/captures/(\d+)/classify)", [&svc](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] {
            const Json body = req.body.empty() ? Json::object() : Json::parse(req.body);
            if (!body.is_object() || !body.contains("model_id") || !body["model_id"].is_string()) {
                throw ValidationError("body needs a string model_id");
            }
            std::optional<std::size_t> batch;
            if (body.contains("batch_size")) {
                if (!body["batch_size"].is_number_unsigned()) throw ValidationError("batch_size must be a positive integer");
                batch = body["batch_size"].get<std::size_t>();
            }
            send_json(res, 202, to_json(svc.classify(path_id(req), body["model_id"].get<std::string>(), batch)));
        });
    });

    s.Get(R"(/jobs/(\d+))", [&svc](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] {
            const auto id = path_id(req);
            const auto job = svc.job(id);
            if (!job) throw NotFoundError("unknown job " + std::to_string(id));
            send_json(res, 200, to_json(*job));
        });
    });

    s.Get("/packets", [&svc](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] {
            PacketFilter f;
            f.predicted_class = param<std::string>(req, "class");
            f.min_prob = param<double>(req, "min_prob");
            if (f.min_prob && !(*f.min_prob >= 0.0 && *f.min_prob <= 1.0)) throw ValidationError("min_prob must be in [0, 1]");
            f.protocol = param<std::string>(req, "protocol");
            f.ip = param<std::string>(req, "ip");
            f.port = param<std::uint16_t>(req, "port");
            f.time_from_ns = param<std::int64_t>(req, "from");
            f.time_to_ns = param<std::int64_t>(req, "to");
            f.capture_id = param<std::int64_t>(req, "capture_id");
            const auto page = param<std::size_t>(req, "page").value_or(0);
            const auto size = param<std::size_t>(req, "page_size").value_or(kDefaultPageSize);
            if (size == 0 || size > kMaxPageSize) {
                throw ValidationError("page_size must be in 1.." + std::to_string(kMaxPageSize));
            }
            const PacketPage p = svc.store().query(f, page, size);
            Json rows = Json::array();
            for (const auto& e : p.rows) rows.push_back(to_json(e));
            send_json(res, 200, {{"rows", rows}, {"total", p.total}, {"page", p.page}, {"page_size", p.page_size}});
        });
    });

    s.Get(R"(/packets/(\d+))", [&svc](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] { send_json(res, 200, svc.packet_details(path_id(req))); });
    });

    s.Get(R"(/packets/(\d+)/cam)", [&svc](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] {
            const auto name = param<std::string>(req, "colormap").value_or("jet");
            const auto map = parse_colormap(name);
            if (!map) throw ValidationError("unknown colormap '" + name + "'");
            send_json(res, 200, svc.cam(path_id(req), *map));
        });
    });

    s.Get(R"(/classes/([^/]+)/pattern)", [&svc](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] {
            const auto min_prob = param<double>(req, "min_prob").value_or(kDefaultMinProbability);
            const auto max_count = param<std::size_t>(req, "max_count").value_or(kDefaultMaxCount);
            const ClassPattern p = svc.pattern(req.matches[1], param<std::string>(req, "model_id"), min_prob, max_count);
            send_json(res, 200, to_json(p));
        });
    });
}

bool HttpServer::listen(const std::string& host, int port) { return server_->listen(host, port); }

int HttpServer::bind_any(const std::string& host) { return server_->bind_to_any_port(host); }

bool HttpServer::listen_after_bind() { return server_->listen_after_bind(); }

void HttpServer::wait_until_ready() const { server_->wait_until_ready(); }

void HttpServer::stop() {
    if (server_) server_->stop();
}

} // namespace pktcam
