#include <condition_variable>
#include <mutex>
#include <thread>

#include <doctest.h>

#include "pktcam/http_server.hpp"
#include "service_support.hpp"

// After Eigen: resolv.h defines a _res macro.
#include <httplib.h>

using namespace pktcam;

namespace {

struct Progress {
    std::mutex mutex;
    std::vector<std::size_t> seen;
};

std::vector<std::tuple<std::string, std::optional<double>, bool>> predictions(Store& store, std::int64_t capture) {
    PacketFilter f;
    f.capture_id = capture;
    std::vector<std::tuple<std::string, std::optional<double>, bool>> out;
    for (const auto& r : store.query(f, 0, 100000).rows) {
        out.emplace_back(r.predicted_class.value_or("<absent>"), r.probability, r.has_cam);
    }
    return out;
}

/// Blocks the worker inside the first batch hook until released.
struct Gate {
    std::mutex m;
    std::condition_variable cv;
    bool entered = false;
    bool open = false;

    void hold() {
        std::unique_lock lock(m);
        entered = true;
        cv.notify_all();
        cv.wait(lock, [&] { return open; });
    }
    void wait_entered() {
        std::unique_lock lock(m);
        cv.wait(lock, [&] { return entered; });
    }
    void release() {
        std::lock_guard lock(m);
        open = true;
        cv.notify_all();
    }
};

} // namespace

TEST_CASE("config file and environment overrides") {
    test::TempDir dir("svc");
    const auto file = dir / "config.json";
    std::ofstream(file) << R"({"port": 9000, "store": "a.sqlite", "model_dir": "m", "upload_limit": 10,
                              "batch_size": 64, "local_networks": ["10.0.0.0/8"]})";
    auto none = [](const char*) -> std::optional<std::string> { return std::nullopt; };
    auto c = load_service_config(file, none);
    CHECK(c.port == 9000);
    CHECK(c.store_path == "a.sqlite");
    CHECK(c.model_dir == "m");
    CHECK(c.upload_limit == 10);
    CHECK(c.batch_size == 64);
    CHECK(c.local_networks == std::vector<std::string>{"10.0.0.0/8"});

    auto env = [](const char* name) -> std::optional<std::string> {
        const std::string n = name;
        if (n == kEnvPort) return "9100";
        if (n == kEnvStore) return "b.sqlite";
        if (n == kEnvModelDir) return "models2";
        if (n == kEnvUploadLimit) return "2048";
        return std::nullopt;
    };
    c = load_service_config(file, env);
    CHECK(c.port == 9100);
    CHECK(c.store_path == "b.sqlite");
    CHECK(c.model_dir == "models2");
    CHECK(c.upload_limit == 2048);

    CHECK(load_service_config(std::nullopt, none).batch_size == 128);
    auto bad_port = [](const char* name) -> std::optional<std::string> {
        return std::string(name) == kEnvPort ? std::optional<std::string>("http") : std::nullopt;
    };
    CHECK_THROWS_AS(load_service_config(std::nullopt, bad_port), ValidationError);
    std::ofstream(dir / "bad.json") << R"({"local_networks": ["10.0.0.0/40"]})";
    CHECK_THROWS_AS(load_service_config(dir / "bad.json", none), ValidationError);
    CHECK_THROWS_AS(load_service_config(dir / "missing.json", none), ValidationError);
}

TEST_CASE("upload parses captures and keeps valid prefixes") {
    test::TempDir dir("svc");
    Service svc(test::service_config(dir));
    const auto three = test::read_bytes(test::fixture("three_le_us.pcap"));
    const auto r = svc.upload(three, "three");
    CHECK(r.packet_count == 3);
    CHECK_FALSE(r.warning);
    CHECK(svc.store().packet_ids(r.capture_id).size() == 3);

    const auto t = svc.upload(test::read_bytes(test::fixture("truncated.pcap")), "t");
    CHECK(t.packet_count == 1);
    CHECK(t.warning);

    CHECK_THROWS_AS(svc.upload(Bytes{}, "empty"), PcapError);
    Bytes big(svc.config().upload_limit + 1, 0);
    CHECK_THROWS_AS(svc.upload(big, "big"), TooLargeError);

    // Unclassified rows carry no class; skipped rows record why.
    PacketFilter f;
    f.capture_id = r.capture_id;
    const auto rows = svc.store().query(f, 0, 10).rows;
    REQUIRE(rows.size() == 3);
    for (const auto& row : rows) CHECK_FALSE(row.predicted_class);
    CHECK(rows[0].skip_reason == "NoPayloadControl");
    CHECK(rows[2].skip_reason == "NonIp");
}

TEST_CASE("classification commits batch by batch") {
    test::TempDir dir("svc");
    auto cfg = test::service_config(dir);
    const auto model = test::save_tiny_model(cfg.model_dir);
    Service svc(cfg);
    Progress progress;
    svc.set_batch_hook([&](const Job& j) {
        std::lock_guard lock(progress.mutex);
        progress.seen.push_back(j.processed);
        // Everything reported as processed is already visible.
        PacketFilter f;
        f.capture_id = j.capture_id;
        std::size_t classified = 0;
        for (const auto& r : svc.store().query(f, 0, 1000).rows) classified += r.predicted_class.has_value();
        CHECK(classified == j.processed);
    });
    const auto up = svc.upload(test::mixed_capture(250, 50), "mixed");
    REQUIRE(up.packet_count == 300);

    const Job queued = svc.classify(up.capture_id, model, 128);
    CHECK(queued.total == 300);
    const Job done = svc.wait(queued.id);
    CHECK(done.state == JobState::Done);
    CHECK(done.processed == 300);
    CHECK(progress.seen == std::vector<std::size_t>{128, 256, 300});
    CHECK(svc.model_calls() == 250);

    const auto first = predictions(svc.store(), up.capture_id);
    std::size_t none = 0;
    for (const auto& [cls, prob, has_cam] : first) {
        if (cls == "None") {
            ++none;
            CHECK_FALSE(prob);
            CHECK_FALSE(has_cam);
        } else {
            CHECK((cls == "alpha" || cls == "beta"));
            REQUIRE(prob);
            CHECK((*prob >= 0.5 && *prob <= 1.0));
            CHECK(has_cam);
        }
    }
    CHECK(none == 50);

    const auto some_id = svc.store().packet_ids(up.capture_id).front();
    const auto cam_before = svc.store().get_cam(some_id);
    svc.set_batch_hook([&](const Job& j) {
        std::lock_guard lock(progress.mutex);
        progress.seen.push_back(j.processed);
    });
    const Job again = svc.wait(svc.classify(up.capture_id, model).id);
    CHECK(again.state == JobState::Done);
    CHECK(predictions(svc.store(), up.capture_id) == first);
    CHECK(svc.store().get_cam(some_id)->values == cam_before->values);
    CHECK(progress.seen.size() == 6);
}

TEST_CASE("skipped packets never reach the model") {
    test::TempDir dir("svc");
    auto cfg = test::service_config(dir);
    const auto model = test::save_tiny_model(cfg.model_dir);
    Service svc(cfg);
    const auto up = svc.upload(test::mixed_capture(0, 40), "syn");
    const Job done = svc.wait(svc.classify(up.capture_id, model, 16).id);
    CHECK(done.state == JobState::Done);
    CHECK(done.processed == 40);
    CHECK(svc.model_calls() == 0);
    for (const auto& [cls, prob, has_cam] : predictions(svc.store(), up.capture_id)) {
        CHECK(cls == "None");
        CHECK_FALSE(prob);
        CHECK_FALSE(has_cam);
    }
}

TEST_CASE("classify validation and conflicts") {
    test::TempDir dir("svc");
    auto cfg = test::service_config(dir);
    const auto model = test::save_tiny_model(cfg.model_dir);
    Service svc(cfg);
    const auto up = svc.upload(test::mixed_capture(20, 0), "c");
    CHECK_THROWS_AS(svc.classify(999, model), NotFoundError);
    CHECK_THROWS_AS(svc.classify(up.capture_id, "nope"), NotFoundError);
    CHECK_THROWS_AS(svc.classify(up.capture_id, "../models/tiny"), NotFoundError);
    CHECK_THROWS_AS(svc.classify(up.capture_id, model, 0), ValidationError);
    CHECK_FALSE(svc.job(12345));

    Gate gate;
    svc.set_batch_hook([&](const Job&) { gate.hold(); });
    const Job j = svc.classify(up.capture_id, model, 8);
    gate.wait_entered();
    CHECK_THROWS_AS(svc.classify(up.capture_id, model), ConflictError);
    CHECK(svc.job(j.id)->state == JobState::Running);
    CHECK(svc.job(j.id)->processed == 8);
    svc.set_batch_hook({});
    gate.release();
    CHECK(svc.wait(j.id).state == JobState::Done);
}

TEST_CASE("a corrupt model fails the job") {
    test::TempDir dir("svc");
    auto cfg = test::service_config(dir);
    std::filesystem::create_directories(cfg.model_dir);
    std::ofstream(cfg.model_dir / "broken.pcm") << "not a model";
    Service svc(cfg);
    const auto up = svc.upload(test::mixed_capture(5, 0), "c");
    const Job j = svc.wait(svc.classify(up.capture_id, "broken").id);
    CHECK(j.state == JobState::Failed);
    CHECK(j.error);
    CHECK(j.processed == 0);
}

TEST_CASE("cam and pattern reads") {
    test::TempDir dir("svc");
    auto cfg = test::service_config(dir);
    const auto model = test::save_tiny_model(cfg.model_dir);
    Service svc(cfg);
    const auto up = svc.upload(test::mixed_capture(60, 5), "c");
    CHECK_THROWS_AS(svc.pattern("alpha", std::nullopt, 0.0, 10), NotFoundError);
    svc.wait(svc.classify(up.capture_id, model).id);

    const auto ids = svc.store().packet_ids(up.capture_id);
    const Json cam = svc.cam(ids.front(), Colormap::Jet);
    CHECK(cam["abs"].size() == kVectorLen);
    for (const auto& v : cam["rel"]) CHECK((v.get<double>() >= 0.0 && v.get<double>() <= 1.0));
    CHECK(cam["colors"].size() == cam["valid_len"].get<std::size_t>());
    CHECK(cam["grid_dims"]["rows"] == kCamRows);
    CHECK(cam["grid_dims"]["cols"] == kCamCols);
    CHECK_THROWS_AS(svc.cam(ids.back(), Colormap::Bwr), NotFoundError); // SYN: no CAM

    const Json details = svc.packet_details(ids.front());
    CHECK(details["details"].size() >= 3);
    CHECK(details["vector_origin"].size() == details["valid_len"].get<std::size_t>());
    CHECK_THROWS_AS(svc.packet_details(987654), NotFoundError);

    const std::string cls = *svc.store().get_packet_bundle(ids.front()).entry.predicted_class;
    const ClassPattern p = svc.pattern(cls, std::nullopt, 0.0, 10);
    CHECK(p.sample_count == std::min<std::size_t>(10, svc.store().class_cams(cls, model, 0.0, 100).size()));
    CHECK(p.mean_cam.size() == kVectorLen);
    CHECK_FALSE(p.top_ranges.empty());
    const ClassPattern cached = svc.pattern(cls, model, 0.0, 10);
    CHECK(cached.mean_cam == p.mean_cam);
    CHECK_THROWS_AS(svc.pattern(cls, model, 1.0, 10), EmptyPatternError);
    CHECK_THROWS_AS(svc.pattern(cls, model, 1.5, 10), ValidationError);
}

TEST_CASE("http endpoints") {
    test::TempDir dir("svc");
    auto cfg = test::service_config(dir);
    cfg.upload_limit = 1u << 20;
    const auto model = test::save_tiny_model(cfg.model_dir);
    Service svc(cfg);
    HttpServer server(svc);
    const int port = server.bind_any("127.0.0.1");
    REQUIRE(port > 0);
    std::thread thread([&] { server.listen_after_bind(); });
    server.wait_until_ready();
    httplib::Client client("127.0.0.1", port);

    auto post = [&](const std::string& path, const std::string& body, const char* type) {
        auto res = client.Post(path, body, type);
        REQUIRE(res);
        return std::make_pair(res->status, Json::parse(res->body));
    };
    auto get = [&](const std::string& path) {
        auto res = client.Get(path);
        REQUIRE(res);
        return std::make_pair(res->status, Json::parse(res->body));
    };

    const auto three = test::read_bytes(test::fixture("three_le_us.pcap"));
    auto [s1, b1] = post("/captures?name=three", std::string(three.begin(), three.end()), "application/octet-stream");
    CHECK(s1 == 201);
    CHECK(b1["packet_count"] == 3);
    CHECK(post("/captures", "", "application/octet-stream").first == 400);
    CHECK(post("/captures", std::string(cfg.upload_limit + 10, 'x'), "application/octet-stream").first == 413);

    const Bytes mixed = test::mixed_capture(200, 20);
    auto [s2, b2] = post("/captures", std::string(mixed.begin(), mixed.end()), "application/octet-stream");
    REQUIRE(s2 == 201);
    const auto cap = b2["capture_id"].get<std::int64_t>();
    const std::string classify = "/captures/" + std::to_string(cap) + "/classify";

    CHECK(post(classify, "{", "application/json").first == 400);
    CHECK(post(classify, R"({"batch_size": 4})", "application/json").first == 422);
    CHECK(post(classify, R"({"model_id": "missing"})", "application/json").first == 404);
    CHECK(post("/captures/999/classify", R"({"model_id": "tiny"})", "application/json").first == 404);

    Gate gate;
    svc.set_batch_hook([&](const Job&) { gate.hold(); });
    auto [s3, job] = post(classify, R"({"model_id": "tiny", "batch_size": 64})", "application/json");
    CHECK(s3 == 202);
    gate.wait_entered();
    CHECK(post(classify, R"({"model_id": "tiny"})", "application/json").first == 409);
    svc.set_batch_hook({});
    gate.release();

    const std::string job_path = "/jobs/" + std::to_string(job["job_id"].get<std::int64_t>());
    std::size_t last = 0;
    for (;;) {
        auto [s, j] = get(job_path);
        REQUIRE(s == 200);
        const auto processed = j["processed"].get<std::size_t>();
        CHECK(processed >= last);
        CHECK((processed % 64 == 0 || processed == 220));
        last = processed;
        if (j["state"] == "done") {
            CHECK(processed == 220);
            break;
        }
        REQUIRE(j["state"] != "failed");
        std::this_thread::sleep_for(std::chrono::milliseconds(5));
    }
    CHECK(get("/jobs/424242").first == 404);

    auto [s4, page] = get("/packets?page_size=7&capture_id=" + std::to_string(cap));
    CHECK(s4 == 200);
    CHECK(page["rows"].size() == 7);
    CHECK(page["total"] == 220);
    CHECK(get("/packets?class=None&capture_id=" + std::to_string(cap)).second["total"] == 20);
    CHECK(get("/packets?protocol=tcp").second["total"] == 222);
    CHECK(get("/packets?port=abc").first == 422);
    CHECK(get("/packets?port=70000").first == 422);
    CHECK(get("/packets?min_prob=2").first == 422);
    CHECK(get("/packets?page_size=0").first == 422);

    const auto first_id = page["rows"][0]["id"].get<std::int64_t>();
    auto [s5, details] = get("/packets/" + std::to_string(first_id));
    CHECK(s5 == 200);
    CHECK(details["has_cam"] == true);
    CHECK(get("/packets/999999").first == 404);

    auto [s6, cam] = get("/packets/" + std::to_string(first_id) + "/cam?colormap=bwr");
    CHECK(s6 == 200);
    CHECK(cam["colormap"] == "bwr");
    CHECK(get("/packets/" + std::to_string(first_id) + "/cam?colormap=viridis").first == 422);
    CHECK(get("/packets/1/cam").first == 404); // first fixture packet: never classified

    const std::string cls = details["entry"]["predicted_class"].get<std::string>();
    auto [s7, pattern] = get("/classes/" + cls + "/pattern?min_prob=0&max_count=5");
    CHECK(s7 == 200);
    CHECK(pattern["sample_count"].get<std::size_t>() <= 5);
    CHECK(pattern["min_prob"] == 0.0);
    CHECK(get("/classes/" + cls + "/pattern").second.contains("error") == (get("/classes/" + cls + "/pattern").first == 404));
    CHECK(get("/classes/nothing/pattern?min_prob=0").first == 404);
    CHECK(get("/classes/" + cls + "/pattern?max_count=x").first == 422);

    server.stop();
    thread.join();
}
