#include "pktcam/service.hpp"

#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <fstream>

#include "pktcam/classify.hpp"
#include "pktcam/nn/model_io.hpp"
#include "pktcam/parallel.hpp"
#include "pktcam/pcap.hpp"
#include "pktcam/preprocess.hpp"

namespace pktcam {

namespace {

constexpr std::size_t kInsertChunk = 1024;

std::size_t parse_size(const std::string& text, const char* what) {
    std::size_t v = 0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc{} || ptr != text.data() + text.size()) {
        throw ValidationError(std::string("invalid ") + what + " '" + text + "'");
    }
    return v;
}

int parse_port(std::size_t v) {
    if (v == 0 || v > 65535) throw ValidationError("port must be in 1..65535");
    return static_cast<int>(v);
}

} // namespace

std::optional<std::string> process_env(const char* name) {
    const char* v = std::getenv(name);
    if (!v) return std::nullopt;
    return std::string(v);
}

ServiceConfig load_service_config(const std::optional<std::filesystem::path>& file, const EnvLookup& env) {
    ServiceConfig c;
    if (file) {
        std::ifstream in(*file);
        if (!in) throw ValidationError("cannot read config file " + file->string());
        try {
            const Json j = Json::parse(in);
            if (!j.is_object()) throw ValidationError("config file must hold a JSON object");
            c.host = j.value("host", c.host);
            if (j.contains("port")) c.port = parse_port(j.at("port").get<std::size_t>());
            if (j.contains("store")) c.store_path = j.at("store").get<std::string>();
            if (j.contains("model_dir")) c.model_dir = j.at("model_dir").get<std::string>();
            c.upload_limit = j.value("upload_limit", c.upload_limit);
            c.batch_size = j.value("batch_size", c.batch_size);
            c.readers = j.value("readers", c.readers);
            c.local_networks = j.value("local_networks", c.local_networks);
        } catch (const Json::exception& e) {
            throw ValidationError("config file " + file->string() + ": " + e.what());
        }
    }
    if (auto v = env(kEnvPort)) c.port = parse_port(parse_size(*v, kEnvPort));
    if (auto v = env(kEnvStore)) c.store_path = *v;
    if (auto v = env(kEnvModelDir)) c.model_dir = *v;
    if (auto v = env(kEnvUploadLimit)) c.upload_limit = parse_size(*v, kEnvUploadLimit);
    if (c.batch_size == 0) throw ValidationError("batch_size must be positive");
    for (const auto& n : c.local_networks) (void)Cidr::parse(n);
    return c;
}

const char* to_string(JobState s) noexcept {
    switch (s) {
    case JobState::Queued: return "queued";
    case JobState::Running: return "running";
    case JobState::Done: return "done";
    case JobState::Failed: return "failed";
    }
    return "failed";
}

Json to_json(const Job& j) {
    return {{"job_id", j.id},
            {"capture_id", j.capture_id},
            {"state", to_string(j.state)},
            {"processed", j.processed},
            {"total", j.total},
            {"batch_size", j.batch_size},
            {"model_id", j.model_id},
            {"error", j.error ? Json(*j.error) : Json(nullptr)}};
}

std::optional<std::filesystem::path> ModelRegistry::resolve(const std::string& id) const {
    const bool safe = !id.empty() && id.front() != '.' && std::all_of(id.begin(), id.end(), [](char ch) {
        return std::isalnum(static_cast<unsigned char>(ch)) || ch == '.' || ch == '_' || ch == '-';
    });
    if (!safe) return std::nullopt;
    for (const auto& candidate : {dir_ / id, dir_ / (id + ".pcm")}) {
        if (std::filesystem::is_regular_file(candidate)) return candidate;
    }
    return std::nullopt;
}

bool ModelRegistry::exists(const std::string& id) const { return resolve(id).has_value(); }

std::shared_ptr<const nn::CnnModel<float>> ModelRegistry::get(const std::string& id) {
    std::lock_guard lock(mutex_);
    if (auto it = cache_.find(id); it != cache_.end()) return it->second;
    const auto path = resolve(id);
    if (!path) throw NotFoundError("unknown model '" + id + "'");
    auto model = std::make_shared<const nn::CnnModel<float>>(nn::load_model(*path));
    if (model->config.input_len != static_cast<int>(kVectorLen) || model->config.in_channels != 1) {
        throw ModelFormatError(ModelFormatErrorKind::Malformed, "model '" + id + "' does not take packet vectors");
    }
    cache_.emplace(id, model);
    return model;
}

Service::Service(ServiceConfig config)
    : config_(std::move(config)), store_(config_.store_path, config_.readers), models_(config_.model_dir) {
    for (const auto& n : config_.local_networks) networks_.cidrs.push_back(Cidr::parse(n));
    worker_ = std::thread([this] { worker_loop(); });
}

Service::~Service() {
    {
        std::lock_guard lock(jobs_mutex_);
        stopping_ = true;
    }
    jobs_cv_.notify_all();
    worker_.join();
}

UploadResult Service::upload(ByteView bytes, const std::string& name) {
    if (bytes.size() > config_.upload_limit) {
        throw TooLargeError("upload of " + std::to_string(bytes.size()) + " bytes exceeds the limit of " +
                            std::to_string(config_.upload_limit));
    }
    const PcapFile file = read_pcap(bytes);
    UploadResult result;
    result.packet_count = file.records.size();
    if (file.tail_error) result.warning = file.tail_error->what();

    std::lock_guard lock(ingest_mutex_);
    result.capture_id = store_.create_capture({0, name, file.header.linktype, file.records.size(), result.warning});
    std::int64_t next_id = store_.next_packet_id();
    for (std::size_t start = 0; start < file.records.size(); start += kInsertChunk) {
        const std::size_t end = std::min(file.records.size(), start + kInsertChunk);
        std::vector<PacketEntry> entries;
        std::vector<Bytes> raw;
        for (std::size_t i = start; i < end; ++i) {
            const PacketRecord& rec = file.records[i];
            const DecodedPacket pkt = dissect(rec, file.header.linktype, i);
            PacketEntry e = make_entry(pkt, timestamp_ns(rec, file.header.ts_resolution), networks_);
            e.id = next_id++;
            e.capture_id = result.capture_id;
            if (auto reason = should_skip(pkt)) e.skip_reason = to_string(*reason);
            entries.push_back(std::move(e));
            raw.push_back(rec.data);
        }
        store_.insert_batch(entries, raw);
    }
    return result;
}

Job Service::classify(std::int64_t capture_id, const std::string& model_id, std::optional<std::size_t> batch_size) {
    const auto capture = store_.get_capture(capture_id);
    if (!capture) throw NotFoundError("unknown capture " + std::to_string(capture_id));
    if (!models_.exists(model_id)) throw NotFoundError("unknown model '" + model_id + "'");
    const std::size_t batch = batch_size.value_or(config_.batch_size);
    if (batch == 0) throw ValidationError("batch_size must be positive");

    std::lock_guard lock(jobs_mutex_);
    for (const auto& [id, j] : jobs_) {
        if (j.capture_id == capture_id && (j.state == JobState::Queued || j.state == JobState::Running)) {
            throw ConflictError("job " + std::to_string(id) + " is already pending for capture " +
                                std::to_string(capture_id));
        }
    }
    Job job;
    job.id = next_job_id_++;
    job.capture_id = capture_id;
    job.batch_size = batch;
    job.model_id = model_id;
    job.total = capture->packet_count;
    jobs_.emplace(job.id, job);
    queue_.push_back(job.id);
    jobs_cv_.notify_all();
    return job;
}

std::optional<Job> Service::job(std::int64_t id) const {
    std::lock_guard lock(jobs_mutex_);
    auto it = jobs_.find(id);
    if (it == jobs_.end()) return std::nullopt;
    return it->second;
}

Job Service::wait(std::int64_t id) const {
    std::unique_lock lock(jobs_mutex_);
    auto it = jobs_.find(id);
    if (it == jobs_.end()) throw NotFoundError("unknown job " + std::to_string(id));
    jobs_cv_.wait(lock, [&] { return it->second.state == JobState::Done || it->second.state == JobState::Failed; });
    return it->second;
}

void Service::set_batch_hook(BatchHook hook) {
    std::lock_guard lock(jobs_mutex_);
    hook_ = std::move(hook);
}

void Service::update_job(std::int64_t id, const std::function<void(Job&)>& fn) {
    {
        std::lock_guard lock(jobs_mutex_);
        fn(jobs_.at(id));
    }
    jobs_cv_.notify_all();
}

void Service::worker_loop() {
    for (;;) {
        std::int64_t id = 0;
        {
            std::unique_lock lock(jobs_mutex_);
            jobs_cv_.wait(lock, [&] { return stopping_ || !queue_.empty(); });
            if (stopping_) return;
            id = queue_.front();
            queue_.pop_front();
        }
        try {
            run_job(id);
        } catch (const std::exception& e) {
            update_job(id, [&](Job& j) {
                j.state = JobState::Failed;
                j.error = e.what();
            });
        }
    }
}

void Service::run_job(std::int64_t id) {
    const Job snapshot = *job(id);
    const auto model = models_.get(snapshot.model_id);
    const std::vector<std::int64_t> ids = store_.packet_ids(snapshot.capture_id);
    update_job(id, [&](Job& j) {
        j.state = JobState::Running;
        j.total = ids.size();
    });

    for (std::size_t start = 0; start < ids.size(); start += snapshot.batch_size) {
        {
            std::lock_guard lock(jobs_mutex_);
            if (stopping_) throw Error("service stopped");
        }
        const std::size_t end = std::min(ids.size(), start + snapshot.batch_size);
        std::vector<Prediction> preds(end - start);
        parallel_for(preds.size(), [&](std::size_t k) {
            const PacketBundle b = store_.get_packet_bundle(ids[start + k]);
            const DecodedPacket pkt = dissect(b.raw, b.linktype, b.entry.record_index);
            Prediction& p = preds[k];
            p.packet_id = b.entry.id;
            const PacketResult r = classify_packet(*model, pkt, b.raw, true, &model_calls_);
            if (!r.classified()) {
                p.predicted_class = kNoneLabel;
                return;
            }
            p.predicted_class = model->class_names[static_cast<std::size_t>(r.class_id)];
            p.probability = r.probability;
            p.cam = StoredCam{r.class_id, r.cam->valid_len, r.cam->values};
        });
        store_.commit_predictions(preds, snapshot.model_id);
        ++generation_;
        Job progressed;
        BatchHook hook;
        update_job(id, [&](Job& j) {
            j.processed = end;
            progressed = j;
            hook = hook_;
        });
        if (hook) hook(progressed);
    }
    update_job(id, [&](Job& j) {
        j.processed = ids.size();
        j.state = JobState::Done;
        last_model_ = j.model_id;
    });
}

Json Service::packet_details(std::int64_t id) const {
    const PacketBundle b = store_.get_packet_bundle(id);
    const DecodedPacket pkt = dissect(b.raw, b.linktype, b.entry.record_index);
    Json out = {{"entry", to_json(b.entry)},
                {"linktype", b.linktype},
                {"captured_len", b.raw.size()},
                {"details", details_tree(pkt)},
                {"hex", hex_string(b.raw)},
                {"has_cam", b.cam.has_value()}};
    if (!should_skip(pkt)) {
        const FeatureVector v = vectorize(pkt, b.raw);
        out["valid_len"] = v.valid_len;
        // Record offset of each vector position, null for inserted zeros.
        Json origin = Json::array();
        for (std::size_t i = 0; i < v.valid_len; ++i) {
            const Origin& o = v.origin[i];
            origin.push_back(o.kind == Origin::Kind::ZeroPad ? Json(nullptr) : Json(o.offset));
        }
        out["vector_origin"] = origin;
    }
    return out;
}

Json Service::cam(std::int64_t id, Colormap map) const {
    const PacketBundle b = store_.get_packet_bundle(id);
    if (!b.cam || !b.entry.probability) throw NotFoundError("packet " + std::to_string(id) + " has no CAM");
    Cam c;
    c.class_id = b.cam->class_id;
    c.values = b.cam->values;
    c.rel = relative_scale(c.values);
    c.valid_len = b.cam->valid_len;
    Json out = cam_payload(c, map);
    out["packet_id"] = id;
    out["predicted_class"] = *b.entry.predicted_class;
    out["probability"] = *b.entry.probability;
    return out;
}

ClassPattern Service::pattern(const std::string& class_name, const std::optional<std::string>& model_id,
                              double min_prob, std::size_t max_count) {
    if (!(min_prob >= 0.0 && min_prob <= 1.0)) throw ValidationError("min_prob must be in [0, 1]");
    if (max_count == 0) throw ValidationError("max_count must be positive");
    std::string model;
    if (model_id) {
        model = *model_id;
    } else {
        std::lock_guard lock(jobs_mutex_);
        if (!last_model_) throw NotFoundError("no classification has finished yet");
        model = *last_model_;
    }

    const PatternKey key{class_name, model, min_prob, max_count};
    const std::uint64_t gen = generation_.load();
    {
        std::lock_guard lock(pattern_mutex_);
        if (auto it = pattern_cache_.find(key); it != pattern_cache_.end() && it->second.first == gen) {
            return it->second.second;
        }
    }

    const auto cams = store_.class_cams(class_name, model, min_prob, max_count);
    std::vector<CamSample> samples;
    samples.reserve(cams.size());
    for (const auto& c : cams) {
        Cam cam;
        cam.class_id = c.cam.class_id;
        cam.values = c.cam.values;
        cam.valid_len = c.cam.valid_len;
        samples.push_back({std::move(cam), c.probability});
    }
    ClassPattern p = average_cam(samples, min_prob, max_count);
    p.class_name = class_name;
    const PacketBundle rep = store_.get_packet_bundle(cams.front().packet_id);
    p.top_ranges = map_impacting_bytes(p, dissect(rep.raw, rep.linktype), rep.raw);

    std::lock_guard lock(pattern_mutex_);
    pattern_cache_[key] = {gen, p};
    return p;
}

} // namespace pktcam
