#pragma once

#include <atomic>
#include <condition_variable>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include "pktcam/cam.hpp"
#include "pktcam/error.hpp"
#include "pktcam/json_io.hpp"
#include "pktcam/nn/model.hpp"
#include "pktcam/store.hpp"

namespace pktcam {

struct ServiceConfig {
    std::string host = "127.0.0.1";
    int port = 8080;
    std::filesystem::path store_path = "pktcam.sqlite";
    std::filesystem::path model_dir = "models";
    std::size_t upload_limit = 256u << 20;
    std::size_t batch_size = 128;
    std::size_t readers = 4;
    std::vector<std::string> local_networks; ///< CIDR strings
};

/// Names of the environment variables that override the config file.
inline constexpr const char* kEnvPort = "PKTCAM_PORT";
inline constexpr const char* kEnvStore = "PKTCAM_STORE";
inline constexpr const char* kEnvModelDir = "PKTCAM_MODEL_DIR";
inline constexpr const char* kEnvUploadLimit = "PKTCAM_UPLOAD_LIMIT";

using EnvLookup = std::function<std::optional<std::string>(const char*)>;
std::optional<std::string> process_env(const char* name);

/**
 * JSON config file (keys: host, port, store, model_dir, upload_limit, batch_size,
 * readers, local_networks), then environment overrides. Throws ValidationError.
 */
ServiceConfig load_service_config(const std::optional<std::filesystem::path>& file, const EnvLookup& env = process_env);

/// Upload over the configured size limit.
class TooLargeError : public Error {
public:
    using Error::Error;
};

enum class JobState { Queued, Running, Done, Failed };
const char* to_string(JobState s) noexcept;

struct Job {
    std::int64_t id = 0;
    std::int64_t capture_id = 0;
    JobState state = JobState::Queued;
    std::size_t processed = 0;
    std::size_t total = 0;
    std::size_t batch_size = 0;
    std::string model_id;
    std::optional<std::string> error;
};

Json to_json(const Job& job);

struct UploadResult {
    std::int64_t capture_id = 0;
    std::size_t packet_count = 0;
    std::optional<std::string> warning;
};

/// Loads model files from a directory by file name and keeps them in memory.
class ModelRegistry {
public:
    explicit ModelRegistry(std::filesystem::path dir) : dir_(std::move(dir)) {}
    /// Throws NotFoundError for an unknown or malformed id, ModelFormatError for a bad file.
    std::shared_ptr<const nn::CnnModel<float>> get(const std::string& model_id);
    bool exists(const std::string& model_id) const;

private:
    std::optional<std::filesystem::path> resolve(const std::string& model_id) const;
    std::filesystem::path dir_;
    std::mutex mutex_;
    std::map<std::string, std::shared_ptr<const nn::CnnModel<float>>> cache_;
};

/**
 * Ingestion, background classification and read endpoints over one store.
 *
 * A single worker runs classification jobs in submission order. Each batch of
 * packets is vectorized, classified and explained, then committed to the store
 * as one transaction. Skipped packets are labelled "None" without a forward pass.
 */
class Service {
public:
    using BatchHook = std::function<void(const Job&)>;

    explicit Service(ServiceConfig config);
    ~Service();
    Service(const Service&) = delete;
    Service& operator=(const Service&) = delete;

    const ServiceConfig& config() const noexcept { return config_; }
    Store& store() noexcept { return store_; }

    /// Throws TooLargeError or PcapError for unreadable input. A truncated tail keeps the valid prefix.
    UploadResult upload(ByteView pcap, const std::string& name);

    /// Throws NotFoundError (capture or model), ConflictError (job pending for the capture), ValidationError.
    Job classify(std::int64_t capture_id, const std::string& model_id, std::optional<std::size_t> batch_size = {});
    std::optional<Job> job(std::int64_t id) const;
    /// Blocks until the job is done or failed.
    Job wait(std::int64_t id) const;

    /// Runs on the worker thread after every committed batch.
    void set_batch_hook(BatchHook hook);
    /// Forward passes made by classification jobs.
    std::uint64_t model_calls() const noexcept { return model_calls_.load(); }

    /// Entry, details tree, raw bytes as hex, CAM presence. Throws NotFoundError.
    Json packet_details(std::int64_t id) const;
    /// Throws NotFoundError when the packet or its CAM is missing.
    Json cam(std::int64_t id, Colormap map) const;
    /**
     * Average CAM over confident packets of a class with field-mapped top ranges.
     * Without model_id the model of the latest finished job is used.
     * Throws NotFoundError or EmptyPatternError.
     */
    ClassPattern pattern(const std::string& class_name, const std::optional<std::string>& model_id, double min_prob,
                         std::size_t max_count);

private:
    void worker_loop();
    void run_job(std::int64_t id);
    void update_job(std::int64_t id, const std::function<void(Job&)>& fn);

    ServiceConfig config_;
    LocalNetworks networks_;
    Store store_;
    ModelRegistry models_;
    std::mutex ingest_mutex_;

    mutable std::mutex jobs_mutex_;
    mutable std::condition_variable jobs_cv_;
    std::map<std::int64_t, Job> jobs_;
    std::deque<std::int64_t> queue_;
    std::int64_t next_job_id_ = 1;
    std::optional<std::string> last_model_;
    bool stopping_ = false;
    BatchHook hook_;

    std::atomic<std::uint64_t> model_calls_{0};
    std::atomic<std::uint64_t> generation_{0};

    using PatternKey = std::tuple<std::string, std::string, double, std::size_t>;
    std::mutex pattern_mutex_;
    std::map<PatternKey, std::pair<std::uint64_t, ClassPattern>> pattern_cache_;

    std::thread worker_;
};

} // namespace pktcam
