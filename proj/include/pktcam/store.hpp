#pragma once

#include <array>
#include <condition_variable>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pktcam/bytes.hpp"
#include "pktcam/dissect.hpp"

struct sqlite3;

namespace pktcam {

enum class Direction { Incoming, Outgoing, Unknown };
const char* to_string(Direction d) noexcept;

/// IPv4 or IPv6 prefix such as "192.168.0.0/16" or "fd00::/8".
struct Cidr {
    int version = 4;
    std::array<std::uint8_t, 16> prefix{};
    int bits = 0;

    /// Throws ValidationError on malformed input.
    static Cidr parse(std::string_view text);
    bool contains(const IpLayer& ip, bool source) const;
};

/// User-defined local networks; direction is unknown when none are configured.
struct LocalNetworks {
    std::vector<Cidr> cidrs;
    Direction direction(const DecodedPacket& pkt) const;
};

struct PacketEntry {
    std::int64_t id = 0;
    std::int64_t capture_id = 0;
    std::size_t record_index = 0;
    std::int64_t timestamp_ns = 0;
    std::string src_ip;
    std::string dst_ip;
    std::optional<std::uint16_t> src_port;
    std::optional<std::uint16_t> dst_port;
    std::string protocol;
    std::size_t payload_size = 0;
    Direction direction = Direction::Unknown;
    std::string packet_type;
    std::optional<std::string> skip_reason;
    std::optional<std::string> predicted_class; ///< "None" for skipped packets once classified
    std::optional<double> probability;          ///< present iff a model produced predicted_class
    std::optional<std::string> model_id;
    bool has_cam = false;
};

/// Summary columns for one dissected record.
PacketEntry make_entry(const DecodedPacket& pkt, std::int64_t timestamp_ns, const LocalNetworks& nets);

struct Capture {
    std::int64_t id = 0;
    std::string name;
    std::uint32_t linktype = 0;
    std::size_t packet_count = 0;
    std::optional<std::string> warning;
};

struct StoredCam {
    int class_id = 0;
    std::size_t valid_len = 0;
    std::vector<double> values;
};

/// Result of classifying one packet; class "None" with no probability and no CAM for skipped packets.
struct Prediction {
    std::int64_t packet_id = 0;
    std::string predicted_class;
    std::optional<double> probability;
    std::optional<StoredCam> cam;
};

struct PacketFilter {
    std::optional<std::string> predicted_class;
    std::optional<double> min_prob;
    std::optional<std::string> protocol; ///< case-insensitive
    std::optional<std::string> ip;       ///< source or destination
    std::optional<std::uint16_t> port;   ///< source or destination
    std::optional<std::int64_t> time_from_ns;
    std::optional<std::int64_t> time_to_ns; ///< inclusive
    std::optional<std::int64_t> capture_id;
};

struct PacketPage {
    std::vector<PacketEntry> rows;
    std::size_t total = 0;
    std::size_t page = 0;
    std::size_t page_size = 0;
};

struct PacketBundle {
    PacketEntry entry;
    std::uint32_t linktype = 0;
    Bytes raw;
    std::optional<StoredCam> cam;
};

struct ClassCam {
    std::int64_t packet_id = 0;
    double probability = 0.0;
    StoredCam cam;
};

/**
 * Single-file SQLite store in write-ahead-log mode.
 *
 * Writes go through one connection under a mutex; each write call is one
 * transaction. Reads borrow a connection from a pool and run inside a read
 * transaction, so they see whole batches only and never wait on the writer.
 */
class Store {
public:
    static constexpr int kSchemaVersion = 1;

    explicit Store(const std::filesystem::path& path, std::size_t readers = 4);
    ~Store();
    Store(const Store&) = delete;
    Store& operator=(const Store&) = delete;

    std::int64_t create_capture(const Capture& capture);
    std::optional<Capture> get_capture(std::int64_t id) const;
    std::vector<Capture> list_captures() const;

    /// Atomic: a duplicate id rejects the whole batch (ConflictError). raw[i] belongs to entries[i].
    std::size_t insert_batch(std::span<const PacketEntry> entries, std::span<const Bytes> raw);
    /// Atomic per call; replaces any earlier prediction and CAM of the same packets.
    void commit_predictions(std::span<const Prediction> predictions, const std::string& model_id);
    void clear_predictions(std::int64_t capture_id);

    /// Ids of a capture's packets in (timestamp, id) order.
    std::vector<std::int64_t> packet_ids(std::int64_t capture_id) const;
    std::int64_t next_packet_id() const;

    /// page is zero-based. Ordered by (timestamp, id).
    PacketPage query(const PacketFilter& filter, std::size_t page, std::size_t page_size) const;
    /// Throws NotFoundError.
    PacketBundle get_packet_bundle(std::int64_t id) const;
    std::optional<StoredCam> get_cam(std::int64_t id) const;

    /// Packets predicted as class_name by model_id with probability > min_prob, earliest first, at most limit.
    std::vector<ClassCam> class_cams(const std::string& class_name, const std::string& model_id, double min_prob,
                                     std::size_t limit) const;

    int schema_version() const;

private:
    class Pool;
    sqlite3* writer_ = nullptr;
    mutable std::mutex write_mutex_;
    std::unique_ptr<Pool> readers_;
};

} // namespace pktcam
