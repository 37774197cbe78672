#include "pktcam/store.hpp"

#include <algorithm>
#include <bit>
#include <cstring>

#include <sqlite3.h>

#include "pktcam/error.hpp"

namespace pktcam {

const char* to_string(Direction d) noexcept {
    switch (d) {
    case Direction::Incoming: return "incoming";
    case Direction::Outgoing: return "outgoing";
    case Direction::Unknown: return "unknown";
    }
    return "unknown";
}

namespace {

std::optional<std::array<std::uint8_t, 16>> parse_ipv4(std::string_view s) {
    std::array<std::uint8_t, 16> out{};
    int part = 0;
    std::size_t i = 0;
    while (part < 4) {
        if (i >= s.size() || !std::isdigit(static_cast<unsigned char>(s[i]))) return std::nullopt;
        int v = 0;
        std::size_t digits = 0;
        while (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i])) && digits < 4) {
            v = v * 10 + (s[i] - '0');
            ++i;
            ++digits;
        }
        if (v > 255) return std::nullopt;
        out[static_cast<std::size_t>(part++)] = static_cast<std::uint8_t>(v);
        if (part < 4) {
            if (i >= s.size() || s[i] != '.') return std::nullopt;
            ++i;
        }
    }
    if (i != s.size()) return std::nullopt;
    return out;
}

std::optional<std::array<std::uint8_t, 16>> parse_ipv6(std::string_view s) {
    std::vector<std::uint16_t> head, tail;
    bool compressed = false;
    auto* cur = &head;
    std::size_t i = 0;
    if (s.starts_with("::")) {
        compressed = true;
        cur = &tail;
        i = 2;
    }
    while (i < s.size()) {
        std::size_t j = i;
        std::uint32_t v = 0;
        while (j < s.size() && std::isxdigit(static_cast<unsigned char>(s[j])) && j - i < 4) {
            v = v * 16 + static_cast<std::uint32_t>(std::stoi(std::string(1, s[j]), nullptr, 16));
            ++j;
        }
        if (j == i) return std::nullopt;
        cur->push_back(static_cast<std::uint16_t>(v));
        i = j;
        if (i == s.size()) break;
        if (s[i] != ':') return std::nullopt;
        ++i;
        if (i < s.size() && s[i] == ':') {
            if (compressed) return std::nullopt;
            compressed = true;
            cur = &tail;
            ++i;
        } else if (i == s.size()) {
            return std::nullopt;
        }
    }
    const std::size_t groups = head.size() + tail.size();
    if (compressed ? groups > 7 : groups != 8) return std::nullopt;
    std::array<std::uint8_t, 16> out{};
    std::vector<std::uint16_t> all = head;
    all.resize(8 - tail.size(), 0);
    all.insert(all.end(), tail.begin(), tail.end());
    for (std::size_t g = 0; g < 8; ++g) {
        out[2 * g] = static_cast<std::uint8_t>(all[g] >> 8);
        out[2 * g + 1] = static_cast<std::uint8_t>(all[g]);
    }
    return out;
}

} // namespace

Cidr Cidr::parse(std::string_view text) {
    const auto slash = text.find('/');
    const std::string_view addr = text.substr(0, slash);
    Cidr c;
    if (auto v4 = parse_ipv4(addr)) {
        c.version = 4;
        c.prefix = *v4;
    } else if (auto v6 = parse_ipv6(addr)) {
        c.version = 6;
        c.prefix = *v6;
    } else {
        throw ValidationError("invalid network address '" + std::string(text) + "'");
    }
    const int max_bits = c.version == 4 ? 32 : 128;
    c.bits = max_bits;
    if (slash != std::string_view::npos) {
        const std::string bits(text.substr(slash + 1));
        if (bits.empty() || bits.size() > 3 || !std::all_of(bits.begin(), bits.end(), ::isdigit)) {
            throw ValidationError("invalid prefix length in '" + std::string(text) + "'");
        }
        c.bits = std::stoi(bits);
        if (c.bits > max_bits) throw ValidationError("prefix length too large in '" + std::string(text) + "'");
    }
    return c;
}

bool Cidr::contains(const IpLayer& ip, bool source) const {
    if (ip.version != version) return false;
    const auto& a = source ? ip.src_addr : ip.dst_addr;
    for (int b = 0; b < bits; ++b) {
        const int byte = b / 8;
        const int mask = 0x80 >> (b % 8);
        if ((a[static_cast<std::size_t>(byte)] & mask) != (prefix[static_cast<std::size_t>(byte)] & mask)) return false;
    }
    return true;
}

Direction LocalNetworks::direction(const DecodedPacket& pkt) const {
    if (cidrs.empty() || !pkt.ip) return Direction::Unknown;
    auto local = [&](bool source) {
        return std::any_of(cidrs.begin(), cidrs.end(), [&](const Cidr& c) { return c.contains(*pkt.ip, source); });
    };
    const bool src_local = local(true);
    const bool dst_local = local(false);
    if (dst_local && !src_local) return Direction::Incoming;
    if (src_local && !dst_local) return Direction::Outgoing;
    return Direction::Unknown;
}

PacketEntry make_entry(const DecodedPacket& pkt, std::int64_t timestamp_ns, const LocalNetworks& nets) {
    PacketEntry e;
    e.record_index = pkt.record_index;
    e.timestamp_ns = timestamp_ns;
    if (pkt.ip) {
        e.src_ip = format_address(*pkt.ip, true);
        e.dst_ip = format_address(*pkt.ip, false);
    }
    if (pkt.transport) {
        e.src_port = pkt.transport->src_port;
        e.dst_port = pkt.transport->dst_port;
    }
    e.protocol = protocol_name(pkt);
    e.payload_size = pkt.payload_span.size();
    e.direction = nets.direction(pkt);
    e.packet_type = packet_type(pkt);
    return e;
}

namespace {

void check(int rc, sqlite3* db, const char* what) {
    if (rc != SQLITE_OK && rc != SQLITE_DONE && rc != SQLITE_ROW) {
        throw StoreError(std::string(what) + ": " + (db ? sqlite3_errmsg(db) : sqlite3_errstr(rc)));
    }
}

void exec(sqlite3* db, const char* sql) {
    char* err = nullptr;
    if (sqlite3_exec(db, sql, nullptr, nullptr, &err) != SQLITE_OK) {
        std::string msg = err ? err : "unknown error";
        sqlite3_free(err);
        throw StoreError(msg);
    }
}

class Stmt {
public:
    Stmt(sqlite3* db, const std::string& sql) : db_(db) {
        check(sqlite3_prepare_v2(db, sql.c_str(), -1, &stmt_, nullptr), db, "prepare");
    }
    ~Stmt() { sqlite3_finalize(stmt_); }
    Stmt(const Stmt&) = delete;
    Stmt& operator=(const Stmt&) = delete;

    Stmt& bind(int i, std::int64_t v) { return rc(sqlite3_bind_int64(stmt_, i, v)); }
    Stmt& bind(int i, double v) { return rc(sqlite3_bind_double(stmt_, i, v)); }
    Stmt& bind(int i, const std::string& v) {
        return rc(sqlite3_bind_text(stmt_, i, v.data(), static_cast<int>(v.size()), SQLITE_TRANSIENT));
    }
    Stmt& bind_blob(int i, const void* data, std::size_t n) {
        return rc(sqlite3_bind_blob(stmt_, i, n ? data : "", static_cast<int>(n), SQLITE_TRANSIENT));
    }
    Stmt& bind_null(int i) { return rc(sqlite3_bind_null(stmt_, i)); }
    int index(const char* name) const { return sqlite3_bind_parameter_index(stmt_, name); }
    template <class T>
    Stmt& bind_opt(int i, const std::optional<T>& v) {
        if (!v) return bind_null(i);
        if constexpr (std::is_integral_v<T>) return bind(i, static_cast<std::int64_t>(*v));
        else return bind(i, *v);
    }

    /// True while rows remain.
    bool step() {
        const int r = sqlite3_step(stmt_);
        if (r == SQLITE_ROW) return true;
        if (r == SQLITE_DONE) return false;
        if (r == SQLITE_CONSTRAINT) throw ConflictError(sqlite3_errmsg(db_));
        check(r, db_, "step");
        return false;
    }
    void reset() {
        sqlite3_reset(stmt_);
        sqlite3_clear_bindings(stmt_);
    }

    bool null(int c) const { return sqlite3_column_type(stmt_, c) == SQLITE_NULL; }
    std::int64_t i64(int c) const { return sqlite3_column_int64(stmt_, c); }
    double f64(int c) const { return sqlite3_column_double(stmt_, c); }
    std::string text(int c) const {
        const auto* p = sqlite3_column_text(stmt_, c);
        return p ? std::string(reinterpret_cast<const char*>(p), static_cast<std::size_t>(sqlite3_column_bytes(stmt_, c)))
                 : std::string();
    }
    Bytes blob(int c) const {
        const auto* p = static_cast<const std::uint8_t*>(sqlite3_column_blob(stmt_, c));
        return p ? Bytes(p, p + sqlite3_column_bytes(stmt_, c)) : Bytes();
    }

private:
    Stmt& rc(int r) {
        check(r, db_, "bind");
        return *this;
    }
    sqlite3* db_;
    sqlite3_stmt* stmt_ = nullptr;
};

/// RAII transaction; rolls back unless committed.
class Txn {
public:
    Txn(sqlite3* db, const char* begin = "BEGIN IMMEDIATE") : db_(db) { exec(db_, begin); }
    ~Txn() {
        if (!done_) sqlite3_exec(db_, "ROLLBACK", nullptr, nullptr, nullptr);
    }
    void commit() {
        exec(db_, "COMMIT");
        done_ = true;
    }

private:
    sqlite3* db_;
    bool done_ = false;
};

sqlite3* open_db(const std::filesystem::path& path, bool readonly) {
    sqlite3* db = nullptr;
    const int flags = (readonly ? SQLITE_OPEN_READONLY : SQLITE_OPEN_READWRITE | SQLITE_OPEN_CREATE) |
                      SQLITE_OPEN_NOMUTEX;
    const int rc = sqlite3_open_v2(path.string().c_str(), &db, flags, nullptr);
    if (rc != SQLITE_OK) {
        const std::string msg = db ? sqlite3_errmsg(db) : sqlite3_errstr(rc);
        sqlite3_close(db);
        throw StoreError("cannot open store " + path.string() + ": " + msg);
    }
    sqlite3_busy_timeout(db, 5000);
    return db;
}

Bytes encode_values(const std::vector<double>& v) {
    Bytes out;
    out.reserve(v.size() * 8);
    for (double d : v) {
        const auto bits = std::bit_cast<std::uint64_t>(d);
        for (int s = 0; s < 64; s += 8) out.push_back(static_cast<std::uint8_t>(bits >> s));
    }
    return out;
}

std::vector<double> decode_values(const Bytes& b) {
    std::vector<double> out(b.size() / 8);
    for (std::size_t i = 0; i < out.size(); ++i) {
        std::uint64_t bits = 0;
        for (int k = 7; k >= 0; --k) bits = (bits << 8) | b[i * 8 + static_cast<std::size_t>(k)];
        out[i] = std::bit_cast<double>(bits);
    }
    return out;
}

constexpr const char* kSchema = R"sql(
CREATE TABLE IF NOT EXISTS captures (
  id INTEGER PRIMARY KEY,
  name TEXT NOT NULL,
  linktype INTEGER NOT NULL,
  packet_count INTEGER NOT NULL,
  warning TEXT
);
CREATE TABLE IF NOT EXISTS packets (
  id INTEGER PRIMARY KEY,
  capture_id INTEGER NOT NULL REFERENCES captures(id),
  record_index INTEGER NOT NULL,
  ts INTEGER NOT NULL,
  src_ip TEXT NOT NULL,
  dst_ip TEXT NOT NULL,
  src_port INTEGER,
  dst_port INTEGER,
  protocol TEXT NOT NULL,
  payload_size INTEGER NOT NULL,
  direction TEXT NOT NULL,
  packet_type TEXT NOT NULL,
  skip_reason TEXT,
  predicted_class TEXT,
  probability REAL,
  model_id TEXT,
  raw BLOB NOT NULL
);
CREATE INDEX IF NOT EXISTS packets_order ON packets(ts, id);
CREATE INDEX IF NOT EXISTS packets_capture ON packets(capture_id, ts, id);
CREATE INDEX IF NOT EXISTS packets_class ON packets(predicted_class, model_id, ts, id);
CREATE TABLE IF NOT EXISTS cams (
  packet_id INTEGER PRIMARY KEY REFERENCES packets(id),
  class_id INTEGER NOT NULL,
  valid_len INTEGER NOT NULL,
  vals BLOB NOT NULL
);
)sql";

constexpr const char* kEntryColumns =
    "p.id, p.capture_id, p.record_index, p.ts, p.src_ip, p.dst_ip, p.src_port, p.dst_port, p.protocol, "
    "p.payload_size, p.direction, p.packet_type, p.skip_reason, p.predicted_class, p.probability, p.model_id, "
    "(SELECT COUNT(*) FROM cams c WHERE c.packet_id = p.id)";

PacketEntry read_entry(const Stmt& s) {
    PacketEntry e;
    e.id = s.i64(0);
    e.capture_id = s.i64(1);
    e.record_index = static_cast<std::size_t>(s.i64(2));
    e.timestamp_ns = s.i64(3);
    e.src_ip = s.text(4);
    e.dst_ip = s.text(5);
    if (!s.null(6)) e.src_port = static_cast<std::uint16_t>(s.i64(6));
    if (!s.null(7)) e.dst_port = static_cast<std::uint16_t>(s.i64(7));
    e.protocol = s.text(8);
    e.payload_size = static_cast<std::size_t>(s.i64(9));
    const std::string dir = s.text(10);
    e.direction = dir == "incoming" ? Direction::Incoming : dir == "outgoing" ? Direction::Outgoing : Direction::Unknown;
    e.packet_type = s.text(11);
    if (!s.null(12)) e.skip_reason = s.text(12);
    if (!s.null(13)) e.predicted_class = s.text(13);
    if (!s.null(14)) e.probability = s.f64(14);
    if (!s.null(15)) e.model_id = s.text(15);
    e.has_cam = s.i64(16) > 0;
    return e;
}

} // namespace

class Store::Pool {
public:
    Pool(const std::filesystem::path& path, std::size_t n) {
        for (std::size_t i = 0; i < std::max<std::size_t>(n, 1); ++i) free_.push_back(open_db(path, true));
        all_ = free_;
    }
    ~Pool() {
        for (sqlite3* db : all_) sqlite3_close(db);
    }

    class Lease {
    public:
        Lease(Pool& p, sqlite3* db) : pool_(p), db_(db) {}
        ~Lease() { pool_.give_back(db_); }
        Lease(const Lease&) = delete;
        Lease& operator=(const Lease&) = delete;
        sqlite3* get() const { return db_; }

    private:
        Pool& pool_;
        sqlite3* db_;
    };

    Lease take() {
        std::unique_lock lock(mutex_);
        cv_.wait(lock, [&] { return !free_.empty(); });
        sqlite3* db = free_.back();
        free_.pop_back();
        return Lease(*this, db);
    }

private:
    void give_back(sqlite3* db) {
        {
            std::lock_guard lock(mutex_);
            free_.push_back(db);
        }
        cv_.notify_one();
    }

    std::mutex mutex_;
    std::condition_variable cv_;
    std::vector<sqlite3*> free_;
    std::vector<sqlite3*> all_;
};

Store::Store(const std::filesystem::path& path, std::size_t readers) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    writer_ = open_db(path, false);
    try {
        exec(writer_, "PRAGMA journal_mode=WAL; PRAGMA synchronous=NORMAL; PRAGMA foreign_keys=ON;");
        Stmt v(writer_, "PRAGMA user_version");
        v.step();
        const int version = static_cast<int>(v.i64(0));
        if (version != 0 && version != kSchemaVersion) {
            throw StoreError("store schema version " + std::to_string(version) + " is not supported (expected " +
                             std::to_string(kSchemaVersion) + ")");
        }
        exec(writer_, kSchema);
        exec(writer_, ("PRAGMA user_version=" + std::to_string(kSchemaVersion)).c_str());
        readers_ = std::make_unique<Pool>(path, readers);
    } catch (...) {
        sqlite3_close(writer_);
        throw;
    }
}

Store::~Store() {
    readers_.reset();
    sqlite3_close(writer_);
}

int Store::schema_version() const {
    auto lease = readers_->take();
    Stmt s(lease.get(), "PRAGMA user_version");
    s.step();
    return static_cast<int>(s.i64(0));
}

std::int64_t Store::create_capture(const Capture& c) {
    std::lock_guard lock(write_mutex_);
    Stmt s(writer_, "INSERT INTO captures(name, linktype, packet_count, warning) VALUES(?,?,?,?)");
    s.bind(1, c.name).bind(2, std::int64_t{c.linktype}).bind(3, static_cast<std::int64_t>(c.packet_count));
    s.bind_opt(4, c.warning);
    s.step();
    return sqlite3_last_insert_rowid(writer_);
}

std::optional<Capture> Store::get_capture(std::int64_t id) const {
    auto lease = readers_->take();
    Stmt s(lease.get(), "SELECT id, name, linktype, packet_count, warning FROM captures WHERE id = ?");
    s.bind(1, id);
    if (!s.step()) return std::nullopt;
    Capture c{s.i64(0), s.text(1), static_cast<std::uint32_t>(s.i64(2)), static_cast<std::size_t>(s.i64(3)), {}};
    if (!s.null(4)) c.warning = s.text(4);
    return c;
}

std::vector<Capture> Store::list_captures() const {
    auto lease = readers_->take();
    Stmt s(lease.get(), "SELECT id, name, linktype, packet_count, warning FROM captures ORDER BY id");
    std::vector<Capture> out;
    while (s.step()) {
        Capture c{s.i64(0), s.text(1), static_cast<std::uint32_t>(s.i64(2)), static_cast<std::size_t>(s.i64(3)), {}};
        if (!s.null(4)) c.warning = s.text(4);
        out.push_back(std::move(c));
    }
    return out;
}

std::size_t Store::insert_batch(std::span<const PacketEntry> entries, std::span<const Bytes> raw) {
    if (entries.size() != raw.size()) throw StoreError("insert_batch needs one raw record per entry");
    if (entries.empty()) return 0;
    std::lock_guard lock(write_mutex_);
    Txn txn(writer_);
    Stmt s(writer_,
           "INSERT INTO packets(id, capture_id, record_index, ts, src_ip, dst_ip, src_port, dst_port, protocol, "
           "payload_size, direction, packet_type, skip_reason, raw) VALUES(?,?,?,?,?,?,?,?,?,?,?,?,?,?)");
    for (std::size_t i = 0; i < entries.size(); ++i) {
        const PacketEntry& e = entries[i];
        s.bind(1, e.id).bind(2, e.capture_id).bind(3, static_cast<std::int64_t>(e.record_index));
        s.bind(4, e.timestamp_ns).bind(5, e.src_ip).bind(6, e.dst_ip);
        s.bind_opt(7, e.src_port).bind_opt(8, e.dst_port);
        s.bind(9, e.protocol).bind(10, static_cast<std::int64_t>(e.payload_size));
        s.bind(11, std::string(to_string(e.direction))).bind(12, e.packet_type).bind_opt(13, e.skip_reason);
        s.bind_blob(14, raw[i].data(), raw[i].size());
        try {
            s.step();
        } catch (const ConflictError&) {
            throw ConflictError("duplicate packet id " + std::to_string(e.id) + "; batch rejected");
        }
        s.reset();
    }
    txn.commit();
    return entries.size();
}

void Store::commit_predictions(std::span<const Prediction> predictions, const std::string& model_id) {
    if (predictions.empty()) return;
    std::lock_guard lock(write_mutex_);
    Txn txn(writer_);
    Stmt upd(writer_, "UPDATE packets SET predicted_class = ?, probability = ?, model_id = ? WHERE id = ?");
    Stmt del(writer_, "DELETE FROM cams WHERE packet_id = ?");
    Stmt ins(writer_, "INSERT INTO cams(packet_id, class_id, valid_len, vals) VALUES(?,?,?,?)");
    for (const auto& p : predictions) {
        if (p.cam && !p.probability) throw StoreError("a CAM needs a model prediction");
        upd.bind(1, p.predicted_class).bind_opt(2, p.probability);
        if (p.probability) upd.bind(3, model_id);
        else upd.bind_null(3);
        upd.bind(4, p.packet_id);
        upd.step();
        if (sqlite3_changes(writer_) != 1) throw NotFoundError("unknown packet id " + std::to_string(p.packet_id));
        upd.reset();
        del.bind(1, p.packet_id);
        del.step();
        del.reset();
        if (p.cam) {
            const Bytes blob = encode_values(p.cam->values);
            ins.bind(1, p.packet_id).bind(2, std::int64_t{p.cam->class_id});
            ins.bind(3, static_cast<std::int64_t>(p.cam->valid_len)).bind_blob(4, blob.data(), blob.size());
            ins.step();
            ins.reset();
        }
    }
    txn.commit();
}

void Store::clear_predictions(std::int64_t capture_id) {
    std::lock_guard lock(write_mutex_);
    Txn txn(writer_);
    Stmt del(writer_, "DELETE FROM cams WHERE packet_id IN (SELECT id FROM packets WHERE capture_id = ?)");
    del.bind(1, capture_id);
    del.step();
    Stmt upd(writer_, "UPDATE packets SET predicted_class = NULL, probability = NULL, model_id = NULL WHERE capture_id = ?");
    upd.bind(1, capture_id);
    upd.step();
    txn.commit();
}

std::vector<std::int64_t> Store::packet_ids(std::int64_t capture_id) const {
    auto lease = readers_->take();
    Stmt s(lease.get(), "SELECT id FROM packets WHERE capture_id = ? ORDER BY ts, id");
    s.bind(1, capture_id);
    std::vector<std::int64_t> out;
    while (s.step()) out.push_back(s.i64(0));
    return out;
}

std::int64_t Store::next_packet_id() const {
    std::lock_guard lock(write_mutex_);
    Stmt s(writer_, "SELECT COALESCE(MAX(id), 0) + 1 FROM packets");
    s.step();
    return s.i64(0);
}

PacketPage Store::query(const PacketFilter& f, std::size_t page, std::size_t page_size) const {
    if (page_size == 0) throw ValidationError("page_size must be positive");
    std::string where = " WHERE 1=1";
    if (f.predicted_class) where += " AND p.predicted_class = :cls";
    if (f.min_prob) where += " AND p.probability IS NOT NULL AND p.probability >= :minp";
    if (f.protocol) where += " AND p.protocol = :proto COLLATE NOCASE";
    if (f.ip) where += " AND (p.src_ip = :ip OR p.dst_ip = :ip)";
    if (f.port) where += " AND (p.src_port = :port OR p.dst_port = :port)";
    if (f.time_from_ns) where += " AND p.ts >= :t0";
    if (f.time_to_ns) where += " AND p.ts <= :t1";
    if (f.capture_id) where += " AND p.capture_id = :cap";

    auto bind_all = [&](Stmt& s) {
        if (f.predicted_class) s.bind(s.index(":cls"), *f.predicted_class);
        if (f.min_prob) s.bind(s.index(":minp"), *f.min_prob);
        if (f.protocol) s.bind(s.index(":proto"), *f.protocol);
        if (f.ip) s.bind(s.index(":ip"), *f.ip);
        if (f.port) s.bind(s.index(":port"), std::int64_t{*f.port});
        if (f.time_from_ns) s.bind(s.index(":t0"), *f.time_from_ns);
        if (f.time_to_ns) s.bind(s.index(":t1"), *f.time_to_ns);
        if (f.capture_id) s.bind(s.index(":cap"), *f.capture_id);
    };

    auto lease = readers_->take();
    sqlite3* db = lease.get();
    PacketPage out;
    out.page = page;
    out.page_size = page_size;
    // Count and rows come from one read snapshot.
    Txn snapshot(db, "BEGIN");
    {
        Stmt s(db, "SELECT COUNT(*) FROM packets p" + where);
        bind_all(s);
        s.step();
        out.total = static_cast<std::size_t>(s.i64(0));
    }
    {
        Stmt s(db, std::string("SELECT ") + kEntryColumns + " FROM packets p" + where +
                       " ORDER BY p.ts, p.id LIMIT :lim OFFSET :off");
        bind_all(s);
        s.bind(s.index(":lim"), static_cast<std::int64_t>(page_size));
        s.bind(s.index(":off"), static_cast<std::int64_t>(page * page_size));
        while (s.step()) out.rows.push_back(read_entry(s));
    }
    snapshot.commit();
    return out;
}

PacketBundle Store::get_packet_bundle(std::int64_t id) const {
    auto lease = readers_->take();
    sqlite3* db = lease.get();
    Txn snapshot(db, "BEGIN");
    PacketBundle b;
    {
        Stmt s(db, std::string("SELECT ") + kEntryColumns +
                       ", p.raw, c.linktype FROM packets p JOIN captures c ON c.id = p.capture_id WHERE p.id = ?");
        s.bind(1, id);
        if (!s.step()) throw NotFoundError("packet " + std::to_string(id) + " not found");
        b.entry = read_entry(s);
        b.raw = s.blob(17);
        b.linktype = static_cast<std::uint32_t>(s.i64(18));
    }
    {
        Stmt s(db, "SELECT class_id, valid_len, vals FROM cams WHERE packet_id = ?");
        s.bind(1, id);
        if (s.step()) {
            b.cam = StoredCam{static_cast<int>(s.i64(0)), static_cast<std::size_t>(s.i64(1)), decode_values(s.blob(2))};
        }
    }
    snapshot.commit();
    return b;
}

std::optional<StoredCam> Store::get_cam(std::int64_t id) const {
    auto lease = readers_->take();
    Stmt s(lease.get(), "SELECT class_id, valid_len, vals FROM cams WHERE packet_id = ?");
    s.bind(1, id);
    if (!s.step()) return std::nullopt;
    return StoredCam{static_cast<int>(s.i64(0)), static_cast<std::size_t>(s.i64(1)), decode_values(s.blob(2))};
}

std::vector<ClassCam> Store::class_cams(const std::string& class_name, const std::string& model_id, double min_prob,
                                        std::size_t limit) const {
    auto lease = readers_->take();
    Stmt s(lease.get(),
           "SELECT p.id, p.probability, c.class_id, c.valid_len, c.vals FROM packets p JOIN cams c ON c.packet_id = p.id "
           "WHERE p.predicted_class = ? AND p.model_id = ? AND p.probability > ? ORDER BY p.ts, p.id LIMIT ?");
    s.bind(1, class_name).bind(2, model_id).bind(3, min_prob).bind(4, static_cast<std::int64_t>(limit));
    std::vector<ClassCam> out;
    while (s.step()) {
        out.push_back(ClassCam{s.i64(0), s.f64(1),
                               StoredCam{static_cast<int>(s.i64(2)), static_cast<std::size_t>(s.i64(3)),
                                         decode_values(s.blob(4))}});
    }
    return out;
}

} // namespace pktcam
