#include <csignal>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "pktcam/classify.hpp"
#include "pktcam/error.hpp"
#include "pktcam/http_server.hpp"
#include "pktcam/json_io.hpp"
#include "pktcam/manifest.hpp"
#include "pktcam/nn/model_io.hpp"
#include "pktcam/nn/train.hpp"
#include "pktcam/parallel.hpp"
#include "pktcam/service.hpp"
#include "pktcam/synthetic.hpp"

using namespace pktcam;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitModel = 4;

class UsageError : public Error {
public:
    using Error::Error;
};

const std::vector<int> kKernels{3, 5, 7, 9};
const std::vector<std::string> kArchs{"model1", "model2"};

struct TrainOptions {
    std::filesystem::path data;
    std::string arch = "model1";
    int kernel = 7;
    int epochs = 10;
    std::optional<std::size_t> undersample;
    std::uint64_t seed = 0;
    std::size_t batch_size = 128;
    double lr = 1e-3;
    double split = 0.8;
};

void add_train_flags(CLI::App& cmd, TrainOptions& o, bool with_model_shape) {
    cmd.add_option("--data", o.data, "Dataset directory with labels.csv")->required()->check(CLI::ExistingDirectory);
    if (with_model_shape) {
        cmd.add_option("--arch", o.arch, "Network architecture")->check(CLI::IsMember(kArchs))->capture_default_str();
        cmd.add_option("--kernel", o.kernel, "Convolution kernel size")->check(CLI::IsMember(kKernels))->capture_default_str();
    }
    cmd.add_option("--epochs", o.epochs, "Training epochs")->check(CLI::NonNegativeNumber)->capture_default_str();
    cmd.add_option("--undersample", o.undersample, "Cap every class at this many packets")->check(CLI::PositiveNumber);
    cmd.add_option("--seed", o.seed, "Seed for initialisation, split and shuffling")->capture_default_str();
    cmd.add_option("--batch-size", o.batch_size, "Minibatch size")->check(CLI::PositiveNumber)->capture_default_str();
    cmd.add_option("--lr", o.lr, "Adam learning rate")->check(CLI::PositiveNumber)->capture_default_str();
    cmd.add_option("--split", o.split, "Training fraction of each class")->check(CLI::Range(0.0, 1.0))->capture_default_str();
}

nn::TrainConfig train_config(const TrainOptions& o) {
    nn::TrainConfig c;
    c.epochs = o.epochs;
    c.batch_size = o.batch_size;
    c.adam.learning_rate = o.lr;
    c.split_fraction = o.split;
    c.seed = o.seed;
    c.undersample_target = o.undersample;
    return c;
}

nn::Dataset load_dataset(const std::filesystem::path& dir) {
    LoadStats stats;
    nn::Dataset data = build_dataset(load_manifest(dir), &stats);
    std::size_t skipped = 0;
    for (const auto& [reason, n] : stats.skipped) skipped += n;
    std::fprintf(stderr, "loaded %zu packets: %zu vectorized, %zu skipped", stats.records, stats.vectorized, skipped);
    if (stats.truncated_files) std::fprintf(stderr, ", %zu truncated files", stats.truncated_files);
    std::fprintf(stderr, "\n");
    const auto counts = data.class_counts();
    for (std::size_t c = 0; c < counts.size(); ++c) {
        if (counts[c] < 2) {
            throw DataError("class '" + data.class_names[c] + "' has " + std::to_string(counts[c]) +
                            " usable packets; at least 2 are needed");
        }
    }
    return data;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + path.string());
    out << text;
    if (!out) throw DataError("write failed for " + path.string());
}

std::string extension_of(const std::filesystem::path& p) {
    std::string ext = p.extension().string();
    for (char& c : ext) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return ext;
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

// Per-epoch F1 table: one row per (model, kernel), one column per epoch.
void print_table_header(int epochs) {
    std::printf("%-8s %-6s", "Model", "Kernel");
    for (int e = 1; e <= epochs; ++e) std::printf(" %5d", e);
    std::printf("\n");
    std::fflush(stdout);
}

void print_row_start(const std::string& arch, int kernel) {
    std::printf("%-8s %-6d", arch.c_str(), kernel);
    std::fflush(stdout);
}

void print_cell(double f1) {
    std::printf(" %5.2f", f1);
    std::fflush(stdout);
}

Json history_json(const std::string& arch, int kernel, const nn::TrainResult& r) {
    Json epochs = Json::array();
    Json f1 = Json::array();
    for (const auto& e : r.history) {
        if (e.epoch == 0) continue;
        epochs.push_back({{"epoch", e.epoch}, {"train_loss", e.train_loss}, {"weighted_f1", e.eval.weighted.f1},
                          {"macro_f1", e.eval.macro.f1}, {"accuracy", e.eval.accuracy}});
        f1.push_back(e.eval.weighted.f1);
    }
    return {{"arch", arch}, {"kernel", kernel}, {"f1", f1}, {"epochs", epochs},
            {"train_size", r.train_size}, {"test_size", r.test_size}};
}

nn::TrainResult train_one(const nn::Dataset& data, const TrainOptions& o, const std::string& arch, int kernel) {
    const auto config = nn::ModelConfig::named(arch, kernel, data.num_classes());
    auto model = nn::init_model<float>(config, data.class_names, o.seed);
    if (o.epochs > 0) print_row_start(arch, kernel);
    auto result = nn::train(std::move(model), data, train_config(o), [](const nn::EpochResult& e) {
        if (e.epoch > 0) print_cell(e.eval.weighted.f1);
    });
    if (o.epochs > 0) std::printf("\n");
    std::fflush(stdout);
    return result;
}

int cmd_train(const TrainOptions& o, const std::filesystem::path& out, const std::optional<std::filesystem::path>& json) {
    const nn::Dataset data = load_dataset(o.data);
    print_table_header(o.epochs);
    const auto result = train_one(data, o, o.arch, o.kernel);
    nn::save_model(result.model, out);
    if (json) write_text(*json, history_json(o.arch, o.kernel, result).dump(2) + "\n");
    std::fprintf(stderr, "model written to %s\n", out.string().c_str());
    return kExitOk;
}

int cmd_sweep(const TrainOptions& o, const std::vector<std::string>& archs, const std::vector<int>& kernels,
              const std::optional<std::filesystem::path>& json, const std::optional<std::filesystem::path>& csv) {
    const nn::Dataset data = load_dataset(o.data);
    print_table_header(o.epochs);
    Json rows = Json::array();
    for (const auto& arch : archs) {
        for (int k : kernels) rows.push_back(history_json(arch, k, train_one(data, o, arch, k)));
    }
    if (json) {
        write_text(*json, Json{{"metric", "weighted_f1"}, {"epochs", o.epochs}, {"seed", o.seed}, {"rows", rows}}.dump(2) +
                              "\n");
    }
    if (csv) {
        std::string text = "model,kernel";
        for (int e = 1; e <= o.epochs; ++e) text += ",epoch" + std::to_string(e);
        text += "\n";
        for (const auto& r : rows) {
            text += r["arch"].get<std::string>() + "," + std::to_string(r["kernel"].get<int>());
            for (const auto& f : r["f1"]) text += "," + std::to_string(f.get<double>());
            text += "\n";
        }
        write_text(*csv, text);
    }
    return kExitOk;
}

void print_report(const nn::EvalReport& r, const std::vector<std::string>& names) {
    std::printf("%-20s %9s %9s %9s %9s\n", "class", "precision", "recall", "f1", "support");
    for (std::size_t c = 0; c < r.per_class.size(); ++c) {
        const auto& m = r.per_class[c];
        std::printf("%-20s %9.4f %9.4f %9.4f %9zu\n", names[c].c_str(), m.precision, m.recall, m.f1, m.support);
    }
    std::printf("%-20s %9.4f %9.4f %9.4f %9zu\n", "macro avg", r.macro.precision, r.macro.recall, r.macro.f1, r.total);
    std::printf("%-20s %9.4f %9.4f %9.4f %9zu\n", "weighted avg", r.weighted.precision, r.weighted.recall,
                r.weighted.f1, r.total);
    std::printf("accuracy %.4f\n\nconfusion (rows: true, columns: predicted)\n", r.accuracy);
    for (std::size_t t = 0; t < r.confusion.size(); ++t) {
        std::printf("%-20s", names[t].c_str());
        for (auto n : r.confusion[t]) std::printf(" %7zu", n);
        std::printf("\n");
    }
}

int cmd_evaluate(const std::filesystem::path& model_path, const std::filesystem::path& dir,
                 const std::optional<std::filesystem::path>& json) {
    const auto model = nn::load_model(model_path);
    const nn::Dataset data = build_dataset(load_manifest(dir));
    if (data.class_names != model.class_names) {
        throw DataError("dataset classes do not match the model's classes");
    }
    const auto report = nn::evaluate(model, data);
    print_report(report, model.class_names);
    if (json) write_text(*json, to_json(report, model.class_names).dump(2) + "\n");
    return kExitOk;
}

struct ClassifiedCapture {
    PcapFile file;
    std::vector<DecodedPacket> packets;
    std::vector<PacketResult> results;
};

ClassifiedCapture classify_capture(const nn::CnnModel<float>& model, const std::filesystem::path& pcap, bool cams) {
    ClassifiedCapture c;
    c.file = read_pcap_file(pcap);
    if (c.file.tail_error) std::fprintf(stderr, "warning: %s\n", c.file.tail_error->what());
    const auto& recs = c.file.records;
    c.packets.resize(recs.size());
    c.results.resize(recs.size());
    parallel_for(recs.size(), [&](std::size_t i) {
        c.packets[i] = dissect(recs[i], c.file.header.linktype, i);
        c.results[i] = classify_packet(model, c.packets[i], recs[i].data, cams);
    });
    return c;
}

int cmd_classify(const std::filesystem::path& model_path, const std::filesystem::path& pcap,
                 const std::filesystem::path& out, const std::optional<std::filesystem::path>& cams_out) {
    const std::string ext = extension_of(out);
    if (ext != ".csv" && ext != ".json") throw UsageError("--out must end in .csv or .json");
    std::string cam_ext;
    if (cams_out) {
        cam_ext = extension_of(*cams_out);
        if (cam_ext != ".csv" && cam_ext != ".json") throw UsageError("--cams must end in .csv or .json");
    }
    const auto model = nn::load_model(model_path);
    const auto c = classify_capture(model, pcap, cams_out.has_value());
    const LocalNetworks none;

    Json rows = Json::array();
    std::string csv =
        "record_index,timestamp_ns,src_ip,dst_ip,src_port,dst_port,protocol,payload_size,packet_type,"
        "predicted_class,probability,skip_reason\n";
    std::map<std::string, std::size_t> counts;
    for (std::size_t i = 0; i < c.results.size(); ++i) {
        const auto& r = c.results[i];
        const PacketEntry e = make_entry(c.packets[i], timestamp_ns(c.file.records[i], c.file.header.ts_resolution), none);
        const std::string cls = r.classified() ? model.class_names[static_cast<std::size_t>(r.class_id)] : kNoneLabel;
        ++counts[cls];
        const auto port = [](const std::optional<std::uint16_t>& p) { return p ? std::to_string(*p) : std::string(); };
        if (ext == ".csv") {
            csv += std::to_string(i) + "," + std::to_string(e.timestamp_ns) + "," + csv_field(e.src_ip) + "," +
                   csv_field(e.dst_ip) + "," + port(e.src_port) + "," + port(e.dst_port) + "," + csv_field(e.protocol) +
                   "," + std::to_string(e.payload_size) + "," + csv_field(e.packet_type) + "," + csv_field(cls) + "," +
                   (r.classified() ? std::to_string(r.probability) : "") + "," + (r.skip ? to_string(*r.skip) : "") +
                   "\n";
        } else {
            rows.push_back({{"record_index", i},
                            {"timestamp_ns", e.timestamp_ns},
                            {"src_ip", e.src_ip},
                            {"dst_ip", e.dst_ip},
                            {"src_port", e.src_port ? Json(*e.src_port) : Json(nullptr)},
                            {"dst_port", e.dst_port ? Json(*e.dst_port) : Json(nullptr)},
                            {"protocol", e.protocol},
                            {"payload_size", e.payload_size},
                            {"packet_type", e.packet_type},
                            {"predicted_class", cls},
                            {"probability", r.classified() ? Json(r.probability) : Json(nullptr)},
                            {"skip_reason", r.skip ? Json(to_string(*r.skip)) : Json(nullptr)}});
        }
    }
    write_text(out, ext == ".csv" ? csv : rows.dump(2) + "\n");

    if (cams_out) {
        std::string text;
        Json records = Json::array();
        if (cam_ext == ".csv") {
            text = "record_index,predicted_class,probability,valid_len";
            for (std::size_t x = 0; x < kVectorLen; ++x) text += ",cam_" + std::to_string(x);
            text += "\n";
        }
        for (std::size_t i = 0; i < c.results.size(); ++i) {
            const auto& r = c.results[i];
            if (!r.cam) continue;
            const std::string& cls = model.class_names[static_cast<std::size_t>(r.class_id)];
            if (cam_ext == ".csv") {
                text += std::to_string(i) + "," + csv_field(cls) + "," + std::to_string(r.probability) + "," +
                        std::to_string(r.cam->valid_len);
                char buf[32];
                for (double v : r.cam->values) {
                    std::snprintf(buf, sizeof buf, ",%.9g", v);
                    text += buf;
                }
                text += "\n";
            } else {
                records.push_back({{"record_index", i},
                                   {"predicted_class", cls},
                                   {"probability", r.probability},
                                   {"valid_len", r.cam->valid_len},
                                   {"values", r.cam->values}});
            }
        }
        write_text(*cams_out, cam_ext == ".csv" ? text : records.dump() + "\n");
    }

    std::printf("%zu packets\n", c.results.size());
    for (const auto& [cls, n] : counts) std::printf("  %-20s %zu\n", cls.c_str(), n);
    return kExitOk;
}

int cmd_report(const std::filesystem::path& model_path, const std::filesystem::path& pcap, const std::string& cls,
               double min_prob, std::size_t max_count, double top_fraction, const std::filesystem::path& out) {
    const auto model = nn::load_model(model_path);
    const PcapFile file = read_pcap_file(pcap);
    if (file.tail_error) std::fprintf(stderr, "warning: %s\n", file.tail_error->what());
    const ClassPattern p = capture_class_pattern(model, file, cls, min_prob, max_count, top_fraction);
    Json j = to_json(p);
    j["top_fraction"] = top_fraction;
    write_text(out, j.dump(2) + "\n");
    std::printf("class %s: %zu packets above %.2f\n", cls.c_str(), p.sample_count, min_prob);
    for (const auto& r : p.top_ranges) {
        std::printf("  bytes %zu-%zu  relevance %.3f  %s\n", r.begin, r.end - 1, r.relevance, r.label.c_str());
    }
    return kExitOk;
}

int cmd_synth(const std::filesystem::path& out, SyntheticSpec spec) {
    const Manifest m = write_synthetic_dataset(spec, out);
    std::printf("wrote %zu classes x %zu packets to %s\n", m.class_names.size(), spec.packets_per_class,
                out.string().c_str());
    for (const auto& s : spec.signatures) {
        std::printf("  %-8s signature at vector offset %zu\n", s.class_name.c_str(), s.vector_offset);
    }
    return kExitOk;
}

int cmd_serve(const std::optional<std::filesystem::path>& config_file, const std::optional<std::string>& host,
              const std::optional<int>& port, const std::optional<std::filesystem::path>& store,
              const std::optional<std::filesystem::path>& model_dir) {
    ServiceConfig cfg = load_service_config(config_file);
    if (host) cfg.host = *host;
    if (port) cfg.port = *port;
    if (store) cfg.store_path = *store;
    if (model_dir) cfg.model_dir = *model_dir;

    // Signals are taken synchronously on this thread; workers inherit the mask.
    sigset_t signals;
    sigemptyset(&signals);
    sigaddset(&signals, SIGINT);
    sigaddset(&signals, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &signals, nullptr);

    Service service(cfg);
    HttpServer server(service);
    bool ok = true;
    std::thread listener([&] { ok = server.listen(cfg.host, cfg.port); });
    server.wait_until_ready();
    if (ok) std::fprintf(stderr, "listening on %s:%d\n", cfg.host.c_str(), cfg.port);
    std::thread stopper([&] {
        int sig = 0;
        sigwait(&signals, &sig);
        server.stop();
    });
    listener.join();
    if (!ok) {
        std::fprintf(stderr, "error: cannot listen on %s:%d\n", cfg.host.c_str(), cfg.port);
        pthread_kill(stopper.native_handle(), SIGTERM);
    }
    stopper.join();
    return ok ? kExitOk : kExitData;
}

int run(int argc, char** argv) {
    CLI::App app{"Explainable packet classification with 1D CNNs and class activation maps"};
    app.require_subcommand(1);
    app.set_version_flag("--version", "pktcam 1.0");

    TrainOptions train_opts;
    std::filesystem::path train_out;
    std::optional<std::filesystem::path> train_json;
    auto* train = app.add_subcommand("train", "Train a model and print its per-epoch F1 row");
    add_train_flags(*train, train_opts, true);
    train->add_option("--out", train_out, "Model file to write")->required();
    train->add_option("--json", train_json, "Also write the training history as JSON");

    TrainOptions sweep_opts;
    sweep_opts.epochs = 10;
    std::vector<std::string> sweep_archs = kArchs;
    std::vector<int> sweep_kernels = kKernels;
    std::optional<std::filesystem::path> sweep_json, sweep_csv;
    auto* sweep = app.add_subcommand("sweep", "Train every (arch, kernel) pair and print the per-epoch F1 table");
    add_train_flags(*sweep, sweep_opts, false);
    sweep->add_option("--archs", sweep_archs, "Architectures")->check(CLI::IsMember(kArchs))->delimiter(',');
    sweep->add_option("--kernels", sweep_kernels, "Kernel sizes")->check(CLI::IsMember(kKernels))->delimiter(',');
    sweep->add_option("--json", sweep_json, "Write the table as JSON");
    sweep->add_option("--csv", sweep_csv, "Write the table as CSV");

    std::filesystem::path eval_model, eval_data;
    std::optional<std::filesystem::path> eval_json;
    auto* evaluate = app.add_subcommand("evaluate", "Per-class, macro and weighted metrics with the confusion matrix");
    evaluate->add_option("--model", eval_model, "Model file")->required()->check(CLI::ExistingFile);
    evaluate->add_option("--data", eval_data, "Dataset directory")->required()->check(CLI::ExistingDirectory);
    evaluate->add_option("--json", eval_json, "Also write the report as JSON");

    std::filesystem::path cls_model, cls_pcap, cls_out;
    std::optional<std::filesystem::path> cls_cams;
    auto* classify = app.add_subcommand("classify", "Classify every packet of a capture");
    classify->add_option("--model", cls_model, "Model file")->required()->check(CLI::ExistingFile);
    classify->add_option("--pcap", cls_pcap, "Capture file")->required()->check(CLI::ExistingFile);
    classify->add_option("--out", cls_out, "Results file (.csv or .json)")->required();
    classify->add_option("--cams", cls_cams, "Also export CAMs (.csv or .json)");

    std::filesystem::path rep_model, rep_pcap, rep_out;
    std::string rep_class;
    double rep_min_prob = kDefaultMinProbability;
    std::size_t rep_max_count = kDefaultMaxCount;
    double rep_top = kDefaultTopFraction;
    auto* report = app.add_subcommand("report", "Average-CAM pattern of a class with its most impacting bytes");
    report->add_option("--model", rep_model, "Model file")->required()->check(CLI::ExistingFile);
    report->add_option("--pcap", rep_pcap, "Capture file")->required()->check(CLI::ExistingFile);
    report->add_option("--class", rep_class, "Class name")->required();
    report->add_option("--min-prob", rep_min_prob, "Keep packets above this probability")
        ->check(CLI::Range(0.0, 1.0))->capture_default_str();
    report->add_option("--max-count", rep_max_count, "Average at most this many packets")
        ->check(CLI::PositiveNumber)->capture_default_str();
    report->add_option("--top-fraction", rep_top, "Relative-value band counted as impacting")
        ->check(CLI::Range(0.0, 1.0))->capture_default_str();
    report->add_option("--out", rep_out, "Pattern JSON file")->required();

    std::filesystem::path synth_out;
    SyntheticSpec spec;
    std::string alphabet = "printable";
    auto* synth = app.add_subcommand("synth", "Write the synthetic signature dataset");
    synth->add_option("--out", synth_out, "Output directory")->required();
    synth->add_option("--per-class", spec.packets_per_class, "Packets per class")
        ->check(CLI::PositiveNumber)->capture_default_str();
    synth->add_option("--min-payload", spec.min_payload, "Smallest payload")->capture_default_str();
    synth->add_option("--max-payload", spec.max_payload, "Largest payload")->capture_default_str();
    synth->add_option("--alphabet", alphabet, "Payload bytes")
        ->check(CLI::IsMember({"printable", "uniform"}))->capture_default_str();
    synth->add_option("--seed", spec.seed, "Generator seed")->capture_default_str();

    std::optional<std::filesystem::path> serve_config, serve_store, serve_models;
    std::optional<std::string> serve_host;
    std::optional<int> serve_port;
    auto* serve = app.add_subcommand("serve", "Run the HTTP service");
    serve->add_option("--config", serve_config, "JSON config file")->check(CLI::ExistingFile);
    serve->add_option("--host", serve_host, "Bind address");
    serve->add_option("--port", serve_port, "Port")->check(CLI::Range(1, 65535));
    serve->add_option("--store", serve_store, "Store file");
    serve->add_option("--model-dir", serve_models, "Directory of model files");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (*train) return cmd_train(train_opts, train_out, train_json);
        if (*sweep) return cmd_sweep(sweep_opts, sweep_archs, sweep_kernels, sweep_json, sweep_csv);
        if (*evaluate) return cmd_evaluate(eval_model, eval_data, eval_json);
        if (*classify) return cmd_classify(cls_model, cls_pcap, cls_out, cls_cams);
        if (*report) return cmd_report(rep_model, rep_pcap, rep_class, rep_min_prob, rep_max_count, rep_top, rep_out);
        if (*synth) {
            if (spec.min_payload > spec.max_payload) throw UsageError("--min-payload exceeds --max-payload");
            spec.alphabet = alphabet == "uniform" ? PayloadAlphabet::Uniform : PayloadAlphabet::Printable;
            return cmd_synth(synth_out, spec);
        }
        if (*serve) return cmd_serve(serve_config, serve_host, serve_port, serve_store, serve_models);
    } catch (const UsageError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitUsage;
    } catch (const ValidationError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitUsage;
    } catch (const ModelFormatError& e) {
        std::fprintf(stderr, "model error: %s\n", e.what());
        return kExitModel;
    } catch (const ShapeError& e) {
        std::fprintf(stderr, "model error: %s\n", e.what());
        return kExitModel;
    } catch (const EmptyPatternError& e) {
        std::fprintf(stderr, "empty pattern: %s\n", e.what());
        return kExitData;
    } catch (const Error& e) {
        std::fprintf(stderr, "data error: %s\n", e.what());
        return kExitData;
    }
    return kExitUsage;
}

} // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitData;
    }
}
