#include "pktcam/nn/metrics.hpp"

#include "pktcam/error.hpp"

namespace pktcam::nn {

double f1_score(double precision, double recall) {
    const double denom = precision + recall;
    return denom > 0.0 ? 2.0 * precision * recall / denom : 0.0;
}

EvalReport report_from_confusion(std::vector<std::vector<std::size_t>> confusion) {
    const std::size_t k = confusion.size();
    for (const auto& row : confusion) {
        if (row.size() != k) throw DataError("confusion matrix must be square");
    }
    EvalReport r;
    r.per_class.resize(k);
    std::vector<std::size_t> predicted_count(k, 0);
    std::size_t correct = 0;
    for (std::size_t t = 0; t < k; ++t) {
        for (std::size_t p = 0; p < k; ++p) {
            r.per_class[t].support += confusion[t][p];
            predicted_count[p] += confusion[t][p];
        }
        correct += confusion[t][t];
        r.total += r.per_class[t].support;
    }
    for (std::size_t c = 0; c < k; ++c) {
        auto& m = r.per_class[c];
        const double tp = static_cast<double>(confusion[c][c]);
        m.precision = predicted_count[c] > 0 ? tp / static_cast<double>(predicted_count[c]) : 0.0;
        m.recall = m.support > 0 ? tp / static_cast<double>(m.support) : 0.0;
        m.f1 = f1_score(m.precision, m.recall);

        r.macro.precision += m.precision;
        r.macro.recall += m.recall;
        r.macro.f1 += m.f1;
        const double w = static_cast<double>(m.support);
        r.weighted.precision += w * m.precision;
        r.weighted.recall += w * m.recall;
        r.weighted.f1 += w * m.f1;
    }
    if (k > 0) {
        r.macro.precision /= static_cast<double>(k);
        r.macro.recall /= static_cast<double>(k);
        r.macro.f1 /= static_cast<double>(k);
    }
    if (r.total > 0) {
        const double n = static_cast<double>(r.total);
        r.weighted.precision /= n;
        r.weighted.recall /= n;
        r.weighted.f1 /= n;
        r.accuracy = static_cast<double>(correct) / n;
    }
    r.confusion = std::move(confusion);
    return r;
}

EvalReport report_from_predictions(std::span<const int> truth, std::span<const int> predicted, int num_classes) {
    if (truth.size() != predicted.size()) throw DataError("truth and prediction counts differ");
    const auto k = static_cast<std::size_t>(num_classes);
    std::vector<std::vector<std::size_t>> confusion(k, std::vector<std::size_t>(k, 0));
    for (std::size_t i = 0; i < truth.size(); ++i) {
        if (truth[i] < 0 || truth[i] >= num_classes || predicted[i] < 0 || predicted[i] >= num_classes) {
            throw DataError("class index outside [0, " + std::to_string(num_classes) + ")");
        }
        ++confusion[static_cast<std::size_t>(truth[i])][static_cast<std::size_t>(predicted[i])];
    }
    return report_from_confusion(std::move(confusion));
}

} // namespace pktcam::nn
