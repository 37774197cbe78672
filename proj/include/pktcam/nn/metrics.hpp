#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace pktcam::nn {

struct ClassMetrics {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    std::size_t support = 0;
};

struct AggregateMetrics {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

struct EvalReport {
    std::vector<ClassMetrics> per_class;
    AggregateMetrics macro;
    AggregateMetrics weighted;
    double accuracy = 0.0;
    /// confusion[t][p]: samples of true class t predicted as p.
    std::vector<std::vector<std::size_t>> confusion;
    std::size_t total = 0;
};

/// 2*Pr*Rc/(Pr+Rc), or 0 when Pr + Rc == 0.
double f1_score(double precision, double recall);

/// Zero-division cases report 0.
EvalReport report_from_confusion(std::vector<std::vector<std::size_t>> confusion);

/// Throws DataError when a label or prediction is outside [0, num_classes).
EvalReport report_from_predictions(std::span<const int> truth, std::span<const int> predicted, int num_classes);

} // namespace pktcam::nn
