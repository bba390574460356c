// metrics.hpp — AUC / GAUC ranking metrics and the evaluation report.
#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mtfm/records.hpp"

namespace mtfm {

// Rank-statistic AUC with midrank tie handling. Empty optional when the
// records are degenerate (fewer than one positive and one negative) — a
// degenerate distribution is reported, never silently scored as 0.
std::optional<double> auc(const std::vector<PredictionRecord>& records);

// Per-user AUC averaged with exposure-count weights over users having both
// label classes. Users with a single class do not contribute.
std::optional<double> gauc(const std::vector<PredictionRecord>& records);

// Mean binary cross-entropy over labeled records, probabilities clamped to
// [eps, 1-eps]. Throws contract_error on an empty record set.
double multitask_loss(const std::vector<PredictionRecord>& records, double eps = 1e-7);

struct TaskMetrics {
    int scenario_id = 0;
    std::string task;
    size_t n_records = 0;
    double positive_rate = 0.0;
    std::optional<double> auc;
    std::optional<double> gauc;
};

// Groups records by (scenario, task) and computes both metrics per group.
std::vector<TaskMetrics> evaluate_by_task(const std::vector<PredictionRecord>& records);

// Tab-separated table: scenario, task, n, pos_rate, auc, gauc.
std::string format_metrics_table(const std::vector<TaskMetrics>& rows);

}  // namespace mtfm
