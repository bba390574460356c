#include "mtfm/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "mtfm/errors.hpp"

namespace mtfm {

std::optional<double> auc(const std::vector<PredictionRecord>& records) {
    size_t n_pos = 0, n_neg = 0;
    for (const auto& r : records) {
        if (r.label == 1) ++n_pos;
        else if (r.label == 0) ++n_neg;
    }
    if (n_pos == 0 || n_neg == 0) return std::nullopt;

    std::vector<size_t> order(records.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
        return records[a].probability < records[b].probability;
    });

    // Midranks over tied scores, then the Mann-Whitney statistic.
    double rank_sum_pos = 0.0;
    size_t i = 0;
    while (i < order.size()) {
        size_t j = i;
        while (j < order.size() &&
               records[order[j]].probability == records[order[i]].probability)
            ++j;
        double midrank = 0.5 * static_cast<double>(i + 1 + j);  // ranks are 1-based
        for (size_t k = i; k < j; ++k)
            if (records[order[k]].label == 1) rank_sum_pos += midrank;
        i = j;
    }
    double np = static_cast<double>(n_pos), nn = static_cast<double>(n_neg);
    return (rank_sum_pos - np * (np + 1.0) / 2.0) / (np * nn);
}

std::optional<double> gauc(const std::vector<PredictionRecord>& records) {
    std::map<int64_t, std::vector<PredictionRecord>> by_user;
    for (const auto& r : records) by_user[r.user_id].push_back(r);

    double weighted = 0.0, weight = 0.0;
    for (const auto& [uid, recs] : by_user) {
        auto a = auc(recs);
        if (!a) continue;  // single-class users do not contribute
        double w = static_cast<double>(recs.size());
        weighted += w * *a;
        weight += w;
    }
    if (weight == 0.0) return std::nullopt;
    return weighted / weight;
}

double multitask_loss(const std::vector<PredictionRecord>& records, double eps) {
    size_t n = 0;
    double sum = 0.0;
    for (const auto& r : records) {
        if (r.label != 0 && r.label != 1) continue;
        double p = std::min(1.0 - eps, std::max(eps, r.probability));
        sum += r.label == 1 ? -std::log(p) : -std::log(1.0 - p);
        ++n;
    }
    if (n == 0) throw contract_error("multitask_loss: no labeled records");
    return sum / static_cast<double>(n);
}

std::vector<TaskMetrics> evaluate_by_task(const std::vector<PredictionRecord>& records) {
    std::map<std::pair<int, std::string>, std::vector<PredictionRecord>> groups;
    for (const auto& r : records) groups[{r.scenario_id, r.task}].push_back(r);

    std::vector<TaskMetrics> out;
    for (const auto& [key, recs] : groups) {
        TaskMetrics m;
        m.scenario_id = key.first;
        m.task = key.second;
        m.n_records = recs.size();
        size_t pos = 0;
        for (const auto& r : recs) pos += r.label == 1 ? 1 : 0;
        m.positive_rate = recs.empty() ? 0.0 : static_cast<double>(pos) / static_cast<double>(recs.size());
        m.auc = auc(recs);
        m.gauc = gauc(recs);
        out.push_back(std::move(m));
    }
    return out;
}

std::string format_metrics_table(const std::vector<TaskMetrics>& rows) {
    std::ostringstream out;
    out << "scenario\ttask\tn\tpos_rate\tauc\tgauc\n";
    auto fmt = [](const std::optional<double>& v) {
        if (!v) return std::string("n/a");
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.6f", *v);
        return std::string(buf);
    };
    for (const auto& m : rows) {
        char head[64];
        std::snprintf(head, sizeof(head), "%d\t%s\t%zu\t%.4f\t", m.scenario_id, m.task.c_str(),
                      m.n_records, m.positive_rate);
        out << head << fmt(m.auc) << "\t" << fmt(m.gauc) << "\n";
    }
    return out.str();
}

}  // namespace mtfm
