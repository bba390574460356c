// train.hpp — minibatch training over aggregated user samples.
//
// Samples stay ragged: each one runs its own forward/backward and gradients
// are accumulated, so no cross-sample padding exists anywhere. Worker threads
// own private gradient buffers which are reduced in worker-index order —
// trajectories are bit-reproducible at a fixed (seed, config, thread count).
#pragma once

#include <cmath>
#include <memory>
#include <string>
#include <thread>
#include <vector>

#include "mtfm/metrics.hpp"
#include "mtfm/model.hpp"
#include "mtfm/rng.hpp"

namespace mtfm {

struct TrainConfig {
    int steps = 500;
    int batch_size = 16;
    AdamConfig adam;
    uint64_t seed = 1234;
    int threads = 1;
    double holdout_fraction = 0.2;  // user-level split, hash-based
    int eval_every = 0;             // 0 = final evaluation only
    bool final_eval = true;

    void validate() const {
        if (steps < 0) throw config_error("train: negative steps");
        if (batch_size < 1) throw config_error("train: batch_size must be >= 1");
        if (threads < 1) throw config_error("train: threads must be >= 1");
        if (holdout_fraction < 0.0 || holdout_fraction >= 1.0)
            throw config_error("train: holdout_fraction must be in [0,1)");
    }
};

struct TrainResult {
    std::vector<double> loss_history;  // per-step batch loss
    struct EvalPoint {
        int step = 0;
        std::vector<TaskMetrics> metrics;
    };
    std::vector<EvalPoint> evals;
    size_t n_train_samples = 0;
    size_t n_holdout_samples = 0;
};

inline bool is_holdout_user(int64_t user_id, double fraction) {
    uint64_t st = 0x7F4A7C15ULL ^ static_cast<uint64_t>(user_id);
    return static_cast<double>(splitmix64(st) >> 11) * 0x1.0p-53 < fraction;
}

template <typename Real>
class Trainer {
  public:
    Trainer(Model<Real>& model, const Dataset& data, const TrainConfig& cfg)
        : model_(model), cfg_(cfg) {
        cfg_.validate();
        if (data.samples.empty()) throw contract_error("train: empty dataset");
        for (size_t i = 0; i < data.samples.size(); ++i) {
            if (is_holdout_user(data.samples[i].user_id, cfg_.holdout_fraction))
                holdout_.push_back(&data.samples[i]);
            else
                train_.push_back(&data.samples[i]);
        }
        if (train_.empty()) {  // degenerate split: train on everything
            train_ = holdout_;
            holdout_.clear();
        }
    }

    TrainResult run() {
        TrainResult result;
        result.n_train_samples = train_.size();
        result.n_holdout_samples = holdout_.size();

        Rng shuffle_rng(cfg_.seed ^ 0x5157AE34D1ULL);
        std::vector<const UserSample*> order = train_;
        size_t cursor = order.size();  // force initial shuffle

        for (int step = 0; step < cfg_.steps; ++step) {
            std::vector<const UserSample*> batch;
            batch.reserve(static_cast<size_t>(cfg_.batch_size));
            while (batch.size() < static_cast<size_t>(cfg_.batch_size)) {
                if (cursor >= order.size()) {
                    for (size_t i = order.size(); i > 1; --i)
                        std::swap(order[i - 1], order[shuffle_rng.next_below(i)]);
                    cursor = 0;
                }
                batch.push_back(order[cursor++]);
            }

            double batch_loss = train_step(batch);
            if (!std::isfinite(batch_loss))
                throw contract_error("training diverged (non-finite loss) at step " +
                                     std::to_string(step));
            result.loss_history.push_back(batch_loss);

            if (cfg_.eval_every > 0 && (step + 1) % cfg_.eval_every == 0 && !holdout_.empty())
                result.evals.push_back({step + 1, evaluate_holdout()});
        }
        if (cfg_.final_eval && !holdout_.empty())
            result.evals.push_back({cfg_.steps, evaluate_holdout()});
        return result;
    }

    // Mean of per-sample losses; gradients land scaled by 1/batch in the store.
    double train_step(const std::vector<const UserSample*>& batch) {
        const int n_workers =
            static_cast<int>(std::min<size_t>(static_cast<size_t>(cfg_.threads), batch.size()));
        std::vector<std::vector<Tensor<Real>>> worker_grads;
        std::vector<double> worker_loss(static_cast<size_t>(n_workers), 0.0);
        worker_grads.reserve(static_cast<size_t>(n_workers));
        for (int w = 0; w < n_workers; ++w) worker_grads.push_back(model_.params.make_grad_buffers());

        auto work = [&](int w) {
            for (size_t i = static_cast<size_t>(w); i < batch.size(); i += static_cast<size_t>(n_workers)) {
                Tape<Real> tape;
                auto refs = model_.bind_tape(tape, model_.params, &worker_grads[static_cast<size_t>(w)]);
                std::unique_ptr<StackGeom<Real>> geom;
                auto sl = model_.build_loss(tape, refs, *batch[i], geom);
                worker_loss[static_cast<size_t>(w)] += static_cast<double>(tape.val(sl.loss).at(0, 0));
                tape.backward(sl.loss);
            }
        };
        if (n_workers == 1) {
            work(0);
        } else {
            std::vector<std::thread> pool;
            pool.reserve(static_cast<size_t>(n_workers));
            for (int w = 0; w < n_workers; ++w) pool.emplace_back(work, w);
            for (auto& t : pool) t.join();
        }

        model_.params.zero_grads();
        for (int w = 0; w < n_workers; ++w) model_.params.accumulate_grads(worker_grads[static_cast<size_t>(w)]);
        const Real inv_batch = Real(1) / static_cast<Real>(batch.size());
        for (auto& e : model_.params) e.grad.scale_inplace(inv_batch);
        model_.params.adam_step(cfg_.adam);

        double loss = 0.0;
        for (int w = 0; w < n_workers; ++w) loss += worker_loss[static_cast<size_t>(w)];
        return loss / static_cast<double>(batch.size());
    }

    std::vector<PredictionRecord> holdout_records() const { return records_of(holdout_); }

    std::vector<TaskMetrics> evaluate_holdout() const { return evaluate_by_task(holdout_records()); }

    const std::vector<const UserSample*>& train_samples() const { return train_; }
    const std::vector<const UserSample*>& holdout_samples() const { return holdout_; }

  private:
    std::vector<PredictionRecord> records_of(const std::vector<const UserSample*>& samples) const {
        const int n_workers =
            static_cast<int>(std::min<size_t>(static_cast<size_t>(cfg_.threads), std::max<size_t>(samples.size(), 1)));
        std::vector<std::vector<PredictionRecord>> parts(static_cast<size_t>(n_workers));
        auto work = [&](int w) {
            for (size_t i = static_cast<size_t>(w); i < samples.size(); i += static_cast<size_t>(n_workers))
                for (auto& r : model_.forward_sample(*samples[i])) parts[static_cast<size_t>(w)].push_back(std::move(r));
        };
        if (n_workers == 1) {
            work(0);
        } else {
            std::vector<std::thread> pool;
            for (int w = 0; w < n_workers; ++w) pool.emplace_back(work, w);
            for (auto& t : pool) t.join();
        }
        std::vector<PredictionRecord> out;
        for (auto& p : parts)
            for (auto& r : p) out.push_back(std::move(r));
        return out;
    }

    Model<Real>& model_;
    TrainConfig cfg_;
    std::vector<const UserSample*> train_, holdout_;
};

}  // namespace mtfm
