#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "apogee/network.hpp"
#include "apogee/synthgen.hpp"

namespace apogee::nn {

struct TrainConfig {
    double learning_rate = 1e-3;
    double weight_decay = 1e-4;
    int batch_size = 256;
    int epochs = 100;
    int scheduler_patience = 10; // epochs
    double scheduler_factor = 0.5;
    double min_lr = 1e-6;
    int ensemble_size = 5;
    double val_fraction = 0.1; // shared, non-bootstrapped validation split
    int threads = 0;           // member-level parallelism; 0 = hardware

    void validate() const; // throws ValidationError
};

/// Decoupled-weight-decay Adam. Moments mirror the parameter layout; decay
/// applies to weight matrices only, never biases or BN parameters.
struct AdamWState {
    struct Tensor {
        std::vector<double> m;
        std::vector<double> v;
    };
    struct HiddenSlot {
        Tensor w, b, gamma, beta;
    };
    std::vector<HiddenSlot> hidden;
    Tensor out_w, out_b;
    long step = 0;

    static AdamWState like(const MlpParams& params);
};

inline constexpr double kAdamBeta1 = 0.9;
inline constexpr double kAdamBeta2 = 0.999;
inline constexpr double kAdamEps = 1e-8;

void adamw_step(MlpParams& params, const Gradients& grads, AdamWState& state, double lr,
                double weight_decay);

/// Reduce-on-plateau with min-delta 0: after `patience` consecutive epochs
/// without strict improvement, lr <- max(lr * factor, min_lr) and the
/// counter resets.
class PlateauScheduler {
public:
    PlateauScheduler(double lr, int patience, double factor, double min_lr)
        : lr_(lr), patience_(patience), factor_(factor), min_lr_(min_lr) {}

    /// Feed one validation loss; returns the (possibly reduced) lr.
    double observe(double val_loss);

    double lr() const { return lr_; }

private:
    double lr_;
    int patience_;
    double factor_;
    double min_lr_;
    double best_ = std::numeric_limits<double>::infinity();
    int bad_epochs_ = 0;
};

/// count indices drawn uniformly with replacement from [0, n).
std::vector<size_t> bootstrap_sample(size_t n, size_t count, RngStream& rng);

struct EpochStats {
    double train_loss;
    double val_loss;
    double lr;
};

struct MemberResult {
    MlpParams params; // best-validation-epoch snapshot
    std::vector<EpochStats> history;
    int best_epoch = 0;     // 1-based
    double best_val_loss = 0.0;
};

/// Trains one member on (x, y) with shuffled mini-batches, AdamW and the
/// plateau scheduler; validation at every epoch end in eval mode. Returns
/// the best-validation-epoch parameters. Throws DivergenceError if the loss
/// becomes non-finite.
MemberResult train_member(const Matrix& x, const Matrix& y, const Matrix& x_val,
                          const Matrix& y_val, const NetworkConfig& net_cfg,
                          const TrainConfig& train_cfg, RngStream init_rng, RngStream train_rng);

struct EnsembleMeta {
    uint64_t master_seed = 0;
    size_t motor_count = 0;     // training database size, for index checks
    size_t train_samples = 0;
    std::vector<uint64_t> member_stream_ids;
    std::vector<double> final_val_losses;
    std::vector<int> best_epochs;
};

/// K trained members plus everything needed to run them on new flights.
struct EnsembleModel {
    NetworkConfig net;
    NormStats norm;
    std::vector<MlpParams> members;
    EnsembleMeta meta;
};

struct TrainOutput {
    EnsembleModel model;
    std::vector<std::vector<EpochStats>> histories; // per member
};

/// Alg. driver: deterministic validation split, K bootstrap multisets,
/// member training (possibly in parallel; results are bit-identical either
/// way because every member derives its own RNG streams from master_seed).
TrainOutput train_ensemble(const Dataset& dataset, const NetworkConfig& net_cfg,
                           const TrainConfig& train_cfg, uint64_t master_seed,
                           size_t motor_count);

// --- model file ----------------------------------------------------------

inline constexpr int kModelFormatVersion = 1;

std::string model_to_json(const EnsembleModel& model);
void save_model(const EnsembleModel& model, const std::string& path);
EnsembleModel load_model(const std::string& path);

} // namespace apogee::nn
