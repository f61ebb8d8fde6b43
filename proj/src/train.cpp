#include "apogee/train.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>
#include <thread>

#include <json.hpp>

#include "apogee/csvio.hpp"
#include "apogee/errors.hpp"

namespace apogee::nn {

using nlohmann::json;

void TrainConfig::validate() const {
    if (!(learning_rate > 0.0)) throw ValidationError("train config: learning_rate must be > 0");
    if (!(weight_decay >= 0.0)) throw ValidationError("train config: weight_decay must be >= 0");
    if (batch_size < 1) throw ValidationError("train config: batch_size must be >= 1");
    if (epochs < 1) throw ValidationError("train config: epochs must be >= 1");
    if (scheduler_patience < 1) throw ValidationError("train config: patience must be >= 1");
    if (!(scheduler_factor > 0.0 && scheduler_factor < 1.0))
        throw ValidationError("train config: scheduler_factor must be in (0,1)");
    if (!(min_lr > 0.0)) throw ValidationError("train config: min_lr must be > 0");
    if (ensemble_size < 1) throw ValidationError("train config: ensemble_size must be >= 1");
    if (!(val_fraction > 0.0 && val_fraction < 1.0))
        throw ValidationError("train config: val_fraction must be in (0,1)");
}

AdamWState AdamWState::like(const MlpParams& params) {
    AdamWState s;
    auto zeros = [](size_t n) { return Tensor{std::vector<double>(n, 0.0), std::vector<double>(n, 0.0)}; };
    for (const auto& h : params.hidden) {
        HiddenSlot slot;
        slot.w = zeros(h.w.d.size());
        slot.b = zeros(h.b.size());
        slot.gamma = zeros(h.gamma.size());
        slot.beta = zeros(h.beta.size());
        s.hidden.push_back(std::move(slot));
    }
    s.out_w = zeros(params.out.w.d.size());
    s.out_b = zeros(params.out.b.size());
    return s;
}

namespace {

// One Adam update over a flat tensor; decay is folded in only for weights
// and stays decoupled from the moments (applied to the incoming parameter).
void adam_tensor(std::vector<double>& p, const std::vector<double>& g, AdamWState::Tensor& st,
                 double lr, double weight_decay, double bc1, double bc2) {
    for (size_t i = 0; i < p.size(); ++i) {
        st.m[i] = kAdamBeta1 * st.m[i] + (1.0 - kAdamBeta1) * g[i];
        st.v[i] = kAdamBeta2 * st.v[i] + (1.0 - kAdamBeta2) * g[i] * g[i];
        const double mhat = st.m[i] / bc1;
        const double vhat = st.v[i] / bc2;
        if (weight_decay > 0.0) p[i] -= lr * weight_decay * p[i];
        p[i] -= lr * mhat / (std::sqrt(vhat) + kAdamEps);
    }
}

} // namespace

void adamw_step(MlpParams& params, const Gradients& grads, AdamWState& state, double lr,
                double weight_decay) {
    ++state.step;
    const double bc1 = 1.0 - std::pow(kAdamBeta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(kAdamBeta2, static_cast<double>(state.step));
    for (size_t l = 0; l < params.hidden.size(); ++l) {
        auto& layer = params.hidden[l];
        auto& g = grads.hidden[l];
        auto& st = state.hidden[l];
        adam_tensor(layer.w.d, g.w.d, st.w, lr, weight_decay, bc1, bc2);
        adam_tensor(layer.b, g.b, st.b, lr, 0.0, bc1, bc2);
        adam_tensor(layer.gamma, g.gamma, st.gamma, lr, 0.0, bc1, bc2);
        adam_tensor(layer.beta, g.beta, st.beta, lr, 0.0, bc1, bc2);
    }
    adam_tensor(params.out.w.d, grads.out_w.d, state.out_w, lr, weight_decay, bc1, bc2);
    adam_tensor(params.out.b, grads.out_b, state.out_b, lr, 0.0, bc1, bc2);
}

double PlateauScheduler::observe(double val_loss) {
    if (val_loss < best_) {
        best_ = val_loss;
        bad_epochs_ = 0;
    } else {
        ++bad_epochs_;
        if (bad_epochs_ >= patience_) {
            lr_ = std::max(lr_ * factor_, min_lr_);
            bad_epochs_ = 0;
        }
    }
    return lr_;
}

std::vector<size_t> bootstrap_sample(size_t n, size_t count, RngStream& rng) {
    if (n == 0 || count == 0) throw ValidationError("bootstrap_sample: empty input");
    std::vector<size_t> idx(count);
    for (size_t i = 0; i < count; ++i) idx[i] = static_cast<size_t>(rng.uniform_int(n));
    return idx;
}

namespace {

Matrix gather_rows(const Matrix& src, const std::vector<size_t>& rows) {
    Matrix out(static_cast<int>(rows.size()), src.cols);
    for (size_t i = 0; i < rows.size(); ++i)
        std::copy_n(src.row(static_cast<int>(rows[i])), src.cols, out.row(static_cast<int>(i)));
    return out;
}

} // namespace

MemberResult train_member(const Matrix& x, const Matrix& y, const Matrix& x_val,
                          const Matrix& y_val, const NetworkConfig& net_cfg,
                          const TrainConfig& train_cfg, RngStream init_rng, RngStream train_rng) {
    const int n = x.rows;
    MlpParams params = init_network(net_cfg, init_rng);
    AdamWState opt = AdamWState::like(params);
    PlateauScheduler scheduler(train_cfg.learning_rate, train_cfg.scheduler_patience,
                               train_cfg.scheduler_factor, train_cfg.min_lr);

    MemberResult result;
    result.best_val_loss = std::numeric_limits<double>::infinity();

    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), size_t{0});

    double lr = train_cfg.learning_rate;
    ForwardCache cache;
    for (int epoch = 1; epoch <= train_cfg.epochs; ++epoch) {
        train_rng.shuffle(order);
        double loss_sum = 0.0;
        for (int start = 0; start < n; start += train_cfg.batch_size) {
            const int count = std::min(train_cfg.batch_size, n - start);
            std::vector<size_t> batch_rows(order.begin() + start, order.begin() + start + count);
            const Matrix xb = gather_rows(x, batch_rows);
            const Matrix yb = gather_rows(y, batch_rows);
            const Matrix pred = forward_train(params, net_cfg, xb, train_rng, cache);
            const double loss = mse_loss(pred, yb);
            if (!std::isfinite(loss))
                throw DivergenceError("train_member: loss became non-finite at epoch " +
                                      std::to_string(epoch));
            loss_sum += loss * count;
            const Gradients grads = backward(params, net_cfg, cache, mse_grad(pred, yb));
            adamw_step(params, grads, opt, lr, train_cfg.weight_decay);
        }
        const double train_loss = loss_sum / n;
        const double val_loss = mse_loss(forward_eval(params, net_cfg, x_val), y_val);
        if (!std::isfinite(val_loss))
            throw DivergenceError("train_member: validation loss became non-finite");
        result.history.push_back({train_loss, val_loss, lr});
        if (val_loss < result.best_val_loss) {
            result.best_val_loss = val_loss;
            result.best_epoch = epoch;
            result.params = params;
        }
        lr = scheduler.observe(val_loss);
    }
    return result;
}

TrainOutput train_ensemble(const Dataset& dataset, const NetworkConfig& net_cfg,
                           const TrainConfig& train_cfg, uint64_t master_seed,
                           size_t motor_count) {
    net_cfg.validate();
    train_cfg.validate();
    if (!dataset.norm)
        throw ValidationError("train_ensemble: dataset has no normalization statistics");
    const size_t n = dataset.samples.size();
    if (n < 2) throw ValidationError("train_ensemble: dataset too small");

    // Normalized features / physical-unit targets for the whole corpus.
    Matrix x_all(static_cast<int>(n), 5);
    Matrix y_all(static_cast<int>(n), 2);
    for (size_t i = 0; i < n; ++i) {
        const auto z = normalize(dataset.samples[i].features, *dataset.norm);
        std::copy(z.begin(), z.end(), x_all.row(static_cast<int>(i)));
        y_all.at(static_cast<int>(i), 0) = dataset.samples[i].target.cd;
        y_all.at(static_cast<int>(i), 1) = dataset.samples[i].target.alpha;
    }

    // Shared validation split: seeded permutation, tail slice. Never
    // bootstrapped, identical for every member.
    std::vector<size_t> perm(n);
    std::iota(perm.begin(), perm.end(), size_t{0});
    RngStream split_rng(master_seed, stream_id::kValidationSplit);
    split_rng.shuffle(perm);
    size_t n_val = static_cast<size_t>(std::ceil(train_cfg.val_fraction * static_cast<double>(n)));
    n_val = std::clamp<size_t>(n_val, 1, n - 1);
    const std::vector<size_t> val_rows(perm.end() - static_cast<long>(n_val), perm.end());
    const std::vector<size_t> train_rows(perm.begin(), perm.end() - static_cast<long>(n_val));

    const Matrix x_val = gather_rows(x_all, val_rows);
    const Matrix y_val = gather_rows(y_all, val_rows);
    const Matrix x_train = gather_rows(x_all, train_rows);
    const Matrix y_train = gather_rows(y_all, train_rows);

    const int k = train_cfg.ensemble_size;
    std::vector<MemberResult> results(k);
    std::vector<std::string> errors(k);

    auto run_member = [&](int member) {
        try {
            RngStream boot_rng(master_seed, stream_id::kBootstrapBase + member);
            const auto idx = bootstrap_sample(static_cast<size_t>(x_train.rows),
                                              static_cast<size_t>(x_train.rows), boot_rng);
            const Matrix xb = gather_rows(x_train, idx);
            const Matrix yb = gather_rows(y_train, idx);
            results[member] = train_member(
                xb, yb, x_val, y_val, net_cfg, train_cfg,
                RngStream(master_seed, stream_id::kInitBase + member),
                RngStream(master_seed, stream_id::kTrainBase + member));
        } catch (const std::exception& e) {
            errors[member] = e.what();
        }
    };

    unsigned workers = train_cfg.threads > 0 ? static_cast<unsigned>(train_cfg.threads)
                                             : std::max(1u, std::thread::hardware_concurrency());
    workers = std::min<unsigned>(workers, static_cast<unsigned>(k));
    if (workers <= 1) {
        for (int m = 0; m < k; ++m) run_member(m);
    } else {
        std::atomic<int> next{0};
        auto pool_worker = [&] {
            for (;;) {
                const int m = next.fetch_add(1);
                if (m >= k) break;
                run_member(m);
            }
        };
        std::vector<std::thread> pool;
        for (unsigned w = 0; w < workers; ++w) pool.emplace_back(pool_worker);
        for (auto& th : pool) th.join();
    }
    for (int m = 0; m < k; ++m)
        if (!errors[m].empty())
            throw DivergenceError("member " + std::to_string(m) + ": " + errors[m]);

    TrainOutput out;
    out.model.net = net_cfg;
    out.model.norm = *dataset.norm;
    out.model.meta.master_seed = master_seed;
    out.model.meta.motor_count = motor_count;
    out.model.meta.train_samples = n;
    for (int m = 0; m < k; ++m) {
        out.model.members.push_back(std::move(results[m].params));
        out.model.meta.member_stream_ids.push_back(stream_id::kTrainBase + m);
        out.model.meta.final_val_losses.push_back(results[m].best_val_loss);
        out.model.meta.best_epochs.push_back(results[m].best_epoch);
        out.histories.push_back(std::move(results[m].history));
    }
    return out;
}

// --- model file ----------------------------------------------------------

namespace {

json matrix_to_json(const Matrix& m) {
    return json{{"dims", {m.rows, m.cols}}, {"weight", m.d}};
}

Matrix matrix_from_json(const json& j) {
    const auto dims = j.at("dims").get<std::vector<int>>();
    if (dims.size() != 2) throw ParseError("model: matrix dims must have 2 entries");
    Matrix m(dims[0], dims[1]);
    const auto w = j.at("weight").get<std::vector<double>>();
    if (w.size() != m.d.size()) throw ParseError("model: weight array does not match dims");
    m.d = w;
    return m;
}

} // namespace

std::string model_to_json(const EnsembleModel& model) {
    json members = json::array();
    for (const auto& p : model.members) {
        json layers = json::array();
        for (const auto& h : p.hidden) {
            json layer = matrix_to_json(h.w);
            layer["bias"] = h.b;
            layer["bn_gamma"] = h.gamma;
            layer["bn_beta"] = h.beta;
            layer["bn_running_mean"] = h.running_mean;
            layer["bn_running_var"] = h.running_var;
            layers.push_back(std::move(layer));
        }
        json out_layer = matrix_to_json(p.out.w);
        out_layer["bias"] = p.out.b;
        members.push_back(json{{"layers", layers}, {"output_layer", out_layer}});
    }
    json ranges = json::array();
    for (const auto& [lo, hi] : model.net.output_ranges) ranges.push_back({lo, hi});
    json doc{
        {"format_version", kModelFormatVersion},
        {"network_config",
         {{"input_dim", model.net.input_dim},
          {"hidden_dims", model.net.hidden_dims},
          {"output_dim", model.net.output_dim},
          {"dropout_p", model.net.dropout_p},
          {"bn_momentum", model.net.bn_momentum},
          {"bn_eps", model.net.bn_eps},
          {"output_ranges", ranges}}},
        {"norm", {{"mean", model.norm.mean}, {"std", model.norm.std}}},
        {"members", members},
        {"metadata",
         {{"master_seed", model.meta.master_seed},
          {"motor_count", model.meta.motor_count},
          {"train_samples", model.meta.train_samples},
          {"member_stream_ids", model.meta.member_stream_ids},
          {"final_val_losses", model.meta.final_val_losses},
          {"best_epochs", model.meta.best_epochs}}},
    };
    return doc.dump(2) + "\n";
}

void save_model(const EnsembleModel& model, const std::string& path) {
    write_file(path, model_to_json(model));
}

EnsembleModel load_model(const std::string& path) {
    json doc;
    try {
        doc = json::parse(read_file(path));
    } catch (const json::parse_error& e) {
        throw ParseError("model " + path + ": " + e.what());
    }
    try {
        if (doc.at("format_version").get<int>() != kModelFormatVersion)
            throw ParseError("model " + path + ": unsupported format_version");
        EnsembleModel model;
        const json& nc = doc.at("network_config");
        model.net.input_dim = nc.at("input_dim").get<int>();
        model.net.hidden_dims = nc.at("hidden_dims").get<std::vector<int>>();
        model.net.output_dim = nc.at("output_dim").get<int>();
        model.net.dropout_p = nc.at("dropout_p").get<double>();
        model.net.bn_momentum = nc.at("bn_momentum").get<double>();
        model.net.bn_eps = nc.at("bn_eps").get<double>();
        model.net.output_ranges.clear();
        for (const auto& r : nc.at("output_ranges"))
            model.net.output_ranges.emplace_back(r.at(0).get<double>(), r.at(1).get<double>());
        model.net.validate();

        const auto mean = doc.at("norm").at("mean").get<std::vector<double>>();
        const auto std_ = doc.at("norm").at("std").get<std::vector<double>>();
        if (mean.size() != 5 || std_.size() != 5)
            throw ParseError("model " + path + ": norm must have 5 entries");
        std::copy(mean.begin(), mean.end(), model.norm.mean.begin());
        std::copy(std_.begin(), std_.end(), model.norm.std.begin());

        for (const auto& member : doc.at("members")) {
            MlpParams p;
            for (const auto& layer : member.at("layers")) {
                HiddenLayer h;
                h.w = matrix_from_json(layer);
                h.b = layer.at("bias").get<std::vector<double>>();
                h.gamma = layer.at("bn_gamma").get<std::vector<double>>();
                h.beta = layer.at("bn_beta").get<std::vector<double>>();
                h.running_mean = layer.at("bn_running_mean").get<std::vector<double>>();
                h.running_var = layer.at("bn_running_var").get<std::vector<double>>();
                p.hidden.push_back(std::move(h));
            }
            p.out.w = matrix_from_json(member.at("output_layer"));
            p.out.b = member.at("output_layer").at("bias").get<std::vector<double>>();
            model.members.push_back(std::move(p));
        }
        if (model.members.empty()) throw ParseError("model " + path + ": no members");

        const json& meta = doc.at("metadata");
        model.meta.master_seed = meta.at("master_seed").get<uint64_t>();
        model.meta.motor_count = meta.at("motor_count").get<size_t>();
        model.meta.train_samples = meta.at("train_samples").get<size_t>();
        model.meta.member_stream_ids = meta.at("member_stream_ids").get<std::vector<uint64_t>>();
        model.meta.final_val_losses = meta.at("final_val_losses").get<std::vector<double>>();
        model.meta.best_epochs = meta.at("best_epochs").get<std::vector<int>>();
        return model;
    } catch (const json::exception& e) {
        throw ParseError("model " + path + ": " + e.what());
    }
}

} // namespace apogee::nn
