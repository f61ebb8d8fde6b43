#include "apogee/network.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "apogee/errors.hpp"

namespace apogee::nn {

namespace {

// y (n x out) = x (n x in) . w^T (in x out) + b
Matrix affine(const Matrix& x, const Matrix& w, const std::vector<double>& b) {
    Matrix y(x.rows, w.rows);
    for (int i = 0; i < x.rows; ++i) {
        const double* xi = x.row(i);
        double* yi = y.row(i);
        for (int o = 0; o < w.rows; ++o) {
            const double* wo = w.row(o);
            double acc = b[o];
            for (int k = 0; k < w.cols; ++k) acc += xi[k] * wo[k];
            yi[o] = acc;
        }
    }
    return y;
}

// Clamped into the open interval so the scaled head stays strictly inside
// its range even when double-precision exp saturates.
double sigmoid(double z) {
    const double s = 1.0 / (1.0 + std::exp(-z));
    return std::clamp(s, 1e-12, 1.0 - 1e-12);
}

void check_input(const NetworkConfig& cfg, const Matrix& batch) {
    if (batch.cols != cfg.input_dim)
        throw ShapeError("forward: batch has " + std::to_string(batch.cols) +
                         " columns, network expects " + std::to_string(cfg.input_dim));
    if (batch.rows < 1) throw ShapeError("forward: empty batch");
}

} // namespace

void NetworkConfig::validate() const {
    if (input_dim < 1 || output_dim < 1 || hidden_dims.empty())
        throw ValidationError("network config: dimensions must be positive");
    for (int h : hidden_dims)
        if (h < 1) throw ValidationError("network config: hidden dims must be positive");
    if (!(dropout_p >= 0.0 && dropout_p < 1.0))
        throw ValidationError("network config: dropout_p must be in [0,1)");
    if (static_cast<int>(output_ranges.size()) != output_dim)
        throw ValidationError("network config: need one output range per output");
    for (const auto& [lo, hi] : output_ranges)
        if (!(lo < hi)) throw ValidationError("network config: output range low must be < high");
}

MlpParams init_network(const NetworkConfig& cfg, RngStream& rng) {
    cfg.validate();
    MlpParams p;
    int fan_in = cfg.input_dim;
    for (int width : cfg.hidden_dims) {
        HiddenLayer layer;
        layer.w = Matrix(width, fan_in);
        const double bound = std::sqrt(6.0 / fan_in);
        for (double& w : layer.w.d) w = rng.uniform(-bound, bound);
        layer.b.assign(width, 0.0);
        layer.gamma.assign(width, 1.0);
        layer.beta.assign(width, 0.0);
        layer.running_mean.assign(width, 0.0);
        layer.running_var.assign(width, 1.0);
        p.hidden.push_back(std::move(layer));
        fan_in = width;
    }
    p.out.w = Matrix(cfg.output_dim, fan_in);
    const double bound = std::sqrt(6.0 / fan_in);
    for (double& w : p.out.w.d) w = rng.uniform(-bound, bound);
    p.out.b.assign(cfg.output_dim, 0.0);
    return p;
}

Matrix forward_train(MlpParams& params, const NetworkConfig& cfg, const Matrix& batch,
                     RngStream& rng, ForwardCache& cache, bool update_running) {
    check_input(cfg, batch);
    const int n = batch.rows;
    const double inv_n = 1.0 / n;

    cache.layers.clear();
    cache.layers.resize(params.hidden.size());

    Matrix x = batch;
    for (size_t l = 0; l < params.hidden.size(); ++l) {
        HiddenLayer& layer = params.hidden[l];
        LayerCache& lc = cache.layers[l];
        const int width = layer.w.rows;

        lc.input = x;
        lc.z = affine(x, layer.w, layer.b);

        lc.mean.assign(width, 0.0);
        lc.var.assign(width, 0.0);
        for (int i = 0; i < n; ++i) {
            const double* zi = lc.z.row(i);
            for (int j = 0; j < width; ++j) lc.mean[j] += zi[j];
        }
        for (int j = 0; j < width; ++j) lc.mean[j] *= inv_n;
        for (int i = 0; i < n; ++i) {
            const double* zi = lc.z.row(i);
            for (int j = 0; j < width; ++j) {
                const double d = zi[j] - lc.mean[j];
                lc.var[j] += d * d;
            }
        }
        for (int j = 0; j < width; ++j) lc.var[j] *= inv_n;

        if (update_running) {
            for (int j = 0; j < width; ++j) {
                layer.running_mean[j] =
                    (1.0 - cfg.bn_momentum) * layer.running_mean[j] + cfg.bn_momentum * lc.mean[j];
                layer.running_var[j] =
                    (1.0 - cfg.bn_momentum) * layer.running_var[j] + cfg.bn_momentum * lc.var[j];
            }
        }

        lc.xhat = Matrix(n, width);
        lc.bn_out = Matrix(n, width);
        Matrix act(n, width);
        const bool use_dropout = cfg.dropout_p > 0.0;
        if (use_dropout) lc.mask = Matrix(n, width);
        const double keep = 1.0 - cfg.dropout_p;
        for (int i = 0; i < n; ++i) {
            const double* zi = lc.z.row(i);
            double* xh = lc.xhat.row(i);
            double* bo = lc.bn_out.row(i);
            double* ai = act.row(i);
            for (int j = 0; j < width; ++j) {
                const double inv_std = 1.0 / std::sqrt(lc.var[j] + cfg.bn_eps);
                xh[j] = (zi[j] - lc.mean[j]) * inv_std;
                bo[j] = layer.gamma[j] * xh[j] + layer.beta[j];
                double a = bo[j] > 0.0 ? bo[j] : 0.0;
                if (use_dropout) {
                    const double m = rng.uniform01() < keep ? 1.0 / keep : 0.0;
                    lc.mask.at(i, j) = m;
                    a *= m;
                }
                ai[j] = a;
            }
        }
        x = std::move(act);
    }

    cache.head_input = x;
    Matrix z_out = affine(x, params.out.w, params.out.b);
    cache.sigmoid = Matrix(n, cfg.output_dim);
    Matrix pred(n, cfg.output_dim);
    for (int i = 0; i < n; ++i) {
        for (int o = 0; o < cfg.output_dim; ++o) {
            const double s = sigmoid(z_out.at(i, o));
            cache.sigmoid.at(i, o) = s;
            const auto& [lo, hi] = cfg.output_ranges[o];
            pred.at(i, o) = lo + (hi - lo) * s;
        }
    }
    return pred;
}

Matrix forward_eval(const MlpParams& params, const NetworkConfig& cfg, const Matrix& batch) {
    check_input(cfg, batch);
    const int n = batch.rows;
    Matrix x = batch;
    for (const HiddenLayer& layer : params.hidden) {
        const int width = layer.w.rows;
        Matrix z = affine(x, layer.w, layer.b);
        Matrix act(n, width);
        for (int i = 0; i < n; ++i) {
            const double* zi = z.row(i);
            double* ai = act.row(i);
            for (int j = 0; j < width; ++j) {
                const double inv_std = 1.0 / std::sqrt(layer.running_var[j] + cfg.bn_eps);
                const double bn =
                    layer.gamma[j] * (zi[j] - layer.running_mean[j]) * inv_std + layer.beta[j];
                ai[j] = bn > 0.0 ? bn : 0.0;
            }
        }
        x = std::move(act);
    }
    Matrix z_out = affine(x, params.out.w, params.out.b);
    Matrix pred(n, cfg.output_dim);
    for (int i = 0; i < n; ++i) {
        for (int o = 0; o < cfg.output_dim; ++o) {
            const auto& [lo, hi] = cfg.output_ranges[o];
            pred.at(i, o) = lo + (hi - lo) * sigmoid(z_out.at(i, o));
        }
    }
    return pred;
}

double mse_loss(const Matrix& pred, const Matrix& target) {
    if (pred.rows != target.rows || pred.cols != target.cols)
        throw ShapeError("mse_loss: shape mismatch");
    double sum = 0.0;
    for (size_t i = 0; i < pred.d.size(); ++i) {
        const double d = pred.d[i] - target.d[i];
        sum += d * d;
    }
    return sum / static_cast<double>(pred.d.size());
}

Matrix mse_grad(const Matrix& pred, const Matrix& target) {
    if (pred.rows != target.rows || pred.cols != target.cols)
        throw ShapeError("mse_grad: shape mismatch");
    Matrix g(pred.rows, pred.cols);
    const double scale = 2.0 / static_cast<double>(pred.d.size());
    for (size_t i = 0; i < pred.d.size(); ++i) g.d[i] = scale * (pred.d[i] - target.d[i]);
    return g;
}

Gradients backward(const MlpParams& params, const NetworkConfig& cfg, const ForwardCache& cache,
                   const Matrix& dpred) {
    const int n = dpred.rows;
    const double inv_n = 1.0 / n;
    Gradients g;
    g.hidden.resize(params.hidden.size());

    // Scaled-sigmoid head: dz = dpred * (hi - lo) * s * (1 - s).
    Matrix dz_out(n, cfg.output_dim);
    for (int i = 0; i < n; ++i) {
        for (int o = 0; o < cfg.output_dim; ++o) {
            const double s = cache.sigmoid.at(i, o);
            const auto& [lo, hi] = cfg.output_ranges[o];
            dz_out.at(i, o) = dpred.at(i, o) * (hi - lo) * s * (1.0 - s);
        }
    }

    g.out_w = Matrix(params.out.w.rows, params.out.w.cols);
    g.out_b.assign(params.out.b.size(), 0.0);
    Matrix dx(n, params.out.w.cols);
    for (int i = 0; i < n; ++i) {
        const double* hi_row = cache.head_input.row(i);
        double* dxi = dx.row(i);
        for (int o = 0; o < params.out.w.rows; ++o) {
            const double d = dz_out.at(i, o);
            g.out_b[o] += d;
            double* gw = g.out_w.row(o);
            const double* wo = params.out.w.row(o);
            for (int k = 0; k < params.out.w.cols; ++k) {
                gw[k] += d * hi_row[k];
                dxi[k] += d * wo[k];
            }
        }
    }

    for (int l = static_cast<int>(params.hidden.size()) - 1; l >= 0; --l) {
        const HiddenLayer& layer = params.hidden[l];
        const LayerCache& lc = cache.layers[l];
        const int width = layer.w.rows;
        HiddenGrads& hg = g.hidden[l];

        // dx currently holds dL/d(activation after dropout).
        Matrix dbn(n, width);
        for (int i = 0; i < n; ++i) {
            const double* dxi = dx.row(i);
            const double* bo = lc.bn_out.row(i);
            double* di = dbn.row(i);
            for (int j = 0; j < width; ++j) {
                double d = dxi[j];
                if (lc.mask.rows > 0) d *= lc.mask.at(i, j);
                di[j] = bo[j] > 0.0 ? d : 0.0; // ReLU gate
            }
        }

        hg.gamma.assign(width, 0.0);
        hg.beta.assign(width, 0.0);
        std::vector<double> dxhat_sum(width, 0.0);
        std::vector<double> dxhat_dot_xhat(width, 0.0);
        Matrix dxhat(n, width);
        for (int i = 0; i < n; ++i) {
            const double* di = dbn.row(i);
            const double* xh = lc.xhat.row(i);
            double* dxh = dxhat.row(i);
            for (int j = 0; j < width; ++j) {
                hg.gamma[j] += di[j] * xh[j];
                hg.beta[j] += di[j];
                const double v = di[j] * layer.gamma[j];
                dxh[j] = v;
                dxhat_sum[j] += v;
                dxhat_dot_xhat[j] += v * xh[j];
            }
        }

        // Batch-norm backward through the batch statistics:
        // dz = inv_std/n * (n*dxhat - sum(dxhat) - xhat * sum(dxhat*xhat))
        Matrix dz(n, width);
        std::vector<double> inv_std(width);
        for (int j = 0; j < width; ++j) inv_std[j] = 1.0 / std::sqrt(lc.var[j] + cfg.bn_eps);
        for (int i = 0; i < n; ++i) {
            const double* dxh = dxhat.row(i);
            const double* xh = lc.xhat.row(i);
            double* dzi = dz.row(i);
            for (int j = 0; j < width; ++j) {
                dzi[j] = inv_std[j] * inv_n *
                         (n * dxh[j] - dxhat_sum[j] - xh[j] * dxhat_dot_xhat[j]);
            }
        }

        hg.w = Matrix(layer.w.rows, layer.w.cols);
        hg.b.assign(width, 0.0);
        Matrix dprev(n, layer.w.cols);
        for (int i = 0; i < n; ++i) {
            const double* xi = lc.input.row(i);
            double* dpi = dprev.row(i);
            for (int j = 0; j < width; ++j) {
                const double d = dz.at(i, j);
                hg.b[j] += d;
                double* gw = hg.w.row(j);
                const double* wj = layer.w.row(j);
                for (int k = 0; k < layer.w.cols; ++k) {
                    gw[k] += d * xi[k];
                    dpi[k] += d * wj[k];
                }
            }
        }
        dx = std::move(dprev);
    }
    return g;
}

} // namespace apogee::nn
