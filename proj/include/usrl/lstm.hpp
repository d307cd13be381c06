#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "usrl/errors.hpp"
#include "usrl/nn.hpp"
#include "usrl/random.hpp"
#include "usrl/tensor.hpp"

namespace usrl {

// Standard gated LSTM cell, one weight matrix pair per direction. Gate rows
// of W_ih/W_hh/b are laid out [input | forget | candidate | output], each of
// height `hidden`. Forget-gate bias is initialized to +1, everything else to
// the uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)) rule.
template <typename S>
struct LstmDirection {
  Parameter<S>* w_ih = nullptr;  // 4h x in
  Parameter<S>* w_hh = nullptr;  // 4h x h
  Parameter<S>* b = nullptr;     // 4h

  LstmDirection() = default;
  LstmDirection(ParameterSet<S>& params, const std::string& prefix, std::size_t in,
                std::size_t hidden)
      : w_ih(params.create(prefix + ".W_ih", {4 * hidden, in})),
        w_hh(params.create(prefix + ".W_hh", {4 * hidden, hidden})),
        b(params.create(prefix + ".b", {4 * hidden})) {}

  std::size_t hidden() const { return w_hh->value.cols(); }
  std::size_t input() const { return w_ih->value.cols(); }

  void init(StableRng& rng) {
    const double bi = 1.0 / std::sqrt(static_cast<double>(input()));
    for (std::size_t i = 0; i < w_ih->value.size(); ++i)
      w_ih->value[i] = static_cast<S>(rng.uniform(-bi, bi));
    const double bh = 1.0 / std::sqrt(static_cast<double>(hidden()));
    for (std::size_t i = 0; i < w_hh->value.size(); ++i)
      w_hh->value[i] = static_cast<S>(rng.uniform(-bh, bh));
    b->value.zero();
    const std::size_t h = hidden();
    for (std::size_t j = h; j < 2 * h; ++j) b->value[j] = S{1};  // forget gate
  }
};

// Per-timestep activations kept for the exact backward pass. Rows are in
// processing order (reversed for the backward direction).
template <typename S>
struct LstmDirectionCtx {
  Tensor<S> x;  // n x in, processing order
  Tensor<S> gi, gf, gg, go;  // n x h gate activations
  Tensor<S> c, tc;           // cell state and tanh(cell)
  Tensor<S> hs;              // hidden states, n x h
};

namespace detail {

// Runs one direction over x rows in processing order; returns hidden states.
template <typename S>
void lstm_run(const LstmDirection<S>& dir, LstmDirectionCtx<S>& ctx) {
  const std::size_t n = ctx.x.rows(), in = ctx.x.cols(), h = dir.hidden();
  if (in != dir.input()) throw ShapeError("lstm: input width mismatch");
  ctx.gi = Tensor<S>(n, h);
  ctx.gf = Tensor<S>(n, h);
  ctx.gg = Tensor<S>(n, h);
  ctx.go = Tensor<S>(n, h);
  ctx.c = Tensor<S>(n, h);
  ctx.tc = Tensor<S>(n, h);
  ctx.hs = Tensor<S>(n, h);
  std::vector<S> pre(4 * h);
  std::vector<S> hprev(h, S{0}), cprev(h, S{0});
  for (std::size_t t = 0; t < n; ++t) {
    const S* xt = ctx.x.row(t);
    for (std::size_t j = 0; j < 4 * h; ++j) {
      const S* wi = dir.w_ih->value.row(j);
      S acc = dir.b->value[j];
      for (std::size_t k = 0; k < in; ++k) acc += wi[k] * xt[k];
      const S* wh = dir.w_hh->value.row(j);
      for (std::size_t k = 0; k < h; ++k) acc += wh[k] * hprev[k];
      pre[j] = acc;
    }
    for (std::size_t k = 0; k < h; ++k) {
      const S i = sigmoid(pre[k]);
      const S f = sigmoid(pre[h + k]);
      const S g = std::tanh(pre[2 * h + k]);
      const S o = sigmoid(pre[3 * h + k]);
      const S c = f * cprev[k] + i * g;
      const S tc = std::tanh(c);
      ctx.gi(t, k) = i;
      ctx.gf(t, k) = f;
      ctx.gg(t, k) = g;
      ctx.go(t, k) = o;
      ctx.c(t, k) = c;
      ctx.tc(t, k) = tc;
      ctx.hs(t, k) = o * tc;
    }
    for (std::size_t k = 0; k < h; ++k) {
      hprev[k] = ctx.hs(t, k);
      cprev[k] = ctx.c(t, k);
    }
  }
}

// Backward through one direction. dh holds d(loss)/d(hidden state) per step
// in processing order; returns dx in processing order and accumulates
// parameter gradients.
template <typename S>
Tensor<S> lstm_backprop(const LstmDirection<S>& dir, const LstmDirectionCtx<S>& ctx,
                        const Tensor<S>& dh_out) {
  const std::size_t n = ctx.x.rows(), in = ctx.x.cols(), h = dir.hidden();
  Tensor<S> dx(n, in);
  std::vector<S> dh_rec(h, S{0}), dc_next(h, S{0});
  std::vector<S> dpre(4 * h);
  for (std::size_t ti = n; ti-- > 0;) {
    for (std::size_t k = 0; k < h; ++k) {
      const S i = ctx.gi(ti, k), f = ctx.gf(ti, k), g = ctx.gg(ti, k), o = ctx.go(ti, k);
      const S tc = ctx.tc(ti, k);
      const S cprev = ti == 0 ? S{0} : ctx.c(ti - 1, k);
      const S dh = dh_out(ti, k) + dh_rec[k];
      const S do_ = dh * tc;
      S dc = dh * o * (S{1} - tc * tc) + dc_next[k];
      const S di = dc * g;
      const S dg = dc * i;
      const S df = dc * cprev;
      dc_next[k] = dc * f;
      dpre[k] = di * i * (S{1} - i);
      dpre[h + k] = df * f * (S{1} - f);
      dpre[2 * h + k] = dg * (S{1} - g * g);
      dpre[3 * h + k] = do_ * o * (S{1} - o);
    }
    const S* xt = ctx.x.row(ti);
    const S* hprev = ti == 0 ? nullptr : ctx.hs.row(ti - 1);
    std::fill(dh_rec.begin(), dh_rec.end(), S{0});
    for (std::size_t j = 0; j < 4 * h; ++j) {
      const S d = dpre[j];
      if (d == S{0}) continue;
      axpy(d, xt, dir.w_ih->grad.row(j), in);
      axpy(d, dir.w_ih->value.row(j), dx.row(ti), in);
      if (hprev) {
        axpy(d, hprev, dir.w_hh->grad.row(j), h);
        axpy(d, dir.w_hh->value.row(j), dh_rec.data(), h);
      }
      dir.b->grad[j] += d;
    }
  }
  return dx;
}

}  // namespace detail

template <typename S>
struct BiLstmCtx {
  LstmDirectionCtx<S> fwd;
  LstmDirectionCtx<S> bwd;
};

/// Bidirectional LSTM layer: output row i is [forward state at i | backward
/// state at i], width 2h. Initial hidden/cell states are zero.
template <typename S>
struct BiLstmLayer {
  LstmDirection<S> fwd;
  LstmDirection<S> bwd;

  BiLstmLayer() = default;
  BiLstmLayer(ParameterSet<S>& params, const std::string& prefix, std::size_t in,
              std::size_t hidden)
      : fwd(params, prefix + ".fwd", in, hidden), bwd(params, prefix + ".bwd", in, hidden) {}

  std::size_t hidden() const { return fwd.hidden(); }
  std::size_t input() const { return fwd.input(); }

  void init(StableRng& rng) {
    fwd.init(rng);
    bwd.init(rng);
  }

  Tensor<S> forward(const Tensor<S>& x, BiLstmCtx<S>& ctx) const {
    const std::size_t n = x.rows(), h = hidden();
    if (n == 0) throw ShapeError("bilstm: empty sequence");
    ctx.fwd.x = x;
    ctx.bwd.x = Tensor<S>(n, x.cols());
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t k = 0; k < x.cols(); ++k) ctx.bwd.x(i, k) = x(n - 1 - i, k);
    detail::lstm_run(fwd, ctx.fwd);
    detail::lstm_run(bwd, ctx.bwd);
    Tensor<S> out(n, 2 * h);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t k = 0; k < h; ++k) {
        out(i, k) = ctx.fwd.hs(i, k);
        out(i, h + k) = ctx.bwd.hs(n - 1 - i, k);
      }
    }
    return out;
  }

  // dout: n x 2h in sentence order; returns dx (n x in).
  Tensor<S> backward(const BiLstmCtx<S>& ctx, const Tensor<S>& dout) {
    const std::size_t n = ctx.fwd.x.rows(), h = hidden();
    if (dout.rows() != n || dout.cols() != 2 * h) throw ShapeError("bilstm backward: shape");
    Tensor<S> dh_f(n, h), dh_b(n, h);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t k = 0; k < h; ++k) {
        dh_f(i, k) = dout(i, k);
        dh_b(n - 1 - i, k) = dout(i, h + k);
      }
    }
    Tensor<S> dx = detail::lstm_backprop(fwd, ctx.fwd, dh_f);
    Tensor<S> dx_rev = detail::lstm_backprop(bwd, ctx.bwd, dh_b);
    for (std::size_t i = 0; i < n; ++i)
      axpy(S{1}, dx_rev.row(n - 1 - i), dx.row(i), dx.cols());
    return dx;
  }
};

/// Spec-facing convenience: runs a single BiLSTM layer forward.
template <typename S>
Tensor<S> bilstm(const Tensor<S>& x, const BiLstmLayer<S>& layer) {
  BiLstmCtx<S> ctx;
  return layer.forward(x, ctx);
}

template <typename S>
struct ResidualStackCtx {
  std::vector<Tensor<S>> inputs;   // x_0 .. x_{K-1}: input to each layer
  std::vector<BiLstmCtx<S>> lstm;  // per layer
  std::vector<Tensor<S>> dropout_masks;  // empty when dropout is off
};

/// Stack of BiLSTM layers with residual concatenation: the output of every
/// layer is appended to its input, so layer j maps width w to w + 2h and the
/// final width is w0 + 2*h*layers. Zero layers is the identity.
template <typename S>
class ResidualBiLstmStack {
 public:
  ResidualBiLstmStack() = default;
  ResidualBiLstmStack(ParameterSet<S>& params, const std::string& prefix, std::size_t in,
                      std::size_t hidden, std::size_t layers) {
    std::size_t w = in;
    for (std::size_t j = 0; j < layers; ++j) {
      layers_.emplace_back(params, prefix + ".bilstm" + std::to_string(j), w, hidden);
      w += 2 * hidden;
    }
  }

  std::size_t layer_count() const { return layers_.size(); }
  std::size_t output_width(std::size_t in) const {
    return in + (layers_.empty() ? 0 : 2 * layers_[0].hidden() * layers_.size());
  }

  void init(StableRng& rng) {
    for (auto& l : layers_) l.init(rng);
  }

  // dropout_rng non-null enables inverted dropout on each layer's BiLSTM
  // output (training mode only).
  Tensor<S> forward(const Tensor<S>& x0, ResidualStackCtx<S>& ctx, double dropout = 0.0,
                    StableRng* dropout_rng = nullptr) const {
    Tensor<S> cur = x0;
    ctx.inputs.clear();
    ctx.lstm.assign(layers_.size(), {});
    ctx.dropout_masks.clear();
    const bool drop = dropout > 0.0 && dropout_rng != nullptr;
    for (std::size_t j = 0; j < layers_.size(); ++j) {
      ctx.inputs.push_back(cur);
      Tensor<S> u = layers_[j].forward(cur, ctx.lstm[j]);
      if (drop) {
        Tensor<S> mask(u.shape());
        const S keep_inv = static_cast<S>(1.0 / (1.0 - dropout));
        for (std::size_t i = 0; i < u.size(); ++i)
          mask[i] = dropout_rng->next_unit() < dropout ? S{0} : keep_inv;
        for (std::size_t i = 0; i < u.size(); ++i) u[i] *= mask[i];
        ctx.dropout_masks.push_back(std::move(mask));
      }
      Tensor<S> next(cur.rows(), cur.cols() + u.cols());
      for (std::size_t i = 0; i < cur.rows(); ++i) {
        S* nr = next.row(i);
        const S* cr = cur.row(i);
        const S* ur = u.row(i);
        for (std::size_t k = 0; k < cur.cols(); ++k) nr[k] = cr[k];
        for (std::size_t k = 0; k < u.cols(); ++k) nr[cur.cols() + k] = ur[k];
      }
      cur = std::move(next);
    }
    return cur;
  }

  // dout has the final concatenated width; returns dx0.
  Tensor<S> backward(ResidualStackCtx<S>& ctx, const Tensor<S>& dout) {
    Tensor<S> dcur = dout;
    for (std::size_t j = layers_.size(); j-- > 0;) {
      const std::size_t win = ctx.inputs[j].cols();
      const std::size_t wu = dcur.cols() - win;
      Tensor<S> du(dcur.rows(), wu);
      Tensor<S> dprev(dcur.rows(), win);
      for (std::size_t i = 0; i < dcur.rows(); ++i) {
        const S* dr = dcur.row(i);
        for (std::size_t k = 0; k < win; ++k) dprev(i, k) = dr[k];
        for (std::size_t k = 0; k < wu; ++k) du(i, k) = dr[win + k];
      }
      if (!ctx.dropout_masks.empty()) {
        const Tensor<S>& mask = ctx.dropout_masks[j];
        for (std::size_t i = 0; i < du.size(); ++i) du[i] *= mask[i];
      }
      Tensor<S> dx = layers_[j].backward(ctx.lstm[j], du);
      axpy(S{1}, dx.data(), dprev.data(), dprev.size());
      dcur = std::move(dprev);
    }
    return dcur;
  }

  std::vector<BiLstmLayer<S>>& layers() { return layers_; }
  const std::vector<BiLstmLayer<S>>& layers() const { return layers_; }

 private:
  std::vector<BiLstmLayer<S>> layers_;
};

}  // namespace usrl
