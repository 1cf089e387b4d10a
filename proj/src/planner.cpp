#include "deskdrive/planner.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <stdexcept>

#include "deskdrive/rng.hpp"
#include "deskdrive/scene_io.hpp"
#include "json.hpp"

namespace deskdrive {

namespace {

// Fixed input preconditioning so raw meters / m/s land near unit scale.
constexpr double kPosScale = 0.05;
constexpr double kYawScale = 0.5;
constexpr double kSpeedScale = 0.1;
constexpr double kSizeScale = 0.2;
constexpr double kClassScale = 0.5;
constexpr double kLnEps = 1e-5;

struct BlockOffsets {
  size_t wq, bq, wk, bk, wv, bv, wo, bo;
  size_t g1, c1, w1, b1, w2, b2, g2, c2;
};

struct ParamLayout {
  std::array<int, 4> enc_in{ArchConfig::kEgoInputDim, ArchConfig::kAgentInputDim,
                            ArchConfig::kLaneInputDim,
                            ArchConfig::kCrosswalkInputDim};
  std::array<size_t, 4> enc_w{}, enc_b{};
  std::vector<BlockOffsets> blocks;
  size_t head_w = 0, head_b = 0;
  size_t total = 0;
};

ParamLayout make_layout(const ArchConfig& a) {
  if (a.embed_dim <= 0 || a.heads <= 0 || a.embed_dim % a.heads != 0)
    throw std::invalid_argument("planner: embed_dim must divide into heads");
  ParamLayout lay;
  size_t off = 0;
  auto take = [&off](size_t n) {
    size_t at = off;
    off += n;
    return at;
  };
  const size_t d = static_cast<size_t>(a.embed_dim);
  const size_t f = static_cast<size_t>(a.ff_dim);
  for (int t = 0; t < 4; ++t) {
    lay.enc_w[t] = take(static_cast<size_t>(lay.enc_in[t]) * d);
    lay.enc_b[t] = take(d);
  }
  lay.blocks.resize(static_cast<size_t>(a.blocks));
  for (BlockOffsets& b : lay.blocks) {
    b.wq = take(d * d); b.bq = take(d);
    b.wk = take(d * d); b.bk = take(d);
    b.wv = take(d * d); b.bv = take(d);
    b.wo = take(d * d); b.bo = take(d);
    b.g1 = take(d); b.c1 = take(d);
    b.w1 = take(d * f); b.b1 = take(f);
    b.w2 = take(f * d); b.b2 = take(d);
    b.g2 = take(d); b.c2 = take(d);
  }
  lay.head_w = take(d * static_cast<size_t>(ArchConfig::kOutputDim));
  lay.head_b = take(static_cast<size_t>(ArchConfig::kOutputDim));
  lay.total = off;
  return lay;
}

// Y[rows][out] = X[rows][in] * W[in][out] + b
void linear_forward(const double* X, const double* W, const double* b,
                    double* Y, int rows, int in, int out) {
  for (int r = 0; r < rows; ++r) {
    double* y = Y + static_cast<size_t>(r) * out;
    for (int o = 0; o < out; ++o) y[o] = b[o];
    const double* x = X + static_cast<size_t>(r) * in;
    for (int k = 0; k < in; ++k) {
      double xv = x[k];
      const double* w = W + static_cast<size_t>(k) * out;
      for (int o = 0; o < out; ++o) y[o] += xv * w[o];
    }
  }
}

// dX += dY W^T, dW += X^T dY, dB += colsum(dY); any output may be null.
void linear_backward(const double* X, const double* W, const double* dY,
                     double* dX, double* dW, double* dB, int rows, int in,
                     int out) {
  for (int r = 0; r < rows; ++r) {
    const double* dy = dY + static_cast<size_t>(r) * out;
    if (dB)
      for (int o = 0; o < out; ++o) dB[o] += dy[o];
    const double* x = X + static_cast<size_t>(r) * in;
    for (int k = 0; k < in; ++k) {
      if (dW) {
        double xv = x[k];
        double* dw = dW + static_cast<size_t>(k) * out;
        for (int o = 0; o < out; ++o) dw[o] += xv * dy[o];
      }
      if (dX) {
        const double* w = W + static_cast<size_t>(k) * out;
        double acc = 0.0;
        for (int o = 0; o < out; ++o) acc += dy[o] * w[o];
        dX[static_cast<size_t>(r) * in + k] += acc;
      }
    }
  }
}

void layernorm_forward(const double* X, const double* g, const double* c,
                       double* Y, double* xhat, double* rstd, int rows,
                       int dim) {
  for (int r = 0; r < rows; ++r) {
    const double* x = X + static_cast<size_t>(r) * dim;
    double mean = 0.0;
    for (int d = 0; d < dim; ++d) mean += x[d];
    mean /= dim;
    double var = 0.0;
    for (int d = 0; d < dim; ++d) var += (x[d] - mean) * (x[d] - mean);
    var /= dim;
    double rs = 1.0 / std::sqrt(var + kLnEps);
    rstd[r] = rs;
    double* xh = xhat + static_cast<size_t>(r) * dim;
    double* y = Y + static_cast<size_t>(r) * dim;
    for (int d = 0; d < dim; ++d) {
      xh[d] = (x[d] - mean) * rs;
      y[d] = g[d] * xh[d] + c[d];
    }
  }
}

void layernorm_backward(const double* xhat, const double* rstd,
                        const double* g, const double* dY, double* dX,
                        double* dG, double* dC, int rows, int dim) {
  for (int r = 0; r < rows; ++r) {
    const double* xh = xhat + static_cast<size_t>(r) * dim;
    const double* dy = dY + static_cast<size_t>(r) * dim;
    double s1 = 0.0, s2 = 0.0;
    for (int d = 0; d < dim; ++d) {
      double dxh = dy[d] * g[d];
      s1 += dxh;
      s2 += dxh * xh[d];
      dG[d] += dy[d] * xh[d];
      dC[d] += dy[d];
    }
    s1 /= dim;
    s2 /= dim;
    double rs = rstd[r];
    double* dx = dX + static_cast<size_t>(r) * dim;
    for (int d = 0; d < dim; ++d)
      dx[d] += rs * (dy[d] * g[d] - s1 - xh[d] * s2);
  }
}

struct TokenInfo {
  uint8_t type;  // 0 ego, 1 agent, 2 lane, 3 crosswalk
  uint8_t slot;
};

int gather_tokens(const FeatureSet& fs, TokenInfo* toks) {
  int n = 0;
  toks[n++] = {0, 0};
  for (int i = 0; i < FeatureSet::kAgentSlots; ++i)
    if (fs.agent_mask[static_cast<size_t>(i)])
      toks[n++] = {1, static_cast<uint8_t>(i)};
  for (int i = 0; i < FeatureSet::kLaneSlots; ++i)
    if (fs.lane_mask[static_cast<size_t>(i)])
      toks[n++] = {2, static_cast<uint8_t>(i)};
  for (int i = 0; i < FeatureSet::kCrosswalkSlots; ++i)
    if (fs.crosswalk_mask[static_cast<size_t>(i)])
      toks[n++] = {3, static_cast<uint8_t>(i)};
  return n;
}

// Writes the preconditioned raw features for one token; returns its dim.
int scale_input(const FeatureSet& fs, TokenInfo tok, double* dst) {
  switch (tok.type) {
    case 0: {
      for (int r = 0; r < FeatureSet::kHistoryRows; ++r) {
        const double* src = &fs.ego_history[static_cast<size_t>(r) * 4];
        dst[4 * r + 0] = src[0] * kPosScale;
        dst[4 * r + 1] = src[1] * kPosScale;
        dst[4 * r + 2] = src[2] * kYawScale;
        dst[4 * r + 3] = src[3] * kSpeedScale;
      }
      return ArchConfig::kEgoInputDim;
    }
    case 1: {
      const double* src = &fs.agents[static_cast<size_t>(tok.slot) * FeatureSet::kAgentDim];
      dst[0] = src[0] * kPosScale;
      dst[1] = src[1] * kPosScale;
      dst[2] = src[2];
      dst[3] = src[3];
      dst[4] = src[4] * kSizeScale;
      dst[5] = src[5] * kSizeScale;
      dst[6] = src[6] * kSpeedScale;
      dst[7] = src[7] * kSpeedScale;
      dst[8] = src[8] * kClassScale;
      return ArchConfig::kAgentInputDim;
    }
    case 2: {
      const double* src = &fs.lanes[static_cast<size_t>(tok.slot) * FeatureSet::kLaneDim];
      for (int p = 0; p < 2 * FeatureSet::kLanePoints; ++p) dst[p] = src[p] * kPosScale;
      for (int p = 0; p < 3; ++p)
        dst[2 * FeatureSet::kLanePoints + p] = src[2 * FeatureSet::kLanePoints + p];
      return ArchConfig::kLaneInputDim;
    }
    default: {
      const double* src =
          &fs.crosswalks[static_cast<size_t>(tok.slot) * FeatureSet::kCrosswalkDim];
      for (int p = 0; p < FeatureSet::kCrosswalkDim; ++p) dst[p] = src[p] * kPosScale;
      return ArchConfig::kCrosswalkInputDim;
    }
  }
}

struct BlockCache {
  std::vector<double> x_in, q, k, v, attn_p, hcat;
  std::vector<double> xhat1, rstd1, y1, fact;
  std::vector<double> xhat2, rstd2, x_out;
};

struct Workspace {
  explicit Workspace(const ArchConfig& arch) {
    const size_t a = ArchConfig::kMaxTokens;
    const size_t d = static_cast<size_t>(arch.embed_dim);
    const size_t f = static_cast<size_t>(arch.ff_dim);
    const size_t h = static_cast<size_t>(arch.heads);
    tokens.resize(a);
    scaled.resize(a * ArchConfig::kEgoInputDim);
    scaled_dim.resize(a);
    x0.resize(a * d);
    caches.resize(static_cast<size_t>(arch.blocks));
    for (BlockCache& c : caches) {
      c.x_in.resize(a * d);
      c.q.resize(a * d);
      c.k.resize(a * d);
      c.v.resize(a * d);
      c.attn_p.resize(h * a * a);
      c.hcat.resize(a * d);
      c.xhat1.resize(a * d);
      c.rstd1.resize(a);
      c.y1.resize(a * d);
      c.fact.resize(a * f);
      c.xhat2.resize(a * d);
      c.rstd2.resize(a);
      c.x_out.resize(a * d);
    }
    out.resize(ArchConfig::kOutputDim);
    buf_r.resize(a * d);
    buf_f.resize(a * f);
    d_cur.resize(a * d);
    d_r.resize(a * d);
    d_y1.resize(a * d);
    d_q.resize(a * d);
    d_k.resize(a * d);
    d_v.resize(a * d);
    d_hcat.resize(a * d);
    d_fact.resize(a * f);
    d_row.resize(a);
    d_out.resize(ArchConfig::kOutputDim);
  }

  std::vector<TokenInfo> tokens;
  std::vector<double> scaled;
  std::vector<int> scaled_dim;
  std::vector<double> x0;
  std::vector<BlockCache> caches;
  std::vector<double> out;
  // forward scratch
  std::vector<double> buf_r, buf_f;
  // backward scratch
  std::vector<double> d_cur, d_r, d_y1, d_q, d_k, d_v, d_hcat, d_fact, d_row,
      d_out;
  int n_tokens = 0;
};

void check_finite(const double* x, size_t n, const char* stage) {
  for (size_t i = 0; i < n; ++i)
    if (!std::isfinite(x[i]))
      throw std::runtime_error(std::string("planner forward: non-finite value at ") +
                               stage);
}

void attention_forward(const ArchConfig& arch, int A, BlockCache& c) {
  const int d = arch.embed_dim;
  const int hd = arch.head_dim();
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(hd));
  for (int h = 0; h < arch.heads; ++h) {
    const int col = h * hd;
    double* P = c.attn_p.data() + static_cast<size_t>(h) * A * A;
    for (int a = 0; a < A; ++a) {
      const double* qa = c.q.data() + static_cast<size_t>(a) * d + col;
      double* row = P + static_cast<size_t>(a) * A;
      double mx = -1e300;
      for (int b = 0; b < A; ++b) {
        const double* kb = c.k.data() + static_cast<size_t>(b) * d + col;
        double s = 0.0;
        for (int j = 0; j < hd; ++j) s += qa[j] * kb[j];
        row[b] = s * inv_sqrt;
        mx = std::max(mx, row[b]);
      }
      double sum = 0.0;
      for (int b = 0; b < A; ++b) {
        row[b] = std::exp(row[b] - mx);
        sum += row[b];
      }
      double inv = 1.0 / sum;
      for (int b = 0; b < A; ++b) row[b] *= inv;
      double* ha = c.hcat.data() + static_cast<size_t>(a) * d + col;
      for (int j = 0; j < hd; ++j) ha[j] = 0.0;
      for (int b = 0; b < A; ++b) {
        const double* vb = c.v.data() + static_cast<size_t>(b) * d + col;
        double p = row[b];
        for (int j = 0; j < hd; ++j) ha[j] += p * vb[j];
      }
    }
  }
}

void attention_backward(const ArchConfig& arch, int A, const BlockCache& c,
                        const double* d_hcat, double* d_q, double* d_k,
                        double* d_v, std::vector<double>& scratch) {
  const int d = arch.embed_dim;
  const int hd = arch.head_dim();
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(hd));
  if (scratch.size() < static_cast<size_t>(A)) scratch.resize(static_cast<size_t>(A));
  for (int h = 0; h < arch.heads; ++h) {
    const int col = h * hd;
    const double* P = c.attn_p.data() + static_cast<size_t>(h) * A * A;
    for (int a = 0; a < A; ++a) {
      const double* row = P + static_cast<size_t>(a) * A;
      const double* dha = d_hcat + static_cast<size_t>(a) * d + col;
      // dP and dV
      double* dp = scratch.data();
      for (int b = 0; b < A; ++b) {
        const double* vb = c.v.data() + static_cast<size_t>(b) * d + col;
        double acc = 0.0;
        for (int j = 0; j < hd; ++j) acc += dha[j] * vb[j];
        dp[b] = acc;
        double* dvb = d_v + static_cast<size_t>(b) * d + col;
        double p = row[b];
        for (int j = 0; j < hd; ++j) dvb[j] += p * dha[j];
      }
      // softmax backward
      double dot = 0.0;
      for (int b = 0; b < A; ++b) dot += row[b] * dp[b];
      double* dqa = d_q + static_cast<size_t>(a) * d + col;
      const double* qa = c.q.data() + static_cast<size_t>(a) * d + col;
      for (int b = 0; b < A; ++b) {
        double dscore = row[b] * (dp[b] - dot) * inv_sqrt;
        const double* kb = c.k.data() + static_cast<size_t>(b) * d + col;
        double* dkb = d_k + static_cast<size_t>(b) * d + col;
        for (int j = 0; j < hd; ++j) {
          dqa[j] += dscore * kb[j];
          dkb[j] += dscore * qa[j];
        }
      }
    }
  }
}

// Runs the network and fills the workspace caches. Returns the 24 raw
// outputs in ws.out.
void forward_cached(const PlannerParams& params, const ParamLayout& lay,
                    const FeatureSet& fs, Workspace& ws) {
  const ArchConfig& arch = params.arch;
  const int d = arch.embed_dim;
  const double* pv = params.values.data();

  int A = gather_tokens(fs, ws.tokens.data());
  ws.n_tokens = A;

  for (int a = 0; a < A; ++a) {
    double* sc = ws.scaled.data() + static_cast<size_t>(a) * ArchConfig::kEgoInputDim;
    int dim = scale_input(fs, ws.tokens[static_cast<size_t>(a)], sc);
    ws.scaled_dim[static_cast<size_t>(a)] = dim;
    int t = ws.tokens[static_cast<size_t>(a)].type;
    linear_forward(sc, pv + lay.enc_w[static_cast<size_t>(t)],
                   pv + lay.enc_b[static_cast<size_t>(t)],
                   ws.x0.data() + static_cast<size_t>(a) * d, 1, dim, d);
  }
  check_finite(ws.x0.data(), static_cast<size_t>(A) * d, "embeddings");

  const double* cur = ws.x0.data();
  for (int b = 0; b < arch.blocks; ++b) {
    BlockCache& c = ws.caches[static_cast<size_t>(b)];
    const BlockOffsets& o = lay.blocks[static_cast<size_t>(b)];
    std::memcpy(c.x_in.data(), cur, static_cast<size_t>(A) * d * sizeof(double));
    linear_forward(cur, pv + o.wq, pv + o.bq, c.q.data(), A, d, d);
    linear_forward(cur, pv + o.wk, pv + o.bk, c.k.data(), A, d, d);
    linear_forward(cur, pv + o.wv, pv + o.bv, c.v.data(), A, d, d);
    attention_forward(arch, A, c);
    // residual 1: x + Wo(hcat)
    linear_forward(c.hcat.data(), pv + o.wo, pv + o.bo, ws.buf_r.data(), A, d, d);
    for (int i = 0; i < A * d; ++i) ws.buf_r[static_cast<size_t>(i)] += cur[i];
    layernorm_forward(ws.buf_r.data(), pv + o.g1, pv + o.c1, c.y1.data(),
                      c.xhat1.data(), c.rstd1.data(), A, d);
    // feedforward with relu
    linear_forward(c.y1.data(), pv + o.w1, pv + o.b1, ws.buf_f.data(), A, d,
                   arch.ff_dim);
    for (int i = 0; i < A * arch.ff_dim; ++i)
      c.fact[static_cast<size_t>(i)] = std::max(0.0, ws.buf_f[static_cast<size_t>(i)]);
    linear_forward(c.fact.data(), pv + o.w2, pv + o.b2, ws.buf_r.data(), A,
                   arch.ff_dim, d);
    for (int i = 0; i < A * d; ++i)
      ws.buf_r[static_cast<size_t>(i)] += c.y1[static_cast<size_t>(i)];
    layernorm_forward(ws.buf_r.data(), pv + o.g2, pv + o.c2, c.x_out.data(),
                      c.xhat2.data(), c.rstd2.data(), A, d);
    char stage[32];
    std::snprintf(stage, sizeof(stage), "block %d", b);
    check_finite(c.x_out.data(), static_cast<size_t>(A) * d, stage);
    cur = c.x_out.data();
  }

  linear_forward(cur, pv + lay.head_w, pv + lay.head_b, ws.out.data(), 1, d,
                 ArchConfig::kOutputDim);
  check_finite(ws.out.data(), ArchConfig::kOutputDim, "output head");
}

// Backward from d(ws.out) into the flat gradient. Uses the caches produced
// by forward_cached.
void backward_cached(const PlannerParams& params, const ParamLayout& lay,
                     Workspace& ws, double* grad) {
  const ArchConfig& arch = params.arch;
  const int d = arch.embed_dim;
  const int A = ws.n_tokens;
  const double* pv = params.values.data();

  std::memset(ws.d_cur.data(), 0, static_cast<size_t>(A) * d * sizeof(double));
  const double* x_last = arch.blocks > 0
                             ? ws.caches[static_cast<size_t>(arch.blocks - 1)].x_out.data()
                             : ws.x0.data();
  linear_backward(x_last, pv + lay.head_w, ws.d_out.data(), ws.d_cur.data(),
                  grad + lay.head_w, grad + lay.head_b, 1, d,
                  ArchConfig::kOutputDim);

  for (int b = arch.blocks - 1; b >= 0; --b) {
    BlockCache& c = ws.caches[static_cast<size_t>(b)];
    const BlockOffsets& o = lay.blocks[static_cast<size_t>(b)];

    // layer norm 2 -> d_r = d(residual2 input)
    std::memset(ws.d_r.data(), 0, static_cast<size_t>(A) * d * sizeof(double));
    layernorm_backward(c.xhat2.data(), c.rstd2.data(), pv + o.g2,
                       ws.d_cur.data(), ws.d_r.data(), grad + o.g2,
                       grad + o.c2, A, d);
    // r2 = y1 + fact @ w2
    std::memcpy(ws.d_y1.data(), ws.d_r.data(),
                static_cast<size_t>(A) * d * sizeof(double));
    std::memset(ws.d_fact.data(), 0,
                static_cast<size_t>(A) * arch.ff_dim * sizeof(double));
    linear_backward(c.fact.data(), pv + o.w2, ws.d_r.data(), ws.d_fact.data(),
                    grad + o.w2, grad + o.b2, A, arch.ff_dim, d);
    for (int i = 0; i < A * arch.ff_dim; ++i)
      if (c.fact[static_cast<size_t>(i)] <= 0.0) ws.d_fact[static_cast<size_t>(i)] = 0.0;
    linear_backward(c.y1.data(), pv + o.w1, ws.d_fact.data(), ws.d_y1.data(),
                    grad + o.w1, grad + o.b1, A, d, arch.ff_dim);

    // layer norm 1 -> d_r = d(residual1 input)
    std::memset(ws.d_r.data(), 0, static_cast<size_t>(A) * d * sizeof(double));
    layernorm_backward(c.xhat1.data(), c.rstd1.data(), pv + o.g1,
                       ws.d_y1.data(), ws.d_r.data(), grad + o.g1,
                       grad + o.c1, A, d);

    // r1 = x_in + hcat @ wo
    std::memcpy(ws.d_cur.data(), ws.d_r.data(),
                static_cast<size_t>(A) * d * sizeof(double));
    std::memset(ws.d_hcat.data(), 0, static_cast<size_t>(A) * d * sizeof(double));
    linear_backward(c.hcat.data(), pv + o.wo, ws.d_r.data(), ws.d_hcat.data(),
                    grad + o.wo, grad + o.bo, A, d, d);

    std::memset(ws.d_q.data(), 0, static_cast<size_t>(A) * d * sizeof(double));
    std::memset(ws.d_k.data(), 0, static_cast<size_t>(A) * d * sizeof(double));
    std::memset(ws.d_v.data(), 0, static_cast<size_t>(A) * d * sizeof(double));
    attention_backward(arch, A, c, ws.d_hcat.data(), ws.d_q.data(),
                       ws.d_k.data(), ws.d_v.data(), ws.d_row);

    linear_backward(c.x_in.data(), pv + o.wq, ws.d_q.data(), ws.d_cur.data(),
                    grad + o.wq, grad + o.bq, A, d, d);
    linear_backward(c.x_in.data(), pv + o.wk, ws.d_k.data(), ws.d_cur.data(),
                    grad + o.wk, grad + o.bk, A, d, d);
    linear_backward(c.x_in.data(), pv + o.wv, ws.d_v.data(), ws.d_cur.data(),
                    grad + o.wv, grad + o.bv, A, d, d);
  }

  for (int a = 0; a < A; ++a) {
    int t = ws.tokens[static_cast<size_t>(a)].type;
    linear_backward(ws.scaled.data() + static_cast<size_t>(a) * ArchConfig::kEgoInputDim,
                    pv + lay.enc_w[static_cast<size_t>(t)],
                    ws.d_cur.data() + static_cast<size_t>(a) * d, nullptr,
                    grad + lay.enc_w[static_cast<size_t>(t)],
                    grad + lay.enc_b[static_cast<size_t>(t)], 1,
                    ws.scaled_dim[static_cast<size_t>(a)], d);
  }
}

Trajectory out_to_trajectory(const std::vector<double>& out) {
  Trajectory traj;
  for (int t = 0; t < kHorizonSteps; ++t)
    traj.points[static_cast<size_t>(t)] = {out[static_cast<size_t>(2 * t)],
                                           out[static_cast<size_t>(2 * t + 1)]};
  return traj;
}

// forward + loss backward for one sample; gradients accumulate into grad.
double backward_sample(const PlannerParams& params, const ParamLayout& lay,
                       const FeatureSet& fs, const Trajectory& target,
                       Workspace& ws, double* grad) {
  forward_cached(params, lay, fs, ws);
  double loss = 0.0;
  for (int t = 0; t < kHorizonSteps; ++t) {
    Vec2 p{ws.out[static_cast<size_t>(2 * t)], ws.out[static_cast<size_t>(2 * t + 1)]};
    Vec2 diff = p - target.points[static_cast<size_t>(t)];
    double n = diff.norm();
    loss += n;
    if (n > 0.0) {
      ws.d_out[static_cast<size_t>(2 * t)] = diff.x / n;
      ws.d_out[static_cast<size_t>(2 * t + 1)] = diff.y / n;
    } else {
      ws.d_out[static_cast<size_t>(2 * t)] = 0.0;
      ws.d_out[static_cast<size_t>(2 * t + 1)] = 0.0;
    }
  }
  backward_cached(params, lay, ws, grad);
  return loss;
}

GradResult grad_batch_impl(const PlannerParams& params, const TrainBatch& batch,
                           bool parallel) {
  if (batch.inputs.empty() || batch.inputs.size() != batch.targets.size())
    throw std::invalid_argument("grad_batch: bad batch");
  const ParamLayout lay = make_layout(params.arch);
  if (params.values.size() != lay.total)
    throw std::invalid_argument("grad_batch: parameter size mismatch");

  const int B = static_cast<int>(batch.inputs.size());
  const int K = kGradBuckets;
  std::vector<std::vector<double>> bucket_grad(static_cast<size_t>(K));
  std::array<double, kGradBuckets> bucket_loss{};

#pragma omp parallel for schedule(dynamic, 1) if (parallel)
  for (int bkt = 0; bkt < K; ++bkt) {
    int lo = bkt * B / K;
    int hi = (bkt + 1) * B / K;
    if (lo == hi) continue;
    bucket_grad[static_cast<size_t>(bkt)].assign(lay.total, 0.0);
    Workspace ws(params.arch);
    double loss = 0.0;
    for (int i = lo; i < hi; ++i)
      loss += backward_sample(params, lay, batch.inputs[static_cast<size_t>(i)],
                              batch.targets[static_cast<size_t>(i)], ws,
                              bucket_grad[static_cast<size_t>(bkt)].data());
    bucket_loss[static_cast<size_t>(bkt)] = loss;
  }

  GradResult res;
  res.grad.assign(lay.total, 0.0);
  double loss = 0.0;
  for (int bkt = 0; bkt < K; ++bkt) {
    if (bucket_grad[static_cast<size_t>(bkt)].empty()) continue;
    const double* g = bucket_grad[static_cast<size_t>(bkt)].data();
    for (size_t j = 0; j < lay.total; ++j) res.grad[j] += g[j];
    loss += bucket_loss[static_cast<size_t>(bkt)];
  }
  double inv = 1.0 / B;
  for (double& g : res.grad) g *= inv;
  res.mean_loss = loss * inv;
  for (double g : res.grad)
    if (!std::isfinite(g)) throw std::runtime_error("grad_batch: non-finite gradient");
  return res;
}

}  // namespace

size_t param_count(const ArchConfig& arch) { return make_layout(arch).total; }

PlannerParams init_planner_params(const ArchConfig& arch, uint64_t seed) {
  const ParamLayout lay = make_layout(arch);
  PlannerParams p;
  p.arch = arch;
  p.seed = seed;
  p.values.assign(lay.total, 0.0);
  Rng rng(substream(seed, stream_tag::kInit));
  auto fill_uniform = [&](size_t off, size_t n, int fan_in) {
    double s = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (size_t i = 0; i < n; ++i) p.values[off + i] = rng.uniform(-s, s);
  };
  const size_t d = static_cast<size_t>(arch.embed_dim);
  const size_t f = static_cast<size_t>(arch.ff_dim);
  for (int t = 0; t < 4; ++t)
    fill_uniform(lay.enc_w[static_cast<size_t>(t)],
                 static_cast<size_t>(lay.enc_in[static_cast<size_t>(t)]) * d,
                 lay.enc_in[static_cast<size_t>(t)]);
  for (const BlockOffsets& o : lay.blocks) {
    fill_uniform(o.wq, d * d, arch.embed_dim);
    fill_uniform(o.wk, d * d, arch.embed_dim);
    fill_uniform(o.wv, d * d, arch.embed_dim);
    fill_uniform(o.wo, d * d, arch.embed_dim);
    fill_uniform(o.w1, d * f, arch.embed_dim);
    fill_uniform(o.w2, f * d, arch.ff_dim);
    for (size_t i = 0; i < d; ++i) p.values[o.g1 + i] = 1.0;
    for (size_t i = 0; i < d; ++i) p.values[o.g2 + i] = 1.0;
  }
  fill_uniform(lay.head_w, d * ArchConfig::kOutputDim, arch.embed_dim);
  return p;
}

Trajectory planner_forward(const PlannerParams& params, const FeatureSet& fs) {
  const ParamLayout lay = make_layout(params.arch);
  if (params.values.size() != lay.total)
    throw std::invalid_argument("planner_forward: parameter size mismatch");
  Workspace ws(params.arch);
  forward_cached(params, lay, fs, ws);
  return out_to_trajectory(ws.out);
}

double trajectory_loss(const Trajectory& pred, const Trajectory& target) {
  double loss = 0.0;
  for (int t = 0; t < kHorizonSteps; ++t)
    loss += (pred.points[static_cast<size_t>(t)] - target.points[static_cast<size_t>(t)]).norm();
  return loss;
}

GradResult planner_grad_batch(const PlannerParams& params, const TrainBatch& batch) {
  return grad_batch_impl(params, batch, true);
}

GradResult planner_grad_batch_serial(const PlannerParams& params,
                                     const TrainBatch& batch) {
  return grad_batch_impl(params, batch, false);
}

void adam_step(PlannerParams& params, const std::vector<double>& grad,
               AdamState& state, double lr) {
  const size_t n = params.values.size();
  if (grad.size() != n) throw std::invalid_argument("adam_step: size mismatch");
  if (state.m.size() != n) {
    state.m.assign(n, 0.0);
    state.v.assign(n, 0.0);
    state.step = 0;
  }
  ++state.step;
  double bc1 = 1.0 - std::pow(kAdamBeta1, static_cast<double>(state.step));
  double bc2 = 1.0 - std::pow(kAdamBeta2, static_cast<double>(state.step));
  for (size_t i = 0; i < n; ++i) {
    state.m[i] = kAdamBeta1 * state.m[i] + (1.0 - kAdamBeta1) * grad[i];
    state.v[i] = kAdamBeta2 * state.v[i] + (1.0 - kAdamBeta2) * grad[i] * grad[i];
    double mhat = state.m[i] / bc1;
    double vhat = state.v[i] / bc2;
    params.values[i] -= lr * mhat / (std::sqrt(vhat) + kAdamEps);
  }
}

void save_checkpoint(const Checkpoint& ck, const std::string& path) {
  nlohmann::json header{{"magic", "deskdrive-checkpoint"},
                        {"version", 1},
                        {"embed_dim", ck.params.arch.embed_dim},
                        {"heads", ck.params.arch.heads},
                        {"blocks", ck.params.arch.blocks},
                        {"ff_dim", ck.params.arch.ff_dim},
                        {"seed", ck.params.seed},
                        {"param_count", ck.params.values.size()},
                        {"has_adam", ck.has_adam},
                        {"adam_step", ck.adam.step},
                        {"completed_epochs", ck.completed_epochs}};
  std::string out = header.dump();
  out.push_back('\n');
  auto append = [&out](const std::vector<double>& v) {
    size_t at = out.size();
    out.resize(at + v.size() * sizeof(double));
    std::memcpy(out.data() + at, v.data(), v.size() * sizeof(double));
  };
  append(ck.params.values);
  if (ck.has_adam) {
    append(ck.adam.m);
    append(ck.adam.v);
  }
  write_file_atomic(path, out);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::string data = read_file(path);
  size_t nl = data.find('\n');
  if (nl == std::string::npos)
    throw std::runtime_error("checkpoint: missing header line");
  nlohmann::json header = nlohmann::json::parse(data.substr(0, nl));
  if (header.at("magic").get<std::string>() != "deskdrive-checkpoint" ||
      header.at("version").get<int>() != 1)
    throw std::runtime_error("checkpoint: unrecognized container");
  Checkpoint ck;
  ck.params.arch.embed_dim = header.at("embed_dim").get<int>();
  ck.params.arch.heads = header.at("heads").get<int>();
  ck.params.arch.blocks = header.at("blocks").get<int>();
  ck.params.arch.ff_dim = header.at("ff_dim").get<int>();
  ck.params.seed = header.at("seed").get<uint64_t>();
  ck.has_adam = header.at("has_adam").get<bool>();
  ck.adam.step = header.at("adam_step").get<int64_t>();
  ck.completed_epochs = header.at("completed_epochs").get<int>();

  size_t n = header.at("param_count").get<size_t>();
  if (n != param_count(ck.params.arch))
    throw std::runtime_error(
        "checkpoint: architecture mismatch (parameter count disagrees)");
  size_t expected = n * sizeof(double) * (ck.has_adam ? 3 : 1);
  if (data.size() - nl - 1 != expected)
    throw std::runtime_error("checkpoint: truncated payload");
  const char* src = data.data() + nl + 1;
  auto read_vec = [&src](std::vector<double>& v, size_t count) {
    v.resize(count);
    std::memcpy(v.data(), src, count * sizeof(double));
    src += count * sizeof(double);
  };
  read_vec(ck.params.values, n);
  if (ck.has_adam) {
    read_vec(ck.adam.m, n);
    read_vec(ck.adam.v, n);
  }
  return ck;
}

}  // namespace deskdrive
