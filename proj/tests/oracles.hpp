#pragma once

// Independent reference implementations used to pin the library's numerics.
// Everything here is written with plain loops and the standard library only —
// no Eigen expressions, no calls into the code under test (beyond reading the
// flat parameter vector, whose layout is part of the checkpoint contract:
// embeddings E x V column-major, hidden weight H x (W*E) column-major, hidden
// bias, output weight V x H column-major, output bias).

#include "stephint/grpo.hpp"
#include "stephint/policy.hpp"
#include "stephint/rollout.hpp"
#include "stephint/types.hpp"

#include <cmath>
#include <vector>

namespace oracle {

using stephint::PolicyDims;
using stephint::PolicyParameters;
using stephint::Scalar;
using stephint::TokenId;
using stephint::TokenSeq;

struct FlatViews {
  const Scalar* emb;
  const Scalar* wh;
  const Scalar* bh;
  const Scalar* wo;
  const Scalar* bo;
};

inline FlatViews views(const PolicyDims& d, const Scalar* theta) {
  FlatViews v{};
  v.emb = theta;
  v.wh = v.emb + static_cast<std::size_t>(d.embed) * d.vocab;
  v.bh = v.wh + static_cast<std::size_t>(d.hidden) * d.window * d.embed;
  v.wo = v.bh + d.hidden;
  v.bo = v.wo + static_cast<std::size_t>(d.vocab) * d.hidden;
  return v;
}

// Scalar-loop forward pass: tempered log-probs for the token following
// `context` (full history; reads only the last `window` entries).
inline std::vector<Scalar> naive_log_probs(const PolicyDims& d, const Scalar* theta,
                                           const TokenSeq& context, Scalar temperature) {
  const FlatViews v = views(d, theta);
  const int n = static_cast<int>(context.size());
  std::vector<Scalar> x(static_cast<std::size_t>(d.window) * d.embed, 0.0);
  for (int s = 0; s < d.window; ++s) {
    const int idx = n - d.window + s;
    if (idx < 0) continue;
    const TokenId tok = context[static_cast<std::size_t>(idx)];
    for (int e = 0; e < d.embed; ++e)
      x[static_cast<std::size_t>(s) * d.embed + e] =
          v.emb[e + static_cast<std::size_t>(d.embed) * tok];
  }
  std::vector<Scalar> h(static_cast<std::size_t>(d.hidden));
  for (int j = 0; j < d.hidden; ++j) {
    Scalar a = v.bh[j];
    for (int k = 0; k < d.window * d.embed; ++k)
      a += v.wh[j + static_cast<std::size_t>(d.hidden) * k] * x[static_cast<std::size_t>(k)];
    h[static_cast<std::size_t>(j)] = std::tanh(a);
  }
  std::vector<Scalar> z(static_cast<std::size_t>(d.vocab));
  for (int t = 0; t < d.vocab; ++t) {
    Scalar acc = v.bo[t];
    for (int j = 0; j < d.hidden; ++j)
      acc += v.wo[t + static_cast<std::size_t>(d.vocab) * j] * h[static_cast<std::size_t>(j)];
    z[static_cast<std::size_t>(t)] = acc / temperature;
  }
  Scalar zmax = z[0];
  for (Scalar zi : z) zmax = std::max(zmax, zi);
  Scalar sum = 0;
  for (Scalar zi : z) sum += std::exp(zi - zmax);
  const Scalar lse = zmax + std::log(sum);
  for (Scalar& zi : z) zi -= lse;
  return z;
}

// Scalar-loop clipped-surrogate loss and full analytic gradient.  Mirrors the
// documented objective exactly: per-sample 1/T averaging, per-batch 1/N,
// optional per-token KL penalty against reference parameters.
struct NaiveObjective {
  Scalar loss = 0;
  std::vector<Scalar> grad;
};

inline NaiveObjective naive_objective(const PolicyDims& d, const Scalar* theta,
                                      const std::vector<stephint::WeightedSample>& samples,
                                      Scalar clip_eps, Scalar kl_beta,
                                      const Scalar* ref_theta = nullptr) {
  NaiveObjective out;
  const std::size_t n_params = static_cast<std::size_t>(d.param_count());
  out.grad.assign(n_params, 0.0);
  if (samples.empty()) return out;

  const FlatViews v = views(d, theta);
  Scalar* g = out.grad.data();
  Scalar* g_emb = g;
  Scalar* g_wh = g_emb + static_cast<std::size_t>(d.embed) * d.vocab;
  Scalar* g_bh = g_wh + static_cast<std::size_t>(d.hidden) * d.window * d.embed;
  Scalar* g_wo = g_bh + d.hidden;
  Scalar* g_bo = g_wo + static_cast<std::size_t>(d.vocab) * d.hidden;

  const Scalar N = static_cast<Scalar>(samples.size());
  for (const auto& s : samples) {
    const int T = static_cast<int>(s.continuation.size());
    if (T == 0) continue;
    TokenSeq full(s.prefix.begin(), s.prefix.end());
    full.insert(full.end(), s.continuation.begin(), s.continuation.end());
    const int P = static_cast<int>(s.prefix.size());
    const Scalar inv = 1.0 / (N * static_cast<Scalar>(T));

    for (int t = 0; t < T; ++t) {
      TokenSeq ctx(full.begin(), full.begin() + P + t);
      const std::vector<Scalar> lp = naive_log_probs(d, theta, ctx, 1.0);
      const TokenId y = s.continuation[static_cast<std::size_t>(t)];
      const Scalar r = std::exp(lp[static_cast<std::size_t>(y)] - s.old_log_probs[t]);
      const Scalar w = s.weights[t];
      const Scalar u = r * w;
      const Scalar lo = 1.0 - clip_eps, hi = 1.0 + clip_eps;
      const Scalar rc = r < lo ? lo : (r > hi ? hi : r);
      const Scalar c = rc * w;
      out.loss -= inv * std::min(u, c);
      Scalar gy = (u <= c) ? -inv * r * w : 0.0;
      if (kl_beta > 0) {
        const std::vector<Scalar> lpr = naive_log_probs(d, ref_theta, ctx, 1.0);
        out.loss += inv * kl_beta * (lp[static_cast<std::size_t>(y)] - lpr[static_cast<std::size_t>(y)]);
        gy += inv * kl_beta;
      }
      if (gy == 0.0) continue;

      // Recompute intermediates for the backward pass.
      std::vector<Scalar> x(static_cast<std::size_t>(d.window) * d.embed, 0.0);
      std::vector<int> slot_tok(static_cast<std::size_t>(d.window), -1);
      const int pos = P + t;
      for (int sl = 0; sl < d.window; ++sl) {
        const int idx = pos - d.window + sl;
        if (idx < 0) continue;
        const TokenId tok = full[static_cast<std::size_t>(idx)];
        slot_tok[static_cast<std::size_t>(sl)] = tok;
        for (int e = 0; e < d.embed; ++e)
          x[static_cast<std::size_t>(sl) * d.embed + e] =
              v.emb[e + static_cast<std::size_t>(d.embed) * tok];
      }
      std::vector<Scalar> h(static_cast<std::size_t>(d.hidden));
      for (int j = 0; j < d.hidden; ++j) {
        Scalar a = v.bh[j];
        for (int k = 0; k < d.window * d.embed; ++k)
          a += v.wh[j + static_cast<std::size_t>(d.hidden) * k] * x[static_cast<std::size_t>(k)];
        h[static_cast<std::size_t>(j)] = std::tanh(a);
      }
      // dL/dz = gy * (onehot(y) - softmax)
      std::vector<Scalar> dz(static_cast<std::size_t>(d.vocab));
      for (int tv = 0; tv < d.vocab; ++tv)
        dz[static_cast<std::size_t>(tv)] =
            gy * ((tv == y ? 1.0 : 0.0) - std::exp(lp[static_cast<std::size_t>(tv)]));
      std::vector<Scalar> dh(static_cast<std::size_t>(d.hidden), 0.0);
      for (int tv = 0; tv < d.vocab; ++tv) {
        for (int j = 0; j < d.hidden; ++j) {
          g_wo[tv + static_cast<std::size_t>(d.vocab) * j] +=
              dz[static_cast<std::size_t>(tv)] * h[static_cast<std::size_t>(j)];
          dh[static_cast<std::size_t>(j)] +=
              v.wo[tv + static_cast<std::size_t>(d.vocab) * j] * dz[static_cast<std::size_t>(tv)];
        }
        g_bo[tv] += dz[static_cast<std::size_t>(tv)];
      }
      std::vector<Scalar> dx(static_cast<std::size_t>(d.window) * d.embed, 0.0);
      for (int j = 0; j < d.hidden; ++j) {
        const Scalar da =
            dh[static_cast<std::size_t>(j)] *
            (1.0 - h[static_cast<std::size_t>(j)] * h[static_cast<std::size_t>(j)]);
        for (int k = 0; k < d.window * d.embed; ++k) {
          g_wh[j + static_cast<std::size_t>(d.hidden) * k] += da * x[static_cast<std::size_t>(k)];
          dx[static_cast<std::size_t>(k)] += v.wh[j + static_cast<std::size_t>(d.hidden) * k] * da;
        }
        g_bh[j] += da;
      }
      for (int sl = 0; sl < d.window; ++sl) {
        const int tok = slot_tok[static_cast<std::size_t>(sl)];
        if (tok < 0) continue;
        for (int e = 0; e < d.embed; ++e)
          g_emb[e + static_cast<std::size_t>(d.embed) * tok] +=
              dx[static_cast<std::size_t>(sl) * d.embed + e];
      }
    }
  }
  return out;
}

// Plain-loop Adam, matching the documented update exactly.
struct NaiveAdam {
  Scalar lr = 1e-3, beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  long long t = 0;
  std::vector<Scalar> m, v;

  void step(std::vector<Scalar>& theta, const std::vector<Scalar>& grad) {
    if (m.empty()) {
      m.assign(theta.size(), 0.0);
      v.assign(theta.size(), 0.0);
    }
    ++t;
    const Scalar bc1 = 1.0 - std::pow(beta1, static_cast<Scalar>(t));
    const Scalar bc2 = 1.0 - std::pow(beta2, static_cast<Scalar>(t));
    for (std::size_t i = 0; i < theta.size(); ++i) {
      m[i] = beta1 * m[i] + (1.0 - beta1) * grad[i];
      v[i] = beta2 * v[i] + (1.0 - beta2) * grad[i] * grad[i];
      theta[i] -= lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + eps);
    }
  }
};

// Central finite difference of a scalar function of theta at one coordinate.
template <typename LossFn>
Scalar fd_at(const PolicyParameters& params, LossFn&& loss, Eigen::Index i, Scalar h = 1e-5) {
  PolicyParameters p = params;
  p.theta[i] += h;
  const Scalar up = loss(p);
  p.theta[i] -= 2 * h;
  const Scalar dn = loss(p);
  return (up - dn) / (2 * h);
}

// Exhaustive pass@k: fraction of the C(n, k) sample subsets containing at
// least one of the c successes.  Feasible for n <= 12.
inline Scalar exhaustive_pass_at_k(int n, int c, int k) {
  long long total = 0, hit = 0;
  std::vector<int> idx(static_cast<std::size_t>(k));
  // iterate over k-combinations of [0, n)
  for (int i = 0; i < k; ++i) idx[static_cast<std::size_t>(i)] = i;
  while (true) {
    ++total;
    bool any = false;
    for (int i : idx)
      if (i < c) any = true;  // mark the first c draws as the successes
    if (any) ++hit;
    int j = k - 1;
    while (j >= 0 && idx[static_cast<std::size_t>(j)] == n - k + j) --j;
    if (j < 0) break;
    ++idx[static_cast<std::size_t>(j)];
    for (int l = j + 1; l < k; ++l)
      idx[static_cast<std::size_t>(l)] = idx[static_cast<std::size_t>(l - 1)] + 1;
  }
  return static_cast<Scalar>(hit) / static_cast<Scalar>(total);
}

}  // namespace oracle
