#include "stephint/policy.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

namespace stephint {

namespace {

struct Offsets {
  std::int64_t emb, wh, bh, wo, bo, total;
};

Offsets layout(const PolicyDims& d) {
  Offsets o{};
  o.emb = 0;
  o.wh = o.emb + static_cast<std::int64_t>(d.embed) * d.vocab;
  o.bh = o.wh + static_cast<std::int64_t>(d.hidden) * d.window * d.embed;
  o.wo = o.bh + d.hidden;
  o.bo = o.wo + static_cast<std::int64_t>(d.vocab) * d.hidden;
  o.total = o.bo + d.vocab;
  return o;
}

const Scalar* base(const PolicyParameters& p) {
  if (p.theta.size() != p.dims.param_count())
    throw ConfigError("policy: parameter vector size does not match dimensions");
  return p.theta.data();
}

void check_context(const PolicyDims& dims, std::span<const TokenId> ctx) {
  for (TokenId t : ctx)
    if (t < 0 || t >= dims.vocab) throw ConfigError("policy: context token id out of range");
}

// Writes the embedded context for predicting position `pos` of `seq` into
// column `col` of X (window*embed rows).  Slot s holds the embedding of
// seq[pos - window + s]; positions before the sequence start embed as zero.
void fill_context(const Eigen::Map<const Matrix>& emb, std::span<const TokenId> seq, int pos,
                  int window, int embed, Matrix& X, Eigen::Index col) {
  for (int s = 0; s < window; ++s) {
    const int idx = pos - window + s;
    auto dst = X.col(col).segment(static_cast<Eigen::Index>(s) * embed, embed);
    if (idx < 0)
      dst.setZero();
    else
      dst = emb.col(seq[static_cast<std::size_t>(idx)]);
  }
}

// In-place column-wise log-softmax of Z / temperature.
void log_softmax_cols(Matrix& Z, Scalar temperature) {
  for (Eigen::Index c = 0; c < Z.cols(); ++c) {
    auto col = Z.col(c);
    col /= temperature;
    const Scalar m = col.maxCoeff();
    const Scalar lse = m + std::log((col.array() - m).exp().sum());
    col.array() -= lse;
  }
}

// Forward pass over a batch of contexts.  X: (window*embed) x T.
// Returns tempered log-probs (vocab x T); optionally exposes the tanh
// activations for backprop.
Matrix forward_batch(const PolicyParameters& p, const Matrix& X, Scalar temperature,
                     Matrix* hidden_out) {
  Matrix Hh = ((p.hidden_weight() * X).colwise() + p.hidden_bias()).array().tanh();
  Matrix Z = (p.output_weight() * Hh).colwise() + p.output_bias();
  if (hidden_out) *hidden_out = std::move(Hh);
  log_softmax_cols(Z, temperature);
  return Z;
}

void check_temperature(Scalar t) {
  if (!(t > 0) || !std::isfinite(t)) throw ConfigError("policy: temperature must be positive");
}

}  // namespace

void PolicyDims::validate() const {
  if (vocab < 2) throw ConfigError("policy dims: vocabulary size must be >= 2");
  if (embed < 1 || window < 1 || hidden < 1)
    throw ConfigError("policy dims: embed, window, and hidden must be >= 1");
}

std::int64_t PolicyDims::param_count() const {
  return static_cast<std::int64_t>(vocab) * embed +
         (static_cast<std::int64_t>(window) * embed + 1) * hidden +
         (static_cast<std::int64_t>(hidden) + 1) * vocab;
}

Eigen::Map<const Matrix> PolicyParameters::embedding() const {
  return {base(*this) + layout(dims).emb, dims.embed, dims.vocab};
}
Eigen::Map<const Matrix> PolicyParameters::hidden_weight() const {
  return {base(*this) + layout(dims).wh, dims.hidden,
          static_cast<Eigen::Index>(dims.window) * dims.embed};
}
Eigen::Map<const Vector> PolicyParameters::hidden_bias() const {
  return {base(*this) + layout(dims).bh, dims.hidden};
}
Eigen::Map<const Matrix> PolicyParameters::output_weight() const {
  return {base(*this) + layout(dims).wo, dims.vocab, dims.hidden};
}
Eigen::Map<const Vector> PolicyParameters::output_bias() const {
  return {base(*this) + layout(dims).bo, dims.vocab};
}

PolicyParameters make_initial_policy(const PolicyDims& dims, std::uint64_t seed) {
  dims.validate();
  PolicyParameters p;
  p.dims = dims;
  p.theta = Vector::Zero(dims.param_count());
  Rng rng(derive_seed(seed, "policy.init"));
  const Offsets o = layout(dims);
  auto fill = [&](std::int64_t begin, std::int64_t end, Scalar scale) {
    for (std::int64_t i = begin; i < end; ++i) p.theta[i] = (2.0 * rng.uniform01() - 1.0) * scale;
  };
  fill(o.emb, o.wh, 0.08);
  fill(o.wh, o.bh, 1.0 / std::sqrt(static_cast<Scalar>(dims.window) * dims.embed));
  // hidden bias stays zero
  fill(o.wo, o.bo, 1.0 / std::sqrt(static_cast<Scalar>(dims.hidden)));
  // output bias stays zero
  return p;
}

TokenDistribution next_distribution(const PolicyParameters& params,
                                    std::span<const TokenId> context, Scalar temperature) {
  check_temperature(temperature);
  check_context(params.dims, context);
  const int W = params.dims.window, E = params.dims.embed;
  Matrix X(static_cast<Eigen::Index>(W) * E, 1);
  fill_context(params.embedding(), context, static_cast<int>(context.size()), W, E, X, 0);
  Matrix Z = (params.output_weight() *
              (((params.hidden_weight() * X).colwise() + params.hidden_bias()).array().tanh()).matrix())
                 .colwise() +
             params.output_bias();
  TokenDistribution out;
  out.logits = Z.col(0);
  log_softmax_cols(Z, temperature);
  out.log_probs = Z.col(0);
  return out;
}

SampledSequence sample_completion(const PolicyParameters& params, const Vocabulary& vocab,
                                  std::span<const TokenId> prefix, Scalar temperature, int max_len,
                                  Rng& rng) {
  check_temperature(temperature);
  if (max_len < 0) throw ConfigError("sample_completion: max_len must be >= 0");
  if (vocab.size() != params.dims.vocab)
    throw ConfigError("sample_completion: vocabulary size does not match policy");
  check_context(params.dims, prefix);

  const int W = params.dims.window, E = params.dims.embed;
  const auto emb = params.embedding();
  TokenSeq seq(prefix.begin(), prefix.end());
  SampledSequence out;
  std::vector<Scalar> lps;
  Matrix X(static_cast<Eigen::Index>(W) * E, 1);
  for (int step = 0; step < max_len; ++step) {
    fill_context(emb, seq, static_cast<int>(seq.size()), W, E, X, 0);
    Vector h = ((params.hidden_weight() * X.col(0)) + params.hidden_bias()).array().tanh();
    Matrix Z = params.output_weight() * h + params.output_bias();
    log_softmax_cols(Z, temperature);
    const Vector lp = Z.col(0);
    const TokenId tok = static_cast<TokenId>(rng.categorical(lp.array().exp().matrix()));
    seq.push_back(tok);
    out.tokens.push_back(tok);
    lps.push_back(lp[tok]);
    if (tok == vocab.end_of_sequence_id) {
      out.terminated = true;
      break;
    }
  }
  out.per_token_log_prob = Eigen::Map<const Vector>(lps.data(), static_cast<Eigen::Index>(lps.size()));
  return out;
}

Vector sequence_log_prob(const PolicyParameters& params, std::span<const TokenId> prefix,
                         std::span<const TokenId> continuation, Scalar temperature) {
  check_temperature(temperature);
  check_context(params.dims, prefix);
  check_context(params.dims, continuation);
  const Eigen::Index T = static_cast<Eigen::Index>(continuation.size());
  if (T == 0) return Vector(0);

  TokenSeq full(prefix.begin(), prefix.end());
  full.insert(full.end(), continuation.begin(), continuation.end());
  const int P = static_cast<int>(prefix.size());
  const int W = params.dims.window, E = params.dims.embed;
  Matrix X(static_cast<Eigen::Index>(W) * E, T);
  for (Eigen::Index t = 0; t < T; ++t)
    fill_context(params.embedding(), full, P + static_cast<int>(t), W, E, X, t);
  Matrix S = forward_batch(params, X, temperature, nullptr);
  Vector out(T);
  for (Eigen::Index t = 0; t < T; ++t) out[t] = S(continuation[static_cast<std::size_t>(t)], t);
  return out;
}

Scalar mean_token_entropy(const PolicyParameters& params, std::span<const PrefixedSequence> items,
                          Scalar temperature) {
  check_temperature(temperature);
  std::int64_t total = 0;
  Scalar acc = 0;
  const int W = params.dims.window, E = params.dims.embed;
  for (const auto& item : items) {
    check_context(params.dims, item.prefix);
    check_context(params.dims, item.tokens);
    const Eigen::Index T = static_cast<Eigen::Index>(item.tokens.size());
    if (T == 0) continue;
    TokenSeq full(item.prefix.begin(), item.prefix.end());
    full.insert(full.end(), item.tokens.begin(), item.tokens.end());
    Matrix X(static_cast<Eigen::Index>(W) * E, T);
    for (Eigen::Index t = 0; t < T; ++t)
      fill_context(params.embedding(), full, static_cast<int>(item.prefix.size()) + static_cast<int>(t),
                   W, E, X, t);
    Matrix S = forward_batch(params, X, temperature, nullptr);
    acc -= (S.array().exp() * S.array()).colwise().sum().sum();
    total += T;
  }
  return total == 0 ? 0.0 : acc / static_cast<Scalar>(total);
}

ObjectiveResult objective_gradient(const PolicyParameters& params,
                                   std::span<const WeightedSample> samples, Scalar clip_eps,
                                   Scalar kl_beta, const PolicyParameters* ref_params) {
  if (clip_eps < 0) throw ConfigError("objective: clip_eps must be >= 0");
  if (kl_beta < 0) throw ConfigError("objective: kl_beta must be >= 0");
  if (kl_beta > 0) {
    if (!ref_params) throw ConfigError("objective: kl_beta > 0 requires reference parameters");
    if (ref_params->dims != params.dims)
      throw ConfigError("objective: reference parameter dimensions mismatch");
  }

  const Offsets o = layout(params.dims);
  ObjectiveResult res;
  res.grad = Vector::Zero(o.total);
  if (samples.empty()) return res;

  const int W = params.dims.window, E = params.dims.embed;
  const Scalar N = static_cast<Scalar>(samples.size());
  Eigen::Map<Matrix> g_emb(res.grad.data() + o.emb, E, params.dims.vocab);
  Eigen::Map<Matrix> g_wh(res.grad.data() + o.wh, params.dims.hidden,
                          static_cast<Eigen::Index>(W) * E);
  Eigen::Map<Vector> g_bh(res.grad.data() + o.bh, params.dims.hidden);
  Eigen::Map<Matrix> g_wo(res.grad.data() + o.wo, params.dims.vocab, params.dims.hidden);
  Eigen::Map<Vector> g_bo(res.grad.data() + o.bo, params.dims.vocab);

  for (const auto& s : samples) {
    check_context(params.dims, s.prefix);
    check_context(params.dims, s.continuation);
    const Eigen::Index T = static_cast<Eigen::Index>(s.continuation.size());
    if (s.weights.size() != T || s.old_log_probs.size() != T)
      throw ConfigError("objective: weights/old_log_probs length must match continuation");
    if (T == 0) continue;

    TokenSeq full(s.prefix.begin(), s.prefix.end());
    full.insert(full.end(), s.continuation.begin(), s.continuation.end());
    const int P = static_cast<int>(s.prefix.size());
    Matrix X(static_cast<Eigen::Index>(W) * E, T);
    for (Eigen::Index t = 0; t < T; ++t)
      fill_context(params.embedding(), full, P + static_cast<int>(t), W, E, X, t);

    Matrix Hh;
    Matrix S = forward_batch(params, X, 1.0, &Hh);
    Matrix S_ref;
    if (kl_beta > 0) {
      // Reference contexts use the reference policy's own embeddings.
      Matrix Xr(static_cast<Eigen::Index>(W) * E, T);
      for (Eigen::Index t = 0; t < T; ++t)
        fill_context(ref_params->embedding(), full, P + static_cast<int>(t), W, E, Xr, t);
      S_ref = forward_batch(*ref_params, Xr, 1.0, nullptr);
    }

    const Scalar inv = 1.0 / (N * static_cast<Scalar>(T));
    // dZ starts as dLoss/dS spread through the softmax below.
    Matrix dZ = Matrix::Zero(params.dims.vocab, T);
    for (Eigen::Index t = 0; t < T; ++t) {
      const TokenId y = s.continuation[static_cast<std::size_t>(t)];
      const Scalar lp = S(y, t);
      const Scalar r = std::exp(lp - s.old_log_probs[t]);
      const Scalar w = s.weights[t];
      const Scalar u = r * w;
      const Scalar c = std::clamp(r, 1.0 - clip_eps, 1.0 + clip_eps) * w;
      res.loss -= inv * std::min(u, c);
      Scalar g = (u <= c) ? -inv * r * w : 0.0;
      if (kl_beta > 0) {
        res.loss += inv * kl_beta * (lp - S_ref(y, t));
        g += inv * kl_beta;
      }
      if (g != 0.0) {
        dZ.col(t).noalias() -= g * S.col(t).array().exp().matrix();
        dZ(y, t) += g;
      }
    }

    g_wo.noalias() += dZ * Hh.transpose();
    g_bo.noalias() += dZ.rowwise().sum();
    Matrix dA = (params.output_weight().transpose() * dZ).array() * (1.0 - Hh.array().square());
    g_wh.noalias() += dA * X.transpose();
    g_bh.noalias() += dA.rowwise().sum();
    Matrix dX = params.hidden_weight().transpose() * dA;
    for (Eigen::Index t = 0; t < T; ++t) {
      const int pos = P + static_cast<int>(t);
      for (int sl = 0; sl < W; ++sl) {
        const int idx = pos - W + sl;
        if (idx < 0) continue;
        g_emb.col(full[static_cast<std::size_t>(idx)]).noalias() +=
            dX.col(t).segment(static_cast<Eigen::Index>(sl) * E, E);
      }
    }
  }

  if (!std::isfinite(res.loss)) throw DataError("objective: non-finite loss");
  return res;
}

void save_checkpoint(const PolicyParameters& params, std::uint64_t seed,
                     const std::filesystem::path& path) {
  base(params);  // size check
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw DataError("save_checkpoint: cannot open '" + path.string() + "' for writing");
  const char magic[8] = {'S', 'H', 'P', 'O', 'L', 'C', 'K', '1'};
  const std::uint32_t version = 1;
  const std::int32_t dims[4] = {params.dims.vocab, params.dims.embed, params.dims.window,
                                params.dims.hidden};
  f.write(magic, sizeof magic);
  f.write(reinterpret_cast<const char*>(&version), sizeof version);
  f.write(reinterpret_cast<const char*>(dims), sizeof dims);
  f.write(reinterpret_cast<const char*>(&seed), sizeof seed);
  f.write(reinterpret_cast<const char*>(params.theta.data()),
          static_cast<std::streamsize>(sizeof(Scalar) * static_cast<std::size_t>(params.theta.size())));
  if (!f) throw DataError("save_checkpoint: write failed for '" + path.string() + "'");
}

PolicyParameters load_checkpoint(const std::filesystem::path& path, std::uint64_t* seed_out) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("load_checkpoint: cannot open '" + path.string() + "'");
  char magic[8];
  std::uint32_t version = 0;
  std::int32_t dims[4];
  std::uint64_t seed = 0;
  f.read(magic, sizeof magic);
  f.read(reinterpret_cast<char*>(&version), sizeof version);
  f.read(reinterpret_cast<char*>(dims), sizeof dims);
  f.read(reinterpret_cast<char*>(&seed), sizeof seed);
  if (!f || std::memcmp(magic, "SHPOLCK1", 8) != 0)
    throw DataError("load_checkpoint: '" + path.string() + "' is not a policy checkpoint");
  if (version != 1) throw DataError("load_checkpoint: unsupported format version");

  PolicyParameters p;
  p.dims = {dims[0], dims[1], dims[2], dims[3]};
  p.dims.validate();
  p.theta = Vector(p.dims.param_count());
  f.read(reinterpret_cast<char*>(p.theta.data()),
         static_cast<std::streamsize>(sizeof(Scalar) * static_cast<std::size_t>(p.theta.size())));
  if (!f) throw DataError("load_checkpoint: truncated parameter payload");
  if (f.peek() != std::ifstream::traits_type::eof())
    throw DataError("load_checkpoint: trailing bytes after parameter payload");
  for (Eigen::Index i = 0; i < p.theta.size(); ++i)
    if (!std::isfinite(p.theta[i])) throw DataError("load_checkpoint: non-finite parameter value");
  if (seed_out) *seed_out = seed;
  return p;
}

}  // namespace stephint
