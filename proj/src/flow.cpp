#include "cflow/flow.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <string>

#include "cflow/error.hpp"
#include "cflow/rng.hpp"

namespace cflow {
namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;  // log(2 pi)

std::string block_prefix(std::size_t i) { return "block" + std::to_string(i) + "."; }

MlpSpec conditioner_spec(const FlowConfig& cfg) {
  MlpSpec s;
  s.input = (cfg.dim + 1) / 2;
  s.output = 2 * (cfg.dim / 2);
  s.hidden = cfg.hidden;
  s.hidden_layers = cfg.hidden_layers;
  s.activation = cfg.activation;
  return s;
}

void check_input(const FlowModel& model, const Matrix& x, const char* op) {
  if (x.cols() != model.dim()) {
    throw DimensionError(std::string(op) + ": input has " + std::to_string(x.cols()) +
                         " columns, model dimension is " + std::to_string(model.dim()));
  }
}

void check_block_output(const Matrix& y, std::span<const double> logdet, std::size_t block, const char* op) {
  bool ok = y.all_finite();
  for (double v : logdet) ok = ok && std::isfinite(v);
  if (!ok) throw NumericError(std::string(op) + ": non-finite value after block " + std::to_string(block));
}

// Monotone scalar map of a 1-D block, evaluated for one input.
struct ScalarTerms {
  double u;  // mapped value before the affine part
  double d;  // du/dx > 0
};

class ScalarMap {
 public:
  ScalarMap(const ParamStore& p, const FlowBlock& b, double clamp)
      : rho_(p.value(b.mix).data()),
        logw_(p.value(b.log_width).data()),
        off_(p.value(b.offset).data()),
        raw_scale_(p.value(b.scale)(0, 0)),
        shift_(p.value(b.shift)(0, 0)) {
    for (std::size_t k = 0; k < kScalarComponents; ++k) {
      width_[k] = std::exp(logw_[k]);
      beta_[k] = std::expm1(rho_[k]) / static_cast<double>(kScalarComponents);
    }
    scale_tanh_ = std::tanh(raw_scale_ / clamp);
    log_scale_ = clamp * scale_tanh_;
  }

  ScalarTerms eval(double x) const {
    double u = x, d = 1.0;
    for (std::size_t k = 0; k < kScalarComponents; ++k) {
      const double th = std::tanh(width_[k] * x + off_[k]);
      u += beta_[k] / width_[k] * th;
      d += beta_[k] * (1.0 - th * th);
    }
    return {u, d};
  }

  // Solves eval(x).u == u by bisection; |u(x) - x| <= sum |beta_k| / w_k brackets the root.
  double solve(double u) const {
    double spread = 0.0;
    for (std::size_t k = 0; k < kScalarComponents; ++k) spread += std::abs(beta_[k]) / width_[k];
    if (spread == 0.0) return u;
    double lo = u - spread - 1e-12 * (1.0 + std::abs(u)), hi = u + spread + 1e-12 * (1.0 + std::abs(u));
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (mid <= lo || mid >= hi) break;
      if (eval(mid).u < u) lo = mid; else hi = mid;
    }
    return 0.5 * (lo + hi);
  }

  double log_scale() const { return log_scale_; }
  double scale_tanh() const { return scale_tanh_; }
  double shift() const { return shift_; }
  double width(std::size_t k) const { return width_[k]; }
  double beta(std::size_t k) const { return beta_[k]; }
  double rho(std::size_t k) const { return rho_[k]; }
  double offset(std::size_t k) const { return off_[k]; }

 private:
  const double* rho_;
  const double* logw_;
  const double* off_;
  double raw_scale_;
  double shift_;
  double width_[kScalarComponents];
  double beta_[kScalarComponents];
  double scale_tanh_ = 0.0;
  double log_scale_ = 0.0;
};

// Applies block `bi` to `x` in place (data -> latent), adding to logdet.
void block_forward(const FlowModel& model, std::size_t bi, Matrix& x, std::span<double> logdet,
                   BlockRecord* rec) {
  const FlowBlock& blk = model.blocks()[bi];
  const ParamStore& p = model.params();
  const double clamp = model.config().clamp;
  const std::size_t n = x.rows();

  if (model.dim() == 1) {
    if (rec) rec->permuted = x;
    const ScalarMap map(p, blk, clamp);
    const double es = std::exp(map.log_scale());
    for (std::size_t i = 0; i < n; ++i) {
      const ScalarTerms t = map.eval(x(i, 0));
      x(i, 0) = t.u * es + map.shift();
      logdet[i] += std::log(t.d) + map.log_scale();
    }
    return;
  }

  const std::size_t dim = model.dim(), nc = model.conditioner_dims(), na = model.transformed_dims();
  Matrix xp(n, dim);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < dim; ++j) xp(i, j) = x(i, blk.perm[j]);
  }
  const Matrix cond = xp.col_block(0, nc);
  MlpCache* cache = rec ? &rec->mlp : nullptr;
  const Matrix h = blk.net.forward(p, cond, cache);
  Matrix raw(n, na);
  for (std::size_t i = 0; i < n; ++i) {
    double ld = 0.0;
    for (std::size_t j = 0; j < na; ++j) {
      const double sr = h(i, j);
      raw(i, j) = sr;
      const double s = clamp * std::tanh(sr / clamp);
      const double t = h(i, na + j);
      ld += s;
      x(i, nc + j) = xp(i, nc + j) * std::exp(s) + t;
    }
    for (std::size_t j = 0; j < nc; ++j) x(i, j) = xp(i, j);
    logdet[i] += ld;
  }
  if (rec) {
    rec->permuted = std::move(xp);
    rec->raw_scale = std::move(raw);
  }
}

// Inverts block `bi` in place (latent -> data).
void block_inverse(const FlowModel& model, std::size_t bi, Matrix& y) {
  const FlowBlock& blk = model.blocks()[bi];
  const ParamStore& p = model.params();
  const double clamp = model.config().clamp;
  const std::size_t n = y.rows();

  if (model.dim() == 1) {
    const ScalarMap map(p, blk, clamp);
    const double inv_es = std::exp(-map.log_scale());
    for (std::size_t i = 0; i < n; ++i) y(i, 0) = map.solve((y(i, 0) - map.shift()) * inv_es);
    return;
  }

  const std::size_t dim = model.dim(), nc = model.conditioner_dims(), na = model.transformed_dims();
  const Matrix cond = y.col_block(0, nc);
  const Matrix h = blk.net.forward(p, cond);
  Matrix x(n, dim);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < nc; ++j) x(i, blk.perm[j]) = y(i, j);
    for (std::size_t j = 0; j < na; ++j) {
      const double s = clamp * std::tanh(h(i, j) / clamp);
      x(i, blk.perm[nc + j]) = (y(i, nc + j) - h(i, na + j)) * std::exp(-s);
    }
  }
  y = std::move(x);
}

// Backpropagates block `bi`. `g` enters as d/d(block output), leaves as
// d/d(block input); `gl` is d/d(logdet) per sample.
void block_backward(FlowModel& model, std::size_t bi, const BlockRecord& rec, Matrix& g,
                    std::span<const double> gl) {
  const FlowBlock& blk = model.blocks()[bi];
  ParamStore& p = model.params();
  const double clamp = model.config().clamp;
  const std::size_t n = g.rows();

  if (model.dim() == 1) {
    const ScalarMap map(p, blk, clamp);
    const double es = std::exp(map.log_scale());
    const double kinv = 1.0 / static_cast<double>(kScalarComponents);
    double g_raw = 0.0, g_shift = 0.0;
    double g_rho[kScalarComponents] = {}, g_logw[kScalarComponents] = {}, g_off[kScalarComponents] = {};
    for (std::size_t i = 0; i < n; ++i) {
      const double x = rec.permuted(i, 0);
      const double gy = g(i, 0);
      const ScalarTerms t = map.eval(x);
      const double gu = gy * es;
      const double gs = gy * t.u * es + gl[i];
      g_raw += gs * (1.0 - map.scale_tanh() * map.scale_tanh());
      g_shift += gy;
      const double gd = gl[i] / t.d;
      double gx = gu * t.d;
      for (std::size_t k = 0; k < kScalarComponents; ++k) {
        const double w = map.width(k), beta = map.beta(k);
        const double th = std::tanh(w * x + map.offset(k));
        const double se = 1.0 - th * th;
        const double dse = -2.0 * th * se;  // d(sech^2)/dr
        gx += gd * beta * dse * w;
        const double g_beta = gu * th / w + gd * se;
        g_rho[k] += g_beta * std::exp(map.rho(k)) * kinv;
        const double g_w = gu * beta * (se * x / w - th / (w * w)) + gd * beta * dse * x;
        g_logw[k] += g_w * w;
        g_off[k] += gu * beta * se / w + gd * beta * dse;
      }
      g(i, 0) = gx;
    }
    p.grad(blk.scale)(0, 0) += g_raw;
    p.grad(blk.shift)(0, 0) += g_shift;
    for (std::size_t k = 0; k < kScalarComponents; ++k) {
      p.grad(blk.mix)(0, k) += g_rho[k];
      p.grad(blk.log_width)(0, k) += g_logw[k];
      p.grad(blk.offset)(0, k) += g_off[k];
    }
    return;
  }

  const std::size_t dim = model.dim(), nc = model.conditioner_dims(), na = model.transformed_dims();
  Matrix gh(n, 2 * na);
  Matrix gxp(n, dim);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < na; ++j) {
      const double th = std::tanh(rec.raw_scale(i, j) / clamp);
      const double es = std::exp(clamp * th);
      const double gy = g(i, nc + j);
      const double a = rec.permuted(i, nc + j);
      gxp(i, nc + j) = gy * es;
      gh(i, j) = (gy * a * es + gl[i]) * (1.0 - th * th);
      gh(i, na + j) = gy;
    }
  }
  const Matrix gc = blk.net.backward(p, rec.mlp, gh);
  Matrix gin(n, dim);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < nc; ++j) gxp(i, j) = g(i, j) + gc(i, j);
    for (std::size_t j = 0; j < dim; ++j) gin(i, blk.perm[j]) = gxp(i, j);
  }
  g = std::move(gin);
}

LatentResult run_forward(const FlowModel& model, const Matrix& x, std::vector<BlockRecord>* records) {
  check_input(model, x, "forward_latent");
  LatentResult out{x, std::vector<double>(x.rows(), 0.0)};
  if (records) records->assign(model.blocks().size(), BlockRecord{});
  for (std::size_t b = 0; b < model.blocks().size(); ++b) {
    block_forward(model, b, out.z, out.logdet, records ? &(*records)[b] : nullptr);
    check_block_output(out.z, out.logdet, b, "forward_latent");
  }
  return out;
}

}  // namespace

FlowModel FlowModel::init(const FlowConfig& cfg, std::uint64_t seed) {
  if (cfg.dim == 0) throw ConfigError("flow dimension must be >= 1");
  if (cfg.blocks == 0) throw ConfigError("flow needs at least one block");
  if (!(cfg.clamp > 0) || !std::isfinite(cfg.clamp)) throw ConfigError("clamp amplitude must be positive");
  if (cfg.dim > 1 && cfg.hidden_layers > 0 && cfg.hidden == 0) throw ConfigError("hidden width must be >= 1");

  FlowModel m;
  m.cfg_ = cfg;
  Rng perm_rng = make_rng(seed, 1);
  Rng weight_rng = make_rng(seed, 2);
  const MlpSpec spec = conditioner_spec(cfg);
  for (std::size_t b = 0; b < cfg.blocks; ++b) {
    FlowBlock blk;
    blk.perm.resize(cfg.dim);
    std::iota(blk.perm.begin(), blk.perm.end(), 0u);
    const std::string prefix = block_prefix(b);
    const std::size_t first = m.params_.size();
    if (cfg.dim == 1) {
      std::uniform_real_distribution<double> off_dist(-2.0, 2.0);
      Matrix off(1, kScalarComponents);
      for (double& v : off.values()) v = off_dist(weight_rng);
      blk.mix = m.params_.add(prefix + "mix", Matrix(1, kScalarComponents));
      blk.log_width = m.params_.add(prefix + "log_width", Matrix(1, kScalarComponents));
      blk.offset = m.params_.add(prefix + "offset", std::move(off));
      blk.scale = m.params_.add(prefix + "scale", Matrix(1, 1));
      blk.shift = m.params_.add(prefix + "shift", Matrix(1, 1));
    } else {
      // A block that keeps the identity order would condition on the same half twice in a row.
      const auto identity = blk.perm;
      do {
        std::shuffle(blk.perm.begin(), blk.perm.end(), perm_rng);
      } while (blk.perm == identity);
      blk.net = Mlp::create(m.params_, prefix, spec, weight_rng, /*zero_last=*/true);
    }
    for (std::size_t i = first; i < m.params_.size(); ++i) blk.param_indices.push_back(i);
    m.blocks_.push_back(std::move(blk));
  }
  return m;
}

void FlowModel::set_permutation(std::size_t block, std::vector<std::uint32_t> perm) {
  if (perm.size() != cfg_.dim) throw DimensionError("permutation length must equal dimension");
  std::vector<bool> seen(cfg_.dim, false);
  for (auto v : perm) {
    if (v >= cfg_.dim || seen[v]) throw ConfigError("permutation is not a bijection");
    seen[v] = true;
  }
  blocks_.at(block).perm = std::move(perm);
}

std::size_t flow_parameter_count(const FlowConfig& cfg) {
  if (cfg.dim == 1) return cfg.blocks * (3 * kScalarComponents + 2);
  const MlpSpec s = conditioner_spec(cfg);
  std::vector<std::size_t> widths{s.input};
  for (std::size_t i = 0; i < s.hidden_layers; ++i) widths.push_back(s.hidden);
  widths.push_back(s.output);
  std::size_t per_block = 0;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) per_block += (widths[l] + 1) * widths[l + 1];
  return cfg.blocks * per_block;
}

LatentResult forward_latent(const FlowModel& model, const Matrix& x) { return run_forward(model, x, nullptr); }

std::vector<double> log_prob(const FlowModel& model, const Matrix& x) {
  const LatentResult lat = forward_latent(model, x);
  const double c = 0.5 * static_cast<double>(model.dim()) * kLog2Pi;
  std::vector<double> out(x.rows());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    double sq = 0.0;
    for (double v : lat.z.row(i)) sq += v * v;
    out[i] = -0.5 * sq - c + lat.logdet[i];
  }
  return out;
}

Matrix inverse(const FlowModel& model, const Matrix& z) {
  check_input(model, z, "inverse");
  Matrix x = z;
  for (std::size_t b = model.blocks().size(); b-- > 0;) {
    block_inverse(model, b, x);
    if (!x.all_finite()) throw NumericError("inverse: non-finite value in block " + std::to_string(b));
  }
  return x;
}

Matrix sample(const FlowModel& model, std::size_t n, std::uint64_t seed) {
  if (n == 0) throw ConfigError("sample: n must be >= 1");
  Rng rng = make_rng(seed, 0);
  Matrix z(n, model.dim());
  for (double& v : z.values()) v = standard_normal(rng);
  return inverse(model, z);
}

FlowRecord forward_recorded(const FlowModel& model, const Matrix& x) {
  FlowRecord rec;
  rec.latent = run_forward(model, x, &rec.blocks);
  return rec;
}

std::vector<double> nll_from(const FlowRecord& rec) {
  const Matrix& z = rec.latent.z;
  const double c = 0.5 * static_cast<double>(z.cols()) * kLog2Pi;
  std::vector<double> out(z.rows());
  for (std::size_t i = 0; i < z.rows(); ++i) {
    double sq = 0.0;
    for (double v : z.row(i)) sq += v * v;
    out[i] = 0.5 * sq + c - rec.latent.logdet[i];
  }
  return out;
}

void backward_weighted(FlowModel& model, const FlowRecord& rec, std::span<const double> weights) {
  const Matrix& z = rec.latent.z;
  if (weights.size() != z.rows()) throw DimensionError("backward_weighted: one weight per sample required");
  if (rec.blocks.size() != model.blocks().size()) throw DimensionError("backward_weighted: record/model mismatch");
  // nll = |z|^2/2 + c - logdet
  Matrix g(z.rows(), z.cols());
  std::vector<double> gl(z.rows());
  for (std::size_t i = 0; i < z.rows(); ++i) {
    for (std::size_t j = 0; j < z.cols(); ++j) g(i, j) = weights[i] * z(i, j);
    gl[i] = -weights[i];
  }
  for (std::size_t b = model.blocks().size(); b-- > 0;) block_backward(model, b, rec.blocks[b], g, gl);
}

double log_prob_backward(FlowModel& model, const Matrix& x) {
  if (x.rows() == 0) throw ConfigError("log_prob_backward: empty batch");
  model.params().zero_grad();
  const FlowRecord rec = forward_recorded(model, x);
  const std::vector<double> nll = nll_from(rec);
  const double w = 1.0 / static_cast<double>(x.rows());
  const std::vector<double> weights(x.rows(), w);
  backward_weighted(model, rec, weights);
  double mean = 0.0;
  for (double v : nll) mean += v;
  return mean * w;
}

}  // namespace cflow
