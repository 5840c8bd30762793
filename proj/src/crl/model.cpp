#include "persona/crl/model.hpp"

#include <algorithm>
#include <cmath>

#include "persona/error.hpp"

namespace persona::crl {

int ModelConfig::total_latents() const {
  int t = 0;
  for (const auto& m : modalities) t += m.latent_dim;
  return t;
}

int ModelConfig::offset(int m) const {
  int t = 0;
  for (int i = 0; i < m; ++i) t += modalities[static_cast<std::size_t>(i)].latent_dim;
  return t;
}

Matrix Posterior::latent_means(int shared_dim, const std::vector<ModalityDims>& dims) const {
  int z = 0;
  for (const auto& d : dims) z += d.latent_dim;
  Matrix out(s_mu.rows(), z + shared_dim);
  int c = 0;
  for (std::size_t m = 0; m < dims.size(); ++m) {
    out.middleCols(c, dims[m].latent_dim) = mu[m].leftCols(dims[m].latent_dim);
    c += dims[m].latent_dim;
  }
  out.rightCols(shared_dim) = s_mu;
  return out;
}

CrlModel::CrlModel(ModelConfig config) : config_(std::move(config)) {
  if (config_.modalities.empty()) throw ValidationError("model needs at least one modality");
  if (config_.shared_dim < 0) throw ValidationError("shared_dim must be >= 0");
  if (config_.hidden < 1 || config_.layers < 0 || config_.flow_hidden < 1 || config_.flow_layers < 0) {
    throw ValidationError("invalid layer sizes");
  }
  std::size_t at = 0;
  for (const auto& d : config_.modalities) {
    if (d.latent_dim < 1 || d.eta_dim < 0 || d.measurements < 1 || d.obs_dim < 1) {
      throw ValidationError("invalid modality dimensions");
    }
    const int head = d.latent_dim + d.eta_dim + config_.shared_dim;
    Mlp enc{mlp_widths(d.measurements * d.obs_dim, config_.hidden, config_.layers, 2 * head), at};
    at += enc.size();
    encoders_.push_back(enc);
  }
  for (const auto& d : config_.modalities) {
    auto& decs = decoders_.emplace_back();
    for (int k = 0; k < d.measurements; ++k) {
      Mlp dec{mlp_widths(d.latent_dim + d.eta_dim, config_.hidden, config_.layers, d.obs_dim), at};
      at += dec.size();
      decs.push_back(dec);
    }
  }
  const int z = config_.total_latents();
  adj_offset_ = at;
  at += static_cast<std::size_t>(z) * static_cast<std::size_t>(z);
  const int flow_in = z + config_.shared_dim;
  for (int i = 0; i < z; ++i) {
    Mlp sh{mlp_widths(flow_in, config_.flow_hidden, config_.flow_layers, 1), at};
    at += sh.size();
    shift_.push_back(sh);
  }
  for (int i = 0; i < z; ++i) {
    Mlp sc{mlp_widths(flow_in, config_.flow_hidden, config_.flow_layers, 1), at};
    at += sc.size();
    scale_.push_back(sc);
  }
  mask_ = Matrix::Zero(z, z);
  for (int i = 0; i < z; ++i) {
    for (int j = 0; j < i; ++j) mask_(i, j) = 1.0;
  }
  params_ = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(at));
}

void CrlModel::init(std::uint64_t seed) {
  Rng rng = make_rng(seed, 0x494e4954);  // "INIT"
  params_.setZero();
  for (const auto& e : encoders_) e.init(params_.data(), rng);
  for (const auto& decs : decoders_) {
    for (const auto& d : decs) d.init(params_.data(), rng);
  }
  std::normal_distribution<double> normal(0.0, 0.1);
  const int z = config_.total_latents();
  Eigen::Map<Matrix> adj(params_.data() + adj_offset_, z, z);
  for (int j = 0; j < z; ++j) {
    for (int i = 0; i < z; ++i) adj(i, j) = normal(rng) * mask_(i, j);
  }
  for (const auto& f : shift_) f.init(params_.data(), rng);
  for (const auto& f : scale_) f.init(params_.data(), rng);
}

Matrix CrlModel::adjacency() const {
  const int z = config_.total_latents();
  return Eigen::Map<const Matrix>(params_.data() + adj_offset_, z, z).cwiseProduct(mask_);
}

void CrlModel::set_adjacency(const Matrix& adj) {
  const int z = config_.total_latents();
  if (adj.rows() != z || adj.cols() != z) throw ValidationError("adjacency shape mismatch");
  Eigen::Map<Matrix>(params_.data() + adj_offset_, z, z) = adj.cwiseProduct(mask_);
}

namespace {

void check_inputs(const ModelConfig& c, const std::vector<Matrix>& x) {
  if (x.size() != c.modalities.size()) throw ValidationError("modality count mismatch");
  for (std::size_t m = 0; m < x.size(); ++m) {
    const auto& d = c.modalities[m];
    if (x[m].cols() != d.measurements * d.obs_dim) {
      throw ValidationError("modality " + std::to_string(m) + ": expected " +
                            std::to_string(d.measurements * d.obs_dim) + " columns, got " +
                            std::to_string(x[m].cols()));
    }
    if (x[m].rows() != x[0].rows()) throw ValidationError("row count differs across modalities");
  }
  if (x[0].rows() < 1) throw ValidationError("empty data");
}

Matrix clamp(const Matrix& m, double lo, double hi) {
  return m.cwiseMax(lo).cwiseMin(hi);
}

/// Zero where the raw value was clamped.
void clamp_grad(Matrix& g, const Matrix& raw, double lo, double hi) {
  g = (raw.array() >= lo && raw.array() <= hi).select(g, 0.0);
}

}  // namespace

Posterior CrlModel::encode(const std::vector<Matrix>& x) const {
  check_inputs(config_, x);
  const auto ds = config_.shared_dim;
  const double mods = static_cast<double>(config_.modalities.size());
  Posterior p;
  p.s_mu = Matrix::Zero(x[0].rows(), ds);
  p.s_logvar = Matrix::Zero(x[0].rows(), ds);
  for (std::size_t m = 0; m < x.size(); ++m) {
    const auto& d = config_.modalities[m];
    const int own = d.latent_dim + d.eta_dim, head = own + ds;
    const Matrix o = encoders_[m].forward(params_.data(), x[m], nullptr);
    const Matrix lv = clamp(o.rightCols(head), kLogVarMin, kLogVarMax);
    p.mu.push_back(o.leftCols(own));
    p.logvar.push_back(lv.leftCols(own));
    p.s_mu += o.middleCols(own, ds) / mods;
    p.s_logvar += lv.rightCols(ds) / mods;
  }
  return p;
}

Matrix CrlModel::decode(int m, int k, const Matrix& u) const {
  const auto& dec = decoders_.at(static_cast<std::size_t>(m)).at(static_cast<std::size_t>(k));
  if (u.cols() != dec.in_dim()) throw ValidationError("decoder input shape mismatch");
  return dec.forward(params_.data(), u, nullptr);
}

Matrix CrlModel::flow_input(const Matrix& z, const Matrix& s, int i) const {
  const Matrix adj = adjacency();
  Matrix in(z.rows(), z.cols() + s.cols());
  in.leftCols(z.cols()) = z.array().rowwise() * adj.row(i).array();
  in.rightCols(s.cols()) = s;
  return in;
}

CrlModel::FlowOut CrlModel::flow_to_eps(const Matrix& z, const Matrix& s) const {
  const int zt = config_.total_latents();
  if (z.cols() != zt || s.cols() != config_.shared_dim || z.rows() != s.rows()) {
    throw ValidationError("flow input shape mismatch");
  }
  FlowOut out{Matrix(z.rows(), zt), Matrix(z.rows(), zt)};
  for (int i = 0; i < zt; ++i) {
    const Matrix in = flow_input(z, s, i);
    const Matrix sh = shift_[static_cast<std::size_t>(i)].forward(params_.data(), in, nullptr);
    const Matrix ls = clamp(scale_[static_cast<std::size_t>(i)].forward(params_.data(), in, nullptr),
                            kLogScaleMin, kLogScaleMax);
    out.logscale.col(i) = ls.col(0);
    out.eps.col(i) = (z.col(i) - sh.col(0)).array() * (-ls.col(0)).array().exp();
  }
  return out;
}

Matrix CrlModel::eps_to_z(const Matrix& eps, const Matrix& s) const {
  const int zt = config_.total_latents();
  if (eps.cols() != zt || s.cols() != config_.shared_dim || eps.rows() != s.rows()) {
    throw ValidationError("flow input shape mismatch");
  }
  // Row i of the mask only reaches columns < i, so columns fill in order.
  Matrix z = Matrix::Zero(eps.rows(), zt);
  for (int i = 0; i < zt; ++i) {
    const Matrix in = flow_input(z, s, i);
    const Matrix sh = shift_[static_cast<std::size_t>(i)].forward(params_.data(), in, nullptr);
    const Matrix ls = clamp(scale_[static_cast<std::size_t>(i)].forward(params_.data(), in, nullptr),
                            kLogScaleMin, kLogScaleMax);
    z.col(i) = sh.col(0).array() + eps.col(i).array() * ls.col(0).array().exp();
  }
  return z;
}

Noise CrlModel::draw_noise(int rows, Rng& rng) const {
  std::normal_distribution<double> normal(0.0, 1.0);
  auto fill = [&](Matrix& m) {
    for (Eigen::Index i = 0; i < m.size(); ++i) m(i) = normal(rng);
  };
  Noise n;
  for (const auto& d : config_.modalities) {
    n.u.emplace_back(rows, d.latent_dim + d.eta_dim);
    fill(n.u.back());
  }
  n.s.resize(rows, config_.shared_dim);
  fill(n.s);
  return n;
}

LossParts CrlModel::objective(const std::vector<Matrix>& x, const Noise& noise,
                              const ObjectiveConfig& cfg, Eigen::VectorXd* grad) const {
  check_inputs(config_, x);
  const Eigen::Index n = x[0].rows();
  const double nd = static_cast<double>(n);
  const int ds = config_.shared_dim;
  const int zt = config_.total_latents();
  const std::size_t mods = config_.modalities.size();
  const double inv_mods = 1.0 / static_cast<double>(mods);
  const double* p = params_.data();
  const auto& w = cfg.weights;
  if (noise.u.size() != mods || noise.s.rows() != n || noise.s.cols() != ds) {
    throw ValidationError("noise shape mismatch");
  }

  // Encoders.
  std::vector<Mlp::Cache> enc_cache(mods);
  std::vector<Matrix> raw(mods), mu(mods), lv(mods), u(mods);
  Matrix s_mu = Matrix::Zero(n, ds), s_lv = Matrix::Zero(n, ds);
  for (std::size_t m = 0; m < mods; ++m) {
    const auto& d = config_.modalities[m];
    const int own = d.latent_dim + d.eta_dim, head = own + ds;
    raw[m] = encoders_[m].forward(p, x[m], &enc_cache[m]);
    const Matrix l = clamp(raw[m].rightCols(head), kLogVarMin, kLogVarMax);
    mu[m] = raw[m].leftCols(own);
    lv[m] = l.leftCols(own);
    s_mu += raw[m].middleCols(own, ds) * inv_mods;
    s_lv += l.rightCols(ds) * inv_mods;
    if (noise.u[m].rows() != n || noise.u[m].cols() != own) throw ValidationError("noise shape mismatch");
    u[m] = reparameterize(mu[m], lv[m], noise.u[m]);
  }
  const Matrix s = reparameterize(s_mu, s_lv, noise.s);

  LossParts parts;

  // Reconstruction: decoder (m, k) sees only [z_m, eta_m].
  std::vector<std::vector<Mlp::Cache>> dec_cache(mods);
  std::vector<std::vector<Matrix>> dxhat(mods);
  for (std::size_t m = 0; m < mods; ++m) {
    const auto& d = config_.modalities[m];
    std::vector<Matrix> xs, xh;
    dec_cache[m].resize(static_cast<std::size_t>(d.measurements));
    for (int k = 0; k < d.measurements; ++k) {
      xs.push_back(x[m].middleCols(static_cast<Eigen::Index>(k) * d.obs_dim, d.obs_dim));
      xh.push_back(decoders_[m][static_cast<std::size_t>(k)].forward(p, u[m], &dec_cache[m][static_cast<std::size_t>(k)]));
    }
    parts.recon += loss_recon(xs, xh, grad ? &dxhat[m] : nullptr);
  }

  // Independence: eta and s against N(0, I), z through the flow.
  std::vector<Matrix> dmu(mods), dlv(mods);
  for (std::size_t m = 0; m < mods; ++m) {
    dmu[m] = Matrix::Zero(n, mu[m].cols());
    dlv[m] = Matrix::Zero(n, lv[m].cols());
    const auto& d = config_.modalities[m];
    if (d.eta_dim > 0) {
      Matrix gm, gl;
      parts.ind += kl_standard(mu[m].rightCols(d.eta_dim), lv[m].rightCols(d.eta_dim), &gm, &gl);
      dmu[m].rightCols(d.eta_dim) += w.ind * gm;
      dlv[m].rightCols(d.eta_dim) += w.ind * gl;
    }
  }
  Matrix ds_mu = Matrix::Zero(n, ds), ds_lv = Matrix::Zero(n, ds);
  if (ds > 0) {
    Matrix gm, gl;
    parts.ind += kl_standard(s_mu, s_lv, &gm, &gl);
    ds_mu += w.ind * gm;
    ds_lv += w.ind * gl;
  }

  Matrix z(n, zt);
  for (std::size_t m = 0; m < mods; ++m) {
    z.middleCols(config_.offset(static_cast<int>(m)), config_.modalities[m].latent_dim) =
        u[m].leftCols(config_.modalities[m].latent_dim);
  }
  const Matrix adj = adjacency();
  std::vector<Matrix> flow_in(static_cast<std::size_t>(zt)), ls_raw(static_cast<std::size_t>(zt));
  std::vector<Mlp::Cache> sh_cache(static_cast<std::size_t>(zt)), sc_cache(static_cast<std::size_t>(zt));
  Matrix eps(n, zt), ls(n, zt);
  for (int i = 0; i < zt; ++i) {
    const auto ui = static_cast<std::size_t>(i);
    flow_in[ui] = flow_input(z, s, i);
    const Matrix sh = shift_[ui].forward(p, flow_in[ui], &sh_cache[ui]);
    ls_raw[ui] = scale_[ui].forward(p, flow_in[ui], &sc_cache[ui]);
    ls.col(i) = clamp(ls_raw[ui], kLogScaleMin, kLogScaleMax).col(0);
    eps.col(i) = (z.col(i) - sh.col(0)).array() * (-ls.col(i)).array().exp();
  }

  Matrix deps, dls_extra = Matrix::Zero(n, zt);
  if (cfg.ind == IndependenceMode::moment) {
    for (std::size_t m = 0; m < mods; ++m) {
      const int dz = config_.modalities[m].latent_dim;
      Matrix gm, gl;
      parts.ind += kl_standard(mu[m].leftCols(dz), lv[m].leftCols(dz), &gm, &gl);
      dmu[m].leftCols(dz) += w.ind * gm;
      dlv[m].leftCols(dz) += w.ind * gl;
    }
    parts.ind += kl_moment(eps, cfg.full_covariance, grad ? &deps : nullptr);
    if (grad) deps *= w.ind;
  } else {
    // E_q[log q(z)] - E_q[log p(z | s)] with the analytic entropy of q and a
    // one-sample estimate of the flow log-density.
    double entropy_term = 0;
    for (std::size_t m = 0; m < mods; ++m) {
      const int dz = config_.modalities[m].latent_dim;
      entropy_term += (-0.5 * (1.0 + lv[m].leftCols(dz).array())).sum() / nd;
      dlv[m].leftCols(dz).array() += w.ind * (-0.5 / nd);
    }
    parts.ind += entropy_term + 0.5 * eps.squaredNorm() / nd + ls.sum() / nd;
    deps = w.ind * eps / nd;
    dls_extra.setConstant(w.ind / nd);
  }

  const Matrix dadj_sp = [&] {
    Matrix g;
    parts.sparsity = loss_sparsity(adj, mask_, &g);
    return g;
  }();
  parts.total = total_loss(parts, w);
  if (!grad) return parts;

  grad->setZero(params_.size());
  double* g = grad->data();
  Eigen::Map<Matrix> gadj(g + adj_offset_, zt, zt);
  gadj += w.sparsity * dadj_sp;

  // Flow backward.
  Matrix dz = Matrix::Zero(n, zt), ds_sample = Matrix::Zero(n, ds);
  for (int i = 0; i < zt; ++i) {
    const auto ui = static_cast<std::size_t>(i);
    const Eigen::ArrayXd inv_scale = (-ls.col(i)).array().exp();
    dz.col(i).array() += deps.col(i).array() * inv_scale;
    const Matrix dsh = (-deps.col(i).array() * inv_scale).matrix();
    Matrix dls = (-deps.col(i).array() * eps.col(i).array() + dls_extra.col(i).array()).matrix();
    clamp_grad(dls, ls_raw[ui], kLogScaleMin, kLogScaleMax);
    const Matrix din = shift_[ui].backward(p, sh_cache[ui], dsh, g) + scale_[ui].backward(p, sc_cache[ui], dls, g);
    for (int j = 0; j < zt; ++j) {
      if (mask_(i, j) == 0) continue;
      dz.col(j) += din.col(j) * adj(i, j);
      gadj(i, j) += din.col(j).dot(z.col(j));
    }
    ds_sample += din.rightCols(ds);
  }

  // Decoders backward into u.
  std::vector<Matrix> du(mods);
  for (std::size_t m = 0; m < mods; ++m) {
    const auto& d = config_.modalities[m];
    du[m] = Matrix::Zero(n, u[m].cols());
    for (int k = 0; k < d.measurements; ++k) {
      const auto uk = static_cast<std::size_t>(k);
      du[m] += decoders_[m][uk].backward(p, dec_cache[m][uk], w.recon * dxhat[m][uk], g);
    }
    du[m].leftCols(d.latent_dim) += dz.middleCols(config_.offset(static_cast<int>(m)), d.latent_dim);
  }

  // Reparameterization and s fusion, then encoders.
  ds_mu += ds_sample;
  ds_lv.array() += ds_sample.array() * noise.s.array() * (0.5 * s_lv.array()).exp() * 0.5;
  for (std::size_t m = 0; m < mods; ++m) {
    const auto& d = config_.modalities[m];
    const int own = d.latent_dim + d.eta_dim, head = own + ds;
    dmu[m] += du[m];
    dlv[m].array() += du[m].array() * noise.u[m].array() * (0.5 * lv[m].array()).exp() * 0.5;
    Matrix dout(n, 2 * head);
    dout.leftCols(own) = dmu[m];
    dout.middleCols(own, ds) = ds_mu * inv_mods;
    Matrix dl(n, head);
    dl.leftCols(own) = dlv[m];
    dl.rightCols(ds) = ds_lv * inv_mods;
    clamp_grad(dl, raw[m].rightCols(head), kLogVarMin, kLogVarMax);
    dout.rightCols(head) = dl;
    encoders_[m].backward(p, enc_cache[m], dout, g);
  }
  return parts;
}

double gradient_check(const CrlModel& model, const std::vector<Matrix>& x, const Noise& noise,
                      const ObjectiveConfig& cfg, double h, long corrupt) {
  Eigen::VectorXd analytic;
  model.objective(x, noise, cfg, &analytic);
  if (corrupt >= 0 && corrupt < analytic.size()) analytic(corrupt) = -analytic(corrupt);
  CrlModel probe = model;
  double worst = 0;
  for (Eigen::Index i = 0; i < probe.params().size(); ++i) {
    const double keep = probe.params()(i);
    probe.params()(i) = keep + h;
    const double up = probe.objective(x, noise, cfg, nullptr).total;
    probe.params()(i) = keep - h;
    const double down = probe.objective(x, noise, cfg, nullptr).total;
    probe.params()(i) = keep;
    const double numeric = (up - down) / (2.0 * h);
    const double denom = std::max({std::abs(analytic(i)), std::abs(numeric), 1e-8});
    worst = std::max(worst, std::abs(analytic(i) - numeric) / denom);
  }
  return worst;
}

}  // namespace persona::crl
