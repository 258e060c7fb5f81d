#include "tdrl/model.hpp"

#include <cmath>

namespace tdrl {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

double clamp(double v, double lim) { return v > lim ? lim : (v < -lim ? -lim : v); }

}  // namespace

void ModelConfig::validate() const {
  require(n >= 1, "model config: n must be >= 1");
  require(L >= 1, "model config: L must be >= 1");
  require(n_fix + n_chg + n_obs == n, "model config: partition must sum to n");
  require(n_fix >= 0 && n_chg >= 0 && n_obs >= 0, "model config: partition counts must be >= 0");
  require(beta > 0.0, "model config: beta must be > 0");
  require(obs_dim >= 1, "model config: obs_dim must be >= 1");
  require(m >= 1, "model config: m must be >= 1");
  require(n_chg == 0 || theta_dyn_dim >= 1, "model config: chg block requires theta_dyn_dim >= 1");
  require(n_obs == 0 || theta_obs_dim >= 1, "model config: obs block requires theta_obs_dim >= 1");
  require((n_chg == 0 && n_obs == 0) || m >= 2, "model config: chg/obs blocks require m >= 2");
}

nlohmann::ordered_json ModelConfig::to_json() const {
  nlohmann::ordered_json j;
  j["n"] = n;
  j["L"] = L;
  j["n_fix"] = n_fix;
  j["n_chg"] = n_chg;
  j["n_obs"] = n_obs;
  j["m"] = m;
  j["obs_dim"] = obs_dim;
  j["theta_dyn_dim"] = theta_dyn_dim;
  j["theta_obs_dim"] = theta_obs_dim;
  j["enc_width"] = enc_width;
  j["flow_width"] = flow_width;
  j["beta"] = beta;
  j["slope"] = slope;
  j["logvar_clip"] = logvar_clip;
  j["prior_mode"] = prior_mode == PriorMode::flow ? "flow" : "standard_normal";
  return j;
}

ModelConfig ModelConfig::from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.n = j.at("n").get<int>();
  c.L = j.at("L").get<int>();
  c.n_fix = j.at("n_fix").get<int>();
  c.n_chg = j.at("n_chg").get<int>();
  c.n_obs = j.at("n_obs").get<int>();
  c.m = j.at("m").get<int>();
  c.obs_dim = j.at("obs_dim").get<int>();
  c.theta_dyn_dim = j.at("theta_dyn_dim").get<int>();
  c.theta_obs_dim = j.at("theta_obs_dim").get<int>();
  c.enc_width = j.at("enc_width").get<int>();
  c.flow_width = j.at("flow_width").get<int>();
  c.beta = j.at("beta").get<double>();
  c.slope = j.at("slope").get<double>();
  c.logvar_clip = j.at("logvar_clip").get<double>();
  c.prior_mode = j.at("prior_mode").get<std::string>() == "flow" ? PriorMode::flow
                                                                 : PriorMode::standard_normal;
  return c;
}

int TdrlModel::block_of(int k) const {
  if (k < cfg.n_fix) return 0;
  if (k < cfg.n_fix + cfg.n_chg) return 1;
  return 2;
}

int TdrlModel::cond_dim(int k) const {
  switch (block_of(k)) {
    case 0: return cfg.n * cfg.L;
    case 1: return cfg.n * cfg.L + cfg.theta_dyn_dim;
    default: return cfg.theta_obs_dim;
  }
}

TdrlModel TdrlModel::build(const ModelConfig& cfg, uint64_t seed) {
  cfg.validate();
  TdrlModel model;
  model.cfg = cfg;
  model.encoder.init({cfg.obs_dim, cfg.enc_width, cfg.enc_width, cfg.enc_width, 2 * cfg.n},
                     cfg.slope, mix_seed(seed, {0x656e63}));
  model.decoder.init({cfg.n, cfg.enc_width, cfg.enc_width, cfg.obs_dim}, cfg.slope,
                     mix_seed(seed, {0x646563}));
  model.flows.resize(cfg.n);
  for (int k = 0; k < cfg.n; ++k)
    model.flows[static_cast<size_t>(k)].init({model.cond_dim(k), cfg.flow_width, 2}, cfg.slope,
                                             mix_seed(seed, {0x666c6f, static_cast<uint64_t>(k)}));
  Rng trng(mix_seed(seed, {0x746874}));
  model.theta_dyn = 0.1 * trng.normal_matrix(cfg.m, cfg.theta_dyn_dim);
  model.theta_obs = 0.1 * trng.normal_matrix(cfg.m, cfg.theta_obs_dim);
  model.g_theta_dyn = MatrixXd::Zero(cfg.m, cfg.theta_dyn_dim);
  model.g_theta_obs = MatrixXd::Zero(cfg.m, cfg.theta_obs_dim);
  return model;
}

PosteriorStats TdrlModel::encode(const MatrixXd& x) {
  require(x.cols() == cfg.obs_dim, "encode: observation dimension mismatch");
  const MatrixXd h = encoder.infer(x);
  PosteriorStats stats;
  stats.mu = h.leftCols(cfg.n);
  stats.log_var = h.rightCols(cfg.n).unaryExpr([&](double v) { return clamp(v, cfg.logvar_clip); });
  return stats;
}

MatrixXd TdrlModel::decode(const MatrixXd& z_hat) {
  require(z_hat.cols() == cfg.n, "decode: latent dimension mismatch");
  MatrixXd out = decoder.infer(z_hat);
  if (!out.allFinite()) throw NumericalError("decode: non-finite output");
  return out;
}

MatrixXd reparameterized_sample(const PosteriorStats& stats, const MatrixXd& noise) {
  require(noise.rows() == stats.mu.rows() && noise.cols() == stats.mu.cols(),
          "reparameterized_sample: noise shape mismatch");
  return stats.mu + (stats.log_var.array() / 2.0).exp().matrix().cwiseProduct(noise);
}

std::pair<double, double> TdrlModel::component_flow(int k, const VectorXd& z_hx, int domain) const {
  VectorXd cond(cond_dim(k));
  switch (block_of(k)) {
    case 0: cond = z_hx; break;
    case 1:
      cond.head(cfg.n * cfg.L) = z_hx;
      cond.tail(cfg.theta_dyn_dim) = theta_dyn.row(domain);
      break;
    default: cond = theta_obs.row(domain); break;
  }
  const MatrixXd out = flows[static_cast<size_t>(k)].infer(cond.transpose());
  return {out(0, 0), out(0, 1)};
}

PriorOutput TdrlModel::prior_log_density(const MatrixXd& z_hat, int domain) const {
  const int T = static_cast<int>(z_hat.rows());
  const int n = cfg.n;
  const int L = cfg.L;
  require(T > L, "prior_log_density: need T > L");
  require(domain >= 0 && domain < cfg.m, "prior_log_density: domain out of range");
  const int R = T - L;

  PriorOutput out;
  out.eps_hat.resize(R, n);
  out.log_jac.resize(R, n);
  out.log_prior = VectorXd::Zero(R);

  if (cfg.prior_mode == PriorMode::standard_normal) {
    for (int r = 0; r < R; ++r)
      for (int k = 0; k < n; ++k) {
        const double z = z_hat(L + r, k);
        out.eps_hat(r, k) = z;
        out.log_jac(r, k) = 0.0;
        out.log_prior(r) += -0.5 * kLog2Pi - 0.5 * z * z;
      }
    return out;
  }

  MatrixXd z_hx(R, n * L);
  for (int r = 0; r < R; ++r)
    for (int tau = 0; tau < L; ++tau)
      z_hx.block(r, tau * n, 1, n) = z_hat.row(L + r - 1 - tau);

  for (int k = 0; k < n; ++k) {
    MatrixXd cond;
    switch (block_of(k)) {
      case 0: cond = z_hx; break;
      case 1: {
        cond.resize(R, cfg.n * cfg.L + cfg.theta_dyn_dim);
        cond.leftCols(n * L) = z_hx;
        cond.rightCols(cfg.theta_dyn_dim) = theta_dyn.row(domain).replicate(R, 1);
        break;
      }
      default: cond = theta_obs.row(domain).replicate(R, 1); break;
    }
    const MatrixXd at = flows[static_cast<size_t>(k)].infer(cond);
    for (int r = 0; r < R; ++r) {
      const double a = at(r, 0);
      const double t = at(r, 1);
      const double eps = std::exp(a) * z_hat(L + r, k) + t;
      out.eps_hat(r, k) = eps;
      out.log_jac(r, k) = a;
      out.log_prior(r) += -0.5 * kLog2Pi - 0.5 * eps * eps + a;
    }
  }
  return out;
}

LossBreakdown TdrlModel::elbo_batch(const std::vector<const MatrixXd*>& xs,
                                    const std::vector<int>& domains, double beta,
                                    const MatrixXd& noise, bool with_grad) {
  const int B = static_cast<int>(xs.size());
  require(B > 0, "elbo_batch: empty batch");
  require(domains.size() == xs.size(), "elbo_batch: domain labels must match batch");
  const int T = static_cast<int>(xs[0]->rows());
  const int n = cfg.n;
  const int L = cfg.L;
  const int D = cfg.obs_dim;
  require(T >= L + 2, "elbo_batch: sequences must have length >= L + 2");
  for (const auto* x : xs)
    require(static_cast<int>(x->rows()) == T && static_cast<int>(x->cols()) == D,
            "elbo_batch: ragged batch");
  const int rows = B * T;
  require(noise.cols() == n && noise.rows() % rows == 0, "elbo_batch: noise shape mismatch");
  const int mc = static_cast<int>(noise.rows()) / rows;

  MatrixXd X(rows, D);
  for (int b = 0; b < B; ++b) X.middleRows(b * T, T) = *xs[static_cast<size_t>(b)];

  const MatrixXd H = encoder.forward(X);
  const MatrixXd mu = H.leftCols(n);
  const MatrixXd lv_raw = H.rightCols(n);
  const MatrixXd lv = lv_raw.unaryExpr([&](double v) { return clamp(v, cfg.logvar_clip); });
  const MatrixXd sd = (lv.array() / 2.0).exp();

  const double recon_scale = 1.0 / (static_cast<double>(rows) * D * mc);
  const double kld_scale = 1.0 / (static_cast<double>(rows) * n * mc);

  double recon = 0.0, kld = 0.0;
  MatrixXd dH_sum = MatrixXd::Zero(rows, 2 * n);

  const int R = B * (T - L);
  std::vector<int> flow_row_b(static_cast<size_t>(R)), flow_row_t(static_cast<size_t>(R));
  {
    int r = 0;
    for (int b = 0; b < B; ++b)
      for (int t = L; t < T; ++t, ++r) {
        flow_row_b[static_cast<size_t>(r)] = b;
        flow_row_t[static_cast<size_t>(r)] = t;
      }
  }

  for (int s = 0; s < mc; ++s) {
    const MatrixXd E = noise.middleRows(s * rows, rows);
    const MatrixXd Z = mu + sd.cwiseProduct(E);

    const MatrixXd Xhat = decoder.forward(Z);
    const MatrixXd rerr = Xhat - X;
    recon += rerr.squaredNorm() * recon_scale;

    // log q at the sample: -log(2pi)/2 - lv/2 - E^2/2
    kld += kld_scale * (-0.5 * kLog2Pi * rows * n - 0.5 * lv.sum() - 0.5 * E.squaredNorm());

    MatrixXd dZ = MatrixXd::Zero(rows, n);
    if (with_grad) {
      dZ = decoder.backward(2.0 * recon_scale * rerr);
      // log q gradient paths (excluding the reparameterized sample path,
      // which is folded in with the rest of dZ below)
      const double c = beta * kld_scale;
      dZ -= c * E.cwiseQuotient(sd);
      dH_sum.leftCols(n) += c * E.cwiseQuotient(sd);
      dH_sum.rightCols(n) += c * (0.5 * E.array().square() - 0.5).matrix();
    }

    // transition prior
    if (cfg.prior_mode == PriorMode::standard_normal) {
      double lp = 0.0;
      for (int r = 0; r < rows; ++r)
        for (int k = 0; k < n; ++k) lp += -0.5 * kLog2Pi - 0.5 * Z(r, k) * Z(r, k);
      kld -= kld_scale * lp;
      if (with_grad) dZ += beta * kld_scale * Z;  // -(-c * -z)
    } else {
      MatrixXd z_hx(R, n * L);
      for (int r = 0; r < R; ++r) {
        const int base = flow_row_b[static_cast<size_t>(r)] * T + flow_row_t[static_cast<size_t>(r)];
        for (int tau = 0; tau < L; ++tau) z_hx.block(r, tau * n, 1, n) = Z.row(base - 1 - tau);
      }
      MatrixXd dZhx = MatrixXd::Zero(R, n * L);
      double lp = 0.0;
      const double c = beta * kld_scale;
      for (int k = 0; k < n; ++k) {
        const int blk = block_of(k);
        MatrixXd cond;
        if (blk == 0) {
          cond = z_hx;
        } else if (blk == 1) {
          cond.resize(R, n * L + cfg.theta_dyn_dim);
          cond.leftCols(n * L) = z_hx;
          for (int r = 0; r < R; ++r)
            cond.block(r, n * L, 1, cfg.theta_dyn_dim) =
                theta_dyn.row(domains[static_cast<size_t>(flow_row_b[static_cast<size_t>(r)])]);
        } else {
          cond.resize(R, cfg.theta_obs_dim);
          for (int r = 0; r < R; ++r)
            cond.row(r) = theta_obs.row(domains[static_cast<size_t>(flow_row_b[static_cast<size_t>(r)])]);
        }
        const MatrixXd at = flows[static_cast<size_t>(k)].forward(cond);
        VectorXd eps(R), ea(R);
        for (int r = 0; r < R; ++r) {
          const int base = flow_row_b[static_cast<size_t>(r)] * T + flow_row_t[static_cast<size_t>(r)];
          ea(r) = std::exp(at(r, 0));
          eps(r) = ea(r) * Z(base, k) + at(r, 1);
          lp += -0.5 * kLog2Pi - 0.5 * eps(r) * eps(r) + at(r, 0);
        }
        if (with_grad) {
          MatrixXd dAT(R, 2);
          for (int r = 0; r < R; ++r) {
            const int base = flow_row_b[static_cast<size_t>(r)] * T + flow_row_t[static_cast<size_t>(r)];
            const double deps = c * eps(r);  // upstream -c times dlp/deps = -eps
            dAT(r, 0) = -c + deps * (eps(r) - at(r, 1));
            dAT(r, 1) = deps;
            dZ(base, k) += deps * ea(r);
          }
          const MatrixXd dcond = flows[static_cast<size_t>(k)].backward(dAT);
          if (blk != 2) dZhx += dcond.leftCols(n * L);
          if (blk == 1)
            for (int r = 0; r < R; ++r)
              g_theta_dyn.row(domains[static_cast<size_t>(flow_row_b[static_cast<size_t>(r)])]) +=
                  dcond.block(r, n * L, 1, cfg.theta_dyn_dim);
          if (blk == 2)
            for (int r = 0; r < R; ++r)
              g_theta_obs.row(domains[static_cast<size_t>(flow_row_b[static_cast<size_t>(r)])]) +=
                  dcond.row(r);
        }
      }
      // first L steps: standard-normal prior (no history available)
      for (int b = 0; b < B; ++b)
        for (int t = 0; t < L; ++t)
          for (int k = 0; k < n; ++k) {
            const double z = Z(b * T + t, k);
            lp += -0.5 * kLog2Pi - 0.5 * z * z;
            if (with_grad) dZ(b * T + t, k) += c * z;
          }
      kld -= kld_scale * lp;
      if (with_grad) {
        for (int r = 0; r < R; ++r) {
          const int base = flow_row_b[static_cast<size_t>(r)] * T + flow_row_t[static_cast<size_t>(r)];
          for (int tau = 0; tau < L; ++tau) dZ.row(base - 1 - tau) += dZhx.block(r, tau * n, 1, n);
        }
      }
    }

    if (with_grad) {
      // reparameterization: Z = mu + sd .* E
      dH_sum.leftCols(n) += dZ;
      dH_sum.rightCols(n) += 0.5 * dZ.cwiseProduct(sd).cwiseProduct(E);
    }
  }

  if (with_grad) {
    // clamp pass-through mask on log-var columns
    MatrixXd dH = dH_sum;
    for (int r = 0; r < rows; ++r)
      for (int k = 0; k < n; ++k)
        if (std::abs(lv_raw(r, k)) > cfg.logvar_clip) dH(r, n + k) = 0.0;
    encoder.backward(dH);
  }

  LossBreakdown loss;
  loss.recon = recon;
  loss.kld = kld;
  loss.total = recon + beta * kld;
  if (!std::isfinite(loss.recon)) throw NumericalError("elbo_step: non-finite reconstruction loss");
  if (!std::isfinite(loss.kld)) throw NumericalError("elbo_step: non-finite KL loss");
  return loss;
}

std::vector<ParamRef> TdrlModel::params() {
  std::vector<ParamRef> out;
  encoder.collect(out);
  decoder.collect(out);
  for (auto& f : flows) f.collect(out);
  out.push_back({theta_dyn.data(), g_theta_dyn.data(), theta_dyn.size(), false});
  out.push_back({theta_obs.data(), g_theta_obs.data(), theta_obs.size(), false});
  return out;
}

void TdrlModel::zero_grad() {
  encoder.zero_grad();
  decoder.zero_grad();
  for (auto& f : flows) f.zero_grad();
  g_theta_dyn.setZero();
  g_theta_obs.setZero();
}

namespace {

void pack_mlp(Pack& pack, const std::string& prefix, const Mlp& mlp) {
  for (size_t i = 0; i < mlp.layers.size(); ++i) {
    pack.tensors.emplace_back(prefix + ".W" + std::to_string(i), Tensor::from_matrix(mlp.layers[i].W));
    pack.tensors.emplace_back(prefix + ".b" + std::to_string(i),
                              Tensor::from_matrix(mlp.layers[i].b));
  }
}

void unpack_mlp(const Pack& pack, const std::string& prefix, Mlp& mlp) {
  for (size_t i = 0; i < mlp.layers.size(); ++i) {
    mlp.layers[i].W = pack.get(prefix + ".W" + std::to_string(i)).to_matrix();
    mlp.layers[i].b = pack.get(prefix + ".b" + std::to_string(i)).to_matrix().col(0);
  }
}

}  // namespace

Pack TdrlModel::to_pack() const {
  Pack pack;
  pack.meta["kind"] = "tdrl_checkpoint";
  pack.meta["model_config"] = cfg.to_json();
  pack_mlp(pack, "encoder", encoder);
  pack_mlp(pack, "decoder", decoder);
  for (int k = 0; k < cfg.n; ++k) pack_mlp(pack, "flow" + std::to_string(k), flows[static_cast<size_t>(k)]);
  pack.tensors.emplace_back("theta_dyn", Tensor::from_matrix(theta_dyn));
  pack.tensors.emplace_back("theta_obs", Tensor::from_matrix(theta_obs));
  return pack;
}

TdrlModel TdrlModel::from_pack(const Pack& pack) {
  const ModelConfig cfg = ModelConfig::from_json(pack.meta.at("model_config"));
  TdrlModel model = build(cfg, 0);
  unpack_mlp(pack, "encoder", model.encoder);
  unpack_mlp(pack, "decoder", model.decoder);
  for (int k = 0; k < cfg.n; ++k)
    unpack_mlp(pack, "flow" + std::to_string(k), model.flows[static_cast<size_t>(k)]);
  model.theta_dyn = pack.get("theta_dyn").to_matrix();
  model.theta_obs = pack.get("theta_obs").to_matrix();
  return model;
}

}  // namespace tdrl
