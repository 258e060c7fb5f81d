#include "tdrl/generator.hpp"

#include <cmath>

#include "tdrl/parallel.hpp"

namespace tdrl {

namespace {

constexpr uint64_t kSaltTransition = 0x7261a5;
constexpr uint64_t kSaltNoise = 0x6e6f69;
constexpr uint64_t kSaltMask = 0x6d736b;
constexpr uint64_t kSaltFix = 0x666978;
constexpr uint64_t kSaltChg = 0x636867;
constexpr uint64_t kSaltObs = 0x6f6273;

MatrixXd orthogonal_init(int rows, int cols, Rng& rng, double scale) {
  const int k = std::max(rows, cols);
  MatrixXd q = random_orthogonal(k, rng);
  return scale * q.topLeftCorner(rows, cols);
}

nlohmann::ordered_json matrix_to_json(const MatrixXd& m) {
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    nlohmann::ordered_json row = nlohmann::ordered_json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

MatrixXd matrix_from_json(const nlohmann::json& j) {
  const auto rows = j.size();
  if (rows == 0) return MatrixXd(0, 0);
  const auto cols = j.at(0).size();
  MatrixXd m(rows, cols);
  for (size_t i = 0; i < rows; ++i)
    for (size_t c = 0; c < cols; ++c) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = j.at(i).at(c).get<double>();
  return m;
}

nlohmann::ordered_json vector_to_json(const VectorXd& v) {
  nlohmann::ordered_json a = nlohmann::ordered_json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

VectorXd vector_from_json(const nlohmann::json& j) {
  VectorXd v(j.size());
  for (size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = j.at(i).get<double>();
  return v;
}

// Per-row Bernoulli(density) parent masks, each row nonempty and rows pairwise
// distinct where possible so no two components share an identical parent set.
MatrixXd sample_parent_mask(int n_out, int n_in, double density, Rng& rng) {
  MatrixXd mask = MatrixXd::Ones(n_out, n_in);
  if (density >= 1.0) return mask;
  std::vector<std::vector<uint8_t>> seen;
  for (int i = 0; i < n_out; ++i) {
    for (int attempt = 0; attempt < 100; ++attempt) {
      std::vector<uint8_t> row(n_in, 0);
      int count = 0;
      for (int j = 0; j < n_in; ++j)
        if (rng.uniform() < density) {
          row[j] = 1;
          ++count;
        }
      if (count == 0) continue;
      bool dup = false;
      for (const auto& r : seen)
        if (r == row) {
          dup = true;
          break;
        }
      if (dup && attempt < 99) continue;
      seen.push_back(row);
      for (int j = 0; j < n_in; ++j) mask(i, j) = row[j];
      break;
    }
  }
  return mask;
}

TransitionNet make_mlp(int n_in, int n_out, int hidden, int domains, Rng& rng, double density,
                       double squash) {
  TransitionNet net;
  if (domains <= 1) {
    net.W1.push_back(orthogonal_init(hidden, n_in, rng, 0.8));
  } else {
    // per-domain first layer, entries uniform on [-1, 1]
    for (int r = 0; r < domains; ++r) net.W1.push_back(rng.uniform_matrix(hidden, n_in, -1.0, 1.0));
  }
  net.W2 = orthogonal_init(hidden, hidden, rng, 0.8);
  net.W3 = orthogonal_init(n_out, hidden, rng, 0.8);
  net.b1 = rng.uniform_matrix(hidden, 1, -0.5, 0.5).col(0);
  net.b2 = rng.uniform_matrix(hidden, 1, -0.5, 0.5).col(0);
  net.b3 = rng.uniform_matrix(n_out, 1, -0.5, 0.5).col(0);
  net.mask = sample_parent_mask(n_out, n_in, density, rng);
  net.squash = squash;
  return net;
}

}  // namespace

std::string family_name(Family f) {
  switch (f) {
    case Family::heteronoise_fixed: return "heteronoise_fixed";
    case Family::gaussian_additive: return "gaussian_additive";
    case Family::linear_nongaussian: return "linear_nongaussian";
    case Family::changing_dynamics: return "changing_dynamics";
    case Family::modular: return "modular";
  }
  return "?";
}

Family family_from_name(const std::string& name) {
  if (name == "heteronoise_fixed") return Family::heteronoise_fixed;
  if (name == "gaussian_additive") return Family::gaussian_additive;
  if (name == "linear_nongaussian") return Family::linear_nongaussian;
  if (name == "changing_dynamics") return Family::changing_dynamics;
  if (name == "modular") return Family::modular;
  throw ConfigError("unknown family: " + name);
}

void GeneratorSpec::validate() const {
  require(n >= 1, "field n: latent dimension must be >= 1");
  require(L >= 1, "field L: lag must be >= 1");
  require(T > L, "field T: sequence length must exceed lag L");
  require(num_seqs >= 1, "field num_seqs: must be >= 1");
  require(m >= 1, "field m: domain count must be >= 1");
  require(n_fix >= 0 && n_chg >= 0 && n_obs >= 0, "field partition: counts must be >= 0");
  require(n_fix + n_chg + n_obs == n, "field partition: n_fix + n_chg + n_obs must equal n");
  require(!(n_chg > 0 || n_obs > 0) || m >= 2,
          "field m: changing/observation blocks require m >= 2 domains");
  require(edge_density > 0.0 && edge_density <= 1.0, "field edge_density: must be in (0, 1]");
  require(hidden >= 1, "field hidden: must be >= 1");
  require(burn_in >= 0, "field burn_in: must be >= 0");
  require(noise.sigma > 0.0, "field sigma: must be > 0");
  switch (family) {
    case Family::heteronoise_fixed:
      require(m == 1 && n_chg == 0 && n_obs == 0, "field family: heteronoise_fixed needs m=1 and an all-fix partition");
      break;
    case Family::gaussian_additive:
      require(m == 1, "field family: gaussian_additive needs m=1");
      break;
    case Family::linear_nongaussian:
      require(m == 1, "field family: linear_nongaussian needs m=1");
      require(noise.beta > 2.0 && noise.beta != 3.0, "field beta: requires beta > 2 and beta != 3");
      require(noise.lambda > 0.0, "field lambda: must be > 0");
      break;
    case Family::changing_dynamics:
      require(m >= 2, "field m: changing_dynamics requires m >= 2");
      require(n_chg == n, "field partition: changing_dynamics is an all-chg partition");
      break;
    case Family::modular:
      require(m >= 2, "field m: modular requires m >= 2");
      require(n_fix > 0 && n_chg > 0, "field partition: modular requires n_fix > 0 and n_chg > 0");
      break;
  }
}

nlohmann::ordered_json GeneratorSpec::to_json() const {
  nlohmann::ordered_json j;
  j["n"] = n;
  j["L"] = L;
  j["T"] = T;
  j["num_seqs"] = num_seqs;
  j["m"] = m;
  j["n_fix"] = n_fix;
  j["n_chg"] = n_chg;
  j["n_obs"] = n_obs;
  j["family"] = family_name(family);
  j["sigma"] = noise.sigma;
  j["beta"] = noise.beta;
  j["lambda"] = noise.lambda;
  j["seed"] = seed;
  j["edge_density"] = edge_density;
  j["hidden"] = hidden;
  j["burn_in"] = burn_in;
  return j;
}

GeneratorSpec GeneratorSpec::from_json(const nlohmann::json& j) {
  GeneratorSpec s;
  s.n = j.at("n").get<int>();
  s.L = j.at("L").get<int>();
  s.T = j.at("T").get<int>();
  s.num_seqs = j.at("num_seqs").get<int>();
  s.m = j.at("m").get<int>();
  s.n_fix = j.at("n_fix").get<int>();
  s.n_chg = j.at("n_chg").get<int>();
  s.n_obs = j.at("n_obs").get<int>();
  s.family = family_from_name(j.at("family").get<std::string>());
  s.noise.sigma = j.at("sigma").get<double>();
  s.noise.beta = j.at("beta").get<double>();
  s.noise.lambda = j.at("lambda").get<double>();
  s.seed = j.at("seed").get<uint64_t>();
  s.edge_density = j.at("edge_density").get<double>();
  s.hidden = j.at("hidden").get<int>();
  s.burn_in = j.at("burn_in").get<int>();
  return s;
}

int Adjacency::edge_count() const {
  int c = 0;
  for (uint8_t v : data) c += v != 0;
  return c;
}

VectorXd TransitionNet::forward(const VectorXd& hist, int domain) const {
  VectorXd out(n_out());
  for (int k = 0; k < n_out(); ++k) out(k) = forward_component(k, hist, domain);
  return out;
}

double TransitionNet::forward_component(int k, const VectorXd& hist, int domain) const {
  const MatrixXd& w1 = W1.size() == 1 ? W1[0] : W1.at(static_cast<size_t>(domain));
  const VectorXd masked = hist.cwiseProduct(mask.row(k).transpose());
  VectorXd h = (w1 * masked + b1).unaryExpr([&](double x) { return leaky_relu(x, slope); });
  h = (W2 * h + b2).unaryExpr([&](double x) { return leaky_relu(x, slope); });
  double y = W3.row(k).dot(h) + b3(k);
  if (squash > 0.0) y = squash * std::tanh(y / squash);
  return y;
}

nlohmann::ordered_json TransitionNet::to_json() const {
  nlohmann::ordered_json j;
  nlohmann::ordered_json w1 = nlohmann::ordered_json::array();
  for (const auto& w : W1) w1.push_back(matrix_to_json(w));
  j["W1"] = std::move(w1);
  j["W2"] = matrix_to_json(W2);
  j["W3"] = matrix_to_json(W3);
  j["b1"] = vector_to_json(b1);
  j["b2"] = vector_to_json(b2);
  j["b3"] = vector_to_json(b3);
  j["mask"] = matrix_to_json(mask);
  j["slope"] = slope;
  j["squash"] = squash;
  return j;
}

TransitionNet TransitionNet::from_json(const nlohmann::json& j) {
  TransitionNet n;
  for (const auto& w : j.at("W1")) n.W1.push_back(matrix_from_json(w));
  n.W2 = matrix_from_json(j.at("W2"));
  n.W3 = matrix_from_json(j.at("W3"));
  n.b1 = vector_from_json(j.at("b1"));
  n.b2 = vector_from_json(j.at("b2"));
  n.b3 = vector_from_json(j.at("b3"));
  n.mask = matrix_from_json(j.at("mask"));
  n.slope = j.at("slope").get<double>();
  n.squash = j.at("squash").get<double>();
  return n;
}

double TransitionRecord::coupling_value(int k, const VectorXd& hist) const {
  if (coupling == CouplingMode::unit) return 1.0;
  const TransitionNet& net = *fix_net;
  const auto row = net.mask.row(k);
  double sum = 0.0;
  int count = 0;
  for (Eigen::Index j = 0; j < hist.size(); ++j)
    if (row(j) != 0.0) {
      sum += hist(j);
      ++count;
    }
  double s = count > 0 ? sum / count : 0.0;
  if (std::abs(s) < coupling_floor) s = s >= 0.0 ? coupling_floor : -coupling_floor;
  return s;
}

VectorXd TransitionRecord::predict_mean(const VectorXd& hist, int domain) const {
  switch (family) {
    case Family::heteronoise_fixed:
    case Family::gaussian_additive:
      return fix_net->forward(hist);
    case Family::linear_nongaussian:
      return linear_C * hist.head(n);
    case Family::changing_dynamics:
      return chg_net->forward(hist, domain);
    case Family::modular: {
      VectorXd mean(n);
      // fix block sees only the lagged fix block
      VectorXd fix_hist(static_cast<Eigen::Index>(n_fix) * L);
      for (int tau = 0; tau < L; ++tau)
        fix_hist.segment(static_cast<Eigen::Index>(tau) * n_fix, n_fix) =
            hist.segment(static_cast<Eigen::Index>(tau) * n, n_fix);
      mean.head(n_fix) = fix_net->forward(fix_hist);
      mean.segment(n_fix, n_chg) = chg_net->forward(hist, domain);
      for (int o = 0; o < n_obs; ++o) mean(n_fix + n_chg + o) = obs_mean(domain, o);
      return mean;
    }
  }
  throw NumericalError("predict_mean: unhandled family");
}

double TransitionRecord::cond_sd(int k, const VectorXd& hist, int domain) const {
  switch (family) {
    case Family::heteronoise_fixed:
      return noise_sigma(k) * std::abs(coupling_value(k, hist));
    case Family::gaussian_additive:
    case Family::changing_dynamics:
      return noise_sigma(k);
    case Family::linear_nongaussian:
      throw NumericalError("cond_sd: linear_nongaussian noise is generalized-normal");
    case Family::modular: {
      if (k < n_fix) {
        VectorXd fix_hist(static_cast<Eigen::Index>(n_fix) * L);
        for (int tau = 0; tau < L; ++tau)
          fix_hist.segment(static_cast<Eigen::Index>(tau) * n_fix, n_fix) =
              hist.segment(static_cast<Eigen::Index>(tau) * n, n_fix);
        TransitionRecord sub;
        sub.family = Family::heteronoise_fixed;
        sub.fix_net = fix_net;
        sub.coupling = coupling;
        sub.coupling_floor = coupling_floor;
        sub.noise_sigma = noise_sigma;
        return sub.cond_sd(k, fix_hist);
      }
      if (k < n_fix + n_chg) return noise_sigma(k);
      return std::sqrt(obs_var(domain, k - n_fix - n_chg));
    }
  }
  throw NumericalError("cond_sd: unhandled family");
}

nlohmann::ordered_json TransitionRecord::to_json() const {
  nlohmann::ordered_json j;
  j["family"] = family_name(family);
  j["n"] = n;
  j["L"] = L;
  j["m"] = m;
  j["n_fix"] = n_fix;
  j["n_chg"] = n_chg;
  j["n_obs"] = n_obs;
  if (fix_net) j["fix_net"] = fix_net->to_json();
  if (chg_net) j["chg_net"] = chg_net->to_json();
  if (linear_C.size() > 0) j["linear_C"] = matrix_to_json(linear_C);
  j["noise_sigma"] = vector_to_json(noise_sigma);
  j["gn_beta"] = gn_beta;
  j["gn_lambda"] = gn_lambda;
  if (obs_mean.size() > 0) {
    j["obs_mean"] = matrix_to_json(obs_mean);
    j["obs_var"] = matrix_to_json(obs_var);
  }
  j["coupling"] = coupling == CouplingMode::parent_mean ? "parent_mean" : "unit";
  j["coupling_floor"] = coupling_floor;
  j["adjacency"] = nlohmann::ordered_json(adjacency.data);
  return j;
}

TransitionRecord TransitionRecord::from_json(const nlohmann::json& j) {
  TransitionRecord r;
  r.family = family_from_name(j.at("family").get<std::string>());
  r.n = j.at("n").get<int>();
  r.L = j.at("L").get<int>();
  r.m = j.at("m").get<int>();
  r.n_fix = j.at("n_fix").get<int>();
  r.n_chg = j.at("n_chg").get<int>();
  r.n_obs = j.at("n_obs").get<int>();
  if (j.contains("fix_net")) r.fix_net = TransitionNet::from_json(j.at("fix_net"));
  if (j.contains("chg_net")) r.chg_net = TransitionNet::from_json(j.at("chg_net"));
  if (j.contains("linear_C")) r.linear_C = matrix_from_json(j.at("linear_C"));
  r.noise_sigma = vector_from_json(j.at("noise_sigma"));
  r.gn_beta = j.at("gn_beta").get<double>();
  r.gn_lambda = j.at("gn_lambda").get<double>();
  if (j.contains("obs_mean")) {
    r.obs_mean = matrix_from_json(j.at("obs_mean"));
    r.obs_var = matrix_from_json(j.at("obs_var"));
  }
  r.coupling = j.at("coupling").get<std::string>() == "unit" ? CouplingMode::unit : CouplingMode::parent_mean;
  r.coupling_floor = j.at("coupling_floor").get<double>();
  r.adjacency = Adjacency(r.n, r.L);
  r.adjacency.data = j.at("adjacency").get<std::vector<uint8_t>>();
  return r;
}

VectorXd sample_generalized_normal(double beta, double lambda, int count, uint64_t seed) {
  require(beta > 0.0, "sample_generalized_normal: beta must be > 0");
  require(lambda > 0.0, "sample_generalized_normal: lambda must be > 0");
  Rng rng(mix_seed(seed, {kSaltNoise, 0x676e}));
  VectorXd out(count);
  for (int i = 0; i < count; ++i) {
    const double g = rng.gamma(1.0 / beta);
    out(i) = rng.sign() * std::pow(g / lambda, 1.0 / beta);
  }
  return out;
}

double generalized_normal_variance(double beta, double lambda) {
  return std::pow(lambda, -2.0 / beta) * std::tgamma(3.0 / beta) / std::tgamma(1.0 / beta);
}

double generalized_normal_log_density(double x, double beta, double lambda) {
  const double log_norm = std::log(beta) + std::log(lambda) / beta - std::log(2.0) - std::lgamma(1.0 / beta);
  return log_norm - lambda * std::pow(std::abs(x), beta);
}

TransitionRecord make_transition(const GeneratorSpec& spec, uint64_t seed) {
  spec.validate();
  TransitionRecord rec;
  rec.family = spec.family;
  rec.n = spec.n;
  rec.L = spec.L;
  rec.m = spec.m;
  rec.n_fix = spec.n_fix;
  rec.n_chg = spec.n_chg;
  rec.n_obs = spec.n_obs;
  rec.adjacency = Adjacency(spec.n, spec.L);
  Rng rng(mix_seed(seed, {kSaltTransition}));
  auto dense_adjacency = [&](int row_begin, int row_end) {
    for (int i = row_begin; i < row_end; ++i)
      for (int j = 0; j < spec.n; ++j)
        for (int tau = 0; tau < spec.L; ++tau) rec.adjacency.at(i, j, tau) = 1;
  };

  switch (spec.family) {
    case Family::heteronoise_fixed: {
      Rng mrng(mix_seed(seed, {kSaltMask}));
      rec.fix_net = make_mlp(spec.n * spec.L, spec.n, spec.hidden, 1, rng, 1.0, 0.0);
      rec.fix_net->mask = sample_parent_mask(spec.n, spec.n * spec.L, spec.edge_density, mrng);
      rec.noise_sigma = VectorXd::Constant(spec.n, spec.noise.sigma);
      for (int i = 0; i < spec.n; ++i)
        for (int tau = 0; tau < spec.L; ++tau)
          for (int j = 0; j < spec.n; ++j)
            rec.adjacency.at(i, j, tau) = rec.fix_net->mask(i, tau * spec.n + j) != 0.0;
      break;
    }
    case Family::gaussian_additive: {
      rec.fix_net = make_mlp(spec.n * spec.L, spec.n, spec.hidden, 1, rng, 1.0, 0.0);
      rec.noise_sigma = VectorXd(spec.n);
      for (int k = 0; k < spec.n; ++k) rec.noise_sigma(k) = spec.noise.sigma * rng.uniform(0.7, 1.3);
      dense_adjacency(0, spec.n);
      break;
    }
    case Family::linear_nongaussian: {
      rec.gn_beta = spec.noise.beta;
      rec.gn_lambda = spec.noise.lambda;
      bool ok = false;
      for (int attempt = 0; attempt < 100 && !ok; ++attempt) {
        MatrixXd c = rng.normal_matrix(spec.n, spec.n) * (0.5 / std::sqrt(spec.n));
        bool rows_ok = true;
        for (int i = 0; i < spec.n; ++i)
          if (c.row(i).cwiseAbs().maxCoeff() < 0.1) rows_ok = false;
        if (!rows_ok) continue;
        const double rho = c.eigenvalues().cwiseAbs().maxCoeff();
        if (rho > 0.95) continue;
        rec.linear_C = c;
        ok = true;
      }
      if (!ok) throw ConfigError("linear_nongaussian: no stable C found in 100 attempts");
      rec.noise_sigma = VectorXd::Constant(spec.n, std::sqrt(generalized_normal_variance(spec.noise.beta, spec.noise.lambda)));
      dense_adjacency(0, spec.n);
      break;
    }
    case Family::changing_dynamics: {
      rec.chg_net = make_mlp(spec.n * spec.L, spec.n, spec.hidden, spec.m, rng, 1.0, 3.0);
      rec.noise_sigma = VectorXd::Constant(spec.n, spec.noise.sigma);
      dense_adjacency(0, spec.n);
      break;
    }
    case Family::modular: {
      Rng frng(mix_seed(seed, {kSaltFix}));
      Rng crng(mix_seed(seed, {kSaltChg}));
      Rng orng(mix_seed(seed, {kSaltObs}));
      rec.fix_net = make_mlp(spec.n_fix * spec.L, spec.n_fix, spec.hidden, 1, frng, spec.edge_density, 0.0);
      rec.chg_net = make_mlp(spec.n * spec.L, spec.n_chg, spec.hidden, spec.m, crng, 1.0, 3.0);
      rec.noise_sigma = VectorXd::Constant(spec.n, spec.noise.sigma);
      rec.obs_mean = orng.uniform_matrix(spec.m, spec.n_obs, -1.0, 1.0);
      rec.obs_var = orng.uniform_matrix(spec.m, spec.n_obs, 0.01, 1.0);
      for (int i = 0; i < spec.n_fix; ++i)
        for (int tau = 0; tau < spec.L; ++tau)
          for (int j = 0; j < spec.n_fix; ++j)
            rec.adjacency.at(i, j, tau) = rec.fix_net->mask(i, tau * spec.n_fix + j) != 0.0;
      dense_adjacency(spec.n_fix, spec.n_fix + spec.n_chg);
      // obs rows stay all false: observation-change components have no lagged parents
      break;
    }
  }
  return rec;
}

MatrixXd sample_path(const TransitionRecord& rec, const GeneratorSpec& spec, int domain,
                     uint64_t noise_seed) {
  require(spec.T > spec.L, "sample_path: T must exceed L");
  require(domain >= 0 && domain < spec.m, "sample_path: domain out of range");
  Rng rng(noise_seed);
  const int n = spec.n;
  const int L = spec.L;
  const int total = spec.burn_in + spec.T;

  MatrixXd lags(L, n);  // row tau-1 holds z_{t-tau}
  for (int tau = 0; tau < L; ++tau)
    for (int k = 0; k < n; ++k) lags(tau, k) = rng.normal();

  MatrixXd out(spec.T, n);
  VectorXd hist(static_cast<Eigen::Index>(n) * L);
  VectorXd z(n);
  for (int t = 0; t < total; ++t) {
    for (int tau = 0; tau < L; ++tau) hist.segment(static_cast<Eigen::Index>(tau) * n, n) = lags.row(tau);
    VectorXd eps(n);
    for (int k = 0; k < n; ++k) eps(k) = rng.normal();
    switch (rec.family) {
      case Family::heteronoise_fixed: {
        const VectorXd mean = rec.fix_net->forward(hist);
        for (int k = 0; k < n; ++k)
          z(k) = mean(k) + rec.noise_sigma(k) * rec.coupling_value(k, hist) * eps(k);
        break;
      }
      case Family::gaussian_additive: {
        const VectorXd mean = rec.fix_net->forward(hist);
        z = mean + rec.noise_sigma.cwiseProduct(eps);
        break;
      }
      case Family::linear_nongaussian: {
        for (int k = 0; k < n; ++k) {
          const double g = rng.gamma(1.0 / rec.gn_beta);
          eps(k) = rng.sign() * std::pow(g / rec.gn_lambda, 1.0 / rec.gn_beta);
        }
        z = rec.linear_C * hist.head(n) + eps;
        break;
      }
      case Family::changing_dynamics: {
        const VectorXd mean = rec.chg_net->forward(hist, domain);
        z = mean + rec.noise_sigma.cwiseProduct(eps);
        break;
      }
      case Family::modular: {
        const VectorXd mean = rec.predict_mean(hist, domain);
        for (int k = 0; k < n; ++k) z(k) = mean(k) + rec.cond_sd(k, hist, domain) * eps(k);
        break;
      }
    }
    if (!z.allFinite()) throw NumericalError("sample_path: non-finite state at step " + std::to_string(t));
    for (int tau = L - 1; tau > 0; --tau) lags.row(tau) = lags.row(tau - 1);
    lags.row(0) = z;
    if (t >= spec.burn_in) out.row(t - spec.burn_in) = z;
  }
  return out;
}

namespace {

LatentTrajectory single_trajectory(const GeneratorSpec& spec, uint64_t seed, Family expect) {
  require(spec.family == expect, "simulate: spec family mismatch");
  auto rec = std::make_shared<TransitionRecord>(make_transition(spec, seed));
  LatentTrajectory traj;
  traj.z = sample_path(*rec, spec, 0, mix_seed(seed, {kSaltNoise, 0, 0}));
  traj.domain = 0;
  traj.transition = rec;
  return traj;
}

}  // namespace

LatentTrajectory simulate_fixed_heteronoise(const GeneratorSpec& spec, uint64_t seed) {
  return single_trajectory(spec, seed, Family::heteronoise_fixed);
}

LatentTrajectory simulate_gaussian_additive(const GeneratorSpec& spec, uint64_t seed) {
  return single_trajectory(spec, seed, Family::gaussian_additive);
}

LatentTrajectory simulate_linear_nongaussian(const GeneratorSpec& spec, uint64_t seed) {
  return single_trajectory(spec, seed, Family::linear_nongaussian);
}

std::vector<LatentTrajectory> simulate_changing_dynamics(const GeneratorSpec& spec, uint64_t seed) {
  require(spec.family == Family::changing_dynamics, "simulate: spec family mismatch");
  require(spec.m >= 2, "changing_dynamics requires m >= 2");
  auto rec = std::make_shared<TransitionRecord>(make_transition(spec, seed));
  std::vector<LatentTrajectory> out(spec.m);
  for (int r = 0; r < spec.m; ++r) {
    out[r].z = sample_path(*rec, spec, r, mix_seed(seed, {kSaltNoise, static_cast<uint64_t>(r), 0}));
    out[r].domain = r;
    out[r].transition = rec;
  }
  return out;
}

std::vector<LatentTrajectory> simulate_modular(const GeneratorSpec& spec, uint64_t seed) {
  require(spec.family == Family::modular, "simulate: spec family mismatch");
  auto rec = std::make_shared<TransitionRecord>(make_transition(spec, seed));
  std::vector<LatentTrajectory> out(spec.m);
  for (int r = 0; r < spec.m; ++r) {
    out[r].z = sample_path(*rec, spec, r, mix_seed(seed, {kSaltNoise, static_cast<uint64_t>(r), 0}));
    out[r].domain = r;
    out[r].transition = rec;
  }
  return out;
}

std::vector<LatentTrajectory> simulate(const GeneratorSpec& spec) {
  spec.validate();
  auto rec = std::make_shared<TransitionRecord>(make_transition(spec, spec.seed));
  const int total = spec.m * spec.num_seqs;
  std::vector<LatentTrajectory> out(total);
  parallel_for(total, [&](std::ptrdiff_t idx) {
    const int domain = static_cast<int>(idx) / spec.num_seqs;
    const int s = static_cast<int>(idx) % spec.num_seqs;
    LatentTrajectory& traj = out[static_cast<size_t>(idx)];
    traj.z = sample_path(*rec, spec, domain,
                         mix_seed(spec.seed, {kSaltNoise, static_cast<uint64_t>(domain), static_cast<uint64_t>(s)}));
    traj.domain = domain;
    traj.transition = rec;
  });
  return out;
}

}  // namespace tdrl
