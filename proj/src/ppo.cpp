#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "xsslab/rl.hpp"

namespace xsslab::rl {
namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

constexpr double kAdamBeta1 = 0.9;
constexpr double kAdamBeta2 = 0.999;
constexpr double kAdamEps = 1e-5;

MatrixXd log_softmax(const MatrixXd& logits) {
  MatrixXd out(logits.rows(), logits.cols());
  for (Eigen::Index c = 0; c < logits.cols(); ++c) {
    const double m = logits.col(c).maxCoeff();
    const double lse = m + std::log((logits.col(c).array() - m).exp().sum());
    out.col(c) = logits.col(c).array() - lse;
  }
  return out;
}

MatrixXd to_matrix(const std::vector<std::vector<double>>& rows, const std::vector<std::size_t>& pick) {
  const auto dim = static_cast<Eigen::Index>(rows.front().size());
  MatrixXd x(dim, static_cast<Eigen::Index>(pick.size()));
  for (std::size_t j = 0; j < pick.size(); ++j) {
    x.col(static_cast<Eigen::Index>(j)) = Eigen::Map<const VectorXd>(rows[pick[j]].data(), dim);
  }
  return x;
}

MatrixXd column(const std::vector<double>& obs) {
  return Eigen::Map<const VectorXd>(obs.data(), static_cast<Eigen::Index>(obs.size()));
}

}  // namespace

Mlp::Mlp(std::vector<std::size_t> sizes, const std::vector<double>& layer_gains, Rng& rng) : sizes_(std::move(sizes)) {
  if (sizes_.size() < 2 || layer_gains.size() != sizes_.size() - 1) throw ConfigError("bad MLP layer specification");
  std::size_t total = 0;
  for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
    offsets_.push_back(total);
    total += sizes_[l + 1] * sizes_[l] + sizes_[l + 1];
  }
  theta_ = VectorXd::Zero(static_cast<Eigen::Index>(total));
  for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
    const auto out = static_cast<Eigen::Index>(sizes_[l + 1]);
    const auto in = static_cast<Eigen::Index>(sizes_[l]);
    const Eigen::Index big = std::max(out, in), small = std::min(out, in);
    MatrixXd g(big, small);
    for (Eigen::Index j = 0; j < small; ++j) {
      for (Eigen::Index i = 0; i < big; ++i) g(i, j) = rng.normal();
    }
    Eigen::HouseholderQR<MatrixXd> qr(g);
    MatrixXd q = qr.householderQ() * MatrixXd::Identity(big, small);
    const MatrixXd r = qr.matrixQR();
    for (Eigen::Index j = 0; j < small; ++j) {
      if (r(j, j) < 0) q.col(j) *= -1.0;
    }
    Eigen::Map<MatrixXd> W(theta_.data() + offsets_[l], out, in);
    W = (out >= in ? q : MatrixXd(q.transpose())) * layer_gains[l];
  }
}

MatrixXd Mlp::forward(const MatrixXd& x) const {
  Tape tape;
  return forward(x, tape);
}

MatrixXd Mlp::forward(const MatrixXd& x, Tape& tape) const {
  tape.activations.clear();
  tape.activations.push_back(x);
  const std::size_t layers = sizes_.size() - 1;
  MatrixXd a = x;
  for (std::size_t l = 0; l < layers; ++l) {
    const auto out = static_cast<Eigen::Index>(sizes_[l + 1]);
    const auto in = static_cast<Eigen::Index>(sizes_[l]);
    Eigen::Map<const MatrixXd> W(theta_.data() + offsets_[l], out, in);
    Eigen::Map<const VectorXd> b(theta_.data() + offsets_[l] + out * in, out);
    MatrixXd z = (W * a).colwise() + b;
    if (l + 1 < layers) {
      a = z.array().tanh();
      tape.activations.push_back(a);
    } else {
      a = std::move(z);
    }
  }
  return a;
}

VectorXd Mlp::backward(const Tape& tape, const MatrixXd& d_output) const {
  VectorXd grad = VectorXd::Zero(theta_.size());
  MatrixXd d = d_output;
  for (std::size_t l = sizes_.size() - 1; l-- > 0;) {
    const auto out = static_cast<Eigen::Index>(sizes_[l + 1]);
    const auto in = static_cast<Eigen::Index>(sizes_[l]);
    const MatrixXd& a = tape.activations[l];
    Eigen::Map<MatrixXd>(grad.data() + offsets_[l], out, in).noalias() = d * a.transpose();
    Eigen::Map<VectorXd>(grad.data() + offsets_[l] + out * in, out) = d.rowwise().sum();
    if (l > 0) {
      Eigen::Map<const MatrixXd> W(theta_.data() + offsets_[l], out, in);
      d = ((W.transpose() * d).array() * (1.0 - a.array().square())).matrix();
    }
  }
  return grad;
}

json PpoConfig::to_json() const {
  return {{"clip", clip},
          {"gamma", gamma},
          {"gae_lambda", gae_lambda},
          {"learning_rate", learning_rate},
          {"rollout_steps", rollout_steps},
          {"minibatch", minibatch},
          {"epochs", epochs},
          {"entropy_coef", entropy_coef},
          {"value_coef", value_coef},
          {"max_grad_norm", max_grad_norm},
          {"hidden", hidden},
          {"normalize_advantage", normalize_advantage}};
}

PpoConfig PpoConfig::from_json(const json& j) {
  PpoConfig c;
  c.clip = j.value("clip", c.clip);
  c.gamma = j.value("gamma", c.gamma);
  c.gae_lambda = j.value("gae_lambda", c.gae_lambda);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.rollout_steps = j.value("rollout_steps", c.rollout_steps);
  c.minibatch = j.value("minibatch", c.minibatch);
  c.epochs = j.value("epochs", c.epochs);
  c.entropy_coef = j.value("entropy_coef", c.entropy_coef);
  c.value_coef = j.value("value_coef", c.value_coef);
  c.max_grad_norm = j.value("max_grad_norm", c.max_grad_norm);
  c.hidden = j.value("hidden", c.hidden);
  c.normalize_advantage = j.value("normalize_advantage", c.normalize_advantage);
  if (c.rollout_steps == 0 || c.minibatch == 0 || c.hidden == 0) throw ConfigError("PPO sizes must be positive");
  return c;
}

void Adam::step(VectorXd& theta, const VectorXd& grad, double lr) {
  if (m.size() != theta.size()) {
    m = VectorXd::Zero(theta.size());
    v = VectorXd::Zero(theta.size());
    t = 0;
  }
  ++t;
  m = kAdamBeta1 * m + (1.0 - kAdamBeta1) * grad;
  v = kAdamBeta2 * v + (1.0 - kAdamBeta2) * grad.cwiseAbs2();
  const double c1 = 1.0 - std::pow(kAdamBeta1, static_cast<double>(t));
  const double c2 = 1.0 - std::pow(kAdamBeta2, static_cast<double>(t));
  theta.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + kAdamEps);
}

PolicyModel PolicyModel::create(std::size_t observation_size, std::size_t action_count, const PpoConfig& config,
                                std::uint64_t seed) {
  Rng rng(seed);
  PolicyModel m;
  m.observation_size = observation_size;
  m.action_count = action_count;
  m.config = config;
  const double g = std::sqrt(2.0);
  m.policy = Mlp({observation_size, config.hidden, config.hidden, action_count}, {g, g, 0.01}, rng);
  m.value = Mlp({observation_size, config.hidden, config.hidden, 1}, {g, g, 1.0}, rng);
  return m;
}

VectorXd PolicyModel::probabilities(const std::vector<double>& obs) const {
  return log_softmax(policy.forward(column(obs))).col(0).array().exp();
}

std::size_t PolicyModel::greedy(const std::vector<double>& obs) const {
  const MatrixXd logits = policy.forward(column(obs));
  std::size_t best = 0;
  for (Eigen::Index a = 1; a < logits.rows(); ++a) {
    if (logits(a, 0) > logits(static_cast<Eigen::Index>(best), 0)) best = static_cast<std::size_t>(a);
  }
  return best;
}

double clipped_objective(double ratio, double advantage, double eps) {
  return -std::min(ratio * advantage, std::clamp(ratio, 1.0 - eps, 1.0 + eps) * advantage);
}

SurrogateResult surrogate(const MatrixXd& logits, const std::vector<std::size_t>& actions,
                          const VectorXd& old_log_probs, const VectorXd& advantages, double clip,
                          double entropy_coef) {
  const Eigen::Index B = logits.cols();
  const double inv_b = 1.0 / static_cast<double>(B);
  const MatrixXd logp = log_softmax(logits);
  const MatrixXd p = logp.array().exp();
  SurrogateResult res;
  res.ratios = VectorXd(B);
  res.d_logits = MatrixXd::Zero(logits.rows(), B);
  std::size_t clipped = 0;
  for (Eigen::Index i = 0; i < B; ++i) {
    const auto a = static_cast<Eigen::Index>(actions[static_cast<std::size_t>(i)]);
    const double r = std::exp(logp(a, i) - old_log_probs[i]);
    const double A = advantages[i];
    const double rc = std::clamp(r, 1.0 - clip, 1.0 + clip);
    res.ratios[i] = r;
    res.loss += -std::min(r * A, rc * A) * inv_b;
    res.approx_kl += ((r - 1.0) - std::log(r)) * inv_b;
    if (std::abs(r - 1.0) > clip) ++clipped;
    // Only the unclipped branch carries gradient.
    if (r * A <= rc * A) {
      const double g = -r * A * inv_b;
      res.d_logits.col(i) -= g * p.col(i);
      res.d_logits(a, i) += g;
    }
    const double H = -(p.col(i).array() * logp.col(i).array()).sum();
    res.entropy += H * inv_b;
    res.d_logits.col(i).array() += entropy_coef * inv_b * p.col(i).array() * (logp.col(i).array() + H);
  }
  res.loss -= entropy_coef * res.entropy;
  res.clip_fraction = static_cast<double>(clipped) * inv_b;
  return res;
}

std::pair<std::vector<double>, std::vector<double>> compute_gae(const RolloutBuffer& buffer, double gamma,
                                                                double lambda) {
  const std::size_t n = buffer.size();
  std::vector<double> adv(n), ret(n);
  double next_adv = 0.0;
  double next_value = buffer.last_value;
  for (std::size_t t = n; t-- > 0;) {
    const double live = buffer.dones[t] ? 0.0 : 1.0;
    const double delta = buffer.rewards[t] + gamma * next_value * live - buffer.values[t];
    next_adv = delta + gamma * lambda * live * next_adv;
    adv[t] = next_adv;
    ret[t] = next_adv + buffer.values[t];
    next_value = buffer.values[t];
  }
  return {adv, ret};
}

UpdateStats ppo_update(PolicyModel& model, const RolloutBuffer& buffer, Rng& rng) {
  const auto& cfg = model.config;
  const std::size_t n = buffer.size();
  if (n == 0) throw ContractError("ppo_update needs a non-empty rollout buffer");
  const auto [adv, ret] = compute_gae(buffer, cfg.gamma, cfg.gae_lambda);

  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;

  UpdateStats stats;
  {
    const MatrixXd logp = log_softmax(model.policy.forward(to_matrix(buffer.observations, order)));
    for (std::size_t i = 0; i < n; ++i) {
      const double r = std::exp(logp(static_cast<Eigen::Index>(buffer.actions[i]), static_cast<Eigen::Index>(i)) -
                                buffer.log_probs[i]);
      stats.first_ratio_deviation = std::max(stats.first_ratio_deviation, std::abs(r - 1.0));
    }
  }

  std::size_t batches = 0;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(order);
    for (std::size_t start = 0; start < n; start += cfg.minibatch) {
      const std::size_t end = std::min(n, start + cfg.minibatch);
      const std::vector<std::size_t> idx(order.begin() + static_cast<std::ptrdiff_t>(start),
                                         order.begin() + static_cast<std::ptrdiff_t>(end));
      const auto B = static_cast<Eigen::Index>(idx.size());
      const MatrixXd x = to_matrix(buffer.observations, idx);
      std::vector<std::size_t> actions(idx.size());
      VectorXd old_lp(B), A(B), R(B);
      for (Eigen::Index j = 0; j < B; ++j) {
        const std::size_t k = idx[static_cast<std::size_t>(j)];
        actions[static_cast<std::size_t>(j)] = buffer.actions[k];
        old_lp[j] = buffer.log_probs[k];
        A[j] = adv[k];
        R[j] = ret[k];
      }
      if (cfg.normalize_advantage && B > 1) {
        const double mean = A.mean();
        const double sd = std::sqrt((A.array() - mean).square().sum() / static_cast<double>(B - 1));
        A = (A.array() - mean) / (sd + 1e-8);
      }

      Mlp::Tape pt, vt;
      const SurrogateResult s = surrogate(model.policy.forward(x, pt), actions, old_lp, A, cfg.clip, cfg.entropy_coef);
      const MatrixXd v = model.value.forward(x, vt);
      const VectorXd diff = v.row(0).transpose() - R;
      const double value_loss = diff.squaredNorm() / static_cast<double>(B);
      const double loss = s.loss + cfg.value_coef * value_loss;
      if (!std::isfinite(loss)) {
        std::ostringstream msg;
        msg << "non-finite PPO loss at epoch " << epoch << ", minibatch starting " << start << " (buffer " << n
            << " steps, rewards in [" << *std::min_element(buffer.rewards.begin(), buffer.rewards.end()) << ", "
            << *std::max_element(buffer.rewards.begin(), buffer.rewards.end()) << "], surrogate " << s.loss
            << ", value loss " << value_loss << ")";
        throw NumericError(msg.str());
      }
      VectorXd gp = model.policy.backward(pt, s.d_logits);
      VectorXd gv = model.value.backward(vt, (2.0 * cfg.value_coef / static_cast<double>(B)) * diff.transpose());
      const double norm = std::sqrt(gp.squaredNorm() + gv.squaredNorm());
      if (norm > cfg.max_grad_norm) {
        const double scale = cfg.max_grad_norm / (norm + 1e-6);
        gp *= scale;
        gv *= scale;
      }
      model.policy_opt.step(model.policy.parameters(), gp, cfg.learning_rate);
      model.value_opt.step(model.value.parameters(), gv, cfg.learning_rate);

      stats.policy_loss += s.loss + cfg.entropy_coef * s.entropy;
      stats.value_loss += value_loss;
      stats.entropy += s.entropy;
      stats.approx_kl += s.approx_kl;
      stats.clip_fraction += s.clip_fraction;
      ++batches;
    }
  }
  const double nb = static_cast<double>(std::max<std::size_t>(batches, 1));
  stats.policy_loss /= nb;
  stats.value_loss /= nb;
  stats.entropy /= nb;
  stats.approx_kl /= nb;
  stats.clip_fraction /= nb;

  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  const MatrixXd probs = log_softmax(model.policy.forward(to_matrix(buffer.observations, order))).array().exp();
  const Eigen::RowVectorXd sums = probs.colwise().sum();
  stats.min_probability_sum = sums.minCoeff();
  stats.max_probability_sum = sums.maxCoeff();
  return stats;
}

TrainResult train_agent(Environment& env, const PpoConfig& config, std::size_t budget, std::uint64_t seed,
                        const Validator& validate, std::size_t validate_every) {
  Rng rng(seed);
  TrainResult result;
  result.policy = PolicyModel::create(env.observation_size(), Environment::action_count(), config, rng.next());
  PolicyModel& model = result.policy;

  std::vector<double> obs = env.reset(rng);
  double episode_reward = 0.0;
  for (std::size_t rollout = 0; result.steps < budget; ++rollout) {
    RolloutBuffer buf;
    double finished_reward = 0.0;
    std::size_t finished = 0;
    for (std::size_t t = 0; t < config.rollout_steps; ++t) {
      const MatrixXd x = column(obs);
      const VectorXd logp = log_softmax(model.policy.forward(x)).col(0);
      const double u = rng.uniform();
      std::size_t a = 0;
      double cumulative = 0.0;
      for (Eigen::Index k = 0; k < logp.size(); ++k) {
        cumulative += std::exp(logp[k]);
        a = static_cast<std::size_t>(k);
        if (u < cumulative) break;
      }
      buf.observations.push_back(obs);
      buf.actions.push_back(a);
      buf.log_probs.push_back(logp[static_cast<Eigen::Index>(a)]);
      buf.values.push_back(model.value.forward(x)(0, 0));
      const StepResult step = env.step(a);
      buf.rewards.push_back(step.reward);
      buf.dones.push_back(step.done);
      episode_reward += step.reward;
      if (step.done) {
        finished_reward += episode_reward;
        ++finished;
        episode_reward = 0.0;
        obs = env.reset(rng);
      } else {
        obs = step.observation;
      }
    }
    buf.last_value = model.value.forward(column(obs))(0, 0);
    result.steps += buf.size();
    result.episodes += finished;
    result.updates.push_back(ppo_update(model, buf, rng));

    CurvePoint point;
    point.rollout = rollout;
    point.steps = result.steps;
    point.episodes = finished;
    point.mean_reward = finished ? finished_reward / static_cast<double>(finished) : 0.0;
    const bool last = result.steps >= budget;
    if (validate && validate_every > 0 && ((rollout + 1) % validate_every == 0 || last)) {
      point.val_escape = validate(model);
    }
    result.curve.push_back(point);
  }
  auto to_f32 = [](VectorXd& v) { v = v.unaryExpr([](double x) { return round_f32(x); }); };
  to_f32(model.policy.parameters());
  to_f32(model.value.parameters());
  for (auto* opt : {&model.policy_opt, &model.value_opt}) {
    to_f32(opt->m);
    to_f32(opt->v);
  }
  return result;
}

void write_curve_csv(const std::filesystem::path& path, const std::vector<CurvePoint>& curve) {
  std::ostringstream out;
  out << "rollout,steps,episodes,mean_reward,val_escape_rate\n";
  out.precision(10);
  for (const auto& p : curve) {
    out << p.rollout << ',' << p.steps << ',' << p.episodes << ',' << p.mean_reward << ',';
    if (p.val_escape) out << *p.val_escape;
    out << '\n';
  }
  write_file(path, out.str());
}

void save_policy(const std::filesystem::path& json_path, const PolicyModel& model) {
  std::filesystem::path blob = json_path;
  blob.replace_extension(".bin");
  std::vector<double> values;
  auto append = [&](const VectorXd& v) { values.insert(values.end(), v.data(), v.data() + v.size()); };
  append(model.policy.parameters());
  append(model.value.parameters());
  // Optimizer moments follow the weights; zeros before the first update.
  for (const auto* opt : {&model.policy_opt, &model.value_opt}) {
    const auto size = opt == &model.policy_opt ? model.policy.parameters().size() : model.value.parameters().size();
    append(opt->m.size() ? opt->m : VectorXd::Zero(size));
    append(opt->v.size() ? opt->v : VectorXd::Zero(size));
  }
  write_f32_blob(blob, values);
  write_json(json_path, {{"observation_size", model.observation_size},
                         {"action_count", model.action_count},
                         {"policy_sizes", model.policy.sizes()},
                         {"value_sizes", model.value.sizes()},
                         {"policy_parameters", model.policy.parameters().size()},
                         {"value_parameters", model.value.parameters().size()},
                         {"adam_steps", {model.policy_opt.t, model.value_opt.t}},
                         {"ppo", model.config.to_json()},
                         {"blob", blob.filename().string()},
                         {"blob_sha256", sha256_file(blob)}});
}

PolicyModel load_policy(const std::filesystem::path& json_path) {
  const json h = read_json(json_path);
  PolicyModel m = PolicyModel::create(h.at("observation_size").get<std::size_t>(),
                                      h.at("action_count").get<std::size_t>(), PpoConfig::from_json(h.at("ppo")), 0);
  const auto values = read_f32_blob(json_path.parent_path() / h.at("blob").get<std::string>());
  const auto np = m.policy.parameters().size();
  const auto nv = m.value.parameters().size();
  if (static_cast<Eigen::Index>(values.size()) != 3 * (np + nv)) throw ShapeError("policy blob size mismatch");
  const double* at = values.data();
  auto take = [&](Eigen::Index n) {
    VectorXd v = Eigen::Map<const VectorXd>(at, n);
    at += n;
    return v;
  };
  m.policy.parameters() = take(np);
  m.value.parameters() = take(nv);
  m.policy_opt.m = take(np);
  m.policy_opt.v = take(np);
  m.value_opt.m = take(nv);
  m.value_opt.v = take(nv);
  m.policy_opt.t = h.at("adam_steps").at(0).get<std::size_t>();
  m.value_opt.t = h.at("adam_steps").at(1).get<std::size_t>();
  return m;
}

}  // namespace xsslab::rl
