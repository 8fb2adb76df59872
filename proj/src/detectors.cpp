#include "xsslab/detectors.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "xsslab/rng.hpp"
#include "xsslab/text.hpp"

namespace xsslab::detectors {
namespace {

constexpr std::size_t kMlpHidden1 = 64;
constexpr std::size_t kMlpHidden2 = 32;
constexpr std::size_t kCnnFilters = 64;
constexpr std::size_t kCnnWidth = 3;
constexpr std::size_t kLstmHidden = 64;

using Eigen::Map;
using Eigen::MatrixXd;
using Eigen::VectorXd;
using CMap = Map<const MatrixXd>;
using MMap = Map<MatrixXd>;
using CVec = Map<const VectorXd>;
using MVec = Map<VectorXd>;

double sigmoid(double z) { return z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z)); }

VectorXd sigmoid(const VectorXd& v) { return v.unaryExpr([](double z) { return sigmoid(z); }); }

// BCE written in terms of the logit so it stays finite for saturated outputs.
double bce_from_logit(double z, double y) { return std::max(z, 0.0) - z * y + std::log1p(std::exp(-std::abs(z))); }

std::size_t product(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (auto s : shape) n *= s;
  return n;
}

}  // namespace

std::string_view to_string(Architecture a) {
  switch (a) {
    case Architecture::MLP: return "mlp";
    case Architecture::CNN: return "cnn";
    case Architecture::LSTM: return "lstm";
  }
  return "?";
}

Architecture architecture_from_string(std::string_view s) {
  const std::string lower = text::ascii_lower(s);
  if (lower == "mlp") return Architecture::MLP;
  if (lower == "cnn") return Architecture::CNN;
  if (lower == "lstm") return Architecture::LSTM;
  throw ConfigError("unknown detector '" + std::string(s) + "' (expected mlp, cnn or lstm)");
}

CompactSample compact(const vocab::TokenSequence& seq, const vocab::EmbeddingTable& table) {
  CompactSample s;
  s.len = std::min(seq.tokens.size(), table.max_len);
  s.rows.resize(s.len * table.dim);
  for (std::size_t i = 0; i < s.len; ++i) {
    const auto v = table.vector(table.vocabulary.index_of(seq.tokens[i]));
    std::copy(v.begin(), v.end(), s.rows.begin() + static_cast<std::ptrdiff_t>(i * table.dim));
  }
  return s;
}

std::size_t DetectorModel::add_param(std::string name, std::vector<std::size_t> shape) {
  ParamInfo info{std::move(name), std::move(shape), 0, 0};
  info.offset = layout_.empty() ? 0 : layout_.back().offset + layout_.back().size;
  info.size = product(info.shape);
  layout_.push_back(info);
  return layout_.size() - 1;
}

const ParamInfo& DetectorModel::param(std::string_view name) const {
  for (const auto& p : layout_) {
    if (p.name == name) return p;
  }
  throw Error("no parameter named '" + std::string(name) + "'");
}

DetectorModel::DetectorModel(Architecture arch, std::size_t max_len, std::size_t dim, std::uint64_t seed)
    : arch_(arch), max_len_(max_len), dim_(dim) {
  // PyTorch default init: weights and biases U(-1/sqrt(fan_in), 1/sqrt(fan_in)),
  // LSTM everything U(-1/sqrt(hidden), 1/sqrt(hidden)) with b_ih + b_hh folded into one bias.
  struct Spec {
    std::string name;
    std::vector<std::size_t> shape;
    std::size_t fan_in;
    int draws = 1;
  };
  std::vector<Spec> specs;
  const std::size_t flat = max_len * dim;
  switch (arch) {
    case Architecture::MLP:
      specs = {{"dense1.w", {kMlpHidden1, flat}, flat},
               {"dense1.b", {kMlpHidden1}, flat},
               {"dense2.w", {kMlpHidden2, kMlpHidden1}, kMlpHidden1},
               {"dense2.b", {kMlpHidden2}, kMlpHidden1},
               {"out.w", {1, kMlpHidden2}, kMlpHidden2},
               {"out.b", {1}, kMlpHidden2}};
      break;
    case Architecture::CNN:
      specs = {{"conv.w", {kCnnFilters, kCnnWidth * dim}, kCnnWidth * dim},
               {"conv.b", {kCnnFilters}, kCnnWidth * dim},
               {"out.w", {1, kCnnFilters}, kCnnFilters},
               {"out.b", {1}, kCnnFilters}};
      break;
    case Architecture::LSTM:
      specs = {{"lstm.wx", {4 * kLstmHidden, dim}, kLstmHidden},
               {"lstm.wh", {4 * kLstmHidden, kLstmHidden}, kLstmHidden},
               {"lstm.b", {4 * kLstmHidden}, kLstmHidden, 2},
               {"out.w", {1, kLstmHidden}, kLstmHidden},
               {"out.b", {1}, kLstmHidden}};
      break;
  }
  for (const auto& s : specs) add_param(s.name, s.shape);
  theta_ = VectorXd::Zero(static_cast<Eigen::Index>(layout_.back().offset + layout_.back().size));
  Rng rng(seed);
  for (std::size_t k = 0; k < specs.size(); ++k) {
    const auto& info = layout_[k];
    const double bound = 1.0 / std::sqrt(static_cast<double>(specs[k].fan_in));
    for (std::size_t i = 0; i < info.size; ++i) {
      double v = 0.0;
      for (int d = 0; d < specs[k].draws; ++d) v += rng.uniform(-bound, bound);
      theta_[static_cast<Eigen::Index>(info.offset + i)] = v;
    }
  }
  for (auto& v : theta_) v = round_f32(v);
}

double DetectorModel::logit(Input x) const {
  switch (arch_) {
    case Architecture::MLP: return mlp(x, nullptr, 0.0);
    case Architecture::CNN: return cnn(x, nullptr, 0.0);
    case Architecture::LSTM: return lstm(x, nullptr, 0.0);
  }
  return 0.0;
}

double DetectorModel::score(Input x) const { return sigmoid(logit(x)); }

double DetectorModel::score(const vocab::EmbeddedSample& sample) const {
  if (sample.rows != max_len_ || sample.cols != dim_) {
    std::ostringstream msg;
    msg << "sample is " << sample.rows << "x" << sample.cols << ", model expects " << max_len_ << "x" << dim_;
    throw ShapeError(msg.str());
  }
  return score(Input{sample.matrix.data(), sample.true_len});
}

double DetectorModel::loss(Input x, double label) const { return bce_from_logit(logit(x), label); }

double DetectorModel::loss_and_grad(Input x, double label, VectorXd& grad) const {
  if (grad.size() != theta_.size()) grad = VectorXd::Zero(theta_.size());
  double z = 0.0;
  switch (arch_) {
    case Architecture::MLP: z = mlp(x, &grad, label); break;
    case Architecture::CNN: z = cnn(x, &grad, label); break;
    case Architecture::LSTM: z = lstm(x, &grad, label); break;
  }
  return bce_from_logit(z, label);
}

double DetectorModel::mlp(Input x, VectorXd* grad, double label) const {
  const auto& p1 = layout_[0];
  const auto& p2 = layout_[2];
  const auto& p3 = layout_[4];
  const double* t = theta_.data();
  const std::size_t len = std::min(x.len, max_len_);
  const auto n = static_cast<Eigen::Index>(len * dim_);
  const auto H1 = static_cast<Eigen::Index>(kMlpHidden1);
  const auto H2 = static_cast<Eigen::Index>(kMlpHidden2);

  CMap W1(t + p1.offset, H1, static_cast<Eigen::Index>(max_len_ * dim_));
  CVec b1(t + layout_[1].offset, H1);
  CMap W2(t + p2.offset, H2, H1);
  CVec b2(t + layout_[3].offset, H2);
  CVec w3(t + p3.offset, H2);
  const double b3 = t[layout_[5].offset];

  CVec xv(x.data, n);
  const VectorXd a1 = W1.leftCols(n) * xv + b1;
  const VectorXd h1 = a1.cwiseMax(0.0);
  const VectorXd a2 = W2 * h1 + b2;
  const VectorXd h2 = a2.cwiseMax(0.0);
  const double z = w3.dot(h2) + b3;
  if (!grad) return z;

  double* g = grad->data();
  const double dz = sigmoid(z) - label;
  MVec(g + p3.offset, H2) += dz * h2;
  g[layout_[5].offset] += dz;
  const VectorXd da2 = ((dz * w3).array() * (a2.array() > 0).cast<double>()).matrix();
  MMap(g + p2.offset, H2, H1).noalias() += da2 * h1.transpose();
  MVec(g + layout_[3].offset, H2) += da2;
  const VectorXd da1 = ((W2.transpose() * da2).array() * (a1.array() > 0).cast<double>()).matrix();
  MMap(g + p1.offset, H1, static_cast<Eigen::Index>(max_len_ * dim_)).leftCols(n).noalias() += da1 * xv.transpose();
  MVec(g + layout_[1].offset, H1) += da1;
  return z;
}

double DetectorModel::cnn(Input x, VectorXd* grad, double label) const {
  const auto& pw = layout_[0];
  const double* t = theta_.data();
  const std::size_t len = std::min(x.len, max_len_);
  const auto F = static_cast<Eigen::Index>(kCnnFilters);
  const auto D = static_cast<Eigen::Index>(dim_);
  const auto K = static_cast<Eigen::Index>(kCnnWidth * dim_);
  const auto L = static_cast<Eigen::Index>(len);

  CMap W(t + pw.offset, F, K);
  CVec b(t + layout_[1].offset, F);
  CVec wo(t + layout_[2].offset, F);
  const double bo = t[layout_[3].offset];

  // Column j holds rows j-1, j, j+1 ('same' padding with zeros).
  MatrixXd X = MatrixXd::Zero(K, L);
  for (Eigen::Index j = 0; j < L; ++j) {
    for (Eigen::Index k = 0; k < 3; ++k) {
      const Eigen::Index row = j + k - 1;
      if (row < 0 || row >= L) continue;
      X.block(k * D, j, D, 1) = CVec(x.data + row * D, D);
    }
  }
  VectorXd pooled = VectorXd::Zero(F);
  std::vector<Eigen::Index> arg(static_cast<std::size_t>(F), -1);
  if (L > 0) {
    const MatrixXd C = (W * X).colwise() + b;
    for (Eigen::Index f = 0; f < F; ++f) {
      Eigen::Index best;
      const double m = C.row(f).maxCoeff(&best);
      if (m > 0) {
        pooled[f] = m;
        arg[static_cast<std::size_t>(f)] = best;
      }
    }
  }
  const double z = wo.dot(pooled) + bo;
  if (!grad) return z;

  double* g = grad->data();
  const double dz = sigmoid(z) - label;
  MVec(g + layout_[2].offset, F) += dz * pooled;
  g[layout_[3].offset] += dz;
  MMap dW(g + pw.offset, F, K);
  MVec db(g + layout_[1].offset, F);
  for (Eigen::Index f = 0; f < F; ++f) {
    const Eigen::Index j = arg[static_cast<std::size_t>(f)];
    if (j < 0) continue;
    const double d = dz * wo[f];
    dW.row(f) += d * X.col(j).transpose();
    db[f] += d;
  }
  return z;
}

double DetectorModel::lstm(Input x, VectorXd* grad, double label) const {
  const double* t = theta_.data();
  const std::size_t len = std::min(x.len, max_len_);
  const auto H = static_cast<Eigen::Index>(kLstmHidden);
  const auto D = static_cast<Eigen::Index>(dim_);

  CMap Wx(t + layout_[0].offset, 4 * H, D);
  CMap Wh(t + layout_[1].offset, 4 * H, H);
  CVec b(t + layout_[2].offset, 4 * H);
  CVec wo(t + layout_[3].offset, H);
  const double bo = t[layout_[4].offset];

  // Per step: gates (i, f, g, o) after activation, cell state, hidden state.
  std::vector<VectorXd> gates(len), cells(len + 1), hiddens(len + 1);
  cells[0] = VectorXd::Zero(H);
  hiddens[0] = VectorXd::Zero(H);
  for (std::size_t s = 0; s < len; ++s) {
    VectorXd a = Wx * CVec(x.data + static_cast<Eigen::Index>(s) * D, D) + Wh * hiddens[s] + b;
    a.segment(0, 2 * H) = sigmoid(VectorXd(a.segment(0, 2 * H)));
    a.segment(2 * H, H) = a.segment(2 * H, H).array().tanh();
    a.segment(3 * H, H) = sigmoid(VectorXd(a.segment(3 * H, H)));
    cells[s + 1] = a.segment(H, H).cwiseProduct(cells[s]) + a.segment(0, H).cwiseProduct(a.segment(2 * H, H));
    hiddens[s + 1] = a.segment(3 * H, H).cwiseProduct(VectorXd(cells[s + 1].array().tanh()));
    gates[s] = std::move(a);
  }
  const double z = wo.dot(hiddens[len]) + bo;
  if (!grad) return z;

  double* g = grad->data();
  const double dz = sigmoid(z) - label;
  MVec(g + layout_[3].offset, H) += dz * hiddens[len];
  g[layout_[4].offset] += dz;
  MMap dWx(g + layout_[0].offset, 4 * H, D);
  MMap dWh(g + layout_[1].offset, 4 * H, H);
  MVec db(g + layout_[2].offset, 4 * H);

  VectorXd dh = dz * wo;
  VectorXd dc = VectorXd::Zero(H);
  VectorXd da(4 * H);
  for (std::size_t s = len; s-- > 0;) {
    const auto& a = gates[s];
    const auto i = a.segment(0, H).array();
    const auto f = a.segment(H, H).array();
    const auto gg = a.segment(2 * H, H).array();
    const auto o = a.segment(3 * H, H).array();
    const Eigen::ArrayXd tc = cells[s + 1].array().tanh();
    dc.array() += dh.array() * o * (1.0 - tc.square());
    da.segment(0, H) = (dc.array() * gg * i * (1.0 - i)).matrix();
    da.segment(H, H) = (dc.array() * cells[s].array() * f * (1.0 - f)).matrix();
    da.segment(2 * H, H) = (dc.array() * i * (1.0 - gg.square())).matrix();
    da.segment(3 * H, H) = (dh.array() * tc * o * (1.0 - o)).matrix();
    dWx.noalias() += da * CVec(x.data + static_cast<Eigen::Index>(s) * D, D).transpose();
    dWh.noalias() += da * hiddens[s].transpose();
    db += da;
    dh = Wh.transpose() * da;
    dc = (dc.array() * f).matrix();
  }
  return z;
}

json TrainConfig::to_json() const {
  return {{"epochs", epochs}, {"patience", patience}, {"learning_rate", learning_rate}, {"batch_size", batch_size}};
}

TrainConfig TrainConfig::from_json(const json& j) {
  TrainConfig c;
  c.epochs = j.value("epochs", c.epochs);
  c.patience = j.value("patience", c.patience);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.batch_size = j.value("batch_size", c.batch_size);
  if (c.batch_size == 0 || c.epochs == 0) throw ConfigError("detector epochs and batch_size must be positive");
  return c;
}

LabeledSet make_set(const std::vector<corpus::Payload>& payloads, const vocab::EmbeddingTable& table) {
  LabeledSet set;
  set.samples.reserve(payloads.size());
  for (const auto& p : payloads) {
    set.samples.push_back(compact(vocab::substitute_oov(preprocess::preprocess(p.text), table.vocabulary), table));
    set.labels.push_back(p.label == oracle::Label::Malicious ? 1.0 : 0.0);
  }
  return set;
}

double mean_loss(const DetectorModel& model, const LabeledSet& set) {
  if (set.size() == 0) return 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < set.size(); ++i) total += model.loss(set.samples[i].view(), set.labels[i]);
  return total / static_cast<double>(set.size());
}

DetectorModel train(Architecture arch, const LabeledSet& train_set, const LabeledSet& val_set,
                    const vocab::EmbeddingTable& table, const TrainConfig& config, std::uint64_t seed) {
  if (train_set.size() == 0) throw ConfigError("detector training set is empty");
  DetectorModel model(arch, table.max_len, table.dim, seed);
  model.meta.seed = seed;
  model.meta.learning_rate = config.learning_rate;
  model.meta.batch_size = config.batch_size;

  Rng rng(seed ^ 0x5eed'0f'd47aULL);
  std::vector<std::size_t> order(train_set.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  VectorXd grad = VectorXd::Zero(model.parameters().size());
  VectorXd best = model.parameters();
  double best_loss = std::numeric_limits<double>::infinity();
  std::size_t since_best = 0;
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    rng.shuffle(order);
    for (std::size_t start = 0, batch = 0; start < order.size(); start += config.batch_size, ++batch) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      grad.setZero();
      double batch_loss = 0.0;
      for (std::size_t k = start; k < end; ++k) {
        batch_loss += model.loss_and_grad(train_set.samples[order[k]].view(), train_set.labels[order[k]], grad);
      }
      if (!std::isfinite(batch_loss) || !grad.allFinite()) {
        std::ostringstream msg;
        msg << "non-finite training loss for " << to_string(arch) << " at epoch " << epoch << ", batch " << batch
            << " (lr " << config.learning_rate << ", batch size " << config.batch_size << ")";
        throw NumericError(msg.str());
      }
      model.parameters() -= (config.learning_rate / static_cast<double>(end - start)) * grad;
    }
    const double val_loss = mean_loss(model, val_set.size() ? val_set : train_set);
    model.meta.val_losses.push_back(val_loss);
    model.meta.epochs_run = epoch;
    if (val_loss < best_loss) {
      best_loss = val_loss;
      best = model.parameters();
      model.meta.best_epoch = epoch;
      since_best = 0;
    } else if (++since_best >= config.patience) {
      break;
    }
  }
  model.parameters() = best.unaryExpr([](double v) { return round_f32(v); });
  model.meta.best_val_loss = best_loss;
  return model;
}

EvalReport EvalReport::from_counts(std::size_t tp, std::size_t fp, std::size_t tn, std::size_t fn) {
  EvalReport r;
  r.tp = tp;
  r.fp = fp;
  r.tn = tn;
  r.fn = fn;
  auto ratio = [](double a, double b) { return b > 0 ? a / b : 0.0; };
  r.precision = ratio(static_cast<double>(tp), static_cast<double>(tp + fp));
  r.recall = ratio(static_cast<double>(tp), static_cast<double>(tp + fn));
  r.accuracy = ratio(static_cast<double>(tp + tn), static_cast<double>(tp + fp + tn + fn));
  r.f1 = ratio(2.0 * r.precision * r.recall, r.precision + r.recall);
  return r;
}

json EvalReport::to_json() const {
  return {{"tp", tp},
          {"fp", fp},
          {"tn", tn},
          {"fn", fn},
          {"precision", precision},
          {"recall", recall},
          {"accuracy", accuracy},
          {"f1", f1}};
}

EvalReport evaluate(const DetectorModel& model, const LabeledSet& test_set) {
  if (test_set.size() == 0) throw ConfigError("cannot evaluate on an empty test split");
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
  for (std::size_t i = 0; i < test_set.size(); ++i) {
    const bool predicted = model.predicts_malicious(test_set.samples[i].view());
    const bool actual = test_set.labels[i] > 0.5;
    if (predicted && actual) ++tp;
    else if (predicted) ++fp;
    else if (actual) ++fn;
    else ++tn;
  }
  return EvalReport::from_counts(tp, fp, tn, fn);
}

void save_model(const std::filesystem::path& json_path, const DetectorModel& model) {
  std::filesystem::path blob = json_path;
  blob.replace_extension(".bin");
  const auto& theta = model.parameters();
  write_f32_blob(blob, std::span<const double>(theta.data(), static_cast<std::size_t>(theta.size())));
  json params = json::array();
  for (const auto& p : model.layout()) params.push_back({{"name", p.name}, {"shape", p.shape}});
  write_json(json_path, {{"architecture", to_string(model.architecture())},
                         {"max_len", model.max_len()},
                         {"dim", model.dim()},
                         {"threshold", model.threshold},
                         {"parameters", params},
                         {"training_meta",
                          {{"epochs_run", model.meta.epochs_run},
                           {"best_val_loss", model.meta.best_val_loss},
                           {"best_epoch", model.meta.best_epoch},
                           {"seed", model.meta.seed},
                           {"learning_rate", model.meta.learning_rate},
                           {"batch_size", model.meta.batch_size},
                           {"val_losses", model.meta.val_losses}}},
                         {"blob", blob.filename().string()},
                         {"blob_sha256", sha256_file(blob)}});
}

DetectorModel load_model(const std::filesystem::path& json_path) {
  const json h = read_json(json_path);
  DetectorModel model(architecture_from_string(h.at("architecture").get<std::string>()),
                      h.at("max_len").get<std::size_t>(), h.at("dim").get<std::size_t>(), 0);
  model.threshold = h.at("threshold").get<double>();
  const auto& params = h.at("parameters");
  if (params.size() != model.layout_.size()) throw ShapeError("checkpoint parameter list does not match architecture");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].at("name").get<std::string>() != model.layout_[i].name ||
        params[i].at("shape").get<std::vector<std::size_t>>() != model.layout_[i].shape) {
      throw ShapeError("checkpoint parameter '" + params[i].at("name").get<std::string>() + "' has unexpected shape");
    }
  }
  const auto values = read_f32_blob(json_path.parent_path() / h.at("blob").get<std::string>());
  if (values.size() != static_cast<std::size_t>(model.theta_.size())) throw ShapeError("checkpoint blob size mismatch");
  model.theta_ = Eigen::Map<const VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
  const auto& m = h.at("training_meta");
  model.meta.epochs_run = m.at("epochs_run").get<std::size_t>();
  model.meta.best_val_loss = m.at("best_val_loss").get<double>();
  model.meta.best_epoch = m.at("best_epoch").get<std::size_t>();
  model.meta.seed = m.at("seed").get<std::uint64_t>();
  model.meta.learning_rate = m.at("learning_rate").get<double>();
  model.meta.batch_size = m.at("batch_size").get<std::size_t>();
  model.meta.val_losses = m.at("val_losses").get<std::vector<double>>();
  return model;
}

}  // namespace xsslab::detectors
