#include "bogen/vae.hpp"

#include "bogen/error.hpp"

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

namespace bogen {

namespace {

constexpr int kFormatVersion = 1;

DenseLayer make_layer(int in, int out, double gain, std::mt19937_64& rng) {
  // Glorot-normal initialization.
  std::normal_distribution<double> normal(0.0, gain * std::sqrt(2.0 / (in + out)));
  DenseLayer l;
  l.weight.resize(out, in);
  for (Eigen::Index i = 0; i < l.weight.size(); ++i) l.weight.data()[i] = normal(rng);
  l.bias = Eigen::VectorXd::Zero(out);
  return l;
}

Eigen::ArrayXXd tanh_deriv_from_output(const Eigen::MatrixXd& t) { return 1.0 - t.array().square(); }

// Forward pass state for a batch; columns are samples.
struct Forward {
  Eigen::MatrixXd h1, h2, out, z, t1, t2, y;
};

Forward forward(const VaeModel& m, const Eigen::MatrixXd& x, const Eigen::MatrixXd& noise,
                const Eigen::VectorXd& mask) {
  Forward f;
  f.h1 = ((m.encoder[0].weight * x).colwise() + m.encoder[0].bias).array().tanh();
  f.h2 = ((m.encoder[1].weight * f.h1).colwise() + m.encoder[1].bias).array().tanh();
  f.out = (m.encoder[2].weight * f.h2).colwise() + m.encoder[2].bias;
  const auto mu = f.out.topRows(2);
  const auto lv = f.out.bottomRows(2);
  f.z = mu.array() + (0.5 * lv.array()).exp() * noise.array();
  f.t1 = ((m.decoder[0].weight * f.z).colwise() + m.decoder[0].bias).array().tanh();
  const Eigen::MatrixXd u1 = f.t1 + f.h2 * mask.asDiagonal();
  f.t2 = ((m.decoder[1].weight * u1).colwise() + m.decoder[1].bias).array().tanh();
  const Eigen::MatrixXd u2 = f.t2 + f.h1 * mask.asDiagonal();
  f.y = (m.decoder[2].weight * u2).colwise() + m.decoder[2].bias;
  return f;
}

template <typename F>
void for_each_layer(const VaeModel& m, F&& fn) {
  for (const auto& l : m.encoder) fn(l);
  for (const auto& l : m.decoder) fn(l);
}

template <typename F>
void for_each_layer(VaeModel& m, F&& fn) {
  for (auto& l : m.encoder) fn(l);
  for (auto& l : m.decoder) fn(l);
}

Eigen::VectorXd standardize(const VaeModel& m, const ShapeVector& x) {
  return ((x - m.input_mean).array() / m.input_scale.array()).matrix();
}

nlohmann::json layer_to_json(const DenseLayer& l) {
  return {{"rows", l.weight.rows()},
          {"cols", l.weight.cols()},
          {"weight", std::vector<double>(l.weight.data(), l.weight.data() + l.weight.size())},
          {"bias", std::vector<double>(l.bias.data(), l.bias.data() + l.bias.size())}};
}

DenseLayer layer_from_json(const nlohmann::json& j, int in, int out) {
  const auto rows = j.at("rows").get<int>();
  const auto cols = j.at("cols").get<int>();
  if (rows != out || cols != in) {
    throw InvalidData("vae checkpoint: layer dims " + std::to_string(rows) + "x" + std::to_string(cols) +
                      ", expected " + std::to_string(out) + "x" + std::to_string(in));
  }
  const auto w = j.at("weight").get<std::vector<double>>();
  const auto b = j.at("bias").get<std::vector<double>>();
  if (w.size() != static_cast<std::size_t>(rows * cols) || b.size() != static_cast<std::size_t>(rows)) {
    throw InvalidData("vae checkpoint: truncated layer");
  }
  DenseLayer l;
  l.weight = Eigen::Map<const Eigen::MatrixXd>(w.data(), rows, cols);
  l.bias = Eigen::Map<const Eigen::VectorXd>(b.data(), rows);
  return l;
}

} // namespace

VaeModel VaeModel::initialize(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  VaeModel m;
  for (int i = 0; i < 3; ++i) {
    // Small output layer for the encoder so the initial posterior is close to N(0, I).
    m.encoder[i] = make_layer(kEncoderDims[i], kEncoderDims[i + 1], i == 2 ? 0.1 : 1.0, rng);
  }
  for (int i = 0; i < 3; ++i) {
    m.decoder[i] = make_layer(kDecoderDims[i], kDecoderDims[i + 1], 1.0, rng);
  }
  return m;
}

std::size_t VaeModel::parameter_count() const {
  std::size_t n = 0;
  for_each_layer(*this, [&](const DenseLayer& l) { n += l.weight.size() + l.bias.size(); });
  return n;
}

Eigen::VectorXd VaeModel::parameters() const {
  Eigen::VectorXd flat(parameter_count());
  Eigen::Index at = 0;
  for_each_layer(*this, [&](const DenseLayer& l) {
    flat.segment(at, l.weight.size()) = Eigen::Map<const Eigen::VectorXd>(l.weight.data(), l.weight.size());
    at += l.weight.size();
    flat.segment(at, l.bias.size()) = l.bias;
    at += l.bias.size();
  });
  return flat;
}

void VaeModel::set_parameters(const Eigen::VectorXd& flat) {
  if (static_cast<std::size_t>(flat.size()) != parameter_count()) {
    throw InvalidArgument("set_parameters: size mismatch");
  }
  Eigen::Index at = 0;
  for_each_layer(*this, [&](DenseLayer& l) {
    Eigen::Map<Eigen::VectorXd>(l.weight.data(), l.weight.size()) = flat.segment(at, l.weight.size());
    at += l.weight.size();
    l.bias = flat.segment(at, l.bias.size());
    at += l.bias.size();
  });
}

Encoding encode(const ShapeVector& x, const VaeModel& model, std::string source_id) {
  if (!x.allFinite()) {
    throw InvalidArgument("encode: non-finite input");
  }
  const Eigen::VectorXd xs = standardize(model, x);
  Eigen::VectorXd h1 = ((model.encoder[0].weight * xs) + model.encoder[0].bias).array().tanh();
  Eigen::VectorXd h2 = ((model.encoder[1].weight * h1) + model.encoder[1].bias).array().tanh();
  const Eigen::VectorXd out = model.encoder[2].weight * h2 + model.encoder[2].bias;

  const Eigen::Vector2d raw = out.head<2>();
  const Eigen::Vector2d mapped = model.calibration.scale.cwiseProduct(raw) + model.calibration.offset;
  Encoding e;
  e.mean = {mapped(0), mapped(1)};
  // Variance scales with the square of the calibration factor.
  e.log_variance = out.tail<2>() + 2.0 * model.calibration.scale.array().log().matrix();
  e.skip.activations = {std::move(h1), std::move(h2)};
  e.skip.source_id = std::move(source_id);
  return e;
}

Encoding encode(const Eigen::VectorXd& x, const VaeModel& model, std::string source_id) {
  if (x.size() != kShapeDim) {
    throw InvalidArgument("encode: expected a 256-vector, got " + std::to_string(x.size()));
  }
  return encode(ShapeVector(x), model, std::move(source_id));
}

std::vector<LatentPoint2D> encode_means(const std::vector<ShapeVector>& xs, const VaeModel& model) {
  std::vector<LatentPoint2D> out(xs.size());
  const auto n = static_cast<std::int64_t>(xs.size());
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < n; ++i) {
    out[i] = encode(xs[i], model).mean;
  }
  return out;
}

ShapeVector decode(const LatentPoint2D& z, const SkipInfo& skip, const VaeModel& model) {
  if (skip.activations.size() != VaeModel::kSkipTaps.size() ||
      skip.activations[0].size() != VaeModel::kSkipDims[0] || skip.activations[1].size() != VaeModel::kSkipDims[1]) {
    throw InvalidArgument("decode: skip information does not match the model's taps");
  }
  if (!std::isfinite(z.z1) || !std::isfinite(z.z2)) {
    throw InvalidArgument("decode: non-finite latent point");
  }
  const Eigen::Vector2d raw = (Eigen::Vector2d(z.z1, z.z2) - model.calibration.offset).cwiseQuotient(model.calibration.scale);
  const Eigen::VectorXd u1 =
      (model.decoder[0].weight * raw + model.decoder[0].bias).array().tanh().matrix() + skip.activations[1];
  const Eigen::VectorXd u2 =
      (model.decoder[1].weight * u1 + model.decoder[1].bias).array().tanh().matrix() + skip.activations[0];
  const Eigen::VectorXd y = model.decoder[2].weight * u2 + model.decoder[2].bias;
  return (y.array() * model.input_scale.array()).matrix() + model.input_mean;
}

double gaussian_kld(const Eigen::Vector2d& mean, const Eigen::Vector2d& log_var) {
  return -0.5 * (1.0 + log_var.array() - mean.array().square() - log_var.array().exp()).sum();
}

LossBreakdown vae_loss(const VaeModel& m, const Eigen::MatrixXd& x, const Eigen::MatrixXd& noise,
                       const Eigen::VectorXd& mask, Eigen::VectorXd* grad) {
  const double batch = static_cast<double>(x.cols());
  const double kw = m.hyperparams.kld_weight;
  const Forward f = forward(m, x, noise, mask);
  const auto mu = f.out.topRows(2);
  const auto lv = f.out.bottomRows(2);

  const Eigen::MatrixXd err = f.y - x;
  LossBreakdown loss;
  loss.reconstruction = err.squaredNorm() / batch;
  loss.kld = -0.5 * (1.0 + lv.array() - mu.array().square() - lv.array().exp()).sum() / batch;
  loss.total = loss.reconstruction + kw * loss.kld;
  if (grad == nullptr) return loss;

  const Eigen::MatrixXd u1 = f.t1 + f.h2 * mask.asDiagonal();
  const Eigen::MatrixXd u2 = f.t2 + f.h1 * mask.asDiagonal();

  const Eigen::MatrixXd dy = (2.0 / batch) * err;
  const Eigen::MatrixXd dD3 = dy * u2.transpose();
  const Eigen::VectorXd de3 = dy.rowwise().sum();
  const Eigen::MatrixXd du2 = m.decoder[2].weight.transpose() * dy;
  const Eigen::MatrixXd dc2 = (du2.array() * tanh_deriv_from_output(f.t2)).matrix();
  const Eigen::MatrixXd dD2 = dc2 * u1.transpose();
  const Eigen::VectorXd de2 = dc2.rowwise().sum();
  const Eigen::MatrixXd du1 = m.decoder[1].weight.transpose() * dc2;
  const Eigen::MatrixXd dc1 = (du1.array() * tanh_deriv_from_output(f.t1)).matrix();
  const Eigen::MatrixXd dD1 = dc1 * f.z.transpose();
  const Eigen::VectorXd de1 = dc1.rowwise().sum();
  const Eigen::MatrixXd dz = m.decoder[0].weight.transpose() * dc1;

  Eigen::MatrixXd dout(4, x.cols());
  dout.topRows(2) = dz.array() + (kw / batch) * mu.array();
  dout.bottomRows(2) = dz.array() * noise.array() * 0.5 * (0.5 * lv.array()).exp() +
                       (kw / batch) * 0.5 * (lv.array().exp() - 1.0);

  const Eigen::MatrixXd dW3 = dout * f.h2.transpose();
  const Eigen::VectorXd db3 = dout.rowwise().sum();
  const Eigen::MatrixXd dh2 = m.encoder[2].weight.transpose() * dout + du1 * mask.asDiagonal();
  const Eigen::MatrixXd da2 = (dh2.array() * tanh_deriv_from_output(f.h2)).matrix();
  const Eigen::MatrixXd dW2 = da2 * f.h1.transpose();
  const Eigen::VectorXd db2 = da2.rowwise().sum();
  const Eigen::MatrixXd dh1 = m.encoder[1].weight.transpose() * da2 + du2 * mask.asDiagonal();
  const Eigen::MatrixXd da1 = (dh1.array() * tanh_deriv_from_output(f.h1)).matrix();
  const Eigen::MatrixXd dW1 = da1 * x.transpose();
  const Eigen::VectorXd db1 = da1.rowwise().sum();

  grad->resize(static_cast<Eigen::Index>(m.parameter_count()));
  Eigen::Index at = 0;
  auto put = [&](const Eigen::MatrixXd& w, const Eigen::VectorXd& b) {
    grad->segment(at, w.size()) = Eigen::Map<const Eigen::VectorXd>(w.data(), w.size());
    at += w.size();
    grad->segment(at, b.size()) = b;
    at += b.size();
  };
  put(dW1, db1);
  put(dW2, db2);
  put(dW3, db3);
  put(dD1, de1);
  put(dD2, de2);
  put(dD3, de3);
  return loss;
}

double reconstruction_mse(const VaeModel& model, const std::vector<ShapeVector>& xs) {
  if (xs.empty()) return 0.0;
  double total = 0.0;
  for (const auto& x : xs) {
    const Encoding e = encode(x, model);
    total += (decode(e.mean, e.skip, model) - x).squaredNorm();
  }
  return total / (static_cast<double>(xs.size()) * kShapeDim);
}

namespace {

EpochStats evaluate_epoch(const VaeModel& m, const Eigen::MatrixXd& train, const Eigen::MatrixXd& eval, int epoch) {
  EpochStats s;
  s.epoch = epoch;
  auto raw_mse = [&](const Eigen::MatrixXd& data, double* kld) {
    if (data.cols() == 0) return 0.0;
    const Eigen::MatrixXd zero = Eigen::MatrixXd::Zero(2, data.cols());
    const Eigen::VectorXd ones = Eigen::VectorXd::Ones(data.cols());
    const Forward f = forward(m, data, zero, ones);
    const Eigen::MatrixXd err = (f.y - data).array().colwise() * m.input_scale.array();
    if (kld != nullptr) {
      const auto mu = f.out.topRows(2);
      const auto lv = f.out.bottomRows(2);
      *kld = -0.5 * (1.0 + lv.array() - mu.array().square() - lv.array().exp()).sum() /
             static_cast<double>(data.cols());
    }
    return err.squaredNorm() / static_cast<double>(data.size());
  };
  s.train_mse = raw_mse(train, &s.kld);
  s.eval_mse = raw_mse(eval, nullptr);
  return s;
}

} // namespace

TrainedVae train_vae(const std::vector<ShapeVector>& corpus, const VaeHyperparams& hp, const Bounds& map_box) {
  if (corpus.size() < 100) {
    throw InvalidArgument("train_vae: corpus needs at least 100 vectors, got " + std::to_string(corpus.size()));
  }
  if (hp.epochs < 1 || hp.batch_size < 1 || !(hp.learning_rate > 0.0) || hp.eval_fraction < 0.0 ||
      hp.eval_fraction >= 1.0) {
    throw InvalidArgument("train_vae: invalid hyperparameters");
  }
  map_box.validate();

  std::mt19937_64 rng(hp.seed);
  std::vector<std::size_t> order(corpus.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  const auto n_eval = static_cast<std::size_t>(std::llround(hp.eval_fraction * static_cast<double>(corpus.size())));
  const std::size_t n_train = corpus.size() - n_eval;

  VaeModel model = VaeModel::initialize(hp.seed ^ 0x9e3779b97f4a7c15ULL);
  model.hyperparams = hp;

  // Standardization statistics come from the training split only.
  ShapeVector mean = ShapeVector::Zero();
  for (std::size_t i = 0; i < n_train; ++i) mean += corpus[order[i]];
  mean /= static_cast<double>(n_train);
  ShapeVector var = ShapeVector::Zero();
  for (std::size_t i = 0; i < n_train; ++i) var += (corpus[order[i]] - mean).cwiseAbs2();
  var /= static_cast<double>(n_train);
  model.input_mean = mean;
  const double floor = hp.scale_floor;
  model.input_scale = var.cwiseSqrt().unaryExpr([floor](double s) { return std::max(s, floor); });

  Eigen::MatrixXd train(kShapeDim, static_cast<Eigen::Index>(n_train));
  Eigen::MatrixXd eval(kShapeDim, static_cast<Eigen::Index>(n_eval));
  for (std::size_t i = 0; i < n_train; ++i) train.col(static_cast<Eigen::Index>(i)) = standardize(model, corpus[order[i]]);
  for (std::size_t i = 0; i < n_eval; ++i) eval.col(static_cast<Eigen::Index>(i)) = standardize(model, corpus[order[n_train + i]]);

  TrainedVae result;
  result.report.train_size = n_train;
  result.report.eval_size = n_eval;

  std::normal_distribution<double> normal(0.0, 1.0);
  std::bernoulli_distribution keep_skip(1.0 - hp.skip_dropout);
  Eigen::VectorXd params = model.parameters();
  Eigen::VectorXd velocity = Eigen::VectorXd::Zero(params.size());
  Eigen::VectorXd grad;
  std::vector<Eigen::Index> idx(n_train);
  std::iota(idx.begin(), idx.end(), 0);

  for (int epoch = 1; epoch <= hp.epochs; ++epoch) {
    std::shuffle(idx.begin(), idx.end(), rng);
    for (std::size_t start = 0; start < n_train; start += static_cast<std::size_t>(hp.batch_size)) {
      const std::size_t stop = std::min(n_train, start + static_cast<std::size_t>(hp.batch_size));
      const auto b = static_cast<Eigen::Index>(stop - start);
      Eigen::MatrixXd batch(kShapeDim, b);
      Eigen::MatrixXd noise(2, b);
      Eigen::VectorXd mask(b);
      for (Eigen::Index j = 0; j < b; ++j) {
        batch.col(j) = train.col(idx[start + static_cast<std::size_t>(j)]);
        noise(0, j) = normal(rng);
        noise(1, j) = normal(rng);
        mask(j) = keep_skip(rng) ? 1.0 : 0.0;
      }
      const LossBreakdown loss = vae_loss(model, batch, noise, mask, &grad);
      if (!std::isfinite(loss.total) || !grad.allFinite()) {
        throw TrainingFailure(epoch, "train_vae: non-finite loss");
      }
      velocity = hp.momentum * velocity - hp.learning_rate * grad;
      params += velocity;
      model.set_parameters(params);
    }
    const EpochStats stats = evaluate_epoch(model, train, eval, epoch);
    if (!std::isfinite(stats.train_mse) || !std::isfinite(stats.kld)) {
      throw TrainingFailure(epoch, "train_vae: non-finite loss");
    }
    spdlog::debug("vae epoch {} train_mse {:.6f} eval_mse {:.6f} kld {:.4f}", epoch, stats.train_mse,
                  stats.eval_mse, stats.kld);
    result.report.epochs.push_back(stats);
  }
  result.report.final_eval_mse = result.report.epochs.back().eval_mse;

  // Calibrate the map: central quantile box of the raw corpus means -> map_box.
  std::vector<LatentPoint2D> raw = encode_means(corpus, model);
  std::vector<double> r1, r2;
  for (const auto& p : raw) {
    r1.push_back(p.z1);
    r2.push_back(p.z2);
  }
  const double tail = BoundsConfig{}.auto_fit_tail;
  const std::array<Interval, 2> raw_axes{quantile_interval(std::move(r1), tail), quantile_interval(std::move(r2), tail)};
  const std::array<Interval, 2> map_axes{map_box.z1, map_box.z2};
  for (int a = 0; a < 2; ++a) {
    if (raw_axes[a].width() > 1e-12) {
      model.calibration.scale(a) = map_axes[a].width() / raw_axes[a].width();
      model.calibration.offset(a) = map_axes[a].lo - model.calibration.scale(a) * raw_axes[a].lo;
    } else {
      // Collapsed axis (e.g. a corpus of identical shapes): centre it.
      model.calibration.scale(a) = 1.0;
      model.calibration.offset(a) = 0.5 * (map_axes[a].lo + map_axes[a].hi) - raw_axes[a].lo;
    }
  }

  result.model = std::move(model);
  return result;
}

void TrainingReport::write_csv(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) {
    throw FileError(path.string(), "cannot open for writing");
  }
  out << "epoch,train_mse,eval_mse,kld\n";
  out.precision(10);
  for (const auto& e : epochs) {
    out << e.epoch << ',' << e.train_mse << ',' << e.eval_mse << ',' << e.kld << '\n';
  }
}

void save_vae(const VaeModel& model, const std::filesystem::path& path) {
  nlohmann::json j;
  j["format"] = "bogen-vae";
  j["version"] = kFormatVersion;
  j["encoder_dims"] = VaeModel::kEncoderDims;
  j["decoder_dims"] = VaeModel::kDecoderDims;
  j["skip_taps"] = VaeModel::kSkipTaps;
  for (const auto& l : model.encoder) j["encoder"].push_back(layer_to_json(l));
  for (const auto& l : model.decoder) j["decoder"].push_back(layer_to_json(l));
  j["input_mean"] = std::vector<double>(model.input_mean.data(), model.input_mean.data() + kShapeDim);
  j["input_scale"] = std::vector<double>(model.input_scale.data(), model.input_scale.data() + kShapeDim);
  j["calibration"] = {{"scale", {model.calibration.scale(0), model.calibration.scale(1)}},
                      {"offset", {model.calibration.offset(0), model.calibration.offset(1)}}};
  const auto& hp = model.hyperparams;
  j["hyperparams"] = {{"epochs", hp.epochs},           {"batch_size", hp.batch_size},
                      {"learning_rate", hp.learning_rate}, {"momentum", hp.momentum},
                      {"kld_weight", hp.kld_weight},   {"skip_dropout", hp.skip_dropout},
                      {"eval_fraction", hp.eval_fraction}, {"scale_floor", hp.scale_floor},
                      {"seed", hp.seed}};
  std::ofstream out(path);
  if (!out) {
    throw FileError(path.string(), "cannot open for writing");
  }
  out << j.dump() << '\n';
  if (!out) {
    throw FileError(path.string(), "write failed");
  }
}

VaeModel load_vae(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) {
    throw MissingArtifact(path.string());
  }
  std::ifstream in(path);
  if (!in) {
    throw FileError(path.string(), "cannot open for reading");
  }
  try {
    const auto j = nlohmann::json::parse(in);
    if (j.at("format") != "bogen-vae" || j.at("version").get<int>() != kFormatVersion) {
      throw InvalidData("not a bogen-vae v1 checkpoint");
    }
    VaeModel m;
    for (int i = 0; i < 3; ++i) {
      m.encoder[i] = layer_from_json(j.at("encoder").at(i), VaeModel::kEncoderDims[i], VaeModel::kEncoderDims[i + 1]);
      m.decoder[i] = layer_from_json(j.at("decoder").at(i), VaeModel::kDecoderDims[i], VaeModel::kDecoderDims[i + 1]);
    }
    const auto mean = j.at("input_mean").get<std::vector<double>>();
    const auto scale = j.at("input_scale").get<std::vector<double>>();
    if (mean.size() != kShapeDim || scale.size() != kShapeDim) {
      throw InvalidData("vae checkpoint: standardization vectors must have 256 entries");
    }
    m.input_mean = Eigen::Map<const ShapeVector>(mean.data());
    m.input_scale = Eigen::Map<const ShapeVector>(scale.data());
    const auto& c = j.at("calibration");
    m.calibration.scale = {c.at("scale").at(0).get<double>(), c.at("scale").at(1).get<double>()};
    m.calibration.offset = {c.at("offset").at(0).get<double>(), c.at("offset").at(1).get<double>()};
    const auto& h = j.at("hyperparams");
    m.hyperparams.epochs = h.at("epochs").get<int>();
    m.hyperparams.batch_size = h.at("batch_size").get<int>();
    m.hyperparams.learning_rate = h.at("learning_rate").get<double>();
    m.hyperparams.momentum = h.at("momentum").get<double>();
    m.hyperparams.kld_weight = h.at("kld_weight").get<double>();
    m.hyperparams.skip_dropout = h.at("skip_dropout").get<double>();
    m.hyperparams.eval_fraction = h.at("eval_fraction").get<double>();
    m.hyperparams.scale_floor = h.value("scale_floor", m.hyperparams.scale_floor);
    m.hyperparams.seed = h.at("seed").get<std::uint64_t>();
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw FileError(path.string(), std::string("malformed vae checkpoint (") + e.what() + ")");
  } catch (const InvalidData& e) {
    throw FileError(path.string(), e.what());
  }
}

} // namespace bogen
