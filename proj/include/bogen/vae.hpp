#pragma once

#include "bogen/latent.hpp"
#include "bogen/shape.hpp"

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace bogen {

struct DenseLayer {
  Eigen::MatrixXd weight; // out x in
  Eigen::VectorXd bias;
};

struct VaeHyperparams {
  int epochs = 50;
  int batch_size = 64;
  double learning_rate = 1e-3;
  double momentum = 0.9;
  double kld_weight = 1e-3;
  /// Probability of zeroing a sample's skip activations during training, so
  /// the decoder also learns to reconstruct from the 2-D code alone.
  double skip_dropout = 0.5;
  double eval_fraction = 0.1;
  /// Lower bound on the per-dimension standardization scale. Near-constant
  /// dimensions would otherwise blow small off-corpus deviations up into huge
  /// encoder inputs.
  double scale_floor = 1e-2;
  std::uint64_t seed = 0;
};

/// Affine map from the raw encoder mean to exploration-map coordinates:
/// map = scale .* raw + offset.
struct MapCalibration {
  Eigen::Vector2d scale = Eigen::Vector2d::Ones();
  Eigen::Vector2d offset = Eigen::Vector2d::Zero();
};

/// Encoder 256 -> 128 -> 64 -> (2 mean + 2 log-variance); decoder
/// 2 -> 64 -> 128 -> 256. Encoder hidden layer 0 (128) is added to decoder
/// hidden layer 1 and encoder hidden layer 1 (64) to decoder hidden layer 0.
struct VaeModel {
  static constexpr std::array<int, 4> kEncoderDims = {kShapeDim, 128, 64, 4};
  static constexpr std::array<int, 4> kDecoderDims = {2, 64, 128, kShapeDim};
  static constexpr std::array<int, 2> kSkipTaps = {0, 1};
  static constexpr std::array<int, 2> kSkipDims = {128, 64};

  std::array<DenseLayer, 3> encoder;
  std::array<DenseLayer, 3> decoder;
  /// Per-dimension standardization applied before the encoder and undone after the decoder.
  ShapeVector input_mean = ShapeVector::Zero();
  ShapeVector input_scale = ShapeVector::Ones();
  MapCalibration calibration;
  VaeHyperparams hyperparams;

  static VaeModel initialize(std::uint64_t seed);

  std::size_t parameter_count() const;
  Eigen::VectorXd parameters() const;
  void set_parameters(const Eigen::VectorXd& flat);
};

/// Encoder hidden activations of one specific shape.
struct SkipInfo {
  std::vector<Eigen::VectorXd> activations; // one per skip tap
  std::string source_id;
};

struct Encoding {
  LatentPoint2D mean;
  Eigen::Vector2d log_variance;
  SkipInfo skip;
};

Encoding encode(const ShapeVector& x, const VaeModel& model, std::string source_id = {});
/// Dynamic-size overload; throws InvalidArgument unless x has 256 entries.
Encoding encode(const Eigen::VectorXd& x, const VaeModel& model, std::string source_id = {});
/// Map-space means for many inputs at once (OpenMP over samples).
std::vector<LatentPoint2D> encode_means(const std::vector<ShapeVector>& xs, const VaeModel& model);

/// Raw (unnormalized) extrinsic vector for a map point decoded with the given
/// shape's skip information.
ShapeVector decode(const LatentPoint2D& z, const SkipInfo& skip, const VaeModel& model);

struct LossBreakdown {
  double total = 0.0;
  double reconstruction = 0.0; // mean per-sample sum of squared standardized errors
  double kld = 0.0;            // mean per-sample KL(q(z|x) || N(0, I))
};

/// Training loss on a standardized batch (256 x B) with explicit
/// reparameterization noise (2 x B) and per-sample skip mask (B). When grad is
/// non-null it receives the gradient in parameters() order.
LossBreakdown vae_loss(const VaeModel& model, const Eigen::MatrixXd& batch, const Eigen::MatrixXd& noise,
                       const Eigen::VectorXd& skip_mask, Eigen::VectorXd* grad = nullptr);

/// Analytic KL(N(mean, exp(log_var)) || N(0, I)).
double gaussian_kld(const Eigen::Vector2d& mean, const Eigen::Vector2d& log_var);

struct EpochStats {
  int epoch = 0;
  double train_mse = 0.0;
  double eval_mse = 0.0;
  double kld = 0.0;
};

struct TrainingReport {
  std::vector<EpochStats> epochs;
  double final_eval_mse = 0.0;
  std::size_t train_size = 0;
  std::size_t eval_size = 0;

  void write_csv(const std::filesystem::path& path) const;
};

struct TrainedVae {
  VaeModel model;
  TrainingReport report;
};

/// Trains on the corpus and calibrates the map so the central quantile box of
/// the corpus means lands on map_box. Throws InvalidArgument for fewer than
/// 100 vectors and TrainingFailure on a non-finite loss.
TrainedVae train_vae(const std::vector<ShapeVector>& corpus, const VaeHyperparams& hp = {},
                     const Bounds& map_box = Bounds{});

/// Raw-scale reconstruction MSE of decode(encode(x).mean, encode(x).skip).
double reconstruction_mse(const VaeModel& model, const std::vector<ShapeVector>& xs);

void save_vae(const VaeModel& model, const std::filesystem::path& path);
VaeModel load_vae(const std::filesystem::path& path);

} // namespace bogen
