#pragma once

#include "reorient/geometry.hpp"
#include "reorient/hull2d.hpp"

#include <array>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace reorient {

/// Dense row-major tensor with an optional gradient buffer of the same shape.
struct Tensor {
  std::vector<int> shape;
  std::vector<double> data;
  std::vector<double> grad;

  Tensor() = default;
  explicit Tensor(std::vector<int> shape, double fill = 0.0);
  Tensor(std::vector<int> shape, std::vector<double> values);

  std::size_t size() const { return data.size(); }
  void zero_grad() { grad.assign(data.size(), 0.0); }
  double& operator[](std::size_t i) { return data[i]; }
  double operator[](std::size_t i) const { return data[i]; }
};

std::size_t shape_size(const std::vector<int>& shape);

/// 3x3 convolution, stride 1, zero "same" padding. Input C x H x W.
struct Conv2d {
  Tensor weight;  // out x in x 3 x 3
  Tensor bias;    // out

  Conv2d() = default;
  Conv2d(int in, int out);
  int in_channels() const { return weight.shape[1]; }
  int out_channels() const { return weight.shape[0]; }

  /// Throws ShapeMismatch.
  Tensor forward(const Tensor& x) const;
  /// Accumulates weight/bias gradients and returns dL/dx.
  Tensor backward(const Tensor& x, const Tensor& dy);
};

/// 2x2 max pooling, stride 2. `argmax` (flat input index per output) may be null.
Tensor maxpool2_forward(const Tensor& x, std::vector<int>* argmax = nullptr);
Tensor maxpool2_backward(const std::vector<int>& in_shape, const std::vector<int>& argmax, const Tensor& dy);

Tensor relu_forward(const Tensor& x);
Tensor relu_backward(const Tensor& x, const Tensor& dy);

/// y = W x + b on a flat vector.
struct Linear {
  Tensor weight;  // out x in
  Tensor bias;    // out

  Linear() = default;
  Linear(int in, int out);
  int in_features() const { return weight.shape[1]; }
  int out_features() const { return weight.shape[0]; }

  Tensor forward(const Tensor& x) const;
  Tensor backward(const Tensor& x, const Tensor& dy);
};

double sigmoid(double x);
Tensor sigmoid_forward(const Tensor& x);
Tensor sigmoid_backward(const Tensor& y, const Tensor& dy);

inline constexpr double kProbClamp = 1e-7;

/// Mean binary cross-entropy; p is clamped to [1e-7, 1 - 1e-7]. `grad`
/// receives dL/dp when given.
double bce_loss(const std::vector<double>& p, const std::vector<double>& y, std::vector<double>* grad = nullptr);
/// Mean absolute error; `grad` receives dL/dx (sign / n, 0 at ties).
double l1_loss(const std::vector<double>& x, const std::vector<double>& t, std::vector<double>* grad = nullptr);

struct TrainConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  int batch_size = 64;
  int epochs = 100;
  int patience = 10;
  double min_delta = 1e-4;
  double validation_fraction = 0.1;
  int heightmaps_per_batch = 4;  // 0: plain shuffled batches
  std::uint64_t seed = 0;
};

/// Bias-corrected Adam over a fixed list of tensors (gradients in `grad`).
class Adam {
 public:
  Adam(std::vector<Tensor*> params, const TrainConfig& cfg);
  void step();
  int steps() const { return t_; }

 private:
  std::vector<Tensor*> params_;
  std::vector<std::vector<double>> m_, v_;
  TrainConfig cfg_;
  int t_ = 0;
};

inline constexpr int kHeightmapCells = 64;
inline constexpr int kPoseFeatures = 7;

/// Pose as [x - cx, y - cy, z, qx, qy, qz, qw] with qw >= 0, relative to the
/// heightmap center (cx, cy).
std::array<double, 7> encode_pose(const Pose& p, const Vec2& heightmap_center);

enum class ModelKind { Pickability, Waypoint };
ModelKind parse_model_kind(const std::string& s);
const char* to_string(ModelKind k);

struct DatasetRecord {
  ModelKind kind = ModelKind::Pickability;
  std::shared_ptr<const std::vector<double>> heightmap;  // 64 x 64, row-major, meters
  int object_class = 0;
  int n_classes = 6;
  std::array<double, 7> initial{};
  std::array<double, 7> reorient{};
  std::array<double, 7> grasp{};
  // pickability
  int pickable = 0;
  // waypoint
  int v_grasp = 0;
  int v_reorient = 0;
  int v_traj = 0;
  double length = 0.0;  // rad; meaningful when v_traj = 1
};

/// Heights are stored at 0.1 mm resolution so file round trips are exact.
std::shared_ptr<const std::vector<double>> quantize_heightmap(const std::vector<double>& h);

std::string record_to_json(const DatasetRecord& r);
DatasetRecord record_from_json(const std::string& line);
/// JSON-Lines. Records sharing identical heightmaps share storage after loading.
void save_dataset(const std::string& path, const std::vector<DatasetRecord>& records);
std::vector<DatasetRecord> load_dataset(const std::string& path);

/// Six [conv3x3 -> maxpool2 -> relu] blocks, channels 8,16,32,32,64,64:
/// 1 x 64 x 64 -> 64 features.
class Encoder {
 public:
  static constexpr std::array<int, 6> kChannels{8, 16, 32, 32, 64, 64};

  Encoder();
  struct Cache {
    std::vector<Tensor> inputs;   // conv inputs per block
    std::vector<Tensor> convs;    // conv outputs
    std::vector<std::vector<int>> argmax;
    std::vector<Tensor> pooled;
  };
  Tensor forward(const std::vector<double>& heightmap, Cache* cache = nullptr) const;
  void backward(const Cache& cache, const Tensor& dfeat);
  std::vector<Tensor*> params();
  std::vector<const Tensor*> params() const;

  std::vector<Conv2d> convs;
};

/// in -> 128 -> 64 -> out with ReLU between; output activation left to the model.
class Mlp {
 public:
  Mlp() = default;
  Mlp(int in, int out);
  struct Cache {
    Tensor x, h1, a1, h2, a2;
  };
  Tensor forward(const Tensor& x, Cache* cache = nullptr) const;
  /// Returns dL/dx.
  Tensor backward(const Cache& cache, const Tensor& dout);
  std::vector<Tensor*> params();
  std::vector<const Tensor*> params() const;

  std::array<Linear, 3> layers;
};

/// Fixed part of a model input shared by many candidates.
struct EncodedContext {
  Tensor features;  // 64 encoder features
  int object_class = 0;
  int n_classes = 6;
  std::array<double, 7> initial{};
};

struct ModelOutput {
  double pickable = 0.0;
  double v_grasp = 0.0, v_reorient = 0.0, v_traj = 0.0;
  double length = 0.0;
};

/// Shared encoder + MLP. Pickability has one sigmoid output; the waypoint
/// model has three sigmoid validities and a linear length.
class SurrogateModel {
 public:
  SurrogateModel(ModelKind kind, int n_classes, std::uint64_t seed);

  ModelKind kind() const { return kind_; }
  int n_classes() const { return n_classes_; }
  int input_features() const { return 64 + 3 * kPoseFeatures + n_classes_; }
  int outputs() const { return kind_ == ModelKind::Pickability ? 1 : 4; }

  EncodedContext encode(const std::vector<double>& heightmap, int object_class,
                        const std::array<double, 7>& initial) const;
  ModelOutput predict(const EncodedContext& ctx, const std::array<double, 7>& reorient,
                      const std::array<double, 7>& grasp) const;
  ModelOutput predict(const DatasetRecord& r) const;

  /// Mean loss over the batch; accumulates parameter gradients.
  double loss_and_grad(const std::vector<const DatasetRecord*>& batch);
  double loss(const std::vector<const DatasetRecord*>& batch) const;

  std::vector<Tensor*> params();
  std::vector<const Tensor*> params() const;
  void zero_grad();

  std::string to_json() const;
  static SurrogateModel from_json(const std::string& text);
  void save(const std::string& path) const;
  static SurrogateModel load(const std::string& path);

  Encoder encoder;
  Mlp mlp;

 private:
  Tensor mlp_input(const Tensor& features, const DatasetRecord& r) const;
  double record_loss(const Tensor& out, const DatasetRecord& r, Tensor* dout) const;

  ModelKind kind_;
  int n_classes_;
};

struct TrainReport {
  std::vector<double> train_loss;
  std::vector<double> val_loss;
  int best_epoch = -1;
  std::size_t n_train = 0;
  std::size_t n_val = 0;
};

/// Seeded 90/10 split, shuffled mini-batches, Adam, early stopping on the
/// validation loss; restores the best checkpoint. Throws EmptyDataset,
/// InvalidInput.
SurrogateModel train(ModelKind kind, const std::vector<DatasetRecord>& data, const TrainConfig& cfg,
                     TrainReport* report = nullptr, int n_classes = 6);

/// Seeded index split used by `train`: {train, validation}.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_indices(std::size_t n, double val_fraction,
                                                                            std::uint64_t seed);

/// Indices of the k highest scores, ties by lower index.
std::vector<std::size_t> select_top_k(const std::vector<double>& scores, std::size_t k);
/// Top-k by validity, then re-ordered by ascending predicted length (stable).
std::vector<std::size_t> select_waypoints(const std::vector<double>& validity, const std::vector<double>& length,
                                          std::size_t k);

/// Trapezoidal ROC-AUC with tie handling; 0.5 when one class is absent.
double roc_auc(const std::vector<double>& scores, const std::vector<int>& labels);

}  // namespace reorient
