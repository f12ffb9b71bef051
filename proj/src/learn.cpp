#include "reorient/learn.hpp"

#include "reorient/error.hpp"
#include "reorient/random.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

namespace reorient {

using nlohmann::json;

std::size_t shape_size(const std::vector<int>& shape) {
  std::size_t n = 1;
  for (int d : shape) {
    if (d < 0) throw Error(ErrorCode::ShapeMismatch, "negative dimension");
    n *= static_cast<std::size_t>(d);
  }
  return n;
}

Tensor::Tensor(std::vector<int> s, double fill) : shape(std::move(s)), data(shape_size(shape), fill) {}

Tensor::Tensor(std::vector<int> s, std::vector<double> values) : shape(std::move(s)), data(std::move(values)) {
  if (data.size() != shape_size(shape)) throw Error(ErrorCode::ShapeMismatch, "value count does not match shape");
}

namespace {

void ensure_grad(Tensor& t) {
  if (t.grad.size() != t.data.size()) t.grad.assign(t.data.size(), 0.0);
}

void xavier(Tensor& w, int fan_in, int fan_out, Rng& rng) {
  const double a = std::sqrt(6.0 / (fan_in + fan_out));
  for (double& v : w.data) v = rng.uniform(-a, a);
}

void require(bool ok, const char* what) {
  if (!ok) throw Error(ErrorCode::ShapeMismatch, what);
}

}  // namespace

Conv2d::Conv2d(int in, int out) : weight({out, in, 3, 3}), bias({out}) {
  weight.zero_grad();
  bias.zero_grad();
}

Tensor Conv2d::forward(const Tensor& x) const {
  require(x.shape.size() == 3 && x.shape[0] == in_channels(), "conv input must be C x H x W with matching C");
  const int C = x.shape[0], H = x.shape[1], W = x.shape[2], O = out_channels();
  Tensor y({O, H, W});
  for (int o = 0; o < O; ++o) {
    double* yo = &y.data[static_cast<std::size_t>(o) * H * W];
    std::fill(yo, yo + H * W, bias[o]);
    for (int c = 0; c < C; ++c) {
      const double* xc = &x.data[static_cast<std::size_t>(c) * H * W];
      const double* k = &weight.data[(static_cast<std::size_t>(o) * C + c) * 9];
      for (int ky = 0; ky < 3; ++ky) {
        const int y0 = std::max(0, 1 - ky), y1 = std::min(H, H + 1 - ky);
        for (int kx = 0; kx < 3; ++kx) {
          const double w = k[ky * 3 + kx];
          const int x0 = std::max(0, 1 - kx), x1 = std::min(W, W + 1 - kx);
          for (int yy = y0; yy < y1; ++yy) {
            double* yr = yo + yy * W;
            const double* xr = xc + (yy + ky - 1) * W + (kx - 1);
            for (int xx = x0; xx < x1; ++xx) yr[xx] += w * xr[xx];
          }
        }
      }
    }
  }
  return y;
}

Tensor Conv2d::backward(const Tensor& x, const Tensor& dy) {
  const int C = x.shape[0], H = x.shape[1], W = x.shape[2], O = out_channels();
  require(dy.shape == std::vector<int>({O, H, W}), "conv output gradient shape");
  ensure_grad(weight);
  ensure_grad(bias);
  Tensor dx({C, H, W});
  for (int o = 0; o < O; ++o) {
    const double* go = &dy.data[static_cast<std::size_t>(o) * H * W];
    double s = 0.0;
    for (int i = 0; i < H * W; ++i) s += go[i];
    bias.grad[o] += s;
    for (int c = 0; c < C; ++c) {
      const double* xc = &x.data[static_cast<std::size_t>(c) * H * W];
      double* dxc = &dx.data[static_cast<std::size_t>(c) * H * W];
      const std::size_t kbase = (static_cast<std::size_t>(o) * C + c) * 9;
      for (int ky = 0; ky < 3; ++ky) {
        const int y0 = std::max(0, 1 - ky), y1 = std::min(H, H + 1 - ky);
        for (int kx = 0; kx < 3; ++kx) {
          const double w = weight.data[kbase + ky * 3 + kx];
          const int x0 = std::max(0, 1 - kx), x1 = std::min(W, W + 1 - kx);
          double acc = 0.0;
          for (int yy = y0; yy < y1; ++yy) {
            const double* gr = go + yy * W;
            const int off = (yy + ky - 1) * W + (kx - 1);
            const double* xr = xc + off;
            double* dr = dxc + off;
            for (int xx = x0; xx < x1; ++xx) {
              acc += gr[xx] * xr[xx];
              dr[xx] += w * gr[xx];
            }
          }
          weight.grad[kbase + ky * 3 + kx] += acc;
        }
      }
    }
  }
  return dx;
}

Tensor maxpool2_forward(const Tensor& x, std::vector<int>* argmax) {
  require(x.shape.size() == 3 && x.shape[1] % 2 == 0 && x.shape[2] % 2 == 0, "maxpool needs C x H x W with even H, W");
  const int C = x.shape[0], H = x.shape[1], W = x.shape[2], h = H / 2, w = W / 2;
  Tensor y({C, h, w});
  if (argmax) argmax->assign(y.size(), 0);
  for (int c = 0; c < C; ++c)
    for (int i = 0; i < h; ++i)
      for (int j = 0; j < w; ++j) {
        int best = (c * H + 2 * i) * W + 2 * j;
        for (int di = 0; di < 2; ++di)
          for (int dj = 0; dj < 2; ++dj) {
            const int k = (c * H + 2 * i + di) * W + 2 * j + dj;
            if (x.data[k] > x.data[best]) best = k;
          }
        const int o = (c * h + i) * w + j;
        y.data[o] = x.data[best];
        if (argmax) (*argmax)[o] = best;
      }
  return y;
}

Tensor maxpool2_backward(const std::vector<int>& in_shape, const std::vector<int>& argmax, const Tensor& dy) {
  require(argmax.size() == dy.size(), "maxpool gradient shape");
  Tensor dx(in_shape);
  for (std::size_t o = 0; o < dy.size(); ++o) dx.data[argmax[o]] += dy.data[o];
  return dx;
}

Tensor relu_forward(const Tensor& x) {
  Tensor y = x;
  y.grad.clear();
  for (double& v : y.data) v = v > 0.0 ? v : 0.0;
  return y;
}

Tensor relu_backward(const Tensor& x, const Tensor& dy) {
  require(x.size() == dy.size(), "relu gradient shape");
  Tensor dx(x.shape);
  for (std::size_t i = 0; i < x.size(); ++i) dx.data[i] = x.data[i] > 0.0 ? dy.data[i] : 0.0;
  return dx;
}

Linear::Linear(int in, int out) : weight({out, in}), bias({out}) {
  weight.zero_grad();
  bias.zero_grad();
}

Tensor Linear::forward(const Tensor& x) const {
  const int in = in_features(), out = out_features();
  require(static_cast<int>(x.size()) == in, "linear input size");
  Tensor y({out});
  for (int o = 0; o < out; ++o) {
    const double* w = &weight.data[static_cast<std::size_t>(o) * in];
    double s = bias[o];
    for (int i = 0; i < in; ++i) s += w[i] * x.data[i];
    y.data[o] = s;
  }
  return y;
}

Tensor Linear::backward(const Tensor& x, const Tensor& dy) {
  const int in = in_features(), out = out_features();
  require(static_cast<int>(x.size()) == in && static_cast<int>(dy.size()) == out, "linear gradient shape");
  ensure_grad(weight);
  ensure_grad(bias);
  Tensor dx(x.shape);
  for (int o = 0; o < out; ++o) {
    const double g = dy.data[o];
    bias.grad[o] += g;
    if (g == 0.0) continue;
    const double* w = &weight.data[static_cast<std::size_t>(o) * in];
    double* gw = &weight.grad[static_cast<std::size_t>(o) * in];
    for (int i = 0; i < in; ++i) {
      gw[i] += g * x.data[i];
      dx.data[i] += g * w[i];
    }
  }
  return dx;
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

Tensor sigmoid_forward(const Tensor& x) {
  Tensor y(x.shape);
  for (std::size_t i = 0; i < x.size(); ++i) y.data[i] = sigmoid(x.data[i]);
  return y;
}

Tensor sigmoid_backward(const Tensor& y, const Tensor& dy) {
  Tensor dx(y.shape);
  for (std::size_t i = 0; i < y.size(); ++i) dx.data[i] = dy.data[i] * y.data[i] * (1.0 - y.data[i]);
  return dx;
}

double bce_loss(const std::vector<double>& p, const std::vector<double>& y, std::vector<double>* grad) {
  require(p.size() == y.size(), "bce sizes");
  if (grad) grad->assign(p.size(), 0.0);
  if (p.empty()) return 0.0;
  const double n = static_cast<double>(p.size());
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double q = std::clamp(p[i], kProbClamp, 1.0 - kProbClamp);
    s -= y[i] * std::log(q) + (1.0 - y[i]) * std::log(1.0 - q);
    if (grad && q == p[i]) (*grad)[i] = (-(y[i] / q) + (1.0 - y[i]) / (1.0 - q)) / n;
  }
  return s / n;
}

double l1_loss(const std::vector<double>& x, const std::vector<double>& t, std::vector<double>* grad) {
  require(x.size() == t.size(), "l1 sizes");
  if (grad) grad->assign(x.size(), 0.0);
  if (x.empty()) return 0.0;
  const double n = static_cast<double>(x.size());
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = x[i] - t[i];
    s += std::abs(d);
    if (grad) (*grad)[i] = (d > 0.0 ? 1.0 : d < 0.0 ? -1.0 : 0.0) / n;
  }
  return s / n;
}

Adam::Adam(std::vector<Tensor*> params, const TrainConfig& cfg) : params_(std::move(params)), cfg_(cfg) {
  if (!(cfg.lr > 0.0)) throw Error(ErrorCode::InvalidInput, "learning rate must be > 0");
  for (Tensor* p : params_) {
    m_.emplace_back(p->size(), 0.0);
    v_.emplace_back(p->size(), 0.0);
  }
}

void Adam::step() {
  ++t_;
  const double c1 = 1.0 - std::pow(cfg_.beta1, t_);
  const double c2 = 1.0 - std::pow(cfg_.beta2, t_);
  for (std::size_t k = 0; k < params_.size(); ++k) {
    Tensor& p = *params_[k];
    ensure_grad(p);
    auto& m = m_[k];
    auto& v = v_[k];
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double g = p.grad[i];
      m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g;
      v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g * g;
      p.data[i] -= cfg_.lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + cfg_.eps);
    }
  }
}

std::array<double, 7> encode_pose(const Pose& p, const Vec2& c) {
  const auto q = p.orientation.xyzw();
  return {p.position.x() - c.x(), p.position.y() - c.y(), p.position.z(), q[0], q[1], q[2], q[3]};
}

ModelKind parse_model_kind(const std::string& s) {
  if (s == "pickability") return ModelKind::Pickability;
  if (s == "waypoint") return ModelKind::Waypoint;
  throw Error(ErrorCode::InvalidInput, "unknown model kind '" + s + "'");
}

const char* to_string(ModelKind k) { return k == ModelKind::Pickability ? "pickability" : "waypoint"; }

std::shared_ptr<const std::vector<double>> quantize_heightmap(const std::vector<double>& h) {
  auto out = std::make_shared<std::vector<double>>(h.size());
  for (std::size_t i = 0; i < h.size(); ++i) (*out)[i] = std::round(h[i] * 1e4) / 1e4;
  return out;
}

std::string record_to_json(const DatasetRecord& r) {
  json j;
  j["kind"] = to_string(r.kind);
  j["heightmap"] = r.heightmap ? *r.heightmap : std::vector<double>{};
  j["object_class"] = r.object_class;
  j["n_classes"] = r.n_classes;
  j["initial"] = r.initial;
  j["reorient"] = r.reorient;
  j["grasp"] = r.grasp;
  if (r.kind == ModelKind::Pickability) {
    j["labels"] = {{"pickable", r.pickable}};
  } else {
    j["labels"] = {{"v_grasp", r.v_grasp}, {"v_reorient", r.v_reorient}, {"v_traj", r.v_traj}, {"length", r.length}};
  }
  return j.dump();
}

DatasetRecord record_from_json(const std::string& line) {
  try {
    const json j = json::parse(line);
    DatasetRecord r;
    r.kind = parse_model_kind(j.at("kind").get<std::string>());
    auto hm = j.at("heightmap").get<std::vector<double>>();
    if (hm.size() != static_cast<std::size_t>(kHeightmapCells * kHeightmapCells))
      throw Error(ErrorCode::InvalidInput, "record heightmap must have 4096 cells");
    r.heightmap = std::make_shared<const std::vector<double>>(std::move(hm));
    r.object_class = j.at("object_class").get<int>();
    r.n_classes = j.at("n_classes").get<int>();
    r.initial = j.at("initial").get<std::array<double, 7>>();
    r.reorient = j.at("reorient").get<std::array<double, 7>>();
    r.grasp = j.at("grasp").get<std::array<double, 7>>();
    const json& l = j.at("labels");
    if (r.kind == ModelKind::Pickability) {
      r.pickable = l.at("pickable").get<int>();
    } else {
      r.v_grasp = l.at("v_grasp").get<int>();
      r.v_reorient = l.at("v_reorient").get<int>();
      r.v_traj = l.at("v_traj").get<int>();
      r.length = l.at("length").get<double>();
    }
    return r;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidInput, std::string("bad dataset record: ") + e.what());
  }
}

void save_dataset(const std::string& path, const std::vector<DatasetRecord>& records) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorCode::Io, "cannot write " + path);
  for (const DatasetRecord& r : records) f << record_to_json(r) << '\n';
  if (!f) throw Error(ErrorCode::Io, "write failed: " + path);
}

std::vector<DatasetRecord> load_dataset(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorCode::Io, "cannot read " + path);
  std::vector<DatasetRecord> out;
  std::map<std::vector<double>, std::shared_ptr<const std::vector<double>>> shared;
  std::string line;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    DatasetRecord r = record_from_json(line);
    auto [it, fresh] = shared.try_emplace(*r.heightmap, r.heightmap);
    r.heightmap = it->second;
    out.push_back(std::move(r));
  }
  return out;
}

Encoder::Encoder() {
  int in = 1;
  for (int c : kChannels) {
    convs.emplace_back(in, c);
    in = c;
  }
}

Tensor Encoder::forward(const std::vector<double>& heightmap, Cache* cache) const {
  require(heightmap.size() == static_cast<std::size_t>(kHeightmapCells * kHeightmapCells), "heightmap must be 64 x 64");
  Tensor x({1, kHeightmapCells, kHeightmapCells}, heightmap);
  if (cache) *cache = {};
  for (const Conv2d& conv : convs) {
    Tensor c = conv.forward(x);
    std::vector<int> am;
    Tensor p = maxpool2_forward(c, cache ? &am : nullptr);
    Tensor r = relu_forward(p);
    if (cache) {
      cache->inputs.push_back(std::move(x));
      cache->convs.push_back(std::move(c));
      cache->argmax.push_back(std::move(am));
      cache->pooled.push_back(std::move(p));
    }
    x = std::move(r);
  }
  x.shape = {static_cast<int>(x.size())};
  return x;
}

void Encoder::backward(const Cache& cache, const Tensor& dfeat) {
  Tensor g = dfeat;
  for (int i = static_cast<int>(convs.size()) - 1; i >= 0; --i) {
    g.shape = cache.pooled[i].shape;
    g = relu_backward(cache.pooled[i], g);
    g = maxpool2_backward(cache.convs[i].shape, cache.argmax[i], g);
    g = convs[i].backward(cache.inputs[i], g);
  }
}

std::vector<Tensor*> Encoder::params() {
  std::vector<Tensor*> out;
  for (Conv2d& c : convs) {
    out.push_back(&c.weight);
    out.push_back(&c.bias);
  }
  return out;
}

std::vector<const Tensor*> Encoder::params() const {
  std::vector<const Tensor*> out;
  for (const Conv2d& c : convs) {
    out.push_back(&c.weight);
    out.push_back(&c.bias);
  }
  return out;
}

Mlp::Mlp(int in, int out) : layers{Linear(in, 128), Linear(128, 64), Linear(64, out)} {}

Tensor Mlp::forward(const Tensor& x, Cache* cache) const {
  Tensor h1 = layers[0].forward(x);
  Tensor a1 = relu_forward(h1);
  Tensor h2 = layers[1].forward(a1);
  Tensor a2 = relu_forward(h2);
  Tensor out = layers[2].forward(a2);
  if (cache) *cache = {x, std::move(h1), std::move(a1), std::move(h2), std::move(a2)};
  return out;
}

Tensor Mlp::backward(const Cache& c, const Tensor& dout) {
  Tensor g = layers[2].backward(c.a2, dout);
  g = relu_backward(c.h2, g);
  g = layers[1].backward(c.a1, g);
  g = relu_backward(c.h1, g);
  return layers[0].backward(c.x, g);
}

std::vector<Tensor*> Mlp::params() {
  std::vector<Tensor*> out;
  for (Linear& l : layers) {
    out.push_back(&l.weight);
    out.push_back(&l.bias);
  }
  return out;
}

std::vector<const Tensor*> Mlp::params() const {
  std::vector<const Tensor*> out;
  for (const Linear& l : layers) {
    out.push_back(&l.weight);
    out.push_back(&l.bias);
  }
  return out;
}

SurrogateModel::SurrogateModel(ModelKind kind, int n_classes, std::uint64_t seed) : kind_(kind), n_classes_(n_classes) {
  if (n_classes < 1) throw Error(ErrorCode::InvalidInput, "model needs at least one class");
  mlp = Mlp(input_features(), outputs());
  Rng rng(seed);
  for (Conv2d& c : encoder.convs) xavier(c.weight, c.in_channels() * 9, c.out_channels() * 9, rng);
  for (Linear& l : mlp.layers) xavier(l.weight, l.in_features(), l.out_features(), rng);
}

Tensor SurrogateModel::mlp_input(const Tensor& features, const DatasetRecord& r) const {
  Tensor x({input_features()});
  std::size_t k = 0;
  for (double v : features.data) x.data[k++] = v;
  for (int c = 0; c < n_classes_; ++c) x.data[k++] = c == r.object_class ? 1.0 : 0.0;
  for (const auto* pose : {&r.initial, &r.reorient, &r.grasp})
    for (double v : *pose) x.data[k++] = v;
  return x;
}

EncodedContext SurrogateModel::encode(const std::vector<double>& heightmap, int object_class,
                                      const std::array<double, 7>& initial) const {
  if (object_class < 0 || object_class >= n_classes_) throw Error(ErrorCode::InvalidInput, "object class out of range");
  return {encoder.forward(heightmap), object_class, n_classes_, initial};
}

namespace {

ModelOutput to_output(ModelKind kind, const Tensor& out) {
  ModelOutput m;
  if (kind == ModelKind::Pickability) {
    m.pickable = sigmoid(out[0]);
  } else {
    m.v_grasp = sigmoid(out[0]);
    m.v_reorient = sigmoid(out[1]);
    m.v_traj = sigmoid(out[2]);
    m.length = out[3];
  }
  return m;
}

}  // namespace

ModelOutput SurrogateModel::predict(const EncodedContext& ctx, const std::array<double, 7>& reorient,
                                    const std::array<double, 7>& grasp) const {
  DatasetRecord r;
  r.object_class = ctx.object_class;
  r.initial = ctx.initial;
  r.reorient = reorient;
  r.grasp = grasp;
  return to_output(kind_, mlp.forward(mlp_input(ctx.features, r)));
}

ModelOutput SurrogateModel::predict(const DatasetRecord& r) const {
  const Tensor f = encoder.forward(*r.heightmap);
  return to_output(kind_, mlp.forward(mlp_input(f, r)));
}

double SurrogateModel::record_loss(const Tensor& out, const DatasetRecord& r, Tensor* dout) const {
  if (dout) *dout = Tensor(out.shape);
  if (kind_ == ModelKind::Pickability) {
    const double p = sigmoid(out[0]);
    std::vector<double> g;
    const double l = bce_loss({p}, {static_cast<double>(r.pickable)}, dout ? &g : nullptr);
    if (dout) dout->data[0] = g[0] * p * (1.0 - p);
    return l;
  }
  const std::vector<double> p{sigmoid(out[0]), sigmoid(out[1]), sigmoid(out[2])};
  const std::vector<double> y{static_cast<double>(r.v_grasp), static_cast<double>(r.v_reorient),
                              static_cast<double>(r.v_traj)};
  std::vector<double> g;
  double l = bce_loss(p, y, dout ? &g : nullptr);
  if (dout)
    for (int i = 0; i < 3; ++i) dout->data[i] = g[i] * p[i] * (1.0 - p[i]);
  if (r.v_traj == 1) {
    std::vector<double> gl;
    l += l1_loss({out[3]}, {r.length}, dout ? &gl : nullptr);
    if (dout) dout->data[3] = gl[0];
  }
  return l;
}

namespace {

template <class F>
void for_each_heightmap(const std::vector<const DatasetRecord*>& batch, F&& f) {
  std::map<const std::vector<double>*, std::vector<const DatasetRecord*>> groups;
  std::vector<const std::vector<double>*> order;
  for (const DatasetRecord* r : batch) {
    if (!r->heightmap) throw Error(ErrorCode::InvalidInput, "record without heightmap");
    auto [it, fresh] = groups.try_emplace(r->heightmap.get());
    if (fresh) order.push_back(r->heightmap.get());
    it->second.push_back(r);
  }
  for (const auto* key : order) f(*key, groups[key]);
}

}  // namespace

double SurrogateModel::loss_and_grad(const std::vector<const DatasetRecord*>& batch) {
  if (batch.empty()) return 0.0;
  const double n = static_cast<double>(batch.size());
  double total = 0.0;
  for_each_heightmap(batch, [&](const std::vector<double>& hm, const std::vector<const DatasetRecord*>& recs) {
    Encoder::Cache ec;
    const Tensor f = encoder.forward(hm, &ec);
    Tensor dfeat({static_cast<int>(f.size())});
    for (const DatasetRecord* r : recs) {
      Mlp::Cache mc;
      const Tensor out = mlp.forward(mlp_input(f, *r), &mc);
      Tensor dout;
      total += record_loss(out, *r, &dout);
      for (double& v : dout.data) v /= n;
      const Tensor dx = mlp.backward(mc, dout);
      for (std::size_t i = 0; i < dfeat.size(); ++i) dfeat.data[i] += dx.data[i];
    }
    encoder.backward(ec, dfeat);
  });
  return total / n;
}

double SurrogateModel::loss(const std::vector<const DatasetRecord*>& batch) const {
  if (batch.empty()) return 0.0;
  double total = 0.0;
  for_each_heightmap(batch, [&](const std::vector<double>& hm, const std::vector<const DatasetRecord*>& recs) {
    const Tensor f = encoder.forward(hm);
    for (const DatasetRecord* r : recs) total += record_loss(mlp.forward(mlp_input(f, *r)), *r, nullptr);
  });
  return total / static_cast<double>(batch.size());
}

std::vector<Tensor*> SurrogateModel::params() {
  auto out = encoder.params();
  for (Tensor* t : mlp.params()) out.push_back(t);
  return out;
}

std::vector<const Tensor*> SurrogateModel::params() const {
  auto out = encoder.params();
  for (const Tensor* t : mlp.params()) out.push_back(t);
  return out;
}

void SurrogateModel::zero_grad() {
  for (Tensor* t : params()) t->zero_grad();
}

std::string SurrogateModel::to_json() const {
  json j;
  j["arch"] = {{"kind", to_string(kind_)},
               {"n_classes", n_classes_},
               {"encoder_channels", Encoder::kChannels},
               {"mlp", {input_features(), 128, 64, outputs()}}};
  j["layers"] = json::array();
  for (const Tensor* t : params()) j["layers"].push_back({{"shape", t->shape}, {"values", t->data}});
  return j.dump();
}

SurrogateModel SurrogateModel::from_json(const std::string& text) {
  try {
    const json j = json::parse(text);
    const json& a = j.at("arch");
    SurrogateModel m(parse_model_kind(a.at("kind").get<std::string>()), a.at("n_classes").get<int>(), 0);
    const json& layers = j.at("layers");
    auto ps = m.params();
    if (layers.size() != ps.size()) throw Error(ErrorCode::ShapeMismatch, "weights file has wrong layer count");
    for (std::size_t i = 0; i < ps.size(); ++i) {
      const auto shape = layers[i].at("shape").get<std::vector<int>>();
      if (shape != ps[i]->shape) throw Error(ErrorCode::ShapeMismatch, "layer " + std::to_string(i) + " shape");
      *ps[i] = Tensor(shape, layers[i].at("values").get<std::vector<double>>());
      ps[i]->zero_grad();
    }
    return m;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidInput, std::string("bad weights file: ") + e.what());
  }
}

void SurrogateModel::save(const std::string& path) const {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorCode::Io, "cannot write " + path);
  f << to_json() << '\n';
}

SurrogateModel SurrogateModel::load(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorCode::Io, "cannot read " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return from_json(ss.str());
}

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_indices(std::size_t n, double val_fraction,
                                                                            std::uint64_t seed) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng(mix_seed(seed, 0x5911));
  for (std::size_t i = n; i > 1; --i) std::swap(idx[i - 1], idx[rng.index(i)]);
  std::size_t n_val = static_cast<std::size_t>(std::llround(val_fraction * static_cast<double>(n)));
  if (n >= 2) n_val = std::clamp<std::size_t>(n_val, 1, n - 1);
  else n_val = 0;
  std::vector<std::size_t> val(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_val));
  std::vector<std::size_t> tr(idx.begin() + static_cast<std::ptrdiff_t>(n_val), idx.end());
  return {tr, val};
}

namespace {

template <class T>
void shuffle(std::vector<T>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[rng.index(i)]);
}

/// Shuffled mini-batches. With heightmaps_per_batch = k > 0 each batch joins k
/// shuffled chunks of batch_size / k records that share one heightmap, so the
/// encoder runs k times per batch.
std::vector<std::vector<const DatasetRecord*>> epoch_batches(const std::vector<DatasetRecord>& data,
                                                             std::vector<std::size_t>& tr, const TrainConfig& cfg,
                                                             Rng& rng) {
  const std::size_t bs = static_cast<std::size_t>(cfg.batch_size);
  std::vector<std::vector<const DatasetRecord*>> out;
  shuffle(tr, rng);
  if (cfg.heightmaps_per_batch <= 0) {
    for (std::size_t b = 0; b < tr.size(); b += bs) {
      out.emplace_back();
      for (std::size_t k = b; k < std::min(tr.size(), b + bs); ++k) out.back().push_back(&data[tr[k]]);
    }
    return out;
  }
  const std::size_t chunk = std::max<std::size_t>(1, bs / static_cast<std::size_t>(cfg.heightmaps_per_batch));
  std::map<const std::vector<double>*, std::vector<const DatasetRecord*>> groups;
  std::vector<const std::vector<double>*> order;
  for (std::size_t i : tr) {
    auto [it, fresh] = groups.try_emplace(data[i].heightmap.get());
    if (fresh) order.push_back(data[i].heightmap.get());
    it->second.push_back(&data[i]);
  }
  std::vector<std::vector<const DatasetRecord*>> chunks;
  for (const auto* key : order) {
    const auto& g = groups[key];
    for (std::size_t b = 0; b < g.size(); b += chunk)
      chunks.emplace_back(g.begin() + static_cast<std::ptrdiff_t>(b),
                          g.begin() + static_cast<std::ptrdiff_t>(std::min(g.size(), b + chunk)));
  }
  shuffle(chunks, rng);
  for (std::size_t c = 0; c < chunks.size(); ++c) {
    if (c % static_cast<std::size_t>(cfg.heightmaps_per_batch) == 0) out.emplace_back();
    out.back().insert(out.back().end(), chunks[c].begin(), chunks[c].end());
  }
  return out;
}

}  // namespace

SurrogateModel train(ModelKind kind, const std::vector<DatasetRecord>& data, const TrainConfig& cfg,
                     TrainReport* report, int n_classes) {
  if (data.empty()) throw Error(ErrorCode::EmptyDataset, "no training records");
  if (!(cfg.lr > 0.0) || cfg.batch_size < 1 || cfg.epochs < 1)
    throw Error(ErrorCode::InvalidInput, "lr, batch size and epochs must be positive");
  for (const DatasetRecord& r : data)
    if (r.kind != kind) throw Error(ErrorCode::InvalidInput, "dataset kind does not match the model kind");
  SurrogateModel model(kind, n_classes, cfg.seed);
  auto [tr, val] = split_indices(data.size(), cfg.validation_fraction, cfg.seed);
  if (val.empty()) val = tr;
  std::vector<const DatasetRecord*> val_set;
  for (std::size_t i : val) val_set.push_back(&data[i]);

  Adam opt(model.params(), cfg);
  Rng rng(mix_seed(cfg.seed, 0xabcd));
  std::string best = model.to_json();
  double best_val = model.loss(val_set);
  int since = 0;
  TrainReport rep;
  rep.n_train = tr.size();
  rep.n_val = val.size();
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    double sum = 0.0;
    for (const auto& batch : epoch_batches(data, tr, cfg, rng)) {
      model.zero_grad();
      sum += model.loss_and_grad(batch) * static_cast<double>(batch.size());
      opt.step();
    }
    rep.train_loss.push_back(sum / static_cast<double>(tr.size()));
    const double v = model.loss(val_set);
    rep.val_loss.push_back(v);
    if (v < best_val - cfg.min_delta) {
      best_val = v;
      best = model.to_json();
      rep.best_epoch = epoch;
      since = 0;
    } else if (++since >= cfg.patience) {
      break;
    }
  }
  if (report) *report = rep;
  return SurrogateModel::from_json(best);
}

std::vector<std::size_t> select_top_k(const std::vector<double>& scores, std::size_t k) {
  if (k < 1) throw Error(ErrorCode::InvalidInput, "select_top_k needs k >= 1");
  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), 0);
  const std::size_t m = std::min(k, idx.size());
  std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(m), idx.end(),
                    [&](std::size_t a, std::size_t b) { return scores[a] > scores[b] || (scores[a] == scores[b] && a < b); });
  idx.resize(m);
  return idx;
}

std::vector<std::size_t> select_waypoints(const std::vector<double>& validity, const std::vector<double>& length,
                                          std::size_t k) {
  if (validity.size() != length.size()) throw Error(ErrorCode::ShapeMismatch, "validity and length sizes");
  auto idx = select_top_k(validity, k);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return length[a] < length[b]; });
  return idx;
}

double roc_auc(const std::vector<double>& scores, const std::vector<int>& labels) {
  if (scores.size() != labels.size()) throw Error(ErrorCode::ShapeMismatch, "roc_auc sizes");
  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double pos = 0, neg = 0, rank_sum = 0;
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j < idx.size() && scores[idx[j]] == scores[idx[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j + 1);  // 1-based average rank
    for (std::size_t k = i; k < j; ++k)
      if (labels[idx[k]]) rank_sum += avg;
    i = j;
  }
  for (int l : labels) (l ? pos : neg) += 1.0;
  if (pos == 0 || neg == 0) return 0.5;
  return (rank_sum - pos * (pos + 1) / 2.0) / (pos * neg);
}

}  // namespace reorient
