#include "doctest.h"

#include "reorient/error.hpp"
#include "reorient/learn.hpp"
#include "reorient/random.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

using namespace reorient;

namespace {

Tensor random_tensor(std::vector<int> shape, Rng& rng) {
  Tensor t(std::move(shape));
  for (double& v : t.data) v = rng.uniform(-1.0, 1.0);
  return t;
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

// Norm-wise relative error between two gradient vectors.
double rel_error(const std::vector<double>& a, const std::vector<double>& b) {
  double diff = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - b[i]) * (a[i] - b[i]);
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  return std::sqrt(diff) / std::max({std::sqrt(na), std::sqrt(nb), 1e-300});
}

// Central differences of f with respect to every entry of `x`.
std::vector<double> numeric_grad(std::vector<double>& x, const std::function<double()>& f, double h = 1e-6) {
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double v = x[i];
    x[i] = v + h;
    const double fp = f();
    x[i] = v - h;
    const double fm = f();
    x[i] = v;
    g[i] = (fp - fm) / (2 * h);
  }
  return g;
}

std::shared_ptr<const std::vector<double>> random_heightmap(Rng& rng) {
  std::vector<double> h(kHeightmapCells * kHeightmapCells);
  for (double& v : h) v = rng.uniform(0.0, 0.2);
  return std::make_shared<const std::vector<double>>(std::move(h));
}

std::array<double, 7> random_pose(Rng& rng) {
  std::array<double, 7> p{};
  for (int i = 0; i < 3; ++i) p[i] = rng.uniform(-0.3, 0.3);
  const UnitQuat q(rng.normal(), rng.normal(), rng.normal(), rng.normal());
  p[3] = q.x(), p[4] = q.y(), p[5] = q.z(), p[6] = q.w();
  return p;
}

DatasetRecord random_record(ModelKind kind, Rng& rng, std::shared_ptr<const std::vector<double>> hm) {
  DatasetRecord r;
  r.kind = kind;
  r.heightmap = std::move(hm);
  r.object_class = static_cast<int>(rng.index(6));
  r.initial = random_pose(rng);
  r.reorient = random_pose(rng);
  r.grasp = random_pose(rng);
  r.pickable = static_cast<int>(rng.index(2));
  r.v_grasp = static_cast<int>(rng.index(2));
  r.v_reorient = static_cast<int>(rng.index(2));
  r.v_traj = static_cast<int>(rng.index(2));
  r.length = rng.uniform(1.0, 5.0);
  return r;
}

std::vector<const DatasetRecord*> pointers(const std::vector<DatasetRecord>& v) {
  std::vector<const DatasetRecord*> out;
  for (const auto& r : v) out.push_back(&r);
  return out;
}

void check_model_gradient(ModelKind kind) {
  Rng rng(kind == ModelKind::Pickability ? 11 : 12);
  const auto hm_a = random_heightmap(rng), hm_b = random_heightmap(rng);
  std::vector<DatasetRecord> recs;
  for (int i = 0; i < 4; ++i) recs.push_back(random_record(kind, rng, i < 2 ? hm_a : hm_b));
  if (kind == ModelKind::Waypoint) recs[0].v_traj = recs[1].v_traj = 1;
  const auto batch = pointers(recs);
  SurrogateModel m(kind, 6, 5);
  m.zero_grad();
  m.loss_and_grad(batch);
  // Probe a seeded subset of every tensor; a full sweep would take minutes.
  std::vector<double> analytic, numeric;
  for (Tensor* t : m.params()) {
    for (int k = 0; k < 12; ++k) {
      const std::size_t i = rng.index(t->size());
      const double v = t->data[i];
      t->data[i] = v + 1e-6;
      const double fp = m.loss(batch);
      t->data[i] = v - 1e-6;
      const double fm = m.loss(batch);
      t->data[i] = v;
      analytic.push_back(t->grad[i]);
      numeric.push_back((fp - fm) / 2e-6);
    }
  }
  CHECK(rel_error(analytic, numeric) < 1e-4);
}

}  // namespace

TEST_CASE("identity kernel leaves a map unchanged") {
  Rng rng(1);
  Conv2d c(3, 3);
  for (int o = 0; o < 3; ++o) c.weight.data[(o * 3 + o) * 9 + 4] = 1.0;
  const Tensor x = random_tensor({3, 6, 5}, rng);
  const Tensor y = c.forward(x);
  CHECK(y.shape == x.shape);
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(y.data[i] == x.data[i]);
}

TEST_CASE("maxpool of a constant map is constant at half resolution") {
  const Tensor x({2, 8, 6}, 0.37);
  const Tensor y = maxpool2_forward(x);
  CHECK(y.shape == std::vector<int>({2, 4, 3}));
  for (double v : y.data) CHECK(v == 0.37);
}

TEST_CASE("shape errors") {
  Conv2d c(2, 4);
  CHECK_THROWS_AS(c.forward(Tensor({3, 4, 4})), Error);
  CHECK_THROWS_AS(maxpool2_forward(Tensor({1, 3, 4})), Error);
  Linear l(5, 2);
  CHECK_THROWS_AS(l.forward(Tensor({4})), Error);
  try {
    c.forward(Tensor({3, 4, 4}));
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ShapeMismatch);
  }
}

TEST_CASE("layer gradients match central differences") {
  Rng rng(3);
  SUBCASE("conv") {
    Conv2d c(2, 3);
    c.weight = random_tensor({3, 2, 3, 3}, rng);
    c.bias = random_tensor({3}, rng);
    Tensor x = random_tensor({2, 5, 4}, rng);
    const Tensor w = random_tensor({3, 5, 4}, rng);
    c.weight.zero_grad();
    c.bias.zero_grad();
    const Tensor dx = c.backward(x, w);
    auto f = [&] { return dot(c.forward(x).data, w.data); };
    CHECK(rel_error(dx.data, numeric_grad(x.data, f)) < 1e-5);
    CHECK(rel_error(c.weight.grad, numeric_grad(c.weight.data, f)) < 1e-5);
    CHECK(rel_error(c.bias.grad, numeric_grad(c.bias.data, f)) < 1e-5);
  }
  SUBCASE("maxpool") {
    Tensor x = random_tensor({2, 4, 6}, rng);
    const Tensor w = random_tensor({2, 2, 3}, rng);
    std::vector<int> am;
    maxpool2_forward(x, &am);
    const Tensor dx = maxpool2_backward(x.shape, am, w);
    auto f = [&] { return dot(maxpool2_forward(x).data, w.data); };
    CHECK(rel_error(dx.data, numeric_grad(x.data, f)) < 1e-5);
  }
  SUBCASE("relu") {
    Tensor x = random_tensor({17}, rng);
    const Tensor w = random_tensor({17}, rng);
    const Tensor dx = relu_backward(x, w);
    auto f = [&] { return dot(relu_forward(x).data, w.data); };
    CHECK(rel_error(dx.data, numeric_grad(x.data, f)) < 1e-5);
  }
  SUBCASE("linear") {
    Linear l(6, 4);
    l.weight = random_tensor({4, 6}, rng);
    l.bias = random_tensor({4}, rng);
    l.weight.zero_grad();
    l.bias.zero_grad();
    Tensor x = random_tensor({6}, rng);
    const Tensor w = random_tensor({4}, rng);
    const Tensor dx = l.backward(x, w);
    auto f = [&] { return dot(l.forward(x).data, w.data); };
    CHECK(rel_error(dx.data, numeric_grad(x.data, f)) < 1e-5);
    CHECK(rel_error(l.weight.grad, numeric_grad(l.weight.data, f)) < 1e-5);
    CHECK(rel_error(l.bias.grad, numeric_grad(l.bias.data, f)) < 1e-5);
  }
  SUBCASE("sigmoid") {
    Tensor x = random_tensor({9}, rng);
    for (double& v : x.data) v *= 4.0;
    const Tensor w = random_tensor({9}, rng);
    const Tensor dx = sigmoid_backward(sigmoid_forward(x), w);
    auto f = [&] { return dot(sigmoid_forward(x).data, w.data); };
    CHECK(rel_error(dx.data, numeric_grad(x.data, f)) < 1e-5);
  }
  SUBCASE("bce and l1") {
    std::vector<double> p{0.1, 0.45, 0.8, 0.99}, y{0, 1, 1, 0}, g;
    bce_loss(p, y, &g);
    CHECK(rel_error(g, numeric_grad(p, [&] { return bce_loss(p, y); })) < 1e-5);
    std::vector<double> x{0.3, -1.2, 2.5}, t{0.1, 0.4, 2.0}, gl;
    l1_loss(x, t, &gl);
    CHECK(rel_error(gl, numeric_grad(x, [&] { return l1_loss(x, t); })) < 1e-5);
  }
}

TEST_CASE("full models pass an end-to-end gradient check") {
  check_model_gradient(ModelKind::Pickability);
  check_model_gradient(ModelKind::Waypoint);
}

TEST_CASE("binary cross-entropy values") {
  CHECK(std::abs(bce_loss({0.5}, {0.0}) - std::log(2.0)) < 1e-12);
  CHECK(std::abs(bce_loss({0.5}, {1.0}) - std::log(2.0)) < 1e-12);
  CHECK(std::abs(bce_loss({0.5, 0.5}, {1.0, 0.0}) - std::log(2.0)) < 1e-12);
  CHECK(bce_loss({1.0}, {1.0}) < 1e-6);
  CHECK(bce_loss({0.0}, {0.0}) < 1e-6);
  CHECK(std::isfinite(bce_loss({0.0}, {1.0})));
  CHECK(l1_loss({1.0, 3.0}, {2.0, 1.0}) == doctest::Approx(1.5));
}

TEST_CASE("sigmoid is stable for large inputs") {
  CHECK(sigmoid(800.0) == 1.0);
  CHECK(sigmoid(-800.0) >= 0.0);
  CHECK(sigmoid(0.0) == 0.5);
}

TEST_CASE("Adam first step, zero gradients and a quadratic bowl") {
  TrainConfig cfg;
  Rng rng(4);
  Tensor w = random_tensor({10}, rng);
  w.zero_grad();
  const Tensor w0 = w;
  for (std::size_t i = 0; i < w.size(); ++i) w.grad[i] = rng.uniform(-5.0, 5.0);
  Adam opt({&w}, cfg);
  opt.step();
  for (std::size_t i = 0; i < w.size(); ++i) CHECK(std::abs(w.data[i] - w0.data[i]) == doctest::Approx(cfg.lr).epsilon(1e-6));

  Tensor z = random_tensor({5}, rng);
  z.zero_grad();
  const Tensor z0 = z;
  Adam still({&z}, cfg);
  for (int i = 0; i < 20; ++i) still.step();
  CHECK(z.data == z0.data);

  Tensor b = random_tensor({8}, rng);
  for (double& v : b.data) v *= 0.3;
  b.zero_grad();
  auto f = [&] { return dot(b.data, b.data); };
  const double f0 = f();
  Adam bowl({&b}, cfg);
  for (int i = 0; i < 500; ++i) {
    for (std::size_t k = 0; k < b.size(); ++k) b.grad[k] = 2 * b.data[k];
    bowl.step();
  }
  CHECK(f() <= 0.01 * f0);
  CHECK(bowl.steps() == 500);
}

TEST_CASE("pose encoding is relative to the heightmap center") {
  Rng rng(6);
  for (int i = 0; i < 50; ++i) {
    const Pose p{Vec3(rng.uniform(0, 1), rng.uniform(-1, 1), rng.uniform(0, 0.3)),
                 UnitQuat(rng.normal(), rng.normal(), rng.normal(), rng.normal())};
    const Vec2 c(rng.uniform(0, 1), rng.uniform(-1, 1));
    const Vec2 shift(rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5));
    Pose moved = p;
    moved.position.head<2>() += shift;
    const auto a = encode_pose(p, c), b = encode_pose(moved, c + shift);
    for (int k = 0; k < 7; ++k) CHECK(a[k] == doctest::Approx(b[k]).epsilon(1e-12));
    CHECK(a[6] >= 0.0);
  }
}

TEST_CASE("model outputs are probabilities and a finite length") {
  Rng rng(7);
  const auto hm = random_heightmap(rng);
  const SurrogateModel m(ModelKind::Waypoint, 6, 2);
  for (int i = 0; i < 10; ++i) {
    const ModelOutput o = m.predict(random_record(ModelKind::Waypoint, rng, hm));
    for (double p : {o.v_grasp, o.v_reorient, o.v_traj}) CHECK((p > 0.0 && p < 1.0));
    CHECK(std::isfinite(o.length));
  }
  const DatasetRecord r = random_record(ModelKind::Waypoint, rng, hm);
  const EncodedContext ctx = m.encode(*hm, r.object_class, r.initial);
  const ModelOutput a = m.predict(ctx, r.reorient, r.grasp), b = m.predict(r);
  CHECK(a.v_traj == b.v_traj);
  CHECK(a.length == b.length);
}

TEST_CASE("training separates a linearly separable toy set") {
  Rng rng(8);
  const auto hm_a = random_heightmap(rng), hm_b = random_heightmap(rng);
  std::vector<DatasetRecord> data;
  for (int i = 0; i < 600; ++i) {
    DatasetRecord r = random_record(ModelKind::Pickability, rng, i % 2 ? hm_a : hm_b);
    const double s = rng.uniform(0.05, 0.3);
    r.pickable = static_cast<int>(rng.index(2));
    r.reorient[0] = r.pickable ? s : -s;
    data.push_back(r);
  }
  TrainConfig cfg;
  cfg.seed = 3;
  cfg.epochs = 60;
  TrainReport rep;
  const SurrogateModel m = train(ModelKind::Pickability, data, cfg, &rep);
  const auto [tr, val] = split_indices(data.size(), cfg.validation_fraction, cfg.seed);
  CHECK(val.size() == 60);
  CHECK(rep.n_train == 540);
  int correct = 0;
  for (std::size_t i : val) correct += (m.predict(data[i]).pickable > 0.5) == (data[i].pickable == 1);
  CHECK(static_cast<double>(correct) / static_cast<double>(val.size()) >= 0.99);
}

TEST_CASE("a duplicated record is memorized") {
  Rng rng(9);
  const DatasetRecord r = random_record(ModelKind::Pickability, rng, random_heightmap(rng));
  const std::vector<DatasetRecord> data(64, r);
  TrainConfig cfg;
  cfg.epochs = 150;
  cfg.batch_size = 16;
  TrainReport rep;
  train(ModelKind::Pickability, data, cfg, &rep);
  CHECK(*std::min_element(rep.train_loss.begin(), rep.train_loss.end()) < 1e-3);
}

TEST_CASE("seeded training is reproducible") {
  Rng rng(10);
  const auto hm = random_heightmap(rng);
  std::vector<DatasetRecord> data;
  for (int i = 0; i < 80; ++i) data.push_back(random_record(ModelKind::Waypoint, rng, hm));
  TrainConfig cfg;
  cfg.epochs = 3;
  cfg.seed = 21;
  const std::string a = train(ModelKind::Waypoint, data, cfg).to_json();
  const std::string b = train(ModelKind::Waypoint, data, cfg).to_json();
  CHECK(a == b);
  cfg.seed = 22;
  CHECK(train(ModelKind::Waypoint, data, cfg).to_json() != a);
}

TEST_CASE("training input errors") {
  TrainConfig cfg;
  try {
    train(ModelKind::Pickability, {}, cfg);
    FAIL("expected EmptyDataset");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::EmptyDataset);
  }
  Rng rng(1);
  const std::vector<DatasetRecord> wp{random_record(ModelKind::Waypoint, rng, random_heightmap(rng))};
  CHECK_THROWS_AS(train(ModelKind::Pickability, wp, cfg), Error);
  cfg.lr = 0.0;
  CHECK_THROWS_AS(train(ModelKind::Waypoint, wp, cfg), Error);
}

TEST_CASE("validation split is a seeded 90/10 partition") {
  const auto [tr, val] = split_indices(1000, 0.1, 4);
  CHECK(val.size() == 100);
  CHECK(tr.size() == 900);
  std::vector<std::size_t> all = tr;
  all.insert(all.end(), val.begin(), val.end());
  std::sort(all.begin(), all.end());
  for (std::size_t i = 0; i < all.size(); ++i) CHECK(all[i] == i);
  CHECK(split_indices(1000, 0.1, 4).second == val);
}

TEST_CASE("top-k selection") {
  const std::vector<double> s{0.2, 0.9, 0.5, 0.9, 0.1};
  CHECK(select_top_k(s, 10) == std::vector<std::size_t>({1, 3, 2, 0, 4}));
  CHECK(select_top_k(std::vector<double>(6, 0.5), 3) == std::vector<std::size_t>({0, 1, 2}));
  CHECK_THROWS_AS(select_top_k(s, 0), Error);

  Rng rng(13);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> scores(200);
    for (double& v : scores) v = std::round(rng.uniform(0, 50)) / 50.0;
    const std::size_t k = 1 + rng.index(60);
    std::vector<std::size_t> oracle(scores.size());
    std::iota(oracle.begin(), oracle.end(), 0);
    std::stable_sort(oracle.begin(), oracle.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    oracle.resize(k);
    CHECK(select_top_k(scores, k) == oracle);
  }
}

TEST_CASE("waypoint selection orders the top validities by length") {
  const std::vector<double> v{0.9, 0.1, 0.8, 0.95, 0.7};
  const std::vector<double> len{3.0, 0.5, 1.0, 2.0, 0.2};
  CHECK(select_waypoints(v, len, 3) == std::vector<std::size_t>({2, 3, 0}));
  CHECK(select_waypoints(v, len, 10).size() == 5);
}

TEST_CASE("ROC-AUC against a pairwise oracle") {
  CHECK(roc_auc({0.1, 0.4, 0.6, 0.9}, {0, 0, 1, 1}) == 1.0);
  CHECK(roc_auc({0.9, 0.6, 0.4, 0.1}, {0, 0, 1, 1}) == 0.0);
  CHECK(roc_auc({0.5, 0.5, 0.5}, {0, 1, 1}) == 0.5);
  CHECK(roc_auc({0.3, 0.7}, {1, 1}) == 0.5);
  Rng rng(14);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> s(150);
    std::vector<int> y(150);
    for (std::size_t i = 0; i < s.size(); ++i) {
      y[i] = static_cast<int>(rng.index(2));
      s[i] = std::round(rng.uniform(0, 10) + 3 * y[i]) / 10.0;
    }
    double wins = 0, pairs = 0;
    for (std::size_t i = 0; i < s.size(); ++i)
      for (std::size_t j = 0; j < s.size(); ++j)
        if (y[i] == 1 && y[j] == 0) {
          pairs += 1;
          wins += s[i] > s[j] ? 1.0 : s[i] == s[j] ? 0.5 : 0.0;
        }
    CHECK(roc_auc(s, y) == doctest::Approx(wins / pairs).epsilon(1e-12));
  }
}

TEST_CASE("weights round-trip through JSON") {
  Rng rng(15);
  const SurrogateModel m(ModelKind::Waypoint, 6, 30);
  const SurrogateModel back = SurrogateModel::from_json(m.to_json());
  CHECK(back.to_json() == m.to_json());
  const DatasetRecord r = random_record(ModelKind::Waypoint, rng, random_heightmap(rng));
  CHECK(back.predict(r).v_traj == m.predict(r).v_traj);
  CHECK_THROWS_AS(SurrogateModel::from_json("{\"arch\": 1}"), Error);
  const SurrogateModel p(ModelKind::Pickability, 6, 1);
  std::string text = p.to_json();
  CHECK_THROWS_AS(SurrogateModel::from_json(text.replace(text.find("pickability"), 11, "waypoint")), Error);
}

TEST_CASE("dataset records round-trip through JSON lines") {
  Rng rng(16);
  const auto hm = quantize_heightmap(*random_heightmap(rng));
  std::vector<DatasetRecord> recs;
  for (int i = 0; i < 5; ++i) recs.push_back(random_record(ModelKind::Waypoint, rng, hm));
  const std::string path = "test_learn_records.jsonl";
  save_dataset(path, recs);
  const auto back = load_dataset(path);
  REQUIRE(back.size() == recs.size());
  for (std::size_t i = 0; i < recs.size(); ++i) {
    CHECK(*back[i].heightmap == *recs[i].heightmap);
    CHECK(back[i].object_class == recs[i].object_class);
    CHECK(back[i].reorient == recs[i].reorient);
    CHECK(back[i].v_traj == recs[i].v_traj);
    CHECK(back[i].length == recs[i].length);
    CHECK(record_to_json(back[i]) == record_to_json(recs[i]));
  }
  CHECK(back[0].heightmap.get() == back[4].heightmap.get());
  std::remove(path.c_str());
  CHECK_THROWS_AS(record_from_json("{}"), Error);
}
