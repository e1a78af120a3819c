#pragma once

// Helpers shared by the unit tests and the acceptance runner: random
// inputs, finite-difference cases for every layer op, and brute-force
// reference implementations written independently of the library code.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <numbers>
#include <numeric>
#include <string>
#include <vector>

#include "placefuse/evaluation.hpp"
#include "placefuse/gradcheck.hpp"
#include "placefuse/nets.hpp"
#include "placefuse/ops.hpp"
#include "placefuse/random.hpp"
#include "placefuse/training.hpp"
#include "placefuse/voxel.hpp"

namespace testsupport {

using namespace placefuse;

inline Tensor random_tensor(const Shape& shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t(shape);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(lo, hi);
  return t;
}

// Entries with |x| >= gap, so a central difference never straddles a kink at 0.
inline Tensor random_away_from_zero(const Shape& shape, Rng& rng, double gap) {
  Tensor t(shape);
  for (std::size_t i = 0; i < t.size(); ++i) {
    const double mag = rng.uniform(gap, 1.0);
    t[i] = rng.index(2) == 0 ? mag : -mag;
  }
  return t;
}

// Pairwise distinct entries spaced at least 2/size apart.
inline Tensor random_distinct(const Shape& shape, Rng& rng) {
  Tensor t(shape);
  std::vector<std::size_t> order(t.size());
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(order);
  for (std::size_t i = 0; i < t.size(); ++i) {
    t[i] = -1.0 + 2.0 * static_cast<double>(order[i]) / static_cast<double>(t.size());
  }
  return t;
}

inline std::size_t pick(Rng& rng, std::size_t lo, std::size_t hi) {
  return lo + static_cast<std::size_t>(rng.index(hi - lo + 1));
}

struct GradResult {
  double max_rel_error = 0.0;
  bool pass = true;
};

inline void merge(GradResult& r, const GradCheckReport& rep) {
  r.max_rel_error = std::max(r.max_rel_error, rep.max_rel_error);
  r.pass = r.pass && rep.pass;
}

constexpr double kStep = 1e-4;
constexpr double kTol = 1e-3;

// One random instance of each op, checked with respect to every input.
inline GradResult grad_case(const std::string& op, std::uint64_t seed) {
  Rng rng(seed);
  GradResult r;
  auto check = [&](const DifferentiableOp& f, const Tensor& x) {
    const Tensor out = f.forward(x);
    const Tensor probe = random_tensor(out.shape(), rng, 0.5, 1.5);
    merge(r, finite_diff_check(f, x, kStep, kTol, probe));
  };

  if (op == "conv2d" || op == "conv3d") {
    const bool vol = op == "conv3d";
    const std::size_t cin = pick(rng, 1, 3), cout = pick(rng, 1, 3);
    Shape in{cin}, k{cout, cin, 3, 3};
    if (vol) k.push_back(3);
    for (int a = 0; a < (vol ? 3 : 2); ++a) in.push_back(pick(rng, vol ? 2 : 3, vol ? 4 : 6));
    const Tensor x = random_tensor(in, rng), w = random_tensor(k, rng), b = random_tensor({cout}, rng);
    auto fwd = [vol](const Tensor& a, const Tensor& kk, const Tensor& bb) {
      return vol ? conv3d(a, kk, bb) : conv2d(a, kk, bb);
    };
    auto bwd = [vol](const Tensor& a, const Tensor& kk, const Tensor& g) {
      return vol ? conv3d_backward(a, kk, g) : conv2d_backward(a, kk, g);
    };
    check({[&](const Tensor& a) { return fwd(a, w, b); },
           [&](const Tensor& a, const Tensor& g) { return bwd(a, w, g).input; }},
          x);
    check({[&](const Tensor& kk) { return fwd(x, kk, b); },
           [&](const Tensor& kk, const Tensor& g) { return bwd(x, kk, g).kernel; }},
          w);
    check({[&](const Tensor& bb) { return fwd(x, w, bb); },
           [&](const Tensor&, const Tensor& g) { return bwd(x, w, g).bias; }},
          b);
  } else if (op == "maxpool2d") {
    const Tensor x = random_distinct({pick(rng, 1, 3), 2 * pick(rng, 1, 3), 2 * pick(rng, 1, 3)}, rng);
    check({[](const Tensor& a) { return maxpool2d(a); },
           [](const Tensor& a, const Tensor& g) { return maxpool2d_backward(a, g); }},
          x);
  } else if (op == "avgpool3d") {
    const Tensor x = random_tensor(
        {pick(rng, 1, 2), 2 * pick(rng, 1, 2), 2 * pick(rng, 1, 2), 2 * pick(rng, 1, 2)}, rng);
    check({[](const Tensor& a) { return avgpool3d(a); },
           [](const Tensor& a, const Tensor& g) { return avgpool3d_backward(a, g); }},
          x);
  } else if (op == "relu") {
    const Tensor x = random_away_from_zero({pick(rng, 1, 3), pick(rng, 2, 6)}, rng, 1e-2);
    check({[](const Tensor& a) { return relu(a); },
           [](const Tensor& a, const Tensor& g) { return relu_backward(a, g); }},
          x);
  } else if (op == "fully_connected") {
    const std::size_t n = pick(rng, 2, 8), m = pick(rng, 1, 6);
    const Tensor x = random_tensor({n}, rng), w = random_tensor({m, n}, rng), b = random_tensor({m}, rng);
    check({[&](const Tensor& a) { return fully_connected(a, w, b); },
           [&](const Tensor& a, const Tensor& g) { return fully_connected_backward(a, w, g).input; }},
          x);
    check({[&](const Tensor& ww) { return fully_connected(x, ww, b); },
           [&](const Tensor& ww, const Tensor& g) { return fully_connected_backward(x, ww, g).weight; }},
          w);
    check({[&](const Tensor& bb) { return fully_connected(x, w, bb); },
           [&](const Tensor&, const Tensor& g) { return fully_connected_backward(x, w, g).bias; }},
          b);
  } else if (op == "global_avg_pool") {
    Shape s{pick(rng, 1, 4)};
    const std::size_t spatial = pick(rng, 1, 3);
    for (std::size_t a = 0; a < spatial; ++a) s.push_back(pick(rng, 1, 5));
    check({[](const Tensor& a) { return global_avg_pool(a); },
           [](const Tensor& a, const Tensor& g) { return global_avg_pool_backward(a, g); }},
          random_tensor(s, rng));
  } else if (op == "l1_distance") {
    const std::size_t n = pick(rng, 2, 10);
    const Tensor a = random_tensor({n}, rng);
    const Tensor delta = random_away_from_zero({n}, rng, 1e-2);
    Tensor b(Shape{n});
    for (std::size_t i = 0; i < n; ++i) b[i] = a[i] + delta[i];
    auto scalar = [](double v) { return Tensor(Shape{1}, std::vector<double>{v}); };
    check({[&](const Tensor& x) { return scalar(l1_distance(x, b)); },
           [&](const Tensor& x, const Tensor& g) { return l1_distance_backward(x, b, g[0]).first; }},
          a);
    check({[&](const Tensor& x) { return scalar(l1_distance(a, x)); },
           [&](const Tensor& x, const Tensor& g) { return l1_distance_backward(a, x, g[0]).second; }},
          b);
  } else if (op == "margin_loss") {
    LossConfig cfg;
    cfg.margin = rng.uniform(0.5, 2.0);
    cfg.alpha = rng.uniform(0.05, 0.45) * cfg.margin;
    const int y = rng.index(2) == 0 ? 1 : -1;
    // Distance kept away from the hinge so the loss is smooth around it.
    double d;
    do {
      d = rng.uniform(0.0, 3.0);
    } while (std::abs(cfg.alpha + y * (d - cfg.margin)) < 1e-2);
    auto scalar = [](double v) { return Tensor(Shape{1}, std::vector<double>{v}); };
    check({[&](const Tensor& x) { return scalar(margin_loss(y, x[0], cfg)); },
           [&](const Tensor& x, const Tensor& g) { return scalar(g[0] * margin_loss_grad(y, x[0], cfg)); }},
          scalar(d));
    // Composed with the descriptor distance, as used in training.
    const std::size_t n = pick(rng, 2, 8);
    const Tensor a = random_tensor({n}, rng);
    const Tensor delta = random_away_from_zero({n}, rng, 1e-2);
    Tensor b(Shape{n});
    for (std::size_t i = 0; i < n; ++i) b[i] = a[i] + delta[i];
    const double dist = l1_distance(a, b);
    if (std::abs(cfg.alpha + y * (dist - cfg.margin)) >= 1e-2) {
      check({[&](const Tensor& x) { return scalar(margin_loss(y, l1_distance(x, b), cfg)); },
             [&](const Tensor& x, const Tensor& g) {
               const double gl = margin_loss_grad(y, l1_distance(x, b), cfg);
               return l1_distance_backward(x, b, g[0] * gl).first;
             }},
            a);
    }
  } else {
    throw std::invalid_argument("unknown op " + op);
  }
  return r;
}

inline const std::vector<std::string>& grad_ops() {
  static const std::vector<std::string> ops{"conv2d",    "conv3d",          "maxpool2d",
                                            "avgpool3d", "relu",            "fully_connected",
                                            "global_avg_pool", "l1_distance", "margin_loss"};
  return ops;
}

// ---------------------------------------------------------------- oracles

// Direct-loop convolution with explicit bounds checks.
inline Tensor naive_conv2d(const Tensor& x, const Tensor& k, const Tensor& b) {
  const std::size_t cin = x.extent(0), h = x.extent(1), w = x.extent(2), cout = k.extent(0);
  Tensor y(Shape{cout, h, w});
  for (std::size_t o = 0; o < cout; ++o)
    for (std::size_t r = 0; r < h; ++r)
      for (std::size_t c = 0; c < w; ++c) {
        double acc = b[o];
        for (std::size_t i = 0; i < cin; ++i)
          for (int dr = -1; dr <= 1; ++dr)
            for (int dc = -1; dc <= 1; ++dc) {
              const long rr = static_cast<long>(r) + dr, cc = static_cast<long>(c) + dc;
              if (rr < 0 || cc < 0 || rr >= static_cast<long>(h) || cc >= static_cast<long>(w)) continue;
              acc += x[(i * h + rr) * w + cc] * k[((o * cin + i) * 3 + (dr + 1)) * 3 + (dc + 1)];
            }
        y[(o * h + r) * w + c] = acc;
      }
  return y;
}

inline Tensor naive_conv3d(const Tensor& x, const Tensor& k, const Tensor& b) {
  const std::size_t cin = x.extent(0), dd = x.extent(1), h = x.extent(2), w = x.extent(3);
  const std::size_t cout = k.extent(0);
  Tensor y(Shape{cout, dd, h, w});
  for (std::size_t o = 0; o < cout; ++o)
    for (std::size_t z = 0; z < dd; ++z)
      for (std::size_t r = 0; r < h; ++r)
        for (std::size_t c = 0; c < w; ++c) {
          double acc = b[o];
          for (std::size_t i = 0; i < cin; ++i)
            for (int dz = -1; dz <= 1; ++dz)
              for (int dr = -1; dr <= 1; ++dr)
                for (int dc = -1; dc <= 1; ++dc) {
                  const long zz = static_cast<long>(z) + dz, rr = static_cast<long>(r) + dr,
                             cc = static_cast<long>(c) + dc;
                  if (zz < 0 || rr < 0 || cc < 0 || zz >= static_cast<long>(dd) ||
                      rr >= static_cast<long>(h) || cc >= static_cast<long>(w))
                    continue;
                  acc += x[((i * dd + zz) * h + rr) * w + cc] *
                         k[(((o * cin + i) * 3 + (dz + 1)) * 3 + (dr + 1)) * 3 + (dc + 1)];
                }
          y[((o * dd + z) * h + r) * w + c] = acc;
        }
  return y;
}

// Exhaustive PR sweep: every candidate threshold classifies every pair from
// scratch, and the area is integrated over the recall-sorted defined points.
struct BruteCurve {
  std::vector<double> thresholds, precision, recall;
  double map = 0.0;
};

inline BruteCurve brute_pr(const Matrix<double>& dist, const LabelMatrix& labels) {
  std::vector<double> cand;
  for (std::size_t i = 0; i < dist.values.size(); ++i)
    if (labels.values[i] != PairLabel::ignore) cand.push_back(dist.values[i]);
  std::sort(cand.begin(), cand.end());
  cand.erase(std::unique(cand.begin(), cand.end()), cand.end());
  std::vector<double> thr{cand.front() - 1.0};
  thr.insert(thr.end(), cand.begin(), cand.end());
  thr.push_back(cand.back() + 1.0);

  BruteCurve out;
  struct Pt {
    double r, p;
  };
  std::vector<Pt> defined;
  for (double t : thr) {
    double tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < dist.values.size(); ++i) {
      if (labels.values[i] == PairLabel::ignore) continue;
      const bool match = dist.values[i] < t;
      const bool pos = labels.values[i] == PairLabel::positive;
      if (match && pos) tp += 1;
      if (match && !pos) fp += 1;
      if (!match && pos) fn += 1;
    }
    const double p = tp + fp > 0 ? tp / (tp + fp) : 1.0;
    const double r = tp / (tp + fn);
    out.thresholds.push_back(t);
    out.precision.push_back(p);
    out.recall.push_back(r);
    if (tp + fp > 0) defined.push_back({r, p});
  }
  std::stable_sort(defined.begin(), defined.end(), [](const Pt& a, const Pt& b) { return a.r < b.r; });
  double area = 0.0, pr = 0.0, pp = defined.front().p;
  for (const Pt& q : defined) {
    area += (q.r - pr) * (q.p + pp) / 2.0;
    pr = q.r;
    pp = q.p;
  }
  out.map = area;
  return out;
}

// Recall@N by fully sorting every row.
inline double brute_recall(const Matrix<double>& dist, const TruthMatrix& truth, std::size_t n) {
  double hits = 0, eligible = 0;
  for (std::size_t r = 0; r < dist.rows; ++r) {
    bool any = false;
    for (std::size_t c = 0; c < dist.cols; ++c) any = any || truth(r, c);
    if (!any) continue;
    eligible += 1;
    std::vector<std::size_t> order(dist.cols);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return dist(r, a) < dist(r, b) || (dist(r, a) == dist(r, b) && a < b);
    });
    for (std::size_t i = 0; i < std::min(n, order.size()); ++i) {
      if (truth(r, order[i])) {
        hits += 1;
        break;
      }
    }
  }
  return 100.0 * hits / eligible;
}

// Random instance with distances drawn from a small value set so ties are
// common, and labels mixing all three classes with at least one positive.
struct EvalInstance {
  Matrix<double> dist;
  LabelMatrix labels;
  TruthMatrix truth;
};

inline EvalInstance random_eval_instance(std::size_t rows, std::size_t cols, Rng& rng) {
  EvalInstance e{Matrix<double>(rows, cols), LabelMatrix(rows, cols), TruthMatrix(rows, cols)};
  for (std::size_t i = 0; i < rows * cols; ++i) {
    e.dist.values[i] = static_cast<double>(rng.index(25)) * 0.2;
    const auto u = rng.index(10);
    e.labels.values[i] = u < 3 ? PairLabel::positive : (u < 8 ? PairLabel::negative : PairLabel::ignore);
    e.truth.values[i] = rng.index(6) == 0 ? 1 : 0;
  }
  e.labels.values[rng.index(rows * cols)] = PairLabel::positive;
  e.truth.values[rng.index(rows * cols)] = 1;
  return e;
}

// Cyclic Jacobi eigen-decomposition of a symmetric matrix (row-major).
// Returns eigenvalues; eigenvectors are the columns of `vectors`.
inline std::vector<double> jacobi_eigen(std::vector<double> a, std::size_t n,
                                        std::vector<double>& vectors) {
  vectors.assign(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) vectors[i * n + i] = 1.0;
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) off += a[p * n + q] * a[p * n + q];
    if (off < 1e-30) break;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a[p * n + q];
        if (std::abs(apq) < 1e-300) continue;
        const double theta = (a[q * n + q] - a[p * n + p]) / (2.0 * apq);
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0), s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a[k * n + p], akq = a[k * n + q];
          a[k * n + p] = c * akp - s * akq;
          a[k * n + q] = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a[p * n + k], aqk = a[q * n + k];
          a[p * n + k] = c * apk - s * aqk;
          a[q * n + k] = s * apk + c * aqk;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = vectors[k * n + p], vkq = vectors[k * n + q];
          vectors[k * n + p] = c * vkp - s * vkq;
          vectors[k * n + q] = s * vkp + c * vkq;
        }
      }
  }
  std::vector<double> evals(n);
  for (std::size_t i = 0; i < n; ++i) evals[i] = a[i * n + i];
  return evals;
}

// Top-n of an explicit list of (loss, row-major index) over non-ignore
// pairs with loss > 0, by repeated linear scans.
inline std::vector<std::size_t> brute_top_n(const Matrix<double>& losses, const LabelMatrix& labels,
                                            std::size_t n) {
  std::vector<bool> taken(losses.values.size(), false);
  std::vector<std::size_t> out;
  while (out.size() < n) {
    std::size_t best = losses.values.size();
    for (std::size_t i = 0; i < losses.values.size(); ++i) {
      if (taken[i] || labels.values[i] == PairLabel::ignore || !(losses.values[i] > 0.0)) continue;
      if (best == losses.values.size() || losses.values[i] > losses.values[best]) best = i;
    }
    if (best == losses.values.size()) break;
    taken[best] = true;
    out.push_back(best);
  }
  return out;
}

// Points whose eight surrounding voxel centers all lie inside the grid.
// Every fifth point is snapped onto a cell boundary plane or a voxel center
// to exercise the edge cases of binning and interpolation.
inline std::vector<Point3> random_interior_cloud(std::size_t count, const GridResolution& res,
                                                 const Point3& ext, Rng& rng) {
  auto axis = [&](double extent, std::size_t n) {
    const double h = extent / static_cast<double>(n);
    const double lo = -0.5 * extent + 0.5 * h, hi = 0.5 * extent - 0.5 * h;
    switch (rng.index(5)) {
      case 0:
        return -0.5 * extent + h * static_cast<double>(1 + rng.index(n - 1));
      case 1:
        return lo + h * static_cast<double>(rng.index(n));
      default:
        return rng.uniform(lo, hi);
    }
  };
  std::vector<Point3> pts(count);
  for (Point3& p : pts) p = {axis(ext.x, res.nx), axis(ext.y, res.ny), axis(ext.z, res.nz)};
  return pts;
}

// Per-cell counts by testing every point against every cell's bounds.
inline std::vector<double> brute_counts(const std::vector<Point3>& pts, const GridResolution& res,
                                        const Point3& ext) {
  std::vector<double> out(res.voxels(), 0.0);
  auto inside = [](double v, double extent, std::size_t n, std::size_t i) {
    const double h = extent / static_cast<double>(n);
    // Same edge expression as the half-open box definition.
    return (v + 0.5 * extent) / h >= static_cast<double>(i) &&
           (v + 0.5 * extent) / h < static_cast<double>(i + 1);
  };
  for (std::size_t k = 0; k < res.nz; ++k)
    for (std::size_t j = 0; j < res.ny; ++j)
      for (std::size_t i = 0; i < res.nx; ++i)
        for (const Point3& p : pts)
          if (inside(p.x, ext.x, res.nx, i) && inside(p.y, ext.y, res.ny, j) && inside(p.z, ext.z, res.nz, k))
            out[(k * res.ny + j) * res.nx + i] += 1.0;
  return out;
}

// Tent-function weight of a point at one voxel center.
inline double tent_weight(const Point3& p, std::size_t i, std::size_t j, std::size_t k,
                          const GridResolution& res, const Point3& ext) {
  auto w = [](double v, double extent, std::size_t n, std::size_t idx) {
    const double h = extent / static_cast<double>(n);
    const double c = (static_cast<double>(idx) + 0.5) * h - 0.5 * extent;
    return std::max(0.0, 1.0 - std::abs(v - c) / h);
  };
  return w(p.x, ext.x, res.nx, i) * w(p.y, ext.y, res.ny, j) * w(p.z, ext.z, res.nz, k);
}

// Small network sizes that keep model-level tests fast.
inline ModelConfig tiny_model(Modality mode, FusionMethod fusion = FusionMethod::concat) {
  ModelConfig m;
  m.mode = mode;
  m.visual.conv_layers = 3;
  m.visual.channel_plan = {2, 3, 4};
  m.visual.pool_after = {1, 2};
  m.structural.conv_layers = 2;
  m.structural.channel_plan = {2, 4};
  m.structural.pool_after = {1};
  m.fusion.method = fusion;
  m.fusion.c_f = 4;
  m.fusion.dim_f = 5;
  m.fusion.mlp_units = {6, 3};
  m.init_seed = 17;
  return m;
}

// 8x8 image, 4x4x2 grid, pose scattered over a 30 m square with headings
// from a coarse set so every pair label occurs.
inline Observation random_observation(Rng& rng, std::uint64_t frame_id = 0) {
  Observation o;
  o.frame_id = frame_id;
  o.pose.frame_id = frame_id;
  o.pose.position = {rng.uniform(-15, 15), rng.uniform(-15, 15), 0.0};
  o.pose.yaw = static_cast<double>(rng.index(4)) * 0.4;
  o.image = random_tensor({1, 8, 8}, rng, 0.0, 1.0);
  VoxelGrid g;
  g.resolution = {4, 4, 2};
  g.values.resize(g.resolution.voxels());
  for (double& v : g.values) v = rng.index(3) == 0 ? 1.0 : 0.0;
  o.grid = g;
  return o;
}

// Hard-pair oracle: labels, distances and hinge losses recomputed directly
// from poses and extracted descriptors, then ranked by brute_top_n.
inline std::vector<LabeledPair> oracle_hard_pairs(const DescriptorModel& model,
                                                  const std::vector<Observation>& obs,
                                                  const std::vector<std::size_t>& qids,
                                                  const std::vector<std::size_t>& dids, Modality mode,
                                                  double margin, double alpha, std::size_t n) {
  Matrix<double> losses(qids.size(), dids.size());
  LabelMatrix labels(qids.size(), dids.size());
  for (std::size_t r = 0; r < qids.size(); ++r) {
    const auto a = model.extract(obs[qids[r]], mode).values;
    for (std::size_t c = 0; c < dids.size(); ++c) {
      const auto b = model.extract(obs[dids[c]], mode).values;
      const Pose& pa = obs[qids[r]].pose;
      const Pose& pb = obs[dids[c]].pose;
      const double dist = std::hypot(pa.position.x - pb.position.x, pa.position.y - pb.position.y);
      double dyaw = std::fmod(std::abs(pa.yaw - pb.yaw), 2 * std::numbers::pi);
      dyaw = std::min(dyaw, 2 * std::numbers::pi - dyaw);
      PairLabel l = PairLabel::ignore;
      if (dist < 5.0 && dyaw < std::numbers::pi / 6) l = PairLabel::positive;
      if (dist > 20.0) l = PairLabel::negative;
      if (qids[r] == dids[c]) l = PairLabel::ignore;
      labels(r, c) = l;
      double d = 0;
      for (std::size_t k = 0; k < a.size(); ++k) d += std::abs(a[k] - b[k]);
      const double y = l == PairLabel::positive ? 1.0 : -1.0;
      losses(r, c) = std::max(alpha + y * (d - margin), 0.0);
    }
  }
  std::vector<LabeledPair> out;
  for (std::size_t idx : brute_top_n(losses, labels, n))
    out.push_back({qids[idx / dids.size()], dids[idx % dids.size()], labels.values[idx]});
  return out;
}

// --set overrides for a small dataset and model that the CLI can generate
// and train on in seconds.
inline std::vector<std::string> tiny_cli_settings() {
  const std::vector<std::string> kv{
      "n_places=24",         "points_per_place=120", "image_width=16",     "image_height=16",
      "grid_resolution=8,8,4", "visual_channels=4,8", "visual_pool_after=1", "structural_channels=4,8",
      "structural_pool_after=1", "c_f=8",            "iterations=4",       "batch_size=6",
      "k0=6",                "n0=2",                 "validation_period=2", "negative_pool_size=100",
      "recall_max_n=5"};
  std::vector<std::string> out;
  for (const auto& s : kv) {
    out.push_back("--set");
    out.push_back(s);
  }
  return out;
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

inline std::filesystem::path fresh_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("placefuse_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace testsupport
