// Acceptance runner: one PASS/FAIL line per criterion. An optional argument
// selects a single criterion by number. Exit status is 0 only when every
// selected criterion passes.

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>

#include "placefuse/cli.hpp"
#include "placefuse/dataset.hpp"
#include "placefuse/evaluation.hpp"
#include "placefuse/nets.hpp"
#include "placefuse/training.hpp"
#include "support.hpp"

using namespace placefuse;
using namespace testsupport;

namespace {

struct Verdict {
  bool pass = true;
  std::string detail;
};

std::string fmt(double v, int precision = 4) {
  std::ostringstream os;
  os << std::setprecision(precision) << v;
  return os.str();
}

// 1. Finite-difference checks of every layer op.
Verdict gradients() {
  Verdict v;
  std::ostringstream detail;
  for (const std::string& op : grad_ops()) {
    double worst = 0.0;
    bool ok = true;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const GradResult r = grad_case(op, 7000 + seed);
      ok = ok && r.pass;
      worst = std::max(worst, r.max_rel_error);
    }
    v.pass = v.pass && ok;
    detail << op << (ok ? "" : " FAILED") << " " << fmt(worst, 2) << "; ";
  }
  v.detail = "20 instances per op, worst relative error: " + detail.str();
  return v;
}

// 2. Grid population properties on random interior clouds.
Verdict voxelizer() {
  Rng rng(2024);
  std::size_t bad_ptc = 0, bad_so = 0, bad_bo = 0, bad_w = 0;
  double worst_so = 0.0, worst_w = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const GridResolution res{2 + rng.index(15), 2 + rng.index(15), 2 + rng.index(9)};
    const Point3 ext{rng.uniform(5, 60), rng.uniform(5, 60), rng.uniform(2, 30)};
    const auto pts = random_interior_cloud(1 + rng.index(400), res, ext, rng);
    const VoxelGrid ptc = populate(pts, res, ext, GridMethod::point_count);
    const VoxelGrid bo = populate(pts, res, ext, GridMethod::binary_occupancy);
    const VoxelGrid so = populate(pts, res, ext, GridMethod::soft_occupancy);
    if (ptc.sum() != static_cast<double>(pts.size())) ++bad_ptc;
    const double so_err = std::abs(so.sum() - static_cast<double>(pts.size()));
    worst_so = std::max(worst_so, so_err);
    if (!(so_err <= 1e-9)) ++bad_so;
    for (std::size_t i = 0; i < res.voxels(); ++i) {
      if (bo.values[i] != (ptc.values[i] >= 1.0 ? 1.0 : 0.0)) {
        ++bad_bo;
        break;
      }
    }
    for (const Point3& p : pts) {
      double w = 0.0;
      for (const auto& t : trilinear_taps(p, res, ext)) w += t.weight;
      worst_w = std::max(worst_w, std::abs(w - 1.0));
      if (!(std::abs(w - 1.0) <= 1e-12)) ++bad_w;
    }
  }
  Verdict v;
  v.pass = bad_ptc == 0 && bad_so == 0 && bad_bo == 0 && bad_w == 0;
  v.detail = "1000 clouds; ptc sum mismatches " + std::to_string(bad_ptc) + ", so sum max error " +
             fmt(worst_so, 2) + ", bo/ptc mismatches " + std::to_string(bad_bo) +
             ", trilinear weight-sum max error " + fmt(worst_w, 2);
  return v;
}

// 3. PR/mAP and recall@N against brute-force oracles.
Verdict evaluation() {
  Rng rng(77);
  double worst_map = 0.0, worst_point = 0.0, worst_recall = 0.0;
  std::size_t non_monotone = 0, size_mismatch = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const EvalInstance e = random_eval_instance(20, 20, rng);
    const PRCurve curve = pr_and_map(e.dist, e.labels);
    const BruteCurve ref = brute_pr(e.dist, e.labels);
    worst_map = std::max(worst_map, std::abs(curve.mean_average_precision - ref.map));
    if (curve.points.size() != ref.thresholds.size()) {
      ++size_mismatch;
    } else {
      for (std::size_t i = 0; i < ref.thresholds.size(); ++i) {
        worst_point = std::max({worst_point, std::abs(curve.points[i].precision - ref.precision[i]),
                                std::abs(curve.points[i].recall - ref.recall[i]),
                                std::abs(curve.points[i].threshold - ref.thresholds[i])});
      }
    }
    double prev = -1.0;
    for (std::size_t n = 1; n <= 20; ++n) {
      const double r = recall_at_n(e.dist, e.truth, n);
      worst_recall = std::max(worst_recall, std::abs(r - brute_recall(e.dist, e.truth, n)));
      if (r < prev) ++non_monotone;
      prev = r;
    }
  }
  Verdict v;
  v.pass = worst_map <= 1e-9 && worst_point <= 1e-9 && worst_recall <= 1e-9 && non_monotone == 0 &&
           size_mismatch == 0;
  v.detail = "100 instances of 20x20; max |mAP - oracle| " + fmt(worst_map, 2) + ", max PR point error " +
             fmt(worst_point, 2) + ", max recall error " + fmt(worst_recall, 2) +
             ", non-monotone recall curves " + std::to_string(non_monotone);
  return v;
}

// 4. mine_hard against enumerated top-n of the pool's loss matrix.
Verdict mining() {
  Rng rng(4040);
  std::size_t mismatches = 0, total_selected = 0;
  for (int pool = 0; pool < 50; ++pool) {
    ModelConfig mc = tiny_model(pool % 3 == 0 ? Modality::appearance : Modality::composite);
    mc.init_seed = 100 + static_cast<std::uint64_t>(pool);
    const DescriptorModel model(mc);
    const Modality mode = mc.mode;
    std::vector<Observation> obs;
    for (std::uint64_t i = 0; i < 40; ++i) obs.push_back(random_observation(rng, i));
    const std::size_t k = 1 + rng.index(16);
    std::vector<std::size_t> qids, dids;
    for (std::size_t i = 0; i < k; ++i) {
      qids.push_back(rng.index(obs.size()));
      dids.push_back(rng.index(obs.size()));
    }
    LossConfig loss;
    loss.margin = rng.uniform(0.5, 3.0);
    MiningState state = MiningState::initial({});
    state.n = 1 + rng.index(k * k);
    const HardSelection sel = mine_hard(model, obs, qids, dids, mode, loss, state, 1 + pool % 3);
    const auto ref = oracle_hard_pairs(model, obs, qids, dids, mode, loss.margin, loss.alpha, state.n);
    total_selected += ref.size();
    if (sel.pairs != ref) ++mismatches;
  }
  Verdict v;
  v.pass = mismatches == 0;
  v.detail = "50 pools (k <= 16), " + std::to_string(total_selected) + " selected pairs, " +
             std::to_string(mismatches) + " mismatching pools";
  return v;
}

// 5. Output dimensions of the default networks and fusion heads.
Verdict shapes() {
  Verdict v;
  std::ostringstream d;
  auto expect = [&](const std::string& what, std::size_t got, std::size_t want) {
    d << what << " " << got << (got == want ? "" : " (expected " + std::to_string(want) + ")") << "; ";
    v.pass = v.pass && got == want;
  };
  const DescriptorModel model{ModelConfig{}};
  Rng rng(5);
  Observation o;
  o.image = random_tensor({1, 64, 64}, rng, 0.0, 1.0);
  VoxelGrid g;
  g.resolution = {96, 96, 48};
  g.values.resize(g.resolution.voxels());
  for (double& x : g.values) x = rng.index(20) == 0 ? 1.0 : 0.0;
  o.grid = g;
  check_pool_extents(model.config().visual.pool_after, {64, 64}, "visual");
  check_pool_extents(model.config().structural.pool_after, {48, 96, 96}, "structural");
  expect("visual 1x64x64 ->", model.forward(o, Modality::appearance).size(), 128);
  expect("structural 1x48x96x96 ->", model.forward(o, Modality::structure).size(), 128);

  std::vector<double> ga(128), gs(128);
  for (double& x : ga) x = rng.uniform();
  for (double& x : gs) x = rng.uniform();
  for (FusionMethod m : {FusionMethod::concat, FusionMethod::weighted_concat, FusionMethod::linear, FusionMethod::mlp}) {
    FusionConfig fc;
    fc.method = m;
    ParameterSet params;
    const FusionHead head(fc, params);
    initialize_parameters(params, 3);
    const std::size_t want = m == FusionMethod::linear ? fc.dim_f : 256;
    expect(std::string(fusion_method_name(m)), head.forward(params, ga, gs).size(), want);
    expect(std::string(fusion_method_name(m)) + " declared", fc.output_dim(), want);
  }
  FusionConfig narrow;
  narrow.method = FusionMethod::linear;
  narrow.dim_f = 64;
  ParameterSet params;
  const FusionHead head(narrow, params);
  expect("linear dim_f=64", head.forward(params, ga, gs).size(), 64);
  v.detail = d.str();
  return v;
}

// 6. Composite beats single modalities after equal training budgets, and
// each training run reduces its loss. The mean loss over a fixed set of
// random pairs is reported alongside as a diagnostic.
struct ModalityRun {
  double first10 = 0.0;
  double last10 = 0.0;
  double fixed_before = 0.0;
  double fixed_after = 0.0;
  double test_recall1 = 0.0;
};

Config ordering_config() {
  return Config::from_string(R"(
seed = 7
n_places = 64
conditions = reference,severe
image_width = 32
image_height = 32
grid_resolution = 16,16,8
box_extents = 32,32,16
visual_channels = 8,8,16,16,32,32
visual_pool_after = 2,4,6
structural_channels = 8,8,16,16,32,32
structural_pool_after = 2,4
c_f = 32
fusion = concat
lr = 0.003
iterations = 700
validation_period = 50
k_max = 24
)");
}

double fixed_pair_loss(const DescriptorModel& model, std::span<const Observation> obs,
                       std::span<const LabeledPair> pairs, Modality mode, const LossConfig& loss) {
  const auto desc = model.extract_all(obs, mode);
  double total = 0.0;
  for (const LabeledPair& p : pairs) {
    double d = 0.0;
    for (std::size_t k = 0; k < desc[p.query].values.size(); ++k)
      d += std::abs(desc[p.query].values[k] - desc[p.database].values[k]);
    total += margin_loss(p.label == PairLabel::positive ? 1 : -1, d, loss);
  }
  return total / static_cast<double>(pairs.size());
}

Verdict ordering() {
  const Config cfg = ordering_config();
  const SynthDataset data = generate_dataset(SynthConfig::from_config(cfg));
  const VoxelOptions vo = VoxelOptions::from_config(cfg);
  const auto train_obs = synth_observations(data, {Split::train, true, true}, vo);
  const auto val_obs = synth_observations(data, {Split::validation, true, true}, vo);
  const auto test_obs = synth_observations(data, {Split::test, true, true}, vo);

  // Equal numbers of positive and negative training pairs, fixed for all runs.
  Rng rng(606);
  std::vector<LabeledPair> fixed = positive_pairs(train_obs);
  rng.shuffle(fixed);
  fixed.resize(std::min<std::size_t>(fixed.size(), 300));
  const auto negatives = sample_negative_pairs(train_obs, fixed.size(), rng);
  fixed.insert(fixed.end(), negatives.begin(), negatives.end());

  std::map<std::string, ModalityRun> runs;
  Verdict v;
  std::ostringstream d;
  for (const std::string mode : {"appearance", "structure", "composite"}) {
    Config c = cfg;
    c.set("mode", mode);
    DescriptorModel model(ModelConfig::from_config(c));
    const TrainConfig tc = TrainConfig::from_config(c);
    ModalityRun run;
    run.fixed_before = fixed_pair_loss(model, train_obs, fixed, tc.mode, tc.loss);
    const TrainResult r = train(model, train_obs, val_obs, tc);
    run.fixed_after = fixed_pair_loss(model, train_obs, fixed, tc.mode, tc.loss);
    for (std::size_t i = 0; i < 10; ++i) run.first10 += r.log[i].loss / 10.0;
    for (std::size_t i = r.log.size() - 10; i < r.log.size(); ++i) run.last10 += r.log[i].loss / 10.0;
    model.parameters().assign_values(r.best);
    run.test_recall1 = validation_recall1(model, test_obs, tc.mode).value_or(0.0);
    const bool dropped = run.last10 < 0.25 * run.first10;
    v.pass = v.pass && dropped;
    d << mode << " recall@1 " << fmt(run.test_recall1, 3) << ", batch loss " << fmt(run.first10, 3) << " -> "
      << fmt(run.last10, 3) << " (" << fmt(100.0 * run.last10 / run.first10, 3) << "%"
      << (dropped ? "" : ", not below 25%") << "), fixed-pair loss " << fmt(run.fixed_before, 3) << " -> "
      << fmt(run.fixed_after, 3) << "; ";
    runs[mode] = run;
  }
  const bool best = runs["composite"].test_recall1 >=
                    std::max(runs["appearance"].test_recall1, runs["structure"].test_recall1);
  v.pass = v.pass && best;
  v.detail = d.str() + (best ? "composite >= both" : "composite below a single modality");
  return v;
}

// 7. Linear fusion with identity weights and weighted concat with unit
// weights reproduce plain concatenation bitwise.
Verdict degeneracy() {
  Rng rng(7);
  FusionConfig concat_cfg, lin_cfg, wc_cfg;
  lin_cfg.method = FusionMethod::linear;
  lin_cfg.dim_f = 2 * lin_cfg.c_f;
  wc_cfg.method = FusionMethod::weighted_concat;
  ParameterSet pc, pl, pw;
  const FusionHead concat(concat_cfg, pc), linear(lin_cfg, pl), weighted(wc_cfg, pw);
  initialize_parameters(pl, 1);
  initialize_parameters(pw, 1);
  Tensor& w = pl.at("fusion.linear.weight").tensor;
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = i / w.extent(1) == i % w.extent(1) ? 1.0 : 0.0;
  std::size_t differing = 0;
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> ga(128), gs(128);
    for (double& x : ga) x = rng.normal() * std::pow(10.0, rng.uniform(-3, 3));
    for (double& x : gs) x = rng.normal() * std::pow(10.0, rng.uniform(-3, 3));
    const auto ref = concat.forward(pc, ga, gs);
    if (linear.forward(pl, ga, gs) != ref) ++differing;
    if (weighted.forward(pw, ga, gs) != ref) ++differing;
  }
  // Same check through full (small) models.
  const ModelConfig base = tiny_model(Modality::composite);
  ModelConfig lc = base, wcc = base;
  lc.fusion.method = FusionMethod::linear;
  lc.fusion.dim_f = 2 * base.fusion.c_f;
  wcc.fusion.method = FusionMethod::weighted_concat;
  const DescriptorModel mc(base);
  DescriptorModel ml(lc);
  const DescriptorModel mw(wcc);
  Tensor& mw_lin = ml.parameters().at("fusion.linear.weight").tensor;
  for (std::size_t i = 0; i < mw_lin.size(); ++i)
    mw_lin[i] = i / mw_lin.extent(1) == i % mw_lin.extent(1) ? 1.0 : 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const Observation o = random_observation(rng);
    const auto ref = mc.forward(o, Modality::composite);
    if (ml.forward(o, Modality::composite) != ref) ++differing;
    if (mw.forward(o, Modality::composite) != ref) ++differing;
  }
  Verdict v;
  v.pass = differing == 0;
  v.detail = "240 comparisons, " + std::to_string(differing) + " not bitwise equal";
  return v;
}

// 8. Two identical train runs through the CLI.
Verdict determinism() {
  const auto root = fresh_dir("acceptance_determinism");
  auto run = [&](std::vector<std::string> args) {
    const auto extra = tiny_cli_settings();
    args.insert(args.end(), extra.begin(), extra.end());
    args.insert(args.end(), {"--set", "iterations=12", "--set", "validation_period=4", "--seed", "11"});
    std::ostringstream out, err;
    const int code = cli::run(args, out, err);
    if (code != 0) std::cerr << err.str();
    return code;
  };
  Verdict v;
  if (run({"gen-synth", "--out", (root / "data").string()}) != 0 ||
      run({"train", "--data", (root / "data").string(), "--out", (root / "a").string()}) != 0 ||
      run({"train", "--data", (root / "data").string(), "--out", (root / "b").string()}) != 0) {
    v.pass = false;
    v.detail = "a command failed";
    return v;
  }
  std::ostringstream d;
  for (const char* f : {"model.ckpt", "final.ckpt", "train_log.csv", "config.txt"}) {
    const std::string a = read_file(root / "a" / f), b = read_file(root / "b" / f);
    const bool same = !a.empty() && a == b;
    v.pass = v.pass && same;
    d << f << (same ? " identical" : " DIFFERS") << " (" << a.size() << " bytes); ";
  }
  v.detail = d.str();
  return v;
}

// 9. PCA projection rows, variance order and full-rank isometry.
Verdict pca() {
  Rng rng(99);
  const std::size_t dim = 32;
  std::vector<Descriptor> xs;
  for (std::size_t i = 0; i < 200; ++i) {
    Descriptor d;
    d.values.resize(dim);
    for (std::size_t k = 0; k < dim; ++k) d.values[k] = rng.normal() * (0.2 + 0.1 * static_cast<double>(k % 7)) + 1.0;
    xs.push_back(d);
  }
  double worst_ortho = 0.0, worst_iso = 0.0;
  std::size_t order_violations = 0;
  for (std::size_t out_dim : {dim, std::size_t{8}}) {
    const PCAModel m = pca_fit(xs, out_dim);
    for (std::size_t a = 0; a < out_dim; ++a)
      for (std::size_t b = 0; b < out_dim; ++b) {
        double dot = 0.0;
        for (std::size_t k = 0; k < dim; ++k) dot += m.projection[a * dim + k] * m.projection[b * dim + k];
        worst_ortho = std::max(worst_ortho, std::abs(dot - (a == b ? 1.0 : 0.0)));
      }
    for (std::size_t i = 1; i < out_dim; ++i) order_violations += m.explained_variance[i] > m.explained_variance[i - 1];
    if (out_dim != dim) continue;
    std::vector<std::vector<double>> proj;
    for (const auto& x : xs) proj.push_back(pca_project(m, x).values);
    for (std::size_t i = 0; i < xs.size(); ++i)
      for (std::size_t j = i + 1; j < xs.size(); ++j) {
        double a = 0.0, b = 0.0;
        for (std::size_t k = 0; k < dim; ++k) {
          a += std::pow(xs[i].values[k] - xs[j].values[k], 2);
          b += std::pow(proj[i][k] - proj[j][k], 2);
        }
        worst_iso = std::max(worst_iso, std::abs(std::sqrt(a) - std::sqrt(b)));
      }
  }
  Verdict v;
  v.pass = worst_ortho <= 1e-9 && worst_iso <= 1e-9 && order_violations == 0;
  v.detail = "max |P P^T - I| " + fmt(worst_ortho, 2) + ", variance order violations " +
             std::to_string(order_violations) + ", max pairwise distance change " + fmt(worst_iso, 2);
  return v;
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria{
      {"gradient correctness", gradients},  {"voxelizer properties", voxelizer},
      {"evaluation oracles", evaluation},   {"mining correctness", mining},
      {"architecture shapes", shapes},      {"modality ordering", ordering},
      {"fusion degeneracy", degeneracy},    {"training determinism", determinism},
      {"pca contract", pca}};
  int only = 0;
  if (argc > 1) only = std::atoi(argv[1]);
  bool all = true;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    if (only != 0 && static_cast<int>(i + 1) != only) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = criteria[i].second();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    all = all && v.pass;
    std::cout << (v.pass ? "PASS" : "FAIL") << " [" << i + 1 << "] " << criteria[i].first << " (" << fmt(secs, 3)
              << " s): " << v.detail << std::endl;
  }
  return all ? 0 : 1;
}
