#include "placefuse/cli.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iomanip>
#include <map>
#include <ostream>

#include "placefuse/config.hpp"
#include "placefuse/dataset.hpp"
#include "placefuse/errors.hpp"
#include "placefuse/evaluation.hpp"
#include "placefuse/nets.hpp"
#include "placefuse/synth.hpp"
#include "placefuse/training.hpp"

namespace placefuse::cli {
namespace {

namespace fs = std::filesystem;

struct RunConfig {
  std::string subcommand;
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> overrides;
  std::optional<std::size_t> threads;
  bool force = false;
  Config effective;
};

void build_effective(RunConfig& rc) {
  if (!rc.config_path.empty()) {
    if (!fs::exists(rc.config_path)) throw ConfigError("config file not found: " + rc.config_path);
    rc.effective = Config::from_file(rc.config_path);
  }
  for (const auto& o : rc.overrides) rc.effective.set(o);
  if (rc.seed) rc.effective.set("seed", std::to_string(*rc.seed));
  if (rc.threads) rc.effective.set("threads", std::to_string(*rc.threads));
}

// Provenance header: command, effective config and input paths. Output
// locations are left out so reruns into a different directory stay
// byte-identical.
std::string header(const RunConfig& rc, const std::vector<std::pair<std::string, std::string>>& inputs) {
  std::string h = "# placefuse " + rc.subcommand + "\n" + rc.effective.echo("# ");
  for (const auto& [k, v] : inputs) h += "# input." + k + " = " + v + "\n";
  return h;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << text;
}

void sidecar(const fs::path& file, const std::string& text) {
  write_text(file.string() + ".config.txt", text);
}

void require_file(const std::string& path, const std::string& what) {
  if (path.empty()) throw ConfigError("missing " + what);
  if (!fs::exists(path)) throw InputError(what + " not found: " + path);
}

void guard_output(const fs::path& path, bool force) {
  if (force || !fs::exists(path)) return;
  if (fs::is_directory(path) && fs::is_empty(path)) return;
  throw ConfigError("output " + path.string() + " already exists (pass --force to overwrite)");
}

std::size_t threads_of(const Config& cfg) { return std::max<std::size_t>(1, cfg.get_size("threads", 1)); }

std::string grid_file_name(std::uint64_t frame_id) {
  char name[32];
  std::snprintf(name, sizeof name, "%06llu.vxg", static_cast<unsigned long long>(frame_id));
  return name;
}

std::map<std::uint64_t, Pose> poses_by_frame(const std::string& trajectory) {
  std::map<std::uint64_t, Pose> out;
  for (const Pose& p : read_trajectory_csv(trajectory)) out[p.frame_id] = p;
  return out;
}

std::vector<Pose> ground_truth(const DescriptorDb& db, const std::map<std::uint64_t, Pose>& poses,
                               const std::string& source) {
  std::vector<Pose> out;
  for (const auto& r : db.records) {
    auto it = poses.find(r.frame_id);
    if (it == poses.end()) {
      throw InputError("no ground-truth pose for frame " + std::to_string(r.frame_id) + " in " + source);
    }
    out.push_back(it->second);
  }
  return out;
}

// ---------------------------------------------------------------- commands

struct GenSynthArgs {
  std::string out;
};

int cmd_gen_synth(const RunConfig& rc, const GenSynthArgs& a, std::ostream& out) {
  if (a.out.empty()) throw ConfigError("gen-synth needs --out");
  guard_output(a.out, rc.force);
  const SynthConfig sc = SynthConfig::from_config(rc.effective);
  const SynthDataset data = generate_dataset(sc);
  write_dataset(a.out, data, header(rc, {}));
  out << "wrote " << data.traversals.size() << " traversals to " << a.out << "\n";
  for (std::size_t t = 0; t < data.traversals.size(); ++t) {
    std::size_t counts[4] = {0, 0, 0, 0};
    for (Split s : data.splits.assignment[t]) ++counts[static_cast<int>(s)];
    out << "  " << data.traversals[t].name << ": " << counts[0] << " train, " << counts[1]
        << " validation, " << counts[2] << " test, " << counts[3] << " excluded\n";
  }
  return kExitOk;
}

struct VoxelizeArgs {
  std::string data;
  std::string traversal;
  std::string trajectory;
  std::string cloud;
  std::string out;
};

int cmd_voxelize(const RunConfig& rc, const VoxelizeArgs& a, std::ostream& out) {
  if (a.out.empty()) throw ConfigError("voxelize needs --out");
  const VoxelOptions opts = VoxelOptions::from_config(rc.effective);
  const std::size_t threads = threads_of(rc.effective);
  std::size_t written = 0;
  if (!a.data.empty()) {
    const DatasetIndex index = read_manifest(a.data);
    guard_output(a.out, rc.force);
    std::vector<std::size_t> which;
    if (a.traversal.empty()) {
      for (std::size_t t = 0; t < index.traversals.size(); ++t) which.push_back(t);
    } else {
      which.push_back(index.find(a.traversal));
    }
    fs::create_directories(a.out);
    for (std::size_t t : which) {
      const TraversalFiles tf = load_traversal(index, t);
      const auto grids = voxelize_traversal(tf.cloud, tf.poses, opts, threads);
      const fs::path dir = fs::path(a.out) / index.traversals[t].name;
      fs::create_directories(dir);
      for (std::size_t i = 0; i < grids.size(); ++i) {
        write_voxel_grid(dir / grid_file_name(tf.poses[i].frame_id), grids[i]);
      }
      written += grids.size();
    }
    write_text(fs::path(a.out) / "voxelize.config.txt", header(rc, {{"data", a.data}}));
  } else {
    require_file(a.trajectory, "--trajectory");
    require_file(a.cloud, "--cloud");
    guard_output(a.out, rc.force);
    const auto poses = read_trajectory_csv(a.trajectory);
    const PointCloud cloud = read_point_cloud_csv(a.cloud);
    const auto grids = voxelize_traversal(cloud, poses, opts, threads);
    fs::create_directories(a.out);
    for (std::size_t i = 0; i < grids.size(); ++i) {
      write_voxel_grid(fs::path(a.out) / grid_file_name(poses[i].frame_id), grids[i]);
    }
    written = grids.size();
    write_text(fs::path(a.out) / "voxelize.config.txt",
               header(rc, {{"trajectory", a.trajectory}, {"cloud", a.cloud}}));
  }
  out << "wrote " << written << " " << grid_method_name(opts.method) << " grids to " << a.out << "\n";
  return kExitOk;
}

struct TrainArgs {
  std::string data;
  std::string out;
};

int cmd_train(const RunConfig& rc, const TrainArgs& a, std::ostream& out) {
  require_file(a.data, "--data");
  if (a.out.empty()) throw ConfigError("train needs --out");
  const ModelConfig mc = ModelConfig::from_config(rc.effective);
  const TrainConfig tc = TrainConfig::from_config(rc.effective);
  const VoxelOptions vo = VoxelOptions::from_config(rc.effective);
  tc.validate();
  mc.validate();
  const DatasetIndex index = read_manifest(a.data);
  guard_output(a.out, rc.force);

  ObservationRequest req;
  req.images = tc.mode != Modality::structure;
  req.grids = tc.mode != Modality::appearance;
  req.split = Split::train;
  const auto train_obs = load_observations(index, req, vo, tc.threads);
  req.split = Split::validation;
  const auto val_obs = load_observations(index, req, vo, tc.threads);
  out << "training " << modality_name(tc.mode) << " model on " << train_obs.size()
      << " observations (" << val_obs.size() << " for validation)\n";

  DescriptorModel model(mc);
  fs::create_directories(a.out);
  const fs::path snapshot_dir = fs::path(a.out) / "diagnostics";
  const TrainResult result = train(model, train_obs, val_obs, tc, &out, &snapshot_dir);

  const std::string head = header(rc, {{"data", a.data}});
  const fs::path best = fs::path(a.out) / "model.ckpt";
  const fs::path last = fs::path(a.out) / "final.ckpt";
  save_checkpoint(best, result.best);
  save_checkpoint(last, model.parameters());
  sidecar(best, head);
  sidecar(last, head);
  write_train_log(fs::path(a.out) / "train_log.csv", result.log, head);
  write_text(fs::path(a.out) / "config.txt", rc.effective.echo(""));
  out << "best checkpoint from iteration " << result.best_iteration;
  if (result.best_val_recall1) out << " (validation recall@1 " << *result.best_val_recall1 << ")";
  out << "\n";
  return kExitOk;
}

struct ExtractArgs {
  std::string checkpoint;
  std::string data;
  std::string traversal;
  std::string split = "test";
  std::string mode;
  std::string out;
};

int cmd_extract(const RunConfig& rc, const ExtractArgs& a, std::ostream& out) {
  require_file(a.checkpoint, "--checkpoint");
  require_file(a.data, "--data");
  if (a.out.empty()) throw ConfigError("extract needs --out");
  const ModelConfig mc = ModelConfig::from_config(rc.effective);
  const VoxelOptions vo = VoxelOptions::from_config(rc.effective);
  const Modality mode = a.mode.empty() ? mc.mode : parse_modality(a.mode);
  const std::size_t threads = threads_of(rc.effective);

  DescriptorModel model(mc);
  model.check_mode(mode);
  model.parameters().assign_values(load_checkpoint(a.checkpoint));
  const DatasetIndex index = read_manifest(a.data);
  guard_output(a.out, rc.force);

  ObservationRequest req;
  req.split = parse_split(a.split);
  req.images = mode != Modality::structure;
  req.grids = mode != Modality::appearance;

  std::vector<std::size_t> which;
  if (a.traversal.empty()) {
    for (std::size_t t = 0; t < index.traversals.size(); ++t) which.push_back(t);
    fs::create_directories(a.out);
  } else {
    which.push_back(index.find(a.traversal));
    if (fs::path(a.out).has_parent_path()) fs::create_directories(fs::path(a.out).parent_path());
  }
  const std::string head =
      header(rc, {{"checkpoint", a.checkpoint}, {"data", a.data}, {"split", a.split},
                  {"mode", std::string(modality_name(mode))}});
  for (std::size_t t : which) {
    const auto obs = load_observations(index, t, req, vo, threads);
    DescriptorDb db;
    db.modality = mode;
    db.dim = model.output_dim(mode);
    db.records = model.extract_all(obs, mode, threads);
    const fs::path file =
        a.traversal.empty() ? fs::path(a.out) / (index.traversals[t].name + ".dsc") : fs::path(a.out);
    write_descriptor_db(file, db);
    sidecar(file, head + "# input.traversal = " + index.traversals[t].name + "\n");
    out << "wrote " << db.records.size() << " " << modality_name(mode) << " descriptors of dim "
        << db.dim << " to " << file.string() << "\n";
  }
  return kExitOk;
}

struct EvalMatchingArgs {
  std::string query;
  std::string database;
  std::string query_trajectory;
  std::string database_trajectory;
  std::string out;
};

int cmd_eval_matching(const RunConfig& rc, const EvalMatchingArgs& a, std::ostream& out) {
  require_file(a.query, "--query");
  require_file(a.database, "--database");
  require_file(a.query_trajectory, "--query-trajectory");
  require_file(a.database_trajectory, "--database-trajectory");
  if (a.out.empty()) throw ConfigError("eval-matching needs --out");
  guard_output(a.out, rc.force);
  const DescriptorDb q = read_descriptor_db(a.query);
  const DescriptorDb d = read_descriptor_db(a.database);
  const auto qp = ground_truth(q, poses_by_frame(a.query_trajectory), a.query_trajectory);
  const auto dp = ground_truth(d, poses_by_frame(a.database_trajectory), a.database_trajectory);
  const DistanceMatrix dm = distance_matrix(q.records, d.records, threads_of(rc.effective));
  const PRCurve curve = pr_and_map(dm, label_matrix(qp, dp));
  write_pr_csv(a.out, curve,
               header(rc, {{"query", a.query},
                           {"database", a.database},
                           {"query_trajectory", a.query_trajectory},
                           {"database_trajectory", a.database_trajectory}}));
  out << std::setprecision(6) << "mAP = " << curve.mean_average_precision << "\n";
  return kExitOk;
}

struct EvalRetrievalArgs {
  std::vector<std::string> descriptors;
  std::vector<std::string> trajectories;
  std::string out;
};

int cmd_eval_retrieval(const RunConfig& rc, const EvalRetrievalArgs& a, std::ostream& out) {
  if (a.descriptors.size() < 2) throw ConfigError("eval-retrieval needs at least two --descriptors");
  if (a.descriptors.size() != a.trajectories.size()) {
    throw ConfigError("eval-retrieval needs one --trajectories entry per descriptor file");
  }
  for (const auto& p : a.descriptors) require_file(p, "descriptor file");
  for (const auto& p : a.trajectories) require_file(p, "trajectory file");
  if (a.out.empty()) throw ConfigError("eval-retrieval needs --out");
  guard_output(a.out, rc.force);
  const std::size_t max_n = rc.effective.get_size("recall_max_n", 25);
  const std::size_t threads = threads_of(rc.effective);

  std::vector<std::string> names;
  std::vector<DescriptorDb> dbs;
  std::vector<std::vector<Pose>> poses;
  for (std::size_t i = 0; i < a.descriptors.size(); ++i) {
    names.push_back(fs::path(a.descriptors[i]).stem().string());
    dbs.push_back(read_descriptor_db(a.descriptors[i]));
    poses.push_back(ground_truth(dbs.back(), poses_by_frame(a.trajectories[i]), a.trajectories[i]));
  }
  std::vector<SequencePairMetrics> metrics;
  for (std::size_t i = 0; i < dbs.size(); ++i) {
    for (std::size_t j = i + 1; j < dbs.size(); ++j) {
      const DistanceMatrix dm = distance_matrix(dbs[i].records, dbs[j].records, threads);
      SequencePairMetrics m;
      m.query_sequence = names[i];
      m.database_sequence = names[j];
      m.recall = recall_curve(dm, retrieval_truth(poses[i], poses[j]), max_n);
      m.mean_average_precision = pr_and_map(dm, label_matrix(poses[i], poses[j])).mean_average_precision;
      metrics.push_back(std::move(m));
    }
  }
  const SequenceSummary summary = aggregate_sequence_pairs(metrics, names);
  std::vector<std::pair<std::string, std::string>> inputs;
  for (std::size_t i = 0; i < names.size(); ++i) {
    inputs.emplace_back("descriptors." + std::to_string(i), a.descriptors[i]);
    inputs.emplace_back("trajectory." + std::to_string(i), a.trajectories[i]);
  }
  write_summary_csv(a.out, summary, header(rc, inputs));
  out << std::setprecision(6) << "mean recall@1 = " << summary.mean_recall.front()
      << ", mean mAP = " << summary.mean_map << " over " << summary.pairs.size()
      << " sequence pairs\n";
  return kExitOk;
}

struct PcaArgs {
  std::string train;
  std::optional<std::size_t> dim;
  std::string out_model;
  std::string project;
  std::string out;
};

int cmd_pca(const RunConfig& rc, const PcaArgs& a, std::ostream& out) {
  require_file(a.train, "--train");
  if (a.out_model.empty()) throw ConfigError("pca needs --out-model");
  if (!a.project.empty()) require_file(a.project, "--project");
  if (!a.project.empty() && a.out.empty()) throw ConfigError("pca --project needs --out");
  const std::size_t dim = a.dim ? *a.dim : rc.effective.get_size("pca_dim", 0);
  if (dim == 0) throw ConfigError("pca needs --dim (or pca_dim) >= 1");
  guard_output(a.out_model, rc.force);
  if (!a.out.empty()) guard_output(a.out, rc.force);

  const DescriptorDb train_db = read_descriptor_db(a.train);
  const PCAModel model = pca_fit(train_db.records, dim);
  write_pca_model(a.out_model, model);
  const std::string head = header(rc, {{"train", a.train}, {"dim", std::to_string(dim)}});
  sidecar(a.out_model, head);
  out << "fitted PCA " << model.input_dim << " -> " << model.output_dim << " on "
      << train_db.records.size() << " descriptors\n";
  if (!a.project.empty()) {
    const DescriptorDb in = read_descriptor_db(a.project);
    DescriptorDb projected;
    projected.modality = in.modality;
    projected.dim = model.output_dim;
    for (const auto& r : in.records) projected.records.push_back(pca_project(model, r));
    write_descriptor_db(a.out, projected);
    sidecar(a.out, head + "# input.project = " + a.project + "\n");
    out << "projected " << projected.records.size() << " descriptors to " << a.out << "\n";
  }
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Composite place-recognition descriptors: data generation, training, evaluation"};
  app.require_subcommand(1);
  RunConfig rc;
  app.add_option("--config", rc.config_path, "key = value configuration file");
  app.add_option("--seed", rc.seed, "seed for every random choice of the run");
  app.add_option("--set", rc.overrides, "override a config entry (key=value), repeatable");
  app.add_option("--threads", rc.threads, "worker thread cap")->check(CLI::PositiveNumber);
  app.add_flag("--force", rc.force, "overwrite existing outputs");

  GenSynthArgs gen;
  auto* c_gen = app.add_subcommand("gen-synth", "generate the synthetic dataset");
  c_gen->add_option("--out", gen.out, "output dataset directory")->required();

  VoxelizeArgs vox;
  auto* c_vox = app.add_subcommand("voxelize", "write one voxel grid per frame");
  c_vox->add_option("--data", vox.data, "dataset directory or manifest");
  c_vox->add_option("--traversal", vox.traversal, "only this traversal of the dataset");
  c_vox->add_option("--trajectory", vox.trajectory, "trajectory CSV (without --data)");
  c_vox->add_option("--cloud", vox.cloud, "point cloud CSV (without --data)");
  c_vox->add_option("--out", vox.out, "output directory")->required();

  TrainArgs tr;
  auto* c_train = app.add_subcommand("train", "train a descriptor model");
  c_train->add_option("--data", tr.data, "dataset directory or manifest")->required();
  c_train->add_option("--out", tr.out, "output directory")->required();

  ExtractArgs ex;
  auto* c_ext = app.add_subcommand("extract", "compute descriptors into DSC1 files");
  c_ext->add_option("--checkpoint", ex.checkpoint, "trained checkpoint")->required();
  c_ext->add_option("--data", ex.data, "dataset directory or manifest")->required();
  c_ext->add_option("--traversal", ex.traversal, "single traversal; --out is then a file");
  c_ext->add_option("--split", ex.split, "train, validation or test");
  c_ext->add_option("--mode", ex.mode, "appearance, structure or composite");
  c_ext->add_option("--out", ex.out, "output file or directory")->required();

  EvalMatchingArgs em;
  auto* c_em = app.add_subcommand("eval-matching", "exhaustive pairwise matching: PR curve and mAP");
  c_em->add_option("--query", em.query, "query DSC1 file")->required();
  c_em->add_option("--database", em.database, "database DSC1 file")->required();
  c_em->add_option("--query-trajectory", em.query_trajectory, "query trajectory CSV")->required();
  c_em->add_option("--database-trajectory", em.database_trajectory, "database trajectory CSV")
      ->required();
  c_em->add_option("--out", em.out, "PR curve CSV")->required();

  EvalRetrievalArgs er;
  auto* c_er = app.add_subcommand("eval-retrieval", "recall@N over all sequence pairs");
  c_er->add_option("--descriptors", er.descriptors, "DSC1 files, one per sequence")
      ->required()
      ->delimiter(',');
  c_er->add_option("--trajectories", er.trajectories, "trajectory CSVs in the same order")
      ->required()
      ->delimiter(',');
  c_er->add_option("--out", er.out, "summary CSV")->required();

  PcaArgs pa;
  auto* c_pca = app.add_subcommand("pca", "fit a PCA projection and optionally apply it");
  c_pca->add_option("--train", pa.train, "DSC1 file to fit on")->required();
  c_pca->add_option("--dim", pa.dim, "output dimension");
  c_pca->add_option("--out-model", pa.out_model, "PCA model file")->required();
  c_pca->add_option("--project", pa.project, "DSC1 file to project");
  c_pca->add_option("--out", pa.out, "projected DSC1 file");

  for (auto* sub : {c_gen, c_vox, c_train, c_ext, c_em, c_er, c_pca}) sub->fallthrough();

  std::vector<std::string> argv_store{"placefuse"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const auto& s : argv_store) argv.push_back(s.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    rc.subcommand = app.get_subcommands().front()->get_name();
    build_effective(rc);
    out << "effective config:\n" << rc.effective.echo("  ");
    if (rc.subcommand == "gen-synth") return cmd_gen_synth(rc, gen, out);
    if (rc.subcommand == "voxelize") return cmd_voxelize(rc, vox, out);
    if (rc.subcommand == "train") return cmd_train(rc, tr, out);
    if (rc.subcommand == "extract") return cmd_extract(rc, ex, out);
    if (rc.subcommand == "eval-matching") return cmd_eval_matching(rc, em, out);
    if (rc.subcommand == "eval-retrieval") return cmd_eval_retrieval(rc, er, out);
    if (rc.subcommand == "pca") return cmd_pca(rc, pa, out);
    err << "unknown subcommand " << rc.subcommand << "\n";
    return kExitUsage;
  } catch (const ConfigError& e) {
    err << "configuration error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const InputError& e) {
    err << "input error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ShapeError& e) {
    err << "shape error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const FormatError& e) {
    err << "format error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}

}  // namespace placefuse::cli
