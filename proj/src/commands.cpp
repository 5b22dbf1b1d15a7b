#include "sgt/commands.hpp"

#include <cstdio>
#include <filesystem>
#include <sstream>

#include "sgt/classifier.hpp"
#include "sgt/classifier_train.hpp"
#include "sgt/corrupt.hpp"
#include "sgt/errors.hpp"
#include "sgt/manifest.hpp"
#include "sgt/metrics.hpp"
#include "sgt/netpbm.hpp"
#include "sgt/patch_graph.hpp"
#include "sgt/relevancy.hpp"
#include "sgt/selftest.hpp"
#include "sgt/tensor_io.hpp"

namespace sgt::run {

namespace fs = std::filesystem;

namespace {

void log_line(const std::string& msg) { std::fprintf(stderr, "%s\n", msg.c_str()); }

fs::path train_manifest(const RunConfig& cfg) {
  return fs::path(cfg.data_dir) / "train_manifest.json";
}
fs::path test_manifest(const RunConfig& cfg) {
  return fs::path(cfg.data_dir) / "test_manifest.json";
}
fs::path encoder_base(const RunConfig& cfg) { return fs::path(cfg.checkpoint_dir) / "encoder"; }
fs::path classifier_base(const RunConfig& cfg) {
  return fs::path(cfg.checkpoint_dir) / "classifier";
}

ssl::EncoderParams require_encoder(const RunConfig& cfg) {
  const fs::path base = encoder_base(cfg);
  fs::path manifest = base;
  manifest += ".json";
  if (!fs::exists(manifest)) {
    throw DataError("encoder checkpoint '" + manifest.string() + "' not found; run pretrain first");
  }
  return ssl::load_encoder_checkpoint(base);
}

model::ClassifierParams require_classifier(const RunConfig& cfg) {
  const fs::path base = classifier_base(cfg);
  fs::path manifest = base;
  manifest += ".json";
  if (!fs::exists(manifest)) {
    throw DataError("classifier checkpoint '" + manifest.string() +
                    "' not found; run train first");
  }
  return model::load_classifier_checkpoint(base);
}

struct GraphContext {
  graph::PatchGrid grid;
  num::Tensor adjacency;
  num::Tensor normalized;
};

GraphContext make_graph_context(const RunConfig& cfg) {
  GraphContext gc;
  gc.grid = graph::make_grid(cfg.image_size, cfg.image_size, cfg.patch_size);
  gc.adjacency = graph::build_knn_adjacency(gc.grid, cfg.knn_k);
  gc.normalized = graph::normalize_adjacency(gc.adjacency);
  return gc;
}

std::vector<model::TrainSample> featurize(const ssl::EncoderParams& encoder,
                                          const std::vector<data::Sample>& samples,
                                          const char* name) {
  std::vector<model::TrainSample> out;
  out.reserve(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    out.push_back({ssl::extract_patch_features(encoder, samples[i].image), samples[i].label});
    if ((i + 1) % 128 == 0) {
      log_line(std::string(name) + ": featurized " + std::to_string(i + 1) + "/" +
               std::to_string(samples.size()));
    }
  }
  return out;
}

}  // namespace

void cmd_gen_data(const RunConfig& cfg) {
  const fs::path dir(cfg.data_dir);
  fs::create_directories(dir);

  data::GenConfig train_cfg{cfg.n_train, cfg.image_size, cfg.patch_size,
                            num::split_seed(cfg.seed, "gen/train")};
  auto train = data::gen_dataset(train_cfg);
  auto train_entries = data::save_samples(dir, "train", train);
  data::save_manifest(train_manifest(cfg), train_entries);

  data::GenConfig test_cfg{cfg.n_test, cfg.image_size, cfg.patch_size,
                           num::split_seed(cfg.seed, "gen/test")};
  auto test = data::gen_dataset(test_cfg);
  auto test_entries = data::save_samples(dir, "test", test);
  data::save_manifest(test_manifest(cfg), test_entries);

  log_line("gen-data: wrote " + std::to_string(train.size()) + " train and " +
           std::to_string(test.size()) + " test samples under " + dir.string());
}

void cmd_pretrain(const RunConfig& cfg) {
  auto samples = data::load_samples(train_manifest(cfg), cfg.patch_size);
  char lrbuf[128];
  std::snprintf(lrbuf, sizeof(lrbuf), "pretrain: effective lr = %.6g (%.6g x %zu/256 x %.6g)",
                cfg.effective_lr(), cfg.lr_base, cfg.batch_size, cfg.lr_multiplier);
  log_line(lrbuf);

  auto result = ssl::pretrain(samples, cfg.pretrain_config(), [](const ssl::EpochStats& s) {
    char buf[192];
    std::snprintf(buf, sizeof(buf),
                  "pretrain: epoch %zu loss_cls=%.5f loss_mim=%.5f total=%.5f teacher_entropy=%.4f",
                  s.epoch, s.loss_cls, s.loss_mim, s.total, s.teacher_entropy);
    log_line(buf);
  });

  fs::create_directories(cfg.checkpoint_dir);
  fs::create_directories(cfg.output_dir);
  ssl::save_encoder_checkpoint(encoder_base(cfg), result.state.student_encoder);
  num::write_text_file(fs::path(cfg.output_dir) / "pretrain_loss.csv",
                       ssl::loss_trace_csv(result.trace));
  log_line("pretrain: saved encoder checkpoint and loss trace");
}

void cmd_train(const RunConfig& cfg) {
  ssl::EncoderParams encoder = require_encoder(cfg);
  auto train_samples = data::load_samples(train_manifest(cfg), cfg.patch_size);
  auto test_samples = data::load_samples(test_manifest(cfg), cfg.patch_size);
  GraphContext gc = make_graph_context(cfg);

  auto train_feats = featurize(encoder, train_samples, "train");
  auto test_feats = featurize(encoder, test_samples, "train");

  auto result = model::train_classifier(train_feats, test_feats, gc.adjacency, gc.normalized,
                                        cfg.classifier_train_config(),
                                        [](const model::MetricRow& r) {
                                          char buf[160];
                                          std::snprintf(buf, sizeof(buf),
                                                        "train: epoch %zu %s acc=%.4f auc=%.4f "
                                                        "loss=%.5f",
                                                        r.epoch, r.split.c_str(), r.accuracy,
                                                        r.auc, r.loss);
                                          log_line(buf);
                                        });

  fs::create_directories(cfg.checkpoint_dir);
  fs::create_directories(cfg.output_dir);
  model::save_classifier_checkpoint(classifier_base(cfg), result.params);
  num::write_text_file(fs::path(cfg.output_dir) / "train_metrics.csv",
                       model::metric_trace_csv(result.trace));
  log_line("train: saved classifier checkpoint and metric trace");
}

namespace {

struct EvalRow {
  std::string kind;
  int level;
  std::size_t n;
  double accuracy;
  double auc;
};

EvalRow eval_manifest_once(const RunConfig& cfg, const ssl::EncoderParams& encoder,
                           const model::ClassifierParams& classifier, const GraphContext& gc,
                           const std::vector<data::Sample>& samples, const std::string& kind,
                           int level) {
  std::vector<double> probs;
  std::vector<int> predictions, labels;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    num::Tensor image = samples[i].image;
    if (kind != "none" && level > 0) {
      image = data::corrupt(image, data::corruption_from_string(kind), level,
                            num::split_seed(cfg.seed, "corrupt/" + kind + "/" +
                                                          std::to_string(level) + "/" +
                                                          std::to_string(i)));
    }
    num::Tensor features = ssl::extract_patch_features(encoder, image);
    graph::Graph g;
    g.n = gc.adjacency.rows();
    g.adjacency = gc.adjacency;
    g.normalized = gc.normalized;
    g.features = features;
    const double p = model::classify_probability(classifier, g);
    probs.push_back(p);
    predictions.push_back(p > 0.5 ? 1 : 0);
    labels.push_back(samples[i].label);
  }
  return EvalRow{kind, level, samples.size(), data::accuracy(predictions, labels),
                 data::auc(probs, labels)};
}

std::string eval_csv(const std::vector<EvalRow>& rows) {
  std::ostringstream os;
  os << "kind,level,n,accuracy,auc\n";
  char buf[160];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf), "%s,%d,%zu,%.9g,%.9g\n", r.kind.c_str(), r.level, r.n,
                  r.accuracy, r.auc);
    os << buf;
  }
  return os.str();
}

}  // namespace

void cmd_eval(const RunConfig& cfg) {
  ssl::EncoderParams encoder = require_encoder(cfg);
  model::ClassifierParams classifier = require_classifier(cfg);
  const fs::path manifest =
      cfg.eval_manifest.empty() ? test_manifest(cfg) : fs::path(cfg.eval_manifest);
  auto samples = data::load_samples(manifest, cfg.patch_size);
  GraphContext gc = make_graph_context(cfg);
  fs::create_directories(cfg.output_dir);

  std::vector<EvalRow> rows;
  if (cfg.corrupt_kind == "none") {
    rows.push_back(eval_manifest_once(cfg, encoder, classifier, gc, samples, "none", 0));
    num::write_text_file(fs::path(cfg.output_dir) / "eval.csv", eval_csv(rows));
  } else {
    // Level 0 is the clean pass; levels 1..5 sweep the corruption intensity.
    for (int level = 0; level <= data::kCorruptionLevels; ++level) {
      rows.push_back(
          eval_manifest_once(cfg, encoder, classifier, gc, samples, cfg.corrupt_kind, level));
    }
    num::write_text_file(fs::path(cfg.output_dir) / ("robustness_" + cfg.corrupt_kind + ".csv"),
                         eval_csv(rows));
  }
  for (const auto& r : rows) {
    char buf[160];
    std::snprintf(buf, sizeof(buf), "eval: kind=%s level=%d n=%zu accuracy=%.4f auc=%.4f",
                  r.kind.c_str(), r.level, r.n, r.accuracy, r.auc);
    log_line(buf);
  }
}

void cmd_explain(const RunConfig& cfg) {
  if (cfg.input_image.empty()) {
    throw ConfigError("explain requires input_image to point at a PPM file");
  }
  ssl::EncoderParams encoder = require_encoder(cfg);
  model::ClassifierParams classifier = require_classifier(cfg);
  num::Tensor image = data::load_ppm(cfg.input_image);
  if (image.shape()[0] != cfg.image_size || image.shape()[1] != cfg.image_size) {
    throw DataError("explain: image " + image.shape_str() + " does not match image_size " +
                    std::to_string(cfg.image_size));
  }
  GraphContext gc = make_graph_context(cfg);
  graph::Graph g;
  g.n = gc.adjacency.rows();
  g.adjacency = gc.adjacency;
  g.normalized = gc.normalized;
  g.features = ssl::extract_patch_features(encoder, image);

  rel::Explanation ex = rel::explain(classifier, g, gc.grid, cfg.target_class);

  fs::create_directories(cfg.output_dir);
  const fs::path out(cfg.output_dir);
  data::save_pgm(out / "relevancy_patch.pgm", ex.heatmap.patch_values);
  data::save_pgm(out / "relevancy_pixel.pgm", rel::upsample_heatmap(ex.heatmap, gc.grid));
  rel::write_heatmap_csv(out / "relevancy.csv", ex.heatmap, gc.grid);
  rel::write_overlay_ppm(out / "overlay.ppm", image, ex.heatmap, gc.grid);

  char buf[160];
  std::snprintf(buf, sizeof(buf), "explain: class=%d p(fake)=%.4f predicted=%d outputs in %s",
                cfg.target_class, ex.probability_fake, ex.predicted, out.string().c_str());
  log_line(buf);
}

void cmd_corrupt(const RunConfig& cfg) {
  if (cfg.corrupt_kind == "none") {
    throw ConfigError("corrupt requires corrupt_kind to name a corruption family");
  }
  const data::Corruption kind = data::corruption_from_string(cfg.corrupt_kind);
  const fs::path manifest =
      cfg.eval_manifest.empty() ? test_manifest(cfg) : fs::path(cfg.eval_manifest);
  auto entries = data::load_manifest(manifest);
  const fs::path src_dir = manifest.parent_path();
  const fs::path out_dir = fs::path(cfg.output_dir) /
                           ("corrupt_" + cfg.corrupt_kind + "_" + std::to_string(cfg.corrupt_level));
  fs::create_directories(out_dir);

  std::vector<data::ManifestEntry> out_entries;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    num::Tensor image = data::load_ppm(src_dir / entries[i].path);
    num::Tensor corrupted =
        data::corrupt(image, kind, cfg.corrupt_level,
                      num::split_seed(cfg.seed, "corrupt/" + cfg.corrupt_kind + "/" +
                                                    std::to_string(cfg.corrupt_level) + "/" +
                                                    std::to_string(i)));
    data::save_ppm(out_dir / entries[i].path, corrupted);
    data::ManifestEntry e = entries[i];
    if (e.mask_path) {
      fs::copy_file(src_dir / *e.mask_path, out_dir / *e.mask_path,
                    fs::copy_options::overwrite_existing);
    }
    out_entries.push_back(std::move(e));
  }
  data::save_manifest(out_dir / "manifest.json", out_entries);
  log_line("corrupt: wrote " + std::to_string(out_entries.size()) + " samples to " +
           out_dir.string());
}

void cmd_graph_dump(const RunConfig& cfg) {
  if (cfg.input_image.empty()) {
    throw ConfigError("graph-dump requires input_image to point at a PPM file");
  }
  ssl::EncoderParams encoder = require_encoder(cfg);
  num::Tensor image = data::load_ppm(cfg.input_image);
  GraphContext gc = make_graph_context(cfg);
  graph::Graph g = graph::assemble_graph(ssl::extract_patch_features(encoder, image),
                                         gc.adjacency);
  std::ostringstream os;
  graph::write_graph_dump(os, g, cfg.knn_k);
  fs::create_directories(cfg.output_dir);
  num::write_text_file(fs::path(cfg.output_dir) / "graph_dump.txt", os.str());
  log_line("graph-dump: wrote " + (fs::path(cfg.output_dir) / "graph_dump.txt").string());
}

bool cmd_selftest(const RunConfig& cfg) {
  (void)cfg;
  auto results = run_selftest();
  bool all_pass = true;
  for (const auto& r : results) {
    log_line(std::string(r.pass ? "[ok]   " : "[FAIL] ") + r.name +
             (r.detail.empty() ? "" : " — " + r.detail));
    all_pass = all_pass && r.pass;
  }
  log_line(std::string("selftest: ") + (all_pass ? "all checks passed" : "FAILURES detected"));
  return all_pass;
}

std::vector<std::string> command_names() {
  return {"gen-data", "pretrain", "train", "eval", "explain", "corrupt", "graph-dump", "selftest"};
}

bool run_command(const RunConfig& cfg, const std::string& command) {
  if (command == "gen-data") cmd_gen_data(cfg);
  else if (command == "pretrain") cmd_pretrain(cfg);
  else if (command == "train") cmd_train(cfg);
  else if (command == "eval") cmd_eval(cfg);
  else if (command == "explain") cmd_explain(cfg);
  else if (command == "corrupt") cmd_corrupt(cfg);
  else if (command == "graph-dump") cmd_graph_dump(cfg);
  else if (command == "selftest") return cmd_selftest(cfg);
  else throw ConfigError("unknown command '" + command + "'");
  return true;
}

}  // namespace sgt::run
