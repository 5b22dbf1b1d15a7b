#include "sgt/pretrain.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "json.hpp"
#include "sgt/errors.hpp"
#include "sgt/tensor_io.hpp"

namespace sgt::ssl {

namespace {

void check_finite(const std::map<std::string, Tensor*>& params, std::size_t step) {
  for (const auto& [name, tensor] : params) {
    if (!tensor->all_finite()) {
      throw NumericError("non-finite value in tensor '" + name + "' after step " +
                         std::to_string(step));
    }
  }
}

}  // namespace

PretrainResult pretrain(const std::vector<data::Sample>& dataset, const PretrainConfig& cfg,
                        const std::function<void(const EpochStats&)>& on_epoch) {
  if (dataset.empty()) throw DataError("pretrain: dataset is empty");
  cfg.encoder.validate();
  cfg.distill.validate();
  if (cfg.batch_size == 0 || cfg.epochs == 0) {
    throw ConfigError("pretrain: batch size and epochs must be positive");
  }

  PretrainResult result;
  result.state = StudentTeacherState::init(cfg.encoder, cfg.distill, cfg.seed);
  StudentTeacherState& state = result.state;

  std::map<std::string, Tensor*> student_params;
  state.visit_student(
      [&](const std::string& name, Tensor& t) { student_params[name] = &t; });

  // Center warmup: seed c with the mean teacher CLS logits over the first
  // batch so the sharpened teacher distribution starts centered instead of
  // riding the initial prototype bias.
  {
    const std::size_t warm = std::min(cfg.batch_size, dataset.size());
    Tensor warm_logits({warm, cfg.distill.prototypes});
    for (std::size_t i = 0; i < warm; ++i) {
      num::GradientContext ctx;
      BoundEncoder enc = bind_encoder(ctx, state.teacher_encoder, false, "t");
      BoundProjection head = bind_projection(ctx, state.teacher_head, false, "th");
      Encoded encoded = encode(ctx, dataset[i].image, {}, enc);
      const Tensor& logits = ctx.value(head_logits(ctx, encoded.cls, head));
      std::copy(logits.data(), logits.data() + logits.size(),
                warm_logits.data() + i * cfg.distill.prototypes);
    }
    const double saved_momentum = state.distill.center_momentum;
    state.distill.center_momentum = 0.0;
    update_center(state, warm_logits);
    state.distill.center_momentum = saved_momentum;
  }

  num::SgdMomentum optimizer(cfg.momentum);
  const double lr_eff = effective_lr(cfg.lr_base, cfg.batch_size) * cfg.lr_multiplier;
  const std::size_t steps_per_epoch = (dataset.size() + cfg.batch_size - 1) / cfg.batch_size;
  const std::size_t total_steps = steps_per_epoch * cfg.epochs;
  const std::size_t grid_side = cfg.encoder.grid();

  std::size_t step = 0;
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    // Epoch-specific sample order.
    std::vector<std::size_t> order(dataset.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    num::Rng shuffle_rng = num::Rng::stream(cfg.seed, "shuffle/" + std::to_string(epoch));
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[shuffle_rng.below(i)]);
    }

    EpochStats stats;
    stats.epoch = epoch;
    double entropy_acc = 0.0;
    std::size_t batches = 0;

    for (std::size_t begin = 0; begin < order.size(); begin += cfg.batch_size) {
      const std::size_t end = std::min(begin + cfg.batch_size, order.size());
      const std::size_t batch = end - begin;

      std::map<std::string, Tensor> grad_acc;
      double batch_cls = 0.0, batch_mim = 0.0;
      std::vector<Tensor> teacher_logits;

      for (std::size_t b = begin; b < end; ++b) {
        const std::size_t idx = order[b];
        const std::string tag = std::to_string(epoch) + "/" + std::to_string(idx);
        auto [u, v] = augment_pair(dataset[idx].image, cfg.augment,
                                   num::split_seed(cfg.seed, "augment/" + tag));
        MaskSpec mask_u =
            blockwise_mask(grid_side, cfg.mask_ratio, num::split_seed(cfg.seed, "mask_u/" + tag));
        MaskSpec mask_v =
            blockwise_mask(grid_side, cfg.mask_ratio, num::split_seed(cfg.seed, "mask_v/" + tag));

        num::GradientContext ctx;
        LossBuild loss = build_loss(ctx, state, u, v, mask_u, mask_v);
        const double total = ctx.backward(loss.total);
        if (!std::isfinite(total)) {
          throw NumericError("non-finite loss at epoch " + std::to_string(epoch));
        }
        batch_cls += ctx.value(loss.cls)[0];
        batch_mim += ctx.value(loss.mim)[0];
        teacher_logits.push_back(loss.teacher_cls_logits);

        const double w = 1.0 / static_cast<double>(batch);
        for (const auto& [name, tensor] : student_params) {
          Tensor g = ctx.grad_of(name);
          auto [it, inserted] = grad_acc.try_emplace(name, Tensor::zeros(tensor->shape()));
          Tensor& acc = it->second;
          for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += w * g[i];
        }
      }

      // Cosine-decayed learning rate over the full run.
      const double lr =
          lr_eff * 0.5 *
          (1.0 + std::cos(std::numbers::pi * static_cast<double>(step) /
                          static_cast<double>(total_steps)));
      optimizer.step(student_params, grad_acc, lr);
      check_finite(student_params, step);
      ema_update_teacher(state);

      // Center update from this batch's teacher CLS logits (both views).
      Tensor stacked({teacher_logits.size() * 2, state.distill.prototypes});
      for (std::size_t i = 0; i < teacher_logits.size(); ++i) {
        std::copy(teacher_logits[i].data(), teacher_logits[i].data() + teacher_logits[i].size(),
                  stacked.data() + i * teacher_logits[i].size());
      }
      update_center(state, stacked);
      {
        Tensor shifted = stacked;
        for (std::size_t r = 0; r < shifted.rows(); ++r)
          for (std::size_t c = 0; c < shifted.cols(); ++c)
            shifted.at(r, c) = (shifted.at(r, c) - state.center[c]) / state.distill.teacher_temp;
        entropy_acc += teacher_mean_entropy(num::softmax_rows(shifted));
      }

      stats.loss_cls += batch_cls / static_cast<double>(batch);
      stats.loss_mim += batch_mim / static_cast<double>(batch);
      ++batches;
      ++step;
    }

    stats.loss_cls /= static_cast<double>(batches);
    stats.loss_mim /= static_cast<double>(batches);
    stats.total = stats.loss_cls + stats.loss_mim;
    stats.teacher_entropy = entropy_acc / static_cast<double>(batches);
    result.trace.push_back(stats);
    if (on_epoch) on_epoch(stats);
  }
  return result;
}

void save_encoder_checkpoint(const std::filesystem::path& base, const EncoderParams& encoder) {
  std::vector<num::NamedTensor> tensors;
  EncoderParams copy = encoder;
  copy.visit("encoder", [&](const std::string& name, Tensor& t) {
    tensors.push_back({name, t});
  });
  std::filesystem::path tensor_path = base;
  tensor_path += ".tensors";
  num::write_tensors_file(tensor_path, tensors);

  nlohmann::json manifest;
  manifest["kind"] = "encoder";
  manifest["config"] = {{"image_size", encoder.config.image_size},
                        {"patch_size", encoder.config.patch_size},
                        {"dim", encoder.config.dim},
                        {"heads", encoder.config.heads},
                        {"depth", encoder.config.depth},
                        {"mlp_dim", encoder.config.mlp_dim}};
  std::vector<std::string> names;
  for (const auto& nt : tensors) names.push_back(nt.name);
  manifest["tensors"] = names;
  std::filesystem::path json_path = base;
  json_path += ".json";
  num::write_text_file(json_path, manifest.dump(2) + "\n");
}

EncoderParams load_encoder_checkpoint(const std::filesystem::path& base) {
  std::filesystem::path json_path = base;
  json_path += ".json";
  std::ifstream is(json_path);
  if (!is) throw DataError("cannot open checkpoint manifest '" + json_path.string() + "'");
  nlohmann::json manifest = nlohmann::json::parse(is, nullptr, false);
  if (manifest.is_discarded() || manifest.value("kind", "") != "encoder") {
    throw DataError("'" + json_path.string() + "' is not an encoder checkpoint manifest");
  }
  EncoderConfig cfg;
  const auto& c = manifest.at("config");
  cfg.image_size = c.at("image_size").get<std::size_t>();
  cfg.patch_size = c.at("patch_size").get<std::size_t>();
  cfg.dim = c.at("dim").get<std::size_t>();
  cfg.heads = c.at("heads").get<std::size_t>();
  cfg.depth = c.at("depth").get<std::size_t>();
  cfg.mlp_dim = c.at("mlp_dim").get<std::size_t>();

  EncoderParams params = EncoderParams::init(cfg, 0);
  std::filesystem::path tensor_path = base;
  tensor_path += ".tensors";
  auto tensors = num::read_tensors_file(tensor_path);
  std::map<std::string, const Tensor*> by_name;
  for (const auto& nt : tensors) by_name[nt.name] = &nt.tensor;
  params.visit("encoder", [&](const std::string& name, Tensor& t) {
    auto it = by_name.find(name);
    if (it == by_name.end()) throw DataError("checkpoint missing tensor '" + name + "'");
    if (!it->second->same_shape(t)) {
      throw DataError("checkpoint tensor '" + name + "' has shape " + it->second->shape_str() +
                      ", expected " + t.shape_str());
    }
    t = *it->second;
  });
  return params;
}

std::string loss_trace_csv(const std::vector<EpochStats>& trace) {
  std::ostringstream os;
  os << "epoch,loss_cls,loss_mim,total\n";
  char buf[128];
  for (const auto& s : trace) {
    std::snprintf(buf, sizeof(buf), "%zu,%.9g,%.9g,%.9g\n", s.epoch, s.loss_cls, s.loss_mim,
                  s.total);
    os << buf;
  }
  return os.str();
}

}  // namespace sgt::ssl
