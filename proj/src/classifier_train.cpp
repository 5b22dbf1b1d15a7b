#include "sgt/classifier_train.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "sgt/errors.hpp"
#include "sgt/metrics.hpp"
#include "sgt/optimizer.hpp"
#include "sgt/rng.hpp"

namespace sgt::model {

namespace {

graph::Graph as_graph(const Tensor& features, const Tensor& adjacency, const Tensor& norm_adj) {
  graph::Graph g;
  g.n = adjacency.rows();
  g.adjacency = adjacency;
  g.normalized = norm_adj;
  g.features = features;
  return g;
}

}  // namespace

EvalOutcome evaluate_classifier(const ClassifierParams& params,
                                const std::vector<TrainSample>& samples,
                                const Tensor& adjacency, const Tensor& norm_adj) {
  EvalOutcome out;
  std::vector<int> predictions, labels;
  double loss_acc = 0.0;
  for (const auto& s : samples) {
    num::GradientContext ctx;
    BoundClassifier bound = bind_classifier(ctx, params, false, "clf");
    ForwardResult fwd =
        classifier_forward(ctx, as_graph(s.features, adjacency, norm_adj), bound);
    Value loss = classifier_loss(ctx, fwd.logits, s.label, fwd.pool.cut_loss,
                                 fwd.pool.ortho_loss, params.config.aux_weight);
    loss_acc += ctx.value(loss)[0];
    const Tensor probs = num::softmax_rows(ctx.value(fwd.logits));
    out.probs.push_back(probs[1]);
    predictions.push_back(probs[1] > 0.5 ? 1 : 0);
    labels.push_back(s.label);
  }
  out.accuracy = data::accuracy(predictions, labels);
  out.auc = data::auc(out.probs, labels);
  out.mean_loss = loss_acc / static_cast<double>(samples.size());
  return out;
}

TrainClassifierResult train_classifier(const std::vector<TrainSample>& train,
                                       const std::vector<TrainSample>& test,
                                       const Tensor& adjacency, const Tensor& norm_adj,
                                       const ClassifierTrainConfig& cfg,
                                       const std::function<void(const MetricRow&)>& on_row) {
  if (train.empty()) throw DataError("train_classifier: empty training set");
  cfg.classifier.validate();
  if (cfg.batch_size == 0 || cfg.epochs == 0) {
    throw ConfigError("train_classifier: batch size and epochs must be positive");
  }

  TrainClassifierResult result;
  result.params = ClassifierParams::init(cfg.classifier, cfg.seed);
  ClassifierParams& params = result.params;

  std::map<std::string, Tensor*> tensors;
  params.visit("clf", [&](const std::string& name, Tensor& t) { tensors[name] = &t; });
  num::SgdMomentum optimizer(cfg.momentum);

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::vector<std::size_t> order(train.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    num::Rng shuffle_rng = num::Rng::stream(cfg.seed, "clf-shuffle/" + std::to_string(epoch));
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[shuffle_rng.below(i)]);
    }

    for (std::size_t begin = 0; begin < order.size(); begin += cfg.batch_size) {
      const std::size_t end = std::min(begin + cfg.batch_size, order.size());
      const double w = 1.0 / static_cast<double>(end - begin);
      std::map<std::string, Tensor> grad_acc;
      for (std::size_t b = begin; b < end; ++b) {
        const TrainSample& s = train[order[b]];
        num::GradientContext ctx;
        BoundClassifier bound = bind_classifier(ctx, params, true, "clf");
        ForwardResult fwd =
            classifier_forward(ctx, as_graph(s.features, adjacency, norm_adj), bound);
        Value loss = classifier_loss(ctx, fwd.logits, s.label, fwd.pool.cut_loss,
                                     fwd.pool.ortho_loss, params.config.aux_weight);
        const double loss_val = ctx.backward(loss);
        if (!std::isfinite(loss_val)) {
          throw NumericError("non-finite classifier loss at epoch " + std::to_string(epoch));
        }
        for (const auto& [name, tensor] : tensors) {
          Tensor g = ctx.grad_of(name);
          auto [it, inserted] = grad_acc.try_emplace(name, Tensor::zeros(tensor->shape()));
          Tensor& acc = it->second;
          for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += w * g[i];
        }
      }
      optimizer.step(tensors, grad_acc, cfg.lr);
    }

    EvalOutcome train_eval = evaluate_classifier(params, train, adjacency, norm_adj);
    MetricRow train_row{epoch, "train", train_eval.accuracy, train_eval.auc,
                        train_eval.mean_loss};
    result.trace.push_back(train_row);
    if (on_row) on_row(train_row);
    if (!test.empty()) {
      EvalOutcome test_eval = evaluate_classifier(params, test, adjacency, norm_adj);
      MetricRow test_row{epoch, "test", test_eval.accuracy, test_eval.auc, test_eval.mean_loss};
      result.trace.push_back(test_row);
      if (on_row) on_row(test_row);
    }
  }
  return result;
}

std::string metric_trace_csv(const std::vector<MetricRow>& trace) {
  std::ostringstream os;
  os << "epoch,split,accuracy,auc,loss\n";
  char buf[160];
  for (const auto& r : trace) {
    std::snprintf(buf, sizeof(buf), "%zu,%s,%.9g,%.9g,%.9g\n", r.epoch, r.split.c_str(),
                  r.accuracy, r.auc, r.loss);
    os << buf;
  }
  return os.str();
}

}  // namespace sgt::model
