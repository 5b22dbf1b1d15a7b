#pragma once

#include <functional>
#include <string>
#include <vector>

#include "sgt/classifier.hpp"

namespace sgt::model {

// One sample seen by the classifier: frozen-encoder node features + label.
struct TrainSample {
  Tensor features;  // N×D
  int label = 0;
};

struct ClassifierTrainConfig {
  ClassifierConfig classifier;
  double lr = 0.02;
  double momentum = 0.9;
  std::size_t batch_size = 16;
  std::size_t epochs = 50;
  std::uint64_t seed = 42;
};

struct MetricRow {
  std::size_t epoch = 0;
  std::string split;  // "train" or "test"
  double accuracy = 0.0;
  double auc = 0.0;
  double loss = 0.0;
};

struct EvalOutcome {
  double accuracy = 0.0;
  double auc = 0.0;
  double mean_loss = 0.0;
  std::vector<double> probs;  // probability of class 1 per sample
};

EvalOutcome evaluate_classifier(const ClassifierParams& params,
                                const std::vector<TrainSample>& samples,
                                const Tensor& adjacency, const Tensor& norm_adj);

struct TrainClassifierResult {
  ClassifierParams params;
  std::vector<MetricRow> trace;
};

// All samples share the patch-graph topology (adjacency fixed by grid and K).
TrainClassifierResult train_classifier(const std::vector<TrainSample>& train,
                                       const std::vector<TrainSample>& test,
                                       const Tensor& adjacency, const Tensor& norm_adj,
                                       const ClassifierTrainConfig& cfg,
                                       const std::function<void(const MetricRow&)>& on_row = {});

std::string metric_trace_csv(const std::vector<MetricRow>& trace);

}  // namespace sgt::model
