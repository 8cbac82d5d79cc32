#pragma once

#include <string>
#include <vector>

#include <torch/torch.h>

#include "percept/classifier.hpp"
#include "percept/stream.hpp"

namespace percept {

struct EvalReport {
    std::vector<std::string> classes;
    std::vector<double> fold_accuracies;
    torch::Tensor confusion_counts;

    double mean_accuracy() const;
    torch::Tensor row_normalized() const;
    std::vector<double> per_class_accuracy() const;
    std::vector<std::string> empty_classes() const;
};

EvalReport make_eval_report(const std::vector<std::string>& classes);
void accumulate_fold(EvalReport& report, const VotedEval& eval);

double reference_accuracy(AblationMode mode);

std::string format_real(double value, int precision = 6);

void write_metrics_csv(const std::string& path, const EvalReport& report);
void write_epoch_csv(const std::string& path, const std::vector<StreamLosses>& epochs);
void write_accuracy_csv(const std::string& path, const std::vector<double>& epoch_losses,
                        const std::vector<double>& val_accuracies);
void write_confusion_csv(const std::string& path, const EvalReport& report);

struct AblationRow {
    std::string mode;
    double accuracy = 0.0;
    double reference = 0.0;
};

void write_ablation_csv(const std::string& path, const std::vector<AblationRow>& rows);

void write_embeddings_csv(const std::string& path, const std::vector<std::string>& sample_ids,
                          const std::vector<std::string>& labels, const torch::Tensor& vectors);

void write_sweep_csv(const std::string& path, const std::vector<double>& gammas,
                     const std::vector<double>& distances);

}  // namespace percept
