#include "percept/metrics.hpp"

#include <cstdio>
#include <fstream>

#include "percept/errors.hpp"

namespace percept {

namespace {

std::ofstream open_csv(const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) {
        throw DataError("cannot open output file: " + path);
    }
    return out;
}

void finish_csv(std::ofstream& out, const std::string& path) {
    out.flush();
    if (!out) {
        throw DataError("failed to write output file: " + path);
    }
}

}  // namespace

double EvalReport::mean_accuracy() const {
    if (fold_accuracies.empty()) return 0.0;
    double sum = 0.0;
    for (const double a : fold_accuracies) sum += a;
    return sum / static_cast<double>(fold_accuracies.size());
}

torch::Tensor EvalReport::row_normalized() const {
    auto counts = confusion_counts.to(torch::kFloat64);
    auto totals = counts.sum(1, true);
    auto safe = torch::where(totals > 0, totals, torch::ones_like(totals));
    return counts / safe;
}

std::vector<double> EvalReport::per_class_accuracy() const {
    auto normalized = row_normalized();
    std::vector<double> out;
    out.reserve(classes.size());
    for (int64_t c = 0; c < static_cast<int64_t>(classes.size()); ++c) {
        out.push_back(normalized[c][c].item<double>() * 100.0);
    }
    return out;
}

std::vector<std::string> EvalReport::empty_classes() const {
    auto totals = confusion_counts.sum(1);
    std::vector<std::string> out;
    for (int64_t c = 0; c < static_cast<int64_t>(classes.size()); ++c) {
        if (totals[c].item<int64_t>() == 0) out.push_back(classes[c]);
    }
    return out;
}

EvalReport make_eval_report(const std::vector<std::string>& classes) {
    EvalReport report;
    report.classes = classes;
    const auto c = static_cast<int64_t>(classes.size());
    report.confusion_counts = torch::zeros({c, c}, torch::kInt64);
    return report;
}

void accumulate_fold(EvalReport& report, const VotedEval& eval) {
    if (eval.confusion_counts.sizes() != report.confusion_counts.sizes()) {
        throw DimensionError("confusion matrix size mismatch while accumulating folds");
    }
    report.fold_accuracies.push_back(eval.accuracy_pct);
    report.confusion_counts += eval.confusion_counts;
}

double reference_accuracy(AblationMode mode) {
    switch (mode) {
        case AblationMode::face_only:
            return 68.06;
        case AblationMode::face_face:
            return 68.99;
        case AblationMode::audio_only:
            return 48.66;
        case AblationMode::strict_audio:
            return 79.64;
        case AblationMode::face_context:
            return 81.01;
    }
    throw ArgumentError("unknown ablation mode");
}

std::string format_real(double value, int precision) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", precision, value);
    return buf;
}

void write_metrics_csv(const std::string& path, const EvalReport& report) {
    auto out = open_csv(path);
    out << "fold,accuracy\n";
    for (size_t i = 0; i < report.fold_accuracies.size(); ++i) {
        out << i << "," << format_real(report.fold_accuracies[i]) << "\n";
    }
    out << "mean," << format_real(report.mean_accuracy()) << "\n";
    finish_csv(out, path);
}

void write_epoch_csv(const std::string& path, const std::vector<StreamLosses>& epochs) {
    auto out = open_csv(path);
    out << "epoch,prior,feature,gan\n";
    for (size_t i = 0; i < epochs.size(); ++i) {
        out << i << "," << format_real(epochs[i].prior) << "," << format_real(epochs[i].feature)
            << "," << format_real(epochs[i].gan) << "\n";
    }
    finish_csv(out, path);
}

void write_accuracy_csv(const std::string& path, const std::vector<double>& epoch_losses,
                        const std::vector<double>& val_accuracies) {
    if (epoch_losses.size() != val_accuracies.size()) {
        throw DimensionError("loss and accuracy logs differ in length");
    }
    auto out = open_csv(path);
    out << "epoch,loss,val_accuracy\n";
    for (size_t i = 0; i < epoch_losses.size(); ++i) {
        out << i << "," << format_real(epoch_losses[i]) << "," << format_real(val_accuracies[i])
            << "\n";
    }
    finish_csv(out, path);
}

void write_confusion_csv(const std::string& path, const EvalReport& report) {
    auto out = open_csv(path);
    out << "class";
    for (const auto& name : report.classes) out << "," << name;
    out << "\n";
    auto normalized = report.row_normalized();
    for (size_t r = 0; r < report.classes.size(); ++r) {
        out << report.classes[r];
        for (size_t c = 0; c < report.classes.size(); ++c) {
            out << ","
                << format_real(normalized[static_cast<int64_t>(r)][static_cast<int64_t>(c)]
                                   .item<double>());
        }
        out << "\n";
    }
    finish_csv(out, path);
}

void write_ablation_csv(const std::string& path, const std::vector<AblationRow>& rows) {
    auto out = open_csv(path);
    out << "mode,accuracy,reference_accuracy\n";
    for (const auto& row : rows) {
        out << row.mode << "," << format_real(row.accuracy) << "," << format_real(row.reference, 2)
            << "\n";
    }
    finish_csv(out, path);
}

void write_embeddings_csv(const std::string& path, const std::vector<std::string>& sample_ids,
                          const std::vector<std::string>& labels, const torch::Tensor& vectors) {
    if (vectors.dim() != 2) {
        throw DimensionError("embedding matrix must be 2-D");
    }
    const auto n = vectors.size(0);
    if (static_cast<int64_t>(sample_ids.size()) != n ||
        static_cast<int64_t>(labels.size()) != n) {
        throw DimensionError("embedding rows and sample ids differ in length");
    }
    auto values = vectors.detach().to(torch::kFloat64).contiguous();
    const auto d = values.size(1);
    auto out = open_csv(path);
    out << "sample_id,class";
    for (int64_t j = 0; j < d; ++j) out << ",dim_" << j;
    out << "\n";
    const auto* data = values.const_data_ptr<double>();
    for (int64_t i = 0; i < n; ++i) {
        out << sample_ids[static_cast<size_t>(i)] << "," << labels[static_cast<size_t>(i)];
        for (int64_t j = 0; j < d; ++j) {
            out << "," << format_real(data[i * d + j]);
        }
        out << "\n";
    }
    finish_csv(out, path);
}

void write_sweep_csv(const std::string& path, const std::vector<double>& gammas,
                     const std::vector<double>& distances) {
    if (gammas.size() != distances.size()) {
        throw DimensionError("gamma sweep and distance lists differ in length");
    }
    auto out = open_csv(path);
    out << "gamma,distance_to_base,monotone\n";
    double prev = 0.0;
    for (size_t i = 0; i < gammas.size(); ++i) {
        const bool monotone = i == 0 || distances[i] + 1e-9 >= prev;
        out << format_real(gammas[i], 1) << "," << format_real(distances[i]) << ","
            << (monotone ? 1 : 0) << "\n";
        prev = distances[i];
    }
    finish_csv(out, path);
}

}  // namespace percept
