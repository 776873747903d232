#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "classifier.hpp"
#include "dataset.hpp"

namespace cityalert {

struct TrainedModels {
    TrainedStage stage1;
    TrainedStage stage2;
};

// Stage 1 on every example; stage 2 on the emergency examples only.
inline TrainedModels train_models(std::span<const LabeledExample> examples, const std::vector<std::string>& categories,
                                  const StageConfig& stage1_config = default_stage1_config(),
                                  const StageConfig& stage2_config = default_stage2_config()) {
    std::vector<std::vector<std::string>> docs1, docs2;
    std::vector<std::string> labels1, labels2;
    for (const auto& ex : examples) {
        docs1.push_back(ex.tokens);
        labels1.push_back(ex.stage1_label);
        if (ex.stage1_label == kEmergency) {
            docs2.push_back(ex.tokens);
            labels2.push_back(ex.category.value());
        }
    }
    return {train_stage(docs1, labels1, stage1_classes(), stage1_config),
            train_stage(docs2, labels2, categories, stage2_config)};
}

// Layout: <dir>/stage{1,2}.model and <dir>/stage{1,2}.vocab.
inline void save_models(const std::string& dir, const TrainedModels& m) {
    std::filesystem::create_directories(dir);
    const std::filesystem::path d(dir);
    save_model((d / "stage1.model").string(), m.stage1);
    m.stage1.vocab.save((d / "stage1.vocab").string());
    save_model((d / "stage2.model").string(), m.stage2);
    m.stage2.vocab.save((d / "stage2.vocab").string());
}

inline TrainedModels load_models(const std::string& dir) {
    const std::filesystem::path d(dir);
    return {load_stage((d / "stage1.model").string(), (d / "stage1.vocab").string()),
            load_stage((d / "stage2.model").string(), (d / "stage2.vocab").string())};
}

} // namespace cityalert
