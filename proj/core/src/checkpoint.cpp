#include "percept/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "percept/errors.hpp"

namespace percept {

namespace {

constexpr char kMagic[6] = {'P', 'C', 'K', 'P', 'T', '\n'};
constexpr uint32_t kVersion = 1;

std::string dtype_name(torch::Dtype d) {
    if (d == torch::kFloat32) return "f32";
    if (d == torch::kFloat64) return "f64";
    if (d == torch::kInt64) return "i64";
    throw DataError("unsupported checkpoint tensor dtype");
}

torch::Dtype dtype_from_name(const std::string& name) {
    if (name == "f32") return torch::kFloat32;
    if (name == "f64") return torch::kFloat64;
    if (name == "i64") return torch::kInt64;
    throw DataError("unknown checkpoint tensor dtype: " + name);
}

}  // namespace

const torch::Tensor* Checkpoint::find(const std::string& name) const {
    for (const auto& [n, t] : tensors) {
        if (n == name) return &t;
    }
    return nullptr;
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
    nlohmann::json dir = nlohmann::json::array();
    std::vector<torch::Tensor> flat;
    uint64_t offset = 0;
    for (const auto& [name, tensor] : ckpt.tensors) {
        auto t = tensor.detach().to(torch::kCPU).contiguous();
        const uint64_t bytes = t.numel() * t.element_size();
        dir.push_back({{"name", name},
                       {"dtype", dtype_name(t.scalar_type())},
                       {"shape", t.sizes().vec()},
                       {"offset", offset},
                       {"bytes", bytes}});
        offset += bytes;
        flat.push_back(t);
    }
    nlohmann::json header;
    header["meta"] = ckpt.meta;
    header["tensors"] = dir;
    const std::string header_bytes = header.dump();

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw DataError("cannot open checkpoint for writing: " + path);
    }
    out.write(kMagic, sizeof(kMagic));
    uint32_t version = kVersion;
    out.write(reinterpret_cast<const char*>(&version), sizeof(version));
    uint64_t header_len = header_bytes.size();
    out.write(reinterpret_cast<const char*>(&header_len), sizeof(header_len));
    out.write(header_bytes.data(), static_cast<std::streamsize>(header_bytes.size()));
    for (const auto& t : flat) {
        out.write(static_cast<const char*>(t.const_data_ptr()),
                  static_cast<std::streamsize>(t.numel() * t.element_size()));
    }
    if (!out) {
        throw DataError("failed to write checkpoint: " + path);
    }
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw DataError("cannot open checkpoint: " + path);
    }
    char magic[sizeof(kMagic)];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
        throw DataError("not a checkpoint file: " + path);
    }
    uint32_t version = 0;
    in.read(reinterpret_cast<char*>(&version), sizeof(version));
    if (!in || version != kVersion) {
        throw DataError("unsupported checkpoint version in " + path);
    }
    uint64_t header_len = 0;
    in.read(reinterpret_cast<char*>(&header_len), sizeof(header_len));
    std::string header_bytes(header_len, '\0');
    in.read(header_bytes.data(), static_cast<std::streamsize>(header_len));
    if (!in) {
        throw DataError("truncated checkpoint header in " + path);
    }

    nlohmann::json header;
    try {
        header = nlohmann::json::parse(header_bytes);
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("malformed checkpoint header: ") + e.what());
    }

    Checkpoint ckpt;
    ckpt.meta = header.value("meta", nlohmann::json::object());
    for (const auto& entry : header.at("tensors")) {
        const auto name = entry.at("name").get<std::string>();
        const auto dtype = dtype_from_name(entry.at("dtype").get<std::string>());
        const auto shape = entry.at("shape").get<std::vector<int64_t>>();
        const auto bytes = entry.at("bytes").get<uint64_t>();

        auto t = torch::empty(shape, torch::TensorOptions().dtype(dtype));
        if (static_cast<uint64_t>(t.numel() * t.element_size()) != bytes) {
            throw DataError("checkpoint tensor size mismatch for " + name);
        }
        in.read(static_cast<char*>(t.data_ptr()), static_cast<std::streamsize>(bytes));
        if (!in) {
            throw DataError("truncated checkpoint payload in " + path);
        }
        ckpt.tensors.emplace_back(name, t);
    }
    return ckpt;
}

nlohmann::json stream_config_to_json(const StreamConfig& cfg) {
    return {{"input_channels", cfg.input_channels},
            {"input_size", cfg.input_size},
            {"latent_dim", cfg.latent_dim},
            {"encoder_depth", cfg.encoder_depth},
            {"decoder_depth", cfg.decoder_depth},
            {"base_channels", cfg.base_channels},
            {"feature_layer_index", cfg.feature_layer_index},
            {"beta", cfg.beta},
            {"learning_rate", cfg.learning_rate},
            {"weight_decay", cfg.weight_decay}};
}

StreamConfig stream_config_from_json(const nlohmann::json& j) {
    StreamConfig cfg;
    cfg.input_channels = j.at("input_channels").get<int64_t>();
    cfg.input_size = j.at("input_size").get<int64_t>();
    cfg.latent_dim = j.at("latent_dim").get<int64_t>();
    cfg.encoder_depth = j.at("encoder_depth").get<int64_t>();
    cfg.decoder_depth = j.at("decoder_depth").get<int64_t>();
    cfg.base_channels = j.at("base_channels").get<int64_t>();
    cfg.feature_layer_index = j.at("feature_layer_index").get<int64_t>();
    cfg.beta = j.at("beta").get<double>();
    cfg.learning_rate = j.at("learning_rate").get<double>();
    cfg.weight_decay = j.at("weight_decay").get<double>();
    return cfg;
}

void copy_named_tensors(const Checkpoint& src, const std::string& prefix,
                        const std::vector<std::pair<std::string, torch::Tensor>>& dst) {
    torch::NoGradGuard guard;
    for (const auto& [name, param] : dst) {
        const auto* stored = src.find(prefix + name);
        if (stored == nullptr) {
            throw DataError("checkpoint is missing tensor " + prefix + name);
        }
        if (stored->sizes() != param.sizes()) {
            throw DataError("checkpoint tensor shape mismatch for " + prefix + name);
        }
        param.copy_(*stored);
    }
}

void save_stream_checkpoint(const std::string& path, const ReconstructionStream& stream,
                            const std::string& kind) {
    Checkpoint ckpt;
    ckpt.meta["format"] = "stream";
    ckpt.meta["kind"] = kind;
    ckpt.meta["config"] = stream_config_to_json(stream.config());
    ckpt.tensors = stream.named_parameters();
    save_checkpoint(path, ckpt);
}

std::unique_ptr<ReconstructionStream> load_stream_checkpoint(const std::string& path,
                                                             std::string* kind) {
    auto ckpt = load_checkpoint(path);
    if (ckpt.meta.value("format", "") != "stream") {
        throw DataError("not a stream checkpoint: " + path);
    }
    const auto cfg = stream_config_from_json(ckpt.meta.at("config"));
    auto stream = std::make_unique<ReconstructionStream>(cfg, 0);
    copy_named_tensors(ckpt, "", stream->named_parameters());
    if (kind != nullptr) {
        *kind = ckpt.meta.value("kind", "");
    }
    return stream;
}

namespace {

std::vector<std::pair<std::string, torch::Tensor>> can_named(const ContextAttention& can) {
    std::vector<std::pair<std::string, torch::Tensor>> out;
    for (const auto& item : can->named_parameters()) {
        out.emplace_back(item.key(), item.value());
    }
    return out;
}

}  // namespace

void save_model_bundle(const std::string& path, const ModelBundleView& bundle) {
    Checkpoint ckpt;
    ckpt.meta["format"] = "model";
    ckpt.meta["face_config"] = stream_config_to_json(bundle.face.config());
    ckpt.meta["context_config"] = stream_config_to_json(bundle.context.config());
    ckpt.meta["classes"] = bundle.classes;
    ckpt.meta["test_identities"] = bundle.test_identities;
    ckpt.meta["mode"] = bundle.mode;
    ckpt.meta["gamma"] = bundle.gamma;

    for (const auto& [name, t] : bundle.face.named_parameters()) {
        ckpt.tensors.emplace_back("face." + name, t);
    }
    for (const auto& [name, t] : bundle.context.named_parameters()) {
        ckpt.tensors.emplace_back("context." + name, t);
    }
    for (const auto& [name, t] : can_named(bundle.can)) {
        ckpt.tensors.emplace_back("can." + name, t);
    }
    ckpt.tensors.emplace_back("head.weight", bundle.head.weight);
    ckpt.tensors.emplace_back("head.bias", bundle.head.bias);
    save_checkpoint(path, ckpt);
}

ModelBundle load_model_bundle(const std::string& path) {
    auto ckpt = load_checkpoint(path);
    if (ckpt.meta.value("format", "") != "model") {
        throw DataError("not a model checkpoint: " + path);
    }
    ModelBundle bundle;
    const auto face_cfg = stream_config_from_json(ckpt.meta.at("face_config"));
    const auto ctx_cfg = stream_config_from_json(ckpt.meta.at("context_config"));
    bundle.face = std::make_unique<ReconstructionStream>(face_cfg, 0);
    bundle.context = std::make_unique<ReconstructionStream>(ctx_cfg, 0);
    copy_named_tensors(ckpt, "face.", bundle.face->named_parameters());
    copy_named_tensors(ckpt, "context.", bundle.context->named_parameters());

    bundle.can = ContextAttention(face_cfg.latent_dim);
    copy_named_tensors(ckpt, "can.", can_named(bundle.can));

    bundle.classes = ckpt.meta.at("classes").get<std::vector<std::string>>();
    if (ckpt.meta.contains("test_identities")) {
        bundle.test_identities = ckpt.meta.at("test_identities").get<std::vector<std::string>>();
    }
    bundle.mode = ckpt.meta.value("mode", "face_context");
    bundle.gamma = ckpt.meta.value("gamma", 1.0);

    const auto* w = ckpt.find("head.weight");
    const auto* b = ckpt.find("head.bias");
    if (w == nullptr || b == nullptr) {
        throw DataError("model checkpoint is missing the classifier head");
    }
    bundle.head.weight = w->clone();
    bundle.head.bias = b->clone();

    bundle.face->freeze();
    bundle.context->freeze();
    return bundle;
}

}  // namespace percept
