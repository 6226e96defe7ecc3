#include "bvcl/checkpoint.hpp"

#include <fstream>

#include <json.hpp>

#include "bvcl/error.hpp"

namespace bvcl {

using nlohmann::json;

namespace {

json hyper_to_json(const HyperParams& h) {
    return json{{"learning_rate", h.learning_rate},
                {"beta", h.beta},
                {"epochs", h.epochs},
                {"batch_size", h.batch_size},
                {"s_train", h.s_train},
                {"s_test", h.s_test},
                {"prior_sigma", h.prior_sigma},
                {"init_log_sigma", h.init_log_sigma},
                {"adam_beta1", h.adam_beta1},
                {"adam_beta2", h.adam_beta2},
                {"adam_epsilon", h.adam_epsilon}};
}

HyperParams hyper_from_json(const json& j) {
    HyperParams h;
    h.learning_rate = j.at("learning_rate").get<double>();
    h.beta = j.at("beta").get<double>();
    h.epochs = j.at("epochs").get<std::size_t>();
    h.batch_size = j.at("batch_size").get<std::size_t>();
    h.s_train = j.at("s_train").get<std::size_t>();
    h.s_test = j.at("s_test").get<std::size_t>();
    h.prior_sigma = j.at("prior_sigma").get<double>();
    h.init_log_sigma = j.at("init_log_sigma").get<double>();
    h.adam_beta1 = j.at("adam_beta1").get<double>();
    h.adam_beta2 = j.at("adam_beta2").get<double>();
    h.adam_epsilon = j.at("adam_epsilon").get<double>();
    return h;
}

json block_to_json(const MeanFieldGaussian& b) {
    return json{{"mu", b.mu}, {"log_sigma", b.log_sigma}};
}

MeanFieldGaussian block_from_json(const json& j) {
    MeanFieldGaussian b;
    b.mu = j.at("mu").get<std::vector<double>>();
    b.log_sigma = j.at("log_sigma").get<std::vector<double>>();
    if (b.mu.size() != b.log_sigma.size())
        throw DataError("checkpoint: block mu/log_sigma length mismatch");
    return b;
}

}  // namespace

std::string checkpoint_to_json(const Checkpoint& ckpt) {
    const auto& post = ckpt.posterior;
    json j;
    j["version"] = 1;
    j["architecture"] = {{"input_dim", post.arch.input_dim},
                         {"hidden_sizes", post.arch.hidden_sizes},
                         {"head_sizes", post.arch.head_sizes}};
    j["hyper"] = hyper_to_json(ckpt.hyper);
    j["task_names"] = ckpt.task_names;
    j["trained_heads"] =
        std::vector<std::size_t>(post.trained_heads.begin(), post.trained_heads.end());
    j["shared"] = json::array();
    for (const auto& b : post.shared) j["shared"].push_back(block_to_json(b));
    j["heads"] = json::array();
    for (const auto& b : post.heads) j["heads"].push_back(block_to_json(b));
    return j.dump(2);
}

Checkpoint checkpoint_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw DataError(std::string("checkpoint: invalid JSON: ") + e.what());
    }
    try {
        if (j.at("version").get<int>() != 1)
            throw DataError("checkpoint: unsupported version");
        Checkpoint ckpt;
        auto& post = ckpt.posterior;
        const auto& arch = j.at("architecture");
        post.arch.input_dim = arch.at("input_dim").get<std::size_t>();
        post.arch.hidden_sizes = arch.at("hidden_sizes").get<std::vector<std::size_t>>();
        post.arch.head_sizes = arch.at("head_sizes").get<std::vector<std::size_t>>();
        post.arch.validate();
        ckpt.hyper = hyper_from_json(j.at("hyper"));
        ckpt.task_names = j.at("task_names").get<std::vector<std::string>>();
        for (auto h : j.at("trained_heads").get<std::vector<std::size_t>>())
            post.trained_heads.insert(h);
        for (const auto& b : j.at("shared")) post.shared.push_back(block_from_json(b));
        for (const auto& b : j.at("heads")) post.heads.push_back(block_from_json(b));
        if (post.shared.size() != post.arch.shared_layers() ||
            post.heads.size() != post.arch.head_sizes.size())
            throw DataError("checkpoint: block count does not match architecture");
        for (std::size_t l = 0; l < post.shared.size(); ++l) {
            const std::size_t want =
                (post.arch.shared_fan_in(l) + 1) * post.arch.shared_fan_out(l);
            if (post.shared[l].size() != want)
                throw DataError("checkpoint: shared block size mismatch");
        }
        for (std::size_t k = 0; k < post.heads.size(); ++k) {
            const std::size_t want = (post.arch.head_fan_in() + 1) * post.arch.head_sizes[k];
            if (post.heads[k].size() != want)
                throw DataError("checkpoint: head block size mismatch");
        }
        return ckpt;
    } catch (const json::exception& e) {
        throw DataError(std::string("checkpoint: missing or malformed field: ") + e.what());
    }
}

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write checkpoint: " + path);
    out << checkpoint_to_json(ckpt) << '\n';
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open checkpoint: " + path);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return checkpoint_from_json(text);
}

}  // namespace bvcl
