#include "vcolor/checkpoint.hpp"

#include <fstream>
#include <iterator>
#include <sstream>

#include "vcolor/error.hpp"

namespace vcolor {

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
    c10::Dict<std::string, torch::Tensor> tensors;
    for (const auto& [k, v] : ckpt.tensors) tensors.insert(k, v.detach().cpu().contiguous());
    c10::Dict<std::string, std::string> meta;
    for (const auto& [k, v] : ckpt.meta) meta.insert(k, v);
    c10::impl::GenericDict root(c10::StringType::get(), c10::AnyType::get());
    root.insert("format", std::string("vcolor-checkpoint-1"));
    root.insert("tensors", tensors);
    root.insert("config", ckpt.config_text);
    root.insert("meta", meta);

    auto bytes = torch::pickle_save(c10::IValue(root));
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) fail(ErrorCategory::Io, "cannot write checkpoint " + path.string());
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!f) fail(ErrorCategory::Io, "short write on checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) fail(ErrorCategory::Io, "cannot read checkpoint " + path.string());
    std::vector<char> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());

    c10::IValue root_value;
    try {
        root_value = torch::pickle_load(bytes);
    } catch (const c10::Error& e) {
        fail(ErrorCategory::Checkpoint, "not a checkpoint archive: " + path.string());
    }
    if (!root_value.isGenericDict()) fail(ErrorCategory::Checkpoint, "malformed checkpoint " + path.string());
    auto root = root_value.toGenericDict();
    if (!root.contains("format") || root.at("format").toStringRef() != "vcolor-checkpoint-1")
        fail(ErrorCategory::Checkpoint, "unsupported checkpoint format in " + path.string());

    Checkpoint ckpt;
    for (const auto& item : root.at("tensors").toGenericDict())
        ckpt.tensors[item.key().toStringRef()] = item.value().toTensor();
    ckpt.config_text = root.at("config").toStringRef();
    for (const auto& item : root.at("meta").toGenericDict())
        ckpt.meta[item.key().toStringRef()] = item.value().toStringRef();
    return ckpt;
}

void export_module(const torch::nn::Module& module, const std::string& prefix,
                   std::map<std::string, torch::Tensor>& out) {
    for (const auto& p : module.named_parameters(true)) out[prefix + p.key()] = p.value().detach().clone();
    for (const auto& b : module.named_buffers(true)) out[prefix + b.key()] = b.value().detach().clone();
}

void import_module(torch::nn::Module& module, const std::string& prefix,
                   const std::map<std::string, torch::Tensor>& tensors) {
    std::vector<std::pair<torch::Tensor, torch::Tensor>> plan;
    std::ostringstream problems;
    int n_problems = 0;

    auto visit = [&](const std::string& name, const torch::Tensor& dst) {
        auto it = tensors.find(prefix + name);
        if (it == tensors.end()) {
            problems << "\n  " << prefix << name << ": missing";
            ++n_problems;
            return;
        }
        if (it->second.sizes() != dst.sizes()) {
            problems << "\n  " << prefix << name << ": expected " << dst.sizes() << ", found " << it->second.sizes();
            ++n_problems;
            return;
        }
        plan.emplace_back(dst, it->second);
    };
    for (const auto& p : module.named_parameters(true)) visit(p.key(), p.value());
    for (const auto& b : module.named_buffers(true)) visit(b.key(), b.value());

    if (n_problems > 0)
        fail(ErrorCategory::Checkpoint,
             std::to_string(n_problems) + " tensor(s) do not match the architecture:" + problems.str());

    torch::NoGradGuard no_grad;
    for (auto& [dst, src] : plan) dst.copy_(src.to(dst.dtype()));
}

}  // namespace vcolor
