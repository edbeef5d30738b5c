#pragma once

#include <filesystem>
#include <map>
#include <string>

#include <torch/torch.h>

namespace vcolor {

/// Single-file archive: named tensors, a config snapshot and free-form
/// string metadata. Serialized as one pickled dictionary.
struct Checkpoint {
    std::map<std::string, torch::Tensor> tensors;
    std::string config_text;
    std::map<std::string, std::string> meta;
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Copies every parameter and buffer of `module` into `out` under
/// `prefix + name`.
void export_module(const torch::nn::Module& module, const std::string& prefix,
                   std::map<std::string, torch::Tensor>& out);

/// Overwrites the parameters and buffers of `module` from `tensors`.
/// Missing names and shape mismatches are collected and reported together
/// (ErrorCategory::Checkpoint); the module is left untouched on failure.
void import_module(torch::nn::Module& module, const std::string& prefix,
                   const std::map<std::string, torch::Tensor>& tensors);

}  // namespace vcolor
