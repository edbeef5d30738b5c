#pragma once

#include <filesystem>
#include <random>
#include <string>

#include <torch/torch.h>

#include "vcolor/config.hpp"

namespace testing {

/// Narrow widths so whole-model tests run in milliseconds.
inline vcolor::PipelineConfig small_config() {
    auto c = vcolor::PipelineConfig::desk();
    c.width = 32;
    c.height = 16;
    c.c_low = 8;
    c.c_high = 16;
    c.d_model = 12;
    c.corr_heads = 6;
    c.other_heads = 4;
    c.ct_blocks = 2;
    c.fuse_channels = 16;
    c.residual_blocks = 1;
    c.head_channels = 8;
    c.colorizer_base = 8;
    c.colorizer_ct_blocks = 1;
    c.disc_channels = 8;
    c.perceptual_channels = 4;
    c.log_every = 0;
    return c;
}

inline std::filesystem::path temp_dir(const std::string& name) {
    auto p = std::filesystem::temp_directory_path() / ("vcolor_test_" + name);
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

inline torch::Tensor rand_rgb(std::int64_t h, std::int64_t w, torch::Dtype dtype = torch::kFloat32) {
    return torch::rand({3, h, w}, torch::TensorOptions().dtype(dtype));
}

}  // namespace testing

#include "vcolor/error.hpp"

/// Asserts that `expr` throws vcolor::Error of category `cat`.
#define CHECK_THROWS_CATEGORY(expr, cat)                        \
    do {                                                        \
        bool thrown_ = false;                                   \
        try {                                                   \
            (void)(expr);                                       \
        } catch (const vcolor::Error& e_) {                     \
            thrown_ = true;                                     \
            CHECK_MESSAGE(e_.category() == (cat), e_.what());   \
        }                                                       \
        CHECK_MESSAGE(thrown_, "expected a vcolor::Error");     \
    } while (0)
