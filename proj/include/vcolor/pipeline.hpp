#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <vector>

#include <torch/torch.h>

#include "vcolor/colorizer.hpp"
#include "vcolor/colorspace.hpp"
#include "vcolor/config.hpp"
#include "vcolor/correspondence.hpp"
#include "vcolor/linkage.hpp"

namespace vcolor {

struct BlockRange {
    std::size_t start = 0;
    std::size_t count = 0;

    bool operator==(const BlockRange&) const = default;
};

/// ceil(L/N) consecutive ranges; the last holds L mod N frames when that
/// is nonzero. Throws on L == 0 or N < 1.
std::vector<BlockRange> split_into_blocks(std::size_t length, std::int64_t block_size);

struct BlockOutput {
    torch::Tensor ab;  // [N,2,H,W]
    CorrespondenceResult correspondence;
};

/// Correspondence, colorization and linkage subnets wired together.
class VideoColorizerImpl : public torch::nn::Module {
public:
    explicit VideoColorizerImpl(const PipelineConfig& cfg);

    /// One block: query the memory, warp reference colour, colorize, store.
    /// `state` is advanced in place (left untouched with no_linkage).
    BlockOutput forward_block(const torch::Tensor& block_l, const LabFrame& reference, LinkageState& state,
                              std::int64_t block_index);

    /// Switches the ablations that only affect wiring (single head, no
    /// linkage, transformer branch) without touching the parameters.
    void set_ablation(const Ablation& ablation);
    const Ablation& ablation() const { return ablation_; }

    /// Parameters of the feature extractor vs everything else, for the
    /// per-group learning rates.
    std::vector<torch::Tensor> backbone_parameters() const;
    std::vector<torch::Tensor> other_parameters() const;

    CorrespondenceNet correspondence{nullptr};
    Colorizer colorizer{nullptr};
    Linkage linkage{nullptr};

private:
    Ablation ablation_;
};
TORCH_MODULE(VideoColorizer);

/// Block-streaming inference over a whole video. Frames must share the
/// reference's size; sizes not divisible by 8 are edge-padded internally
/// and cropped back. Output luminance is the input luminance, bit-exact.
std::vector<LabFrame> colorize_video(VideoColorizer& model, const std::vector<LabFrame>& frames,
                                     const LabFrame& reference, std::int64_t block_size);

/// Everything needed to resume or evaluate: generator (+ optional
/// discriminator) parameters, the config that built them and, optionally,
/// a linkage state for resuming a long video.
struct ModelBundle {
    PipelineConfig config;
    VideoColorizer model{nullptr};
    std::optional<LinkageState> state;
    std::map<std::string, std::string> meta;
};

void save_model(const std::filesystem::path& path, VideoColorizer& model, const PipelineConfig& cfg,
                const torch::nn::Module* discriminator = nullptr, const LinkageState* state = nullptr,
                const std::map<std::string, std::string>& meta = {});

/// Rebuilds the model from the stored config and loads its parameters.
ModelBundle load_model(const std::filesystem::path& path);

}  // namespace vcolor
