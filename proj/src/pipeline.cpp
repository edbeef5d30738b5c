#include "vcolor/pipeline.hpp"

#include <set>

#include "vcolor/checkpoint.hpp"
#include "vcolor/error.hpp"

namespace vcolor {

namespace F = torch::nn::functional;

std::vector<BlockRange> split_into_blocks(std::size_t length, std::int64_t block_size) {
    require(length >= 1, ErrorCategory::Usage, "cannot split an empty video");
    require(block_size >= 1, ErrorCategory::Config, "block size must be >= 1");
    const auto n = static_cast<std::size_t>(block_size);
    std::vector<BlockRange> blocks;
    for (std::size_t s = 0; s < length; s += n) blocks.push_back({s, std::min(n, length - s)});
    return blocks;
}

// ---------------------------------------------------------------------------

VideoColorizerImpl::VideoColorizerImpl(const PipelineConfig& cfg) : ablation_(cfg.ablation) {
    cfg.validate();
    correspondence = register_module("correspondence", CorrespondenceNet(cfg));
    colorizer = register_module("colorizer", Colorizer(cfg));
    linkage = register_module("linkage", Linkage(cfg.d_model, cfg.ffn_mult));
    set_ablation(cfg.ablation);
}

void VideoColorizerImpl::set_ablation(const Ablation& ablation) {
    ablation_ = ablation;
    correspondence->single_head = ablation.single_head;
    correspondence->augment->transformer_enabled = !ablation.no_transformer_branch;
    colorizer->bottleneck->transformer_enabled = !ablation.no_transformer_branch;
}

BlockOutput VideoColorizerImpl::forward_block(const torch::Tensor& block_l, const LabFrame& reference,
                                              LinkageState& state, std::int64_t block_index) {
    auto features = correspondence->encode(block_l, reference.l.unsqueeze(0));

    std::optional<TokenGrid> hi;
    if (!ablation_.no_linkage && !state.empty()) hi = linkage->query(correspondence->high_tokens(features), state);

    auto corr = correspondence->forward(features, reference.ab, hi);
    auto input = make_colorizer_input(corr.heads, block_l, reference, corr.ho);
    auto ab = colorizer->forward(input);

    if (!ablation_.no_linkage) state = LinkageImpl::store(state, corr.ho, block_index);
    return BlockOutput{ab, std::move(corr)};
}

std::vector<torch::Tensor> VideoColorizerImpl::backbone_parameters() const {
    return correspondence->backbone->parameters();
}

std::vector<torch::Tensor> VideoColorizerImpl::other_parameters() const {
    std::vector<torch::Tensor> out;
    std::set<const void*> backbone;
    for (const auto& p : backbone_parameters()) backbone.insert(p.unsafeGetTensorImpl());
    for (const auto& p : parameters())
        if (!backbone.count(p.unsafeGetTensorImpl())) out.push_back(p);
    return out;
}

// ---------------------------------------------------------------------------

std::vector<LabFrame> colorize_video(VideoColorizer& model, const std::vector<LabFrame>& frames,
                                     const LabFrame& reference, std::int64_t block_size) {
    require(!frames.empty(), ErrorCategory::Usage, "cannot colorize an empty video");
    check_lab_frame(reference);
    const auto H = reference.height(), W = reference.width();
    for (std::size_t i = 0; i < frames.size(); ++i)
        require(frames[i].height() == H && frames[i].width() == W, ErrorCategory::Shape,
                "frame " + std::to_string(i) + " is " + std::to_string(frames[i].width()) + "x" +
                    std::to_string(frames[i].height()) + ", reference is " + std::to_string(W) + "x" +
                    std::to_string(H));

    const auto pad_h = (8 - H % 8) % 8, pad_w = (8 - W % 8) % 8;
    auto pad = [&](const torch::Tensor& x) {  // [B,C,H,W]
        if (pad_h == 0 && pad_w == 0) return x;
        return F::pad(x, F::PadFuncOptions({0, pad_w, 0, pad_h}).mode(torch::kReplicate));
    };
    const auto dtype = model->parameters().front().dtype();
    LabFrame ref_padded = LabFrame::from_stacked(pad(reference.stacked().unsqueeze(0)).squeeze(0).to(dtype));

    torch::NoGradGuard no_grad;
    model->eval();
    LinkageState state;
    std::vector<LabFrame> out;
    out.reserve(frames.size());
    const auto blocks = split_into_blocks(frames.size(), block_size);
    for (std::size_t b = 0; b < blocks.size(); ++b) {
        const auto& range = blocks[b];
        std::vector<torch::Tensor> ls;
        for (std::size_t i = range.start; i < range.start + range.count; ++i) ls.push_back(frames[i].l.unsqueeze(0));
        auto block_l = torch::stack(ls, 0);  // [N,1,H,W]
        torch::Tensor ab;
        try {
            ab = model->forward_block(pad(block_l).to(dtype), ref_padded, state, static_cast<std::int64_t>(b)).ab;
        } catch (const Error& e) {
            fail(e.category(), "block " + std::to_string(b) + ": " + e.what());
        }
        ab = ab.slice(2, 0, H).slice(3, 0, W).to(frames.front().ab.dtype());
        for (std::size_t i = 0; i < range.count; ++i)
            out.push_back(LabFrame{frames[range.start + i].l, ab[static_cast<std::int64_t>(i)].contiguous()});
    }
    return out;
}

// ---------------------------------------------------------------------------

void save_model(const std::filesystem::path& path, VideoColorizer& model, const PipelineConfig& cfg,
                const torch::nn::Module* discriminator, const LinkageState* state,
                const std::map<std::string, std::string>& meta) {
    Checkpoint ckpt;
    export_module(*model, "generator.", ckpt.tensors);
    if (discriminator) export_module(*discriminator, "discriminator.", ckpt.tensors);
    if (state && !state->empty()) {
        ckpt.tensors["linkage_state.info"] = state->info->detach().clone();
        ckpt.meta["linkage_state.last_block"] = std::to_string(state->last_block);
    }
    ckpt.config_text = cfg.to_text();
    for (const auto& [k, v] : meta) ckpt.meta[k] = v;
    ckpt.meta["backbone_pretrained"] = model->correspondence->backbone->pretrained() ? "true" : "false";
    save_checkpoint(path, ckpt);
}

ModelBundle load_model(const std::filesystem::path& path) {
    auto ckpt = load_checkpoint(path);
    ModelBundle bundle;
    bundle.config = parse_config(ckpt.config_text);
    bundle.model = VideoColorizer(bundle.config);
    import_module(*bundle.model, "generator.", ckpt.tensors);
    bundle.model->correspondence->backbone->set_pretrained(ckpt.meta["backbone_pretrained"] == "true");
    if (auto it = ckpt.tensors.find("linkage_state.info"); it != ckpt.tensors.end()) {
        LinkageState s;
        s.info = it->second;
        s.last_block = std::stoll(ckpt.meta["linkage_state.last_block"]);
        bundle.state = s;
    }
    bundle.meta = ckpt.meta;
    return bundle;
}

}  // namespace vcolor
