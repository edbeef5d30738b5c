#include "vcolor/config.hpp"

#include <algorithm>

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>
#include <variant>

#include "vcolor/error.hpp"

namespace vcolor {

namespace {

using FieldRef = std::variant<std::int64_t*, double*, bool*, std::string*>;

std::vector<std::pair<std::string, FieldRef>> fields(PipelineConfig& c) {
    return {
        {"preset", &c.preset},
        {"seed", &c.seed},
        {"width", &c.width},
        {"height", &c.height},
        {"block_size", &c.block_size},
        {"max_clip_length", &c.max_clip_length},
        {"c_low", &c.c_low},
        {"c_high", &c.c_high},
        {"backbone_high_depth", &c.backbone_high_depth},
        {"backbone_padding", &c.backbone_padding},
        {"low_taps", &c.low_taps},
        {"high_taps", &c.high_taps},
        {"d_model", &c.d_model},
        {"corr_heads", &c.corr_heads},
        {"other_heads", &c.other_heads},
        {"ct_blocks", &c.ct_blocks},
        {"ffn_mult", &c.ffn_mult},
        {"pos_every_block", &c.pos_every_block},
        {"fuse_channels", &c.fuse_channels},
        {"residual_blocks", &c.residual_blocks},
        {"head_channels", &c.head_channels},
        {"tau", &c.tau},
        {"alpha", &c.alpha},
        {"colorizer_base", &c.colorizer_base},
        {"colorizer_ct_blocks", &c.colorizer_ct_blocks},
        {"lambda_l1", &c.weights.l1},
        {"lambda_perc", &c.weights.perceptual},
        {"lambda_temp", &c.weights.temporal},
        {"lambda_adv", &c.weights.adversarial},
        {"lambda_smooth", &c.weights.smooth},
        {"smooth_sigma", &c.smooth_sigma},
        {"disc_channels", &c.disc_channels},
        {"perceptual_channels", &c.perceptual_channels},
        {"perceptual_enabled", &c.perceptual_enabled},
        {"adversarial_enabled", &c.adversarial_enabled},
        {"beta1", &c.beta1},
        {"beta2", &c.beta2},
        {"weight_decay", &c.weight_decay},
        {"lr_discriminator", &c.lr_discriminator},
        {"lr_backbone", &c.lr_backbone},
        {"lr_others", &c.lr_others},
        {"epochs", &c.epochs},
        {"decay_epoch_1", &c.decay_epoch_1},
        {"decay_epoch_2", &c.decay_epoch_2},
        {"steps", &c.steps},
        {"checkpoint_every", &c.checkpoint_every},
        {"log_every", &c.log_every},
        {"occlusion_ratio", &c.occlusion_ratio},
        {"occlusion_offset", &c.occlusion_offset},
        {"we_scale", &c.we_scale},
        {"no_transformer_branch", &c.ablation.no_transformer_branch},
        {"single_head", &c.ablation.single_head},
        {"no_linkage", &c.ablation.no_linkage},
    };
}

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

void assign(FieldRef ref, const std::string& key, const std::string& value) {
    const auto bad = [&](const char* type) {
        fail(ErrorCategory::Config, "key '" + key + "' expects " + type + ", got '" + value + "'");
    };
    std::visit(
        [&](auto* p) {
            using T = std::remove_pointer_t<decltype(p)>;
            if constexpr (std::is_same_v<T, std::int64_t>) {
                std::int64_t v = 0;
                auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
                if (ec != std::errc{} || ptr != value.data() + value.size()) bad("an integer");
                *p = v;
            } else if constexpr (std::is_same_v<T, double>) {
                try {
                    std::size_t used = 0;
                    double v = std::stod(value, &used);
                    if (used != value.size()) bad("a number");
                    *p = v;
                } catch (const std::logic_error&) {
                    bad("a number");
                }
            } else if constexpr (std::is_same_v<T, bool>) {
                if (value == "true" || value == "1") *p = true;
                else if (value == "false" || value == "0") *p = false;
                else bad("true/false");
            } else {
                *p = value;
            }
        },
        ref);
}

std::string render(FieldRef ref) {
    return std::visit(
        [](auto* p) -> std::string {
            using T = std::remove_pointer_t<decltype(p)>;
            if constexpr (std::is_same_v<T, bool>) {
                return *p ? "true" : "false";
            } else if constexpr (std::is_same_v<T, double>) {
                std::ostringstream os;
                os.precision(17);
                os << *p;
                return os.str();
            } else if constexpr (std::is_same_v<T, std::string>) {
                return *p;
            } else {
                return std::to_string(*p);
            }
        },
        ref);
}

PipelineConfig from_preset(const std::string& name) {
    if (name == "desk") return PipelineConfig::desk();
    if (name == "tiny") return PipelineConfig::tiny();
    fail(ErrorCategory::Config, "unknown preset '" + name + "' (valid: desk, tiny)");
}

}  // namespace

PipelineConfig PipelineConfig::desk() { return PipelineConfig{}; }

PipelineConfig PipelineConfig::tiny() {
    PipelineConfig c;
    c.preset = "tiny";
    c.c_low = 32;
    c.c_high = 64;
    c.d_model = 48;
    c.fuse_channels = 64;
    c.head_channels = 32;
    c.colorizer_base = 16;
    c.disc_channels = 16;
    c.perceptual_channels = 8;
    return c;
}

void PipelineConfig::validate() const {
    const auto check = [](bool ok, const std::string& msg) { require(ok, ErrorCategory::Config, msg); };
    check(block_size >= 1, "block_size must be >= 1");
    check(width > 0 && height > 0, "width/height must be positive");
    check(max_clip_length >= 1, "max_clip_length must be >= 1");
    check(c_low >= 2 && c_low % 2 == 0, "c_low must be even and >= 2");
    check(c_high >= 2 && c_high % 2 == 0, "c_high must be even and >= 2");
    check(backbone_high_depth >= 1, "backbone_high_depth must be >= 1");
    check(backbone_padding == "zeros" || backbone_padding == "circular",
          "backbone_padding must be 'zeros' or 'circular'");
    check(d_model % 6 == 0, "d_model must be divisible by 6 (three axes of sin/cos pairs)");
    check(corr_heads >= 1 && d_model % corr_heads == 0, "d_model must be divisible by corr_heads");
    check(other_heads >= 1 && d_model % other_heads == 0, "d_model must be divisible by other_heads");
    check(ct_blocks >= 1 && colorizer_ct_blocks >= 0, "block counts out of range");
    check(ffn_mult >= 1, "ffn_mult must be >= 1");
    check(fuse_channels >= 1 && head_channels >= 1 && residual_blocks >= 0, "fusion sizes out of range");
    check(tau > 0.0, "tau must be > 0");
    check(colorizer_base >= 1 && disc_channels >= 1 && perceptual_channels >= 1, "widths must be positive");
    check(weights.l1 >= 0 && weights.perceptual >= 0 && weights.temporal >= 0 && weights.adversarial >= 0 &&
              weights.smooth >= 0,
          "loss weights must be >= 0");
    check(smooth_sigma > 0.0, "smooth_sigma must be > 0");
    check(lr_discriminator >= 0 && lr_backbone >= 0 && lr_others >= 0, "learning rates must be >= 0");
    check(epochs >= 1, "epochs must be >= 1");
    check(we_scale > 0.0, "we_scale must be > 0");
}

std::string PipelineConfig::to_text() const {
    auto copy = *this;
    std::ostringstream os;
    for (const auto& [key, ref] : fields(copy)) os << key << " = " << render(ref) << '\n';
    return os.str();
}

void apply_overrides(PipelineConfig& cfg, const std::map<std::string, std::string>& kv) {
    // A preset switch replaces the base before the remaining keys apply.
    if (auto p = kv.find("preset"); p != kv.end() && p->second != cfg.preset) cfg = from_preset(p->second);
    auto table = fields(cfg);
    for (const auto& [key, value] : kv) {
        if (key == "preset") continue;
        if (key == "resize") {
            std::tie(cfg.width, cfg.height) = parse_resize(value);
            continue;
        }
        auto it = std::find_if(table.begin(), table.end(), [&](const auto& f) { return f.first == key; });
        if (it == table.end()) fail(ErrorCategory::Config, "unknown config key '" + key + "'");
        assign(it->second, key, value);
    }
}

PipelineConfig parse_config(const std::string& text) {
    std::map<std::string, std::string> kv;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        auto t = trim(line);
        if (t.empty()) continue;
        auto eq = t.find('=');
        if (eq == std::string::npos)
            fail(ErrorCategory::Config, "line " + std::to_string(lineno) + ": expected 'key = value'");
        auto key = trim(std::string_view(t).substr(0, eq));
        auto value = trim(std::string_view(t).substr(eq + 1));
        if (key.empty()) fail(ErrorCategory::Config, "line " + std::to_string(lineno) + ": empty key");
        if (kv.count(key)) fail(ErrorCategory::Config, "duplicate key '" + key + "'");
        kv[key] = value;
    }
    PipelineConfig cfg = kv.count("preset") ? from_preset(kv["preset"]) : PipelineConfig::desk();
    apply_overrides(cfg, kv);
    cfg.validate();
    return cfg;
}

PipelineConfig load_config(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) fail(ErrorCategory::Io, "cannot read config " + path.string());
    std::ostringstream ss;
    ss << f.rdbuf();
    return parse_config(ss.str());
}

std::pair<std::int64_t, std::int64_t> parse_resize(const std::string& s) {
    auto x = s.find_first_of("xX");
    if (x == std::string::npos) fail(ErrorCategory::Config, "resize expects WxH, got '" + s + "'");
    std::int64_t w = 0, h = 0;
    auto r1 = std::from_chars(s.data(), s.data() + x, w);
    auto r2 = std::from_chars(s.data() + x + 1, s.data() + s.size(), h);
    if (r1.ec != std::errc{} || r2.ec != std::errc{} || r1.ptr != s.data() + x || r2.ptr != s.data() + s.size() ||
        w <= 0 || h <= 0)
        fail(ErrorCategory::Config, "resize expects WxH, got '" + s + "'");
    return {w, h};
}

double lr_factor(const PipelineConfig& cfg, std::int64_t epoch) {
    if (epoch >= cfg.decay_epoch_2) return 0.01;
    if (epoch >= cfg.decay_epoch_1) return 0.1;
    return 1.0;
}

}  // namespace vcolor
