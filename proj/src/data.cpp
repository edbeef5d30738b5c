#include "vcolor/data.hpp"

#include <array>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "vcolor/error.hpp"

namespace vcolor {

namespace fs = std::filesystem;

namespace {

std::string indexed(std::size_t i, const char* suffix) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%05zu%s", i, suffix);
    return buf;
}

torch::Tensor mat_to_rgb(const cv::Mat& bgr) {
    cv::Mat rgb;
    cv::cvtColor(bgr, rgb, cv::COLOR_BGR2RGB);
    auto t = torch::from_blob(rgb.data, {rgb.rows, rgb.cols, 3}, torch::kUInt8).clone();
    return t.permute({2, 0, 1}).to(torch::kFloat32).div(255.0).contiguous();
}

cv::Mat rgb_to_mat(const torch::Tensor& rgb) {
    require(rgb.dim() == 3 && rgb.size(0) == 3, ErrorCategory::Shape, "image must be [3,H,W]");
    auto hwc = rgb.detach().to(torch::kFloat32).clamp(0, 1).mul(255.0).round().to(torch::kUInt8).permute({1, 2, 0})
                   .contiguous();
    cv::Mat m(static_cast<int>(hwc.size(0)), static_cast<int>(hwc.size(1)), CV_8UC3, hwc.data_ptr<std::uint8_t>());
    cv::Mat bgr;
    cv::cvtColor(m, bgr, cv::COLOR_RGB2BGR);
    return bgr;
}

bool is_image(const fs::path& p) {
    auto ext = p.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    return ext == ".png" || ext == ".jpg" || ext == ".jpeg" || ext == ".bmp";
}

}  // namespace

// ---------------------------------------------------------------------------

std::vector<torch::Tensor> Clip::warp_flows() const {
    std::vector<torch::Tensor> out;
    const auto pairs = size() > 0 ? size() - 1 : 0;
    for (std::size_t k = 0; k < pairs; ++k) {
        if (k < backward.size()) out.push_back(-backward[k].uv);
        else if (k < forward.size()) out.push_back(forward[k].uv);
        else out.push_back(torch::zeros({2, height(), width()}));
    }
    return out;
}

std::vector<torch::Tensor> Clip::pair_masks() const {
    std::vector<torch::Tensor> out;
    const auto pairs = size() > 0 ? size() - 1 : 0;
    for (std::size_t k = 0; k < pairs; ++k)
        out.push_back(k < masks.size() ? masks[k] : torch::ones({height(), width()}));
    return out;
}

std::vector<LabFrame> Clip::lab() const {
    std::vector<LabFrame> out;
    for (const auto& f : rgb) out.push_back(rgb_to_lab(f));
    return out;
}

std::vector<LabFrame> Clip::gray() const {
    std::vector<LabFrame> out;
    for (const auto& f : rgb) out.push_back(grayscale_of(rgb_to_lab(f)));
    return out;
}

// ---------------------------------------------------------------------------

torch::Tensor read_rgb(const fs::path& path) {
    cv::Mat m = cv::imread(path.string(), cv::IMREAD_COLOR);
    if (m.empty()) fail(ErrorCategory::Io, "cannot read image " + path.string());
    return mat_to_rgb(m);
}

void write_rgb(const fs::path& path, const torch::Tensor& rgb) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    if (!cv::imwrite(path.string(), rgb_to_mat(rgb))) fail(ErrorCategory::Io, "cannot write image " + path.string());
}

torch::Tensor read_mask(const fs::path& path) {
    cv::Mat m = cv::imread(path.string(), cv::IMREAD_GRAYSCALE);
    if (m.empty()) fail(ErrorCategory::Io, "cannot read mask " + path.string());
    auto t = torch::from_blob(m.data, {m.rows, m.cols}, torch::kUInt8).clone();
    return (t > 127).to(torch::kFloat32);
}

void write_mask(const fs::path& path, const torch::Tensor& mask) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    auto t = (mask.detach() > 0.5).to(torch::kUInt8).mul(255).contiguous();
    cv::Mat m(static_cast<int>(t.size(0)), static_cast<int>(t.size(1)), CV_8UC1, t.data_ptr<std::uint8_t>());
    if (!cv::imwrite(path.string(), m)) fail(ErrorCategory::Io, "cannot write mask " + path.string());
}

torch::Tensor resize_rgb(const torch::Tensor& rgb, std::int64_t width, std::int64_t height) {
    if (rgb.size(1) == height && rgb.size(2) == width) return rgb;
    auto hwc = rgb.to(torch::kFloat32).permute({1, 2, 0}).contiguous();
    cv::Mat src(static_cast<int>(hwc.size(0)), static_cast<int>(hwc.size(1)), CV_32FC3, hwc.data_ptr<float>());
    cv::Mat dst;
    const bool shrinking = width < rgb.size(2) || height < rgb.size(1);
    cv::resize(src, dst, cv::Size(static_cast<int>(width), static_cast<int>(height)), 0, 0,
               shrinking ? cv::INTER_AREA : cv::INTER_LINEAR);
    auto out = torch::from_blob(dst.data, {height, width, 3}, torch::kFloat32).clone();
    return out.permute({2, 0, 1}).clamp(0, 1).contiguous();
}

std::vector<fs::path> list_images(const fs::path& dir) {
    if (!fs::is_directory(dir)) fail(ErrorCategory::Io, "not a directory: " + dir.string());
    std::vector<fs::path> out;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.is_regular_file() && is_image(e.path())) out.push_back(e.path());
    std::sort(out.begin(), out.end());
    return out;
}

Clip load_clip(const fs::path& dir, std::optional<std::pair<std::int64_t, std::int64_t>> resize,
               const fs::path& flows_dir) {
    Clip clip;
    clip.name = dir.filename().string();
    const auto images = list_images(dir);
    if (images.empty()) fail(ErrorCategory::Io, "no images in " + dir.string());
    std::int64_t src_w = 0, src_h = 0;
    for (const auto& p : images) {
        auto img = read_rgb(p);
        if (src_w == 0) {
            src_h = img.size(1);
            src_w = img.size(2);
        } else if (img.size(1) != src_h || img.size(2) != src_w) {
            fail(ErrorCategory::Shape, "frame " + p.filename().string() + " has a different size");
        }
        clip.rgb.push_back(resize ? resize_rgb(img, resize->first, resize->second) : img);
    }
    const auto W = clip.width(), H = clip.height();

    const fs::path fdir = flows_dir.empty() ? dir : flows_dir;
    std::vector<fs::path> flo;
    if (fs::is_directory(fdir))
        for (const auto& e : fs::directory_iterator(fdir))
            if (e.path().extension() == ".flo" && e.path().stem().string().find("_bwd") == std::string::npos)
                flo.push_back(e.path());
    std::sort(flo.begin(), flo.end());
    if (flo.empty()) return clip;
    if (flo.size() + 1 != clip.size())
        fail(ErrorCategory::Shape, "flow/frame count mismatch in " + fdir.string() + ": " +
                                       std::to_string(flo.size()) + " flows for " + std::to_string(clip.size()) +
                                       " frames (expected " + std::to_string(clip.size() - 1) + ")");

    for (std::size_t k = 0; k < flo.size(); ++k) {
        auto fwd = load_flow(flo[k], FlowDirection::Forward);
        if (fwd.height() != src_h || fwd.width() != src_w)
            fail(ErrorCategory::Shape, flo[k].filename().string() + " does not match the frame size");
        clip.forward.push_back(resize_flow(fwd, H, W));
        const auto bwd_path = fdir / indexed(k, "_bwd.flo");
        if (fs::exists(bwd_path))
            clip.backward.push_back(resize_flow(load_flow(bwd_path, FlowDirection::Backward), H, W));
        const auto mask_path = fdir / indexed(k, ".png");
        if (fs::exists(mask_path)) {
            auto m = read_mask(mask_path);
            if (m.size(0) != H || m.size(1) != W)
                m = torch::nn::functional::interpolate(
                        m.view({1, 1, m.size(0), m.size(1)}),
                        torch::nn::functional::InterpolateFuncOptions()
                            .size(std::vector<std::int64_t>{H, W})
                            .mode(torch::kNearest))
                        .view({H, W});
            clip.masks.push_back(m);
        }
    }
    if (!clip.backward.empty() && clip.backward.size() != clip.forward.size())
        fail(ErrorCategory::Shape, "backward flows incomplete in " + fdir.string());
    if (!clip.masks.empty() && clip.masks.size() != clip.forward.size())
        fail(ErrorCategory::Shape, "masks incomplete in " + fdir.string());
    return clip;
}

void write_clip(const fs::path& dir, const Clip& clip) {
    for (std::size_t t = 0; t < clip.size(); ++t) write_rgb(dir / "frames" / indexed(t, ".png"), clip.rgb[t]);
    for (std::size_t k = 0; k < clip.forward.size(); ++k) save_flow(dir / "flows" / indexed(k, ".flo"), clip.forward[k]);
    for (std::size_t k = 0; k < clip.backward.size(); ++k)
        save_flow(dir / "flows" / indexed(k, "_bwd.flo"), clip.backward[k]);
    for (std::size_t k = 0; k < clip.masks.size(); ++k) write_mask(dir / "flows" / indexed(k, ".png"), clip.masks[k]);
}

std::vector<Clip> load_dataset(const fs::path& root, std::optional<std::pair<std::int64_t, std::int64_t>> resize) {
    if (!fs::is_directory(root)) fail(ErrorCategory::Io, "dataset root is not a directory: " + root.string());
    std::vector<fs::path> dirs;
    for (const auto& e : fs::directory_iterator(root))
        if (e.is_directory() && fs::is_directory(e.path() / "frames")) dirs.push_back(e.path());
    std::sort(dirs.begin(), dirs.end());
    if (dirs.empty()) fail(ErrorCategory::Io, "no clips (subdirectories with frames/) under " + root.string());
    std::vector<Clip> clips;
    for (const auto& d : dirs) {
        auto clip = load_clip(d / "frames", resize, d / "flows");
        clip.name = d.filename().string();
        clips.push_back(std::move(clip));
    }
    return clips;
}

// ---------------------------------------------------------------------------

namespace {

std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

double lattice(std::uint64_t salt, std::int64_t x, std::int64_t y) {
    auto h = mix64(salt ^ mix64(static_cast<std::uint64_t>(x) * 0x632be59bd9b4e019ULL ^
                                static_cast<std::uint64_t>(y) * 0x8cb92ba72f3d8dd7ULL));
    return static_cast<double>(h >> 11) / static_cast<double>(1ULL << 53);
}

std::int64_t floor_div(std::int64_t a, std::int64_t b) { return a >= 0 ? a / b : -((-a + b - 1) / b); }

/// Value noise in [0,1] at integer world coordinates: a bilinear coarse
/// lattice plus a faint per-pixel term.
double world_noise(std::uint64_t salt, std::int64_t x, std::int64_t y) {
    constexpr std::int64_t cell = 6;
    const auto cx = floor_div(x, cell), cy = floor_div(y, cell);
    const double fx = static_cast<double>(x - cx * cell) / cell;
    const double fy = static_cast<double>(y - cy * cell) / cell;
    const double a = lattice(salt, cx, cy), b = lattice(salt, cx + 1, cy);
    const double c = lattice(salt, cx, cy + 1), d = lattice(salt, cx + 1, cy + 1);
    const double coarse = (a * (1 - fx) + b * fx) * (1 - fy) + (c * (1 - fx) + d * fx) * fy;
    return 0.8 * coarse + 0.2 * lattice(salt + 1, x, y);
}

std::array<double, 3> hsv_to_rgb(double h, double s, double v) {
    const double c = v * s;
    const double hp = h * 6.0;
    const double x = c * (1 - std::abs(std::fmod(hp, 2.0) - 1));
    double r = 0, g = 0, b = 0;
    switch (static_cast<int>(hp) % 6) {
        case 0: r = c, g = x; break;
        case 1: r = x, g = c; break;
        case 2: g = c, b = x; break;
        case 3: g = x, b = c; break;
        case 4: r = x, b = c; break;
        default: r = c, b = x; break;
    }
    const double m = v - c;
    return {r + m, g + m, b + m};
}

struct Shape {
    bool disc = false;
    std::int64_t w = 0, h = 0;
    std::array<double, 3> color{};
    std::int64_t stripe_period = 6;
    std::vector<std::pair<std::int64_t, std::int64_t>> pos;  // top-left per frame

    bool covers(std::int64_t lx, std::int64_t ly) const {
        if (lx < 0 || ly < 0 || lx >= w || ly >= h) return false;
        if (!disc) return true;
        const double r = w / 2.0;
        const double dx = lx + 0.5 - r, dy = ly + 0.5 - r;
        return dx * dx + dy * dy <= r * r;
    }
};

}  // namespace

Clip synth_clip(std::uint64_t seed, std::int64_t frames, std::int64_t height, std::int64_t width,
                std::int64_t n_shapes, const SynthOptions& options) {
    require(frames >= 1 && height >= 16 && width >= 16 && n_shapes >= 0, ErrorCategory::Shape,
            "synth_clip needs frames >= 1, H,W >= 16 and n_shapes >= 0");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    auto irange = [&](std::int64_t lo, std::int64_t hi) {
        return std::uniform_int_distribution<std::int64_t>(lo, hi)(rng);
    };

    const std::uint64_t salt = mix64(seed ^ 0x5eedULL);
    const auto bg = hsv_to_rgb(unit(rng), 0.25 + 0.25 * unit(rng), 0.45 + 0.25 * unit(rng));
    const std::int64_t pan_x = irange(-options.max_pan_speed, options.max_pan_speed);
    const std::int64_t pan_y = irange(-options.max_pan_speed, options.max_pan_speed);

    const std::int64_t min_side = std::min(height, width);
    std::vector<Shape> shapes(static_cast<std::size_t>(n_shapes));
    for (auto& s : shapes) {
        s.disc = unit(rng) < 0.5;
        s.w = irange(min_side / 6, min_side / 3);
        s.h = s.disc ? s.w : irange(min_side / 6, min_side / 3);
        s.color = hsv_to_rgb(unit(rng), 0.65 + 0.35 * unit(rng), 0.65 + 0.35 * unit(rng));
        s.stripe_period = irange(4, 9);
        std::int64_t x = irange(0, width - s.w), y = irange(0, height - s.h);
        std::int64_t vx = irange(-options.max_shape_speed, options.max_shape_speed);
        std::int64_t vy = irange(-options.max_shape_speed, options.max_shape_speed);
        s.pos.emplace_back(x, y);
        for (std::int64_t t = 1; t < frames; ++t) {
            if (x + vx < 0 || x + vx > width - s.w) vx = -vx;
            if (y + vy < 0 || y + vy > height - s.h) vy = -vy;
            x += vx;
            y += vy;
            s.pos.emplace_back(x, y);
        }
    }

    // Surface id per pixel: 0 = background, k+1 = shape k (later shapes on top).
    auto surface = [&](std::int64_t t, std::int64_t x, std::int64_t y) -> std::int64_t {
        for (std::int64_t k = n_shapes - 1; k >= 0; --k) {
            const auto& s = shapes[static_cast<std::size_t>(k)];
            const auto [px, py] = s.pos[static_cast<std::size_t>(t)];
            if (s.covers(x - px, y - py)) return k + 1;
        }
        return 0;
    };
    auto displacement = [&](std::int64_t t, std::int64_t id) -> std::pair<std::int64_t, std::int64_t> {
        // Motion of surface `id` between frames t-1 and t.
        if (id == 0) return {pan_x, pan_y};
        const auto& s = shapes[static_cast<std::size_t>(id - 1)];
        return {s.pos[static_cast<std::size_t>(t)].first - s.pos[static_cast<std::size_t>(t - 1)].first,
                s.pos[static_cast<std::size_t>(t)].second - s.pos[static_cast<std::size_t>(t - 1)].second};
    };

    Clip clip;
    clip.name = "synth_" + std::to_string(seed);
    std::vector<std::vector<std::int64_t>> ids(static_cast<std::size_t>(frames));
    for (std::int64_t t = 0; t < frames; ++t) {
        auto img = torch::empty({3, height, width});
        auto acc = img.accessor<float, 3>();
        auto& id_map = ids[static_cast<std::size_t>(t)];
        id_map.resize(static_cast<std::size_t>(height * width));
        for (std::int64_t y = 0; y < height; ++y) {
            for (std::int64_t x = 0; x < width; ++x) {
                const auto id = surface(t, x, y);
                id_map[static_cast<std::size_t>(y * width + x)] = id;
                std::array<double, 3> c{};
                if (id == 0) {
                    const double n = world_noise(salt, x - t * pan_x, y - t * pan_y) - 0.5;
                    for (int ch = 0; ch < 3; ++ch) c[ch] = bg[ch] + 2 * options.texture_amplitude * n;
                } else {
                    const auto& s = shapes[static_cast<std::size_t>(id - 1)];
                    const auto [px, py] = s.pos[static_cast<std::size_t>(t)];
                    const auto lx = x - px, ly = y - py;
                    const double stripe = 0.5 + 0.5 * std::sin(2 * M_PI * static_cast<double>(lx + ly) /
                                                                static_cast<double>(s.stripe_period));
                    for (int ch = 0; ch < 3; ++ch) c[ch] = s.color[ch] * (0.85 + 0.15 * stripe);
                }
                for (int ch = 0; ch < 3; ++ch) acc[ch][y][x] = static_cast<float>(std::clamp(c[ch], 0.0, 1.0));
            }
        }
        clip.rgb.push_back(img);
    }

    for (std::int64_t t = 1; t < frames; ++t) {
        auto fwd = torch::zeros({2, height, width});
        auto bwd = torch::zeros({2, height, width});
        auto mask = torch::zeros({height, width});
        auto fa = fwd.accessor<float, 3>();
        auto ba = bwd.accessor<float, 3>();
        auto ma = mask.accessor<float, 2>();
        const auto& prev_ids = ids[static_cast<std::size_t>(t - 1)];
        const auto& cur_ids = ids[static_cast<std::size_t>(t)];
        for (std::int64_t y = 0; y < height; ++y) {
            for (std::int64_t x = 0; x < width; ++x) {
                const auto id_prev = prev_ids[static_cast<std::size_t>(y * width + x)];
                const auto [fu, fv] = displacement(t, id_prev);
                fa[0][y][x] = static_cast<float>(fu);
                fa[1][y][x] = static_cast<float>(fv);

                const auto id_cur = cur_ids[static_cast<std::size_t>(y * width + x)];
                const auto [du, dv] = displacement(t, id_cur);
                ba[0][y][x] = static_cast<float>(-du);
                ba[1][y][x] = static_cast<float>(-dv);
                const auto sx = x - du, sy = y - dv;
                const bool inside = sx >= 0 && sy >= 0 && sx < width && sy < height;
                ma[y][x] = inside && prev_ids[static_cast<std::size_t>(sy * width + sx)] == id_cur ? 1.0f : 0.0f;
            }
        }
        clip.forward.push_back(FlowField{fwd, FlowDirection::Forward});
        clip.backward.push_back(FlowField{bwd, FlowDirection::Backward});
        clip.masks.push_back(mask);
    }
    return clip;
}

}  // namespace vcolor
