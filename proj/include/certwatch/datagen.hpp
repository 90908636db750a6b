#pragma once

// Procedural game-like frames with cheat overlays at three information
// levels: renderer, overlay painter, dataset builder and loader. Images are
// 8-bit binary PPM, overlay masks 8-bit PGM, the manifest one JSON document.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "certwatch/rng.hpp"
#include "certwatch/tensor.hpp"

namespace certwatch {

enum class Style { A, B };
enum class OverlayLevel { Minimal, Medium, Full };

inline const char* to_string(Style s) { return s == Style::A ? "A" : "B"; }
inline const char* to_string(OverlayLevel l) {
    switch (l) {
        case OverlayLevel::Minimal: return "minimal";
        case OverlayLevel::Medium: return "medium";
        default: return "full";
    }
}
inline Style style_from_string(const std::string& s) {
    if (s == "A") return Style::A;
    if (s == "B") return Style::B;
    throw std::invalid_argument("unknown style: " + s);
}
inline OverlayLevel overlay_level_from_string(const std::string& s) {
    if (s == "minimal") return OverlayLevel::Minimal;
    if (s == "medium") return OverlayLevel::Medium;
    if (s == "full") return OverlayLevel::Full;
    throw std::invalid_argument("unknown overlay level: " + s);
}

// ---- 8-bit image I/O -------------------------------------------------------

inline void write_ppm(const std::string& path, const Tensor& image) {
    if (image.rank() != 3 || image.shape[0] != 3)
        throw std::invalid_argument("write_ppm: expected a [3,H,W] tensor");
    const int h = image.shape[1], w = image.shape[2];
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("write_ppm: cannot open " + path);
    f << "P6\n" << w << " " << h << "\n255\n";
    std::vector<unsigned char> row(static_cast<std::size_t>(w) * 3);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < 3; ++c) {
                float v = image.at(c, y, x);
                v = std::min(1.0f, std::max(0.0f, v));
                row[static_cast<std::size_t>(x) * 3 + static_cast<std::size_t>(c)] =
                    static_cast<unsigned char>(std::lround(v * 255.0f));
            }
        f.write(reinterpret_cast<const char*>(row.data()),
                static_cast<std::streamsize>(row.size()));
    }
    if (!f) throw std::runtime_error("write_ppm: short write to " + path);
}

inline Tensor read_ppm(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("read_ppm: cannot open " + path);
    std::string magic;
    int w = 0, h = 0, maxval = 0;
    f >> magic >> w >> h >> maxval;
    if (magic != "P6" || w <= 0 || h <= 0 || maxval != 255)
        throw std::runtime_error("read_ppm: malformed header in " + path);
    f.get(); // single whitespace after maxval
    std::vector<unsigned char> raw(static_cast<std::size_t>(w) * h * 3);
    f.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (f.gcount() != static_cast<std::streamsize>(raw.size()))
        throw std::runtime_error("read_ppm: truncated pixel data in " + path);
    Tensor img({3, h, w});
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < 3; ++c)
                img.at(c, y, x) =
                    static_cast<float>(raw[(static_cast<std::size_t>(y) * w + x) * 3 +
                                           static_cast<std::size_t>(c)]) /
                    255.0f;
    return img;
}

inline void write_pgm(const std::string& path, const Tensor& mask) {
    if (mask.rank() != 2) throw std::invalid_argument("write_pgm: expected [H,W]");
    const int h = mask.shape[0], w = mask.shape[1];
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("write_pgm: cannot open " + path);
    f << "P5\n" << w << " " << h << "\n255\n";
    for (int i = 0; i < mask.numel(); ++i)
        f.put(mask[i] > 0.0f ? static_cast<char>(255) : static_cast<char>(0));
}

inline Tensor read_pgm(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("read_pgm: cannot open " + path);
    std::string magic;
    int w = 0, h = 0, maxval = 0;
    f >> magic >> w >> h >> maxval;
    if (magic != "P5" || w <= 0 || h <= 0 || maxval != 255)
        throw std::runtime_error("read_pgm: malformed header in " + path);
    f.get();
    std::vector<unsigned char> raw(static_cast<std::size_t>(w) * h);
    f.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (f.gcount() != static_cast<std::streamsize>(raw.size()))
        throw std::runtime_error("read_pgm: truncated pixel data in " + path);
    Tensor m({h, w});
    for (int i = 0; i < m.numel(); ++i) m[i] = raw[static_cast<std::size_t>(i)] > 0 ? 1.0f : 0.0f;
    return m;
}

// ---- scene rendering -------------------------------------------------------

struct SceneSpec {
    int width = 192;
    int height = 108;
    std::uint64_t rng_seed = 0;
    int n_entities = 4;
    Style style = Style::A;
    float texture_density = 0.5f;
};

struct EntityBox {
    int x = 0, y = 0, w = 0, h = 0;
    bool occluded = false;
};

struct Scene {
    Tensor image; // [3,H,W], values in [0,1]
    std::vector<EntityBox> entities;
};

namespace detail {

struct Rgb {
    float r, g, b;
};

// Marker/accent palette shared by the cheat overlay and the benign HUD pings:
// both draw the same box-plus-nametag geometry in the same colors, so no
// single local patch identifies a cheat — only how many such regions a frame
// carries.
inline Rgb marker_color(Style s) {
    return s == Style::A ? Rgb{1.0f, 0.1f, 0.9f} : Rgb{0.1f, 1.0f, 0.95f};
}
inline Rgb accent_color(Style s) {
    return s == Style::A ? Rgb{1.0f, 0.85f, 0.1f} : Rgb{0.4f, 0.4f, 1.0f};
}

inline void fill_rect(Tensor& img, int x0, int y0, int w, int h, Rgb c) {
    const int H = img.shape[1], W = img.shape[2];
    for (int y = std::max(0, y0); y < std::min(H, y0 + h); ++y)
        for (int x = std::max(0, x0); x < std::min(W, x0 + w); ++x) {
            img.at(0, y, x) = c.r;
            img.at(1, y, x) = c.g;
            img.at(2, y, x) = c.b;
        }
}

// Humanoid silhouette: head block, torso, legs; all inside the given box.
inline void draw_entity(Tensor& img, const EntityBox& e, Rgb c) {
    int head_h = std::max(1, e.h / 5);
    int head_w = std::max(1, e.w / 2);
    int torso_h = std::max(1, (e.h * 2) / 5);
    fill_rect(img, e.x + (e.w - head_w) / 2, e.y, head_w, head_h, c);
    fill_rect(img, e.x, e.y + head_h, e.w, torso_h, c);
    int leg_w = std::max(1, e.w / 3);
    int legs_y = e.y + head_h + torso_h;
    int legs_h = e.h - head_h - torso_h;
    fill_rect(img, e.x, legs_y, leg_w, legs_h, c);
    fill_rect(img, e.x + e.w - leg_w, legs_y, leg_w, legs_h, c);
}

} // namespace detail

// Layered procedural scene: gradient sky, noise-textured ground, rectangular
// structures, entity silhouettes. Entities flagged occluded are painted
// before the structures so the structures hide them.
inline Scene render_scene(const SceneSpec& spec) {
    if (spec.width < 36 || spec.height < 36)
        throw std::invalid_argument("render_scene: dims must be >= 36, got " +
                                    std::to_string(spec.height) + "x" +
                                    std::to_string(spec.width));
    if (spec.n_entities < 0) throw std::invalid_argument("render_scene: negative entity count");
    const int H = spec.height, W = spec.width;
    CounterRng rng = CounterRng::derive(spec.rng_seed, 0x5CE4E);
    // style B tints the palette while keeping the layout generator identical
    const float tint = spec.style == Style::B ? 0.08f : 0.0f;

    Scene scene;
    scene.image = Tensor({3, H, W});
    Tensor& img = scene.image;

    // sky gradient
    detail::Rgb sky_top{0.25f + rng.uniform(0.0f, 0.2f), 0.45f + rng.uniform(0.0f, 0.2f),
                        0.7f + rng.uniform(0.0f, 0.25f) - tint};
    detail::Rgb sky_bot{sky_top.r + 0.15f, sky_top.g + 0.1f + tint, sky_top.b + 0.05f};
    const int horizon = H / 2 + static_cast<int>(rng.next_below(static_cast<std::uint64_t>(H / 8)));
    for (int y = 0; y < horizon; ++y) {
        float t = static_cast<float>(y) / static_cast<float>(horizon);
        for (int x = 0; x < W; ++x) {
            img.at(0, y, x) = sky_top.r + t * (sky_bot.r - sky_top.r);
            img.at(1, y, x) = sky_top.g + t * (sky_bot.g - sky_top.g);
            img.at(2, y, x) = sky_top.b + t * (sky_bot.b - sky_top.b);
        }
    }
    // noise-textured ground
    detail::Rgb ground{0.35f + rng.uniform(0.0f, 0.15f) + tint,
                       0.3f + rng.uniform(0.0f, 0.15f), 0.2f + rng.uniform(0.0f, 0.1f)};
    for (int y = horizon; y < H; ++y)
        for (int x = 0; x < W; ++x) {
            float n = rng.uniform(-0.06f, 0.06f) * (0.5f + spec.texture_density);
            img.at(0, y, x) = std::min(1.0f, std::max(0.0f, ground.r + n));
            img.at(1, y, x) = std::min(1.0f, std::max(0.0f, ground.g + n));
            img.at(2, y, x) = std::min(1.0f, std::max(0.0f, ground.b + n * 0.7f));
        }

    // structures (crates / walls) standing on the ground
    struct Rect {
        int x, y, w, h;
    };
    std::vector<Rect> structures;
    const int n_structures = 2 + static_cast<int>(rng.next_below(3));
    for (int s = 0; s < n_structures; ++s) {
        Rect r;
        r.w = W / 8 + static_cast<int>(rng.next_below(static_cast<std::uint64_t>(W / 6)));
        r.h = H / 5 + static_cast<int>(rng.next_below(static_cast<std::uint64_t>(H / 4)));
        r.x = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(W - r.w)));
        r.y = std::max(0, horizon - r.h / 4 +
                              static_cast<int>(rng.next_below(static_cast<std::uint64_t>(H / 6))) -
                              H / 12);
        r.h = std::min(r.h, H - r.y);
        structures.push_back(r);
    }

    // entities: place each inside the frame, roughly ground-anchored
    int hidden_count = 0;
    auto make_entity = [&](bool force_behind_structure) {
        EntityBox e;
        e.w = 6 + static_cast<int>(rng.next_below(5));
        e.h = 12 + static_cast<int>(rng.next_below(8));
        if (force_behind_structure && !structures.empty()) {
            // round-robin over structures so overlay regions stay disjoint
            const Rect& s = structures[static_cast<std::size_t>(hidden_count++) %
                                       structures.size()];
            // center the entity within the structure so it is fully hidden
            e.x = s.x + std::max(0, (s.w - e.w) / 2);
            e.y = s.y + std::max(0, (s.h - e.h) / 2);
            e.w = std::min(e.w, std::max(1, s.w - (e.x - s.x)));
            e.h = std::min(e.h, std::max(1, s.h - (e.y - s.y)));
            e.occluded = true;
        } else {
            e.x = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(W - e.w)));
            int top = std::max(0, horizon - e.h + 2);
            e.y = std::min(H - e.h, top + static_cast<int>(rng.next_below(
                                              static_cast<std::uint64_t>(H / 6 + 1))));
            e.occluded = false;
        }
        return e;
    };
    // the first two entities always hide behind structures (the wallhack
    // targets); later ones flip a weighted coin, so cheat overlays mark
    // several regions per frame
    for (int i = 0; i < spec.n_entities; ++i) {
        bool hidden = i < 2 || rng.next_below(5) < 2;
        scene.entities.push_back(make_entity(hidden));
    }

    detail::Rgb entity_color{0.12f + rng.uniform(0.0f, 0.1f), 0.1f + rng.uniform(0.0f, 0.08f),
                             0.1f + rng.uniform(0.0f, 0.08f)};
    for (const EntityBox& e : scene.entities)
        if (e.occluded) detail::draw_entity(img, e, entity_color);
    for (const Rect& r : structures) {
        detail::Rgb c{0.45f + rng.uniform(0.0f, 0.2f), 0.42f + rng.uniform(0.0f, 0.2f) - tint,
                      0.4f + rng.uniform(0.0f, 0.15f) + tint};
        detail::fill_rect(img, r.x, r.y, r.w, r.h, c);
        // simple vertical shading line to break up the block
        detail::fill_rect(img, r.x + r.w / 2, r.y, 1, r.h,
                          {c.r * 0.8f, c.g * 0.8f, c.b * 0.8f});
    }
    for (const EntityBox& e : scene.entities)
        if (!e.occluded) detail::draw_entity(img, e, entity_color);

    // Benign HUD ping: the game UI marks one teammate per frame with the
    // exact geometry and palette a cheat overlay uses for hidden enemies.
    // Clean and cheat frames alike carry it, so the strongest local response
    // is identical across classes; only the count of marked regions separates
    // them.
    const detail::Rgb marker = detail::marker_color(spec.style);
    const detail::Rgb accent = detail::accent_color(spec.style);
    // fixed size: the amount of benign marker evidence is the same on every
    // frame, so any overlay pixels on top of it shift the aggregate reliably
    const int n_pings = 1;
    for (int d = 0; d < n_pings; ++d) {
        const int pw = 8;
        const int ph = 15;
        const int px = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(W - pw)));
        const int py =
            3 + static_cast<int>(rng.next_below(static_cast<std::uint64_t>(H - ph - 3)));
        detail::fill_rect(img, px, py, pw, 1, marker);
        detail::fill_rect(img, px, py + ph - 1, pw, 1, marker);
        detail::fill_rect(img, px, py, 1, ph, marker);
        detail::fill_rect(img, px + pw - 1, py, 1, ph, marker);
        // name-tag strip above the box, mirroring the overlay glyph block
        detail::fill_rect(img, px, py - 2, std::max(4, pw / 2), 1, accent);
    }

    for (auto& v : img.data) v = std::min(1.0f, std::max(0.0f, v));
    return scene;
}

// ---- overlays --------------------------------------------------------------

struct OverlayResult {
    Tensor image; // cheat twin
    Tensor mask;  // [H,W], 1 where pixels differ from the clean frame
};

// Painted over occluded entities only: the cheat reveals what the player
// cannot see. minimal = small marker, medium = box outline + glyph block,
// full = filled recolored silhouette + health bar + weapon glyph.
inline OverlayResult apply_overlay(const Tensor& clean,
                                   const std::vector<EntityBox>& entities,
                                   OverlayLevel level, Style style) {
    if (clean.rank() != 3 || clean.shape[0] != 3)
        throw std::invalid_argument("apply_overlay: expected a [3,H,W] image");
    const int H = clean.shape[1], W = clean.shape[2];
    OverlayResult out;
    out.image = clean;
    out.mask = Tensor({H, W});

    const detail::Rgb marker = detail::marker_color(style);
    const detail::Rgb accent = detail::accent_color(style);
    auto put = [&](int y, int x, detail::Rgb c) {
        if (y < 0 || y >= H || x < 0 || x >= W) return;
        out.image.at(0, y, x) = c.r;
        out.image.at(1, y, x) = c.g;
        out.image.at(2, y, x) = c.b;
        out.mask.at(y, x) = 1.0f;
    };

    for (const EntityBox& e : entities) {
        if (!e.occluded) continue;
        const int cx = e.x + e.w / 2, cy = e.y + e.h / 2;
        switch (level) {
            case OverlayLevel::Minimal:
                // 5x5 block (style A) or diamond (style B)
                for (int dy = -2; dy <= 2; ++dy)
                    for (int dx = -2; dx <= 2; ++dx) {
                        if (style == Style::B && std::abs(dy) + std::abs(dx) > 2) continue;
                        put(cy + dy, cx + dx, marker);
                    }
                break;
            case OverlayLevel::Medium: {
                for (int x = e.x; x < e.x + e.w; ++x) {
                    put(e.y, x, marker);
                    put(e.y + e.h - 1, x, marker);
                }
                for (int y = e.y; y < e.y + e.h; ++y) {
                    put(y, e.x, marker);
                    put(y, e.x + e.w - 1, marker);
                }
                // short glyph block above the box (name-tag stand-in)
                for (int x = 0; x < std::max(4, e.w / 2); ++x)
                    put(e.y - 2, e.x + x, accent);
                break;
            }
            case OverlayLevel::Full: {
                // recolored filled silhouette
                EntityBox filled = e;
                detail::Rgb fill = marker;
                for (int y = filled.y; y < filled.y + filled.h; ++y)
                    for (int x = filled.x; x < filled.x + filled.w; ++x) put(y, x, fill);
                // health bar strip above
                int bar_w = std::max(6, e.w + 2);
                int green = (bar_w * 2) / 3;
                for (int x = 0; x < bar_w; ++x)
                    put(e.y - 3, e.x - 1 + x,
                        x < green ? detail::Rgb{0.1f, 0.95f, 0.1f}
                                  : detail::Rgb{0.9f, 0.1f, 0.1f});
                // weapon glyph block to the side
                for (int y = 0; y < 3; ++y)
                    for (int x = 0; x < 4; ++x) put(cy + y - 1, e.x + e.w + 2 + x, accent);
                break;
            }
        }
    }
    return out;
}

// ---- dataset build / load --------------------------------------------------

struct DatasetConfig {
    int width = 192;
    int height = 108;
    int train_count = 0, val_count = 0, test_count = 0; // records per split
    std::vector<OverlayLevel> levels{OverlayLevel::Minimal, OverlayLevel::Medium,
                                     OverlayLevel::Full};
    Style style = Style::A;
    std::uint64_t seed = 0;
    int n_entities = 4;
    float texture_density = 0.5f;
};

struct FrameRecord {
    std::string image_path; // relative to the dataset directory
    std::string mask_path;  // cheat records only
    int label = 0;
    std::string overlay_level; // cheat records only
    std::string split;
    std::uint64_t scene_id = 0;
    std::uint64_t pair_id = 0;
    std::uint64_t checksum = 0; // fnv1a64 of the image file bytes
};

struct DatasetManifest {
    int version = 1;
    DatasetConfig config;
    std::vector<FrameRecord> records;
    std::string root_dir; // set by the loader
};

namespace detail {

inline std::uint64_t file_checksum(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("checksum: cannot open " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    std::string bytes = ss.str();
    return fnv1a64(bytes.data(), bytes.size());
}

inline nlohmann::json config_to_json(const DatasetConfig& c) {
    nlohmann::json levels = nlohmann::json::array();
    for (auto l : c.levels) levels.push_back(to_string(l));
    return {{"width", c.width},
            {"height", c.height},
            {"train_count", c.train_count},
            {"val_count", c.val_count},
            {"test_count", c.test_count},
            {"levels", levels},
            {"style", to_string(c.style)},
            {"seed", c.seed},
            {"n_entities", c.n_entities},
            {"texture_density", c.texture_density}};
}

inline DatasetConfig config_from_json(const nlohmann::json& j) {
    DatasetConfig c;
    c.width = j.at("width").get<int>();
    c.height = j.at("height").get<int>();
    c.train_count = j.at("train_count").get<int>();
    c.val_count = j.at("val_count").get<int>();
    c.test_count = j.at("test_count").get<int>();
    c.levels.clear();
    for (const auto& l : j.at("levels")) c.levels.push_back(overlay_level_from_string(l));
    c.style = style_from_string(j.at("style").get<std::string>());
    c.seed = j.at("seed").get<std::uint64_t>();
    c.n_entities = j.at("n_entities").get<int>();
    c.texture_density = j.at("texture_density").get<float>();
    return c;
}

} // namespace detail

inline DatasetManifest build_dataset(const DatasetConfig& cfg, const std::string& out_dir) {
    if (cfg.train_count < 1 && cfg.val_count < 1 && cfg.test_count < 1)
        throw std::invalid_argument("build_dataset: no records requested");
    if (cfg.levels.empty()) throw std::invalid_argument("build_dataset: no overlay levels");
    if (cfg.n_entities < 1)
        throw std::invalid_argument("build_dataset: cheat frames need >= 1 entity");
    std::filesystem::create_directories(out_dir);

    DatasetManifest manifest;
    manifest.config = cfg;
    std::uint64_t scene_id = 0;
    int level_cursor = 0;

    auto emit_split = [&](const std::string& split, int count) {
        const int n_cheat = count / 2;
        const int n_clean = count - n_cheat;
        for (int i = 0; i < n_clean; ++i) {
            const bool paired = i < n_cheat;
            SceneSpec spec;
            spec.width = cfg.width;
            spec.height = cfg.height;
            spec.rng_seed = CounterRng::derive(cfg.seed, scene_id).next_u64();
            spec.n_entities = cfg.n_entities;
            spec.style = cfg.style;
            spec.texture_density = cfg.texture_density;
            Scene scene = render_scene(spec);

            std::string stem = split + "_" + std::to_string(scene_id);
            FrameRecord clean;
            clean.image_path = stem + "_clean.ppm";
            clean.label = 0;
            clean.split = split;
            clean.scene_id = scene_id;
            clean.pair_id = scene_id;
            write_ppm(out_dir + "/" + clean.image_path, scene.image);
            clean.checksum = detail::file_checksum(out_dir + "/" + clean.image_path);
            manifest.records.push_back(clean);

            if (paired) {
                OverlayLevel level = cfg.levels[static_cast<std::size_t>(level_cursor) %
                                                cfg.levels.size()];
                ++level_cursor;
                OverlayResult ov = apply_overlay(scene.image, scene.entities, level, cfg.style);
                FrameRecord cheat;
                cheat.image_path = stem + "_cheat.ppm";
                cheat.mask_path = stem + "_mask.pgm";
                cheat.label = 1;
                cheat.overlay_level = to_string(level);
                cheat.split = split;
                cheat.scene_id = scene_id;
                cheat.pair_id = scene_id;
                write_ppm(out_dir + "/" + cheat.image_path, ov.image);
                write_pgm(out_dir + "/" + cheat.mask_path, ov.mask);
                cheat.checksum = detail::file_checksum(out_dir + "/" + cheat.image_path);
                manifest.records.push_back(cheat);
            }
            ++scene_id;
        }
    };
    emit_split("train", cfg.train_count);
    emit_split("val", cfg.val_count);
    emit_split("test", cfg.test_count);

    nlohmann::json j;
    j["version"] = manifest.version;
    j["config"] = detail::config_to_json(cfg);
    nlohmann::json recs = nlohmann::json::array();
    for (const FrameRecord& r : manifest.records) {
        nlohmann::json rec{{"image_path", r.image_path}, {"label", r.label},
                           {"split", r.split},           {"scene_id", r.scene_id},
                           {"pair_id", r.pair_id},       {"checksum", r.checksum}};
        if (r.label == 1) {
            rec["overlay_level"] = r.overlay_level;
            rec["mask_path"] = r.mask_path;
        }
        recs.push_back(rec);
    }
    j["records"] = recs;
    std::ofstream mf(out_dir + "/manifest.json");
    if (!mf) throw std::runtime_error("build_dataset: cannot write manifest in " + out_dir);
    mf << j.dump(2) << "\n";
    manifest.root_dir = out_dir;
    return manifest;
}

struct LoadedFrame {
    Tensor image;
    int label = 0;
    FrameRecord meta;
};

inline DatasetManifest read_manifest(const std::string& manifest_path) {
    std::ifstream f(manifest_path);
    if (!f) throw std::runtime_error("manifest missing: " + manifest_path);
    nlohmann::json j;
    try {
        f >> j;
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error("malformed manifest " + manifest_path + ": " + e.what());
    }
    DatasetManifest m;
    try {
        m.version = j.at("version").get<int>();
        m.config = detail::config_from_json(j.at("config"));
        for (const auto& rec : j.at("records")) {
            FrameRecord r;
            r.image_path = rec.at("image_path").get<std::string>();
            r.label = rec.at("label").get<int>();
            r.split = rec.at("split").get<std::string>();
            r.scene_id = rec.at("scene_id").get<std::uint64_t>();
            r.pair_id = rec.at("pair_id").get<std::uint64_t>();
            r.checksum = rec.at("checksum").get<std::uint64_t>();
            if (r.label == 1) {
                r.overlay_level = rec.at("overlay_level").get<std::string>();
                r.mask_path = rec.at("mask_path").get<std::string>();
            }
            m.records.push_back(r);
        }
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error("malformed manifest " + manifest_path + ": " + e.what());
    }
    m.root_dir = std::filesystem::path(manifest_path).parent_path().string();
    if (m.root_dir.empty()) m.root_dir = ".";
    return m;
}

inline std::vector<LoadedFrame> load_dataset(const std::string& manifest_path,
                                             const std::string& split = "") {
    DatasetManifest m = read_manifest(manifest_path);
    std::vector<LoadedFrame> out;
    for (const FrameRecord& r : m.records) {
        if (!split.empty() && r.split != split) continue;
        std::string path = m.root_dir + "/" + r.image_path;
        if (!std::filesystem::exists(path))
            throw std::runtime_error("image file missing: " + path);
        if (detail::file_checksum(path) != r.checksum)
            throw std::runtime_error("checksum mismatch: " + path);
        LoadedFrame lf;
        lf.image = read_ppm(path);
        lf.label = r.label;
        lf.meta = r;
        out.push_back(std::move(lf));
    }
    return out;
}

// Secondary layout: a directory with clean/ and cheat/ subfolders of PPM
// files, labels taken from the folder names.
inline std::vector<LoadedFrame> load_image_folder(const std::string& dir) {
    std::vector<LoadedFrame> out;
    for (const auto& [sub, label] : {std::pair{"clean", 0}, std::pair{"cheat", 1}}) {
        std::filesystem::path p = std::filesystem::path(dir) / sub;
        if (!std::filesystem::is_directory(p)) continue;
        std::vector<std::string> files;
        for (const auto& entry : std::filesystem::directory_iterator(p))
            if (entry.path().extension() == ".ppm") files.push_back(entry.path().string());
        std::sort(files.begin(), files.end());
        for (const std::string& f : files) {
            LoadedFrame lf;
            lf.image = read_ppm(f);
            lf.label = label;
            lf.meta.image_path = f;
            lf.meta.label = label;
            out.push_back(std::move(lf));
        }
    }
    if (out.empty())
        throw std::runtime_error("image folder: no clean/ or cheat/ PPM files under " + dir);
    return out;
}

} // namespace certwatch
